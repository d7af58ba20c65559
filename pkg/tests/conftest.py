import json
import shutil
from pathlib import Path

import httpx
import pytest

from leakforge.corpus import ingest, save_corpus

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def fixture_corpus():
    """The bundled 200-message maildir, ingested once per session."""
    return ingest(FIXTURES / "maildir")


@pytest.fixture
def workdir(tmp_path, fixture_corpus):
    """A scratch directory holding the ingested fixture corpus and an experiment config."""
    save_corpus(fixture_corpus, tmp_path / "corpus.ndjson")
    shutil.copy(FIXTURES / "experiment.toml", tmp_path / "experiment.toml")
    return tmp_path


class FakeChatServer:
    """httpx transport answering chat-completion requests by echoing prompt examples."""

    def __init__(self, status: int = 200, body=None):
        self.status = status
        self.body = body
        self.requests: list[httpx.Request] = []

    def __call__(self, request: httpx.Request) -> httpx.Response:
        self.requests.append(request)
        if self.status != 200:
            return httpx.Response(self.status, json={"error": "nope"})
        if self.body is not None:
            return httpx.Response(200, json=self.body)
        payload = json.loads(request.content)
        prompt = payload["messages"][0]["content"]
        examples = [l.split(": ", 1)[1] for l in prompt.splitlines() if l.startswith("Example ")]
        content = "###".join(examples)
        return httpx.Response(200, json={
            "choices": [{"message": {"role": "assistant", "content": content}}],
            "usage": {"prompt_tokens": len(prompt.split()), "completion_tokens": len(content.split())},
        })

    @property
    def transport(self) -> httpx.MockTransport:
        return httpx.MockTransport(self)


@pytest.fixture
def chat_server():
    return FakeChatServer()


@pytest.fixture
def api_key(monkeypatch):
    monkeypatch.setenv("LEAKFORGE_API_KEY", "sk-test")
    return "sk-test"


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, title: str, ok: bool, detail: str = "") -> bool:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}" + (f"  ({detail})" if detail else "")
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
