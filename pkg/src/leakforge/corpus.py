"""Email corpus discovery and header stripping."""
from __future__ import annotations

import fnmatch
import logging
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .errors import ConfigurationError, DataError
from .fileio import read_ndjson, write_json, write_ndjson

__all__ = [
    "RawEmail",
    "Document",
    "Corpus",
    "DEFAULT_FOLDER_FILTER",
    "discover_emails",
    "sanitize",
    "build_corpus",
    "ingest",
    "load_corpus",
    "save_corpus",
]

log = logging.getLogger(__name__)

DEFAULT_FOLDER_FILTER = "*/_sent_items/*"

_HEADER_LINE = re.compile(r"^[A-Za-z][A-Za-z0-9-]*:")
_KNOWN_FIELDS = {
    "message-id", "date", "from", "to", "cc", "bcc", "subject", "mime-version",
    "content-type", "content-transfer-encoding", "x-from", "x-to", "x-cc",
    "x-bcc", "x-folder", "x-origin", "x-filename", "sent", "reply-to",
    "return-path", "received",
}
_QUOTE_BANNERS = ("-----Original Message-----", "---------------------- Forwarded")
_SIGNATURE_DELIM = re.compile(r"^-- ?$")


@dataclass(frozen=True)
class RawEmail:
    source_path: str
    raw_bytes: bytes


@dataclass(frozen=True)
class Document:
    doc_id: str
    body: str
    origin: str = "real"

    def to_record(self) -> dict:
        return {"doc_id": self.doc_id, "body": self.body, "origin": self.origin}

    @classmethod
    def from_record(cls, rec: dict) -> "Document":
        return cls(rec["doc_id"], rec["body"], rec.get("origin", "real"))


@dataclass
class Corpus:
    documents: list[Document]
    manifest: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.documents)

    def __iter__(self):
        return iter(self.documents)

    def by_id(self) -> dict[str, Document]:
        return {d.doc_id: d for d in self.documents}


def discover_emails(root, folder_filter: str = DEFAULT_FOLDER_FILTER, skipped: list | None = None) -> list[RawEmail]:
    """Every regular file under ``root`` whose relative path matches the filter.

    Files that cannot be read are appended to ``skipped`` (when given) and
    otherwise ignored.
    """
    root = Path(root)
    if not root.is_dir():
        raise ConfigurationError(f"corpus root {str(root)!r} does not exist or is not a directory")
    found = []
    for dirpath, _dirnames, filenames in os.walk(root):
        for name in filenames:
            full = Path(dirpath) / name
            rel = full.relative_to(root).as_posix()
            if not fnmatch.fnmatchcase(rel, folder_filter) or not full.is_file():
                continue
            try:
                data = full.read_bytes()
            except OSError as exc:
                log.warning("skipping unreadable file %s: %s", rel, exc)
                if skipped is not None:
                    skipped.append(rel)
                continue
            found.append(RawEmail(rel, data))
    found.sort(key=lambda r: r.source_path)
    return found


def _looks_like_headers(block: list[str]) -> bool:
    seen_known = False
    for i, line in enumerate(block):
        if line[:1] in (" ", "\t") and i > 0:
            continue
        if not _HEADER_LINE.match(line):
            return False
        if line.split(":", 1)[0].lower() in _KNOWN_FIELDS:
            seen_known = True
    return seen_known


def _strip_quote_blocks(lines: list[str]) -> list[str]:
    out = []
    i = 0
    while i < len(lines):
        if any(b in lines[i] for b in _QUOTE_BANNERS):
            i += 1
            # a forwarding banner is usually followed by blank lines and then
            # the forwarded header block; drop both
            while i < len(lines) and not lines[i].strip():
                i += 1
            block_start = i
            while i < len(lines) and lines[i].strip():
                i += 1
            block = lines[block_start:i]
            if not _looks_like_quoted_header(block):
                i = block_start
            continue
        out.append(lines[i])
        i += 1
    return out


_QUOTED_HEADER = re.compile(r"^\s*(from|to|cc|bcc|subject|sent|date)\s*:", re.IGNORECASE)
_ON_DATE = re.compile(r"\bon \d{1,2}/\d{1,2}/\d{2,4}\b")


def _looks_like_quoted_header(block: list[str]) -> bool:
    return any(_QUOTED_HEADER.match(l) or _ON_DATE.search(l) for l in block)


def _strip_signature(lines: list[str]) -> list[str]:
    for i, line in enumerate(lines):
        if _SIGNATURE_DELIM.match(line):
            return lines[:i]
    return lines


def sanitize_text(text: str, strip_signature: bool = False) -> tuple[str, bool]:
    """Return ``(body, had_header)`` for already-decoded message text."""
    lines = text.replace("\r\n", "\n").replace("\r", "\n").split("\n")
    had_header = False
    try:
        blank = next(i for i, l in enumerate(lines) if not l.strip())
    except StopIteration:
        blank = None
    if blank is not None and blank > 0 and _looks_like_headers(lines[:blank]):
        lines = lines[blank + 1:]
        had_header = True
    lines = _strip_quote_blocks(lines)
    if strip_signature:
        lines = _strip_signature(lines)
    body = "\n".join(l.rstrip() for l in lines).strip()
    return body, had_header


def doc_id_for(source_path: str) -> str:
    return source_path.replace(os.sep, "/").replace("\\", "/")


def sanitize(raw: RawEmail, strip_signature: bool = False, flags: list | None = None) -> Document:
    """Strip the header block and quoted-reply headers from one email.

    When the message has no recognisable header block the whole text is
    kept as the body and the source path is appended to ``flags``.
    """
    text = raw.raw_bytes.decode("utf-8", errors="replace")
    body, had_header = sanitize_text(text, strip_signature)
    if not had_header and flags is not None:
        flags.append(raw.source_path)
    return Document(doc_id_for(raw.source_path), body, "real")


def build_corpus(docs: Iterable[Document], manifest: dict | None = None) -> Corpus:
    docs = sorted(docs, key=lambda d: d.doc_id)
    kept = []
    seen_ids = set()
    seen_bodies = set()
    n_deduped = 0
    for d in docs:
        if d.doc_id in seen_ids:
            raise DataError(f"duplicate doc_id {d.doc_id!r}")
        seen_ids.add(d.doc_id)
        if d.body in seen_bodies:
            n_deduped += 1
            continue
        seen_bodies.add(d.body)
        kept.append(d)
    info = dict(manifest or {})
    info.update(n_deduped=n_deduped, n_documents=len(kept))
    return Corpus(kept, info)


def ingest(root, folder_filter: str = DEFAULT_FOLDER_FILTER, strip_signature: bool = False) -> Corpus:
    skipped: list[str] = []
    no_header: list[str] = []
    raws = discover_emails(root, folder_filter, skipped)
    docs = [sanitize(r, strip_signature, no_header) for r in raws]
    manifest = {
        "source_root": str(root),
        "folder_filter": folder_filter,
        "n_discovered": len(raws) + len(skipped),
        "n_skipped": len(skipped),
        "n_no_header": len(no_header),
    }
    return build_corpus(docs, manifest)


def save_corpus(corpus: Corpus, path) -> None:
    write_ndjson(path, (d.to_record() for d in corpus.documents))
    if corpus.manifest:
        write_json(str(path) + ".manifest.json", corpus.manifest)


def load_corpus(path) -> Corpus:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"corpus file {str(path)!r} not found")
    docs = [Document.from_record(r) for r in read_ndjson(path)]
    ids = [d.doc_id for d in docs]
    if len(set(ids)) != len(ids):
        raise DataError(f"{path}: duplicate doc_id in corpus file")
    return Corpus(sorted(docs, key=lambda d: d.doc_id), {"source": str(path), "n_documents": len(docs)})
