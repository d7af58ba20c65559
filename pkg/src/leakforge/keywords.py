"""Reduce documents to sets of keyword stems."""
from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from typing import Iterable

from .porter import porter_stem

__all__ = [
    "KeywordDoc",
    "StopwordList",
    "default_stopwords",
    "tokenize",
    "filter_and_normalize",
    "to_keyword_doc",
    "to_keyword_docs",
]

_ALPHA = re.compile(r"^[a-z]+$")
_NON_ALPHA_RUN = re.compile(r"[^a-z]+")

MIN_WORD_LEN = 3
MAX_WORD_LEN = 20


@dataclass(frozen=True)
class KeywordDoc:
    doc_id: str
    stems: frozenset[str]

    def to_record(self) -> dict:
        return {"doc_id": self.doc_id, "stems": sorted(self.stems)}

    @classmethod
    def from_record(cls, rec: dict) -> "KeywordDoc":
        return cls(rec["doc_id"], frozenset(rec["stems"]))


@dataclass(frozen=True)
class StopwordList:
    words: frozenset[str]
    version_tag: str

    def __post_init__(self):
        if not self.words:
            raise ValueError("stopword list is empty")
        if any(w != w.lower() for w in self.words):
            raise ValueError("stopwords must be lowercase")

    def __contains__(self, word: str) -> bool:
        return word in self.words


_DEFAULT: StopwordList | None = None


def default_stopwords() -> StopwordList:
    """The bundled 179-word English list."""
    global _DEFAULT
    if _DEFAULT is None:
        text = resources.files("leakforge").joinpath("data/stopwords_en.txt").read_text("utf-8")
        lines = text.splitlines()
        tag = lines[0].lstrip("#").strip()
        words = frozenset(w.strip() for w in lines[1:] if w.strip())
        _DEFAULT = StopwordList(words, tag)
    return _DEFAULT


def tokenize(body: str) -> list[str]:
    return body.split()


def filter_and_normalize(
    words: Iterable[str],
    stopwords: StopwordList | None = None,
    trim_punctuation: bool = False,
) -> list[str]:
    """Lowercase, drop non-alphabetic words, stopwords, and words outside [3, 20].

    With ``trim_punctuation`` a word is cut down to its alphabetic runs
    instead of being discarded ("dog." -> "dog"); off by default.
    """
    if stopwords is None:
        stopwords = default_stopwords()
    out = []
    for w in words:
        w = w.lower()
        if trim_punctuation:
            candidates = [p for p in _NON_ALPHA_RUN.split(w) if p]
        else:
            candidates = [w] if _ALPHA.match(w) else []
        for c in candidates:
            if c in stopwords:
                continue
            if MIN_WORD_LEN <= len(c) <= MAX_WORD_LEN:
                out.append(c)
    return out


def to_keyword_doc(doc, stopwords: StopwordList | None = None, trim_punctuation: bool = False) -> KeywordDoc:
    """Accepts a Document or a plain string (doc_id is then empty)."""
    if isinstance(doc, str):
        doc_id, body = "", doc
    else:
        doc_id, body = doc.doc_id, doc.body
    words = filter_and_normalize(tokenize(body), stopwords, trim_punctuation)
    return KeywordDoc(doc_id, frozenset(porter_stem(w) for w in words))


def to_keyword_docs(docs, stopwords: StopwordList | None = None, trim_punctuation: bool = False) -> list[KeywordDoc]:
    stopwords = stopwords or default_stopwords()
    return [to_keyword_doc(d, stopwords, trim_punctuation) for d in docs]
