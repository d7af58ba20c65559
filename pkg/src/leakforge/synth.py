"""Seeded Zipfian text corpora for desk-scale experiments and fixtures."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .corpus import Document
from .keywords import MAX_WORD_LEN, MIN_WORD_LEN, default_stopwords
from .porter import porter_stem
from .rng import stream

__all__ = ["make_vocabulary", "zipf_weights", "zipf_corpus", "write_maildir"]

_ONSETS = ["b", "c", "d", "f", "g", "h", "k", "l", "m", "n", "p", "r", "s", "t", "v", "w", "br", "cl",
           "dr", "gr", "pl", "st", "tr", "sh", "ch"]
_NUCLEI = ["a", "e", "i", "o", "u", "ai", "ea", "ou"]
_CODAS = ["", "", "n", "r", "l", "m", "t", "sk", "nd", "rt"]


def make_vocabulary(size: int, seed: int = 0) -> list[str]:
    """``size`` pronounceable pseudo-words whose Porter stems are all distinct.

    Every word passes the keyword filters (alphabetic, not a stopword,
    length 3..20), so a corpus over this vocabulary has exactly ``size``
    possible stems.
    """
    rng = stream(seed, "vocabulary")
    stops = default_stopwords()
    words, stems = [], set()
    while len(words) < size:
        syllables = int(rng.integers(1, 4))
        w = "".join(
            _ONSETS[rng.integers(len(_ONSETS))] + _NUCLEI[rng.integers(len(_NUCLEI))]
            for _ in range(syllables)
        ) + _CODAS[rng.integers(len(_CODAS))]
        if not MIN_WORD_LEN <= len(w) <= MAX_WORD_LEN or w in stops:
            continue
        s = porter_stem(w)
        if s in stems:
            continue
        stems.add(s)
        words.append(w)
    return words


def zipf_weights(size: int, exponent: float = 1.0) -> np.ndarray:
    w = 1.0 / np.arange(1, size + 1) ** exponent
    return w / w.sum()


def zipf_corpus(n_docs: int = 2000, vocab_size: int = 500, exponent: float = 1.0,
                mean_length: int = 80, seed: int = 0, prefix: str = "zipf") -> list[Document]:
    """Documents of i.i.d. words drawn from a Zipf law over a pseudo-word vocabulary.

    Word ranks are a random permutation of the vocabulary so that frequency
    is unrelated to alphabetical order. Lengths are Poisson(mean_length),
    at least 3 words.
    """
    vocab = make_vocabulary(vocab_size, seed)
    rng = stream(seed, "zipf-corpus")
    ranked = [vocab[i] for i in rng.permutation(vocab_size)]
    p = zipf_weights(vocab_size, exponent)
    width = len(str(n_docs))
    docs = []
    for i in range(n_docs):
        length = max(3, int(rng.poisson(mean_length)))
        idx = rng.choice(vocab_size, size=length, p=p)
        docs.append(Document(f"{prefix}/{i:0{width}d}", " ".join(ranked[j] for j in idx), "real"))
    return docs


def write_maildir(root, docs: list[Document], n_users: int = 4, inbox_per_user: int = 2,
                  seed: int = 0) -> Path:
    """Lay documents out as an Enron-style maildir with RFC-822 headers.

    Every document lands in some ``<user>/_sent_items/`` folder; each user
    also gets ``inbox_per_user`` decoy messages that the default filter
    must skip. Some messages carry a quoted ``-----Original Message-----``
    header block.
    """
    root = Path(root)
    rng = stream(seed, "maildir")
    users = [f"user{u:02d}-x" for u in range(n_users)]
    for u in users:
        (root / u / "_sent_items").mkdir(parents=True, exist_ok=True)
        (root / u / "inbox").mkdir(parents=True, exist_ok=True)
        for k in range(inbox_per_user):
            (root / u / "inbox" / f"{k + 1}.").write_text(
                f"From: someone@example.com\nTo: {u}@enron.com\nSubject: inbox {k}\n\ninbox only message {k}\n",
                encoding="utf-8")
    for i, d in enumerate(docs):
        u = users[i % n_users]
        header = (
            f"Message-ID: <{1000 + i}.JavaMail.evans@thyme>\n"
            f"Date: Mon, {1 + i % 28} Oct 2001 09:{i % 60:02d}:00 -0700 (PDT)\n"
            f"From: {u}@enron.com\n"
            f"To: colleague{i % 7}@enron.com\n"
            f"Subject: note {i}\n"
            "Mime-Version: 1.0\n"
            "Content-Type: text/plain; charset=us-ascii\n"
            f"X-Folder: \\{u}\\Sent Items\n"
        )
        body = d.body
        if rng.random() < 0.25:
            body += (
                "\n\n -----Original Message-----\n"
                "From: \tColleague, Some \n"
                f"Sent:\tFriday, October {1 + i % 28}, 2001 2:07 PM\n"
                f"To:\t{u}@enron.com\n"
                "Subject:\tRE: note\n\n"
                "thanks"
            )
        (root / u / "_sent_items" / f"{i // n_users + 1}.").write_text(header + "\n" + body + "\n", encoding="utf-8")
    return root
