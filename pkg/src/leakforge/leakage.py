"""Volume leakage, volume-rank query recovery and Jaccard@k scoring.

The server only learns how many documents match each query token. The
attacker ranks its own keyword volumes, ranks the observed client volumes,
and pairs them rank for rank.
"""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

__all__ = [
    "VolumeProfile",
    "RankedVocabulary",
    "RecoveryResult",
    "volume_profile",
    "rank_vocabulary",
    "top_k",
    "jaccard",
    "rank_match_attack",
    "export_zipf_overlay",
    "ZIPF_COLUMNS",
]

log = logging.getLogger(__name__)

ZIPF_COLUMNS = ("rank", "stem", "client_count", "client_relfreq", "attacker_count", "attacker_relfreq")


@dataclass(frozen=True)
class VolumeProfile:
    counts: dict[str, int]
    n_docs: int

    def __len__(self):
        return len(self.counts)


class RankedVocabulary(list):
    """``[(stem, count), ...]`` in rank order, remembering the profiled doc count."""

    def __init__(self, items=(), n_docs: int = 0):
        super().__init__(items)
        self.n_docs = n_docs


@dataclass
class RecoveryResult:
    matching: dict[int, str]
    jaccard_at_k: Fraction
    k: int
    accuracy: Fraction
    client_top: list[str] = field(default_factory=list)
    attacker_top: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "jaccard_at_k": float(self.jaccard_at_k),
            "accuracy": float(self.accuracy),
            "matching": {str(r): s for r, s in sorted(self.matching.items())},
            "client_top": self.client_top,
            "attacker_top": self.attacker_top,
            "warnings": self.warnings,
        }


def volume_profile(docs: Iterable) -> VolumeProfile:
    """Document frequency of every stem. ``docs`` holds KeywordDocs or stem sets."""
    counts: Counter = Counter()
    n = 0
    for d in docs:
        stems = getattr(d, "stems", d)
        counts.update(set(stems))
        n += 1
    return VolumeProfile(dict(counts), n)


def rank_vocabulary(profile: VolumeProfile) -> RankedVocabulary:
    """Stems by count descending, ties broken by stem ascending."""
    return RankedVocabulary(sorted(profile.counts.items(), key=lambda kv: (-kv[1], kv[0])), profile.n_docs)


def top_k(profile: VolumeProfile, k: int) -> list[str]:
    return [s for s, _ in rank_vocabulary(profile)[:k]]


def jaccard(a, b) -> Fraction:
    """|a & b| / |a | b|, with J(empty, empty) = 1."""
    a, b = set(a), set(b)
    union = len(a | b)
    if union == 0:
        return Fraction(1)
    return Fraction(len(a & b), union)


def rank_match_attack(client_profile: VolumeProfile, attacker_profile: VolumeProfile, k: int = 100) -> RecoveryResult:
    """Pair the i-th most voluminous client token with the attacker's i-th stem.

    The headline score is the Jaccard similarity of the two top-k stem sets.
    ``accuracy`` is the share of client ranks whose paired attacker stem is
    the true client stem at that rank; it is a diagnostic only.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    client = top_k(client_profile, k)
    attacker = top_k(attacker_profile, k)
    warnings = []
    if not client or not attacker:
        warnings.append("empty profile")
        log.warning("rank_match_attack: %s profile is empty", "client" if not client else "attacker")
        return RecoveryResult({}, Fraction(0), k, Fraction(0), client, attacker, warnings)
    n = min(k, len(client), len(attacker))
    matching = {i + 1: attacker[i] for i in range(n)}
    correct = sum(1 for i in range(n) if attacker[i] == client[i])
    return RecoveryResult(
        matching=matching,
        jaccard_at_k=jaccard(client, attacker),
        k=k,
        accuracy=Fraction(correct, len(client)),
        client_top=client,
        attacker_top=attacker,
        warnings=warnings,
    )


def export_zipf_overlay(client: RankedVocabulary, attacker: VolumeProfile, top_n: int = 200) -> list[dict]:
    """Rows for a client-rank bar chart with the attacker's volume alongside."""
    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    rows = []
    client_n_docs = client.n_docs
    for rank, (stem, count) in enumerate(client[:top_n], 1):
        a = attacker.counts.get(stem, 0)
        rows.append({
            "rank": rank,
            "stem": stem,
            "client_count": count,
            "client_relfreq": count / client_n_docs if client_n_docs else 0.0,
            "attacker_count": a,
            "attacker_relfreq": a / attacker.n_docs if attacker.n_docs else 0.0,
        })
    return rows
