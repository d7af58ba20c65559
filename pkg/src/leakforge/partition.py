"""Client / attacker / seed split of a corpus."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

from .errors import ConfigurationError
from .rng import stream

__all__ = ["Partition", "split_corpus", "select_seed", "subsample_client", "seed_size"]


@dataclass(frozen=True)
class Partition:
    client_ids: frozenset[str]
    attacker_pool_ids: frozenset[str]
    seed_ids: frozenset[str] = field(default_factory=frozenset)
    rng_seed: int = 0
    seed_fraction: float | None = None

    def check(self, all_ids=None) -> None:
        """Raise AssertionError if a partition invariant is violated."""
        assert not (self.client_ids & self.attacker_pool_ids)
        if all_ids is not None:
            assert self.client_ids | self.attacker_pool_ids == set(all_ids)
        assert self.seed_ids <= self.attacker_pool_ids

    def to_json(self) -> dict:
        return {
            "client_ids": sorted(self.client_ids),
            "attacker_pool_ids": sorted(self.attacker_pool_ids),
            "seed_ids": sorted(self.seed_ids),
            "rng_seed": self.rng_seed,
            "seed_fraction": self.seed_fraction,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Partition":
        return cls(
            frozenset(obj["client_ids"]),
            frozenset(obj["attacker_pool_ids"]),
            frozenset(obj.get("seed_ids", ())),
            obj.get("rng_seed", 0),
            obj.get("seed_fraction"),
        )


def _ids(corpus) -> list[str]:
    ids = sorted(getattr(d, "doc_id", d) for d in corpus)
    if len(set(ids)) != len(ids):
        raise ConfigurationError("corpus contains duplicate doc_ids")
    return ids


def split_corpus(corpus, rng_seed: int) -> Partition:
    """Uniformly random halves; the client gets the odd document out.

    ``corpus`` may be any iterable of objects with ``doc_id`` or of id strings.
    """
    ids = _ids(corpus)
    if len(ids) < 2:
        raise ConfigurationError(f"need at least 2 documents to split, got {len(ids)}")
    order = stream(rng_seed, "split").permutation(len(ids))
    n_client = math.ceil(len(ids) / 2)
    client = frozenset(ids[i] for i in order[:n_client])
    attacker = frozenset(ids[i] for i in order[n_client:])
    return Partition(client, attacker, frozenset(), rng_seed, None)


def seed_size(pool_size: int, seed_fraction) -> int:
    # round half up, computed exactly
    return math.floor(Fraction(str(seed_fraction)) * pool_size + Fraction(1, 2))


def select_seed(partition: Partition, seed_fraction: float, rng_seed: int | None = None,
                n_seed: int | None = None) -> Partition:
    """Sample the leaked seed subset from the attacker pool.

    ``n_seed`` overrides the fraction-derived size (used when an experiment
    fixes the attacker's real document count directly).
    """
    if not 0 < seed_fraction <= 1:
        raise ConfigurationError(f"seed_fraction must be in (0, 1], got {seed_fraction}")
    rng_seed = partition.rng_seed if rng_seed is None else rng_seed
    pool = sorted(partition.attacker_pool_ids)
    size = seed_size(len(pool), seed_fraction) if n_seed is None else n_seed
    if size <= 0:
        raise ConfigurationError(
            f"seed subset is empty (fraction {seed_fraction} of pool {len(pool)})")
    if size > len(pool):
        raise ConfigurationError(f"requested {size} seed documents but the pool has {len(pool)}")
    picked = stream(rng_seed, "seed").choice(len(pool), size=size, replace=False)
    seeds = frozenset(pool[i] for i in picked)
    return replace(partition, seed_ids=seeds, rng_seed=rng_seed, seed_fraction=seed_fraction)


def subsample_client(partition: Partition, client_size: int | None, rng_seed: int | None = None) -> Partition:
    if client_size is None or client_size >= len(partition.client_ids):
        if client_size is not None and client_size > len(partition.client_ids):
            raise ConfigurationError(
                f"client_size {client_size} exceeds the client half ({len(partition.client_ids)})")
        return partition
    if client_size < 1:
        raise ConfigurationError("client_size must be positive")
    rng_seed = partition.rng_seed if rng_seed is None else rng_seed
    ids = sorted(partition.client_ids)
    picked = stream(rng_seed, "client").choice(len(ids), size=client_size, replace=False)
    return replace(partition, client_ids=frozenset(ids[i] for i in picked))
