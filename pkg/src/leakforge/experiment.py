"""Repeated client/attacker experiments over the none / random / clustered arms."""
from __future__ import annotations

import csv
import hashlib
import io
import logging
import math
import statistics
from dataclasses import dataclass, field, fields
from fractions import Fraction
from pathlib import Path

from . import __version__
from .augment import STRATEGIES, AugmentationPlan, augment
from .corpus import load_corpus
from .errors import ConfigurationError, LeakforgeError
from .keywords import default_stopwords, to_keyword_docs
from .leakage import rank_match_attack, volume_profile
from .llm import GeneratorConfig, ResponseCache, TextGenerator
from .partition import select_seed, split_corpus, subsample_client
from .rng import derive_seed
from .stats import compare_arms

__all__ = [
    "ExperimentConfig",
    "load_config",
    "run_experiment",
    "sweep",
    "SWEEP_COLUMNS",
    "sweep_rows",
    "sweep_csv",
    "report_csv",
]

log = logging.getLogger(__name__)

SWEEP_COLUMNS = ("model", "attacker_real", "attacker_synthetic", "client", "none", "random_enhanced",
                 "clustered_enhanced")
_ARM_COLUMN = {"none": "none", "random": "random_enhanced", "clustered": "clustered_enhanced"}


def parse_ratio(value) -> Fraction:
    """Synthetic documents per real document, from ``"1:4"`` or a number."""
    if isinstance(value, str) and ":" in value:
        real, syn = value.split(":", 1)
        real, syn = Fraction(real.strip()), Fraction(syn.strip())
        if real <= 0:
            raise ConfigurationError(f"bad ratio {value!r}")
        return syn / real
    ratio = Fraction(str(value))
    if ratio < 0:
        raise ConfigurationError(f"bad ratio {value!r}")
    return ratio


@dataclass(frozen=True)
class ExperimentConfig:
    corpus_path: str
    seed_fraction: float = 0.2
    client_size: int | None = None
    attacker_real_size: int | None = None
    synthetic_ratio: str = "1:4"
    arms: tuple[str, ...] = ("none", "random", "clustered")
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    repeats: int = 5
    rng_seed: int = 0
    k: int = 100
    resample_split: bool = True
    examples_per_prompt: int = 3
    generations_per_prompt: int = 8
    vocab_cap: int = 3000
    alpha: float = 0.05
    cache_dir: str | None = None
    # directory relative paths resolve against; not part of the report
    base_dir: str | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "arms", tuple(self.arms))
        bad = [a for a in self.arms if a not in STRATEGIES]
        if bad or not self.arms:
            raise ConfigurationError(f"arms must be a non-empty subset of {STRATEGIES}, got {list(self.arms)}")
        if self.repeats < 1:
            raise ConfigurationError("repeats must be >= 1")
        if self.k < 1:
            raise ConfigurationError("k must be >= 1")
        parse_ratio(self.synthetic_ratio)

    def synthetic_target(self, n_real: int) -> int:
        exact = parse_ratio(self.synthetic_ratio) * n_real
        return math.floor(exact + Fraction(1, 2))

    def resolve(self, path: str | None) -> str | None:
        if path is None or self.base_dir is None or Path(path).is_absolute():
            return path
        return str(Path(self.base_dir) / path)

    def to_json(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self) if f.name not in ("generator", "base_dir")}
        out["arms"] = list(self.arms)
        out["generator"] = self.generator.to_json()
        return out


_GEN_PREFIX = "generator_"


def config_from_mapping(data: dict, base_dir=None) -> ExperimentConfig:
    """Build a config from a flat mapping; generator fields use a ``generator_`` prefix."""
    data = dict(data)
    known = {f.name for f in fields(ExperimentConfig)} - {"generator", "base_dir"}
    gen_known = {f.name for f in fields(GeneratorConfig)}
    gen = {}
    for key in [k for k in data if k.startswith(_GEN_PREFIX)]:
        name = key[len(_GEN_PREFIX):]
        if name not in gen_known:
            raise ConfigurationError(f"unknown generator option {key!r}")
        gen[name] = data.pop(key)
    unknown = set(data) - known
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    if "corpus_path" not in data:
        raise ConfigurationError("config is missing corpus_path")
    if base_dir is not None:
        data["base_dir"] = str(base_dir)
    if "synthetic_ratio" in data:
        data["synthetic_ratio"] = str(data["synthetic_ratio"])
    try:
        return ExperimentConfig(generator=GeneratorConfig(**gen), **data)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file {str(path)!r} not found")
    try:
        data = tomllib.loads(path.read_text("utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc
    return config_from_mapping(data, base_dir=path.parent)


def stem_set_hash(keyword_docs) -> str:
    h = hashlib.sha256()
    for kd in sorted(keyword_docs, key=lambda d: d.doc_id):
        h.update(kd.doc_id.encode())
        h.update(b"\x00")
        h.update(" ".join(sorted(kd.stems)).encode())
        h.update(b"\n")
    return h.hexdigest()


def _sd(values) -> float:
    return statistics.stdev(values) if len(values) > 1 else 0.0


def run_experiment(config: ExperimentConfig, generator_factory=None, corpus=None) -> dict:
    """Run every repeat of every arm and return the report dict.

    Arms within one repeat share the same partition and seed set. A
    failing arm stops the run; completed repeats are kept and the report
    status becomes ``"partial"``.

    ``generator_factory(GeneratorConfig) -> TextGenerator`` lets callers
    inject a transport or a custom generator.
    """
    corpus = corpus if corpus is not None else load_corpus(config.resolve(config.corpus_path))
    stopwords = default_stopwords()
    docs_by_id = corpus.by_id()
    keywords = {kd.doc_id: kd for kd in to_keyword_docs(corpus.documents, stopwords)}
    cache = ResponseCache(config.resolve(config.cache_dir)) if config.cache_dir else None
    if generator_factory is None:
        def generator_factory(gen_config):
            return TextGenerator(gen_config, cache=cache)

    repeats = []
    status, error = "complete", None
    network_calls = cache_hits = 0
    for r in range(config.repeats):
        repeat_seed = derive_seed(config.rng_seed, "repeat", r)
        split_seed = repeat_seed if config.resample_split else config.rng_seed
        part = split_corpus(corpus.documents, split_seed)
        part = subsample_client(part, config.client_size, split_seed)
        part = select_seed(part, config.seed_fraction, split_seed, n_seed=config.attacker_real_size)
        seeds = [docs_by_id[i] for i in sorted(part.seed_ids)]
        target = config.synthetic_target(len(seeds))
        entry = {
            "index": r,
            "seed": repeat_seed,
            "n_client": len(part.client_ids),
            "n_seed": len(seeds),
            "target_synthetic": target,
            "arms": {},
        }
        try:
            for arm in config.arms:
                client_kds = [keywords[i] for i in sorted(part.client_ids)]
                client_profile = volume_profile(client_kds)
                plan = AugmentationPlan(
                    strategy=arm,
                    target_synthetic_count=0 if arm == "none" else target,
                    examples_per_prompt=config.examples_per_prompt,
                    generations_per_prompt=config.generations_per_prompt,
                    rng_seed=derive_seed(repeat_seed, "augment"),
                    vocab_cap=config.vocab_cap,
                )
                generator = generator_factory(config.generator.with_seed(derive_seed(repeat_seed, arm, "generator")))
                try:
                    result = augment(seeds, plan, generator, stopwords)
                finally:
                    network_calls += getattr(generator, "network_calls", 0)
                    cache_hits += getattr(generator, "cache_hits", 0)
                    if hasattr(generator, "close"):
                        generator.close()
                attacker_kds = [keywords[d.doc_id] for d in seeds]
                attacker_kds += to_keyword_docs(result.synthetic, stopwords)
                rec = rank_match_attack(client_profile, volume_profile(attacker_kds), config.k)
                entry["arms"][arm] = {
                    "jaccard": float(rec.jaccard_at_k),
                    "accuracy": float(rec.accuracy),
                    "n_attacker_docs": len(attacker_kds),
                    "n_synthetic": len(result.synthetic),
                    "client_hash": stem_set_hash(client_kds),
                    "seed_hash": stem_set_hash(attacker_kds[: len(seeds)]),
                    "client_top": rec.client_top,
                    "attacker_top": rec.attacker_top,
                    "warnings": rec.warnings,
                    "augmentation": result.manifest,
                }
        except ConfigurationError:
            raise
        except LeakforgeError as exc:
            status, error = "partial", f"repeat {r}: {exc}"
            log.error("aborting experiment: %s", error)
            break
        repeats.append(entry)

    arms = {}
    for arm in config.arms:
        scores = [rep["arms"][arm]["jaccard"] for rep in repeats]
        acc = [rep["arms"][arm]["accuracy"] for rep in repeats]
        arms[arm] = {
            "scores": scores,
            "accuracy": acc,
            "mean": statistics.fmean(scores) if scores else None,
            "sd": _sd(scores) if scores else None,
            "mean_accuracy": statistics.fmean(acc) if acc else None,
        }

    if len(config.arms) < 2:
        stats_block = {"skipped": "fewer than two arms"}
    elif len(repeats) < 3:
        stats_block = {"skipped": "fewer than three completed repeats"}
    else:
        stats_block = compare_arms({a: arms[a]["scores"] for a in config.arms}, config.alpha)

    report = {
        "config": config.to_json(),
        "status": status,
        "error": error,
        "n_documents": len(corpus),
        "arms": arms,
        "repeats": repeats,
        "stats": stats_block,
        "provenance": {
            "tool": "leakforge",
            "version": __version__,
            "stopwords": stopwords.version_tag,
            "model_name": config.generator.model_name,
            "backend": config.generator.backend,
            "network_calls": network_calls,
            "cache_hits": cache_hits,
            "attack": "volume-rank",
            "clustering": "cosine/average-linkage/tfidf",
        },
    }
    return report


def report_csv(report: dict) -> str:
    """Per-repeat scores as CSV: repeat, arm, jaccard, accuracy."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["repeat", "arm", "jaccard", "accuracy", "n_attacker_docs", "n_synthetic"])
    for rep in report["repeats"]:
        for arm, res in rep["arms"].items():
            w.writerow([rep["index"], arm, f"{res['jaccard']:.10g}", f"{res['accuracy']:.10g}",
                        res["n_attacker_docs"], res["n_synthetic"]])
    return buf.getvalue()


def sweep(configs, generator_factory=None) -> list[dict]:
    """Run several configs; a failing config yields an error stub instead of a report."""
    reports = []
    for cfg in configs:
        try:
            reports.append(run_experiment(cfg, generator_factory))
        except LeakforgeError as exc:
            log.error("config for %s failed: %s", cfg.corpus_path, exc)
            reports.append({"config": cfg.to_json(), "status": "failed", "error": str(exc),
                            "arms": {}, "repeats": []})
    return reports


def sweep_rows(reports) -> list[dict]:
    rows = []
    for rep in reports:
        cfg = rep["config"]
        first = rep["repeats"][0] if rep.get("repeats") else {}
        row = {
            "model": cfg["generator"]["model_name"],
            "attacker_real": first.get("n_seed", cfg.get("attacker_real_size")),
            "attacker_synthetic": first.get("target_synthetic"),
            "client": first.get("n_client", cfg.get("client_size")),
        }
        for arm, col in _ARM_COLUMN.items():
            mean = rep.get("arms", {}).get(arm, {}).get("mean")
            row[col] = mean
        rows.append(row)
    rows.sort(key=lambda r: (r["attacker_real"] is None, r["attacker_real"] or 0, r["client"] or 0, r["model"]))
    return rows


def sweep_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: (f"{v:.4f}" if isinstance(v, float) else ("" if v is None else v)) for k, v in row.items()})
    return buf.getvalue()
