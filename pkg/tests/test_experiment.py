import csv
import io
import statistics
from dataclasses import replace

import pytest

from leakforge.corpus import build_corpus, save_corpus
from leakforge.errors import ConfigurationError, GenerationError
from leakforge.experiment import (
    SWEEP_COLUMNS,
    ExperimentConfig,
    config_from_mapping,
    load_config,
    parse_ratio,
    report_csv,
    run_experiment,
    sweep,
    sweep_csv,
    sweep_rows,
)
from leakforge.fileio import dumps
from leakforge.keywords import to_keyword_docs
from leakforge.llm import GeneratorConfig, ResponseCache, TextGenerator
from leakforge.synth import zipf_corpus


@pytest.fixture(scope="module")
def corpus2k():
    return build_corpus(zipf_corpus(n_docs=2000, vocab_size=500, mean_length=40, seed=21))


def cfg(**kw):
    base = dict(corpus_path="unused", repeats=3, rng_seed=5, k=50)
    base.update(kw)
    return ExperimentConfig(**base)


@pytest.mark.parametrize("value, ratio", [("1:4", 4), ("2:1", 0.5), (4, 4), ("0", 0)])
def test_parse_ratio(value, ratio):
    assert parse_ratio(value) == ratio


@pytest.mark.parametrize("value", ["0:4", "-1", "a:b"])
def test_parse_ratio_rejects(value):
    with pytest.raises((ConfigurationError, ValueError, ZeroDivisionError)):
        parse_ratio(value)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        cfg(arms=("none", "magic"))
    with pytest.raises(ConfigurationError):
        cfg(repeats=0)
    with pytest.raises(ConfigurationError):
        config_from_mapping({"corpus_path": "x", "colour": 1})
    with pytest.raises(ConfigurationError):
        config_from_mapping({"corpus_path": "x", "generator_colour": 1})
    with pytest.raises(ConfigurationError):
        config_from_mapping({"repeats": 1})


def test_load_config_resolves_paths(tmp_path):
    (tmp_path / "e.toml").write_text('corpus_path = "c.ndjson"\nrepeats = 2\ngenerator_backend = "mock_echo"\n'
                                     'cache_dir = "cache"\nsynthetic_ratio = 4\n')
    c = load_config(tmp_path / "e.toml")
    assert c.resolve(c.corpus_path) == str(tmp_path / "c.ndjson")
    assert c.resolve(c.cache_dir) == str(tmp_path / "cache")
    assert c.to_json()["corpus_path"] == "c.ndjson" and "base_dir" not in c.to_json()
    assert c.generator.backend == "mock_echo" and c.repeats == 2 and c.synthetic_ratio == "4"
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "missing.toml")


def test_table_row_structure(corpus2k):
    c = cfg(repeats=5, client_size=1000, attacker_real_size=200)
    rep = run_experiment(c, corpus=corpus2k)
    assert rep["status"] == "complete" and set(rep["arms"]) == {"none", "random", "clustered"}
    for r in rep["repeats"]:
        assert (r["n_client"], r["n_seed"], r["target_synthetic"]) == (1000, 200, 800)
        assert r["arms"]["none"]["n_attacker_docs"] == 200
        assert r["arms"]["random"]["n_attacker_docs"] == r["arms"]["clustered"]["n_attacker_docs"] == 1000
    assert all(len(a["scores"]) == 5 for a in rep["arms"].values())
    assert len(rep["stats"]["comparisons"]) == 3


def test_deterministic_and_repeats_independent(corpus2k):
    a = run_experiment(cfg(repeats=3), corpus=corpus2k)
    b = run_experiment(cfg(repeats=3), corpus=corpus2k)
    assert dumps(a) == dumps(b)
    longer = run_experiment(cfg(repeats=4), corpus=corpus2k)
    assert longer["repeats"][:3] == a["repeats"]


def test_single_arm_repeats_recorded_separately(corpus2k):
    rep = run_experiment(cfg(arms=("none",), repeats=2), corpus=corpus2k)
    s = rep["arms"]["none"]["scores"]
    assert len(s) == 2 and s[0] != s[1]
    assert rep["stats"] == {"skipped": "fewer than two arms"}


def test_fixed_split_without_resampling(corpus2k):
    rep = run_experiment(cfg(arms=("none",), repeats=2, resample_split=False), corpus=corpus2k)
    assert rep["arms"]["none"]["scores"][0] == rep["arms"]["none"]["scores"][1]


def test_pairing_invariant(corpus2k):
    rep = run_experiment(cfg(), corpus=corpus2k)
    for r in rep["repeats"]:
        assert len({a["client_hash"] for a in r["arms"].values()}) == 1
        assert len({a["seed_hash"] for a in r["arms"].values()}) == 1


def test_means_recomputable(corpus2k):
    rep = run_experiment(cfg(), corpus=corpus2k)
    for arm, res in rep["arms"].items():
        scores = [r["arms"][arm]["jaccard"] for r in rep["repeats"]]
        assert res["scores"] == scores
        assert res["mean"] == pytest.approx(statistics.fmean(scores), abs=1e-15)


def test_echo_adds_no_vocabulary(corpus2k):
    c = cfg(repeats=1, generator=GeneratorConfig(backend="mock_echo"))
    rep = run_experiment(c, corpus=corpus2k)
    (r,) = rep["repeats"]
    seed_vocab = set()
    by_id = corpus2k.by_id()
    none = r["arms"]["none"]
    for arm in ("random", "clustered"):
        aug = r["arms"][arm]["augmentation"]
        for batch in aug["batches"]:
            for kd in to_keyword_docs([by_id[i] for i in batch["example_doc_ids"]]):
                seed_vocab |= kd.stems
        assert set(r["arms"][arm]["attacker_top"]) <= set(none["attacker_top"]) | seed_vocab
        if set(r["arms"][arm]["attacker_top"]) == set(none["attacker_top"]):
            assert r["arms"][arm]["jaccard"] == none["jaccard"]


class FailsOnRepeat:
    def __init__(self, config, fail_after):
        self.config = config
        self.inner = TextGenerator(config)
        self.fail_after = fail_after

    def complete(self, batch, attempt=0):
        if FailsOnRepeat.calls >= self.fail_after:
            raise GenerationError("server melted", retryable=False)
        FailsOnRepeat.calls += 1
        return self.inner.complete(batch, attempt)


def test_failing_arm_gives_partial_report(corpus2k):
    FailsOnRepeat.calls = 0
    c = cfg(repeats=3, arms=("none", "random"), attacker_real_size=40, synthetic_ratio="1:1")
    rep = run_experiment(c, generator_factory=lambda g: FailsOnRepeat(g.with_seed(g.mock_seed), 9), corpus=corpus2k)
    assert rep["status"] == "partial" and "server melted" in rep["error"]
    assert len(rep["repeats"]) == 1  # 40 synthetic needs 5 prompts per repeat
    assert rep["stats"] == {"skipped": "fewer than three completed repeats"}


def test_warm_cache_no_network(tmp_path, corpus2k, chat_server, api_key):
    gen = GeneratorConfig(backend="openai_compatible", model_name="gpt-4o-mini", endpoint_url="https://llm.test/v1")
    c = cfg(repeats=2, generator=gen, attacker_real_size=30, cache_dir=str(tmp_path))

    def factory(g):
        return TextGenerator(g, ResponseCache(tmp_path), chat_server.transport)

    cold = run_experiment(c, factory, corpus=corpus2k)
    assert cold["provenance"]["network_calls"] > 0
    warm = run_experiment(c, factory, corpus=corpus2k)
    assert warm["provenance"]["network_calls"] == 0
    assert warm["provenance"]["cache_hits"] == cold["provenance"]["network_calls"]
    assert warm["arms"] == cold["arms"]


def test_report_csv(corpus2k):
    rep = run_experiment(cfg(repeats=2, arms=("none", "clustered")), corpus=corpus2k)
    rows = list(csv.DictReader(io.StringIO(report_csv(rep))))
    assert [(r["repeat"], r["arm"]) for r in rows] == [("0", "none"), ("0", "clustered"), ("1", "none"), ("1", "clustered")]


def test_sweep_empty_is_header_only():
    assert sweep_csv(sweep_rows(sweep([]))) == ",".join(SWEEP_COLUMNS) + "\n"


@pytest.fixture(scope="module")
def corpus2k_path(corpus2k, tmp_path_factory):
    path = tmp_path_factory.mktemp("sweep") / "corpus.ndjson"
    save_corpus(corpus2k, path)
    return str(path)


def test_ratio_sweep_rows_sorted(corpus2k_path):
    configs = [cfg(corpus_path=corpus2k_path, repeats=1, client_size=1000, attacker_real_size=real, synthetic_ratio=f"{real}:{1000 - real}")
               for real in (300, 100, 500, 200, 400)]
    rows = sweep_rows(sweep(configs, lambda g: TextGenerator(g)))
    assert [r["attacker_real"] for r in rows] == [100, 200, 300, 400, 500]
    assert [r["attacker_synthetic"] for r in rows] == [900, 800, 700, 600, 500]
    parsed = list(csv.DictReader(io.StringIO(sweep_csv(rows))))
    assert list(parsed[0]) == list(SWEEP_COLUMNS) and len(parsed) == 5


def test_sweep_isolates_failures(corpus2k_path, tmp_path):
    ok = cfg(corpus_path=corpus2k_path, repeats=1, arms=("none",))
    bad = replace(ok, corpus_path=str(tmp_path / "missing.ndjson"))
    reports = sweep([bad, ok])
    assert [r["status"] for r in reports] == ["failed", "complete"]
    rows = sweep_rows(reports)
    assert rows[0]["none"] is not None and rows[1]["none"] is None
