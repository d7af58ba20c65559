import itertools
import json
import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from leakforge.errors import ConfigurationError, DegenerateSampleError
from leakforge.stats import (
    PairedSample,
    compare_arms,
    paired_t,
    regularized_incomplete_beta,
    shapiro_wilk,
    student_t_sf,
    wilcoxon_signed_rank,
)


@pytest.fixture(scope="module")
def oracles(fixtures_dir):
    return json.loads((fixtures_dir / "stats_oracles.json").read_text())


def brute_force_wilcoxon(diffs):
    """(T+, P(T+ >= obs), P(T+ <= obs)) by enumerating every sign pattern."""
    d = [v for v in diffs if v != 0]
    mags = [abs(v) for v in d]
    ranks = []
    for m in mags:
        below = sum(1 for x in mags if x < m)
        equal = sum(1 for x in mags if x == m)
        ranks.append(below + (equal + 1) / 2)
    obs = sum(r for r, v in zip(ranks, d) if v > 0)
    ge = le = 0
    for signs in itertools.product((0, 1), repeat=len(d)):
        t = sum(r for r, s in zip(ranks, signs) if s)
        ge += t >= obs - 1e-9
        le += t <= obs + 1e-9
    total = 2 ** len(d)
    return obs, ge / total, le / total


def random_fixture(rng, n, ties=False):
    if ties:
        diffs = [rng.choice([-3, -2, -1, 1, 1, 2, 2, 3, 0]) for _ in range(n)]
    else:
        diffs = [round(rng.gauss(0.3, 1.0), 3) for _ in range(n)]
    if all(v == 0 for v in diffs):
        diffs[0] = 1
    return PairedSample(diffs, [0.0] * n)


WILCOXON_FIXTURES = [(n, seed, seed % 3 == 0) for seed, n in enumerate([3, 4, 5, 6, 7, 8, 9, 10] * 3 + [8])]


@pytest.mark.parametrize("n, seed, ties", WILCOXON_FIXTURES)
def test_wilcoxon_exact_matches_enumeration(n, seed, ties):
    sample = random_fixture(random.Random(seed), n, ties)
    t_plus, p_ge, p_le = brute_force_wilcoxon(sample.differences())
    g = wilcoxon_signed_rank(sample, "greater", method="exact")
    assert g.statistic == t_plus
    assert abs(g.p_value - p_ge) <= 1e-12
    assert abs(wilcoxon_signed_rank(sample, "less", method="exact").p_value - p_le) <= 1e-12
    two = wilcoxon_signed_rank(sample, "two_sided", method="exact").p_value
    assert abs(two - min(1.0, 2 * min(p_ge, p_le))) <= 1e-12


def test_wilcoxon_three_positive():
    r = wilcoxon_signed_rank(PairedSample([1, 2, 3], [0, 0, 0]), "greater")
    assert r.p_value == 0.125 and r.statistic == 6 and r.exact


def test_wilcoxon_drops_zeros():
    r = wilcoxon_signed_rank(PairedSample([1, 2, 3, 5], [0, 0, 0, 5]), "greater")
    assert r.n_effective == 3


def test_wilcoxon_all_zero():
    with pytest.raises(DegenerateSampleError):
        wilcoxon_signed_rank(PairedSample([1, 2, 3], [1, 2, 3]))


def _sample_with_positive_ranks(n, positive):
    # magnitudes 1..n are their own ranks, so this realises any T+ exactly
    return PairedSample([r if r in positive else -r for r in range(1, n + 1)], [0] * n)


@pytest.mark.parametrize("n", [10, 11, 12])
def test_wilcoxon_normal_approximation_close_to_exact(n):
    # without ties the p-value depends only on T+, so one sample per T+ covers every case
    by_t = {}
    for k in range(n + 1):
        for pos in itertools.combinations(range(1, n + 1), k):
            by_t.setdefault(sum(pos), set(pos))
    assert len(by_t) == n * (n + 1) // 2 + 1
    for pos in by_t.values():
        sample = _sample_with_positive_ranks(n, pos)
        for alt in ("two_sided", "greater", "less"):
            exact = wilcoxon_signed_rank(sample, alt, method="exact").p_value
            approx = wilcoxon_signed_rank(sample, alt, method="approx").p_value
            assert abs(exact - approx) < 0.02


def test_wilcoxon_auto_switches_to_approx():
    big = PairedSample(list(range(1, 14)), [0.5] * 13)
    assert wilcoxon_signed_rank(big).exact is False
    assert wilcoxon_signed_rank(PairedSample(list(range(1, 13)), [0.5] * 12)).exact is True


def hand_t(a, b):
    d = [x - y for x, y in zip(a, b)]
    n = len(d)
    mean = sum(d) / n
    sd = math.sqrt(sum((v - mean) ** 2 for v in d) / (n - 1))
    return mean / (sd / math.sqrt(n))


def test_paired_t_matches_hand_computation(oracles):
    assert any(len(f["a"]) == 10 for f in oracles["paired_t"])
    for f in oracles["paired_t"]:
        s = PairedSample(f["a"], f["b"])
        r = paired_t(s)
        assert abs(r.statistic - hand_t(f["a"], f["b"])) <= 1e-9
        assert abs(r.statistic - f["t"]) <= 1e-9
        for alt in ("two_sided", "greater", "less"):
            assert abs(paired_t(s, alt).p_value - f[alt]) <= 1e-9


def test_paired_t_zero_mean():
    r = paired_t(PairedSample([1, -1], [0, 0]))
    assert r.statistic == 0 and r.p_value == 1


def test_paired_t_zero_variance():
    with pytest.raises(DegenerateSampleError):
        paired_t(PairedSample([1, 1, 1, 1], [0, 0, 0, 0]))


@pytest.mark.parametrize("df", [1, 2, 5, 30])
def test_student_t_known_values(df):
    assert student_t_sf(0.0, df) == pytest.approx(0.5, abs=1e-15)
    # df=1 is Cauchy: P(T > 1) = 1/4
    if df == 1:
        assert student_t_sf(1.0, 1) == pytest.approx(0.25, abs=1e-14)


def test_incomplete_beta_symmetry():
    for a, b, x in [(2, 3, 0.3), (0.5, 4.5, 0.9), (10, 1, 0.5)]:
        lhs = regularized_incomplete_beta(a, b, x)
        assert lhs == pytest.approx(1 - regularized_incomplete_beta(b, a, 1 - x), abs=1e-13)
    assert regularized_incomplete_beta(1, 1, 0.37) == pytest.approx(0.37, abs=1e-15)


def test_shapiro_matches_reference(oracles):
    for f in oracles["shapiro"]:
        r = shapiro_wilk(f["x"])
        assert abs(r.statistic - f["w"]) <= 1e-6, f["name"]
        assert abs(r.p_value - f["p"]) <= 1e-6, f["name"]


def test_shapiro_errors():
    with pytest.raises(DegenerateSampleError):
        shapiro_wilk([1, 1, 1, 1])
    with pytest.raises(ConfigurationError):
        shapiro_wilk([1, 2])


def test_paired_sample_validation():
    with pytest.raises(ConfigurationError):
        PairedSample([1, 2], [1])
    with pytest.raises(ConfigurationError):
        PairedSample([1], [1])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(-20, 20), min_size=3, max_size=12))
def test_wilcoxon_sign_flip_symmetry(diffs):
    if not any(diffs):
        return
    pos = wilcoxon_signed_rank(PairedSample(diffs, [0] * len(diffs)), "greater").p_value
    neg = wilcoxon_signed_rank(PairedSample([-d for d in diffs], [0] * len(diffs)), "less").p_value
    assert pos == pytest.approx(neg, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=3, max_size=15),
       st.floats(0.1, 10), st.floats(-3, 3))
def test_paired_t_scale_invariant(diffs, scale, shift):
    s = PairedSample(diffs, [0.0] * len(diffs))
    try:
        base = paired_t(s)
    except DegenerateSampleError:
        return
    # shifting both arms leaves differences unchanged; scaling leaves t unchanged
    moved = PairedSample([scale * (d + shift) for d in diffs], [scale * shift] * len(diffs))
    if math.fsum((v - sum(diffs) / len(diffs)) ** 2 for v in diffs) < 1e-6:
        return
    assert paired_t(moved).statistic == pytest.approx(base.statistic, rel=1e-6, abs=1e-9)


def test_compare_arms_identical_arms_degenerate():
    out = compare_arms({"none": [0.5, 0.6, 0.7], "random": [0.5, 0.6, 0.7]})
    (c,) = out["comparisons"]
    assert c["outcome"] == "degenerate" and not c["significant"]


def test_compare_arms_picks_paired_t_for_normal_differences():
    rng = random.Random(7)
    base = [0.6 + rng.gauss(0, 0.02) for _ in range(20)]
    diffs = [rng.gauss(0.01, 0.01) for _ in range(20)]
    assert shapiro_wilk(diffs).p_value >= 0.05
    out = compare_arms({"none": base, "clustered": [b + d for b, d in zip(base, diffs)]})
    assert out["comparisons"][0]["method"] == "paired_t"


def test_compare_arms_picks_wilcoxon_for_outlier():
    base = [0.5 + 0.01 * i for i in range(12)]
    diffs = [0.010, 0.012, 0.011, 0.009, 0.013, 0.010, 0.011, 0.012, 0.010, 0.011, 0.009, 0.300]
    assert shapiro_wilk(diffs).p_value < 0.05
    out = compare_arms({"none": base, "clustered": [b + d for b, d in zip(base, diffs)]})
    c = out["comparisons"][0]
    assert c["method"] == "wilcoxon_signed_rank"
    assert c["direction"] == "b>a" and c["p_greater"] < 0.05


def test_compare_arms_preconditions():
    with pytest.raises(ConfigurationError):
        compare_arms({"a": [1, 2, 3], "b": [1, 2]})
    with pytest.raises(ConfigurationError):
        compare_arms({"a": [1, 2], "b": [1, 3]})


@pytest.mark.parametrize("seed", range(10))
def test_wilcoxon_tie_corrected_approximation_matches_scipy(seed):
    scipy_stats = pytest.importorskip("scipy.stats")
    rng = random.Random(seed)
    d = [rng.choice([-3, -2, -1, 1, 2, 3, 4, 5]) for _ in range(15)]
    for alt in ("two_sided", "greater", "less"):
        ours = wilcoxon_signed_rank(PairedSample(d, [0] * 15), alt, method="approx").p_value
        ref = scipy_stats.wilcoxon(d, alternative=alt.replace("_", "-"), method="approx", correction=True).pvalue
        assert ours == pytest.approx(ref, abs=1e-12)
