"""Paired significance tests for per-repeat attack scores.

Normality of the paired differences is checked with Shapiro-Wilk; normal
differences go to a paired t-test, everything else to the Wilcoxon
signed-rank test.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass
from statistics import NormalDist

from .errors import ConfigurationError, DegenerateSampleError

__all__ = [
    "PairedSample",
    "TestResult",
    "shapiro_wilk",
    "wilcoxon_signed_rank",
    "paired_t",
    "student_t_sf",
    "regularized_incomplete_beta",
    "compare_arms",
    "EXACT_MAX_N",
]

_N = NormalDist()
EXACT_MAX_N = 12
ALTERNATIVES = ("two_sided", "greater", "less")


@dataclass(frozen=True)
class PairedSample:
    a: tuple[float, ...]
    b: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(v) for v in self.a))
        object.__setattr__(self, "b", tuple(float(v) for v in self.b))
        if len(self.a) != len(self.b):
            raise ConfigurationError(f"paired samples differ in length: {len(self.a)} vs {len(self.b)}")
        if len(self.a) < 2:
            raise ConfigurationError("a paired sample needs at least 2 pairs")

    def differences(self) -> list[float]:
        return [x - y for x, y in zip(self.a, self.b)]


@dataclass(frozen=True)
class TestResult:
    method: str
    statistic: float
    p_value: float
    n_effective: int
    alternative: str = "two_sided"
    exact: bool | None = None

    def to_json(self) -> dict:
        return asdict(self)


def _check_alternative(alternative: str) -> None:
    if alternative not in ALTERNATIVES:
        raise ValueError(f"alternative must be one of {ALTERNATIVES}, got {alternative!r}")


def _clip01(p: float) -> float:
    return min(1.0, max(0.0, p))


# -- Shapiro-Wilk ------------------------------------------------------------

def _poly(coefs, x):
    return sum(c * x**i for i, c in enumerate(coefs))


def _sw_coefficients(n: int) -> list[float]:
    """Royston (1992) approximation to the Shapiro-Wilk weights, ascending order."""
    if n == 3:
        r = math.sqrt(0.5)
        return [-r, 0.0, r]
    m = [_N.inv_cdf((i - 0.375) / (n + 0.25)) for i in range(1, n + 1)]
    ss = sum(v * v for v in m)
    u = 1.0 / math.sqrt(n)
    a = [0.0] * n
    an = m[-1] / math.sqrt(ss) + _poly((0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056), u)
    if n > 5:
        an1 = m[-2] / math.sqrt(ss) + _poly((0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633), u)
        phi = (ss - 2 * m[-1] ** 2 - 2 * m[-2] ** 2) / (1 - 2 * an**2 - 2 * an1**2)
        a[-1], a[0], a[-2], a[1] = an, -an, an1, -an1
        inner = range(2, n - 2)
    else:
        phi = (ss - 2 * m[-1] ** 2) / (1 - 2 * an**2)
        a[-1], a[0] = an, -an
        inner = range(1, n - 1)
    root = math.sqrt(phi)
    for i in inner:
        a[i] = m[i] / root
    return a


def shapiro_wilk(x) -> TestResult:
    """W statistic with Royston's p-value approximation (3 <= n <= 5000)."""
    xs = sorted(float(v) for v in x)
    n = len(xs)
    if n < 3:
        raise ConfigurationError(f"Shapiro-Wilk needs at least 3 observations, got {n}")
    if n > 5000:
        raise ConfigurationError("Shapiro-Wilk approximation is only valid up to n = 5000")
    mean = math.fsum(xs) / n
    ssq = math.fsum((v - mean) ** 2 for v in xs)
    if xs[-1] - xs[0] <= 1e-12 * max(1.0, abs(mean)) or ssq == 0:
        raise DegenerateSampleError("Shapiro-Wilk is undefined for a constant sample")
    a = _sw_coefficients(n)
    w = math.fsum(ai * xi for ai, xi in zip(a, xs)) ** 2 / ssq
    w = min(w, 1.0)

    if n == 3:
        p = 6 / math.pi * (math.asin(math.sqrt(w)) - math.asin(math.sqrt(0.75)))
        return TestResult("shapiro_wilk", w, _clip01(p), n)
    y = math.log(1 - w) if w < 1 else -math.inf
    if n <= 11:
        gamma = -2.273 + 0.459 * n
        mu = _poly((0.5440, -0.39978, 0.025054, -6.714e-4), n)
        sigma = math.exp(_poly((1.3822, -0.77857, 0.062767, -0.0020322), n))
        if y >= gamma:
            return TestResult("shapiro_wilk", w, 0.0, n)
        y = -math.log(gamma - y)
    else:
        ln = math.log(n)
        mu = _poly((-1.5861, -0.31082, -0.083751, 0.0038915), ln)
        sigma = math.exp(_poly((-0.4803, -0.082676, 0.0030302), ln))
    if y == -math.inf:
        return TestResult("shapiro_wilk", w, 1.0, n)
    p = 1 - _N.cdf((y - mu) / sigma)
    return TestResult("shapiro_wilk", w, _clip01(p), n)


# -- Wilcoxon signed-rank ---------------------------------------------------

def _average_ranks(values: list[float]) -> list[float]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j + 2) / 2
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def _signed_rank_null(doubled_ranks: list[int]) -> list[int]:
    """Count of sign assignments producing each doubled positive-rank sum."""
    total = sum(doubled_ranks)
    counts = [0] * (total + 1)
    counts[0] = 1
    for r in doubled_ranks:
        for s in range(total, r - 1, -1):
            counts[s] += counts[s - r]
    return counts


def wilcoxon_signed_rank(sample: PairedSample, alternative: str = "two_sided", method: str = "auto") -> TestResult:
    """Signed-rank test on ``a - b``.

    Zero differences are dropped and tied magnitudes get average ranks.
    For ``two_sided`` the statistic is min(T+, T-); otherwise it is T+.
    Up to 12 non-zero pairs the p-value is exact, otherwise it comes from
    the normal approximation with tie and continuity corrections;
    ``method="exact"`` or ``"approx"`` forces one path.
    """
    _check_alternative(alternative)
    if method not in ("auto", "exact", "approx"):
        raise ValueError(f"unknown method {method!r}")
    d = [v for v in sample.differences() if v != 0]
    n = len(d)
    if n == 0:
        raise DegenerateSampleError("all paired differences are zero")
    ranks = _average_ranks([abs(v) for v in d])
    t_plus = sum(r for r, v in zip(ranks, d) if v > 0)
    t_minus = sum(r for r, v in zip(ranks, d) if v < 0)
    statistic = min(t_plus, t_minus) if alternative == "two_sided" else t_plus

    if method == "exact" or (method == "auto" and n <= EXACT_MAX_N):
        doubled = [int(round(2 * r)) for r in ranks]
        counts = _signed_rank_null(doubled)
        total = 2**n
        t2 = int(round(2 * t_plus))
        p_ge = sum(counts[t2:]) / total
        p_le = sum(counts[: t2 + 1]) / total
        exact = True
    else:
        mean = n * (n + 1) / 4
        ties = _tie_sizes([abs(v) for v in d])
        var = n * (n + 1) * (2 * n + 1) / 24 - sum(t**3 - t for t in ties) / 48
        sd = math.sqrt(var)
        p_ge = 1 - _N.cdf((t_plus - mean - 0.5) / sd)
        p_le = _N.cdf((t_plus - mean + 0.5) / sd)
        exact = False

    if alternative == "greater":
        p = p_ge
    elif alternative == "less":
        p = p_le
    else:
        p = 2 * min(p_ge, p_le)
    return TestResult("wilcoxon_signed_rank", statistic, _clip01(p), n, alternative, exact)


def _tie_sizes(values: list[float]) -> list[int]:
    return [len(list(g)) for _, g in itertools.groupby(sorted(values))]


# -- paired t ----------------------------------------------------------------

def _betacf(a: float, b: float, x: float) -> float:
    # modified Lentz evaluation of the continued fraction for I_x(a, b)
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = tiny if abs(d) < tiny else d
    d = 1.0 / d
    h = d
    for m in range(1, 10000):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x in (0.0, 1.0):
        return x
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    if x < (a + 1) / (a + b + 2):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def student_t_sf(t: float, df: float) -> float:
    """P(T > t) for Student's t with ``df`` degrees of freedom."""
    if math.isinf(t):
        return 0.0 if t > 0 else 1.0
    tail = 0.5 * regularized_incomplete_beta(df / 2, 0.5, df / (df + t * t))
    return tail if t >= 0 else 1.0 - tail


def paired_t(sample: PairedSample, alternative: str = "two_sided") -> TestResult:
    _check_alternative(alternative)
    d = sample.differences()
    n = len(d)
    mean = math.fsum(d) / n
    var = math.fsum((v - mean) ** 2 for v in d) / (n - 1)
    if var <= (1e-15 * max(1.0, abs(mean))) ** 2:
        raise DegenerateSampleError("paired differences have zero variance")
    t = mean / math.sqrt(var / n)
    df = n - 1
    if alternative == "greater":
        p = student_t_sf(t, df)
    elif alternative == "less":
        p = student_t_sf(-t, df)
    else:
        p = 2 * student_t_sf(abs(t), df)
    return TestResult("paired_t", t, _clip01(p), n, alternative)


# -- arm comparison -----------------------------------------------------------

def compare_arms(per_repeat_scores: dict[str, list[float]], alpha: float = 0.05) -> dict:
    """Pairwise comparison of every arm pair, choosing the test by normality.

    For the pair ``(a, b)`` the differences are ``b - a``, so a small
    ``p_greater`` means ``b`` beats ``a``.
    """
    arms = list(per_repeat_scores)
    lengths = {len(v) for v in per_repeat_scores.values()}
    if len(lengths) > 1:
        raise ConfigurationError(f"arms have unequal repeat counts: {sorted(lengths)}")
    n = lengths.pop() if lengths else 0
    if arms and n < 3:
        raise ConfigurationError(f"need at least 3 repeats per arm to compare, got {n}")
    comparisons = []
    for a, b in itertools.combinations(arms, 2):
        xa, xb = per_repeat_scores[a], per_repeat_scores[b]
        diffs = [y - x for x, y in zip(xa, xb)]
        mean_diff = math.fsum(diffs) / n
        entry = {
            "a": a,
            "b": b,
            "mean_difference": mean_diff,
            "direction": "b>a" if mean_diff > 0 else ("a>b" if mean_diff < 0 else "tie"),
        }
        sample = PairedSample(xb, xa)
        try:
            normality = shapiro_wilk(diffs)
        except DegenerateSampleError as exc:
            entry.update(outcome="degenerate", reason=str(exc), significant=False)
            comparisons.append(entry)
            continue
        test = paired_t if normality.p_value >= alpha else wilcoxon_signed_rank
        try:
            two = test(sample, "two_sided")
            greater = test(sample, "greater")
        except DegenerateSampleError as exc:
            entry.update(outcome="degenerate", reason=str(exc), significant=False,
                         normality=normality.to_json())
            comparisons.append(entry)
            continue
        entry.update(
            outcome="ok",
            normality=normality.to_json(),
            method=two.method,
            statistic=two.statistic,
            p_value=two.p_value,
            p_greater=greater.p_value,
            significant=two.p_value < alpha,
        )
        comparisons.append(entry)
    return {"alpha": alpha, "n_repeats": n, "comparisons": comparisons}
