"""Sample-size distributions K_n, their exact inverse moments and the series
diagnostics that drive every varying-law error bound.

Two scenarios: a fixed law mu on [M] shared by all epochs (A1), or an
n-indexed family mu_n (A2).  The catalog of A2 laws mirrors the standard
examples: discrete uniform on [n], a geometric truncated at n, a shifted
binomial, and a shifted Poisson truncated at n, each with success/rate
parameter c * n^(+-alpha).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import DomainError, SampleSizeError

_JENSEN_TOL = 1e-10


@dataclass(frozen=True)
class InverseMomentTable:
    """E[K_n^-1] and E[K_n^-1/2] at one epoch."""

    n: int
    e_inv: float
    e_inv_sqrt: float

    def __post_init__(self):
        if not (0.0 < self.e_inv <= 1.0 + _JENSEN_TOL):
            raise ValueError(f"E[K^-1] = {self.e_inv} outside (0, 1]")
        if self.e_inv_sqrt**2 > self.e_inv + _JENSEN_TOL:
            raise ValueError(f"Jensen violated: {self.e_inv_sqrt}^2 > {self.e_inv}")


class SampleSizeLaw:
    """Base class; subclasses fill in support, pmf and sampling."""

    scenario = "A2"
    kind = "abstract"

    def support(self, n: int) -> tuple[int, int]:
        raise NotImplementedError

    def pmf(self, n: int, k: int) -> float:
        raise NotImplementedError

    def pmf_vector(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """(ks, probabilities) over the full support at epoch n."""
        lo, hi = self.support(n)
        ks = np.arange(lo, hi + 1)
        return ks, np.array([self.pmf(n, int(k)) for k in ks])

    def sample(self, n: int, rng: np.random.Generator) -> int:
        return int(self.sample_many(n, rng, 1)[0])

    def sample_many(self, n: int, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def neg_moment(self, n: int, exponent: float) -> float:
        """E[K_n^-exponent] by exact pmf summation in ascending k."""
        ks, probs = self.pmf_vector(n)
        return math.fsum(p * k**-exponent for k, p in zip(ks.tolist(), probs.tolist()))

    def neg_moment_table(self, ns: np.ndarray, exponent: float) -> np.ndarray:
        """E[K_n^-exponent] for many epochs; subclasses override with closed
        forms or cumulative caches where available."""
        return np.array([self.neg_moment(int(n), exponent) for n in ns])

    def hypothesis_note(self) -> str:
        return ""

    def describe(self) -> str:
        return self.kind


def inverse_moment(law: SampleSizeLaw, n: int, power: float) -> float:
    """Exact E[K_n^-power] for power in {1, 1/2}."""
    if power not in (1, 1.0, 0.5):
        raise ValueError(f"power must be 1 or 1/2, got {power}")
    return law.neg_moment(n, float(power))


def inverse_moment_table(law: SampleSizeLaw, n: int) -> InverseMomentTable:
    return InverseMomentTable(n=n, e_inv=inverse_moment(law, n, 1), e_inv_sqrt=inverse_moment(law, n, 0.5))


class FixedSize(SampleSizeLaw):
    """Point mass at k; a fixed law on [M] with M = k (scenario A1)."""

    scenario = "A1"
    kind = "fixed"

    def __init__(self, k: int):
        if k < 1:
            raise ValueError("fixed sample size must be >= 1")
        self.k = int(k)

    def support(self, n):
        return self.k, self.k

    def pmf(self, n, k):
        return 1.0 if k == self.k else 0.0

    def sample_many(self, n, rng, size):
        return np.full(size, self.k, dtype=np.int64)

    def neg_moment(self, n, exponent):
        return self.k**-exponent

    def neg_moment_table(self, ns, exponent):
        return np.full(len(ns), self.k**-exponent)

    def describe(self):
        return f"fixed(k={self.k})"


class CustomPmf(SampleSizeLaw):
    """Explicit fixed pmf on {1, ..., M} (scenario A1)."""

    scenario = "A1"
    kind = "custom-pmf"

    def __init__(self, probs):
        p = np.asarray(probs, dtype=float)
        if p.ndim != 1 or len(p) == 0 or np.any(p < 0):
            raise ValueError("probs must be a non-empty vector of non-negative weights")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"pmf must sum to 1 within 1e-12, got {p.sum()}")
        self.probs = p
        self._cdf = np.cumsum(p)

    def support(self, n):
        return 1, len(self.probs)

    def pmf(self, n, k):
        if 1 <= k <= len(self.probs):
            return float(self.probs[k - 1])
        return 0.0

    def sample_many(self, n, rng, size):
        return 1 + np.searchsorted(self._cdf, rng.random(size), side="right").astype(np.int64)

    def neg_moment(self, n, exponent):
        ks = np.arange(1, len(self.probs) + 1)
        return math.fsum(p * k**-exponent for k, p in zip(ks.tolist(), self.probs.tolist()))

    def neg_moment_table(self, ns, exponent):
        return np.full(len(ns), self.neg_moment(1, exponent))

    def describe(self):
        return f"custom-pmf(M={len(self.probs)})"


class UniformLaw(SampleSizeLaw):
    """Discrete uniform on {1, ..., n}."""

    kind = "uniform"

    def __init__(self):
        self._cums: dict[float, np.ndarray] = {}

    def support(self, n):
        return 1, n

    def pmf(self, n, k):
        return 1.0 / n if 1 <= k <= n else 0.0

    def sample_many(self, n, rng, size):
        return rng.integers(1, n + 1, size=size, dtype=np.int64)

    def _cum(self, exponent, n):
        cached = self._cums.get(exponent)
        if cached is None or len(cached) <= n:
            ks = np.arange(1, max(n, 1024) + 1, dtype=float)
            self._cums[exponent] = np.concatenate([[0.0], np.cumsum(ks**-exponent)])
            cached = self._cums[exponent]
        return cached

    def neg_moment(self, n, exponent):
        return float(self._cum(exponent, n)[n]) / n

    def neg_moment_table(self, ns, exponent):
        cum = self._cum(exponent, int(np.max(ns)))
        return cum[np.asarray(ns, dtype=int)] / np.asarray(ns, dtype=float)

    def hypothesis_note(self):
        return "partial sums of E[K^-1] grow like (log n)^2"


class TruncatedGeometricLaw(SampleSizeLaw):
    """K_n = min(n, G_n) with G_n geometric with success c * n^-alpha."""

    kind = "geometric"

    def __init__(self, alpha: float, c: float = 1.0):
        if c <= 0 or alpha <= 0:
            raise ValueError("c and alpha must be positive")
        self.alpha = float(alpha)
        self.c = float(c)

    def _p(self, n):
        return min(1.0, self.c * n**-self.alpha)

    def support(self, n):
        return 1, n

    def pmf(self, n, k):
        p = self._p(n)
        if k < 1 or k > n:
            return 0.0
        if k == n:
            return (1.0 - p) ** (n - 1)
        return p * (1.0 - p) ** (k - 1)

    def sample_many(self, n, rng, size):
        return np.minimum(n, rng.geometric(self._p(n), size=size)).astype(np.int64)

    def neg_moment(self, n, exponent):
        ks, probs = self.pmf_vector(n)
        return float(np.add.reduce(probs * ks.astype(float) ** -exponent))

    def hypothesis_note(self):
        ok = self.alpha > 0.5
        return f"alpha={self.alpha}: needs alpha > 1/2 ({'met' if ok else 'NOT met'})"

    def describe(self):
        return f"geometric(c={self.c}, alpha={self.alpha})"


class ShiftedBinomialLaw(SampleSizeLaw):
    """K_n = 1 + Binomial(n - 1, c * n^-alpha)."""

    kind = "binomial"

    def __init__(self, alpha: float, c: float = 1.0):
        if c <= 0 or alpha <= 0:
            raise ValueError("c and alpha must be positive")
        self.alpha = float(alpha)
        self.c = float(c)

    def _p(self, n):
        return min(1.0, self.c * n**-self.alpha)

    def support(self, n):
        return 1, n

    def pmf(self, n, k):
        if k < 1 or k > n:
            return 0.0
        return float(stats.binom.pmf(k - 1, n - 1, self._p(n)))

    def pmf_vector(self, n):
        ks = np.arange(1, n + 1)
        return ks, stats.binom.pmf(ks - 1, n - 1, self._p(n))

    def sample_many(self, n, rng, size):
        return (1 + rng.binomial(n - 1, self._p(n), size=size)).astype(np.int64)

    def closed_form_inverse(self, n: int) -> float:
        """E[K_n^-1] = (1 - (1-p)^n) / (n p), the binomial shift identity."""
        p = self._p(n)
        return (1.0 - (1.0 - p) ** n) / (n * p)

    def neg_moment(self, n, exponent):
        ks, probs = self.pmf_vector(n)
        val = math.fsum(p * k**-exponent for k, p in zip(ks.tolist(), probs.tolist()))
        if exponent == 1.0:
            closed = self.closed_form_inverse(n)
            if abs(closed - val) > 1e-12:
                raise AssertionError(
                    f"binomial closed form {closed} disagrees with summation {val} at n={n}"
                )
            return closed
        return val

    def neg_moment_table(self, ns, exponent):
        ns = np.asarray(ns, dtype=int)
        if exponent == 1.0:
            out = np.array([self.closed_form_inverse(int(n)) for n in ns])
            # one summation spot-check at the largest epoch
            largest = int(ns.max())
            ks, probs = self.pmf_vector(largest)
            brute = float(np.add.reduce(probs / ks))
            if abs(brute - self.closed_form_inverse(largest)) > 1e-12:
                raise AssertionError("binomial closed form drifted from summation")
            return out
        return np.array([float(np.add.reduce(self.pmf_vector(int(n))[1] * np.arange(1, n + 1, dtype=float) ** -exponent)) for n in ns])

    def hypothesis_note(self):
        ok = 0.0 < self.alpha < 0.5
        return f"alpha={self.alpha}: needs 0 < alpha < 1/2 ({'met' if ok else 'NOT met'})"

    def describe(self):
        return f"binomial(c={self.c}, alpha={self.alpha})"


class TruncatedPoissonLaw(SampleSizeLaw):
    """K_n = min(n, 1 + Poisson(c * n^alpha))."""

    kind = "poisson"

    def __init__(self, alpha: float, c: float = 1.0):
        if c <= 0 or alpha <= 0:
            raise ValueError("c and alpha must be positive")
        self.alpha = float(alpha)
        self.c = float(c)

    def _lam(self, n):
        return self.c * n**self.alpha

    def support(self, n):
        return 1, n

    def pmf(self, n, k):
        lam = self._lam(n)
        if k < 1 or k > n:
            return 0.0
        if k == n:
            return float(stats.poisson.sf(n - 2, lam))  # P[P >= n - 1]
        return float(stats.poisson.pmf(k - 1, lam))

    def pmf_vector(self, n):
        lam = self._lam(n)
        ks = np.arange(1, n + 1)
        probs = stats.poisson.pmf(ks - 1, lam)
        probs[-1] = stats.poisson.sf(n - 2, lam)
        return ks, probs

    def sample_many(self, n, rng, size):
        return np.minimum(n, 1 + rng.poisson(self._lam(n), size=size)).astype(np.int64)

    def neg_moment(self, n, exponent):
        ks, probs = self.pmf_vector(n)
        return math.fsum(p * k**-exponent for k, p in zip(ks.tolist(), probs.tolist()))

    def neg_moment_table(self, ns, exponent):
        ns = np.asarray(ns, dtype=int)
        if exponent == 1.0:
            # E[1/K] = (1/lam) P[1 <= P <= n-1] + (1/n) P[P >= n-1]
            lam = self.c * ns.astype(float) ** self.alpha
            mid = stats.poisson.cdf(ns - 1, lam) - stats.poisson.cdf(0, lam)
            tail = stats.poisson.sf(ns - 2, lam)
            return mid / lam + tail / ns
        return super().neg_moment_table(ns, exponent)

    def hypothesis_note(self):
        ok = self.alpha > 0.5
        return f"alpha={self.alpha}: needs alpha > 1/2 ({'met' if ok else 'NOT met'})"

    def describe(self):
        return f"poisson(c={self.c}, alpha={self.alpha})"


BUILTIN_LAWS = {
    "fixed": FixedSize,
    "custom-pmf": CustomPmf,
    "uniform": UniformLaw,
    "geometric": TruncatedGeometricLaw,
    "binomial": ShiftedBinomialLaw,
    "poisson": TruncatedPoissonLaw,
}


def make_law(kind: str, **kwargs) -> SampleSizeLaw:
    try:
        cls = BUILTIN_LAWS[kind]
    except KeyError:
        raise KeyError(f"unknown law kind {kind!r}; known: {sorted(BUILTIN_LAWS)}")
    return cls(**kwargs)


# ---------------------------------------------------------------------------
# Conditional moments of the sampled proportions V_i / k.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConditionalMoments:
    mean1: float
    var1: float
    mean2: float
    var2: float


def conditional_moments_with_replacement(x: float, y: float, k: int) -> ConditionalMoments:
    """Trinomial sampling at proportions (x, y): Var(V_i/k) = coord(1-coord)/k."""
    if x < 0 or y < 0 or x + y > 1 + 1e-12:
        raise DomainError(f"({x}, {y}) outside the simplex")
    if k < 1:
        raise SampleSizeError("k must be >= 1")
    return ConditionalMoments(x, x * (1 - x) / k, y, y * (1 - y) / k)


def conditional_moments_without_replacement(n: int, r1: int, r2: int, k: int) -> ConditionalMoments:
    """Hypergeometric sampling from counts (r1, r2, n-r1-r2):
    Var(V_i/k) = r_i (n - r_i)(n - k) / (k (n-1) n^2)."""
    if r1 < 0 or r2 < 0 or r1 + r2 > n:
        raise DomainError(f"counts ({r1}, {r2}) invalid for population {n}")
    if k < 1 or k > n:
        raise SampleSizeError(f"k={k} invalid for sampling without replacement from {n}")
    def var(r):
        if n == 1:
            return 0.0
        return r * (n - r) * (n - k) / (k * (n - 1) * n * n)
    return ConditionalMoments(r1 / n, var(r1), r2 / n, var(r2))


# ---------------------------------------------------------------------------
# Series diagnostics.
# ---------------------------------------------------------------------------

@dataclass
class SeriesReport:
    law: str
    smoothness: str
    n_start: int
    horizon: int
    checkpoints: np.ndarray
    partial_sums: dict      # series name -> partial sums at checkpoints
    slopes: dict            # series name -> fitted log-log slope over last decade
    log2_adjusted_slope: float  # slope of log(S / (log n)^2) for sum E[K^-1]
    flags: dict             # series name -> textual verdict
    relevant: tuple         # series names that matter for the given smoothness
    notes: str


def _loglog_slope(ns: np.ndarray, values: np.ndarray) -> float:
    mask = values > 0
    if mask.sum() < 2:
        return float("nan")
    lx, ly = np.log(ns[mask]), np.log(values[mask])
    return float(np.polyfit(lx, ly, 1)[0])


def _classify(slope: float, slope_uplog: float) -> str:
    if slope <= 0.05:
        return "convergent-looking"
    if slope_uplog <= 0.4:
        return "o(sqrt(n/log n)) consistent"
    if slope <= 0.4:
        return "o(sqrt(n)) consistent"
    return "inconsistent"


def series_report(law: SampleSizeLaw, smoothness: str, horizon: int, n_start: int = 1) -> SeriesReport:
    """Tabulate the four criterion series up to the horizon and flag each by
    fitted growth slope.

    The checker is finite-horizon: flags record consistency with the little-o
    criteria, never proof.  Thresholds follow the rule: a series is flagged
    consistent with o(n^beta) when its fitted slope over the last decade of
    checkpoints is <= beta - 0.1.
    """
    if horizon < 100:
        raise ValueError("horizon must be >= 100")
    ns = np.arange(n_start, horizon + 1)
    e_inv = law.neg_moment_table(ns, 1.0)
    e_sqrt = law.neg_moment_table(ns, 0.5)

    series = {
        "sum_winv": np.cumsum(e_inv / (ns + 1.0)),           # sum (i+1)^-1 E[K^-1]
        "sum_wsqrt": np.cumsum(e_sqrt / (ns + 1.0)),         # sum (i+1)^-1 E[K^-1/2]
        "sum_inv": np.cumsum(e_inv),                         # sum E[K^-1]
        "sum_inv_sqrtw": np.cumsum(e_inv / np.sqrt(ns + 1.0)),  # sum E[K^-1] (i+1)^-1/2
    }

    cps = np.unique(np.round(np.logspace(np.log10(max(10, n_start + 1)), np.log10(horizon), 25)).astype(int))
    cps = cps[cps <= horizon]
    idx = cps - n_start
    last = cps >= horizon / 10

    partial_sums, slopes, flags = {}, {}, {}
    for name, s in series.items():
        vals = s[idx]
        partial_sums[name] = vals
        slope = _loglog_slope(cps[last], vals[last])
        uplog = _loglog_slope(cps[last], vals[last] * np.sqrt(np.log(cps[last])))
        slopes[name] = slope
        flags[name] = _classify(slope, uplog)

    sum_inv_cps = partial_sums["sum_inv"]
    adj = _loglog_slope(cps[last], sum_inv_cps[last] / np.log(cps[last]) ** 2)

    relevant = {
        "Holder": ("sum_wsqrt",),
        "C1": ("sum_winv", "sum_wsqrt"),
        "C2": ("sum_winv", "sum_inv", "sum_inv_sqrtw"),
    }.get(smoothness, tuple(series))

    return SeriesReport(
        law=law.describe(),
        smoothness=smoothness,
        n_start=n_start,
        horizon=horizon,
        checkpoints=cps,
        partial_sums=partial_sums,
        slopes=slopes,
        log2_adjusted_slope=adj,
        flags=flags,
        relevant=relevant,
        notes=law.hypothesis_note(),
    )
