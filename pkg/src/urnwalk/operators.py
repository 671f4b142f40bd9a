"""Exact evaluation of the smoothing operators and their certified error bounds.

Four operators share one structure: the expectation of g over the colour
counts of one sample.  With replacement the counts are trinomial in the
proportions (x, y); without replacement they are multivariate hypergeometric
in the lattice counts (r1, r2, n - r1 - r2).  A fixed law mu gives the
polynomial smoother and its hypergeometric analogue; an n-indexed law gives
the per-epoch versions.

Weights are computed in log space from a shared log-factorial table and
exponentiated per term, which stays exact in semantics while avoiding
overflow for k, n up to 10^3 and beyond.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln, xlogy

from .errors import CapabilityError, CostGuardError, DomainError, SampleSizeError
from .laws import SampleSizeLaw
from .reinforcement import (
    ReinforcementSpec,
    check_simplex,
    eval_g,
    eval_g_arrays,
    g_hessian_sup,
    g_holder,
    modulus_bound,
)

DEFAULT_COST_GUARD = 10_000_000
DEFAULT_MAX_SUPPORT = 60
_MASS_TOL = 1e-15

_logfact_table = np.zeros(1)


def _logfact(m: int) -> np.ndarray:
    """Cumulative log-factorial table log(i!) for i = 0..m (grown on demand)."""
    global _logfact_table
    if len(_logfact_table) <= m:
        _logfact_table = gammaln(np.arange(max(m + 1, 2 * len(_logfact_table))) + 1.0)
    return _logfact_table


@lru_cache(maxsize=2048)
def _triangle(k: int):
    """Index arrays (i, j) with i + j <= k and the log trinomial coefficients
    log C(k, i) + log C(k - i, j)."""
    i, j = np.meshgrid(np.arange(k + 1), np.arange(k + 1), indexing="ij")
    keep = (i + j) <= k
    i, j = i[keep].astype(np.int64), j[keep].astype(np.int64)
    lf = _logfact(k)
    logc = lf[k] - lf[i] - lf[j] - lf[k - i - j]
    return i, j, logc


_g_cache: dict = {}


def _g_on_triangle(spec: ReinforcementSpec, params, k: int) -> np.ndarray:
    key = (id(spec), params.p, k)
    cached = _g_cache.get(key)
    if cached is not None:
        return cached
    i, j, _ = _triangle(k)
    vals = eval_g_arrays(spec, params, i / k, j / k)
    if k <= 256 and len(_g_cache) < 4096:
        _g_cache[key] = vals
    return vals


@dataclass(frozen=True)
class LatticePoint:
    """A point (r1/n, r2/n) of the scaled count lattice."""

    n: int
    r1: int
    r2: int

    def __post_init__(self):
        if self.r1 < 0 or self.r2 < 0 or self.r1 + self.r2 > self.n:
            raise DomainError(f"({self.r1}, {self.r2}) not a lattice point for n={self.n}")


@dataclass(frozen=True)
class GapBound:
    """A certified upper bound on a sup-gap, tagged by the bound family."""

    n: int
    bound: float
    lemma: str

    def __post_init__(self):
        if self.bound < 0:
            raise ValueError("bound must be non-negative")


# ---------------------------------------------------------------------------
# Per-k building blocks, vectorized over evaluation points.
# ---------------------------------------------------------------------------

def bernstein_many(spec, params, k: int, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """E[g(V1/k, V2/k)] under trinomial sampling at each point (x, y)."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    ys = np.atleast_1d(np.asarray(ys, dtype=float))
    i, j, logc = _triangle(k)
    g_tri = _g_on_triangle(spec, params, k)
    zs = 1.0 - xs - ys
    if len(xs) <= len(i):
        out = np.empty(len(xs))
        for t, (x, y, z) in enumerate(zip(xs, ys, zs)):
            logw = logc + xlogy(i, x) + xlogy(j, y) + xlogy(k - i - j, max(z, 0.0))
            out[t] = np.exp(logw) @ g_tri
        return out
    out = np.zeros(len(xs))
    zc = np.maximum(zs, 0.0)
    for t in range(len(i)):
        logw = logc[t] + xlogy(i[t], xs) + xlogy(j[t], ys) + xlogy(int(k - i[t] - j[t]), zc)
        out += np.exp(logw) * g_tri[t]
    return out


def hypergeom_many(spec, params, n: int, k: int, r1s: np.ndarray, r2s: np.ndarray) -> np.ndarray:
    """E[g(V1/k, V2/k)] under sampling without replacement from counts
    (r1, r2, n - r1 - r2), at each lattice point."""
    if k > n:
        raise SampleSizeError(f"k={k} exceeds population n={n}")
    r1s = np.atleast_1d(np.asarray(r1s, dtype=np.int64))
    r2s = np.atleast_1d(np.asarray(r2s, dtype=np.int64))
    i, j, _ = _triangle(k)
    g_tri = _g_on_triangle(spec, params, k)
    lf = _logfact(n)
    log_nk = lf[n] - lf[k] - lf[n - k]
    r3s = n - r1s - r2s
    m = k - i - j

    def log_binom(ns_arr, ks_arr):
        return lf[ns_arr] - lf[ks_arr] - lf[ns_arr - ks_arr]

    if len(r1s) <= len(i):
        out = np.empty(len(r1s))
        for t, (r1, r2, r3) in enumerate(zip(r1s, r2s, r3s)):
            valid = (i <= r1) & (j <= r2) & (m <= r3)
            iv, jv, mv = i[valid], j[valid], m[valid]
            logw = (
                log_binom(np.full_like(iv, r1), iv)
                + log_binom(np.full_like(jv, r2), jv)
                + log_binom(np.full_like(mv, r3), mv)
                - log_nk
            )
            out[t] = np.exp(logw) @ g_tri[valid]
        return out
    out = np.zeros(len(r1s))
    for t in range(len(i)):
        valid = (r1s >= i[t]) & (r2s >= j[t]) & (r3s >= m[t])
        if not valid.any():
            continue
        logw = (
            log_binom(r1s[valid], np.int64(i[t]))
            + log_binom(r2s[valid], np.int64(j[t]))
            + log_binom(r3s[valid], np.int64(m[t]))
            - log_nk
        )
        out[valid] += np.exp(logw) * g_tri[t]
    return out


# ---------------------------------------------------------------------------
# Support selection under the cost guard.
# ---------------------------------------------------------------------------

def _per_k_gap_bound(spec, params, k: int) -> float:
    """Certified bound on sup |E_k[g] - g| at a single sample size k."""
    if spec.hessian_sup is not None:
        m = max(g_hessian_sup(spec, params))
        return 0.75 * m / k
    if spec.holder is not None:
        L, alpha = g_holder(spec, params)
        return 2.0 ** (-alpha / 2.0) * L * k ** (-alpha / 2.0)
    return 1.0  # g is [0, 1]-valued, so any gap is at most 1


def _capped_support(spec, params, law: SampleSizeLaw, n: int, cost_guard: float):
    """Trim negligible top mass, then cap the support so sum k^2 stays within
    the cost guard.  Returns (ks, probs, folded_mass, fold_bound)."""
    ks, probs = law.pmf_vector(n)
    nz = probs > 0
    ks, probs = ks[nz], probs[nz]
    if len(ks) == 0:
        raise SampleSizeError(f"law {law.describe()} has empty support at n={n}")
    # drop top ks carrying less than _MASS_TOL total mass
    tail_from = np.cumsum(probs[::-1])[::-1]
    keep_mass = tail_from > _MASS_TOL
    if not keep_mass.all():
        first_drop = int(np.argmin(keep_mass))
        ks_kept, probs_kept = ks[:first_drop], probs[:first_drop]
    else:
        ks_kept, probs_kept = ks, probs
    cost = np.cumsum(ks_kept.astype(float) ** 2)
    within = cost <= cost_guard
    if not within.any():
        raise CostGuardError(
            f"evaluating {law.describe()} at n={n} needs k^2={ks_kept[0]**2} > guard {cost_guard}"
        )
    cap = int(np.argmin(within)) if not within.all() else len(ks_kept)
    ks_used, probs_used = ks_kept[:cap], probs_kept[:cap]
    folded_mass = max(0.0, 1.0 - float(probs_used.sum()))
    if folded_mass > 0 and cap < len(ks_kept):
        fold_bound = folded_mass * _per_k_gap_bound(spec, params, int(ks_kept[cap]))
    elif folded_mass > 0:
        fold_bound = folded_mass * _per_k_gap_bound(spec, params, int(ks_kept[-1]))
    else:
        fold_bound = 0.0
    return ks_used, probs_used, folded_mass, fold_bound


# ---------------------------------------------------------------------------
# The four operators.
# ---------------------------------------------------------------------------

def _fixed_pmf(mu, n: int | None = None):
    """Normalize an A1 law or an explicit weight vector on {1..M} to (ks, probs)."""
    if isinstance(mu, SampleSizeLaw):
        if mu.scenario != "A1":
            raise ValueError(f"expected a fixed (scenario A1) law, got {mu.describe()}")
        ks, probs = mu.pmf_vector(n if n is not None else mu.support(1)[1])
        nz = probs > 0
        return ks[nz], probs[nz]
    probs = np.asarray(mu, dtype=float)
    ks = np.arange(1, len(probs) + 1)
    nz = probs > 0
    return ks[nz], probs[nz]


def h0_eval(spec, params, mu, x: float, y: float, max_support: int = DEFAULT_MAX_SUPPORT) -> float:
    """Polynomial smoother: sum_k mu(k) E[g(V1/k, V2/k)] with trinomial counts."""
    check_simplex(x, y)
    ks, probs = _fixed_pmf(mu)
    if ks.max() > max_support:
        raise CostGuardError(f"support M={ks.max()} exceeds guard {max_support}")
    return float(math.fsum(p * float(bernstein_many(spec, params, int(k), x, y)[0]) for k, p in zip(ks, probs)))


def h0_eval_many(spec, params, mu, xs, ys, max_support: int = DEFAULT_MAX_SUPPORT) -> np.ndarray:
    ks, probs = _fixed_pmf(mu)
    if ks.max() > max_support:
        raise CostGuardError(f"support M={ks.max()} exceeds guard {max_support}")
    out = np.zeros(len(np.atleast_1d(xs)))
    for k, p in zip(ks, probs):
        out += p * bernstein_many(spec, params, int(k), xs, ys)
    return out


def hn_eval_detailed(spec, params, law, n: int, x: float, y: float, cost_guard: float = DEFAULT_COST_GUARD):
    """Per-epoch smoother with the n-indexed law; support capped by the cost
    guard, tail mass folded onto g(x, y).  Returns (value, fold_bound)."""
    check_simplex(x, y)
    ks, probs, folded, fold_bound = _capped_support(spec, params, law, n, cost_guard)
    val = math.fsum(p * float(bernstein_many(spec, params, int(k), x, y)[0]) for k, p in zip(ks, probs))
    if folded > 0:
        val += folded * eval_g(spec, params, x, y)
    return float(val), fold_bound


def hn_eval(spec, params, law, n: int, x: float, y: float, cost_guard: float = DEFAULT_COST_GUARD) -> float:
    return hn_eval_detailed(spec, params, law, n, x, y, cost_guard)[0]


def hn_eval_many(spec, params, law, n: int, xs, ys, cost_guard: float = DEFAULT_COST_GUARD):
    """Vectorized hn over points; returns (values, fold_bound)."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    ys = np.atleast_1d(np.asarray(ys, dtype=float))
    ks, probs, folded, fold_bound = _capped_support(spec, params, law, n, cost_guard)
    out = np.zeros(len(xs))
    for k, p in zip(ks, probs):
        out += p * bernstein_many(spec, params, int(k), xs, ys)
    if folded > 0:
        out += folded * eval_g_arrays(spec, params, xs, ys)
    return out, fold_bound


def fn_eval(spec, params, mu, n: int, r1: int, r2: int) -> float:
    """Hypergeometric analogue of the polynomial smoother at a lattice point."""
    LatticePoint(n, r1, r2)
    ks, probs = _fixed_pmf(mu)
    if ks.max() > n:
        raise SampleSizeError(f"law support max {ks.max()} exceeds n={n} without replacement")
    return float(math.fsum(p * float(hypergeom_many(spec, params, n, int(k), r1, r2)[0]) for k, p in zip(ks, probs)))


def fn_eval_many(spec, params, mu, n: int, r1s, r2s) -> np.ndarray:
    ks, probs = _fixed_pmf(mu)
    if ks.max() > n:
        raise SampleSizeError(f"law support max {ks.max()} exceeds n={n} without replacement")
    out = np.zeros(len(np.atleast_1d(r1s)))
    for k, p in zip(ks, probs):
        out += p * hypergeom_many(spec, params, n, int(k), r1s, r2s)
    return out


def en_eval_detailed(spec, params, law, n: int, r1: int, r2: int, cost_guard: float = DEFAULT_COST_GUARD):
    LatticePoint(n, r1, r2)
    lo, hi = law.support(n)
    if hi > n:
        raise SampleSizeError(f"law support max {hi} exceeds n={n} without replacement")
    ks, probs, folded, fold_bound = _capped_support(spec, params, law, n, cost_guard)
    val = math.fsum(p * float(hypergeom_many(spec, params, n, int(k), r1, r2)[0]) for k, p in zip(ks, probs))
    if folded > 0:
        val += folded * eval_g(spec, params, r1 / n, r2 / n)
    return float(val), fold_bound


def en_eval(spec, params, law, n: int, r1: int, r2: int, cost_guard: float = DEFAULT_COST_GUARD) -> float:
    return en_eval_detailed(spec, params, law, n, r1, r2, cost_guard)[0]


def en_eval_many(spec, params, law, n: int, r1s, r2s, cost_guard: float = DEFAULT_COST_GUARD):
    r1s = np.atleast_1d(np.asarray(r1s, dtype=np.int64))
    r2s = np.atleast_1d(np.asarray(r2s, dtype=np.int64))
    lo, hi = law.support(n)
    if hi > n:
        raise SampleSizeError(f"law support max {hi} exceeds n={n} without replacement")
    ks, probs, folded, fold_bound = _capped_support(spec, params, law, n, cost_guard)
    out = np.zeros(len(r1s))
    for k, p in zip(ks, probs):
        out += p * hypergeom_many(spec, params, n, int(k), r1s, r2s)
    if folded > 0:
        out += folded * eval_g_arrays(spec, params, r1s / n, r2s / n)
    return out, fold_bound


# ---------------------------------------------------------------------------
# Drift functions.
# ---------------------------------------------------------------------------

def drift(kind: str, spec, params, mu_or_law, point, n: int | None = None) -> np.ndarray:
    """Mean-field drift at a point.

    'h'  : (q1 H0 - x, q2 (1 - H0) - y)          with the fixed law mu
    'hhat': same with g in place of H0
    'G'  : 3-d version appending (1 - q1) H0 - z  on the 3-d domain
    'Ghat': 3-d version with g
    """
    q1, q2 = params.q1, params.q2
    if kind in ("h", "hhat"):
        x, y = point
        check_simplex(x, y)
        base = h0_eval(spec, params, mu_or_law, x, y) if kind == "h" else eval_g(spec, params, x, y)
        return np.array([q1 * base - x, q2 * (1.0 - base) - y])
    if kind in ("G", "Ghat"):
        x, y, z = point
        if min(x, y, z) < -1e-12 or x + y + z > 1.0 + 1e-12:
            raise DomainError(f"point {point} outside the 3-d simplex")
        check_simplex(x, y)
        base = h0_eval(spec, params, mu_or_law, x, y) if kind == "G" else eval_g(spec, params, x, y)
        return np.array([q1 * base - x, q2 * (1.0 - base) - y, (1.0 - q1) * base - z])
    raise ValueError(f"unknown drift kind {kind!r}")


# ---------------------------------------------------------------------------
# Derivatives of the polynomial smoother (telescoping form).
# ---------------------------------------------------------------------------

def h0_partial_many(spec, params, mu, xs, ys, axis: int) -> np.ndarray:
    """Exact partial derivative of the polynomial smoother via the telescoped
    difference sum: k-weighted first differences of g on the k-lattice against
    the degree-(k-1) trinomial weights."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    ys = np.atleast_1d(np.asarray(ys, dtype=float))
    ks, probs = _fixed_pmf(mu)
    out = np.zeros(len(xs))
    for k, p in zip(ks, probs):
        k = int(k)
        i, j, logc = _triangle(k - 1)
        if axis == 0:
            dg = eval_g_arrays(spec, params, (i + 1) / k, j / k) - eval_g_arrays(spec, params, i / k, j / k)
        else:
            dg = eval_g_arrays(spec, params, i / k, (j + 1) / k) - eval_g_arrays(spec, params, i / k, j / k)
        zc = np.maximum(1.0 - xs - ys, 0.0)
        if len(xs) <= len(i):
            vals = np.empty(len(xs))
            for t, (x, y, z) in enumerate(zip(xs, ys, zc)):
                logw = logc + xlogy(i, x) + xlogy(j, y) + xlogy(k - 1 - i - j, z)
                vals[t] = np.exp(logw) @ dg
        else:
            vals = np.zeros(len(xs))
            for t in range(len(i)):
                logw = logc[t] + xlogy(i[t], xs) + xlogy(j[t], ys) + xlogy(int(k - 1 - i[t] - j[t]), zc)
                vals += np.exp(logw) * dg[t]
        out += p * k * vals
    return out


# ---------------------------------------------------------------------------
# Certified gap bounds and the exact with/without-replacement gap.
# ---------------------------------------------------------------------------

def bernstein_gap_bound(spec, params, law: SampleSizeLaw, n: int, lemma: str) -> GapBound:
    """Certified upper bound on sup |smoother - g| at epoch n.

    A1 (Hölder):  2^(-a/2) L E[K^(-a/2)]
    A2 (C1):      (1/sqrt2 + 1/2) min over the two modulus expressions
    A3 (C2):      (3/4) max(M11, M12, M22) E[K^-1]
    """
    if lemma == "A1":
        L, alpha = g_holder(spec, params)
        val = 2.0 ** (-alpha / 2.0) * L * law.neg_moment(n, alpha / 2.0)
        return GapBound(n, float(val), "A1")
    if lemma == "A2":
        if spec.hessian_sup is None and spec.grad_modulus is None:
            raise CapabilityError(f"spec {spec.name!r} cannot certify a gradient modulus")
        c = 1.0 / math.sqrt(2.0) + 0.5
        e1 = law.neg_moment(n, 1.0)
        eh = law.neg_moment(n, 0.5)
        first = modulus_bound(spec, params, math.sqrt(e1)) * math.sqrt(e1)
        second = modulus_bound(spec, params, e1 / eh) * eh
        return GapBound(n, float(c * min(first, second)), "A2")
    if lemma == "A3":
        m = max(g_hessian_sup(spec, params))
        return GapBound(n, float(0.75 * m * law.neg_moment(n, 1.0)), "A3")
    raise ValueError(f"unknown lemma {lemma!r}; expected A1, A2 or A3")


def applicable_lemmas(spec: ReinforcementSpec) -> tuple[str, ...]:
    out = []
    if spec.holder is not None:
        out.append("A1")
    if spec.hessian_sup is not None or spec.grad_modulus is not None:
        out.append("A2")
    if spec.hessian_sup is not None:
        out.append("A3")
    return tuple(out)


@dataclass(frozen=True)
class HypergeomGapResult:
    n: int
    value: float
    at: LatticePoint
    exact: bool


def hypergeom_gap(spec, params, mu, n: int, exact_limit: int = 1000, strata: int = 200) -> HypergeomGapResult:
    """Sup over the count lattice of |Fn - H0|.

    Exact maximization over every lattice point for n <= exact_limit; a
    stratified sublattice (stride ~ n/strata) above that, flagged approximate.
    """
    ks, _ = _fixed_pmf(mu)
    if ks.max() > n:
        raise SampleSizeError(f"law support max {ks.max()} exceeds n={n}")
    if n <= exact_limit:
        r1, r2 = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
        keep = (r1 + r2) <= n
        r1, r2 = r1[keep].astype(np.int64), r2[keep].astype(np.int64)
        exact = True
    else:
        stride = max(1, n // strata)
        grid = np.arange(0, n + 1, stride)
        r1, r2 = np.meshgrid(grid, grid, indexing="ij")
        keep = (r1 + r2) <= n
        r1, r2 = r1[keep].astype(np.int64), r2[keep].astype(np.int64)
        exact = False
    f_vals = fn_eval_many(spec, params, mu, n, r1, r2)
    h_vals = h0_eval_many(spec, params, mu, r1 / n, r2 / n, max_support=max(DEFAULT_MAX_SUPPORT, int(ks.max())))
    gaps = np.abs(f_vals - h_vals)
    t = int(np.argmax(gaps))
    return HypergeomGapResult(n, float(gaps[t]), LatticePoint(n, int(r1[t]), int(r2[t])), exact)
