"""Domain types for the four-colour urn process and its exact one-epoch transition.

The urn holds one ball per past customer, coloured by (product, satisfaction):
colour 1 = satisfied with A, colour 2 = satisfied with B, colour 3 = unhappy
with A, colour 4 = unhappy with B.  Each epoch samples ``k`` past customers,
evaluates the reinforcement rule on the sampled satisfied proportions and adds
exactly one new ball.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import InvalidSizeError, ReinforcementRangeError, SampleSizeError

PROB_TOL = 1e-12


@dataclass(frozen=True)
class ModelParams:
    """Scalar parameters of the process.

    p is the memory parameter, q the initial choice bias, q1/q2 the
    satisfaction probabilities for products A/B, N the i.i.d. warm-up horizon.
    """

    p: float
    q: float
    q1: float
    q2: float
    N: int

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0 and 0.0 <= self.q <= 1.0):
            raise ValueError(f"p and q must lie in [0, 1], got p={self.p}, q={self.q}")
        if not (0.0 < self.q1 < 1.0 and 0.0 < self.q2 < 1.0):
            raise ValueError(f"q1 and q2 must lie strictly in (0, 1), got {self.q1}, {self.q2}")
        if self.N < 1:
            raise ValueError(f"N must be >= 1, got {self.N}")


class SamplingScheme(enum.Enum):
    WITH_REPLACEMENT = "with"
    WITHOUT_REPLACEMENT = "without"


class SampleMode(enum.Enum):
    """Fast draws colour counts directly; NaiveIndices draws customer indices."""

    FAST = "fast"
    NAIVE_INDICES = "naive"


@dataclass(frozen=True)
class UrnState:
    """Balanced urn configuration after epoch n: counts of the four colours."""

    n: int
    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        if min(self.a, self.b, self.c, self.d) < 0:
            raise ValueError(f"negative colour count in {self}")
        if self.a + self.b + self.c + self.d != self.n:
            raise ValueError(f"counts must sum to n: {self}")

    @property
    def counts(self) -> tuple[int, int, int, int]:
        return (self.a, self.b, self.c, self.d)


@dataclass(frozen=True)
class SampleCounts:
    """Colour tallies of one sample of size k; v1, v2 are the satisfied counts."""

    k: int
    v1: int
    v2: int
    v3: int
    v4: int

    def __post_init__(self):
        if self.v1 + self.v2 + self.v3 + self.v4 != self.k:
            raise ValueError(f"tallies must sum to k: {self}")


def init_history(params: ModelParams, rng: np.random.Generator) -> UrnState:
    """Draw the first N customers i.i.d.: product A w.p. q, then satisfaction
    Ber(q1) or Ber(q2) given the product."""
    chose_a = rng.random(params.N) < params.q
    sat = rng.random(params.N)
    a = int(np.sum(chose_a & (sat < params.q1)))
    c = int(np.sum(chose_a)) - a
    b = int(np.sum(~chose_a & (sat < params.q2)))
    d = params.N - a - b - c
    return UrnState(n=params.N, a=a, b=b, c=c, d=d)


def draw_sample_counts(
    state: UrnState,
    scheme: SamplingScheme,
    k: int,
    rng: np.random.Generator,
    mode: SampleMode = SampleMode.FAST,
) -> SampleCounts:
    """Sample k past customers and tally their colours.

    Fast mode draws the counts from the exact multinomial (with replacement)
    or multivariate hypergeometric (without) law; NaiveIndices draws customer
    indices per the index law and tallies, serving as the correctness oracle.
    The two modes are distributionally identical by exchangeability.
    """
    if k < 1:
        raise InvalidSizeError(f"sample size must be >= 1, got {k}")
    if scheme is SamplingScheme.WITHOUT_REPLACEMENT and k > state.n:
        raise SampleSizeError(f"cannot draw {k} without replacement from {state.n} customers")

    if mode is SampleMode.FAST:
        if scheme is SamplingScheme.WITH_REPLACEMENT:
            pvals = np.asarray(state.counts, dtype=float) / state.n
            v = rng.multinomial(k, pvals)
        else:
            v = rng.multivariate_hypergeometric(list(state.counts), k, method="marginals")
        return SampleCounts(k, int(v[0]), int(v[1]), int(v[2]), int(v[3]))

    # NaiveIndices: customers 1..a are colour 1, the next b colour 2, etc.
    # Index order is irrelevant by exchangeability.
    if scheme is SamplingScheme.WITH_REPLACEMENT:
        idx = rng.integers(0, state.n, size=k)
    else:
        idx = rng.choice(state.n, size=k, replace=False)
    edges = np.cumsum(state.counts)
    v1 = int(np.sum(idx < edges[0]))
    v2 = int(np.sum((idx >= edges[0]) & (idx < edges[1])))
    v3 = int(np.sum((idx >= edges[1]) & (idx < edges[2])))
    v4 = k - v1 - v2 - v3
    return SampleCounts(k, v1, v2, v3, v4)


def colour_probabilities(g: float, q1: float, q2: float) -> np.ndarray:
    """Probabilities of the new ball's colour given the realized g value:
    (q1*g, q2*(1-g), (1-q1)*g, (1-q2)*(1-g))."""
    probs = np.array([q1 * g, q2 * (1.0 - g), (1.0 - q1) * g, (1.0 - q2) * (1.0 - g)])
    s = probs.sum()
    if abs(s - 1.0) > PROB_TOL:
        raise AssertionError(f"colour probabilities sum to {s}, not 1")
    return probs


def step(
    state: UrnState,
    params: ModelParams,
    scheme: SamplingScheme,
    reinforcement,
    law,
    rng: np.random.Generator,
    mode: SampleMode = SampleMode.FAST,
) -> UrnState:
    """Run one epoch: draw K_n, sample, evaluate g on the sampled satisfied
    proportions and add one ball of the resulting colour."""
    if state.n < params.N:
        raise ValueError(f"step requires n >= N, got n={state.n} < N={params.N}")
    k = int(law.sample(state.n, rng))
    counts = draw_sample_counts(state, scheme, k, rng, mode=mode)
    f_val = float(reinforcement.f(counts.v1 / k, counts.v2 / k))
    if not (-PROB_TOL <= f_val <= 1.0 + PROB_TOL):
        raise ReinforcementRangeError(
            f"F({counts.v1 / k}, {counts.v2 / k}) = {f_val} outside [0, 1]"
        )
    g = params.p * f_val + (1.0 - params.p) * (1.0 - f_val)
    probs = colour_probabilities(g, params.q1, params.q2)
    colour = int(np.searchsorted(np.cumsum(probs), rng.random(), side="right"))
    colour = min(colour, 3)
    delta = [0, 0, 0, 0]
    delta[colour] = 1
    return UrnState(
        n=state.n + 1,
        a=state.a + delta[0],
        b=state.b + delta[1],
        c=state.c + delta[2],
        d=state.d + delta[3],
    )


def walker_position(state: UrnState) -> int:
    """Signed walk position S_n = (a + c) - (b + d) = 2(a + c) - n."""
    return (state.a + state.c) - (state.b + state.d)
