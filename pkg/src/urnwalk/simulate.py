"""Reproducible trajectories and Monte Carlo ensembles with checkpointed stats.

Seeding: every random stream derives from the run seed through a fixed
splitmix-style 64-bit mix, documented here so runs are reproducible within
this implementation (cross-implementation comparisons are statistics-only):

    stream(seed, index) = scramble(seed + (index + 1) * 0x9E3779B97F4A7C15)

with two splitmix64 finalizer rounds as the scramble, feeding PCG64.
Replication r of a run uses index r; the lockstep ensemble engine uses one
stream at index 2^40 + replications.

Engines: `reference` advances one replication at a time (one PCG64 per
replication, exact per-replication determinism, supports the naive-index
sampling oracle); `vectorized` advances all replications in lockstep through
numpy's O(1) binomial/hypergeometric samplers and is the default, since a
per-step Python loop cannot meet the ensemble runtime budgets.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ReinforcementRangeError, SampleSizeError
from .laws import SampleSizeLaw
from .model import (
    ModelParams,
    SampleMode,
    SamplingScheme,
    UrnState,
    init_history,
    step,
    walker_position,
)
from .reinforcement import ReinforcementSpec

_GOLDEN = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1
_ENSEMBLE_BASE = 1 << 40


def mix_seed(seed: int, index: int) -> int:
    """Fixed splitmix-style mix of (seed, stream index) into a 64-bit key."""
    z = (seed + (index + 1) * _GOLDEN) & _MASK64
    for mult in (0xBF58476D1CE4E5B9, 0x94D049BB133111EB):
        z ^= z >> 30
        z = (z * mult) & _MASK64
    z ^= z >> 31
    return z


def stream(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(mix_seed(seed, index)))


def default_checkpoints(n_max: int, n_init: int) -> tuple[int, ...]:
    """Geometric half-decade checkpoints in (N, n_max], always ending at n_max."""
    cps = []
    e = 3.0
    while 10**e < n_max:
        v = int(round(10**e))
        if v > n_init:
            cps.append(v)
        e += 0.5
    cps.append(n_max)
    return tuple(sorted(set(cps)))


@dataclass(frozen=True)
class RunConfig:
    params: ModelParams
    spec: ReinforcementSpec
    scheme: SamplingScheme
    law: SampleSizeLaw
    n_max: int
    checkpoints: tuple[int, ...]
    seed: int
    replications: int
    engine: str = "vectorized"
    mode: SampleMode = SampleMode.FAST
    keep_full_path: bool = False

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.n_max <= self.params.N:
            raise ValueError("n_max must exceed the initialization horizon N")
        cps = tuple(self.checkpoints)
        if any(c <= self.params.N or c > self.n_max for c in cps):
            raise ValueError(f"checkpoints must lie in (N, n_max]: {cps}")
        if list(cps) != sorted(set(cps)):
            raise ValueError("checkpoints must be strictly ascending")
        if self.engine not in ("vectorized", "reference"):
            raise ValueError(f"unknown engine {self.engine!r}")
        if self.scheme is SamplingScheme.WITHOUT_REPLACEMENT:
            lo, hi = self.law.support(self.params.N)
            if hi > self.params.N:
                raise SampleSizeError(
                    f"law {self.law.describe()} can draw k={hi} > n={self.params.N} without replacement"
                )


@dataclass
class Trajectory:
    """Checkpoint records of one replication."""

    ns: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    walker: np.ndarray
    full_path: np.ndarray | None = None


@dataclass
class EnsembleStats:
    checkpoints: np.ndarray       # (C,)
    proportions: np.ndarray       # (C, R, 3): (a/n, b/n, c/n) per replication
    means: np.ndarray             # (C, 3)
    covs: np.ndarray              # (C, 3, 3) sample covariance across replications
    replications: int
    runtime_seconds: float = 0.0

    def scaled_deviations(self, theta_star: np.ndarray, scale: float, checkpoint_index: int = -1) -> np.ndarray:
        """(R, 3) matrix scale * (proportions - theta_star) at one checkpoint."""
        return scale * (self.proportions[checkpoint_index] - np.asarray(theta_star))


def run_trajectory(config: RunConfig, replication_index: int) -> Trajectory:
    """One replication on the reference engine: deterministic given
    (seed, replication_index) regardless of how other replications run."""
    rng = stream(config.seed, replication_index)
    state = init_history(config.params, rng)
    cps = np.asarray(config.checkpoints)
    recs = np.zeros((len(cps), 5), dtype=np.int64)
    path = np.zeros(config.n_max - config.params.N + 1, dtype=np.int64) if config.keep_full_path else None
    if path is not None:
        path[0] = walker_position(state)
    ci = 0
    while state.n < config.n_max:
        state = step(state, config.params, config.scheme, config.spec, config.law, rng, mode=config.mode)
        if path is not None:
            path[state.n - config.params.N] = walker_position(state)
        if ci < len(cps) and state.n == cps[ci]:
            recs[ci] = (state.n, state.a, state.b, state.c, state.d)
            ci += 1
    return Trajectory(
        ns=recs[:, 0],
        a=recs[:, 1],
        b=recs[:, 2],
        c=recs[:, 3],
        d=recs[:, 4],
        walker=2 * (recs[:, 1] + recs[:, 3]) - recs[:, 0],
        full_path=path,
    )


def _run_ensemble_vectorized(config: RunConfig) -> np.ndarray:
    """All replications in lockstep; returns (C, R, 3) colour counts a, b, c."""
    params, spec, law = config.params, config.spec, config.law
    R = config.replications
    q, q1, q2, p = params.q, params.q1, params.q2, params.p
    rng = stream(config.seed, _ENSEMBLE_BASE + R)

    u = rng.random((params.N, R))
    sat = rng.random((params.N, R))
    chose_a = u < q
    a = np.sum(chose_a & (sat < q1), axis=0).astype(np.int64)
    c = np.sum(chose_a, axis=0).astype(np.int64) - a
    b = np.sum(~chose_a & (sat < q2), axis=0).astype(np.int64)

    cps = np.asarray(config.checkpoints)
    out = np.zeros((len(cps), R, 3), dtype=np.int64)
    ci = 0
    with_repl = config.scheme is SamplingScheme.WITH_REPLACEMENT
    for n in range(params.N, config.n_max):
        k = law.sample_many(n, rng, R)
        if with_repl:
            pa = a / n
            v1 = rng.binomial(k, pa)
            rem = 1.0 - pa
            p2 = np.divide(b / n, rem, out=np.zeros(R), where=rem > 0)
            v2 = rng.binomial(k - v1, np.clip(p2, 0.0, 1.0))
        else:
            v1 = rng.hypergeometric(a, n - a, k)
            v2 = rng.hypergeometric(b, n - a - b, k - v1)
        f_val = np.asarray(spec.f(v1 / k, v2 / k), dtype=float)
        if f_val.min() < -1e-12 or f_val.max() > 1.0 + 1e-12:
            raise ReinforcementRangeError("F left [0, 1] during the run")
        g = p * f_val + (1.0 - p) * (1.0 - f_val)
        uu = rng.random(R)
        t1 = q1 * g
        t2 = t1 + q2 * (1.0 - g)
        t3 = t2 + (1.0 - q1) * g
        a = a + (uu < t1)
        b = b + ((uu >= t1) & (uu < t2))
        c = c + ((uu >= t2) & (uu < t3))
        if ci < len(cps) and n + 1 == cps[ci]:
            out[ci, :, 0] = a
            out[ci, :, 1] = b
            out[ci, :, 2] = c
            ci += 1
    return out


def run_ensemble(config: RunConfig) -> EnsembleStats:
    """Independent replications aggregated per checkpoint, in replication
    order (a deterministic reduction)."""
    if config.replications < 2:
        raise ValueError("an ensemble needs at least 2 replications")
    t0 = time.perf_counter()
    cps = np.asarray(config.checkpoints, dtype=np.int64)
    if config.engine == "vectorized":
        counts = _run_ensemble_vectorized(config)
    else:
        counts = np.zeros((len(cps), config.replications, 3), dtype=np.int64)
        for r in range(config.replications):
            traj = run_trajectory(config, r)
            counts[:, r, 0] = traj.a
            counts[:, r, 1] = traj.b
            counts[:, r, 2] = traj.c
    props = counts / cps[:, None, None].astype(float)
    means = props.mean(axis=1)
    covs = np.stack([np.cov(props[i].T, ddof=1) for i in range(len(cps))])
    return EnsembleStats(
        checkpoints=cps,
        proportions=props,
        means=means,
        covs=covs,
        replications=config.replications,
        runtime_seconds=time.perf_counter() - t0,
    )
