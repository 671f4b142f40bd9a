"""Contraction verification, Banach iteration to the unique root, and the
local linearization scalars that drive regime classification.

The self-map is (x, y) -> (q1 * B(x, y), q2 * (1 - B(x, y))) where B is the
polynomial smoother (fixed-law scenario) or g itself (varying-law scenario).
A margin (q1 + q2) * max sup |partials of B| below one makes the map a
contraction in the 1-norm, so plain iteration converges geometrically.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConvergenceError
from .laws import SampleSizeLaw
from .operators import h0_eval, h0_partial_many
from .reinforcement import ReinforcementSpec, eval_g, grad_g, simplex_grid

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 10_000
TELESCOPE_MAX_M = 20
_FD_STEP = 1e-5


@dataclass
class FixedPointReport:
    """Root of the drift, its linearization, and the derived regime scalars."""

    map_kind: str            # "H" (fixed law, smoother-based) or "Hhat" (g-based)
    q1: float
    q2: float
    x_star: float
    y_star: float
    residual: float
    iterations: int
    tol: float
    margin: float | None = None
    alpha_star: float | None = None
    beta_star: float | None = None
    kappa: float | None = None
    rho: float | None = None
    z_star: float | None = None
    caveats: list = field(default_factory=list)

    @property
    def complete(self) -> bool:
        return self.alpha_star is not None


def _map_kind_for(law: SampleSizeLaw) -> str:
    return "H" if law.scenario == "A1" else "Hhat"


def _apply_map(map_kind, spec, params, mu_or_law, x, y):
    if map_kind == "H":
        base = h0_eval(spec, params, mu_or_law, x, y)
    else:
        base = eval_g(spec, params, x, y)
    return params.q1 * base, params.q2 * (1.0 - base)


def _smoother_partials(spec, params, mu, xs, ys):
    """(d/dx, d/dy) of the polynomial smoother on arrays of points: exact
    telescoped sums for small supports, central differences otherwise."""
    ks = mu.pmf_vector(10**9)[0] if isinstance(mu, SampleSizeLaw) else np.arange(1, len(np.atleast_1d(mu)) + 1)
    if ks.max() <= TELESCOPE_MAX_M:
        dx = h0_partial_many(spec, params, mu, xs, ys, axis=0)
        dy = h0_partial_many(spec, params, mu, xs, ys, axis=1)
        return dx, dy
    from .operators import h0_eval_many

    h = _FD_STEP
    def partial(axis):
        dxs = np.where(xs - h >= 0, xs - h, xs) if axis == 0 else xs
        # central where possible, forward elsewhere (second-order not needed
        # for a margin estimate on interior-heavy grids)
        lo_x = np.clip(xs - (h if axis == 0 else 0.0), 0.0, None)
        lo_y = np.clip(ys - (h if axis == 1 else 0.0), 0.0, None)
        hi_x = xs + (h if axis == 0 else 0.0)
        hi_y = ys + (h if axis == 1 else 0.0)
        ok = (hi_x + hi_y) <= 1.0
        hi_x = np.where(ok, hi_x, xs)
        hi_y = np.where(ok, hi_y, ys)
        span = (hi_x - lo_x) if axis == 0 else (hi_y - lo_y)
        vals_hi = h0_eval_many(spec, params, mu, hi_x, hi_y, max_support=int(ks.max()))
        vals_lo = h0_eval_many(spec, params, mu, lo_x, lo_y, max_support=int(ks.max()))
        return (vals_hi - vals_lo) / np.where(span > 0, span, 1.0)

    return partial(0), partial(1)


def _g_partials(spec, params, xs, ys):
    if spec.grad_f is not None:
        fx, fy = spec.grad_f(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float))
        s = 2.0 * params.p - 1.0
        return s * np.asarray(fx, dtype=float), s * np.asarray(fy, dtype=float)
    pairs = [grad_g(spec, params, float(x), float(y)) for x, y in zip(np.atleast_1d(xs), np.atleast_1d(ys))]
    arr = np.asarray(pairs)
    return arr[:, 0], arr[:, 1]


def contraction_margin(map_kind, spec, params, mu_or_law, grid: int = 200) -> float:
    """(q1 + q2) * max of grid-sups of |d/dx| and |d/dy| of the map's base
    function.  A value below 1 certifies (up to the grid) a unique root."""
    xs, ys = simplex_grid(grid)
    if map_kind == "H":
        dx, dy = _smoother_partials(spec, params, mu_or_law, xs, ys)
    else:
        dx, dy = _g_partials(spec, params, xs, ys)
    return float((params.q1 + params.q2) * max(np.max(np.abs(dx)), np.max(np.abs(dy))))


def solve_fixed_point(
    map_kind,
    spec,
    params,
    mu_or_law,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    start: tuple[float, float] | None = None,
    margin: float | None = None,
    margin_grid: int = 200,
) -> FixedPointReport:
    """Banach-iterate the self-map from (q1/2, q2/2) until the sup-norm step
    drops below tol.  A margin >= 1 downgrades to warn-and-iterate: the root
    may still exist and ensemble comparison stays meaningful."""
    if margin is None:
        margin = contraction_margin(map_kind, spec, params, mu_or_law, grid=margin_grid)
    caveats = []
    if margin >= 1.0:
        caveats.append(
            f"contraction margin {margin:.4g} >= 1: uniqueness not certified, iterating anyway"
        )
    x, y = start if start is not None else (params.q1 / 2.0, params.q2 / 2.0)
    for it in range(1, max_iter + 1):
        nx, ny = _apply_map(map_kind, spec, params, mu_or_law, x, y)
        step = max(abs(nx - x), abs(ny - y))
        x, y = nx, ny
        if step < tol:
            break
    else:
        raise ConvergenceError(
            f"no convergence within {max_iter} iterations (margin {margin:.4g})",
            last_iterate=(x, y),
        )
    mx, my = _apply_map(map_kind, spec, params, mu_or_law, x, y)
    residual = max(abs(mx - x), abs(my - y))
    return FixedPointReport(
        map_kind=map_kind,
        q1=params.q1,
        q2=params.q2,
        x_star=x,
        y_star=y,
        residual=residual,
        iterations=it,
        tol=tol,
        margin=margin,
        caveats=caveats,
    )


def local_linearization(report: FixedPointReport, spec, params, mu_or_law) -> FixedPointReport:
    """Fill the gradient of the map's base function at the root and the
    derived scalars kappa = q1 a* - q2 b*, rho = min(1, 1 - kappa) and
    z* = (1 - q1) x* / q1."""
    xs = np.array([report.x_star])
    ys = np.array([report.y_star])
    if report.map_kind == "H":
        dx, dy = _smoother_partials(spec, params, mu_or_law, xs, ys)
    else:
        dx, dy = _g_partials(spec, params, xs, ys)
    alpha, beta = float(dx[0]), float(dy[0])
    kappa = params.q1 * alpha - params.q2 * beta
    return replace(
        report,
        alpha_star=alpha,
        beta_star=beta,
        kappa=kappa,
        rho=min(1.0, 1.0 - kappa),
        z_star=(1.0 - params.q1) * report.x_star / params.q1,
    )


def analyze(spec, params, law, mu=None, tol: float = DEFAULT_TOL, margin_grid: int = 200) -> FixedPointReport:
    """Margin, root and linearization in one call; the map is chosen by the
    law's scenario (fixed law -> smoother-based, varying law -> g-based)."""
    map_kind = _map_kind_for(law)
    mu_or_law = mu if mu is not None else law
    report = solve_fixed_point(map_kind, spec, params, mu_or_law, tol=tol, margin_grid=margin_grid)
    return local_linearization(report, spec, params, mu_or_law)
