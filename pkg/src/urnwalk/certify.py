"""Measured sup-gaps versus certified bounds for one (spec, law, epoch).

The measured side is a grid supremum: a lower bound of the true sup, which is
the admissible direction since the assertion is measured <= certified.  Grid
resolution adapts to the exact-summation cost so large supports still certify
within a fixed element budget; any folded tail mass contributes its recorded
bound to the measured side, keeping the comparison honest.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .laws import SampleSizeLaw
from .operators import (
    applicable_lemmas,
    bernstein_gap_bound,
    _capped_support,
    en_eval_many,
    hn_eval_many,
)
from .reinforcement import ReinforcementSpec, eval_g_arrays, simplex_grid

DEFAULT_OPS_BUDGET = 2.0e8
# Round-off allowance on the measured side: exact-summation semantics still
# leave ~1e-13 of floating-point noise, which would spuriously "violate" a
# mathematically exact bound of zero (constant or affine specs).
FP_SLACK = 1e-12


@dataclass
class GapCertification:
    spec: str
    law: str
    n: int
    measured_smoother: float        # grid-sup |Hn - g| plus fold bound
    measured_hypergeom: float | None  # lattice-sup |En - g| plus fold bound; None if k can exceed n
    grid_m: int
    lattice_stride: int
    bounds: dict                    # lemma -> certified bound
    violations: list

    @property
    def ok(self) -> bool:
        return not self.violations


def _grid_resolution(spec, params, law, n, budget: float) -> int:
    ks, _, _, _ = _capped_support(spec, params, law, n, cost_guard=1e7)
    per_point = float(np.sum(ks.astype(float) ** 2)) / 2.0 + 10.0
    pts = max(6.0, budget / per_point)
    m = int(np.sqrt(2.0 * pts)) - 1
    return int(np.clip(m, 4, 200))


def certify_gaps(
    spec: ReinforcementSpec,
    params,
    law: SampleSizeLaw,
    n: int,
    ops_budget: float = DEFAULT_OPS_BUDGET,
) -> GapCertification:
    """Measure |Hn - g| on a simplex grid and |En - g| on (a subset of) the
    count lattice, then compare with every certified bound the spec's
    declared smoothness admits."""
    m = _grid_resolution(spec, params, law, n, ops_budget)
    xs, ys = simplex_grid(m)
    h_vals, h_fold = hn_eval_many(spec, params, law, n, xs, ys)
    g_vals = eval_g_arrays(spec, params, xs, ys)
    measured_h = float(np.max(np.abs(h_vals - g_vals))) + h_fold

    lo, hi = law.support(n)
    measured_e = None
    stride = 1
    if hi <= n:
        stride = max(1, (n + 1) // (m + 1))
        grid = np.arange(0, n + 1, stride)
        if grid[-1] != n:
            grid = np.append(grid, n)
        r1, r2 = np.meshgrid(grid, grid, indexing="ij")
        keep = (r1 + r2) <= n
        r1, r2 = r1[keep].astype(np.int64), r2[keep].astype(np.int64)
        e_vals, e_fold = en_eval_many(spec, params, law, n, r1, r2)
        ge = eval_g_arrays(spec, params, r1 / n, r2 / n)
        measured_e = float(np.max(np.abs(e_vals - ge))) + e_fold

    bounds = {}
    violations = []
    for lemma in applicable_lemmas(spec):
        b = bernstein_gap_bound(spec, params, law, n, lemma).bound
        bounds[lemma] = b
        if measured_h > b + FP_SLACK:
            violations.append(f"{lemma}: measured Hn gap {measured_h:.3e} > bound {b:.3e}")
        if measured_e is not None and measured_e > b + FP_SLACK:
            violations.append(f"{lemma}: measured En gap {measured_e:.3e} > bound {b:.3e}")
    return GapCertification(
        spec=spec.describe(),
        law=law.describe(),
        n=n,
        measured_smoother=measured_h,
        measured_hypergeom=measured_e,
        grid_m=m,
        lattice_stride=stride,
        bounds=bounds,
        violations=violations,
    )
