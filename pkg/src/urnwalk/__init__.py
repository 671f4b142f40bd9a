"""urnwalk: simulation and analysis laboratory for a four-colour urn process
driven by sampled customer feedback (a memory-reinforced random walk)."""

__version__ = "0.1.0"

from .model import (
    ModelParams,
    SampleCounts,
    SampleMode,
    SamplingScheme,
    UrnState,
    draw_sample_counts,
    init_history,
    step,
    walker_position,
)
from .reinforcement import ReinforcementSpec, SimplexPoint, make_spec, eval_g, grad_g, modulus_bound
from .laws import (
    SampleSizeLaw,
    FixedSize,
    CustomPmf,
    UniformLaw,
    TruncatedGeometricLaw,
    ShiftedBinomialLaw,
    TruncatedPoissonLaw,
    make_law,
    inverse_moment,
    inverse_moment_table,
    series_report,
)
from .operators import (
    GapBound,
    LatticePoint,
    bernstein_gap_bound,
    drift,
    en_eval,
    fn_eval,
    h0_eval,
    hn_eval,
    hypergeom_gap,
)
from .fixed_point import FixedPointReport, analyze, contraction_margin, local_linearization, solve_fixed_point
from .asymptotics import (
    AsymptoticsReport,
    build_asymptotics,
    classify_regime,
    coefficient_blocks,
    integrate_mean_field,
    jacobian_at_root,
    limit_covariance,
    sigma_via_quadrature,
    structural_matrices,
)
from .simulate import EnsembleStats, RunConfig, Trajectory, default_checkpoints, mix_seed, run_ensemble, run_trajectory
from .certify import certify_gaps
