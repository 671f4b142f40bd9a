"""Reinforcement functions on the simplex with declared smoothness metadata.

A reinforcement function F maps the sampled satisfied proportions (x, y) in
S = {x, y >= 0, x + y <= 1} to a selection probability in [0, 1]; the process
only ever sees g = p*F + (1-p)*(1-F).  Smoothness constants are declared, not
inferred: the certified error bounds downstream need true sup constants, and
grid sampling can only under-estimate a supremum.  Declared constants always
refer to F; everything at the level of g scales by |2p - 1|.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import CapabilityError, DomainError

SIMPLEX_TOL = 1e-12
FD_STEP = 1e-5


def check_simplex(x: float, y: float, tol: float = SIMPLEX_TOL) -> None:
    if x < -tol or y < -tol or x + y > 1.0 + tol:
        raise DomainError(f"point ({x}, {y}) outside the simplex beyond tolerance {tol}")


def simplex_grid(m: int) -> tuple[np.ndarray, np.ndarray]:
    """All points (i/m, j/m) with i + j <= m; a '201x201 grid' is m = 200."""
    i, j = np.meshgrid(np.arange(m + 1), np.arange(m + 1), indexing="ij")
    keep = (i + j) <= m
    return i[keep] / m, j[keep] / m


@dataclass(frozen=True)
class SimplexPoint:
    x: float
    y: float

    def __post_init__(self):
        check_simplex(self.x, self.y)


@dataclass(frozen=True)
class ReinforcementSpec:
    """F plus its declared smoothness ladder.

    holder:      (L, alpha) with |F(u) - F(v)| <= L * ||u - v||^alpha on S.
    grad_f:      analytic gradient of F, returning (dF/dx, dF/dy).
    hessian_sup: (M11, M12, M22) sup bounds on |second partials| of F over S.
    grad_modulus: declared upper bound delta -> omega(grad F; delta); only
                 needed for C1 specs without Hessian bounds.
    """

    name: str
    f: Callable[[np.ndarray, np.ndarray], np.ndarray]
    holder: Optional[tuple[float, float]] = None
    grad_f: Optional[Callable[[np.ndarray, np.ndarray], tuple]] = None
    hessian_sup: Optional[tuple[float, float, float]] = None
    grad_modulus: Optional[Callable[[float], float]] = None
    params: tuple = ()
    notes: str = ""

    @property
    def smoothness_class(self) -> str:
        if self.hessian_sup is not None:
            return "C2"
        if self.grad_f is not None or self.grad_modulus is not None:
            return "C1"
        if self.holder is not None:
            return "Holder"
        return "C0"

    def describe(self) -> str:
        args = ", ".join(f"{k}={v}" for k, v in self.params)
        return f"{self.name}({args})" if args else self.name


def eval_g(spec: ReinforcementSpec, params, x: float, y: float) -> float:
    """g(x, y) = p*F(x, y) + (1 - p)*(1 - F(x, y))."""
    check_simplex(x, y)
    f_val = spec.f(x, y)
    return params.p * f_val + (1.0 - params.p) * (1.0 - f_val)


def eval_g_arrays(spec: ReinforcementSpec, params, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Vectorized g on arrays of simplex points (no per-point domain check)."""
    f_val = np.asarray(spec.f(x, y), dtype=float)
    return params.p * f_val + (1.0 - params.p) * (1.0 - f_val)


def _fd_partial(f, x, y, axis: int) -> float:
    """Second-order finite difference of f in one coordinate, one-sided within
    FD_STEP of the simplex boundary so f is never evaluated outside S."""
    h = FD_STEP
    dx, dy = (h, 0.0) if axis == 0 else (0.0, h)

    def ok(u, v):
        return u >= 0.0 and v >= 0.0 and u + v <= 1.0

    if ok(x - dx, y - dy) and ok(x + dx, y + dy):
        return (f(x + dx, y + dy) - f(x - dx, y - dy)) / (2 * h)
    if ok(x + 2 * dx, y + 2 * dy):
        return (-3 * f(x, y) + 4 * f(x + dx, y + dy) - f(x + 2 * dx, y + 2 * dy)) / (2 * h)
    if ok(x - 2 * dx, y - 2 * dy):
        return (3 * f(x, y) - 4 * f(x - dx, y - dy) + f(x - 2 * dx, y - 2 * dy)) / (2 * h)
    # degenerate corner: no stencil fits along this coordinate, so retreat the
    # other coordinate into the simplex and Richardson-extrapolate the retreat
    rx, ry = (0.0, h) if axis == 0 else (h, 0.0)
    if ok(x - 4 * rx, y - 4 * ry):
        d2 = _fd_partial(f, x - 2 * rx, y - 2 * ry, axis)
        d4 = _fd_partial(f, x - 4 * rx, y - 4 * ry, axis)
        return 2.0 * d2 - d4
    raise DomainError(f"simplex too thin for finite differences at ({x}, {y})")


def grad_g(spec: ReinforcementSpec, params, x: float, y: float) -> tuple[float, float]:
    """Gradient of g: (2p - 1) * grad F, analytic when declared, else central
    finite differences with one-sided stencils at the boundary."""
    check_simplex(x, y)
    if spec.smoothness_class not in ("C1", "C2"):
        raise CapabilityError(f"spec {spec.name!r} declares no gradient capability")
    scale = 2.0 * params.p - 1.0
    if spec.grad_f is not None:
        fx, fy = spec.grad_f(x, y)
        return scale * float(fx), scale * float(fy)
    fx = _fd_partial(spec.f, x, y, axis=0)
    fy = _fd_partial(spec.f, x, y, axis=1)
    return scale * fx, scale * fy


def g_holder(spec: ReinforcementSpec, params) -> tuple[float, float]:
    """Hölder metadata (L, alpha) of g, scaled from F's declaration."""
    if spec.holder is None:
        raise CapabilityError(f"spec {spec.name!r} declares no Hölder constant")
    L, alpha = spec.holder
    return abs(2.0 * params.p - 1.0) * L, alpha


def g_hessian_sup(spec: ReinforcementSpec, params) -> tuple[float, float, float]:
    """Sup bounds on |second partials| of g, scaled from F's declaration."""
    if spec.hessian_sup is None:
        raise CapabilityError(f"spec {spec.name!r} declares no Hessian bounds")
    s = abs(2.0 * params.p - 1.0)
    m11, m12, m22 = spec.hessian_sup
    return s * m11, s * m12, s * m22


def modulus_bound(spec: ReinforcementSpec, params, delta: float) -> float:
    """Certified upper bound on omega(grad g; delta).

    For C2 specs the gradient is Lipschitz with constant bounded by the
    Frobenius norm of the Hessian bound matrix, sqrt(M11^2 + 2 M12^2 + M22^2),
    which dominates the spectral norm.  C1 specs must declare a modulus; grid
    estimates are lower bounds and cannot certify.
    """
    if delta < 0:
        raise ValueError("delta must be non-negative")
    scale = abs(2.0 * params.p - 1.0)
    if spec.hessian_sup is not None:
        m11, m12, m22 = spec.hessian_sup
        lip = np.sqrt(m11**2 + 2 * m12**2 + m22**2)
        return scale * lip * delta
    if spec.grad_modulus is not None:
        return scale * float(spec.grad_modulus(delta))
    raise CapabilityError(
        f"spec {spec.name!r} has neither Hessian bounds nor a declared gradient modulus"
    )


# ---------------------------------------------------------------------------
# Built-in spec library.  Constants are exact, computed by hand from each F.
# ---------------------------------------------------------------------------

def constant_spec(c: float = 0.5) -> ReinforcementSpec:
    if not 0.0 <= c <= 1.0:
        raise ValueError("constant level must lie in [0, 1]")
    return ReinforcementSpec(
        name="constant",
        f=lambda x, y: np.full_like(np.asarray(x, dtype=float), c) if np.ndim(x) else c,
        holder=(0.0, 1.0),
        grad_f=lambda x, y: (np.zeros_like(np.asarray(x, dtype=float)),) * 2,
        hessian_sup=(0.0, 0.0, 0.0),
        params=(("c", c),),
        notes="gradient vanishes; contraction margin 0; critical scalars alpha*=beta*=0",
    )


def affine_spec(a: float = 0.25) -> ReinforcementSpec:
    if abs(a) > 0.5:
        raise ValueError("|a| <= 0.5 required so F stays in [0, 1] on the simplex")
    return ReinforcementSpec(
        name="affine",
        f=lambda x, y: 0.5 + a * (np.asarray(x, dtype=float) - y),
        holder=(abs(a) * np.sqrt(2.0), 1.0),
        grad_f=lambda x, y: (a + 0.0 * np.asarray(x, dtype=float), -a + 0.0 * np.asarray(x, dtype=float)),
        hessian_sup=(0.0, 0.0, 0.0),
        params=(("a", a),),
        notes="F = 1/2 + a(x - y); contraction margin (q1+q2)|a||2p-1|; kappa = (q1+q2) a (2p-1)",
    )


def quadratic_spec() -> ReinforcementSpec:
    return ReinforcementSpec(
        name="quadratic",
        f=lambda x, y: np.asarray(x, dtype=float) ** 2,
        holder=(2.0, 1.0),
        grad_f=lambda x, y: (2.0 * np.asarray(x, dtype=float), 0.0 * np.asarray(x, dtype=float)),
        hessian_sup=(2.0, 0.0, 0.0),
        params=(),
        notes="F = x^2; gradient sup 2, so contraction needs (q1+q2)|2p-1| < 1/2",
    )


def logistic_spec(s: float = 2.0) -> ReinforcementSpec:
    if s < 0:
        raise ValueError("slope must be non-negative")
    # dF = s*F(1-F)*(1, -1); |F(1-F)| <= 1/4.  Second partials are
    # +-s^2 * sig''(u) with sup |sig''| = 1/(6*sqrt(3)).
    m2 = s * s / (6.0 * np.sqrt(3.0))

    def f(x, y):
        return 1.0 / (1.0 + np.exp(-s * (np.asarray(x, dtype=float) - y)))

    def grad(x, y):
        v = f(x, y)
        d = s * v * (1.0 - v)
        return d, -d

    return ReinforcementSpec(
        name="logistic",
        f=f,
        holder=(s * np.sqrt(2.0) / 4.0, 1.0),
        grad_f=grad,
        hessian_sup=(m2, m2, m2),
        params=(("s", s),),
        notes="F = sigmoid(s(x - y)); gradient sup s/4; margin (q1+q2)(s/4)|2p-1|",
    )


BUILTIN_SPECS: dict[str, Callable[..., ReinforcementSpec]] = {
    "constant": constant_spec,
    "affine": affine_spec,
    "quadratic": quadratic_spec,
    "logistic": logistic_spec,
}


def make_spec(kind: str, **kwargs) -> ReinforcementSpec:
    try:
        factory = BUILTIN_SPECS[kind]
    except KeyError:
        raise KeyError(f"unknown reinforcement kind {kind!r}; known: {sorted(BUILTIN_SPECS)}")
    return factory(**kwargs)
