"""Regime classification and exact construction of the limiting covariance,
plus the mean-field ODE integrator and Jacobian diagnostics.

The scaled deviations of the colour proportions (a/n, b/n, c/n) from
(x*, y*, z*) obey one of four limit shapes, selected by kappa = q1 a* - q2 b*:

  D1  kappa = 1/2        sqrt(n / log n) scaling, rank-one Gaussian limit
  D2  kappa > 1/2        n^rho scaling, random scalar times a fixed direction
  D3a kappa in (-1,1/2)\\{0}   sqrt(n), Gaussian with sandwiched covariance
  D3b a* = b* = 0        sqrt(n), Gaussian with the raw noise covariance
  D3c kappa = 0, a* != 0 sqrt(n), Gaussian via the Jordan-block sandwich
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .errors import CaseError, DomainError, HypothesisError, IntegrationError
from .fixed_point import FixedPointReport
from .operators import drift
from .reinforcement import check_simplex

BOUNDARY_TOL = 1e-9


@dataclass
class OdePath:
    times: np.ndarray
    points: np.ndarray  # (len(times), dim)

    @property
    def terminal(self) -> np.ndarray:
        return self.points[-1]


@dataclass
class AsymptoticsReport:
    fp: FixedPointReport
    regime: str
    scaling: str
    gamma: np.ndarray
    t_matrix: np.ndarray
    tbar_matrix: np.ndarray | None
    blocks: dict
    sigma: np.ndarray | None
    direction: np.ndarray | None
    caveats: list = field(default_factory=list)

    def scale_factor(self, n: int) -> float:
        if self.regime == "D1":
            return float(np.sqrt(n / np.log(n)))
        if self.regime == "D2":
            return float(n ** self.fp.rho)
        return float(np.sqrt(n))

    @property
    def theta_star(self) -> np.ndarray:
        return np.array([self.fp.x_star, self.fp.y_star, self.fp.z_star])


def classify_regime(fp: FixedPointReport, tol: float = BOUNDARY_TOL) -> str:
    """Case split on (kappa, alpha*, beta*); values within tol of the 1/2 and
    0 boundaries resolve to the boundary case, since the exact-regime formulas
    have poles there and ensembles cannot distinguish them at desk scale."""
    if not fp.complete:
        raise ValueError("fixed-point report lacks linearization")
    k = fp.kappa
    if k <= -1.0 + tol:
        raise HypothesisError(f"kappa = {k} outside the admissible range (-1, inf)")
    if abs(k - 0.5) <= tol:
        return "D1"
    if k > 0.5:
        return "D2"
    if abs(fp.alpha_star) <= tol and abs(fp.beta_star) <= tol:
        return "D3b"
    if abs(k) <= tol:
        return "D3c"
    return "D3a"


def structural_matrices(fp: FixedPointReport):
    """The noise covariance Gamma, the eigenvector matrix T and the Jordan
    companion Tbar (None when alpha* = 0, where its -1/alpha* entry blows up)."""
    x, y, z = fp.x_star, fp.y_star, fp.z_star
    a, b = fp.alpha_star, fp.beta_star
    q1, q2 = fp.q1, fp.q2
    gamma = np.array(
        [
            [x * (1 - x), -x * y, -x * z],
            [-x * y, y * (1 - y), -y * z],
            [-x * z, -y * z, z * (1 - z)],
        ]
    )
    t = np.array([[-b, 0.0, -q1], [a, 0.0, q2], [0.0, 1.0, -1.0 + q1]])
    tbar = None
    if abs(a) > 0:
        tbar = np.array([[-q1, -1.0 / a, 0.0], [q2, 0.0, 0.0], [-1.0 + q1, 0.0, 1.0]])
    return gamma, t, tbar


def coefficient_blocks(fp: FixedPointReport, tol: float = BOUNDARY_TOL) -> dict:
    """The A, B and C coefficient sets.  Entries whose formulas divide by a
    vanishing quantity are set to None; limit_covariance routes those cases
    to the D3b/D3c paths instead."""
    x, y, z = fp.x_star, fp.y_star, fp.z_star
    a, b = fp.alpha_star, fp.beta_star
    q1, q2 = fp.q1, fp.q2
    k = fp.kappa
    X = x * (1 - x)
    Y = y * (1 - y)
    XY = x * y
    blocks: dict = {"A": None, "B": None, "C": None}

    if abs(k) > tol:
        P = q2 * a * X - (a * q1 + b * q2) * XY + q1 * b * Y
        Q = a * a * X - 2 * a * b * XY + b * b * Y
        A = {
            "11": k**-2 * (q2**2 * X - 2 * q1 * q2 * XY + q1**2 * Y),
            "12": -(k**-2) * (1 - q1) * P - k**-1 * z * (q2 * x + q1 * y),
            "13": -(k**-2) * P,
            "22": k**-2 * (1 - q1) ** 2 * Q + 2 * k**-1 * (1 - q1) * z * (a * x + b * y) + z * (1 - z),
            "23": k**-2 * (1 - q1) * Q + k**-1 * z * (a * x + b * y),
            "33": k**-2 * Q,
        }
        blocks["A"] = A
        C = {"13": A["13"] / (1 - k), "23": A["23"] / (1 - k)}
        C["33"] = A["33"] / (1 - 2 * k) if abs(1 - 2 * k) > tol else None
        blocks["C"] = C

    if abs(a) > tol:
        blocks["B"] = {
            "11": q2**-2 * Y,
            "12": q2**-1 * a * XY - q2**-2 * q1 * a * Y,
            "13": q2**-2 * (1 - q1) * Y - q2**-1 * y * z,
            "22": a * a * (X - 2 * q2**-1 * q1 * XY + q2**-2 * q1**2 * Y),
            "23": q2**-1 * a * ((1 - q1) * x + q1 * z) * y - q2**-2 * a * q1 * (1 - q1) * Y + a * x * z,
            "33": q2**-2 * (1 - q1) ** 2 * Y - 2 * q2**-1 * (1 - q1) * y * z + z * (1 - z),
        }
    return blocks


def _require(blocks, group, key, regime):
    grp = blocks.get(group)
    if grp is None or grp.get(key) is None:
        raise CaseError(
            f"coefficient {group}{key} undefined here; regime {regime} must use the boundary-case path"
        )
    return grp[key]


def limit_covariance(fp: FixedPointReport, regime: str | None = None, tol: float = BOUNDARY_TOL):
    """(sigma, scaling, direction) for the classified regime.

    D2 yields no covariance: the limit is a random scalar along a fixed
    direction, returned as `direction` with scaling n^rho.
    """
    if regime is None:
        regime = classify_regime(fp, tol)
    gamma, t, tbar = structural_matrices(fp)
    blocks = coefficient_blocks(fp, tol)
    q1, q2 = fp.q1, fp.q2

    if regime == "D1":
        a33 = _require(blocks, "A", "33", regime)
        v = np.array([q1, -q2, 1.0 - q1])
        return a33 * np.outer(v, v), "sqrt(n/log n)", None
    if regime == "D2":
        direction = np.linalg.solve(t.T, np.array([0.0, 0.0, 1.0]))
        return None, f"n^{fp.rho:.6g}", direction
    if regime == "D3a":
        inner = np.array(
            [
                [_require(blocks, "A", "11", regime), _require(blocks, "A", "12", regime), _require(blocks, "C", "13", regime)],
                [_require(blocks, "A", "12", regime), _require(blocks, "A", "22", regime), _require(blocks, "C", "23", regime)],
                [_require(blocks, "C", "13", regime), _require(blocks, "C", "23", regime), _require(blocks, "C", "33", regime)],
            ]
        )
        return t @ inner @ t.T, "sqrt(n)", None
    if regime == "D3b":
        return gamma, "sqrt(n)", None
    if regime == "D3c":
        if tbar is None:
            raise CaseError("D3c requires alpha* != 0")
        B = blocks["B"]
        inner = np.array(
            [
                [B["11"] + 2 * B["12"] + 2 * B["22"], B["12"] + B["22"], B["13"] + B["23"]],
                [B["12"] + B["22"], B["22"], B["23"]],
                [B["13"] + B["23"], B["23"], B["33"]],
            ]
        )
        return tbar @ inner @ tbar.T, "sqrt(n)", None
    raise CaseError(f"unknown regime {regime!r}")


def jacobian_at_root(fp: FixedPointReport):
    """Jacobian of the 3-d mean-field drift at the root and its closed-form
    eigenvalues (-1 twice, -1 + kappa once)."""
    a, b = fp.alpha_star, fp.beta_star
    q1, q2 = fp.q1, fp.q2
    jac = np.array(
        [
            [q1 * a - 1.0, q1 * b, 0.0],
            [-q2 * a, -q2 * b - 1.0, 0.0],
            [(1 - q1) * a, (1 - q1) * b, -1.0],
        ]
    )
    eigs = np.array([-1.0, -1.0, -1.0 + fp.kappa])
    return jac, eigs


def build_asymptotics(fp: FixedPointReport, tol: float = BOUNDARY_TOL) -> AsymptoticsReport:
    """Classify and assemble all limit objects, validating the determinant
    identities det(T) = -kappa and det(Tbar) = q2/alpha* along the way."""
    regime = classify_regime(fp, tol)
    gamma, t, tbar = structural_matrices(fp)
    if abs(np.linalg.det(t) + fp.kappa) > 1e-10 * max(1.0, abs(fp.kappa)):
        raise AssertionError(f"det(T) = {np.linalg.det(t)} != -kappa = {-fp.kappa}")
    if tbar is not None:
        expected = fp.q2 / fp.alpha_star
        if abs(np.linalg.det(tbar) - expected) > 1e-10 * max(1.0, abs(expected)):
            raise AssertionError("det(Tbar) != q2/alpha*")
    blocks = coefficient_blocks(fp, tol)
    sigma, scaling, direction = limit_covariance(fp, regime, tol)
    caveats = list(fp.caveats)
    if fp.kappa is not None and (abs(fp.kappa - 0.5) <= tol or abs(fp.kappa) <= tol) and fp.kappa not in (0.0, 0.5):
        caveats.append(f"kappa = {fp.kappa} within {tol} of a regime boundary; classified to the boundary case")
    if sigma is not None:
        sym = np.max(np.abs(sigma - sigma.T))
        if sym > 1e-10:
            raise AssertionError(f"limit covariance asymmetric by {sym}")
        eig = np.linalg.eigvalsh(sigma)
        if eig.min() < -1e-10:
            raise AssertionError(f"limit covariance has negative eigenvalue {eig.min()}")
    return AsymptoticsReport(
        fp=fp,
        regime=regime,
        scaling=scaling,
        gamma=gamma,
        t_matrix=t,
        tbar_matrix=tbar,
        blocks=blocks,
        sigma=sigma,
        direction=direction,
        caveats=caveats,
    )


def sigma_via_quadrature(fp: FixedPointReport, tol: float = 1e-9, t_min: float = 40.0):
    """Independent oracle for the sqrt(n) covariance: Simpson quadrature of
    integral_0^inf exp((J + I/2) u) Gamma exp((J + I/2)^t u) du.

    The integrand decays like exp(-2 gap u) with gap = 1/2 - max(0, kappa),
    so the truncation point extends beyond t_min until the recorded tail
    bound drops below tol.  Returns (sigma, tail_bound).
    """
    if fp.kappa >= 0.5:
        raise CaseError("quadrature oracle needs kappa < 1/2 (integral diverges otherwise)")
    jac, _ = jacobian_at_root(fp)
    gamma, _, _ = structural_matrices(fp)
    A = jac + 0.5 * np.eye(3)
    lam_max = -0.5 + max(0.0, fp.kappa)
    w, v = np.linalg.eig(A)
    cond = np.linalg.cond(v)
    norm_g = np.linalg.norm(gamma, 2)

    def tail_bound(T):
        return norm_g * cond**2 * np.exp(2 * lam_max * T) / (-2 * lam_max)

    T = t_min
    while tail_bound(T) > tol and T < 10_000:
        T *= 1.5

    prev = None
    m = 256
    while True:
        h = T / m
        step = expm(A * h)
        e_u = np.eye(3)
        total = np.zeros((3, 3))
        for idx in range(m + 1):
            integrand = e_u @ gamma @ e_u.T
            weight = 1.0 if idx in (0, m) else (4.0 if idx % 2 == 1 else 2.0)
            total += weight * integrand
            e_u = e_u @ step
        sigma = total * h / 3.0
        if prev is not None and np.max(np.abs(sigma - prev)) < tol:
            break
        if m >= 65536:
            break
        prev = sigma
        m *= 2
    return sigma, float(tail_bound(T))


def integrate_mean_field(
    kind: str,
    spec,
    params,
    mu_or_law,
    init,
    dt: float,
    t_end: float,
    domain_tol: float = 1e-9,
) -> OdePath:
    """Classical 4th-order one-step integration of the mean-field drift.

    Positive invariance of the simplex is asserted numerically along the path
    (not proved): any excursion beyond domain_tol raises.
    """
    if dt > 0.1:
        raise ValueError("dt must be <= 0.1")
    point = np.asarray(init, dtype=float)
    dim = len(point)
    if dim == 2:
        check_simplex(point[0], point[1])
    elif dim == 3:
        if point.min() < -domain_tol or point.sum() > 1 + domain_tol:
            raise DomainError(f"init {init} outside the 3-d simplex")
    else:
        raise ValueError("init must be 2-d or 3-d")

    def f(pt):
        clipped = np.clip(pt, 0.0, None)
        if dim == 2 and clipped.sum() > 1.0:
            clipped = clipped / clipped.sum()
        return drift(kind, spec, params, mu_or_law, tuple(clipped))

    n_steps = int(round(t_end / dt))
    times = np.empty(n_steps + 1)
    points = np.empty((n_steps + 1, dim))
    times[0] = 0.0
    points[0] = point
    for s in range(1, n_steps + 1):
        k1 = f(point)
        k2 = f(point + 0.5 * dt * k1)
        k3 = f(point + 0.5 * dt * k2)
        k4 = f(point + dt * k3)
        point = point + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if point.min() < -domain_tol or point.sum() > 1.0 + domain_tol:
            raise IntegrationError(f"path left the domain at t={s * dt}: {point}")
        times[s] = s * dt
        points[s] = point
    return OdePath(times=times, points=points)
