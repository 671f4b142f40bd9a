"""Declarative experiment runner: parse a config, orchestrate fixed-point ->
asymptotics -> ensemble -> statistical comparison, and emit reports.

Config grammar (documented in the README): one `dotted.key = value` pair per
line, `#` comments, values are scalars or comma-separated lists.  Exit codes:
0 all verdicts pass, 1 statistical failure, 2 config error, 3 hypothesis
violation when configured fatal.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import AsymptoticsReport, build_asymptotics
from .certify import certify_gaps
from .errors import ConfigError, DomainError, HypothesisError, UrnWalkError
from .fixed_point import analyze
from .laws import make_law, series_report
from .model import ModelParams, SamplingScheme
from .reinforcement import make_spec
from .simulate import EnsembleStats, RunConfig, default_checkpoints, run_ensemble

CSV_COLUMNS = (
    "n,mean_a,mean_b,mean_c,"
    "cov_aa,cov_ab,cov_ac,cov_bb,cov_bc,cov_cc,"
    "sdev_cov_aa,sdev_cov_ab,sdev_cov_ac,sdev_cov_bb,sdev_cov_bc,sdev_cov_cc"
)


# ---------------------------------------------------------------------------
# Config parsing.
# ---------------------------------------------------------------------------

def parse_kv_text(text: str) -> dict[str, str]:
    """Flat `dotted.key = value` lines into a string map, with line/column
    positions on malformed input."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'", line=lineno, column=1)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.split("#", 1)[0].strip()
        if not key or any(not (ch.isalnum() or ch in "._-") for ch in key):
            col = raw.find(key) + 1 if key else 1
            raise ConfigError(f"line {lineno}: malformed key {key!r}", line=lineno, column=col)
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}", line=lineno, column=1, field=key)
        out[key] = value
    return out


def _get(kv: dict, key: str, conv, default=...):
    if key not in kv:
        if default is ...:
            raise ConfigError(f"missing required field {key!r}", field=key)
        return default
    try:
        return conv(kv[key])
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"field {key!r}: cannot parse {kv[key]!r} ({exc})", field=key)


def _bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _int_list(s: str) -> tuple[int, ...]:
    return tuple(int(x.strip()) for x in s.split(",") if x.strip())


def _float_list(s: str) -> tuple[float, ...]:
    return tuple(float(x.strip()) for x in s.split(",") if x.strip())


@dataclass
class AnalysisOptions:
    check_strong_law: bool = True
    check_clt: bool = False
    check_bounds: bool = False
    series_horizon: int = 2000
    tol_strong: float = 0.01
    tol_clt_rel: float = 0.15
    clt_floor: float = 0.01
    ratio_lo: float = 0.5
    ratio_hi: float = 2.0
    direction_min: float = 0.95
    bounds_ns: tuple[int, ...] = (10, 100)
    fatal_hypothesis: bool = False


@dataclass
class ExperimentConfig:
    run: RunConfig
    analysis: AnalysisOptions
    output_dir: Path
    figures: bool = True
    raw: dict = field(default_factory=dict)


_SPEC_ARG_TYPES = {"c": float, "a": float, "s": float}
_LAW_ARG_TYPES = {"k": int, "alpha": float, "c": float}


def build_experiment(kv: dict[str, str], output_override: str | None = None) -> ExperimentConfig:
    params = ModelParams(
        p=_get(kv, "run.p", float),
        q=_get(kv, "run.q", float),
        q1=_get(kv, "run.q1", float),
        q2=_get(kv, "run.q2", float),
        N=_get(kv, "run.N", int, 10),
    )
    spec_kind = _get(kv, "run.spec.kind", str)
    spec_args = {}
    for key, raw in kv.items():
        if key.startswith("run.spec.") and key != "run.spec.kind":
            name = key.rsplit(".", 1)[1]
            conv = _SPEC_ARG_TYPES.get(name, float)
            spec_args[name] = _get(kv, key, conv)
    try:
        spec = make_spec(spec_kind, **spec_args)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"field 'run.spec': {exc}", field="run.spec")

    law_kind = _get(kv, "run.law.kind", str)
    law_args = {}
    for key, raw in kv.items():
        if key.startswith("run.law.") and key != "run.law.kind":
            name = key.rsplit(".", 1)[1]
            if name == "probs":
                law_args["probs"] = _get(kv, key, _float_list)
            else:
                law_args[name] = _get(kv, key, _LAW_ARG_TYPES.get(name, float))
    try:
        law = make_law(law_kind, **law_args)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"field 'run.law': {exc}", field="run.law")

    scheme_txt = _get(kv, "run.scheme", str, "with")
    try:
        scheme = SamplingScheme(scheme_txt)
    except ValueError:
        raise ConfigError(
            f"field 'run.scheme': {scheme_txt!r} not one of 'with'/'without'", field="run.scheme"
        )

    n_max = _get(kv, "run.n_max", int)
    checkpoints = _get(kv, "run.checkpoints", _int_list, None)
    if checkpoints is None:
        checkpoints = default_checkpoints(n_max, params.N)
    try:
        run = RunConfig(
            params=params,
            spec=spec,
            scheme=scheme,
            law=law,
            n_max=n_max,
            checkpoints=tuple(checkpoints),
            seed=_get(kv, "run.seed", int),
            replications=_get(kv, "run.replications", int),
            engine=_get(kv, "run.engine", str, "vectorized"),
        )
    except (ValueError, UrnWalkError) as exc:
        raise ConfigError(f"run configuration invalid: {exc}", field="run")

    analysis = AnalysisOptions(
        check_strong_law=_get(kv, "analysis.check_strong_law", _bool, True),
        check_clt=_get(kv, "analysis.check_clt", _bool, False),
        check_bounds=_get(kv, "analysis.check_bounds", _bool, False),
        series_horizon=_get(kv, "analysis.series_horizon", int, 2000),
        tol_strong=_get(kv, "analysis.tol_strong", float, 0.01),
        tol_clt_rel=_get(kv, "analysis.tol_clt_rel", float, 0.15),
        clt_floor=_get(kv, "analysis.clt_floor", float, 0.01),
        ratio_lo=_get(kv, "analysis.ratio_lo", float, 0.5),
        ratio_hi=_get(kv, "analysis.ratio_hi", float, 2.0),
        direction_min=_get(kv, "analysis.direction_min", float, 0.95),
        bounds_ns=_get(kv, "analysis.bounds_ns", _int_list, (10, 100)),
        fatal_hypothesis=_get(kv, "analysis.fatal_hypothesis", _bool, False),
    )
    if not (analysis.check_strong_law or analysis.check_clt or analysis.check_bounds):
        raise ConfigError("at least one analysis flag must be set", field="analysis")

    out_dir = Path(output_override or _get(kv, "output.dir", str, "urnwalk_out"))
    figures = _get(kv, "output.figures", _bool, True)
    return ExperimentConfig(run=run, analysis=analysis, output_dir=out_dir, figures=figures, raw=dict(kv))


def load_experiment(path: str | Path, output_override: str | None = None) -> ExperimentConfig:
    text = Path(path).read_text()
    return build_experiment(parse_kv_text(text), output_override)


# ---------------------------------------------------------------------------
# Verdicts and checks.
# ---------------------------------------------------------------------------

@dataclass
class Verdict:
    name: str
    rule: str
    tolerance: float
    observed: float
    expected: float
    passed: bool
    detail: str = ""

    def as_dict(self):
        return {
            "name": self.name,
            "rule": self.rule,
            "tolerance": float(self.tolerance),
            "observed": float(self.observed),
            "expected": float(self.expected),
            "pass": bool(self.passed),
            "detail": self.detail,
        }


def slope_fit(xs, ys):
    """Least-squares slope of log y on log x, with its standard error."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(xs) < 4:
        raise DomainError("slope fit needs at least 4 points")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise DomainError("slope fit needs strictly positive values")
    lx, ly = np.log(xs), np.log(ys)
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, res, *_ = np.linalg.lstsq(A, ly, rcond=None)
    fitted = A @ coef
    dof = max(1, len(xs) - 2)
    s2 = float(np.sum((ly - fitted) ** 2)) / dof
    sxx = float(np.sum((lx - lx.mean()) ** 2))
    return float(coef[0]), float(np.sqrt(s2 / sxx)) if sxx > 0 else float("inf")


def strong_law_check(stats: EnsembleStats, rep: AsymptoticsReport, tol: float) -> list[Verdict]:
    theta = rep.theta_star
    out = []
    for i, nm in enumerate(("a", "b", "c")):
        obs = float(stats.means[-1, i])
        out.append(
            Verdict(
                name=f"strong-law-{nm}",
                rule="abs(mean - theta*) <= tol at the final checkpoint",
                tolerance=tol,
                observed=obs,
                expected=float(theta[i]),
                passed=abs(obs - theta[i]) <= tol,
            )
        )
    return out


def clt_check(stats: EnsembleStats, rep: AsymptoticsReport, tol_rel: float, floor: float = 0.01,
              ratio_lo: float = 0.5, ratio_hi: float = 2.0, direction_min: float = 0.95) -> list[Verdict]:
    """Entrywise covariance comparison for the Gaussian regimes; variance
    stabilization plus deviation-direction alignment for the random-limit
    regime."""
    theta = rep.theta_star
    out = []
    if rep.regime == "D2":
        if len(stats.checkpoints) < 2:
            raise ValueError("D2 ratio test needs at least two checkpoints")
        variances = []
        for ci in (-2, -1):
            n = int(stats.checkpoints[ci])
            dev = stats.scaled_deviations(theta, rep.scale_factor(n), ci)
            variances.append(float(np.var(dev[:, 0], ddof=1)))
        ratio = variances[1] / variances[0] if variances[0] > 0 else float("inf")
        out.append(
            Verdict(
                name="d2-variance-ratio",
                rule=f"var(n^rho (a/n - x*)) ratio across last two checkpoints in [{ratio_lo}, {ratio_hi}]",
                tolerance=ratio_hi,
                observed=ratio,
                expected=1.0,
                passed=ratio_lo <= ratio <= ratio_hi,
                detail=f"variances {variances[0]:.5g} -> {variances[1]:.5g}",
            )
        )
        dev = stats.proportions[-1] - theta
        norms = np.linalg.norm(dev, axis=1)
        unit = dev[norms > 0] / norms[norms > 0, None]
        v = rep.direction / np.linalg.norm(rep.direction)
        corr = float(np.mean(np.abs(unit @ v)))
        out.append(
            Verdict(
                name="d2-direction",
                rule="mean |cosine| between deviations and the limit direction >= threshold",
                tolerance=direction_min,
                observed=corr,
                expected=1.0,
                passed=corr >= direction_min,
            )
        )
        return out
    if rep.sigma is None:
        raise ValueError(f"regime {rep.regime} offers no covariance to check")
    n = int(stats.checkpoints[-1])
    dev = stats.scaled_deviations(theta, rep.scale_factor(n), -1)
    emp = np.cov(dev.T, ddof=1)
    names = ("a", "b", "c")
    for i in range(3):
        for j in range(3):
            tol = tol_rel * max(abs(rep.sigma[i, j]), floor)
            out.append(
                Verdict(
                    name=f"clt-cov-{names[i]}{names[j]}",
                    rule=f"abs(emp - sigma) <= {tol_rel} * max(abs(sigma), {floor})",
                    tolerance=tol,
                    observed=float(emp[i, j]),
                    expected=float(rep.sigma[i, j]),
                    passed=abs(emp[i, j] - rep.sigma[i, j]) <= tol,
                )
            )
    return out


def bounds_check(cfg: ExperimentConfig) -> tuple[list[Verdict], list]:
    out = []
    certs = []
    for n in cfg.analysis.bounds_ns:
        if cfg.run.law.support(n)[0] > n:
            continue
        cert = certify_gaps(cfg.run.spec, cfg.run.params, cfg.run.law, n)
        certs.append(cert)
        worst = min(cert.bounds.values()) if cert.bounds else float("nan")
        out.append(
            Verdict(
                name=f"gap-bound-n{n}",
                rule="measured sup-gap <= certified bound for every applicable bound family",
                tolerance=worst,
                observed=max(cert.measured_smoother, cert.measured_hypergeom or 0.0),
                expected=worst,
                passed=cert.ok,
                detail="; ".join(cert.violations),
            )
        )
    return out, certs


def exit_code(verdicts: list[Verdict], hypothesis_violation: bool, fatal_hypothesis: bool) -> int:
    if hypothesis_violation and fatal_hypothesis:
        return 3
    return 0 if all(v.passed for v in verdicts) else 1


# ---------------------------------------------------------------------------
# Report files.
# ---------------------------------------------------------------------------

def _mat(m):
    return None if m is None else np.asarray(m).tolist()


def write_checkpoints_csv(path: Path, stats: EnsembleStats, rep: AsymptoticsReport) -> None:
    theta = rep.theta_star
    lines = [CSV_COLUMNS]
    for ci, n in enumerate(stats.checkpoints):
        dev = stats.scaled_deviations(theta, rep.scale_factor(int(n)), ci)
        sc = np.cov(dev.T, ddof=1)
        cov = stats.covs[ci]
        vals = [float(n)]
        vals += [stats.means[ci, 0], stats.means[ci, 1], stats.means[ci, 2]]
        vals += [cov[0, 0], cov[0, 1], cov[0, 2], cov[1, 1], cov[1, 2], cov[2, 2]]
        vals += [sc[0, 0], sc[0, 1], sc[0, 2], sc[1, 1], sc[1, 2], sc[2, 2]]
        lines.append(",".join(repr(float(v)) for v in vals))
    path.write_text("\n".join(lines) + "\n")


def read_checkpoints_csv(path: Path) -> dict[str, np.ndarray]:
    lines = Path(path).read_text().strip().splitlines()
    header = lines[0].split(",")
    if ",".join(header) != CSV_COLUMNS:
        raise ValueError(f"unexpected CSV header in {path}")
    data = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]])
    return {name: data[:, i] for i, name in enumerate(header)}


def render_summary(report: dict) -> str:
    lines = []
    lines.append(f"urnwalk experiment: {report['config']['spec']} / {report['config']['law']}"
                 f" / scheme={report['config']['scheme']}")
    fp = report["fixed_point"]
    lines.append(
        f"fixed point: x*={fp['x_star']:.10f} y*={fp['y_star']:.10f} z*={fp['z_star']:.10f}"
        f"  (residual {fp['residual']:.2e}, {fp['iterations']} iterations)"
    )
    lines.append(
        f"linearization: alpha*={fp['alpha_star']:.8f} beta*={fp['beta_star']:.8f}"
        f" kappa={fp['kappa']:.8f} rho={fp['rho']:.8f} margin={fp['margin']:.6f}"
    )
    asym = report["asymptotics"]
    lines.append(f"regime: {asym['regime']}   scaling: {asym['scaling']}")
    lines.append("")
    lines.append(f"{'check':28s} {'observed':>14s} {'expected':>14s} {'tol':>10s} verdict")
    for v in report["checks"]:
        lines.append(
            f"{v['name']:28s} {v['observed']:14.6g} {v['expected']:14.6g} {v['tolerance']:10.4g} "
            + ("PASS" if v["pass"] else "FAIL")
        )
    if report.get("caveats"):
        lines.append("")
        lines.append("caveats:")
        for c in report["caveats"]:
            lines.append(f"  - {c}")
    lines.append("")
    lines.append(f"exit code: {report['exit_code']}   runtime: {report['runtime']['seconds']:.1f}s")
    return "\n".join(lines) + "\n"


def run_experiment(config_path: str | Path, output_override: str | None = None) -> int:
    """Execute one experiment end to end; returns the process exit code."""
    t0 = time.perf_counter()
    cfg = load_experiment(config_path, output_override)
    run = cfg.run
    caveats: list[str] = []
    hypothesis_violation = False

    fp = analyze(run.spec, run.params, run.law)
    caveats.extend(fp.caveats)
    if fp.margin is not None and fp.margin >= 1.0:
        hypothesis_violation = True
    try:
        rep = build_asymptotics(fp)
    except HypothesisError as exc:
        if cfg.analysis.fatal_hypothesis:
            print(f"hypothesis violation: {exc}")
            return 3
        raise
    caveats.extend(c for c in rep.caveats if c not in caveats)
    if fp.margin is not None and fp.margin < 1.0:
        caveats.append(f"contraction margin {fp.margin:.4f} certified on a grid only")
    note = run.law.hypothesis_note()
    if note:
        caveats.append(f"law {run.law.describe()}: {note}")

    stats = run_ensemble(run)

    verdicts: list[Verdict] = []
    if cfg.analysis.check_strong_law:
        verdicts += strong_law_check(stats, rep, cfg.analysis.tol_strong)
    if cfg.analysis.check_clt:
        verdicts += clt_check(
            stats,
            rep,
            cfg.analysis.tol_clt_rel,
            cfg.analysis.clt_floor,
            cfg.analysis.ratio_lo,
            cfg.analysis.ratio_hi,
            cfg.analysis.direction_min,
        )
    certs = []
    if cfg.analysis.check_bounds:
        bv, certs = bounds_check(cfg)
        verdicts += bv

    series = None
    if run.law.scenario == "A2" and (cfg.analysis.check_bounds or cfg.analysis.check_clt):
        series = series_report(run.law, run.spec.smoothness_class, cfg.analysis.series_horizon)
        for name in series.relevant:
            if series.flags[name] == "inconsistent":
                caveats.append(f"series {name} flagged inconsistent (slope {series.slopes[name]:.3f})")

    code = exit_code(verdicts, hypothesis_violation, cfg.analysis.fatal_hypothesis)
    report = {
        "tool": {"name": "urnwalk", "version": __version__},
        "config": {
            "spec": run.spec.describe(),
            "law": run.law.describe(),
            "scheme": run.scheme.value,
            "params": {"p": run.params.p, "q": run.params.q, "q1": run.params.q1,
                        "q2": run.params.q2, "N": run.params.N},
            "n_max": run.n_max,
            "checkpoints": list(run.checkpoints),
            "seed": run.seed,
            "replications": run.replications,
            "engine": run.engine,
            "raw": cfg.raw,
        },
        "fixed_point": {
            "map_kind": fp.map_kind,
            "x_star": fp.x_star, "y_star": fp.y_star, "z_star": fp.z_star,
            "alpha_star": fp.alpha_star, "beta_star": fp.beta_star,
            "kappa": fp.kappa, "rho": fp.rho,
            "residual": fp.residual, "iterations": fp.iterations, "margin": fp.margin,
        },
        "asymptotics": {
            "regime": rep.regime,
            "scaling": rep.scaling,
            "gamma": _mat(rep.gamma),
            "T": _mat(rep.t_matrix),
            "Tbar": _mat(rep.tbar_matrix),
            "sigma": _mat(rep.sigma),
            "direction": _mat(rep.direction),
        },
        "ensemble": {
            "checkpoints": stats.checkpoints.tolist(),
            "means": stats.means.tolist(),
            "final_cov": stats.covs[-1].tolist(),
            "replications": stats.replications,
            "runtime_seconds": stats.runtime_seconds,
        },
        "bounds": [
            {
                "n": c.n, "measured_smoother": c.measured_smoother,
                "measured_hypergeom": c.measured_hypergeom,
                "bounds": c.bounds, "violations": c.violations,
                "grid_m": c.grid_m, "lattice_stride": c.lattice_stride,
            }
            for c in certs
        ],
        "series": None if series is None else {
            "law": series.law,
            "horizon": series.horizon,
            "checkpoints": series.checkpoints.tolist(),
            "partial_sums": {k: v.tolist() for k, v in series.partial_sums.items()},
            "slopes": series.slopes,
            "log2_adjusted_slope": series.log2_adjusted_slope,
            "flags": series.flags,
            "relevant": list(series.relevant),
        },
        "checks": [v.as_dict() for v in verdicts],
        "caveats": caveats,
        "hypothesis_violation": hypothesis_violation,
        "runtime": {"seconds": time.perf_counter() - t0},
        "exit_code": code,
    }

    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(report, indent=2))
    write_checkpoints_csv(out / "checkpoints.csv", stats, rep)
    (out / "summary.txt").write_text(render_summary(report))
    if cfg.figures:
        from .figures import render_figures

        render_figures(out)
    return code
