"""Figure rendering for the report path.

The delimited output (checkpoints.csv) remains the canonical interface; these
figures are a convenience layer regenerated from the emitted files, so
`urnwalk report <dir>` reproduces them without re-running anything.
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .experiment import read_checkpoints_csv


def _fig_means(report: dict, csv: dict, path: Path) -> None:
    fp = report["fixed_point"]
    theory = {"a": fp["x_star"], "b": fp["y_star"], "c": fp["z_star"]}
    fig, ax = plt.subplots(figsize=(6.0, 3.8))
    for name, colour in zip("abc", ("C0", "C1", "C2")):
        ax.semilogx(csv["n"], csv[f"mean_{name}"], "o-", color=colour, label=f"mean {name}/n")
        ax.axhline(theory[name], color=colour, ls="--", lw=0.8)
    ax.set_xlabel("n")
    ax.set_ylabel("colour proportion")
    ax.set_title("ensemble means vs fixed point (dashed)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def _fig_covariance(report: dict, csv: dict, path: Path) -> None:
    sigma = report["asymptotics"]["sigma"]
    if sigma is None:
        return
    sigma = np.asarray(sigma)
    emp = np.array(
        [
            [csv["sdev_cov_aa"][-1], csv["sdev_cov_ab"][-1], csv["sdev_cov_ac"][-1]],
            [csv["sdev_cov_ab"][-1], csv["sdev_cov_bb"][-1], csv["sdev_cov_bc"][-1]],
            [csv["sdev_cov_ac"][-1], csv["sdev_cov_bc"][-1], csv["sdev_cov_cc"][-1]],
        ]
    )
    vmax = max(np.abs(sigma).max(), np.abs(emp).max(), 1e-12)
    fig, axes = plt.subplots(1, 2, figsize=(7.0, 3.2))
    for ax, mat, title in zip(axes, (emp, sigma), ("empirical (final checkpoint)", "limit covariance")):
        im = ax.imshow(mat, vmin=-vmax, vmax=vmax, cmap="RdBu_r")
        ax.set_xticks(range(3), list("abc"))
        ax.set_yticks(range(3), list("abc"))
        ax.set_title(title, fontsize=9)
        for i in range(3):
            for j in range(3):
                ax.text(j, i, f"{mat[i, j]:.3f}", ha="center", va="center", fontsize=7)
    fig.colorbar(im, ax=axes, shrink=0.8)
    fig.savefig(path, dpi=130)
    plt.close(fig)


def _fig_series(report: dict, path: Path) -> None:
    series = report.get("series")
    if not series:
        return
    fig, ax = plt.subplots(figsize=(6.0, 3.8))
    cps = np.asarray(series["checkpoints"], dtype=float)
    for name, sums in series["partial_sums"].items():
        slope = series["slopes"][name]
        ax.loglog(cps, sums, "o-", ms=3, label=f"{name} (slope {slope:.2f})")
    ax.set_xlabel("horizon n")
    ax.set_ylabel("partial sum")
    ax.set_title(f"series growth for {series['law']}")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def render_figures(out_dir: str | Path) -> list[Path]:
    """Render all applicable figures next to the delimited output."""
    out = Path(out_dir)
    report = json.loads((out / "report.json").read_text())
    csv = read_checkpoints_csv(out / "checkpoints.csv")
    figdir = out / "figures"
    figdir.mkdir(exist_ok=True)
    written = []
    _fig_means(report, csv, figdir / "means.png")
    written.append(figdir / "means.png")
    if report["asymptotics"]["sigma"] is not None:
        _fig_covariance(report, csv, figdir / "covariance.png")
        written.append(figdir / "covariance.png")
    if report.get("series"):
        _fig_series(report, figdir / "series.png")
        written.append(figdir / "series.png")
    return [p for p in written if p.exists()]
