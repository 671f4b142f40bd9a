"""Command-line interface: run experiments, re-render reports, list built-ins."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError, HypothesisError, UrnWalkError
from .laws import BUILTIN_LAWS
from .reinforcement import BUILTIN_SPECS


def _cmd_run(args) -> int:
    from .experiment import run_experiment

    try:
        code = run_experiment(args.config, output_override=args.output)
    except ConfigError as exc:
        loc = ""
        if exc.line is not None:
            loc = f" (line {exc.line}, column {exc.column or 1})"
        print(f"config error{loc}: {exc}", file=sys.stderr)
        return 2
    except HypothesisError as exc:
        print(f"hypothesis violation: {exc}", file=sys.stderr)
        return 3
    out = Path(args.output) if args.output else None
    if out is None:
        # re-read the config for the directory to report
        from .experiment import load_experiment

        out = load_experiment(args.config).output_dir
    print((out / "summary.txt").read_text(), end="")
    return code


def _cmd_report(args) -> int:
    from .experiment import render_summary
    from .figures import render_figures

    out = Path(args.directory)
    report_path = out / "report.json"
    if not report_path.exists():
        print(f"no report.json in {out}", file=sys.stderr)
        return 2
    report = json.loads(report_path.read_text())
    (out / "summary.txt").write_text(render_summary(report))
    paths = render_figures(out)
    print(render_summary(report), end="")
    print(f"figures: {', '.join(str(p) for p in paths)}")
    return int(report.get("exit_code", 0))


def _cmd_catalog(args) -> int:
    print("reinforcement specs (run.spec.kind = ...):")
    for name, factory in sorted(BUILTIN_SPECS.items()):
        spec = factory()
        args_txt = ", ".join(f"{k}={v}" for k, v in spec.params) or "no parameters"
        print(f"  {name:10s} [{spec.smoothness_class}] defaults: {args_txt}")
        print(f"             {spec.notes}")
    print()
    print("sample-size laws (run.law.kind = ...):")
    descriptions = {
        "fixed": "point mass at k (fixed-law scenario); needs k <= N without replacement",
        "custom-pmf": "explicit weights on 1..M via run.law.probs (fixed-law scenario)",
        "uniform": "discrete uniform on [1, n]; E[K^-1] partial sums grow like (log n)^2",
        "geometric": "min(n, Geometric(c n^-alpha)); theorem hypotheses need alpha > 1/2",
        "binomial": "1 + Binomial(n-1, c n^-alpha); theorem hypotheses need 0 < alpha < 1/2",
        "poisson": "min(n, 1 + Poisson(c n^alpha)); theorem hypotheses need alpha > 1/2",
    }
    for name in sorted(BUILTIN_LAWS):
        print(f"  {name:10s} {descriptions[name]}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="urnwalk",
        description="Simulation-and-analysis laboratory for the four-colour urn walk",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config end to end")
    p_run.add_argument("config", help="path to a key=value experiment config")
    p_run.add_argument("--output", help="override output.dir from the config")
    p_run.set_defaults(func=_cmd_run)

    p_rep = sub.add_parser("report", help="re-render summary and figures from a run directory")
    p_rep.add_argument("directory")
    p_rep.set_defaults(func=_cmd_report)

    p_cat = sub.add_parser("catalog", help="list built-in specs and laws")
    p_cat.set_defaults(func=_cmd_catalog)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UrnWalkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
