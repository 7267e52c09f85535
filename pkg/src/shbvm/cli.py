"""Command-line experiment runner.

Subcommands
-----------
run             one experiment; report on stdout as csv/json/table
table           convergence table over doubling step counts, with rates
figure          single-step coefficient-decay data (CSV + rendered PNG)
export-tableau  nodes, weights and Butcher matrix of HBVM(k, s) as JSON

Exit status: 0 success, 1 invalid experiment description, 2 divergence or
order-selection failure.  The output directory for generated files is taken
from --out-dir, else the SHBVM_OUT_DIR environment variable, else the
current directory.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .harness import (
    ExperimentSpec,
    InvalidSpecError,
    convergence_table,
    decay_figure_csv,
    decay_figure_data,
    run_experiment,
)
from .integrator import IntegrationError
from .problems import PROBLEMS, get_problem
from .report import report_csv, report_json_dict, report_table
from .solvers import StageSolverError
from .spectral import OrderSelectionError
from .tableau import build_coefficients, tableau_as_json

__all__ = ["main", "build_parser"]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # keep the documented exit-status contract
        raise _UsageError(message)


def _add_common(sub):
    sub.add_argument("--problem", required=True, help=f"one of {', '.join(sorted(PROBLEMS))}")
    sub.add_argument("--method", default="shbvm", help="shbvm | hbvm:k,s | gauss:s")
    sub.add_argument("--n", type=int, default=10, help="steps per period")
    sub.add_argument("--periods", type=int, default=100)
    sub.add_argument("--tol", type=float, default=1e-8, help="order-selection tolerance")
    sub.add_argument("--iteration", default="blended",
                     choices=["fixed-point", "newton", "simplified-newton", "blended"])
    sub.add_argument("--residual-tol", type=float, default=1e-14)
    sub.add_argument("--out", default="table", choices=["csv", "json", "table"])
    sub.add_argument("--out-dir", default=None, help="directory for generated files")
    sub.add_argument("--config", default=None, help="key=value file; flags win on conflict")
    sub.add_argument("--plot", action="store_true", help="also render figures to files")


def build_parser() -> _Parser:
    parser = _Parser(prog="shbvm", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    subs = parser.add_subparsers(dest="command", required=True)

    run = subs.add_parser("run", help="run one experiment")
    _add_common(run)
    run.add_argument("--seed-figure", action="store_true",
                     help="emit single-step decay data (CSV + PNG) for the problem")
    run.set_defaults(handler=_cmd_run)

    table = subs.add_parser("table", help="convergence table over doubling n")
    _add_common(table)
    table.add_argument("--rows", type=int, default=3, help="number of doublings + 1")
    table.set_defaults(handler=_cmd_table)

    figure = subs.add_parser("figure", help="coefficient-decay figure data")
    figure.add_argument("--problem", required=True)
    figure.add_argument("--k", type=int, default=20)
    figure.add_argument("--s", type=int, default=16)
    figure.add_argument("--n-base", type=int, default=5,
                        help="coarsest steps-per-period; halves `count` times")
    figure.add_argument("--count", type=int, default=5)
    figure.add_argument("--out-dir", default=None)
    figure.add_argument("--config", default=None)
    figure.set_defaults(handler=_cmd_figure)

    export = subs.add_parser("export-tableau", help="JSON tableau of HBVM(k, s)")
    export.add_argument("--s", type=int, required=True)
    export.add_argument("--k", type=int, required=True)
    export.set_defaults(handler=_cmd_export)
    return parser


def _out_dir(args) -> Path:
    root = args.out_dir or os.environ.get("SHBVM_OUT_DIR") or "."
    path = Path(root)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _emit(reports, fmt: str) -> None:
    if fmt == "csv":
        sys.stdout.write(report_csv(reports))
    elif fmt == "json":
        if isinstance(reports, list):
            payload = {"rows": [report_json_dict(r) for r in reports]}
        else:
            payload = report_json_dict(reports)
        json.dump(payload, sys.stdout, indent=2)
        sys.stdout.write("\n")
    else:
        sys.stdout.write(report_table(reports))


def _spec_from_args(args, n=None) -> ExperimentSpec:
    return ExperimentSpec(
        problem=args.problem,
        method=args.method,
        n=args.n if n is None else n,
        periods=args.periods,
        tolerance=args.tol,
        iteration=args.iteration,
        residual_tolerance=args.residual_tol,
        output=args.out,
    )


def _default_h_list(problem_name: str, n_base: int = 5, count: int = 5):
    period = get_problem(problem_name).period
    return [period / (n_base * 2**i) for i in range(count)]


def _write_decay_files(problem: str, profiles, directory: Path) -> list[str]:
    from .plotting import render_decay_figure

    csv_path = directory / f"{problem}_decay.csv"
    csv_path.write_text(decay_figure_csv(profiles))
    png_path = directory / f"{problem}_decay.png"
    render_decay_figure(profiles, png_path, title=f"{problem}: coefficient decay")
    return [str(csv_path), str(png_path)]


def _cmd_run(args) -> int:
    spec = _spec_from_args(args)
    report = run_experiment(spec)
    _emit(report, spec.output)
    written = []
    if args.seed_figure:
        profiles = decay_figure_data(spec.problem, _default_h_list(spec.problem))
        written += _write_decay_files(spec.problem, profiles, _out_dir(args))
    if args.plot:
        from .plotting import render_error_history

        path = _out_dir(args) / f"{spec.problem}_{spec.method.replace(':', '_').replace(',', '_')}_history.png"
        written.append(render_error_history(report, path))
    for path in written:
        print(f"wrote {path}", file=sys.stderr)
    return 0


def _cmd_table(args) -> int:
    if args.rows < 2:
        raise InvalidSpecError("a convergence table needs at least 2 rows")
    specs = [_spec_from_args(args, n=args.n * 2**i) for i in range(args.rows)]
    reports = convergence_table(specs)
    _emit(reports, args.out)
    if args.plot:
        from .plotting import render_convergence

        path = _out_dir(args) / f"{args.problem}_{args.method.replace(':', '_').replace(',', '_')}_convergence.png"
        print(f"wrote {render_convergence(reports, path)}", file=sys.stderr)
    return 0


def _cmd_figure(args) -> int:
    h_values = _default_h_list(args.problem, args.n_base, args.count)
    profiles = decay_figure_data(args.problem, h_values, k=args.k, s=args.s)
    sys.stdout.write(decay_figure_csv(profiles))
    for path in _write_decay_files(args.problem, profiles, _out_dir(args)):
        print(f"wrote {path}", file=sys.stderr)
    return 0


def _cmd_export(args) -> int:
    sys.stdout.write(tableau_as_json(build_coefficients(args.s, args.k)) + "\n")
    return 0


def _expand_config(argv: list[str]) -> list[str]:
    """Splice key=value config entries in front of the explicit flags."""
    if "--config" not in argv:
        return argv
    path = argv[argv.index("--config") + 1]
    injected: list[str] = []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidSpecError(f"malformed config line {raw!r}; expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        flag = "--" + key.replace("_", "-")
        if value.lower() in ("true", "false"):
            if value.lower() == "true":
                injected.append(flag)
        else:
            injected += [flag, value]
    # flags given on the command line come later and therefore win
    return argv[:1] + injected + argv[1:]


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv = _expand_config(argv)
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (InvalidSpecError, KeyError, FileNotFoundError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.handler(args)
    except (InvalidSpecError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (StageSolverError, IntegrationError, OrderSelectionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
