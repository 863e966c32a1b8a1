"""Command-line experiment runner.

Exit codes: 0 success, 2 bad config or arguments, 3 no convergence,
4 numeric-regime error, 5 I/O error.
"""

import argparse
import csv
import io
import sys

from . import __version__
from .closed_form import closed_form_solution
from .config import ExperimentConfig, load_config
from .dynamics import BUCKETS, monte_carlo, solve_equilibrium
from .exceptions import ConfigError, NonconvergenceError, SubsidyMarketError
from .figures import FIGURES, build_figure, default_base
from .foc import profile_residuals
from .government import sweep
from .model import (
    StrategyProfile,
    outside_calls_served,
    provider_objective,
    social_welfare,
)

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGED, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4, 5
COMMANDS = ("evaluate", "equilibrium", "monte-carlo", "closed-form", "sweep", "figure")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="spectrum-subsidy", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="experiment config file (INI)")
    parser.add_argument("--out", default="-", help="output CSV path, '-' for stdout")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--epsilon", type=float, default=None,
                        help="profit-change tolerance (default 1e-3 or the config value)")
    parser.add_argument("--max-iter", type=int, default=None,
                        help="iteration cap (default 1000 or the config value)")
    parser.add_argument("--figure", choices=sorted(FIGURES))
    parser.add_argument("--runs", type=int, default=10000, help="Monte-Carlo runs")
    parser.add_argument("--jobs", type=int, default=1, help="worker processes for monte-carlo")
    parser.add_argument("--profile", help="evaluate: s11,s12,s21,s22,f1,f2 "
                        "(default: the closed-form profile)")
    return parser


def _resolve_config(args):
    if args.config is not None:
        config = load_config(args.config)
    elif args.command == "figure":
        config = default_base(args.figure)
    else:
        raise ConfigError("--config is required for this command", field="config")
    overrides = {}
    if args.epsilon is not None:
        if not args.epsilon > 0:
            raise ConfigError("must be > 0", field="epsilon")
        overrides["epsilon"] = args.epsilon
    if args.max_iter is not None:
        if args.max_iter < 1:
            raise ConfigError("must be >= 1", field="max_iter")
        overrides["max_iter"] = args.max_iter
    if overrides:
        config = ExperimentConfig(**{**config.__dict__, **overrides})
    return config


def _evaluate(config, args):
    cfg, policy = config.market, config.require_policy()
    if args.profile is None:
        cf = closed_form_solution(cfg, policy)
        profile = StrategyProfile(cf.s_star, cf.f_star)
    else:
        try:
            values = [float(v) for v in args.profile.split(",")]
        except ValueError:
            raise ConfigError(f"cannot read {args.profile!r}", field="profile") from None
        if len(values) != 6:
            raise ConfigError("expected six comma-separated numbers", field="profile")
        profile = StrategyProfile.from_flat(*values)
    res = profile_residuals(profile, policy, cfg)
    header = ("s11", "s12", "s21", "s22", "f1", "f2", "obj1", "obj2",
              "oc1", "oc2", "welfare", "foc1", "foc2")
    row = (*profile.flat(),
           *(provider_objective(j, profile, policy, cfg) for j in (0, 1)),
           *(outside_calls_served(j, profile, cfg) for j in (0, 1)),
           social_welfare(profile, cfg),
           *(r.max_abs() for r in res))
    return header, [row], None


def _equilibrium(config, args):
    cfg, policy = config.market, config.require_policy()
    result = solve_equilibrium(cfg, policy, config.epsilon, config.max_iter)
    header = ("iterations", "converged", "refined", "s11", "s12", "s21", "s22", "f1", "f2",
              "obj1", "obj2", "foc1", "foc2")
    foc = [r.max_abs() for r in profile_residuals(result.profile, policy, cfg)]
    row = (result.iterations, int(result.converged), int(result.refined),
           *result.profile.flat(), *result.objectives, *foc)
    if not result.converged:
        return header, [row], NonconvergenceError(result.message)
    return header, [row], result.message


def _monte_carlo(config, args):
    if args.runs < 1:
        raise ConfigError("must be >= 1", field="runs")
    if args.seed < 0:
        raise ConfigError("must be >= 0", field="seed")
    report = monte_carlo(args.runs, args.seed, config.parameter_ranges(),
                         config.epsilon, config.max_iter, n_jobs=args.jobs)
    rows = [(b, report.buckets[b], report.fraction(b)) for b in BUCKETS]
    return ("bucket", "count", "fraction"), rows, f"{args.runs} runs, seed {args.seed}"


def _closed_form(config, args):
    cf = closed_form_solution(config.market, config.require_policy())
    header = ("s11", "s12", "s21", "s22", "f1", "f2", "A", "B", "C", "D",
              "f1_clamped", "f2_clamped")
    row = (*cf.s_star.ravel(), *cf.f_star, cf.A, cf.B, cf.C, cf.D,
           *(int(flag) for flag in cf.fee_clamped))
    return header, [row], None


def _sweep(config, args):
    result = sweep(config.market, config.grid_size, config.epsilon, config.max_iter,
                   xi_lo=config.xi_lo)
    header = ("xi1", "xi2", "welfare", "obj1", "obj2", "best")
    rows = []
    for i, (grants, w, eq) in enumerate(zip(result.grid, result.welfare, result.equilibria)):
        if w is not None:
            rows.append((*grants, w, *eq.objectives, int(i == result.argmax_index)))
    skipped = len(result.grid) - len(rows)
    return header, rows, f"xi_star = {result.xi_star}; {skipped} grid points did not converge"


def _figure(config, args):
    if args.figure is None:
        raise ConfigError("--figure is required", field="figure")
    header, rows = build_figure(args.figure, config)
    return header, rows, None


HANDLERS = {
    "evaluate": _evaluate,
    "equilibrium": _equilibrium,
    "monte-carlo": _monte_carlo,
    "closed-form": _closed_form,
    "sweep": _sweep,
    "figure": _figure,
}


def _render(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(repr(float(v)) if isinstance(v, float) or hasattr(v, "dtype")
                        and v.dtype.kind == "f" else v for v in row)
    return buf.getvalue()


def _write(text, out):
    if out == "-":
        sys.stdout.write(text)
        return
    with open(out, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.figure is not None and args.command != "figure":
        parser.error("--figure is only valid with the figure command")
    try:
        config = _resolve_config(args)
        header, rows, note = HANDLERS[args.command](config, args)
        _write(_render(header, rows), args.out)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SubsidyMarketError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    if isinstance(note, NonconvergenceError):
        print(f"error: {note}", file=sys.stderr)
        return note.exit_code
    if note:
        print(note, file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
