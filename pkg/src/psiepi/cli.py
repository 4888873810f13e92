"""``psiepi`` command-line workbench.

Exit codes: 0 success, 1 runtime or invariant failure, 2 usage error or
malformed input file. Seeds default to $WORKBENCH_SEED (then 0); an explicit
``--seed`` always wins.
"""
from __future__ import annotations

import argparse
import math
import sys
import time

import numpy as np

from . import seeding
from .errors import NoThreshold, NotViolating, PsiEpiError, ScenarioFormatError
from .files import ResultRow, load_scenario, save_scenario, write_results
from .inequality import born_table, efficiency_threshold, noise_robustness, s_eta, s_value
from .ontic import random_model, theorem_terms
from .optimizer import OptimizerOptions, optimize_scenario
from .simulation import NoiseModel, estimate_s, perturb_table, simulate_counts

TRIAL_STREAM = 100
NAN = float("nan")


class UsageError(Exception):
    pass


def _fmt(x) -> str:
    return "nan" if isinstance(x, float) and math.isnan(x) else repr(float(x))


def _threshold_or_nan(scenario, table) -> float:
    try:
        eta = efficiency_threshold(scenario, table)
    except NoThreshold:
        return NAN
    return eta if eta < 1.0 else NAN


def _epsilon_or_nan(scenario, table) -> float:
    try:
        return noise_robustness(scenario, table)
    except NotViolating:
        return NAN


def _elapsed_ms(t0, enabled=True) -> float:
    return round((time.perf_counter() - t0) * 1e3, 3) if enabled else 0.0


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _options(args, seed) -> OptimizerOptions:
    if args.restarts < 1:
        raise UsageError("restarts must be >= 1")
    return OptimizerOptions(restarts=args.restarts, seed=seed, field=args.field,
                            max_iters=args.max_iters, workers=args.workers,
                            rank1_measurements=not args.general_measurements)


def _check_dim_n(dim, n):
    if n < 3:
        raise UsageError("n must be >= 3")
    if not 3 <= dim <= 8:
        raise UsageError("dim must be between 3 and 8")


def cmd_optimize(args) -> int:
    _check_dim_n(args.dim, args.n)
    seed = seeding.resolve_seed(args.seed)
    opts = _options(args, seed)
    result = optimize_scenario(args.dim, args.n, opts)
    sc, table = result.scenario, result.theory_table
    report = s_value(sc, table)
    metadata = {
        "seed": seed,
        "optimizer": {
            "restarts": opts.restarts,
            "max_iters": opts.max_iters,
            "field": opts.field,
            "rank1_measurements": opts.rank1_measurements,
            "best_restart_index": result.best_restart_index,
            "converged": result.converged,
        },
        "provenance": "psiepi optimize",
    }
    save_scenario(args.out, sc, metadata)
    print(f"S={_fmt(report.s)} kappa0_bound={_fmt(report.kappa0_bound)} "
          f"epsilon0={_fmt(_epsilon_or_nan(sc, table))} eta_threshold={_fmt(_threshold_or_nan(sc, table))}")
    return 0


def cmd_evaluate(args) -> int:
    sc, _ = load_scenario(args.scenario)
    table = born_table(sc)
    report = s_value(sc, table)
    print(f"S={_fmt(report.s)}")
    print(f"kappa0_bound={_fmt(report.kappa0_bound)}")
    print(f"numerator={_fmt(report.numerator)}")
    print(f"denominator={_fmt(report.denominator)}")
    for (j1, j2), v in report.per_pair_sums.items():
        print(f"pair_sum[{j1},{j2}]={_fmt(v)}")
    if args.eta is not None:
        print(f"S_eta={_fmt(s_eta(sc, table, args.eta))}")
    return 0


def cmd_threshold(args) -> int:
    sc, _ = load_scenario(args.scenario)
    eta = _threshold_or_nan(sc, born_table(sc))
    print("no threshold" if math.isnan(eta) else _fmt(eta))
    return 0


def _noise_from_tokens(tokens, counts) -> NoiseModel:
    tokens = list(tokens or ["defaults"])
    base = NoiseModel()
    if tokens[0] in ("defaults", "off"):
        if tokens[0] == "off":
            base = NoiseModel.off()
        tokens = tokens[1:]
    updates = {}
    names = NoiseModel.field_names()
    for tok in tokens:
        key, sep, val = tok.partition("=")
        if not sep or key not in names:
            raise UsageError(f"bad --noise token {tok!r}; use defaults, off or KEY=VAL with KEY in {names}")
        try:
            updates[key] = float(val)
        except ValueError:
            raise UsageError(f"bad value in --noise token {tok!r}") from None
    if counts is not None:
        updates["counts_per_setting"] = counts
    try:
        return base.with_updates(**updates)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_simulate(args) -> int:
    if args.trials < 1:
        raise UsageError("trials must be >= 1")
    if args.bootstrap < 2:
        raise UsageError("bootstrap must be >= 2")
    noise = _noise_from_tokens(args.noise, args.counts)
    sc, _ = load_scenario(args.scenario)
    seed = seeding.resolve_seed(args.seed)
    rows = []
    t_all = time.perf_counter()
    for t in range(args.trials):
        t0 = time.perf_counter()
        trial_seed = seeding.derive_seed(seed, TRIAL_STREAM, t)
        table = perturb_table(sc, noise, trial_seed)
        record = simulate_counts(table, noise, trial_seed)
        est = estimate_s(record, sc, args.bootstrap, trial_seed)
        rows.append(ResultRow(sc.dim, sc.n, est.s_hat, est.sigma, min(est.s_hat, 1.0),
                              _threshold_or_nan(sc, est.table_hat), _epsilon_or_nan(sc, est.table_hat),
                              trial_seed, _elapsed_ms(t0, not args.no_timing)))
    s_hats = np.array([r.s for r in rows])
    sigmas = np.array([r.sigma for r in rows])
    emp_std = float(np.std(s_hats, ddof=1)) if len(rows) > 1 else 0.0

    def nanmean(col):
        vals = np.array([getattr(r, col) for r in rows])
        return float(np.nanmean(vals)) if np.any(~np.isnan(vals)) else NAN

    mean_s = float(np.mean(s_hats))
    rows.append(ResultRow(sc.dim, sc.n, mean_s, float(np.mean(sigmas)), min(mean_s, 1.0),
                          nanmean("eta_threshold"), nanmean("epsilon0"), seed,
                          _elapsed_ms(t_all, not args.no_timing)))
    write_results(args.csv, rows)
    print(f"trials={args.trials} mean_s_hat={_fmt(mean_s)} mean_sigma={_fmt(float(np.mean(sigmas)))} "
          f"empirical_std={_fmt(emp_std)}")
    return 0


def cmd_oracle(args) -> int:
    if args.lambda_count < 1:
        raise UsageError("lambda must be >= 1")
    if args.n < 3:
        raise UsageError("n must be >= 3")
    if args.trials < 1:
        raise UsageError("trials must be >= 1")
    seed = seeding.resolve_seed(args.seed)
    min_slack = math.inf
    violations = lemma_a = lemma_b = 0
    for t in range(args.trials):
        model = random_model(args.lambda_count, args.n, seed=seeding.derive_seed(seed, seeding.ORACLE, t))
        terms = theorem_terms(model)
        min_slack = min(min_slack, terms.slack)
        violations += terms.slack < -1e-9
        lemma_a += terms.measurement_bound_gap < -1e-12
        lemma_b += terms.pairwise_bound_gap < -1e-9
    print(f"trials={args.trials} min_slack={_fmt(min_slack)} violations={violations} "
          f"measurement_bound_violations={lemma_a} pairwise_bound_violations={lemma_b}")
    return 0 if violations == 0 else 1


def cmd_sweep(args) -> int:
    if args.n_min > args.n_max:
        raise UsageError("empty range: n-min > n-max")
    _check_dim_n(args.dim, args.n_min)
    seed = seeding.resolve_seed(args.seed)
    opts = _options(args, seed)
    rows = []
    for n in range(args.n_min, args.n_max + 1):
        t0 = time.perf_counter()
        res = optimize_scenario(args.dim, n, opts)
        sc, table = res.scenario, res.theory_table
        rows.append(ResultRow(args.dim, n, res.s, 0.0, min(res.s, 1.0), _threshold_or_nan(sc, table),
                              _epsilon_or_nan(sc, table), seed, _elapsed_ms(t0, not args.no_timing)))
        print(f"d={args.dim} n={n} S={_fmt(res.s)} converged={res.converged}", flush=True)
    write_results(args.csv, rows)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_optimizer_flags(p, restarts_default=64):
    p.add_argument("--restarts", type=int, default=restarts_default)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--field", choices=("real", "complex"), default="real")
    p.add_argument("--max-iters", type=int, default=2000)
    p.add_argument("--workers", type=int, default=1, help="processes for independent restarts")
    p.add_argument("--general-measurements", action="store_true",
                   help="polish with general PSD effects instead of rank-1 triads only")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="psiepi", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimize", help="search for states and measurements minimising S")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    _add_optimizer_flags(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("evaluate", help="report S for a scenario file")
    p.add_argument("--scenario", required=True)
    p.add_argument("--eta", type=float, default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("simulate", help="Monte-Carlo photon-counting runs")
    p.add_argument("--scenario", required=True)
    p.add_argument("--counts", type=float, default=None, help="expected heralds per setting")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--bootstrap", type=int, default=200)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--noise", nargs="+", default=None, metavar="defaults|off|KEY=VAL")
    p.add_argument("--csv", required=True)
    p.add_argument("--no-timing", action="store_true", help="write wall_ms as 0 for byte-stable output")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("threshold", help="detection-efficiency threshold")
    p.add_argument("--scenario", required=True)
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("oracle", help="check the overlap theorem on random finite models")
    p.add_argument("--lambda", dest="lambda_count", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("sweep", help="optimise S over a range of n")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--n-min", type=int, required=True)
    p.add_argument("--n-max", type=int, required=True)
    p.add_argument("--csv", required=True)
    p.add_argument("--no-timing", action="store_true", help="write wall_ms as 0 for byte-stable output")
    _add_optimizer_flags(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"psiepi {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except ScenarioFormatError as exc:
        print(f"psiepi {args.command}: malformed scenario file: {exc}", file=sys.stderr)
        return 2
    except PsiEpiError as exc:
        print(f"psiepi {args.command}: invariant violated: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"psiepi {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
