"""Command-line interface: simulate, fit and benchmark.

Exit codes: 0 success, 2 usage or schema error, 3 data-precondition error
(e.g. unbalanced blocks without --rebalance), 4 solver non-convergence (the
partial result is still written).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .core import BlockPartition, Dataset
from .estimators import SolverConfig, minimax_fit, ols_fit, profile_minimax_fit
from .io import (
    CsvSchemaError,
    fit_result_to_json,
    read_dataset_csv,
    truth_to_json,
    write_dataset_csv,
)
from .metrics import METHODS, run_benchmark
from .partition import (
    PartitionConfig,
    default_block_size,
    identify_max_variance_blocks,
    response_descending_partition,
    time_order_partition,
)
from .simgen import EXPERIMENT_IDS, make_experiment
from .sparse import LassoConfig, cv_select_lambda, glasso_fit, glasso_mean_uncertain_fit


class PreconditionError(Exception):
    """Data violates an estimator precondition (exit code 3)."""


class UsageError(Exception):
    """Bad arguments beyond what argparse catches (exit code 2)."""


def _parse_config_file(path: str) -> dict:
    values: dict = {}
    known = {
        "max_iterations": int,
        "tolerance": float,
        "step_rule": str,
        "seed": int,
    }
    for line_no, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {line_no} is not key = value: {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in known:
            raise UsageError(f"unknown config key {key!r} on line {line_no}")
        try:
            values[key] = known[key](val)
        except ValueError:
            raise UsageError(f"bad value for {key!r} on line {line_no}: {val!r}") from None
    return values


def _solver_config(args) -> SolverConfig:
    values = {}
    if getattr(args, "config", None):
        values.update(_parse_config_file(args.config))
    if getattr(args, "seed", None) is not None:
        values["seed"] = args.seed
    try:
        return SolverConfig(**values)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _rebalance(data: Dataset) -> Dataset:
    """Truncate each block to the smallest size, keeping the earliest rows."""
    n = int(data.blocks.sizes.min())
    kept = [idx[:n] for idx in data.blocks.blocks]
    order = np.concatenate(kept)
    blocks = tuple(np.arange(i * n, (i + 1) * n) for i in range(len(kept)))
    return Dataset(y=data.y[order], x=data.x[order], blocks=BlockPartition(blocks))


def _apply_partition(data: Dataset, args) -> tuple[Dataset, dict]:
    info: dict = {}
    mode = args.partition
    if mode == "time":
        if args.m is None:
            raise UsageError("--partition time requires --m")
        data = Dataset(
            y=data.y, x=data.x, blocks=time_order_partition(data.n_rows, args.m)
        )
    elif mode == "descending":
        if args.m is None:
            raise UsageError("--partition descending requires --m")
        data = Dataset(
            y=data.y, x=data.x, blocks=response_descending_partition(data, args.m)
        )
    elif mode == "identify":
        n0 = args.n if args.n is not None else default_block_size(data.p)
        if data.n_rows % n0 != 0:
            raise PreconditionError(
                f"initial block size {n0} does not divide {data.n_rows} rows"
            )
        cfg = PartitionConfig(
            mode="data_driven", m0=data.n_rows // n0, n0=n0, alpha=args.alpha
        )
        rows, diag = identify_max_variance_blocks(data, cfg)
        info["identified_rows"] = int(rows.size)
        info["identify_diagnostics"] = diag
        data = Dataset(
            y=data.y[rows],
            x=data.x[rows],
            blocks=BlockPartition((np.arange(rows.size),)),
        )
    return data, info


def _fit_one(data: Dataset, args) -> tuple:
    solver = _solver_config(args)
    method = args.method
    lam = getattr(args, "lam", None)
    if method == "ols":
        return ols_fit(data), None
    if method == "minimax":
        return minimax_fit(data, solver), None
    if method == "profile":
        return profile_minimax_fit(data, solver, init=args.init), None
    # penalized methods
    folds = args.cv if args.cv is not None else 5
    lasso = LassoConfig(lam=lam if lam is not None else 0.0, cv_folds=folds, solver=solver)
    cv_info = None
    if lam is None:
        objective = "mean_uncertain" if method == "glasso_mu" else "mean_certain"
        cv = cv_select_lambda(data, lasso, objective=objective)
        lasso = LassoConfig(
            lam=cv.lambda_star, cv_folds=folds, solver=solver,
            zero_threshold=lasso.zero_threshold,
        )
        cv_info = {
            "lambda_star": cv.lambda_star,
            "lambdas": cv.lambdas.tolist(),
            "scores": cv.scores.tolist(),
        }
    if method == "glasso":
        return glasso_fit(data, lasso), cv_info
    return glasso_mean_uncertain_fit(data, lasso), cv_info


def _summary_text(result, method: str, cv_info) -> str:
    lines = [f"method: {method}"]
    for k, v in enumerate(result.beta):
        lines.append(f"  x{k + 1}: {v: .6f}")
    if result.mu_upper_hat is not None:
        lines.append(f"upper-mean shift: {result.mu_upper_hat:.6f}")
    lines.append(f"objective: {result.objective_value:.6g}")
    lines.append(f"active block: {result.active_block}")
    lines.append(f"iterations: {result.iterations}")
    lines.append(f"converged: {result.converged}")
    sparsity = result.diagnostics.get("sparsity")
    if sparsity:
        names = [f"x{k + 1}" for k in sparsity["selected"]]
        lines.append(f"selected: {', '.join(names) if names else '(none)'}")
    if cv_info is not None:
        lines.append(f"cv lambda: {cv_info['lambda_star']:.6g}")
    for w in result.diagnostics.get("warnings", []):
        lines.append(f"warning: {w}")
    return "\n".join(lines) + "\n"


def cmd_simulate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sim = make_experiment(args.experiment, args.seed)
    write_dataset_csv(out / "data.csv", sim.dataset)
    (out / "truth.json").write_text(
        truth_to_json(sim.beta0, sim.family, args.experiment, args.seed)
    )
    print(f"wrote {out / 'data.csv'} and {out / 'truth.json'}")
    return 0


def cmd_fit(args) -> int:
    try:
        data = read_dataset_csv(args.data)
    except FileNotFoundError:
        raise UsageError(f"no such file: {args.data}") from None
    data, info = _apply_partition(data, args)
    if not data.blocks.is_balanced:
        if args.rebalance:
            data = _rebalance(data)
        else:
            raise PreconditionError(
                "blocks are unbalanced; pass --rebalance to truncate to the "
                "smallest block"
            )
    result, cv_info = _fit_one(data, args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "fit.json").write_text(fit_result_to_json(result))
    (out / "summary.txt").write_text(_summary_text(result, args.method, cv_info))
    print((out / "summary.txt").read_text(), end="")
    if not result.converged:
        print("solver did not converge; partial result written", file=sys.stderr)
        return 4
    return 0


def cmd_benchmark(args) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    if not methods:
        raise UsageError("no methods given")
    for m in methods:
        if m not in METHODS:
            raise UsageError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
    if args.replications < 1:
        raise UsageError("replications must be >= 1")
    solver = _solver_config(args)
    report = run_benchmark(
        args.experiment, methods, args.replications, seed=args.seed, solver=solver
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json() + "\n")
    table = report.to_text_table()
    (out / "report.txt").write_text(table + "\n")
    print(table)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gnreg",
        description="Mini-max block regression under mean/variance uncertainty",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a benchmark dataset")
    sim.add_argument("experiment", choices=EXPERIMENT_IDS)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("-o", "--out", default=".", help="output directory")
    sim.set_defaults(func=cmd_simulate)

    fit = sub.add_parser("fit", help="fit a model to a dataset CSV")
    fit.add_argument("data", help="dataset CSV (y,x1..xp,block)")
    fit.add_argument("--method", choices=METHODS, default="minimax")
    fit.add_argument("--lambda", dest="lam", type=float, default=None,
                     help="penalty weight; omitted means CV for penalized methods")
    fit.add_argument("--cv", type=int, default=None, help="CV fold count")
    fit.add_argument("--partition", choices=("csv", "time", "descending", "identify"),
                     default="csv", help="override the CSV block column")
    fit.add_argument("--m", type=int, default=None, help="block count for --partition")
    fit.add_argument("--n", type=int, default=None,
                     help="initial block size for --partition identify")
    fit.add_argument("--alpha", type=float, default=0.05,
                     help="test level for --partition identify")
    fit.add_argument("--init", choices=("ols", "minimax"), default="ols",
                     help="initial estimator for the profile method")
    fit.add_argument("--rebalance", action="store_true",
                     help="truncate unbalanced blocks to the smallest size")
    fit.add_argument("--config", default=None, help="key = value solver config file")
    fit.add_argument("--seed", type=int, default=None)
    fit.add_argument("--out", default=".", help="output directory")
    fit.set_defaults(func=cmd_fit)

    bench = sub.add_parser("benchmark", help="Monte Carlo method comparison")
    bench.add_argument("experiment", choices=EXPERIMENT_IDS)
    bench.add_argument("--methods", default="minimax,ols",
                       help="comma-separated method list")
    bench.add_argument("-R", "--replications", type=int, default=200)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--config", default=None, help="key = value solver config file")
    bench.add_argument("--out", default=".", help="output directory")
    bench.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, CsvSchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PreconditionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        # estimator preconditions (unbalanced blocks, rank deficiency, ...)
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
