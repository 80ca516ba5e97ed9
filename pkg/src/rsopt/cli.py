"""Command-line interface: constants, verify, run, bench.

Experiment inputs come from a strict JSON config file (unknown keys are
rejected, every invariant is re-validated at load, errors name the
offending field path). Exit codes: 0 success, 1 verification failure,
2 usage/config error, 3 divergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

from .bench import ExperimentSpec, MethodSpec, TuneSpec, run_experiment
from .optim import METHODS, MethodConfig, run
from .problems import NoiseModel, make_quadratic
from .special import SmoothnessSummary, effective_rank, ell, mu, tau
from .verify import reports_to_csv, run_grid

__all__ = ["main", "ConfigError", "load_config"]

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_DIVERGED = 3

DEFAULT_VERIFY_DIMS = (2, 10, 100, 1000)


class ConfigError(Exception):
    """Config validation failure carrying the offending field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _require_mapping(obj, path: str) -> dict:
    if not isinstance(obj, dict):
        raise ConfigError(path, f"expected an object, got {type(obj).__name__}")
    return obj


def _check_keys(obj: dict, path: str, required: set[str], optional: set[str]) -> None:
    unknown = set(obj) - required - optional
    if unknown:
        raise ConfigError(f"{path}.{sorted(unknown)[0]}", "unknown key")
    missing = required - set(obj)
    if missing:
        raise ConfigError(f"{path}.{sorted(missing)[0]}", "missing required key")


def _number(obj: dict, key: str, path: str, *, integer: bool = False,
            minimum=None, maximum=None, strict_min=None) -> float:
    val = obj[key]
    where = f"{path}.{key}"
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(where, "expected a number")
    if integer and not isinstance(val, int):
        raise ConfigError(where, "expected an integer")
    if minimum is not None and val < minimum:
        raise ConfigError(where, f"must be >= {minimum}")
    if strict_min is not None and val <= strict_min:
        raise ConfigError(where, f"must be > {strict_min}")
    if maximum is not None and val > maximum:
        raise ConfigError(where, f"must be <= {maximum}")
    return val


def _int_list(obj: dict, key: str, path: str) -> list[int]:
    val = obj[key]
    where = f"{path}.{key}"
    if not isinstance(val, list) or not val:
        raise ConfigError(where, "expected a nonempty list")
    for i, entry in enumerate(val):
        if isinstance(entry, bool) or not isinstance(entry, int):
            raise ConfigError(f"{where}[{i}]", "expected an integer")
    return val


def _parse_noise(obj, path: str) -> NoiseModel:
    obj = _require_mapping(obj, path)
    if "kind" not in obj:
        raise ConfigError(f"{path}.kind", "missing required key")
    kind = obj["kind"]
    if kind == "none":
        _check_keys(obj, path, {"kind"}, set())
        return NoiseModel.none()
    if kind == "gaussian":
        _check_keys(obj, path, {"kind", "sigma_c"}, set())
        return NoiseModel.gaussian(_number(obj, "sigma_c", path, minimum=0.0))
    if kind == "sym_pareto":
        _check_keys(obj, path, {"kind", "alpha"}, {"scale"})
        alpha = _number(obj, "alpha", path, strict_min=1.0)
        scale = _number(obj, "scale", path, strict_min=0.0) if "scale" in obj else 1.0
        return NoiseModel.sym_pareto(alpha, scale)
    raise ConfigError(f"{path}.kind", f"unknown noise kind {kind!r}")


def _parse_problem(obj, path: str) -> dict:
    obj = _require_mapping(obj, path)
    _check_keys(obj, path, {"d", "noise"}, {"rho"})
    d = int(_number(obj, "d", path, integer=True, minimum=2))
    rho = _number(obj, "rho", path, strict_min=1.0, maximum=d) if "rho" in obj else None
    return {"d": d, "rho": rho, "noise": _parse_noise(obj["noise"], f"{path}.noise")}


def _parse_method(obj, path: str, d: int) -> MethodConfig:
    obj = _require_mapping(obj, path)
    _check_keys(
        obj, path,
        {"name", "r", "eta", "u", "B", "q", "T", "seed"},
        {"fixed_eta"},
    )
    name = obj["name"]
    if name not in METHODS:
        raise ConfigError(f"{path}.name", f"must be one of {list(METHODS)}")
    r = int(_number(obj, "r", path, integer=True, minimum=1))
    if r > d:
        raise ConfigError(f"{path}.r", f"must be <= problem.d ({d})")
    u = _number(obj, "u", path, minimum=0.0)
    if not (u == 0.0 or u < 1.0):
        raise ConfigError(f"{path}.u", "must be 0 or in (0, 1)")
    fixed_eta = None
    if "fixed_eta" in obj:
        fixed_eta = _number(obj, "fixed_eta", path, strict_min=0.0)
    return MethodConfig(
        method=name,
        r=r,
        eta=_number(obj, "eta", path, strict_min=0.0),
        u=u,
        B=_number(obj, "B", path, strict_min=0.0),
        q=_number(obj, "q", path, minimum=0.0),
        T=int(_number(obj, "T", path, integer=True, minimum=1)),
        seed=int(_number(obj, "seed", path, integer=True)),
        fixed_eta=fixed_eta,
    )


def _parse_bench(obj, path: str, d: int, noise: NoiseModel) -> tuple[ExperimentSpec, int]:
    obj = _require_mapping(obj, path)
    _check_keys(
        obj, path,
        {"rhos", "methods", "grid", "tune_seeds", "eval_seeds", "budget", "batch"},
        {"score_window", "workers"},
    )
    rhos = obj["rhos"]
    if not isinstance(rhos, list) or not rhos:
        raise ConfigError(f"{path}.rhos", "expected a nonempty list")
    for i, rho in enumerate(rhos):
        if isinstance(rho, bool) or not isinstance(rho, (int, float)) or not 1.0 < rho <= d:
            raise ConfigError(f"{path}.rhos[{i}]", f"must be a number in (1, {d}]")
    methods_obj = obj["methods"]
    if not isinstance(methods_obj, list) or not methods_obj:
        raise ConfigError(f"{path}.methods", "expected a nonempty list")
    methods = []
    for i, entry in enumerate(methods_obj):
        mpath = f"{path}.methods[{i}]"
        entry = _require_mapping(entry, mpath)
        _check_keys(entry, mpath, {"name", "r"}, {"fixed_eta"})
        if entry["name"] not in METHODS:
            raise ConfigError(f"{mpath}.name", f"must be one of {list(METHODS)}")
        r = int(_number(entry, "r", mpath, integer=True, minimum=1))
        if r > d:
            raise ConfigError(f"{mpath}.r", f"must be <= problem.d ({d})")
        fixed_eta = None
        if "fixed_eta" in entry:
            fixed_eta = _number(entry, "fixed_eta", mpath, strict_min=0.0)
        methods.append(MethodSpec(name=entry["name"], r=r, fixed_eta=fixed_eta))
    grid = obj["grid"]
    if not isinstance(grid, list) or not grid:
        raise ConfigError(f"{path}.grid", "expected a nonempty list")
    for i, g in enumerate(grid):
        if isinstance(g, bool) or not isinstance(g, (int, float)) or not g > 0:
            raise ConfigError(f"{path}.grid[{i}]", "must be a positive number")
    tune_seeds = _int_list(obj, "tune_seeds", path)
    eval_seeds = _int_list(obj, "eval_seeds", path)
    if set(tune_seeds) & set(eval_seeds):
        raise ConfigError(f"{path}.eval_seeds", "must be disjoint from tune_seeds")
    budget = int(_number(obj, "budget", path, integer=True, minimum=0))
    batch = int(_number(obj, "batch", path, integer=True, minimum=1))
    window = int(_number(obj, "score_window", path, integer=True, minimum=1)) if "score_window" in obj else 10
    workers = int(_number(obj, "workers", path, integer=True, minimum=1)) if "workers" in obj else 1
    tune_spec = TuneSpec(
        grid=tuple(float(g) for g in grid),
        tune_seeds=tuple(tune_seeds),
        eval_seeds=tuple(eval_seeds),
        budget=budget,
        score_window=window,
    )
    spec = ExperimentSpec(
        d=d, rhos=tuple(float(rho) for rho in rhos), batch=batch,
        methods=tuple(methods), noise=noise, tune=tune_spec,
    )
    return spec, workers


def load_config(path: str) -> dict:
    """Parse and validate the JSON run-config file."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(path, f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(path, f"invalid JSON: {exc}") from exc
    raw = _require_mapping(raw, "config")
    _check_keys(raw, "config", {"problem", "output"}, {"method", "bench"})
    problem = _parse_problem(raw["problem"], "problem")
    output = _require_mapping(raw["output"], "output")
    _check_keys(output, "output", {"dir"}, set())
    if not isinstance(output["dir"], str):
        raise ConfigError("output.dir", "expected a string")
    cfg = {"problem": problem, "output": output["dir"]}
    if "method" in raw:
        cfg["method"] = _parse_method(raw["method"], "method", problem["d"])
    if "bench" in raw:
        cfg["bench"] = _parse_bench(raw["bench"], "bench", problem["d"], problem["noise"])
    return cfg


def _cmd_constants(args) -> int:
    if not 1 <= args.r <= args.d:
        print(f"constants: require 1 <= r <= d, got d={args.d}, r={args.r}", file=sys.stderr)
        return EXIT_USAGE
    if (args.trace is None) != (args.opnorm is None):
        print("constants: --trace and --opnorm must be given together", file=sys.stderr)
        return EXIT_USAGE
    print(f"tau = {tau(args.d, args.r):.12g}")
    print(f"mu  = {mu(args.d, args.r):.12g}")
    if args.trace is not None:
        try:
            summary = SmoothnessSummary(trace=args.trace, op_norm=args.opnorm)
            r_eff = effective_rank(summary)
            value = ell(args.d, args.r, r_eff)
        except ValueError as exc:
            print(f"constants: {exc}", file=sys.stderr)
            return EXIT_USAGE
        print(f"r_eff = {r_eff:.12g}")
        print(f"ell = {value:.12g}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    if args.n < 1000:
        print(f"verify: n must be >= 1000, got {args.n}", file=sys.stderr)
        return EXIT_USAGE
    dims = args.d if args.d else list(DEFAULT_VERIFY_DIMS)
    for d in dims:
        if d < 1:
            print(f"verify: invalid dimension {d}", file=sys.stderr)
            return EXIT_USAGE
    if args.r:
        for d in dims:
            if any(not 1 <= r <= d for r in args.r):
                print(f"verify: -r values must lie in [1, {d}] for d={d}", file=sys.stderr)
                return EXIT_USAGE
    try:
        reports = run_grid(dims, args.n, args.seed, r_values=args.r if args.r else None)
    except ValueError as exc:
        print(f"verify: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for rep in reports:
        status = "PASS" if rep.passed else "FAIL"
        print(
            f"[{status}] {rep.name:<8} d={rep.d:<5} r={rep.r:<5} "
            f"empirical={rep.empirical:.6g} analytic={rep.analytic:.6g} "
            f"stderr_or_ks={rep.stderr_or_ks:.3g} n={rep.n_samples}"
        )
    if args.out:
        reports_to_csv(reports, args.out)
        print(f"wrote {args.out}")
    failed = [rep for rep in reports if not rep.passed]
    print(f"{len(reports) - len(failed)}/{len(reports)} checks passed")
    return EXIT_CHECK_FAILED if failed else EXIT_OK


def _write_trajectory_csv(record, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "oracle_calls", "grad_norm", "objective"])
        for k, calls, g, f in zip(
            record.iterations, record.oracle_calls, record.grad_norms, record.objectives
        ):
            writer.writerow([int(k), int(calls), repr(float(g)), repr(float(f))])


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    if "method" not in cfg:
        raise ConfigError("method", "missing required section for `run`")
    if cfg["problem"]["rho"] is None:
        raise ConfigError("problem.rho", "missing required key for `run`")
    problem = make_quadratic(cfg["problem"]["d"], cfg["problem"]["rho"])
    method_cfg = cfg["method"]
    record = run(problem, cfg["problem"]["noise"], method_cfg)
    os.makedirs(cfg["output"], exist_ok=True)
    out_path = os.path.join(
        cfg["output"],
        f"run_{method_cfg.method}_r{method_cfg.r}_seed{method_cfg.seed}.csv",
    )
    _write_trajectory_csv(record, out_path)
    print(f"wrote {out_path}")
    print(
        f"final: oracle_calls={int(record.oracle_calls[-1])} "
        f"grad_norm={record.grad_norms[-1]:.12g}"
    )
    if record.diverged:
        print(
            f"diverged at iteration {record.diverged_at}; last finite point: "
            f"iteration={int(record.iterations[-1])} grad_norm={record.grad_norms[-1]:.6g}",
            file=sys.stderr,
        )
        return EXIT_DIVERGED
    return EXIT_OK


def _cmd_bench(args) -> int:
    cfg = load_config(args.config)
    if "bench" not in cfg:
        raise ConfigError("bench", "missing required section for `bench`")
    spec, workers = cfg["bench"]
    out_dir = cfg["output"]
    selections = run_experiment(spec, out_dir, workers=workers)
    print(f"{'method':<18} {'r':>4} {'rho':>6} {'eta_bar':>10}  tuned")
    for sel in selections:
        print(f"{sel.label:<18} {sel.r:>4} {sel.rho:>6g} {sel.eta_bar:>10g}  {sel.tuned}")
    print(f"outputs in {out_dir}")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rsopt",
        description="Randomized-subspace stochastic optimization toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_const = sub.add_parser("constants", help="print tau, mu, and effective-rank constants")
    p_const.add_argument("--d", type=int, required=True)
    p_const.add_argument("--r", type=int, required=True)
    p_const.add_argument("--trace", type=float, default=None)
    p_const.add_argument("--opnorm", type=float, default=None)
    p_const.set_defaults(func=_cmd_constants)

    p_verify = sub.add_parser("verify", help="Monte-Carlo checks of the analytic identities")
    p_verify.add_argument("--d", type=int, action="append", default=None,
                          help="ambient dimension (repeatable; default grid 2,10,100,1000)")
    p_verify.add_argument("--r", type=int, action="append", default=None,
                          help="subspace dimension (repeatable; default 1, d/10, d/2, d)")
    p_verify.add_argument("--n", type=int, default=100_000)
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.add_argument("--out", default="verify_reports.csv")
    p_verify.set_defaults(func=_cmd_verify)

    p_run = sub.add_parser("run", help="single optimization run from a config file")
    p_run.add_argument("--config", required=True)
    p_run.set_defaults(func=_cmd_run)

    p_bench = sub.add_parser("bench", help="full tune/evaluate/aggregate/export pipeline")
    p_bench.add_argument("--config", required=True)
    p_bench.set_defaults(func=_cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
