"""Benchmark harness: stepsize tuning, multi-seed evaluation, aggregation,
CSV export and per-panel figure rendering.

Protocol: each (problem, method) pair tunes its constant stepsize over a
grid using a few tuning seeds (score = average gradient norm over the last
logged iterations, divergence scores +inf, ties break toward the smaller
stepsize), then evaluates the winner on disjoint evaluation seeds under a
fixed oracle-call budget. Curves report mean +/- 1 population std across
seeds on the common oracle-call grid.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .optim import MethodConfig, RunRecord, run
from .problems import NoiseModel, SpectrumQuadratic, make_quadratic

__all__ = [
    "MethodSpec",
    "TuneSpec",
    "ExperimentSpec",
    "AggregateCurve",
    "Selection",
    "iterations_within_budget",
    "score_run",
    "tune",
    "evaluate",
    "aggregate",
    "export_curves_csv",
    "export_panel_figure",
    "run_experiment",
    "write_stepsize_table",
]


@dataclass(frozen=True)
class MethodSpec:
    """A benchmark entrant: method name, subspace dimension, optional pinned stepsize."""

    name: str
    r: int
    fixed_eta: Optional[float] = None

    def label(self, d: int) -> str:
        base = {"rs_sgd": "SGD", "rs_nsgd": "NSGD", "rs_ngd": "NGD"}[self.name]
        if self.r == d:
            return base
        return f"RS-{base} (r={self.r})"


@dataclass(frozen=True)
class TuneSpec:
    """Stepsize grid plus the tuning/evaluation seed split and budget."""

    grid: tuple[float, ...]
    tune_seeds: tuple[int, ...]
    eval_seeds: tuple[int, ...]
    budget: int
    score_window: int = 10

    def __post_init__(self) -> None:
        if len(self.grid) == 0:
            raise ValueError("tuning grid must be nonempty")
        if any(not g > 0.0 for g in self.grid):
            raise ValueError("tuning grid entries must be positive")
        if set(self.tune_seeds) & set(self.eval_seeds):
            raise ValueError("tune_seeds and eval_seeds must be disjoint")
        if self.score_window < 1:
            raise ValueError("score_window must be >= 1")
        if self.budget < 0:
            raise ValueError("budget must be >= 0")


@dataclass(frozen=True)
class ExperimentSpec:
    """A full benchmark: one problem family crossed with a method list."""

    d: int
    rhos: tuple[float, ...]
    batch: int
    methods: tuple[MethodSpec, ...]
    noise: NoiseModel
    tune: TuneSpec

    def __post_init__(self) -> None:
        if self.batch < 1:
            raise ValueError("batch must be >= 1")
        if len(self.rhos) == 0 or len(self.methods) == 0:
            raise ValueError("need at least one rho and one method")
        for m in self.methods:
            if not 1 <= m.r <= self.d:
                raise ValueError(f"method {m.name}: r={m.r} outside [1, {self.d}]")


@dataclass(frozen=True)
class AggregateCurve:
    """Across-seed mean and std of the gradient norm on a shared oracle grid."""

    label: str
    r: int
    oracle_calls: np.ndarray
    mean: np.ndarray
    std: np.ndarray


@dataclass(frozen=True)
class Selection:
    """Stepsize chosen for one (rho, method) cell."""

    rho: float
    label: str
    r: int
    eta_bar: float
    tuned: bool


def iterations_within_budget(budget: int, batch: int, r: int, method: str) -> int:
    """Largest iteration count whose oracle cost fits the budget."""
    per_iter = r if method == "rs_ngd" else batch * r
    return budget // per_iter


def _bench_config(method: MethodSpec, batch: int, budget: int, eta_bar: float, seed: int) -> MethodConfig:
    t = iterations_within_budget(budget, batch, method.r, method.name)
    return MethodConfig(
        method=method.name, r=method.r, eta=eta_bar, u=0.0,
        B=float(batch), q=0.0, T=t, seed=seed, fixed_eta=eta_bar,
    )


def _run_task(args) -> RunRecord:
    problem_d, problem_rho, noise, cfg = args
    return run(make_quadratic(problem_d, problem_rho), noise, cfg)


def _run_many(
    problem: SpectrumQuadratic, noise: NoiseModel, configs: Sequence[MethodConfig],
    workers: int,
) -> list[RunRecord]:
    tasks = [(problem.d, problem.rho, noise, cfg) for cfg in configs]
    if workers <= 1 or len(tasks) <= 1:
        return [_run_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_task, tasks))


def score_run(record: RunRecord, window: int) -> float:
    """Average gradient norm over the last `window` logged points; +inf if diverged."""
    if record.diverged:
        return math.inf
    tail = record.grad_norms[-window:]
    value = float(np.mean(tail))
    return value if math.isfinite(value) else math.inf


def tune(
    spec: TuneSpec, method: MethodSpec, problem: SpectrumQuadratic,
    noise: NoiseModel, batch: int, workers: int = 1,
) -> float:
    """Select the grid stepsize minimizing the averaged tuning score.

    Ties break toward the smaller stepsize (ascending scan, strict
    improvement). Raises if every candidate diverges on every seed.
    """
    best_eta: Optional[float] = None
    best_score = math.inf
    for eta_bar in sorted(spec.grid):
        configs = [
            _bench_config(method, batch, spec.budget, eta_bar, seed)
            for seed in spec.tune_seeds
        ]
        records = _run_many(problem, noise, configs, workers)
        scores = [score_run(rec, spec.score_window) for rec in records]
        score = sum(scores) / len(scores)
        if score < best_score:
            best_score = score
            best_eta = eta_bar
    if best_eta is None or not math.isfinite(best_score):
        raise RuntimeError(
            f"no finite candidate: every stepsize in {sorted(spec.grid)} diverged"
        )
    return best_eta


def evaluate(
    spec: TuneSpec, method: MethodSpec, problem: SpectrumQuadratic,
    noise: NoiseModel, batch: int, eta_bar: float, workers: int = 1,
) -> list[RunRecord]:
    """Run the selected stepsize on every evaluation seed up to the budget."""
    if not math.isfinite(eta_bar):
        raise ValueError(f"eta_bar must be finite, got {eta_bar}")
    configs = [
        _bench_config(method, batch, spec.budget, eta_bar, seed)
        for seed in spec.eval_seeds
    ]
    records = _run_many(problem, noise, configs, workers)
    per_iter = method.r if method.name == "rs_ngd" else batch * method.r
    for rec in records:
        # exact oracle accounting and budget compliance, per run
        assert int(rec.oracle_calls[-1]) == int(rec.iterations[-1]) * per_iter
        assert int(rec.oracle_calls[-1]) <= spec.budget
    return records


def aggregate(records: Sequence[RunRecord], label: str, r: int) -> AggregateCurve:
    """Pointwise mean and population std of grad norms across seeds.

    Records are truncated to the common prefix so divergence-shortened
    trajectories stay comparable; non-divergent records share the full grid.
    """
    if len(records) < 2:
        raise ValueError("aggregate needs at least 2 records")
    length = min(len(rec.oracle_calls) for rec in records)
    base = records[0].oracle_calls[:length]
    for rec in records[1:]:
        if not np.array_equal(rec.oracle_calls[:length], base):
            raise ValueError("records do not share a common oracle grid")
    values = np.stack([rec.grad_norms[:length] for rec in records])
    return AggregateCurve(
        label=label, r=r, oracle_calls=base.copy(),
        mean=values.mean(axis=0), std=values.std(axis=0),
    )


def export_curves_csv(curves: Sequence[AggregateCurve], path) -> None:
    """One row per (curve, grid point); full round-trip decimal precision."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "r", "oracle_calls", "mean_grad_norm", "std_grad_norm"])
        for curve in curves:
            for calls, m, s in zip(curve.oracle_calls, curve.mean, curve.std):
                writer.writerow([curve.label, curve.r, int(calls), repr(float(m)), repr(float(s))])


_MAX_PLOT_POINTS = 2000


def _thin(length: int) -> np.ndarray:
    # vertex decimation for the figure only; the CSV keeps full resolution
    if length <= _MAX_PLOT_POINTS:
        return np.arange(length)
    idx = np.arange(0, length, math.ceil(length / _MAX_PLOT_POINTS))
    if idx[-1] != length - 1:
        idx = np.append(idx, length - 1)
    return idx


def export_panel_figure(curves: Sequence[AggregateCurve], path, title: str) -> None:
    """Render one log-y panel (mean line, +/- 1 std band per method) to SVG."""
    from matplotlib.figure import Figure

    fig = Figure(figsize=(6.4, 4.4))
    ax = fig.add_subplot(111)
    for curve in curves:
        sel = _thin(len(curve.oracle_calls))
        calls, mean, std = curve.oracle_calls[sel], curve.mean[sel], curve.std[sel]
        (line,) = ax.plot(calls, mean, label=curve.label, linewidth=1.2)
        lower = np.maximum(mean - std, 1e-300)
        ax.fill_between(
            calls, lower, mean + std,
            color=line.get_color(), alpha=0.2, linewidth=0,
        )
    ax.set_yscale("log")
    ax.set_xlabel("oracle calls")
    ax.set_ylabel("gradient norm")
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg")


def export(curves: Sequence[AggregateCurve], csv_path, svg_path, title: str) -> None:
    """CSV always (header-only when empty); SVG only when there is data."""
    export_curves_csv(curves, csv_path)
    if curves:
        export_panel_figure(curves, svg_path, title)


def run_experiment(
    spec: ExperimentSpec, out_dir, workers: int = 1,
) -> list[Selection]:
    """tune -> evaluate -> aggregate -> export for every (rho, method) pair."""
    os.makedirs(out_dir, exist_ok=True)
    selections: list[Selection] = []
    for rho in spec.rhos:
        problem = make_quadratic(spec.d, rho)
        curves: list[AggregateCurve] = []
        for method in spec.methods:
            if method.fixed_eta is not None:
                eta_bar, tuned = method.fixed_eta, False
            else:
                eta_bar, tuned = tune(spec.tune, method, problem, spec.noise, spec.batch, workers), True
            records = evaluate(spec.tune, method, problem, spec.noise, spec.batch, eta_bar, workers)
            curves.append(aggregate(records, method.label(spec.d), method.r))
            selections.append(Selection(rho=rho, label=method.label(spec.d), r=method.r,
                                        eta_bar=eta_bar, tuned=tuned))
        stem = f"quadratic_d{spec.d}_rho{rho:g}"
        export(
            curves,
            os.path.join(out_dir, stem + ".csv"),
            os.path.join(out_dir, stem + ".svg"),
            f"d={spec.d}, rho={rho:g}, batch={spec.batch}",
        )
    write_stepsize_table(selections, os.path.join(out_dir, "selected_stepsizes.csv"))
    return selections


def write_stepsize_table(selections: Sequence[Selection], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "r", "rho", "eta_bar", "tuned"])
        for sel in selections:
            writer.writerow([sel.label, sel.r, sel.rho, repr(sel.eta_bar), sel.tuned])
