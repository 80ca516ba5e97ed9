"""Randomized-subspace descent engine and convergence-bound calculators.

One iteration draws a fresh projection P, forms the projected (mini-batch
or exact) gradient u = P^T g, and applies

    x <- x - eta_bar * phi(u) * P u

with phi = 1 for rs_sgd and phi(u) = 1/||u|| (phi(0) = 0) for rs_nsgd and
the deterministic rs_ngd. Choosing r = d recovers plain SGD / NSGD / NGD.
Oracle calls are accounted exactly: B*r per stochastic iteration, r per
deterministic one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .haar import ProjectionMatrix, lift, sample_projection_entries
from .problems import NoiseModel, SpectrumQuadratic, noise_batch_mean
from .rng import NOISE_STREAM, PROJECTION_STREAM, make_generator

__all__ = [
    "METHODS",
    "MethodConfig",
    "RunRecord",
    "BoundInputs",
    "step",
    "run",
    "theorem3_bound",
    "theorem4_bound",
    "theoremC1_bound",
]

METHODS = ("rs_sgd", "rs_nsgd", "rs_ngd")

_CHUNK = 256  # projection matrices pre-drawn per batched QR call


@dataclass(frozen=True)
class MethodConfig:
    """One run: method, subspace dimension, schedules, horizon, seed.

    The derived quantities follow the T-indexed schedules
    batch = ceil(max(1, B * T^q)) and eta_bar = eta * T^(-u), unless
    `fixed_eta` pins the stepsize directly (u = 0 expresses a constant
    stepsize; the theorem calculators still demand u in (0, 1)).
    """

    method: str
    r: int
    eta: float
    u: float
    B: float
    q: float
    T: int
    seed: int
    fixed_eta: Optional[float] = None

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}, expected one of {METHODS}")
        if self.r < 1:
            raise ValueError(f"r must be >= 1, got {self.r}")
        if not self.eta > 0.0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if not (self.u == 0.0 or 0.0 < self.u < 1.0):
            raise ValueError(f"u must be 0 or in (0, 1), got {self.u}")
        if not self.B > 0.0:
            raise ValueError(f"B must be positive, got {self.B}")
        if self.q < 0.0:
            raise ValueError(f"q must be >= 0, got {self.q}")
        # T = 0 is the degenerate horizon a sub-iteration oracle budget produces
        if self.T < 0:
            raise ValueError(f"T must be >= 0, got {self.T}")
        if self.fixed_eta is not None and not self.fixed_eta > 0.0:
            raise ValueError(f"fixed_eta must be positive, got {self.fixed_eta}")

    @property
    def batch_size(self) -> int:
        return math.ceil(max(1.0, self.B * self.T**self.q))

    @property
    def step_size(self) -> float:
        if self.fixed_eta is not None:
            return self.fixed_eta
        if self.T == 0:
            return self.eta  # no iteration will consume it
        return self.eta * self.T ** (-self.u)


@dataclass
class RunRecord:
    """Trajectory log: parallel arrays over the logged iterations."""

    iterations: np.ndarray
    oracle_calls: np.ndarray
    grad_norms: np.ndarray
    objectives: np.ndarray
    final_x: np.ndarray
    config: MethodConfig
    diverged_at: Optional[int] = None

    @property
    def diverged(self) -> bool:
        return self.diverged_at is not None


def step(
    method: str,
    x: np.ndarray,
    p: ProjectionMatrix,
    u: np.ndarray,
    eta_bar: float,
) -> np.ndarray:
    """Apply one update x - eta_bar * phi(u) * P u."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    if not eta_bar > 0.0:
        raise ValueError(f"eta_bar must be positive, got {eta_bar}")
    if not np.all(np.isfinite(x)):
        raise FloatingPointError("step: non-finite iterate")
    if method == "rs_sgd":
        return x - eta_bar * lift(p, u)
    # normalized update; phi(0) = 0 is an exact-zero test by design, an
    # epsilon threshold would silently change the method
    norm = math.sqrt(float(u @ u))
    if norm == 0.0:
        return x
    return x - (eta_bar / norm) * lift(p, u)


def run(
    problem: SpectrumQuadratic,
    noise: NoiseModel,
    cfg: MethodConfig,
    log_stride: int = 1,
) -> RunRecord:
    """Execute T iterations with fresh per-iteration projections.

    Logs (k, cumulative oracle calls, ||grad F(x_k)||, F(x_k)) at k = 0 and
    every `log_stride`-th iteration (always including the final one). A
    non-finite iterate terminates the run; the record keeps the last finite
    point and `diverged_at` names the offending iteration.
    """
    d = problem.d
    if cfg.r > d:
        raise ValueError(f"subspace dimension r={cfg.r} exceeds problem dimension d={d}")
    if log_stride < 1:
        raise ValueError(f"log_stride must be >= 1, got {log_stride}")

    batch = cfg.batch_size
    eta_bar = cfg.step_size
    deterministic = cfg.method == "rs_ngd"
    per_iter_calls = cfg.r if deterministic else batch * cfg.r

    proj_rng = make_generator(cfg.seed, PROJECTION_STREAM)
    noise_rng = make_generator(cfg.seed, NOISE_STREAM)

    x = problem.initial_point()
    ks = [0]
    calls = [0]
    gnorms = [problem.grad_norm(x)]
    objs = [problem.objective(x)]
    diverged_at: Optional[int] = None

    k = 0
    # overflow to inf is the expected way a diverging run announces itself;
    # the non-finite check below is the terminal event
    with np.errstate(over="ignore", invalid="ignore"):
        while k < cfg.T and diverged_at is None:
            m = min(_CHUNK, cfg.T - k)
            # batched draw consumes the projection stream exactly as m
            # consecutive single draws would
            frames = sample_projection_entries(d, cfg.r, proj_rng, m)
            for i in range(m):
                p = ProjectionMatrix(d=d, r=cfg.r, entries=frames[i])
                if deterministic:
                    u = p.entries.T @ problem.full_grad(x)
                else:
                    g = problem.full_grad(x) + noise_batch_mean(noise, d, batch, noise_rng)
                    u = p.entries.T @ g
                x_next = step(cfg.method, x, p, u, eta_bar)
                k += 1
                if not np.all(np.isfinite(x_next)):
                    diverged_at = k
                    break
                x = x_next
                if k % log_stride == 0 or k == cfg.T:
                    ks.append(k)
                    calls.append(k * per_iter_calls)
                    gnorms.append(problem.grad_norm(x))
                    objs.append(problem.objective(x))

    return RunRecord(
        iterations=np.asarray(ks, dtype=np.int64),
        oracle_calls=np.asarray(calls, dtype=np.int64),
        grad_norms=np.asarray(gnorms, dtype=float),
        objectives=np.asarray(objs, dtype=float),
        final_x=x,
        config=cfg,
        diverged_at=diverged_at,
    )


@dataclass(frozen=True)
class BoundInputs:
    """Plug-in quantities for the convergence-bound calculators."""

    delta0: float
    tau: float
    ell: float
    op_norm: float
    L: float
    eta: float
    u: float
    T: int
    d: int
    r: int
    sigma: float = 0.0
    p: float = 2.0
    B: float = 1.0
    q: float = 1.0
    delta: float = 0.5

    def __post_init__(self) -> None:
        if self.delta0 < 0.0:
            raise ValueError("delta0 must be >= 0")
        for name in ("tau", "ell", "op_norm", "L", "eta", "B"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 < self.u < 1.0:
            raise ValueError(f"u must lie in (0, 1), got {self.u}")
        if not 1.0 < self.p <= 2.0:
            raise ValueError(f"p must lie in (1, 2], got {self.p}")
        if self.sigma < 0.0 or self.q < 0.0:
            raise ValueError("sigma and q must be >= 0")
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if not (1 <= self.r <= self.d):
            raise ValueError(f"require 1 <= r <= d, got d={self.d}, r={self.r}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")


def _noise_term(b: BoundInputs, factor: float) -> float:
    return factor * b.sigma / max(1.0, b.B * b.T**b.q) ** ((b.p - 1.0) / b.p)


def theorem3_bound(b: BoundInputs) -> float:
    """In-expectation bound on the average gradient norm of rs_nsgd."""
    return (
        b.delta0 / (b.tau * b.eta * b.T ** (1.0 - b.u))
        + b.eta * b.ell * b.op_norm / (2.0 * b.tau * b.T**b.u)
        + _noise_term(b, 4.0)
    )


def theorem4_bound(b: BoundInputs) -> float:
    """High-probability (1 - delta) bound on the same average for rs_nsgd."""
    d_over_r = b.d / b.r
    log_term = math.log(1.0 / b.delta)
    return (
        2.0 * b.delta0 / (b.tau * b.eta * b.T ** (1.0 - b.u))
        + (d_over_r * b.eta * b.L / (b.tau * b.T**b.u))
        * (1.0 + 12.0 * math.sqrt(d_over_r) / b.tau * log_term)
        + 17.0 * d_over_r * math.sqrt(b.delta0 * b.L) / (b.tau**2 * b.T) * log_term
        + _noise_term(b, 8.0)
    )


def theoremC1_bound(b: BoundInputs) -> float:
    """In-expectation bound for the deterministic rs_ngd (no noise term)."""
    return b.delta0 / (b.eta * b.tau * b.T ** (1.0 - b.u)) + b.eta * b.ell * b.op_norm / (
        2.0 * b.tau * b.T**b.u
    )
