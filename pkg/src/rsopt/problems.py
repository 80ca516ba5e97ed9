"""Test objectives and stochastic-gradient oracles.

The benchmark objective is a diagonal quadratic whose spectrum
(1, (rho-1)/(d-1), ..., (rho-1)/(d-1)) pins the effective rank to rho,
perturbed by an additive noise vector: f(x; xi) = x^T Lambda x / 2 + <xi, x>.
Oracle calls are charged coordinate-wise: a full minibatch gradient costs
B*d, a projected one B*r.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .haar import ProjectionMatrix, project
from .special import SmoothnessSummary

__all__ = [
    "NoiseModel",
    "GradSample",
    "SpectrumQuadratic",
    "make_quadratic",
    "sample_noise",
    "noise_batch_mean",
    "stochastic_grad",
    "projected_stochastic_grad",
    "projected_full_grad",
]

DEFAULT_INIT_NORM = 10.0


@dataclass(frozen=True)
class NoiseModel:
    """Additive gradient-noise model: none, gaussian, or symmetrized Pareto."""

    kind: str  # "none" | "gaussian" | "sym_pareto"
    sigma_c: float = 0.0  # per-coordinate std (gaussian)
    alpha: float = 0.0  # tail index (sym_pareto), must exceed 1
    scale: float = 1.0  # minimum magnitude (sym_pareto)

    def __post_init__(self) -> None:
        if self.kind not in ("none", "gaussian", "sym_pareto"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.kind == "gaussian" and self.sigma_c < 0.0:
            raise ValueError("gaussian noise needs sigma_c >= 0")
        if self.kind == "sym_pareto":
            if not self.alpha > 1.0:
                raise ValueError("sym_pareto noise needs tail index alpha > 1")
            if not self.scale > 0.0:
                raise ValueError("sym_pareto noise needs scale > 0")

    @classmethod
    def none(cls) -> "NoiseModel":
        return cls(kind="none")

    @classmethod
    def gaussian(cls, sigma_c: float) -> "NoiseModel":
        return cls(kind="gaussian", sigma_c=sigma_c)

    @classmethod
    def sym_pareto(cls, alpha: float, scale: float = 1.0) -> "NoiseModel":
        return cls(kind="sym_pareto", alpha=alpha, scale=scale)


@dataclass(frozen=True)
class GradSample:
    """A stochastic gradient plus the coordinate-oracle calls it cost."""

    g: np.ndarray
    oracle_calls: int


class SpectrumQuadratic:
    """Diagonal quadratic with largest eigenvalue 1 and trace rho."""

    def __init__(self, d: int, rho: float):
        if d < 2:
            raise ValueError(f"SpectrumQuadratic: d must be >= 2, got {d}")
        if not 1.0 < rho <= d:
            raise ValueError(f"SpectrumQuadratic: need 1 < rho <= d, got rho={rho}")
        self.d = d
        self.rho = float(rho)
        lam = np.full(d, (rho - 1.0) / (d - 1.0))
        lam[0] = 1.0
        self.lam = lam

    def objective(self, x: np.ndarray) -> float:
        return 0.5 * float(x @ (self.lam * x))

    def full_grad(self, x: np.ndarray) -> np.ndarray:
        if x.shape != (self.d,):
            raise ValueError(f"full_grad: x has shape {x.shape}, expected ({self.d},)")
        return self.lam * x

    def grad_norm(self, x: np.ndarray) -> float:
        return float(np.linalg.norm(self.lam * x))

    def initial_point(self, norm: float = DEFAULT_INIT_NORM) -> np.ndarray:
        """Constant vector with the requested norm, shared by every method."""
        x0 = np.full(self.d, norm / math.sqrt(self.d))
        # gradient at the start can never exceed sqrt(2 * F(x0) * L), L = 1
        assert self.grad_norm(x0) <= math.sqrt(2.0 * self.objective(x0)) * (1 + 1e-12)
        return x0

    def smoothness(self) -> SmoothnessSummary:
        return SmoothnessSummary(trace=float(self.lam.sum()), op_norm=1.0)

    @property
    def lipschitz(self) -> float:
        return 1.0


def make_quadratic(d: int, rho: float) -> SpectrumQuadratic:
    """Build the spectrum quadratic; effective rank of its curvature is rho."""
    return SpectrumQuadratic(d, rho)


def _sym_pareto(shape, alpha: float, scale: float, rng: np.random.Generator) -> np.ndarray:
    # U in (0, 1]: P(|xi| > t) = (t/scale)^(-alpha) exactly for t >= scale
    u = 1.0 - rng.random(shape)
    signs = rng.integers(0, 2, size=shape) * 2.0 - 1.0
    return signs * scale * u ** (-1.0 / alpha)


def sample_noise(model: NoiseModel, d: int, rng: np.random.Generator) -> np.ndarray:
    """One d-dimensional noise vector."""
    if model.kind == "none":
        return np.zeros(d)
    if model.kind == "gaussian":
        return rng.standard_normal(d) * model.sigma_c
    return _sym_pareto(d, model.alpha, model.scale, rng)


def noise_batch_mean(
    model: NoiseModel, d: int, batch_size: int, rng: np.random.Generator
) -> np.ndarray:
    """The minibatch noise average (1/B) sum_j xi_j.

    Gaussian averages are sampled directly as N(0, sigma_c^2/B I) — the
    exact law of the mean — so schedules with B in the tens of thousands
    stay tractable. Heavy-tailed draws have no such form and are literal.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    if model.kind == "none":
        return np.zeros(d)
    if model.kind == "gaussian":
        return rng.standard_normal(d) * (model.sigma_c / math.sqrt(batch_size))
    return _sym_pareto((batch_size, d), model.alpha, model.scale, rng).mean(axis=0)


def stochastic_grad(
    problem: SpectrumQuadratic,
    x: np.ndarray,
    noise: NoiseModel,
    batch_size: int,
    rng: np.random.Generator,
) -> GradSample:
    """Minibatch gradient Lambda x + noise mean; costs B*d oracle calls."""
    g = problem.full_grad(x) + noise_batch_mean(noise, problem.d, batch_size, rng)
    return GradSample(g=g, oracle_calls=batch_size * problem.d)


def projected_stochastic_grad(
    problem: SpectrumQuadratic,
    x: np.ndarray,
    noise: NoiseModel,
    batch_size: int,
    p: ProjectionMatrix,
    rng: np.random.Generator,
) -> tuple[np.ndarray, int]:
    """P^T applied to the minibatch gradient; costs B*r oracle calls.

    Noise is drawn in full dimension and then projected, so a projected
    run and a full-dimensional run sharing a noise stream see identical
    noise realizations.
    """
    g = problem.full_grad(x) + noise_batch_mean(noise, problem.d, batch_size, rng)
    return project(p, g), batch_size * p.r


def projected_full_grad(
    problem: SpectrumQuadratic, x: np.ndarray, p: ProjectionMatrix
) -> tuple[np.ndarray, int]:
    """P^T applied to the exact gradient; one projected evaluation = r calls."""
    return project(p, problem.full_grad(x)), p.r
