"""Haar-orthogonal sampling and the scaled subspace projection matrix.

The projection P is sqrt(d/r) times the first r columns of a Haar-random
orthogonal matrix, so P^T P = (d/r) I_r and ||P|| = sqrt(d/r). P^T
compresses d-vectors into the random subspace, P lifts r-vectors back.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ProjectionMatrix",
    "sample_haar_orthogonal",
    "sample_projection",
    "sample_projection_entries",
    "project",
    "lift",
]


def _signed_qr(gaussian: np.ndarray) -> np.ndarray:
    """Householder QR with the R-diagonal sign fix.

    Unsigned QR output depends on LAPACK's sign convention and is not
    Haar-distributed; forcing diag(R) > 0 makes the factorization unique
    and the Q factor Haar. Accepts (d, r) or a stack (m, d, r).
    """
    q, r = np.linalg.qr(gaussian)
    diag = np.diagonal(r, axis1=-2, axis2=-1)
    q = q * np.where(diag < 0.0, -1.0, 1.0)[..., None, :]
    return q


def sample_haar_orthogonal(d: int, rng: np.random.Generator) -> np.ndarray:
    """Draw a d x d orthogonal matrix from the Haar measure."""
    if d < 1:
        raise ValueError(f"sample_haar_orthogonal: d must be >= 1, got {d}")
    return _signed_qr(rng.standard_normal((d, d)))


def sample_projection_entries(
    d: int, r: int, rng: np.random.Generator, count: int
) -> np.ndarray:
    """Entries of `count` fresh projection matrices, shape (count, d, r).

    The leading r columns of a Householder QR depend only on the first r
    Gaussian columns, so a thin d x r factorization draws the same law as
    slicing a full d x d Haar matrix at a fraction of the cost.
    """
    if not 1 <= r <= d:
        raise ValueError(f"sample_projection: require 1 <= r <= d, got d={d}, r={r}")
    frames = _signed_qr(rng.standard_normal((count, d, r)))
    frames *= math.sqrt(d / r)
    return frames


@dataclass(frozen=True)
class ProjectionMatrix:
    """Scaled Haar frame: d x r entries with P^T P = (d/r) I_r."""

    d: int
    r: int
    entries: np.ndarray

    def __post_init__(self) -> None:
        if self.entries.shape != (self.d, self.r):
            raise ValueError(
                f"ProjectionMatrix entries shape {self.entries.shape} "
                f"!= ({self.d}, {self.r})"
            )


def sample_projection(d: int, r: int, rng: np.random.Generator) -> ProjectionMatrix:
    """Draw one fresh scaled projection matrix."""
    return ProjectionMatrix(d=d, r=r, entries=sample_projection_entries(d, r, rng, 1)[0])


def project(p: ProjectionMatrix, x: np.ndarray) -> np.ndarray:
    """P^T x: compress a d-vector into the r-dimensional subspace."""
    if x.shape != (p.d,):
        raise ValueError(f"project: x has shape {x.shape}, expected ({p.d},)")
    return p.entries.T @ x


def lift(p: ProjectionMatrix, u: np.ndarray) -> np.ndarray:
    """P u: map an r-vector back to d dimensions (norm scales by sqrt(d/r))."""
    if u.shape != (p.r,):
        raise ValueError(f"lift: u has shape {u.shape}, expected ({p.r},)")
    return p.entries @ u
