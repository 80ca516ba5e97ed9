"""Randomized-subspace stochastic optimization toolkit.

Methods rs_sgd / rs_nsgd / rs_ngd iterate in fresh Haar-random
r-dimensional subspaces under exact coordinate-oracle accounting; choosing
r = d recovers the usual full-dimensional SGD / NSGD / NGD. The package
also ships the analytic constants the convergence bounds depend on
(tau, mu, effective rank), Monte-Carlo verification of every closed-form
projection identity, and a heavy-tailed quadratic benchmark harness with
stepsize tuning, CSV export, and figure rendering.
"""

from .bench import (
    AggregateCurve,
    ExperimentSpec,
    MethodSpec,
    Selection,
    TuneSpec,
    aggregate,
    evaluate,
    run_experiment,
    tune,
)
from .haar import ProjectionMatrix, lift, project, sample_haar_orthogonal, sample_projection
from .optim import (
    BoundInputs,
    MethodConfig,
    RunRecord,
    run,
    step,
    theorem3_bound,
    theorem4_bound,
    theoremC1_bound,
)
from .problems import (
    GradSample,
    NoiseModel,
    SpectrumQuadratic,
    make_quadratic,
    projected_full_grad,
    projected_stochastic_grad,
    sample_noise,
    stochastic_grad,
)
from .rng import RngState, make_generator
from .special import SmoothnessSummary, effective_rank, ell, ln_gamma, mu, reg_inc_beta, tau
from .verify import (
    VerifyReport,
    run_grid,
    tau_alignment_residual,
    verify_beta,
    verify_mu,
    verify_quadform,
    verify_tau,
)

__version__ = "0.1.0"

__all__ = [
    "AggregateCurve",
    "BoundInputs",
    "ExperimentSpec",
    "GradSample",
    "MethodConfig",
    "MethodSpec",
    "NoiseModel",
    "ProjectionMatrix",
    "RngState",
    "RunRecord",
    "Selection",
    "SmoothnessSummary",
    "SpectrumQuadratic",
    "TuneSpec",
    "VerifyReport",
    "aggregate",
    "effective_rank",
    "ell",
    "evaluate",
    "lift",
    "ln_gamma",
    "make_generator",
    "make_quadratic",
    "mu",
    "project",
    "projected_full_grad",
    "projected_stochastic_grad",
    "reg_inc_beta",
    "run",
    "run_experiment",
    "run_grid",
    "sample_haar_orthogonal",
    "sample_noise",
    "sample_projection",
    "step",
    "stochastic_grad",
    "tau",
    "tau_alignment_residual",
    "theorem3_bound",
    "theorem4_bound",
    "theoremC1_bound",
    "tune",
    "verify_beta",
    "verify_mu",
    "verify_quadform",
    "verify_tau",
]
