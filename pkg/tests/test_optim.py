"""Tests for the descent engine, oracle accounting, and bound calculators."""

import math

import numpy as np
import pytest

from rsopt.haar import ProjectionMatrix, sample_projection, sample_projection_entries
from rsopt.optim import (
    BoundInputs,
    MethodConfig,
    run,
    step,
    theorem3_bound,
    theorem4_bound,
    theoremC1_bound,
)
from rsopt.problems import NoiseModel, make_quadratic, noise_batch_mean
from rsopt.rng import NOISE_STREAM, PROJECTION_STREAM, make_generator
from rsopt.special import effective_rank, ell, tau


def _cfg(**kw):
    base = dict(method="rs_sgd", r=4, eta=1.0, u=0.0, B=1.0, q=0.0, T=10, seed=0,
                fixed_eta=0.01)
    base.update(kw)
    return MethodConfig(**base)


class TestMethodConfig:
    def test_batch_schedule(self):
        assert _cfg(B=1.0, q=1.0, T=10_000).batch_size == 10_000
        assert _cfg(B=0.5, q=0.0, T=7).batch_size == 1
        assert _cfg(B=4.0, q=0.0, T=7).batch_size == 4
        assert _cfg(B=2.5, q=0.5, T=100).batch_size == 25

    def test_step_schedule(self):
        cfg = _cfg(eta=2.0, u=0.5, T=100, fixed_eta=None)
        assert cfg.step_size == pytest.approx(0.2)
        assert _cfg(eta=2.0, u=0.5, T=100, fixed_eta=0.03).step_size == 0.03

    def test_validation(self):
        with pytest.raises(ValueError):
            _cfg(method="adam")
        with pytest.raises(ValueError):
            _cfg(r=0)
        with pytest.raises(ValueError):
            _cfg(eta=0.0)
        with pytest.raises(ValueError):
            _cfg(u=1.0)
        with pytest.raises(ValueError):
            _cfg(u=-0.1)
        with pytest.raises(ValueError):
            _cfg(B=0.0)
        with pytest.raises(ValueError):
            _cfg(q=-1.0)
        with pytest.raises(ValueError):
            _cfg(T=-1)
        with pytest.raises(ValueError):
            _cfg(fixed_eta=0.0)


class TestStep:
    def setup_method(self):
        self.p = sample_projection(10, 4, make_generator(0, 1))
        self.x = make_generator(1, 1).standard_normal(10)

    def test_zero_direction_fixes_normalized_methods(self):
        for method in ("rs_nsgd", "rs_ngd"):
            out = step(method, self.x, self.p, np.zeros(4), 0.1)
            assert np.array_equal(out, self.x)

    def test_normalized_step_length(self):
        u = make_generator(2, 1).standard_normal(4)
        out = step("rs_nsgd", self.x, self.p, u, 0.05)
        want = 0.05 * math.sqrt(10 / 4)
        assert abs(np.linalg.norm(out - self.x) - want) <= 1e-9

    def test_identity_projection_reduces_to_plain_sgd(self):
        # r = d with P rigged to the identity: the update is exactly x - eta*g
        d = 6
        p = ProjectionMatrix(d=d, r=d, entries=np.eye(d))
        g = make_generator(3, 1).standard_normal(d)
        x = make_generator(4, 1).standard_normal(d)
        assert np.array_equal(step("rs_sgd", x, p, g, 0.2), x - 0.2 * g)

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            step("rs_sgd", self.x, self.p, np.zeros(4), 0.0)
        with pytest.raises(ValueError):
            step("nope", self.x, self.p, np.zeros(4), 0.1)
        with pytest.raises(FloatingPointError):
            bad = self.x.copy()
            bad[0] = np.nan
            step("rs_sgd", bad, self.p, np.zeros(4), 0.1)


class TestRun:
    def test_single_step_unrolls(self):
        problem = make_quadratic(12, 4.0)
        cfg = _cfg(method="rs_sgd", r=3, T=1, seed=9, fixed_eta=0.05)
        rec = run(problem, NoiseModel.none(), cfg)
        p = sample_projection(12, 3, make_generator(9, PROJECTION_STREAM))
        x0 = problem.initial_point()
        want = x0 - 0.05 * p.entries @ (p.entries.T @ problem.full_grad(x0))
        assert np.max(np.abs(rec.final_x - want)) <= 1e-12
        assert rec.oracle_calls[-1] == cfg.batch_size * 3

    def test_descent_identity_on_quadratic(self):
        # noise-free rs_ngd: the one-step expansion of the quadratic is exact
        problem = make_quadratic(50, 10.0)
        cfg = _cfg(method="rs_ngd", r=5, T=200, seed=11, fixed_eta=0.02)
        rec = run(problem, NoiseModel.none(), cfg)
        # replay the projection stream and recompute the trajectory
        frames = sample_projection_entries(50, 5, make_generator(11, PROJECTION_STREAM), 200)
        x = problem.initial_point()
        for k in range(200):
            p = frames[k]
            grad = problem.full_grad(x)
            u = p.T @ grad
            norm_u = np.linalg.norm(u)
            g_vec = (p @ u) / norm_u
            f_now = problem.objective(x)
            x = x - 0.02 * g_vec
            f_next = problem.objective(x)
            predicted = f_now - 0.02 * norm_u + 0.5 * 0.02**2 * float(g_vec @ (problem.lam * g_vec))
            assert abs(f_next - predicted) <= 1e-9
            assert rec.objectives[k + 1] == pytest.approx(f_next, abs=1e-12)
        # replay multiplies in a different order than step(), so agreement
        # is to rounding, not bitwise
        assert np.max(np.abs(rec.final_x - x)) <= 1e-12

    def test_oracle_accounting_exact(self):
        problem = make_quadratic(10, 3.0)
        cfg = _cfg(method="rs_nsgd", r=5, T=37, B=4.0, seed=1)
        rec = run(problem, NoiseModel.gaussian(0.1), cfg)
        assert np.array_equal(rec.oracle_calls, np.arange(38) * (4 * 5))
        cfg_ngd = _cfg(method="rs_ngd", r=5, T=37, seed=1)
        rec_ngd = run(problem, NoiseModel.none(), cfg_ngd)
        assert np.array_equal(rec_ngd.oracle_calls, np.arange(38) * 5)

    def test_determinism(self):
        problem = make_quadratic(20, 5.0)
        cfg = _cfg(method="rs_nsgd", r=4, T=50, B=2.0, seed=123)
        a = run(problem, NoiseModel.sym_pareto(1.2), cfg)
        b = run(problem, NoiseModel.sym_pareto(1.2), cfg)
        assert np.array_equal(a.grad_norms, b.grad_norms)
        assert np.array_equal(a.final_x, b.final_x)

    def test_r_larger_than_d_rejected(self):
        with pytest.raises(ValueError):
            run(make_quadratic(4, 2.0), NoiseModel.none(), _cfg(r=5, T=1))

    def test_divergence_recorded(self):
        problem = make_quadratic(8, 4.0)
        cfg = _cfg(method="rs_sgd", r=8, T=5000, seed=3, fixed_eta=1e12)
        rec = run(problem, NoiseModel.none(), cfg)
        assert rec.diverged
        assert rec.diverged_at is not None
        assert np.all(np.isfinite(rec.final_x))
        assert rec.iterations[-1] < 5000

    def test_log_stride(self):
        problem = make_quadratic(10, 3.0)
        cfg = _cfg(method="rs_ngd", r=2, T=10, seed=5, fixed_eta=0.01)
        rec = run(problem, NoiseModel.none(), cfg, log_stride=4)
        assert list(rec.iterations) == [0, 4, 8, 10]

    def test_zero_horizon(self):
        problem = make_quadratic(10, 3.0)
        cfg = _cfg(method="rs_sgd", r=2, T=0, seed=5)
        rec = run(problem, NoiseModel.none(), cfg)
        assert list(rec.iterations) == [0]
        assert np.array_equal(rec.final_x, problem.initial_point())


def _reference_sgd(problem, noise, eta_bar, batch, t_max, seed):
    rng = make_generator(seed, NOISE_STREAM)
    x = problem.initial_point()
    norms = [problem.grad_norm(x)]
    for _ in range(t_max):
        g = problem.full_grad(x) + noise_batch_mean(noise, problem.d, batch, rng)
        x = x - eta_bar * g
        norms.append(problem.grad_norm(x))
    return np.asarray(norms)


def _reference_nsgd(problem, noise, eta_bar, batch, t_max, seed):
    rng = make_generator(seed, NOISE_STREAM)
    x = problem.initial_point()
    norms = [problem.grad_norm(x)]
    for _ in range(t_max):
        g = problem.full_grad(x) + noise_batch_mean(noise, problem.d, batch, rng)
        norm_g = np.linalg.norm(g)
        if norm_g > 0:
            x = x - eta_bar * g / norm_g
        norms.append(problem.grad_norm(x))
    return np.asarray(norms)


class TestFullDimensionalReduction:
    def test_rs_sgd_reduces_to_sgd(self):
        problem = make_quadratic(30, 8.0)
        noise = NoiseModel.gaussian(0.5)
        cfg = _cfg(method="rs_sgd", r=30, T=100, B=2.0, seed=77, fixed_eta=0.02)
        rec = run(problem, noise, cfg)
        ref = _reference_sgd(problem, noise, 0.02, 2, 100, 77)
        assert np.max(np.abs(rec.grad_norms - ref)) <= 1e-9

    def test_rs_nsgd_reduces_to_nsgd(self):
        problem = make_quadratic(30, 8.0)
        noise = NoiseModel.gaussian(0.5)
        cfg = _cfg(method="rs_nsgd", r=30, T=100, B=2.0, seed=78, fixed_eta=0.02)
        rec = run(problem, noise, cfg)
        ref = _reference_nsgd(problem, noise, 0.02, 2, 100, 78)
        assert np.max(np.abs(rec.grad_norms - ref)) <= 1e-9


class TestBoundCalculators:
    def test_theorem3_plugin_arithmetic(self):
        b = BoundInputs(delta0=1.0, tau=1.0, ell=1.0, op_norm=1.0, L=1.0,
                        eta=1.0, u=0.5, T=100, d=4, r=4, sigma=0.0)
        assert theorem3_bound(b) == pytest.approx(0.15, abs=1e-12)

    def test_theorem3_noise_term_vanishes(self):
        quiet = BoundInputs(delta0=2.0, tau=0.9, ell=1.5, op_norm=1.0, L=1.0,
                            eta=0.7, u=0.5, T=400, d=10, r=2, sigma=0.0)
        loud = BoundInputs(delta0=2.0, tau=0.9, ell=1.5, op_norm=1.0, L=1.0,
                           eta=0.7, u=0.5, T=400, d=10, r=2, sigma=3.0, B=1.0, q=1.0, p=2.0)
        assert theorem3_bound(loud) == pytest.approx(
            theorem3_bound(quiet) + 4.0 * 3.0 / math.sqrt(400), abs=1e-12
        )

    def test_theorem4_plugin_arithmetic(self):
        b = BoundInputs(delta0=1.0, tau=1.0, ell=1.0, op_norm=1.0, L=1.0,
                        eta=1.0, u=0.5, T=100, d=7, r=7, sigma=0.0,
                        delta=math.exp(-1.0))
        assert theorem4_bound(b) == pytest.approx(1.67, abs=1e-12)

    def test_theorem4_delta_to_one_limit(self):
        b = BoundInputs(delta0=1.0, tau=1.0, ell=1.0, op_norm=1.0, L=1.0,
                        eta=1.0, u=0.5, T=100, d=6, r=3, sigma=0.5,
                        delta=1.0 - 1e-12)
        want = 2.0 / 10.0 + 2.0 / 10.0 + 8.0 * 0.5 / math.sqrt(100)
        assert theorem4_bound(b) == pytest.approx(want, abs=1e-9)

    def test_theoremC1_matches_noise_free_theorem3(self):
        b = BoundInputs(delta0=3.0, tau=0.95, ell=2.0, op_norm=1.0, L=1.0,
                        eta=0.4, u=0.3, T=777, d=20, r=5, sigma=0.0)
        assert theoremC1_bound(b) == pytest.approx(theorem3_bound(b), abs=1e-15)

    def test_theoremC1_frozen_plugin(self):
        t_val = tau(100, 4)
        l_val = ell(100, 4, 4.0)
        b = BoundInputs(delta0=50.0, tau=t_val, ell=l_val, op_norm=1.0, L=1.0,
                        eta=1.0, u=0.5, T=10_000, d=100, r=4)
        want = 50.0 / (t_val * 100.0) + l_val / (2.0 * t_val * 100.0)
        assert theoremC1_bound(b) == pytest.approx(want, abs=1e-12)
        assert theoremC1_bound(b) == pytest.approx(0.5397597371893975, abs=1e-9)

    def test_theoremC1_decreasing_in_horizon(self):
        for u in (0.25, 0.5, 0.75):
            vals = [
                theoremC1_bound(
                    BoundInputs(delta0=2.0, tau=0.9, ell=1.7, op_norm=1.0, L=1.0,
                                eta=0.8, u=u, T=t, d=50, r=10)
                )
                for t in (1, 2, 5, 10, 100, 1000, 10_000)
            ]
            assert all(b <= a + 1e-15 for a, b in zip(vals, vals[1:]))

    def test_validation(self):
        good = dict(delta0=1.0, tau=0.9, ell=1.0, op_norm=1.0, L=1.0,
                    eta=1.0, u=0.5, T=10, d=4, r=2)
        BoundInputs(**good)
        with pytest.raises(ValueError):
            BoundInputs(**{**good, "u": 1.0})
        with pytest.raises(ValueError):
            BoundInputs(**{**good, "p": 1.0})
        with pytest.raises(ValueError):
            BoundInputs(**{**good, "tau": 0.0})
        with pytest.raises(ValueError):
            BoundInputs(**{**good, "r": 8})
        with pytest.raises(ValueError):
            BoundInputs(**{**good, "delta": 0.0})


class TestEmpiricalBoundsQuick:
    """Scaled-down versions of the 200-seed bound checks (full size in
    the acceptance suite)."""

    def test_rs_ngd_meets_C1_bound(self):
        d, r, t_horizon, u_exp = 100, 20, 10_000, 0.5
        problem = make_quadratic(d, 20.0)
        delta0 = problem.objective(problem.initial_point())
        l_val = ell(d, r, effective_rank(problem.smoothness()))
        eta = math.sqrt(delta0 / l_val)
        cfg_kwargs = dict(method="rs_ngd", r=r, eta=eta, u=u_exp, B=1.0, q=0.0,
                          T=t_horizon)
        means = []
        for seed in range(8):
            rec = run(problem, NoiseModel.none(), MethodConfig(seed=seed, **cfg_kwargs))
            means.append(float(rec.grad_norms[:t_horizon].mean()))
        bound = theoremC1_bound(BoundInputs(
            delta0=delta0, tau=tau(d, r), ell=l_val, op_norm=1.0, L=1.0,
            eta=eta, u=u_exp, T=t_horizon, d=d, r=r,
        ))
        avg = float(np.mean(means))
        stderr = float(np.std(means, ddof=1)) / math.sqrt(len(means))
        assert avg <= bound + 3.0 * stderr

    def test_rs_nsgd_meets_theorem3_bound(self):
        d, r, t_horizon, u_exp = 100, 20, 10_000, 0.5
        problem = make_quadratic(d, 20.0)
        noise = NoiseModel.gaussian(0.1)
        sigma = math.sqrt(d) * 0.1
        delta0 = problem.objective(problem.initial_point())
        l_val = ell(d, r, effective_rank(problem.smoothness()))
        eta = math.sqrt(delta0 / l_val)
        cfg_kwargs = dict(method="rs_nsgd", r=r, eta=eta, u=u_exp, B=1.0, q=1.0,
                          T=t_horizon)
        means = []
        for seed in range(6):
            rec = run(problem, noise, MethodConfig(seed=seed, **cfg_kwargs))
            means.append(float(rec.grad_norms[:t_horizon].mean()))
        bound = theorem3_bound(BoundInputs(
            delta0=delta0, tau=tau(d, r), ell=l_val, op_norm=1.0, L=1.0,
            eta=eta, u=u_exp, T=t_horizon, d=d, r=r, sigma=sigma, p=2.0,
            B=1.0, q=1.0,
        ))
        avg = float(np.mean(means))
        stderr = float(np.std(means, ddof=1)) / math.sqrt(len(means))
        assert avg <= bound + 3.0 * stderr
