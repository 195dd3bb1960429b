import math

import numpy as np
import pytest

from nlgcs.generator import MlpGenerator, forward, random_generator
from nlgcs.links import LinkSpec
from nlgcs.recovery import (SolverFailure, SolverOptions, cosine_similarity,
                            generalized_lasso, relative_l2, scaling_factor)
from nlgcs.sensing import observe, sample_ensemble
from nlgcs.streams import ball_points, counter_rng


class TestScalingFactor:
    def test_sign(self):
        assert scaling_factor(LinkSpec(kind="sign")) == pytest.approx(math.sqrt(2 / math.pi))

    def test_dithered_sign(self):
        assert scaling_factor(LinkSpec(kind="dithered_sign", lambda_=5.0)) == pytest.approx(0.2)

    def test_quantizer(self):
        assert scaling_factor(LinkSpec(kind="quantizer", delta=3.0)) == 1.0

    def test_sim_relu_monte_carlo(self):
        # E[g^2 1(g>0)] = 1/2 by symmetry
        val = scaling_factor(LinkSpec(kind="sim", sim_link="relu"), 1_000_000, seed=4)
        assert val == pytest.approx(0.5, abs=0.01)

    def test_sim_sample_floor(self):
        with pytest.raises(ValueError):
            scaling_factor(LinkSpec(kind="sim", sim_link="relu"), 100)


class TestMetrics:
    def test_cosine_identical(self):
        x = np.array([1.0, 2.0, 3.0])
        assert cosine_similarity(x, x) == 1.0

    def test_cosine_opposite(self):
        x = np.array([1.0, 2.0, 3.0])
        assert cosine_similarity(x, -x) == -1.0

    def test_cosine_hand_value(self):
        assert cosine_similarity(np.array([1.0, 0.0]), np.array([1.0, 1.0])) \
            == pytest.approx(1 / math.sqrt(2))

    def test_cosine_zero_vector(self):
        with pytest.raises(ValueError):
            cosine_similarity(np.zeros(2), np.ones(2))

    def test_rel_l2_values(self):
        x = np.array([2.0, 1.0])
        assert relative_l2(x, x) == 0.0
        assert relative_l2(np.zeros(2), x) == 1.0
        assert relative_l2(np.array([1.1, 0.0]), np.array([1.0, 0.0])) == pytest.approx(0.1)

    def test_rel_l2_zero_truth(self):
        with pytest.raises(ValueError):
            relative_l2(np.ones(2), np.zeros(2))


def _linear_setup(seed=5):
    k = n = 10
    rng = np.random.default_rng(0)
    q, _ = np.linalg.qr(rng.normal(size=(n, k)))
    gen = MlpGenerator((k, n), (q,), (np.zeros(n),), latent_radius=math.sqrt(k))
    ens = sample_ensemble(40, n, LinkSpec(kind="sim", sim_link="identity"), 0.0, seed=seed)
    z = rng.normal(size=k)
    z = z / np.linalg.norm(z) * 2.0
    x_star = forward(gen, z)
    return gen, ens, x_star


class TestGeneralizedLasso:
    def test_linear_identity_reaches_zero_residual(self):
        gen, ens, x_star = _linear_setup()
        y = observe(ens, x_star)
        res = generalized_lasso(ens, y, gen, SolverOptions(t_scale=1.0, seed=1),
                                x_star=x_star)
        assert res.rel_l2 <= 1e-3
        assert res.best_loss <= 1e-6

    def test_best_loss_is_min_of_restarts(self):
        gen, ens, x_star = _linear_setup()
        y = observe(ens, x_star)
        res = generalized_lasso(ens, y, gen, SolverOptions(t_scale=1.0, seed=2))
        assert res.best_loss == min(res.restart_losses)
        assert len(res.restart_losses) == 10

    def test_loss_beats_initialization(self):
        gen = random_generator((3, 16, 12), seed=31)
        link = LinkSpec(kind="sign")
        ens = sample_ensemble(80, 12, link, 0.0, seed=32)
        z = ball_points(counter_rng(33, 0), 1, 3, gen.latent_radius)[0]
        y = observe(ens, forward(gen, z))
        opts = SolverOptions(restarts=5, steps=50, t_scale=scaling_factor(link), seed=34)
        res = generalized_lasso(ens, y, gen, opts)
        from nlgcs.generator import project_latent
        from nlgcs.streams import STREAM_RESTART_BASE, gaussians
        for i in range(opts.restarts):
            rng = counter_rng(opts.seed, STREAM_RESTART_BASE + i)
            z0 = project_latent(gaussians(rng, 3) / math.sqrt(3), gen.latent_radius)
            init_loss = np.linalg.norm(y - opts.t_scale * (ens.a_matrix @ forward(gen, z0)))
            assert res.best_loss <= init_loss + 1e-12

    def test_z_hat_inside_ball(self):
        gen = random_generator((4, 8, 6), seed=41)
        ens = sample_ensemble(30, 6, LinkSpec(kind="sign"), 0.0, seed=42)
        y = observe(ens, forward(gen, np.ones(4) * 0.3))
        res = generalized_lasso(ens, y, gen, SolverOptions(restarts=3, steps=100,
                                                           t_scale=1.0, seed=43))
        assert np.linalg.norm(res.z_hat) <= gen.latent_radius * (1 + 1e-12)

    def test_deterministic(self):
        gen, ens, x_star = _linear_setup()
        y = observe(ens, x_star)
        opts = SolverOptions(restarts=4, steps=100, t_scale=1.0, seed=9)
        r1 = generalized_lasso(ens, y, gen, opts)
        r2 = generalized_lasso(ens, y, gen, opts)
        assert np.array_equal(r1.x_hat, r2.x_hat)
        assert r1.restart_losses == r2.restart_losses

    def test_monotone_loss_with_backtracking(self):
        # aggressive fixed step still yields non-increasing accepted losses
        gen, ens, x_star = _linear_setup()
        y = observe(ens, x_star)
        big = SolverOptions(restarts=2, steps=60, step_size=10.0, t_scale=1.0,
                            backtracking=True, seed=3)
        res = generalized_lasso(ens, y, gen, big)
        assert all(math.isfinite(l) for l in res.restart_losses)

    def test_divergence_raises_solver_failure(self):
        # a step large enough to overflow the update to non-finite values
        gen, ens, x_star = _linear_setup()
        y = observe(ens, x_star)
        explode = SolverOptions(restarts=2, steps=10, step_size=1e308, t_scale=1.0,
                                backtracking=False, seed=3)
        with pytest.raises(SolverFailure):
            generalized_lasso(ens, y, gen, explode)

    def test_grid_search_oracle_k1(self):
        # brute-force 2001-point grid on [-r, r] vs projected GD
        link = LinkSpec(kind="sign")
        t = scaling_factor(link)
        for inst in range(3):
            gen = random_generator((1, 16, 20), seed=200 + inst)
            r = gen.latent_radius
            ens = sample_ensemble(500, 20, link, 0.0, seed=300 + inst)
            z_star = ball_points(counter_rng(400 + inst, 0), 1, 1, r)[0]
            y = observe(ens, forward(gen, z_star))
            grid = np.linspace(-r, r, 2001).reshape(-1, 1)
            losses = np.linalg.norm(y[None, :] - t * (forward(gen, grid) @ ens.a_matrix.T),
                                    axis=1)
            z_grid = grid[np.argmin(losses), 0]
            res = generalized_lasso(ens, y, gen, SolverOptions(t_scale=t, seed=500 + inst))
            assert abs(res.z_hat[0] - z_grid) <= 0.05

    def test_prior_absorbs_t_metrics_against_scaled_truth(self):
        gen, ens, x_star = _linear_setup()
        # observations y = 2 A x*; the prior absorbs T: x_hat estimates 2x*
        y = 2.0 * observe(ens, x_star)
        gen2 = MlpGenerator(gen.layer_dims, tuple(2.0 * w for w in gen.weights),
                            gen.biases, gen.latent_radius)
        opts = SolverOptions(t_scale=2.0, constraint_mode="prior_absorbs_t", seed=4)
        res = generalized_lasso(ens, y, gen2, opts, x_star=x_star)
        assert res.rel_l2 <= 1e-3  # compared against 2*x_star

    def test_shape_validation(self):
        gen, ens, x_star = _linear_setup()
        with pytest.raises(ValueError):
            generalized_lasso(ens, np.zeros(ens.m + 1), gen, SolverOptions())
