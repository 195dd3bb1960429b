import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nlgcs.generator import (MlpGenerator, WeightsParseError, backward,
                             forward, lipschitz_upper_bound, load_weights,
                             project_latent, random_generator, save_weights,
                             spectral_norm)


def _two_layer_net():
    return MlpGenerator((1, 1, 1), (np.array([[1.0]]), np.array([[2.0]])),
                        (np.zeros(1), np.zeros(1)), latent_radius=2.0)


def _identity_net(n=4):
    return MlpGenerator((n, n), (np.eye(n),), (np.zeros(n),),
                        latent_radius=math.sqrt(n))


class TestForward:
    def test_hand_evaluated_chain(self):
        assert forward(_two_layer_net(), np.array([1.5])) == pytest.approx([3.0])

    def test_relu_annihilates_negative(self):
        assert forward(_two_layer_net(), np.array([-1.0])) == pytest.approx([0.0])

    def test_identity_net(self):
        z = np.array([0.3, -1.2, 0.0, 2.0])
        assert np.array_equal(forward(_identity_net(), z), z)

    def test_batch_rows_match_single(self):
        gen = random_generator((3, 8, 5), seed=1)
        zs = np.random.default_rng(0).normal(size=(6, 3))
        batch = forward(gen, zs)
        for i in range(6):
            assert np.allclose(batch[i], forward(gen, zs[i]))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            forward(_identity_net(4), np.zeros(3))


class TestBackward:
    def test_identity_jacobian(self):
        c = np.array([1.0, -2.0, 0.5, 3.0])
        assert np.array_equal(backward(_identity_net(), np.zeros(4), c), c)

    def test_dead_unit_zero_gradient(self):
        gen = _two_layer_net()
        g = backward(gen, np.array([-1.0]), np.array([1.0]))
        assert g == pytest.approx([0.0])

    def test_matches_finite_differences(self):
        # <c, G(z)> gradient vs central differences on 100 random triples
        rng = np.random.default_rng(42)
        checked = 0
        trial = 0
        while checked < 100:
            trial += 1
            gen = random_generator((4, 12, 12, 6), seed=trial)
            z = rng.normal(size=4)
            if _near_kink(gen, z):
                continue
            c = rng.normal(size=6)
            grad = backward(gen, z, c)
            fd = np.empty(4)
            h = 1e-5
            for i in range(4):
                zp, zm = z.copy(), z.copy()
                zp[i] += h
                zm[i] -= h
                fd[i] = (c @ forward(gen, zp) - c @ forward(gen, zm)) / (2 * h)
            denom = max(np.linalg.norm(fd), 1e-12)
            assert np.linalg.norm(grad - fd) / denom <= 1e-5
            checked += 1

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            backward(_identity_net(4), np.zeros(4), np.zeros(3))


def _near_kink(gen, z, tol=1e-3):
    h = np.asarray(z, dtype=float)
    last = len(gen.weights) - 1
    for i, (w, b) in enumerate(zip(gen.weights, gen.biases)):
        h = h @ w.T + b
        if i < last:
            if np.min(np.abs(h)) < tol:
                return True
            h = np.maximum(h, 0.0)
    return False


class TestProjectLatent:
    def test_inside_unchanged(self):
        assert np.array_equal(project_latent(np.array([3.0, 4.0]), 10.0), [3.0, 4.0])

    def test_boundary_unchanged(self):
        assert np.allclose(project_latent(np.array([3.0, 4.0]), 5.0), [3.0, 4.0])

    def test_outside_scaled(self):
        assert np.allclose(project_latent(np.array([3.0, 4.0]), 1.0), [0.6, 0.8])

    @given(st.lists(st.floats(-100, 100), min_size=1, max_size=8),
           st.floats(0.01, 50))
    @settings(max_examples=200, deadline=None)
    def test_idempotent_and_inside(self, zs, r):
        z = np.array(zs)
        p = project_latent(z, r)
        assert np.linalg.norm(p) <= r * (1 + 1e-12)
        assert np.allclose(project_latent(p, r), p)

    @given(st.lists(st.floats(-50, 50), min_size=3, max_size=3),
           st.lists(st.floats(-50, 50), min_size=3, max_size=3),
           st.floats(0.1, 10))
    @settings(max_examples=200, deadline=None)
    def test_one_lipschitz(self, a, b, r):
        pa, pb = project_latent(np.array(a), r), project_latent(np.array(b), r)
        assert np.linalg.norm(pa - pb) <= np.linalg.norm(np.array(a) - np.array(b)) + 1e-9


class TestLipschitzBound:
    def test_orthonormal_layer(self):
        gen = MlpGenerator((4, 4), (np.linalg.qr(np.random.default_rng(0).normal(size=(4, 4)))[0],),
                           (np.zeros(4),), latent_radius=1.0)
        assert lipschitz_upper_bound(gen) == pytest.approx(1.0, abs=1e-6)

    def test_product_of_norms(self):
        rng = np.random.default_rng(3)
        w1 = rng.normal(size=(5, 4))
        w2 = rng.normal(size=(3, 5))
        w1 *= 2.0 / np.linalg.norm(w1, 2)
        w2 *= 3.0 / np.linalg.norm(w2, 2)
        gen = MlpGenerator((4, 5, 3), (w1, w2), (np.zeros(5), np.zeros(3)),
                           latent_radius=1.0)
        assert lipschitz_upper_bound(gen) == pytest.approx(6.0, abs=1e-5)

    def test_zero_net(self):
        gen = MlpGenerator((2, 2), (np.zeros((2, 2)),), (np.zeros(2),), latent_radius=1.0)
        assert lipschitz_upper_bound(gen) == 0.0

    def test_spectral_norm_vs_svd(self):
        rng = np.random.default_rng(11)
        for shape in ((6, 4), (4, 6), (8, 8)):
            w = rng.normal(size=shape)
            assert spectral_norm(w) == pytest.approx(np.linalg.norm(w, 2), rel=1e-6)

    def test_bound_holds_on_random_pairs(self):
        gen = random_generator((5, 20, 20, 9), seed=8)
        lip = lipschitz_upper_bound(gen)
        rng = np.random.default_rng(1)
        for _ in range(1000):
            z1 = rng.normal(size=5)
            z2 = rng.normal(size=5)
            z1 = project_latent(z1, gen.latent_radius)
            z2 = project_latent(z2, gen.latent_radius)
            lhs = np.linalg.norm(forward(gen, z1) - forward(gen, z2))
            assert lhs <= lip * np.linalg.norm(z1 - z2) + 1e-9


class TestRandomGenerator:
    def test_seed_determinism(self):
        g1 = random_generator((3, 7, 2), seed=9)
        g2 = random_generator((3, 7, 2), seed=9)
        for w1, w2 in zip(g1.weights, g2.weights):
            assert np.array_equal(w1, w2)

    def test_mnist_shaped_decoder(self):
        gen = random_generator((20, 500, 500, 784), seed=0)
        assert gen.layer_dims == (20, 500, 500, 784)
        assert gen.latent_radius == pytest.approx(math.sqrt(20))

    def test_minimal_dims(self):
        gen = random_generator((1, 1), seed=5)
        assert gen.weights[0].shape == (1, 1)
        assert np.array_equal(gen.weights[0], random_generator((1, 1), seed=5).weights[0])

    def test_he_variance(self):
        gen = random_generator((100, 400), seed=2)
        assert gen.weights[0].var() == pytest.approx(2.0 / 100, rel=0.1)


class TestWeightsIO:
    def test_round_trip_bit_exact(self, tmp_path):
        gen = random_generator((4, 10, 6), latent_radius=1.75, seed=13)
        path = tmp_path / "w.txt"
        save_weights(gen, path)
        loaded = load_weights(path)
        assert loaded.layer_dims == gen.layer_dims
        assert loaded.latent_radius == gen.latent_radius
        z = np.random.default_rng(0).normal(size=4)
        assert np.array_equal(forward(loaded, z), forward(gen, z))

    def test_mismatched_dims_rejected(self, tmp_path):
        gen = random_generator((2, 3), seed=1)
        path = tmp_path / "w.txt"
        save_weights(gen, path)
        text = path.read_text().replace("dims: 2 3", "dims: 2 4")
        path.write_text(text)
        with pytest.raises(WeightsParseError):
            load_weights(path)

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "w.txt"
        path.write_text("something else\n")
        with pytest.raises(WeightsParseError, match="line 1"):
            load_weights(path)

    def test_truncated_file_reports_line(self, tmp_path):
        gen = random_generator((2, 3), seed=1)
        path = tmp_path / "w.txt"
        save_weights(gen, path)
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:-2]) + "\n")
        with pytest.raises(WeightsParseError, match="line"):
            load_weights(path)

    def test_sample_fixture_value(self, tmp_path):
        # G(0) of the documented sample equals the frozen forward value
        gen = random_generator((2, 4, 3), seed=21)
        path = tmp_path / "sample.txt"
        save_weights(gen, path)
        loaded = load_weights(path)
        expected = forward(gen, np.zeros(2))
        assert np.array_equal(forward(loaded, np.zeros(2)), expected)
