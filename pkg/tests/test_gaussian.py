"""Tests for the dense Gaussian primitives."""

import numpy as np
import pytest

from bdec.gaussian import (
    CholeskyFactor,
    EmptyMixture,
    GaussianMixture,
    NotPositiveDefinite,
    cholesky,
    kde_log_density,
    logsumexp_rows,
    mixture_logpdf,
    mixture_sample,
    mvn_logpdf,
    mvn_sample,
)


# --- cholesky ----------------------------------------------------------------

def test_cholesky_identity():
    f = cholesky(np.eye(3))
    np.testing.assert_allclose(f.L, np.eye(3))
    assert f.log_det == pytest.approx(0.0)


def test_cholesky_diagonal():
    f = cholesky(np.diag([0.01, 2.0]))
    np.testing.assert_allclose(np.diag(f.L), [0.1, 1.41421], atol=1e-5)
    assert f.log_det == pytest.approx(np.log(0.02))


def test_cholesky_indefinite_raises():
    with pytest.raises(NotPositiveDefinite):
        cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_cholesky_reconstruction():
    rng = np.random.default_rng(0)
    for _ in range(20):
        A = rng.standard_normal((4, 4))
        sigma = A @ A.T + 0.5 * np.eye(4)
        f = cholesky(sigma)
        err = np.max(np.abs(f.L @ f.L.T - sigma))
        assert err <= 1e-10 * (1.0 + np.max(np.abs(sigma)))
        assert np.all(np.diag(f.L) > 0)


# --- mvn log-density ---------------------------------------------------------

def test_mvn_logpdf_standard_1d():
    f = cholesky(np.eye(1))
    assert mvn_logpdf(np.zeros(1), np.zeros(1), f) == pytest.approx(-0.91894, abs=1e-5)


def test_mvn_logpdf_standard_2d():
    f = cholesky(np.eye(2))
    assert mvn_logpdf(np.ones(2), np.zeros(2), f) == pytest.approx(-2.83788, abs=1e-5)


def test_mvn_logpdf_diag_at_mean():
    f = cholesky(np.diag([0.01, 2.0]))
    val = mvn_logpdf(np.array([-3.0, 5.0]), np.array([-3.0, 5.0]), f)
    assert val == pytest.approx(0.1181, abs=1e-4)
    assert val == pytest.approx(-np.log(2 * np.pi) - 0.5 * np.log(0.02))


def test_mvn_logpdf_rotation_invariance():
    rng = np.random.default_rng(1)
    for _ in range(10):
        A = rng.standard_normal((3, 3))
        sigma = A @ A.T + np.eye(3)
        x = rng.standard_normal(3)
        mu = rng.standard_normal(3)
        Q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        base = mvn_logpdf(x, mu, cholesky(sigma))
        rotated = mvn_logpdf(Q @ (x - mu), np.zeros(3), cholesky(Q @ sigma @ Q.T))
        assert rotated == pytest.approx(base, abs=1e-10)


# --- mvn sampling ------------------------------------------------------------

def test_mvn_sample_degenerate_factor():
    f = CholeskyFactor(L=np.zeros((2, 2)), log_det=-np.inf)
    mu = np.array([3.0, -1.0])
    out = mvn_sample(np.random.default_rng(0), mu, f)
    np.testing.assert_array_equal(out, mu)


def test_mvn_sample_moments():
    rng = np.random.default_rng(2)
    f = cholesky(np.eye(2))
    draws = np.array([mvn_sample(rng, np.zeros(2), f) for _ in range(100_000)])
    assert np.max(np.abs(draws.mean(axis=0))) < 0.02
    assert np.max(np.abs(np.cov(draws.T) - np.eye(2))) < 0.03


def test_mvn_sample_deterministic():
    f = cholesky(np.diag([2.0, 0.5]))
    a = [mvn_sample(np.random.default_rng(7), np.ones(2), f) for _ in range(3)]
    b = [mvn_sample(np.random.default_rng(7), np.ones(2), f) for _ in range(3)]
    np.testing.assert_array_equal(a[0], b[0])


# --- mixtures ----------------------------------------------------------------

def _example1_mixture():
    means = np.array([(0.0, 8.0), (0.0, 2.0), (-3.0, 5.0), (3.0, 5.0)])
    covs = [np.diag([1.2, 0.01]), np.diag([1.2, 0.01]),
            np.diag([0.01, 2.0]), np.diag([0.01, 2.0])]
    return GaussianMixture(means, [cholesky(c) for c in covs], np.full(4, 0.25))


def test_mixture_single_component_equals_mvn():
    f = cholesky(np.diag([2.0, 1.0]))
    gm = GaussianMixture(np.array([[1.0, -1.0]]), [f], np.array([1.0]))
    x = np.array([0.3, 0.4])
    assert mixture_logpdf(gm, x) == pytest.approx(mvn_logpdf(x, gm.means[0], f))


def test_mixture_identical_components():
    f = cholesky(np.eye(2))
    gm = GaussianMixture(np.zeros((2, 2)), [f, f], np.array([0.5, 0.5]))
    x = np.array([1.0, 2.0])
    assert mixture_logpdf(gm, x) == pytest.approx(mvn_logpdf(x, np.zeros(2), f), abs=1e-12)


def test_mixture_matches_naive_sum():
    gm = _example1_mixture()
    x = np.array([0.0, 8.0])
    naive = 0.0
    for i in range(4):
        naive += 0.25 * np.exp(mvn_logpdf(x, gm.means[i], gm.chols[i]))
    assert mixture_logpdf(gm, x) == pytest.approx(np.log(naive), rel=1e-12)


def test_mixture_integrates_to_one():
    gm = _example1_mixture()
    xs = np.linspace(-8, 8, 401)
    ys = np.linspace(-3, 13, 401)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    from bdec.gaussian import mixture_logpdf_many
    dens = np.exp(mixture_logpdf_many(gm, pts))
    cell = (xs[1] - xs[0]) * (ys[1] - ys[0])
    assert dens.sum() * cell == pytest.approx(1.0, abs=1e-4)


def test_mixture_requires_components():
    with pytest.raises(EmptyMixture):
        GaussianMixture(np.zeros((0, 2)), [], np.zeros(0))


def test_mixture_sample_single_component():
    f = cholesky(np.eye(1))
    gm = GaussianMixture(np.array([[5.0]]), [f], np.array([1.0]))
    rng = np.random.default_rng(3)
    draws = np.array([mixture_sample(gm, rng)[0] for _ in range(1000)])
    assert abs(draws.mean() - 5.0) < 0.15


def test_mixture_sample_zero_weight_never_selected():
    f = cholesky(np.eye(1) * 1e-12)
    gm = GaussianMixture(np.array([[0.0], [100.0]]), [f, f], np.array([1.0, 0.0]))
    rng = np.random.default_rng(4)
    draws = np.array([mixture_sample(gm, rng)[0] for _ in range(100_000)])
    assert np.all(draws < 50.0)


def test_mixture_sample_frequencies():
    f = cholesky(np.eye(1) * 1e-12)
    means = np.array([[0.0], [10.0], [20.0], [30.0]])
    gm = GaussianMixture(means, [f] * 4, np.full(4, 0.25))
    rng = np.random.default_rng(5)
    draws = np.array([mixture_sample(gm, rng)[0] for _ in range(100_000)])
    for c in (0.0, 10.0, 20.0, 30.0):
        freq = np.mean(np.abs(draws - c) < 1.0)
        assert abs(freq - 0.25) < 0.01


# --- kernel density ----------------------------------------------------------

def test_kde_single_point_at_itself():
    x = np.array([1.0, 2.0])
    val = kde_log_density(x[None, :], 0.3, x)
    assert val == pytest.approx(-np.log(2 * np.pi * 0.09))


def test_kde_identical_points():
    x = np.array([0.5])
    one = kde_log_density(x[None, :], 1.0, x)
    two = kde_log_density(np.array([[0.5], [0.5]]), 1.0, x)
    assert two == pytest.approx(one, abs=1e-12)


def test_kde_two_separated_points():
    val = kde_log_density(np.array([[0.0], [10.0]]), 1.0, np.array([0.0]))
    assert val == pytest.approx(-1.61208, abs=1e-5)


def test_logsumexp_matches_naive():
    rng = np.random.default_rng(6)
    A = rng.uniform(-5, 5, size=(50, 8))
    naive = np.log(np.sum(np.exp(A), axis=1))
    np.testing.assert_allclose(logsumexp_rows(A), naive, rtol=1e-12)


def test_logsumexp_all_minus_inf():
    out = logsumexp_rows(np.full((2, 3), -np.inf))
    assert np.all(np.isneginf(out))
