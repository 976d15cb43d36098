"""Tests for the convergence diagnostics."""

import numpy as np
import pytest

from bdec.diagnostics import (
    DomainError,
    GridTooNarrow,
    RunMetrics,
    chi2_divergence_grid,
    chi2_from_log_density,
    estimate_Z,
    estimate_expectation,
    gaussian_approx_lower_bound,
    gaussian_approx_lower_bound_multimodal,
    marginal_kl,
)
from bdec.gaussian import kde_log_density_many
from bdec.targets import GaussianTarget, TargetDensity


# --- expectation estimator ---------------------------------------------------

def test_expectation_constant():
    pos = np.random.default_rng(0).standard_normal((20, 2))
    assert estimate_expectation(pos, lambda X: np.full(X.shape[0], 3.5)) == 3.5


def test_expectation_coordinate():
    pos = np.array([[0.0, 8.0], [0.0, 2.0]])
    assert estimate_expectation(pos, lambda X: X[:, 1]) == pytest.approx(5.0)


def test_expectation_scalar_function():
    pos = np.array([[1.0], [3.0]])

    def f(x):
        if np.ndim(x) != 1:
            raise TypeError("expects a single point")
        return float(x[0]) ** 2

    assert estimate_expectation(pos, f) == pytest.approx(5.0)


# --- exploration rate --------------------------------------------------------

def test_Z_full_coverage():
    pts = np.random.default_rng(1).standard_normal((50, 2))
    assert estimate_Z(pts, pts, h=1e-9) == 1.0


def test_Z_no_coverage():
    pts = np.zeros((10, 2))
    ref = np.full((100, 2), 50.0)
    assert estimate_Z(pts, ref, h=0.05) == 0.0


def test_Z_half_coverage():
    pts = np.zeros((1, 1))
    ref = np.concatenate([np.zeros((50, 1)), np.full((50, 1), 10.0)])
    assert estimate_Z(pts, ref, h=0.1) == 0.5


def test_Z_monotone_under_union():
    rng = np.random.default_rng(2)
    ref = rng.standard_normal((2000, 2))
    a = rng.standard_normal((100, 2))
    b = rng.standard_normal((100, 2))
    za = estimate_Z(a, ref, h=0.2)
    zab = estimate_Z(np.vstack([a, b]), ref, h=0.2)
    assert zab >= za


# --- marginal KL -------------------------------------------------------------

def test_marginal_kl_self_is_zero():
    rng = np.random.default_rng(3)
    pos = rng.standard_normal((200, 2))
    h = 0.3
    kde_marginal = lambda u: np.exp(
        kde_log_density_many(pos[:, [0]], h, np.asarray(u, dtype=float)[:, None])
    )
    val = marginal_kl(pos, 0, kde_marginal, h, (-8, 8, 2001))
    assert abs(val) < 1e-8


def test_marginal_kl_nonnegative():
    rng = np.random.default_rng(4)
    pos = rng.standard_normal((500, 1)) * 0.7
    normal = lambda u: np.exp(-0.5 * np.asarray(u) ** 2) / np.sqrt(2 * np.pi)
    assert marginal_kl(pos, 0, normal, 0.1, (-8, 8, 2001)) >= -1e-9


def test_marginal_kl_exact_samples_small():
    rng = np.random.default_rng(5)
    pos = rng.standard_normal((10_000, 1))
    normal = lambda u: np.exp(-0.5 * np.asarray(u) ** 2) / np.sqrt(2 * np.pi)
    assert marginal_kl(pos, 0, normal, 0.05, (-8, 8, 2001)) <= 0.02


def test_marginal_kl_narrow_grid_raises():
    rng = np.random.default_rng(6)
    pos = rng.standard_normal((100, 1)) * 5.0
    normal = lambda u: np.exp(-0.5 * np.asarray(u) ** 2) / np.sqrt(2 * np.pi)
    with pytest.raises(GridTooNarrow):
        marginal_kl(pos, 0, normal, 0.05, (-2, 2, 401))


def test_marginal_kl_grid_must_be_odd():
    with pytest.raises(ValueError):
        marginal_kl(np.zeros((5, 1)), 0, lambda u: u, 0.1, (-1, 1, 400))


def test_marginal_kl_permutation_invariant():
    rng = np.random.default_rng(7)
    pos = rng.standard_normal((300, 2))
    normal = lambda u: np.exp(-0.5 * np.asarray(u) ** 2) / np.sqrt(2 * np.pi)
    a = marginal_kl(pos, 0, normal, 0.2, (-8, 8, 2001))
    b = marginal_kl(pos[::-1], 0, normal, 0.2, (-8, 8, 2001))
    assert a == pytest.approx(b, abs=1e-14)


# --- chi-square divergence ---------------------------------------------------

def test_chi2_analytic_substitution_is_zero():
    t = GaussianTarget(np.zeros(1), np.eye(1))
    log_rho = lambda pts: -0.5 * pts[:, 0] ** 2 - 0.5 * np.log(2 * np.pi)
    val = chi2_from_log_density(log_rho, t, (-8, 8, 4001))
    assert abs(val) < 1e-6


def test_chi2_nonnegative():
    t = GaussianTarget(np.zeros(1), np.eye(1))
    pos = np.random.default_rng(8).standard_normal((2000, 1))
    assert chi2_divergence_grid(pos, t, 0.3, (-8, 8, 2001)) >= -1e-6


def test_chi2_permutation_invariant():
    t = GaussianTarget(np.zeros(2), np.eye(2))
    pos = np.random.default_rng(9).standard_normal((300, 2))
    grid = ((-6, 6, 121), (-6, 6, 121))
    a = chi2_divergence_grid(pos, t, 0.3, grid)
    b = chi2_divergence_grid(pos[::-1], t, 0.3, grid)
    assert a == pytest.approx(b, rel=1e-12)


def test_chi2_rejects_high_dimension():
    t = GaussianTarget(np.zeros(3), np.eye(3))
    with pytest.raises(ValueError):
        chi2_divergence_grid(np.zeros((10, 3)), t, 0.1, ((-1, 1, 3),) * 3)


def test_chi2_exceeds_coverage_bound():
    # mass concentrated on half of a symmetric bimodal target: D+1 >= 1/Z
    from bdec.targets import GaussianMixtureTarget

    t = GaussianMixtureTarget([[3.0], [-3.0]], [np.eye(1) * 0.2] * 2, [0.5, 0.5])
    rng = np.random.default_rng(10)
    pos = 3.0 + 0.45 * rng.standard_normal((3000, 1))
    ref = t.sample_exact(rng, 20_000)
    z = estimate_Z(pos, ref, 0.05)
    d = chi2_divergence_grid(pos, t, 0.05, (-8, 8, 2001))
    assert d + 1.0 >= 1.0 / z - 0.02


# --- Gaussian-approximation lower bound --------------------------------------

def test_bound_self_approximation():
    val = gaussian_approx_lower_bound(1.0, 1.0, 10.0, 1)
    assert val == pytest.approx(1.0, abs=1e-10)


def test_bound_reference_value():
    val = gaussian_approx_lower_bound(0.5, 1.0, 3.0, 1)
    expected = np.sqrt(0.5) * (1.0 - np.exp(-2.0)) * np.exp(-2.25)
    assert val == pytest.approx(expected, rel=1e-12)
    assert val == pytest.approx(0.0645, abs=5e-4)


def test_bound_domain_errors():
    with pytest.raises(DomainError):
        gaussian_approx_lower_bound(2.0, 1.0, 3.0, 1)  # M > L
    with pytest.raises(DomainError):
        gaussian_approx_lower_bound(0.5, 1.0, 0.5, 1)  # R < sqrt(d/L)
    with pytest.raises(DomainError):
        gaussian_approx_lower_bound(0.0, 1.0, 3.0, 1)  # M must be positive


def test_bound_multimodal_reduces_to_unimodal():
    one = gaussian_approx_lower_bound(0.5, 1.0, 3.0, 1)
    multi = gaussian_approx_lower_bound_multimodal([0.5], [1.0], 3.0, 1)
    assert multi == pytest.approx(one, rel=1e-12)


def test_bound_below_empirical_density_ratio():
    # 1D target on [-R, R] with M <= V'' <= L, Laplace proposal from the mode
    M, L, R = 0.5, 1.0, 3.0

    class Bounded(TargetDensity):
        d = 1

        def log_density(self, x):
            u = float(x[0])
            if abs(u) > R:
                return -np.inf
            # V = M u^2/2 + (L-M) log cosh(u): M <= V'' = M + (L-M) sech^2 <= L
            return -(0.5 * M * u * u + (L - M) * np.log(np.cosh(u)))

    t = Bounded()
    u = np.linspace(-R, R, 10_001)
    log_pi = np.array([t.log_density(np.array([v])) for v in u])
    pi = np.exp(log_pi)
    pi /= np.trapezoid(pi, u)
    # proposal: Gaussian at the mode with the inverse-curvature variance
    var = 1.0 / L  # V''(0) = M + (L - M) = L
    rho = np.exp(-0.5 * u * u / var) / np.sqrt(2 * np.pi * var)
    empirical_min = np.min(rho / pi)
    assert empirical_min >= gaussian_approx_lower_bound(M, L, R, 1)


# --- metric records ----------------------------------------------------------

def test_metrics_series_and_last():
    m = RunMetrics(replicate=2)
    m.add(1, 1, "y", 4.0)
    m.add(1, 2, "y", 5.0)
    m.add(1, 2, "Z", 0.5)
    updates, values = m.series("y")
    np.testing.assert_array_equal(updates, [1, 2])
    np.testing.assert_array_equal(values, [4.0, 5.0])
    assert m.last("y") == 5.0
    with pytest.raises(KeyError):
        m.last("missing")


def test_metrics_csv_round_trip(tmp_path):
    m = RunMetrics(replicate=0)
    m.add(1, 1, "y", 1.0 / 3.0)
    path = tmp_path / "metrics.csv"
    m.write_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "replicate,iteration,update,metric,value"
    rep, it, up, name, value = lines[1].split(",")
    assert float(value) == 1.0 / 3.0
