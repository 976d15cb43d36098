"""Target densities: the black-box interface, benchmark distributions, and
the generic Gaussian-mixture target used for property tests.

All log-densities are unnormalized (fixed additive constant per instance).
Out-of-support inputs return -inf; samplers treat that as automatic rejection
or an invalid Langevin state.
"""

from __future__ import annotations

import numpy as np
from scipy.special import log_ndtr, ndtr

from .gaussian import CholeskyFactor, cholesky, mixture_logpdf_many, GaussianMixture


class TargetDensity:
    """Unnormalized log-density with gradient and Hessian access.

    Subclasses must set ``d`` and implement ``log_density``. Gradient and
    Hessian default to central finite differences; analytic overrides are
    shipped for all benchmark targets.
    """

    d: int
    # known stationary points of log-density, for tests and seeding; may be empty
    mode_locations: tuple = ()

    def log_density(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def log_density_many(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        return np.array([self.log_density(x) for x in X])

    def grad_log_density(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        g = np.empty(self.d)
        for j in range(self.d):
            step = 1e-5 * (1.0 + abs(x[j]))
            xp, xm = x.copy(), x.copy()
            xp[j] += step
            xm[j] -= step
            g[j] = (self.log_density(xp) - self.log_density(xm)) / (2.0 * step)
        return g

    def grad_many(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        return np.array([self.grad_log_density(x) for x in X])

    def hessian_log_density(self, x: np.ndarray) -> np.ndarray:
        """Central finite differences of the gradient, symmetrized."""
        x = np.asarray(x, dtype=float)
        H = np.empty((self.d, self.d))
        for j in range(self.d):
            step = 1e-4 * (1.0 + abs(x[j]))
            xp, xm = x.copy(), x.copy()
            xp[j] += step
            xm[j] -= step
            H[:, j] = (self.grad_log_density(xp) - self.grad_log_density(xm)) / (2.0 * step)
        return 0.5 * (H + H.T)

    # Optional oracles; None means unavailable for this target.
    def sample_exact(self, rng: np.random.Generator, n: int) -> np.ndarray | None:
        return None

    @property
    def has_exact_sampler(self) -> bool:
        return type(self).sample_exact is not TargetDensity.sample_exact

    def sample_initial(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Documented initial distribution for benchmark runs."""
        raise NotImplementedError


class TemperedTarget(TargetDensity):
    """pi_beta with log pi_beta = beta * log pi; shares the modes of pi."""

    def __init__(self, base: TargetDensity, beta: float):
        if beta <= 0:
            raise ValueError("beta must be positive")
        self.base = base
        self.beta = float(beta)
        self.d = base.d
        self.mode_locations = base.mode_locations

    def log_density(self, x):
        return self.beta * self.base.log_density(x)

    def log_density_many(self, X):
        return self.beta * self.base.log_density_many(X)

    def grad_log_density(self, x):
        return self.beta * self.base.grad_log_density(x)

    def grad_many(self, X):
        return self.beta * self.base.grad_many(X)

    def hessian_log_density(self, x):
        return self.beta * self.base.hessian_log_density(x)


class GaussianTarget(TargetDensity):
    """Single Gaussian with log-density -(1/2)(x-mu)^T Sigma^{-1} (x-mu).

    The constant is chosen so the value at the mode is 0.
    """

    def __init__(self, mu: np.ndarray, sigma: np.ndarray):
        self.mu = np.asarray(mu, dtype=float)
        self.d = self.mu.shape[0]
        self.sigma = np.asarray(sigma, dtype=float)
        self.chol = cholesky(self.sigma)
        self.precision = np.linalg.inv(self.sigma)
        self.mode_locations = (self.mu.copy(),)

    def log_density(self, x):
        z = self.chol.solve(np.asarray(x, dtype=float) - self.mu)
        return -0.5 * float(z @ z)

    def log_density_many(self, X):
        X = np.atleast_2d(X)
        Z = self.chol.solve((X - self.mu).T)
        return -0.5 * np.einsum("ij,ij->j", Z, Z)

    def grad_log_density(self, x):
        return -self.precision @ (np.asarray(x, dtype=float) - self.mu)

    def grad_many(self, X):
        X = np.atleast_2d(X)
        return -(X - self.mu) @ self.precision.T

    def hessian_log_density(self, x):
        return -self.precision

    def sample_exact(self, rng, n):
        eps = rng.standard_normal((n, self.d))
        return self.mu + eps @ self.chol.L.T

    def sample_initial(self, rng, n):
        return self.sample_exact(rng, n)


class GaussianMixtureTarget(TargetDensity):
    """Normalized Gaussian-mixture density with analytic derivatives."""

    def __init__(self, means, covs, weights, init_mean=None, init_cov=None):
        self.means = np.atleast_2d(np.asarray(means, dtype=float))
        self.m, self.d = self.means.shape
        self.covs = [np.asarray(c, dtype=float) for c in covs]
        self.weights = np.asarray(weights, dtype=float)
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must sum to 1")
        self.chols = [cholesky(c) for c in self.covs]
        self.precisions = [np.linalg.inv(c) for c in self.covs]
        self.mixture = GaussianMixture(self.means, self.chols, self.weights)
        self.mode_locations = tuple(m.copy() for m in self.means)
        self.init_mean = None if init_mean is None else np.asarray(init_mean, dtype=float)
        self.init_cov = None if init_cov is None else np.asarray(init_cov, dtype=float)

    def log_density(self, x):
        return float(self.log_density_many(np.atleast_2d(x))[0])

    def log_density_many(self, X):
        return mixture_logpdf_many(self.mixture, X)

    def _responsibilities(self, X):
        """Posterior component weights at each row of X, shape (n, m)."""
        from .gaussian import mvn_logpdf_many

        X = np.atleast_2d(X)
        logt = np.empty((X.shape[0], self.m))
        for i in range(self.m):
            logt[:, i] = np.log(self.weights[i]) + mvn_logpdf_many(
                X, self.means[i], self.chols[i]
            )
        mx = logt.max(axis=1, keepdims=True)
        r = np.exp(logt - mx)
        return r / r.sum(axis=1, keepdims=True)

    def grad_log_density(self, x):
        return self.grad_many(np.atleast_2d(x))[0]

    def grad_many(self, X):
        X = np.atleast_2d(X)
        r = self._responsibilities(X)
        g = np.zeros_like(X)
        for i in range(self.m):
            g += r[:, i, None] * ((self.means[i] - X) @ self.precisions[i].T)
        return g

    def hessian_log_density(self, x):
        x = np.asarray(x, dtype=float)
        r = self._responsibilities(x[None, :])[0]
        g_total = np.zeros(self.d)
        H = np.zeros((self.d, self.d))
        comp_grads = []
        for i in range(self.m):
            gi = self.precisions[i] @ (self.means[i] - x)
            comp_grads.append(gi)
            g_total += r[i] * gi
        for i in range(self.m):
            gi = comp_grads[i]
            H += r[i] * (np.outer(gi, gi) - self.precisions[i])
        H -= np.outer(g_total, g_total)
        return 0.5 * (H + H.T)

    def sample_exact(self, rng, n):
        comp = rng.choice(self.m, size=n, p=self.weights)
        eps = rng.standard_normal((n, self.d))
        out = np.empty((n, self.d))
        for i in range(self.m):
            mask = comp == i
            out[mask] = self.means[i] + eps[mask] @ self.chols[i].L.T
        return out

    def sample_initial(self, rng, n):
        if self.init_mean is None:
            return self.sample_exact(rng, n)
        L = cholesky(self.init_cov).L
        return self.init_mean + rng.standard_normal((n, self.d)) @ L.T

    # closed-form moments, for oracles
    def mean(self) -> np.ndarray:
        return self.weights @ self.means

    def second_moments(self) -> np.ndarray:
        """E[x x^T] = sum_i w_i (Sigma_i + mu_i mu_i^T)."""
        M = np.zeros((self.d, self.d))
        for i in range(self.m):
            M += self.weights[i] * (self.covs[i] + np.outer(self.means[i], self.means[i]))
        return M

    def abs_first_coordinate_mean(self) -> float:
        """E|x_1| by the folded-normal formula per component (diagonal covariances)."""
        total = 0.0
        for i in range(self.m):
            mu = self.means[i][0]
            s = np.sqrt(self.covs[i][0, 0])
            total += self.weights[i] * (
                s * np.sqrt(2.0 / np.pi) * np.exp(-mu * mu / (2 * s * s))
                + mu * (1.0 - 2.0 * ndtr(-mu / s))
            )
        return float(total)


def example1_target() -> GaussianMixtureTarget:
    """2D mixture of four well-separated, heterogeneous Gaussians."""
    means = [(0.0, 8.0), (0.0, 2.0), (-3.0, 5.0), (3.0, 5.0)]
    covs = [
        np.diag([1.2, 0.01]),
        np.diag([1.2, 0.01]),
        np.diag([0.01, 2.0]),
        np.diag([0.01, 2.0]),
    ]
    return GaussianMixtureTarget(
        means,
        covs,
        weights=[0.25] * 4,
        init_mean=(0.0, 8.0),
        init_cov=np.diag([0.3, 0.01]),
    )


class SurTarget(TargetDensity):
    """2D seemingly-unrelated-regression posterior, two modes.

    log pi(x) = -(N_sur/2) log|Sigma(x)|, with -inf where Sigma(x) is not
    positive definite.
    """

    d = 2
    mode_locations = (np.array([0.78, 1.54]), np.array([2.76, 2.50]))
    init_point = np.array([1.25, 1.78])

    def __init__(self, n_sur: float = 1.0):
        self.n_sur = float(n_sur)

    @staticmethod
    def _sigma_entries(x1, x2):
        s11 = 7.70 * x1 * x1 - 19.27 * x1 + 21.09
        s12 = 5.11 * x1 * x2 - 3.42 * x1 - 3.51 * x2 + 23.52
        s22 = 27.31 * x2 * x2 - 97.40 * x2 + 114.19
        return s11, s12, s22

    def sigma(self, x):
        s11, s12, s22 = self._sigma_entries(x[0], x[1])
        return np.array([[s11, s12], [s12, s22]])

    def log_density(self, x):
        return float(self.log_density_many(np.atleast_2d(x))[0])

    def log_density_many(self, X):
        X = np.atleast_2d(X)
        s11, s12, s22 = self._sigma_entries(X[:, 0], X[:, 1])
        det = s11 * s22 - s12 * s12
        out = np.full(X.shape[0], -np.inf)
        ok = (det > 0) & (s11 > 0)
        with np.errstate(invalid="ignore"):
            out[ok] = -0.5 * self.n_sur * np.log(det[ok])
        return out

    def grad_log_density(self, x):
        return self.grad_many(np.atleast_2d(x))[0]

    def grad_many(self, X):
        X = np.atleast_2d(X)
        x1, x2 = X[:, 0], X[:, 1]
        s11, s12, s22 = self._sigma_entries(x1, x2)
        det = s11 * s22 - s12 * s12
        # d log|S|/dx_k = tr(S^{-1} dS/dx_k); written out for 2x2
        d11_d1 = 15.40 * x1 - 19.27
        d12_d1 = 5.11 * x2 - 3.42
        d12_d2 = 5.11 * x1 - 3.51
        d22_d2 = 54.62 * x2 - 97.40
        # S^{-1} = [[s22, -s12], [-s12, s11]] / det
        dlogdet_d1 = (s22 * d11_d1 - 2.0 * s12 * d12_d1) / det
        dlogdet_d2 = (s11 * d22_d2 - 2.0 * s12 * d12_d2) / det
        g = np.stack([dlogdet_d1, dlogdet_d2], axis=1)
        g *= -0.5 * self.n_sur
        g[det <= 0] = np.nan
        return g

    def sample_initial(self, rng, n):
        return self.init_point + rng.standard_normal((n, self.d))


class SkewProductTarget(TargetDensity):
    """20D equal-weight mixture of four products of 1D skew normals.

    Per-coordinate factor: (2/w_k) phi((x_j - mu_kj)/w_k) Phi(alpha (x_j - mu_kj)/w_k).
    """

    def __init__(self, alpha: float = 10.0, d: int = 20):
        self.alpha = float(alpha)
        self.d = d
        half = d // 2
        mu3 = np.concatenate([np.full(half, -10.0), np.full(d - half, 10.0)])
        self.mus = np.stack([np.full(d, 20.0), np.full(d, -20.0), mu3, -mu3])
        self.scales = np.array([1.0, 1.0, 2.0, 2.0])
        self.weights = np.full(4, 0.25)
        # true component modes sit slightly off mu_k toward the skew side; the
        # stationary points of log pi are close enough to mu_k for seeding
        self.mode_locations = tuple(m.copy() for m in self.mus)

    def _component_logpdfs(self, X):
        """(n, 4): log of the normalized product density of each component."""
        X = np.atleast_2d(X)
        out = np.empty((X.shape[0], 4))
        for k in range(4):
            u = (X - self.mus[k]) / self.scales[k]
            lp = (
                np.log(2.0)
                - np.log(self.scales[k])
                - 0.5 * np.log(2.0 * np.pi)
                - 0.5 * u * u
                + log_ndtr(self.alpha * u)
            )
            out[:, k] = lp.sum(axis=1)
        return out

    def log_density(self, x):
        return float(self.log_density_many(np.atleast_2d(x))[0])

    def log_density_many(self, X):
        from .gaussian import logsumexp_rows

        lp = self._component_logpdfs(X) + np.log(self.weights)
        return logsumexp_rows(lp)

    def grad_log_density(self, x):
        return self.grad_many(np.atleast_2d(x))[0]

    def grad_many(self, X):
        X = np.atleast_2d(X)
        lp = self._component_logpdfs(X) + np.log(self.weights)
        mx = lp.max(axis=1, keepdims=True)
        r = np.exp(lp - mx)
        r /= r.sum(axis=1, keepdims=True)
        g = np.zeros_like(X)
        for k in range(4):
            u = (X - self.mus[k]) / self.scales[k]
            au = self.alpha * u
            # phi(au)/Phi(au), computed in log-space for stability at au << 0
            ratio = np.exp(-0.5 * au * au - 0.5 * np.log(2.0 * np.pi) - log_ndtr(au))
            gk = (-u + self.alpha * ratio) / self.scales[k]
            g += r[:, k, None] * gk
        return g

    def marginal_pdf(self, coordinate: int):
        """Closed-form 1D marginal of one coordinate (mixture of skew normals)."""
        mus = self.mus[:, coordinate]
        scales = self.scales
        alpha = self.alpha
        w = self.weights

        def pdf(u):
            u = np.asarray(u, dtype=float)
            total = np.zeros_like(u)
            for k in range(4):
                z = (u - mus[k]) / scales[k]
                total += (
                    w[k]
                    * (2.0 / scales[k])
                    * np.exp(-0.5 * z * z)
                    / np.sqrt(2.0 * np.pi)
                    * ndtr(alpha * z)
                )
            return total

        return pdf

    def sample_exact(self, rng, n):
        """Exact draws via the additive representation of the skew normal."""
        delta = self.alpha / np.sqrt(1.0 + self.alpha**2)
        comp = rng.choice(4, size=n, p=self.weights)
        u0 = np.abs(rng.standard_normal((n, self.d)))
        u1 = rng.standard_normal((n, self.d))
        z = delta * u0 + np.sqrt(1.0 - delta * delta) * u1
        return self.mus[comp] + self.scales[comp, None] * z

    def sample_initial(self, rng, n):
        return self.mus[0] + rng.standard_normal((n, self.d))


def make_target(name: str, params: dict | None = None) -> TargetDensity:
    """Build a target from its configuration identifier."""
    params = dict(params or {})
    if name == "example1-gmm":
        return example1_target()
    if name == "sur2d":
        return SurTarget(n_sur=params.pop("n_sur", 1.0))
    if name == "skew20d":
        return SkewProductTarget(alpha=params.pop("alpha", 10.0))
    if name == "gaussian-test":
        d = int(params.pop("d", 2))
        mu = np.asarray(params.pop("mu", np.zeros(d)), dtype=float)
        sigma = np.asarray(params.pop("sigma", np.eye(d)), dtype=float)
        return GaussianTarget(mu, sigma)
    if name == "custom-gmm":
        return GaussianMixtureTarget(
            params.pop("means"),
            params.pop("covs"),
            params.pop("weights"),
            init_mean=params.pop("init_mean", None),
            init_cov=params.pop("init_cov", None),
        )
    raise ValueError(f"unknown target {name!r}")
