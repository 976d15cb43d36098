"""Dense Gaussian primitives: Cholesky factors, multivariate normal
log-densities and sampling, Gaussian mixtures, and kernel density evaluation.

Everything is carried in log-space end to end; callers form ratios as
differences of logs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

LOG_2PI = float(np.log(2.0 * np.pi))


class NotPositiveDefinite(ValueError):
    """The matrix handed to ``cholesky`` is not (numerically) positive definite."""


class EmptyMixture(ValueError):
    """Operation requires at least one mixture component."""


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower-triangular factor L with L L^T = Sigma, plus cached log|Sigma|."""

    L: np.ndarray
    log_det: float  # log |Sigma| = 2 * sum(log diag(L))

    @property
    def dim(self) -> int:
        return self.L.shape[0]

    def solve(self, v: np.ndarray) -> np.ndarray:
        """Return L^{-1} v (v may be a vector or a stack of columns)."""
        return solve_triangular(self.L, v, lower=True)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return self.L @ v

    def covariance(self) -> np.ndarray:
        return self.L @ self.L.T


def cholesky(sigma: np.ndarray) -> CholeskyFactor:
    """Factor a symmetric positive-definite matrix.

    Raises NotPositiveDefinite when any pivot falls at or below
    1e-12 * trace(sigma)/d, which distinguishes saddle points and degenerate
    Hessians from plain round-off.
    """
    sigma = np.asarray(sigma, dtype=float)
    d = sigma.shape[0]
    if sigma.shape != (d, d):
        raise ValueError("sigma must be square")
    tol = 1e-12 * np.trace(sigma) / d
    L = np.zeros_like(sigma)
    for j in range(d):
        pivot = sigma[j, j] - L[j, :j] @ L[j, :j]
        if pivot <= tol:
            raise NotPositiveDefinite(
                f"pivot {pivot:.3e} at index {j} is <= tolerance {tol:.3e}"
            )
        L[j, j] = np.sqrt(pivot)
        if j + 1 < d:
            L[j + 1 :, j] = (sigma[j + 1 :, j] - L[j + 1 :, :j] @ L[j, :j]) / L[j, j]
    log_det = 2.0 * float(np.sum(np.log(np.diag(L))))
    return CholeskyFactor(L=L, log_det=log_det)


def mvn_logpdf(x: np.ndarray, mu: np.ndarray, chol: CholeskyFactor) -> float:
    """Normalized N(mu, Sigma) log-density via a triangular solve."""
    x = np.asarray(x, dtype=float)
    d = chol.dim
    z = chol.solve(x - mu)
    return -0.5 * d * LOG_2PI - 0.5 * chol.log_det - 0.5 * float(z @ z)


def mvn_logpdf_many(X: np.ndarray, mu: np.ndarray, chol: CholeskyFactor) -> np.ndarray:
    """Vectorized ``mvn_logpdf`` over the rows of X (shape (n, d))."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    d = chol.dim
    Z = chol.solve((X - mu).T)  # (d, n)
    quad = np.einsum("ij,ij->j", Z, Z)
    return -0.5 * d * LOG_2PI - 0.5 * chol.log_det - 0.5 * quad


def mvn_sample(rng: np.random.Generator, mu: np.ndarray, chol: CholeskyFactor) -> np.ndarray:
    """Draw mu + L eps with eps ~ N(0, I) from the caller-owned stream."""
    eps = rng.standard_normal(chol.dim)
    return np.asarray(mu, dtype=float) + chol.matvec(eps)


@dataclass
class GaussianMixture:
    """Gaussian mixture with cached Cholesky factors and cumulative weights."""

    means: np.ndarray  # (m, d)
    chols: list[CholeskyFactor]
    weights: np.ndarray  # (m,), nonnegative, sums to 1
    cum_weights: np.ndarray = field(init=False)

    def __post_init__(self):
        self.means = np.atleast_2d(np.asarray(self.means, dtype=float))
        self.weights = np.asarray(self.weights, dtype=float)
        if self.m == 0:
            raise EmptyMixture("mixture needs at least one component")
        if np.any(self.weights < 0):
            raise ValueError("weights must be nonnegative")
        total = self.weights.sum()
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {total!r}, expected 1")
        self.cum_weights = np.cumsum(self.weights)
        self.cum_weights[-1] = 1.0

    @property
    def m(self) -> int:
        return self.means.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]


def mixture_logpdf(gm: GaussianMixture, x: np.ndarray) -> float:
    return float(mixture_logpdf_many(gm, np.atleast_2d(x))[0])


def mixture_logpdf_many(gm: GaussianMixture, X: np.ndarray) -> np.ndarray:
    """log sum_i w_i N(x; mu_i, Sigma_i), log-sum-exp stabilized, over rows of X."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    with np.errstate(divide="ignore"):
        logw = np.log(gm.weights)
    terms = np.empty((gm.m, X.shape[0]))
    for i in range(gm.m):
        terms[i] = logw[i] + mvn_logpdf_many(X, gm.means[i], gm.chols[i])
    return logsumexp_rows(terms.T)


def mixture_sample(gm: GaussianMixture, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF component selection on cached cumulative weights, then mvn_sample."""
    i = int(np.searchsorted(gm.cum_weights, rng.random(), side="right"))
    i = min(i, gm.m - 1)
    return mvn_sample(rng, gm.means[i], gm.chols[i])


def logsumexp_rows(A: np.ndarray) -> np.ndarray:
    """Row-wise log-sum-exp; rows that are all -inf map to -inf without warnings."""
    A = np.atleast_2d(A)
    mx = np.max(A, axis=1)
    out = np.full(A.shape[0], -np.inf)
    ok = np.isfinite(mx)
    if np.any(ok):
        shifted = A[ok] - mx[ok, None]
        out[ok] = mx[ok] + np.log(np.sum(np.exp(shifted), axis=1))
    return out


def kde_log_density(points: np.ndarray, h: float, x: np.ndarray) -> float:
    """log of (1/N) sum_i K(x_i, x) with the Gaussian kernel of bandwidth h."""
    return float(kde_log_density_many(points, h, np.atleast_2d(x))[0])


def kde_log_density_many(points: np.ndarray, h: float, X: np.ndarray) -> np.ndarray:
    """Vectorized KDE log-density at the rows of X."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n, d = points.shape
    if n < 1:
        raise ValueError("need at least one point")
    if h <= 0:
        raise ValueError("bandwidth must be positive")
    # squared distances, chunked to bound the temporary
    out = np.empty(X.shape[0])
    const = -0.5 * d * np.log(2.0 * np.pi * h * h) - np.log(n)
    chunk = max(1, int(4_000_000 // max(n, 1)))
    p_sq = np.einsum("ij,ij->i", points, points)
    for s in range(0, X.shape[0], chunk):
        Xc = X[s : s + chunk]
        d2 = p_sq[None, :] - 2.0 * Xc @ points.T
        d2 += np.einsum("ij,ij->i", Xc, Xc)[:, None]
        np.maximum(d2, 0.0, out=d2)
        out[s : s + chunk] = logsumexp_rows(-0.5 * d2 / (h * h)) + const
    return out
