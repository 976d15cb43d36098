"""Convergence metrics: expectation estimators, exploration rate, marginal
KL divergence via KDE, grid-based chi-square divergence, and the computable
Gaussian-approximation lower bound.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .gaussian import kde_log_density_many
from .targets import TargetDensity


class GridTooNarrow(ValueError):
    """The quadrature grid misses a non-negligible share of the KDE mass."""


class DomainError(ValueError):
    """Lower-bound formula evaluated outside its domain of validity."""


@dataclass
class RunMetrics:
    """Per-update time series of named diagnostics for one replicate."""

    replicate: int = 0
    records: list[tuple[int, int, str, float]] = field(default_factory=list)

    def add(self, iteration: int, update: int, metric: str, value: float) -> None:
        self.records.append((iteration, update, metric, float(value)))

    def series(self, metric: str) -> tuple[np.ndarray, np.ndarray]:
        """(update indices, values) for one metric, in recording order."""
        rows = [(u, v) for _, u, m, v in self.records if m == metric]
        if not rows:
            return np.zeros(0, dtype=int), np.zeros(0)
        updates, values = zip(*rows)
        return np.asarray(updates, dtype=int), np.asarray(values)

    def last(self, metric: str) -> float:
        _, values = self.series(metric)
        if values.size == 0:
            raise KeyError(f"no records for metric {metric!r}")
        return float(values[-1])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["replicate", "iteration", "update", "metric", "value"])
            for iteration, update, metric, value in self.records:
                writer.writerow([self.replicate, iteration, update, metric, repr(value)])


def estimate_expectation(positions: np.ndarray, f) -> float:
    """(1/N) sum f(x_i); f maps one d-vector (or the (N, d) stack) to reals."""
    positions = np.atleast_2d(positions)
    try:
        values = np.asarray(f(positions), dtype=float)
    except (TypeError, ValueError, IndexError):
        values = None
    if values is None or values.shape != (positions.shape[0],):
        values = np.array([f(x) for x in positions], dtype=float)
    return float(np.mean(values))


def estimate_Z(positions: np.ndarray, reference: np.ndarray, h: float) -> float:
    """Fraction of exact target samples within Euclidean distance h of a particle."""
    positions = np.atleast_2d(positions)
    reference = np.atleast_2d(reference)
    if reference.shape[0] < 1:
        raise ValueError("need at least one reference sample")
    tree = cKDTree(positions)
    dist, _ = tree.query(reference, k=1)
    return float(np.mean(dist <= h))


def marginal_kl(
    positions: np.ndarray,
    coordinate: int,
    target_marginal,
    h: float,
    grid: tuple[float, float, int],
) -> float:
    """KL(KDE marginal || target marginal) by trapezoidal quadrature.

    The KDE places N(u; x_i[coordinate], h^2) at every particle. Raises
    GridTooNarrow when the KDE mass captured by the grid is below 0.999.
    """
    lo, hi, n_points = grid
    if n_points < 3 or n_points % 2 == 0:
        raise ValueError("grid needs an odd number of points >= 3")
    u = np.linspace(lo, hi, int(n_points))
    coords = np.atleast_2d(positions)[:, coordinate][:, None]
    log_rho = kde_log_density_many(coords, h, u[:, None])
    rho = np.exp(log_rho)
    mass = np.trapezoid(rho, u)
    if mass < 0.999:
        raise GridTooNarrow(f"grid captures KDE mass {mass:.6f} < 0.999")
    pi1 = np.asarray(target_marginal(u), dtype=float)
    integrand = np.zeros_like(rho)
    ok = rho >= 1e-300
    with np.errstate(divide="ignore"):
        integrand[ok] = rho[ok] * (np.log(rho[ok]) - np.log(pi1[ok]))
    return float(np.trapezoid(integrand, u))


def chi2_divergence_grid(
    positions: np.ndarray,
    target: TargetDensity,
    h: float,
    grid: tuple,
    return_clipped: bool = False,
):
    """Quadrature of rho^2/pi - 1 on a uniform grid, rho the Gaussian KDE.

    ``grid`` is (lo, hi, n) per dimension for d <= 2, e.g.
    ((xlo, xhi, nx), (ylo, yhi, ny)) in 2D. The target normalization constant
    is computed on the same grid. Cells where the normalized pi < 1e-300
    contribute 0; their KDE mass is returned as clipped when requested.
    """
    positions = np.atleast_2d(positions)
    d = positions.shape[1]
    if d > 2:
        raise ValueError("grid-based chi-square is limited to d <= 2")
    axes_spec = grid if isinstance(grid[0], (tuple, list)) else (grid,)
    axes = [np.linspace(lo, hi, int(n)) for lo, hi, n in axes_spec]
    if len(axes) != d:
        raise ValueError("grid spec does not match target dimension")
    steps = [ax[1] - ax[0] for ax in axes]
    cell = float(np.prod(steps))
    if d == 1:
        points = axes[0][:, None]
    else:
        gx, gy = np.meshgrid(axes[0], axes[1], indexing="ij")
        points = np.column_stack([gx.ravel(), gy.ravel()])

    log_pi = target.log_density_many(points)
    finite = np.isfinite(log_pi)
    log_norm = _logsumexp(log_pi[finite]) + np.log(cell)
    log_pi_normed = log_pi - log_norm

    log_rho = _kde_log_density_grid(positions, h, points)
    rho = np.exp(log_rho)
    mass = float(np.sum(rho) * cell)
    if mass < 0.999:
        raise GridTooNarrow(f"grid captures KDE mass {mass:.6f} < 0.999")

    pi_vals = np.exp(log_pi_normed)
    usable = pi_vals >= 1e-300
    ratio = np.zeros_like(rho)
    ratio[usable] = rho[usable] ** 2 / pi_vals[usable]
    value = float(np.sum(ratio) * cell - 1.0)
    clipped_mass = float(np.sum(rho[~usable]) * cell)
    if return_clipped:
        return value, clipped_mass
    return value


def chi2_from_log_density(log_rho_fn, target: TargetDensity, grid: tuple) -> float:
    """Chi-square quadrature with an arbitrary normalized log-density in place
    of the particle KDE; used for analytic substitution checks."""
    axes_spec = grid if isinstance(grid[0], (tuple, list)) else (grid,)
    axes = [np.linspace(lo, hi, int(n)) for lo, hi, n in axes_spec]
    cell = float(np.prod([ax[1] - ax[0] for ax in axes]))
    if len(axes) == 1:
        points = axes[0][:, None]
    else:
        gx, gy = np.meshgrid(axes[0], axes[1], indexing="ij")
        points = np.column_stack([gx.ravel(), gy.ravel()])
    log_pi = target.log_density_many(points)
    finite = np.isfinite(log_pi)
    log_pi_normed = log_pi - (_logsumexp(log_pi[finite]) + np.log(cell))
    rho = np.exp(np.asarray(log_rho_fn(points)))
    pi_vals = np.exp(log_pi_normed)
    usable = pi_vals >= 1e-300
    ratio = np.zeros_like(rho)
    ratio[usable] = rho[usable] ** 2 / pi_vals[usable]
    return float(np.sum(ratio) * cell - 1.0)


def gaussian_approx_lower_bound(M: float, L: float, R: float, d: int) -> float:
    """Computable lower bound on inf rho-hat/pi for an M-convex, L-smooth
    potential supported in a radius-R ball around its single mode."""
    if not 0 < M <= L:
        raise DomainError("need 0 < M <= L")
    if R < np.sqrt(d / L):
        raise DomainError("need R >= sqrt(d/L)")
    coverage = -np.expm1(-0.5 * L * (R - np.sqrt(d / L)) ** 2)
    return float((M / L) ** (d / 2) * coverage * np.exp(-0.5 * (L - M) * R * R))


def gaussian_approx_lower_bound_multimodal(Ms, Ls, R: float, d: int) -> float:
    """Multimodal version: min over modes of the condition-number factor times
    min over modes of the tail factor."""
    Ms = np.asarray(Ms, dtype=float)
    Ls = np.asarray(Ls, dtype=float)
    if Ms.shape != Ls.shape or Ms.size == 0:
        raise ValueError("need matching nonempty convexity/smoothness constants")
    first = np.inf
    second = np.inf
    for M, L in zip(Ms, Ls):
        if not 0 < M <= L:
            raise DomainError("need 0 < M_i <= L_i")
        if R < np.sqrt(d / L):
            raise DomainError("need R >= sqrt(d/L_i)")
        coverage = -np.expm1(-0.5 * L * (R - np.sqrt(d / L)) ** 2)
        first = min(first, (M / L) ** (d / 2) * coverage)
        second = min(second, np.exp(-0.5 * (L - M) * R * R))
    return float(first * second)


def _logsumexp(a: np.ndarray) -> float:
    a = np.asarray(a, dtype=float)
    mx = np.max(a)
    return float(mx + np.log(np.sum(np.exp(a - mx))))


def _kde_log_density_grid(positions: np.ndarray, h: float, points: np.ndarray) -> np.ndarray:
    """KDE log-density at many grid points, truncating the Gaussian kernel at
    radius 12h (relative truncation error below 1e-31)."""
    n, d = positions.shape
    if points.shape[0] * n <= 4_000_000:
        return kde_log_density_many(positions, h, points)
    radius = 12.0 * h
    tree_p = cKDTree(positions)
    tree_g = cKDTree(points)
    pairs = tree_g.sparse_distance_matrix(tree_p, radius, output_type="coo_matrix")
    dens = np.zeros(points.shape[0])
    kernel = np.exp(-0.5 * (pairs.data / h) ** 2)
    np.add.at(dens, pairs.row, kernel)
    dens /= n * (2.0 * np.pi * h * h) ** (d / 2)
    with np.errstate(divide="ignore"):
        return np.log(dens)
