"""Mode discovery and bookkeeping: quasi-Newton mode search, new-mode
detection through a Mahalanobis-style distance, and the atlas of
(location, covariance, weight) triples that backs the mixture proposal.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .gaussian import CholeskyFactor, GaussianMixture, NotPositiveDefinite, cholesky
from .targets import TargetDensity


class NotConverged(RuntimeError):
    """Quasi-Newton search hit the iteration cap before the gradient tolerance."""


class NotAMinimum(RuntimeError):
    """The search terminus has a Hessian of -log pi that is not positive definite."""


@dataclass(frozen=True)
class ModeInfo:
    """One discovered mode: location, Laplace covariance, cached log-density."""

    location: np.ndarray
    covariance: np.ndarray  # -[hessian log pi(mu)]^{-1}
    chol: CholeskyFactor
    log_density: float  # log pi(mu), unnormalized


@dataclass
class ModeAtlas:
    """Ordered mode list plus normalized weights and the proposal mixture."""

    modes: list[ModeInfo] = field(default_factory=list)
    weights: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def m(self) -> int:
        return len(self.modes)

    def mixture(self) -> GaussianMixture:
        if self.m == 0:
            raise ValueError("atlas is empty")
        return GaussianMixture(
            means=np.stack([mi.location for mi in self.modes]),
            chols=[mi.chol for mi in self.modes],
            weights=self.weights,
        )

    def append(self, mode: ModeInfo) -> None:
        """Add a mode; caller is responsible for recomputing weights afterwards."""
        self.modes.append(mode)

    def copy(self) -> "ModeAtlas":
        return ModeAtlas(modes=list(self.modes), weights=self.weights.copy())

    def to_json(self) -> str:
        doc = {
            "modes": [
                {
                    "location": mi.location.tolist(),
                    "covariance": mi.covariance.tolist(),
                    "log_density": mi.log_density,
                }
                for mi in self.modes
            ],
            "weights": self.weights.tolist(),
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ModeAtlas":
        doc = json.loads(text)
        modes = []
        for entry in doc["modes"]:
            cov = np.asarray(entry["covariance"], dtype=float)
            modes.append(
                ModeInfo(
                    location=np.asarray(entry["location"], dtype=float),
                    covariance=cov,
                    chol=cholesky(cov),
                    log_density=float(entry["log_density"]),
                )
            )
        return cls(modes=modes, weights=np.asarray(doc["weights"], dtype=float))


def default_threshold(d: int) -> float:
    """Distance threshold 1 + sqrt(2/d) for declaring a mode new."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    return 1.0 + np.sqrt(2.0 / d)


def mode_distance(mode_k: ModeInfo, mode_l: ModeInfo, d: int | None = None) -> float:
    """d^{-1} max of the two precision-weighted quadratic forms of mu_k - mu_l."""
    if d is None:
        d = mode_k.location.shape[0]
    delta = mode_k.location - mode_l.location
    zk = mode_k.chol.solve(delta)
    zl = mode_l.chol.solve(delta)
    return float(max(zk @ zk, zl @ zl)) / d


def recompute_weights(atlas: ModeAtlas) -> np.ndarray:
    """Softmax of log pi(mu_j) + (1/2) log|Sigma_j|; unnormalized pi suffices."""
    if atlas.m == 0:
        raise ValueError("atlas is empty")
    scores = np.array(
        [mi.log_density + 0.5 * mi.chol.log_det for mi in atlas.modes]
    )
    scores -= scores.max()
    w = np.exp(scores)
    return w / w.sum()


def find_mode(
    target: TargetDensity,
    start: np.ndarray,
    max_iter: int = 500,
    grad_tol_scale: float = 1e-6,
) -> ModeInfo:
    """BFGS minimization of V = -log pi with Armijo backtracking.

    Identity initial inverse Hessian; backtracking with c = 1e-4 and shrink
    factor 0.5 from unit step; converged when ||grad V|| <= tol * (1 + |V|).
    Raises NotConverged at the iteration cap and NotAMinimum when the Hessian
    of V at the terminus is not positive definite.
    """
    x = np.asarray(start, dtype=float).copy()
    d = target.d
    f = -target.log_density(x)
    if not np.isfinite(f):
        raise NotConverged("start point outside support")
    g = -target.grad_log_density(x)
    H = np.eye(d)  # inverse-Hessian approximation
    for _ in range(max_iter):
        gnorm = np.linalg.norm(g)
        if gnorm <= grad_tol_scale * (1.0 + abs(f)):
            return _make_mode_info(target, x)
        p = -H @ g
        slope = float(p @ g)
        if slope >= 0.0 or not np.isfinite(slope):
            H = np.eye(d)
            p = -g
            slope = -float(g @ g)
        alpha = 1.0
        for _ in range(60):
            f_new = -target.log_density(x + alpha * p)
            if np.isfinite(f_new) and f_new <= f + 1e-4 * alpha * slope:
                break
            alpha *= 0.5
        else:
            raise NotConverged("line search failed")
        x_new = x + alpha * p
        g_new = -target.grad_log_density(x_new)
        s = x_new - x
        y = g_new - g
        sy = float(s @ y)
        if sy > 1e-10:
            rho = 1.0 / sy
            Hy = H @ y
            H = H - rho * (np.outer(s, Hy) + np.outer(Hy, s)) + rho * (
                rho * float(y @ Hy) + 1.0
            ) * np.outer(s, s)
        x, f, g = x_new, f_new, g_new
    raise NotConverged(f"no convergence within {max_iter} iterations")


def _make_mode_info(target: TargetDensity, mu: np.ndarray) -> ModeInfo:
    neg_hess = -target.hessian_log_density(mu)
    try:
        prec_chol = cholesky(neg_hess)
    except NotPositiveDefinite as exc:
        raise NotAMinimum(str(exc)) from exc
    cov = np.linalg.inv(neg_hess)
    cov = 0.5 * (cov + cov.T)
    return ModeInfo(
        location=mu,
        covariance=cov,
        chol=cholesky(cov),
        log_density=target.log_density(mu),
    )


def exploration_step(
    batch: np.ndarray,
    atlas: ModeAtlas,
    target: TargetDensity,
    thr: float,
    on_failure=None,
) -> tuple[ModeAtlas, bool]:
    """Run the mode search from each batch point; append deduplicated new modes.

    Candidates are processed sequentially, each tested against the atlas as
    grown so far. Optimizer failures are skipped (reported to ``on_failure``
    when given). Weights are recomputed once at the end if anything changed.
    Mode search always runs on the untempered density.
    """
    atlas = atlas.copy()
    new_found = False
    for point in np.atleast_2d(batch):
        try:
            candidate = find_mode(target, point)
        except (NotConverged, NotAMinimum):
            if on_failure is not None:
                on_failure()
            continue
        if atlas.m == 0 or min(
            mode_distance(candidate, known, target.d) for known in atlas.modes
        ) > thr:
            atlas.append(candidate)
            new_found = True
    if new_found:
        atlas.weights = recompute_weights(atlas)
    return atlas, new_found
