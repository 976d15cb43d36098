"""Particle-evolution kernels and orchestrators.

Kernels: unadjusted Langevin step, birth-death adjustment, mixture-proposal
Metropolis-Hastings step. Orchestrators: the full two-level scheme (bdec),
Langevin with birth-death only (bdls), the scheme without birth-death (lec),
and plain Langevin (ula).

Randomness layout (reproducible independent of worker count): each particle
slot owns one seeded stream, used for its Langevin noise and MH draws; one
dedicated stream resolves birth-death kills/duplications; one orchestrator
stream draws exploration batches.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .gaussian import kde_log_density_many, mixture_logpdf_many
from .modes import ModeAtlas, exploration_step, default_threshold
from .targets import TargetDensity

ALGORITHMS = ("bdec", "bdls", "lec", "ula")

_EXPLORE_STREAM_KEY = 0xEC
_MAX_LANGEVIN_RETRIES = 10


class EmptyAtlas(ValueError):
    """Mixture-proposal MH requires at least one known mode."""


@dataclass
class Ensemble:
    """Particle positions plus the random streams that drive them."""

    positions: np.ndarray  # (N, d)
    streams: list[np.random.Generator]
    resolution_stream: np.random.Generator
    t: int = 0  # update counter

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def d(self) -> int:
        return self.positions.shape[1]

    @classmethod
    def create(cls, positions: np.ndarray, seed_seq: np.random.SeedSequence) -> "Ensemble":
        """Spawn one stream per particle index, plus the resolution stream."""
        positions = np.atleast_2d(np.asarray(positions, dtype=float))
        children = seed_seq.spawn(positions.shape[0] + 1)
        return cls(
            positions=positions.copy(),
            streams=[np.random.default_rng(c) for c in children[:-1]],
            resolution_stream=np.random.default_rng(children[-1]),
        )


@dataclass
class SamplerConfig:
    """All tunables of one sampling run."""

    algorithm: str = "bdec"
    dt: float = 0.005  # time step
    h: float = 0.05  # kernel bandwidth
    beta_hot: float = 0.05  # tempered inverse temperature
    n_particles: int = 2000  # N, target level
    n_tempered: int = 2000  # N-hat, tempered level
    iterations: int = 50  # J
    moves_per_iteration: int = 6  # T, within-temperature moves
    batch_size: int = 12  # B, exploration batch
    threshold: float | None = None  # thr; default_threshold(d) when None
    langevin_in_insertion: bool = False  # prepend a Langevin step in MH iterations
    seed: int = 0
    bd_rate_scale: float = 1.0  # test hook; 0 disables birth-death probabilities

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if not self.h > 0:
            raise ValueError("h must be > 0")
        if not 0 < self.beta_hot <= 1:
            raise ValueError("beta_hot must be in (0, 1]")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.moves_per_iteration < 1:
            raise ValueError("moves_per_iteration must be >= 1")
        if self.n_particles < 1:
            raise ValueError("n_particles must be >= 1")
        if self.n_tempered < 1:
            raise ValueError("n_tempered must be >= 1")
        if self.batch_size > self.n_tempered:
            raise ValueError("batch_size must be <= n_tempered")
        if self.threshold is not None and self.threshold <= 0:
            raise ValueError("threshold must be > 0")


@dataclass
class UpdateEvent:
    """Snapshot handed to metric hooks after each target-level update."""

    iteration: int  # 1-based iteration j
    update: int  # global update index of X, 1-based
    ensemble: Ensemble
    atlas: ModeAtlas | None
    acceptance_rate: float | None  # None outside insertion iterations
    new_found: bool
    explore_failures: int  # cumulative skipped optimizations


def ula_step(
    ens: Ensemble,
    target: TargetDensity,
    beta: float,
    dt: float,
    noise_scale: float = 1.0,
) -> Ensemble:
    """One unadjusted Langevin update of every particle.

    x' = x - dt * beta * grad V(x) + sqrt(2 dt) * eps, eps ~ N(0, I) from the
    particle's own stream. A particle whose new state is non-finite (or lands
    outside the support) retries with fresh noise up to 10 times, then stays.
    """
    X = ens.positions
    drift = X + dt * beta * target.grad_many(X)  # grad V = -grad log pi
    scale = np.sqrt(2.0 * dt) * noise_scale
    eps = np.empty_like(X)
    for i in range(ens.n):
        eps[i] = ens.streams[i].standard_normal(ens.d)
    new = drift + scale * eps
    bad = ~np.isfinite(target.log_density_many(new))
    bad |= ~np.isfinite(new).all(axis=1)
    for i in np.nonzero(bad)[0]:
        for _ in range(_MAX_LANGEVIN_RETRIES):
            candidate = drift[i] + scale * ens.streams[i].standard_normal(ens.d)
            if np.isfinite(candidate).all() and np.isfinite(target.log_density(candidate)):
                new[i] = candidate
                break
        else:
            new[i] = X[i]
    ens.positions = new
    ens.t += 1
    return ens


def birth_death_step(
    ens: Ensemble,
    target: TargetDensity,
    h: float,
    dt: float,
    rate_scale: float = 1.0,
) -> Ensemble:
    """Kill/duplicate adjustment with rates from the pre-step snapshot.

    r_i = log((1/N) sum_l K(x_i - x_l)) + V(x_i), self-term included. Kills
    and duplications are applied sequentially in index order against the
    evolving particle list; the particle count is preserved exactly.
    """
    n = ens.n
    if n < 2:
        raise ValueError("birth-death needs at least 2 particles")
    X = ens.positions
    r = kde_log_density_many(X, h, X) - target.log_density_many(X)
    r_bar = float(np.mean(r))
    positions = X.copy()
    rng = ens.resolution_stream
    for i in range(n):
        gap = (r[i] - r_bar) * rate_scale
        u = rng.random()
        prob = -np.expm1(-abs(gap) * dt)
        if not (u < prob):  # also skips non-finite rates (prob = nan)
            continue
        j = int(rng.integers(n - 1))
        if j >= i:
            j += 1
        if gap > 0:
            # kill x_i, duplicate a uniformly chosen other particle
            positions[i] = positions[j]
        else:
            # duplicate x_i over a uniformly chosen other particle
            positions[j] = positions[i]
    ens.positions = positions
    return ens


def mh_log_acceptance(target: TargetDensity, gm, x: np.ndarray, z: np.ndarray) -> float:
    """log A(z <- x) = min{0, log pi(z) + log rho-hat(x) - log pi(x) - log rho-hat(z)}."""
    log_ratio = (
        target.log_density(z)
        + mixture_logpdf_many(gm, np.atleast_2d(x))[0]
        - target.log_density(x)
        - mixture_logpdf_many(gm, np.atleast_2d(z))[0]
    )
    if np.isnan(log_ratio):
        return -np.inf
    return float(min(0.0, log_ratio))


def mh_mixture_step(
    ens: Ensemble, target: TargetDensity, atlas: ModeAtlas
) -> tuple[Ensemble, float]:
    """Independence MH with the atlas mixture as proposal, in log-space.

    Per particle: z ~ rho-hat, accepted with probability
    min{1, exp(log pi(z) + log rho-hat(x) - log pi(x) - log rho-hat(z))},
    which satisfies pi(x) rho-hat(z) A(z<-x) = pi(z) rho-hat(x) A(x<-z).
    Returns the empirical acceptance fraction.
    """
    if atlas.m == 0:
        raise EmptyAtlas("mixture-proposal MH needs a nonempty atlas")
    gm = atlas.mixture()
    X = ens.positions
    n, d = X.shape
    Z = np.empty_like(X)
    u_acc = np.empty(n)
    cum = gm.cum_weights
    for i in range(n):
        rng = ens.streams[i]
        c = min(int(np.searchsorted(cum, rng.random(), side="right")), gm.m - 1)
        Z[i] = gm.means[c] + gm.chols[c].matvec(rng.standard_normal(d))
        u_acc[i] = rng.random()
    log_ratio = (
        target.log_density_many(Z)
        + mixture_logpdf_many(gm, X)
        - target.log_density_many(X)
        - mixture_logpdf_many(gm, Z)
    )
    # -inf log pi(z) gives log_ratio -inf (or nan) -> never accepted
    with np.errstate(invalid="ignore"):
        log_A = np.minimum(0.0, log_ratio)
        accept = np.log(u_acc) < log_A
    accept &= ~np.isnan(log_ratio)
    new = X.copy()
    new[accept] = Z[accept]
    ens.positions = new
    ens.t += 1
    return ens, float(np.mean(accept))


@dataclass
class RunResult:
    ensemble: Ensemble
    atlas: ModeAtlas | None
    tempered: Ensemble | None


def run_bdec(
    config: SamplerConfig,
    target: TargetDensity,
    init_X: Ensemble,
    init_Y: Ensemble,
    init_atlas: ModeAtlas | None = None,
    hooks: list | None = None,
) -> RunResult:
    """Full scheme: tempered exploration chain + mode atlas + MH insertion +
    birth-death accelerated Langevin at the target level."""
    return _run_two_level(config, target, init_X, init_Y, init_atlas, hooks,
                          use_bd=config.algorithm != "lec")


def run_baseline(
    config: SamplerConfig,
    target: TargetDensity,
    init_X: Ensemble,
    init_Y: Ensemble | None = None,
    init_atlas: ModeAtlas | None = None,
    hooks: list | None = None,
) -> RunResult:
    """Dispatch for the bdls / lec / ula baselines."""
    config.validate()
    if config.algorithm == "lec":
        if init_Y is None:
            raise ValueError("lec needs a tempered ensemble")
        return _run_two_level(config, target, init_X, init_Y, init_atlas, hooks, use_bd=False)
    if config.algorithm == "bdls":
        return _run_single_level(config, target, init_X, hooks, use_bd=True)
    if config.algorithm == "ula":
        return _run_single_level(config, target, init_X, hooks, use_bd=False)
    raise ValueError(f"not a baseline algorithm: {config.algorithm!r}")


def run(config: SamplerConfig, target, init_X, init_Y=None, init_atlas=None, hooks=None) -> RunResult:
    """Run whichever algorithm the config names."""
    if config.algorithm == "bdec":
        return run_bdec(config, target, init_X, init_Y, init_atlas, hooks)
    return run_baseline(config, target, init_X, init_Y, init_atlas, hooks)


def _fire(hooks, event: UpdateEvent) -> None:
    for hook in hooks or ():
        hook(event)


def _run_two_level(config, target, X, Y, atlas, hooks, use_bd: bool) -> RunResult:
    config.validate()
    thr = config.threshold if config.threshold is not None else default_threshold(target.d)
    atlas = atlas.copy() if atlas is not None else ModeAtlas()
    explore_rng = np.random.default_rng(
        np.random.SeedSequence(entropy=config.seed, spawn_key=(_EXPLORE_STREAM_KEY,))
    )
    failures = 0

    def count_failure():
        nonlocal failures
        failures += 1

    update = 0
    for j in range(1, config.iterations + 1):
        for _ in range(config.moves_per_iteration):
            ula_step(Y, target, beta=config.beta_hot, dt=config.dt)
        batch_idx = explore_rng.choice(Y.n, size=config.batch_size, replace=False)
        atlas, new_found = exploration_step(
            Y.positions[batch_idx], atlas, target, thr, on_failure=count_failure
        )
        for _ in range(config.moves_per_iteration):
            acc = None
            if new_found:
                if config.langevin_in_insertion:
                    ula_step(X, target, beta=1.0, dt=config.dt)
                X, acc = mh_mixture_step(X, target, atlas)
            else:
                ula_step(X, target, beta=1.0, dt=config.dt)
            if use_bd:
                birth_death_step(X, target, config.h, config.dt, rate_scale=config.bd_rate_scale)
            update += 1
            _fire(hooks, UpdateEvent(j, update, X, atlas, acc, new_found, failures))
    return RunResult(ensemble=X, atlas=atlas, tempered=Y)


def _run_single_level(config, target, X, hooks, use_bd: bool) -> RunResult:
    config.validate()
    update = 0
    for j in range(1, config.iterations + 1):
        for _ in range(config.moves_per_iteration):
            ula_step(X, target, beta=1.0, dt=config.dt)
            if use_bd:
                birth_death_step(X, target, config.h, config.dt, rate_scale=config.bd_rate_scale)
            update += 1
            _fire(hooks, UpdateEvent(j, update, X, None, None, False, 0))
    return RunResult(ensemble=X, atlas=None, tempered=None)
