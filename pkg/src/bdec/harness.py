"""Configuration, seeding, replication, and file output for benchmark runs."""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from . import diagnostics
from .diagnostics import RunMetrics
from .modes import ModeAtlas
from .samplers import Ensemble, SamplerConfig, run
from .targets import (
    GaussianMixtureTarget,
    GaussianTarget,
    SkewProductTarget,
    TargetDensity,
    make_target,
)

# spawn keys for the per-replicate stream tree; documented so runs are
# reproducible independent of parallelism
_KEY_X_STREAMS = 1
_KEY_Y_STREAMS = 2
_KEY_X_INIT = 3
_KEY_Y_INIT = 4
_KEY_REFERENCE = 5

KNOWN_METRICS = ("x", "y", "abs_x", "quad", "Z", "mode_count", "acceptance_rate",
                 "marginal_kl coordinate=0", "chi2")

_SAMPLER_KEYS = {
    "algorithm", "dt", "h", "beta_hot", "n_particles", "n_tempered",
    "iterations", "moves_per_iteration", "batch_size", "threshold",
    "langevin_in_insertion",
}


class ConfigError(ValueError):
    """Configuration failed schema validation; the message names the field."""


@dataclass
class ExperimentConfig:
    """One experiment: target, sampler tunables, metrics, replication."""

    target: str = "example1-gmm"
    target_params: dict = field(default_factory=dict)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    metrics: list = field(default_factory=lambda: ["y", "mode_count"])
    replicates: int = 10
    seed: int = 0
    reference_samples: int = 20000
    metrics_every: int = 1
    grid_metrics_every: int | None = None  # defaults to moves_per_iteration
    kl_grid: tuple | None = None  # (lo, hi, n_points)
    chi2_grid: tuple | None = None  # ((lo, hi, n), ...) per dimension
    snapshot_every: int | None = None  # iterations between ensemble dumps
    out_dir: str | None = None
    workers: int = 1

    def validate(self) -> None:
        try:
            self.sampler.validate()
        except ValueError as exc:
            raise ConfigError(f"sampler: {exc}") from exc
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if self.reference_samples < 1:
            raise ConfigError("reference_samples must be >= 1")
        if self.metrics_every < 1:
            raise ConfigError("metrics_every must be >= 1")
        if self.grid_metrics_every is not None and self.grid_metrics_every < 1:
            raise ConfigError("grid_metrics_every must be >= 1")
        if self.snapshot_every is not None and self.snapshot_every < 1:
            raise ConfigError("snapshot_every must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        for metric in self.metrics:
            if metric not in KNOWN_METRICS:
                raise ConfigError(f"metrics: unknown metric {metric!r}")
        # building the target validates its parameters
        try:
            make_target(self.target, self.target_params)
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"target: {exc}") from exc

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["sampler"] = asdict(self.sampler)
        doc["sampler"].pop("seed", None)  # run seed lives at the top level
        doc["sampler"].pop("bd_rate_scale", None)  # test hook, not configuration
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        sampler_doc = dict(doc.pop("sampler", {}))
        unknown = set(sampler_doc) - _SAMPLER_KEYS
        if unknown:
            raise ConfigError(f"sampler: unknown keys {sorted(unknown)}")
        known = {f.name for f in cls.__dataclass_fields__.values()} - {"sampler"}
        bad = set(doc) - known
        if bad:
            raise ConfigError(f"unknown keys {sorted(bad)}")
        for key in ("kl_grid", "chi2_grid"):
            if doc.get(key) is not None:
                doc[key] = _as_grid(doc[key], key)
        cfg = cls(sampler=SamplerConfig(**sampler_doc), **doc)
        cfg.sampler.seed = cfg.seed
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))


def _as_grid(value, key):
    value = tuple(tuple(v) if isinstance(v, (list, tuple)) else v for v in value)
    if key == "kl_grid":
        if len(value) != 3:
            raise ConfigError("kl_grid must be [lo, hi, n_points]")
        return (float(value[0]), float(value[1]), int(value[2]))
    return tuple((float(lo), float(hi), int(n)) for lo, hi, n in value)


def load_config(path: str) -> ExperimentConfig:
    with open(path) as fh:
        return ExperimentConfig.from_json(fh.read())


# --- presets -----------------------------------------------------------------

def _example1_preset(algorithm: str) -> ExperimentConfig:
    return ExperimentConfig(
        target="example1-gmm",
        sampler=SamplerConfig(
            algorithm=algorithm, dt=0.005, h=0.05, beta_hot=0.05,
            n_particles=2000, n_tempered=2000, iterations=50,
            moves_per_iteration=6, batch_size=12,
        ),
        metrics=["abs_x", "y", "quad", "Z", "mode_count", "acceptance_rate"],
        replicates=10,
    )


def _sur_preset(algorithm: str) -> ExperimentConfig:
    return ExperimentConfig(
        target="sur2d",
        sampler=SamplerConfig(
            algorithm=algorithm, dt=0.005, h=0.05, beta_hot=0.05,
            n_particles=1000, n_tempered=1000, iterations=30,
            moves_per_iteration=5, batch_size=12,
        ),
        metrics=["x", "y", "quad", "mode_count", "acceptance_rate"],
        replicates=10,
    )


def _skew_preset(algorithm: str) -> ExperimentConfig:
    return ExperimentConfig(
        target="skew20d",
        sampler=SamplerConfig(
            algorithm=algorithm, dt=0.001, h=0.05, beta_hot=0.00005,
            n_particles=1000, n_tempered=1000, iterations=30,
            moves_per_iteration=3, batch_size=10,
        ),
        metrics=["marginal_kl coordinate=0", "mode_count", "acceptance_rate"],
        replicates=10,
    )


PRESETS = {
    "example1-bdec": lambda: _example1_preset("bdec"),
    "example1-bdls": lambda: _example1_preset("bdls"),
    "example1-lec": lambda: _example1_preset("lec"),
    "sur2d-bdec": lambda: _sur_preset("bdec"),
    "sur2d-lec": lambda: _sur_preset("lec"),
    "skew20d-bdec": lambda: _skew_preset("bdec"),
    "skew20d-bdls": lambda: _skew_preset("bdls"),
    "skew20d-lec": lambda: _skew_preset("lec"),
}


def preset(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}")
    return PRESETS[name]()


# --- metric evaluation -------------------------------------------------------

_EXPECTATIONS = {
    "x": lambda X: X[:, 0],
    "y": lambda X: X[:, 1],
    "abs_x": lambda X: np.abs(X[:, 0]),
    "quad": lambda X: X[:, 0] ** 2 / 3.0 + X[:, 1] ** 2 / 5.0,
}


def default_kl_grid(target: TargetDensity) -> tuple[float, float, int]:
    if isinstance(target, SkewProductTarget):
        return (-32.0, 32.0, 3201)
    return (-8.0, 8.0, 2001)


def default_chi2_grid(target: TargetDensity) -> tuple:
    if isinstance(target, GaussianMixtureTarget):
        means = target.means
        spans = np.sqrt(np.max([np.diag(c) for c in target.covs], axis=0))
        lo = means.min(axis=0) - 8.0 * spans
        hi = means.max(axis=0) + 8.0 * spans
        return tuple((float(l), float(h), 501) for l, h in zip(lo, hi))
    return tuple((-8.0, 8.0, 501) for _ in range(target.d))


def marginal_density(target: TargetDensity, coordinate: int):
    """Normalized 1D marginal of one coordinate, for KL diagnostics."""
    if isinstance(target, SkewProductTarget):
        return target.marginal_pdf(coordinate)
    if isinstance(target, GaussianTarget):
        mu = target.mu[coordinate]
        s2 = target.sigma[coordinate, coordinate]
        return lambda u: np.exp(-0.5 * (u - mu) ** 2 / s2) / np.sqrt(2 * np.pi * s2)
    if isinstance(target, GaussianMixtureTarget):
        mus = target.means[:, coordinate]
        s2s = np.array([c[coordinate, coordinate] for c in target.covs])
        w = target.weights

        def pdf(u):
            u = np.asarray(u, dtype=float)[..., None]
            return np.sum(
                w * np.exp(-0.5 * (u - mus) ** 2 / s2s) / np.sqrt(2 * np.pi * s2s),
                axis=-1,
            )

        return pdf
    raise ValueError("no analytic marginal available for this target")


class _MetricRecorder:
    """Metric hook for one replicate; cheap metrics on one cadence, grid
    metrics (marginal KL, chi-square) on a coarser one."""

    def __init__(self, config: ExperimentConfig, target, reference, replicate):
        self.config = config
        self.target = target
        self.reference = reference
        self.metrics = RunMetrics(replicate=replicate)
        self.progress = []
        cadence = config.grid_metrics_every
        self.grid_every = cadence if cadence is not None else config.sampler.moves_per_iteration
        self.total_updates = config.sampler.iterations * config.sampler.moves_per_iteration
        self.kl_grid = config.kl_grid or default_kl_grid(target)
        self.chi2_grid = config.chi2_grid or (
            default_chi2_grid(target) if target.d <= 2 else None
        )
        self._marginals = {}

    def record(self, iteration, update, positions, atlas, acceptance_rate):
        last = update == self.total_updates
        cheap = update % self.config.metrics_every == 0 or last or update == 0
        grid = update % self.grid_every == 0 or last or update == 0
        for metric in self.config.metrics:
            if metric in _EXPECTATIONS and cheap:
                self.metrics.add(
                    iteration, update, metric,
                    diagnostics.estimate_expectation(positions, _EXPECTATIONS[metric]),
                )
            elif metric == "mode_count" and cheap:
                self.metrics.add(iteration, update, metric, 0 if atlas is None else atlas.m)
            elif metric == "acceptance_rate" and cheap and acceptance_rate is not None:
                self.metrics.add(iteration, update, metric, acceptance_rate)
            elif metric == "Z" and cheap and self.reference is not None:
                self.metrics.add(
                    iteration, update, metric,
                    diagnostics.estimate_Z(positions, self.reference, self.config.sampler.h),
                )
            elif metric == "marginal_kl coordinate=0" and grid:
                self.metrics.add(
                    iteration, update, metric,
                    diagnostics.marginal_kl(
                        positions, 0, self._marginal(0),
                        self.config.sampler.h, self.kl_grid,
                    ),
                )
            elif metric == "chi2" and grid and self.chi2_grid is not None:
                self.metrics.add(
                    iteration, update, metric,
                    diagnostics.chi2_divergence_grid(
                        positions, self.target, self.config.sampler.h, self.chi2_grid
                    ),
                )

    def _marginal(self, coordinate):
        if coordinate not in self._marginals:
            self._marginals[coordinate] = marginal_density(self.target, coordinate)
        return self._marginals[coordinate]

    def __call__(self, event):
        self.record(
            event.iteration, event.update, event.ensemble.positions,
            event.atlas, event.acceptance_rate,
        )
        self.progress.append(
            {
                "iteration": event.iteration,
                "update": event.update,
                "modes_found": 0 if event.atlas is None else event.atlas.m,
                "acceptance_rate": event.acceptance_rate,
            }
        )


@dataclass
class ReplicateResult:
    replicate: int
    seed: int
    metrics: RunMetrics
    final_positions: np.ndarray
    atlas: ModeAtlas | None
    progress: list
    snapshots: dict  # iteration -> positions


def run_replicate(
    config: ExperimentConfig,
    replicate: int,
    target: TargetDensity | None = None,
    initial_atlas: ModeAtlas | None = None,
) -> ReplicateResult:
    """Run one replicate with seed master_seed + replicate index."""
    if target is None:
        target = make_target(config.target, config.target_params)
    rep_seed = config.seed + replicate
    sampler = SamplerConfig(**{**asdict(config.sampler), "seed": rep_seed})

    def rng(key):
        return np.random.default_rng(np.random.SeedSequence(entropy=rep_seed, spawn_key=(key,)))

    X = Ensemble.create(
        target.sample_initial(rng(_KEY_X_INIT), sampler.n_particles),
        np.random.SeedSequence(entropy=rep_seed, spawn_key=(_KEY_X_STREAMS,)),
    )
    Y = None
    if sampler.algorithm in ("bdec", "lec"):
        Y = Ensemble.create(
            target.sample_initial(rng(_KEY_Y_INIT), sampler.n_tempered),
            np.random.SeedSequence(entropy=rep_seed, spawn_key=(_KEY_Y_STREAMS,)),
        )
    reference = None
    if "Z" in config.metrics and target.has_exact_sampler:
        reference = target.sample_exact(rng(_KEY_REFERENCE), config.reference_samples)

    recorder = _MetricRecorder(config, target, reference, replicate)
    recorder.record(0, 0, X.positions, initial_atlas, None)

    snapshots = {}
    hooks = [recorder]
    if config.snapshot_every is not None:
        T = sampler.moves_per_iteration
        every = config.snapshot_every

        def snapshot_hook(event):
            if event.update % T == 0 and (event.iteration % every == 0):
                snapshots[event.iteration] = event.ensemble.positions.copy()

        hooks.append(snapshot_hook)

    result = run(sampler, target, X, Y, initial_atlas, hooks)
    return ReplicateResult(
        replicate=replicate,
        seed=rep_seed,
        metrics=recorder.metrics,
        final_positions=result.ensemble.positions.copy(),
        atlas=result.atlas,
        progress=recorder.progress,
        snapshots=snapshots,
    )


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    replicates: list
    summary: dict

    def mean_final(self, metric: str) -> float:
        return float(np.mean([rep.metrics.last(metric) for rep in self.replicates]))


def summarize(replicates: list) -> dict:
    """Across-replicate mean and standard deviation per (update, metric)."""
    by_metric = {}
    for rep in replicates:
        for iteration, update, metric, value in rep.metrics.records:
            by_metric.setdefault(metric, {}).setdefault(update, []).append(value)
    summary = {}
    for metric, per_update in sorted(by_metric.items()):
        updates = sorted(per_update)
        summary[metric] = {
            "updates": updates,
            "mean": [float(np.mean(per_update[u])) for u in updates],
            "std": [float(np.std(per_update[u])) for u in updates],
        }
    return summary


def run_experiment(
    config: ExperimentConfig, initial_atlas: ModeAtlas | None = None
) -> ExperimentResult:
    """Run all replicates (optionally in parallel) and write output files."""
    config.validate()
    target = make_target(config.target, config.target_params)
    indices = range(config.replicates)
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            replicates = list(
                pool.map(lambda r: run_replicate(config, r, target, initial_atlas), indices)
            )
    else:
        replicates = [run_replicate(config, r, target, initial_atlas) for r in indices]
    summary = summarize(replicates)
    if config.out_dir is not None:
        _write_outputs(config, replicates, summary)
    return ExperimentResult(config=config, replicates=replicates, summary=summary)


def _write_outputs(config, replicates, summary) -> None:
    out = config.out_dir
    os.makedirs(out, exist_ok=True)
    for rep in replicates:
        rep.metrics.write_csv(os.path.join(out, f"metrics_rep{rep.replicate}.csv"))
        with open(os.path.join(out, f"progress_rep{rep.replicate}.jsonl"), "w") as fh:
            for record in rep.progress:
                fh.write(json.dumps(record) + "\n")
        if rep.atlas is not None:
            with open(os.path.join(out, f"atlas_final_rep{rep.replicate}.json"), "w") as fh:
                fh.write(rep.atlas.to_json())
        for iteration, positions in sorted(rep.snapshots.items()):
            if config.replicates == 1:
                name = f"ensemble_iter{iteration}.csv"
            else:
                name = f"ensemble_rep{rep.replicate}_iter{iteration}.csv"
            np.savetxt(os.path.join(out, name), positions, delimiter=",")
    first_atlas = replicates[0].atlas
    if first_atlas is not None:
        with open(os.path.join(out, "atlas_final.json"), "w") as fh:
            fh.write(first_atlas.to_json())
    with open(os.path.join(out, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
