"""Experiment configuration, (eta, seed) sweeps and CSV emission."""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .bsrs import ShapeConfig, self_shaped_solve
from .mdp import GridworldSpec, TabularMdp, build_gridworld
from .sampler import QLearnConfig, make_rng, q_learn

SWEEP_HEADER = ["eta", "seed", "steps", "converged", "diverged", "final_residual", "wall_ms"]
SUMMARY_HEADER = ["eta", "runs", "converged", "diverged", "mean_steps", "std_steps"]
CURVES_HEADER = ["eta", "seed", "episode", "return", "length"]

MODES = ("ExactSolve", "QLearn")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    environment: GridworldSpec
    etas: list
    seeds: list
    tolerance: float = 1e-6
    max_steps: int = 10_000
    mode: str = "ExactSolve"
    qlearn: dict = field(default_factory=dict)
    output_dir: str = "results"
    # None: online potential; k: potential refreshed every k applications/updates
    lag: Optional[int] = None

    def validate(self):
        if not self.etas:
            raise ConfigError("etas must be a non-empty list")
        if not self.seeds:
            raise ConfigError("seeds must be a non-empty list")
        if not self.tolerance > 0:
            raise ConfigError("tolerance must be positive")
        if self.max_steps < 0:
            raise ConfigError("max_steps must be non-negative")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if any(not np.isfinite(e) for e in self.etas):
            raise ConfigError("etas must be finite")
        if self.lag is not None and self.lag < 1:
            raise ConfigError("lagged potential interval must be >= 1")
        try:
            self.environment.validate()
            self.qlearn_config(0.0, 0)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def qlearn_config(self, eta, seed) -> QLearnConfig:
        overrides = dict(self.qlearn)
        if "epsilon_schedule" in overrides:
            overrides["epsilon_schedule"] = tuple(overrides["epsilon_schedule"])
        return QLearnConfig(shape=ShapeConfig(eta, self.lag), seed=seed, **overrides)


_TOP_KEYS = {"environment", "etas", "seeds", "tolerance", "max_steps", "mode", "qlearn", "output_dir", "potential_source"}
_ENV_KEYS = {"width", "height", "goal", "goal_reward", "slip_prob", "gamma", "terminal_goal"}
_QLEARN_KEYS = {"alpha", "epsilon_schedule", "total_steps", "max_episode_steps"}


def _parse_lag(source):
    if source is None or source == "online":
        return None
    if isinstance(source, dict) and set(source) == {"lagged"}:
        return int(source["lagged"])
    raise ConfigError('potential_source must be "online" or {"lagged": k}')


def parse_config(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        env = data["environment"]
        if set(env) - _ENV_KEYS:
            raise ConfigError(f"unknown environment keys: {sorted(set(env) - _ENV_KEYS)}")
        qlearn = data.get("qlearn") or {}
        if set(qlearn) - _QLEARN_KEYS:
            raise ConfigError(f"unknown qlearn keys: {sorted(set(qlearn) - _QLEARN_KEYS)}")
        cfg = ExperimentConfig(
            environment=GridworldSpec(**env),
            etas=[float(e) for e in data["etas"]],
            seeds=[int(s) for s in data["seeds"]],
            tolerance=float(data.get("tolerance", 1e-6)),
            max_steps=int(data.get("max_steps", 10_000)),
            mode=data.get("mode", "ExactSolve"),
            qlearn=dict(qlearn),
            output_dir=data.get("output_dir", "results"),
            lag=_parse_lag(data.get("potential_source")),
        )
    except KeyError as exc:
        raise ConfigError(f"missing config field {exc}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    cfg.validate()
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(data)


@dataclass(frozen=True)
class SweepRow:
    eta: float
    seed: int
    steps: int
    converged: bool
    diverged: bool
    final_residual: float
    wall_ms: float


def initial_q(mdp: TabularMdp, seed: int) -> np.ndarray:
    """Uniform[-1, 1] table; the same seed gives the same table for every eta."""
    return make_rng(seed).uniform(-1.0, 1.0, (mdp.n_states, mdp.n_actions))


def solve_cell(mdp, eta, seed, tol, max_steps, lag=None) -> SweepRow:
    t0 = time.perf_counter()
    _q, report = self_shaped_solve(mdp, initial_q(mdp, seed), eta, tol, max_steps, lag=lag)
    wall = (time.perf_counter() - t0) * 1e3
    return SweepRow(eta, seed, report.steps, report.converged, report.diverged, report.final_residual, wall)


def _solve_cell_args(args):
    return solve_cell(*args)


def _map(fn, tasks, jobs):
    if jobs is None:
        jobs = os.cpu_count() or 1
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


def run_solve_sweep(mdp, etas, seeds, tol=1e-6, max_steps=10_000, lag=None, jobs=1) -> list:
    """Self-shaped solves for every (eta, seed); rows come back sorted by (eta, seed)."""
    tasks = [(mdp, float(e), int(s), tol, max_steps, lag) for e in etas for s in seeds]
    rows = _map(_solve_cell_args, tasks, jobs)
    return sorted(rows, key=lambda r: (r.eta, r.seed))


@dataclass(frozen=True)
class SummaryRow:
    eta: float
    runs: int
    converged: int
    diverged: int
    mean_steps: float
    std_steps: float

    @property
    def all_converged(self) -> bool:
        return self.converged == self.runs


def summarize(rows) -> list:
    """Per-eta step statistics over the converged runs."""
    by_eta = {}
    for row in rows:
        by_eta.setdefault(row.eta, []).append(row)
    out = []
    for eta in sorted(by_eta):
        group = by_eta[eta]
        steps = np.array([r.steps for r in group if r.converged], dtype=float)
        mean = float(steps.mean()) if steps.size else float("nan")
        std = float(steps.std()) if steps.size else float("nan")
        out.append(
            SummaryRow(eta, len(group), int(steps.size), sum(r.diverged for r in group), mean, std)
        )
    return out


def best_eta(summary) -> Optional[SummaryRow]:
    """Row with the fewest mean steps among etas where every run converged."""
    ok = [row for row in summary if row.all_converged]
    return min(ok, key=lambda row: (row.mean_steps, row.eta)) if ok else None


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])


def write_sweep_csv(path, rows, timing=False):
    # Wall time is only recorded on request so reruns stay byte-identical.
    write_csv(
        path,
        SWEEP_HEADER,
        [
            (r.eta, r.seed, r.steps, r.converged, r.diverged, r.final_residual, _fmt(r.wall_ms) if timing else "")
            for r in rows
        ],
    )


def write_summary_csv(path, summary):
    write_csv(path, SUMMARY_HEADER, [(s.eta, s.runs, s.converged, s.diverged, s.mean_steps, s.std_steps) for s in summary])


@dataclass
class CurveRun:
    eta: float
    seed: int
    returns: list
    lengths: list
    diverged: bool


def qlearn_cell(args) -> CurveRun:
    mdp, cfg = args
    _q, log = q_learn(mdp, cfg)
    return CurveRun(cfg.shape.eta, cfg.seed, log.returns, log.lengths, log.diverged)


def run_qlearn_sweep(mdp, config: ExperimentConfig, seeds=None, jobs=1) -> list:
    seeds = config.seeds if seeds is None else seeds
    tasks = [(mdp, config.qlearn_config(float(e), int(s))) for e in config.etas for s in seeds]
    runs = _map(qlearn_cell, tasks, jobs)
    return sorted(runs, key=lambda r: (r.eta, r.seed))


def write_curves_csv(path, runs):
    rows = []
    for run in runs:
        for i, (ret, length) in enumerate(zip(run.returns, run.lengths)):
            rows.append((run.eta, run.seed, i, float(ret), int(length)))
    write_csv(path, CURVES_HEADER, rows)


def mean_curve(runs, total_steps, points=200):
    """Mean return vs environment step, each run held at its latest finished episode."""
    grid = np.linspace(0, total_steps, points)
    curves = []
    for run in runs:
        if not run.returns:
            continue
        ends = np.cumsum(run.lengths)
        idx = np.searchsorted(ends, grid, side="right") - 1
        vals = np.where(idx >= 0, np.asarray(run.returns)[np.clip(idx, 0, None)], np.nan)
        curves.append(vals)
    if not curves:
        return grid, np.full(points, np.nan)
    stacked = np.vstack(curves)
    counts = np.sum(~np.isnan(stacked), axis=0)
    sums = np.nansum(stacked, axis=0)
    return grid, np.divide(sums, counts, out=np.full(points, np.nan), where=counts > 0)


def build_environment(config: ExperimentConfig) -> TabularMdp:
    return build_gridworld(config.environment)


def with_seed_offset(config: ExperimentConfig, offset: int) -> ExperimentConfig:
    return replace(config, seeds=[s + offset for s in config.seeds])
