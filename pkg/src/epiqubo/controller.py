"""Rolling-horizon mobility-ban controller and outcome metrics.

At every step the two-step objective is recompiled from the current state,
minimized, and only the first action of the resulting plan is applied; the
loop then repeats from the advanced state.  Per-step solver seeds derive
from the base seed plus the step index, so a full run is reproducible while
the solver randomness stays decorrelated across steps.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .epinet import (
    EpidemicParams,
    EpidemicState,
    LocationNetwork,
    ModelKind,
    Trajectory,
    invariance_bound,
    simulate,
    step_sis,
    step_sir,
)
from .qubo import build_qubo, to_control
from .solvers import SOLVER_NAMES, SolverConfig, solve

__all__ = [
    "ScenarioConfig",
    "ControlLog",
    "MetricsReport",
    "run_rolling_horizon",
    "run_uncontrolled_baseline",
    "compute_metrics",
]

logger = logging.getLogger(__name__)

BUILDER_NAMES = ("analytic", "numeric")


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to reproduce one controlled run.

    ``lam`` above the network's invariance bound is refused outright unless
    ``force`` is set, in which case states are clamped into [0, n_i] and
    every clamp is logged.
    """

    network: LocationNetwork
    kind: ModelKind
    lam: float
    mu: float
    gamma: float
    steps: int = 30
    solver: str = "exhaustive"
    solver_config: SolverConfig = field(default_factory=SolverConfig)
    builder: str = "analytic"
    seed: int = 0
    force: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ModelKind(self.kind))
        if self.steps < 1:
            raise ValueError("total steps must be at least 1")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")
        if self.solver not in SOLVER_NAMES:
            raise ValueError(f"unknown solver {self.solver!r}; expected one of {SOLVER_NAMES}")
        if self.builder not in BUILDER_NAMES:
            raise ValueError(f"unknown builder {self.builder!r}; expected one of {BUILDER_NAMES}")

    @property
    def params(self) -> EpidemicParams:
        return EpidemicParams(self.kind, self.lam, self.mu)


@dataclass(frozen=True)
class ControlLog:
    """Per-step record of a rolling-horizon run."""

    trajectory: Trajectory
    objectives: np.ndarray
    wall_times: np.ndarray
    evaluations: np.ndarray

    def __post_init__(self) -> None:
        steps = self.trajectory.num_steps
        for name in ("objectives", "wall_times", "evaluations"):
            arr = np.asarray(getattr(self, name))
            if arr.shape != (steps,):
                raise ValueError(f"{name} must have one entry per step")
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class MetricsReport:
    """Controlled-vs-uncontrolled summary.

    ``peak_reduction_pct`` / ``avg_reduction_pct`` are None when the
    corresponding baseline quantity is zero (reduction undefined).
    """

    peak_uncontrolled: float
    peak_controlled: float
    avg_uncontrolled: float
    avg_controlled: float
    peak_reduction_pct: float | None
    avg_reduction_pct: float | None
    per_location_peak_uncontrolled: np.ndarray
    per_location_peak_controlled: np.ndarray
    solver_time: dict[str, float]

    def as_dict(self) -> dict:
        """JSON-ready view; solver timing is intentionally not included here."""
        return {
            "peak_uncontrolled": self.peak_uncontrolled,
            "peak_controlled": self.peak_controlled,
            "avg_uncontrolled": self.avg_uncontrolled,
            "avg_controlled": self.avg_controlled,
            "peak_reduction_pct": self.peak_reduction_pct,
            "avg_reduction_pct": self.avg_reduction_pct,
            "per_location_peak_uncontrolled": self.per_location_peak_uncontrolled.tolist(),
            "per_location_peak_controlled": self.per_location_peak_controlled.tolist(),
        }


def _check_rate(cfg: ScenarioConfig) -> None:
    bound = invariance_bound(cfg.network)
    if cfg.lam > bound:
        if not cfg.force:
            raise ValueError(
                f"infection rate {cfg.lam} exceeds the invariance bound {bound}; "
                "states could leave [0, n_i] (pass force=True to clamp instead)"
            )
        logger.warning(
            "infection rate %s exceeds the invariance bound %s; states will be clamped",
            cfg.lam,
            bound,
        )


def _advance(
    state: EpidemicState,
    u: np.ndarray,
    net: LocationNetwork,
    params: EpidemicParams,
    clamp: bool,
    step_index: int,
) -> EpidemicState:
    step = step_sis if params.kind is ModelKind.SIS else step_sir
    nxt = step(state, net, params, u)
    if not clamp:
        return nxt
    x = np.clip(nxt.infected, 0.0, net.populations)
    clamped = int(np.count_nonzero(x != nxt.infected))
    y = nxt.removed
    if y is not None:
        y = np.clip(y, 0.0, net.populations - x)
        clamped += int(np.count_nonzero(y != nxt.removed))
    if clamped:
        logger.warning("step %d: clamped %d state entries into [0, n_i]", step_index, clamped)
    return EpidemicState(x, y)


def run_rolling_horizon(cfg: ScenarioConfig, state0: EpidemicState) -> ControlLog:
    """Closed-loop run: recompile, minimize, apply one step, repeat."""
    _check_rate(cfg)
    net = cfg.network
    params = cfg.params
    m = net.m
    controls = np.zeros((cfg.steps, m), dtype=np.int8)
    objectives = np.zeros(cfg.steps)
    wall_times = np.zeros(cfg.steps)
    evaluations = np.zeros(cfg.steps, dtype=np.int64)
    xs = np.empty((cfg.steps + 1, m))
    ys = np.empty((cfg.steps + 1, m)) if cfg.kind is ModelKind.SIR else None
    xs[0] = state0.infected
    if ys is not None:
        if state0.removed is None:
            raise ValueError("SIR scenario requires a removed compartment in the state")
        ys[0] = state0.removed

    state = state0
    for t in range(cfg.steps):
        q = build_qubo(net, params, state, cfg.gamma, cfg.builder)
        step_cfg = replace(cfg.solver_config, seed=cfg.seed + t)
        try:
            result = solve(q, cfg.solver, step_cfg)
        except Exception as exc:
            raise RuntimeError(f"solver failed at step {t}: {exc}") from exc
        u = to_control(result.z_best)
        state = _advance(state, u, net, params, cfg.force, t)
        controls[t] = u
        objectives[t] = result.objective
        wall_times[t] = result.wall_time
        evaluations[t] = result.evaluations
        xs[t + 1] = state.infected
        if ys is not None:
            ys[t + 1] = state.removed
    traj = Trajectory(xs, controls, ys)
    return ControlLog(traj, objectives, wall_times, evaluations)


def run_uncontrolled_baseline(cfg: ScenarioConfig, state0: EpidemicState) -> Trajectory:
    """Free-running dynamics over the same window, no isolation anywhere."""
    _check_rate(cfg)
    if not cfg.force:
        return simulate(cfg.network, cfg.params, state0, None, cfg.steps)
    net = cfg.network
    params = cfg.params
    zeros = np.zeros(net.m, dtype=np.int8)
    xs = np.empty((cfg.steps + 1, net.m))
    ys = np.empty_like(xs) if cfg.kind is ModelKind.SIR else None
    xs[0] = state0.infected
    if ys is not None:
        ys[0] = state0.removed
    state = state0
    for t in range(cfg.steps):
        state = _advance(state, zeros, net, params, True, t)
        xs[t + 1] = state.infected
        if ys is not None:
            ys[t + 1] = state.removed
    return Trajectory(xs, np.zeros((cfg.steps, net.m), dtype=np.int8), ys)


def compute_metrics(controlled: ControlLog, baseline: Trajectory) -> MetricsReport:
    """Peak and per-step-average infected, with percent reductions.

    The peak is taken over the whole recorded curve; the average excludes
    the shared initial state.  A zero baseline peak (or average) makes the
    corresponding reduction undefined, reported as None.
    """
    traj = controlled.trajectory
    if traj.num_steps != baseline.num_steps or traj.m != baseline.m:
        raise ValueError("controlled and baseline runs must cover the same window")
    totals_c = traj.totals()
    totals_u = baseline.totals()
    peak_c = float(totals_c.max())
    peak_u = float(totals_u.max())
    avg_c = float(totals_c[1:].mean())
    avg_u = float(totals_u[1:].mean())
    peak_pct = None if peak_u == 0.0 else 100.0 * (peak_u - peak_c) / peak_u
    avg_pct = None if avg_u == 0.0 else 100.0 * (avg_u - avg_c) / avg_u
    wall = controlled.wall_times
    return MetricsReport(
        peak_uncontrolled=peak_u,
        peak_controlled=peak_c,
        avg_uncontrolled=avg_u,
        avg_controlled=avg_c,
        peak_reduction_pct=peak_pct,
        avg_reduction_pct=avg_pct,
        per_location_peak_uncontrolled=baseline.infected.max(axis=0),
        per_location_peak_controlled=traj.infected.max(axis=0),
        solver_time={
            "total_seconds": float(wall.sum()),
            "mean_seconds": float(wall.mean()),
            "max_seconds": float(wall.max()),
        },
    )
