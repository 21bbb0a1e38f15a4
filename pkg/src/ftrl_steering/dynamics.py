"""Continuous-time FTRL under piecewise-constant controller strategies.

The learners' state is integrated in projected dual coordinates
``z = P_H y``, where the dynamics read ``z' = P_H A(Q(z)) u``.  The primal
chart ``x' = DQ(grad h(x)) A(x) u`` is available as an independent route
for equivalence checks.

Everything below ``_flow`` is batched: a batch of initial states is advanced
in lockstep over a shared segment grid, each element with its own controls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .game import FiniteGame, GameError, as_flat, is_simplex_point, payoff_vectors_flat
from .mirror import RegularizerBundle, mirror_inverse, project_H

DEFAULT_DT = 1e-3
GUARD_EPS = 1e-7
RECORD_EVERY = 10


class DynamicsError(RuntimeError):
    def __init__(self, message: str, time: float):
        super().__init__(f"{message} at t={time:.6g}")
        self.time = time


class IntegrationError(DynamicsError):
    """The state became non-finite."""


class InteriorGuardError(DynamicsError):
    """A primal coordinate fell below the interior guard."""


@dataclass(frozen=True)
class ControlSchedule:
    segments: tuple[tuple[np.ndarray, float], ...]

    def __post_init__(self):
        segs = []
        for u, t in self.segments:
            u = np.array(u, dtype=float)
            if not is_simplex_point(u):
                raise GameError(f"schedule control {u} is not in the simplex")
            t = float(t)
            if not (t >= 0 and math.isfinite(t)):
                raise GameError(f"segment duration must be finite and >= 0, got {t}")
            u.setflags(write=False)
            segs.append((u, t))
        object.__setattr__(self, "segments", tuple(segs))

    @classmethod
    def constant(cls, u, duration: float) -> "ControlSchedule":
        return cls(((u, duration),))

    @property
    def total_duration(self) -> float:
        return float(sum(t for _, t in self.segments))

    @property
    def controls(self) -> np.ndarray:
        return np.array([u for u, _ in self.segments])

    @property
    def durations(self) -> np.ndarray:
        return np.array([t for _, t in self.segments])

    def reversed(self) -> "ControlSchedule":
        return ControlSchedule(tuple(reversed(self.segments)))

    def __add__(self, other: "ControlSchedule") -> "ControlSchedule":
        return ControlSchedule(self.segments + other.segments)

    def __len__(self):
        return len(self.segments)


@dataclass
class Trajectory:
    times: np.ndarray
    primal: np.ndarray  # (K, dim)
    schedule: ControlSchedule
    sizes: tuple[int, ...]
    dual: np.ndarray | None = None
    chart: str = "dual"

    @property
    def endpoint(self) -> np.ndarray:
        return self.primal[-1]

    def __len__(self):
        return len(self.times)


@dataclass
class FlowState:
    """Snapshot handed out by ``_flow`` after every step."""

    t: float
    state: np.ndarray  # (B, dim) in the integration chart
    primal: np.ndarray  # (B, dim)
    alive: np.ndarray  # (B,) bool
    boundary: bool  # last step of a segment (or the initial state)
    segment: int
    failures: dict = field(default_factory=dict)  # element -> (kind, time)


def _steps(durations: Sequence[float], dt: float):
    """Per segment: the step sizes, last one shortened to hit the boundary exactly."""
    for k, d in enumerate(durations):
        n = max(0, math.ceil(d / dt - 1e-9))
        for j in range(n):
            h = dt if j < n - 1 else d - (n - 1) * dt
            yield k, h, j == n - 1


def _velocity_fn(game: FiniteGame, bundle: RegularizerBundle, chart: str):
    sizes = game.learner_actions
    if chart == "dual":
        if game.num_learners == 1:
            pa = project_H(game.payoff_tensors[0].T, sizes).T  # constant P_H A

            def vel(z, u):
                return u @ pa.T

        else:

            def vel(z, u):
                return project_H(payoff_vectors_flat(game, bundle.choice(z), u), sizes)

        return vel
    if chart == "primal":

        def vel(x, u):
            return bundle.apply_dq(x, payoff_vectors_flat(game, x, u))

        return vel
    raise ValueError(f"unknown chart {chart!r}")


def _flow(
    game: FiniteGame,
    bundle: RegularizerBundle,
    state0: np.ndarray,
    controls: np.ndarray,
    durations: Sequence[float],
    dt: float,
    chart: str = "dual",
    guard: float = GUARD_EPS,
) -> Iterator[FlowState]:
    """Lockstep RK4 over a shared segment grid.

    ``controls`` has shape ``(S, m)`` or ``(S, B, m)``.  Failed elements are
    frozen and reported through ``FlowState.failures``; they never raise.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    state = np.array(state0, dtype=float, ndmin=2)
    bsz = state.shape[0]
    controls = np.asarray(controls, dtype=float)
    if controls.ndim == 2:
        controls = np.broadcast_to(controls[:, None, :], (controls.shape[0], bsz, controls.shape[1]))
    vel = _velocity_fn(game, bundle, chart)
    to_primal = bundle.choice if chart == "dual" else (lambda s: s)
    alive = np.ones(bsz, dtype=bool)
    failures: dict = {}
    prim = to_primal(state)
    yield FlowState(0.0, state, prim, alive, True, -1, failures)
    ends = np.cumsum(np.asarray(durations, dtype=float))
    seg_start, cur = 0.0, -1
    steps_done = 0
    for k, h, last in _steps(durations, dt):
        if k != cur:
            seg_start = float(ends[k - 1]) if k else 0.0
            cur, steps_done = k, 0
        u = controls[k]
        with np.errstate(all="ignore"):
            k1 = vel(state, u)
            k2 = vel(state + 0.5 * h * k1, u)
            k3 = vel(state + 0.5 * h * k2, u)
            k4 = vel(state + h * k3, u)
            new = state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            steps_done += 1
            t = float(ends[k]) if last else seg_start + steps_done * dt
            x = to_primal(new)
            if not alive.all():
                new[~alive] = state[~alive]
                x[~alive] = prim[~alive]
            # whole-batch check first; per-element work only when something failed
            if not (np.isfinite(new).all() and np.isfinite(x).all() and x.min() >= guard):
                finite = np.all(np.isfinite(new), axis=-1) & np.all(np.isfinite(x), axis=-1)
                inside = np.min(np.where(np.isfinite(x), x, -1.0), axis=-1) >= guard
                bad = alive & ~(finite & inside)
                for b in np.nonzero(bad)[0]:
                    failures[int(b)] = ("nonfinite" if not finite[b] else "guard", t)
                alive = alive & ~bad
                new[bad] = state[bad]
                x[bad] = prim[bad]
        state, prim = new, x
        yield FlowState(t, state, prim, alive, last, k, failures)


def _raise_failure(failures: dict) -> None:
    if failures:
        kind, t = failures[min(failures)]
        if kind == "guard":
            raise InteriorGuardError("primal state left the interior guard", t)
        raise IntegrationError("state became non-finite", t)


def _collect(flow: Iterator[FlowState], record_every: int, keep_state: bool):
    times, prim, states = [], [], []
    last = None
    for n, fs in enumerate(flow):
        last = fs
        if fs.boundary or n % record_every == 0:
            times.append(fs.t)
            prim.append(fs.primal.copy())
            if keep_state:
                states.append(fs.state.copy())
        _raise_failure(fs.failures)
    times = np.asarray(times)
    # drop duplicate times produced by zero-duration segments
    keep = np.concatenate([[True], np.diff(times) > 0]) if len(times) else np.array([], bool)
    prim = np.asarray(prim)[keep]
    states = np.asarray(states)[keep] if keep_state else None
    return times[keep], prim, states, last


def _interior_flat(game: FiniteGame, x0) -> np.ndarray:
    flat = as_flat(game, x0)
    if flat.ndim != 1:
        raise GameError("expected a single profile")
    for i, b in enumerate(game.split(flat)):
        if not is_simplex_point(b, 1e-9):
            raise GameError(f"block {i} of the initial profile is not a simplex point")
    if flat.min() <= GUARD_EPS:
        raise GameError("initial profile must lie in the relative interior")
    return flat


def _check_schedule(game: FiniteGame, schedule: ControlSchedule):
    if len(schedule) and schedule.controls.shape[1] != game.controller_actions:
        raise GameError("schedule controls do not match the controller's action count")


def simulate(
    game: FiniteGame,
    bundle: RegularizerBundle,
    x0,
    schedule: ControlSchedule,
    dt: float = DEFAULT_DT,
    record_every: int = RECORD_EVERY,
    chart: str = "dual",
    keep_dual: bool = False,
) -> Trajectory:
    """Integrate from an interior profile ``x0``.

    States are recorded every ``record_every`` steps and at every segment
    boundary.  Raises ``InteriorGuardError`` or ``IntegrationError`` when the
    path leaves the valid region.
    """
    bundle.check(game)
    _check_schedule(game, schedule)
    flat = _interior_flat(game, x0)
    s0 = bundle.mirror_inverse(flat) if chart == "dual" else flat
    flow = _flow(game, bundle, s0, _controls(game, schedule), schedule.durations, dt, chart)
    times, prim, states, _ = _collect(flow, record_every, keep_dual and chart == "dual")
    return Trajectory(
        times,
        prim[:, 0, :],
        schedule,
        game.learner_actions,
        None if states is None else states[:, 0, :],
        chart,
    )


def _controls(game: FiniteGame, schedule: ControlSchedule) -> np.ndarray:
    if len(schedule) == 0:
        return np.zeros((0, game.controller_actions))
    return schedule.controls


def simulate_dual(
    game: FiniteGame,
    bundle: RegularizerBundle,
    z0,
    schedule: ControlSchedule,
    dt: float = DEFAULT_DT,
    record_every: int = RECORD_EVERY,
) -> Trajectory:
    """Integrate the projected dual system from ``z0``; dual states are kept."""
    bundle.check(game)
    _check_schedule(game, schedule)
    z0 = np.asarray(z0, dtype=float)
    if z0.shape != (game.dim,):
        raise GameError(f"dual state has shape {z0.shape}, expected ({game.dim},)")
    if np.max(np.abs(project_H(z0, game.learner_actions) - z0)) > 1e-10:
        raise GameError("dual state must be blockwise zero-sum")
    if bundle.choice(z0).min() <= GUARD_EPS:
        raise GameError("dual state maps to the boundary of the simplex")
    flow = _flow(game, bundle, z0, _controls(game, schedule), schedule.durations, dt, "dual")
    times, prim, states, _ = _collect(flow, record_every, True)
    return Trajectory(times, prim[:, 0, :], schedule, game.learner_actions, states[:, 0, :])


def simulate_batch(
    game: FiniteGame,
    bundle: RegularizerBundle,
    x0s: np.ndarray,
    schedules: Sequence[ControlSchedule],
    dt: float = DEFAULT_DT,
    record_every: int = RECORD_EVERY,
    chart: str = "dual",
) -> list[Trajectory | DynamicsError]:
    """Simulate many (start, schedule) pairs at once.

    Schedules are refined onto the union of all segment boundaries so every
    element still switches controls exactly on its own boundaries.  Failed
    elements come back as the exception they would have raised.
    """
    bundle.check(game)
    x0s = np.atleast_2d(np.asarray(x0s, dtype=float))
    if len(x0s) != len(schedules):
        raise ValueError("need one schedule per start")
    cuts = sorted({0.0} | {float(c) for s in schedules for c in np.cumsum(s.durations)})
    horizon = cuts[-1]
    grid = np.array(cuts)
    mids = 0.5 * (grid[:-1] + grid[1:])
    m = game.controller_actions
    ctrls = np.empty((len(mids), len(schedules), m))
    for b, s in enumerate(schedules):
        ends = np.cumsum(s.durations)
        for j, t in enumerate(mids):
            if t < (ends[-1] if len(ends) else 0.0):
                ctrls[j, b] = s.controls[np.searchsorted(ends, t, side="right")]
            else:
                ctrls[j, b] = np.full(m, 1.0 / m)  # past this element's horizon; ignored
    s0 = np.stack([_interior_flat(game, x) for x in x0s])
    if chart == "dual":
        s0 = bundle.mirror_inverse(s0)
    flow = _flow(game, bundle, s0, ctrls, np.diff(grid), dt, chart)
    times, prims, states = [], [], []
    failures = {}
    for n, fs in enumerate(flow):
        if fs.boundary or n % record_every == 0:
            times.append(fs.t)
            prims.append(fs.primal.copy())
            states.append(fs.state.copy())
        failures = fs.failures
    times = np.asarray(times)
    prims, states = np.asarray(prims), np.asarray(states)
    out: list[Trajectory | DynamicsError] = []
    for b, s in enumerate(schedules):
        if b in failures:
            kind, t = failures[b]
            cls = InteriorGuardError if kind == "guard" else IntegrationError
            out.append(cls("batched element failed", t))
            continue
        mask = times <= s.total_duration + 1e-12
        if horizon == 0:
            mask = times == 0
        dual = states[mask, b] if chart == "dual" else None
        out.append(Trajectory(times[mask], prims[mask, b], s, game.learner_actions, dual, chart))
    return out


def equivalence_check(
    game: FiniteGame,
    bundle: RegularizerBundle,
    x0,
    schedule: ControlSchedule,
    dt: float = DEFAULT_DT,
) -> float:
    """Max sup-norm gap between the dual-chart and primal-chart integrations."""
    dual = simulate(game, bundle, x0, schedule, dt, chart="dual")
    prim = simulate(game, bundle, x0, schedule, dt, chart="primal")
    if dual.times.shape != prim.times.shape or np.any(dual.times != prim.times):
        raise RuntimeError("the two charts recorded different sample times")
    return float(np.max(np.abs(dual.primal - prim.primal)))


def initial_dual(bundle: RegularizerBundle, x0) -> np.ndarray:
    return mirror_inverse(bundle, x0)
