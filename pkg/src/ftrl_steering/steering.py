"""Control schedules that move the learners to a chosen interior profile.

With a single learner the dual dynamics are driftless and linear, so one
constant segment built around a fully mixed neutralizer does the job
exactly.  For several learners only a receding-horizon heuristic is offered.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .controllability import two_player_verdict
from .dynamics import DEFAULT_DT, ControlSchedule, _flow, _interior_flat, simulate, simulate_batch
from .game import FiniteGame
from .mirror import RegularizerBundle, project_H
from .reachability import lattice

DEFAULT_MARGIN = 0.1
RESIDUAL_TOL = 1e-8
TOL_REACH = 1e-2
STALL_LIMIT = 10


class SteeringError(RuntimeError):
    pass


@dataclass
class SteeringPlan:
    schedule: ControlSchedule
    predicted: np.ndarray  # primal endpoint
    displacement: np.ndarray  # dual displacement the schedule produces (or aims at)
    u0: np.ndarray | None = None
    w: np.ndarray | None = None
    margin: float | None = None
    status: str = "exact"  # exact | reached | stalled | max_segments
    distance: float = 0.0  # final dual distance to the target
    history: list = field(default_factory=list)  # dual distance after each accepted segment
    heuristic: bool = False

    @property
    def duration(self) -> float:
        return self.schedule.total_duration


def plan_two_player(
    game: FiniteGame,
    bundle: RegularizerBundle,
    x0,
    x_target,
    margin: float = DEFAULT_MARGIN,
) -> SteeringPlan:
    """One segment ``u0 + w/T`` realizing the dual displacement exactly.

    ``w`` is the minimum-norm zero-sum solution of ``P_H A w = d``.  The
    duration ``T`` is the shortest one keeping every control coordinate at
    least ``margin`` times the neutralizer's own value.
    """
    if not 0.0 < margin < 1.0:
        raise ValueError(f"margin must lie in (0, 1), got {margin}")
    if game.num_learners != 1:
        raise SteeringError("exact planning needs a single learner")
    report = two_player_verdict(game)
    if report.verdict != "controllable":
        raise SteeringError("the game is not controllable; no exact plan exists")
    bundle.check(game)
    x0 = _interior_flat(game, x0)
    xt = _interior_flat(game, x_target)
    u0 = report.neutralizer.u0
    pa = report.projected_matrix
    d = bundle.mirror_inverse(xt) - bundle.mirror_inverse(x0)
    m = game.controller_actions
    if not np.any(d):
        empty = ControlSchedule(())
        return SteeringPlan(empty, x0, d, u0, np.zeros(m), margin)
    system = np.vstack([pa, np.ones((1, m))])
    w = np.linalg.pinv(system) @ np.concatenate([d, [0.0]])
    resid = float(np.max(np.abs(system @ w - np.concatenate([d, [0.0]]))))
    if resid > RESIDUAL_TOL * max(1.0, float(np.abs(d).max())):
        raise SteeringError(f"displacement not in the range of P_H A (residual {resid:.3g})")
    neg = w < 0
    T = float(np.max(-w[neg] / ((1.0 - margin) * u0[neg])))
    u = u0 + w / T
    u = np.clip(u, 0.0, None)
    u = u / u.sum()
    z_end = bundle.mirror_inverse(x0) + T * (pa @ u)
    return SteeringPlan(
        ControlSchedule.constant(u, T), bundle.choice(z_end), T * (pa @ u), u0, w, margin
    )


def verify_plan(
    game: FiniteGame,
    bundle: RegularizerBundle,
    x0,
    plan: SteeringPlan,
    dt: float = DEFAULT_DT,
    chart: str = "primal",
) -> float:
    """Simulate the plan from ``x0``; sup-norm gap to the predicted endpoint.

    The primal chart is the default because plans are built in the dual
    chart, so replaying them there would not be an independent check.
    """
    if len(plan.schedule) == 0 or plan.duration == 0.0:
        return float(np.max(np.abs(_interior_flat(game, x0) - plan.predicted)))
    traj = simulate(game, bundle, x0, plan.schedule, dt, record_every=10**9, chart=chart)
    return float(np.max(np.abs(traj.endpoint - plan.predicted)))


def verify_plans(
    game: FiniteGame,
    bundle: RegularizerBundle,
    x0s,
    plans: list[SteeringPlan],
    dt: float = DEFAULT_DT,
    chart: str = "primal",
) -> np.ndarray:
    """``verify_plan`` for many plans, integrated as one batch."""
    x0s = np.atleast_2d(np.asarray(x0s, dtype=float))
    errs = np.zeros(len(plans))
    live = [j for j, p in enumerate(plans) if p.duration > 0.0]
    for j, p in enumerate(plans):
        if j not in live:
            errs[j] = verify_plan(game, bundle, x0s[j], p, dt, chart)
    if live:
        runs = simulate_batch(
            game, bundle, x0s[live], [plans[j].schedule for j in live], dt, 10**9, chart
        )
        for j, r in zip(live, runs):
            if isinstance(r, Exception):
                raise r
            errs[j] = float(np.max(np.abs(r.endpoint - plans[j].predicted)))
    return errs


def _advance(game, bundle, z, controls, tau, dt):
    """Endpoints of one ``tau`` segment from each row of ``z`` under each control row."""
    z = np.broadcast_to(z, (len(controls), z.shape[-1]))
    last = None
    for fs in _flow(game, bundle, z, controls[None], [tau], dt):
        last = fs
    return last.state, last.alive


def loop_generators(m: int) -> np.ndarray:
    """Controls ``1/m + (e_a - e_b)/m`` for ``a != b``, closed under reflection through ``1/m``."""
    gens = []
    for a in range(m):
        for b in range(m):
            if a != b:
                u = np.full(m, 1.0 / m)
                u[a] += 1.0 / m
                u[b] -= 1.0 / m
                gens.append(u)
    return np.array(gens)


def _loops(m: int):
    """Ordered generator pairs ``(f, g)`` with ``g`` not equal to ``f`` or its reflection."""
    gens = loop_generators(m)
    refl = 2.0 / m - gens
    pairs = []
    for i in range(len(gens)):
        for j in range(len(gens)):
            if i != j and not np.allclose(gens[j], refl[i]):
                pairs.append((gens[i], gens[j], refl[i], refl[j]))
    return np.array(pairs)  # (P, 4, m)


def greedy_steer_multi(
    game: FiniteGame,
    bundle: RegularizerBundle,
    x0,
    x_target,
    segment_duration: float = 0.1,
    density: int = 10,
    max_segments: int = 500,
    dt: float = DEFAULT_DT,
    tol_reach: float = TOL_REACH,
    stall_limit: int = STALL_LIMIT,
    loop_scales: tuple[float, ...] = (1.0, 2.0, 4.0, 8.0),
) -> SteeringPlan:
    """Receding-horizon heuristic on the dual distance to the target.

    Every lattice control is tried for one segment and the best is kept if it
    strictly lowers ``|z - z_target|``.  When no single segment helps, closed
    four-segment loops ``f, g, f', g'`` are tried (``'`` reflects a control
    through the uniform strategy); to first order a loop moves along the Lie
    bracket of the two fields, which no constant control can do.  Loop
    segments last ``scale * tau`` for each scale in ``loop_scales``.  When
    that fails too the segment length is halved; ``stall_limit`` failures in
    a row end the search.  ``history`` holds the distance after each
    accepted move.
    """
    if segment_duration <= 0:
        raise ValueError("segment_duration must be positive")
    bundle.check(game)
    x0 = _interior_flat(game, x0)
    xt = _interior_flat(game, x_target)
    z = bundle.mirror_inverse(x0)
    zt = bundle.mirror_inverse(xt)
    ctrl = lattice(game.controller_actions, density)
    loops = _loops(game.controller_actions)
    dist = float(np.linalg.norm(z - zt))
    segments, history = [], []
    tau, fails = float(segment_duration), 0
    status = "reached" if dist < tol_reach else "max_segments"
    z_start = z.copy()
    while status == "max_segments" and len(segments) < max_segments:
        ends, alive = _advance(game, bundle, z, ctrl, tau, dt)
        cand = np.where(alive, np.linalg.norm(ends - zt, axis=-1), np.inf)
        best = int(np.argmin(cand))
        move = None
        if cand[best] < dist:
            move = [(ctrl[best], tau)], ends[best], float(cand[best])
        elif len(loops) and len(segments) + 4 <= max_segments:
            move = _best_loop(game, bundle, z, zt, loops, tau, loop_scales, dt, dist)
        if move is not None:
            segs, z, dist = move
            z = z.copy()
            segments += segs
            history.append(dist)
            fails = 0
            if dist < tol_reach:
                status = "reached"
        else:
            fails += 1
            tau *= 0.5
            if fails >= stall_limit:
                status = "stalled"
    return SteeringPlan(
        ControlSchedule(tuple(segments)),
        bundle.choice(z),
        project_H(z - z_start, game.learner_actions),
        status=status,
        distance=dist,
        history=history,
        heuristic=True,
    )


def _best_loop(game, bundle, z, zt, loops, tau, scales, dt, dist):
    best = None
    for s in scales:
        h = s * tau
        state = np.broadcast_to(z, (len(loops), z.shape[-1]))
        alive = np.ones(len(loops), dtype=bool)
        for leg in range(4):
            last = None
            for fs in _flow(game, bundle, state, loops[None, :, leg], [h], dt):
                last = fs
            state, alive = last.state, alive & last.alive
        cand = np.where(alive, np.linalg.norm(state - zt, axis=-1), np.inf)
        k = int(np.argmin(cand))
        if cand[k] < dist and (best is None or cand[k] < best[2]):
            best = [(u, h) for u in loops[k]], state[k], float(cand[k])
    return best
