"""Attainable-set sampling, grid coverage and the monotone separation witness."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import lp
from .dynamics import DEFAULT_DT, ControlSchedule, DynamicsError, _flow, _interior_flat, simulate_batch
from .game import FiniteGame
from .mirror import RegularizerBundle, project_H

WITNESS_TOL = 1e-9
DEFAULT_SEED = 42


class ReachabilityError(RuntimeError):
    pass


# -- control lattice ---------------------------------------------------------


def lattice(m: int, density: int) -> np.ndarray:
    """All points ``(i_1, ..., i_m) / D`` with nonnegative integers summing to ``D``.

    Rows come in lexicographic order of the index tuple.
    """
    if density < 1:
        raise ValueError(f"lattice density must be >= 1, got {density}")
    pts = []
    for bars in itertools.combinations(range(density + m - 1), m - 1):
        cuts = (-1,) + bars + (density + m - 1,)
        pts.append([cuts[j + 1] - cuts[j] - 1 for j in range(m)])
    pts.sort()
    return np.array(pts, dtype=float) / density


def lattice_size(m: int, density: int) -> int:
    return math.comb(density + m - 1, m - 1)


# -- point clouds ------------------------------------------------------------


@dataclass
class PointCloud:
    points: np.ndarray  # (P, dim)
    start_idx: np.ndarray
    u_idx: np.ndarray
    t_idx: np.ndarray
    starts: np.ndarray  # (S, dim)
    controls: np.ndarray  # (L, m)
    horizons: np.ndarray  # (K,)
    sizes: tuple[int, ...]
    density: int
    failures: list = field(default_factory=list)  # (start_idx, u_idx, t_idx, time)

    def __len__(self):
        return len(self.points)

    @property
    def times(self) -> np.ndarray:
        return self.horizons[self.t_idx]

    def merge(self, other: "PointCloud") -> "PointCloud":
        """Pool two clouds from the same sweep grid; start indices are renumbered."""
        if (
            other.sizes != self.sizes
            or not np.array_equal(other.controls, self.controls)
            or not np.array_equal(other.horizons, self.horizons)
        ):
            raise ReachabilityError("clouds come from different sweep grids")
        off = len(self.starts)
        return PointCloud(
            np.concatenate([self.points, other.points]),
            np.concatenate([self.start_idx, other.start_idx + off]),
            np.concatenate([self.u_idx, other.u_idx]),
            np.concatenate([self.t_idx, other.t_idx]),
            np.concatenate([self.starts, other.starts]),
            self.controls,
            self.horizons,
            self.sizes,
            self.density,
            self.failures + [(s + off, u, t, tt) for s, u, t, tt in other.failures],
        )


def attainable_cloud(
    game: FiniteGame,
    bundle: RegularizerBundle,
    x0,
    density: int = 50,
    horizon: float = 12.0,
    horizon_count: int = 45,
    dt: float = DEFAULT_DT,
) -> PointCloud:
    """Endpoints of every constant lattice control over a uniform horizon grid.

    ``x0`` may be one profile or a stack of them.  All (start, control) pairs
    are integrated together, cutting the horizon grid into equal segments, so
    each recorded boundary is the endpoint for one grid horizon.  Elements
    hitting the interior guard are dropped from that time on and listed in
    ``failures``.
    """
    bundle.check(game)
    if horizon_count < 1:
        raise ValueError("horizon_count must be >= 1")
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    starts = np.atleast_2d(np.asarray(x0, dtype=float))
    starts = np.stack([_interior_flat(game, s) for s in starts])
    ctrl = lattice(game.controller_actions, density)
    horizons = np.linspace(0.0, horizon, horizon_count)
    S, L = len(starts), len(ctrl)
    z0 = np.repeat(bundle.mirror_inverse(starts), L, axis=0)  # start-major
    per_elem = np.tile(ctrl, (S, 1))
    nseg = horizon_count - 1
    controls = np.broadcast_to(per_elem, (max(nseg, 0),) + per_elem.shape)
    durations = [horizon / nseg] * nseg if nseg else []

    pts, sidx, uidx, tidx = [], [], [], []
    elem_s = np.repeat(np.arange(S), L)
    elem_u = np.tile(np.arange(L), S)
    failures = {}
    k = 0
    for fs in _flow(game, bundle, z0, controls, durations, dt):
        if not fs.boundary:
            continue
        alive = fs.alive
        pts.append(fs.primal[alive])
        sidx.append(elem_s[alive])
        uidx.append(elem_u[alive])
        tidx.append(np.full(int(alive.sum()), k))
        failures = fs.failures
        k += 1
    order = np.lexsort((np.concatenate(tidx), np.concatenate(uidx), np.concatenate(sidx)))
    fails = sorted(
        (int(elem_s[b]), int(elem_u[b]), int(np.searchsorted(horizons, t - 1e-12)), float(t))
        for b, (_, t) in failures.items()
    )
    return PointCloud(
        np.concatenate(pts)[order],
        np.concatenate(sidx)[order],
        np.concatenate(uidx)[order],
        np.concatenate(tidx)[order],
        starts,
        ctrl,
        horizons,
        game.learner_actions,
        density,
        fails,
    )


# -- coverage -------------------------------------------------------------------


def _cell_index(x: np.ndarray, g: int) -> np.ndarray:
    """Floor-index cell ``k`` of the ``g``-subdivision of the simplex, per point.

    Points on grid lines are assigned to an adjacent cell so that ``sum(k)``
    stays within ``[g - n + 1, g - 1]``.
    """
    n = x.shape[-1]
    k = np.floor(x * g + 1e-12).astype(int)
    k = np.clip(k, 0, g - 1)
    excess = k.sum(axis=-1) - (g - 1)
    # too large: lower the coordinates with the smallest fractional part first
    for _ in range(n):
        over = excess > 0
        if not over.any():
            break
        frac = np.where(k > 0, x * g - k, np.inf)
        j = np.argmin(frac, axis=-1)
        rows = np.nonzero(over)[0]
        k[rows, j[rows]] -= 1
        excess[rows] -= 1
    low = k.sum(axis=-1) < g - n + 1
    if low.any():
        raise ReachabilityError("cell assignment failed for points off the simplex")
    return k


def _centroid(k: np.ndarray, g: int) -> np.ndarray:
    n = k.shape[-1]
    delta = (g - k.sum(axis=-1, keepdims=True)) / n
    return (k + delta) / g


def simplex_cells(n: int, g: int, interior_only: bool = True) -> np.ndarray:
    """All floor-index cells of the ``g``-subdivision of the ``n``-simplex."""
    cells = [
        k
        for k in itertools.product(range(g), repeat=n)
        if g - n + 1 <= sum(k) <= g - 1
    ]
    cells = np.array(cells, dtype=int).reshape(-1, n)
    if interior_only:
        cells = cells[_is_interior_cell(cells, g)]
    return cells


def _is_interior_cell(k: np.ndarray, g: int) -> np.ndarray:
    n = k.shape[-1]
    return _centroid(k, g).min(axis=-1) >= min(1.0 / (2 * g), 1.0 / n) - 1e-12


def coverage(cloud: PointCloud, grid_resolution: int = 20) -> float:
    """Fraction of interior grid cells holding at least one cloud point.

    Each learner's simplex is cut into the barycentric ``g``-subdivision; a
    cell is interior when its centroid has every coordinate at least
    ``1/(2g)`` (or ``1/n`` when that is smaller, which only matters for tiny
    grids).  With several learners the cells are products.
    """
    if len(cloud) == 0:
        raise ReachabilityError("coverage of an empty cloud")
    g = int(grid_resolution)
    if g < 1:
        raise ValueError("grid resolution must be >= 1")
    keys, interior, total = [], np.ones(len(cloud), dtype=bool), 1
    start = 0
    for n in cloud.sizes:
        k = _cell_index(cloud.points[:, start : start + n], g)
        interior &= _is_interior_cell(k, g)
        keys.append(k)
        total *= len(simplex_cells(n, g))
        start += n
    hit = np.concatenate(keys, axis=1)[interior]
    return len(np.unique(hit, axis=0)) / total if total else 0.0


# -- monotone witness -------------------------------------------------------------


@dataclass
class MonotoneWitness:
    w: np.ndarray
    slacks: np.ndarray
    degenerate: bool = False

    @property
    def min_slack(self) -> float:
        return float(self.slacks.min())


def _witness_lp(pa: np.ndarray, objective: str):
    """LP over ``(w, t)`` with ``1'w = 0`` and ``-1 <= w <= 1``.

    ``objective = 'maxmin'`` maximizes ``t <= slack_j``; ``'sum'`` keeps every
    slack nonnegative and maximizes their sum.
    """
    n, m = pa.shape
    cols = pa.T  # slack_j = cols[j] @ w
    a_eq = np.zeros((1, n + 1))
    a_eq[0, :n] = 1.0
    c = np.zeros(n + 1)
    a_ub = np.zeros((m, n + 1))
    a_ub[:, :n] = -cols
    if objective == "maxmin":
        a_ub[:, n] = 1.0
        c[n] = -1.0
        bounds = [(-1.0, 1.0)] * n + [(None, None)]
    else:
        c[:n] = -cols.sum(axis=0)
        bounds = [(-1.0, 1.0)] * n + [(0.0, 0.0)]
    res = lp.linprog(c, a_ub, np.zeros(m), a_eq, np.zeros(1), bounds)
    if not res.success:
        raise ReachabilityError(f"witness LP failed: {res.status}")
    return res.x[:n]


def _normalized(w: np.ndarray, pa: np.ndarray, degenerate: bool) -> MonotoneWitness:
    w = w - w.mean()
    w = w / np.max(np.abs(w))
    return MonotoneWitness(w, w @ pa, degenerate)


def monotone_witness(game_or_matrix, tol: float = WITNESS_TOL) -> MonotoneWitness | None:
    """Nonzero ``w`` in ``H`` with ``<w, P_H A e_j> >= 0`` for every pure control.

    Solved first for the largest minimum slack; when that is zero a second LP
    maximizes the total slack while keeping all slacks nonnegative.  If both
    are zero but ``P_H A`` is rank deficient, a null-space direction is
    returned, flagged degenerate (all slacks vanish).  ``None`` means no
    witness exists.
    """
    if isinstance(game_or_matrix, FiniteGame):
        if game_or_matrix.num_learners != 1:
            raise ReachabilityError("the witness LP needs a single learner (constant A)")
        A = game_or_matrix.payoff_tensors[0]
    else:
        A = np.asarray(game_or_matrix, dtype=float)
    pa = project_H(A.T).T
    n = pa.shape[0]
    w = _witness_lp(pa, "maxmin")
    if np.abs(w).max() > tol and (w @ pa).min() > tol:
        return _normalized(w, pa, False)
    w = _witness_lp(pa, "sum")
    if np.abs(w - w.mean()).max() > tol and (w @ pa).sum() > tol:
        return _normalized(w, pa, False)
    # rank deficiency: any w in H orthogonal to every projected column
    basis = np.eye(n) - 1.0 / n  # spans H (rank n - 1)
    _, s, vt = np.linalg.svd(pa.T @ basis)
    rank = int(np.sum(s > 1e-9 * s.max())) if s.size and s.max() > 0 else 0
    for v in vt[rank:]:
        cand = basis @ v
        if np.abs(cand).max() > tol:
            return _normalized(cand, pa, True)
    return None


def _witness_vector(w) -> np.ndarray:
    w = np.asarray(w.w if isinstance(w, MonotoneWitness) else w, dtype=float)
    if not np.any(w):
        raise ReachabilityError("the zero vector is not a witness")
    return w


def random_schedules(
    m: int, count: int, rng: np.random.Generator, segments: int = 5, max_duration: float = 2.0
) -> list[ControlSchedule]:
    """Dirichlet(1) controls with durations uniform on ``(0, max_duration)``."""
    out = []
    for _ in range(count):
        us = rng.dirichlet(np.ones(m), size=segments)
        ts = rng.uniform(0.0, max_duration, size=segments)
        out.append(ControlSchedule(tuple(zip(us, ts))))
    return out


def witness_increments(
    game: FiniteGame,
    bundle: RegularizerBundle,
    w,
    trials: int = 100,
    dt: float = DEFAULT_DT,
    seed: int = DEFAULT_SEED,
    record_every: int = 10,
) -> np.ndarray:
    """Per trial, the smallest increment of ``<w, z(t)>`` between consecutive samples.

    Starts are Dirichlet(1) draws and schedules have five random segments.
    Trials that hit the interior guard report ``nan``.
    """
    w = _witness_vector(w)
    if w.shape != (game.dim,):
        raise ReachabilityError(f"witness has length {w.size}, expected {game.dim}")
    rng = np.random.default_rng(seed)
    starts = np.stack([
        np.concatenate([rng.dirichlet(np.ones(n)) for n in game.learner_actions])
        for _ in range(trials)
    ])
    scheds = random_schedules(game.controller_actions, trials, rng)
    out = np.full(trials, np.nan)
    for j, res in enumerate(simulate_batch(game, bundle, starts, scheds, dt, record_every)):
        if isinstance(res, DynamicsError):
            continue
        inc = np.diff(res.dual @ w)
        out[j] = float(inc.min()) if inc.size else 0.0
    return out


def witness_monotonicity(
    game: FiniteGame,
    bundle: RegularizerBundle,
    w,
    trials: int = 100,
    dt: float = DEFAULT_DT,
    seed: int = DEFAULT_SEED,
    record_every: int = 10,
) -> float:
    """Most negative increment of ``<w, z(t)>`` over seeded random runs.

    A value ``>= -1e-7`` supports the claim that the witness functional never
    decreases.
    """
    inc = witness_increments(game, bundle, w, trials, dt, seed, record_every)
    inc = inc[np.isfinite(inc)]
    return float(inc.min()) if inc.size else 0.0


def halfspace_violation(bundle: RegularizerBundle, cloud: PointCloud, w) -> float:
    """Largest amount by which a cloud point falls below its start's level ``<w, z(x0)>``."""
    w = _witness_vector(w)
    level = bundle.mirror_inverse(cloud.starts) @ w
    vals = bundle.mirror_inverse(cloud.points) @ w
    return float(max(0.0, np.max(level[cloud.start_idx] - vals)))
