"""Deciding and certifying controllability of the learners' dynamics.

Two-player games (one learner) get an exact verdict from the neutralizer LP
and the rank of ``P_H A``.  With several learners only sufficient tests
exist: a uniformly neutralizing strategy or a periodic drift, each combined
with a sampled Lie-rank check on the control fields.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import lp
from .dynamics import DEFAULT_DT, GUARD_EPS, _flow
from .game import INTERIOR_EPS, FiniteGame, payoff_block_flat, pure_profiles
from .mirror import RegularizerBundle, eta_matrix, project_H

PROJECTED_RANK_RTOL = 1e-9
BRACKET_RANK_RTOL = 1e-6
BRACKET_STEP = 1e-5
PERIODIC_TOL = 1e-3
PERIOD_T_MIN = 0.1
DEFAULT_SEED = 42

CAVEAT = (
    "sampled full Lie rank and numerical periodicity are evidence for the "
    "hypotheses of a sufficient condition at the sampled points only, not a "
    "proof over the whole interior"
)


class ControllabilityError(RuntimeError):
    pass


@dataclass
class NeutralizerCertificate:
    u0: np.ndarray
    k: np.ndarray  # one value per equality block (a single one for a single learner)
    interiority: float
    residual: float

    @property
    def fully_mixed(self) -> bool:
        return self.interiority > INTERIOR_EPS


@dataclass
class LieRankReport:
    points: np.ndarray  # (P, dim)
    ranks: np.ndarray  # (P,)
    smallest_singular: np.ndarray  # (P,)
    target_rank: int
    depth: int
    include_drift: bool
    brackets: list = field(default_factory=list)  # labels of the evaluated fields

    @property
    def full_rank(self) -> bool:
        return bool(np.all(self.ranks == self.target_rank))


@dataclass
class PeriodicityEvidence:
    points: np.ndarray
    min_return: np.ndarray  # (P,) min over [t_min, horizon] of |x(t) - x(0)|_inf
    period: np.ndarray  # (P,) argmin time
    horizon: float
    t_min: float
    tol: float
    failures: dict = field(default_factory=dict)

    @property
    def periodic(self) -> bool:
        return not self.failures and bool(np.all(self.min_return < self.tol))


@dataclass
class ControllabilityReport:
    verdict: str  # controllable | not_controllable | sufficient_condition_met | inconclusive
    theorem: str
    neutralizer: NeutralizerCertificate | None = None
    projected_rank: int | None = None
    singular_values: np.ndarray | None = None
    projected_matrix: np.ndarray | None = None
    witness: object | None = None
    lie_rank: LieRankReport | None = None
    periodicity: PeriodicityEvidence | None = None
    caveat: str = ""
    notes: list = field(default_factory=list)


# -- LPs --------------------------------------------------------------------


def _neutralizer(rows: np.ndarray, m: int, n_blocks: int, block_of_row: np.ndarray):
    """Maximize ``min(u)`` over ``u`` in the simplex with ``rows @ u = k_block``.

    Variables are ``(u_1..u_m, k_1..k_B, t)``.
    """
    nr = rows.shape[0]
    a_eq = np.zeros((nr + 1, m + n_blocks + 1))
    a_eq[:nr, :m] = rows
    a_eq[np.arange(nr), m + block_of_row] = -1.0
    a_eq[nr, :m] = 1.0
    b_eq = np.zeros(nr + 1)
    b_eq[nr] = 1.0
    # t - u_j <= 0
    a_ub = np.zeros((m, m + n_blocks + 1))
    a_ub[:, :m] = -np.eye(m)
    a_ub[:, -1] = 1.0
    c = np.zeros(m + n_blocks + 1)
    c[-1] = -1.0
    bounds = [(0.0, None)] * m + [(None, None)] * n_blocks + [(0.0, 1.0)]
    res = lp.linprog(c, a_ub, np.zeros(m), a_eq, b_eq, bounds)
    if res.status == "infeasible":
        return None
    if not res.success:
        raise ControllabilityError(f"neutralizer LP failed: {res.status}")
    u = np.clip(res.x[:m], 0.0, None)
    u = u / u.sum()
    return u, res.x[m : m + n_blocks]


def neutralizer_lp(A) -> NeutralizerCertificate | None:
    """Most interior ``u`` with ``A u = k 1``; ``None`` if no neutralizer exists."""
    A = np.asarray(A, dtype=float)
    n, m = A.shape
    sol = _neutralizer(A, m, 1, np.zeros(n, dtype=int))
    if sol is None:
        return None
    u, _ = sol
    au = A @ u
    k = float(au.mean())
    return NeutralizerCertificate(u, np.array([k]), float(u.min()), float(np.max(np.abs(au - k))))


def projected_matrix(A, sizes=None) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    return project_H(A.T, sizes).T


def projected_rank(A, rtol: float = PROJECTED_RANK_RTOL) -> tuple[int, np.ndarray]:
    sv = np.linalg.svd(projected_matrix(A), compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0, sv
    return int(np.sum(sv > rtol * sv[0])), sv


def uniform_neutralizer(game: FiniteGame) -> NeutralizerCertificate | None:
    """One LP over every learner and every pure profile of the other learners.

    Payoff blocks are multilinear in the other learners' strategies, so
    neutralizing at those vertices neutralizes at every mixed profile.
    """
    m = game.controller_actions
    rows = []
    for i in range(game.num_learners):
        for _, flat in pure_profiles(game, exclude=i):
            rows.append(payoff_block_flat(game, i, flat))
    blocks = [np.full(len(r), b) for b, r in enumerate(rows)]
    stacked = np.concatenate(rows)
    block_of_row = np.concatenate(blocks)
    sol = _neutralizer(stacked, m, len(rows), block_of_row)
    if sol is None:
        return None
    u, _ = sol
    ks, resid = [], 0.0
    for r in rows:
        v = r @ u
        ks.append(v.mean())
        resid = max(resid, float(np.max(np.abs(v - v.mean()))))
    return NeutralizerCertificate(u, np.array(ks), float(u.min()), resid)


# -- two-player verdict -------------------------------------------------------


def two_player_verdict(game: FiniteGame) -> ControllabilityReport:
    if game.num_learners != 1:
        raise ControllabilityError("the exact test applies to a single learner only")
    from .reachability import monotone_witness

    A = game.payoff_tensors[0]
    n = game.learner_actions[0]
    cert = neutralizer_lp(A)
    rank, sv = projected_rank(A)
    ok = cert is not None and cert.fully_mixed and rank == n - 1
    report = ControllabilityReport(
        verdict="controllable" if ok else "not_controllable",
        theorem="two_player_exact",
        neutralizer=cert,
        projected_rank=rank,
        singular_values=sv,
        projected_matrix=projected_matrix(A),
    )
    if not ok:
        report.witness = monotone_witness(game)
        if cert is None:
            report.notes.append("no neutralizing strategy exists")
        elif not cert.fully_mixed:
            report.notes.append("every neutralizing strategy lies on the boundary")
        if rank < n - 1:
            report.notes.append(f"rank(P_H A) = {rank} < {n - 1}")
    return report


# -- Lie brackets ---------------------------------------------------------------


Field = Callable[[np.ndarray], np.ndarray]


def _interior_step(x: np.ndarray, step: float, guard: float = 0.25) -> float:
    return min(step, guard * float(x.min()))


def bracket(f: Field, g: Field, step: float = BRACKET_STEP) -> Field:
    """``[f, g] = Dg f - Df g`` by central differences along the fields.

    Differences are taken along the unit direction of each field (scaled back
    afterwards), so they only probe tangent directions of the state space.
    """

    def directional(field_: Field, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        nv = float(np.linalg.norm(v))
        if nv == 0.0:
            return np.zeros_like(x)
        h = _interior_step(x, step)
        d = v / nv
        return nv * (field_(x + h * d) - field_(x - h * d)) / (2.0 * h)

    def br(x):
        return directional(g, x, f(x)) - directional(f, x, g(x))

    return br


def eta_field_functions(game: FiniteGame, bundle: RegularizerBundle) -> list[Field]:
    """``[eta_0, eta_1, ..., eta_{m-1}]`` as callables on flat interior profiles."""

    def make(k):
        return lambda x: eta_matrix(game, bundle, x)[k]

    return [make(k) for k in range(game.controller_actions)]


def bracket_family(gens: list[Field], labels: list[str], depth: int, step: float = BRACKET_STEP):
    """Generators plus left-normed brackets ``[g_i, [g_j, ...]]`` up to ``depth``.

    The finite-difference step grows tenfold per nesting level to keep
    nested differences above round-off.
    """
    fields, names = list(gens), list(labels)
    level = [(i, f, l) for i, (f, l) in enumerate(zip(gens, labels))]
    for d in range(2, depth + 1):
        nxt = []
        h = step * 10.0 ** (d - 2)
        for i, (g, lg) in enumerate(zip(gens, labels)):
            for j, f, lf in level:
                if d == 2 and j <= i:
                    continue
                b = bracket(g, f, h)
                nxt.append((i, b, f"[{lg},{lf}]"))
        fields += [b for _, b, _ in nxt]
        names += [l for _, _, l in nxt]
        level = nxt
    return fields, names


def numerical_rank(vectors: np.ndarray, rtol: float = BRACKET_RANK_RTOL) -> tuple[int, float]:
    sv = np.linalg.svd(np.atleast_2d(vectors), compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0 or not np.all(np.isfinite(sv)):
        return 0, 0.0
    keep = sv > rtol * sv[0]
    return int(keep.sum()), float(sv[keep][-1])


def sample_interior(game: FiniteGame, num_points: int, rng: np.random.Generator) -> np.ndarray:
    """Dirichlet(1) per block, redrawn (up to 10 times) when too close to the boundary."""
    pts = []
    for _ in range(num_points):
        for _attempt in range(11):
            x = np.concatenate([rng.dirichlet(np.ones(n)) for n in game.learner_actions])
            if x.min() > 1e3 * GUARD_EPS:
                break
        else:
            raise ControllabilityError("could not draw an interior sample point")
        pts.append(x)
    return np.array(pts)


def lie_rank_sample(
    game: FiniteGame,
    bundle: RegularizerBundle,
    num_points: int = 100,
    depth: int = 2,
    include_drift: bool = False,
    seed: int = DEFAULT_SEED,
    points: np.ndarray | None = None,
    step: float = BRACKET_STEP,
) -> LieRankReport:
    if depth < 1:
        raise ValueError("bracket depth must be >= 1")
    fns = eta_field_functions(game, bundle)
    labels = [f"eta{k}" for k in range(game.controller_actions)]
    if not include_drift:
        fns, labels = fns[1:], labels[1:]
    fields, names = bracket_family(fns, labels, depth, step)
    if points is None:
        points = sample_interior(game, num_points, np.random.default_rng(seed))
    ranks, smallest = [], []
    for x in points:
        vals = np.array([f(x) for f in fields])
        if not np.all(np.isfinite(vals)):
            raise ControllabilityError(f"non-finite bracket at {x}")
        r, s = numerical_rank(vals)
        ranks.append(r)
        smallest.append(s)
    return LieRankReport(
        np.asarray(points),
        np.array(ranks),
        np.array(smallest),
        game.tangent_dim,
        depth,
        include_drift,
        names,
    )


# -- periodicity -----------------------------------------------------------------


def drift_periodicity_probe(
    game: FiniteGame,
    bundle: RegularizerBundle,
    num_points: int = 20,
    horizon: float = 50.0,
    dt: float = DEFAULT_DT,
    seed: int = DEFAULT_SEED,
    t_min: float = PERIOD_T_MIN,
    tol: float = PERIODIC_TOL,
    points: np.ndarray | None = None,
) -> PeriodicityEvidence:
    """Follow the drift ``eta_0`` (controller at the uniform strategy) and look for returns.

    The flow is integrated in the dual chart; the return distance is tracked
    at every step.
    """
    if points is None:
        points = sample_interior(game, num_points, np.random.default_rng(seed))
    points = np.atleast_2d(points)
    m = game.controller_actions
    z0 = bundle.mirror_inverse(points)
    best = np.full(len(points), np.inf)
    when = np.full(len(points), np.nan)
    failures = {}
    for fs in _flow(game, bundle, z0, np.full((1, m), 1.0 / m), [horizon], dt):
        failures = fs.failures
        if fs.t < t_min:
            continue
        d = np.max(np.abs(fs.primal - points), axis=-1)
        better = (d < best) & fs.alive
        best[better] = d[better]
        when[better] = fs.t
    return PeriodicityEvidence(points, best, when, horizon, t_min, tol, dict(failures))


# -- multi-player verdict ------------------------------------------------------


@dataclass
class VerdictOptions:
    num_points: int = 100
    depth: int = 2
    seed: int = DEFAULT_SEED
    probe_points: int = 20
    probe_horizon: float = 50.0
    dt: float = DEFAULT_DT


def multi_player_verdict(
    game: FiniteGame, bundle: RegularizerBundle, options: VerdictOptions | None = None
) -> ControllabilityReport:
    if game.num_learners < 2:
        raise ControllabilityError("use two_player_verdict for a single learner")
    opts = options or VerdictOptions()
    cert = uniform_neutralizer(game)
    lie = None
    for d in range(1, opts.depth + 1):
        lie = lie_rank_sample(game, bundle, opts.num_points, d, seed=opts.seed)
        if lie.full_rank:
            break
    report = ControllabilityReport(
        verdict="inconclusive", theorem="none", neutralizer=cert, lie_rank=lie, caveat=CAVEAT
    )
    if not lie.full_rank:
        report.notes.append(
            f"Lie rank below {lie.target_rank} at {int(np.sum(lie.ranks < lie.target_rank))} "
            f"of {len(lie.ranks)} sampled points (depth {lie.depth})"
        )
        return report
    if cert is not None and cert.fully_mixed:
        report.verdict = "sufficient_condition_met"
        report.theorem = "uniform_neutralizer"
        return report
    report.notes.append(
        "no neutralizing strategy at all" if cert is None else "uniform neutralizer not fully mixed"
    )
    probe = drift_periodicity_probe(
        game, bundle, opts.probe_points, opts.probe_horizon, opts.dt, opts.seed
    )
    report.periodicity = probe
    if probe.periodic:
        report.verdict = "sufficient_condition_met"
        report.theorem = "periodic_drift"
    else:
        report.notes.append("no periodic-drift evidence within the probe horizon")
    return report


def verdict(game: FiniteGame, bundle: RegularizerBundle, options: VerdictOptions | None = None):
    if game.num_learners == 1:
        return two_player_verdict(game)
    return multi_player_verdict(game, bundle, options)
