"""Finite games with one controller and N learners.

Payoffs are stored as dense tensors, one per learner.  The tensor for
learner ``i`` is indexed ``(a_i, a_c, a_j for j != i in increasing order)``
so contracting the trailing axes against the other learners' mixed
strategies yields the ``n_i x m`` payoff block ``A_i(x_{-i})`` that maps a
controller strategy ``u`` to the learner's payoff vector.

All evaluation helpers accept flat profiles with optional leading batch
dimensions, i.e. arrays of shape ``(..., sum(n_i))``.
"""

from __future__ import annotations

import functools
import itertools
import string
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

INTERIOR_EPS = 1e-9
SIMPLEX_TOL = 1e-12


class GameError(ValueError):
    """Invalid game definition or query."""


@dataclass(frozen=True)
class FiniteGame:
    learner_actions: tuple[int, ...]
    controller_actions: int
    payoff_tensors: tuple[np.ndarray, ...]
    labels: dict | None = field(default=None, compare=False)
    name: str = field(default="custom", compare=False)

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.learner_actions)
        object.__setattr__(self, "learner_actions", sizes)
        m = int(self.controller_actions)
        object.__setattr__(self, "controller_actions", m)
        if len(sizes) < 1:
            raise GameError("a game needs at least one learner")
        if m < 2:
            raise GameError(f"controller needs at least 2 actions, got {m}")
        if any(n < 2 for n in sizes):
            raise GameError(f"every learner needs at least 2 actions, got {sizes}")
        if len(self.payoff_tensors) != len(sizes):
            raise GameError(
                f"expected {len(sizes)} payoff tensors, got {len(self.payoff_tensors)}"
            )
        tensors = []
        for i, t in enumerate(self.payoff_tensors):
            t = np.array(t, dtype=float)
            expected = self.tensor_shape(i)
            if t.shape != expected:
                raise GameError(
                    f"payoff tensor of learner {i} has shape {t.shape}, expected {expected}"
                )
            if not np.all(np.isfinite(t)):
                raise GameError(f"payoff tensor of learner {i} has non-finite entries")
            t.setflags(write=False)
            tensors.append(t)
        object.__setattr__(self, "payoff_tensors", tuple(tensors))

    @property
    def num_learners(self) -> int:
        return len(self.learner_actions)

    @property
    def dim(self) -> int:
        """Length of a flattened strategy profile."""
        return sum(self.learner_actions)

    @property
    def tangent_dim(self) -> int:
        return sum(n - 1 for n in self.learner_actions)

    @functools.cached_property
    def offsets(self) -> tuple[int, ...]:
        return tuple(np.concatenate([[0], np.cumsum(self.learner_actions)]).tolist())

    @functools.cached_property
    def _others(self) -> tuple[tuple[slice, ...], ...]:
        o = self.offsets
        return tuple(
            tuple(slice(o[j], o[j + 1]) for j in range(self.num_learners) if j != i)
            for i in range(self.num_learners)
        )

    def tensor_shape(self, i: int) -> tuple[int, ...]:
        others = [n for j, n in enumerate(self.learner_actions) if j != i]
        return (self.learner_actions[i], self.controller_actions, *others)

    def block(self, flat: np.ndarray, i: int) -> np.ndarray:
        o = self.offsets
        return flat[..., o[i] : o[i + 1]]

    def split(self, flat: np.ndarray) -> list[np.ndarray]:
        return [self.block(flat, i) for i in range(self.num_learners)]

    def __eq__(self, other):
        if not isinstance(other, FiniteGame):
            return NotImplemented
        return (
            self.learner_actions == other.learner_actions
            and self.controller_actions == other.controller_actions
            and all(np.array_equal(a, b) for a, b in zip(self.payoff_tensors, other.payoff_tensors))
        )

    __hash__ = None


@dataclass(frozen=True)
class StrategyProfile:
    """Mixed strategies of all learners, one simplex point per learner."""

    blocks: tuple[np.ndarray, ...]

    def __post_init__(self):
        blocks = tuple(np.array(b, dtype=float) for b in self.blocks)
        for b in blocks:
            if b.ndim != 1 or np.any(b < 0) or abs(b.sum() - 1.0) > SIMPLEX_TOL:
                raise GameError(f"not a simplex point: {b}")
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def from_flat(cls, game: FiniteGame, flat) -> "StrategyProfile":
        flat = np.asarray(flat, dtype=float)
        if flat.shape != (game.dim,):
            raise GameError(f"flat profile has shape {flat.shape}, expected ({game.dim},)")
        return cls(tuple(game.split(flat)))

    @classmethod
    def uniform(cls, game: FiniteGame) -> "StrategyProfile":
        return cls(tuple(np.full(n, 1.0 / n) for n in game.learner_actions))

    @property
    def flat(self) -> np.ndarray:
        return np.concatenate(self.blocks)

    @property
    def is_interior(self) -> bool:
        return bool(min(b.min() for b in self.blocks) > INTERIOR_EPS)


def is_simplex_point(u, tol: float = SIMPLEX_TOL) -> bool:
    u = np.asarray(u, dtype=float)
    return bool(u.ndim == 1 and np.all(u >= -tol) and abs(u.sum() - 1.0) <= tol)


def check_controller_strategy(game: FiniteGame, u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (game.controller_actions,) or not is_simplex_point(u):
        raise GameError(f"invalid controller strategy {u}")
    return u


def as_flat(game: FiniteGame, profile) -> np.ndarray:
    """Accept a StrategyProfile, a list of blocks, or a flat array."""
    if isinstance(profile, StrategyProfile):
        return profile.flat
    if isinstance(profile, (list, tuple)) and len(profile) == game.num_learners and all(
        np.ndim(b) == 1 for b in profile
    ):
        flat = np.concatenate([np.asarray(b, dtype=float) for b in profile])
    else:
        flat = np.asarray(profile, dtype=float)
    if flat.shape[-1] != game.dim:
        raise GameError(f"profile has length {flat.shape[-1]}, expected {game.dim}")
    return flat


@functools.lru_cache(maxsize=None)
def _contraction_subscripts(num_learners: int, with_control: bool) -> str:
    letters = iter(string.ascii_letters)
    own, ctrl = next(letters), next(letters)
    other = [next(letters) for _ in range(num_learners - 1)]
    inputs = [own + ctrl + "".join(other)]
    if with_control:
        inputs.append("..." + ctrl)
    inputs += ["..." + c for c in other]
    return ",".join(inputs) + "->..." + own + ("" if with_control else ctrl)


def payoff_block_flat(game: FiniteGame, i: int, flat: np.ndarray) -> np.ndarray:
    """Batched ``A_i(x_{-i})``: shape ``(..., n_i, m)``."""
    tensor = game.payoff_tensors[i]
    if game.num_learners == 1:
        return np.broadcast_to(tensor, flat.shape[:-1] + tensor.shape)
    others = [game.block(flat, j) for j in range(game.num_learners) if j != i]
    return np.einsum(_contraction_subscripts(game.num_learners, False), tensor, *others)


def payoff_vectors_flat(game: FiniteGame, flat: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Batched stacked payoff vector ``A(x) u``: shape ``(..., sum(n_i))``."""
    if game.num_learners == 1:
        return u @ game.payoff_tensors[0].T
    sub = _contraction_subscripts(game.num_learners, True)
    parts = []
    for tensor, others in zip(game.payoff_tensors, game._others):
        parts.append(np.einsum(sub, tensor, u, *(flat[..., s] for s in others)))
    return np.concatenate(parts, axis=-1)


def stacked_payoff_flat(game: FiniteGame, flat: np.ndarray) -> np.ndarray:
    """Batched ``A(x)``: shape ``(..., sum(n_i), m)``."""
    if game.num_learners == 1:
        return payoff_block_flat(game, 0, flat)
    return np.concatenate(
        [payoff_block_flat(game, i, flat) for i in range(game.num_learners)], axis=-2
    )


def payoff_block(game: FiniteGame, i: int, profile) -> np.ndarray:
    """Payoff block ``A_i(x_{-i})`` of learner ``i``; its own strategy is ignored."""
    if not 0 <= i < game.num_learners:
        raise GameError(f"learner index {i} out of range")
    return np.array(payoff_block_flat(game, i, as_flat(game, profile)))


def stacked_payoff(game: FiniteGame, profile) -> np.ndarray:
    """``A(x) = [a_1(x) ... a_m(x)]``, the vertical stack of all payoff blocks."""
    return np.array(stacked_payoff_flat(game, as_flat(game, profile)))


def expected_payoff(game: FiniteGame, i: int, profile, u) -> float:
    flat = as_flat(game, profile)
    u = check_controller_strategy(game, u)
    return float(game.block(flat, i) @ payoff_block(game, i, flat) @ u)


def pure_profiles(game: FiniteGame, exclude: int | None = None):
    """Yield ``(actions, flat_profile)`` for every pure profile.

    With ``exclude`` set, that learner is held at its uniform strategy.
    """
    ranges = [
        [None] if j == exclude else range(n) for j, n in enumerate(game.learner_actions)
    ]
    for actions in itertools.product(*ranges):
        blocks = []
        for j, a in enumerate(actions):
            n = game.learner_actions[j]
            blocks.append(np.full(n, 1.0 / n) if a is None else np.eye(n)[a])
        yield actions, np.concatenate(blocks)


# -- builtins -------------------------------------------------------------


def rps(epsilon: float = 0.0) -> FiniteGame:
    if not -1.0 < epsilon < 1.0:
        raise GameError(f"rps needs epsilon in (-1, 1), got {epsilon}")
    e = float(epsilon)
    a = np.array([[e, -1.0, 1.0], [1.0, e, -1.0], [-1.0, 1.0, e]])
    return FiniteGame((3,), 3, (a,), name=f"rps(epsilon={e!r})")


def modified_rps() -> FiniteGame:
    a = np.array([[0.0, -1.0, 1.0], [1.0, 0.0, -1.0], [-1.0, 1.0, 3.0]])
    return FiniteGame((3,), 3, (a,), name="modified_rps")


def brockett() -> FiniteGame:
    """Three 2-action learners; learner 3's payoff couples learners 1 and 2."""
    a1 = np.array([[1.0, -1.0, 0.0], [-1.0, 1.0, 0.0]])
    a2 = np.array([[0.0, 1.0, -1.0], [0.0, -1.0, 1.0]])
    t1 = np.broadcast_to(a1[:, :, None, None], (2, 3, 2, 2))
    t2 = np.broadcast_to(a2[:, :, None, None], (2, 3, 2, 2))
    # learner 3 row 1 is (-p2, p1 + p2, -p1) where p_j = P(learner j plays action 1)
    t3 = np.zeros((2, 3, 2, 2))
    for a1_, a2_ in itertools.product(range(2), range(2)):
        p1, p2 = float(a1_ == 0), float(a2_ == 0)
        row = np.array([-p2, p1 + p2, -p1])
        t3[0, :, a1_, a2_] = row
        t3[1, :, a1_, a2_] = -row
    return FiniteGame((2, 2, 2), 3, (t1, t2, t3), name="brockett")


RMP_MATRICES = (
    np.array([[1.0, 1.0], [0.0, 0.0]]),
    np.array([[2.0, -5.0], [-3.0, 2.0]]),
    np.array([[0.0, 1.0], [0.0, 1.0]]),
)


def regulated_matching_pennies() -> FiniteGame:
    """Zero-sum 2x2 game between two learners whose matrix the controller selects."""
    b = np.stack(RMP_MATRICES)  # (k, a1, a2)
    t1 = np.transpose(b, (1, 0, 2))  # (a1, k, a2): learner 1 gets B_k x_2
    t2 = -np.transpose(b, (2, 0, 1))  # (a2, k, a1): learner 2 gets -B_k^T x_1
    return FiniteGame((2, 2), 3, (t1, t2), name="regulated_matching_pennies")


BUILTINS = {
    "rps": rps,
    "modified_rps": modified_rps,
    "brockett": brockett,
    "regulated_matching_pennies": regulated_matching_pennies,
}


def make_builtin(name: str, params: Sequence[float] = ()) -> FiniteGame:
    if name not in BUILTINS:
        raise GameError(f"unknown builtin game {name!r}; choose from {sorted(BUILTINS)}")
    params = list(params)
    if name == "rps":
        if len(params) > 1:
            raise GameError("rps takes a single parameter epsilon")
        return rps(*params)
    if params:
        raise GameError(f"{name} takes no parameters")
    return BUILTINS[name]()
