"""Regularizers, the FTRL choice map and the projected mirror coordinates."""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .game import INTERIOR_EPS, FiniteGame, StrategyProfile, as_flat, stacked_payoff_flat


class MirrorError(ValueError):
    """A state outside the relative interior where the chart is defined."""


class DegenerateJacobianError(MirrorError):
    pass


def project_H(v, sizes: Sequence[int] | None = None) -> np.ndarray:
    """Subtract each block's mean; blocks run along the last axis."""
    v = np.asarray(v, dtype=float)
    if sizes is None:
        sizes = (v.shape[-1],)
    if sum(sizes) != v.shape[-1]:
        raise ValueError(f"block sizes {tuple(sizes)} do not match length {v.shape[-1]}")
    if len(set(sizes)) == 1:
        w = v.reshape(v.shape[:-1] + (len(sizes), sizes[0]))
        return (w - w.mean(axis=-1, keepdims=True)).reshape(v.shape)
    out = np.empty_like(v)
    start = 0
    for n in sizes:
        blk = v[..., start : start + n]
        out[..., start : start + n] = blk - blk.mean(axis=-1, keepdims=True)
        start += n
    return out


class Regularizer:
    """Strictly convex regularizer ``h`` on the simplex of dimension ``n``.

    Subclasses provide ``value``, ``grad`` and ``hess``; ``choice`` defaults to
    a damped Newton solve of the interior KKT system, which only succeeds when
    the maximizer is interior.
    """

    kind = "generic"
    newton_tol = 1e-12
    newton_maxiter = 100

    def __init__(self, n: int):
        if n < 2:
            raise ValueError(f"regularizer dimension must be >= 2, got {n}")
        self.n = int(n)

    def __repr__(self):
        return f"{type(self).__name__}({self.n})"

    def __eq__(self, other):
        return type(self) is type(other) and self.n == other.n

    def __hash__(self):
        return hash((self.kind, self.n))

    def value(self, x):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError

    def hess(self, x):
        raise NotImplementedError

    def choice(self, y) -> np.ndarray:
        return self.choice_newton(y)

    def choice_newton(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if y.ndim != 1:
            return np.stack([self.choice_newton(row) for row in y.reshape(-1, self.n)]).reshape(
                y.shape
            )
        x = np.full(self.n, 1.0 / self.n)
        lam = 0.0
        ones = np.ones(self.n)
        for _ in range(self.newton_maxiter):
            r = np.concatenate([self.grad(x) - y + lam * ones, [x.sum() - 1.0]])
            if np.max(np.abs(r)) < self.newton_tol:
                return x
            step = np.linalg.solve(_bordered(self.hess(x)), -r)
            dx, dlam = step[:-1], step[-1]
            t = 1.0
            while np.any(x + t * dx <= 0.0):
                t *= 0.5
                if t < 1e-16:
                    raise MirrorError("Newton iterate left the simplex interior")
            x, lam = x + t * dx, lam + t * dlam
        raise MirrorError(f"Newton KKT solve did not converge for y={y}")

    def multiplier(self, y, x=None) -> float:
        """KKT multiplier ``lambda`` with ``grad h(x) - y + lambda 1 = 0``."""
        x = self.choice(y) if x is None else x
        return float(np.mean(np.asarray(y) - self.grad(x)))

    def jacobian_at(self, x) -> np.ndarray:
        """``DQ`` at any ``y`` with ``Q(y) = x``, from the bordered KKT system.

        Batched over leading axes of ``x``.
        """
        x = np.asarray(x, dtype=float)
        n = self.n
        rhs = np.zeros(x.shape[:-1] + (n + 1, n))
        rhs[..., :n, :] = np.eye(n)
        sol = np.linalg.solve(_bordered(self.hess(x)), rhs)
        return sol[..., :n, :]


def _bordered(hess: np.ndarray) -> np.ndarray:
    n = hess.shape[-1]
    out = np.zeros(hess.shape[:-2] + (n + 1, n + 1))
    out[..., :n, :n] = hess
    out[..., :n, n] = 1.0
    out[..., n, :n] = 1.0
    return out


class NegEntropy(Regularizer):
    """``h(x) = sum x log x``; the choice map is exponential weights."""

    kind = "neg_entropy"

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return np.sum(x * np.log(x), axis=-1)

    def grad(self, x):
        return np.log(np.asarray(x, dtype=float)) + 1.0

    def hess(self, x):
        x = np.asarray(x, dtype=float)
        return np.einsum("...i,ij->...ij", 1.0 / x, np.eye(self.n))

    def choice(self, y):
        y = np.asarray(y, dtype=float)
        e = np.exp(y - y.max(axis=-1, keepdims=True))
        return e / e.sum(axis=-1, keepdims=True)


class SquaredNorm(Regularizer):
    """``h(x) = |x|^2 / 2``; the choice map is Euclidean projection onto the simplex."""

    kind = "squared_norm"

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * np.sum(x * x, axis=-1)

    def grad(self, x):
        return np.array(x, dtype=float)

    def hess(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.eye(self.n), x.shape[:-1] + (self.n, self.n)).copy()

    def choice(self, y):
        return simplex_projection(y)


def simplex_projection(y) -> np.ndarray:
    """Euclidean projection onto the probability simplex along the last axis."""
    y = np.asarray(y, dtype=float)
    n = y.shape[-1]
    s = -np.sort(-y, axis=-1)
    css = np.cumsum(s, axis=-1) - 1.0
    k = np.arange(1, n + 1)
    cond = s - css / k > 0
    rho = n - 1 - np.argmax(cond[..., ::-1], axis=-1)
    theta = np.take_along_axis(css, rho[..., None], axis=-1) / (rho[..., None] + 1.0)
    return np.maximum(y - theta, 0.0)


REGULARIZERS = {"neg_entropy": NegEntropy, "squared_norm": SquaredNorm}


def make_regularizer(kind: str, n: int) -> Regularizer:
    if kind not in REGULARIZERS:
        raise ValueError(f"unknown regularizer {kind!r}; choose from {sorted(REGULARIZERS)}")
    return REGULARIZERS[kind](n)


def choice_map(reg: Regularizer, y) -> np.ndarray:
    return reg.choice(np.asarray(y, dtype=float))


def choice_map_jacobian(reg: Regularizer, y) -> np.ndarray:
    x = reg.choice(np.asarray(y, dtype=float))
    if x.min() <= INTERIOR_EPS:
        raise DegenerateJacobianError(f"choice map output {x} is on the boundary")
    return reg.jacobian_at(x)


@dataclass(frozen=True)
class RegularizerBundle:
    regs: tuple[Regularizer, ...]

    @classmethod
    def uniform(cls, game: FiniteGame, kind: str = "neg_entropy") -> "RegularizerBundle":
        return cls(tuple(make_regularizer(kind, n) for n in game.learner_actions))

    @classmethod
    def from_kinds(cls, game: FiniteGame, kinds: Sequence[str]) -> "RegularizerBundle":
        if len(kinds) != game.num_learners:
            raise ValueError(f"need {game.num_learners} regularizers, got {len(kinds)}")
        return cls(tuple(make_regularizer(k, n) for k, n in zip(kinds, game.learner_actions)))

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(r.n for r in self.regs)

    @property
    def kinds(self) -> tuple[str, ...]:
        return tuple(r.kind for r in self.regs)

    def check(self, game: FiniteGame) -> None:
        if self.sizes != game.learner_actions:
            raise ValueError(
                f"regularizer dimensions {self.sizes} do not match game {game.learner_actions}"
            )

    def _blocks(self, v):
        start = 0
        for r in self.regs:
            yield r, slice(start, start + r.n)
            start += r.n

    @functools.cached_property
    def _homogeneous(self) -> bool:
        return len({(r.kind, r.n) for r in self.regs}) == 1 and type(self.regs[0]) is not Regularizer

    def choice(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if self._homogeneous:
            r = self.regs[0]
            w = y.reshape(y.shape[:-1] + (len(self.regs), r.n))
            return r.choice(w).reshape(y.shape)
        out = np.empty_like(y)
        for r, s in self._blocks(y):
            out[..., s] = r.choice(y[..., s])
        return out

    def grad(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        for r, s in self._blocks(x):
            out[..., s] = r.grad(x[..., s])
        return out

    def mirror_inverse(self, x) -> np.ndarray:
        """``P_H grad h(x)``, no interiority check (batched)."""
        return project_H(self.grad(x), self.sizes)

    def apply_dq(self, x, v) -> np.ndarray:
        """Blockwise ``DQ(grad h(x)) v``; ``v`` may carry a trailing column axis."""
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        out = np.empty(np.broadcast_shapes(x.shape, v.shape[: x.ndim]) + v.shape[x.ndim :])
        for r, s in self._blocks(x):
            jac = r.jacobian_at(x[..., s])
            if v.ndim == x.ndim:
                out[..., s] = np.einsum("...ij,...j->...i", jac, v[..., s])
            else:
                out[..., s, :] = np.einsum("...ij,...jk->...ik", jac, v[..., s, :])
        return out


def mirror_inverse(bundle: RegularizerBundle, profile) -> np.ndarray:
    """Projected mirror coordinates ``z = P_H grad h(x)`` of an interior profile."""
    sizes = bundle.sizes
    if isinstance(profile, StrategyProfile):
        flat = profile.flat
    elif isinstance(profile, (list, tuple)) and all(np.ndim(b) == 1 for b in profile):
        flat = np.concatenate([np.asarray(b, dtype=float) for b in profile])
    else:
        flat = np.asarray(profile, dtype=float)
    if flat.shape[-1] != sum(sizes):
        raise MirrorError(f"profile length {flat.shape[-1]} does not match {sum(sizes)}")
    if flat.min() <= INTERIOR_EPS:
        raise MirrorError("mirror coordinates are only defined on the relative interior")
    return bundle.mirror_inverse(flat)


@dataclass(frozen=True)
class EtaFields:
    """Drift ``eta_0`` and control fields ``eta_1..eta_{m-1}`` at one profile."""

    drift: np.ndarray
    controls: np.ndarray  # (m - 1, dim)


def eta_matrix(game: FiniteGame, bundle: RegularizerBundle, flat) -> np.ndarray:
    """Rows ``eta_0, eta_1, ..., eta_{m-1}`` at ``flat`` (batched), shape ``(..., m, dim)``."""
    flat = np.asarray(flat, dtype=float)
    a = stacked_payoff_flat(game, flat)  # (..., dim, m)
    m = game.controller_actions
    cols = np.concatenate([a.mean(axis=-1, keepdims=True), a[..., :-1] - a[..., -1:]], axis=-1)
    out = bundle.apply_dq(flat, cols)  # (..., dim, m)
    return np.swapaxes(out, -1, -2).reshape(flat.shape[:-1] + (m, game.dim))


def eta_fields(game: FiniteGame, bundle: RegularizerBundle, profile) -> EtaFields:
    flat = as_flat(game, profile)
    if flat.min() <= INTERIOR_EPS:
        raise MirrorError("eta fields are only defined on the relative interior")
    rows = eta_matrix(game, bundle, flat)
    return EtaFields(drift=rows[0], controls=rows[1:])
