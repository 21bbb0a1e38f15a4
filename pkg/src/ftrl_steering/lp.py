"""Dense two-phase simplex method with Bland's anti-cycling rule.

Meant for the small certificate LPs of this package (a few hundred rows at
most).  The interface follows ``scipy.optimize.linprog``: minimize ``c @ x``
subject to ``A_ub @ x <= b_ub``, ``A_eq @ x == b_eq`` and per-variable bounds.
Bounds are folded into the standard form by shifting, reflecting or splitting
variables, with finite upper bounds turned into rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TOL = 1e-10


class LPError(RuntimeError):
    """The solver gave up (iteration limit or numerical breakdown)."""


@dataclass
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None
    fun: float | None
    iterations: int

    @property
    def success(self) -> bool:
        return self.status == "optimal"


def _pivot(tab: np.ndarray, row: int, col: int) -> None:
    tab[row] /= tab[row, col]
    col_vals = tab[:, col].copy()
    col_vals[row] = 0.0
    tab -= np.outer(col_vals, tab[row])
    tab[np.abs(tab) < 1e-14] = 0.0


def _run(tab: np.ndarray, basis: list[int], allowed: np.ndarray, max_iter: int) -> tuple[str, int]:
    """Minimize the objective stored in the last row; Bland's rule throughout."""
    it = 0
    while True:
        cost = tab[-1, :-1]
        candidates = np.nonzero((cost < -TOL) & allowed)[0]
        if candidates.size == 0:
            return "optimal", it
        col = int(candidates[0])
        column = tab[:-1, col]
        pos = column > TOL
        if not np.any(pos):
            return "unbounded", it
        ratios = np.full(column.shape, np.inf)
        ratios[pos] = tab[:-1, -1][pos] / column[pos]
        best = ratios.min()
        ties = np.nonzero(ratios <= best + TOL * max(1.0, abs(best)))[0]
        row = int(min(ties, key=lambda r: basis[r]))
        _pivot(tab, row, col)
        basis[row] = col
        it += 1
        if it > max_iter:
            raise LPError(f"simplex exceeded {max_iter} iterations")


def _standard_form(c, A_ub, b_ub, A_eq, b_eq, bounds):
    n = len(c)
    if bounds is None:
        bounds = [(0.0, None)] * n
    elif isinstance(bounds, tuple) and len(bounds) == 2 and not isinstance(bounds[0], tuple):
        bounds = [bounds] * n
    # x = offset + T @ xp with xp >= 0
    cols, offset, upper_rows = [], np.zeros(n), []
    for j, (lo, hi) in enumerate(bounds):
        lo = -np.inf if lo is None else float(lo)
        hi = np.inf if hi is None else float(hi)
        if lo > hi:
            return None
        e = np.zeros(n)
        e[j] = 1.0
        if np.isfinite(lo):
            offset[j] = lo
            cols.append(e)
            if np.isfinite(hi):
                upper_rows.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            offset[j] = hi
            cols.append(-e)
        else:
            cols.append(e)
            cols.append(-e)
    T = np.array(cols).T  # (n, nprime)
    nprime = T.shape[1]

    rows, rhs, kinds = [], [], []
    if A_ub is not None and len(A_ub):
        A_ub = np.atleast_2d(np.asarray(A_ub, float))
        for a, b in zip(A_ub @ T, np.asarray(b_ub, float) - A_ub @ offset):
            rows.append(a)
            rhs.append(b)
            kinds.append("ub")
    for k, hi in upper_rows:
        a = np.zeros(nprime)
        a[k] = 1.0
        rows.append(a)
        rhs.append(hi)
        kinds.append("ub")
    if A_eq is not None and len(A_eq):
        A_eq = np.atleast_2d(np.asarray(A_eq, float))
        for a, b in zip(A_eq @ T, np.asarray(b_eq, float) - A_eq @ offset):
            rows.append(a)
            rhs.append(b)
            kinds.append("eq")
    n_slack = kinds.count("ub")
    A = np.zeros((len(rows), nprime + n_slack))
    s = 0
    for r, (a, kind) in enumerate(zip(rows, kinds)):
        A[r, :nprime] = a
        if kind == "ub":
            A[r, nprime + s] = 1.0
            s += 1
    b = np.array(rhs, dtype=float)
    cp = np.concatenate([T.T @ np.asarray(c, float), np.zeros(n_slack)])
    const = float(np.asarray(c, float) @ offset)
    return A, b, cp, const, T, offset


def linprog(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, bounds=None, max_iter=5000) -> LPResult:
    sf = _standard_form(c, A_ub, b_ub, A_eq, b_eq, bounds)
    if sf is None:
        return LPResult("infeasible", None, None, 0)
    A, b, cp, const, T, offset = sf
    nrow, ncol = A.shape
    if nrow == 0:
        if np.any(cp < -TOL):
            return LPResult("unbounded", None, None, 0)
        xp = np.zeros(ncol)
        return LPResult("optimal", offset + T @ xp[: T.shape[1]], const, 0)

    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0

    # phase 1: artificial variable per row
    tab = np.zeros((nrow + 1, ncol + nrow + 1))
    tab[:nrow, :ncol] = A
    tab[:nrow, ncol : ncol + nrow] = np.eye(nrow)
    tab[:nrow, -1] = b
    tab[-1, :ncol] = -A.sum(axis=0)
    tab[-1, -1] = -b.sum()
    basis = list(range(ncol, ncol + nrow))
    allowed = np.ones(ncol + nrow, dtype=bool)
    _, it1 = _run(tab, basis, allowed, max_iter)
    scale = max(1.0, float(np.abs(b).max()))
    if -tab[-1, -1] > 1e-9 * scale:
        return LPResult("infeasible", None, None, it1)

    # drive zero-level artificials out of the basis, dropping redundant rows
    r = 0
    while r < len(basis):
        if basis[r] >= ncol:
            nz = np.nonzero(np.abs(tab[r, :ncol]) > 1e-9)[0]
            if nz.size:
                _pivot(tab, r, int(nz[0]))
                basis[r] = int(nz[0])
            else:
                tab = np.delete(tab, r, axis=0)
                del basis[r]
                continue
        r += 1

    # phase 2
    tab = np.delete(tab, np.s_[ncol : ncol + nrow], axis=1)
    tab[-1, :] = 0.0
    tab[-1, :ncol] = cp
    for r, j in enumerate(basis):
        tab[-1] -= tab[-1, j] * tab[r]
    status, it2 = _run(tab, basis, np.ones(ncol, dtype=bool), max_iter)
    if status != "optimal":
        return LPResult(status, None, None, it1 + it2)
    xs = np.zeros(ncol)
    for r, j in enumerate(basis):
        xs[j] = tab[r, -1]
    x = offset + T @ xs[: T.shape[1]]
    return LPResult("optimal", x, float(np.asarray(c, float) @ x), it1 + it2)
