"""Dense two-phase simplex for small linear programs ``min c@x s.t. A@x <= b``.

Variables are free.  Each free variable is split into a positive and a
negative part and every inequality receives a slack, giving the standard
form ``[A, -A, I] z = b, z >= 0``.  Bland's rule picks entering and leaving
variables, so runs are deterministic and degenerate pivots cannot cycle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import Infeasible, Unbounded

_PIVOT_TOL = 1e-11
_FEAS_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class LinearProgram3:
    """``minimize objective @ x`` subject to ``A @ x <= b`` (x in R^3)."""

    objective: np.ndarray
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float).reshape(-1)
        A = np.asarray(self.A, dtype=float).reshape(-1, c.size)
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if len(A) != len(b):
            raise ValueError("A and b disagree on the number of constraints")
        object.__setattr__(self, "objective", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @classmethod
    def from_constraints(cls, objective, constraints) -> "LinearProgram3":
        """Build from a list of ``(a, bound)`` pairs meaning ``a @ x <= bound``."""
        A = np.array([np.asarray(a, dtype=float) for a, _ in constraints]).reshape(-1, 3)
        b = np.array([float(bnd) for _, bnd in constraints])
        return cls(objective, A, b)


class _Tableau:
    def __init__(self, T: np.ndarray, basis: list[int]):
        self.T = T          # last row is the reduced-cost row, last column the rhs
        self.basis = basis

    def pivot(self, row: int, col: int) -> None:
        T = self.T
        T[row] /= T[row, col]
        col_vals = T[:, col].copy()
        col_vals[row] = 0.0
        T -= np.outer(col_vals, T[row])
        self.basis[row] = col

    def entering(self, allowed: int) -> int | None:
        cost = self.T[-1, :allowed]
        idx = np.flatnonzero(cost < -_PIVOT_TOL)
        return int(idx[0]) if idx.size else None

    def leaving(self, col: int) -> int | None:
        column = self.T[:-1, col]
        rows = np.flatnonzero(column > _PIVOT_TOL)
        if rows.size == 0:
            return None
        ratios = self.T[rows, -1] / column[rows]
        best = ratios.min()
        ties = rows[ratios <= best + 1e-12 * max(1.0, abs(best))]
        return int(min(ties, key=lambda r: self.basis[r]))

    def run(self, allowed: int, max_iter: int) -> None:
        for _ in range(max_iter):
            col = self.entering(allowed)
            if col is None:
                return
            row = self.leaving(col)
            if row is None:
                raise Unbounded("objective is unbounded below")
            self.pivot(row, col)
        raise RuntimeError("simplex iteration limit reached")


def _simplex(c: np.ndarray, A: np.ndarray, b: np.ndarray) -> np.ndarray:
    m, n = A.shape
    neg = b < 0
    n_art = int(neg.sum())
    n_struct = 2 * n + m
    width = n_struct + n_art + 1

    T = np.zeros((m + 1, width))
    sign = np.where(neg, -1.0, 1.0)
    T[:m, :n] = A * sign[:, None]
    T[:m, n:2 * n] = -A * sign[:, None]
    T[:m, 2 * n:n_struct] = np.diag(sign)
    T[:m, -1] = b * sign
    basis = list(range(2 * n, n_struct))
    for k, i in enumerate(np.flatnonzero(neg)):
        T[i, n_struct + k] = 1.0
        basis[i] = n_struct + k
    tab = _Tableau(T, basis)
    max_iter = 50 * (m + n + 1)

    if n_art:
        # phase 1: minimize the sum of artificials
        T[-1, n_struct:n_struct + n_art] = 1.0
        for i in np.flatnonzero(neg):
            T[-1] -= T[i]
        tab.run(n_struct + n_art, max_iter)
        if -T[-1, -1] > _FEAS_TOL * max(1.0, np.abs(b).max()):
            raise Infeasible("constraints admit no feasible point")
        # push remaining zero-level artificials out of the basis
        keep = []
        for r in range(m):
            if tab.basis[r] >= n_struct:
                cols = np.flatnonzero(np.abs(T[r, :n_struct]) > _PIVOT_TOL)
                if cols.size == 0:
                    continue  # redundant row
                tab.pivot(r, int(cols[0]))
            keep.append(r)
    else:
        keep = list(range(m))
    cols = list(range(n_struct)) + [width - 1]
    tab = _Tableau(tab.T[np.ix_(keep + [m], cols)], [tab.basis[r] for r in keep])

    # phase 2
    T = tab.T
    cost = np.concatenate([c, -c, np.zeros(m)])
    T[-1, :] = 0.0
    T[-1, :n_struct] = cost
    for r, j in enumerate(tab.basis):
        if cost[j] != 0.0:
            T[-1] -= cost[j] * T[r]
    tab.run(n_struct, max_iter)

    # a free variable with both parts nonbasic lies on a zero-cost face;
    # slide it until a constraint becomes tight so the result is a vertex
    for _ in range(n):
        flat = [i for i in range(n) if i not in tab.basis and (n + i) not in tab.basis]
        if not flat:
            break
        i = flat[0]
        for col in (i, n + i):
            row = tab.leaving(col)
            if row is not None:
                tab.pivot(row, col)
                break
        else:
            raise Unbounded("free variable unbounded along a zero-cost face")

    z = np.zeros(n_struct)
    for r, j in enumerate(tab.basis):
        z[j] = tab.T[r, -1]
    return z[:n] - z[n:2 * n]


def solve_lp3(lp: LinearProgram3) -> np.ndarray:
    """Return an optimal vertex of ``lp``.

    Raises
    ------
    Infeasible
        No point satisfies all constraints.
    Unbounded
        The objective decreases without bound (impossible when a box is present).
    """
    A, b, c = lp.A, lp.b, lp.objective
    if len(A) == 0:
        if np.any(c != 0):
            raise Unbounded("no constraints")
        return np.zeros_like(c)
    scale = np.linalg.norm(A, axis=1)
    scale[scale == 0] = 1.0
    An, bn = A / scale[:, None], b / scale
    x = _simplex(c, An, bn)

    # polish: re-solve the tight constraints exactly
    tight = np.flatnonzero(np.abs(An @ x - bn) <= 1e-9)
    if tight.size >= c.size:
        sub = An[tight]
        if np.linalg.matrix_rank(sub, tol=1e-10) == c.size:
            # first independent subset in index order
            chosen = []
            for t in tight:
                trial = chosen + [t]
                if np.linalg.matrix_rank(An[trial], tol=1e-10) == len(trial):
                    chosen = trial
                if len(chosen) == c.size:
                    break
            x_exact = np.linalg.solve(An[chosen], bn[chosen])
            if np.all(An @ x_exact <= bn + 1e-9):
                x = x_exact
    return x
