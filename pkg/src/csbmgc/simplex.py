"""Dense two-phase tableau simplex for small linear programs.

Solves  min c'x  subject to  A x <= b,  x >= 0.  Rows with negative right-hand
sides get artificial variables and a phase-1 feasibility solve; phase 1 stops
as soon as the infeasibility sum reaches zero (it does not need to prove
phase-1 optimality, which on degenerate programs can stall for tens of
thousands of pivots).  Entering columns follow Dantzig's rule (most negative
reduced cost) with ties in the ratio test broken by the largest pivot
element; after a long run of degenerate pivots the solver switches to Bland's
smallest-index rule, which rules out cycling.  Entries within ``tol``
(default 1e-10) of zero are treated as zero throughout.

This is a deliberately simple O(rows * cols) - per - pivot implementation:
the programs it serves (separability certificates) have at most a few hundred
rows and columns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SimplexError

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

#: Consecutive degenerate pivots tolerated before switching to Bland's rule.
_BLAND_TRIGGER = 1000

#: Phase-1 objective value at or below which the basis counts as feasible.
_FEASIBLE_EXIT = 1e-9

#: Phase-1 optimal value above which the program is declared infeasible.
_INFEASIBLE_LEVEL = 1e-8


@dataclass(frozen=True)
class SimplexResult:
    status: str
    x: np.ndarray | None
    objective: float | None
    pivots: int


def _pivot(tableau: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    tableau[row] /= tableau[row, col]
    factors = tableau[:, col].copy()
    factors[row] = 0.0
    tableau -= np.outer(factors, tableau[row])
    basis[row] = col


def _run_phase(
    tableau: np.ndarray,
    basis: np.ndarray,
    allowed: np.ndarray,
    tol: float,
    max_pivots: int,
    pivots_used: int,
    value_exit: float | None = None,
) -> tuple[str, int]:
    """Iterate the bottom objective row to optimality (or an early exit).

    With ``value_exit`` set, returns "value-exit" as soon as the objective
    value (phase-1 infeasibility sum) is at or below it.
    """
    m = tableau.shape[0] - 1
    bland = False
    degenerate_streak = 0
    pivots = pivots_used
    while True:
        if value_exit is not None and -tableau[-1, -1] <= value_exit:
            return "value-exit", pivots
        obj = tableau[-1, :-1]
        candidates = np.nonzero(allowed & (obj < -tol))[0]
        if candidates.size == 0:
            return OPTIMAL, pivots
        col = int(candidates[0]) if bland else int(candidates[np.argmin(obj[candidates])])

        column = tableau[:m, col]
        rows = np.nonzero(column > tol)[0]
        if rows.size == 0:
            return UNBOUNDED, pivots
        ratios = tableau[rows, -1] / column[rows]
        best = ratios.min()
        ties = rows[ratios <= best + tol * (1.0 + abs(best))]
        if bland:
            # Smallest basis-variable index among ties: Bland's guarantee.
            row = int(ties[np.argmin(basis[ties])])
        else:
            # Largest pivot element among ties: numerically safest choice.
            row = int(ties[np.argmax(column[ties])])

        if best <= tol:
            degenerate_streak += 1
            if degenerate_streak > _BLAND_TRIGGER:
                bland = True
        else:
            degenerate_streak = 0

        _pivot(tableau, basis, row, col)
        pivots += 1
        if pivots > max_pivots:
            raise SimplexError(f"pivot guard exceeded ({max_pivots} pivots)")


def solve(
    c: np.ndarray,
    a_ub: np.ndarray,
    b_ub: np.ndarray,
    tol: float = 1e-10,
    max_pivots: int = 50_000,
) -> SimplexResult:
    """Minimize ``c @ x`` subject to ``a_ub @ x <= b_ub`` and ``x >= 0``."""
    c = np.asarray(c, dtype=np.float64)
    a = np.array(a_ub, dtype=np.float64, copy=True)
    b = np.array(b_ub, dtype=np.float64, copy=True)
    if a.ndim != 2 or a.shape != (len(b), len(c)):
        raise ValueError(f"inconsistent LP shapes: A {a.shape}, b {b.shape}, c {c.shape}")
    m, n = a.shape

    flip = b < 0
    a[flip] *= -1.0
    b[flip] *= -1.0
    artificial_rows = np.nonzero(flip)[0]
    k = len(artificial_rows)

    # Columns: structural | slack/surplus (diagonal, -1 on flipped rows) | artificials.
    ncols = n + m + k
    tableau = np.zeros((m + 1, ncols + 1))
    tableau[:m, :n] = a
    tableau[:m, -1] = b
    slack_sign = np.where(flip, -1.0, 1.0)
    tableau[np.arange(m), n + np.arange(m)] = slack_sign
    basis = np.empty(m, dtype=np.int64)
    basis[~flip] = n + np.nonzero(~flip)[0]
    for j, row in enumerate(artificial_rows):
        tableau[row, n + m + j] = 1.0
        basis[row] = n + m + j

    allowed = np.ones(ncols, dtype=bool)
    pivots = 0

    if k:
        # Phase 1: minimize the sum of artificials.  Reduced costs of that
        # objective are 1 on artificials minus the sum of artificial rows.
        tableau[-1, :] = 0.0
        tableau[-1, n + m:n + m + k] = 1.0
        tableau[-1, :] -= tableau[artificial_rows, :].sum(axis=0)
        status, pivots = _run_phase(
            tableau, basis, allowed, tol, max_pivots, pivots, value_exit=_FEASIBLE_EXIT
        )
        if status == UNBOUNDED:
            raise SimplexError("phase 1 reported an unbounded feasibility objective")
        if status == OPTIMAL and -tableau[-1, -1] > _INFEASIBLE_LEVEL:
            return SimplexResult(INFEASIBLE, None, None, pivots)
        # Pivot remaining artificials out of the basis where possible,
        # preferring the largest available pivot element.
        keep_rows = np.ones(m, dtype=bool)
        for row in range(m):
            if basis[row] >= n + m:
                segment = np.abs(tableau[row, :n + m])
                best = int(np.argmax(segment))
                if segment[best] > tol:
                    _pivot(tableau, basis, row, best)
                    pivots += 1
                else:
                    keep_rows[row] = False  # redundant constraint
        if not keep_rows.all():
            rows = np.concatenate([np.nonzero(keep_rows)[0], [m]])
            tableau = tableau[rows]
            basis = basis[keep_rows]
        allowed[n + m:] = False  # artificials never re-enter
        m = len(basis)

    # Phase 2: restore the real objective expressed in the current basis.
    cost = np.zeros(ncols)
    cost[:n] = c
    tableau[-1, :-1] = cost
    tableau[-1, -1] = 0.0
    tableau[-1, :] -= cost[basis] @ tableau[:m, :]
    status, pivots = _run_phase(tableau, basis, allowed, tol, max_pivots, pivots)
    if status == UNBOUNDED:
        return SimplexResult(UNBOUNDED, None, None, pivots)

    x = np.zeros(n)
    for row in range(m):
        if basis[row] < n:
            x[basis[row]] = tableau[row, -1]
    return SimplexResult(OPTIMAL, x, float(c @ x), pivots)
