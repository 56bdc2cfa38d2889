"""Linear programming over the probability simplex.

Small programs are solved exactly with a dense two-phase tableau simplex over
GMP rationals using Bland's rule; results come back as ``Fraction``.  Larger
ones go to HiGHS in floating point; callers are told which path produced the
answer.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from gmpy2 import mpq

EXACT_VARIABLE_LIMIT = 4096

_ZERO = mpq(0)
_ONE = mpq(1)


@dataclass(frozen=True)
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    value: object = None  # Fraction when exact, float otherwise
    x: tuple = ()
    exact: bool = True

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


def _as_rational(v) -> mpq:
    if isinstance(v, Fraction):
        return mpq(v.numerator, v.denominator)
    if isinstance(v, (int, np.integer)):
        return mpq(int(v))
    if isinstance(v, float):
        f = Fraction(v).limit_denominator(10 ** 12)
        return mpq(f.numerator, f.denominator)
    return mpq(v)


def _to_fraction(v: mpq) -> Fraction:
    return Fraction(int(v.numerator), int(v.denominator))


class _Tableau:
    """Equality-form tableau ``A x = b, x >= 0`` with ``b >= 0``."""

    def __init__(self, A, b):
        self.m = len(A)
        self.n = len(A[0]) if A else 0
        self.rows = [list(r) + [bi] for r, bi in zip(A, b)]
        self.basis = [None] * self.m

    def pivot(self, r: int, c: int):
        row = self.rows[r]
        inv = _ONE / row[c]
        if inv != 1:
            self.rows[r] = row = [v * inv for v in row]
        nz = [(j, v) for j, v in enumerate(row) if v]
        for i, other in enumerate(self.rows):
            if i == r:
                continue
            f = other[c]
            if f:
                for j, v in nz:
                    other[j] -= f * v
        self.basis[r] = c

    def reduced_costs(self, cost):
        red = list(cost) + [_ZERO]
        for i, bvar in enumerate(self.basis):
            cb = cost[bvar]
            if cb:
                row = self.rows[i]
                for j in range(len(red)):
                    if row[j]:
                        red[j] -= cb * row[j]
        return red

    def optimise(self, cost, allowed) -> str:
        """Minimise ``cost . x`` over columns in ``allowed`` (Bland's rule)."""
        red = self.reduced_costs(cost)
        while True:
            entering = next((j for j in range(self.n) if allowed[j] and red[j] < 0), None)
            if entering is None:
                return "optimal"
            best, leave = None, None
            for i, row in enumerate(self.rows):
                a = row[entering]
                if a > 0:
                    ratio = row[-1] / a
                    if best is None or ratio < best or (ratio == best and self.basis[i] < self.basis[leave]):
                        best, leave = ratio, i
            if leave is None:
                return "unbounded"
            self.pivot(leave, entering)
            f = red[entering]
            row = self.rows[leave]
            red = [rv - f * v for rv, v in zip(red, row)]

    def solution(self):
        x = [_ZERO] * self.n
        for i, bvar in enumerate(self.basis):
            x[bvar] = self.rows[i][-1]
        return x


def simplex(c, A_eq=(), b_eq=(), A_ge=(), b_ge=(), maximize=False) -> LPResult:
    """Exact optimum of ``c . x`` subject to ``A_eq x = b_eq``, ``A_ge x >= b_ge``, ``x >= 0``."""
    c = [_as_rational(v) for v in c]
    n = len(c)
    rows, rhs = [], []
    n_ge = len(A_ge)
    for k, (r, bv) in enumerate(zip(A_ge, b_ge)):
        surplus = [_ZERO] * n_ge
        surplus[k] = -_ONE
        rows.append([_as_rational(v) for v in r] + surplus)
        rhs.append(_as_rational(bv))
    for r, bv in zip(A_eq, b_eq):
        rows.append([_as_rational(v) for v in r] + [_ZERO] * n_ge)
        rhs.append(_as_rational(bv))
    for i, bv in enumerate(rhs):
        if bv < 0:
            rows[i] = [-v for v in rows[i]]
            rhs[i] = -bv
    m = len(rows)
    width = n + n_ge
    # phase 1: one artificial per row
    A = [r + [_ONE if j == i else _ZERO for j in range(m)] for i, r in enumerate(rows)]
    tab = _Tableau(A, rhs)
    tab.basis = [width + i for i in range(m)]
    allowed = [True] * (width + m)
    phase1 = [_ZERO] * width + [_ONE] * m
    tab.optimise(phase1, allowed)
    infeas = sum((tab.rows[i][-1] for i, bvar in enumerate(tab.basis) if bvar >= width), _ZERO)
    if infeas > 0:
        return LPResult("infeasible")
    # drive remaining artificials out of the basis or drop redundant rows
    for i in reversed(range(m)):
        if tab.basis[i] >= width:
            col = next((j for j in range(width) if tab.rows[i][j] != 0), None)
            if col is None:
                del tab.rows[i]
                del tab.basis[i]
                tab.m -= 1
            else:
                tab.pivot(i, col)
    for j in range(width, width + m):
        allowed[j] = False
    sign = -_ONE if maximize else _ONE
    cost = [sign * v for v in c] + [_ZERO] * (n_ge + m)
    status = tab.optimise(cost, allowed)
    if status != "optimal":
        return LPResult(status)
    x = tab.solution()[:n]
    value = sum((ci * xi for ci, xi in zip(c, x)), _ZERO)
    return LPResult("optimal", _to_fraction(value), tuple(_to_fraction(v) for v in x), True)


def highs(c, A_eq=(), b_eq=(), A_ge=(), b_ge=(), maximize=False) -> LPResult:
    """Floating-point solve through ``scipy.optimize.linprog``."""
    from scipy.optimize import linprog

    c = np.asarray(c, dtype=float)
    kwargs = {}
    if len(A_eq):
        kwargs.update(A_eq=np.asarray(A_eq, dtype=float), b_eq=np.asarray(b_eq, dtype=float))
    if len(A_ge):
        kwargs.update(A_ub=-np.asarray(A_ge, dtype=float), b_ub=-np.asarray(b_ge, dtype=float))
    res = linprog(-c if maximize else c, bounds=(0, None), method="highs", **kwargs)
    if res.status == 2:
        return LPResult("infeasible", exact=False)
    if res.status == 3:
        return LPResult("unbounded", exact=False)
    if res.status != 0:
        raise RuntimeError(f"HiGHS failed: {res.message}")
    x = np.clip(res.x, 0, None)
    return LPResult("optimal", float(c @ x), tuple(x), False)


def solve(c, A_eq=(), b_eq=(), A_ge=(), b_ge=(), maximize=False, exact=None) -> LPResult:
    """Dispatch to the exact or floating solver by problem size."""
    if exact is None:
        exact = len(c) <= EXACT_VARIABLE_LIMIT
    fn = simplex if exact else highs
    return fn(c, A_eq, b_eq, A_ge, b_ge, maximize)
