from fractions import Fraction

import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from cekb import lp


def test_small_optimum_is_exact():
    # max 3x + 2y  s.t. 2x + y = 5, x + y <= 4, x + 3y <= 6: optimum at (9/5, 7/5)
    res = lp.simplex([3, 2], A_eq=[[2, 1]], b_eq=[5], A_ge=[[-1, -1], [-1, -3]], b_ge=[-4, -6], maximize=True)
    assert res.ok and res.exact
    assert res.value == Fraction(41, 5) and isinstance(res.value, Fraction)
    x, y = res.x
    assert 2 * x + y == 5 and x + y <= 4 and x + 3 * y <= 6


def test_infeasible_and_unbounded():
    assert lp.simplex([1], A_eq=[[1]], b_eq=[-1]).status == "infeasible"
    assert lp.simplex([1], A_ge=[[1]], b_ge=[1], maximize=True).status == "unbounded"


def test_redundant_rows_are_dropped():
    res = lp.simplex([1, 1], A_eq=[[1, 1], [2, 2]], b_eq=[1, 2])
    assert res.ok and res.value == 1


@given(st.integers(0, 10_000))
def test_exact_simplex_agrees_with_highs(seed):
    rng = np.random.default_rng(seed)
    n, m = int(rng.integers(2, 7)), int(rng.integers(1, 5))
    A = rng.integers(-3, 4, size=(m, n))
    x0 = rng.integers(0, 3, size=n)  # feasible point
    b = A @ x0 - rng.integers(0, 2, size=m)
    c = rng.integers(-3, 4, size=n)
    box = np.eye(n, dtype=int) * -1  # x <= 5 keeps it bounded
    A_ge = np.vstack([A, box]).tolist()
    b_ge = np.concatenate([b, -5 * np.ones(n, dtype=int)]).tolist()
    exact = lp.simplex(c.tolist(), A_ge=A_ge, b_ge=b_ge, A_eq=[[1] * n], b_eq=[int(x0.sum())])
    approx = lp.highs(c.tolist(), A_ge=A_ge, b_ge=b_ge, A_eq=[[1] * n], b_eq=[int(x0.sum())])
    assert exact.ok and approx.ok
    assert abs(float(exact.value) - approx.value) < 1e-7


def test_grid_oracle_on_two_variables():
    # max x + 2y over x + y <= 1, x - y >= -1/2, checked against a fine grid
    res = lp.simplex([1, 2], A_ge=[[-1, -1], [1, -1]], b_ge=[-1, Fraction(-1, 2)], maximize=True)
    grid = np.linspace(0, 1, 401)
    X, Y = np.meshgrid(grid, grid)
    ok = (X + Y <= 1 + 1e-12) & (X - Y >= -0.5 - 1e-12)
    assert res.value == Fraction(7, 4)
    assert abs(float(res.value) - (X + 2 * Y)[ok].max()) < 1e-9


def test_dispatch_by_size():
    assert lp.solve([1, 1], A_eq=[[1, 1]], b_eq=[1]).exact
    assert not lp.solve([1, 1], A_eq=[[1, 1]], b_eq=[1], exact=False).exact
