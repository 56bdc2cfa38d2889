import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import _gen
from cekb.crossentropy import (
    EPS_CONV, EPS_FEAS, ORACLE_TOL, NoModel, ce_project, conditional_mix, cross_entropy, jeffrey,
)
from cekb.statistics import constraint_set


def test_named_tolerances():
    assert (EPS_FEAS, EPS_CONV, ORACLE_TOL) == (1e-10, 1e-12, 1e-4)


def test_cross_entropy_basics():
    mu = np.array([0.25, 0.25, 0.5])
    assert cross_entropy(mu, mu) == 0
    assert cross_entropy([0.5, 0.5, 0.0], mu) == pytest.approx(math.log(2))
    assert cross_entropy([0.5, 0.0, 0.5], [1.0, 0.0, 0.0]) == math.inf


def test_single_event_update():
    # uniform prior, nu(A) = 0.9 on one of four points
    N = constraint_set(4, [(np.array([1, 0, 0, 0], bool), np.ones(4, bool), "=", Fraction(9, 10))])
    res = ce_project([Fraction(1, 4)] * 4, N)
    assert res.method == "jeffrey"
    assert list(res.nu) == [Fraction(9, 10)] + [Fraction(1, 30)] * 3
    it = ce_project([0.25] * 4, N, fast_path=False)
    assert it.method == "iterative" and np.allclose(it.nu, [0.9] + [1 / 30] * 3, atol=1e-12)


def test_inequality_already_satisfied_is_a_no_op():
    mu = [0.4, 0.3, 0.3]
    N = constraint_set(3, [(np.array([1, 0, 0], bool), np.ones(3, bool), ">=", Fraction(1, 5))])
    assert np.allclose(ce_project(mu, N, fast_path=False).nu, mu, atol=1e-12)


def test_zero_block_with_weight_has_no_model():
    part = [np.array([1, 1, 0], bool), np.array([0, 0, 1], bool)]
    with pytest.raises(NoModel):
        jeffrey([Fraction(1, 2), Fraction(1, 2), Fraction(0)], part, [Fraction(1, 2), Fraction(1, 2)])
    with pytest.raises(NoModel):
        ce_project([0.5, 0.5, 0.0], _gen.partition_constraints(part, [Fraction(1, 2), Fraction(1, 2)]))


@given(st.integers(0, 10 ** 6))
def test_projection_lies_in_the_set_and_beats_members(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 9))
    mu = _gen.rational_measure(rng, n)
    q = _gen.rational_measure(rng, n)
    N = constraint_set(n, _gen.satisfied_rows(rng, q, int(rng.integers(1, 4))))
    res = ce_project(mu, N)
    nu = np.asarray(res.nu, dtype=float)
    assert abs(nu.sum() - 1) < 1e-12 and N.residual(list(nu)) <= 1e-9
    # any other member, here q and mixtures towards it, is no closer to mu
    qf = np.asarray(q, dtype=float)
    for t in (1.0, 0.5, 0.1):
        assert cross_entropy(nu, mu) <= cross_entropy((1 - t) * nu + t * qf, mu) + 1e-10


@given(st.integers(0, 10 ** 6))
def test_jeffrey_matches_the_iterative_solver(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 13))
    m = int(rng.integers(1, min(n, 4) + 1))
    mu = _gen.rational_measure(rng, n)
    part = _gen.random_partition(rng, n, m)
    p = _gen.rational_measure(rng, m, denom=20)
    N = _gen.partition_constraints(part, p)
    exact = jeffrey(mu, part, p)
    assert sum(exact) == 1
    assert np.allclose(ce_project(mu, N, fast_path=False).nu, np.asarray(exact, dtype=float), atol=1e-10)


def test_conditional_mix_keeps_within_block_ratios():
    mu = [Fraction(1, 10), Fraction(3, 10), Fraction(6, 10)]
    nu = conditional_mix([Fraction(1, 2), Fraction(1, 2)], mu, [0, 0, 1])
    assert list(nu) == [Fraction(1, 8), Fraction(3, 8), Fraction(1, 2)]


def test_trace_reports_sweeps():
    rows = []
    mu = [0.1, 0.2, 0.3, 0.4]
    N = constraint_set(4, [(np.array([1, 1, 0, 0], bool), np.array([1, 1, 1, 0], bool), ">=", Fraction(3, 4)),
                           (np.array([0, 0, 0, 1], bool), np.ones(4, bool), "=", Fraction(1, 5))])
    res = ce_project(mu, N, trace=lambda *r: rows.append(r), fast_path=False)
    assert rows and rows[-1][0] == res.iterations and rows[-1][2] <= EPS_FEAS
