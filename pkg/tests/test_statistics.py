from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import linprog

import _gen
from cekb import answer, parse_kb, parse_query
from cekb.algebra import Signature, build_atom_space, extension
from cekb.statistics import (
    Infeasible, compile_statistical, conflicting_sentences, constraint_set, feasible, lump,
    null_event, stat_entail_interval,
)
from cekb.syntax import parse_formula
from test_syntax import HEADER


def _space_and_cs(text, events=()):
    kb = parse_kb(HEADER + text)
    axioms = tuple(s.formula for s in kb.statistical if s.is_axiom)
    width = max((len(s.formula.bound) for s in kb.statistical if not s.is_axiom), default=1)
    space = build_atom_space(Signature(kb.predicates), width, axioms)
    slots = {"v0": 1, "v1": 2} if width == 2 else {"v": 1}
    masks = [extension(parse_formula(e, kb), space, slots) for e in events]
    return kb, space, compile_statistical([s for s in kb.statistical if not s.is_axiom], space, masks), masks


def _ratio_bounds_by_bisection(C, eq, a, b, tol=1e-9):
    """min and max of a.x / b.x over {x >= 0, C x (=|>=) 0} by bisection on LP feasibility.

    The rows are homogeneous, so ``b.x >= 1`` fixes the scale without loss.
    """
    n = len(a)
    A_eq = [C[i] for i in range(len(C)) if eq[i]]
    A_ub = [-C[i] for i in range(len(C)) if not eq[i]]

    def reachable(t, sense):
        # is there x with sense * (a - t b).x <= 0 and b.x >= 1?
        rows = A_ub + [sense * (a - t * b), -b]
        kwargs = dict(A_eq=np.array(A_eq), b_eq=np.zeros(len(A_eq))) if A_eq else {}
        res = linprog(np.zeros(n), A_ub=np.array(rows), b_ub=[0.0] * (len(rows) - 1) + [-1.0],
                      bounds=(0, None), method="highs", **kwargs)
        return res.status == 0

    def search(sense):
        lo, hi = 0.0, 1.0
        while hi - lo > tol:
            mid = (lo + hi) / 2
            if reachable(mid, sense) == (sense > 0):
                hi = mid
            else:
                lo = mid
        return (lo + hi) / 2

    return search(1), search(-1)


@given(st.integers(0, 10 ** 6))
def test_interval_matches_bisection_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 9))
    q = _gen.rational_measure(rng, n, zero_prob=0.2)
    cs = constraint_set(n, _gen.satisfied_rows(rng, q, int(rng.integers(1, 4))))
    phi, psi = rng.random(n) < 0.5, rng.random(n) < 0.7
    iv = stat_entail_interval(cs, phi, psi)
    qpsi = sum((q[i] for i in np.flatnonzero(psi)), Fraction(0))
    if qpsi:
        value = sum((q[i] for i in np.flatnonzero(phi & psi)), Fraction(0)) / qpsi
        assert iv.contains(value)
    if not iv.conditioning_possible:
        return
    C = np.array([r.dense(n, exact=False) for r in cs.rows], dtype=float)
    eq = [r.rel == "=" for r in cs.rows]
    lo, hi = _ratio_bounds_by_bisection(C, eq, (phi & psi).astype(float), psi.astype(float))
    assert abs(float(iv.lo) - lo) < 1e-6 and abs(float(iv.hi) - hi) < 1e-6


def test_paper_statistical_values(kb_f2):
    res = answer(kb_f2, parse_query("[HappyEnd(v) | Action(v) & American(v) & Mystery(v)]{v} = ?", kb_f2))
    assert res.interval.lo == res.interval.hi == Fraction(6, 7) and res.exact
    res = answer(kb_f2, parse_query("[Action(v) | American(v) & Mystery(v)]{v} = ?", kb_f2))
    assert res.interval.lo == res.interval.hi == Fraction(7, 10)
    # not pinned: nothing is said about English action films
    res = answer(kb_f2, parse_query("[Action(v) | English(v)]{v} = ?", kb_f2))
    assert (res.interval.lo, res.interval.hi) == (0, 1)


def test_lumping_refines_every_mask():
    _, space, cs, masks = _space_and_cs("[A(v) | B(v)]{v} >= 0.3\n", ["A(v)", "B(v) & !A(v)"])
    assert cs.n < len(space)
    for m in masks:
        for c in range(cs.n):
            inside = m[cs.classes == c]
            assert inside.all() or not inside.any()
    assert np.array_equal(lump(space, masks), lump(space, masks))


def test_exchangeability_binds_both_orders():
    _, _, cs, (r12, r21) = _space_and_cs("[R(v0, v1)]{v0, v1} = 0.3\n", ["R(v0, v1)", "R(v1, v0)"])
    iv = stat_entail_interval(cs, r21)
    assert iv.lo == iv.hi == Fraction(3, 10)
    _, _, cs, (a1, a2) = _space_and_cs("[A(v0) & !A(v1)]{v0, v1} = 0.2\n", ["A(v0) & !A(v1)", "!A(v0) & A(v1)"])
    assert stat_entail_interval(cs, a2).lo == Fraction(1, 5)


def test_strict_rows_and_conflicts():
    kb, space, cs, _ = _space_and_cs("[A(v)]{v} > 0\n[A(v) | B(v)]{v} >= 0.5\n[A(v)]{v} <= 0\n")
    ok, _ = feasible(cs)
    assert not ok
    core = conflicting_sentences([s for s in kb.statistical], space)
    assert {s.line for s in core} == {5, 7}
    with pytest.raises(Infeasible):
        stat_entail_interval(cs, np.ones(len(space), dtype=bool))


def test_zero_probability_condition():
    _, space, cs, (a, b) = _space_and_cs("[A(v)]{v} = 0\n", ["A(v)", "B(v)"])
    assert null_event(cs, a) and not null_event(cs, b)
    iv = stat_entail_interval(cs, b, a)
    assert not iv.conditioning_possible


def test_strict_bound_endpoint_not_attained():
    _, _, cs, (a,) = _space_and_cs("[A(v)]{v} > 0.25\n", ["A(v)"])
    iv = stat_entail_interval(cs, a)
    assert iv.lo == Fraction(1, 4) and not iv.lo_attained and iv.hi == 1 and iv.hi_attained


@given(st.integers(0, 10 ** 6))
def test_more_statistics_never_widen(seed):
    rng = np.random.default_rng(seed)
    small_text, large_text, qtext = _gen.monotone_pair(rng)
    small, large = parse_kb(small_text), parse_kb(large_text)
    a = answer(small, parse_query(qtext, small)).interval
    b = answer(large, parse_query(qtext, large)).interval
    if b.conditioning_possible:
        assert a.lo <= b.lo and b.hi <= a.hi


def test_dump_format():
    _, _, cs, _ = _space_and_cs("[A(v) | B(v)]{v} >= 0.3\n")
    lines = [l for l in cs.dump().splitlines() if not l.startswith("#")]
    assert lines[0].startswith("normalization\t=\t1\t")
    tag, rel, rhs, terms = lines[1].split("\t")
    assert rel == ">=" and rhs == "0" and all(":" in t for t in terms.split())
