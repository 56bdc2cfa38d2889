"""Statistical sentences as linear constraints on the domain measure.

A sentence ``[phi | psi]_(v) >= p`` holds of a measure exactly when
``mu(phi & psi) - p * mu(psi) >= 0``, so every statistical sentence becomes a
homogeneous row.  Rows are stated over *classes* of atoms: atoms that no
relevant event tells apart are lumped into one LP variable, which keeps the
programs small without changing any optimum.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np

from . import lp
from .algebra import AlgebraError, AtomSpace, extension
from .syntax import (
    BOTTOM, TOP, And, Iff, Implies, Not, Or, StatSentence, StatTerm, format_stat, free_vars,
    stat_terms,
)

EPS_NORM = 1e-12
EPS_POINT = 1e-9


class StatisticsError(ValueError):
    pass


class Infeasible(StatisticsError):
    """The statistical constraints admit no measure."""

    def __init__(self, message, sentences=()):
        super().__init__(message)
        self.sentences = tuple(sentences)


@dataclass(frozen=True)
class Distribution:
    """Normalized weights over the variables of a constraint set (or over atoms)."""

    weights: np.ndarray
    space: object = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < -EPS_NORM):
            raise ValueError("negative weight in distribution")
        if len(w) and abs(w.sum() - 1.0) > 1e-9:
            raise ValueError(f"weights sum to {w.sum()!r}, not 1")

    def __len__(self):
        return len(self.weights)

    def prob(self, mask) -> float:
        return float(np.asarray(self.weights, dtype=float)[np.asarray(mask, dtype=bool)].sum())


@dataclass(frozen=True)
class Row:
    """``sum(coeffs[j] * x[j]) rel 0`` with ``rel`` one of ``>=`` and ``=``."""

    coeffs: dict
    rel: str
    tag: str
    strict: bool = False

    def dense(self, n: int, exact: bool = True) -> list:
        out = [Fraction(0)] * n if exact else [0.0] * n
        for j, v in self.coeffs.items():
            out[j] = v if exact else float(v)
        return out

    def evaluate(self, x) -> object:
        return sum((v * x[j] for j, v in self.coeffs.items()), Fraction(0) if _is_exact(x) else 0.0)


def _is_exact(x) -> bool:
    return len(x) == 0 or isinstance(x[0], Fraction)


@dataclass(frozen=True)
class Interval:
    lo: object
    hi: object
    lo_attained: bool = True
    hi_attained: bool = True
    conditioning_possible: bool = True
    exact: bool = True
    lo_witness: tuple = field(default=(), repr=False, compare=False)
    hi_witness: tuple = field(default=(), repr=False, compare=False)

    @property
    def is_point(self) -> bool:
        if self.exact:
            return self.lo == self.hi
        return abs(float(self.hi) - float(self.lo)) <= EPS_POINT

    def contains(self, value, tol=0.0) -> bool:
        return float(self.lo) - tol <= float(value) <= float(self.hi) + tol


def lump(space: AtomSpace, masks) -> np.ndarray:
    """Class index per atom: atoms share a class iff every mask agrees on them.

    For two-slot spaces the swapped masks join the signature so that the slot
    exchange maps classes onto classes.
    """
    cols = [np.asarray(m, dtype=bool) for m in masks]
    if space.arity == 2:
        cols += [m[space.swap] for m in cols]
    if not cols:
        return np.zeros(len(space), dtype=np.int64)
    sig = np.stack(cols, axis=1)
    _, inverse = np.unique(np.packbits(sig, axis=1), axis=0, return_inverse=True)
    return inverse.reshape(-1).astype(np.int64)


@dataclass(frozen=True)
class CompiledSentence:
    sentence: StatSentence
    pos: np.ndarray = field(repr=False)  # extension of phi & psi
    cond: np.ndarray = field(repr=False)  # extension of psi
    rel: str
    p: Fraction
    strict: bool

    @property
    def tag(self) -> str:
        line = f"line {self.sentence.line}: " if self.sentence.line else ""
        return line + format_stat(self.sentence)


def compile_sentence(sentence: StatSentence, space: AtomSpace) -> CompiledSentence | None:
    """Extensions and canonical relation of one statistical sentence, or None.

    Axioms are enforced by atom filtering and sentences needing more slots
    than the space offers are skipped (a sound relaxation).
    """
    if sentence.is_axiom:
        return None
    term = sentence.formula
    if stat_terms(term.phi) or stat_terms(term.psi):
        raise StatisticsError(f"unresolved nested statistical term in {format_stat(sentence)}")
    if len(term.bound) > space.arity:
        return None
    slots = {v.name: i + 1 for i, v in enumerate(term.bound)}
    try:
        phi = extension(term.phi, space, slots)
        psi = extension(term.psi, space, slots)
    except AlgebraError as exc:
        raise StatisticsError(f"{format_stat(sentence)}: {exc}") from None
    rel, p = term.rel, term.p
    if rel in ("<=", "<"):
        phi, p = ~phi, 1 - p
        rel = ">=" if rel == "<=" else ">"
    strict = rel == ">"
    return CompiledSentence(sentence, phi & psi, psi, "=" if rel == "=" else ">=", p, strict)


@dataclass(frozen=True, eq=False)
class LinearConstraintSet:
    space: AtomSpace
    classes: np.ndarray = field(repr=False)  # atom -> variable
    n: int
    rows: tuple
    sentences: tuple = ()
    swap: np.ndarray = field(default=None, repr=False)  # variable -> variable

    def event(self, mask) -> np.ndarray:
        """Class-level indicator of an atom set that is a union of classes."""
        mask = np.asarray(mask, dtype=bool)
        out = np.zeros(self.n, dtype=bool)
        out[self.classes[mask]] = True
        if not np.array_equal(out[self.classes], mask):
            raise StatisticsError("event is not measurable in the compiled class partition")
        return out

    @cached_property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.classes, minlength=self.n)

    @cached_property
    def orbits(self):
        """Orbit index per class under the slot exchange, and orbit sizes.

        Exchangeable measures put equal mass on both classes of an orbit, so
        the LP is solved over orbit totals and the exchangeability rows drop out.
        """
        if self.swap is None:
            return np.arange(self.n), np.ones(self.n, dtype=np.int64)
        _, orbit = np.unique(np.minimum(np.arange(self.n), self.swap), return_inverse=True)
        orbit = orbit.reshape(-1)
        return orbit, np.bincount(orbit)

    @property
    def n_vars(self) -> int:
        return len(self.orbits[1])

    @cached_property
    def exact(self) -> bool:
        return self.n_vars <= lp.EXACT_VARIABLE_LIMIT

    def reduce(self, vec) -> list:
        """Coefficients over orbit variables of a functional given over classes."""
        orbit, size = self.orbits
        exact = self.exact
        out = [Fraction(0) if exact else 0.0] * len(size)
        for j, v in enumerate(vec):
            if v:
                out[orbit[j]] += (Fraction(v) if exact else float(v))
        return [v / int(size[o]) if size[o] > 1 else v for o, v in enumerate(out)]

    def expand(self, z) -> tuple:
        """Class masses from orbit totals."""
        orbit, size = self.orbits
        return tuple(z[orbit[j]] / int(size[orbit[j]]) if size[orbit[j]] > 1 else z[orbit[j]]
                     for j in range(self.n))

    @cached_property
    def matrices(self):
        """Equality and inequality rows over orbit variables."""
        rows = [r for r in self.rows if r.tag != "exchangeability"]
        eq = [self.reduce(r.dense(self.n)) for r in rows if r.rel == "="]
        ge = [self.reduce(r.dense(self.n)) for r in rows if r.rel == ">="]
        return eq, ge

    def atom_weights(self, x) -> np.ndarray:
        """Spread class masses uniformly over member atoms."""
        x = np.asarray([float(v) for v in x])
        return x[self.classes] / self.sizes[self.classes]

    def residual(self, x) -> float:
        worst = 0.0
        for r in self.rows:
            v = float(r.evaluate(x))
            worst = max(worst, abs(v) if r.rel == "=" else max(0.0, -v))
        return worst

    def dump(self) -> str:
        atoms = len(self.classes)
        lines = [f"# {self.n} variables over {atoms} atoms; variable j is the class of atoms listed"]
        for j in range(self.n):
            members = np.flatnonzero(self.classes == j)
            lines.append(f"# class {j}: " + ",".join(map(str, members[:32])) + (",..." if len(members) > 32 else ""))
        lines.append("normalization\t=\t1\t" + " ".join(f"{j}:1" for j in range(self.n)))
        for r in self.rows:
            rel = ">" if r.strict else r.rel
            terms = " ".join(f"{j}:{_fmt(v)}" for j, v in sorted(r.coeffs.items()))
            lines.append(f"{r.tag}\t{rel}\t0\t{terms}")
        return "\n".join(lines) + "\n"


def constraint_set(n: int, specs) -> LinearConstraintSet:
    """Constraint set over ``n`` plain variables.

    ``specs`` holds ``(pos, cond, rel, p)`` or ``(pos, cond, rel, p, tag)``
    tuples with boolean masks, read as ``nu(pos) - p * nu(cond) rel 0``; pass
    ``pos`` already intersected with ``cond``.
    """
    rows = []
    for k, spec in enumerate(specs):
        pos, cond, rel, p = spec[:4]
        tag = spec[4] if len(spec) > 4 else f"row {k}"
        pos, cond, p = np.asarray(pos, dtype=bool), np.asarray(cond, dtype=bool), Fraction(p)
        if rel in ("<=", "<"):
            pos, p, rel = cond & ~pos, 1 - p, ">=" if rel == "<=" else ">"
        coeffs = {}
        for j in np.flatnonzero(pos | cond):
            v = (1 if pos[j] else 0) - (p if cond[j] else 0)
            if v:
                coeffs[int(j)] = Fraction(v)
        rows.append(Row(coeffs, "=" if rel == "=" else ">=", tag, rel == ">"))
    return LinearConstraintSet(None, np.arange(n), n, tuple(rows))


def _fmt(v: Fraction) -> str:
    return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


def compile_statistical(sentences, space: AtomSpace, events=()) -> LinearConstraintSet:
    """Constraint set of ``sentences`` over ``space``, lumped finely enough for ``events``."""
    compiled = [c for c in (compile_sentence(s, space) for s in sentences) if c is not None]
    masks = [m for c in compiled for m in (c.pos, c.cond)] + [np.asarray(e, dtype=bool) for e in events]
    classes = lump(space, masks)
    n = int(classes.max()) + 1 if len(classes) else 0
    rep = np.zeros(n, dtype=np.int64)
    rep[classes] = np.arange(len(classes))
    rows = []
    for c in compiled:
        coeffs = {}
        pos, cond = c.pos[rep], c.cond[rep]
        for j in np.flatnonzero(pos | cond):
            v = (1 if pos[j] else 0) - (c.p if cond[j] else 0)
            if v:
                coeffs[int(j)] = Fraction(v)
        rows.append(Row(coeffs, c.rel, c.tag, c.strict))
    swap = None
    if space.arity == 2 and n:
        swap = classes[space.swap[rep]]
        for j in range(n):
            s = int(swap[j])
            if j < s:
                rows.append(Row({j: Fraction(1), s: Fraction(-1)}, "=", "exchangeability"))
    return LinearConstraintSet(space, classes, n, tuple(rows), tuple(c.sentence for c in compiled), swap)


# --------------------------------------------------------------------------
# solving


def _solve(cs: LinearConstraintSet, objective, extra_eq=(), extra_rhs=(), maximize=False,
           normalize=True) -> lp.LPResult:
    """Optimise a class-level objective; the returned ``x`` is over classes."""
    eq, ge = cs.matrices
    A_eq, b_eq = list(eq), [0] * len(eq)
    if normalize:
        A_eq.append([1] * cs.n_vars)
        b_eq.append(1)
    A_eq += [cs.reduce(r) for r in extra_eq]
    b_eq += list(extra_rhs)
    res = lp.solve(cs.reduce(objective), A_eq, b_eq, ge, [0] * len(ge), maximize=maximize, exact=cs.exact)
    if res.ok:
        res = lp.LPResult(res.status, res.value, cs.expand(res.x), res.exact)
    return res


def feasible(cs: LinearConstraintSet):
    """``(True, witness)`` if some measure satisfies every row, else ``(False, None)``.

    Strict rows must hold with positive slack simultaneously.
    """
    if cs.n == 0:
        return False, None
    strict = [r for r in cs.rows if r.strict]
    if not strict:
        res = _solve(cs, [0] * cs.n)
        if not res.ok:
            return False, None
        return True, Distribution(np.array([float(v) for v in res.x]), cs)
    # maximise a common slack t on the strict rows: variables (z, t, s)
    exact = cs.exact
    n = cs.n_vars
    zero = Fraction(0) if exact else 0.0
    eq, _ = cs.matrices
    A_eq = [list(r) + [zero, zero] for r in eq] + [[1] * n + [0, 0]]
    b_eq = [0] * len(eq) + [1]
    A_ge = []
    for r in cs.rows:
        if r.rel != ">=":
            continue
        A_ge.append(cs.reduce(r.dense(cs.n)) + [(-1 if r.strict else 0), 0])
    A_eq.append([0] * n + [1, 1])  # t + s = 1 caps the slack
    b_eq.append(1)
    res = lp.solve([0] * n + [1, 0], A_eq, b_eq, A_ge, [0] * len(A_ge), maximize=True, exact=exact)
    if not res.ok or res.value <= 0:
        return False, None
    return True, Distribution(np.array([float(v) for v in cs.expand(res.x[:n])]), cs)


def _strict_tight(cs, x) -> bool:
    return any(r.strict and r.evaluate(x) == 0 for r in cs.rows)


def stat_entail_interval(cs: LinearConstraintSet, phi, psi=None) -> Interval:
    """Range of ``mu(phi | psi)`` over the measures satisfying ``cs``.

    ``phi`` and ``psi`` are atom masks.  The linear-fractional objective is
    handled by the Charnes-Cooper substitution ``y = x / mu(psi)``; since every
    row is homogeneous this just swaps the normalization for ``y(psi) = 1``.
    """
    ok, _ = feasible(cs)
    if not ok:
        raise Infeasible("statistical constraints are infeasible", cs.sentences)
    psi = np.ones(len(cs.space), dtype=bool) if psi is None else np.asarray(psi, dtype=bool)
    target = cs.event(np.asarray(phi, dtype=bool) & psi)
    cond = cs.event(psi)
    norm = [[1 if b else 0 for b in cond]]
    objective = [1 if b else 0 for b in target]
    lo = _solve(cs, objective, norm, [1], maximize=False, normalize=False)
    if lo.status == "infeasible":
        return Interval(Fraction(0), Fraction(1), False, False, False, cs.exact)
    hi = _solve(cs, objective, norm, [1], maximize=True, normalize=False)
    exact = lo.exact and hi.exact
    lo_v, hi_v = lo.value, hi.value
    if not exact:
        lo_v, hi_v = float(min(max(lo_v, 0.0), 1.0)), float(min(max(hi_v, 0.0), 1.0))
    return Interval(lo_v, hi_v,
                    not (exact and _strict_tight(cs, lo.x)),
                    not (exact and _strict_tight(cs, hi.x)),
                    True, exact, _normalize(lo.x), _normalize(hi.x))


def _normalize(y) -> tuple:
    total = sum(y)
    return tuple(v / total for v in y) if total else tuple(y)


def mass_interval(cs: LinearConstraintSet, event) -> Interval:
    return stat_entail_interval(cs, event, None)


def unique_on(cs: LinearConstraintSet, events):
    """Point probabilities of each event if the constraints pin them all, else None."""
    values = []
    for e in events:
        iv = mass_interval(cs, e)
        if not iv.is_point:
            return None
        values.append(iv.lo)
    return values


def null_event(cs: LinearConstraintSet, event) -> bool:
    """True when every admissible measure gives ``event`` probability zero."""
    res = _solve(cs, [1 if b else 0 for b in cs.event(event)], maximize=True)
    if not res.ok:
        raise Infeasible("statistical constraints are infeasible", cs.sentences)
    return res.value <= 0


def jointly_positive(cs: LinearConstraintSet, events) -> bool:
    """Whether one admissible measure gives every event positive probability."""
    return all(not null_event(cs, e) for e in events)


def conflicting_sentences(sentences, space: AtomSpace) -> tuple:
    """A minimal infeasible subset of ``sentences`` (deletion filter)."""
    core = [s for s in sentences if not s.is_axiom]
    if feasible(compile_statistical(core, space))[0]:
        return ()
    i = 0
    while i < len(core):
        trial = core[:i] + core[i + 1:]
        if not feasible(compile_statistical(trial, space))[0]:
            core = trial
        else:
            i += 1
    return tuple(core)


# --------------------------------------------------------------------------
# nested closed terms


def resolve_nested(sentences, space_for) -> tuple:
    """Replace closed StatTerms nested inside sentences by ``true``/``false``.

    The truth value of a closed inner term is decided from the sentences that
    have no nesting; an inner term they do not settle is an error.
    """
    flat = [s for s in sentences if s.is_axiom or not _has_nested(s.formula)]
    out = []
    for s in sentences:
        if s.is_axiom or not _has_nested(s.formula):
            out.append(s)
            continue
        term = s.formula
        phi = _replace_closed(term.phi, flat, space_for)
        psi = _replace_closed(term.psi, flat, space_for)
        out.append(StatSentence(StatTerm(phi, psi, term.bound, term.rel, term.p), s.line))
    return tuple(out)


def _has_nested(term) -> bool:
    return bool(stat_terms(term.phi) or stat_terms(term.psi))


def _replace_closed(f, flat, space_for):
    if isinstance(f, StatTerm):
        if free_vars(f):
            raise StatisticsError("nested statistical term shares variables with its context")
        return TOP if _decide(f, flat, space_for) else BOTTOM
    if isinstance(f, Not):
        return Not(_replace_closed(f.arg, flat, space_for))
    if isinstance(f, (And, Or, Implies, Iff)):
        return type(f)(_replace_closed(f.left, flat, space_for), _replace_closed(f.right, flat, space_for))
    return f


def _decide(term: StatTerm, flat, space_for) -> bool:
    if stat_terms(term.phi) or stat_terms(term.psi):
        raise StatisticsError("statistical terms nested more than one level deep are not supported")
    space = space_for(len(term.bound))
    slots = {v.name: i + 1 for i, v in enumerate(term.bound)}
    phi, psi = extension(term.phi, space, slots), extension(term.psi, space, slots)
    cs = compile_statistical(flat, space, [phi & psi, psi])
    iv = stat_entail_interval(cs, phi, psi)
    holds = {">=": lambda v: v >= term.p, ">": lambda v: v > term.p, "<=": lambda v: v <= term.p,
             "<": lambda v: v < term.p, "=": lambda v: v == term.p}[term.rel]
    if not iv.conditioning_possible:
        return True  # vacuous: the condition has measure zero everywhere
    if holds(iv.lo) and holds(iv.hi) and (term.rel != "=" or iv.is_point):
        return True
    if term.rel in (">=", ">") and not holds(iv.hi):
        return False
    if term.rel in ("<=", "<") and not holds(iv.lo):
        return False
    if term.rel == "=" and not iv.contains(term.p):
        return False
    raise StatisticsError("nested statistical term is not settled by the knowledge base")
