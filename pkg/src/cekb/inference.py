"""Entailment for knowledge bases of statistical and subjective sentences.

A subjective query about constants ``a`` is answered from the belief measure
``nu_a``, the minimum cross-entropy projection of the statistical measure onto
the measures satisfying the beliefs about ``a``.  Only the finite algebra the
beliefs and the query generate matters: if ``B_1..B_m`` are the cells cut out
by the belief events then ``nu(E) = sum_i nu(B_i) mu(E | B_i)``.  Point mode
therefore needs (a) the cell masses ``nu(B_i)`` and (b) the conditionals
``mu(E | B_i)``, and it certifies each one as LP-unique before using it.

Constants that never share a belief sentence form independent blocks: the
belief measure over several blocks is the product of the per-block measures.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from . import lp
from .algebra import AtomSpace, Signature, build_atom_space, extension
from .crossentropy import NoModel, ce_project, pinned_cell_weights
from .statistics import (
    Infeasible, Interval, LinearConstraintSet, compile_statistical, conflicting_sentences,
    constraint_set, feasible, null_event, resolve_nested, stat_entail_interval,
)
from .syntax import (
    TOP, And, Atom, BeliefSentence, Const, Eq, Formula, KnowledgeBase, Not, Query, Top,
    conj, constants_of, format_belief, format_formula, format_prob, format_query, format_stat,
    predicates_of, walk,
)

MODES = ("point", "interval")
DEFAULT_SAMPLES = 256
MAX_BLOCK_SLOTS = 2
VERTEX_SHRINK = 1e-6


class InferenceError(ValueError):
    pass


class NonUnique(InferenceError):
    """A value point mode needs is not pinned by the statistical sentences."""

    def __init__(self, event: str, interval=None):
        detail = f" (ranges over [{fmt(interval.lo)}, {fmt(interval.hi)}])" if interval is not None else ""
        super().__init__(f"not determined by the knowledge base: {event}{detail}")
        self.event = event


class _SkipSample(Exception):
    pass


def fmt(v) -> str:
    """Exact rationals as decimals or ``m/n``; floats to 12 significant digits."""
    if isinstance(v, Fraction):
        return format_prob(v) if 0 <= v <= 1 else str(v)
    return f"{float(v):.12g}"


def decimal12(v) -> str:
    return f"{float(v):.12f}"


# --------------------------------------------------------------------------
# results


@dataclass(frozen=True)
class BlockDecomposition:
    blocks: tuple  # tuples of constants, each in declaration order

    def block_of(self, constant: str) -> tuple:
        for b in self.blocks:
            if constant in b:
                return b
        raise KeyError(constant)

    def as_lists(self) -> list:
        return [list(b) for b in self.blocks]


@dataclass(frozen=True)
class QueryResult:
    query: Query
    interval: Interval
    mode: str  # "exact_point" | "exact_interval" | "sampled_interval"
    derivation: tuple = ()
    blocks: tuple = ()
    terms: tuple = field(default=(), compare=False)  # (description, weight, conditional)
    samples: int | None = None

    @property
    def exact(self) -> bool:
        return self.interval.exact and self.mode != "sampled_interval"

    @property
    def value(self):
        if self.interval.lo != self.interval.hi:
            raise InferenceError("result is an interval, not a point")
        return self.interval.lo

    @property
    def entailed(self):
        """Whether the bound stated in the query (if any) follows."""
        if self.query.claim is None or self.mode == "sampled_interval":
            return None
        rel, p = self.query.claim
        lo, hi = self.interval.lo, self.interval.hi
        if not self.interval.conditioning_possible:
            return True
        return {">=": lo >= p, ">": lo > p, "<=": hi <= p, "<": hi < p, "=": lo == hi == p}[rel]

    def to_json(self) -> dict:
        iv = self.interval
        out = {
            "query": format_query(self.query),
            "kind": self.query.kind,
            "mode": self.mode,
            "lo": fmt(iv.lo),
            "hi": fmt(iv.hi),
            "lo_decimal": decimal12(iv.lo),
            "hi_decimal": decimal12(iv.hi),
            "exact": self.exact,
            "conditioning_possible": iv.conditioning_possible,
            "derivation": list(self.derivation),
            "blocks": [list(b) for b in self.blocks],
        }
        if self.samples is not None:
            out["samples"] = self.samples
        if self.entailed is not None:
            out["entailed"] = self.entailed
        return out


@dataclass(frozen=True)
class ConsistencyReport:
    has_model: str  # "yes" | "no" | "unknown_in_interval_mode"
    messages: tuple = ()
    conflicts: tuple = ()

    def to_json(self) -> dict:
        return {"has_model": self.has_model, "messages": list(self.messages), "conflicts": list(self.conflicts)}


@dataclass(frozen=True)
class InferenceConfig:
    mode: str = "point"
    samples: int = DEFAULT_SAMPLES
    seed: int = 0
    trace: object = None  # called as trace(sweep, row_id, residual, ce) by the projection
    on_model: object = None  # called with every (space, constraint set) the engine builds

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.samples < 2:
            raise ValueError("samples must be at least 2")


# --------------------------------------------------------------------------
# blocks


def decompose_blocks(beliefs, constants=()) -> BlockDecomposition:
    """Finest partition of constants such that no belief sentence crosses blocks."""
    order = list(constants)
    for b in beliefs:
        for c in sorted(b.constants):
            if c not in order:
                order.append(c)
    parent = {c: c for c in order}

    def find(c):
        while parent[c] != c:
            parent[c] = parent[parent[c]]
            c = parent[c]
        return c

    for b in beliefs:
        cs = sorted(b.constants, key=order.index)
        for c in cs[1:]:
            ra, rb = find(cs[0]), find(c)
            if ra != rb:
                parent[max(ra, rb, key=order.index)] = min(ra, rb, key=order.index)
    groups = {}
    for c in order:
        groups.setdefault(find(c), []).append(c)
    return BlockDecomposition(tuple(tuple(g) for g in groups.values()))


# --------------------------------------------------------------------------
# statistical context


class _Context:
    """Statistical side of one knowledge base: relevant sentences, spaces, models."""

    def __init__(self, kb: KnowledgeBase, config: InferenceConfig):
        self.kb = kb
        self.config = config
        self.arity = dict(kb.predicates)
        self._spaces = {}
        self._models = {}
        self.sentences = kb.statistical
        if any(not s.is_axiom and (_nested(s)) for s in kb.statistical):
            full = Signature(kb.predicates)
            axioms = tuple(s.formula for s in kb.statistical if s.is_axiom)
            self.sentences = resolve_nested(kb.statistical, lambda k: self.space(full, k, axioms))

    def space(self, sig: Signature, k: int, axioms: tuple) -> AtomSpace:
        key = (sig, k, axioms)
        if key not in self._spaces:
            self._spaces[key] = build_atom_space(sig, k, axioms)
        return self._spaces[key]

    def select(self, preds, k: int, same_arity_only: bool):
        """Sentences connected to ``preds`` through shared predicates."""
        items = []
        for s in self.sentences:
            if s.is_axiom:
                items.append((s, predicates_of(s.formula)))
                continue
            width = len(s.formula.bound)
            if width > k or (same_arity_only and width != k):
                continue
            items.append((s, predicates_of(s.formula)))
        preds = set(preds)
        chosen = set()
        changed = True
        while changed:
            changed = False
            for i, (s, ps) in enumerate(items):
                if i not in chosen and (ps & preds or not ps):
                    chosen.add(i)
                    if not ps <= preds:
                        preds |= ps
                        changed = True
        picked = [items[i][0] for i in sorted(chosen)]
        sig = Signature(tuple(p for p in self.kb.predicates if p[0] in preds))
        axioms = tuple(s.formula for s in picked if s.is_axiom)
        return sig, axioms, tuple(s for s in picked if not s.is_axiom)

    def model(self, events, k: int, same_arity_only: bool = False) -> "_Model":
        """Constraint set over a ``k``-slot space fine enough for ``events``.

        ``events`` holds ``(formula, slot_map)`` pairs.
        """
        key = (tuple((f, tuple(sorted(m.items()))) for f, m in events), k, same_arity_only)
        if key not in self._models:
            preds = set()
            for f, _ in events:
                preds |= predicates_of(f)
            sig, axioms, sentences = self.select(preds, k, same_arity_only)
            space = self.space(sig, k, axioms)
            masks = [extension(f, space, m) for f, m in events]
            cs = compile_statistical(sentences, space, masks)
            if self.config.on_model is not None:
                self.config.on_model(space, cs)
            self._models[key] = _Model(space, cs, masks, sentences)
        return self._models[key]

    def stages(self, k: int):
        return (True, False) if k == 2 else (False,)


def _nested(s) -> bool:
    from .syntax import stat_terms

    return bool(stat_terms(s.formula.phi) or stat_terms(s.formula.psi))


@dataclass(eq=False)
class _Model:
    space: AtomSpace
    cs: LinearConstraintSet
    masks: list
    sentences: tuple
    samples: list = None


# --------------------------------------------------------------------------
# views of the statistical measure: pinned by LP, or one sampled measure


class _PointView:
    sampled = False

    def __init__(self, model: _Model):
        self.model = model
        self._feasible = None

    def check(self):
        if self._feasible is None:
            self._feasible = feasible(self.model.cs)[0]
        if not self._feasible:
            raise Infeasible("statistical sentences admit no measure", self.model.sentences)

    def null(self, mask) -> bool:
        self.check()
        return null_event(self.model.cs, mask)

    def jointly_positive(self, masks) -> bool:
        return all(not self.null(m) for m in masks)

    def conditional(self, e, b, label):
        self.check()
        iv = stat_entail_interval(self.model.cs, e, b)
        if not iv.conditioning_possible:
            raise NoModel(f"no admissible statistical measure gives {label} positive probability")
        if not iv.is_point:
            raise NonUnique(label, iv)
        return iv.lo

    def mass(self, m, label):
        return self.conditional(m, None, label)


class _SampleView:
    sampled = True

    def __init__(self, model: _Model, x: np.ndarray):
        self.model = model
        self.x = x

    def _p(self, mask) -> float:
        return float(self.x[self.model.cs.event(mask)].sum())

    def null(self, mask) -> bool:
        return self._p(mask) <= 1e-15

    def jointly_positive(self, masks) -> bool:
        return all(not self.null(m) for m in masks)

    def conditional(self, e, b, label):
        pb = self._p(b) if b is not None else 1.0
        if pb <= 1e-15:
            raise _SkipSample()
        pe = self._p(e & b) if b is not None else self._p(e)
        return pe / pb

    def mass(self, m, label):
        return self._p(m)


def _interior_point(cs: LinearConstraintSet) -> np.ndarray:
    """A measure of maximal support in the statistical polytope.

    The rows are homogeneous, so the feasible cone is closed under sums and
    maximising ``sum t`` with ``t <= y``, ``t <= 1`` charges every class that
    any feasible measure charges.
    """
    from scipy.optimize import linprog

    eq, ge = cs.matrices
    m = cs.n_vars
    zeros = lambda r: np.zeros((r, m))  # noqa: E731
    # variables (y, t): t - y <= 0 and -G y <= 0
    A_ub = np.hstack([-np.eye(m), np.eye(m)])
    if ge:
        A_ub = np.vstack([A_ub, np.hstack([-np.array(ge, dtype=float), zeros(len(ge))])])
    kwargs = {}
    if eq:
        kwargs = dict(A_eq=np.hstack([np.array(eq, dtype=float), zeros(len(eq))]), b_eq=np.zeros(len(eq)))
    res = linprog(np.r_[np.zeros(m), -np.ones(m)], A_ub=A_ub, b_ub=np.zeros(len(A_ub)),
                  bounds=[(0, None)] * m + [(0, 1)] * m, method="highs", **kwargs)
    if res.status != 0 or res.x[:m].sum() <= 0:
        raise Infeasible("statistical sentences admit no measure")
    y = np.clip(res.x[:m], 0, None)
    return np.asarray(cs.expand(y / y.sum()), dtype=float)


def _draw_samples(cs: LinearConstraintSet, k: int, rng) -> list:
    """Vertices of the statistical polytope for random objectives, plus mixtures."""
    eq, ge = cs.matrices
    A_eq = [[float(v) for v in r] for r in eq] + [[1.0] * cs.n_vars]
    b_eq = [0.0] * len(eq) + [1.0]
    A_ge = [[float(v) for v in r] for r in ge]
    vertices = []
    for _ in range(max(1, k // 2)):
        res = lp.highs(rng.normal(size=cs.n_vars), A_eq, b_eq, A_ge, [0.0] * len(A_ge))
        if not res.ok:
            raise Infeasible("statistical sentences admit no measure")
        x = np.asarray(cs.expand(np.asarray(res.x, dtype=float)), dtype=float)
        vertices.append(x / x.sum())
    V = np.array(vertices)
    # nudge vertices into the relative interior so no cell the polytope can charge is null
    V = (1 - VERTEX_SHRINK) * V + VERTEX_SHRINK * _interior_point(cs)
    out = list(V)
    while len(out) < k:
        out.append(rng.dirichlet(np.ones(len(V))) @ V)
    return out


# --------------------------------------------------------------------------
# one block of constants


def _conjuncts(f: Formula) -> list:
    if isinstance(f, And):
        return _conjuncts(f.left) + _conjuncts(f.right)
    return [] if isinstance(f, Top) else [f]


def _and(*fs: Formula) -> Formula:
    out = []
    for f in fs:
        for c in _conjuncts(f):
            if c not in out:
                out.append(c)
    return conj(*out)


def _label_cell(sig_row, events, masks) -> str:
    """Short description of a belief cell: its events, then informative negations."""
    if not masks:
        return "true"
    inside = [i for i, b in enumerate(sig_row) if b and not isinstance(events[i][0], Top)]
    keep = []
    for i in inside:
        redundant = any(j != i and not (masks[j] & ~masks[i]).any()
                        and ((masks[i] & ~masks[j]).any() or j < i) for j in inside)
        if not redundant and format_formula(events[i][0]) not in [format_formula(events[j][0]) for j in keep]:
            keep.append(i)
    core = np.logical_and.reduce([masks[i] for i in inside]) if inside else np.ones(len(masks[0]), dtype=bool)
    parts = [format_formula(events[i][0]) for i in keep]
    for i, b in enumerate(sig_row):
        if b or isinstance(events[i][0], Top):
            continue
        text = "!(" + format_formula(events[i][0]) + ")"
        if (masks[i] & core).any() and text not in parts:
            parts.append(text)
    return " & ".join(parts) if parts else "true"


@dataclass
class _Trace:
    derivation: list = field(default_factory=list)
    terms: list = field(default_factory=list)

    def add(self, line: str):
        if line not in self.derivation:
            self.derivation.append(line)


def _belief_specs(beliefs):
    """``(pos, cond, rel, p, tag)`` with ``pos = phi & psi``, in ``>=``/``=`` form."""
    out = []
    for b in beliefs:
        phi, rel, p = b.phi, b.rel, b.p
        if rel == "<=":
            phi, rel, p = Not(phi), ">=", 1 - p
        pos = _and(phi, b.psi)
        tag = (f"line {b.line}: " if b.line else "") + format_belief(b)
        out.append((pos, b.psi, rel, p, tag))
    return out


def _block_measure(ctx: _Context, consts: tuple, beliefs, formulas, view_for, trace: _Trace,
                   ratio: bool = False) -> list:
    """Belief probabilities ``nu(f)`` for each formula, over one block of constants.

    With ``ratio`` the formulas are a ``(numerator, denominator)`` pair and
    only their quotient is guaranteed: when the beliefs leave the cell masses
    open but every admissible choice gives the same quotient, ``[q, 1]`` is
    returned.
    """
    k = len(consts)
    if k > MAX_BLOCK_SLOTS:
        raise InferenceError(f"block {{{', '.join(consts)}}} needs {k} slots; at most {MAX_BLOCK_SLOTS} are supported")
    slots = {c: i + 1 for i, c in enumerate(consts)}
    specs = _belief_specs(beliefs)
    bel_events = [(f, slots) for s in specs for f in (s[0], s[1])]
    events = bel_events + [(f, slots) for f in formulas]
    last = None
    for same_arity in ctx.stages(k):
        try:
            return _block_measure_at(ctx, consts, specs, events, len(bel_events), formulas,
                                     view_for, trace, k, same_arity, ratio)
        except NonUnique as exc:
            last = exc
    raise last


def _block_measure_at(ctx, consts, specs, events, n_bel, formulas, view_for, trace, k, same_arity, ratio):
    model = ctx.model(events, k, same_arity)
    view = view_for(model)
    masks = model.masks
    space = model.space
    block = "{" + ", ".join(consts) + "}"
    # cells of the algebra generated by the belief events
    if n_bel:
        sig = np.stack(masks[:n_bel], axis=1)
        keys, cell_of = np.unique(sig, axis=0, return_inverse=True)
        cell_of = cell_of.reshape(-1)
    else:
        keys, cell_of = np.zeros((1, 0), dtype=bool), np.zeros(len(space), dtype=np.int64)
    n_cells = len(keys)
    cell_masks = [cell_of == c for c in range(n_cells)]
    labels = [_label_cell(keys[c], events[:n_bel], masks[:n_bel]) for c in range(n_cells)]
    bel_rows = []
    for i, (pos, cond, rel, p, tag) in enumerate(specs):
        bel_rows.append((keys[:, 2 * i], keys[:, 2 * i + 1], rel, p, tag))
    bel = constraint_set(n_cells, bel_rows)
    allowed = [not view.null(m) for m in cell_masks]
    sigs = [tuple(r.coeffs.get(c, 0) for r in bel.rows) for c in range(n_cells)]
    weights = pinned_cell_weights(bel, np.arange(n_cells), sigs, allowed) if specs else [Fraction(1)]
    if weights is not None:
        positive = [cell_masks[c] for c in range(n_cells) if weights[c] > 0]
        if not view.jointly_positive(positive):
            raise NoModel(f"beliefs about {block} need cells the statistics make null")
        if specs:
            trace.add(f"beliefs about {block} pin the partition "
                      + "; ".join(f"{labels[c]}: {fmt(w)}" for c, w in enumerate(weights) if w > 0)
                      + " -> Jeffrey's rule (Corollary 3.4)")
        else:
            trace.add(f"no beliefs about {block}: direct inference, nu = mu")
    elif ratio and not view.sampled:
        q = _constant_ratio(bel, cell_masks, allowed, masks[n_bel:], formulas, labels, view)
        if q is not None:
            trace.add(f"beliefs about {block} leave the cell masses open, but every admissible belief "
                      f"measure gives the query the same value {fmt(q)} (Theorem 4.1 reasoning by cases)")
            return [q, Fraction(1)]
    if weights is None:
        mu0 = []
        for c in range(n_cells):
            mu0.append(view.mass(cell_masks[c], f"[{labels[c]}]") if allowed[c] else 0)
        total = sum(mu0)
        mu0 = np.array([float(v) / float(total) for v in mu0])
        res = ce_project(mu0, bel, trace=ctx.config.trace)
        weights = [float(v) for v in res.nu]
        trace.add(f"beliefs about {block} projected by {res.method} I-projection over "
                  f"{n_cells} cells ({res.iterations} sweeps, CE {res.ce_value:.6g})")
    out = []
    for f, mask in zip(formulas, masks[n_bel:]):
        total = 0
        mixed = False
        for c in range(n_cells):
            w = weights[c]
            if w == 0:
                continue
            inside = mask & cell_masks[c]
            if not inside.any():
                continue
            if np.array_equal(inside, cell_masks[c]):
                value = 1
            else:
                mixed = True
                value = view.conditional(mask, cell_masks[c], f"[{format_formula(f)} | {labels[c]}]")
            total = total + w * value
            trace.terms.append((f"{format_formula(f)} | {labels[c]}", w, value))
        if mixed:
            trace.add("Theorem 3.3 mixing: nu(E) = sum_B nu(B) mu(E | B) over the belief cells")
        out.append(total)
    return out


def _constant_ratio(bel, cell_masks, allowed, fmasks, formulas, labels, view):
    """The quotient ``nu(num) / nu(den)`` if it is the same for all cell masses in ``bel``."""
    num, den = fmasks
    a, b = [], []
    for c, cm in enumerate(cell_masks):
        if not allowed[c] or not (den & cm).any():
            a.append(Fraction(0))
            b.append(Fraction(0))
            continue
        vals = []
        for m, f in ((num, formulas[0]), (den, formulas[1])):
            inside = m & cm
            if not inside.any():
                vals.append(Fraction(0))
            elif np.array_equal(inside, cm):
                vals.append(Fraction(1))
            else:
                vals.append(view.conditional(m, cm, f"[{format_formula(f)} | {labels[c]}]"))
        a.append(Fraction(vals[0]))
        b.append(Fraction(vals[1]))
    eq, ge = bel.matrices
    n = bel.n
    A_eq = list(eq) + [b] + [[1 if j == c else 0 for j in range(n)] for c in range(n) if not allowed[c]]
    b_eq = [0] * len(eq) + [1] + [0] * (n - sum(allowed))
    lo = lp.simplex(a, A_eq, b_eq, ge, [0] * len(ge))
    if not lo.ok:
        return None
    hi = lp.simplex(a, A_eq, b_eq, ge, [0] * len(ge), maximize=True)
    return lo.value if hi.ok and lo.value == hi.value else None


# --------------------------------------------------------------------------
# queries spanning two blocks


def _atoms_of(f: Formula) -> list:
    seen = []
    for node in walk(f):
        if isinstance(node, (Atom, Eq)) and node not in seen:
            seen.append(node)
    return seen


def _truth(f: Formula, value: dict) -> bool:
    if isinstance(f, (Atom, Eq)):
        return value[f]
    if isinstance(f, Top):
        return True
    name = type(f).__name__
    if name == "Bottom":
        return False
    if name == "Not":
        return not _truth(f.arg, value)
    a, b = _truth(f.left, value), _truth(f.right, value)
    return {"And": a and b, "Or": a or b, "Implies": (not a) or b, "Iff": a == b}[name]


def _literal_conj(atoms, bits) -> Formula:
    return conj(*[a if v else Not(a) for a, v in zip(atoms, bits)])


def _cross_block(ctx, query, formulas, blocks, beliefs_of, view_for, trace) -> list:
    (a,), (b,) = blocks
    owned = {a: set(), b: set()}
    crossing = []
    for f in formulas:
        for node in _atoms_of(f):
            cs = constants_of(node)
            if cs <= {a}:
                owned[a].add(node)
            elif cs <= {b}:
                owned[b].add(node)
            else:
                crossing.append(node)
    trace.add(f"Theorem 4.3: blocks {{{a}}} and {{{b}}} share no belief sentence, so nu is the product "
              "of the block measures")
    if not crossing:
        return _product_path(ctx, formulas, a, b, owned, beliefs_of, view_for, trace)
    return _mediator_path(ctx, formulas, a, b, crossing, beliefs_of, view_for, trace)


def _product_path(ctx, formulas, a, b, owned, beliefs_of, view_for, trace):
    atoms = {c: sorted(owned[c], key=format_formula) for c in (a, b)}
    assignments = {c: list(itertools.product((True, False), repeat=len(atoms[c]))) for c in (a, b)}
    probs = {}
    for c in (a, b):
        conjs = [_literal_conj(atoms[c], bits) for bits in assignments[c]]
        probs[c] = _block_measure(ctx, (c,), beliefs_of(c), conjs, view_for, trace)
    out = []
    for f in formulas:
        total = 0
        for (ba, pa), (bb, pb) in itertools.product(zip(assignments[a], probs[a]), zip(assignments[b], probs[b])):
            if pa == 0 or pb == 0:
                continue
            value = dict(zip(atoms[a], ba)) | dict(zip(atoms[b], bb))
            if _truth(f, value):
                total = total + pa * pb
        out.append(total)
    return out


def _mediator_generators(ctx, crossing) -> list:
    """Unary predicates conditioned on by two-variable sentences about the crossing predicates."""
    cross_preds = {n.pred for n in crossing if isinstance(n, Atom)}
    gens = []
    for s in ctx.sentences:
        if s.is_axiom or len(s.formula.bound) != 2:
            continue
        term = s.formula
        if not (predicates_of(term.phi) | predicates_of(term.psi)) & cross_preds:
            continue
        for node in walk(term.psi):
            if isinstance(node, Atom) and ctx.arity[node.pred] == 1 and node.pred not in gens:
                gens.append(node.pred)
    return [p for p, _ in ctx.kb.predicates if p in gens]


def _mediator_path(ctx, formulas, a, b, crossing, beliefs_of, view_for, trace):
    gens = _mediator_generators(ctx, crossing)
    ca, cb = Const(a), Const(b)
    slots = {a: 1, b: 2}
    same = Eq(ca, cb)
    lits = {c: [Atom(p, (Const(c),)) for p in gens] for c in (a, b)}
    assignments = list(itertools.product((True, False), repeat=len(gens)))
    cells = {c: [_literal_conj(lits[c], bits) for bits in assignments] for c in (a, b)}
    weights = {c: _block_measure(ctx, (c,), beliefs_of(c), cells[c], view_for, trace) for c in (a, b)}
    mediators = [And(conj(fa, fb), Not(same)) for fa in cells[a] for fb in cells[b]]
    events = [(f, slots) for f in formulas] + [(same, slots)] + [(m, slots) for m in mediators]
    gen_text = ", ".join(f"{p}({a}), {p}({b})" for p in gens) or "none"
    last = None
    for same_arity in ctx.stages(2):
        try:
            model = ctx.model(events, 2, same_arity)
            view = view_for(model)
            nf = len(formulas)
            diag = model.masks[nf]
            if not view.null(diag):
                raise NonUnique(f"{a} == {b}")
            out = [0] * nf
            terms = []
            for i, m in enumerate(mediators):
                w = weights[a][i // len(assignments)] * weights[b][i % len(assignments)]
                if w == 0:
                    continue
                mmask = model.masks[nf + 1 + i]
                for j in range(nf):
                    label = f"[{format_formula(formulas[j])} | {format_formula(m)}]"
                    value = view.conditional(model.masks[j], mmask, label)
                    out[j] = out[j] + w * value
                    terms.append((f"{format_formula(formulas[j])} | {format_formula(m)}", w, value))
            break
        except NonUnique as exc:
            last = exc
    else:
        raise last
    trace.terms.extend(terms)
    trace.add(f"statistics give mu({a} == {b}) = 0, so nu({a} == {b}) = 0")
    trace.add(f"Jeffrey's rule over the mediator partition generated by {gen_text} (Theorem 3.3); "
              "the query is taken to depend on the block beliefs only through this partition")
    return out


# --------------------------------------------------------------------------
# entry points


def _subjective_values(ctx, query, view_for, trace):
    kb = ctx.kb
    blocks = decompose_blocks(kb.beliefs, kb.constants)
    subjects = query.subjects
    involved = []
    for c in subjects:
        blk = blocks.block_of(c)
        if blk not in involved:
            involved.append(blk)

    def beliefs_of(*consts):
        keep = set(consts)
        return [b for b in kb.beliefs if b.constants and b.constants <= keep]

    formulas = [_and(query.phi, query.psi), query.psi]
    if len(involved) == 1:
        consts = involved[0]
        if len(consts) > 1:
            trace.add(f"block {{{', '.join(consts)}}} is projected jointly over {len(consts)} slots")
        return _block_measure(ctx, consts, beliefs_of(*consts), formulas, view_for, trace, ratio=True), blocks
    if len(involved) == 2 and all(len(b) == 1 for b in involved):
        return _cross_block(ctx, query, formulas, involved, beliefs_of, view_for, trace), blocks
    raise InferenceError("query needs more than two constants after block decomposition")


def _ratio(num, den, trace):
    if den == 0 or (not isinstance(den, Fraction) and abs(den) <= 1e-15):
        raise InferenceError("conditioning event has belief zero")
    return num / den


def answer(kb: KnowledgeBase, query: Query, mode: str = "point", config: InferenceConfig | None = None) -> QueryResult:
    """Answer a statistical or subjective query against ``kb``."""
    config = config or InferenceConfig(mode=mode)
    if config.mode != mode and mode != "point":
        config = replace(config, mode=mode)
    ctx = _Context(kb, config)
    if query.kind == "statistical":
        return _statistical(ctx, query)
    trace = _Trace()
    if config.mode == "point":
        values, blocks = _subjective_values(ctx, query, _PointView, trace)
        v = _ratio(values[0], values[1], trace)
        exact = all(isinstance(x, (Fraction, int)) for x in values)
        if not exact:
            v = float(v)
        elif not isinstance(v, Fraction):
            v = Fraction(v)
        return QueryResult(query, Interval(v, v, exact=exact), "exact_point", tuple(trace.derivation),
                           blocks.blocks, tuple(trace.terms))
    return _sampled(ctx, query, config, trace)


def _sampled(ctx, query, config, trace):
    rng = np.random.default_rng(config.seed)
    results = []
    blocks = decompose_blocks(ctx.kb.beliefs, ctx.kb.constants)
    for s in range(config.samples):
        def view_for(model, s=s):
            if model.samples is None:
                model.samples = _draw_samples(model.cs, config.samples, rng)
            return _SampleView(model, model.samples[s])

        local = _Trace()
        try:
            values, blocks = _subjective_values(ctx, query, view_for, local)
            results.append(float(_ratio(values[0], values[1], local)))
        except (_SkipSample, NoModel):
            continue
        except InferenceError as exc:
            if "belief zero" in str(exc):
                continue
            raise
        for line in local.derivation:
            trace.add(line)
    if not results:
        raise NoModel("no sampled statistical measure admits a belief measure")
    lo, hi = min(results), max(results)
    trace.add(f"interval from {len(results)} sampled statistical measures (vertices and mixtures); "
              "not a certified bound")
    return QueryResult(query, Interval(lo, hi, exact=False), "sampled_interval", tuple(trace.derivation),
                       blocks.blocks, (), len(results))


def _statistical(ctx: _Context, query: Query) -> QueryResult:
    k = len(query.bound)
    if k > MAX_BLOCK_SLOTS:
        raise InferenceError(f"statistical query binds {k} variables; at most {MAX_BLOCK_SLOTS} supported")
    slots = {v.name: i + 1 for i, v in enumerate(query.bound)}
    model = ctx.model([(_and(query.phi, query.psi), slots), (query.psi, slots)], k)
    if not feasible(model.cs)[0]:
        raise Infeasible("statistical sentences admit no measure", model.sentences)
    iv = stat_entail_interval(model.cs, model.masks[0], model.masks[1])
    derivation = [f"linear program over {model.cs.n} atom classes ({len(model.space)} atoms, {k} slot"
                  f"{'s' if k > 1 else ''}); Charnes-Cooper normalization of mu(phi & psi) / mu(psi)"]
    if k == 2:
        derivation.append("exchangeability rows: mu^2 is invariant under swapping the slots "
                          "(slot independence is not imposed)")
    if not iv.conditioning_possible:
        derivation.append("the condition has probability zero in every admissible measure")
    if not iv.exact:
        derivation.append("solved in floating point (HiGHS); endpoints not certified")
    mode = "exact_point" if iv.is_point and iv.exact else "exact_interval"
    blocks = decompose_blocks(ctx.kb.beliefs, ctx.kb.constants)
    return QueryResult(query, iv, mode, tuple(derivation), blocks.blocks)


def case_split(kb: KnowledgeBase, query: Query, config: InferenceConfig | None = None) -> QueryResult | None:
    """Reasoning by cases: answer from the statistics plus one case's beliefs.

    Applies when the unconditional beliefs about the query's constant name
    exclusive cases, every other belief is conditioned inside one case, and
    the query conditions on one of the cases.  Returns None otherwise.
    """
    if query.kind != "subjective" or len(query.subjects) != 1:
        return None
    (a,) = query.subjects
    beliefs = [b for b in kb.beliefs if a in b.constants]
    if any(b.constants != {a} for b in beliefs):
        return None
    cases = [b for b in beliefs if isinstance(b.psi, Top) and b.rel in (">=", "=")]
    others = [b for b in beliefs if b not in cases]
    if not cases or len(cases) + len(others) != len(beliefs):
        return None
    ctx = _Context(kb, config or InferenceConfig())
    slots = {a: 1}
    formulas = [b.phi for b in cases] + [b.psi for b in others] + [query.psi]
    preds = set()
    for f in formulas:
        preds |= predicates_of(f)
    sig, axioms, _ = ctx.select(preds, 1, False)
    space = ctx.space(sig, 1, axioms)
    ext = [extension(f, space, slots) for f in formulas]
    case_ext = ext[:len(cases)]
    for i, j in itertools.combinations(range(len(cases)), 2):
        if (case_ext[i] & case_ext[j]).any():
            return None
    rest = ~np.logical_or.reduce(case_ext)
    all_cases = case_ext + ([rest] if rest.any() else [])
    owner = []
    for e in ext[len(cases):-1]:
        if not e.any():
            return None
        hits = [i for i, c in enumerate(all_cases) if not (e & ~c).any()]
        if len(hits) != 1:
            return None
        owner.append(hits[0])
    target = [i for i, c in enumerate(all_cases) if np.array_equal(c, ext[-1])]
    if not target:
        return None
    i = target[0]
    kept = [b for b, o in zip(others, owner) if o == i]
    dropped = [b for b in beliefs if b not in kept]
    sub = kb.replace(beliefs=[b for b in kb.beliefs if b not in dropped])
    result = answer(sub, query, "point", config)
    case_text = format_formula(cases[i].phi) if i < len(cases) else "none of the named cases"
    lines = (f"Theorem 4.1: cases are exclusive; conditioning on {case_text} lets "
             f"{len(dropped)} belief sentence(s) be ignored",) + result.derivation
    return replace(result, derivation=lines)


def check_kb(kb: KnowledgeBase, config: InferenceConfig | None = None) -> ConsistencyReport:
    """Whether the statistical sentences are satisfiable and every block of beliefs has a model."""
    ctx = _Context(kb, config or InferenceConfig())
    messages, conflicts = [], []
    widths = {1} | {len(s.formula.bound) for s in ctx.sentences if not s.is_axiom}
    # statistical polytope, one predicate component at a time
    for k in sorted(widths):
        if k > MAX_BLOCK_SLOTS:
            return ConsistencyReport("unknown_in_interval_mode", (f"sentences binding {k} variables are not supported",))
        remaining = {p for p, _ in kb.predicates}
        seen_sentences = set()
        while True:
            if remaining:
                seed = next(p for p, _ in kb.predicates if p in remaining)
                sig, axioms, sentences = ctx.select({seed}, k, False)
                remaining -= {p for p, _ in sig.predicates}
            else:
                sig, axioms, sentences = ctx.select(set(), k, False)
            fresh = [s for s in sentences if id(s) not in seen_sentences]
            seen_sentences |= {id(s) for s in sentences}
            space = ctx.space(sig, k, axioms)
            if len(space) == 0:
                return ConsistencyReport("no", ("the axioms admit no atom",),
                                         tuple(format_stat(s) for s in ctx.sentences if s.is_axiom))
            if fresh or not remaining:
                cs = compile_statistical(sentences, space)
                if not feasible(cs)[0]:
                    core = conflicting_sentences(sentences, space)
                    return ConsistencyReport("no", (f"statistical sentences are jointly unsatisfiable ({k} slot(s))",),
                                             tuple(_tag(s) for s in core))
            if not remaining:
                break
    messages.append("statistical sentences: satisfiable")
    blocks = decompose_blocks(kb.beliefs, kb.constants)
    for blk in blocks.blocks:
        beliefs = [b for b in kb.beliefs if b.constants and b.constants <= set(blk)]
        if not beliefs:
            continue
        if len(blk) > MAX_BLOCK_SLOTS:
            messages.append(f"block {{{', '.join(blk)}}}: too many constants to check")
            return ConsistencyReport("unknown_in_interval_mode", tuple(messages))
        bad = _belief_conflict(ctx, blk, beliefs)
        if bad:
            messages.append(f"beliefs about {{{', '.join(blk)}}} admit no measure absolutely continuous "
                            "with respect to the statistics")
            return ConsistencyReport("no", tuple(messages), tuple(_btag(b) for b in bad))
        messages.append(f"beliefs about {{{', '.join(blk)}}}: satisfiable")
    return ConsistencyReport("yes", tuple(messages))


def _tag(s) -> str:
    return (f"line {s.line}: " if s.line else "") + format_stat(s)


def _btag(b: BeliefSentence) -> str:
    return (f"line {b.line}: " if b.line else "") + format_belief(b)


def _beliefs_admissible(ctx, blk, beliefs) -> bool:
    k = len(blk)
    slots = {c: i + 1 for i, c in enumerate(blk)}
    specs = _belief_specs(beliefs)
    events = [(f, slots) for s in specs for f in (s[0], s[1])]
    model = ctx.model(events, k, False)
    sig = np.stack(model.masks, axis=1)
    keys, cell_of = np.unique(sig, axis=0, return_inverse=True)
    cell_of = cell_of.reshape(-1)
    rows = [(keys[:, 2 * i], keys[:, 2 * i + 1], rel, p) for i, (_, _, rel, p, _) in enumerate(specs)]
    bel = constraint_set(len(keys), rows)
    null = [null_event(model.cs, cell_of == c) for c in range(len(keys))]
    eq, ge = bel.matrices
    A_eq = list(eq) + [[1] * len(keys)] + [[1 if j == c else 0 for j in range(len(keys))] for c in range(len(keys)) if null[c]]
    b_eq = [0] * len(eq) + [1] + [0] * sum(null)
    res = lp.simplex([0] * len(keys), A_eq, b_eq, ge, [0] * len(ge))
    return res.ok


def _belief_conflict(ctx, blk, beliefs) -> list:
    if _beliefs_admissible(ctx, blk, beliefs):
        return []
    core = list(beliefs)
    i = 0
    while i < len(core):
        trial = core[:i] + core[i + 1:]
        if trial and not _beliefs_admissible(ctx, blk, trial):
            core = trial
        else:
            i += 1
    return core
