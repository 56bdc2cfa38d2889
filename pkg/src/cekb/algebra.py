"""Finite atom spaces and formula extensions.

An atom is a complete truth assignment to the ground atoms obtained by
instantiating every predicate at placeholder slots ``1..k``, plus the equality
indicator ``1==2`` when ``k == 2``.  The domain itself is never materialised:
the atoms are the cells of the finite algebra that every formula over ``k``
slots is measurable in.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass, field

import numpy as np

from .syntax import (
    And, Atom, Bottom, Eq, Exists, Forall, Formula, Iff, Implies, Not, Or, StatTerm, Top,
    format_formula,
)

DEFAULT_ATOM_CAP = 2 ** 20
RAW_ENUMERATION_LIMIT = 2 ** 26
_CHUNK = 2 ** 18


class AlgebraError(ValueError):
    pass


class AtomSpaceTooLarge(AlgebraError):
    pass


def atom_cap() -> int:
    """Size cap on atom spaces; ``CEKB_ATOM_CAP`` overrides the default."""
    value = os.environ.get("CEKB_ATOM_CAP")
    return int(value) if value else DEFAULT_ATOM_CAP


@dataclass(frozen=True)
class Signature:
    predicates: tuple  # ((name, arity), ...)
    constants: tuple = ()

    def __post_init__(self):
        for name, arity in self.predicates:
            if arity not in (1, 2):
                raise AlgebraError(f"predicate {name} has arity {arity}; only 1 and 2 are supported")

    def restrict(self, names) -> "Signature":
        names = set(names)
        return Signature(tuple(p for p in self.predicates if p[0] in names), self.constants)


def ground_atoms(sig: Signature, k: int) -> tuple:
    """Ground atoms in canonical order: unary slots, binary slot pairs, then ``1==2``."""
    slots = range(1, k + 1)
    out = [(name, (i,)) for name, ar in sig.predicates if ar == 1 for i in slots]
    out += [(name, (i, j)) for name, ar in sig.predicates if ar == 2 for i in slots for j in slots]
    if k == 2:
        out.append(("==", (1, 2)))
    return tuple(out)


def label(ground: tuple) -> str:
    name, slots = ground
    if name == "==":
        return "1==2"
    if len(slots) == 1:
        return f"{name}@{slots[0]}"
    return f"{name}({','.join(map(str, slots))})"


@dataclass(frozen=True, eq=False)
class AtomSpace:
    signature: Signature
    arity: int
    ground_atoms: tuple
    bits: np.ndarray = field(repr=False)  # (n_atoms, n_ground) bool
    codes: np.ndarray = field(repr=False)  # sorted integer encoding of each row
    swap: np.ndarray = field(repr=False)
    axioms: tuple = ()
    index: dict = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.bits)

    def column(self, ground: tuple) -> np.ndarray:
        try:
            return self.bits[:, self.index[ground]]
        except KeyError:
            raise AlgebraError(f"ground atom {label(ground)} not in this atom space") from None

    def full(self) -> np.ndarray:
        return np.ones(len(self), dtype=bool)

    def empty(self) -> np.ndarray:
        return np.zeros(len(self), dtype=bool)

    def atom_string(self, i: int) -> str:
        return "".join("1" if b else "0" for b in self.bits[i])

    def dump(self) -> str:
        header = "# " + " ".join(label(g) for g in self.ground_atoms)
        return "\n".join([header] + [self.atom_string(i) for i in range(len(self))]) + "\n"


def _decode(codes: np.ndarray, g: int) -> np.ndarray:
    shifts = np.arange(g - 1, -1, -1, dtype=np.int64)
    return ((codes[:, None] >> shifts) & 1).astype(bool)


def _encode(bits: np.ndarray) -> np.ndarray:
    g = bits.shape[1]
    weights = (np.int64(1) << np.arange(g - 1, -1, -1, dtype=np.int64))
    return bits.astype(np.int64) @ weights


def _candidate_codes(grounds: tuple, k: int):
    """Yield chunks of codes consistent with the equality laws, in sorted order."""
    g = len(grounds)
    if 2 ** g > RAW_ENUMERATION_LIMIT:
        raise AtomSpaceTooLarge(f"{g} ground atoms exceed the enumeration limit")
    if k == 1:
        for lo in range(0, 2 ** g, _CHUNK):
            yield np.arange(lo, min(lo + _CHUNK, 2 ** g), dtype=np.int64)
        return
    # k == 2: ``1==2`` is the last ground atom; off-diagonal codes are the even ones
    index = {a: i for i, a in enumerate(grounds)}
    off = np.arange(0, 2 ** g, 2, dtype=np.int64)
    free = [a for a in grounds if a[0] != "==" and a[1] in ((1,), (1, 1))]
    diag = []
    for values in itertools.product((0, 1), repeat=len(free)):
        row = np.zeros(g, dtype=bool)
        for (name, slots), v in zip(free, values):
            if len(slots) == 1:
                copies = [(name, (1,)), (name, (2,))]
            else:
                copies = [(name, s) for s in ((1, 1), (1, 2), (2, 1), (2, 2))]
            for c in copies:
                row[index[c]] = bool(v)
        row[index[("==", (1, 2))]] = True
        diag.append(row)
    diag_codes = _encode(np.array(diag, dtype=bool).reshape(len(diag), g))
    codes = np.sort(np.concatenate([off, diag_codes]))
    for lo in range(0, len(codes), _CHUNK):
        yield codes[lo:lo + _CHUNK]


def _split_axiom(f: Formula):
    """Universal prefix and quantifier-free matrix of an axiom."""
    names = []
    while isinstance(f, Forall):
        names.extend(v.name for v in f.vars)
        f = f.body
    for node in _nodes(f):
        if isinstance(node, Exists):
            raise AlgebraError(f"existential quantifier outside the compiled fragment: {format_formula(f)}")
        if isinstance(node, Forall):
            raise AlgebraError(f"axiom is not in universal prenex form: {format_formula(f)}")
    if len(set(names)) > 2:
        raise AlgebraError("axioms may quantify over at most two variables")
    return tuple(dict.fromkeys(names)), f


def _nodes(f):
    yield f
    for child in ("arg", "left", "right", "body", "phi", "psi"):
        sub = getattr(f, child, None)
        if isinstance(sub, Formula):
            yield from _nodes(sub)


def axiom_instances(axiom: Formula, k: int):
    """Matrix and every slot assignment of the universal variables over ``1..k``."""
    names, matrix = _split_axiom(axiom)
    for slots in itertools.product(range(1, k + 1), repeat=len(names)):
        yield matrix, dict(zip(names, slots))


def build_atom_space(sig: Signature, k: int, axioms=(), cap: int | None = None) -> AtomSpace:
    """Enumerate the atoms over ``k`` slots consistent with equality and ``axioms``.

    Universal axioms are enforced at every instantiation of their variables by
    slots, so an atom survives only if the tuple it describes satisfies them.
    """
    if k not in (1, 2):
        raise AlgebraError(f"atom space arity must be 1 or 2, got {k}")
    cap = atom_cap() if cap is None else cap
    grounds = ground_atoms(sig, k)
    index = {a: i for i, a in enumerate(grounds)}
    instances = [inst for ax in axioms for inst in axiom_instances(ax, k)]
    kept = []
    total = 0
    for codes in _candidate_codes(grounds, k):
        bits = _decode(codes, len(grounds))
        mask = np.ones(len(codes), dtype=bool)
        for matrix, slot_map in instances:
            mask &= _evaluate(matrix, bits, index, slot_map)
        total += int(mask.sum())
        if total > cap:
            raise AtomSpaceTooLarge(f"atom space over {len(grounds)} ground atoms exceeds cap {cap}")
        kept.append(codes[mask])
    codes = np.concatenate(kept) if kept else np.zeros(0, dtype=np.int64)
    bits = _decode(codes, len(grounds)) if len(codes) else np.zeros((0, len(grounds)), dtype=bool)
    swap = _swap_permutation(bits, codes, grounds, index) if k == 2 else np.arange(len(codes))
    return AtomSpace(sig, k, grounds, bits, codes, swap, tuple(axioms), index)


def _swap_permutation(bits, codes, grounds, index):
    flip = {1: 2, 2: 1}
    order = [index[(name, tuple(flip[s] for s in slots))] if name != "==" else index[(name, slots)]
             for name, slots in grounds]
    swapped = _encode(bits[:, order])
    perm = np.searchsorted(codes, swapped)
    if len(codes) and not np.array_equal(codes[perm], swapped):
        raise AlgebraError("atom space is not closed under exchanging slots")
    return perm


def _slot(slot_map: dict, term) -> int:
    try:
        return slot_map[term.name]
    except KeyError:
        raise AlgebraError(f"symbol {term.name!r} is not mapped to a slot") from None


def _evaluate(f: Formula, bits: np.ndarray, index: dict, slot_map: dict) -> np.ndarray:
    n = len(bits)
    if isinstance(f, Top):
        return np.ones(n, dtype=bool)
    if isinstance(f, Bottom):
        return np.zeros(n, dtype=bool)
    if isinstance(f, Atom):
        key = (f.pred, tuple(_slot(slot_map, t) for t in f.args))
        if key not in index:
            raise AlgebraError(f"ground atom {label(key)} not in this atom space")
        return bits[:, index[key]]
    if isinstance(f, Eq):
        i, j = _slot(slot_map, f.left), _slot(slot_map, f.right)
        if i == j:
            return np.ones(n, dtype=bool)
        return bits[:, index[("==", (min(i, j), max(i, j)))]]
    if isinstance(f, Not):
        return ~_evaluate(f.arg, bits, index, slot_map)
    if isinstance(f, And):
        return _evaluate(f.left, bits, index, slot_map) & _evaluate(f.right, bits, index, slot_map)
    if isinstance(f, Or):
        return _evaluate(f.left, bits, index, slot_map) | _evaluate(f.right, bits, index, slot_map)
    if isinstance(f, Implies):
        return ~_evaluate(f.left, bits, index, slot_map) | _evaluate(f.right, bits, index, slot_map)
    if isinstance(f, Iff):
        return _evaluate(f.left, bits, index, slot_map) == _evaluate(f.right, bits, index, slot_map)
    if isinstance(f, StatTerm):
        raise AlgebraError("statistical term must be resolved before computing an extension")
    if isinstance(f, (Forall, Exists)):
        raise AlgebraError("quantified formula has no extension over slots")
    raise TypeError(f"not a formula: {f!r}")


def extension(f: Formula, space: AtomSpace, slot_map: dict) -> np.ndarray:
    """Boolean mask of the atoms satisfying ``f`` when its symbols sit at ``slot_map``."""
    for slot in slot_map.values():
        if not 1 <= slot <= space.arity:
            raise AlgebraError(f"slot {slot} outside atom space of arity {space.arity}")
    return _evaluate(f, space.bits, space.index, slot_map)


def product_embed(space1: AtomSpace):
    """Arity-2 space over the same signature with slot projections into ``space1``.

    Returns ``(space2, proj1, proj2)`` where ``projN[i]`` is the arity-1 atom
    obtained by restricting arity-2 atom ``i`` to slot ``N``.
    """
    if space1.arity != 1:
        raise AlgebraError("product_embed expects an arity-1 space")
    space2 = build_atom_space(space1.signature, 2, space1.axioms)
    projections = []
    for slot in (1, 2):
        cols = [space2.index[(name, (slot,) * len(slots))] for name, slots in space1.ground_atoms]
        restricted = _encode(space2.bits[:, cols]) if cols else np.zeros(len(space2), dtype=np.int64)
        proj = np.searchsorted(space1.codes, restricted)
        if len(space2) and (proj.max(initial=0) >= len(space1) or not np.array_equal(space1.codes[proj], restricted)):
            raise AlgebraError("slot restriction leaves the arity-1 space")
        projections.append(proj)
    return space2, projections[0], projections[1]
