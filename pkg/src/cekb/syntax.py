"""Two-sorted language of statistical and belief sentences.

A knowledge base is a line-oriented document::

    pred HappyEnd/1
    pred Better/2
    const f1, f2
    [HappyEnd(v) | American(v) & Mystery(v)]{v} = 0.8
    axiom forall v0 . !Better(v0, v0)
    prob(American(f1) & Mystery(f1)) = 0.2

Statistical terms ``[phi | psi]{v} rel p`` constrain the domain measure, belief
sentences ``prob(phi | psi) rel p`` constrain the belief measure of the named
constants.  Inside ``[...]`` and ``prob(...)`` the first top-level ``|``
separates the conditioning formula; a disjunction on the left of it must be
parenthesised.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional, Union

MAX_ARITY = 2
RELATIONS = (">=", "<=", "=", ">", "<")
KEYWORDS = {"pred", "const", "axiom", "prob", "forall", "exists", "true", "false"}


class KBSyntaxError(ValueError):
    """Parse or validation error located at ``line:col`` (1-based)."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.message = message
        self.line = line
        self.col = col
        super().__init__(f"{line}:{col}: {message}")


# --------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    name: str


Term = Union[Var, Const]


class Formula:
    __slots__ = ()


@dataclass(frozen=True)
class Top(Formula):
    pass


@dataclass(frozen=True)
class Bottom(Formula):
    pass


@dataclass(frozen=True)
class Atom(Formula):
    pred: str
    args: tuple


@dataclass(frozen=True)
class Eq(Formula):
    left: Term
    right: Term


@dataclass(frozen=True)
class Not(Formula):
    arg: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Iff(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Forall(Formula):
    vars: tuple
    body: Formula


@dataclass(frozen=True)
class Exists(Formula):
    vars: tuple
    body: Formula


@dataclass(frozen=True)
class StatTerm(Formula):
    """``[phi | psi]_(bound) rel p``."""

    phi: Formula
    psi: Formula
    bound: tuple
    rel: str
    p: Fraction


TOP = Top()
BOTTOM = Bottom()


@dataclass(frozen=True)
class StatSentence:
    """A closed statistical formula: a top-level StatTerm or a first-order axiom."""

    formula: Formula
    line: int = field(default=0, compare=False)

    @property
    def is_axiom(self) -> bool:
        return not isinstance(self.formula, StatTerm)

    def __str__(self) -> str:
        return format_stat(self)


@dataclass(frozen=True)
class BeliefSentence:
    phi: Formula
    psi: Formula
    rel: str
    p: Fraction
    line: int = field(default=0, compare=False)

    @property
    def constants(self) -> frozenset:
        return constants_of(self.phi) | constants_of(self.psi)

    def __str__(self) -> str:
        return format_belief(self)


@dataclass(frozen=True)
class KnowledgeBase:
    predicates: tuple = ()  # ((name, arity), ...) in declaration order
    constants: tuple = ()
    statistical: tuple = ()
    beliefs: tuple = ()

    def arity(self, pred: str) -> int:
        return dict(self.predicates)[pred]

    def subjects(self, sentence: BeliefSentence) -> tuple:
        """Subject constants of a belief sentence in declaration order."""
        used = sentence.constants
        return tuple(c for c in self.constants if c in used)

    def replace(self, **changes) -> "KnowledgeBase":
        fields = dict(predicates=self.predicates, constants=self.constants,
                      statistical=self.statistical, beliefs=self.beliefs)
        fields.update({k: tuple(v) for k, v in changes.items()})
        return KnowledgeBase(**fields)


@dataclass(frozen=True)
class Query:
    """A candidate entailed sentence with the bound left open."""

    kind: str  # "statistical" | "subjective"
    phi: Formula
    psi: Formula
    subjects: tuple = ()
    bound: tuple = ()
    claim: Optional[tuple] = None  # (rel, p) when a bound was given
    text: str = field(default="", compare=False)

    def __str__(self) -> str:
        return format_query(self)


# --------------------------------------------------------------------------
# structural helpers


def free_vars(f: Formula) -> frozenset:
    if isinstance(f, (Top, Bottom)):
        return frozenset()
    if isinstance(f, Atom):
        return frozenset(t.name for t in f.args if isinstance(t, Var))
    if isinstance(f, Eq):
        return frozenset(t.name for t in (f.left, f.right) if isinstance(t, Var))
    if isinstance(f, Not):
        return free_vars(f.arg)
    if isinstance(f, (And, Or, Implies, Iff)):
        return free_vars(f.left) | free_vars(f.right)
    if isinstance(f, (Forall, Exists)):
        return free_vars(f.body) - {v.name for v in f.vars}
    if isinstance(f, StatTerm):
        return (free_vars(f.phi) | free_vars(f.psi)) - {v.name for v in f.bound}
    raise TypeError(f"not a formula: {f!r}")


def constants_of(f: Formula) -> frozenset:
    out = set()
    for node in walk(f):
        if isinstance(node, Atom):
            out.update(t.name for t in node.args if isinstance(t, Const))
        elif isinstance(node, Eq):
            out.update(t.name for t in (node.left, node.right) if isinstance(t, Const))
    return frozenset(out)


def predicates_of(f: Formula) -> frozenset:
    return frozenset(n.pred for n in walk(f) if isinstance(n, Atom))


def walk(f: Formula) -> Iterator[Formula]:
    yield f
    if isinstance(f, Not):
        yield from walk(f.arg)
    elif isinstance(f, (And, Or, Implies, Iff)):
        yield from walk(f.left)
        yield from walk(f.right)
    elif isinstance(f, (Forall, Exists)):
        yield from walk(f.body)
    elif isinstance(f, StatTerm):
        yield from walk(f.phi)
        yield from walk(f.psi)


def has_quantifier(f: Formula) -> bool:
    return any(isinstance(n, (Forall, Exists)) for n in walk(f))


def stat_terms(f: Formula) -> list:
    return [n for n in walk(f) if isinstance(n, StatTerm)]


def conj(*fs: Formula) -> Formula:
    """Left-nested conjunction, dropping ``true``."""
    out = None
    for f in fs:
        if isinstance(f, Top):
            continue
        out = f if out is None else And(out, f)
    return TOP if out is None else out


def substitute(f: Formula, mapping: dict) -> Formula:
    """Replace terms by name (variables or constants) according to ``mapping``."""

    def term(t):
        return mapping.get(t.name, t)

    if isinstance(f, (Top, Bottom)):
        return f
    if isinstance(f, Atom):
        return Atom(f.pred, tuple(term(t) for t in f.args))
    if isinstance(f, Eq):
        return Eq(term(f.left), term(f.right))
    if isinstance(f, Not):
        return Not(substitute(f.arg, mapping))
    if isinstance(f, (And, Or, Implies, Iff)):
        return type(f)(substitute(f.left, mapping), substitute(f.right, mapping))
    if isinstance(f, (Forall, Exists)):
        inner = {k: v for k, v in mapping.items() if k not in {x.name for x in f.vars}}
        return type(f)(f.vars, substitute(f.body, inner))
    if isinstance(f, StatTerm):
        inner = {k: v for k, v in mapping.items() if k not in {x.name for x in f.bound}}
        return StatTerm(substitute(f.phi, inner), substitute(f.psi, inner), f.bound, f.rel, f.p)
    raise TypeError(f"not a formula: {f!r}")


def canonical(term: StatTerm) -> list:
    """Rewrite a StatTerm into ``>=``/``>`` form using the abbreviation laws.

    ``[phi|psi] <= p`` is ``[!phi|psi] >= 1-p``, ``<`` likewise with ``>``, and
    ``=`` is the pair of ``>=`` rows.
    """
    rel, p = term.rel, term.p
    if rel in (">=", ">"):
        return [term]
    neg = StatTerm(Not(term.phi), term.psi, term.bound, ">=" if rel != "<" else ">", 1 - p)
    if rel in ("<=", "<"):
        return [neg]
    return [StatTerm(term.phi, term.psi, term.bound, ">=", p), neg]


def canonical_belief(b: BeliefSentence) -> list:
    """``>=`` forms of a belief sentence as ``(phi, psi, p)`` triples."""
    if b.rel == ">=":
        return [(b.phi, b.psi, b.p)]
    if b.rel == "<=":
        return [(Not(b.phi), b.psi, 1 - b.p)]
    return [(b.phi, b.psi, b.p), (Not(b.phi), b.psi, 1 - b.p)]


# --------------------------------------------------------------------------
# lexer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<newline>\n)
  | (?P<number>\d+(?:\.\d*)?|\.\d+)
  | (?P<name>[A-Za-z][A-Za-z0-9_]*)
  | (?P<op><->|->|==|!=|>=|<=|[=<>!&|()\[\]{},/?.])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            col = pos - line_start + 1
            raise KBSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        col = pos - line_start + 1
        if kind == "newline":
            tokens.append(Token("newline", "\n", line, col))
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            tokens.append(Token(kind, m.group(), line, col))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# --------------------------------------------------------------------------
# parser


class _Parser:
    def __init__(self, tokens: list, predicates: dict, constants: dict):
        self.toks = tokens
        self.i = 0
        self.predicates = predicates  # name -> arity
        self.constants = constants  # name -> declaration order

    # token plumbing
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, offset: int = 1) -> Token:
        return self.toks[min(self.i + offset, len(self.toks) - 1)]

    def advance(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("op", "name") and t.text == text

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.fail(f"expected {text!r}, found {self.describe(self.tok)}")
        return self.advance()

    def fail(self, message: str, tok: Optional[Token] = None):
        tok = tok or self.tok
        raise KBSyntaxError(message, tok.line, tok.col)

    @staticmethod
    def describe(tok: Token) -> str:
        if tok.kind == "eof":
            return "end of input"
        if tok.kind == "newline":
            return "end of line"
        return repr(tok.text)

    def end_of_statement(self):
        if self.tok.kind not in ("newline", "eof"):
            self.fail(f"unexpected {self.describe(self.tok)} after sentence")

    # terms and formulas
    def name(self) -> Token:
        if self.tok.kind != "name":
            self.fail(f"expected identifier, found {self.describe(self.tok)}")
        return self.advance()

    def term(self) -> Term:
        t = self.name()
        if t.text in KEYWORDS:
            self.fail(f"keyword {t.text!r} used as a term", t)
        return Const(t.text) if t.text in self.constants else Var(t.text)

    def formula(self) -> Formula:
        if self.at("forall") or self.at("exists"):
            kw = self.advance()
            names = [self.term()]
            while self.at(","):
                self.advance()
                names.append(self.term())
            for n in names:
                if isinstance(n, Const):
                    self.fail(f"cannot quantify over constant {n.name!r}", kw)
            self.expect(".")
            body = self.formula()
            cls = Forall if kw.text == "forall" else Exists
            return cls(tuple(names), body)
        return self.iff()

    def iff(self) -> Formula:
        left = self.implies()
        while self.at("<->"):
            self.advance()
            left = Iff(left, self.implies())
        return left

    def implies(self) -> Formula:
        left = self.disj()
        if self.at("->"):
            self.advance()
            return Implies(left, self.implies())
        return left

    def disj(self) -> Formula:
        left = self.conj()
        while self.at("|"):
            self.advance()
            left = Or(left, self.conj())
        return left

    def conj(self) -> Formula:
        left = self.unary()
        while self.at("&"):
            self.advance()
            left = And(left, self.unary())
        return left

    def unary(self) -> Formula:
        if self.at("!"):
            self.advance()
            return Not(self.unary())
        return self.primary()

    def primary(self) -> Formula:
        tok = self.tok
        if self.at("("):
            self.advance()
            f = self.formula()
            self.expect(")")
            return f
        if self.at("["):
            return self.statterm()
        if tok.kind != "name":
            self.fail(f"expected formula, found {self.describe(tok)}")
        if tok.text == "true":
            self.advance()
            return TOP
        if tok.text == "false":
            self.advance()
            return BOTTOM
        if tok.text == "prob":
            self.fail("nested prob not allowed")
        if tok.text in ("forall", "exists"):
            return self.formula()
        if self.peek().kind == "op" and self.peek().text == "(":
            return self.atom()
        left = self.term()
        if self.at("==") or self.at("!="):
            op = self.advance().text
            right = self.term()
            eq = Eq(left, right)
            return eq if op == "==" else Not(eq)
        self.fail(f"expected '(' or '==' after {tok.text!r}")

    def atom(self) -> Formula:
        tok = self.advance()
        if tok.text in KEYWORDS:
            self.fail(f"keyword {tok.text!r} used as a predicate", tok)
        if tok.text not in self.predicates:
            self.fail(f"undeclared predicate {tok.text!r}", tok)
        self.expect("(")
        args = [self.term()]
        while self.at(","):
            self.advance()
            args.append(self.term())
        self.expect(")")
        arity = self.predicates[tok.text]
        if len(args) != arity:
            self.fail(f"arity mismatch: {tok.text} takes {arity} argument(s), got {len(args)}", tok)
        return Atom(tok.text, tuple(args))

    def conditional(self, close: str):
        """``phi [| psi]`` up to ``close``; phi may not contain a top-level ``|``."""
        phi = self.conj()
        psi = TOP
        if self.at("|"):
            self.advance()
            psi = self.formula()
        self.expect(close)
        return phi, psi

    def relation(self) -> str:
        tok = self.tok
        if tok.kind == "op" and tok.text in RELATIONS:
            return self.advance().text
        self.fail(f"expected relation, found {self.describe(tok)}")

    def probability(self) -> Fraction:
        tok = self.tok
        if tok.kind != "number":
            self.fail(f"expected probability, found {self.describe(tok)}")
        self.advance()
        if self.at("/"):
            self.advance()
            den = self.tok
            if den.kind != "number" or "." in tok.text or "." in den.text:
                self.fail("expected integer/integer probability", den)
            self.advance()
            if int(den.text) == 0:
                self.fail("zero denominator", den)
            value = Fraction(int(tok.text), int(den.text))
        else:
            value = Fraction(tok.text)
        if not 0 <= value <= 1:
            self.fail(f"probability {tok.text} outside [0, 1]", tok)
        return value

    def varlist(self) -> tuple:
        self.expect("{")
        names = [self.term()]
        while self.at(","):
            self.advance()
            names.append(self.term())
        close = self.expect("}")
        for t in names:
            if isinstance(t, Const):
                self.fail(f"{t.name!r} is a constant, not a variable", close)
        if len(set(names)) != len(names):
            self.fail("repeated bound variable", close)
        if len(names) > MAX_ARITY:
            self.fail(f"at most {MAX_ARITY} bound variables supported", close)
        return tuple(names)

    def statterm(self) -> StatTerm:
        start = self.expect("[")
        phi, psi = self.conditional("]")
        bound = self.varlist()
        rel = self.relation()
        p = self.probability()
        term = StatTerm(phi, psi, bound, rel, p)
        inside = free_vars(phi) | free_vars(psi)
        for v in bound:
            if v.name not in inside:
                self.fail(f"bound variable {v.name!r} does not occur in the statistical term", start)
        for f in (phi, psi):
            if has_quantifier(f):
                self.fail("quantifiers inside statistical terms are not supported", start)
            for inner in stat_terms(f):
                if free_vars(inner):
                    self.fail("nested statistical term must be closed", start)
        return term

    # statements
    def statement(self):
        tok = self.tok
        if self.at("pred"):
            self.advance()
            name = self.name()
            if name.text in KEYWORDS:
                self.fail(f"keyword {name.text!r} used as a predicate", name)
            self.expect("/")
            ar = self.tok
            if ar.kind != "number" or ar.text not in ("1", "2"):
                self.fail("predicate arity must be 1 or 2", ar)
            self.advance()
            self.end_of_statement()
            if name.text in self.predicates or name.text in self.constants:
                self.fail(f"duplicate declaration of {name.text!r}", name)
            self.predicates[name.text] = int(ar.text)
            return ("pred", name.text, int(ar.text))
        if self.at("const"):
            self.advance()
            names = [self.name()]
            while self.at(","):
                self.advance()
                names.append(self.name())
            self.end_of_statement()
            for n in names:
                if n.text in KEYWORDS:
                    self.fail(f"keyword {n.text!r} used as a constant", n)
                if n.text in self.constants or n.text in self.predicates:
                    self.fail(f"duplicate declaration of {n.text!r}", n)
                self.constants[n.text] = len(self.constants)
            return ("const", tuple(n.text for n in names))
        if self.at("axiom"):
            self.advance()
            f = self.formula()
            self.end_of_statement()
            if free_vars(f):
                self.fail(f"axiom has free variables {sorted(free_vars(f))}", tok)
            if constants_of(f):
                self.fail(f"constants {sorted(constants_of(f))} may not appear in statistical sentences", tok)
            if stat_terms(f):
                self.fail("axioms must be first-order (no statistical terms)", tok)
            return ("stat", StatSentence(f, tok.line))
        if self.at("["):
            term = self.statterm()
            self.end_of_statement()
            if free_vars(term):
                self.fail(f"statistical sentence has free variables {sorted(free_vars(term))}", tok)
            if constants_of(term):
                self.fail(f"constants {sorted(constants_of(term))} may not appear in statistical sentences", tok)
            return ("stat", StatSentence(term, tok.line))
        if self.at("prob"):
            self.advance()
            self.expect("(")
            phi, psi = self.conditional(")")
            rel_tok = self.tok
            rel = self.relation()
            if rel in ("<", ">"):
                self.fail(f"strict relation {rel!r} not allowed in belief sentences", rel_tok)
            p = self.probability()
            self.end_of_statement()
            self.check_belief(phi, psi, tok)
            return ("belief", BeliefSentence(phi, psi, rel, p, tok.line))
        self.fail(f"expected declaration or sentence, found {self.describe(tok)}")

    def check_belief(self, phi, psi, tok):
        for f in (phi, psi):
            if has_quantifier(f):
                self.fail("quantifiers inside belief sentences are not supported", tok)
            loose = free_vars(f)
            if loose:
                self.fail(f"belief sentence has free variables {sorted(loose)}", tok)
            for inner in stat_terms(f):
                if constants_of(inner):
                    self.fail("statistical term inside a belief may not mention constants", tok)
        if not (constants_of(phi) | constants_of(psi)):
            self.fail("belief sentence mentions no subject constant", tok)


def parse_kb(text) -> KnowledgeBase:
    """Parse a KB document; raises :class:`KBSyntaxError` with a location."""
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise KBSyntaxError(f"invalid UTF-8 at byte {exc.start}", 1, 1) from None
    p = _Parser(tokenize(text), {}, {})
    stats, beliefs = [], []
    while p.tok.kind != "eof":
        if p.tok.kind == "newline":
            p.advance()
            continue
        kind, *rest = p.statement()
        if kind == "stat":
            stats.append(rest[0])
        elif kind == "belief":
            beliefs.append(rest[0])
    return KnowledgeBase(
        predicates=tuple(p.predicates.items()),
        constants=tuple(p.constants),
        statistical=tuple(stats),
        beliefs=tuple(beliefs),
    )


def parse_formula(text: str, kb: KnowledgeBase) -> Formula:
    p = _Parser(tokenize(text), dict(kb.predicates), {c: i for i, c in enumerate(kb.constants)})
    f = p.formula()
    if p.tok.kind == "newline":
        p.advance()
    if p.tok.kind != "eof":
        p.fail(f"unexpected {p.describe(p.tok)}")
    return f


def _query_parser(text: str, kb: KnowledgeBase) -> _Parser:
    return _Parser(tokenize(text), dict(kb.predicates), {c: i for i, c in enumerate(kb.constants)})


def _query_tail(p: _Parser):
    """Optional ``?`` / ``rel ?`` / ``rel p`` suffix; returns the claim or None."""
    claim = None
    if p.at("?"):
        p.advance()
    elif p.tok.kind == "op" and p.tok.text in RELATIONS:
        rel = p.advance().text
        if p.at("?"):
            p.advance()
        else:
            claim = (rel, p.probability())
    p.end_of_statement()
    return claim


def parse_query(text: str, kb: KnowledgeBase) -> Query:
    """Parse ``prob(phi | psi) = ?`` or ``[phi | psi]{v} = ?``.

    The relation may be omitted, written with ``?`` as the bound, or given as
    a concrete claim (``>= 0.3``) to be checked for entailment.
    """
    p = _query_parser(text, kb)
    while p.tok.kind == "newline":
        p.advance()
    start = p.tok
    if p.at("prob"):
        p.advance()
        p.expect("(")
        phi, psi = p.conditional(")")
        claim = _query_tail(p)
        p.check_belief(phi, psi, start)
        if claim and claim[0] in ("<", ">"):
            p.fail(f"strict relation {claim[0]!r} not allowed in belief sentences", start)
        used = constants_of(phi) | constants_of(psi)
        subjects = tuple(c for c in kb.constants if c in used)
        return Query("subjective", phi, psi, subjects=subjects, claim=claim, text=text.strip())
    if p.at("["):
        p.advance()
        phi, psi = p.conditional("]")
        bound = p.varlist()
        claim = _query_tail(p)
        inside = free_vars(phi) | free_vars(psi)
        loose = inside - {v.name for v in bound}
        if loose:
            p.fail(f"statistical query has free variables {sorted(loose)}", start)
        for v in bound:
            if v.name not in inside:
                p.fail(f"bound variable {v.name!r} does not occur in the query", start)
        if constants_of(phi) | constants_of(psi):
            p.fail("statistical queries may not mention constants", start)
        if has_quantifier(phi) or has_quantifier(psi):
            p.fail("quantifiers inside statistical terms are not supported", start)
        return Query("statistical", phi, psi, bound=bound, claim=claim, text=text.strip())
    p.fail("bare formula: expected prob(...) or [...]{...}")


# --------------------------------------------------------------------------
# printer

_PREC = {Iff: 1, Implies: 2, Or: 3, And: 4}


def format_prob(p: Fraction) -> str:
    """Exact decimal when the denominator allows, otherwise ``m/n``."""
    p = Fraction(p)
    d = p.denominator
    while d % 2 == 0:
        d //= 2
    while d % 5 == 0:
        d //= 5
    if d != 1:
        return f"{p.numerator}/{p.denominator}"
    if p.denominator == 1:
        return str(p.numerator)
    digits = 0
    scaled = p
    while scaled.denominator != 1:
        scaled *= 10
        digits += 1
    text = f"{scaled.numerator:0{digits + 1}d}"
    sign = "-" if text.startswith("-") else ""
    text = text.lstrip("-").rjust(digits + 1, "0")
    return f"{sign}{text[:-digits]}.{text[-digits:]}"


def format_term(t: Term) -> str:
    return t.name


def format_formula(f: Formula, prec: int = 0) -> str:
    if isinstance(f, Top):
        return "true"
    if isinstance(f, Bottom):
        return "false"
    if isinstance(f, Atom):
        return f"{f.pred}({', '.join(format_term(t) for t in f.args)})"
    if isinstance(f, Eq):
        return f"{format_term(f.left)} == {format_term(f.right)}"
    if isinstance(f, Not):
        if isinstance(f.arg, Eq):
            return f"{format_term(f.arg.left)} != {format_term(f.arg.right)}"
        return "!" + format_formula(f.arg, 5)
    if isinstance(f, StatTerm):
        return _format_statterm(f)
    if isinstance(f, (Forall, Exists)):
        kw = "forall" if isinstance(f, Forall) else "exists"
        text = f"{kw} {', '.join(v.name for v in f.vars)} . {format_formula(f.body)}"
        return f"({text})" if prec > 0 else text
    op = {And: "&", Or: "|", Implies: "->", Iff: "<->"}[type(f)]
    mine = _PREC[type(f)]
    if isinstance(f, Implies):  # right-associative
        text = f"{format_formula(f.left, mine + 1)} {op} {format_formula(f.right, mine)}"
    else:
        text = f"{format_formula(f.left, mine)} {op} {format_formula(f.right, mine + 1)}"
    return f"({text})" if mine < prec else text


def _format_conditional(phi: Formula, psi: Formula) -> str:
    left = format_formula(phi, _PREC[And])
    if isinstance(psi, Top):
        return left
    return f"{left} | {format_formula(psi)}"


def _format_statterm(t: StatTerm) -> str:
    bound = ", ".join(v.name for v in t.bound)
    return f"[{_format_conditional(t.phi, t.psi)}]{{{bound}}} {t.rel} {format_prob(t.p)}"


def format_stat(s: StatSentence) -> str:
    if s.is_axiom:
        return "axiom " + format_formula(s.formula)
    return _format_statterm(s.formula)


def format_belief(b: BeliefSentence) -> str:
    return f"prob({_format_conditional(b.phi, b.psi)}) {b.rel} {format_prob(b.p)}"


def format_query(q: Query) -> str:
    tail = "= ?" if q.claim is None else f"{q.claim[0]} {format_prob(q.claim[1])}"
    if q.kind == "subjective":
        return f"prob({_format_conditional(q.phi, q.psi)}) {tail}"
    bound = ", ".join(v.name for v in q.bound)
    return f"[{_format_conditional(q.phi, q.psi)}]{{{bound}}} {tail}"


def format_kb(kb: KnowledgeBase) -> str:
    lines = [f"pred {name}/{arity}" for name, arity in kb.predicates]
    if kb.constants:
        lines.append("const " + ", ".join(kb.constants))
    if kb.statistical:
        lines.append("")
        lines.extend(format_stat(s) for s in kb.statistical)
    if kb.beliefs:
        lines.append("")
        lines.extend(format_belief(b) for b in kb.beliefs)
    return "\n".join(lines) + ("\n" if lines else "")
