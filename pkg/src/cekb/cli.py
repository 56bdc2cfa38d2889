"""Command-line entry point ``cekb``.

    cekb check KB
    cekb query KB QUERY [--mode point|interval] [--samples N] [--seed S]
    cekb dump-atoms KB [QUERY]
    cekb dump-lp KB [QUERY]

Exit codes: 0 success, 1 usage/parse/file error, 2 no model, 3 value not
determined in point mode.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass

from .algebra import AlgebraError, Signature, build_atom_space
from .crossentropy import NoModel, NotConverged
from .inference import InferenceConfig, InferenceError, NonUnique, answer, check_kb, decimal12, fmt
from .statistics import Infeasible, compile_statistical
from .syntax import KBSyntaxError, parse_kb, parse_query

COMMANDS = ("check", "query", "dump-atoms", "dump-lp")
EXIT_OK, EXIT_USAGE, EXIT_NO_MODEL, EXIT_NON_UNIQUE = 0, 1, 2, 3


@dataclass(frozen=True)
class CliConfig:
    kb_path: str
    command: str
    query_text: str | None = None
    mode: str = "point"
    samples: int = 256
    seed: int = 0
    output: str = "text"
    dump_atoms: bool = False
    dump_lp: bool = False
    trace_ce: bool = False

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        if (self.command == "query") != (self.query_text is not None) and self.command in ("check", "query"):
            raise ValueError("a query is required for 'query' and not accepted by 'check'")
        if self.samples < 2:
            raise ValueError("--samples must be at least 2")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cekb", description="Minimum cross-entropy entailment for statistical and subjective knowledge bases.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("kb_path", metavar="KB")
    p.add_argument("query_text", metavar="QUERY", nargs="?")
    p.add_argument("--mode", choices=("point", "interval"), default="point")
    p.add_argument("--samples", type=int, default=256, help="sampled measures in interval mode (>= 2)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", choices=("text", "json"), default="text")
    p.add_argument("--dump-atoms", action="store_true", help="write every atom space built to stderr")
    p.add_argument("--dump-lp", action="store_true", help="write every constraint set built to stderr")
    p.add_argument("--trace-ce", action="store_true", help="CSV of projection sweeps on stderr")
    return p


def parse_args(argv) -> CliConfig:
    ns = build_parser().parse_args(argv)
    try:
        return CliConfig(**vars(ns))
    except ValueError as e:
        raise _UsageError(str(e)) from None


# --------------------------------------------------------------------------
# rendering


def _space_json(space) -> dict:
    from .algebra import label

    return {"arity": space.arity, "ground_atoms": [label(g) for g in space.ground_atoms],
            "atoms": [space.atom_string(i) for i in range(len(space))]}


def _lp_json(cs) -> dict:
    rows = [{"tag": "normalization", "rel": "=", "rhs": "1", "coeffs": {str(j): "1" for j in range(cs.n)}}]
    for r in cs.rows:
        rows.append({"tag": r.tag, "rel": ">" if r.strict else r.rel, "rhs": "0",
                     "coeffs": {str(j): str(v) for j, v in sorted(r.coeffs.items())}})
    classes = [[int(a) for a in (cs.classes == j).nonzero()[0]] for j in range(cs.n)]
    return {"variables": cs.n, "atoms": int(len(cs.classes)), "classes": classes, "rows": rows}


def _result_text(res) -> str:
    iv = res.interval
    lines = [f"query: {res.to_json()['query']}", f"mode: {res.mode}"]
    if iv.lo == iv.hi:
        lines.append(f"value: {fmt(iv.lo)} ({decimal12(iv.lo)})")
    else:
        lo_b = "[" if iv.lo_attained else "("
        hi_b = "]" if iv.hi_attained else ")"
        lines.append(f"interval: {lo_b}{fmt(iv.lo)}, {fmt(iv.hi)}{hi_b} "
                     f"({lo_b}{decimal12(iv.lo)}, {decimal12(iv.hi)}{hi_b})")
    if not iv.conditioning_possible:
        lines.append("note: the conditioning event has probability zero; every bound holds vacuously")
    if res.samples is not None:
        lines.append(f"samples: {res.samples}")
    if res.entailed is not None:
        lines.append(f"entailed: {'yes' if res.entailed else 'no'}")
    if res.blocks:
        lines.append("blocks: " + " ".join("{" + ", ".join(b) + "}" for b in res.blocks))
    lines.append("derivation:")
    lines += [f"  {d}" for d in res.derivation]
    return "\n".join(lines) + "\n"


def _report_text(rep) -> str:
    lines = [f"has_model: {rep.has_model}"] + [f"  {m}" for m in rep.messages]
    if rep.conflicts:
        lines.append("conflicting sentences:")
        lines += [f"  {c}" for c in rep.conflicts]
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# commands


def _full_model(kb):
    """Atom space and constraint set of every statistical sentence at the widest arity used."""
    widths = [len(s.formula.bound) for s in kb.statistical if not s.is_axiom]
    k = max(widths, default=1)
    axioms = tuple(s.formula for s in kb.statistical if s.is_axiom)
    space = build_atom_space(Signature(kb.predicates), k, axioms)
    sentences = [s for s in kb.statistical if not s.is_axiom]
    return [(space, compile_statistical(sentences, space))]


def _dump(cfg, kb, out, err) -> int:
    models = []
    if cfg.query_text is not None:
        query = parse_query(cfg.query_text, kb)
        config = InferenceConfig(mode=cfg.mode, samples=cfg.samples, seed=cfg.seed,
                                 on_model=lambda space, cs: models.append((space, cs)))
        try:
            answer(kb, query, cfg.mode, config)
        except (NonUnique, NoModel, Infeasible) as e:
            err.write(f"note: query not answered ({e}); dumping what was built\n")
    else:
        models = _full_model(kb)
    if cfg.command == "dump-atoms":
        if cfg.output == "json":
            out.write(json.dumps({"spaces": [_space_json(s) for s, _ in _unique_spaces(models)]}, indent=2) + "\n")
        else:
            for space, _ in _unique_spaces(models):
                out.write(space.dump())
    else:
        if cfg.output == "json":
            out.write(json.dumps({"programs": [_lp_json(cs) for _, cs in models]}, indent=2) + "\n")
        else:
            for _, cs in models:
                out.write(cs.dump())
    return EXIT_OK


def _unique_spaces(models):
    seen = set()
    for space, cs in models:
        if id(space) not in seen:
            seen.add(id(space))
            yield space, cs


def run(argv=None, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    try:
        cfg = parse_args(sys.argv[1:] if argv is None else argv)
    except _UsageError as e:
        err.write(f"cekb: usage error: {e}\n")
        return EXIT_USAGE
    try:
        with open(cfg.kb_path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        err.write(f"cekb: cannot read {cfg.kb_path}: {e.strerror or e}\n")
        return EXIT_USAGE
    try:
        kb = parse_kb(text)
        if cfg.command in ("dump-atoms", "dump-lp"):
            return _dump(cfg, kb, out, err)
        trace = None
        if cfg.trace_ce:
            writer = csv.writer(err, lineterminator="\n")
            writer.writerow(("sweep", "row_id", "residual", "ce_value"))
            trace = lambda sweep, row, residual, ce: writer.writerow((sweep, row, f"{residual:.6e}", f"{ce:.12g}"))  # noqa: E731

        def on_model(space, cs):
            if cfg.dump_atoms:
                err.write(space.dump())
            if cfg.dump_lp:
                err.write(cs.dump())

        config = InferenceConfig(mode=cfg.mode, samples=cfg.samples, seed=cfg.seed, trace=trace,
                                 on_model=on_model if (cfg.dump_atoms or cfg.dump_lp) else None)
        report = check_kb(kb, config)
        if cfg.command == "check":
            out.write(json.dumps(report.to_json(), indent=2) + "\n" if cfg.output == "json" else _report_text(report))
            return EXIT_NO_MODEL if report.has_model == "no" else EXIT_OK
        if report.has_model == "no":
            err.write("cekb: the knowledge base has no model\n" + "".join(f"  conflicting: {c}\n" for c in report.conflicts))
            return EXIT_NO_MODEL
        query = parse_query(cfg.query_text, kb)
        res = answer(kb, query, cfg.mode, config)
        out.write(json.dumps(res.to_json(), indent=2) + "\n" if cfg.output == "json" else _result_text(res))
        return EXIT_OK
    except KBSyntaxError as e:
        err.write(f"cekb: parse error: {e}\n")
        return EXIT_USAGE
    except (NoModel, Infeasible) as e:
        err.write(f"cekb: no model: {e}\n")
        for s in getattr(e, "sentences", ()) or ():
            err.write(f"  conflicting: {s}\n")
        return EXIT_NO_MODEL
    except NonUnique as e:
        err.write(f"cekb: {e}\n  rerun with --mode interval for bounds\n")
        return EXIT_NON_UNIQUE
    except NotConverged as e:
        err.write(f"cekb: {e}\n")
        return EXIT_USAGE
    except (AlgebraError, InferenceError) as e:
        err.write(f"cekb: {e}\n")
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
