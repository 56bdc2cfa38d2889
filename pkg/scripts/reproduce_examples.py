"""Print the worked film examples next to the values the engine derives."""
from fractions import Fraction
from pathlib import Path

from cekb import answer, parse_kb, parse_query

KB_DIR = Path(__file__).resolve().parents[1] / "kb"

CASES = [
    ("kb_f1.kb", "prob(HappyEnd(f1)) = ?", Fraction(8, 25)),
    ("kb_f2.kb", "[HappyEnd(v) | Action(v) & American(v) & Mystery(v)]{v} = ?", Fraction(6, 7)),
    ("kb_f2.kb", "prob(HappyEnd(f2) | American(f2) & Mystery(f2)) = ?", Fraction(16, 21)),
    ("kb_f2.kb", "prob(HappyEnd(f2)) = ?", Fraction(719, 840)),
    ("kb_f1f2.kb", "prob(Better(f1, f2)) = ?", Fraction(7247, 28000)),
]


def main():
    for name, text, expected in CASES:
        kb = parse_kb((KB_DIR / name).read_text())
        res = answer(kb, parse_query(text, kb))
        mark = "ok" if res.value == expected else "MISMATCH"
        print(f"{name:11s} {text:60s} {str(res.value):>12s} = {float(res.value):.6f}  [{mark}]")
        for line in res.derivation:
            print(f"    {line}")


if __name__ == "__main__":
    main()
