import io
import json
import subprocess
import sys
from importlib import resources

import jsonschema
import pytest

from cekb.cli import CliConfig, run
from conftest import KB_DIR

KBS = [str(KB_DIR / n) for n in ("kb_f1.kb", "kb_f2.kb", "kb_f1f2.kb")]
QUERIES = {
    "kb_f1.kb": "prob(HappyEnd(f1)) = ?",
    "kb_f2.kb": "prob(HappyEnd(f2) | American(f2) & Mystery(f2)) = ?",
    "kb_f1f2.kb": "prob(Better(f1, f2)) = ?",
}


def schema(name):
    return json.loads(resources.files("cekb").joinpath(f"schemas/{name}.schema.json").read_text())


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), out=out, err=err)
    return code, out.getvalue(), err.getvalue()


def test_query_json_example():
    code, out, _ = call("query", KBS[0], "prob(HappyEnd(f1)) = ?", "--mode", "point", "--output", "json")
    doc = json.loads(out)
    assert code == 0 and doc["lo"] == doc["hi"] == "0.32" and doc["exact"] is True


def test_check_example():
    code, out, _ = call("check", KBS[2])
    assert code == 0 and out.splitlines()[0] == "has_model: yes"


def test_missing_file_and_usage_errors(tmp_path):
    assert call("query", str(tmp_path / "missing.kb"), "prob(A(a)) = ?")[0] == 1
    assert call("query", KBS[0])[0] == 1
    assert call("check", KBS[0], "--samples", "1")[0] == 1
    assert call("frobnicate", KBS[0])[0] == 1
    bad = tmp_path / "bad.kb"
    bad.write_text("pred A/1\n[A(v)]{v} >= 2\n")
    code, _, err = call("check", str(bad))
    assert code == 1 and "2:" in err


def test_no_model_and_non_unique(tmp_path):
    kb = tmp_path / "nomodel.kb"
    kb.write_text("pred A/1\nconst a\n[A(v)]{v} = 0\nprob(A(a)) = 0.5\n")
    code, _, err = call("query", str(kb), "prob(A(a)) = ?")
    assert code == 2 and "prob(A(a)) = 0.5" in err
    kb = tmp_path / "loose.kb"
    kb.write_text("pred A/1\npred B/1\nconst a\n[A(v) | B(v)]{v} >= 0.2\nprob(B(a)) = 0.5\n")
    code, _, err = call("query", str(kb), "prob(A(a)) = ?")
    assert code == 3 and "A(a)" in err
    assert call("query", str(kb), "prob(A(a)) = ?", "--mode", "interval")[0] == 0


@pytest.mark.parametrize("path", KBS)
def test_json_outputs_validate(path):
    name = path.rsplit("/", 1)[1]
    code, out, _ = call("query", path, QUERIES[name], "--output", "json")
    assert code == 0
    jsonschema.validate(json.loads(out), schema("query"))
    code, out, _ = call("query", path, QUERIES[name], "--output", "json", "--mode", "interval", "--samples", "8")
    jsonschema.validate(json.loads(out), schema("query"))
    code, out, _ = call("check", path, "--output", "json")
    jsonschema.validate(json.loads(out), schema("check"))
    code, out, _ = call("dump-atoms", path, QUERIES[name], "--output", "json")
    jsonschema.validate(json.loads(out), schema("dump-atoms"))
    code, out, _ = call("dump-lp", path, "--output", "json")
    jsonschema.validate(json.loads(out), schema("dump-lp"))


def test_text_output_shows_rational_and_decimal():
    code, out, _ = call("query", KBS[1], QUERIES["kb_f2.kb"])
    assert code == 0 and "value: 16/21 (0.761904761905)" in out


def test_dumps_and_trace():
    code, out, _ = call("dump-atoms", KBS[0])
    header, *rows = out.splitlines()
    assert header.startswith("# American@1") and rows and all(set(r) <= {"0", "1"} for r in rows)
    code, _, err = call("query", KBS[0], QUERIES["kb_f1.kb"], "--dump-lp", "--dump-atoms")
    assert "normalization\t=\t1" in err and "# American@1" in err
    code, _, err = call("query", KBS[1], QUERIES["kb_f2.kb"], "--trace-ce")
    assert err.splitlines()[0] == "sweep,row_id,residual,ce_value"


def test_config_invariants():
    with pytest.raises(ValueError):
        CliConfig(kb_path="x", command="query")
    with pytest.raises(ValueError):
        CliConfig(kb_path="x", command="check", query_text="prob(A(a)) = ?")


@pytest.mark.parametrize("mode", ["point", "interval"])
def test_console_script_is_deterministic(mode):
    cmd = [sys.executable, "-m", "cekb.cli", "query", KBS[2], QUERIES["kb_f1f2.kb"], "--mode", mode,
           "--samples", "8", "--seed", "3"]
    first = subprocess.run(cmd, capture_output=True, check=True).stdout
    second = subprocess.run(cmd, capture_output=True, check=True).stdout
    assert first == second and first
