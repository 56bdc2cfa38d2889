import os
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from cekb import parse_kb

ROOT = Path(__file__).resolve().parents[1]
KB_DIR = ROOT / "kb"

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=500, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# criterion number -> (passed, detail), filled by test_acceptance
ACCEPTANCE = {}


def load_kb(name):
    return parse_kb((KB_DIR / name).read_text())


@pytest.fixture(scope="session")
def kb_f1():
    return load_kb("kb_f1.kb")


@pytest.fixture(scope="session")
def kb_f2():
    return load_kb("kb_f2.kb")


@pytest.fixture(scope="session")
def kb_f1f2():
    return load_kb("kb_f1f2.kb")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
