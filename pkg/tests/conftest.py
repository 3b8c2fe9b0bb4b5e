"""Shared fixtures and the acceptance-criteria summary section.

Tests named ``test_criterion_*`` (in test_acceptance.py) get one summary
line each at the end of the run: criterion number, verdict, description.
"""

from __future__ import annotations

import pathlib

import pytest

from hoint.terms import default_signature

ROOT = pathlib.Path(__file__).resolve().parent.parent
CORPUS = ROOT / "corpus"


@pytest.fixture(scope="session")
def sig():
    return default_signature()


@pytest.fixture(scope="session")
def corpus_dir() -> pathlib.Path:
    return CORPUS


def corpus_text(name: str) -> str:
    return (CORPUS / name).read_text()


# ---------------------------------------------------------------------------
# acceptance summary lines

_RESULTS: list[tuple[str, str, str]] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if not item.name.startswith("test_criterion_"):
        return
    label = item.name[len("test_criterion_"):]
    doc = (item.function.__doc__ or "").strip().splitlines()
    desc = doc[0] if doc else ""
    if rep.when == "setup" and (rep.failed or rep.skipped):
        _RESULTS.append((label, "ERROR" if rep.failed else "SKIP", desc))
        return
    if rep.when != "call":
        return
    if hasattr(rep, "wasxfail") and rep.skipped:
        verdict = "FAIL (expected: documented deviation, see README)"
    elif rep.failed and "XPASS" in str(rep.longrepr or ""):
        verdict = "UNEXPECTED PASS of a documented-red check"
    elif rep.passed:
        verdict = "PASS"
    elif rep.failed:
        verdict = "FAIL"
    else:
        verdict = rep.outcome.upper()
    _RESULTS.append((label, verdict, desc))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label, verdict, desc in _RESULTS:
        terminalreporter.write_line(f"criterion {label}: {verdict} — {desc}")
