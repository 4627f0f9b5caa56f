import pytest

from droopdispatch.cli import run_pipeline
from droopdispatch.scenarios import builtin

BUILTINS = ("case1", "case2", "case3")

# acceptance results, printed in the terminal summary
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def pipelines(tmp_path_factory):
    """Full pipeline for every built-in scenario, run once per session."""
    out = {}
    for name in BUILTINS:
        out[name] = run_pipeline(builtin(name), "all", tmp_path_factory.mktemp(name))
    return out


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
