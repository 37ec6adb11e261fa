from pathlib import Path

import pytest

from polarwz.harness import cmd_construct, load_config

CONFIG_DIR = Path(__file__).resolve().parent.parent / "demos" / "configs"

# (criterion, PASS/FAIL, detail) lines collected by the acceptance module
ACCEPTANCE_LINES = []


def _code(request, name):
    cfg = load_config(CONFIG_DIR / f"{name}.yaml")
    out = request.config.cache.mkdir("polarwz-codes") / f"{name}.json"
    return cfg, cmd_construct(cfg, out)


@pytest.fixture(scope="session")
def matched(request):
    """Single-round code at a matched guess (N = 4096); built once, then cached."""
    return _code(request, "matched")


@pytest.fixture(scope="session")
def universal(request):
    """Three-guess code (2, 4, 8) at N = 4096; built once, then cached."""
    return _code(request, "universal")


@pytest.fixture(scope="session")
def smoke(request):
    """Small N = 256 code with the same schedule as ``universal``."""
    return _code(request, "smoke")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
