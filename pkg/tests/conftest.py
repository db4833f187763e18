from __future__ import annotations

import time

import numpy as np
import pytest

from facetflow import build_grid, run_rothe
from facetflow.presets import make_data

_CRITERIA: list[str] = []


def record_criterion(number: int, passed: bool, detail: str) -> None:
    """Print a one-line verdict and keep it for the terminal summary."""
    line = f"{'PASS' if passed else 'FAIL'} criterion {number:2d}: {detail}"
    print(line)
    _CRITERIA.append(line)


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def slope_runs():
    """The refinement family of slope_1d runs keyed by (cells, j), plus wall time."""
    t0 = time.perf_counter()
    runs = {}
    for cells in (32, 64):
        g = build_grid(1, [1.0], [cells])
        data = make_data("slope_1d", g)
        for j in (16, 32, 64):
            runs[cells, j] = run_rothe(data, 0.004, j)
    return runs, time.perf_counter() - t0
