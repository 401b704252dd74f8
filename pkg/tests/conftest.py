import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from chipletplan.floorplan_env import random_floorplan
from chipletplan.io import generate_synthetic
from chipletplan.thermal_reference import ThermalGrid, characterize_tables

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ORACLES = json.loads((Path(__file__).parent / "oracles" / "oracles.json").read_text())

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


@pytest.fixture(scope="session")
def oracles():
    return ORACLES


@pytest.fixture(scope="session")
def default_grid():
    return ThermalGrid(64, 64, 1e-3)


@pytest.fixture(scope="session")
def default_tables(default_grid):
    return characterize_tables(default_grid)


@pytest.fixture(scope="session")
def small_grid():
    return ThermalGrid(12, 10, 1e-3)


@pytest.fixture
def synth_case():
    """A 5-chiplet synthetic system with one legal floorplan."""
    spec = generate_synthetic(5, np.random.default_rng(5))
    return spec, random_floorplan(spec, np.random.default_rng(6))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
