"""Shared fixtures: one solved phantom per session, reused across modules.

Field solves dominate the suite's runtime, so every test that only needs
*a* solved field shares the session-scoped ones built here. Tests that
need a specific geometry build their own small grid.
"""

import time

import numpy as np
import pytest

from dbsfiber import (
    CableConfig,
    LeadModel,
    bipolar,
    calibrate_input,
    default_contacts,
    homogeneous_volume,
    rasterize_lead,
    solve_point_source,
    solve_unit_field,
    unipolar,
)

# filled by test_acceptance, printed after the run by the hook below
acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def scenario_volume():
    """32 mm homogeneous grid (0.1 S/m) with the default lead stamped in."""
    lead = LeadModel(tip_position=(16.0, 16.0, 8.0), contacts=default_contacts())
    volume = rasterize_lead(
        homogeneous_volume(size_mm=32.0, spacing_mm=0.5, sigma=0.1), lead)
    return volume, lead


@pytest.fixture(scope="session")
def solution_bipolar(scenario_volume):
    volume, _ = scenario_volume
    return solve_unit_field(volume, bipolar(cathode=1, anode=2))


@pytest.fixture(scope="session")
def solution_reversed(scenario_volume):
    volume, _ = scenario_volume
    return solve_unit_field(volume, bipolar(cathode=1, anode=2).reversed_polarity())


@pytest.fixture(scope="session")
def solution_c1(scenario_volume):
    volume, _ = scenario_volume
    return solve_unit_field(volume, unipolar(1))


@pytest.fixture(scope="session")
def solution_c2(scenario_volume):
    volume, _ = scenario_volume
    return solve_unit_field(volume, unipolar(2))


@pytest.fixture(scope="session")
def calibration():
    """Deterministic firing threshold and the 0.9x axonal input."""
    return calibrate_input(CableConfig())


@pytest.fixture(scope="session")
def oracle_solve():
    """Timed 100^3-voxel point-source solve on the 0.1 S/m phantom."""
    volume = homogeneous_volume(size_mm=50.0, spacing_mm=0.5, sigma=0.1)
    t0 = time.perf_counter()
    solution = solve_point_source(volume, volume.center_mm(), current_ma=1.0)
    wall_s = time.perf_counter() - t0
    return volume, solution, wall_s


@pytest.fixture(scope="session")
def oracle_errors(oracle_solve):
    """Relative error of the solved potential against I/(4 pi sigma r)."""
    volume, solution, _ = oracle_solve
    center = volume.center_mm()
    axes = [volume.voxel_centers_axis(a) - center[a] for a in range(3)]
    gx, gy, gz = np.meshgrid(*axes, indexing="ij")
    r_m = np.sqrt(gx**2 + gy**2 + gz**2) * 1e-3
    with np.errstate(divide="ignore"):
        exact = 1e-3 / (4.0 * np.pi * 0.1 * r_m)
    band = (r_m >= 2e-3) & (r_m <= 15e-3)
    rel = np.abs(solution.potential[band] - exact[band]) / exact[band]
    return rel
