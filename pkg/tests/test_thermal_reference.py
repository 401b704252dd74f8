import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from chipletplan.errors import ConfigurationError, NumericalError, StateError
from chipletplan.floorplan_env import Chiplet, SystemSpec, reset, state_from_anchors
from chipletplan.thermal_reference import (ThermalGrid, ThermalStack, apply_conductance,
                                           characterize_tables, energy_balance, mutual_profile,
                                           rasterize_power, self_resistance, solve_steady_state)

AMB = 318.15


# rises come from absolute temperatures, so a few ulps of the ambient is the noise floor
ULP_FLOOR = 1e-12


def power_maps(shape=(10, 12)):
    # rises below ~1e-13 K vanish when added to an absolute ambient temperature,
    # so cells are either off or carry at least a microwatt
    cell = st.one_of(st.just(0.0), st.floats(1e-6, 5.0))
    return arrays(np.float64, shape, elements=cell)


def rise(grid, p):
    return solve_steady_state(grid, p) - grid.stack.ambient_temperature


def test_stack_rejects_non_positive():
    with pytest.raises(ConfigurationError):
        ThermalStack(0.0, 1e-3, 1e4, 300.0)
    with pytest.raises(ConfigurationError):
        ThermalStack(100.0, 1e-3, -1.0, 300.0)
    with pytest.raises(ConfigurationError):
        ThermalStack(100.0, 1e-3, 1e4, 0.0)
    with pytest.raises(ConfigurationError):
        ThermalGrid(1, 5, 1e-3)


def test_conductances_match_closed_form(default_grid, oracles):
    assert default_grid.g_v == pytest.approx(oracles["g_v_default"], rel=1e-12)
    assert default_grid.g_lat == pytest.approx(oracles["g_lat_default"], rel=1e-12)


def test_zero_power_gives_ambient(small_grid):
    field = solve_steady_state(small_grid, np.zeros(small_grid.shape))
    assert np.all(field == AMB)
    assert energy_balance(small_grid, np.zeros(small_grid.shape), field) == 0.0


def test_uniform_power_analytic(default_grid, oracles):
    field = solve_steady_state(default_grid, np.full(default_grid.shape, 0.01))
    assert np.max(np.abs(field - (AMB + oracles["uniform_rise_q0.01"]))) <= 1e-9


def test_point_source_mirror_symmetry():
    grid = ThermalGrid(15, 11, 1e-3)
    p = np.zeros(grid.shape)
    p[5, 7] = 3.0
    field = solve_steady_state(grid, p)
    assert np.max(np.abs(field - field[:, ::-1])) <= 1e-9
    assert np.max(np.abs(field - field[::-1, :])) <= 1e-9


def test_energy_balance_perturbation(oracles):
    grid = ThermalGrid(10, 10, 1e-3)
    p = np.zeros(grid.shape)
    p[3, 4], p[6, 6] = 1.5, 0.5
    field = solve_steady_state(grid, p)
    assert energy_balance(grid, p, field + 1.0) == pytest.approx(
        oracles["energy_plus1k_10x10_2w"], rel=1e-6)


def test_residual_below_tolerance(small_grid):
    p = np.random.default_rng(0).random(small_grid.shape)
    t = solve_steady_state(small_grid, p)
    r = apply_conductance(small_grid, t - AMB) - p
    assert np.linalg.norm(r) / np.linalg.norm(p) <= 1e-8


def test_shape_mismatch_rejected(small_grid):
    with pytest.raises(ConfigurationError):
        solve_steady_state(small_grid, np.zeros((3, 3)))


def test_non_convergence_reports_residual(small_grid, monkeypatch):
    monkeypatch.setattr(ThermalGrid, "max_iterations", property(lambda self: 1))
    with pytest.raises(NumericalError) as info:
        solve_steady_state(small_grid, np.random.default_rng(1).random(small_grid.shape))
    assert info.value.residual is not None and info.value.residual > 1e-8


@given(power_maps(), st.floats(0.0, 20.0))
def test_linearity(p, c):
    grid = ThermalGrid(12, 10, 1e-3)
    base = rise(grid, p)
    scaled = rise(grid, c * p)
    assert np.max(np.abs(scaled - c * base)) <= 1e-7 * np.max(np.abs(c * base)) + ULP_FLOOR


@given(power_maps(), power_maps())
def test_superposition(p1, p2):
    grid = ThermalGrid(12, 10, 1e-3)
    both = rise(grid, p1 + p2)
    parts = rise(grid, p1) + rise(grid, p2)
    assert np.max(np.abs(both - parts)) <= 1e-7 * np.max(np.abs(parts)) + ULP_FLOOR


@given(power_maps())
def test_maximum_principle_and_energy(p):
    grid = ThermalGrid(12, 10, 1e-3)
    field = solve_steady_state(grid, p)
    assert np.min(field - AMB) >= -1e-9
    if p.sum() > 0:
        assert energy_balance(grid, p, field) <= 1e-6


def test_translation_covariance(default_grid):
    p = np.zeros(default_grid.shape)
    p[28:32, 26:30] = 0.5
    shifted = np.roll(p, (3, 5), axis=(0, 1))
    a, b = rise(default_grid, p), rise(default_grid, shifted)
    inner_a = a[20:40, 20:40]
    inner_b = b[23:43, 25:45]
    assert np.max(np.abs(inner_a - inner_b)) <= 0.01 * np.max(inner_a)


# ---------------------------------------------------------------- rasterisation

def _spec(chiplets, **kw):
    base = dict(width=16.0, height=16.0, lattice_size=16, grid_nx=16, grid_ny=16,
                cell_size_mm=1.0, min_spacing=0.0)
    base.update(kw)
    return SystemSpec(chiplets=tuple(chiplets), **base)


def test_rasterize_exact_cells():
    spec = _spec([Chiplet("a", 2.0, 2.0, 4.0)])
    p = rasterize_power(state_from_anchors(spec, [(3, 5)]), spec)
    assert np.count_nonzero(p) == 4
    assert np.allclose(p[5:7, 3:5], 1.0)


def test_rasterize_partial_cell():
    # 1.5 x 1 mm on 1 mm cells: one full cell and one half-covered cell
    spec = _spec([Chiplet("a", 1.5, 1.0, 3.0)])
    p = rasterize_power(state_from_anchors(spec, [(0, 0)]), spec)
    assert p[0, 0] == pytest.approx(2.0)
    assert p[0, 1] == pytest.approx(1.0)
    assert p.sum() == pytest.approx(3.0, rel=1e-12)


def test_rasterize_conserves_power(synth_case):
    spec, fp = synth_case
    p = rasterize_power(fp, spec)
    assert p.min() >= 0
    assert p.sum() == pytest.approx(sum(c.power for c in spec.chiplets), rel=1e-9)


def test_rasterize_incomplete_rejected():
    spec = _spec([Chiplet("a", 2.0, 2.0, 4.0), Chiplet("b", 1.0, 1.0, 1.0)])
    with pytest.raises(StateError):
        rasterize_power(reset(spec), spec)


# ---------------------------------------------------------------- characterisation

def test_tables_positive_and_monotone(default_tables):
    assert np.all(default_tables.self_table > 0)
    assert np.all(np.diff(default_tables.mutual_table) <= 0)


def test_raw_mutual_profile_monotone(default_grid):
    prof = mutual_profile(default_grid)
    assert np.all(np.diff(prof) <= 0)
    assert prof[0] > 0


def test_self_resistance_decoupled_limit(oracles):
    stack = ThermalStack(1e-9, 1e-9, 3.0e4, AMB)
    grid = ThermalGrid(20, 20, 1e-3, stack)
    r = self_resistance(grid, 4e-3, 3e-3)
    assert r == pytest.approx(oracles["decoupled_self_4x3"], rel=1e-6)


def test_oversized_sample_rejected(small_grid):
    with pytest.raises(ConfigurationError):
        characterize_tables(small_grid, [(20e-3, 2e-3)])
    with pytest.raises(ConfigurationError):
        characterize_tables(small_grid, [(2e-3, 2e-3)], probe_power=0.0)


def test_characterization_workers_agree(small_grid):
    one = characterize_tables(small_grid, workers=1)
    two = characterize_tables(small_grid, workers=2)
    assert one == two
