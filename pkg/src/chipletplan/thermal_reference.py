"""Steady-state finite-difference thermal solver over the interposer plane.

The interposer is a single lateral conduction layer discretised into square
cells. Neighbouring cells are coupled by ``g_lat = k * t`` and every cell
leaks to ambient through ``g_v = h * cell_size**2``. The resulting
conductance matrix is symmetric positive definite and is solved with a
Jacobi-preconditioned conjugate gradient that works on the stencil directly.

Arrays are indexed ``[iy, ix]``; lengths are metres unless a name says mm.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigurationError, NumericalError, StateError

SOLVE_RTOL = 1e-10


@dataclass(frozen=True)
class ThermalStack:
    lateral_conductivity: float  # W/(m K)
    thickness: float  # m
    vertical_conductance: float  # W/(m^2 K), cell to ambient
    ambient_temperature: float  # K

    def __post_init__(self):
        for name in ("lateral_conductivity", "thickness", "vertical_conductance",
                     "ambient_temperature"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ConfigurationError(f"{name} must be finite and > 0, got {v!r}")


DEFAULT_STACK = ThermalStack(
    lateral_conductivity=100.0,
    thickness=0.5e-3,
    vertical_conductance=3.0e4,
    ambient_temperature=318.15,
)


@dataclass(frozen=True)
class ThermalGrid:
    nx: int
    ny: int
    cell_size: float  # m
    stack: ThermalStack = DEFAULT_STACK

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ConfigurationError(f"grid must be at least 2x2, got {self.nx}x{self.ny}")
        if not (math.isfinite(self.cell_size) and self.cell_size > 0):
            raise ConfigurationError(f"cell_size must be > 0, got {self.cell_size!r}")

    @property
    def shape(self):
        return (self.ny, self.nx)

    @property
    def g_lat(self):
        return self.stack.lateral_conductivity * self.stack.thickness

    @property
    def g_v(self):
        return self.stack.vertical_conductance * self.cell_size ** 2

    @property
    def max_iterations(self):
        return int(50 * math.sqrt(self.nx * self.ny))


def apply_conductance(grid, rise):
    """Conductance matrix times a temperature-rise field (stencil form)."""
    gl = grid.g_lat
    out = grid.g_v * rise
    d = rise[:, 1:] - rise[:, :-1]
    out[:, 1:] += gl * d
    out[:, :-1] -= gl * d
    d = rise[1:, :] - rise[:-1, :]
    out[1:, :] += gl * d
    out[:-1, :] -= gl * d
    return out


def _diagonal(grid):
    diag = np.full(grid.shape, grid.g_v)
    gl = grid.g_lat
    diag[:, 1:] += gl
    diag[:, :-1] += gl
    diag[1:, :] += gl
    diag[:-1, :] += gl
    return diag


def solve_steady_state(grid, power, *, return_info=False):
    """Temperature field for a power map via preconditioned CG.

    Solves ``G (T - T_amb) = P`` to a relative residual of ``SOLVE_RTOL``, which bounds
    the residual of ``G T = P + g_v T_amb`` by the same factor.
    """
    power = np.asarray(power, dtype=np.float64)
    if power.shape != grid.shape:
        raise ConfigurationError(f"power map shape {power.shape} != grid {grid.shape}")
    t_amb = grid.stack.ambient_temperature
    bnorm = float(np.linalg.norm(power))
    if bnorm == 0.0:
        field = np.full(grid.shape, t_amb)
        return (field, 0) if return_info else field

    inv_diag = 1.0 / _diagonal(grid)
    x = np.zeros(grid.shape)
    r = power.copy()
    z = r * inv_diag
    p = z.copy()
    rz = float(np.vdot(r, z))
    rel = 1.0
    for it in range(1, grid.max_iterations + 1):
        ap = apply_conductance(grid, p)
        alpha = rz / float(np.vdot(p, ap))
        x += alpha * p
        r -= alpha * ap
        rel = float(np.linalg.norm(r)) / bnorm
        if rel <= SOLVE_RTOL:
            field = x + t_amb
            return (field, it) if return_info else field
        z = r * inv_diag
        rz_new = float(np.vdot(r, z))
        p *= rz_new / rz
        p += z
        rz = rz_new
    raise NumericalError(
        f"CG did not converge in {grid.max_iterations} iterations "
        f"(relative residual {rel:.3e})", residual=rel)


def energy_balance(grid, power, field):
    """Relative mismatch between heat leaving to ambient and injected power."""
    power = np.asarray(power, dtype=np.float64)
    out = grid.g_v * float(np.sum(np.asarray(field) - grid.stack.ambient_temperature))
    total = float(np.sum(power))
    return abs(out - total) / max(total, 1e-300)


def rects_to_cells(rects_mm, cell_size):
    """Convert ``x, y, w, h, p`` rectangles from mm to cell units."""
    r = np.array(rects_mm, dtype=np.float64).reshape(-1, 5)
    r[:, :4] /= cell_size * 1e3
    return r


def rasterize_power(floorplan, spec, grid=None):
    """Spread each placed chiplet's power uniformly over the cells it covers."""
    from .floorplan_env import placed_rects

    grid = grid or spec.thermal_grid
    if not floorplan.complete:
        raise StateError("cannot rasterise a floorplan with unplaced chiplets")
    return kernels.rasterize(rects_to_cells(placed_rects(floorplan, spec), grid.cell_size),
                             grid.nx, grid.ny)


def peak_temperature(floorplan, spec, grid=None, *, return_iterations=False):
    """Maximum cell temperature of the reference solution for a floorplan."""
    grid = grid or spec.thermal_grid
    field, iters = solve_steady_state(grid, rasterize_power(floorplan, spec, grid),
                                      return_info=True)
    peak = float(field.max())
    return (peak, iters) if return_iterations else peak


def _footprint_anchor(grid, w, h):
    # centred, with the lower-left corner snapped down to a cell boundary as the
    # placement lattice does
    cx = math.floor((grid.nx - w / grid.cell_size) / 2 + 1e-9)
    cy = math.floor((grid.ny - h / grid.cell_size) / 2 + 1e-9)
    return cx, cy


def self_resistance(grid, w, h, probe_power=1.0):
    """Peak rise per watt under a single centred ``w`` x ``h`` (m) footprint."""
    if w <= 0 or h <= 0:
        raise ConfigurationError(f"footprint must be positive, got {w}x{h}")
    wc, hc = w / grid.cell_size, h / grid.cell_size
    if wc > grid.nx + 1e-9 or hc > grid.ny + 1e-9:
        raise ConfigurationError(
            f"footprint {w * 1e3:.3f}x{h * 1e3:.3f} mm exceeds the "
            f"{grid.nx * grid.cell_size * 1e3:.3f}x{grid.ny * grid.cell_size * 1e3:.3f} mm grid")
    x0, y0 = _footprint_anchor(grid, w, h)
    power = kernels.rasterize(np.array([[x0, y0, wc, hc, probe_power]]), grid.nx, grid.ny)
    field = solve_steady_state(grid, power)
    under = field[y0:int(math.ceil(y0 + hc - 1e-9)), x0:int(math.ceil(x0 + wc - 1e-9))]
    return (float(under.max()) - grid.stack.ambient_temperature) / probe_power


def mutual_profile(grid, probe_power=1.0):
    """Rise per watt versus distance from a single-cell source, binned per cell.

    Bins are averaged over all cells at the same rounded distance and then made
    monotone non-increasing by a running minimum.
    """
    sx, sy = grid.nx // 2, grid.ny // 2
    power = np.zeros(grid.shape)
    power[sy, sx] = probe_power
    rise = (solve_steady_state(grid, power) - grid.stack.ambient_temperature) / probe_power
    yy, xx = np.indices(grid.shape)
    bins = np.rint(np.hypot(xx - sx, yy - sy)).astype(np.int64).ravel()
    sums = np.bincount(bins, weights=rise.ravel())
    counts = np.bincount(bins)
    filled = counts > 0
    k = np.arange(counts.shape[0])
    profile = np.interp(k, k[filled], sums[filled] / counts[filled])
    return np.maximum(np.minimum.accumulate(profile), 0.0)


DEFAULT_SIZE_SAMPLES_MM = (2, 2.5, 3, 3.5, 4, 5, 6, 7, 8, 10, 12, 14, 16, 20)


def default_size_samples(grid):
    """Cross product of the default sample sizes that fit the grid, in metres."""
    limit_w = grid.nx * grid.cell_size * 1e3
    limit_h = grid.ny * grid.cell_size * 1e3
    ws = [s for s in DEFAULT_SIZE_SAMPLES_MM if s <= limit_w]
    hs = [s for s in DEFAULT_SIZE_SAMPLES_MM if s <= limit_h]
    return [(w * 1e-3, h * 1e-3) for w in ws for h in hs]


def characterize_tables(grid, size_samples=None, probe_power=1.0, workers=1):
    """Build the self / mutual resistance tables by repeated reference solves.

    ``size_samples`` is a list of ``(w, h)`` in metres forming a full cross
    product of width and height axes.
    """
    from .fast_thermal import ResistanceTables

    if probe_power <= 0:
        raise ConfigurationError("probe_power must be > 0")
    if size_samples is None:
        size_samples = default_size_samples(grid)
    ws = sorted({float(w) for w, _ in size_samples})
    hs = sorted({float(h) for _, h in size_samples})
    if len(ws) * len(hs) != len(set(map(tuple, size_samples))):
        raise ConfigurationError("size_samples must form a full width x height cross product")
    pairs = [(w, h) for w in ws for h in hs]
    for w, h in pairs:
        if w / grid.cell_size > grid.nx + 1e-9 or h / grid.cell_size > grid.ny + 1e-9:
            raise ConfigurationError(
                f"sample {w * 1e3:g}x{h * 1e3:g} mm exceeds the interposer grid")

    def one(pair):
        return self_resistance(grid, pair[0], pair[1], probe_power)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(one, pairs))
    else:
        values = [one(p) for p in pairs]
    table = np.array(values).reshape(len(ws), len(hs))
    return ResistanceTables(
        self_widths=np.array(ws),
        self_heights=np.array(hs),
        self_table=table,
        mutual_table=mutual_profile(grid, probe_power),
        cell_size=grid.cell_size,
        ambient_temperature=grid.stack.ambient_temperature,
        grid_nx=grid.nx,
        grid_ny=grid.ny,
    )
