"""Fast thermal evaluation by resistance-table lookup and superposition.

A chiplet's temperature is its own power times the self resistance of its
footprint plus, for every other chiplet, the sum over that chiplet's
rasterised cells of cell power times the mutual resistance at the distance
between the cell and the victim's centre cell.

The tables come from a centred source, so they know nothing about the
adiabatic interposer edges. By default the evaluator also adds the
first-order mirror images of every source cell about each edge (the victim's
own footprint included), which removes most of the under-estimate for
chiplets pressed against the boundary. Mutual terms below ``KERNEL_RTOL``
of the zero-distance value are dropped.
"""
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigurationError, StateError

KERNEL_RTOL = 1e-8
_PLAN_CACHE_SIZE = 64


@dataclass(eq=False)
class ResistanceTables:
    self_widths: np.ndarray  # m, strictly increasing
    self_heights: np.ndarray  # m, strictly increasing
    self_table: np.ndarray  # K/W, [width index, height index]
    mutual_table: np.ndarray  # K/W, bin k at distance k * cell_size
    cell_size: float  # m
    ambient_temperature: float  # K
    grid_nx: int = 0
    grid_ny: int = 0
    _kernel: np.ndarray = field(default=None, repr=False)
    _plans: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.self_widths = np.asarray(self.self_widths, dtype=np.float64)
        self.self_heights = np.asarray(self.self_heights, dtype=np.float64)
        self.self_table = np.asarray(self.self_table, dtype=np.float64)
        self.mutual_table = np.asarray(self.mutual_table, dtype=np.float64)
        if self.self_table.size == 0 or self.mutual_table.size == 0:
            raise ConfigurationError("resistance tables are empty")
        if self.self_table.shape != (self.self_widths.size, self.self_heights.size):
            raise ConfigurationError("self_table shape does not match its axes")
        for name, axis in (("self_widths", self.self_widths), ("self_heights", self.self_heights)):
            if np.any(np.diff(axis) <= 0):
                raise ConfigurationError(f"{name} must be strictly increasing")
        if np.any(self.self_table < 0) or np.any(self.mutual_table < 0):
            raise ConfigurationError("resistance entries must be >= 0")
        if np.any(np.diff(self.mutual_table) > 0):
            raise ConfigurationError("mutual_table must be non-increasing")

    def __eq__(self, other):
        if not isinstance(other, ResistanceTables):
            return NotImplemented
        return (np.array_equal(self.self_widths, other.self_widths)
                and np.array_equal(self.self_heights, other.self_heights)
                and np.array_equal(self.self_table, other.self_table)
                and np.array_equal(self.mutual_table, other.mutual_table)
                and self.cell_size == other.cell_size
                and self.ambient_temperature == other.ambient_temperature
                and self.grid_nx == other.grid_nx and self.grid_ny == other.grid_ny)

    @property
    def support(self):
        """Number of distance bins whose resistance is above the truncation level."""
        m = self.mutual_table
        above = np.nonzero(m > KERNEL_RTOL * m[0])[0]
        return int(above[-1]) + 1 if above.size else 1

    def offset_kernel(self):
        """Mutual resistance ``[|dy|, |dx|]`` for cell offsets inside the support radius."""
        if self._kernel is None:
            r = self.support
            dy, dx = np.indices((r, r))
            dist = np.hypot(dx, dy)
            k = lookup_mutual(self, dist * self.cell_size)
            k[dist >= r] = 0.0
            self._kernel = k
        return self._kernel


@dataclass(frozen=True)
class ThermalEstimate:
    per_chiplet_temperature: tuple
    max_temperature: float


def lookup_self(tables, w, h):
    """Bilinear self resistance at footprint ``w`` x ``h`` (m), clamped to the samples."""
    if w <= 0 or h <= 0:
        raise ConfigurationError(f"footprint must be positive, got {w}x{h}")
    return float(kernels.python.bilinear(tables.self_widths, tables.self_heights,
                                         tables.self_table, float(w), float(h)))


def lookup_mutual(tables, d):
    """Linear interpolation over distance bins; clamps below and beyond the table."""
    d = np.asarray(d, dtype=np.float64)
    if np.any(d < 0):
        raise ConfigurationError("distance must be >= 0")
    bins = np.arange(tables.mutual_table.size) * tables.cell_size
    out = np.interp(d, bins, tables.mutual_table)
    return float(out) if out.ndim == 0 else out


def check_compatible(tables, spec):
    """Refuse tables characterised for a different grid or stack."""
    from .errors import ParameterMismatchError

    grid = spec.thermal_grid
    if not np.isclose(tables.cell_size, grid.cell_size, rtol=1e-12, atol=0):
        raise ParameterMismatchError(
            f"tables cell_size {tables.cell_size!r} m != spec {grid.cell_size!r} m")
    if tables.ambient_temperature != grid.stack.ambient_temperature:
        raise ParameterMismatchError(
            f"tables ambient {tables.ambient_temperature!r} K != spec "
            f"{grid.stack.ambient_temperature!r} K")


class _Plan:
    """Position-independent part of an evaluation: sizes and self rises."""

    def __init__(self, spec, tables):
        check_compatible(tables, spec)
        grid = spec.thermal_grid
        cs_mm = tables.cell_size * 1e3
        self.spec = spec
        self.nx, self.ny = grid.nx, grid.ny
        self.pitch_x, self.pitch_y = spec.pitch_x / cs_mm, spec.pitch_y / cs_mm
        self.sizes = np.array([(c.width / cs_mm, c.height / cs_mm, c.power)
                               for c in spec.chiplets])
        self.self_rise = np.array([c.power * lookup_self(tables, c.width * 1e-3, c.height * 1e-3)
                                   for c in spec.chiplets])


def _plan_for(tables, spec):
    plan = tables._plans.get(id(spec))
    if plan is None or plan.spec is not spec:
        if len(tables._plans) >= _PLAN_CACHE_SIZE:
            tables._plans.clear()
        plan = tables._plans[id(spec)] = _Plan(spec, tables)
    return plan


def evaluate_temperatures(floorplan, spec, tables, images=True):
    """Per-chiplet and peak temperatures of a complete floorplan."""
    if not floorplan.complete:
        raise StateError("cannot evaluate a floorplan with unplaced chiplets")
    plan = _plan_for(tables, spec)
    rises = plan.self_rise + kernels.anchored_rises(
        floorplan.anchors, plan.sizes, plan.pitch_x, plan.pitch_y, tables.offset_kernel(),
        plan.nx, plan.ny, images)
    temps = tables.ambient_temperature + rises
    return ThermalEstimate(tuple(temps.tolist()), float(temps.max()))
