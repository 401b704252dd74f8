"""Sequential chiplet placement MDP on a discrete anchor lattice.

Each step places the next chiplet (descending area order) with its
lower-left corner on one of ``A x A`` lattice anchors. The action mask marks
anchors whose rectangle stays inside the interposer and keeps at least
``min_spacing`` from every placed chiplet.
"""
import math
from functools import cached_property
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import kernels
from .errors import ConfigurationError, ContractError, StateError
from .reward import RewardConfig
from .thermal_reference import DEFAULT_STACK, ThermalGrid, ThermalStack

EPS = 1e-9


@dataclass(frozen=True)
class Chiplet:
    name: str
    width: float  # mm
    height: float  # mm
    power: float  # W

    def __post_init__(self):
        for attr in ("width", "height", "power"):
            v = getattr(self, attr)
            if not (math.isfinite(v) and v > 0):
                raise ConfigurationError(f"chiplet {self.name!r}: {attr} must be > 0, got {v!r}")

    @property
    def area(self):
        return self.width * self.height


@dataclass(frozen=True)
class Net:
    a: int
    b: int
    wires: int


@dataclass(frozen=True)
class SystemSpec:
    width: float  # interposer, mm
    height: float
    chiplets: tuple
    nets: tuple = ()
    lattice_size: int = 32
    grid_nx: int = 64
    grid_ny: int = 64
    cell_size_mm: float = 1.0
    min_spacing: float = 0.1
    stack: ThermalStack = DEFAULT_STACK
    reward: RewardConfig = field(default_factory=RewardConfig)

    def __post_init__(self):
        object.__setattr__(self, "chiplets", tuple(self.chiplets))
        object.__setattr__(self, "nets", tuple(self.nets))
        self.validate()

    def validate(self):
        if not (self.width > 0 and self.height > 0):
            raise ConfigurationError("interposer dimensions must be > 0")
        if not self.chiplets:
            raise ConfigurationError("spec has no chiplets")
        if self.lattice_size < 1:
            raise ConfigurationError("lattice_size must be >= 1")
        if self.min_spacing < 0:
            raise ConfigurationError("min_spacing must be >= 0")
        names = [c.name for c in self.chiplets]
        if len(set(names)) != len(names):
            raise ConfigurationError("chiplet names must be unique")
        for c in self.chiplets:
            if c.width > self.width + EPS or c.height > self.height + EPS:
                raise ConfigurationError(f"chiplet {c.name!r} is larger than the interposer")
        if sum(c.area for c in self.chiplets) > self.width * self.height + EPS:
            raise ConfigurationError("total chiplet area exceeds interposer area")
        n = len(self.chiplets)
        for net in self.nets:
            if not (0 <= net.a < n and 0 <= net.b < n) or net.a == net.b:
                raise ConfigurationError(f"invalid net endpoints {net.a}-{net.b}")
            if net.wires < 1:
                raise ConfigurationError("net wire count must be >= 1")
        cs = self.cell_size_mm
        if (abs(self.grid_nx * cs - self.width) > cs + EPS
                or abs(self.grid_ny * cs - self.height) > cs + EPS):
            raise ConfigurationError("thermal grid does not cover the interposer within one cell")
        # constructing the grid validates nx, ny and cell size
        self.thermal_grid

    @property
    def n(self):
        return len(self.chiplets)

    @cached_property
    def pitch_x(self):
        return self.width / self.lattice_size

    @cached_property
    def pitch_y(self):
        return self.height / self.lattice_size

    @cached_property
    def thermal_grid(self):
        return ThermalGrid(self.grid_nx, self.grid_ny, self.cell_size_mm * 1e-3, self.stack)

    @cached_property
    def placement_order(self):
        return tuple(sorted(range(self.n), key=lambda i: -self.chiplets[i].area))

    @cached_property
    def footprints(self):
        """Per chiplet ``(kx, ky)``: lattice cells covered from an anchor."""
        return tuple((int(math.ceil(c.width / self.pitch_x - EPS)),
                      int(math.ceil(c.height / self.pitch_y - EPS))) for c in self.chiplets)

    @cached_property
    def max_power(self):
        return max(c.power for c in self.chiplets)

    def with_reward(self, reward):
        return replace(self, reward=reward)


@dataclass(frozen=True, eq=False)
class FloorplanState:
    order: tuple
    anchors: tuple  # per chiplet index: (ix, iy) or None
    occupancy: np.ndarray  # bool [iy, ix]
    t: int = 0

    @property
    def complete(self):
        return self.t == len(self.order)

    @property
    def next_chiplet(self) -> Optional[int]:
        return None if self.complete else self.order[self.t]

    def __eq__(self, other):
        if not isinstance(other, FloorplanState):
            return NotImplemented
        return (self.order == other.order and self.anchors == other.anchors
                and self.t == other.t and np.array_equal(self.occupancy, other.occupancy))

    def __hash__(self):
        return hash((self.order, self.anchors, self.t))


def reset(spec):
    spec.validate()
    a = spec.lattice_size
    return FloorplanState(spec.placement_order, (None,) * spec.n, np.zeros((a, a), dtype=bool), 0)


def anchor_position(spec, anchor):
    return anchor[0] * spec.pitch_x, anchor[1] * spec.pitch_y


def placed_rects(state, spec):
    """``(x, y, w, h, power)`` in mm for every placed chiplet, by chiplet index."""
    out = []
    for k, anc in enumerate(state.anchors):
        if anc is not None:
            c = spec.chiplets[k]
            out.append((anc[0] * spec.pitch_x, anc[1] * spec.pitch_y, c.width, c.height, c.power))
    return out


def _mask_for(spec, k, rects):
    c = spec.chiplets[k]
    placed = np.array([r[:4] for r in rects], dtype=np.float64).reshape(-1, 4)
    return kernels.anchor_mask(placed, c.width, c.height, spec.min_spacing, spec.width,
                               spec.height, spec.lattice_size, spec.pitch_x, spec.pitch_y)


def action_mask(state, spec):
    if state.complete:
        raise StateError("episode is terminal; no chiplet left to place")
    return _mask_for(spec, state.next_chiplet, placed_rects(state, spec))


def mask_excluding(anchors, spec, k):
    """Feasible anchors for chiplet ``k`` given every other placed chiplet."""
    rects = []
    for j, anc in enumerate(anchors):
        if anc is not None and j != k:
            c = spec.chiplets[j]
            rects.append((anc[0] * spec.pitch_x, anc[1] * spec.pitch_y, c.width, c.height))
    return _mask_for(spec, k, rects)


def covered_cells(spec, k, anchor):
    """Lattice cells (iy slice, ix slice) overlapped by chiplet ``k`` at ``anchor``."""
    kx, ky = spec.footprints[k]
    a = spec.lattice_size
    return slice(anchor[1], min(anchor[1] + ky, a)), slice(anchor[0], min(anchor[0] + kx, a))


def anchor_free(spec, anchors, k, anchor):
    """Whether chiplet ``k`` fits at ``anchor`` given every other placed chiplet."""
    c = spec.chiplets[k]
    x, y = anchor[0] * spec.pitch_x, anchor[1] * spec.pitch_y
    if x + c.width > spec.width + EPS or y + c.height > spec.height + EPS:
        return False
    s = spec.min_spacing
    for j, anc in enumerate(anchors):
        if anc is None or j == k:
            continue
        o = spec.chiplets[j]
        xo, yo = anc[0] * spec.pitch_x, anc[1] * spec.pitch_y
        if not (x + c.width + s <= xo + EPS or xo + o.width + s <= x + EPS
                or y + c.height + s <= yo + EPS or yo + o.height + s <= y + EPS):
            return False
    return True


def step(state, action, spec):
    """Place the next chiplet at lattice anchor ``action = (ix, iy)``."""
    mask = action_mask(state, spec)
    ix, iy = int(action[0]), int(action[1])
    a = spec.lattice_size
    if not (0 <= ix < a and 0 <= iy < a) or not mask[iy, ix]:
        raise ContractError(f"action {(ix, iy)} is masked for chiplet "
                            f"{spec.chiplets[state.next_chiplet].name!r}")
    k = state.next_chiplet
    occ = state.occupancy.copy()
    occ[covered_cells(spec, k, (ix, iy))] = True
    anchors = list(state.anchors)
    anchors[k] = (ix, iy)
    nxt = FloorplanState(state.order, tuple(anchors), occ, state.t + 1)
    return nxt, nxt.complete


def is_dead_end(state, spec):
    return not state.complete and not action_mask(state, spec).any()


def rects_legal(spec, anchors):
    """Brute-force legality: in bounds and pairwise separated by ``min_spacing``."""
    rects = []
    for k, anc in enumerate(anchors):
        if anc is None:
            continue
        c = spec.chiplets[k]
        x, y = anchor_position(spec, anc)
        if x < -EPS or y < -EPS or x + c.width > spec.width + EPS or y + c.height > spec.height + EPS:
            return False
        rects.append((x, y, c.width, c.height))
    s = spec.min_spacing
    for i in range(len(rects)):
        xi, yi, wi, hi = rects[i]
        for j in range(i + 1, len(rects)):
            xj, yj, wj, hj = rects[j]
            if not (xi + wi + s <= xj + EPS or xj + wj + s <= xi + EPS
                    or yi + hi + s <= yj + EPS or yj + hj + s <= yi + EPS):
                return False
    return True


def state_from_anchors(spec, anchors, check=True):
    """Floorplan from per-chiplet anchors; raises if illegal.

    ``check=False`` skips the legality test for callers that already know
    the anchors are legal.
    """
    anchors = tuple(None if a is None else (int(a[0]), int(a[1])) for a in anchors)
    if len(anchors) != spec.n:
        raise ConfigurationError(f"expected {spec.n} anchors, got {len(anchors)}")
    if check and not rects_legal(spec, anchors):
        raise ContractError("anchors describe an overlapping or out-of-bounds floorplan")
    a = spec.lattice_size
    occ = np.zeros((a, a), dtype=bool)
    for k, anc in enumerate(anchors):
        if anc is not None:
            occ[covered_cells(spec, k, anc)] = True
    order = spec.placement_order
    t = sum(a is not None for a in anchors)
    return FloorplanState(order, anchors, occ, t)


N_CHANNELS = 4


def encode_observation(state, spec):
    """``(4, A, A)`` channel stack: occupancy, normalised power, next footprint, progress."""
    a = spec.lattice_size
    obs = np.zeros((N_CHANNELS, a, a))
    obs[0] = state.occupancy
    pmax = spec.max_power
    for k, anc in enumerate(state.anchors):
        if anc is not None:
            cells = covered_cells(spec, k, anc)
            obs[1][cells] = np.maximum(obs[1][cells], spec.chiplets[k].power / pmax)
    k = state.next_chiplet
    if k is not None:
        kx, ky = spec.footprints[k]
        obs[2, :ky, :kx] = 1.0
    obs[3] = state.t / spec.n
    return obs


def random_floorplan(spec, rng, attempts=10_000):
    """Legal complete floorplan by sequential uniform sampling of feasible anchors.

    Chiplets are placed in descending-area order; an attempt that hits a
    dead end is discarded. Returns ``None`` when every attempt fails.
    """
    for _ in range(attempts):
        state = reset(spec)
        while not state.complete:
            mask = action_mask(state, spec)
            free = np.flatnonzero(mask)
            if free.size == 0:
                break
            iy, ix = divmod(int(free[rng.integers(free.size)]), spec.lattice_size)
            state, _ = step(state, (ix, iy), spec)
        if state.complete:
            return state
    return None
