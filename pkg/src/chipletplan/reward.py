"""Thermal-aware reward combining total wirelength and peak temperature."""
import math
from dataclasses import dataclass
from typing import Optional

from .errors import ConfigurationError


@dataclass(frozen=True)
class RewardConfig:
    lam: float = 1e-3  # per mm of wirelength
    mu: float = 0.5
    t0: float = 358.15  # K
    alpha: float = 2.0
    failure_reward: float = -50.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.lam, self.mu, self.t0, self.alpha,
                                               self.failure_reward)):
            raise ConfigurationError("reward parameters must be finite")
        if self.lam < 0 or self.mu < 0:
            raise ConfigurationError("lambda and mu must be >= 0")
        if self.alpha <= 1:
            raise ConfigurationError("alpha must be > 1 for a smooth penalty at t0")
        if self.t0 <= 0:
            raise ConfigurationError("t0 must be > 0")


@dataclass(frozen=True)
class RewardResult:
    reward: float
    wirelength: Optional[float]
    temperature: Optional[float]

    @property
    def complete(self):
        return self.wirelength is not None


def compute_reward(wirelength, temperature, cfg):
    excess = temperature - cfg.t0
    if excess <= 0:
        return -cfg.lam * wirelength
    return -cfg.lam * wirelength - cfg.mu * excess ** cfg.alpha / (1.0 + math.exp(-excess))


def evaluate_floorplan(floorplan, spec, tables=None, cfg=None, *, reference=False, clock=None):
    """Bump assignment, wirelength, thermal evaluation, then the reward.

    ``reference=True`` takes the peak temperature from the finite-difference
    solver instead of the resistance tables. Incomplete floorplans score
    ``cfg.failure_reward``. A ``clock`` (see ``budget.WorkClock``) is charged
    for the work done.
    """
    from .fast_thermal import evaluate_temperatures
    from .interconnect import wirelength
    from .thermal_reference import peak_temperature

    cfg = cfg or spec.reward
    if not floorplan.complete:
        return RewardResult(cfg.failure_reward, None, None)
    wl = wirelength(floorplan, spec)
    if reference:
        temp, iters = peak_temperature(floorplan, spec, return_iterations=True)
        if clock is not None:
            grid = spec.thermal_grid
            clock.reference_eval(iters, grid.nx * grid.ny, len(spec.nets))
    else:
        if tables is None:
            raise ConfigurationError("fast evaluation needs resistance tables")
        temp = evaluate_temperatures(floorplan, spec, tables).max_temperature
        if clock is not None:
            clock.fast_eval(spec, len(spec.nets))
    return RewardResult(compute_reward(wl, temp, cfg), wl, temp)
