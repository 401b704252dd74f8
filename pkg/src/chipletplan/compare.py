"""Head-to-head runs of the RL agent and the annealer under equal budgets.

Every method gets its own :class:`~chipletplan.budget.WorkClock` with the
same limit. The floorplan each method returns is re-scored with the
reference solver, so all rows share one ground truth whatever thermal model
guided the search. Table characterisation is done once per grid up front and
is not charged to any method.
"""
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .agent import TrainConfig, train
from .annealer import AnnealConfig, anneal
from .budget import WorkClock
from .errors import ChipletPlanError, ConfigurationError
from .io import generate_synthetic
from .reward import compute_reward, evaluate_floorplan
from .thermal_reference import characterize_tables

log = logging.getLogger(__name__)

METHODS = ("rl_rnd", "rl", "sa_reference", "sa_fast")
REPORT_COLUMNS = ("system", "method", "seed", "reward", "wirelength_mm", "max_temperature_k",
                  "runtime_s", "status")


@dataclass(frozen=True)
class RunReport:
    system: str
    method: str
    seed: int
    reward: float
    wirelength: float  # mm
    temperature: float  # K
    runtime: float  # budget seconds consumed
    status: str = "ok"

    def row(self):
        return (self.system, self.method, self.seed, self.reward, self.wirelength,
                self.temperature, self.runtime, self.status)


def synthetic_systems(count, seed=0, chiplets=(3, 10)):
    """``count`` named synthetic systems with chiplet counts drawn from ``chiplets``."""
    rng = np.random.default_rng(seed)
    lo, hi = chiplets
    return [(f"synth{i}", generate_synthetic(int(rng.integers(lo, hi + 1)), rng))
            for i in range(count)]


def worker_count(requested=None):
    """Requested workers, capped by ``CHIPLETPLAN_THREADS`` when set."""
    n = requested or 1
    cap = os.environ.get("CHIPLETPLAN_THREADS")
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise ConfigurationError(f"CHIPLETPLAN_THREADS must be an integer, got {cap!r}")
    return max(1, n)


def _search(method, spec, tables, budget, seed):
    clock = WorkClock(budget)
    if method in ("rl_rnd", "rl"):
        cfg = TrainConfig(epochs=10 ** 9, seed=seed, rnd_enabled=method == "rl_rnd")
        res = train(spec, tables, train_cfg=cfg, clock=clock)
        return res.best_floorplan, clock.elapsed
    if method in ("sa_reference", "sa_fast"):
        backend = "reference" if method == "sa_reference" else "fast"
        cfg = AnnealConfig(iterations=None, seed=seed, backend=backend)
        res = anneal(spec, cfg=cfg, tables=tables, clock=clock)
        return res.best_floorplan, clock.elapsed
    raise ConfigurationError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")


def run_method(method, system, spec, tables, budget, seed):
    """One budgeted run, re-scored with the reference solver; failures become a status."""
    try:
        best, used = _search(method, spec, tables, budget, seed)
        if best is None:
            return RunReport(system, method, seed, math.nan, math.nan, math.nan, used,
                             "no complete floorplan")
        res = evaluate_floorplan(best, spec, reference=True)
        return RunReport(system, method, seed, res.reward, res.wirelength, res.temperature, used)
    except (ChipletPlanError, ArithmeticError, ValueError) as exc:
        log.warning("%s/%s seed %d failed: %s", system, method, seed, exc)
        return RunReport(system, method, seed, math.nan, math.nan, math.nan, math.nan,
                         f"failed: {type(exc).__name__}: {exc}")


def _run_job(job):
    return run_method(*job)


def compare(systems, budget, seeds, methods=METHODS, tables=None, workers=1, on_report=None):
    """Run every method on every ``(name, spec)`` system for every seed.

    ``tables`` maps a system name to its resistance tables; missing entries
    are characterised from the system's grid. Rows come back in
    system, seed, method order regardless of ``workers``.
    """
    if budget is None or budget <= 0:
        raise ConfigurationError("budget must be > 0 seconds")
    for m in methods:
        if m not in METHODS:
            raise ConfigurationError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
    tables = dict(tables or {})
    by_grid = {}
    for name, spec in systems:
        if name not in tables:
            grid = spec.thermal_grid
            key = (grid.nx, grid.ny, grid.cell_size, grid.stack)
            if key not in by_grid:
                by_grid[key] = characterize_tables(grid)
            tables[name] = by_grid[key]
    jobs = [(m, name, spec, tables[name], budget, int(s))
            for name, spec in systems for s in seeds for m in methods]
    workers = worker_count(workers)
    reports = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for rep in pool.map(_run_job, jobs):
                reports.append(rep)
                if on_report is not None:
                    on_report(rep)
    else:
        for job in jobs:
            rep = _run_job(job)
            reports.append(rep)
            if on_report is not None:
                on_report(rep)
    return reports


def mean_rewards(reports):
    """``{system: {method: mean reward over seeds}}``; failed rows count as ``nan``."""
    acc = {}
    for r in reports:
        acc.setdefault(r.system, {}).setdefault(r.method, []).append(r.reward)
    return {s: {m: float(np.mean(v)) for m, v in ms.items()} for s, ms in acc.items()}


def wins(reports, method="rl_rnd", baseline="sa_reference"):
    """Systems on which ``method``'s mean reward is at least ``baseline``'s."""
    out = []
    for system, ms in mean_rewards(reports).items():
        a, b = ms.get(method, math.nan), ms.get(baseline, math.nan)
        if a >= b:  # nan compares false
            out.append(system)
    return out


def consistency_error(reports, reward_cfgs):
    """Largest |reward - compute_reward(W, T)| over successful rows."""
    worst = 0.0
    for r in reports:
        if r.status != "ok":
            continue
        worst = max(worst, abs(r.reward - compute_reward(r.wirelength, r.temperature,
                                                         reward_cfgs[r.system])))
    return worst
