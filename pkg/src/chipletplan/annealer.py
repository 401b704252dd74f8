"""Simulated-annealing floorplanner on the same reward as the RL agent.

Moves act on lattice anchors of a complete legal floorplan: relocate one
chiplet to a random feasible anchor, swap two chiplets' anchors, or nudge a
chiplet by one lattice step. Acceptance is Metropolis on the reward change
with a geometric stage schedule whose start temperature is calibrated from
probe moves.
"""
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InstanceError
from .floorplan_env import (anchor_free, mask_excluding, random_floorplan, rects_legal,
                            state_from_anchors)
from .reward import evaluate_floorplan

MOVE_TYPES = ("relocate", "swap", "nudge")
MAX_MOVE_ATTEMPTS = 50
INITIAL_ATTEMPTS = 10_000
TRACE_COLUMNS = ("iteration", "tau", "reward", "best_reward")
_NUDGES = ((1, 0), (-1, 0), (0, 1), (0, -1))
_MEMO_LIMIT = 200_000


@dataclass(frozen=True)
class AnnealConfig:
    iterations: int = 20_000
    p0: float = 0.8
    cooling: float = 0.95
    moves_per_stage: int = 200
    move_weights: tuple = (1.0, 1.0, 1.0)  # relocate, swap, nudge
    seed: int = 0
    backend: str = "fast"
    probe_moves: int = 100

    def __post_init__(self):
        if self.iterations is not None and self.iterations < 0:
            raise ConfigurationError("iterations must be >= 0")
        if not 0.0 < self.p0 < 1.0:
            raise ConfigurationError("p0 must be in (0, 1)")
        if not 0.0 < self.cooling < 1.0:
            raise ConfigurationError("cooling must be in (0, 1)")
        if self.moves_per_stage < 1 or self.probe_moves < 1:
            raise ConfigurationError("moves_per_stage and probe_moves must be >= 1")
        w = tuple(float(x) for x in self.move_weights)
        if len(w) != 3 or any(x < 0 for x in w) or sum(w) <= 0:
            raise ConfigurationError("move_weights needs three weights >= 0 with a positive sum")
        object.__setattr__(self, "move_weights", w)
        if self.backend not in ("fast", "reference"):
            raise ConfigurationError(f"unknown thermal backend {self.backend!r}")


@dataclass
class AnnealResult:
    best_floorplan: object
    reward: float
    wirelength: float
    temperature: float
    trace: list
    initial_floorplan: object
    tau0: float
    evaluations: int


def _relocate(anchors, spec, rng):
    k = int(rng.integers(spec.n))
    free = np.flatnonzero(mask_excluding(anchors, spec, k))
    a = spec.lattice_size
    cur = anchors[k][1] * a + anchors[k][0]
    free = free[free != cur]
    if free.size == 0:
        return None
    iy, ix = divmod(int(free[rng.integers(free.size)]), a)
    out = list(anchors)
    out[k] = (ix, iy)
    return out


def _swap(anchors, spec, rng):
    k1, k2 = (int(v) for v in rng.choice(spec.n, size=2, replace=False))
    out = list(anchors)
    out[k1], out[k2] = anchors[k2], anchors[k1]
    return out if rects_legal(spec, out) else None


def _nudge(anchors, spec, rng):
    k = int(rng.integers(spec.n))
    dx, dy = _NUDGES[int(rng.integers(4))]
    ix, iy = anchors[k][0] + dx, anchors[k][1] + dy
    a = spec.lattice_size
    if not (0 <= ix < a and 0 <= iy < a):
        return None
    if not anchor_free(spec, anchors, k, (ix, iy)):
        return None
    out = list(anchors)
    out[k] = (ix, iy)
    return out


_MOVES = (_relocate, _swap, _nudge)


def propose_move(floorplan, spec, rng, weights=(1.0, 1.0, 1.0)):
    """A legal neighbour of ``floorplan``; the floorplan itself if 50 draws all fail."""
    w = np.array(weights, dtype=np.float64)
    if spec.n < 2:
        w[1] = 0.0
    if w.sum() <= 0:
        return floorplan
    cum = np.cumsum(w)
    anchors = floorplan.anchors
    for _ in range(MAX_MOVE_ATTEMPTS):
        kind = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
        while w[min(kind, 2)] == 0.0:
            kind -= 1  # landed on the edge of a zero-weight move
        move = _MOVES[min(kind, 2)]
        cand = move(anchors, spec, rng)
        if cand is not None:
            # every move builder has already verified legality
            return state_from_anchors(spec, cand, check=False)
    return floorplan


class _Scorer:
    def __init__(self, spec, tables, cfg, backend, clock):
        if backend == "fast" and tables is None:
            raise ConfigurationError("the fast backend needs resistance tables")
        self.spec, self.tables, self.cfg, self.clock = spec, tables, cfg, clock
        self.reference = backend == "reference"
        self.memo = {}
        self.evaluations = 0

    def __call__(self, state):
        hit = self.memo.get(state.anchors)
        if hit is None:
            if len(self.memo) >= _MEMO_LIMIT:
                self.memo.clear()
            hit = evaluate_floorplan(state, self.spec, self.tables, self.cfg,
                                     reference=self.reference, clock=self.clock)
            self.memo[state.anchors] = hit
            self.evaluations += 1
        return hit


def calibrate_tau(floorplan, spec, score, rng, cfg, clock=None):
    """Start temperature at which the mean worsening probe move is accepted with ``p0``."""
    base = score(floorplan).reward
    drops = []
    for _ in range(cfg.probe_moves):
        cand = propose_move(floorplan, spec, rng, cfg.move_weights)
        if clock is not None:
            clock.sa_moves()
        delta = score(cand).reward - base
        if delta < 0:
            drops.append(-delta)
    if not drops:
        # flat neighbourhood: any positive temperature behaves the same
        return 1.0
    return float(np.mean(drops)) / -math.log(cfg.p0)


def anneal(spec, reward_cfg=None, cfg=None, tables=None, *, clock=None, on_step=None):
    """Anneal from a random legal floorplan; returns the best floorplan visited.

    Runs ``cfg.iterations`` moves, or until ``clock`` is exhausted when
    ``cfg.iterations`` is None. Trace rows are ``(iteration, tau, reward,
    best_reward)``.
    """
    reward_cfg = reward_cfg or spec.reward
    cfg = cfg or AnnealConfig()
    if cfg.iterations is None and (clock is None or clock.limit is None):
        raise ConfigurationError("an unbounded anneal needs a budgeted clock")
    rng = np.random.default_rng(cfg.seed)
    init = random_floorplan(spec, rng, INITIAL_ATTEMPTS)
    if init is None:
        raise InstanceError(f"no legal floorplan found in {INITIAL_ATTEMPTS} attempts")
    score = _Scorer(spec, tables, reward_cfg, cfg.backend, clock)
    cur, cur_res = init, score(init)
    best, best_res = cur, cur_res
    trace = []
    if cfg.iterations == 0:
        return AnnealResult(best, best_res.reward, best_res.wirelength, best_res.temperature,
                            trace, init, 0.0, score.evaluations)
    tau0 = calibrate_tau(cur, spec, score, rng, cfg, clock)
    it = 0
    while cfg.iterations is None or it < cfg.iterations:
        if clock is not None and clock.exhausted:
            break
        tau = tau0 * cfg.cooling ** (it // cfg.moves_per_stage)
        cand = propose_move(cur, spec, rng, cfg.move_weights)
        if clock is not None:
            clock.sa_moves()
        res = score(cand)
        delta = res.reward - cur_res.reward
        if delta >= 0:
            accept = True
        elif tau > 0:
            accept = rng.random() < math.exp(delta / tau)
        else:
            accept = False
        if accept:
            cur, cur_res = cand, res
            if res.reward > best_res.reward:
                best, best_res = cand, res
        row = (it, tau, cur_res.reward, best_res.reward)
        trace.append(row)
        if on_step is not None:
            on_step(row)
        it += 1
    return AnnealResult(best, best_res.reward, best_res.wirelength, best_res.temperature,
                        trace, init, tau0, score.evaluations)
