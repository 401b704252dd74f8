"""Rollout -> terminal reward -> PPO update loop."""
import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError
from ..floorplan_env import action_mask, encode_observation, reset, step
from ..reward import evaluate_floorplan
from . import nn
from .ppo import PPOAgent, RolloutBatch, compute_gae, rnd_bonus

log = logging.getLogger(__name__)

METRIC_COLUMNS = ("epoch", "episodes", "mean_reward", "best_reward", "policy_loss",
                  "value_loss", "entropy", "rnd_loss", "mean_intrinsic", "masked_violations",
                  "modelled_seconds")


@dataclass
class TrainResult:
    best_floorplan: object
    best_reward: float
    best_wirelength: float
    best_temperature: float
    reward_curve: list
    best_curve: list
    metrics: list = field(default_factory=list)
    episodes: int = 0
    masked_violations: int = 0
    terminal_patterns: set = field(default_factory=set)
    agent: object = None


class _Evaluator:
    """Memoised terminal-reward calculator (floorplans recur once a policy sharpens)."""

    def __init__(self, spec, tables, reward_cfg, clock):
        self.spec, self.tables, self.cfg, self.clock = spec, tables, reward_cfg, clock
        self.cache = {}

    def __call__(self, state):
        key = state.anchors
        hit = self.cache.get(key)
        if hit is None:
            hit = evaluate_floorplan(state, self.spec, self.tables, self.cfg, clock=self.clock)
            self.cache[key] = hit
        return hit


def check_placeable(spec):
    """Every chiplet must have at least one anchor on the empty interposer."""
    from ..floorplan_env import mask_excluding

    empty = (None,) * spec.n
    for k, c in enumerate(spec.chiplets):
        if not mask_excluding(empty, spec, k).any():
            raise ConfigurationError(f"chiplet {c.name!r} has no feasible anchor on the lattice")


@dataclass
class Episode:
    state: object
    result: object  # RewardResult, or None after a dead end
    extrinsic: float
    obs: list = field(default_factory=list)
    masks: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    logp: list = field(default_factory=list)
    values: list = field(default_factory=list)
    next_obs: list = field(default_factory=list)
    violations: int = 0


def run_episodes(agent, spec, evaluate, reward_cfg, count, on_forward=None):
    """Roll out ``count`` placement episodes in lockstep, one batched forward per step.

    ``on_forward(batch)`` is called after every policy evaluation.
    """
    eps = [Episode(reset(spec), None, reward_cfg.failure_reward) for _ in range(count)]
    active = list(range(count))
    a = spec.lattice_size
    while active:
        live, obs, masks = [], [], []
        for e in active:
            st = eps[e].state
            mask = action_mask(st, spec)
            if mask.any():
                live.append(e)
                obs.append(encode_observation(st, spec))
                masks.append(mask.ravel())
        if not live:
            break
        obs = np.stack(obs)
        picks = agent.act_batch(obs, masks)
        if on_forward is not None:
            on_forward(len(live))
        for e, o, m, (act, logp, v) in zip(live, obs, masks, picks):
            ep = eps[e]
            if not m[act]:
                ep.violations += 1
            iy, ix = divmod(act, a)
            ep.state, _ = step(ep.state, (ix, iy), spec)
            ep.obs.append(o)
            ep.masks.append(m)
            ep.actions.append(act)
            ep.logp.append(logp)
            ep.values.append(v)
            ep.next_obs.append(encode_observation(ep.state, spec))
        # finished episodes and dead ends drop out
        active = [e for e in live if not eps[e].state.complete]
    for ep in eps:
        if ep.state.complete:
            ep.result = evaluate(ep.state)
            ep.extrinsic = ep.result.reward
    return eps


def train(spec, tables, reward_cfg=None, train_cfg=None, *, clock=None, max_episodes=None,
          on_epoch=None, agent=None):
    """Train a fresh agent on one system; returns the best floorplan seen.

    Stops after ``train_cfg.epochs`` update rounds, when ``clock`` is
    exhausted, or once ``max_episodes`` episodes have run.
    """
    from .ppo import TrainConfig

    reward_cfg = reward_cfg or spec.reward
    cfg = train_cfg or TrainConfig()
    check_placeable(spec)
    rng = np.random.default_rng(cfg.seed)
    agent = agent or PPOAgent(spec.lattice_size, cfg, rng)
    evaluate = _Evaluator(spec, tables, reward_cfg, clock)
    dtype = np.dtype(cfg.dtype)

    res = TrainResult(None, -np.inf, None, None, [], [], agent=agent)
    per_sample = nn.flop_count(spec.lattice_size, 1)
    weights = sum(v.size for v in agent.params.values())
    rnd_weights = nn.mlp_macs(agent.rnd.predictor)

    def charge_forward(batch):
        if clock is not None:
            clock.env_steps(batch)
            clock.network(per_sample * batch, calls=1, weights=weights)

    for epoch in range(cfg.epochs):
        count = cfg.episodes_per_update
        if max_episodes is not None:
            count = min(count, max_episodes - res.episodes)
        eps = run_episodes(agent, spec, evaluate, reward_cfg, count, charge_forward)
        buf = {k: [] for k in ("obs", "masks", "actions", "logp", "values", "next_obs")}
        ext_rewards, ep_ids = [], []
        for e, ep in enumerate(eps):
            res.episodes += 1
            res.masked_violations += ep.violations
            if ep.result is not None:
                res.terminal_patterns.add(ep.state.anchors)
                if ep.result.reward > res.best_reward:
                    res.best_floorplan, res.best_reward = ep.state, ep.result.reward
                    res.best_wirelength = ep.result.wirelength
                    res.best_temperature = ep.result.temperature
            steps = len(ep.actions)
            if steps == 0:
                continue
            for k in buf:
                buf[k].extend(getattr(ep, k))
            r = np.zeros(steps)
            r[-1] = ep.extrinsic
            ext_rewards.append(r)
            ep_ids.extend([e] * steps)
        if not ext_rewards:
            break
        next_obs = np.asarray(buf["next_obs"], dtype=dtype)
        if cfg.rnd_enabled:
            intrinsic = rnd_bonus(agent.rnd, next_obs)
            agent.rnd.stats.update(intrinsic * agent.rnd.stats.std)
            if clock is not None:
                clock.network(rnd_weights * 2 * len(next_obs), calls=2, weights=rnd_weights)
        else:
            intrinsic = np.zeros(len(next_obs))
        batch = RolloutBatch(
            obs=np.asarray(buf["obs"], dtype=dtype), masks=np.asarray(buf["masks"]),
            actions=np.asarray(buf["actions"], dtype=np.int64), logp=np.asarray(buf["logp"]),
            values=np.asarray(buf["values"]), ext_rewards=np.concatenate(ext_rewards),
            int_rewards=intrinsic, episode_ids=np.asarray(ep_ids), next_obs=next_obs)
        compute_gae(batch, cfg.gamma, cfg.gae_lambda, cfg.rnd_coef if cfg.rnd_enabled else 0.0)
        stats = agent.update(batch)
        if clock is not None:
            # forward + two backward products per minibatch, every update epoch
            minibatches = -(-len(batch) // cfg.minibatch_size) * cfg.update_epochs
            clock.network(3 * per_sample * len(batch) * cfg.update_epochs,
                          calls=3 * minibatches, weights=weights)
            clock.optimizer(weights, minibatches)
            clock.update_samples(len(batch) * cfg.update_epochs)
            if cfg.rnd_enabled:
                clock.network(3 * rnd_weights * len(batch) * cfg.update_epochs,
                              calls=3 * minibatches, weights=rnd_weights)
                clock.optimizer(rnd_weights, minibatches)

        ep_returns = [ep.extrinsic for ep in eps]
        mean_r = float(np.mean(ep_returns))
        res.reward_curve.append(mean_r)
        res.best_curve.append(res.best_reward)
        row = (epoch, res.episodes, mean_r, res.best_reward, stats["policy_loss"],
               stats["value_loss"], stats["entropy"], stats["rnd_loss"],
               float(np.mean(intrinsic)), res.masked_violations,
               clock.elapsed if clock is not None else 0.0)
        res.metrics.append(row)
        if on_epoch is not None:
            on_epoch(row)
        log.debug("epoch %d mean %.4f best %.4f", epoch, mean_r, res.best_reward)
        if clock is not None and clock.exhausted:
            break
        if max_episodes is not None and res.episodes >= max_episodes:
            break
    return res
