"""Masked-action PPO with an optional random network distillation bonus."""
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, ContractError, NumericalError
from . import nn

RND_HIDDEN = 64


@dataclass(frozen=True)
class TrainConfig:
    episodes_per_update: int = 16
    update_epochs: int = 4
    minibatch_size: int = 64
    clip: float = 0.2
    gamma: float = 1.0
    gae_lambda: float = 0.95
    learning_rate: float = 2.5e-4
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    max_grad_norm: float = 0.5
    rnd_coef: float = 0.1
    rnd_enabled: bool = True
    rnd_embedding: int = 32
    rnd_learning_rate: float = 1e-3
    epochs: int = 600
    seed: int = 0
    dtype: str = "float32"

    def __post_init__(self):
        if not 0.0 < self.clip < 1.0:
            raise ConfigurationError("clip ratio must be in (0, 1)")
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigurationError("gamma must be in (0, 1]")
        for name in ("episodes_per_update", "update_epochs", "minibatch_size", "epochs",
                     "rnd_embedding"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigurationError("learning_rate must be > 0")


# ---------------------------------------------------------------- policy

def policy_forward(params, obs, mask):
    """Action probabilities over the flattened lattice and the value estimate."""
    mask = np.asarray(mask, dtype=bool).reshape(1, -1)
    if not mask.any():
        raise ContractError("action mask has no feasible entry")
    logits, values, _ = nn.policy_apply(params, np.asarray(obs)[None])
    logp = nn.masked_log_softmax(logits.astype(np.float64), mask)[0]
    probs = np.exp(logp)
    probs /= probs.sum()
    return probs, float(values[0])


def sample_action(probs, rng):
    """Categorical draw by inverse CDF; zero-probability entries are never chosen."""
    cdf = np.cumsum(probs)
    u = rng.random() * cdf[-1]
    i = int(np.searchsorted(cdf, u, side="right"))
    i = min(i, len(probs) - 1)
    while probs[i] <= 0.0:
        # u landed on the right edge of a run of zeros; step back to the owner
        i -= 1
    return i


def log_prob_value_grads(params, obs, mask, action):
    """Gradients of ``log pi(action)`` and of ``V`` for a single observation."""
    logits, values, cache = nn.policy_apply(params, np.asarray(obs)[None])
    logp = nn.masked_log_softmax(logits, np.asarray(mask, dtype=bool).reshape(1, -1))
    p = np.exp(logp)
    onehot = np.zeros_like(p)
    onehot[0, action] = 1.0
    g_logp = nn.policy_backward(params, cache, onehot - p, np.zeros(1))
    g_value = nn.policy_backward(params, cache, np.zeros_like(p), np.ones(1))
    return float(logp[0, action]), float(values[0]), g_logp, g_value


def ppo_loss(params, obs, masks, actions, old_logp, adv, returns, cfg):
    """Clipped surrogate + value regression - entropy bonus, with gradients."""
    b = len(actions)
    logits, values, cache = nn.policy_apply(params, obs)
    logits = logits.astype(np.float64)
    logp_all = nn.masked_log_softmax(logits, masks)
    p = np.exp(logp_all)
    rows = np.arange(b)
    logp = logp_all[rows, actions]
    ratio = np.exp(logp - old_logp)
    s1 = ratio * adv
    s2 = np.clip(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip) * adv
    pg_loss = -float(np.mean(np.minimum(s1, s2)))
    safe_logp = np.where(masks, logp_all, 0.0)
    entropy = -np.sum(p * safe_logp, axis=1)
    values = values.astype(np.float64)
    v_loss = 0.5 * float(np.mean((values - returns) ** 2))
    loss = pg_loss + cfg.value_coef * v_loss - cfg.entropy_coef * float(np.mean(entropy))

    # clipped branch is constant in the parameters
    g_logp = np.where(s1 <= s2, -ratio * adv, 0.0) / b
    dlogits = -p * g_logp[:, None]
    dlogits[rows, actions] += g_logp
    dlogits += (cfg.entropy_coef / b) * p * (safe_logp + entropy[:, None])
    dvalues = cfg.value_coef * (values - returns) / b
    grads = nn.policy_backward(params, cache, dlogits, dvalues)
    stats = {
        "loss": loss, "policy_loss": pg_loss, "value_loss": v_loss,
        "entropy": float(np.mean(entropy)),
        "clip_fraction": float(np.mean(np.abs(ratio - 1.0) > cfg.clip)),
    }
    return loss, grads, stats


# ---------------------------------------------------------------- RND

class RunningMeanStd:
    def __init__(self):
        self.count = 0.0
        self.mean = 0.0
        self.var = 1.0

    def update(self, x):
        x = np.asarray(x, dtype=np.float64).ravel()
        if x.size == 0:
            return
        bm, bv, bc = float(x.mean()), float(x.var()), float(x.size)
        if self.count == 0:
            self.mean, self.var, self.count = bm, bv, bc
            return
        tot = self.count + bc
        delta = bm - self.mean
        m2 = self.var * self.count + bv * bc + delta * delta * self.count * bc / tot
        self.mean += delta * bc / tot
        self.var = m2 / tot
        self.count = tot

    @property
    def std(self):
        return float(np.sqrt(self.var)) if self.count > 0 and self.var > 1e-12 else 1.0

    def state(self):
        return {"count": self.count, "mean": self.mean, "var": self.var}

    def load(self, state):
        self.count = float(state["count"])
        self.mean = float(state["mean"])
        self.var = float(state["var"])


class RND:
    """Fixed random target network and a trainable predictor."""

    def __init__(self, n_in, embedding, rng, lr=1e-3, dtype=np.float32):
        self.target = nn.init_mlp(rng, n_in, RND_HIDDEN, embedding, dtype)
        self.predictor = nn.init_mlp(rng, n_in, RND_HIDDEN, embedding, dtype)
        self.stats = RunningMeanStd()
        self.optim = nn.Adam(self.predictor, lr)

    def raw_error(self, obs):
        t, _ = nn.mlp_apply(self.target, obs)
        p, _ = nn.mlp_apply(self.predictor, obs)
        return np.sum((t.astype(np.float64) - p) ** 2, axis=1)

    def loss_and_grads(self, obs):
        t, _ = nn.mlp_apply(self.target, obs)
        p, cache = nn.mlp_apply(self.predictor, obs)
        diff = p - t
        loss = 0.5 * float(np.mean(np.sum(diff.astype(np.float64) ** 2, axis=1)))
        return loss, nn.mlp_backward(self.predictor, cache, diff / len(obs))

    def train_step(self, obs):
        loss, grads = self.loss_and_grads(obs)
        self.optim.step(self.predictor, grads)
        return loss


def rnd_bonus(rnd, obs):
    """Prediction error normalised by the running std of past raw errors (>= 0)."""
    obs = np.asarray(obs)
    single = obs.ndim == 3
    raw = rnd.raw_error(obs[None] if single else obs) / rnd.stats.std
    return float(raw[0]) if single else raw


# ---------------------------------------------------------------- rollout batch

@dataclass
class RolloutBatch:
    obs: np.ndarray
    masks: np.ndarray
    actions: np.ndarray
    logp: np.ndarray
    values: np.ndarray
    ext_rewards: np.ndarray
    int_rewards: np.ndarray
    episode_ids: np.ndarray
    next_obs: np.ndarray
    advantages: np.ndarray = None
    returns: np.ndarray = None

    def __len__(self):
        return len(self.actions)


def compute_gae(batch, gamma, lam, rnd_coef):
    """Per-episode GAE on extrinsic + scaled intrinsic reward; terminal value 0."""
    rewards = batch.ext_rewards + rnd_coef * batch.int_rewards
    adv = np.zeros(len(batch))
    last = 0.0
    for t in range(len(batch) - 1, -1, -1):
        terminal = t == len(batch) - 1 or batch.episode_ids[t + 1] != batch.episode_ids[t]
        next_v = 0.0 if terminal else batch.values[t + 1]
        if terminal:
            last = 0.0
        delta = rewards[t] + gamma * next_v - batch.values[t]
        last = delta + gamma * lam * last
        adv[t] = last
    batch.advantages = adv
    batch.returns = adv + batch.values
    return batch


# ---------------------------------------------------------------- agent

class PPOAgent:
    def __init__(self, lattice, cfg, rng, in_channels=4):
        self.cfg = cfg
        self.lattice = lattice
        self.rng = rng
        dtype = np.dtype(cfg.dtype)
        self.params = nn.init_policy(rng, lattice, in_channels, dtype)
        self.optim = nn.Adam(self.params, cfg.learning_rate)
        self.rnd = RND(in_channels * lattice * lattice, cfg.rnd_embedding, rng,
                       cfg.rnd_learning_rate, dtype)

    def act(self, obs, mask):
        probs, value = policy_forward(self.params, obs, mask)
        a = sample_action(probs, self.rng)
        return a, float(np.log(probs[a])), value

    def act_batch(self, obs, masks):
        """One action per row; rows are sampled in order from the agent's stream."""
        masks = np.asarray(masks, dtype=bool).reshape(len(obs), -1)
        if not masks.any(axis=1).all():
            raise ContractError("action mask has no feasible entry")
        logits, values, _ = nn.policy_apply(self.params, obs)
        logp = nn.masked_log_softmax(logits.astype(np.float64), masks)
        out = []
        for row, v in zip(logp, values):
            probs = np.exp(row)
            probs /= probs.sum()
            a = sample_action(probs, self.rng)
            out.append((a, float(np.log(probs[a])), float(v)))
        return out

    def update(self, batch):
        return ppo_update(self, batch)


def ppo_update(agent, batch):
    """Minibatch PPO epochs on ``batch``; trains the RND predictor alongside."""
    cfg = agent.cfg
    n = len(batch)
    if n == 0:
        raise ContractError("empty rollout batch")
    adv = batch.advantages
    std = float(adv.std())
    adv = (adv - adv.mean()) / (std + 1e-8) if std > 1e-12 else adv - adv.mean()
    masks = batch.masks.reshape(n, -1)
    hist = []
    rnd_losses = []
    for _ in range(cfg.update_epochs):
        order = agent.rng.permutation(n)
        for start in range(0, n, cfg.minibatch_size):
            idx = order[start:start + cfg.minibatch_size]
            loss, grads, stats = ppo_loss(agent.params, batch.obs[idx], masks[idx],
                                          batch.actions[idx], batch.logp[idx], adv[idx],
                                          batch.returns[idx], cfg)
            stats["grad_norm"] = nn.clip_grad_norm(grads, cfg.max_grad_norm)
            if not (np.isfinite(loss) and np.isfinite(stats["grad_norm"])):
                raise NumericalError(f"non-finite PPO loss/gradient (loss={loss!r}, stats={stats})")
            agent.optim.step(agent.params, grads)
            hist.append(stats)
            if cfg.rnd_enabled:
                rnd_losses.append(agent.rnd.train_step(batch.next_obs[idx]))
    out = {k: float(np.mean([h[k] for h in hist])) for k in hist[0]}
    out["rnd_loss"] = float(np.mean(rnd_losses)) if rnd_losses else 0.0
    return out
