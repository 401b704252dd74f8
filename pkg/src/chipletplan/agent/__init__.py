"""PPO agent with action masking and a random-network-distillation bonus."""
from .ppo import (PPOAgent, RND, RolloutBatch, TrainConfig, compute_gae, policy_forward,
                  ppo_loss, ppo_update, rnd_bonus, sample_action)
from .train import TrainResult, train

__all__ = ["PPOAgent", "RND", "RolloutBatch", "TrainConfig", "TrainResult", "compute_gae",
           "policy_forward", "ppo_loss", "ppo_update", "rnd_bonus", "sample_action", "train"]
