//! Recurrent actor-critic trained with PPO and generalized advantage
//! estimation under the shaped navigation reward.

mod network;
mod ppo;

pub use network::{
    argmax_action, backward_batch, forward_batch, log_softmax, sample_action, PolicyParams,
    StepCache, N_ACTIONS,
};
pub use ppo::{gradient_check, ppo_loss_and_grads, ppo_update, Adam, LossReport};

use crate::embedding::Embedding;
use ndarray::Array1;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("non-finite loss in epoch {epoch}: {report:?}")]
    NonFiniteLoss { epoch: usize, report: LossReport },
    #[error("epsilon must be positive, got {0}")]
    InvalidEpsilon(f64),
    #[error("empty rollout buffer")]
    EmptyBuffer,
}

/// Default slack penalty per step.
pub const REWARD_SLACK: f64 = -0.01;
/// Default success bonus.
pub const REWARD_SUCCESS: f64 = 10.0;

/// Shaped reward: progress on the best geodesic distance seen so far, plus a
/// slack penalty, plus a success bonus.
pub fn compute_reward(prev_min: f64, current: f64, success: bool, slack: f64, succ_bonus: f64) -> f64 {
    (prev_min - current).max(0.0) + slack + if success { succ_bonus } else { 0.0 }
}

/// PPO hyperparameters (training-table defaults).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpoConfig {
    pub gamma: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub grad_clip_norm: f64,
    pub epochs: usize,
    pub minibatches_per_rollout: usize,
    pub learning_rate: f64,
    pub hidden: usize,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            gamma: 0.99,
            gae_lambda: 0.95,
            clip_eps: 0.1,
            value_coef: 0.5,
            entropy_coef: 0.01,
            grad_clip_norm: 0.5,
            epochs: 4,
            minibatches_per_rollout: 1,
            learning_rate: 3e-4,
            hidden: 128,
        }
    }
}

/// One environment transition as collected by a rollout worker.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Transition {
    pub obs_embedding: Embedding,
    pub goal_embedding: Embedding,
    pub hidden_in: Array1<f64>,
    pub action: usize,
    pub log_prob: f64,
    pub value: f64,
    pub reward: f64,
    pub done: bool,
    pub geodesic_before: f64,
    pub geodesic_after: f64,
}

/// One worker's contiguous rollout sequence.
#[derive(Debug, Clone, Default)]
pub struct WorkerRollout {
    pub transitions: Vec<Transition>,
    /// Hidden state at the start of the sequence (constant w.r.t. the
    /// update; episode boundaries inside the sequence reset it to zero).
    pub h0: Array1<f64>,
    /// Critic value of the observation following the last transition; zero
    /// when that transition was terminal.
    pub bootstrap_value: f64,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

/// Rollout transitions for all workers.
#[derive(Debug, Clone, Default)]
pub struct RolloutBuffer {
    pub workers: Vec<WorkerRollout>,
}

impl RolloutBuffer {
    pub fn total_steps(&self) -> usize {
        self.workers.iter().map(|w| w.transitions.len()).sum()
    }
}

/// Backward-recursion generalized advantage estimation. Fills per-worker
/// advantages and returns.
pub fn compute_gae(buffer: &mut RolloutBuffer, gamma: f64, lambda: f64) {
    for w in &mut buffer.workers {
        let t_len = w.transitions.len();
        w.advantages = vec![0.0; t_len];
        w.returns = vec![0.0; t_len];
        let mut next_adv = 0.0;
        let mut next_value = w.bootstrap_value;
        for t in (0..t_len).rev() {
            let tr = &w.transitions[t];
            let not_done = if tr.done { 0.0 } else { 1.0 };
            let delta = tr.reward + gamma * not_done * next_value - tr.value;
            next_adv = delta + gamma * lambda * not_done * next_adv;
            w.advantages[t] = next_adv;
            w.returns[t] = next_adv + tr.value;
            next_value = tr.value;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn transition(reward: f64, value: f64, done: bool) -> Transition {
        Transition {
            obs_embedding: array![0.0],
            goal_embedding: array![0.0],
            hidden_in: array![0.0],
            action: 0,
            log_prob: -1.0,
            value,
            reward,
            done,
            geodesic_before: 0.0,
            geodesic_after: 0.0,
        }
    }

    #[test]
    fn reward_unit_cases() {
        assert_eq!(compute_reward(2.0, 1.5, false, REWARD_SLACK, REWARD_SUCCESS), 0.49);
        assert_eq!(compute_reward(2.0, 2.5, false, REWARD_SLACK, REWARD_SUCCESS), -0.01);
        assert_eq!(compute_reward(0.5, 0.0, true, REWARD_SLACK, REWARD_SUCCESS), 10.49);
    }

    #[test]
    fn gae_single_terminal_step() {
        let mut buffer = RolloutBuffer {
            workers: vec![WorkerRollout {
                transitions: vec![transition(1.0, 0.0, true)],
                h0: array![0.0],
                bootstrap_value: 0.0,
                ..Default::default()
            }],
        };
        compute_gae(&mut buffer, 0.99, 0.95);
        assert_eq!(buffer.workers[0].advantages, vec![1.0]);
        assert_eq!(buffer.workers[0].returns, vec![1.0]);
    }

    #[test]
    fn gae_zero_rewards_zero_values() {
        let mut buffer = RolloutBuffer {
            workers: vec![WorkerRollout {
                transitions: (0..8).map(|_| transition(0.0, 0.0, false)).collect(),
                h0: array![0.0],
                bootstrap_value: 0.0,
                ..Default::default()
            }],
        };
        compute_gae(&mut buffer, 0.99, 0.95);
        assert!(buffer.workers[0].advantages.iter().all(|a| *a == 0.0));
    }

    #[test]
    fn gae_matches_brute_force_sum() {
        // hand-built 5-step episode
        let rewards = [0.3, -0.01, 0.49, -0.01, 10.49];
        let values = [0.2, -0.1, 0.4, 0.05, 0.9];
        let dones = [false, false, false, false, true];
        let (gamma, lambda) = (0.99, 0.95);
        let mut buffer = RolloutBuffer {
            workers: vec![WorkerRollout {
                transitions: (0..5)
                    .map(|t| transition(rewards[t], values[t], dones[t]))
                    .collect(),
                h0: array![0.0],
                bootstrap_value: 0.0,
                ..Default::default()
            }],
        };
        compute_gae(&mut buffer, gamma, lambda);
        // brute force: A_t = sum_k (gamma*lambda)^k delta_{t+k} until the
        // episode ends
        let mut deltas = [0.0; 5];
        for t in 0..5 {
            let next_v = if t == 4 { 0.0 } else { values[t + 1] };
            let not_done = if dones[t] { 0.0 } else { 1.0 };
            deltas[t] = rewards[t] + gamma * not_done * next_v - values[t];
        }
        for t in 0..5 {
            let mut expected = 0.0;
            for k in 0..(5 - t) {
                expected += (gamma * lambda).powi(k as i32) * deltas[t + k];
            }
            // the recursion and the power-series sum accumulate in different
            // orders, so allow rounding at the last few bits
            let got = buffer.workers[0].advantages[t];
            assert!(
                (got - expected).abs() <= 1e-12 * expected.abs().max(1.0),
                "step {t}: {got} vs {expected}"
            );
        }
    }

    #[test]
    fn gae_stops_at_episode_boundary() {
        let mut buffer = RolloutBuffer {
            workers: vec![WorkerRollout {
                transitions: vec![
                    transition(1.0, 0.0, true),
                    transition(5.0, 0.0, false),
                ],
                h0: array![0.0],
                bootstrap_value: 0.0,
                ..Default::default()
            }],
        };
        compute_gae(&mut buffer, 0.99, 0.95);
        // the terminal at t=0 blocks flow from t=1
        assert_eq!(buffer.workers[0].advantages[0], 1.0);
    }
}
