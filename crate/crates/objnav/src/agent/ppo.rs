//! PPO update: clipped surrogate objective with value and entropy terms,
//! backpropagation through time over worker sequences, global gradient norm
//! clipping, and an Adam step. A finite-difference gradient check guards the
//! hand-written backward pass.

use super::network::{backward_batch, forward_batch, PolicyParams, StepCache, N_ACTIONS};
use super::{AgentError, PpoConfig, RolloutBuffer};
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub total: f64,
    pub grad_norm: f64,
}

/// Adaptive-moment optimizer over the flattened parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Adam {
    pub fn new(lr: f64, n_params: usize) -> Adam {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Flattened (input, hidden-reset, target) views of a rollout buffer, with
/// normalized advantages, ready for lockstep BPTT.
struct Batch {
    /// per step t: (W, in_dim) inputs
    inputs: Vec<Array2<f64>>,
    /// per step t, per worker: reset flag (hidden zeroed before this step)
    resets: Vec<Vec<bool>>,
    actions: Vec<Vec<usize>>,
    old_logp: Vec<Vec<f64>>,
    advantages: Vec<Vec<f64>>,
    returns: Vec<Vec<f64>>,
    h0: Array2<f64>,
    n_workers: usize,
    t_len: usize,
    n: f64,
}

fn build_batch(buffer: &RolloutBuffer, hidden: usize, normalize_adv: bool) -> Result<Batch, AgentError> {
    let n_workers = buffer.workers.len();
    let t_len = buffer.workers.first().map(|w| w.transitions.len()).unwrap_or(0);
    if n_workers == 0 || t_len == 0 {
        return Err(AgentError::EmptyBuffer);
    }
    let in_dim = buffer.workers[0].transitions[0].obs_embedding.len()
        + buffer.workers[0].transitions[0].goal_embedding.len();
    let mut inputs = Vec::with_capacity(t_len);
    let mut resets = Vec::with_capacity(t_len);
    let mut actions = Vec::with_capacity(t_len);
    let mut old_logp = Vec::with_capacity(t_len);
    let mut advantages = Vec::with_capacity(t_len);
    let mut returns = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let mut x = Array2::zeros((n_workers, in_dim));
        let mut reset = vec![false; n_workers];
        let mut act = vec![0usize; n_workers];
        let mut lp = vec![0.0; n_workers];
        let mut adv = vec![0.0; n_workers];
        let mut ret = vec![0.0; n_workers];
        for (w, wk) in buffer.workers.iter().enumerate() {
            let tr = &wk.transitions[t];
            let obs_len = tr.obs_embedding.len();
            for (j, v) in tr.obs_embedding.iter().enumerate() {
                x[[w, j]] = *v;
            }
            for (j, v) in tr.goal_embedding.iter().enumerate() {
                x[[w, obs_len + j]] = *v;
            }
            reset[w] = t > 0 && wk.transitions[t - 1].done;
            act[w] = tr.action;
            lp[w] = tr.log_prob;
            adv[w] = wk.advantages[t];
            ret[w] = wk.returns[t];
        }
        inputs.push(x);
        resets.push(reset);
        actions.push(act);
        old_logp.push(lp);
        advantages.push(adv);
        returns.push(ret);
    }
    let mut h0 = Array2::zeros((n_workers, hidden));
    for (w, wk) in buffer.workers.iter().enumerate() {
        h0.row_mut(w).assign(&wk.h0);
    }
    let n = (n_workers * t_len) as f64;
    if normalize_adv {
        let mean: f64 = advantages.iter().flatten().sum::<f64>() / n;
        let var: f64 =
            advantages.iter().flatten().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
        let std = (var + 1e-8).sqrt();
        for row in &mut advantages {
            for a in row {
                *a = (*a - mean) / std;
            }
        }
    }
    Ok(Batch { inputs, resets, actions, old_logp, advantages, returns, h0, n_workers, t_len, n })
}

fn forward_sequence(params: &PolicyParams, batch: &Batch) -> Vec<StepCache> {
    let mut caches = Vec::with_capacity(batch.t_len);
    let mut h = batch.h0.clone();
    for t in 0..batch.t_len {
        let mut h_in = h.clone();
        for (w, &reset) in batch.resets[t].iter().enumerate() {
            if reset {
                h_in.row_mut(w).fill(0.0);
            }
        }
        let cache = forward_batch(params, batch.inputs[t].clone(), h_in, batch.resets[t].clone());
        h = cache.h_out.clone();
        caches.push(cache);
    }
    caches
}

fn loss_and_grads_on_batch(
    params: &PolicyParams,
    batch: &Batch,
    cfg: &PpoConfig,
    want_grads: bool,
) -> (LossReport, Option<PolicyParams>) {
    let caches = forward_sequence(params, batch);
    let n = batch.n;
    let mut policy_loss = 0.0;
    let mut value_loss = 0.0;
    let mut entropy_sum = 0.0;
    // per-step gradients w.r.t. logits and values
    let mut d_logits: Vec<Array2<f64>> = Vec::with_capacity(batch.t_len);
    let mut d_values: Vec<Array1<f64>> = Vec::with_capacity(batch.t_len);
    for t in 0..batch.t_len {
        let cache = &caches[t];
        let mut dl = Array2::zeros((batch.n_workers, N_ACTIONS));
        let mut dv = Array1::zeros(batch.n_workers);
        for w in 0..batch.n_workers {
            let logits = cache.logits.row(w);
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
            let logp: Vec<f64> = logits.iter().map(|v| v - lse).collect();
            let probs: Vec<f64> = logp.iter().map(|v| v.exp()).collect();
            let a = batch.actions[t][w];
            let adv = batch.advantages[t][w];
            let ratio = (logp[a] - batch.old_logp[t][w]).exp();
            let clipped = ratio.clamp(1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
            let (u1, u2) = (ratio * adv, clipped * adv);
            let surr = u1.min(u2);
            policy_loss -= surr / n;
            // gradient of min(u1, u2) w.r.t. log-prob of the taken action
            let g = if u1 <= u2 {
                adv * ratio
            } else if ratio > 1.0 - cfg.clip_eps && ratio < 1.0 + cfg.clip_eps {
                adv * ratio
            } else {
                0.0
            };
            let h: f64 = -probs
                .iter()
                .zip(&logp)
                .map(|(p, l)| if *p > 0.0 { p * l } else { 0.0 })
                .sum::<f64>();
            entropy_sum += h / n;
            let v = cache.values[w];
            let ret = batch.returns[t][w];
            value_loss += (v - ret).powi(2) / n;
            if want_grads {
                let coef = -g / n;
                for j in 0..N_ACTIONS {
                    let onehot = if j == a { 1.0 } else { 0.0 };
                    // policy term plus entropy bonus
                    dl[[w, j]] = coef * (onehot - probs[j])
                        + (cfg.entropy_coef / n) * probs[j] * (logp[j] + h);
                }
                dv[w] = cfg.value_coef * 2.0 * (v - ret) / n;
            }
        }
        d_logits.push(dl);
        d_values.push(dv);
    }
    let total = policy_loss + cfg.value_coef * value_loss - cfg.entropy_coef * entropy_sum;
    let mut report = LossReport {
        policy_loss,
        value_loss,
        entropy: entropy_sum,
        total,
        grad_norm: 0.0,
    };
    if !want_grads {
        return (report, None);
    }
    let mut grads = PolicyParams::zeros(params.in_dim, params.hidden);
    let mut dh_carry: Array2<f64> = Array2::zeros((batch.n_workers, params.hidden));
    for t in (0..batch.t_len).rev() {
        let cache = &caches[t];
        let mut dh = dh_carry;
        // heads
        dh += &d_logits[t].dot(&params.w_actor);
        for w in 0..batch.n_workers {
            let dv = d_values[t][w];
            for j in 0..params.hidden {
                dh[[w, j]] += dv * params.w_critic[j];
                grads.w_critic[j] += dv * cache.h_out[[w, j]];
            }
            grads.b_critic += dv;
        }
        grads.w_actor += &d_logits[t].t().dot(&cache.h_out);
        grads.b_actor += &d_logits[t].sum_axis(ndarray::Axis(0));
        dh_carry = backward_batch(params, cache, &dh, &mut grads);
    }
    let flat = grads.flat();
    report.grad_norm = flat.iter().map(|g| g * g).sum::<f64>().sqrt();
    (report, Some(grads))
}

/// Loss and analytic gradients over a full rollout buffer (single global
/// batch). Advantages must already be computed; they are normalized here.
pub fn ppo_loss_and_grads(
    params: &PolicyParams,
    buffer: &RolloutBuffer,
    cfg: &PpoConfig,
    want_grads: bool,
) -> Result<(LossReport, Option<PolicyParams>), AgentError> {
    let batch = build_batch(buffer, params.hidden, true)?;
    Ok(loss_and_grads_on_batch(params, &batch, cfg, want_grads))
}

/// Run the configured number of PPO epochs over the single global batch,
/// updating parameters in place. Returns one loss report per epoch.
pub fn ppo_update(
    params: &mut PolicyParams,
    opt: &mut Adam,
    buffer: &RolloutBuffer,
    cfg: &PpoConfig,
) -> Result<Vec<LossReport>, AgentError> {
    let batch = build_batch(buffer, params.hidden, true)?;
    let mut reports = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let (mut report, grads) = loss_and_grads_on_batch(params, &batch, cfg, true);
        if !report.total.is_finite() {
            return Err(AgentError::NonFiniteLoss { epoch, report });
        }
        let grads = grads.expect("gradients requested");
        let mut flat_g = grads.flat();
        let norm = report.grad_norm;
        if norm > cfg.grad_clip_norm && norm > 0.0 {
            let scale = cfg.grad_clip_norm / norm;
            flat_g.iter_mut().for_each(|g| *g *= scale);
        }
        let mut flat_p = params.flat();
        opt.step(&mut flat_p, &flat_g);
        params.set_flat(&flat_p);
        report.grad_norm = norm;
        reports.push(report);
    }
    Ok(reports)
}

/// Central finite-difference check of the analytic gradient of the total PPO
/// loss. Returns the maximum relative error over all parameters.
pub fn gradient_check(
    params: &PolicyParams,
    buffer: &RolloutBuffer,
    cfg: &PpoConfig,
    epsilon: f64,
) -> Result<f64, AgentError> {
    if epsilon <= 0.0 {
        return Err(AgentError::InvalidEpsilon(epsilon));
    }
    let batch = build_batch(buffer, params.hidden, true)?;
    let (_, grads) = loss_and_grads_on_batch(params, &batch, cfg, true);
    let analytic = grads.expect("gradients requested").flat();
    let flat = params.flat();
    let mut probe = params.clone();
    let mut max_rel = 0.0f64;
    for i in 0..flat.len() {
        let mut plus = flat.clone();
        plus[i] += epsilon;
        probe.set_flat(&plus);
        let (rp, _) = loss_and_grads_on_batch(&probe, &batch, cfg, false);
        let mut minus = flat.clone();
        minus[i] -= epsilon;
        probe.set_flat(&minus);
        let (rm, _) = loss_and_grads_on_batch(&probe, &batch, cfg, false);
        let fd = (rp.total - rm.total) / (2.0 * epsilon);
        let denom = analytic[i].abs().max(fd.abs()).max(1e-6);
        let rel = (analytic[i] - fd).abs() / denom;
        max_rel = max_rel.max(rel);
    }
    Ok(max_rel)
}
