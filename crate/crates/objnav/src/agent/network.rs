//! Recurrent actor-critic network: linear input projection, a single gated
//! recurrent layer, and actor/critic heads. Forward and backward passes are
//! hand-written; the backward pass is verified against finite differences.

use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const N_ACTIONS: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub in_dim: usize,
    pub hidden: usize,
    pub w_in: Array2<f64>,
    pub b_in: Array1<f64>,
    pub w_z: Array2<f64>,
    pub u_z: Array2<f64>,
    pub b_z: Array1<f64>,
    pub w_r: Array2<f64>,
    pub u_r: Array2<f64>,
    pub b_r: Array1<f64>,
    pub w_n: Array2<f64>,
    pub u_n: Array2<f64>,
    pub b_n: Array1<f64>,
    pub w_actor: Array2<f64>,
    pub b_actor: Array1<f64>,
    pub w_critic: Array1<f64>,
    pub b_critic: f64,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl PolicyParams {
    /// Seeded initialization: weights uniform scaled by 1/sqrt(fan_in),
    /// recurrent biases zero.
    pub fn init(in_dim: usize, hidden: usize, seed: u64) -> PolicyParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mat = |rows: usize, cols: usize, fan_in: usize| {
            let s = 1.0 / (fan_in as f64).sqrt();
            Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-s..s))
        };
        let w_in = mat(hidden, in_dim, in_dim);
        let w_z = mat(hidden, hidden, hidden);
        let u_z = mat(hidden, hidden, hidden);
        let w_r = mat(hidden, hidden, hidden);
        let u_r = mat(hidden, hidden, hidden);
        let w_n = mat(hidden, hidden, hidden);
        let u_n = mat(hidden, hidden, hidden);
        let w_actor = mat(N_ACTIONS, hidden, hidden);
        let s = 1.0 / (hidden as f64).sqrt();
        let mut vec = |len: usize, scale: f64| {
            Array1::from_shape_fn(len, |_| rng.gen_range(-scale..scale))
        };
        let b_in = vec(hidden, 1.0 / (in_dim as f64).sqrt());
        let b_actor = vec(N_ACTIONS, s);
        let w_critic = vec(hidden, s);
        let b_critic = rng.gen_range(-s..s);
        PolicyParams {
            in_dim,
            hidden,
            w_in,
            b_in,
            w_z,
            u_z,
            b_z: Array1::zeros(hidden),
            w_r,
            u_r,
            b_r: Array1::zeros(hidden),
            w_n,
            u_n,
            b_n: Array1::zeros(hidden),
            w_actor,
            b_actor,
            w_critic,
            b_critic,
        }
    }

    pub fn zeros(in_dim: usize, hidden: usize) -> PolicyParams {
        PolicyParams {
            in_dim,
            hidden,
            w_in: Array2::zeros((hidden, in_dim)),
            b_in: Array1::zeros(hidden),
            w_z: Array2::zeros((hidden, hidden)),
            u_z: Array2::zeros((hidden, hidden)),
            b_z: Array1::zeros(hidden),
            w_r: Array2::zeros((hidden, hidden)),
            u_r: Array2::zeros((hidden, hidden)),
            b_r: Array1::zeros(hidden),
            w_n: Array2::zeros((hidden, hidden)),
            u_n: Array2::zeros((hidden, hidden)),
            b_n: Array1::zeros(hidden),
            w_actor: Array2::zeros((N_ACTIONS, hidden)),
            b_actor: Array1::zeros(N_ACTIONS),
            w_critic: Array1::zeros(hidden),
            b_critic: 0.0,
        }
    }

    pub fn n_params(&self) -> usize {
        self.flat().len()
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for m in [
            &self.w_in, &self.w_z, &self.u_z, &self.w_r, &self.u_r, &self.w_n, &self.u_n,
            &self.w_actor,
        ] {
            out.extend(m.iter());
        }
        for v in [&self.b_in, &self.b_z, &self.b_r, &self.b_n, &self.b_actor, &self.w_critic] {
            out.extend(v.iter());
        }
        out.push(self.b_critic);
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let mut i = 0;
        for m in [
            &mut self.w_in,
            &mut self.w_z,
            &mut self.u_z,
            &mut self.w_r,
            &mut self.u_r,
            &mut self.w_n,
            &mut self.u_n,
            &mut self.w_actor,
        ] {
            for v in m.iter_mut() {
                *v = flat[i];
                i += 1;
            }
        }
        for a in [
            &mut self.b_in,
            &mut self.b_z,
            &mut self.b_r,
            &mut self.b_n,
            &mut self.b_actor,
            &mut self.w_critic,
        ] {
            for v in a.iter_mut() {
                *v = flat[i];
                i += 1;
            }
        }
        self.b_critic = flat[i];
        debug_assert_eq!(i + 1, flat.len());
    }

    /// Single-sample forward: returns (logits, value, next hidden).
    pub fn forward(
        &self,
        obs_emb: &Array1<f64>,
        goal_emb: &Array1<f64>,
        hidden: &Array1<f64>,
    ) -> (Array1<f64>, f64, Array1<f64>) {
        let mut input = Array1::zeros(self.in_dim);
        assert_eq!(obs_emb.len() + goal_emb.len(), self.in_dim, "input shape mismatch");
        input.slice_mut(ndarray::s![..obs_emb.len()]).assign(obs_emb);
        input.slice_mut(ndarray::s![obs_emb.len()..]).assign(goal_emb);
        self.forward_input(&input, hidden)
    }

    pub fn forward_input(
        &self,
        input: &Array1<f64>,
        hidden: &Array1<f64>,
    ) -> (Array1<f64>, f64, Array1<f64>) {
        let x = self.w_in.dot(input) + &self.b_in;
        let z = (self.w_z.dot(&x) + self.u_z.dot(hidden) + &self.b_z).mapv(sigmoid);
        let r = (self.w_r.dot(&x) + self.u_r.dot(hidden) + &self.b_r).mapv(sigmoid);
        let rh = &r * hidden;
        let n = (self.w_n.dot(&x) + self.u_n.dot(&rh) + &self.b_n).mapv(f64::tanh);
        let h = (1.0 - &z) * &n + &z * hidden;
        let logits = self.w_actor.dot(&h) + &self.b_actor;
        let value = self.w_critic.dot(&h) + self.b_critic;
        (logits, value, h)
    }
}

/// Per-step activation cache for one batched forward, reused by the backward
/// pass.
pub struct StepCache {
    pub input: Array2<f64>,
    pub h_prev: Array2<f64>,
    pub x: Array2<f64>,
    pub z: Array2<f64>,
    pub r: Array2<f64>,
    pub rh: Array2<f64>,
    pub n: Array2<f64>,
    pub h_out: Array2<f64>,
    pub logits: Array2<f64>,
    pub values: Array1<f64>,
    /// true where the hidden state was reset before this step
    pub reset: Vec<bool>,
}

/// Batched forward over one step for B parallel sequences.
pub fn forward_batch(
    params: &PolicyParams,
    input: Array2<f64>,
    h_prev: Array2<f64>,
    reset: Vec<bool>,
) -> StepCache {
    let x = input.dot(&params.w_in.t()) + &params.b_in;
    let z = (x.dot(&params.w_z.t()) + h_prev.dot(&params.u_z.t()) + &params.b_z).mapv(sigmoid);
    let r = (x.dot(&params.w_r.t()) + h_prev.dot(&params.u_r.t()) + &params.b_r).mapv(sigmoid);
    let rh = &r * &h_prev;
    let n = (x.dot(&params.w_n.t()) + rh.dot(&params.u_n.t()) + &params.b_n).mapv(f64::tanh);
    let h_out = (1.0 - &z) * &n + &z * &h_prev;
    let logits = h_out.dot(&params.w_actor.t()) + &params.b_actor;
    let values = h_out.dot(&params.w_critic) + params.b_critic;
    StepCache { input, h_prev, x, z, r, rh, n, h_out, logits, values, reset }
}

/// Backward through one step. `d_h_out` is the loss gradient w.r.t. this
/// step's hidden output (heads already folded in by the caller). Returns the
/// gradient w.r.t. the previous hidden state, zeroed where the step was a
/// reset boundary.
pub fn backward_batch(
    params: &PolicyParams,
    cache: &StepCache,
    d_h_out: &Array2<f64>,
    grads: &mut PolicyParams,
) -> Array2<f64> {
    let dz = (&cache.h_prev - &cache.n) * d_h_out;
    let dn = (1.0 - &cache.z) * d_h_out;
    let mut dh_prev = &cache.z * d_h_out;

    let da_n = (1.0 - &cache.n * &cache.n) * &dn;
    grads.w_n += &da_n.t().dot(&cache.x);
    grads.u_n += &da_n.t().dot(&cache.rh);
    grads.b_n += &da_n.sum_axis(Axis(0));
    let d_rh = da_n.dot(&params.u_n);
    let dr = &cache.h_prev * &d_rh;
    dh_prev += &(&cache.r * &d_rh);

    let da_z = &cache.z * (1.0 - &cache.z) * &dz;
    grads.w_z += &da_z.t().dot(&cache.x);
    grads.u_z += &da_z.t().dot(&cache.h_prev);
    grads.b_z += &da_z.sum_axis(Axis(0));
    dh_prev += &da_z.dot(&params.u_z);

    let da_r = &cache.r * (1.0 - &cache.r) * &dr;
    grads.w_r += &da_r.t().dot(&cache.x);
    grads.u_r += &da_r.t().dot(&cache.h_prev);
    grads.b_r += &da_r.sum_axis(Axis(0));
    dh_prev += &da_r.dot(&params.u_r);

    let dx = da_z.dot(&params.w_z) + da_r.dot(&params.w_r) + da_n.dot(&params.w_n);
    grads.w_in += &dx.t().dot(&cache.input);
    grads.b_in += &dx.sum_axis(Axis(0));

    for (w, &reset) in cache.reset.iter().enumerate() {
        if reset {
            dh_prev.row_mut(w).fill(0.0);
        }
    }
    dh_prev
}

pub fn log_softmax(logits: &Array1<f64>) -> Array1<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = logits.mapv(|v| (v - max).exp()).sum().ln() + max;
    logits.mapv(|v| v - lse)
}

/// Sample an action from the softmax distribution; returns (action index,
/// log probability).
pub fn sample_action<R: Rng>(logits: &Array1<f64>, rng: &mut R) -> (usize, f64) {
    let logp = log_softmax(logits);
    let probs = logp.mapv(f64::exp);
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut action = probs.len() - 1;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            action = i;
            break;
        }
    }
    (action, logp[action])
}

pub fn argmax_action(logits: &Array1<f64>) -> usize {
    logits
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    /// Straightforward scalar re-implementation of the same recurrence.
    fn forward_oracle(
        p: &PolicyParams,
        input: &[f64],
        hidden: &[f64],
    ) -> (Vec<f64>, f64, Vec<f64>) {
        let h = p.hidden;
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let mv = |m: &Array2<f64>, v: &[f64]| -> Vec<f64> {
            (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| m[[i, j]] * v[j]).sum())
                .collect()
        };
        let x: Vec<f64> = mv(&p.w_in, input)
            .iter()
            .zip(p.b_in.iter())
            .map(|(a, b)| a + b)
            .collect();
        let gate = |w: &Array2<f64>, u: &Array2<f64>, b: &Array1<f64>, hv: &[f64]| -> Vec<f64> {
            let wx = mv(w, &x);
            let uh = mv(u, hv);
            (0..h).map(|i| wx[i] + uh[i] + b[i]).collect()
        };
        let z: Vec<f64> = gate(&p.w_z, &p.u_z, &p.b_z, hidden).iter().map(|v| sig(*v)).collect();
        let r: Vec<f64> = gate(&p.w_r, &p.u_r, &p.b_r, hidden).iter().map(|v| sig(*v)).collect();
        let rh: Vec<f64> = (0..h).map(|i| r[i] * hidden[i]).collect();
        let wnx = mv(&p.w_n, &x);
        let unrh = mv(&p.u_n, &rh);
        let n: Vec<f64> = (0..h).map(|i| (wnx[i] + unrh[i] + p.b_n[i]).tanh()).collect();
        let hout: Vec<f64> = (0..h).map(|i| (1.0 - z[i]) * n[i] + z[i] * hidden[i]).collect();
        let logits: Vec<f64> = (0..N_ACTIONS)
            .map(|i| (0..h).map(|j| p.w_actor[[i, j]] * hout[j]).sum::<f64>() + p.b_actor[i])
            .collect();
        let value: f64 = (0..h).map(|j| p.w_critic[j] * hout[j]).sum::<f64>() + p.b_critic;
        (logits, value, hout)
    }

    #[test]
    fn zero_weights_give_zero_outputs() {
        let p = PolicyParams::zeros(4, 3);
        let (logits, value, h) = p.forward(&array![1.0, 2.0], &array![3.0, -1.0], &Array1::zeros(3));
        assert!(logits.iter().all(|v| *v == 0.0));
        assert_eq!(value, 0.0);
        assert!(h.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn forward_is_deterministic() {
        let p = PolicyParams::init(6, 5, 3);
        let obs = array![0.1, -0.2, 0.3];
        let goal = array![1.0, 0.0, -1.0];
        let h = Array1::from_elem(5, 0.2);
        let a = p.forward(&obs, &goal, &h);
        let b = p.forward(&obs, &goal, &h);
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
        assert_eq!(a.2, b.2);
    }

    #[test]
    fn forward_matches_independent_reimplementation() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for case in 0..20 {
            let p = PolicyParams::init(7, 4, 100 + case);
            let input: Vec<f64> = (0..7).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let hidden: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (logits, value, h) =
                p.forward_input(&Array1::from(input.clone()), &Array1::from(hidden.clone()));
            let (ol, ov, oh) = forward_oracle(&p, &input, &hidden);
            for i in 0..N_ACTIONS {
                assert!((logits[i] - ol[i]).abs() < 1e-12);
            }
            assert!((value - ov).abs() < 1e-12);
            for i in 0..4 {
                assert!((h[i] - oh[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn batched_forward_matches_single() {
        let p = PolicyParams::init(7, 4, 5);
        let inputs = Array2::from_shape_fn((3, 7), |(i, j)| (i as f64 - j as f64) * 0.1);
        let h = Array2::from_shape_fn((3, 4), |(i, j)| (i + j) as f64 * 0.05);
        let cache = forward_batch(&p, inputs.clone(), h.clone(), vec![false; 3]);
        for w in 0..3 {
            let (logits, value, hout) =
                p.forward_input(&inputs.row(w).to_owned(), &h.row(w).to_owned());
            for i in 0..N_ACTIONS {
                assert!((cache.logits[[w, i]] - logits[i]).abs() < 1e-12);
            }
            assert!((cache.values[w] - value).abs() < 1e-12);
            for i in 0..4 {
                assert!((cache.h_out[[w, i]] - hout[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn log_softmax_normalizes() {
        let logits = array![0.5, -2.0, 3.0, 0.0, 1.0, -0.5];
        let lp = log_softmax(&logits);
        let total: f64 = lp.mapv(f64::exp).sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(lp.iter().all(|v| *v <= 0.0));
    }

    #[test]
    fn flat_round_trip() {
        let p = PolicyParams::init(7, 4, 5);
        let mut q = PolicyParams::zeros(7, 4);
        q.set_flat(&p.flat());
        assert_eq!(p, q);
    }
}
