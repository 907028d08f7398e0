//! Recurrent token policy for the policy-gradient search strategy.
//!
//! A single-layer LSTM reads, at each position, one-hot codes of the parent
//! operator and left sibling of the slot being filled and emits logits over
//! the vocabulary. Illegal tokens are masked before the softmax.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::sampler::{MaskExhausted, Sampler, StepInfo};
use super::Expression;
use crate::learners::mlp::Adam;
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmPolicy {
    pub vocab: usize,
    pub hidden: usize,
    pub params: Vec<f64>,
}

/// One recorded decision: context codes, legal mask and chosen symbol.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub parent: usize,
    pub sibling: usize,
    pub mask: Vec<bool>,
    pub action: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub expression: Expression,
    pub steps: Vec<Step>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

struct Layout {
    w: usize,
    u: usize,
    b: usize,
    wo: usize,
    bo: usize,
    end: usize,
}

struct Cache {
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    gates: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
    probs: Vec<f64>,
}

impl LstmPolicy {
    /// Input width: one-hot parent and sibling, each with a trailing "none" slot.
    fn n_in(&self) -> usize {
        2 * (self.vocab + 1)
    }

    fn layout(&self) -> Layout {
        let (h, v, i) = (self.hidden, self.vocab, self.n_in());
        let w = 0;
        let u = w + i * 4 * h;
        let b = u + 4 * h * h;
        let wo = b + 4 * h;
        let bo = wo + v * h;
        Layout {
            w,
            u,
            b,
            wo,
            bo,
            end: bo + v,
        }
    }

    pub fn new(vocab: usize, hidden: usize, rng: &mut Rng) -> LstmPolicy {
        let mut p = LstmPolicy {
            vocab,
            hidden,
            params: Vec::new(),
        };
        let l = p.layout();
        let bound = 1.0 / (hidden as f64).sqrt();
        p.params = (0..l.end).map(|_| rng.gen_range(-bound..bound)).collect();
        // Forget gate starts open.
        for k in 0..hidden {
            p.params[l.b + hidden + k] = 1.0;
        }
        p
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    fn codes(&self, info: &StepInfo) -> (usize, usize) {
        let none = self.vocab;
        (
            info.parent.map_or(none, |s| s as usize),
            self.vocab + 1 + info.sibling.map_or(none, |s| s as usize),
        )
    }

    fn step(&self, parent: usize, sibling: usize, mask: &[bool], h_prev: &[f64], c_prev: &[f64]) -> Cache {
        let (hd, v) = (self.hidden, self.vocab);
        let l = self.layout();
        let p = &self.params;
        let mut z: Vec<f64> = p[l.b..l.b + 4 * hd].to_vec();
        for (r, zr) in z.iter_mut().enumerate() {
            *zr += p[l.w + parent * 4 * hd + r] + p[l.w + sibling * 4 * hd + r];
            let row = &p[l.u + r * hd..l.u + (r + 1) * hd];
            *zr += row.iter().zip(h_prev).map(|(a, b)| a * b).sum::<f64>();
        }
        let mut gates = vec![0.0; 4 * hd];
        for k in 0..hd {
            gates[k] = sigmoid(z[k]);
            gates[hd + k] = sigmoid(z[hd + k]);
            gates[2 * hd + k] = z[2 * hd + k].tanh();
            gates[3 * hd + k] = sigmoid(z[3 * hd + k]);
        }
        let c: Vec<f64> = (0..hd)
            .map(|k| gates[hd + k] * c_prev[k] + gates[k] * gates[2 * hd + k])
            .collect();
        let tanh_c: Vec<f64> = c.iter().map(|x| x.tanh()).collect();
        let h: Vec<f64> = (0..hd).map(|k| gates[3 * hd + k] * tanh_c[k]).collect();
        let mut logits = vec![f64::NEG_INFINITY; v];
        for a in 0..v {
            if mask[a] {
                let row = &p[l.wo + a * hd..l.wo + (a + 1) * hd];
                logits[a] = p[l.bo + a] + row.iter().zip(&h).map(|(x, y)| x * y).sum::<f64>();
            }
        }
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut probs: Vec<f64> = logits
            .iter()
            .map(|&x| if x.is_finite() { (x - m).exp() } else { 0.0 })
            .collect();
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|q| *q /= total);
        Cache {
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            gates,
            c,
            tanh_c,
            h,
            probs,
        }
    }

    /// Samples one expression under the sampler's masks.
    pub fn sample(&self, sampler: &mut Sampler, rng: &mut Rng) -> Result<Trajectory, MaskExhausted> {
        let hd = self.hidden;
        let mut h = vec![0.0; hd];
        let mut c = vec![0.0; hd];
        let mut steps = Vec::new();
        let (expression, _) = sampler.sample_with(&mut |info, mask| {
            let (p, s) = self.codes(info);
            let cache = self.step(p, s, mask, &h, &c);
            let mut x = rng.gen::<f64>();
            let mut action = mask.iter().rposition(|&m| m).unwrap_or(0);
            for (a, &q) in cache.probs.iter().enumerate() {
                if q > 0.0 {
                    if x < q {
                        action = a;
                        break;
                    }
                    x -= q;
                }
            }
            h = cache.h;
            c = cache.c;
            steps.push(Step {
                parent: p,
                sibling: s,
                mask: mask.to_vec(),
                action,
            });
            action as u16
        })?;
        Ok(Trajectory { expression, steps })
    }

    pub fn log_prob(&self, steps: &[Step]) -> f64 {
        let hd = self.hidden;
        let (mut h, mut c) = (vec![0.0; hd], vec![0.0; hd]);
        let mut lp = 0.0;
        for st in steps {
            let cache = self.step(st.parent, st.sibling, &st.mask, &h, &c);
            lp += cache.probs[st.action].ln();
            h = cache.h;
            c = cache.c;
        }
        lp
    }

    /// Adds `weight · ∇ log π(steps)` to `grad` by backpropagation through time.
    pub fn accumulate_log_prob_gradient(&self, steps: &[Step], weight: f64, grad: &mut [f64]) {
        let (hd, v) = (self.hidden, self.vocab);
        let l = self.layout();
        let p = &self.params;
        let mut caches = Vec::with_capacity(steps.len());
        let (mut h, mut c) = (vec![0.0; hd], vec![0.0; hd]);
        for st in steps {
            let cache = self.step(st.parent, st.sibling, &st.mask, &h, &c);
            h = cache.h.clone();
            c = cache.c.clone();
            caches.push(cache);
        }
        let mut dh_next = vec![0.0; hd];
        let mut dc_next = vec![0.0; hd];
        for (st, cache) in steps.iter().zip(&caches).rev() {
            // d(log p_a)/d logits = onehot(a) − p on legal entries.
            let mut dh = dh_next.clone();
            for a in 0..v {
                if !st.mask[a] {
                    continue;
                }
                let dl = weight * ((a == st.action) as u8 as f64 - cache.probs[a]);
                grad[l.bo + a] += dl;
                for k in 0..hd {
                    grad[l.wo + a * hd + k] += dl * cache.h[k];
                    dh[k] += dl * p[l.wo + a * hd + k];
                }
            }
            let g = &cache.gates;
            let mut dz = vec![0.0; 4 * hd];
            let mut dc_prev = vec![0.0; hd];
            for k in 0..hd {
                let (ig, fg, gg, og) = (g[k], g[hd + k], g[2 * hd + k], g[3 * hd + k]);
                let dc = dh[k] * og * (1.0 - cache.tanh_c[k] * cache.tanh_c[k]) + dc_next[k];
                dz[k] = dc * gg * ig * (1.0 - ig);
                dz[hd + k] = dc * cache.c_prev[k] * fg * (1.0 - fg);
                dz[2 * hd + k] = dc * ig * (1.0 - gg * gg);
                dz[3 * hd + k] = dh[k] * cache.tanh_c[k] * og * (1.0 - og);
                dc_prev[k] = dc * fg;
            }
            let mut dh_prev = vec![0.0; hd];
            for (r, &d) in dz.iter().enumerate() {
                grad[l.b + r] += d;
                grad[l.w + st.parent * 4 * hd + r] += d;
                grad[l.w + st.sibling * 4 * hd + r] += d;
                for k in 0..hd {
                    grad[l.u + r * hd + k] += d * cache.h_prev[k];
                    dh_prev[k] += d * p[l.u + r * hd + k];
                }
            }
            dh_next = dh_prev;
            dc_next = dc_prev;
        }
    }
}

/// Risk-seeking policy gradient: only trajectories at or above the
/// `1 − quantile` reward level contribute, weighted by their excess reward.
pub struct PolicyTrainer {
    pub policy: LstmPolicy,
    adam: Adam,
    pub risk_quantile: f64,
}

impl PolicyTrainer {
    pub fn new(policy: LstmPolicy, learning_rate: f64, risk_quantile: f64) -> PolicyTrainer {
        let adam = Adam::new(policy.n_params(), learning_rate);
        PolicyTrainer {
            policy,
            adam,
            risk_quantile,
        }
    }

    /// One ascent step on the batch; returns the reward threshold used.
    pub fn update(&mut self, batch: &[(Trajectory, f64)]) -> f64 {
        if batch.is_empty() {
            return f64::NAN;
        }
        let mut rewards: Vec<f64> = batch.iter().map(|(_, r)| *r).collect();
        rewards.sort_by(f64::total_cmp);
        let threshold = crate::eval::quantile_sorted(&rewards, 1.0 - self.risk_quantile);
        let elite: Vec<&(Trajectory, f64)> = batch.iter().filter(|(_, r)| *r >= threshold).collect();
        let mut grad = vec![0.0; self.policy.n_params()];
        let scale = 1.0 / elite.len() as f64;
        for (traj, r) in &elite {
            let w = (r - threshold) * scale;
            if w != 0.0 {
                self.policy.accumulate_log_prob_gradient(&traj.steps, w, &mut grad);
            }
        }
        // Adam minimizes, so hand it the negated ascent direction.
        grad.iter_mut().for_each(|g| *g = -*g);
        self.adam.step(&mut self.policy.params, &grad);
        threshold
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use crate::symreg::Grammar;

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = rng_from_seed(2);
        let g = Grammar {
            max_length: 9,
            ..Grammar::tafel()
        };
        let mut sampler = Sampler::new(&g).unwrap();
        let policy = LstmPolicy::new(sampler.vocab().len(), 5, &mut rng);
        let traj = (0..20)
            .map(|_| policy.sample(&mut sampler, &mut rng).unwrap())
            .find(|t| t.steps.len() >= 4)
            .unwrap();
        let mut grad = vec![0.0; policy.n_params()];
        policy.accumulate_log_prob_gradient(&traj.steps, 1.0, &mut grad);
        let mut probe = policy.clone();
        let h = 1e-6;
        for k in (0..policy.n_params()).step_by(7) {
            let keep = probe.params[k];
            probe.params[k] = keep + h;
            let up = probe.log_prob(&traj.steps);
            probe.params[k] = keep - h;
            let down = probe.log_prob(&traj.steps);
            probe.params[k] = keep;
            let fd = (up - down) / (2.0 * h);
            let err = (fd - grad[k]).abs() / fd.abs().max(grad[k].abs()).max(1e-7);
            assert!(err < 1e-4, "param {k}: fd {fd} vs {}", grad[k]);
        }
    }

    #[test]
    fn update_raises_probability_of_elite() {
        let mut rng = rng_from_seed(8);
        let g = Grammar {
            max_length: 12,
            ..Grammar::tafel()
        };
        let mut sampler = Sampler::new(&g).unwrap();
        let policy = LstmPolicy::new(sampler.vocab().len(), 16, &mut rng);
        let batch: Vec<(Trajectory, f64)> = (0..40)
            .map(|k| (policy.sample(&mut sampler, &mut rng).unwrap(), k as f64 / 40.0))
            .collect();
        let best = batch.last().unwrap().0.clone();
        let before = policy.log_prob(&best.steps);
        let mut trainer = PolicyTrainer::new(policy, 0.01, 0.05);
        for _ in 0..5 {
            trainer.update(&batch);
        }
        assert!(trainer.policy.log_prob(&best.steps) > before);
    }
}
