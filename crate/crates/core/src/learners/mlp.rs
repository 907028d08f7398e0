//! Fully connected ReLU networks with a linear scalar output, trained by
//! mini-batch Adam.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::rng::{self, Rng};

/// Parameters live in one flat vector; layer `l` stores its `out × in`
/// weights row-major followed by `out` biases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub sizes: Vec<usize>,
    pub params: Vec<f64>,
}

/// Scratch buffers for one forward/backward pass.
#[derive(Default)]
pub struct Workspace {
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    next_delta: Vec<f64>,
}

impl Network {
    /// Glorot-uniform init: weights and biases drawn from ±sqrt(6 / (fan_in + fan_out)).
    pub fn new(sizes: &[usize], rng: &mut Rng) -> Network {
        assert!(
            sizes.len() >= 2 && sizes.iter().all(|&s| s > 0),
            "invalid layer sizes {sizes:?}"
        );
        assert_eq!(*sizes.last().unwrap(), 1, "networks have a scalar output");
        let mut params = Vec::new();
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for _ in 0..fan_in * fan_out + fan_out {
                params.push(rng.gen_range(-bound..bound));
            }
        }
        Network {
            sizes: sizes.to_vec(),
            params,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        let mut ws = Workspace::default();
        self.forward_cached(x, &mut ws)
    }

    /// Forward pass that keeps every layer's activations for `backward_cached`.
    pub fn forward_cached(&self, x: &[f64], ws: &mut Workspace) -> f64 {
        debug_assert_eq!(x.len(), self.sizes[0]);
        let layers = self.sizes.len() - 1;
        ws.acts.resize_with(self.sizes.len(), Vec::new);
        ws.acts[0].clear();
        ws.acts[0].extend_from_slice(x);
        let mut offset = 0;
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let (w, rest) = self.params[offset..].split_at(n_in * n_out);
            let b = &rest[..n_out];
            let (prev, next) = ws.acts.split_at_mut(l + 1);
            let input = &prev[l];
            let out = &mut next[0];
            out.clear();
            for o in 0..n_out {
                let row = &w[o * n_in..(o + 1) * n_in];
                let mut z = b[o];
                for (wi, xi) in row.iter().zip(input) {
                    z += wi * xi;
                }
                out.push(if l + 1 < layers { z.max(0.0) } else { z });
            }
            offset += n_in * n_out + n_out;
        }
        ws.acts[layers][0]
    }

    /// Adds `dout · ∂output/∂params` for the last cached forward pass into `grad`.
    pub fn backward_cached(&self, ws: &mut Workspace, dout: f64, grad: &mut [f64]) {
        let layers = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(layers);
        let mut offset = 0;
        for l in 0..layers {
            offsets.push(offset);
            offset += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
        }
        ws.delta.clear();
        ws.delta.push(dout);
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = offsets[l];
            let input = &ws.acts[l];
            {
                let (gw, gb) = grad[off..off + n_in * n_out + n_out].split_at_mut(n_in * n_out);
                for o in 0..n_out {
                    let d = ws.delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    for (g, xi) in gw[o * n_in..(o + 1) * n_in].iter_mut().zip(input) {
                        *g += d * xi;
                    }
                }
            }
            if l == 0 {
                break;
            }
            let w = &self.params[off..off + n_in * n_out];
            ws.next_delta.clear();
            ws.next_delta.resize(n_in, 0.0);
            for o in 0..n_out {
                let d = ws.delta[o];
                if d == 0.0 {
                    continue;
                }
                for (nd, wi) in ws.next_delta.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                    *nd += d * wi;
                }
            }
            // ReLU derivative on the hidden layer feeding this one.
            for (nd, a) in ws.next_delta.iter_mut().zip(input) {
                if *a <= 0.0 {
                    *nd = 0.0;
                }
            }
            std::mem::swap(&mut ws.delta, &mut ws.next_delta);
        }
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        let mut ws = Workspace::default();
        (0..x.nrows()).map(|k| self.forward_cached(x.row(k), &mut ws)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n_params: usize, learning_rate: f64) -> Adam {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        let step = self.learning_rate * c2.sqrt() / c1;
        for k in 0..params.len() {
            let g = grad[k];
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g;
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * g * g;
            params[k] -= step * self.m[k] / (self.v[k].sqrt() + self.eps * c2.sqrt());
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub max_epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden: vec![50, 50],
            max_epochs: 1000,
            learning_rate: 1e-3,
            batch_size: 32,
            seed: 7,
        }
    }
}

/// Seed-stream tags; shared with the physics-informed trainer so a plain MLP
/// and a physics head built from the same seed start identically.
pub(crate) const INIT_STREAM: u64 = 10;
pub(crate) const SHUFFLE_STREAM: u64 = 11;

pub const PLATEAU_TOL: f64 = 1e-8;
pub const PLATEAU_EPOCHS: usize = 10;

/// Mean squared error and its gradient over one mini-batch.
pub fn batch_mse_gradient(
    net: &Network,
    x: &Matrix,
    y: &[f64],
    batch: &[usize],
    ws: &mut Workspace,
    grad: &mut [f64],
) -> f64 {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    for &k in batch {
        let p = net.forward_cached(x.row(k), ws);
        let r = p - y[k];
        loss += r * r * scale;
        net.backward_cached(ws, 2.0 * r * scale, grad);
    }
    loss
}

/// Trains on already-scaled data; returns the network and per-epoch loss.
pub fn fit_mlp(params: &MlpParams, x: &Matrix, y: &[f64]) -> (Network, Vec<f64>) {
    let mut sizes = vec![x.ncols()];
    sizes.extend(&params.hidden);
    sizes.push(1);
    let mut init_rng = rng::derive_rng(params.seed, &[INIT_STREAM]);
    let mut shuffle_rng = rng::derive_rng(params.seed, &[SHUFFLE_STREAM]);
    let mut net = Network::new(&sizes, &mut init_rng);
    let mut adam = Adam::new(net.n_params(), params.learning_rate);
    let n = x.nrows();
    let batch = params.batch_size.clamp(1, n);
    let mut grad = vec![0.0; net.n_params()];
    let mut ws = Workspace::default();
    let mut log = Vec::new();
    let mut best = f64::INFINITY;
    let mut stale = 0;
    for _ in 0..params.max_epochs {
        let order = rng::permutation(n, &mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            let l = batch_mse_gradient(&net, x, y, chunk, &mut ws, &mut grad);
            epoch_loss += l * chunk.len() as f64;
            adam.step(&mut net.params, &grad);
        }
        epoch_loss /= n as f64;
        log.push(epoch_loss);
        if epoch_loss > best - PLATEAU_TOL {
            stale += 1;
        } else {
            stale = 0;
        }
        best = best.min(epoch_loss);
        if stale >= PLATEAU_EPOCHS {
            break;
        }
    }
    (net, log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    /// Central differences of `loss(params)`.
    fn fd_grad(net: &Network, loss: impl Fn(&Network) -> f64, h: f64) -> Vec<f64> {
        let mut probe = net.clone();
        (0..net.n_params())
            .map(|k| {
                let orig = probe.params[k];
                probe.params[k] = orig + h;
                let up = loss(&probe);
                probe.params[k] = orig - h;
                let down = loss(&probe);
                probe.params[k] = orig;
                (up - down) / (2.0 * h)
            })
            .collect()
    }

    fn rel_error(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let den: f64 = a
            .iter()
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
            .max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
        num / den.max(1e-12)
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let mut rng = rng_from_seed(1);
        for trial in 0..10 {
            let sizes = [3, 2 + trial % 4, 3 + trial % 3, 1];
            let net = Network::new(&sizes, &mut rng);
            let rows: Vec<Vec<f64>> = (0..6)
                .map(|_| (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect();
            let x = Matrix::from_rows(&rows);
            let y: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let batch: Vec<usize> = (0..6).collect();
            let mut grad = vec![0.0; net.n_params()];
            batch_mse_gradient(&net, &x, &y, &batch, &mut Workspace::default(), &mut grad);
            let fd = fd_grad(&net, |n| crate::eval::mse(&n.predict(&x), &y), 1e-5);
            let err = rel_error(&grad, &fd);
            assert!(err < 1e-4, "trial {trial}: relative error {err}");
        }
    }

    #[test]
    fn fits_linear_target() {
        let xs: Vec<[f64; 1]> = (0..100).map(|k| [k as f64 / 99.0]).collect();
        let y: Vec<f64> = xs.iter().map(|x| 2.0 * x[0] + 1.0).collect();
        let x = Matrix::from_rows(&xs);
        let (net, log) = fit_mlp(&MlpParams::default(), &x, &y);
        let mse = crate::eval::mse(&net.predict(&x), &y);
        assert!(mse < 1e-2, "mse {mse}");
        assert!(log.len() <= 1000);
    }

    #[test]
    fn init_bounds() {
        let net = Network::new(&[3, 10, 1], &mut rng_from_seed(0));
        let bound = (6.0f64 / 13.0).sqrt();
        assert!(net.params[..30].iter().all(|w| w.abs() <= bound));
        assert_eq!(net.n_params(), 3 * 10 + 10 + 10 + 1);
    }
}
