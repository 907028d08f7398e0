//! Physics-informed composite regressor for activation losses.
//!
//! Two networks of identical shape see the scaled inputs `(b, i, i0)`. The
//! physics head minimizes
//!
//! ```text
//! (MSE(pred, actual) + α · MSE(pred, physics)) / (1 + α)
//! ```
//!
//! where `physics` is a (possibly degraded) Tafel estimate computed from the
//! raw inputs. The correction head minimizes the data MSE of the combined
//! output `w · physics_head + (1 − w) · correction_head` with the physics head
//! held fixed. Training is mini-batched Adam with early stopping on a
//! validation tail.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{fmt_full, Dataset};
use crate::learners::mlp::{Adam, Network, Workspace, INIT_STREAM, SHUFFLE_STREAM};
use crate::learners::Scaler;
use crate::matrix::Matrix;
use crate::physics::{PhysicsError, TafelState};
use crate::rng;

#[derive(Debug, Error)]
pub enum PinnError {
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("too few rows: {0}")]
    TooFewRows(String),
    #[error("non-finite value in training data")]
    NonFinite,
    #[error("model expects 3 features (b, i, i0), got {0}")]
    DimensionMismatch(usize),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
}

/// Which prior knowledge feeds the physics target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnowledgeVariant {
    /// `b · log10(i / i0)`
    Full,
    /// `b · (i / i0)`
    DropLog,
    /// `log10(i / i0)`
    DropB,
    /// `b · log10(i)`
    DropI0,
    /// `b · log10(1 / i0)`
    DropI,
}

impl KnowledgeVariant {
    pub const ALL: [KnowledgeVariant; 5] = [
        KnowledgeVariant::Full,
        KnowledgeVariant::DropLog,
        KnowledgeVariant::DropB,
        KnowledgeVariant::DropI0,
        KnowledgeVariant::DropI,
    ];

    pub fn label(self) -> &'static str {
        match self {
            KnowledgeVariant::Full => "full",
            KnowledgeVariant::DropLog => "drop_log",
            KnowledgeVariant::DropB => "drop_b",
            KnowledgeVariant::DropI0 => "drop_i0",
            KnowledgeVariant::DropI => "drop_i",
        }
    }

    pub fn parse(s: &str) -> Option<KnowledgeVariant> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        KnowledgeVariant::ALL
            .into_iter()
            .find(|v| v.label() == norm || v.label().replace('_', "") == norm)
    }
}

/// Physics target for one state, in mV where the variant keeps `b`.
pub fn physics_estimate(variant: KnowledgeVariant, state: &TafelState) -> Result<f64, PhysicsError> {
    let (b, i, i0) = (state.b(), state.i(), state.i0());
    let log = |v: f64| {
        if v > 0.0 {
            Ok(v.log10())
        } else {
            Err(PhysicsError::LogDomain(v))
        }
    };
    Ok(match variant {
        KnowledgeVariant::Full => b * log(i / i0)?,
        KnowledgeVariant::DropLog => b * (i / i0),
        KnowledgeVariant::DropB => log(i / i0)?,
        KnowledgeVariant::DropI0 => b * log(i)?,
        KnowledgeVariant::DropI => b * log(1.0 / i0)?,
    })
}

/// `(MSE(pred, actual) + α · MSE(pred, physics)) / (1 + α)`.
pub fn pinn_loss(pred: &[f64], actual: &[f64], physics_target: &[f64], alpha: f64) -> Result<f64, PinnError> {
    if pred.len() != actual.len() || pred.len() != physics_target.len() {
        return Err(PinnError::LengthMismatch(format!(
            "pred {}, actual {}, physics {}",
            pred.len(),
            actual.len(),
            physics_target.len()
        )));
    }
    if pred.is_empty() {
        return Err(PinnError::LengthMismatch("empty input".into()));
    }
    if !(alpha > 0.0) {
        return Err(PinnError::InvalidConfig(format!("alpha must be > 0, got {alpha}")));
    }
    let data = crate::eval::mse(pred, actual);
    let phys = crate::eval::mse(pred, physics_target);
    Ok((data + alpha * phys) / (1.0 + alpha))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PinnConfig {
    pub alpha: f64,
    pub variant: KnowledgeVariant,
    pub net_layers: Vec<usize>,
    /// Share of the physics head in the combined output.
    pub combine_weight: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub early_stop_patience: usize,
    pub seed: u64,
}

impl Default for PinnConfig {
    fn default() -> Self {
        PinnConfig {
            alpha: 1.0,
            variant: KnowledgeVariant::Full,
            net_layers: vec![3, 10, 10, 10, 1],
            combine_weight: 0.5,
            max_epochs: 300,
            batch_size: 32,
            learning_rate: 1e-3,
            early_stop_patience: 25,
            seed: 7,
        }
    }
}

impl PinnConfig {
    pub fn validate(&self) -> Result<(), PinnError> {
        let bad = |m: String| Err(PinnError::InvalidConfig(m));
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be > 0, got {}", self.alpha));
        }
        if self.net_layers.first() != Some(&3) || self.net_layers.last() != Some(&1) || self.net_layers.len() < 2 {
            return bad(format!(
                "layers must start at 3 and end at 1, got {:?}",
                self.net_layers
            ));
        }
        if self.net_layers.contains(&0) {
            return bad("layer widths must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.combine_weight) {
            return bad(format!(
                "combine weight must lie in [0, 1], got {}",
                self.combine_weight
            ));
        }
        if self.batch_size == 0 || !(self.learning_rate > 0.0) || self.max_epochs == 0 {
            return bad("batch size, learning rate and max_epochs must be positive".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean training objective of the physics head (or the plain MSE for a baseline).
    pub total_loss: f64,
    /// Mean data MSE of the combined output.
    pub data_mse: f64,
    /// Mean MSE between the physics head and its physics target; NaN for a baseline.
    pub physics_mse: f64,
    pub val_loss: f64,
}

/// Losses are in standardized target units.
pub fn write_training_log<W: Write>(log: &[EpochLog], writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["epoch", "total_loss", "data_mse", "physics_mse", "val_loss"])?;
    for e in log {
        w.write_record([
            e.epoch.to_string(),
            fmt_full(e.total_loss),
            fmt_full(e.data_mse),
            fmt_full(e.physics_mse),
            fmt_full(e.val_loss),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PinnModel {
    pub config: PinnConfig,
    pub physics_head: Network,
    pub correction_head: Network,
    pub combine_weight: f64,
    pub input_scaler: Scaler,
    pub target_scaler: Scaler,
    pub log: Vec<EpochLog>,
    /// Epoch whose weights were kept (minimal validation loss).
    pub best_epoch: usize,
}

/// Plain MSE network trained with the same loop, for comparisons.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    pub network: Network,
    pub input_scaler: Scaler,
    pub target_scaler: Scaler,
    pub log: Vec<EpochLog>,
    pub best_epoch: usize,
}

struct Prepared {
    x: Matrix,
    y: Vec<f64>,
    physics: Vec<f64>,
    fit_rows: usize,
    input_scaler: Scaler,
    target_scaler: Scaler,
}

fn prepare(data: &Dataset, val_fraction: f64, variant: Option<KnowledgeVariant>) -> Result<Prepared, PinnError> {
    if !(val_fraction > 0.0 && val_fraction < 0.5) {
        return Err(PinnError::InvalidConfig(format!(
            "val_fraction must lie in (0, 0.5), got {val_fraction}"
        )));
    }
    let n = data.len();
    let n_val = ((n as f64) * val_fraction).ceil() as usize;
    if n < 2 || n_val == 0 || n_val >= n {
        return Err(PinnError::TooFewRows(format!(
            "{n} rows cannot host a validation tail of {val_fraction}"
        )));
    }
    let fit_rows = n - n_val;
    let raw = Matrix::from_rows(&data.tafel_features());
    if !raw.all_finite() || data.eta_act.iter().any(|v| !v.is_finite()) {
        return Err(PinnError::NonFinite);
    }
    let head: Vec<usize> = (0..fit_rows).collect();
    let input_scaler = Scaler::fit(&raw.select_rows(&head));
    let target_scaler = Scaler::fit_vector(&data.eta_act[..fit_rows]);
    let physics = match variant {
        Some(v) => (0..n)
            .map(|k| {
                let s = TafelState::new(data.b[k], data.i[k], data.i0[k])?;
                Ok(target_scaler.apply_vector(&[physics_estimate(v, &s)?])[0])
            })
            .collect::<Result<Vec<f64>, PhysicsError>>()?,
        None => Vec::new(),
    };
    Ok(Prepared {
        x: input_scaler.apply(&raw),
        y: target_scaler.apply_vector(&data.eta_act),
        physics,
        fit_rows,
        input_scaler,
        target_scaler,
    })
}

fn build_net(layers: &[usize], seed: u64, head: u64) -> Network {
    let path: &[u64] = if head == 0 {
        &[INIT_STREAM]
    } else {
        &[INIT_STREAM, head]
    };
    Network::new(layers, &mut rng::derive_rng(seed, path))
}

/// Gradient of the physics head objective over one batch; returns `(loss, data_mse, physics_mse)`.
pub fn physics_head_gradient(
    net: &Network,
    x: &Matrix,
    y: &[f64],
    physics: &[f64],
    alpha: f64,
    batch: &[usize],
    ws: &mut Workspace,
    grad: &mut [f64],
) -> (f64, f64, f64) {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let inv = 1.0 / batch.len() as f64;
    let norm = 1.0 / (1.0 + alpha);
    let (mut data, mut phys) = (0.0, 0.0);
    for &k in batch {
        let p = net.forward_cached(x.row(k), ws);
        let (rd, rp) = (p - y[k], p - physics[k]);
        data += rd * rd * inv;
        phys += rp * rp * inv;
        net.backward_cached(ws, 2.0 * inv * norm * (rd + alpha * rp), grad);
    }
    ((data + alpha * phys) * norm, data, phys)
}

/// Gradient of the combined-output data MSE with respect to the correction head.
pub fn correction_head_gradient(
    physics_head: &Network,
    correction_head: &Network,
    w: f64,
    x: &Matrix,
    y: &[f64],
    batch: &[usize],
    ws: &mut Workspace,
    grad: &mut [f64],
) -> f64 {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let inv = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    for &k in batch {
        let ph = physics_head.forward_cached(x.row(k), ws);
        let ch = correction_head.forward_cached(x.row(k), ws);
        let r = w * ph + (1.0 - w) * ch - y[k];
        loss += r * r * inv;
        correction_head.backward_cached(ws, 2.0 * inv * r * (1.0 - w), grad);
    }
    loss
}

fn combined(physics_head: &Network, correction_head: &Network, w: f64, x: &[f64], ws: &mut Workspace) -> f64 {
    let ph = physics_head.forward_cached(x, ws);
    let ch = correction_head.forward_cached(x, ws);
    w * ph + (1.0 - w) * ch
}

pub fn train_pinn(cfg: &PinnConfig, train: &Dataset, val_fraction: f64) -> Result<PinnModel, PinnError> {
    cfg.validate()?;
    let prep = prepare(train, val_fraction, Some(cfg.variant))?;
    let n = prep.fit_rows;
    let w = cfg.combine_weight;
    let mut phys_net = build_net(&cfg.net_layers, cfg.seed, 0);
    let mut corr_net = build_net(&cfg.net_layers, cfg.seed, 1);
    let mut phys_opt = Adam::new(phys_net.n_params(), cfg.learning_rate);
    let mut corr_opt = Adam::new(corr_net.n_params(), cfg.learning_rate);
    let mut shuffle = rng::derive_rng(cfg.seed, &[SHUFFLE_STREAM]);
    let batch = cfg.batch_size.clamp(1, n);
    let mut g_phys = vec![0.0; phys_net.n_params()];
    let mut g_corr = vec![0.0; corr_net.n_params()];
    let mut ws = Workspace::default();
    let mut log = Vec::new();
    let mut best = (f64::INFINITY, 0usize, phys_net.clone(), corr_net.clone());

    for epoch in 0..cfg.max_epochs {
        let order = rng::permutation(n, &mut shuffle);
        let (mut total, mut data, mut phys) = (0.0, 0.0, 0.0);
        for chunk in order.chunks(batch) {
            let share = chunk.len() as f64 / n as f64;
            let (l, _, p) = physics_head_gradient(
                &phys_net,
                &prep.x,
                &prep.y,
                &prep.physics,
                cfg.alpha,
                chunk,
                &mut ws,
                &mut g_phys,
            );
            let d = correction_head_gradient(&phys_net, &corr_net, w, &prep.x, &prep.y, chunk, &mut ws, &mut g_corr);
            total += l * share;
            phys += p * share;
            data += d * share;
            phys_opt.step(&mut phys_net.params, &g_phys);
            corr_opt.step(&mut corr_net.params, &g_corr);
        }
        let val_loss = (n..prep.x.nrows())
            .map(|k| (combined(&phys_net, &corr_net, w, prep.x.row(k), &mut ws) - prep.y[k]).powi(2))
            .sum::<f64>()
            / (prep.x.nrows() - n) as f64;
        log.push(EpochLog {
            epoch,
            total_loss: total,
            data_mse: data,
            physics_mse: phys,
            val_loss,
        });
        if val_loss < best.0 {
            best = (val_loss, epoch, phys_net.clone(), corr_net.clone());
        } else if epoch - best.1 >= cfg.early_stop_patience {
            break;
        }
    }
    let (_, best_epoch, physics_head, correction_head) = best;
    Ok(PinnModel {
        config: cfg.clone(),
        physics_head,
        correction_head,
        combine_weight: w,
        input_scaler: prep.input_scaler,
        target_scaler: prep.target_scaler,
        log,
        best_epoch,
    })
}

/// Same architecture, optimizer, batching and early stopping as the physics
/// head, trained on plain MSE. Shares the physics head's seed streams.
pub fn train_baseline(cfg: &PinnConfig, train: &Dataset, val_fraction: f64) -> Result<BaselineModel, PinnError> {
    cfg.validate()?;
    let prep = prepare(train, val_fraction, None)?;
    let n = prep.fit_rows;
    let mut net = build_net(&cfg.net_layers, cfg.seed, 0);
    let mut opt = Adam::new(net.n_params(), cfg.learning_rate);
    let mut shuffle = rng::derive_rng(cfg.seed, &[SHUFFLE_STREAM]);
    let batch = cfg.batch_size.clamp(1, n);
    let mut grad = vec![0.0; net.n_params()];
    let mut ws = Workspace::default();
    let mut log = Vec::new();
    let mut best = (f64::INFINITY, 0usize, net.clone());
    for epoch in 0..cfg.max_epochs {
        let order = rng::permutation(n, &mut shuffle);
        let mut total = 0.0;
        for chunk in order.chunks(batch) {
            let l = crate::learners::mlp::batch_mse_gradient(&net, &prep.x, &prep.y, chunk, &mut ws, &mut grad);
            total += l * chunk.len() as f64 / n as f64;
            opt.step(&mut net.params, &grad);
        }
        let val_loss = (n..prep.x.nrows())
            .map(|k| (net.forward_cached(prep.x.row(k), &mut ws) - prep.y[k]).powi(2))
            .sum::<f64>()
            / (prep.x.nrows() - n) as f64;
        log.push(EpochLog {
            epoch,
            total_loss: total,
            data_mse: total,
            physics_mse: f64::NAN,
            val_loss,
        });
        if val_loss < best.0 {
            best = (val_loss, epoch, net.clone());
        } else if epoch - best.1 >= cfg.early_stop_patience {
            break;
        }
    }
    Ok(BaselineModel {
        network: best.2,
        input_scaler: prep.input_scaler,
        target_scaler: prep.target_scaler,
        log,
        best_epoch: best.1,
    })
}

fn check_dims(x: &Matrix) -> Result<(), PinnError> {
    if x.ncols() != 3 {
        return Err(PinnError::DimensionMismatch(x.ncols()));
    }
    Ok(())
}

impl PinnModel {
    /// Raw-unit outputs of `(physics_head, correction_head)`.
    pub fn predict_heads(&self, x: &Matrix) -> Result<(Vec<f64>, Vec<f64>), PinnError> {
        check_dims(x)?;
        let xs = self.input_scaler.apply(x);
        let ph = self.target_scaler.invert_vector(&self.physics_head.predict(&xs));
        let ch = self.target_scaler.invert_vector(&self.correction_head.predict(&xs));
        Ok((ph, ch))
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>, PinnError> {
        check_dims(x)?;
        let xs = self.input_scaler.apply(x);
        let w = self.combine_weight;
        let mut ws = Workspace::default();
        let scaled: Vec<f64> = (0..xs.nrows())
            .map(|k| combined(&self.physics_head, &self.correction_head, w, xs.row(k), &mut ws))
            .collect();
        Ok(self.target_scaler.invert_vector(&scaled))
    }
}

pub fn predict_pinn(model: &PinnModel, x: &Matrix) -> Result<Vec<f64>, PinnError> {
    model.predict(x)
}

impl BaselineModel {
    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>, PinnError> {
        check_dims(x)?;
        let xs = self.input_scaler.apply(x);
        Ok(self.target_scaler.invert_vector(&self.network.predict(&xs)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{generate_synthetic_dataset, SyntheticConfig};

    #[test]
    fn physics_estimate_examples() {
        let s = TafelState::new(50.0, 1.0, 1e-7).unwrap();
        assert!((physics_estimate(KnowledgeVariant::Full, &s).unwrap() - 350.0).abs() < 1e-12);
        let s = TafelState::new(50.0, 2.0, 1.0).unwrap();
        assert_eq!(physics_estimate(KnowledgeVariant::DropLog, &s).unwrap(), 100.0);
        let s = TafelState::new(77.0, 0.4, 0.4).unwrap();
        assert_eq!(physics_estimate(KnowledgeVariant::DropB, &s).unwrap(), 0.0);
        let s = TafelState::new(50.0, 10.0, 0.01).unwrap();
        assert_eq!(physics_estimate(KnowledgeVariant::DropI0, &s).unwrap(), 50.0);
        assert_eq!(physics_estimate(KnowledgeVariant::DropI, &s).unwrap(), 100.0);
    }

    #[test]
    fn variant_labels_parse() {
        for v in KnowledgeVariant::ALL {
            assert_eq!(KnowledgeVariant::parse(v.label()), Some(v));
        }
        assert_eq!(KnowledgeVariant::parse("DropLog"), Some(KnowledgeVariant::DropLog));
        assert_eq!(KnowledgeVariant::parse("nope"), None);
    }

    #[test]
    fn loss_examples() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(pinn_loss(&a, &a, &a, 0.7).unwrap(), 0.0);
        // Both MSE terms equal to m = 4.
        let l = pinn_loss(&[2.0, 2.0], &[0.0, 0.0], &[4.0, 4.0], 3.0).unwrap();
        assert!((l - 4.0).abs() < 1e-15);
        // MSE(pred, actual) = 4, MSE(pred, physics) = 2, α = 0.5.
        let pred = [0.0, 0.0];
        let actual = [2.0, -2.0];
        let phys = [2f64.sqrt(), -(2f64.sqrt())];
        let l = pinn_loss(&pred, &actual, &phys, 0.5).unwrap();
        assert!((l - 10.0 / 3.0).abs() < 1e-12, "{l}");
        assert!(pinn_loss(&pred, &actual[..1], &phys, 1.0).is_err());
        assert!(pinn_loss(&pred, &actual, &phys, 0.0).is_err());
    }

    #[test]
    fn config_validation() {
        let bad = PinnConfig {
            net_layers: vec![2, 10, 1],
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = PinnConfig {
            alpha: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = PinnConfig {
            combine_weight: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        PinnConfig::default().validate().unwrap();
    }

    fn small_data(noise: f64) -> Dataset {
        generate_synthetic_dataset(&SyntheticConfig {
            hours: 400,
            noise_std_mv: noise,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn degenerate_weights_select_one_head() {
        let ds = small_data(1.0);
        let x = Matrix::from_rows(&ds.tafel_features());
        for w in [0.0, 0.3, 1.0] {
            let cfg = PinnConfig {
                combine_weight: w,
                max_epochs: 5,
                ..Default::default()
            };
            let m = train_pinn(&cfg, &ds, 0.1).unwrap();
            let (ph, ch) = m.predict_heads(&x).unwrap();
            let out = m.predict(&x).unwrap();
            for k in 0..out.len() {
                let want = w * ph[k] + (1.0 - w) * ch[k];
                assert!((out[k] - want).abs() <= 1e-12 * want.abs().max(1.0));
            }
            if w == 1.0 {
                assert_eq!(out, ph);
            }
            if w == 0.0 {
                assert_eq!(out, ch);
            }
        }
    }

    #[test]
    fn collapses_to_plain_mse_when_targets_coincide() {
        let ds = small_data(0.0);
        let cfg = PinnConfig {
            max_epochs: 20,
            early_stop_patience: 1000,
            ..Default::default()
        };
        let pinn = train_pinn(&cfg, &ds, 0.1).unwrap();
        let base = train_baseline(&cfg, &ds, 0.1).unwrap();
        assert_eq!(pinn.log.len(), base.log.len());
        for (a, b) in pinn.log.iter().zip(&base.log) {
            assert!(
                (a.total_loss - b.total_loss).abs() < 1e-9,
                "epoch {}: {} vs {}",
                a.epoch,
                a.total_loss,
                b.total_loss
            );
        }
    }

    #[test]
    fn early_stopping_keeps_best_epoch() {
        let ds = small_data(1.0);
        let cfg = PinnConfig {
            max_epochs: 200,
            early_stop_patience: 5,
            ..Default::default()
        };
        let m = train_pinn(&cfg, &ds, 0.2).unwrap();
        let min = m.log.iter().map(|e| e.val_loss).fold(f64::INFINITY, f64::min);
        assert_eq!(m.log[m.best_epoch].val_loss, min);
        assert!(m.log.len() <= m.best_epoch + 1 + 5);
    }

    #[test]
    fn training_is_deterministic() {
        let ds = small_data(1.0);
        let cfg = PinnConfig {
            max_epochs: 10,
            ..Default::default()
        };
        assert_eq!(train_pinn(&cfg, &ds, 0.1).unwrap(), train_pinn(&cfg, &ds, 0.1).unwrap());
    }

    #[test]
    fn rejects_bad_inputs() {
        let ds = small_data(1.0);
        assert!(train_pinn(&PinnConfig::default(), &ds, 0.0).is_err());
        assert!(train_pinn(&PinnConfig::default(), &ds, 0.6).is_err());
        let m = train_pinn(
            &PinnConfig {
                max_epochs: 1,
                ..Default::default()
            },
            &ds,
            0.1,
        )
        .unwrap();
        assert!(matches!(
            m.predict(&Matrix::from_rows(&[[1.0, 2.0]])),
            Err(PinnError::DimensionMismatch(2))
        ));
    }

    #[test]
    fn loss_symmetry_and_positivity() {
        let mut r = rng::rng_from_seed(3);
        use rand::Rng;
        for _ in 0..200 {
            let n = r.gen_range(1..12);
            let v = |r: &mut rng::Rng| (0..n).map(|_| r.gen_range(-5.0..5.0)).collect::<Vec<f64>>();
            let (p, a, g) = (v(&mut r), v(&mut r), v(&mut r));
            let alpha = r.gen_range(0.05..20.0);
            let lhs = (1.0 + alpha) * pinn_loss(&p, &a, &g, alpha).unwrap();
            let rhs = (1.0 + 1.0 / alpha) * alpha * pinn_loss(&p, &g, &a, 1.0 / alpha).unwrap();
            assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
            assert!(lhs > 0.0);
        }
    }

    fn fd_check(params: &mut Vec<f64>, grad: &[f64], f: &mut dyn FnMut(&[f64]) -> f64) {
        let h = 1e-6;
        for k in 0..params.len() {
            let keep = params[k];
            params[k] = keep + h;
            let up = f(params);
            params[k] = keep - h;
            let down = f(params);
            params[k] = keep;
            let fd = (up - down) / (2.0 * h);
            let err = (fd - grad[k]).abs() / fd.abs().max(grad[k].abs()).max(1e-6);
            assert!(err < 1e-4, "param {k}: fd {fd} analytic {}", grad[k]);
        }
    }

    #[test]
    fn head_gradients_match_finite_differences() {
        use rand::Rng;
        let mut r = rng::rng_from_seed(17);
        for trial in 0..5 {
            let layers = [3, 4 + trial, 3, 1];
            let rows: Vec<Vec<f64>> = (0..12)
                .map(|_| (0..3).map(|_| r.gen_range(-1.5..1.5)).collect())
                .collect();
            let x = Matrix::from_rows(&rows);
            let y: Vec<f64> = (0..12).map(|_| r.gen_range(-1.0..1.0)).collect();
            let g: Vec<f64> = (0..12).map(|_| r.gen_range(-1.0..1.0)).collect();
            let batch: Vec<usize> = (0..12).filter(|k| k % 3 != 1).collect();
            let alpha = r.gen_range(0.1..5.0);
            let w = r.gen_range(0.0..1.0);
            let ph = Network::new(&layers, &mut r);
            let ch = Network::new(&layers, &mut r);
            let mut ws = Workspace::default();

            let mut grad = vec![0.0; ph.n_params()];
            physics_head_gradient(&ph, &x, &y, &g, alpha, &batch, &mut ws, &mut grad);
            let mut params = ph.params.clone();
            fd_check(&mut params, &grad, &mut |p| {
                let net = Network {
                    sizes: ph.sizes.clone(),
                    params: p.to_vec(),
                };
                let pred: Vec<f64> = batch.iter().map(|&k| net.forward(x.row(k))).collect();
                let a: Vec<f64> = batch.iter().map(|&k| y[k]).collect();
                let t: Vec<f64> = batch.iter().map(|&k| g[k]).collect();
                pinn_loss(&pred, &a, &t, alpha).unwrap()
            });

            let mut grad = vec![0.0; ch.n_params()];
            correction_head_gradient(&ph, &ch, w, &x, &y, &batch, &mut ws, &mut grad);
            let mut params = ch.params.clone();
            fd_check(&mut params, &grad, &mut |p| {
                let net = Network {
                    sizes: ch.sizes.clone(),
                    params: p.to_vec(),
                };
                let pred: Vec<f64> = batch
                    .iter()
                    .map(|&k| w * ph.forward(x.row(k)) + (1.0 - w) * net.forward(x.row(k)))
                    .collect();
                let a: Vec<f64> = batch.iter().map(|&k| y[k]).collect();
                crate::eval::mse(&pred, &a)
            });
        }
    }

    #[test]
    fn training_log_csv() {
        let log = vec![EpochLog {
            epoch: 0,
            total_loss: 1.0,
            data_mse: 2.0,
            physics_mse: 3.0,
            val_loss: 4.0,
        }];
        let mut buf = Vec::new();
        write_training_log(&log, &mut buf).unwrap();
        assert!(String::from_utf8(buf)
            .unwrap()
            .starts_with("epoch,total_loss,data_mse,physics_mse,val_loss\n0,"));
    }
}
