//! Scoring metrics and cross-round summaries.
//!
//! Every variance uses the population (1/n) convention.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("length mismatch: {pred} predictions vs {obs} observations")]
    LengthMismatch { pred: usize, obs: usize },
    #[error("need at least {need} observations, got {got}")]
    TooFew { need: usize, got: usize },
    #[error("normalizer of the observations is zero")]
    ZeroNormalizer,
    #[error("observations have zero variance")]
    ConstantObservations,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalizer {
    #[default]
    Range,
    Std,
    Mean,
}

impl Normalizer {
    pub fn tag(self) -> &'static str {
        match self {
            Normalizer::Range => "range",
            Normalizer::Std => "std",
            Normalizer::Mean => "mean",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub nrmse_normalizer: Normalizer,
    pub report_percent: bool,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            nrmse_normalizer: Normalizer::Range,
            report_percent: true,
        }
    }
}

impl MetricConfig {
    /// Column label such as `nrmse_range_pct`.
    pub fn nrmse_label(&self) -> String {
        let suffix = if self.report_percent { "_pct" } else { "" };
        format!("nrmse_{}{suffix}", self.nrmse_normalizer.tag())
    }
}

fn check(pred: &[f64], obs: &[f64], min: usize) -> Result<(), MetricError> {
    if pred.len() != obs.len() {
        return Err(MetricError::LengthMismatch {
            pred: pred.len(),
            obs: obs.len(),
        });
    }
    if obs.len() < min {
        return Err(MetricError::TooFew {
            need: min,
            got: obs.len(),
        });
    }
    Ok(())
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn population_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

pub fn mse(pred: &[f64], obs: &[f64]) -> f64 {
    pred.iter().zip(obs).map(|(p, o)| (p - o).powi(2)).sum::<f64>() / obs.len() as f64
}

pub fn rmse(pred: &[f64], obs: &[f64]) -> Result<f64, MetricError> {
    check(pred, obs, 1)?;
    Ok(mse(pred, obs).sqrt())
}

pub fn nrmse(pred: &[f64], obs: &[f64], cfg: &MetricConfig) -> Result<f64, MetricError> {
    let r = rmse(pred, obs)?;
    let scale = match cfg.nrmse_normalizer {
        Normalizer::Range => {
            let max = obs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let min = obs.iter().cloned().fold(f64::INFINITY, f64::min);
            max - min
        }
        Normalizer::Std => population_std(obs),
        Normalizer::Mean => mean(obs),
    };
    if scale == 0.0 || !scale.is_finite() {
        return Err(MetricError::ZeroNormalizer);
    }
    let v = r / scale.abs();
    Ok(if cfg.report_percent { 100.0 * v } else { v })
}

pub fn r_squared(pred: &[f64], obs: &[f64]) -> Result<f64, MetricError> {
    check(pred, obs, 2)?;
    let m = mean(obs);
    let ss_tot: f64 = obs.iter().map(|o| (o - m).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(MetricError::ConstantObservations);
    }
    let ss_res: f64 = pred.iter().zip(obs).map(|(p, o)| (o - p).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundStats {
    pub n: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
}

/// Linear-interpolation quantile of sorted data (`q` in [0, 1]).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Panics on empty input.
pub fn summarize_rounds(values: &[f64]) -> RoundStats {
    assert!(!values.is_empty(), "summarize_rounds needs at least one value");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    RoundStats {
        n: sorted.len(),
        min: sorted[0],
        q1: quantile_sorted(&sorted, 0.25),
        median: quantile_sorted(&sorted, 0.5),
        q3: quantile_sorted(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
        mean: mean(&sorted),
        std: population_std(&sorted),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const PCT_RANGE: MetricConfig = MetricConfig {
        nrmse_normalizer: Normalizer::Range,
        report_percent: true,
    };

    #[test]
    fn nrmse_examples() {
        let obs = [1.0, 4.0, 2.0];
        assert_eq!(nrmse(&obs, &obs, &PCT_RANGE).unwrap(), 0.0);
        assert!((nrmse(&[1.0, 9.0], &[0.0, 10.0], &PCT_RANGE).unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(
            nrmse(&[1.0, 2.0], &[3.0, 3.0], &PCT_RANGE),
            Err(MetricError::ZeroNormalizer)
        );
        assert_eq!(
            nrmse(&[1.0], &[3.0, 3.0], &PCT_RANGE),
            Err(MetricError::LengthMismatch { pred: 1, obs: 2 })
        );
        assert_eq!(PCT_RANGE.nrmse_label(), "nrmse_range_pct");
    }

    #[test]
    fn r2_examples() {
        let obs = [0.0, 1.0, 2.0];
        assert_eq!(r_squared(&obs, &obs).unwrap(), 1.0);
        assert_eq!(r_squared(&[1.0; 3], &obs).unwrap(), 0.0);
        assert!((r_squared(&[0.0; 3], &obs).unwrap() + 1.5).abs() < 1e-15);
        assert_eq!(
            r_squared(&[1.0, 1.0], &[2.0, 2.0]),
            Err(MetricError::ConstantObservations)
        );
    }

    #[test]
    fn round_stats_examples() {
        let s = summarize_rounds(&[5.0]);
        assert_eq!(
            (s.min, s.q1, s.median, s.q3, s.max, s.mean),
            (5.0, 5.0, 5.0, 5.0, 5.0, 5.0)
        );
        assert_eq!(summarize_rounds(&[1.0, 2.0, 3.0, 4.0]).median, 2.5);
        assert_eq!(
            summarize_rounds(&[4.0, 1.0, 3.0, 2.0]),
            summarize_rounds(&[1.0, 2.0, 3.0, 4.0])
        );
    }

    fn vecs() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (3usize..40).prop_flat_map(|n| {
            (
                proptest::collection::vec(-50.0f64..50.0, n),
                proptest::collection::vec(-50.0f64..50.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn nrmse_shift_invariant((p, o) in vecs(), c in -1e3f64..1e3) {
            for norm in [Normalizer::Range, Normalizer::Std] {
                let cfg = MetricConfig { nrmse_normalizer: norm, report_percent: false };
                let a = nrmse(&p, &o, &cfg).unwrap();
                let ps: Vec<f64> = p.iter().map(|x| x + c).collect();
                let os: Vec<f64> = o.iter().map(|x| x + c).collect();
                let b = nrmse(&ps, &os, &cfg).unwrap();
                prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
            }
        }

        #[test]
        fn r2_affine_invariant((p, o) in vecs(), s in 0.1f64..10.0, c in -100.0f64..100.0) {
            let a = r_squared(&p, &o).unwrap();
            let ps: Vec<f64> = p.iter().map(|x| s * x + c).collect();
            let os: Vec<f64> = o.iter().map(|x| s * x + c).collect();
            let b = r_squared(&ps, &os).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }

        #[test]
        fn stats_ordered(v in proptest::collection::vec(-1e3f64..1e3, 1..50)) {
            let s = summarize_rounds(&v);
            prop_assert!(s.min <= s.q1 && s.q1 <= s.median && s.median <= s.q3 && s.q3 <= s.max);
        }
    }

    #[test]
    fn nrmse_std_matches_r2() {
        // NRMSE_std² = SS_res / (n·var) = 1 − R² under the population convention.
        let mut rng = crate::rng::rng_from_seed(5);
        let cfg = MetricConfig {
            nrmse_normalizer: Normalizer::Std,
            report_percent: false,
        };
        for _ in 0..100 {
            use rand::Rng;
            let n = rng.gen_range(2..50);
            let o: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let p: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let lhs = nrmse(&p, &o, &cfg).unwrap().powi(2);
            let rhs = 1.0 - r_squared(&p, &o).unwrap();
            assert!((lhs - rhs).abs() < 1e-10, "{lhs} vs {rhs}");
        }
    }
}
