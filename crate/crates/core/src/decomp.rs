//! Classical multiplicative trend/seasonal/residual decomposition.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::fmt_full;

#[derive(Debug, Error, PartialEq)]
pub enum DecompError {
    #[error("multiplicative model needs positive values; got {value} at index {index}")]
    NonPositive { index: usize, value: f64 },
    #[error("series of length {len} is shorter than two periods of {period}")]
    TooShort { len: usize, period: usize },
    #[error("invalid trend window {window} for period {period} and length {len}")]
    InvalidWindow { window: usize, period: usize, len: usize },
    #[error("period must be positive")]
    ZeroPeriod,
    #[error("start phase {phase} outside pattern of length {period}")]
    BadPhase { phase: usize, period: usize },
    #[error("mask of length {mask} does not match series of length {len}")]
    MaskLength { mask: usize, len: usize },
    #[error("no observed value inside the trend window around index {index}")]
    EmptyWindow { index: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub trend: Vec<f64>,
    pub seasonal: Vec<f64>,
    pub residual: Vec<f64>,
    pub period: usize,
}

impl Decomposition {
    /// One period of seasonal factors, phase 0 first.
    pub fn pattern(&self) -> &[f64] {
        &self.seasonal[..self.period]
    }

    pub fn write_csv<W: Write>(&self, observed: &[f64], writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t_index", "observed", "trend", "seasonal", "residual"])?;
        for k in 0..self.trend.len() {
            w.write_record([
                k.to_string(),
                fmt_full(observed[k]),
                fmt_full(self.trend[k]),
                fmt_full(self.seasonal[k]),
                fmt_full(self.residual[k]),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Centered moving average of odd width `window`. Near the ends the window
/// keeps its full width and is shifted inward so it never leaves the series.
pub fn moving_average_trend(series: &[f64], window: usize) -> Vec<f64> {
    let n = series.len();
    let w = window.min(n).max(1);
    let half = w / 2;
    (0..n)
        .map(|k| {
            let start = k.saturating_sub(half).min(n - w);
            // Direct sum keeps round-off independent of position in the series.
            series[start..start + w].iter().sum::<f64>() / w as f64
        })
        .collect()
}

/// Per-phase geometric mean of `series / trend`, renormalized to geometric mean 1.
/// Only positions listed in `rows` contribute when given.
pub fn seasonal_pattern(series: &[f64], trend: &[f64], period: usize, rows: Option<&[usize]>) -> Vec<f64> {
    let mut log_sum = vec![0.0; period];
    let mut count = vec![0usize; period];
    let mut add = |k: usize| {
        log_sum[k % period] += (series[k] / trend[k]).ln();
        count[k % period] += 1;
    };
    match rows {
        Some(rows) => rows.iter().for_each(|&k| add(k)),
        None => (0..series.len()).for_each(add),
    }
    let logs: Vec<f64> = log_sum
        .iter()
        .zip(&count)
        .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect();
    let center = logs.iter().sum::<f64>() / period as f64;
    logs.iter().map(|l| (l - center).exp()).collect()
}

pub fn decompose_multiplicative(
    series: &[f64],
    period: usize,
    trend_window: usize,
) -> Result<Decomposition, DecompError> {
    let n = series.len();
    if period == 0 {
        return Err(DecompError::ZeroPeriod);
    }
    if n < 2 * period {
        return Err(DecompError::TooShort { len: n, period });
    }
    if trend_window % 2 == 0 || trend_window < period || trend_window > n {
        return Err(DecompError::InvalidWindow {
            window: trend_window,
            period,
            len: n,
        });
    }
    if let Some((index, &value)) = series.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
        return Err(DecompError::NonPositive { index, value });
    }
    let trend = moving_average_trend(series, trend_window);
    let pattern = seasonal_pattern(series, &trend, period, None);
    let seasonal: Vec<f64> = (0..n).map(|k| pattern[k % period]).collect();
    let residual = (0..n).map(|k| series[k] / (trend[k] * seasonal[k])).collect();
    Ok(Decomposition {
        trend,
        seasonal,
        residual,
        period,
    })
}

/// [`moving_average_trend`] restricted to positions where `observed` is set.
/// Windows are placed exactly as in the unmasked version.
pub fn masked_moving_average(series: &[f64], observed: &[bool], window: usize) -> Result<Vec<f64>, DecompError> {
    let n = series.len();
    let w = window.min(n).max(1);
    let half = w / 2;
    (0..n)
        .map(|k| {
            let start = k.saturating_sub(half).min(n - w);
            let (sum, count) = (start..start + w)
                .filter(|&j| observed[j])
                .fold((0.0, 0usize), |(s, c), j| (s + series[j], c + 1));
            if count == 0 {
                Err(DecompError::EmptyWindow { index: k })
            } else {
                Ok(sum / count as f64)
            }
        })
        .collect()
}

/// Decomposition that reads `series` only where `observed` is set; the
/// residual is NaN elsewhere. After the first pass the trend is re-estimated
/// `refinements` times from the seasonally adjusted series, which removes the
/// bias an uneven mix of phases inside a window would otherwise leave.
pub fn decompose_observed(
    series: &[f64],
    observed: &[bool],
    period: usize,
    trend_window: usize,
    refinements: usize,
) -> Result<Decomposition, DecompError> {
    let n = series.len();
    if observed.len() != n {
        return Err(DecompError::MaskLength {
            mask: observed.len(),
            len: n,
        });
    }
    if period == 0 {
        return Err(DecompError::ZeroPeriod);
    }
    if n < 2 * period {
        return Err(DecompError::TooShort { len: n, period });
    }
    if trend_window % 2 == 0 || trend_window < period || trend_window > n {
        return Err(DecompError::InvalidWindow {
            window: trend_window,
            period,
            len: n,
        });
    }
    let rows: Vec<usize> = (0..n).filter(|&k| observed[k]).collect();
    if let Some(&index) = rows.iter().find(|&&k| !(series[k] > 0.0 && series[k].is_finite())) {
        return Err(DecompError::NonPositive {
            index,
            value: series[index],
        });
    }
    let mut trend = masked_moving_average(series, observed, trend_window)?;
    let mut pattern = seasonal_pattern(series, &trend, period, Some(&rows));
    for _ in 0..refinements {
        let adjusted: Vec<f64> = (0..n)
            .map(|k| {
                if observed[k] {
                    series[k] / pattern[k % period]
                } else {
                    0.0
                }
            })
            .collect();
        trend = masked_moving_average(&adjusted, observed, trend_window)?;
        pattern = seasonal_pattern(series, &trend, period, Some(&rows));
    }
    let seasonal: Vec<f64> = (0..n).map(|k| pattern[k % period]).collect();
    let residual = (0..n)
        .map(|k| {
            if observed[k] {
                series[k] / (trend[k] * seasonal[k])
            } else {
                f64::NAN
            }
        })
        .collect();
    Ok(Decomposition {
        trend,
        seasonal,
        residual,
        period,
    })
}

/// `trend_forecast[k] · pattern[(start_phase + k) mod p]`; residual is not reattached.
pub fn recompose(trend_forecast: &[f64], pattern: &[f64], start_phase: usize) -> Result<Vec<f64>, DecompError> {
    let p = pattern.len();
    if p == 0 {
        return Err(DecompError::ZeroPeriod);
    }
    if start_phase >= p {
        return Err(DecompError::BadPhase {
            phase: start_phase,
            period: p,
        });
    }
    Ok(trend_forecast
        .iter()
        .enumerate()
        .map(|(k, t)| t * pattern[(start_phase + k) % p])
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn constant_series() {
        let d = decompose_multiplicative(&[4.2; 40], 5, 7).unwrap();
        for k in 0..40 {
            assert!(rel_err(d.trend[k], 4.2) < 1e-14);
            assert!((d.seasonal[k] - 1.0).abs() < 1e-14);
            assert!((d.residual[k] - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn planted_seasonality_recovered() {
        let raw = [0.9, 1.0, 1.1];
        let g = (raw.iter().map(|v: &f64| v.ln()).sum::<f64>() / 3.0).exp();
        let s: Vec<f64> = raw.iter().map(|v| v / g).collect();
        let series: Vec<f64> = (0..300).map(|t| (1.0 + 0.001 * t as f64) * s[t % 3]).collect();
        let d = decompose_multiplicative(&series, 3, 3).unwrap();
        for p in 0..3 {
            assert!(
                rel_err(d.pattern()[p], s[p]) < 0.01,
                "phase {p}: {} vs {}",
                d.pattern()[p],
                s[p]
            );
        }
        let gm = (d.pattern().iter().map(|v| v.ln()).sum::<f64>() / 3.0).exp();
        assert!((gm - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fully_observed_matches_plain() {
        let series: Vec<f64> = (0..120)
            .map(|t| 5.0 + (t as f64 * 0.7).sin() + 0.01 * t as f64)
            .collect();
        let a = decompose_multiplicative(&series, 6, 7).unwrap();
        let b = decompose_observed(&series, &[true; 120], 6, 7, 0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn observed_subset_recovers_planted_pattern() {
        // Two-level square wave over period 8, as in a stepped current profile.
        let s: Vec<f64> = (0..8).map(|k| if k < 4 { 0.9 } else { 1.1 }).collect();
        let g = (s.iter().map(|v| v.ln()).sum::<f64>() / 8.0).exp();
        let series: Vec<f64> = (0..400).map(|t| (10.0 + 0.01 * t as f64) * s[t % 8] / g).collect();
        let mut r = crate::rng::rng_from_seed(3);
        let perm = crate::rng::permutation(400, &mut r);
        let mut observed = vec![false; 400];
        perm[..320].iter().for_each(|&k| observed[k] = true);
        let mut hidden = series.clone();
        (0..400).filter(|&k| !observed[k]).for_each(|k| hidden[k] = -1.0);
        let d = decompose_observed(&hidden, &observed, 8, 9, 2).unwrap();
        for p in 0..8 {
            assert!(rel_err(d.pattern()[p], s[p] / g) < 1e-3, "phase {p}");
        }
        // Uneven sampling inside a window shifts its centre by a few steps at most.
        for k in 8..392 {
            assert!(rel_err(d.trend[k], 10.0 + 0.01 * k as f64) < 5e-3, "trend at {k}");
        }
        assert!(d.residual.iter().zip(&observed).all(|(r, &o)| r.is_nan() != o));
    }

    #[test]
    fn observed_errors() {
        assert_eq!(
            decompose_observed(&[1.0; 10], &[true; 9], 2, 3, 0),
            Err(DecompError::MaskLength { mask: 9, len: 10 })
        );
        let mut mask = [true; 12];
        mask[3..8].iter_mut().for_each(|m| *m = false);
        assert_eq!(
            decompose_observed(&[1.0; 12], &mask, 2, 3, 0),
            Err(DecompError::EmptyWindow { index: 4 })
        );
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            decompose_multiplicative(&[1.0, 2.0, 0.0, 1.0, 2.0, 3.0], 3, 3),
            Err(DecompError::NonPositive { index: 2, .. })
        ));
        assert!(matches!(
            decompose_multiplicative(&[1.0; 5], 3, 3),
            Err(DecompError::TooShort { .. })
        ));
        assert!(decompose_multiplicative(&[1.0; 10], 3, 4).is_err());
        assert!(decompose_multiplicative(&[1.0; 10], 3, 1).is_err());
    }

    #[test]
    fn recompose_examples() {
        assert_eq!(recompose(&[2.0, 2.0, 2.0], &[0.5, 1.5], 0).unwrap(), [1.0, 3.0, 1.0]);
        assert_eq!(recompose(&[2.0, 2.0], &[0.5, 1.5], 1).unwrap(), [3.0, 1.0]);
        assert_eq!(recompose(&[1.0, 7.0], &[1.0; 4], 2).unwrap(), [1.0, 7.0]);
        assert!(recompose(&[1.0], &[1.0, 1.0], 2).is_err());
        assert!(recompose(&[1.0], &[], 0).is_err());
    }

    #[test]
    fn csv_columns() {
        let series: Vec<f64> = (0..8).map(|k| 1.0 + k as f64).collect();
        let d = decompose_multiplicative(&series, 2, 3).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&series, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t_index,observed,trend,seasonal,residual\n0,"));
        assert_eq!(text.lines().count(), 9);
    }

    fn positive_series() -> impl Strategy<Value = (Vec<f64>, usize)> {
        (1usize..6).prop_flat_map(|p| (proptest::collection::vec(0.1f64..10.0, 2 * p..60), Just(p)))
    }

    proptest! {
        #[test]
        fn reconstruction_identity((series, p) in positive_series()) {
            let w = if p % 2 == 1 { p } else { p + 1 };
            prop_assume!(w <= series.len());
            let d = decompose_multiplicative(&series, p, w).unwrap();
            let back = recompose(&d.trend, d.pattern(), 0).unwrap();
            for k in 0..series.len() {
                prop_assert!(rel_err(back[k] * d.residual[k], series[k]) < 1e-12);
            }
        }

        #[test]
        fn homogeneity((series, p) in positive_series(), c in 0.01f64..100.0) {
            let w = if p % 2 == 1 { p } else { p + 1 };
            prop_assume!(w <= series.len());
            let d = decompose_multiplicative(&series, p, w).unwrap();
            let scaled: Vec<f64> = series.iter().map(|v| v * c).collect();
            let e = decompose_multiplicative(&scaled, p, w).unwrap();
            for k in 0..series.len() {
                prop_assert!(rel_err(e.trend[k], c * d.trend[k]) < 1e-12);
                prop_assert!((e.seasonal[k] - d.seasonal[k]).abs() < 1e-12);
            }
        }

        #[test]
        fn rotation_by_full_period(pattern in proptest::collection::vec(0.5f64..2.0, 3..4), level in 0.5f64..5.0, reps in 3usize..8) {
            let p = pattern.len();
            let series: Vec<f64> = (0..p * reps).map(|k| level * pattern[k % p]).collect();
            let mut rotated = series[p..].to_vec();
            rotated.extend_from_slice(&series[..p]);
            let a = decompose_multiplicative(&series, p, p).unwrap();
            let b = decompose_multiplicative(&rotated, p, p).unwrap();
            for k in 0..p {
                prop_assert!((a.pattern()[k] - b.pattern()[k]).abs() < 1e-12);
            }
        }
    }
}
