//! Tafel kinetics, cell-voltage composition and the synthetic activation-loss
//! generator.
//!
//! Canonical units: millivolts for every voltage term, A/cm² for current
//! densities, hours for time.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, DatasetSource};
use crate::rng;

#[derive(Debug, Error, PartialEq)]
pub enum PhysicsError {
    #[error("invalid Tafel state: {0}")]
    InvalidState(String),
    #[error("logarithm of non-positive ratio i/i0 = {0}")]
    LogDomain(f64),
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
}

/// Cell voltage split into its four loss terms (mV).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoltageBreakdown {
    pub u_nernst: f64,
    pub eta_act: f64,
    pub eta_ohm: f64,
    pub eta_mtx: f64,
}

pub fn compose_cell_voltage(v: &VoltageBreakdown) -> f64 {
    v.u_nernst + v.eta_act + v.eta_ohm + v.eta_mtx
}

/// Tafel slope `b` (mV/dec), current density `i` and exchange current
/// density `i0` (both A/cm²).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TafelState {
    b: f64,
    i: f64,
    i0: f64,
}

impl TafelState {
    pub fn new(b: f64, i: f64, i0: f64) -> Result<Self, PhysicsError> {
        for (name, v) in [("b", b), ("i", i), ("i0", i0)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(PhysicsError::InvalidState(format!(
                    "{name} must be finite and > 0, got {v}"
                )));
            }
        }
        Ok(TafelState { b, i, i0 })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn i(&self) -> f64 {
        self.i
    }

    pub fn i0(&self) -> f64 {
        self.i0
    }
}

/// `b · log10(i / i0)` in mV.
pub fn tafel_activation_loss(state: &TafelState) -> Result<f64, PhysicsError> {
    let ratio = state.i / state.i0;
    if !(ratio > 0.0) {
        return Err(PhysicsError::LogDomain(ratio));
    }
    Ok(state.b * ratio.log10())
}

/// Fifth-degree polynomial in time (hours), constant term first.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Poly5 {
    pub coeffs: [f64; 6],
}

impl Poly5 {
    pub fn new(coeffs: [f64; 6]) -> Self {
        Poly5 { coeffs }
    }

    /// Pads a shorter constant-first list with zeros.
    pub fn from_slice(coeffs: &[f64]) -> Result<Self, PhysicsError> {
        if coeffs.is_empty() || coeffs.len() > 6 {
            return Err(PhysicsError::InvalidConfig(format!(
                "polynomial needs 1..=6 coefficients, got {}",
                coeffs.len()
            )));
        }
        let mut c = [0.0; 6];
        c[..coeffs.len()].copy_from_slice(coeffs);
        Ok(Poly5 { coeffs: c })
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
    }
}

pub fn eval_poly5(p: &Poly5, t: f64) -> f64 {
    p.eval(t)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CurrentProfile {
    Constant {
        value: f64,
    },
    /// `low` for the first half of every `period_steps` block, `high` for the rest.
    StepCycle {
        low: f64,
        high: f64,
        period_steps: usize,
    },
}

impl CurrentProfile {
    pub fn at_step(&self, k: usize) -> f64 {
        match *self {
            CurrentProfile::Constant { value } => value,
            CurrentProfile::StepCycle {
                low,
                high,
                period_steps,
            } => {
                if k % period_steps < period_steps / 2 {
                    low
                } else {
                    high
                }
            }
        }
    }

    /// Seasonal period in steps, if the profile has one.
    pub fn period(&self) -> Option<usize> {
        match *self {
            CurrentProfile::Constant { .. } => None,
            CurrentProfile::StepCycle { period_steps, .. } => Some(period_steps),
        }
    }
}

pub const DEFAULT_B_POLY: [f64; 6] = [50.0, 3.5e-3, 0.0, 0.0, 0.0, 0.0];
pub const DEFAULT_I0_POLY: [f64; 6] = [1e-7, -1e-11, 0.0, 0.0, 0.0, 0.0];
pub const DEFAULT_PERIOD_STEPS: usize = 56;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub hours: u32,
    pub step_hours: f64,
    pub b_poly: Poly5,
    pub i0_poly: Poly5,
    pub current_profile: CurrentProfile,
    pub noise_std_mv: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            hours: 2800,
            step_hours: 1.0,
            b_poly: Poly5::new(DEFAULT_B_POLY),
            i0_poly: Poly5::new(DEFAULT_I0_POLY),
            current_profile: CurrentProfile::StepCycle {
                low: 0.5,
                high: 2.0,
                period_steps: DEFAULT_PERIOD_STEPS,
            },
            noise_std_mv: 1.0,
            seed: 7,
        }
    }
}

impl SyntheticConfig {
    pub fn rows(&self) -> usize {
        (self.hours as f64 / self.step_hours).floor() as usize
    }

    pub fn validate(&self) -> Result<(), PhysicsError> {
        let bad = |m: String| Err(PhysicsError::InvalidConfig(m));
        if self.hours == 0 {
            return bad("hours must be positive".into());
        }
        if !(self.step_hours.is_finite() && self.step_hours > 0.0) {
            return bad(format!("step_hours must be positive, got {}", self.step_hours));
        }
        if self.rows() == 0 {
            return bad("step_hours exceeds hours; no rows".into());
        }
        if !(self.noise_std_mv.is_finite() && self.noise_std_mv >= 0.0) {
            return bad(format!("noise_std_mv must be >= 0, got {}", self.noise_std_mv));
        }
        match self.current_profile {
            CurrentProfile::Constant { value } if !(value > 0.0 && value.is_finite()) => {
                return bad(format!("constant current must be > 0, got {value}"));
            }
            CurrentProfile::StepCycle {
                low,
                high,
                period_steps,
            } => {
                if !(low > 0.0 && high > 0.0 && low.is_finite() && high.is_finite()) {
                    return bad(format!("step currents must be > 0, got {low}, {high}"));
                }
                if period_steps < 2 {
                    return bad(format!("step period must be >= 2, got {period_steps}"));
                }
            }
            _ => {}
        }
        // Dense grid over [0, hours] plus every sampled time.
        let hours = self.hours as f64;
        let grid = (0..=4096).map(|k| hours * k as f64 / 4096.0);
        let samples = (0..self.rows()).map(|k| k as f64 * self.step_hours);
        for t in grid.chain(samples) {
            for (name, p) in [("b_poly", &self.b_poly), ("i0_poly", &self.i0_poly)] {
                let v = p.eval(t);
                if !(v.is_finite() && v > 0.0) {
                    return bad(format!("{name} evaluates to {v} at t={t} h; must stay positive"));
                }
            }
        }
        Ok(())
    }
}

const NOISE_STREAM: u64 = 1;

/// Noisy Tafel activation losses along polynomial parameter trajectories.
pub fn generate_synthetic_dataset(cfg: &SyntheticConfig) -> Result<Dataset, PhysicsError> {
    cfg.validate()?;
    let n = cfg.rows();
    let mut rng = rng::derive_rng(cfg.seed, &[NOISE_STREAM]);
    let mut ds = Dataset::with_capacity(n, DatasetSource::Synthetic(cfg.clone()));
    for k in 0..n {
        let t = k as f64 * cfg.step_hours;
        let b = cfg.b_poly.eval(t);
        let i0 = cfg.i0_poly.eval(t);
        let i = cfg.current_profile.at_step(k);
        let clean = tafel_activation_loss(&TafelState::new(b, i, i0)?)?;
        let eta = clean + cfg.noise_std_mv * rng::standard_normal(&mut rng);
        ds.push(t, i, b, i0, eta);
    }
    Ok(ds)
}

/// Noise-free activation loss for every row of a dataset.
pub fn noiseless_activation(ds: &Dataset) -> Result<Vec<f64>, PhysicsError> {
    (0..ds.len())
        .map(|k| tafel_activation_loss(&TafelState::new(ds.b[k], ds.i[k], ds.i0[k])?))
        .collect()
}
