//! The three regressors used for decomposition-augmented forecasting, behind
//! one train/predict contract.

pub mod mlp;
pub mod scaler;
pub mod svr;
pub mod tree;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;
pub use mlp::{MlpParams, Network};
pub use scaler::Scaler;
pub use svr::{Gamma, SvrModel, SvrNotConverged, SvrParams};
pub use tree::{TreeNode, TreeParams};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("non-finite value in training data")]
    NonFinite,
    #[error("need at least {need} rows, got {got}")]
    TooFewRows { need: usize, got: usize },
    #[error("{x} feature rows but {y} targets")]
    LengthMismatch { x: usize, y: usize },
    #[error("model expects {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Svr(#[from] SvrNotConverged),
    #[error("model json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported model format version {0}")]
    Version(u32),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    Mlp(MlpParams),
    Tree(TreeParams),
    Svr(SvrParams),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub scale_inputs: bool,
    pub scale_targets: bool,
}

impl ModelSpec {
    /// MLP(50, 50), ReLU, Adam at 1e-3, batch 32, 1000 epochs; scaled inputs and targets.
    pub fn mlp(seed: u64) -> ModelSpec {
        ModelSpec {
            kind: ModelKind::Mlp(MlpParams {
                seed,
                ..Default::default()
            }),
            scale_inputs: true,
            scale_targets: true,
        }
    }

    /// Fully grown CART on raw features and targets.
    pub fn tree() -> ModelSpec {
        ModelSpec {
            kind: ModelKind::Tree(TreeParams::default()),
            scale_inputs: false,
            scale_targets: false,
        }
    }

    /// C = 1, ε = 0.1, γ = "scale"; scaled inputs and targets.
    pub fn svr() -> ModelSpec {
        ModelSpec {
            kind: ModelKind::Svr(SvrParams::default()),
            scale_inputs: true,
            scale_targets: true,
        }
    }

    pub fn label(&self) -> &'static str {
        match self.kind {
            ModelKind::Mlp(_) => "mlp",
            ModelKind::Tree(_) => "tree",
            ModelKind::Svr(_) => "svr",
        }
    }

    /// Same spec with any seed replaced.
    pub fn with_seed(&self, seed: u64) -> ModelSpec {
        let mut s = self.clone();
        if let ModelKind::Mlp(p) = &mut s.kind {
            p.seed = seed;
        }
        s
    }

    pub fn validate(&self) -> Result<(), LearnerError> {
        let bad = |m: String| Err(LearnerError::InvalidSpec(m));
        match &self.kind {
            ModelKind::Mlp(p) => {
                if p.hidden.iter().any(|&w| w == 0) {
                    return bad("MLP layer widths must be positive".into());
                }
                if !(p.learning_rate > 0.0) || p.batch_size == 0 {
                    return bad("MLP needs a positive learning rate and batch size".into());
                }
            }
            ModelKind::Tree(p) => {
                if p.min_samples_split < 2 {
                    return bad("min_samples_split must be >= 2".into());
                }
            }
            ModelKind::Svr(p) => {
                if !(p.c > 0.0) || !(p.epsilon >= 0.0) {
                    return bad("SVR needs C > 0 and epsilon >= 0".into());
                }
                if let Gamma::Value(g) = p.gamma {
                    if !(g > 0.0) {
                        return bad("gamma must be positive".into());
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedParams {
    Mlp { network: Network },
    Tree { root: TreeNode },
    Svr { model: SvrModel },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub version: u32,
    pub spec: ModelSpec,
    pub n_features: usize,
    pub input_scaler: Option<Scaler>,
    pub target_scaler: Option<Scaler>,
    pub params: FittedParams,
    /// Per-epoch training loss (MLP only).
    pub training_log: Vec<f64>,
}

pub fn train(spec: &ModelSpec, x: &Matrix, y: &[f64]) -> Result<TrainedModel, LearnerError> {
    spec.validate()?;
    if x.nrows() != y.len() {
        return Err(LearnerError::LengthMismatch {
            x: x.nrows(),
            y: y.len(),
        });
    }
    let need = match spec.kind {
        ModelKind::Mlp(_) => 1,
        _ => 2,
    };
    if x.nrows() < need {
        return Err(LearnerError::TooFewRows { need, got: x.nrows() });
    }
    if !x.all_finite() || y.iter().any(|v| !v.is_finite()) {
        return Err(LearnerError::NonFinite);
    }
    let input_scaler = spec.scale_inputs.then(|| Scaler::fit(x));
    let target_scaler = spec.scale_targets.then(|| Scaler::fit_vector(y));
    let xs = input_scaler.as_ref().map_or_else(|| x.clone(), |s| s.apply(x));
    let ys = target_scaler.as_ref().map_or_else(|| y.to_vec(), |s| s.apply_vector(y));
    let mut training_log = Vec::new();
    let params = match &spec.kind {
        ModelKind::Mlp(p) => {
            let (network, log) = mlp::fit_mlp(p, &xs, &ys);
            training_log = log;
            FittedParams::Mlp { network }
        }
        ModelKind::Tree(p) => FittedParams::Tree {
            root: tree::fit_tree(p, &xs, &ys),
        },
        ModelKind::Svr(p) => FittedParams::Svr {
            model: svr::fit_svr(p, &xs, &ys)?,
        },
    };
    Ok(TrainedModel {
        version: MODEL_FORMAT_VERSION,
        spec: spec.clone(),
        n_features: x.ncols(),
        input_scaler,
        target_scaler,
        params,
        training_log,
    })
}

impl TrainedModel {
    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>, LearnerError> {
        if x.ncols() != self.n_features {
            return Err(LearnerError::DimensionMismatch {
                expected: self.n_features,
                got: x.ncols(),
            });
        }
        let xs = self.input_scaler.as_ref().map_or_else(|| x.clone(), |s| s.apply(x));
        let raw: Vec<f64> = match &self.params {
            FittedParams::Mlp { network } => network.predict(&xs),
            FittedParams::Tree { root } => (0..xs.nrows()).map(|k| root.predict_row(xs.row(k))).collect(),
            FittedParams::Svr { model } => (0..xs.nrows()).map(|k| model.predict_row(xs.row(k))).collect(),
        };
        Ok(match &self.target_scaler {
            Some(s) => s.invert_vector(&raw),
            None => raw,
        })
    }

    pub fn to_json(&self) -> Result<String, LearnerError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<TrainedModel, LearnerError> {
        let m: TrainedModel = serde_json::from_str(text)?;
        if m.version != MODEL_FORMAT_VERSION {
            return Err(LearnerError::Version(m.version));
        }
        Ok(m)
    }
}

pub fn predict(model: &TrainedModel, x: &Matrix) -> Result<Vec<f64>, LearnerError> {
    model.predict(x)
}
