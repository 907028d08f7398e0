//! The three experiment levels as seeded, re-runnable pipelines.
//!
//! Every random choice descends from the master seed of the level config via
//! [`rng::derive_seed`] with paths of the form `[level stream, round]`. Groups
//! inside one report share those per-round seeds, so comparisons are paired
//! and adding a group never shifts the numbers of another.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{fmt_full, Dataset, DatasetError, DatasetSource};
use crate::decomp::{decompose_observed, DecompError};
use crate::eval::{nrmse, r_squared, summarize_rounds, MetricConfig, MetricError, RoundStats};
use crate::learners::{train, LearnerError, ModelSpec};
use crate::matrix::Matrix;
use crate::physics::{
    compose_cell_voltage, generate_synthetic_dataset, noiseless_activation, PhysicsError, VoltageBreakdown,
};
use crate::pinn::{train_baseline, train_pinn, KnowledgeVariant, PinnConfig, PinnError};
use crate::rng;
use crate::symreg::{
    equivalent, eval_expression, pareto_json, search, write_search_log, Expression, Grammar, GrammarError, ParetoEntry,
    SearchConfig, SearchError, SearchLogRow, Strategy, SymbolicData,
};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("split: {0}")]
    Split(String),
    #[error("invalid experiment config: {0}")]
    Config(String),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error(transparent)]
    Decomp(#[from] DecompError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Pinn(#[from] PinnError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SplitMode {
    RandomShuffle { seed: u64 },
    Sequential,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub mode: SplitMode,
    pub train_fraction: f64,
}

impl SplitSpec {
    pub fn sequential(train_fraction: f64) -> SplitSpec {
        SplitSpec {
            mode: SplitMode::Sequential,
            train_fraction,
        }
    }

    pub fn shuffled(seed: u64, train_fraction: f64) -> SplitSpec {
        SplitSpec {
            mode: SplitMode::RandomShuffle { seed },
            train_fraction,
        }
    }

    /// Row indices of the two sides. The first `⌈fraction · n⌉` positions of
    /// the (possibly permuted) order train.
    pub fn indices(&self, n: usize) -> Result<(Vec<usize>, Vec<usize>), BenchError> {
        let f = self.train_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(BenchError::Split(format!("train fraction must lie in (0, 1), got {f}")));
        }
        let cut = (f * n as f64).ceil() as usize;
        if cut == 0 || cut >= n {
            return Err(BenchError::Split(format!(
                "fraction {f} of {n} rows leaves one side empty"
            )));
        }
        let order = match self.mode {
            SplitMode::Sequential => (0..n).collect(),
            SplitMode::RandomShuffle { seed } => rng::permutation(n, &mut rng::rng_from_seed(seed)),
        };
        Ok((order[..cut].to_vec(), order[cut..].to_vec()))
    }
}

pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset), BenchError> {
    let (a, b) = spec.indices(ds.len())?;
    Ok((ds.select(&a), ds.select(&b)))
}

/// Constant voltage terms added to the activation loss to form the cell voltage feature (mV).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellOffsets {
    pub u_nernst: f64,
    pub eta_ohm: f64,
    pub eta_mtx: f64,
}

impl Default for CellOffsets {
    fn default() -> Self {
        CellOffsets {
            u_nernst: 1230.0,
            eta_ohm: 100.0,
            eta_mtx: 50.0,
        }
    }
}

/// Odd trend window covering at least one period.
pub fn default_trend_window(period: usize) -> usize {
    period + 1 - period % 2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Level1Config {
    pub period: usize,
    pub trend_window: usize,
    pub trend_refinements: usize,
    pub models: Vec<ModelSpec>,
    pub rounds: usize,
    pub train_fraction: f64,
    pub offsets: CellOffsets,
    pub metric: MetricConfig,
    pub seed: u64,
}

impl Default for Level1Config {
    fn default() -> Self {
        Level1Config {
            period: 56,
            trend_window: default_trend_window(56),
            trend_refinements: 2,
            models: vec![ModelSpec::svr(), ModelSpec::tree(), ModelSpec::mlp(7)],
            rounds: 5,
            train_fraction: 0.8,
            offsets: CellOffsets::default(),
            metric: MetricConfig::default(),
            seed: 7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Level2Config {
    pub alphas: Vec<f64>,
    pub variants: Vec<KnowledgeVariant>,
    pub rounds: usize,
    pub train_fraction: f64,
    /// Tail of the training rows held out for early stopping.
    pub val_fraction: f64,
    /// Template; alpha, variant and seed are set per group and round.
    pub pinn: PinnConfig,
    pub metric: MetricConfig,
    pub seed: u64,
}

impl Default for Level2Config {
    fn default() -> Self {
        Level2Config {
            alphas: vec![0.1, 0.5, 1.0, 2.0, 5.0],
            variants: vec![KnowledgeVariant::Full],
            rounds: 20,
            train_fraction: 0.8,
            val_fraction: 0.1,
            pinn: PinnConfig::default(),
            metric: MetricConfig::default(),
            seed: 7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Level3Config {
    pub grammar: Grammar,
    pub search: SearchConfig,
    pub runs: usize,
    pub metric: MetricConfig,
    pub seed: u64,
}

impl Default for Level3Config {
    fn default() -> Self {
        Level3Config {
            grammar: Grammar::tafel(),
            search: SearchConfig::default(),
            runs: 3,
            metric: MetricConfig::default(),
            seed: 7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "level", rename_all = "snake_case")]
pub enum ExperimentConfig {
    Level1(Level1Config),
    Level2(Level2Config),
    Level3(Level3Config),
}

impl ExperimentConfig {
    pub fn level(&self) -> u8 {
        match self {
            ExperimentConfig::Level1(_) => 1,
            ExperimentConfig::Level2(_) => 2,
            ExperimentConfig::Level3(_) => 3,
        }
    }

    pub fn metric(&self) -> &MetricConfig {
        match self {
            ExperimentConfig::Level1(c) => &c.metric,
            ExperimentConfig::Level2(c) => &c.metric,
            ExperimentConfig::Level3(c) => &c.metric,
        }
    }

    pub fn run(&self, data: &Dataset) -> Result<ExperimentReport, BenchError> {
        match self {
            ExperimentConfig::Level1(c) => run_level1(data, c),
            ExperimentConfig::Level2(c) => run_level2(data, c),
            ExperimentConfig::Level3(c) => run_level3(data, c),
        }
    }
}

/// Where the data came from, plus a fingerprint of its CSV form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataEcho {
    pub rows: usize,
    pub source: DatasetSource,
    pub fingerprint: String,
}

/// 64-bit FNV-1a.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

impl DataEcho {
    pub fn of(ds: &Dataset) -> Result<DataEcho, BenchError> {
        let mut buf = Vec::new();
        ds.write_csv(&mut buf)?;
        Ok(DataEcho {
            rows: ds.len(),
            source: ds.source.clone(),
            fingerprint: format!("{:016x}", fnv1a(&buf)),
        })
    }

    /// Regenerates synthetic data; `None` for external data or on a fingerprint mismatch.
    pub fn regenerate(&self) -> Option<Dataset> {
        let DatasetSource::Synthetic(cfg) = &self.source else {
            return None;
        };
        let ds = generate_synthetic_dataset(cfg).ok()?;
        (DataEcho::of(&ds).ok()? == *self).then_some(ds)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub group: String,
    pub model: String,
    pub arm: Option<String>,
    pub variant: Option<KnowledgeVariant>,
    pub alpha: Option<f64>,
    pub round: usize,
    pub seed: u64,
    pub nrmse: Option<f64>,
    pub r2: Option<f64>,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub group: String,
    pub nrmse: RoundStats,
    pub r2: RoundStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Level3Run {
    pub run: usize,
    pub seed: u64,
    pub best: Option<ParetoEntry>,
    pub best_infix: Option<String>,
    pub recovered: bool,
    pub pareto: Vec<ParetoEntry>,
    pub log: Vec<SearchLogRow>,
    pub distinct_expressions: usize,
    pub mask_exhausted: usize,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub data: DataEcho,
    pub nrmse_label: String,
    pub rows: Vec<ResultRow>,
    pub groups: Vec<GroupSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub level3_runs: Vec<Level3Run>,
    pub created_unix_s: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DirectionCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Csv,
    Both,
}

fn now_unix() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), fmt_full)
}

impl ExperimentReport {
    fn assemble(
        config: ExperimentConfig,
        data: &Dataset,
        rows: Vec<ResultRow>,
        level3_runs: Vec<Level3Run>,
    ) -> Result<Self, BenchError> {
        let mut order: Vec<String> = Vec::new();
        for r in &rows {
            if !order.contains(&r.group) {
                order.push(r.group.clone());
            }
        }
        let groups = order
            .into_iter()
            .filter_map(|g| {
                let scored: Vec<&ResultRow> = rows.iter().filter(|r| r.group == g && r.nrmse.is_some()).collect();
                if scored.is_empty() {
                    return None;
                }
                let n: Vec<f64> = scored.iter().filter_map(|r| r.nrmse).collect();
                let r2: Vec<f64> = scored.iter().filter_map(|r| r.r2).collect();
                Some(GroupSummary {
                    group: g,
                    nrmse: summarize_rounds(&n),
                    r2: summarize_rounds(&r2),
                })
            })
            .collect();
        Ok(ExperimentReport {
            nrmse_label: config.metric().nrmse_label(),
            config,
            data: DataEcho::of(data)?,
            rows,
            groups,
            level3_runs,
            created_unix_s: now_unix(),
        })
    }

    pub fn level(&self) -> u8 {
        self.config.level()
    }

    pub fn group(&self, name: &str) -> Option<&GroupSummary> {
        self.groups.iter().find(|g| g.group == name)
    }

    pub fn to_json(&self) -> Result<String, BenchError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// The JSON document without its timestamp; equal across reruns.
    pub fn body_json(&self) -> Result<String, BenchError> {
        let mut v = serde_json::to_value(self)?;
        if let Some(m) = v.as_object_mut() {
            m.remove("created_unix_s");
        }
        Ok(serde_json::to_string_pretty(&v)?)
    }

    pub fn from_json(text: &str) -> Result<ExperimentReport, BenchError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Re-executes the echoed configuration on `data`.
    pub fn rerun(&self, data: &Dataset) -> Result<ExperimentReport, BenchError> {
        let echo = DataEcho::of(data)?;
        if echo.fingerprint != self.data.fingerprint {
            return Err(BenchError::Config("data fingerprint differs from the report".into()));
        }
        self.config.run(data)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), BenchError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "level",
            "group",
            "model",
            "arm",
            "variant",
            "alpha",
            "round",
            "seed",
            &self.nrmse_label,
            "r2",
            "note",
        ])?;
        for r in &self.rows {
            w.write_record([
                self.level().to_string(),
                r.group.clone(),
                r.model.clone(),
                r.arm.clone().unwrap_or_default(),
                r.variant.map_or(String::new(), |v| v.label().to_string()),
                r.alpha.map_or(String::new(), |a| a.to_string()),
                r.round.to_string(),
                r.seed.to_string(),
                opt(r.nrmse),
                opt(r.r2),
                r.note.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// `group,round,nrmse` for every scored row.
    pub fn write_violin_csv<W: Write>(&self, writer: W) -> Result<(), BenchError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["group", "round", "nrmse"])?;
        for r in self.rows.iter().filter(|r| r.nrmse.is_some()) {
            w.write_record([r.group.clone(), r.round.to_string(), opt(r.nrmse)])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes the report files into `dir` and returns their paths. Level-3
    /// Pareto fronts and search logs are written whatever the format.
    pub fn write_files(&self, dir: &Path, format: ReportFormat) -> Result<Vec<PathBuf>, BenchError> {
        let stem = format!("level{}", self.level());
        let mut out = Vec::new();
        let mut create = |name: String| -> Result<(File, PathBuf), BenchError> {
            let p = dir.join(name);
            out.push(p.clone());
            Ok((File::create(&p)?, p))
        };
        if format != ReportFormat::Csv {
            let (mut f, _) = create(format!("{stem}_report.json"))?;
            f.write_all(self.to_json()?.as_bytes())?;
            f.write_all(b"\n")?;
        }
        if format != ReportFormat::Json {
            self.write_csv(create(format!("{stem}_results.csv"))?.0)?;
            if self.level() == 2 {
                self.write_violin_csv(create(format!("{stem}_violin.csv"))?.0)?;
            }
        }
        if let ExperimentConfig::Level3(cfg) = &self.config {
            for run in &self.level3_runs {
                if format != ReportFormat::Csv {
                    let (mut f, _) = create(format!("{stem}_run{}_pareto.json", run.run))?;
                    f.write_all(pareto_json(&cfg.grammar, &run.pareto)?.as_bytes())?;
                    f.write_all(b"\n")?;
                }
                if format != ReportFormat::Json {
                    write_search_log(&run.log, create(format!("{stem}_run{}_search_log.csv", run.run))?.0)?;
                }
            }
        }
        Ok(out)
    }

    /// Direction-of-effect checks for the level; each compares group medians.
    pub fn direction_checks(&self) -> Vec<DirectionCheck> {
        let mut out = Vec::new();
        let mut cmp = |name: String, better: Option<&GroupSummary>, worse: Option<&GroupSummary>, with_r2: bool| {
            let (passed, detail) = match (better, worse) {
                (Some(b), Some(w)) => {
                    let ok = b.nrmse.median < w.nrmse.median && (!with_r2 || b.r2.median > w.r2.median);
                    let detail = format!(
                        "median nrmse {:.4} vs {:.4}, median r2 {:.6} vs {:.6}",
                        b.nrmse.median, w.nrmse.median, b.r2.median, w.r2.median
                    );
                    (ok, detail)
                }
                _ => (false, "group missing from report".to_string()),
            };
            out.push(DirectionCheck { name, passed, detail });
        };
        match &self.config {
            ExperimentConfig::Level1(cfg) => {
                for m in &cfg.models {
                    let l = m.label();
                    cmp(
                        format!("{l}: knowledge arm beats direct arm"),
                        self.group(&format!("{l}/knowledge")),
                        self.group(&format!("{l}/direct")),
                        true,
                    );
                }
            }
            ExperimentConfig::Level2(cfg) => {
                let full = |a: f64| self.group(&level2_group(Some((KnowledgeVariant::Full, a))));
                for a in [0.5, 1.0] {
                    if cfg.alphas.contains(&a) && cfg.variants.contains(&KnowledgeVariant::Full) {
                        cmp(
                            format!("full α={a} beats baseline"),
                            full(a),
                            self.group(&level2_group(None)),
                            false,
                        );
                    }
                }
                if cfg.alphas.contains(&1.0) && cfg.variants.contains(&KnowledgeVariant::DropLog) {
                    cmp(
                        "drop_log α=1 is worse than full α=1".into(),
                        full(1.0),
                        self.group(&level2_group(Some((KnowledgeVariant::DropLog, 1.0)))),
                        false,
                    );
                }
            }
            ExperimentConfig::Level3(cfg) => {
                let hits = self.level3_runs.iter().filter(|r| r.recovered).count();
                out.push(DirectionCheck {
                    name: "generator formula recovered in at least two thirds of runs".into(),
                    passed: cfg.runs > 0 && 3 * hits >= 2 * cfg.runs,
                    detail: format!("{hits} of {} runs", cfg.runs),
                });
            }
        }
        out
    }
}

const L1_SPLIT_STREAM: u64 = 1;
const L1_MODEL_STREAM: u64 = 2;
const L2_ROUND_STREAM: u64 = 3;
const L3_RUN_STREAM: u64 = 4;

/// `(t, u_cell, i)` per row, with the cell voltage built from the noise-free
/// activation loss of each row's physical state plus constant offsets.
pub fn level1_features(ds: &Dataset, offsets: &CellOffsets) -> Result<Matrix, BenchError> {
    let clean = noiseless_activation(ds)?;
    let rows: Vec<[f64; 3]> = (0..ds.len())
        .map(|k| {
            let u = compose_cell_voltage(&VoltageBreakdown {
                u_nernst: offsets.u_nernst,
                eta_act: clean[k],
                eta_ohm: offsets.eta_ohm,
                eta_mtx: offsets.eta_mtx,
            });
            [ds.t_hours[k], u, ds.i[k]]
        })
        .collect();
    Ok(Matrix::from_rows(&rows))
}

fn gather(v: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&k| v[k]).collect()
}

pub fn run_level1(data: &Dataset, cfg: &Level1Config) -> Result<ExperimentReport, BenchError> {
    if cfg.rounds == 0 || cfg.models.is_empty() {
        return Err(BenchError::Config(
            "level 1 needs at least one round and one model".into(),
        ));
    }
    let x = level1_features(data, &cfg.offsets)?;
    let y = &data.eta_act;
    let n = data.len();
    let per_round: Vec<Result<Vec<ResultRow>, BenchError>> = (0..cfg.rounds)
        .into_par_iter()
        .map(|round| {
            let split_seed = rng::derive_seed(cfg.seed, &[L1_SPLIT_STREAM, round as u64]);
            let model_seed = rng::derive_seed(cfg.seed, &[L1_MODEL_STREAM, round as u64]);
            let (tr, te) = SplitSpec::shuffled(split_seed, cfg.train_fraction).indices(n)?;
            let mut observed = vec![false; n];
            tr.iter().for_each(|&k| observed[k] = true);
            let dec = decompose_observed(y, &observed, cfg.period, cfg.trend_window, cfg.trend_refinements)?;
            let (xtr, xte) = (x.select_rows(&tr), x.select_rows(&te));
            let (ytr, yte) = (gather(y, &tr), gather(y, &te));
            let trend_tr = gather(&dec.trend, &tr);
            let mut rows = Vec::new();
            for spec in &cfg.models {
                let spec = spec.with_seed(model_seed);
                let direct = train(&spec, &xtr, &ytr)?.predict(&xte)?;
                let trend_hat = train(&spec, &xtr, &trend_tr)?.predict(&xte)?;
                let knowledge: Vec<f64> = te.iter().zip(&trend_hat).map(|(&k, t)| t * dec.seasonal[k]).collect();
                for (arm, pred) in [("direct", direct), ("knowledge", knowledge)] {
                    rows.push(ResultRow {
                        group: format!("{}/{arm}", spec.label()),
                        model: spec.label().into(),
                        arm: Some(arm.into()),
                        variant: None,
                        alpha: None,
                        round,
                        seed: split_seed,
                        nrmse: Some(nrmse(&pred, &yte, &cfg.metric)?),
                        r2: Some(r_squared(&pred, &yte)?),
                        note: None,
                    });
                }
            }
            Ok(rows)
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_round {
        rows.extend(r?);
    }
    // Model-major order reads more naturally than round-major.
    rows.sort_by_key(|r| {
        (
            cfg.models.iter().position(|m| m.label() == r.model),
            r.arm.clone(),
            r.round,
        )
    });
    ExperimentReport::assemble(ExperimentConfig::Level1(cfg.clone()), data, rows, Vec::new())
}

/// Group label, e.g. `pinn/full/alpha=1` or `mlp` for the baseline.
pub fn level2_group(g: Option<(KnowledgeVariant, f64)>) -> String {
    match g {
        None => "mlp".into(),
        Some((v, a)) => format!("pinn/{}/alpha={a}", v.label()),
    }
}

pub fn run_level2(data: &Dataset, cfg: &Level2Config) -> Result<ExperimentReport, BenchError> {
    if cfg.rounds == 0 {
        return Err(BenchError::Config("level 2 needs at least one round".into()));
    }
    let mut groups: Vec<Option<(KnowledgeVariant, f64)>> = Vec::new();
    for &v in &cfg.variants {
        for &a in &cfg.alphas {
            groups.push(Some((v, a)));
        }
    }
    groups.push(None);
    let (tr, te) = SplitSpec::sequential(cfg.train_fraction).indices(data.len())?;
    let (train_ds, test_ds) = (data.select(&tr), data.select(&te));
    let x_test = Matrix::from_rows(&test_ds.tafel_features());
    let jobs: Vec<(Option<(KnowledgeVariant, f64)>, usize)> = groups
        .iter()
        .flat_map(|&g| (0..cfg.rounds).map(move |r| (g, r)))
        .collect();
    let rows: Vec<Result<ResultRow, BenchError>> = jobs
        .par_iter()
        .map(|&(g, round)| {
            let seed = rng::derive_seed(cfg.seed, &[L2_ROUND_STREAM, round as u64]);
            let mut pc = PinnConfig {
                seed,
                ..cfg.pinn.clone()
            };
            let pred = match g {
                Some((variant, alpha)) => {
                    pc.alpha = alpha;
                    pc.variant = variant;
                    train_pinn(&pc, &train_ds, cfg.val_fraction)?.predict(&x_test)?
                }
                None => train_baseline(&pc, &train_ds, cfg.val_fraction)?.predict(&x_test)?,
            };
            Ok(ResultRow {
                group: level2_group(g),
                model: if g.is_some() { "pinn" } else { "mlp" }.into(),
                arm: None,
                variant: g.map(|(v, _)| v),
                alpha: g.map(|(_, a)| a),
                round,
                seed,
                nrmse: Some(nrmse(&pred, &test_ds.eta_act, &cfg.metric)?),
                r2: Some(r_squared(&pred, &test_ds.eta_act)?),
                note: None,
            })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    ExperimentReport::assemble(ExperimentConfig::Level2(cfg.clone()), data, rows, Vec::new())
}

/// The generator's formula in this grammar, if its variables are present.
pub fn tafel_reference(grammar: &Grammar) -> Option<Expression> {
    Expression::parse_prefix(grammar, "mul A log10 div i i0").ok()
}

/// Algebraic equivalence to the generator formula with R² ≥ 0.999.
pub fn is_recovery(grammar: &Grammar, entry: &ParetoEntry, data: &SymbolicData) -> bool {
    tafel_reference(grammar)
        .is_some_and(|r| entry.r2 >= 0.999 && equivalent(&r, &[], &entry.expression, &entry.constants, data))
}

pub fn run_level3(data: &Dataset, cfg: &Level3Config) -> Result<ExperimentReport, BenchError> {
    cfg.grammar.validate()?;
    let sym = SymbolicData::from_dataset(&cfg.grammar, data)
        .ok_or_else(|| BenchError::Config("grammar variables must be drawn from b/A, i, i0 and t".into()))?;
    let label = match cfg.search.strategy {
        Strategy::ConstrainedRandom => "random",
        Strategy::PolicyGradient => "policy",
    };
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for run in 0..cfg.runs {
        let seed = rng::derive_seed(cfg.seed, &[L3_RUN_STREAM, run as u64]);
        let sc = SearchConfig {
            seed,
            ..cfg.search.clone()
        };
        let mut row = ResultRow {
            group: label.into(),
            model: "symreg".into(),
            arm: None,
            variant: None,
            alpha: None,
            round: run,
            seed,
            nrmse: None,
            r2: None,
            note: None,
        };
        match search(&cfg.grammar, &sc, &sym) {
            Ok(out) => {
                let recovered = is_recovery(&cfg.grammar, &out.best, &sym);
                if let Ok(pred) = eval_expression(&out.best.expression, &sym, &out.best.constants) {
                    row.nrmse = nrmse(&pred, &sym.target, &cfg.metric).ok();
                    row.r2 = r_squared(&pred, &sym.target).ok();
                }
                let infix = out.best.infix(&cfg.grammar);
                row.note = Some(format!("{}{infix}", if recovered { "recovered: " } else { "" }));
                runs.push(Level3Run {
                    run,
                    seed,
                    best_infix: Some(infix),
                    best: Some(out.best),
                    recovered,
                    pareto: out.pareto,
                    log: out.log,
                    distinct_expressions: out.distinct_expressions,
                    mask_exhausted: out.mask_exhausted,
                    error: None,
                });
            }
            Err(e @ SearchError::EmptySearch { .. }) => {
                row.note = Some(format!("EmptySearch: {e}"));
                runs.push(Level3Run {
                    run,
                    seed,
                    best: None,
                    best_infix: None,
                    recovered: false,
                    pareto: Vec::new(),
                    log: Vec::new(),
                    distinct_expressions: 0,
                    mask_exhausted: 0,
                    error: Some(e.to_string()),
                });
            }
            Err(e) => return Err(e.into()),
        }
        rows.push(row);
    }
    ExperimentReport::assemble(ExperimentConfig::Level3(cfg.clone()), data, rows, runs)
}
