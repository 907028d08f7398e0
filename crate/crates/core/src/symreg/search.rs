//! Batched expression search with Pareto bookkeeping.

use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::fit::{fit_constants, reward, FitOptions, SymbolicData};
use super::policy::{LstmPolicy, PolicyTrainer, Trajectory};
use super::sampler::Sampler;
use super::{Expression, Grammar, GrammarError, Token};
use crate::dataset::fmt_full;
use crate::eval::population_std;
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    ConstrainedRandom,
    PolicyGradient,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub strategy: Strategy,
    pub batch_size: usize,
    /// Total expressions drawn, including draws that hit an empty mask.
    pub budget: usize,
    pub learning_rate: f64,
    pub recurrent_hidden: usize,
    pub recurrent_layers: usize,
    pub risk_quantile: f64,
    /// Relative draw weights for leaves, unary and binary operators (random strategy).
    pub arity_weights: [f64; 3],
    pub fit: FitOptions,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            strategy: Strategy::ConstrainedRandom,
            batch_size: 200,
            budget: 200_000,
            learning_rate: 0.0025,
            recurrent_hidden: 128,
            recurrent_layers: 1,
            risk_quantile: 0.05,
            arity_weights: [4.0, 1.0, 1.0],
            fit: FitOptions::default(),
            seed: 7,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SearchError {
    #[error("no valid expression found within a budget of {budget}")]
    EmptySearch { budget: usize },
    #[error("invalid search config: {0}")]
    InvalidConfig(String),
    #[error("dataset has no rows or a constant target")]
    BadData,
    #[error(transparent)]
    Grammar(#[from] GrammarError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParetoEntry {
    pub expression: Expression,
    pub complexity: usize,
    pub rmse: f64,
    pub r2: f64,
    pub constants: Vec<f64>,
}

impl ParetoEntry {
    pub fn infix(&self, grammar: &Grammar) -> String {
        self.expression.infix(grammar, Some(&self.constants))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchLogRow {
    pub batch: usize,
    pub best_reward: f64,
    pub best_r2: f64,
    pub expressions_sampled: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    /// Sorted by complexity; rmse strictly decreasing.
    pub pareto: Vec<ParetoEntry>,
    pub best: ParetoEntry,
    pub log: Vec<SearchLogRow>,
    pub mask_exhausted: usize,
    pub distinct_expressions: usize,
}

#[derive(Clone)]
struct Scored {
    constants: Vec<f64>,
    rmse: f64,
}

/// Non-dominated entries: lowest rmse per complexity, kept only if it beats every simpler one.
fn pareto_front(by_complexity: &HashMap<usize, ParetoEntry>) -> Vec<ParetoEntry> {
    let mut keys: Vec<usize> = by_complexity.keys().copied().collect();
    keys.sort_unstable();
    let mut out: Vec<ParetoEntry> = Vec::new();
    for k in keys {
        let e = &by_complexity[&k];
        if out.last().map_or(true, |last| e.rmse < last.rmse) {
            out.push(e.clone());
        }
    }
    out
}

fn validate(cfg: &SearchConfig) -> Result<(), SearchError> {
    let bad = |m: &str| Err(SearchError::InvalidConfig(m.into()));
    if cfg.batch_size == 0 {
        return bad("batch_size must be positive");
    }
    if cfg.budget > 0 && cfg.budget < cfg.batch_size {
        return bad("budget must be at least batch_size");
    }
    if !cfg.arity_weights.iter().all(|w| w.is_finite() && *w > 0.0) {
        return bad("arity weights must be positive");
    }
    if cfg.strategy == Strategy::PolicyGradient {
        if cfg.recurrent_layers != 1 {
            return bad("only single-layer recurrent policies are supported");
        }
        if !(cfg.risk_quantile > 0.0 && cfg.risk_quantile < 1.0) {
            return bad("risk_quantile must lie in (0, 1)");
        }
        if cfg.recurrent_hidden == 0 || !(cfg.learning_rate > 0.0) {
            return bad("policy needs a positive width and learning rate");
        }
    }
    Ok(())
}

const SAMPLE_STREAM: u64 = 1;
const POLICY_STREAM: u64 = 2;
const FIT_STREAM: u64 = 3;

pub fn search(grammar: &Grammar, cfg: &SearchConfig, data: &SymbolicData) -> Result<SearchOutcome, SearchError> {
    validate(cfg)?;
    if data.is_empty() || data.columns.len() != grammar.variables.len() {
        return Err(SearchError::BadData);
    }
    let target_std = population_std(&data.target);
    if !(target_std > 0.0) {
        return Err(SearchError::BadData);
    }
    let target_var = target_std * target_std;
    if cfg.budget == 0 {
        return Err(SearchError::EmptySearch { budget: 0 });
    }
    let mut sampler = Sampler::new(grammar)?;
    let fit_opts = FitOptions {
        seed: rng::derive_seed(cfg.seed, &[FIT_STREAM]),
        ..cfg.fit.clone()
    };
    let mut sample_rng = rng::derive_rng(cfg.seed, &[SAMPLE_STREAM]);
    let weights: Vec<f64> = sampler
        .vocab()
        .iter()
        .map(|t| match t {
            Token::Operator(op) => cfg.arity_weights[op.arity()],
            _ => cfg.arity_weights[0],
        })
        .collect();
    let mut trainer = (cfg.strategy == Strategy::PolicyGradient).then(|| {
        let mut init = rng::derive_rng(cfg.seed, &[POLICY_STREAM]);
        let policy = LstmPolicy::new(sampler.vocab().len(), cfg.recurrent_hidden, &mut init);
        PolicyTrainer::new(policy, cfg.learning_rate, cfg.risk_quantile)
    });

    let tie = 1e-9 * target_std;
    let mut memo: HashMap<Expression, Option<Scored>> = HashMap::new();
    let mut by_complexity: HashMap<usize, ParetoEntry> = HashMap::new();
    let mut best: Option<ParetoEntry> = None;
    let mut log = Vec::new();
    let mut sampled = 0;
    let mut exhausted = 0;
    let mut batch_no = 0;
    while sampled < cfg.budget {
        let n = cfg.batch_size.min(cfg.budget - sampled);
        let mut exprs: Vec<Option<Expression>> = Vec::with_capacity(n);
        let mut trajectories: Vec<Option<Trajectory>> = Vec::new();
        for _ in 0..n {
            let drawn = match &trainer {
                None => sampler.sample(&mut sample_rng, Some(&weights)).ok(),
                Some(t) => match t.policy.sample(&mut sampler, &mut sample_rng) {
                    Ok(traj) => {
                        let e = traj.expression.clone();
                        trajectories.push(Some(traj));
                        Some(e)
                    }
                    Err(_) => {
                        trajectories.push(None);
                        None
                    }
                },
            };
            if drawn.is_none() {
                exhausted += 1;
            }
            exprs.push(drawn);
        }
        sampled += n;

        let mut fresh: Vec<Expression> = exprs
            .iter()
            .flatten()
            .filter(|e| !memo.contains_key(*e))
            .cloned()
            .collect();
        fresh.sort_by(|a, b| a.tokens.cmp(&b.tokens));
        fresh.dedup();
        let scored: Vec<Option<Scored>> = fresh
            .par_iter()
            .map(|e| {
                fit_constants(e, data, &fit_opts)
                    .ok()
                    .filter(|f| f.rmse.is_finite())
                    .map(|f| Scored {
                        constants: f.constants,
                        rmse: f.rmse,
                    })
            })
            .collect();
        for (e, s) in fresh.into_iter().zip(scored) {
            if let Some(s) = &s {
                let entry = ParetoEntry {
                    complexity: e.complexity(),
                    rmse: s.rmse,
                    r2: 1.0 - s.rmse * s.rmse / target_var,
                    constants: s.constants.clone(),
                    expression: e.clone(),
                };
                let slot = by_complexity.entry(entry.complexity).or_insert_with(|| entry.clone());
                if entry.rmse < slot.rmse {
                    *slot = entry.clone();
                }
                let better = match &best {
                    None => true,
                    Some(b) => {
                        entry.rmse < b.rmse - tie
                            || ((entry.rmse - b.rmse).abs() <= tie && entry.complexity < b.complexity)
                    }
                };
                if better {
                    best = Some(entry);
                }
            }
            memo.insert(e, s);
        }

        if let Some(t) = trainer.as_mut() {
            let batch: Vec<(Trajectory, f64)> = trajectories
                .into_iter()
                .flatten()
                .map(|traj| {
                    let r = memo
                        .get(&traj.expression)
                        .cloned()
                        .flatten()
                        .map_or(0.0, |s| reward(s.rmse, target_std));
                    (traj, r)
                })
                .collect();
            t.update(&batch);
        }

        log.push(SearchLogRow {
            batch: batch_no,
            best_reward: best.as_ref().map_or(0.0, |b| reward(b.rmse, target_std)),
            best_r2: best.as_ref().map_or(f64::NAN, |b| b.r2),
            expressions_sampled: sampled,
        });
        batch_no += 1;
    }
    let Some(best) = best else {
        return Err(SearchError::EmptySearch { budget: cfg.budget });
    };
    Ok(SearchOutcome {
        pareto: pareto_front(&by_complexity),
        best,
        log,
        mask_exhausted: exhausted,
        distinct_expressions: memo.len(),
    })
}

#[derive(Serialize)]
struct ConstantJson {
    index: usize,
    value: f64,
    unit: crate::units::UnitVector,
}

#[derive(Serialize)]
struct EntryJson {
    expr_infix: String,
    expr_prefix: String,
    complexity: usize,
    rmse: f64,
    r2: f64,
    constants: Vec<ConstantJson>,
}

pub fn pareto_json(grammar: &Grammar, front: &[ParetoEntry]) -> serde_json::Result<String> {
    let rows: Vec<EntryJson> = front
        .iter()
        .map(|e| EntryJson {
            expr_infix: e.infix(grammar),
            expr_prefix: e.expression.prefix_string(grammar),
            complexity: e.complexity,
            rmse: e.rmse,
            r2: e.r2,
            constants: e
                .constants
                .iter()
                .enumerate()
                .map(|(index, &value)| ConstantJson {
                    index,
                    value,
                    unit: crate::units::UnitVector::DIMENSIONLESS,
                })
                .collect(),
        })
        .collect();
    serde_json::to_string_pretty(&rows)
}

pub fn write_search_log<W: Write>(log: &[SearchLogRow], writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["batch", "best_reward", "best_r2", "expressions_sampled"])?;
    for r in log {
        w.write_record([
            r.batch.to_string(),
            fmt_full(r.best_reward),
            fmt_full(r.best_r2),
            r.expressions_sampled.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{generate_synthetic_dataset, SyntheticConfig};

    fn data(hours: u32) -> (Grammar, SymbolicData) {
        let g = Grammar::tafel();
        let ds = generate_synthetic_dataset(&SyntheticConfig {
            hours,
            noise_std_mv: 0.0,
            ..Default::default()
        })
        .unwrap();
        let d = SymbolicData::from_dataset(&g, &ds).unwrap();
        (g, d)
    }

    #[test]
    fn zero_budget_is_empty() {
        let (g, d) = data(100);
        let cfg = SearchConfig {
            budget: 0,
            ..Default::default()
        };
        assert_eq!(
            search(&g, &cfg, &d).unwrap_err(),
            SearchError::EmptySearch { budget: 0 }
        );
    }

    #[test]
    fn front_is_monotone_and_holds_best() {
        let (g, d) = data(300);
        let cfg = SearchConfig {
            budget: 2000,
            ..Default::default()
        };
        let out = search(&g, &cfg, &d).unwrap();
        for w in out.pareto.windows(2) {
            assert!(w[0].complexity < w[1].complexity);
            assert!(w[0].rmse > w[1].rmse);
        }
        let min = out.pareto.iter().map(|e| e.rmse).fold(f64::INFINITY, f64::min);
        assert!(out.best.rmse <= min + 1e-9 * population_std(&d.target));
        assert_eq!(out.log.len(), 10);
        assert_eq!(out.log.last().unwrap().expressions_sampled, 2000);
        for w in out.log.windows(2) {
            assert!(w[1].best_reward >= w[0].best_reward);
        }
    }

    #[test]
    fn random_search_is_deterministic() {
        let (g, d) = data(200);
        let cfg = SearchConfig {
            budget: 600,
            ..Default::default()
        };
        assert_eq!(search(&g, &cfg, &d).unwrap(), search(&g, &cfg, &d).unwrap());
    }

    #[test]
    fn policy_gradient_runs_and_logs() {
        let (g, d) = data(200);
        let cfg = SearchConfig {
            strategy: Strategy::PolicyGradient,
            budget: 400,
            recurrent_hidden: 16,
            ..Default::default()
        };
        let a = search(&g, &cfg, &d).unwrap();
        assert_eq!(a.log.len(), 2);
        assert_eq!(a, search(&g, &cfg, &d).unwrap());
    }

    #[test]
    fn config_checks() {
        let (g, d) = data(100);
        let cfg = SearchConfig {
            budget: 50,
            ..Default::default()
        };
        assert!(matches!(search(&g, &cfg, &d), Err(SearchError::InvalidConfig(_))));
        let cfg = SearchConfig {
            strategy: Strategy::PolicyGradient,
            recurrent_layers: 2,
            ..Default::default()
        };
        assert!(matches!(search(&g, &cfg, &d), Err(SearchError::InvalidConfig(_))));
    }
}
