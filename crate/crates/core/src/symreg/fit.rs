//! Vectorized expression evaluation and free-constant fitting.

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Expression, Grammar, Token};
use crate::dataset::Dataset;
use crate::rng;
use crate::units::OperatorKind;

/// Variable columns aligned with a grammar's variable list, plus the target.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolicData {
    pub columns: Vec<Vec<f64>>,
    pub target: Vec<f64>,
}

impl SymbolicData {
    /// Maps `A` to the Tafel slope column, `i` and `i0` to current densities
    /// and the activation loss to the target.
    pub fn from_dataset(grammar: &Grammar, ds: &Dataset) -> Option<SymbolicData> {
        let columns = grammar
            .variables
            .iter()
            .map(|v| match v.name.as_str() {
                "A" | "b" => Some(ds.b.clone()),
                "i" => Some(ds.i.clone()),
                "i0" => Some(ds.i0.clone()),
                "t" => Some(ds.t_hours.clone()),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()?;
        Some(SymbolicData {
            columns,
            target: ds.eta_act.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    pub fn select(&self, rows: &[usize]) -> SymbolicData {
        SymbolicData {
            columns: self
                .columns
                .iter()
                .map(|c| rows.iter().map(|&k| c[k]).collect())
                .collect(),
            target: rows.iter().map(|&k| self.target[k]).collect(),
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
#[error("{non_finite} of {rows} rows evaluate to a non-finite value (first at row {first})")]
pub struct DomainError {
    pub non_finite: usize,
    pub rows: usize,
    pub first: usize,
}

pub(super) fn apply_unary(op: OperatorKind, x: &mut [f64]) {
    let f: fn(f64) -> f64 = match op {
        OperatorKind::Inv => |v| 1.0 / v,
        OperatorKind::Square => |v| v * v,
        OperatorKind::Sqrt => f64::sqrt,
        OperatorKind::Exp => f64::exp,
        OperatorKind::Log10 => f64::log10,
        OperatorKind::Sin => f64::sin,
        OperatorKind::Cos => f64::cos,
        other => unreachable!("{other:?} is not unary"),
    };
    x.iter_mut().for_each(|v| *v = f(*v));
}

/// Pointwise value of `expr` on every row. Any non-finite row is an error.
///
/// Panics if `constants` does not hold one value per constant token.
pub fn eval_expression(expr: &Expression, data: &SymbolicData, constants: &[f64]) -> Result<Vec<f64>, DomainError> {
    assert_eq!(constants.len(), expr.n_constants(), "one value per constant token");
    let out = eval_raw(expr, &data.columns, data.len(), constants);
    let mut bad = out.iter().enumerate().filter(|(_, v)| !v.is_finite());
    match bad.next() {
        None => Ok(out),
        Some((first, _)) => Err(DomainError {
            non_finite: 1 + bad.count(),
            rows: out.len(),
            first,
        }),
    }
}

fn eval_raw(expr: &Expression, columns: &[Vec<f64>], n: usize, constants: &[f64]) -> Vec<f64> {
    let mut stack: Vec<Vec<f64>> = Vec::with_capacity(expr.tokens.len());
    for t in expr.tokens.iter().rev() {
        match *t {
            Token::Variable(k) => stack.push(columns[k].clone()),
            Token::Constant(k) => stack.push(vec![constants[k]; n]),
            Token::Operator(op) if op.arity() == 2 => {
                let mut a = stack.pop().unwrap();
                let b = stack.pop().unwrap();
                match op {
                    OperatorKind::Add => a.iter_mut().zip(&b).for_each(|(x, y)| *x += y),
                    OperatorKind::Sub => a.iter_mut().zip(&b).for_each(|(x, y)| *x -= y),
                    OperatorKind::Mul => a.iter_mut().zip(&b).for_each(|(x, y)| *x *= y),
                    _ => a.iter_mut().zip(&b).for_each(|(x, y)| *x /= y),
                }
                stack.push(a);
            }
            Token::Operator(op) => apply_unary(op, stack.last_mut().unwrap()),
        }
    }
    stack.pop().unwrap_or_default()
}

/// `1 / (1 + rmse / target_std)`; zero for a non-finite rmse.
pub fn reward(rmse: f64, target_std: f64) -> f64 {
    assert!(target_std > 0.0, "target std must be positive");
    if rmse.is_finite() {
        1.0 / (1.0 + rmse / target_std)
    } else {
        0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub restarts: usize,
    pub max_iter: usize,
    /// Rows used while fitting; the final rmse uses all rows.
    pub subsample: usize,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            restarts: 3,
            max_iter: 200,
            subsample: 200,
            seed: 7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub constants: Vec<f64>,
    pub rmse: f64,
    pub converged: bool,
}

fn sse(pred: &[f64], y: &[f64]) -> f64 {
    let s: f64 = pred.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum();
    if s.is_finite() {
        s
    } else {
        f64::INFINITY
    }
}

/// Solves the small dense system `a x = b` by Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let k = b.len();
    for col in 0..k {
        let piv = (col..k).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..k {
            let f = a[r][col] / a[col][col];
            for c in col..k {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; k];
    for r in (0..k).rev() {
        let s: f64 = (r + 1..k).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Damped Gauss–Newton from one start; returns `(params, sse, converged)`.
fn levenberg_marquardt(
    expr: &Expression,
    data: &SymbolicData,
    start: Vec<f64>,
    max_iter: usize,
) -> (Vec<f64>, f64, bool) {
    let n = data.len();
    let k = start.len();
    let eval = |p: &[f64]| eval_raw(expr, &data.columns, n, p);
    let mut p = start;
    let mut pred = eval(&p);
    let mut cost = sse(&pred, &data.target);
    if !cost.is_finite() {
        return (p, cost, false);
    }
    let mut lambda = 1e-3;
    for _ in 0..max_iter {
        if cost < 1e-28 {
            return (p, cost, true);
        }
        // Forward-difference Jacobian.
        let mut jac = vec![vec![0.0; n]; k];
        for j in 0..k {
            let h = 1e-7 * p[j].abs().max(1.0);
            let mut q = p.clone();
            q[j] += h;
            let shifted = eval(&q);
            for r in 0..n {
                jac[j][r] = (shifted[r] - pred[r]) / h;
            }
        }
        if jac.iter().flatten().any(|v| !v.is_finite()) {
            return (p, cost, false);
        }
        let resid: Vec<f64> = pred.iter().zip(&data.target).map(|(a, b)| a - b).collect();
        let jtj: Vec<Vec<f64>> = (0..k)
            .map(|a| (0..k).map(|b| (0..n).map(|r| jac[a][r] * jac[b][r]).sum()).collect())
            .collect();
        let jtr: Vec<f64> = (0..k)
            .map(|a| -(0..n).map(|r| jac[a][r] * resid[r]).sum::<f64>())
            .collect();
        let trace: f64 = (0..k).map(|a| jtj[a][a]).sum();
        let mut improved = false;
        while lambda < 1e16 {
            let mut m = jtj.clone();
            for a in 0..k {
                m[a][a] += lambda * jtj[a][a] + 1e-12 * trace.max(1e-300);
            }
            if let Some(step) = solve(m, jtr.clone()) {
                let q: Vec<f64> = p.iter().zip(&step).map(|(a, b)| a + b).collect();
                let qp = eval(&q);
                let qc = sse(&qp, &data.target);
                if qc < cost {
                    let rel = (cost - qc) / cost.max(1e-300);
                    let small_step = step.iter().zip(&q).all(|(s, v)| s.abs() <= 1e-10 * v.abs().max(1e-10));
                    p = q;
                    pred = qp;
                    cost = qc;
                    lambda = (lambda / 3.0).max(1e-12);
                    improved = true;
                    if rel < 1e-12 || small_step {
                        return (p, cost, true);
                    }
                    break;
                }
            }
            lambda *= 4.0;
        }
        if !improved {
            // No descent direction at any damping: a stationary point.
            return (p, cost, true);
        }
    }
    (p, cost, false)
}

fn expression_seed(seed: u64, expr: &Expression) -> u64 {
    let codes: Vec<u64> = expr
        .tokens
        .iter()
        .map(|t| match *t {
            Token::Variable(k) => 1000 + k as u64,
            Token::Constant(k) => 2000 + k as u64,
            Token::Operator(op) => 3000 + super::ALL_OPERATORS.iter().position(|o| *o == op).unwrap_or(99) as u64,
        })
        .collect();
    rng::derive_seed(seed, &codes)
}

/// Fits the free constants of `expr` by Levenberg–Marquardt on a seeded row
/// subsample, keeping the best of several starts, then scores on all rows.
pub fn fit_constants(expr: &Expression, data: &SymbolicData, opts: &FitOptions) -> Result<FitResult, DomainError> {
    let k = expr.n_constants();
    if k == 0 {
        let pred = eval_expression(expr, data, &[])?;
        let rmse = (sse(&pred, &data.target) / data.len() as f64).sqrt();
        return Ok(FitResult {
            constants: Vec::new(),
            rmse,
            converged: true,
        });
    }
    let mut rng = rng::rng_from_seed(expression_seed(opts.seed, expr));
    let fit_data = if data.len() > opts.subsample {
        let mut rows = rng::permutation(data.len(), &mut rng);
        rows.truncate(opts.subsample);
        rows.sort_unstable();
        data.select(&rows)
    } else {
        data.clone()
    };
    let mut best: Option<(Vec<f64>, f64, bool)> = None;
    for r in 0..opts.restarts.max(1) {
        let start: Vec<f64> = if r == 0 {
            vec![1.0; k]
        } else {
            (0..k)
                .map(|_| {
                    let mag = 10f64.powf(rng.gen_range(-1.0..1.0));
                    if rng.gen::<bool>() {
                        mag
                    } else {
                        -mag
                    }
                })
                .collect()
        };
        let run = levenberg_marquardt(expr, &fit_data, start, opts.max_iter);
        if best.as_ref().map_or(true, |b| run.1 < b.1) {
            best = Some(run);
        }
    }
    let (constants, _, converged) = best.expect("at least one start");
    let pred = eval_expression(expr, data, &constants)?;
    let rmse = (sse(&pred, &data.target) / data.len() as f64).sqrt();
    Ok(FitResult {
        constants,
        rmse,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{generate_synthetic_dataset, SyntheticConfig};

    fn tafel_data(noise: f64) -> (Grammar, SymbolicData) {
        let g = Grammar::tafel();
        let ds = generate_synthetic_dataset(&SyntheticConfig {
            noise_std_mv: noise,
            ..Default::default()
        })
        .unwrap();
        let d = SymbolicData::from_dataset(&g, &ds).unwrap();
        (g, d)
    }

    #[test]
    fn evaluation_examples() {
        let g = Grammar::tafel();
        let d = SymbolicData {
            columns: vec![vec![50.0], vec![2.0], vec![1e-7]],
            target: vec![0.0],
        };
        let e = Expression::parse_prefix(&g, "i").unwrap();
        assert_eq!(eval_expression(&e, &d, &[]).unwrap(), vec![2.0]);
        let d = SymbolicData {
            columns: vec![vec![50.0], vec![1.0], vec![1e-7]],
            target: vec![0.0],
        };
        let e = Expression::parse_prefix(&g, "mul A log10 div i i0").unwrap();
        let v = eval_expression(&e, &d, &[]).unwrap()[0];
        assert!((v - 350.0).abs() < 1e-12, "{v}");
        let e = Expression::parse_prefix(&g, "log10 sub i i").unwrap();
        let err = eval_expression(&e, &d, &[]).unwrap_err();
        assert_eq!(err.non_finite, 1);
        let e = Expression::parse_prefix(&g, "sub A mul c c").unwrap();
        assert_eq!(eval_expression(&e, &d, &[2.0, 3.0]).unwrap(), vec![44.0]);
    }

    #[test]
    fn reward_examples() {
        assert_eq!(reward(0.0, 3.0), 1.0);
        assert_eq!(reward(3.0, 3.0), 0.5);
        assert_eq!(reward(f64::NAN, 3.0), 0.0);
        let mut last = 2.0;
        for k in 0..100 {
            let r = reward(k as f64 * 0.37, 2.0);
            assert!(r < last);
            last = r;
        }
    }

    #[test]
    fn fits_single_scale_constant() {
        let g = Grammar::tafel();
        let ds = generate_synthetic_dataset(&SyntheticConfig {
            noise_std_mv: 0.0,
            b_poly: crate::physics::Poly5::new([50.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
            ..Default::default()
        })
        .unwrap();
        let d = SymbolicData::from_dataset(&g, &ds).unwrap();
        let e = Expression::parse_prefix(&g, "mul c log10 div i i0").unwrap();
        let fit = fit_constants(&e, &d, &FitOptions::default()).unwrap();
        assert!((fit.constants[0] - 50.0).abs() < 0.1, "{:?}", fit.constants);
        assert!(fit.rmse < 1e-6);
        assert!(fit.converged);
    }

    #[test]
    fn no_constants_passthrough() {
        let (g, d) = tafel_data(1.0);
        let e = Expression::parse_prefix(&g, "mul A log10 div i i0").unwrap();
        let fit = fit_constants(&e, &d, &FitOptions::default()).unwrap();
        assert!(fit.constants.is_empty());
        let pred = eval_expression(&e, &d, &[]).unwrap();
        assert_eq!(fit.rmse, crate::eval::rmse(&pred, &d.target).unwrap());
    }

    #[test]
    fn unidentifiable_sum_of_constants() {
        let g = Grammar {
            variables: vec![super::super::Variable {
                name: "x".into(),
                unit: crate::units::UnitVector::DIMENSIONLESS,
            }],
            ..Grammar::tafel()
        };
        let d = SymbolicData {
            columns: vec![(0..50).map(|k| k as f64).collect()],
            target: vec![7.0; 50],
        };
        let e = Expression::parse_prefix(&g, "add c c").unwrap();
        let fit = fit_constants(&e, &d, &FitOptions::default()).unwrap();
        assert!(
            (fit.constants[0] + fit.constants[1] - 7.0).abs() < 1e-6,
            "{:?}",
            fit.constants
        );
    }

    #[test]
    fn fitting_is_deterministic() {
        let (g, d) = tafel_data(1.0);
        let e = Expression::parse_prefix(&g, "add mul c A mul A log10 mul c div i i0").unwrap();
        let opts = FitOptions::default();
        assert_eq!(
            fit_constants(&e, &d, &opts).unwrap(),
            fit_constants(&e, &d, &opts).unwrap()
        );
    }
}
