//! Algebraic equivalence of expressions.
//!
//! Expressions built from variables, constants, `+ − × ÷`, `inv`, `square`,
//! `sqrt` of monomials and `log10` of monomials normalize to a ratio of
//! polynomials whose atoms are the variables (rational powers) and
//! `log10(variable)` (integer powers). Two such ratios `P1/Q1` and `P2/Q2` are
//! equal iff `P1·Q2 − P2·Q1` vanishes. Anything outside that class is not
//! decided symbolically and compares unequal. Unary operators applied to a
//! variable-free subtree are folded to a number first.

use std::collections::BTreeMap;

use rand::Rng as _;

use super::fit::{apply_unary, eval_expression, SymbolicData};
use super::{Expression, Token};
use crate::rng;
use crate::units::OperatorKind;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Mono {
    /// Variable exponents in quarters.
    var_q: Vec<i32>,
    /// Powers of `log10(variable)`.
    log_p: Vec<u32>,
}

type Poly = BTreeMap<Mono, f64>;

fn one(nv: usize) -> Mono {
    Mono {
        var_q: vec![0; nv],
        log_p: vec![0; nv],
    }
}

fn constant(nv: usize, c: f64) -> Poly {
    let mut p = Poly::new();
    if c != 0.0 {
        p.insert(one(nv), c);
    }
    p
}

fn add(a: &Poly, b: &Poly, sign: f64) -> Poly {
    let mut out = a.clone();
    for (m, c) in b {
        *out.entry(m.clone()).or_insert(0.0) += sign * c;
    }
    out.retain(|_, c| *c != 0.0);
    out
}

fn mul(a: &Poly, b: &Poly) -> Poly {
    let mut out = Poly::new();
    for (ma, ca) in a {
        for (mb, cb) in b {
            let m = Mono {
                var_q: ma.var_q.iter().zip(&mb.var_q).map(|(x, y)| x + y).collect(),
                log_p: ma.log_p.iter().zip(&mb.log_p).map(|(x, y)| x + y).collect(),
            };
            *out.entry(m).or_insert(0.0) += ca * cb;
        }
    }
    out.retain(|_, c| *c != 0.0);
    out
}

fn single(p: &Poly) -> Option<(&Mono, f64)> {
    (p.len() == 1).then(|| p.iter().next().map(|(m, c)| (m, *c))).flatten()
}

fn sqrt_mono(p: &Poly) -> Option<Poly> {
    let (m, c) = single(p)?;
    if c <= 0.0 || m.var_q.iter().any(|q| q % 2 != 0) || m.log_p.iter().any(|q| q % 2 != 0) {
        return None;
    }
    let h = Mono {
        var_q: m.var_q.iter().map(|q| q / 2).collect(),
        log_p: m.log_p.iter().map(|q| q / 2).collect(),
    };
    Some(Poly::from([(h, c.sqrt())]))
}

/// Value of a ratio that carries no variables.
fn as_constant(nv: usize, p: &Poly, q: &Poly) -> Option<f64> {
    let unit = one(nv);
    let value = |x: &Poly| match single(x) {
        Some((m, c)) if *m == unit => Some(c),
        _ => None,
    };
    if p.is_empty() {
        return Some(0.0);
    }
    Some(value(p)? / value(q)?)
}

/// `P/Q` normal form, or `None` outside the supported class.
fn normalize(expr: &Expression, nv: usize, constants: &[f64]) -> Option<(Poly, Poly)> {
    let mut stack: Vec<(Poly, Poly)> = Vec::new();
    for t in expr.tokens.iter().rev() {
        let item = match *t {
            Token::Variable(k) => {
                let mut m = one(nv);
                m.var_q[k] = 4;
                (Poly::from([(m, 1.0)]), constant(nv, 1.0))
            }
            Token::Constant(k) => (constant(nv, *constants.get(k)?), constant(nv, 1.0)),
            Token::Operator(op) if op.arity() == 2 => {
                let (p1, q1) = stack.pop()?;
                let (p2, q2) = stack.pop()?;
                match op {
                    OperatorKind::Add | OperatorKind::Sub => {
                        let sign = if op == OperatorKind::Add { 1.0 } else { -1.0 };
                        if q1 == q2 {
                            (add(&p1, &p2, sign), q1)
                        } else {
                            (add(&mul(&p1, &q2), &mul(&p2, &q1), sign), mul(&q1, &q2))
                        }
                    }
                    OperatorKind::Mul => (mul(&p1, &p2), mul(&q1, &q2)),
                    _ => (mul(&p1, &q2), mul(&q1, &p2)),
                }
            }
            Token::Operator(op) => {
                let (p, q) = stack.pop()?;
                if let Some(x) = as_constant(nv, &p, &q) {
                    let mut v = [x];
                    apply_unary(op, &mut v);
                    let v = v[0];
                    if !v.is_finite() {
                        return None;
                    }
                    stack.push((constant(nv, v), constant(nv, 1.0)));
                    continue;
                }
                match op {
                    OperatorKind::Inv => (q, p),
                    OperatorKind::Square => (mul(&p, &p), mul(&q, &q)),
                    OperatorKind::Sqrt => (sqrt_mono(&p)?, sqrt_mono(&q)?),
                    OperatorKind::Log10 => {
                        let (mp, cp) = single(&p)?;
                        let (mq, cq) = single(&q)?;
                        if mp.log_p.iter().chain(&mq.log_p).any(|&x| x != 0) || cp / cq <= 0.0 {
                            return None;
                        }
                        let mut out = constant(nv, (cp / cq).log10());
                        for k in 0..nv {
                            let e = (mp.var_q[k] - mq.var_q[k]) as f64 / 4.0;
                            if e != 0.0 {
                                let mut m = one(nv);
                                m.log_p[k] = 1;
                                out.insert(m, e);
                            }
                        }
                        (out, constant(nv, 1.0))
                    }
                    _ => return None,
                }
            }
        };
        stack.push(item);
    }
    let (p, q) = stack.pop()?;
    if q.is_empty() {
        return None;
    }
    Some((p, q))
}

/// `Some(true/false)` when both sides normalize, `None` otherwise.
pub fn symbolically_equivalent(
    nv: usize,
    a: &Expression,
    ca: &[f64],
    b: &Expression,
    cb: &[f64],
    rel_tol: f64,
) -> Option<bool> {
    let (p1, q1) = normalize(a, nv, ca)?;
    let (p2, q2) = normalize(b, nv, cb)?;
    let lhs = mul(&p1, &q2);
    let rhs = mul(&p2, &q1);
    let scale = lhs.values().chain(rhs.values()).fold(0.0f64, |m, c| m.max(c.abs()));
    let diff = add(&lhs, &rhs, -1.0);
    Some(diff.values().all(|c| c.abs() <= rel_tol * scale.max(f64::MIN_POSITIVE)))
}

/// Agreement on `points` rows drawn uniformly inside the per-column ranges of `data`.
pub fn numerically_equivalent(
    a: &Expression,
    ca: &[f64],
    b: &Expression,
    cb: &[f64],
    data: &SymbolicData,
    points: usize,
    rel_tol: f64,
    seed: u64,
) -> bool {
    let mut r = rng::rng_from_seed(seed);
    let columns: Vec<Vec<f64>> = data
        .columns
        .iter()
        .map(|c| {
            let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (0..points)
                .map(|_| if hi > lo { r.gen_range(lo..=hi) } else { lo })
                .collect()
        })
        .collect();
    let probe = SymbolicData {
        columns,
        target: vec![0.0; points],
    };
    match (eval_expression(a, &probe, ca), eval_expression(b, &probe, cb)) {
        (Ok(x), Ok(y)) => x
            .iter()
            .zip(&y)
            .all(|(u, v)| (u - v).abs() <= rel_tol * u.abs().max(v.abs()).max(1e-300)),
        _ => false,
    }
}

/// Symbolic normal forms agree and the two expressions match at 1,000 probe points within 1e-6 relative.
pub fn equivalent(a: &Expression, ca: &[f64], b: &Expression, cb: &[f64], data: &SymbolicData) -> bool {
    let nv = data.columns.len();
    symbolically_equivalent(nv, a, ca, b, cb, 1e-6) == Some(true)
        && numerically_equivalent(a, ca, b, cb, data, 1000, 1e-6, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{generate_synthetic_dataset, SyntheticConfig};
    use crate::symreg::Grammar;

    fn setup() -> (Grammar, SymbolicData) {
        let g = Grammar::tafel();
        let ds = generate_synthetic_dataset(&SyntheticConfig {
            noise_std_mv: 0.0,
            ..Default::default()
        })
        .unwrap();
        let d = SymbolicData::from_dataset(&g, &ds).unwrap();
        (g, d)
    }

    #[test]
    fn recognizes_rewritten_forms() {
        let (g, d) = setup();
        let target = Expression::parse_prefix(&g, "mul A log10 div i i0").unwrap();
        for (text, consts) in [
            ("mul log10 div i i0 A", vec![]),
            ("sub mul A log10 i mul A log10 i0", vec![]),
            ("mul A sub log10 i log10 i0", vec![]),
            ("div A inv log10 div i i0", vec![]),
            ("mul A mul c log10 square div i i0", vec![0.5]),
            ("mul A log10 inv div i0 i", vec![]),
            ("mul c mul A log10 div i i0", vec![1.0 + 1e-9]),
            ("div mul A log10 mul i i0 c", vec![1.0]),
        ] {
            let e = Expression::parse_prefix(&g, text).unwrap();
            let want = !text.starts_with("div mul A log10 mul");
            assert_eq!(equivalent(&target, &[], &e, &consts, &d), want, "{text}");
        }
    }

    #[test]
    fn rejects_near_misses() {
        let (g, d) = setup();
        let target = Expression::parse_prefix(&g, "mul A log10 div i i0").unwrap();
        for (text, consts) in [
            ("mul c log10 div i i0", vec![55.0]),
            ("mul A log10 i", vec![]),
            ("mul c mul A log10 div i i0", vec![1.01]),
            ("add A mul A log10 div i i0", vec![]),
        ] {
            let e = Expression::parse_prefix(&g, text).unwrap();
            assert!(!equivalent(&target, &[], &e, &consts, &d), "{text}");
        }
    }

    #[test]
    fn folds_variable_free_subtrees() {
        let (g, d) = setup();
        let target = Expression::parse_prefix(&g, "mul A log10 div i i0").unwrap();
        let e = Expression::parse_prefix(&g, "mul mul A log10 div i i0 exp sub div i i0 div i i0").unwrap();
        assert!(equivalent(&target, &[], &e, &[], &d));
        let e = Expression::parse_prefix(&g, "mul mul A log10 div i i0 sin c").unwrap();
        assert!(equivalent(&target, &[], &e, &[std::f64::consts::FRAC_PI_2], &d));
        assert!(!equivalent(&target, &[], &e, &[1.5], &d));
    }

    #[test]
    fn unsupported_operators_are_undecided() {
        let (g, _) = setup();
        let a = Expression::parse_prefix(&g, "mul A exp div i i0").unwrap();
        assert_eq!(symbolically_equivalent(3, &a, &[], &a, &[], 1e-6), None);
    }
}
