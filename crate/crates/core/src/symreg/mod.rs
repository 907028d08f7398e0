//! Unit-constrained symbolic regression.
//!
//! Expressions are prefix token sequences over a small grammar of variables,
//! free constants and operators. The sampler only ever emits sequences that
//! complete to a dimensionally consistent tree with the target unit.

pub mod equiv;
pub mod fit;
pub mod policy;
pub mod sampler;
pub mod search;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::{propagate_units, OperatorKind, UnitError, UnitVector};

pub use equiv::{equivalent, numerically_equivalent, symbolically_equivalent};
pub use fit::{eval_expression, fit_constants, reward, DomainError, FitOptions, FitResult, SymbolicData};
pub use sampler::{MaskExhausted, Sampler, SamplerState};
pub use search::{
    pareto_json, search, write_search_log, ParetoEntry, SearchConfig, SearchError, SearchLogRow, SearchOutcome,
    Strategy,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Token {
    /// Index into the grammar's variable list.
    Variable(usize),
    /// Free constant, numbered in order of appearance.
    Constant(usize),
    Operator(OperatorKind),
}

impl Token {
    pub fn arity(self) -> usize {
        match self {
            Token::Operator(op) => op.arity(),
            _ => 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub unit: UnitVector,
}

/// Caps the combined number of occurrences of a group of operators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccurrenceCap {
    pub operators: Vec<OperatorKind>,
    pub max: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Priors {
    pub min_length: usize,
    /// Mask tokens that cannot complete to the target unit.
    pub unit_consistency: bool,
    /// No sin/cos anywhere below another sin/cos.
    pub no_nested_trig: bool,
    /// No inv as the direct child of inv.
    pub no_double_inv: bool,
    pub occurrence_caps: Vec<OccurrenceCap>,
}

impl Default for Priors {
    fn default() -> Self {
        use OperatorKind::*;
        Priors {
            min_length: 1,
            unit_consistency: true,
            no_nested_trig: true,
            no_double_inv: true,
            occurrence_caps: vec![
                OccurrenceCap {
                    operators: vec![Log10],
                    max: 2,
                },
                OccurrenceCap {
                    operators: vec![Exp],
                    max: 2,
                },
                OccurrenceCap {
                    operators: vec![Sin, Cos],
                    max: 2,
                },
            ],
        }
    }
}

impl Priors {
    /// Only the unit prior.
    pub fn units_only() -> Priors {
        Priors {
            no_nested_trig: false,
            no_double_inv: false,
            occurrence_caps: Vec::new(),
            ..Default::default()
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GrammarError {
    #[error("duplicate variable name {0:?}")]
    DuplicateVariable(String),
    #[error("grammar needs at least one variable")]
    NoVariables,
    #[error("max_length must be at least 1")]
    ZeroLength,
    #[error("min_length {min} exceeds max_length {max}")]
    LengthRange { min: usize, max: usize },
    #[error("operator {0:?} is not supported")]
    UnsupportedOperator(OperatorKind),
    #[error("no expression of at most {0} tokens reaches the target unit")]
    Unreachable(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grammar {
    pub variables: Vec<Variable>,
    pub target_unit: UnitVector,
    pub operators: Vec<OperatorKind>,
    pub max_length: usize,
    pub max_constants: usize,
    /// Intermediate units with any base exponent beyond this magnitude are
    /// treated as unreachable.
    pub max_unit_exponent: i32,
    pub priors: Priors,
}

pub const ALL_OPERATORS: [OperatorKind; 11] = [
    OperatorKind::Add,
    OperatorKind::Sub,
    OperatorKind::Mul,
    OperatorKind::Div,
    OperatorKind::Inv,
    OperatorKind::Square,
    OperatorKind::Sqrt,
    OperatorKind::Exp,
    OperatorKind::Log10,
    OperatorKind::Sin,
    OperatorKind::Cos,
];

impl Grammar {
    /// Variables `A` (Tafel slope, volt), `i` and `i0` (current densities),
    /// target in volt, all eleven operators, up to 35 tokens and 2 constants.
    pub fn tafel() -> Grammar {
        Grammar {
            variables: vec![
                Variable {
                    name: "A".into(),
                    unit: UnitVector::VOLT,
                },
                Variable {
                    name: "i".into(),
                    unit: UnitVector::CURRENT_DENSITY,
                },
                Variable {
                    name: "i0".into(),
                    unit: UnitVector::CURRENT_DENSITY,
                },
            ],
            target_unit: UnitVector::VOLT,
            operators: ALL_OPERATORS.to_vec(),
            max_length: 35,
            max_constants: 2,
            max_unit_exponent: 6,
            priors: Priors::default(),
        }
    }

    pub fn validate(&self) -> Result<(), GrammarError> {
        if self.variables.is_empty() {
            return Err(GrammarError::NoVariables);
        }
        for (k, v) in self.variables.iter().enumerate() {
            if self.variables[..k].iter().any(|w| w.name == v.name) {
                return Err(GrammarError::DuplicateVariable(v.name.clone()));
            }
        }
        if self.max_length == 0 {
            return Err(GrammarError::ZeroLength);
        }
        if self.priors.min_length > self.max_length {
            return Err(GrammarError::LengthRange {
                min: self.priors.min_length,
                max: self.max_length,
            });
        }
        if let Some(op) = self.operators.iter().find(|op| matches!(op, OperatorKind::Pow { .. })) {
            return Err(GrammarError::UnsupportedOperator(*op));
        }
        Ok(())
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ExpressionError {
    #[error("token sequence is not a complete prefix tree")]
    Incomplete,
    #[error("trailing tokens after a complete tree")]
    Trailing,
    #[error("expression has {len} tokens, limit {max}")]
    TooLong { len: usize, max: usize },
    #[error("unknown token {0:?}")]
    UnknownToken(String),
    #[error("variable index {0} out of range")]
    BadVariable(usize),
    #[error(transparent)]
    Units(#[from] UnitError),
    #[error("expression has unit {got}, target is {want}")]
    WrongUnit { got: UnitVector, want: UnitVector },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Expression {
    pub tokens: Vec<Token>,
}

fn op_from_name(name: &str) -> Option<OperatorKind> {
    ALL_OPERATORS.into_iter().find(|op| op.name() == name)
}

impl Expression {
    /// Parses space-separated prefix notation such as `mul A log10 div i i0`.
    /// `c` denotes a fresh constant.
    pub fn parse_prefix(grammar: &Grammar, text: &str) -> Result<Expression, ExpressionError> {
        let mut tokens = Vec::new();
        let mut n_const = 0;
        for word in text.split_whitespace() {
            let tok = if let Some(op) = op_from_name(word) {
                Token::Operator(op)
            } else if let Some(k) = grammar.variable_index(word) {
                Token::Variable(k)
            } else if word == "c" {
                n_const += 1;
                Token::Constant(n_const - 1)
            } else {
                return Err(ExpressionError::UnknownToken(word.into()));
            };
            tokens.push(tok);
        }
        let e = Expression { tokens };
        e.check_structure()?;
        Ok(e)
    }

    pub fn complexity(&self) -> usize {
        self.tokens.len()
    }

    pub fn n_constants(&self) -> usize {
        self.tokens.iter().filter(|t| matches!(t, Token::Constant(_))).count()
    }

    pub fn check_structure(&self) -> Result<(), ExpressionError> {
        let mut open = 1usize;
        for (k, t) in self.tokens.iter().enumerate() {
            if open == 0 {
                return Err(ExpressionError::Trailing);
            }
            open = open - 1 + t.arity();
            if open == 0 && k + 1 < self.tokens.len() {
                return Err(ExpressionError::Trailing);
            }
        }
        if open != 0 {
            return Err(ExpressionError::Incomplete);
        }
        Ok(())
    }

    /// Unit of the whole tree, computed bottom-up with `propagate_units`.
    pub fn unit(&self, grammar: &Grammar) -> Result<UnitVector, ExpressionError> {
        self.check_structure()?;
        let mut stack: Vec<UnitVector> = Vec::new();
        for t in self.tokens.iter().rev() {
            let u = match *t {
                Token::Variable(k) => grammar.variables.get(k).ok_or(ExpressionError::BadVariable(k))?.unit,
                Token::Constant(_) => UnitVector::DIMENSIONLESS,
                Token::Operator(op) => {
                    let n = op.arity();
                    let mut children: Vec<UnitVector> = stack.split_off(stack.len() - n);
                    children.reverse();
                    propagate_units(op, &children)?
                }
            };
            stack.push(u);
        }
        Ok(stack[0])
    }

    /// Structure, length and units against the grammar.
    pub fn validate(&self, grammar: &Grammar) -> Result<(), ExpressionError> {
        if self.tokens.len() > grammar.max_length {
            return Err(ExpressionError::TooLong {
                len: self.tokens.len(),
                max: grammar.max_length,
            });
        }
        let got = self.unit(grammar)?;
        if got != grammar.target_unit {
            return Err(ExpressionError::WrongUnit {
                got,
                want: grammar.target_unit,
            });
        }
        Ok(())
    }

    pub fn prefix_string(&self, grammar: &Grammar) -> String {
        let words: Vec<String> = self
            .tokens
            .iter()
            .map(|t| match *t {
                Token::Variable(k) => grammar.variables[k].name.clone(),
                Token::Constant(_) => "c".into(),
                Token::Operator(op) => op.name().into(),
            })
            .collect();
        words.join(" ")
    }

    /// Infix rendering; constants print as `c0, c1, ...` or as values when given.
    pub fn infix(&self, grammar: &Grammar, constants: Option<&[f64]>) -> String {
        fn prec(t: Token) -> u8 {
            match t {
                Token::Operator(OperatorKind::Add | OperatorKind::Sub) => 1,
                Token::Operator(OperatorKind::Mul | OperatorKind::Div) => 2,
                _ => 3,
            }
        }
        // Build (text, precedence) bottom-up.
        let mut stack: Vec<(String, u8)> = Vec::new();
        for t in self.tokens.iter().rev() {
            let item = match *t {
                Token::Variable(k) => (grammar.variables[k].name.clone(), 3),
                Token::Constant(k) => match constants.and_then(|c| c.get(k)) {
                    Some(v) => (format!("{v}"), if *v < 0.0 { 0 } else { 3 }),
                    None => (format!("c{k}"), 3),
                },
                Token::Operator(op) if op.arity() == 2 => {
                    let (l, lp) = stack.pop().unwrap();
                    let (r, rp) = stack.pop().unwrap();
                    let p = prec(*t);
                    let sym = match op {
                        OperatorKind::Add => "+",
                        OperatorKind::Sub => "-",
                        OperatorKind::Mul => "*",
                        _ => "/",
                    };
                    let right_tight = matches!(op, OperatorKind::Sub | OperatorKind::Div);
                    let mut s = String::new();
                    if lp < p {
                        let _ = write!(s, "({l})");
                    } else {
                        s.push_str(&l);
                    }
                    let _ = write!(s, " {sym} ");
                    if rp < p || (right_tight && rp == p) {
                        let _ = write!(s, "({r})");
                    } else {
                        s.push_str(&r);
                    }
                    (s, p)
                }
                Token::Operator(op) => {
                    let (a, _) = stack.pop().unwrap();
                    (format!("{}({a})", op.name()), 3)
                }
            };
            stack.push(item);
        }
        stack.pop().map(|(s, _)| s).unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_print() {
        let g = Grammar::tafel();
        let e = Expression::parse_prefix(&g, "mul A log10 div i i0").unwrap();
        assert_eq!(e.complexity(), 6);
        assert_eq!(e.infix(&g, None), "A * log10(i / i0)");
        assert_eq!(e.prefix_string(&g), "mul A log10 div i i0");
        assert_eq!(e.unit(&g).unwrap(), UnitVector::VOLT);
        e.validate(&g).unwrap();
        let e = Expression::parse_prefix(&g, "sub A mul c sub A c").unwrap();
        assert_eq!(e.n_constants(), 2);
        assert_eq!(e.infix(&g, None), "A - c0 * (A - c1)");
        assert_eq!(e.infix(&g, Some(&[2.0, 0.5])), "A - 2 * (A - 0.5)");
        let e = Expression::parse_prefix(&g, "div A div i i0").unwrap();
        assert_eq!(e.infix(&g, None), "A / (i / i0)");
    }

    #[test]
    fn structure_errors() {
        let g = Grammar::tafel();
        assert_eq!(
            Expression::parse_prefix(&g, "mul A").unwrap_err(),
            ExpressionError::Incomplete
        );
        assert_eq!(
            Expression::parse_prefix(&g, "A i").unwrap_err(),
            ExpressionError::Trailing
        );
        assert!(matches!(
            Expression::parse_prefix(&g, "foo").unwrap_err(),
            ExpressionError::UnknownToken(_)
        ));
        let e = Expression::parse_prefix(&g, "log10 i").unwrap();
        assert!(matches!(e.validate(&g), Err(ExpressionError::Units(_))));
        let e = Expression::parse_prefix(&g, "i").unwrap();
        assert!(matches!(e.validate(&g), Err(ExpressionError::WrongUnit { .. })));
    }

    #[test]
    fn grammar_validation() {
        let mut g = Grammar::tafel();
        g.validate().unwrap();
        g.variables.push(Variable {
            name: "i".into(),
            unit: UnitVector::AMPERE,
        });
        assert_eq!(g.validate(), Err(GrammarError::DuplicateVariable("i".into())));
        let mut g = Grammar::tafel();
        g.priors.min_length = 40;
        assert!(g.validate().is_err());
    }
}
