//! Dimensional arithmetic over the seven SI base quantities.
//!
//! Exponents are exact rationals whose denominator divides 4. Internally each
//! exponent is stored as an integer count of quarters, which keeps equality and
//! hashing exact.

use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Largest admissible exponent denominator.
pub const MAX_DENOMINATOR: i32 = 4;

pub const BASE_SYMBOLS: [&str; 7] = ["m", "kg", "s", "A", "K", "mol", "cd"];

/// Exponents over `[L, M, T, I, Θ, N, J]`.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UnitVector {
    quarters: [i32; 7],
}

impl UnitVector {
    pub const DIMENSIONLESS: UnitVector = UnitVector { quarters: [0; 7] };
    pub const METER: UnitVector = UnitVector::integer([1, 0, 0, 0, 0, 0, 0]);
    pub const KILOGRAM: UnitVector = UnitVector::integer([0, 1, 0, 0, 0, 0, 0]);
    pub const SECOND: UnitVector = UnitVector::integer([0, 0, 1, 0, 0, 0, 0]);
    pub const AMPERE: UnitVector = UnitVector::integer([0, 0, 0, 1, 0, 0, 0]);
    pub const KELVIN: UnitVector = UnitVector::integer([0, 0, 0, 0, 1, 0, 0]);
    pub const MOLE: UnitVector = UnitVector::integer([0, 0, 0, 0, 0, 1, 0]);
    pub const CANDELA: UnitVector = UnitVector::integer([0, 0, 0, 0, 0, 0, 1]);
    /// kg·m²·s⁻³·A⁻¹
    pub const VOLT: UnitVector = UnitVector::integer([2, 1, -3, -1, 0, 0, 0]);
    /// A·m⁻²
    pub const CURRENT_DENSITY: UnitVector = UnitVector::integer([-2, 0, 0, 1, 0, 0, 0]);

    pub const fn integer(exponents: [i32; 7]) -> Self {
        let mut quarters = [0; 7];
        let mut k = 0;
        while k < 7 {
            quarters[k] = exponents[k] * MAX_DENOMINATOR;
            k += 1;
        }
        UnitVector { quarters }
    }

    /// Builds a vector from `(numerator, denominator)` pairs; `None` when a
    /// denominator is zero or does not divide 4 after reduction.
    pub fn from_rationals(exponents: [(i32, i32); 7]) -> Option<Self> {
        let mut quarters = [0; 7];
        for (q, (num, den)) in quarters.iter_mut().zip(exponents) {
            if den == 0 {
                return None;
            }
            let scaled = num.checked_mul(MAX_DENOMINATOR)?;
            if scaled % den != 0 {
                return None;
            }
            *q = scaled / den;
        }
        Some(UnitVector { quarters })
    }

    pub fn is_dimensionless(&self) -> bool {
        self.quarters == [0; 7]
    }

    /// Reduced `(numerator, denominator)` of exponent `k`; denominator is positive.
    pub fn exponent(&self, k: usize) -> (i32, i32) {
        let q = self.quarters[k];
        let g = gcd(q.abs(), MAX_DENOMINATOR);
        (q / g, MAX_DENOMINATOR / g)
    }

    pub fn exponents(&self) -> [(i32, i32); 7] {
        std::array::from_fn(|k| self.exponent(k))
    }

    /// Largest absolute exponent, as a float.
    pub fn max_abs_exponent(&self) -> f64 {
        self.quarters.iter().map(|q| q.abs()).max().unwrap_or(0) as f64 / MAX_DENOMINATOR as f64
    }

    fn zip_with(self, other: Self, f: impl Fn(i32, i32) -> Option<i32>) -> Option<Self> {
        let mut quarters = [0; 7];
        for k in 0..7 {
            quarters[k] = f(self.quarters[k], other.quarters[k])?;
        }
        Some(UnitVector { quarters })
    }

    fn map(self, f: impl Fn(i32) -> Option<i32>) -> Option<Self> {
        let mut quarters = [0; 7];
        for k in 0..7 {
            quarters[k] = f(self.quarters[k])?;
        }
        Some(UnitVector { quarters })
    }

    pub fn checked_mul(self, other: Self) -> Option<Self> {
        self.zip_with(other, i32::checked_add)
    }

    pub fn checked_div(self, other: Self) -> Option<Self> {
        self.zip_with(other, i32::checked_sub)
    }

    pub fn inv(self) -> Self {
        UnitVector {
            quarters: self.quarters.map(|q| -q),
        }
    }

    /// Raises to `num/den`; `None` if any resulting exponent leaves the quarter grid.
    pub fn checked_pow(self, num: i32, den: i32) -> Option<Self> {
        if den == 0 {
            return None;
        }
        self.map(|q| {
            let scaled = q.checked_mul(num)?;
            (scaled % den == 0).then_some(scaled / den)
        })
    }
}

fn gcd(mut a: i32, mut b: i32) -> i32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

impl fmt::Debug for UnitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for UnitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_dimensionless() {
            return f.write_str("1");
        }
        let mut first = true;
        for (k, sym) in BASE_SYMBOLS.iter().enumerate() {
            let (num, den) = self.exponent(k);
            if num == 0 {
                continue;
            }
            if !first {
                f.write_str("·")?;
            }
            first = false;
            match (num, den) {
                (1, 1) => write!(f, "{sym}")?,
                (n, 1) => write!(f, "{sym}^{n}")?,
                (n, d) => write!(f, "{sym}^({n}/{d})")?,
            }
        }
        Ok(())
    }
}

impl Serialize for UnitVector {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let parts: Vec<String> = self.exponents().iter().map(|(n, d)| format!("{n}/{d}")).collect();
        parts.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for UnitVector {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let parts = Vec::<String>::deserialize(deserializer)?;
        if parts.len() != 7 {
            return Err(D::Error::custom(format!("expected 7 exponents, got {}", parts.len())));
        }
        let mut exps = [(0, 1); 7];
        for (slot, part) in exps.iter_mut().zip(&parts) {
            let (n, d) = part
                .split_once('/')
                .ok_or_else(|| D::Error::custom(format!("malformed exponent {part:?}")))?;
            let n: i32 = n.trim().parse().map_err(D::Error::custom)?;
            let d: i32 = d.trim().parse().map_err(D::Error::custom)?;
            *slot = (n, d);
        }
        UnitVector::from_rationals(exps).ok_or_else(|| D::Error::custom("exponent denominator must divide 4"))
    }
}

/// Operators understood by the unit algebra.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    Add,
    Sub,
    Mul,
    Div,
    Inv,
    Square,
    Sqrt,
    Exp,
    Log10,
    Sin,
    Cos,
    /// Power with a fixed rational exponent `num/den`.
    Pow {
        num: i32,
        den: i32,
    },
}

impl OperatorKind {
    pub fn arity(self) -> usize {
        match self {
            OperatorKind::Add | OperatorKind::Sub | OperatorKind::Mul | OperatorKind::Div => 2,
            _ => 1,
        }
    }

    pub fn is_transcendental(self) -> bool {
        matches!(
            self,
            OperatorKind::Exp | OperatorKind::Log10 | OperatorKind::Sin | OperatorKind::Cos
        )
    }

    pub fn is_trig(self) -> bool {
        matches!(self, OperatorKind::Sin | OperatorKind::Cos)
    }

    pub fn name(self) -> &'static str {
        match self {
            OperatorKind::Add => "add",
            OperatorKind::Sub => "sub",
            OperatorKind::Mul => "mul",
            OperatorKind::Div => "div",
            OperatorKind::Inv => "inv",
            OperatorKind::Square => "square",
            OperatorKind::Sqrt => "sqrt",
            OperatorKind::Exp => "exp",
            OperatorKind::Log10 => "log10",
            OperatorKind::Sin => "sin",
            OperatorKind::Cos => "cos",
            OperatorKind::Pow { .. } => "pow",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnitErrorKind {
    Mismatch,
    NonDimensionlessArgument,
    FractionalOverflow,
    /// Wrong number of children for the operator.
    Arity,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("{kind:?} in {} applied to {children:?}", operator.name())]
pub struct UnitError {
    pub kind: UnitErrorKind,
    pub operator: OperatorKind,
    pub children: Vec<UnitVector>,
}

/// Unit of `operator` applied to children with the given units.
pub fn propagate_units(operator: OperatorKind, children: &[UnitVector]) -> Result<UnitVector, UnitError> {
    let fail = |kind| UnitError {
        kind,
        operator,
        children: children.to_vec(),
    };
    if children.len() != operator.arity() {
        return Err(fail(UnitErrorKind::Arity));
    }
    let overflow = || fail(UnitErrorKind::FractionalOverflow);
    let a = children[0];
    match operator {
        OperatorKind::Add | OperatorKind::Sub => {
            if a == children[1] {
                Ok(a)
            } else {
                Err(fail(UnitErrorKind::Mismatch))
            }
        }
        OperatorKind::Mul => a.checked_mul(children[1]).ok_or_else(overflow),
        OperatorKind::Div => a.checked_div(children[1]).ok_or_else(overflow),
        OperatorKind::Inv => Ok(a.inv()),
        OperatorKind::Square => a.checked_pow(2, 1).ok_or_else(overflow),
        OperatorKind::Sqrt => a.checked_pow(1, 2).ok_or_else(overflow),
        OperatorKind::Pow { num, den } => a.checked_pow(num, den).ok_or_else(overflow),
        OperatorKind::Exp | OperatorKind::Log10 | OperatorKind::Sin | OperatorKind::Cos => {
            if a.is_dimensionless() {
                Ok(UnitVector::DIMENSIONLESS)
            } else {
                Err(fail(UnitErrorKind::NonDimensionlessArgument))
            }
        }
    }
}
