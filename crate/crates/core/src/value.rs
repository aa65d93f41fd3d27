//! Scalar constants and the arithmetic shared by constant folding and tape
//! evaluation.
//!
//! A [`Value`] is either an IEEE double or an exact rational. A graph fixes one
//! [`Domain`] at creation and every constant and binding it sees must match it.

use std::fmt;
use std::hash::{Hash, Hasher};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Float,
    Rational,
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Float => f.write_str("float"),
            Domain::Rational => f.write_str("rational"),
        }
    }
}

/// A scalar constant.
///
/// Equality and hashing are structural: floats compare by bit pattern, so
/// `0.0 != -0.0` and a NaN equals itself. This is the identity used for
/// hash-consing constants, not numeric comparison.
#[derive(Debug, Clone)]
pub enum Value {
    Float(f64),
    Rational(BigRational),
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Float(a), Value::Float(b)) => a.to_bits() == b.to_bits(),
            (Value::Rational(a), Value::Rational(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Value {}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self {
            Value::Float(x) => {
                0u8.hash(state);
                x.to_bits().hash(state);
            }
            Value::Rational(r) => {
                1u8.hash(state);
                r.hash(state);
            }
        }
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Float(x)
    }
}

impl From<BigRational> for Value {
    fn from(r: BigRational) -> Self {
        Value::Rational(r)
    }
}

impl Value {
    pub fn ratio(num: i64, den: i64) -> Value {
        Value::Rational(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    /// The integer `n` in `domain`.
    pub fn int(domain: Domain, n: i64) -> Value {
        match domain {
            Domain::Float => Value::Float(n as f64),
            Domain::Rational => Value::Rational(BigRational::from_integer(BigInt::from(n))),
        }
    }

    pub fn zero(domain: Domain) -> Value {
        Value::int(domain, 0)
    }

    pub fn one(domain: Domain) -> Value {
        Value::int(domain, 1)
    }

    pub fn domain(&self) -> Domain {
        match self {
            Value::Float(_) => Domain::Float,
            Value::Rational(_) => Domain::Rational,
        }
    }

    /// Exact test against the literal zero: `0.0` (bit pattern) or `0/1`.
    pub fn is_zero(&self) -> bool {
        match self {
            Value::Float(x) => x.to_bits() == 0f64.to_bits(),
            Value::Rational(r) => r.is_zero(),
        }
    }

    pub fn is_one(&self) -> bool {
        match self {
            Value::Float(x) => x.to_bits() == 1f64.to_bits(),
            Value::Rational(r) => r.is_one(),
        }
    }

    /// Nearest double. Rationals outside the float range map to ±inf.
    pub fn to_f64(&self) -> f64 {
        match self {
            Value::Float(x) => *x,
            Value::Rational(r) => r.to_f64().unwrap_or_else(|| {
                if r.is_negative() {
                    f64::NEG_INFINITY
                } else {
                    f64::INFINITY
                }
            }),
        }
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        match self {
            Value::Rational(r) => Some(r),
            Value::Float(_) => None,
        }
    }

    /// Re-expresses the value in `domain`. Floats convert to the exact
    /// rational they denote.
    pub fn convert(&self, domain: Domain) -> Result<Value> {
        match (self, domain) {
            (Value::Float(_), Domain::Float) | (Value::Rational(_), Domain::Rational) => {
                Ok(self.clone())
            }
            (Value::Rational(_), Domain::Float) => Ok(Value::Float(self.to_f64())),
            (Value::Float(x), Domain::Rational) => BigRational::from_float(*x)
                .map(Value::Rational)
                .ok_or(Error::NonFiniteRational(*x)),
        }
    }

    fn same_domain(&self, other: &Value) -> Result<()> {
        if self.domain() == other.domain() {
            Ok(())
        } else {
            Err(Error::DomainMismatch {
                expected: self.domain(),
                found: other.domain(),
            })
        }
    }

    pub fn add(&self, other: &Value) -> Result<Value> {
        self.same_domain(other)?;
        Ok(match (self, other) {
            (Value::Float(a), Value::Float(b)) => Value::Float(a + b),
            (Value::Rational(a), Value::Rational(b)) => Value::Rational(a + b),
            _ => unreachable!(),
        })
    }

    pub fn mul(&self, other: &Value) -> Result<Value> {
        self.same_domain(other)?;
        Ok(match (self, other) {
            (Value::Float(a), Value::Float(b)) => Value::Float(a * b),
            (Value::Rational(a), Value::Rational(b)) => Value::Rational(a * b),
            _ => unreachable!(),
        })
    }

    /// Division; a zero divisor raises `ZeroToNegativePower`, as `x * y^-1`
    /// would.
    pub fn div(&self, other: &Value) -> Result<Value> {
        self.same_domain(other)?;
        let zero = match other {
            Value::Float(b) => *b == 0.0,
            Value::Rational(b) => b.is_zero(),
        };
        if zero {
            return Err(Error::ZeroToNegativePower);
        }
        Ok(match (self, other) {
            (Value::Float(a), Value::Float(b)) => Value::Float(a / b),
            (Value::Rational(a), Value::Rational(b)) => Value::Rational(a / b),
            _ => unreachable!(),
        })
    }

    /// Integer power by repeated squaring; a negative exponent takes the
    /// reciprocal of the positive power.
    pub fn powi(&self, k: i64) -> Result<Value> {
        match self {
            Value::Float(x) => float_powi(*x, k).map(Value::Float),
            Value::Rational(r) => {
                if k < 0 && r.is_zero() {
                    return Err(Error::ZeroToNegativePower);
                }
                let p = pow_by_squaring(r.clone(), k.unsigned_abs(), BigRational::one(), |a, b| {
                    a * b
                });
                Ok(Value::Rational(if k < 0 { p.recip() } else { p }))
            }
        }
    }

    /// Natural logarithm. In the rational domain only `log 1 = 0` is exact.
    pub fn ln(&self) -> Result<Value> {
        match self {
            Value::Float(x) => float_ln(*x).map(Value::Float),
            Value::Rational(r) => {
                if !r.is_positive() {
                    Err(Error::LogDomainError(r.to_string()))
                } else if r.is_one() {
                    Ok(Value::Rational(BigRational::zero()))
                } else {
                    Err(Error::ExactModeUnsupported {
                        op: "log",
                        arg: r.to_string(),
                    })
                }
            }
        }
    }

    /// Exponential. In the rational domain only `exp 0 = 1` is exact.
    pub fn exp(&self) -> Result<Value> {
        match self {
            Value::Float(x) => Ok(Value::Float(x.exp())),
            Value::Rational(r) => {
                if r.is_zero() {
                    Ok(Value::Rational(BigRational::one()))
                } else {
                    Err(Error::ExactModeUnsupported {
                        op: "exp",
                        arg: r.to_string(),
                    })
                }
            }
        }
    }
}

pub(crate) fn pow_by_squaring<T: Clone>(
    base: T,
    mut exp: u64,
    one: T,
    mul: impl Fn(&T, &T) -> T,
) -> T {
    let mut acc = one;
    let mut sq = base;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul(&acc, &sq);
        }
        exp >>= 1;
        if exp > 0 {
            sq = mul(&sq, &sq);
        }
    }
    acc
}

pub(crate) fn float_powi(x: f64, k: i64) -> Result<f64> {
    if k < 0 && x == 0.0 {
        return Err(Error::ZeroToNegativePower);
    }
    let p = pow_by_squaring(x, k.unsigned_abs(), 1.0, |a, b| a * b);
    Ok(if k < 0 { 1.0 / p } else { p })
}

pub(crate) fn float_ln(x: f64) -> Result<f64> {
    if x <= 0.0 {
        Err(Error::LogDomainError(format!("{x:?}")))
    } else {
        Ok(x.ln())
    }
}

/// Floats print in their shortest round-trip form (`2.5`, `1.0`); rationals
/// as `num/den`, or just `num` when the denominator is one.
impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Float(x) => write!(f, "{x:?}"),
            Value::Rational(r) => write!(f, "{r}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rationals_are_normalized() {
        assert_eq!(Value::ratio(2, 6), Value::ratio(1, 3));
        let r = Value::ratio(3, -6);
        let r = r.as_rational().unwrap();
        assert_eq!(r.numer(), &BigInt::from(-1));
        assert_eq!(r.denom(), &BigInt::from(2));
    }

    #[test]
    fn zero_and_one_are_exact() {
        assert!(Value::Float(0.0).is_zero());
        assert!(!Value::Float(-0.0).is_zero());
        assert!(!Value::Float(1e-300).is_zero());
        assert!(Value::Float(1.0).is_one());
        assert!(!Value::Float(1.0 + f64::EPSILON).is_one());
        assert!(Value::ratio(0, 5).is_zero());
        assert!(Value::ratio(7, 7).is_one());
    }

    #[test]
    fn powi_by_squaring() {
        assert_eq!(Value::Float(4.0).powi(-1).unwrap(), Value::Float(0.25));
        assert_eq!(Value::Float(3.0).powi(5).unwrap(), Value::Float(243.0));
        assert_eq!(Value::Float(7.5).powi(0).unwrap(), Value::Float(1.0));
        assert_eq!(Value::ratio(2, 3).powi(-3).unwrap(), Value::ratio(27, 8));
        assert_eq!(
            Value::Float(0.0).powi(-2).unwrap_err(),
            Error::ZeroToNegativePower
        );
        assert_eq!(
            Value::ratio(0, 1).powi(-1).unwrap_err(),
            Error::ZeroToNegativePower
        );
        assert_eq!(Value::Float(0.0).powi(0).unwrap(), Value::Float(1.0));
    }

    #[test]
    fn exact_log_and_exp() {
        assert_eq!(Value::ratio(1, 1).ln().unwrap(), Value::ratio(0, 1));
        assert_eq!(Value::ratio(0, 1).exp().unwrap(), Value::ratio(1, 1));
        assert!(matches!(
            Value::ratio(2, 1).ln(),
            Err(Error::ExactModeUnsupported { op: "log", .. })
        ));
        assert!(matches!(
            Value::ratio(-1, 1).ln(),
            Err(Error::LogDomainError(_))
        ));
        assert!(matches!(Value::Float(0.0).ln(), Err(Error::LogDomainError(_))));
    }

    #[test]
    fn domains_do_not_mix() {
        let err = Value::Float(1.0).add(&Value::ratio(1, 2)).unwrap_err();
        assert_eq!(
            err,
            Error::DomainMismatch {
                expected: Domain::Float,
                found: Domain::Rational
            }
        );
    }

    #[test]
    fn display() {
        assert_eq!(Value::Float(2.5).to_string(), "2.5");
        assert_eq!(Value::Float(1.0).to_string(), "1.0");
        assert_eq!(Value::Float(4.693147180559945).to_string(), "4.693147180559945");
        assert_eq!(Value::ratio(-1, 2).to_string(), "-1/2");
        assert_eq!(Value::ratio(4, 2).to_string(), "2");
    }

    #[test]
    fn float_to_rational_is_exact() {
        assert_eq!(
            Value::Float(0.25).convert(Domain::Rational).unwrap(),
            Value::ratio(1, 4)
        );
        assert!(Value::Float(f64::NAN).convert(Domain::Rational).is_err());
    }
}
