//! Exact rational coefficients for scheme inputs and error-term tables.

use core::fmt;
use core::ops::{Add, Mul, Neg, Sub};

use crate::Error;

/// A signed rational number kept in lowest terms with a positive denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rational {
    numer: i64,
    denom: i64,
}

fn gcd(mut a: i64, mut b: i64) -> i64 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

impl Rational {
    pub const ZERO: Rational = Rational { numer: 0, denom: 1 };
    pub const ONE: Rational = Rational { numer: 1, denom: 1 };
    pub const MINUS_ONE: Rational = Rational { numer: -1, denom: 1 };

    pub fn new(numer: i64, denom: i64) -> crate::Result<Self> {
        if denom == 0 {
            return Err(Error::invalid("rational with zero denominator"));
        }
        let sign = if denom < 0 { -1 } else { 1 };
        let g = gcd(numer, denom).max(1);
        Ok(Rational {
            numer: sign * numer / g,
            denom: sign * denom / g,
        })
    }

    pub const fn integer(n: i64) -> Self {
        Rational { numer: n, denom: 1 }
    }

    pub fn numer(&self) -> i64 {
        self.numer
    }

    pub fn denom(&self) -> i64 {
        self.denom
    }

    pub fn to_f64(&self) -> f64 {
        self.numer as f64 / self.denom as f64
    }

    pub fn is_integer(&self) -> bool {
        self.denom == 1
    }
}

impl Add for Rational {
    type Output = Rational;
    fn add(self, rhs: Rational) -> Rational {
        Rational::new(
            self.numer * rhs.denom + rhs.numer * self.denom,
            self.denom * rhs.denom,
        )
        .expect("nonzero denominators")
    }
}

impl Sub for Rational {
    type Output = Rational;
    fn sub(self, rhs: Rational) -> Rational {
        self + (-rhs)
    }
}

impl Mul for Rational {
    type Output = Rational;
    fn mul(self, rhs: Rational) -> Rational {
        Rational::new(self.numer * rhs.numer, self.denom * rhs.denom).expect("nonzero denominators")
    }
}

impl Neg for Rational {
    type Output = Rational;
    fn neg(self) -> Rational {
        Rational {
            numer: -self.numer,
            denom: self.denom,
        }
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.denom == 1 {
            write!(f, "{}", self.numer)
        } else {
            write!(f, "{}/{}", self.numer, self.denom)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizes_sign_and_terms() {
        let r = Rational::new(2, -4).unwrap();
        assert_eq!(r.numer(), -1);
        assert_eq!(r.denom(), 2);
        assert_eq!(Rational::new(-3, -3).unwrap(), Rational::ONE);
    }

    #[test]
    fn zero_denominator_rejected() {
        assert!(Rational::new(1, 0).is_err());
    }

    #[test]
    fn arithmetic() {
        let half = Rational::new(1, 2).unwrap();
        assert_eq!(half + half, Rational::ONE);
        assert_eq!(half * Rational::integer(2), Rational::ONE);
        assert_eq!(-half, Rational::new(-1, 2).unwrap());
        assert_eq!((Rational::integer(2) * half - Rational::ONE), Rational::ZERO);
    }

    #[test]
    fn display_forms() {
        use alloc::string::ToString;
        assert_eq!(Rational::new(1, 2).unwrap().to_string(), "1/2");
        assert_eq!(Rational::integer(-3).to_string(), "-3");
    }
}
