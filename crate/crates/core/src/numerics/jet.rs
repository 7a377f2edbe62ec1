//! Truncated Laurent series in one formal variable.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// A Laurent polynomial `sum_{k=low}^{order} c_k w^k` standing for a series
/// known up to and including `w^order`.
#[derive(Clone, PartialEq)]
pub struct Jet {
    low: i32,
    coeffs: Vec<Complex64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Jet[{}..={}](", self.low, self.order())?;
        for (i, c) in self.coeffs.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

impl Jet {
    /// Builds a jet from coefficients starting at exponent `low`.
    /// An empty coefficient list is the zero jet known to order `low - 1`.
    pub fn new(low: i32, coeffs: Vec<Complex64>) -> Self {
        Jet { low, coeffs }
    }

    /// The zero series known to `order`.
    pub fn zero(order: i32) -> Self {
        Jet { low: 0, coeffs: vec![ZERO; (order + 1).max(0) as usize] }
    }

    pub fn constant(c: Complex64, order: i32) -> Self {
        let mut j = Jet::zero(order);
        if let Some(first) = j.coeffs.first_mut() {
            *first = c;
        }
        j
    }

    pub fn one(order: i32) -> Self {
        Jet::constant(ONE, order)
    }

    /// The formal variable `w` itself.
    pub fn variable(order: i32) -> Self {
        let mut j = Jet::zero(order);
        if order >= 1 {
            j.coeffs[1] = ONE;
        }
        j
    }

    /// `a + b w` known to `order`.
    pub fn linear(a: Complex64, b: Complex64, order: i32) -> Self {
        let mut j = Jet::constant(a, order);
        if order >= 1 {
            j.coeffs[1] = b;
        }
        j
    }

    pub fn low(&self) -> i32 {
        self.low
    }

    /// Highest exponent whose coefficient is known.
    pub fn order(&self) -> i32 {
        self.low + self.coeffs.len() as i32 - 1
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Coefficient of `w^k`; zero below `low`. Asking beyond the known order is a
    /// caller bug and also returns zero.
    pub fn coeff(&self, k: i32) -> Complex64 {
        if k < self.low {
            return ZERO;
        }
        self.coeffs.get((k - self.low) as usize).copied().unwrap_or(ZERO)
    }

    /// Drops every coefficient above `order`.
    pub fn truncate(&self, order: i32) -> Jet {
        let keep = (order - self.low + 1).clamp(0, self.coeffs.len() as i32) as usize;
        Jet { low: self.low, coeffs: self.coeffs[..keep].to_vec() }
    }

    /// Re-expresses the jet with lowest exponent `low` (padding with zeros, or
    /// dropping leading entries that are exactly zero).
    fn rebase(&self, low: i32) -> Jet {
        if low == self.low {
            return self.clone();
        }
        let order = self.order();
        let mut coeffs = vec![ZERO; (order - low + 1).max(0) as usize];
        for k in low.max(self.low)..=order {
            coeffs[(k - low) as usize] = self.coeff(k);
        }
        Jet { low, coeffs }
    }

    /// Exponent of the first nonzero coefficient, if any.
    pub fn valuation(&self) -> Option<i32> {
        self.coeffs.iter().position(|c| *c != ZERO).map(|p| self.low + p as i32)
    }

    pub fn scale(&self, c: Complex64) -> Jet {
        Jet { low: self.low, coeffs: self.coeffs.iter().map(|x| x * c).collect() }
    }

    /// Multiplies by `w^k`.
    pub fn shift(&self, k: i32) -> Jet {
        Jet { low: self.low + k, coeffs: self.coeffs.clone() }
    }

    /// Reciprocal series. The lowest nonzero coefficient sits at `v`; the result
    /// starts at `-v` and keeps the same number of known terms.
    pub fn inv(&self) -> Result<Jet> {
        let v = self.valuation().ok_or_else(|| Error::Domain("reciprocal of a zero jet".into()))?;
        let a = self.rebase(v);
        let n = a.coeffs.len();
        let a0 = a.coeffs[0];
        let mut b = vec![ZERO; n];
        b[0] = ONE / a0;
        for k in 1..n {
            let mut s = ZERO;
            for j in 1..=k {
                s += a.coeffs[j] * b[k - j];
            }
            b[k] = -s / a0;
        }
        Ok(Jet { low: -v, coeffs: b })
    }

    pub fn div(&self, other: &Jet) -> Result<Jet> {
        Ok(self * &other.inv()?)
    }

    /// `exp` of a series without negative powers.
    pub fn exp(&self) -> Result<Jet> {
        if self.low < 0 && self.coeffs.iter().take((-self.low) as usize).any(|c| *c != ZERO) {
            return Err(Error::Domain("exp of a jet with a pole".into()));
        }
        let a = self.rebase(0);
        let n = a.coeffs.len();
        let mut b = vec![ZERO; n];
        if n == 0 {
            return Ok(a);
        }
        b[0] = a.coeffs[0].exp();
        for k in 1..n {
            let mut s = ZERO;
            for j in 1..=k {
                s += a.coeffs[j] * b[k - j] * j as f64;
            }
            b[k] = s / k as f64;
        }
        Ok(Jet { low: 0, coeffs: b })
    }

    /// Principal `log` of a series with nonzero constant term.
    pub fn ln(&self) -> Result<Jet> {
        let a = self.rebase(0);
        if self.valuation() != Some(0) {
            return Err(Error::Domain("log of a jet without invertible constant term".into()));
        }
        let n = a.coeffs.len();
        let a0 = a.coeffs[0];
        let mut b = vec![ZERO; n];
        b[0] = a0.ln();
        for k in 1..n {
            let s: Complex64 = (1..k).map(|j| b[j] * a.coeffs[k - j] * j as f64).sum();
            b[k] = (a.coeffs[k] - s / k as f64) / a0;
        }
        Ok(Jet { low: 0, coeffs: b })
    }

    /// `self(g(w))` for `g` with vanishing constant term and `self` a power series.
    pub fn compose(&self, g: &Jet) -> Result<Jet> {
        if g.coeff(0) != ZERO || g.valuation().is_some_and(|v| v < 1) {
            return Err(Error::Domain("inner jet of a composition must vanish at 0".into()));
        }
        if self.low < 0 {
            return Err(Error::Domain("outer jet of a composition must be a power series".into()));
        }
        let order = self.order().min(g.order());
        let g = g.truncate(order);
        let mut acc = Jet::zero(order);
        for k in (0..=self.order()).rev() {
            acc = &(&acc * &g).truncate(order) + &Jet::constant(self.coeff(k), order);
        }
        Ok(acc)
    }

    /// Term-wise derivative in `w`.
    pub fn derivative(&self) -> Jet {
        let coeffs = self.coeffs.iter().enumerate().map(|(i, c)| c * (self.low + i as i32) as f64).collect();
        Jet { low: self.low - 1, coeffs }
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        let low = self.low.min(rhs.low);
        let order = self.order().min(rhs.order());
        let coeffs = (low..=order).map(|k| self.coeff(k) + rhs.coeff(k)).collect();
        Jet { low, coeffs }
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        let low = self.low.min(rhs.low);
        let order = self.order().min(rhs.order());
        let coeffs = (low..=order).map(|k| self.coeff(k) - rhs.coeff(k)).collect();
        Jet { low, coeffs }
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-ONE)
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        let low = self.low + rhs.low;
        let order = (self.order() + rhs.low).min(rhs.order() + self.low);
        let n = (order - low + 1).max(0) as usize;
        let mut coeffs = vec![ZERO; n];
        for (i, a) in self.coeffs.iter().enumerate() {
            if *a == ZERO {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                if i + j >= n {
                    break;
                }
                coeffs[i + j] += a * b;
            }
        }
        Jet { low, coeffs }
    }
}

macro_rules! owned_ops {
    ($tr:ident, $m:ident) => {
        impl $tr for Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                (&self).$m(&rhs)
            }
        }
    };
}
owned_ops!(Add, add);
owned_ops!(Sub, sub);
owned_ops!(Mul, mul);

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn exp_log_roundtrip() {
        let a = Jet::new(0, vec![c(0.3, 0.1), c(1.0, -2.0), c(0.5, 0.0), c(0.0, 0.7), c(-1.0, 0.2)]);
        let back = a.exp().unwrap().ln().unwrap();
        for k in 0..=4 {
            assert!((back.coeff(k) - a.coeff(k)).norm() < 1e-13);
        }
    }

    #[test]
    fn exp_matches_taylor() {
        let e = Jet::variable(6).exp().unwrap();
        let mut fact = 1.0;
        for k in 0..=6 {
            if k > 0 {
                fact *= k as f64;
            }
            assert!((e.coeff(k) - c(1.0 / fact, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn reciprocal_shifts_low_exponent() {
        // w + w^2 has valuation 1, so its inverse starts at w^{-1}.
        let a = Jet::new(0, vec![c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let inv = a.inv().unwrap();
        assert_eq!(inv.low(), -1);
        let prod = &a * &inv;
        assert!((prod.coeff(0) - ONE).norm() < 1e-15);
        for k in 1..=prod.order() {
            assert!(prod.coeff(k).norm() < 1e-15);
        }
    }

    #[test]
    fn compose_geometric() {
        // 1/(1-x) composed with x = w/2 gives sum (w/2)^k.
        let geo = Jet::new(0, vec![ONE; 6]);
        let g = Jet::variable(5).scale(c(0.5, 0.0));
        let r = geo.compose(&g).unwrap();
        for k in 0..=5 {
            assert!((r.coeff(k) - c(0.5f64.powi(k), 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn product_order_is_limited_by_both_factors() {
        let a = Jet::new(-1, vec![ONE; 4]);
        let b = Jet::new(0, vec![ONE; 6]);
        assert_eq!((&a * &b).order(), 2);
    }
}
