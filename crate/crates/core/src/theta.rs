//! The normalized odd theta function, its log-derivative jets, `Z`, `zeta`
//! and `p`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{lattice, Result};
use crate::modular::ModularPoint;
use crate::numerics::Jet;

const I: Complex64 = Complex64::new(0.0, 1.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Below this distance from the lattice a point counts as a lattice point for
/// logarithms and derivatives.
pub const NEAR_LATTICE: f64 = 1e-6;

/// Default cap on the number of `q`-factors in the product.
pub const DEFAULT_PRODUCT_TRUNCATION: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaRepresentation {
    /// `sin(pi z)/pi * prod (1 - q^n u)(1 - q^n/u)/(1 - q^n)^2`.
    QProduct,
    /// `z * exp(-sum_k 2 G_{2k} z^{2k} / (2k))` on the centered domain.
    WeierstrassExpSum,
}

/// Evaluates `theta` and its derived functions at a fixed modular point.
#[derive(Debug, Clone)]
pub struct ThetaEvaluator {
    m: ModularPoint,
    product_truncation: usize,
    representation: ThetaRepresentation,
}

impl ThetaEvaluator {
    pub fn new(m: ModularPoint) -> Self {
        ThetaEvaluator {
            m,
            product_truncation: DEFAULT_PRODUCT_TRUNCATION,
            representation: ThetaRepresentation::QProduct,
        }
    }

    pub fn with_truncation(mut self, n: usize) -> Self {
        self.product_truncation = n.max(1);
        self
    }

    pub fn with_representation(mut self, r: ThetaRepresentation) -> Self {
        self.representation = r;
        self
    }

    pub fn modular(&self) -> &ModularPoint {
        &self.m
    }

    pub fn representation(&self) -> ThetaRepresentation {
        self.representation
    }

    /// `(z0, a, b)` with `z = z0 + a + b tau`.
    fn reduce(&self, z: Complex64) -> (Complex64, i64, i64) {
        self.m.reduce(z)
    }

    /// `theta(z0 + a + b tau) / theta(z0)`.
    fn automorphy(&self, z0: Complex64, a: i64, b: i64) -> Complex64 {
        let sign = if (a + b).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        let bf = b as f64;
        (-PI * I * bf * bf * self.m.tau() - 2.0 * PI * I * bf * z0).exp() * sign
    }

    /// Number of product factors needed so that `|q^n| max(|u|, 1/|u|)` is negligible.
    fn factor_count(&self, u: Complex64) -> usize {
        let qa = self.m.q().norm();
        let ua = u.norm().max(1.0 / u.norm());
        let mut n = 1usize;
        let mut qn = qa;
        while n < self.product_truncation && qn * ua > 1e-18 {
            n += 1;
            qn *= qa;
        }
        n
    }

    fn theta_centered(&self, z0: Complex64) -> Complex64 {
        match self.representation {
            ThetaRepresentation::QProduct => self.theta_product(z0),
            ThetaRepresentation::WeierstrassExpSum => self.theta_expsum(z0),
        }
    }

    fn theta_product(&self, z0: Complex64) -> Complex64 {
        let u = (2.0 * PI * I * z0).exp();
        let q = self.m.q();
        let mut r = (PI * z0).sin() / PI;
        let mut qn = ONE;
        for _ in 0..self.factor_count(u) {
            qn *= q;
            r *= (ONE - qn * u) * (ONE - qn / u) / ((ONE - qn) * (ONE - qn));
        }
        r
    }

    fn theta_expsum(&self, z0: Complex64) -> Complex64 {
        if z0 == Complex64::new(0.0, 0.0) {
            return z0;
        }
        let z2 = z0 * z0;
        let mut pow = ONE;
        let mut s = Complex64::new(0.0, 0.0);
        for k in 1..=200usize {
            pow *= z2;
            let term = self.m.g(2 * k) * pow * (2.0 / (2 * k) as f64);
            s += term;
            if k > 4 && term.norm() < 1e-18 * s.norm().max(1.0) {
                break;
            }
        }
        z0 * (-s).exp()
    }

    /// `theta(z)`, times `exp(-2 pi (Im z)^2 / Im tau)` when `hat` is set.
    pub fn theta(&self, z: Complex64, hat: bool) -> Complex64 {
        let (z0, a, b) = self.reduce(z);
        let v = self.theta_centered(z0) * self.automorphy(z0, a, b);
        if hat {
            v * (-2.0 * PI * z.im * z.im / self.m.im_tau()).exp()
        } else {
            v
        }
    }

    fn check_off_lattice(&self, z: Complex64, what: &str) -> Result<Complex64> {
        let (z0, _, _) = self.reduce(z);
        if z0.norm() < NEAR_LATTICE {
            return Err(lattice(what, z));
        }
        Ok(z0)
    }

    /// Taylor jet of `w -> theta(z + w)` built as a product of factor jets.
    pub fn theta_jet(&self, z: Complex64, order: i32) -> Jet {
        let (z0, a, b) = self.reduce(z);
        let u = (2.0 * PI * I * z0).exp();
        let q = self.m.q();
        let e_plus = Jet::linear(Complex64::new(0.0, 0.0), 2.0 * PI * I, order).exp().expect("entire");
        let e_minus = Jet::linear(Complex64::new(0.0, 0.0), -2.0 * PI * I, order).exp().expect("entire");
        let mut jet = sin_jet(z0, order);
        let mut qn = ONE;
        let mut norm = ONE;
        for _ in 0..self.factor_count(u) {
            qn *= q;
            let f1 = &Jet::one(order) - &e_plus.scale(qn * u);
            let f2 = &Jet::one(order) - &e_minus.scale(qn / u);
            jet = &(&jet * &f1) * &f2;
            norm *= (ONE - qn) * (ONE - qn);
        }
        jet = jet.scale(ONE / norm);
        if a != 0 || b != 0 {
            let lin = Jet::linear(Complex64::new(0.0, 0.0), -2.0 * PI * I * b as f64, order).exp().expect("entire");
            jet = (&jet * &lin).scale(self.automorphy(z0, a, b));
        }
        jet
    }

    /// Taylor jet of `w -> ln theta(z + w)`, summing the logs of the product
    /// factors.
    pub fn log_theta_jet(&self, z: Complex64, order: i32) -> Result<Jet> {
        let z0 = self.check_off_lattice(z, "log theta")?;
        self.log_jet_from(z, sin_jet(z0, order), order)
    }

    /// Jet of `w -> ln(theta(z + w)/(d + w))` where `d = z - lambda` is the
    /// offset from the nearest lattice point, returned alongside `d`. The
    /// logarithmic pole is split off exactly, so derivatives stay O(1) near
    /// the lattice.
    pub fn log_theta_regular_jet(&self, z: Complex64, order: i32) -> Result<(Jet, Complex64)> {
        let z0 = self.check_off_lattice(z, "log theta")?;
        Ok((self.log_jet_from(z, sinc_jet(z0, order), order)?, z0))
    }

    fn log_jet_from(&self, z: Complex64, lead: Jet, order: i32) -> Result<Jet> {
        let (z0, a, b) = self.reduce(z);
        let u = (2.0 * PI * I * z0).exp();
        let q = self.m.q();
        let e_plus = Jet::linear(Complex64::new(0.0, 0.0), 2.0 * PI * I, order).exp()?;
        let e_minus = Jet::linear(Complex64::new(0.0, 0.0), -2.0 * PI * I, order).exp()?;
        let mut acc = lead.ln()?;
        let mut qn = ONE;
        let mut norm = Complex64::new(0.0, 0.0);
        for _ in 0..self.factor_count(u) {
            qn *= q;
            acc = &acc + &(&Jet::one(order) - &e_plus.scale(qn * u)).ln()?;
            acc = &acc + &(&Jet::one(order) - &e_minus.scale(qn / u)).ln()?;
            norm += (ONE - qn).ln() * 2.0;
        }
        let bf = b as f64;
        let shift = PI * I * (a + b) as f64 - PI * I * bf * bf * self.m.tau() - 2.0 * PI * I * bf * z0 - norm;
        Ok(&acc + &Jet::linear(shift, -2.0 * PI * I * bf, order))
    }

    /// `(ln theta)^{(k)}(z)` for `k = 0..=order` as plain derivatives.
    pub fn log_theta_derivatives(&self, z: Complex64, order: usize) -> Result<Vec<Complex64>> {
        let jet = self.log_theta_jet(z, order as i32)?;
        let mut fact = 1.0;
        Ok((0..=order)
            .map(|k| {
                if k > 0 {
                    fact *= k as f64;
                }
                jet.coeff(k as i32) * fact
            })
            .collect())
    }

    /// `Z = (ln theta)'`, plus `A(z)` when `hat` is set.
    pub fn z_fn(&self, z: Complex64, hat: bool) -> Result<Complex64> {
        let z0 = self.check_off_lattice(z, "Z")?;
        let (_, _, b) = self.reduce(z);
        let u = (2.0 * PI * I * z0).exp();
        let q = self.m.q();
        let mut s = PI / (PI * z0).tan();
        let mut qn = ONE;
        for _ in 0..self.factor_count(u) {
            qn *= q;
            let x = qn * u;
            let y = qn / u;
            s += 2.0 * PI * I * (-x / (ONE - x) + y / (ONE - y));
        }
        s -= 2.0 * PI * I * b as f64;
        if hat {
            s += self.m.a_of_z(z);
        }
        Ok(s)
    }

    /// Weierstrass `p = -(ln theta)'' - 2 G_2`.
    pub fn weierstrass_p(&self, z: Complex64) -> Result<Complex64> {
        self.check_off_lattice(z, "weierstrass p")?;
        let jet = self.log_theta_jet(z, 2)?;
        Ok(-jet.coeff(2) * 2.0 - self.m.g(2) * 2.0)
    }

    /// Weierstrass `zeta = (ln theta)' + eta_1 z`.
    pub fn weierstrass_zeta(&self, z: Complex64) -> Result<Complex64> {
        Ok(self.z_fn(z, false)? + self.m.eta1(false) * z)
    }
}

/// Taylor jet of `w -> sin(pi (z0 + w)) / pi`.
fn sin_jet(z0: Complex64, order: i32) -> Jet {
    let (s, c) = ((PI * z0).sin(), (PI * z0).cos());
    let mut coeffs = Vec::with_capacity(order.max(0) as usize + 1);
    let mut fact = 1.0;
    for k in 0..=order {
        if k > 0 {
            fact *= k as f64;
        }
        // d^k/dw^k sin(pi(z0+w)) = pi^k sin(pi z0 + k pi/2)
        let v = match k % 4 {
            0 => s,
            1 => c,
            2 => -s,
            _ => -c,
        };
        coeffs.push(v * PI.powi(k) / (fact * PI));
    }
    Jet::new(0, coeffs)
}

/// Jet of `w -> sin(pi(z0+w))/(pi(z0+w))`, entire and nonvanishing near 0.
fn sinc_jet(z0: Complex64, order: i32) -> Jet {
    let s = Jet::linear(z0, ONE, order);
    let s2 = &s * &s;
    let mut acc = Jet::zero(order);
    let mut coef = Vec::with_capacity(SINC_TERMS);
    let mut c = 1.0;
    for j in 0..SINC_TERMS {
        if j > 0 {
            c *= -PI * PI / ((2 * j) as f64 * (2 * j + 1) as f64);
        }
        coef.push(c);
    }
    for c in coef.into_iter().rev() {
        acc = &(&acc * &s2) + &Jet::constant(Complex64::new(c, 0.0), order);
    }
    acc
}

const SINC_TERMS: usize = 40;

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn ev(tau: Complex64) -> ThetaEvaluator {
        ThetaEvaluator::new(ModularPoint::new(tau).unwrap())
    }

    #[test]
    fn theta_is_normalized() {
        let t = ev(c(0.3, 1.1));
        let jet = t.theta_jet(c(0.0, 0.0), 3);
        assert!(jet.coeff(0).norm() < 1e-15);
        assert!((jet.coeff(1) - ONE).norm() < 1e-14);
        assert_eq!(t.theta(c(0.0, 0.0), false), c(0.0, 0.0));
    }

    #[test]
    fn automorphy_far_from_the_origin() {
        let t = ev(c(0.4, 1.2));
        let tau = c(0.4, 1.2);
        for z in [c(0.3, 0.1), c(2.7, -3.1), c(-1.2, 4.0)] {
            let lhs = t.theta(z + tau, false);
            let rhs = -(-PI * I * tau).exp() * (-2.0 * PI * I * z).exp() * t.theta(z, false);
            assert!((lhs - rhs).norm() < 1e-10 * rhs.norm().max(1.0));
            assert!((t.theta(z + 1.0, false) + t.theta(z, false)).norm() < 1e-10 * t.theta(z, false).norm().max(1.0));
        }
    }

    #[test]
    fn representations_agree() {
        let m = ModularPoint::new(c(0.2, 1.3)).unwrap();
        let a = ThetaEvaluator::new(m.clone());
        let b = ThetaEvaluator::new(m).with_representation(ThetaRepresentation::WeierstrassExpSum);
        for z in [c(0.31, 0.2), c(-0.45, 0.6), c(0.1, -0.6), c(1.3, 2.0)] {
            let (x, y) = (a.theta(z, false), b.theta(z, false));
            assert!((x - y).norm() < 1e-10 * x.norm().max(1.0), "{z}: {x} vs {y}");
        }
    }

    #[test]
    fn log_jet_matches_z_and_product_jet() {
        let t = ev(c(-0.2, 0.9));
        for z in [c(0.21, 0.13), c(1.7, -1.4)] {
            let lj = t.log_theta_jet(z, 6).unwrap();
            let zz = t.z_fn(z, false).unwrap();
            assert!((lj.coeff(1) - zz).norm() < 1e-10);
            let pj = t.theta_jet(z, 6);
            let back = pj.scale(ONE / pj.coeff(0)).ln().unwrap();
            for k in 1..=6 {
                assert!((back.coeff(k) - lj.coeff(k)).norm() < 1e-8 * lj.coeff(k).norm().max(1.0));
            }
        }
    }

    #[test]
    fn lattice_points_are_rejected() {
        let t = ev(c(0.0, 1.0));
        assert!(t.z_fn(c(1.0, 1.0), false).is_err());
        assert!(t.log_theta_jet(c(0.0, 0.0), 3).is_err());
    }

    #[test]
    fn z_quasi_periodicity_and_zhat_periodicity() {
        let t = ev(c(0.3, 1.1));
        let tau = c(0.3, 1.1);
        let z = c(0.17, 0.4);
        let d = t.z_fn(z + tau, false).unwrap() - t.z_fn(z, false).unwrap();
        assert!((d + 2.0 * PI * I).norm() < 1e-9);
        let dh = t.z_fn(z + tau, true).unwrap() - t.z_fn(z, true).unwrap();
        assert!(dh.norm() < 1e-9);
    }
}
