//! The Kronecker theta function, Eisenstein-Kronecker series and the Laurent
//! coefficients `e_m`, `ê_m`, with the differential and quadratic relations
//! among them.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{lattice, Error, Result};
use crate::modular::ModularPoint;
use crate::numerics::{binomial, factorial, wirtinger_d, wirtinger_dbar, Jet};
use crate::theta::{ThetaEvaluator, NEAR_LATTICE};

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Largest Laurent index served by the cached `1/theta(c)` jet.
pub const MAX_EK_INDEX: usize = 24;

/// Below this distance to the lattice the Bell route splits off the pole.
const POLE_SPLIT_RADIUS: f64 = 0.25;

/// How the Laurent coefficients are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EkRoute {
    /// Coefficient of `c^{m-1}` in the `c`-jet of `S_c(z)` (times `e^{cA}`).
    JetExtraction,
    /// Complete Bell polynomial in `Ê*_1..Ê*_m`, divided by `m!`.
    BellPolynomial,
    /// `sum_k e_k A^{m-k}/(m-k)!` with `e_k` from the jet route.
    BinomialCompletion,
}

/// Which Eisenstein-Kronecker series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EkVariant {
    /// `E_m = ((-1)^{m-1}/(m-1)!) (ln theta)^{(m)}`.
    Raw,
    /// `E*_m = (ln theta)^{(m)} + (m-1)! 2 G_m`.
    Star,
    /// `Ê*_m = E*_m + [m = 1] A`.
    StarHat,
}

/// `ê_0..=ê_max` (or `e_0..=e_max`) at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct EkCoefficients {
    pub z: Complex64,
    pub hat: bool,
    pub route: EkRoute,
    pub values: Vec<Complex64>,
}

impl EkCoefficients {
    /// `ê_m`, with `ê_m = 0` for negative `m`.
    pub fn get(&self, m: i64) -> Complex64 {
        if m < 0 {
            return ZERO;
        }
        self.values.get(m as usize).copied().unwrap_or(ZERO)
    }

    pub fn max_m(&self) -> usize {
        self.values.len() - 1
    }
}

/// Complete Bell polynomial `B_m(x_1..x_m)` for every `m <= xs.len()`, by
/// `B_{n+1} = sum_k C(n,k) B_{n-k} x_{k+1}`.
pub fn complete_bell_all(xs: &[Complex64]) -> Vec<Complex64> {
    let mut b = vec![ONE];
    for n in 0..xs.len() {
        let mut s = ZERO;
        for k in 0..=n {
            s += b[n - k] * xs[k] * binomial(n as i64, k as i64);
        }
        b.push(s);
    }
    b
}

/// Evaluator for Kronecker-type functions at one modular point.
#[derive(Debug, Clone)]
pub struct Kronecker {
    theta: ThetaEvaluator,
    inv_theta_at_zero: Jet,
}

impl Kronecker {
    pub fn new(theta: ThetaEvaluator) -> Self {
        let jet = theta.theta_jet(ZERO, MAX_EK_INDEX as i32 + 1);
        let inv_theta_at_zero = jet.inv().expect("theta has a simple zero at the origin");
        Kronecker { theta, inv_theta_at_zero }
    }

    pub fn from_modular(m: ModularPoint) -> Self {
        Kronecker::new(ThetaEvaluator::new(m))
    }

    pub fn theta(&self) -> &ThetaEvaluator {
        &self.theta
    }

    pub fn modular(&self) -> &ModularPoint {
        self.theta.modular()
    }

    fn check(&self, z: Complex64, what: &str) -> Result<()> {
        let (z0, _, _) = self.modular().reduce(z);
        if z0.norm() < NEAR_LATTICE {
            return Err(lattice(what, z));
        }
        Ok(())
    }

    fn check_index(max_m: usize) -> Result<()> {
        if max_m > MAX_EK_INDEX {
            return Err(Error::Domain(format!("Laurent index {max_m} exceeds {MAX_EK_INDEX}")));
        }
        Ok(())
    }

    /// `S_c(z) = theta(z+c)/(theta(z) theta(c))`, times `e^{c A(z)}` when hatted.
    pub fn kronecker_s(&self, c: Complex64, z: Complex64, hat: bool) -> Result<Complex64> {
        self.check(z, "S_c(z): z")?;
        self.check(c, "S_c(z): c")?;
        self.check(z + c, "S_c(z): z + c")?;
        let t = &self.theta;
        let v = t.theta(z + c, false) / (t.theta(z, false) * t.theta(c, false));
        Ok(if hat { v * (c * self.modular().a_of_z(z)).exp() } else { v })
    }

    /// `E_m`, `E*_m` or `Ê*_m` for `m = 1..=max_m`; index 0 of the result is unused (zero).
    pub fn ek_series_all(&self, max_m: usize, z: Complex64, variant: EkVariant) -> Result<Vec<Complex64>> {
        self.check(z, "Eisenstein-Kronecker series")?;
        let d = self.theta.log_theta_derivatives(z, max_m)?;
        let m = self.modular();
        let mut out = vec![ZERO; max_m + 1];
        for k in 1..=max_m {
            out[k] = match variant {
                EkVariant::Raw => {
                    let sign = if (k - 1) % 2 == 0 { 1.0 } else { -1.0 };
                    d[k] * (sign / factorial(k - 1))
                }
                EkVariant::Star | EkVariant::StarHat => {
                    let mut v = d[k] + m.g(k) * (2.0 * factorial(k - 1));
                    if variant == EkVariant::StarHat && k == 1 {
                        v += m.a_of_z(z);
                    }
                    v
                }
            };
        }
        Ok(out)
    }

    pub fn ek_series(&self, m_index: usize, z: Complex64, variant: EkVariant) -> Result<Complex64> {
        if m_index < 1 {
            return Err(Error::Domain("Eisenstein-Kronecker series index starts at 1".into()));
        }
        Ok(self.ek_series_all(m_index, z, variant)?[m_index])
    }

    /// `c`-jet of `theta(z+c)/(theta(z) theta(c))` to order `c^{max_m - 1}`.
    fn s_jet(&self, z: Complex64, max_m: usize) -> Jet {
        let order = max_m as i32;
        let num = self.theta.theta_jet(z, order);
        let num = num.scale(ONE / num.coeff(0));
        let inv = self.inv_theta_at_zero.truncate(order - 1);
        &num * &inv
    }

    fn jet_route(&self, z: Complex64, max_m: usize, a: Complex64) -> Vec<Complex64> {
        let mut s = self.s_jet(z, max_m);
        if a != ZERO {
            let e = Jet::linear(ZERO, a, max_m as i32).exp().expect("entire");
            s = &s * &e;
        }
        (0..=max_m).map(|m| s.coeff(m as i32 - 1)).collect()
    }

    /// `ê_0..=ê_max_m` (or the holomorphic `e_m` when `hat` is false) by the
    /// chosen route.
    pub fn ek_coeffs(&self, max_m: usize, z: Complex64, hat: bool, route: EkRoute) -> Result<EkCoefficients> {
        Self::check_index(max_m)?;
        self.check(z, "Laurent coefficient")?;
        let a = if hat { self.modular().a_of_z(z) } else { ZERO };
        let values = match route {
            EkRoute::JetExtraction => self.jet_route(z, max_m, a),
            EkRoute::BellPolynomial => {
                let (z0, _, _) = self.modular().reduce(z);
                if z0.norm() < POLE_SPLIT_RADIUS {
                    self.bell_route_pole_split(max_m, z, hat)?
                } else {
                    let variant = if hat { EkVariant::StarHat } else { EkVariant::Star };
                    let xs = self.ek_series_all(max_m, z, variant)?;
                    complete_bell_all(&xs[1..]).into_iter().enumerate().map(|(m, b)| b / factorial(m)).collect()
                }
            }
            EkRoute::BinomialCompletion => {
                let e = self.jet_route(z, max_m, ZERO);
                (0..=max_m)
                    .map(|m| {
                        (0..=m)
                            .map(|k| {
                                let p = m - k;
                                e[k] * a.powi(p as i32) / factorial(p)
                            })
                            .sum()
                    })
                    .collect()
            }
        };
        Ok(EkCoefficients { z, hat, route, values })
    }

    /// Bell route near a lattice point `lambda`, with `d = z - lambda`. The
    /// polar parts `(-1)^{k-1}(k-1)!/d^k` of `(ln theta)^{(k)}` exponentiate to
    /// `1 + c/d`, so `ê_m = R_m + R_{m-1}/d` with `R` the Bell coefficients of
    /// the regular parts. This avoids cancelling terms of size `|d|^{-m}`.
    fn bell_route_pole_split(&self, max_m: usize, z: Complex64, hat: bool) -> Result<Vec<Complex64>> {
        let (jet, d) = self.theta.log_theta_regular_jet(z, max_m as i32)?;
        let m = self.modular();
        let mut xs = Vec::with_capacity(max_m);
        let mut fact = 1.0;
        for k in 1..=max_m {
            fact *= k as f64;
            let mut v = jet.coeff(k as i32) * fact + m.g(k) * (2.0 * factorial(k - 1));
            if hat && k == 1 {
                v += m.a_of_z(z);
            }
            xs.push(v);
        }
        let r: Vec<Complex64> = complete_bell_all(&xs).into_iter().enumerate().map(|(k, b)| b / factorial(k)).collect();
        Ok((0..=max_m).map(|k| if k == 0 { r[0] } else { r[k] + r[k - 1] / d }).collect())
    }

    /// Bell-route coefficients cross-checked against the jet route; a
    /// disagreement above `1e-6` (relative to the largest completion term) is
    /// reported rather than hidden.
    pub fn ek_coeffs_checked(&self, max_m: usize, z: Complex64, hat: bool) -> Result<EkCoefficients> {
        let bell = self.ek_coeffs(max_m, z, hat, EkRoute::BellPolynomial)?;
        let jet = self.ek_coeffs(max_m, z, hat, EkRoute::JetExtraction)?;
        let amag = if hat { self.modular().a_of_z(z).norm() } else { 0.0 };
        for m in 0..=max_m {
            let scale = bell.values[m].norm().max((1.0 + amag).powi(m as i32) / factorial(m));
            let dev = (bell.values[m] - jet.values[m]).norm();
            if dev > 1e-6 * scale {
                return Err(Error::Consistency(format!(
                    "Laurent coefficient routes disagree at m = {m}, z = {z}: deviation {dev:e}"
                )));
            }
        }
        Ok(bell)
    }

    /// A single `ê_m` (or `e_m`); zero for negative `m`.
    pub fn ek_coeff(&self, m: i64, z: Complex64, hat: bool, route: EkRoute) -> Result<Complex64> {
        if m < 0 {
            return Ok(ZERO);
        }
        Ok(self.ek_coeffs(m as usize, z, hat, route)?.values[m as usize])
    }

    /// `ê_m` by the default (Bell) route.
    pub fn e_hat(&self, m: i64, z: Complex64) -> Result<Complex64> {
        self.ek_coeff(m, z, true, EkRoute::BellPolynomial)
    }

    /// Laurent coefficients of `e^{c Y (zbar - z)} S_c(z)` with the
    /// antiholomorphic argument `zbar` supplied independently of `z`.
    pub fn ek_coeffs_split(&self, max_m: usize, z: Complex64, zbar: Complex64) -> Result<Vec<Complex64>> {
        Self::check_index(max_m)?;
        self.check(z, "Laurent coefficient")?;
        let a = (zbar - z) * self.modular().y();
        Ok(self.jet_route(z, max_m, a))
    }

    /// `S_a(x)S_b(y) - S_a(x-y)S_{a+b}(y) - S_{a+b}(x)S_b(y-x)`.
    pub fn fay_residual(&self, a: Complex64, b: Complex64, x: Complex64, y: Complex64, hat: bool) -> Result<Complex64> {
        let s = |c, z| self.kronecker_s(c, z, hat);
        Ok(s(a, x)? * s(b, y)? - s(a, x - y)? * s(a + b, y)? - s(a + b, x)? * s(b, y - x)?)
    }

    /// `ê_i(x) ê_j(y)` minus the iterated double-sum expansion
    /// `sum_{l=0}^{i} (-1)^l sum_{a+b=i+j} [C(b, j+l) ê_a(x-y) ê_b(y) + C(a, i-l-1) ê_a(x) ê_b(y-x)]`.
    pub fn quadratic_relation_residual(&self, i: usize, j: usize, x: Complex64, y: Complex64) -> Result<Complex64> {
        if i < 1 || j < 1 {
            return Err(Error::Domain("quadratic relation needs i, j >= 1".into()));
        }
        let n = i + j;
        let route = EkRoute::BellPolynomial;
        let ex = self.ek_coeffs(n, x, true, route)?;
        let ey = self.ek_coeffs(n, y, true, route)?;
        let exy = self.ek_coeffs(n, x - y, true, route)?;
        let eyx = self.ek_coeffs(n, y - x, true, route)?;
        let (ii, jj) = (i as i64, j as i64);
        let mut rhs = ZERO;
        for l in 0..=ii {
            let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
            for b in 0..=(ii + jj) {
                let a = ii + jj - b;
                rhs += exy.get(a) * ey.get(b) * (sign * binomial(b, jj + l));
                rhs += ex.get(a) * eyx.get(b) * (sign * binomial(a, ii - l - 1));
            }
        }
        Ok(ex.get(ii) * ey.get(jj) - rhs)
    }

    /// The single-sum form obtained after simplifying the coefficient sums:
    /// `sum_b (sum_l (-1)^l C(b, j+l)) ê_{i+j-b}(x-y) ê_b(y)
    ///  + sum_a (-1)^{i+j-a} (sum_l (-1)^l C(a, i-l-1)) ê_{i+j-a}(x-y) ê_a(x)`.
    pub fn quadratic_relation_simplified_residual(
        &self,
        i: usize,
        j: usize,
        x: Complex64,
        y: Complex64,
    ) -> Result<Complex64> {
        if i < 1 || j < 1 {
            return Err(Error::Domain("quadratic relation needs i, j >= 1".into()));
        }
        let n = i + j;
        let route = EkRoute::BellPolynomial;
        let ex = self.ek_coeffs(n, x, true, route)?;
        let ey = self.ek_coeffs(n, y, true, route)?;
        let exy = self.ek_coeffs(n, x - y, true, route)?;
        let (ii, jj) = (i as i64, j as i64);
        let alt = |top: i64, shift: i64| -> f64 {
            (0..=ii).map(|l| if l % 2 == 0 { 1.0 } else { -1.0 } * binomial(top, shift + l)).sum()
        };
        let mut rhs = ZERO;
        for b in 0..=(ii + jj) {
            rhs += exy.get(ii + jj - b) * ey.get(b) * alt(b, jj);
        }
        for a in 0..=(ii + jj) {
            let sign = if (ii + jj - a) % 2 == 0 { 1.0 } else { -1.0 };
            let coeff: f64 = (0..=ii).map(|l| if l % 2 == 0 { 1.0 } else { -1.0 } * binomial(a, ii - l - 1)).sum();
            rhs += exy.get(ii + jj - a) * ex.get(a) * (sign * coeff);
        }
        Ok(ex.get(ii) * ey.get(jj) - rhs)
    }

    /// The `i = 1` case:
    /// `ê_1(x)ê_m(y) - ê_1(x-y)ê_m(y) - m ê_{m+1}(y) - sum_{k+l=m+1} ê_k(x)ê_l(y-x)`.
    pub fn quadratic_special_case_residual(&self, m: usize, x: Complex64, y: Complex64) -> Result<Complex64> {
        self.special_case(m, x, y, m as f64)
    }

    /// Same as [`Self::quadratic_special_case_residual`] with coefficient 1 in
    /// front of `ê_{m+1}(y)`; vanishes only for `m = 1`.
    pub fn quadratic_special_case_unit_coefficient(&self, m: usize, x: Complex64, y: Complex64) -> Result<Complex64> {
        self.special_case(m, x, y, 1.0)
    }

    fn special_case(&self, m: usize, x: Complex64, y: Complex64, coeff: f64) -> Result<Complex64> {
        if m < 1 {
            return Err(Error::Domain("special case needs m >= 1".into()));
        }
        let route = EkRoute::BellPolynomial;
        let n = m + 1;
        let ex = self.ek_coeffs(n, x, true, route)?;
        let ey = self.ek_coeffs(n, y, true, route)?;
        let exy = self.ek_coeffs(1, x - y, true, route)?;
        let eyx = self.ek_coeffs(n, y - x, true, route)?;
        let mi = m as i64;
        let sum: Complex64 = (0..=mi + 1).map(|k| ex.get(k) * eyx.get(mi + 1 - k)).sum();
        Ok(ex.get(1) * ey.get(mi) - exy.get(1) * ey.get(mi) - ey.get(mi + 1) * coeff - sum)
    }

    /// `Y prod_i ê_{m_i}(z + c_i)` minus the finite-difference `dbar` of
    /// `sum_k (-1)^{|k|} prod_{i<N} ê_{m_i - k_i}(z + c_i) ê_{m_N + |k| + 1}(z + c_N)`.
    pub fn dbar_primitive_check(&self, m_sequence: &[usize], offsets: &[Complex64], z: Complex64) -> Result<Complex64> {
        if m_sequence.is_empty() || m_sequence.len() != offsets.len() || m_sequence.iter().any(|m| *m < 1) {
            return Err(Error::Domain("dbar primitive needs matching non-empty sequences with m_i >= 1".into()));
        }
        let n = m_sequence.len();
        let total: usize = m_sequence.iter().sum();
        let top = total + 1;
        let y = self.modular().y();
        let lhs = {
            let mut p = Complex64::new(y, 0.0);
            for (m, c) in m_sequence.iter().zip(offsets) {
                p *= self.e_hat(*m as i64, z + c)?;
            }
            p
        };
        let primitive = |zz: Complex64| -> Complex64 {
            let coeffs: Vec<EkCoefficients> = offsets
                .iter()
                .map(|c| self.ek_coeffs(top, zz + c, true, EkRoute::BellPolynomial))
                .collect::<Result<_>>()
                .unwrap_or_default();
            if coeffs.len() != n {
                return Complex64::new(f64::NAN, f64::NAN);
            }
            let mut acc = ZERO;
            let heads = &m_sequence[..n - 1];
            let mut ks = vec![0usize; n - 1];
            loop {
                let kt: usize = ks.iter().sum();
                let sign = if kt.is_multiple_of(2) { 1.0 } else { -1.0 };
                let mut term = Complex64::new(sign, 0.0);
                for (i, k) in ks.iter().enumerate() {
                    term *= coeffs[i].get(heads[i] as i64 - *k as i64);
                }
                term *= coeffs[n - 1].get((m_sequence[n - 1] + kt + 1) as i64);
                acc += term;
                // odometer over 0 <= k_i <= m_i
                let mut pos = 0;
                loop {
                    if pos == ks.len() {
                        return acc;
                    }
                    if ks[pos] < heads[pos] {
                        ks[pos] += 1;
                        break;
                    }
                    ks[pos] = 0;
                    pos += 1;
                }
            }
        };
        let d = wirtinger_dbar(primitive, z, 1e-4)?;
        Ok(lhs - d)
    }

    /// `∂_z ê_m - sum_{a+b=m, b>=1} ê_a (Ê*_{b+1} - b! 2Ĝ_{b+1}) / b!`, with the
    /// holomorphic derivative taken by finite differences.
    pub fn dz_relation_residual(&self, m: usize, z: Complex64) -> Result<Complex64> {
        if m < 1 {
            return Err(Error::Domain("needs m >= 1".into()));
        }
        let e = self.ek_coeffs(m, z, true, EkRoute::BellPolynomial)?;
        let star = self.ek_series_all(m + 1, z, EkVariant::StarHat)?;
        let md = self.modular();
        let mut rhs = ZERO;
        for b in 1..=m {
            let a = m - b;
            let bf = factorial(b);
            rhs += e.get(a as i64) * (star[b + 1] - md.g_hat(b + 1) * (2.0 * bf)) / bf;
        }
        let d = wirtinger_d(|zz| self.e_hat(m as i64, zz).unwrap_or(Complex64::new(f64::NAN, 0.0)), z, 1e-4)?;
        Ok(d - rhs)
    }

    /// `z ê_m(z)` with the antiholomorphic argument frozen at `zbar`, at each
    /// radius `r e^{i phi}`; the limit is `(Y zbar)^{m-1}/(m-1)!`.
    pub fn polar_probe(
        &self,
        m: usize,
        phi: f64,
        zbar: Complex64,
        radii: &[f64],
    ) -> Result<Vec<(f64, Complex64, Complex64)>> {
        if m < 1 {
            return Err(Error::Domain("polar probe needs m >= 1".into()));
        }
        let target = (zbar * self.modular().y()).powi(m as i32 - 1) / factorial(m - 1);
        radii
            .iter()
            .map(|r| {
                let z = Complex64::from_polar(*r, phi);
                let v = self.ek_coeffs_split(m, z, zbar)?[m] * z;
                Ok((*r, v, target))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn kr(tau: Complex64) -> Kronecker {
        Kronecker::from_modular(ModularPoint::new(tau).unwrap())
    }

    #[test]
    fn bell_polynomials_low_order() {
        let xs = [c(2.0, 0.0), c(3.0, 0.0), c(5.0, 0.0)];
        let b = complete_bell_all(&xs);
        assert_eq!(b[1], c(2.0, 0.0));
        assert_eq!(b[2], c(4.0 + 3.0, 0.0));
        assert_eq!(b[3], c(8.0 + 3.0 * 2.0 * 3.0 + 5.0, 0.0));
    }

    #[test]
    fn three_routes_agree() {
        let k = kr(c(0.3, 1.1));
        for z in [c(0.21, 0.13), c(-0.37, 0.52), c(1.4, -2.3)] {
            for hat in [false, true] {
                let a = k.ek_coeffs(8, z, hat, EkRoute::JetExtraction).unwrap();
                let b = k.ek_coeffs(8, z, hat, EkRoute::BellPolynomial).unwrap();
                let d = k.ek_coeffs(8, z, hat, EkRoute::BinomialCompletion).unwrap();
                let amag = if hat { k.modular().a_of_z(z).norm() } else { 0.0 };
                for m in 0..=8 {
                    // largest term of the binomial completion bounds the cancellation
                    let scale = a.values[m].norm().max((1.0 + amag).powi(m as i32) / factorial(m));
                    assert!(
                        (a.values[m] - b.values[m]).norm() < 1e-9 * scale,
                        "m={m} z={z} {} {}",
                        a.values[m],
                        b.values[m]
                    );
                    assert!(
                        (a.values[m] - d.values[m]).norm() < 1e-9 * scale,
                        "m={m} z={z} {} {}",
                        a.values[m],
                        d.values[m]
                    );
                }
            }
        }
    }

    #[test]
    fn low_coefficients() {
        let k = kr(c(0.1, 1.2));
        let z = c(0.3, 0.2);
        let e = k.ek_coeffs(2, z, true, EkRoute::JetExtraction).unwrap();
        let zh = k.theta().z_fn(z, true).unwrap();
        let p = k.theta().weierstrass_p(z).unwrap();
        assert!((e.values[0] - ONE).norm() < 1e-14);
        assert!((e.values[1] - zh).norm() < 1e-10);
        assert!((e.values[2] - (zh * zh - p) * 0.5).norm() < 1e-9);
    }

    #[test]
    fn special_case_coefficient() {
        let k = kr(c(0.2, 1.05));
        let (x, y) = (c(0.23, 0.31), c(-0.14, 0.52));
        for m in 1..=4 {
            assert!(k.quadratic_special_case_residual(m, x, y).unwrap().norm() < 1e-8);
        }
        assert!(k.quadratic_special_case_unit_coefficient(1, x, y).unwrap().norm() < 1e-8);
        assert!(k.quadratic_special_case_unit_coefficient(2, x, y).unwrap().norm() > 1e-2);
    }

    #[test]
    fn fay_identity_plain_and_hatted() {
        let k = kr(c(0.3, 1.4));
        let (a, b, x, y) = (c(0.17, 0.09), c(-0.23, 0.31), c(0.41, -0.22), c(-0.12, 0.37));
        for hat in [false, true] {
            assert!(k.fay_residual(a, b, x, y, hat).unwrap().norm() < 1e-9);
        }
        assert!(k.fay_residual(a, b, x, x, false).is_err());
    }

    #[test]
    fn quadratic_relation_forms() {
        let k = kr(c(-0.2, 1.1));
        let (x, y) = (c(0.21, 0.33), c(-0.31, 0.12));
        for i in 1..=3 {
            for j in 1..=3 {
                let r = k.quadratic_relation_residual(i, j, x, y).unwrap();
                let s = k.quadratic_relation_simplified_residual(i, j, x, y).unwrap();
                assert!(r.norm() < 1e-8, "({i},{j}) {r}");
                assert!(s.norm() < 1e-8, "({i},{j}) {s}");
            }
        }
    }

    #[test]
    fn polar_part_with_frozen_antiholomorphic_variable() {
        let k = kr(c(0.35, 1.2));
        let zbar = c(0.4, -0.3);
        for m in 1..=5 {
            let rows = k.polar_probe(m, 0.7, zbar, &[1e-1, 1e-2, 1e-3]).unwrap();
            let (_, v, t) = rows[2];
            assert!((v - t).norm() < 0.05 * t.norm(), "m={m}: {v} vs {t}");
        }
    }

    #[test]
    fn checked_route_accepts_regular_points() {
        let k = kr(c(0.1, 0.9));
        assert!(k.ek_coeffs_checked(8, c(0.3, -0.4), true).is_ok());
    }

    #[test]
    fn dbar_of_e2_is_y_e1() {
        let k = kr(c(0.0, 1.0));
        let r = k.dbar_primitive_check(&[1], &[ZERO], c(0.31, 0.22)).unwrap();
        assert!(r.norm() < 1e-6, "{r}");
    }

    #[test]
    fn holomorphic_derivative_relation() {
        let k = kr(c(0.25, 1.15));
        for m in 1..=4 {
            let r = k.dz_relation_residual(m, c(0.27, 0.19)).unwrap();
            assert!(r.norm() < 1e-5, "m={m}: {r}");
        }
    }
}
