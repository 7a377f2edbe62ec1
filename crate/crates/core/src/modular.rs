//! The modular parameter, the lattice `Z + Z tau`, and Eisenstein series.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{bernoulli_f64, ln_factorial, riemann_zeta};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Default number of lattice rows/columns on each side for lattice sums.
pub const DEFAULT_LATTICE_CUTOFF: usize = 200;

/// Largest `G_k` index kept in the eager table.
const G_TABLE_MAX: usize = 40;

/// A point `tau` of the upper half-plane with derived data.
#[derive(Debug, Clone)]
pub struct ModularPoint {
    tau: Complex64,
    q: Complex64,
    y: f64,
    lattice_cutoff: usize,
    g_table: Vec<Complex64>,
    g_long: OnceLock<Vec<Complex64>>,
}

impl PartialEq for ModularPoint {
    fn eq(&self, other: &Self) -> bool {
        self.tau == other.tau && self.lattice_cutoff == other.lattice_cutoff
    }
}

impl ModularPoint {
    pub fn new(tau: Complex64) -> Result<Self> {
        Self::with_cutoff(tau, DEFAULT_LATTICE_CUTOFF)
    }

    pub fn with_cutoff(tau: Complex64, lattice_cutoff: usize) -> Result<Self> {
        if tau.im.is_nan() || tau.im <= 0.0 || !tau.is_finite() {
            return Err(Error::InvalidTau(tau.im));
        }
        if lattice_cutoff < 20 {
            return Err(Error::Domain(format!("lattice_cutoff {lattice_cutoff} < 20")));
        }
        let q = (2.0 * PI * I * tau).exp();
        let y = -PI / tau.im;
        let g_table = (0..=G_TABLE_MAX).map(|k| g_qseries(k, tau, q)).collect();
        Ok(ModularPoint { tau, q, y, lattice_cutoff, g_table, g_long: OnceLock::new() })
    }

    pub fn tau(&self) -> Complex64 {
        self.tau
    }

    pub fn q(&self) -> Complex64 {
        self.q
    }

    pub fn im_tau(&self) -> f64 {
        self.tau.im
    }

    /// `Y = -pi / Im tau`.
    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn lattice_cutoff(&self) -> usize {
        self.lattice_cutoff
    }

    /// `A(z) = Y (zbar - z)`.
    pub fn a_of_z(&self, z: Complex64) -> Complex64 {
        (z.conj() - z) * self.y
    }

    /// `G_k` from the q-expansion; zero for odd `k` and for `k < 2`.
    pub fn g(&self, k: usize) -> Complex64 {
        if k <= G_TABLE_MAX {
            return self.g_table[k];
        }
        let long = self.g_long.get_or_init(|| (0..=400).map(|k| g_qseries(k, self.tau, self.q)).collect());
        long.get(k).copied().unwrap_or_else(|| g_qseries(k, self.tau, self.q))
    }

    /// `G_k` with the completion `G_2 + Y/2` at `k = 2`.
    pub fn g_hat(&self, k: usize) -> Complex64 {
        if k == 2 {
            self.g(2) + self.y / 2.0
        } else {
            self.g(k)
        }
    }

    /// `eta_1 = 2 G_2`, or `eta_1 + Y` when completed.
    pub fn eta1(&self, completed: bool) -> Complex64 {
        let e = self.g(2) * 2.0;
        if completed {
            e + self.y
        } else {
            e
        }
    }

    /// Reduces `z` to `z0 + a + b tau` with `z0` in the centered period
    /// parallelogram; returns `(z0, a, b)`.
    pub fn reduce(&self, z: Complex64) -> (Complex64, i64, i64) {
        let b = (z.im / self.tau.im).round();
        let w = z - self.tau * b;
        let a = w.re.round();
        (w - a, a as i64, b as i64)
    }
}

/// `G_k = (2 pi i)^k/(k-1)! [ -B_k/(2k) + sum sigma_{k-1}(n) q^n ]`, evaluated as
/// `zeta(k) + Lambert series`, with the prefactor handled in log space.
fn g_qseries(k: usize, tau: Complex64, q: Complex64) -> Complex64 {
    if k < 2 || k % 2 == 1 {
        return Complex64::new(0.0, 0.0);
    }
    let zeta = riemann_zeta(k as u32);
    let ln_pref = k as f64 * (2.0 * PI).ln() - ln_factorial(k - 1);
    let sign = if (k / 2).is_multiple_of(2) { 1.0 } else { -1.0 };
    let mut lambert = Complex64::new(0.0, 0.0);
    let peak = (k as f64 - 1.0) / (2.0 * PI * tau.im);
    let mut d = 1usize;
    loop {
        let qd = if d < 64 { q.powi(d as i32) } else { (2.0 * PI * I * tau * d as f64).exp() };
        let mag = (ln_pref + (k as f64 - 1.0) * (d as f64).ln()).exp();
        let term = qd / (Complex64::new(1.0, 0.0) - qd) * mag;
        lambert += term;
        if (d as f64) > peak && term.norm() < 1e-18 * zeta {
            break;
        }
        if d > 100_000 {
            break;
        }
        d += 1;
    }
    Complex64::new(zeta, 0.0) + lambert * sign
}

/// How `G_k` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EisensteinMethod {
    LatticeEisensteinSummation,
    QSeries,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EisensteinValue {
    pub k: usize,
    pub value: Complex64,
    pub method: EisensteinMethod,
}

/// `G_k` by the chosen method. The lattice method sums `(1/2) sum' lambda^{-k}`
/// with the 1-direction innermost.
pub fn eisenstein_g(k: usize, m: &ModularPoint, method: EisensteinMethod) -> Result<EisensteinValue> {
    if k < 2 {
        return Err(Error::Domain(format!("Eisenstein series needs k >= 2, got {k}")));
    }
    let value = if k % 2 == 1 {
        Complex64::new(0.0, 0.0)
    } else {
        match method {
            EisensteinMethod::QSeries => m.g(k),
            EisensteinMethod::LatticeEisensteinSummation => {
                lattice_sum(Complex64::new(0.0, 0.0), k, m.tau, m.lattice_cutoff, true) * 0.5
            }
        }
    };
    Ok(EisensteinValue { k, value, method })
}

/// The same half lattice sum with the tau-direction innermost. For `k = 2`
/// this converges to a different number.
pub fn eisenstein_g_reordered(k: usize, m: &ModularPoint) -> Result<Complex64> {
    if k < 2 {
        return Err(Error::Domain(format!("Eisenstein series needs k >= 2, got {k}")));
    }
    let n = m.lattice_cutoff as i64;
    let tau = m.tau;
    let scale = tau.powi(-(k as i32));
    let cols: Vec<Complex64> = (-n..=n)
        .into_par_iter()
        .map(|a| {
            let x = Complex64::new(a as f64, 0.0) / tau;
            row_sum(x, k, n, a == 0) * scale
        })
        .collect();
    Ok(kahan(cols.into_iter()) * 0.5)
}

/// `sum^e_{lambda} (z + lambda)^{-k}` over `Z + Z tau`, 1-direction innermost,
/// with Euler-Maclaurin tails for each row. With `skip_origin` the `lambda = -z`
/// term is left out (used for `z = 0`). Needs `k >= 2`.
pub fn lattice_sum(z: Complex64, k: usize, tau: Complex64, cutoff: usize, skip_origin: bool) -> Complex64 {
    let n = cutoff as i64;
    let rows: Vec<Complex64> =
        (-n..=n).into_par_iter().map(|b| row_sum(z + tau * b as f64, k, n, skip_origin && b == 0)).collect();
    kahan(rows.into_iter())
}

/// The Eisenstein-summed `E_k(z) = sum^e (z + lambda)^{-k}` for `k >= 2`.
pub fn lattice_ek(z: Complex64, k: usize, m: &ModularPoint) -> Result<Complex64> {
    if k < 2 {
        return Err(Error::Domain("lattice E_k oracle needs k >= 2".into()));
    }
    let (z0, _, _) = m.reduce(z);
    if z0.norm() < 1e-12 {
        return Err(crate::error::lattice("lattice E_k", z));
    }
    Ok(lattice_sum(z, k, m.tau, m.lattice_cutoff, false))
}

/// Weierstrass `p` from a direct lattice sum: `E_2(z) - 2 G_2`.
pub fn lattice_weierstrass_p(z: Complex64, m: &ModularPoint) -> Result<Complex64> {
    let e2 = lattice_ek(z, 2, m)?;
    let g2 = eisenstein_g(2, m, EisensteinMethod::LatticeEisensteinSummation)?.value;
    Ok(e2 - g2 * 2.0)
}

/// `sum_{a in Z} (a + x)^{-k}` with `|a| <= n` summed directly and the two tails
/// from Euler-Maclaurin.
fn row_sum(x: Complex64, k: usize, n: i64, skip_zero: bool) -> Complex64 {
    let ki = k as i32;
    let direct = (-n..=n).filter(|a| !(skip_zero && *a == 0)).map(|a| (x + a as f64).powi(-ki));
    let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    kahan(direct) + em_tail(x, k, n) + em_tail(-x, k, n) * sign
}

/// `sum_{a > n} (a + x)^{-k}`, `k >= 2`.
fn em_tail(x: Complex64, k: usize, n: i64) -> Complex64 {
    let base = x + n as f64;
    let kf = k as f64;
    let ki = k as i32;
    let mut s = base.powi(1 - ki) / (kf - 1.0) - base.powi(-ki) * 0.5;
    // - sum_j B_{2j}/(2j)! f^{(2j-1)}(n), f^{(m)} = (-1)^m (k)_m base^{-k-m}
    let mut rising = kf; // (k)_{1}
    let mut fact = 2.0; // (2j)!
    for j in 1..=6usize {
        let m = 2 * j - 1;
        let deriv = -base.powi(-ki - m as i32) * rising;
        s -= deriv * (bernoulli_f64(2 * j) / fact);
        rising *= (kf + m as f64) * (kf + m as f64 + 1.0);
        fact *= ((2 * j + 1) * (2 * j + 2)) as f64;
    }
    s
}

/// Neumaier-compensated complex summation.
fn kahan<It: Iterator<Item = Complex64>>(it: It) -> Complex64 {
    let mut sum = Complex64::new(0.0, 0.0);
    let mut comp = Complex64::new(0.0, 0.0);
    for v in it {
        let t = sum + v;
        let c_re = if sum.re.abs() >= v.re.abs() { (sum.re - t.re) + v.re } else { (v.re - t.re) + sum.re };
        let c_im = if sum.im.abs() >= v.im.abs() { (sum.im - t.im) + v.im } else { (v.im - t.im) + sum.im };
        comp += Complex64::new(c_re, c_im);
        sum = t;
    }
    sum + comp
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn rejects_lower_half_plane() {
        assert!(matches!(ModularPoint::new(c(0.0, -1.0)), Err(Error::InvalidTau(_))));
        assert!(ModularPoint::with_cutoff(c(0.0, 1.0), 10).is_err());
    }

    #[test]
    fn g2_at_i_is_half_pi() {
        let m = ModularPoint::new(c(0.0, 1.0)).unwrap();
        assert!((m.g(2) - c(PI / 2.0, 0.0)).norm() < 1e-13);
        assert!(m.eta1(true).norm() < 1e-13);
    }

    #[test]
    fn odd_k_vanishes() {
        let m = ModularPoint::new(c(0.3, 1.2)).unwrap();
        for method in [EisensteinMethod::QSeries, EisensteinMethod::LatticeEisensteinSummation] {
            assert_eq!(eisenstein_g(3, &m, method).unwrap().value, c(0.0, 0.0));
        }
        assert!(eisenstein_g(1, &m, EisensteinMethod::QSeries).is_err());
    }

    #[test]
    fn lattice_and_qseries_agree() {
        for tau in [c(0.0, 1.0), c(0.3, 1.1), c(-0.45, 0.9)] {
            let m = ModularPoint::with_cutoff(tau, 60).unwrap();
            for k in [2, 4, 6] {
                let a = eisenstein_g(k, &m, EisensteinMethod::LatticeEisensteinSummation).unwrap().value;
                let b = m.g(k);
                assert!((a - b).norm() < 1e-10, "k={k} tau={tau}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn large_weight_tends_to_one() {
        let m = ModularPoint::new(c(0.1, 1.3)).unwrap();
        let g = m.g(120);
        assert!((g - c(1.0, 0.0)).norm() < 1e-10, "{g}");
    }

    #[test]
    fn reordered_g2_differs_by_pi_i_over_tau() {
        let m = ModularPoint::with_cutoff(c(0.2, 1.0), 60).unwrap();
        let r = eisenstein_g_reordered(2, &m).unwrap();
        let expected = m.g(2) - PI * I / m.tau();
        assert!((r - expected).norm() < 1e-8, "{r} vs {expected}");
    }

    #[test]
    fn a_of_z_shifts() {
        let m = ModularPoint::new(c(0.4, 1.2)).unwrap();
        let z = c(0.3, -0.7);
        assert_eq!(m.a_of_z(c(0.8, 0.0)), c(0.0, 0.0));
        assert!((m.a_of_z(z + m.tau()) - m.a_of_z(z) - 2.0 * PI * I).norm() < 1e-12);
        assert!((m.a_of_z(z + 1.0) - m.a_of_z(z)).norm() < 1e-15);
    }
}
