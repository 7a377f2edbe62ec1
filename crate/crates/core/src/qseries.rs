//! Exact q-expansions with rational coefficients.
//!
//! A series is `(2 pi i)^weight * sum_d q^{d/2} N_d(u) / D(u)` where every
//! `N_d` is a finite Laurent polynomial in `u_i^{1/2}` and
//! `D = prod (1 - u^a)^p` is shared by all coefficients. Exponents of `q` and
//! of every `u_i` are stored doubled so half-integers stay integral.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use itertools::Itertools;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gw::{t_hat_closed, GwPoint};
use crate::kronecker::{EkRoute, Kronecker};
use crate::numerics::bernoulli_table;

/// Largest supported `q` truncation order.
pub const MAX_Q_ORDER: u32 = 20;

/// Doubled exponent vector.
pub type Exponents = Vec<i32>;

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn rat_f64(c: &BigRational) -> f64 {
    c.to_f64().unwrap_or(f64::NAN)
}

/// Finite Laurent polynomial in `u_1^{1/2}, .., u_n^{1/2}` over the rationals.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LaurentPoly {
    nvars: usize,
    terms: BTreeMap<Exponents, BigRational>,
}

impl LaurentPoly {
    pub fn zero(nvars: usize) -> Self {
        LaurentPoly { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: BigRational) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    pub fn one(nvars: usize) -> Self {
        Self::constant(nvars, BigRational::one())
    }

    /// `c * u^{e/2}`.
    pub fn monomial(e: Exponents, c: BigRational) -> Self {
        let mut p = Self::zero(e.len());
        p.add_term(e, c);
        p
    }

    /// `1 - u^{e/2}`.
    pub fn one_minus(e: &[i32]) -> Self {
        let mut p = Self::one(e.len());
        p.add_term(e.to_vec(), -BigRational::one());
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponents, &BigRational)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, e: Exponents, c: BigRational) {
        if c.is_zero() {
            return;
        }
        let slot = self.terms.entry(e).or_insert_with(BigRational::zero);
        *slot += c;
        if slot.is_zero() {
            self.terms.retain(|_, v| !v.is_zero());
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), c.clone());
        }
        out
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        if c.is_zero() {
            return Self::zero(self.nvars);
        }
        LaurentPoly { nvars: self.nvars, terms: self.terms.iter().map(|(e, v)| (e.clone(), v * c)).collect() }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut terms: BTreeMap<Exponents, BigRational> = BTreeMap::new();
        for (a, x) in &self.terms {
            for (b, y) in &other.terms {
                let e: Exponents = a.iter().zip(b).map(|(p, q)| p + q).collect();
                *terms.entry(e).or_insert_with(BigRational::zero) += x * y;
            }
        }
        terms.retain(|_, v| !v.is_zero());
        LaurentPoly { nvars: self.nvars, terms }
    }

    pub fn pow(&self, k: u32) -> Self {
        (0..k).fold(Self::one(self.nvars), |acc, _| acc.mul(self))
    }

    /// `u_i d/du_i`.
    pub fn euler(&self, i: usize) -> Self {
        let mut out = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            out.add_term(e.clone(), c * BigRational::new(BigInt::from(e[i]), BigInt::from(2)));
        }
        out
    }

    /// Rewrites `u_j = prod_k U_k^{map[j][k]}` in `new_nvars` variables.
    pub fn substitute(&self, map: &[Vec<i32>], new_nvars: usize) -> Self {
        let mut out = Self::zero(new_nvars);
        for (e, c) in &self.terms {
            let mut ne = vec![0; new_nvars];
            for (j, ej) in e.iter().enumerate() {
                for (k, m) in map[j].iter().enumerate() {
                    ne[k] += ej * m;
                }
            }
            out.add_term(ne, c.clone());
        }
        out
    }

    /// Value with `half_u[i] = u_i^{1/2}`.
    pub fn evaluate(&self, half_u: &[Complex64]) -> Complex64 {
        self.terms
            .iter()
            .map(|(e, c)| e.iter().zip(half_u).fold(Complex64::new(rat_f64(c), 0.0), |acc, (k, h)| acc * h.powi(*k)))
            .sum()
    }
}

/// A truncated q-expansion; see the module docs for the representation.
#[derive(Debug, Clone, PartialEq)]
pub struct QSeries {
    nvars: usize,
    q_order: u32,
    weight: i32,
    denominator: BTreeMap<Exponents, u32>,
    coefficients: BTreeMap<i64, LaurentPoly>,
}

/// One emitted coefficient: `numerator/denominator * q^{q_exponent_doubled/2} u^{exponents/2}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QSeriesRow {
    pub q_exponent_doubled: i64,
    pub exponents_doubled: Vec<i32>,
    pub numerator: String,
    pub denominator: String,
}

impl QSeries {
    pub fn zero(nvars: usize, q_order: u32, weight: i32) -> Self {
        QSeries { nvars, q_order, weight, denominator: BTreeMap::new(), coefficients: BTreeMap::new() }
    }

    /// The Laurent polynomial `p` as a series with no `q` dependence.
    pub fn from_poly(p: LaurentPoly, q_order: u32, weight: i32) -> Self {
        let mut s = Self::zero(p.nvars(), q_order, weight);
        s.add_coeff(0, p);
        s
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn q_order(&self) -> u32 {
        self.q_order
    }

    /// Power of `2 pi i` in front of the rational series.
    pub fn weight(&self) -> i32 {
        self.weight
    }

    /// Factors `(exponents, power)` of `D(u) = prod (1 - u^{e/2})^power`.
    pub fn denominator_factors(&self) -> impl Iterator<Item = (&Exponents, &u32)> {
        self.denominator.iter()
    }

    pub fn coefficient(&self, q_exponent_doubled: i64) -> Option<&LaurentPoly> {
        self.coefficients.get(&q_exponent_doubled)
    }

    fn max_doubled(&self) -> i64 {
        2 * i64::from(self.q_order)
    }

    fn add_coeff(&mut self, d: i64, p: LaurentPoly) {
        if d > self.max_doubled() || p.is_zero() {
            return;
        }
        let slot = self.coefficients.entry(d).or_insert_with(|| LaurentPoly::zero(p.nvars()));
        *slot = slot.add(&p);
        if slot.is_zero() {
            self.coefficients.remove(&d);
        }
    }

    fn with_denominator(mut self, e: Exponents, power: u32) -> Self {
        if power > 0 {
            *self.denominator.entry(e).or_insert(0) += power;
        }
        self
    }

    fn map_coeffs(&self, f: impl Fn(&LaurentPoly) -> LaurentPoly) -> Self {
        let mut out = QSeries { coefficients: BTreeMap::new(), ..self.clone() };
        for (d, p) in &self.coefficients {
            out.add_coeff(*d, f(p));
        }
        out
    }

    pub fn scale(&self, c: &BigRational) -> Self {
        self.map_coeffs(|p| p.scale(c))
    }

    fn mul_numerator(&self, p: &LaurentPoly) -> Self {
        self.map_coeffs(|c| c.mul(p))
    }

    /// Expanded `D(u)`.
    pub fn denominator_poly(&self) -> LaurentPoly {
        self.denominator
            .iter()
            .fold(LaurentPoly::one(self.nvars), |acc, (e, p)| acc.mul(&LaurentPoly::one_minus(e).pow(*p)))
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.nvars != other.nvars {
            return Err(Error::Domain(format!("series in {} and {} variables", self.nvars, other.nvars)));
        }
        Ok(())
    }

    /// Raises the denominator to `target` (which must divide into it factorwise).
    fn lift_denominator(&self, target: &BTreeMap<Exponents, u32>) -> Self {
        let mut extra = LaurentPoly::one(self.nvars);
        for (e, p) in target {
            let have = self.denominator.get(e).copied().unwrap_or(0);
            extra = extra.mul(&LaurentPoly::one_minus(e).pow(p - have));
        }
        let mut out = self.mul_numerator(&extra);
        out.denominator = target.clone();
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        if self.weight != other.weight && !self.coefficients.is_empty() && !other.coefficients.is_empty() {
            return Err(Error::Domain(format!("adding series of weights {} and {}", self.weight, other.weight)));
        }
        let weight = if self.coefficients.is_empty() { other.weight } else { self.weight };
        let mut target = self.denominator.clone();
        for (e, p) in &other.denominator {
            let slot = target.entry(e.clone()).or_insert(0);
            *slot = (*slot).max(*p);
        }
        let q_order = self.q_order.min(other.q_order);
        let a = self.lift_denominator(&target);
        let b = other.lift_denominator(&target);
        let mut out = QSeries { q_order, weight, ..Self::zero(self.nvars, q_order, weight) };
        out.denominator = target;
        for (d, p) in a.coefficients.iter().chain(b.coefficients.iter()) {
            out.add_coeff(*d, p.clone());
        }
        Ok(out)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let q_order = self.q_order.min(other.q_order);
        let mut out = Self::zero(self.nvars, q_order, self.weight + other.weight);
        out.denominator = self.denominator.clone();
        for (e, p) in &other.denominator {
            *out.denominator.entry(e.clone()).or_insert(0) += p;
        }
        for (da, pa) in &self.coefficients {
            for (db, pb) in &other.coefficients {
                if da + db <= out.max_doubled() {
                    out.add_coeff(da + db, pa.mul(pb));
                }
            }
        }
        Ok(out)
    }

    /// `d/dz_i = 2 pi i u_i d/du_i`, with `z_i` the additive coordinate of `u_i`.
    pub fn d_z(&self, i: usize) -> Self {
        // (N/D)' = (N' E + N sum_f p_f (a_f/2) u^{a_f} E/(1 - u^{a_f})) / (D E), E = prod_f (1 - u^{a_f})
        let moving: Vec<(Exponents, u32)> =
            self.denominator.iter().filter(|(e, _)| e[i] != 0).map(|(e, p)| (e.clone(), *p)).collect();
        let e_all = moving.iter().fold(LaurentPoly::one(self.nvars), |acc, (e, _)| acc.mul(&LaurentPoly::one_minus(e)));
        let mut extra = LaurentPoly::zero(self.nvars);
        for (k, (e, p)) in moving.iter().enumerate() {
            let others = moving
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != k)
                .fold(LaurentPoly::one(self.nvars), |acc, (_, (f, _))| acc.mul(&LaurentPoly::one_minus(f)));
            let c = BigRational::new(BigInt::from(i64::from(*p) * i64::from(e[i])), BigInt::from(2));
            extra = extra.add(&LaurentPoly::monomial(e.clone(), c).mul(&others));
        }
        let mut out = self.map_coeffs(|n| n.euler(i).mul(&e_all).add(&n.mul(&extra)));
        out.weight += 1;
        for (e, _) in moving {
            out = out.with_denominator(e, 1);
        }
        out
    }

    /// Rewrites `u_j = prod_k U_k^{map[j][k]}`.
    pub fn substitute(&self, map: &[Vec<i32>], new_nvars: usize) -> Self {
        let mut out = Self::zero(new_nvars, self.q_order, self.weight);
        for (e, p) in &self.denominator {
            let ne = LaurentPoly::monomial(e.clone(), BigRational::one()).substitute(map, new_nvars);
            let key = ne.terms().next().map(|(k, _)| k.clone()).unwrap_or_else(|| vec![0; new_nvars]);
            out = out.with_denominator(key, *p);
        }
        for (d, p) in &self.coefficients {
            out.add_coeff(*d, p.substitute(map, new_nvars));
        }
        out
    }

    /// Pointwise value at `tau` with `u_i = exp(2 pi i z_i)`.
    pub fn evaluate(&self, tau: Complex64, z: &[Complex64]) -> Result<Complex64> {
        if z.len() != self.nvars {
            return Err(Error::Domain(format!("series in {} variables evaluated at {} points", self.nvars, z.len())));
        }
        let i = Complex64::i();
        let half_u: Vec<Complex64> = z.iter().map(|zi| (i * PI * zi).exp()).collect();
        let half_q = (i * PI * tau).exp();
        let den = self.denominator_poly().evaluate(&half_u);
        if den.norm() < 1e-300 {
            return Err(Error::Domain("series evaluated on a zero of its u-denominator".into()));
        }
        let num: Complex64 = self.coefficients.iter().map(|(d, p)| half_q.powi(*d as i32) * p.evaluate(&half_u)).sum();
        Ok(Complex64::new(0.0, 2.0 * PI).powi(self.weight) * num / den)
    }

    /// `true` when the series is exactly 1 to its truncation order.
    pub fn is_unit(&self) -> bool {
        let den = self.denominator_poly();
        self.weight == 0 && self.coefficients.len() == 1 && self.coefficients.get(&0).is_some_and(|p| *p == den)
    }

    /// Numerator coefficients, one row per `(q, u)` monomial, in canonical order.
    pub fn rows(&self) -> Vec<QSeriesRow> {
        self.coefficients
            .iter()
            .flat_map(|(d, p)| {
                p.terms().map(move |(e, c)| QSeriesRow {
                    q_exponent_doubled: *d,
                    exponents_doubled: e.clone(),
                    numerator: c.numer().to_string(),
                    denominator: c.denom().to_string(),
                })
            })
            .collect()
    }
}

/// What to expand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "target")]
pub enum QTarget {
    Theta,
    ThetaReciprocal,
    Z,
    /// Eisenstein series `G_k` of weight `k`.
    G {
        k: u32,
    },
    /// Holomorphic Kronecker coefficient `e_m`.
    E {
        m: u32,
    },
    /// Holomorphic limit `T_n`.
    T {
        n: u32,
    },
}

impl QTarget {
    pub fn nvars(&self) -> usize {
        match self {
            QTarget::Theta | QTarget::ThetaReciprocal | QTarget::Z | QTarget::E { .. } => 1,
            QTarget::G { .. } => 0,
            QTarget::T { n } => *n as usize,
        }
    }

    /// Direct numeric value of the expanded function at `z` (or `w` for `T`).
    pub fn numeric(&self, kron: &Kronecker, z: &[Complex64]) -> Result<Complex64> {
        let th = kron.theta();
        match self {
            QTarget::Theta => Ok(th.theta(z[0], false)),
            QTarget::ThetaReciprocal => Ok(th.theta(z[0], false).inv()),
            QTarget::Z => th.z_fn(z[0], false),
            QTarget::G { k } => Ok(kron.modular().g(*k as usize)),
            QTarget::E { m } => kron.ek_coeff(i64::from(*m), z[0], false, EkRoute::BellPolynomial),
            QTarget::T { n } => {
                let p = GwPoint::new(z.to_vec(), kron.modular())?;
                t_hat_closed(&(1..=*n as usize).collect::<Vec<_>>(), &p, kron, false)
            }
        }
    }
}

/// Expands `target` to `q^{q_order}`.
pub fn qexpand(target: QTarget, q_order: u32) -> Result<QSeries> {
    if q_order > MAX_Q_ORDER {
        return Err(Error::Overflow(format!("q order {q_order} exceeds {MAX_Q_ORDER}")));
    }
    match target {
        QTarget::Theta => Ok(theta_series(q_order)),
        QTarget::ThetaReciprocal => Ok(theta_reciprocal_series(q_order)),
        QTarget::Z => Ok(z_series(q_order)),
        QTarget::G { k } => Ok(g_series(k, q_order)),
        QTarget::E { m } => Ok(e_series(m as usize, q_order)?.pop().unwrap_or_else(|| unit(1, q_order))),
        QTarget::T { n } => t_series(n as usize, q_order),
    }
}

fn unit(nvars: usize, q_order: u32) -> QSeries {
    QSeries::from_poly(LaurentPoly::one(nvars), q_order, 0)
}

fn u_pow(k: i32) -> LaurentPoly {
    LaurentPoly::monomial(vec![2 * k], BigRational::one())
}

/// `q`-only series `prod_{n>=1} (1 - q^n)^{power}` (negative powers allowed).
fn euler_product(q_order: u32, power: i32) -> QSeries {
    let mut s = unit(1, q_order);
    for n in 1..=i64::from(q_order) {
        let mut factor = QSeries::zero(1, q_order, 0);
        if power >= 0 {
            factor.add_coeff(0, LaurentPoly::one(1));
            factor.add_coeff(2 * n, LaurentPoly::constant(1, rat(-1)));
        } else {
            for k in 0..=i64::from(q_order) / n {
                factor.add_coeff(2 * n * k, LaurentPoly::one(1));
            }
        }
        for _ in 0..power.unsigned_abs() {
            s = s.mul(&factor).expect("same variable count");
        }
    }
    s
}

/// `prod_{n>=1} (1 - q^n u)(1 - q^n / u)` or its reciprocal.
fn u_product(q_order: u32, inverse: bool) -> QSeries {
    let mut s = unit(1, q_order);
    for n in 1..=i64::from(q_order) {
        for sign in [1, -1] {
            let mut factor = QSeries::zero(1, q_order, 0);
            if inverse {
                for k in 0..=i64::from(q_order) / n {
                    factor.add_coeff(2 * n * k, u_pow(sign * k as i32));
                }
            } else {
                factor.add_coeff(0, LaurentPoly::one(1));
                factor.add_coeff(2 * n, u_pow(sign).scale(&rat(-1)));
            }
            s = s.mul(&factor).expect("same variable count");
        }
    }
    s
}

/// `theta = (u^{1/2} - u^{-1/2}) / (2 pi i) * prod (1 - q^n u)(1 - q^n/u) / (1 - q^n)^2`.
fn theta_series(q_order: u32) -> QSeries {
    let mut lead = LaurentPoly::monomial(vec![1], BigRational::one());
    lead.add_term(vec![-1], rat(-1));
    let s = QSeries::from_poly(lead, q_order, -1);
    s.mul(&u_product(q_order, false)).and_then(|s| s.mul(&euler_product(q_order, -2))).expect("same variable count")
}

/// `1/theta = 2 pi i (-u^{1/2}) / (1 - u) * (1 - q^n)^2 / prod (1 - q^n u)(1 - q^n/u)`.
fn theta_reciprocal_series(q_order: u32) -> QSeries {
    let lead = LaurentPoly::monomial(vec![1], rat(-1));
    let s = QSeries::from_poly(lead, q_order, 1).with_denominator(vec![2], 1);
    s.mul(&u_product(q_order, true)).and_then(|s| s.mul(&euler_product(q_order, 2))).expect("same variable count")
}

/// `Z / (2 pi i) = -(1 + u) / (2 (1 - u)) - sum_{n,k>=1} q^{nk} (u^k - u^{-k})`.
fn z_series(q_order: u32) -> QSeries {
    let half = BigRational::new(BigInt::from(-1), BigInt::from(2));
    let lead = LaurentPoly::one(1).add(&u_pow(1)).scale(&half);
    let mut s = QSeries::from_poly(lead, q_order, 1).with_denominator(vec![2], 1);
    let one_minus_u = LaurentPoly::one_minus(&[2]);
    for n in 1..=i64::from(q_order) {
        for k in 1..=i64::from(q_order) / n {
            let p = u_pow(k as i32).add(&u_pow(-(k as i32)).scale(&rat(-1)));
            s.add_coeff(2 * n * k, p.mul(&one_minus_u).scale(&rat(-1)));
        }
    }
    s
}

fn sigma(n: u64, power: u32) -> BigInt {
    (1..=n).filter(|d| n.is_multiple_of(*d)).map(|d| BigInt::from(d).pow(power)).sum()
}

fn factorial_big(n: u32) -> BigInt {
    (1..=n).map(BigInt::from).product()
}

/// `G_k / (2 pi i)^k = -B_k / (2 k!) + sum_n sigma_{k-1}(n) q^n / (k-1)!` for even `k`;
/// zero for odd `k` (and `G_2` is the Eisenstein-prescription value).
fn g_series(k: u32, q_order: u32) -> QSeries {
    let mut s = QSeries::zero(0, q_order, k as i32);
    if k == 0 || k % 2 == 1 {
        return s;
    }
    let b = bernoulli_table(k as usize)[k as usize].clone();
    let constant = -b / BigRational::from_integer(factorial_big(k) * 2);
    s.add_coeff(0, LaurentPoly::constant(0, constant));
    let inv = BigRational::new(BigInt::one(), factorial_big(k - 1));
    for n in 1..=u64::from(q_order) {
        s.add_coeff(2 * n as i64, LaurentPoly::constant(0, BigRational::from_integer(sigma(n, k - 1)) * &inv));
    }
    s
}

/// `E*_k = (ln theta)^{(k)} + (k-1)! 2 G_k` for `k = 1..=max_k`.
fn e_star_series(max_k: usize, q_order: u32) -> Result<Vec<QSeries>> {
    let mut out = Vec::with_capacity(max_k);
    let mut deriv = z_series(q_order);
    for k in 1..=max_k {
        let g = g_series(k as u32, q_order).substitute(&[], 1);
        let c = rat(2) * BigRational::from_integer(factorial_big(k as u32 - 1));
        out.push(deriv.add(&g.scale(&c))?);
        deriv = deriv.d_z(0);
    }
    Ok(out)
}

/// `[e_0, .., e_max_m]` from `sum e_m c^m = exp(sum_k E*_k c^k / k!)`.
fn e_series(max_m: usize, q_order: u32) -> Result<Vec<QSeries>> {
    let stars = e_star_series(max_m, q_order)?;
    let mut e = vec![unit(1, q_order)];
    for m in 1..=max_m {
        let mut acc = QSeries::zero(1, q_order, m as i32);
        for k in 1..=m {
            let c = BigRational::new(BigInt::one(), factorial_big(k as u32 - 1));
            acc = acc.add(&stars[k - 1].scale(&c).mul(&e[m - k])?)?;
        }
        e.push(acc.scale(&BigRational::new(BigInt::one(), BigInt::from(m))));
    }
    Ok(e)
}

/// `T_n = sum_j sum_{pi} prod_k (|pi_k| - 1)! e_{|pi_k|}(sum_{i in pi_k} w_i)`,
/// each block expanded in `prod_{i in pi_k} u_i`.
fn t_series(n: usize, q_order: u32) -> Result<QSeries> {
    if n == 0 || n > 3 {
        return Err(Error::Domain(format!("T_n expansions cover n = 1..=3, not {n}")));
    }
    let e = e_series(n - 1, q_order)?;
    let mut total = QSeries::zero(n, q_order, n as i32 - 1);
    for j in 1..=n {
        let rest: Vec<usize> = (1..=n).filter(|i| *i != j).collect();
        for p in crate::combinatorics::enumerate_partitions(&rest)? {
            let mut term = unit(n, q_order);
            for block in p.blocks() {
                let map = vec![(1..=n).map(|i| i32::from(block.contains(&i))).collect_vec()];
                let c = BigRational::from_integer(factorial_big(block.len() as u32 - 1));
                term = term.mul(&e[block.len()].substitute(&map, n).scale(&c))?;
            }
            total = total.add(&term)?;
        }
    }
    Ok(total)
}

/// `F_n = T_n prod_k (1 - q^k) / theta(sum w)`, pointwise only.
pub fn f_n_pointwise(kron: &Kronecker, point: &GwPoint) -> Result<Complex64> {
    let set: Vec<usize> = (1..=point.n).collect();
    let t = t_hat_closed(&set, point, kron, false)?;
    let q = kron.modular().q();
    let mut prod = Complex64::one();
    let mut qk = Complex64::one();
    for _ in 0..10_000 {
        qk *= q;
        prod *= Complex64::one() - qk;
        if qk.norm() < 1e-18 {
            break;
        }
    }
    let sum: Complex64 = point.w.iter().sum();
    let th = kron.theta().theta(sum, false);
    if th.norm() < 1e-300 || !th.is_finite() {
        return Err(Error::Domain("theta of the w-sum vanishes".into()));
    }
    Ok(t * prod / th)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modular::ModularPoint;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn kron(tau: Complex64) -> Kronecker {
        Kronecker::from_modular(ModularPoint::new(tau).unwrap())
    }

    fn check(target: QTarget, order: u32, tau: Complex64, z: &[Complex64], tol: f64) {
        let k = kron(tau);
        let s = qexpand(target, order).unwrap();
        let v = s.evaluate(tau, z).unwrap();
        let direct = target.numeric(&k, z).unwrap();
        assert!((v - direct).norm() < tol * direct.norm().max(1.0), "{target:?}: {v} vs {direct}");
    }

    #[test]
    fn theta_and_reciprocal() {
        let s = qexpand(QTarget::Theta, 8).unwrap();
        let r = qexpand(QTarget::ThetaReciprocal, 8).unwrap();
        assert!(s.mul(&r).unwrap().is_unit());
        let tau = c(0.1, 0.5);
        check(QTarget::Theta, 12, tau, &[c(0.23, 0.11)], 1e-10);
        check(QTarget::ThetaReciprocal, 12, tau, &[c(0.23, 0.11)], 1e-10);
    }

    #[test]
    fn z_and_eisenstein() {
        let tau = c(-0.2, 0.45);
        // Points well inside |Im z| < Im tau, where the u^{-1} q tail converges fast.
        for z in [c(0.3, 0.1), c(-0.41, -0.08), c(0.05, 0.04)] {
            check(QTarget::Z, 14, tau, &[z], 1e-9);
        }
        for k in [2, 4, 6, 8] {
            check(QTarget::G { k }, 14, tau, &[], 1e-9);
        }
        assert!(qexpand(QTarget::G { k: 3 }, 5).unwrap().rows().is_empty());
    }

    #[test]
    fn kronecker_coefficients() {
        let tau = c(0.15, 0.6);
        for m in 0..=4 {
            check(QTarget::E { m }, 12, tau, &[c(0.27, 0.08)], 1e-9);
        }
    }

    #[test]
    fn gromov_witten_series() {
        let tau = c(0.1, 0.55);
        check(QTarget::T { n: 1 }, 6, tau, &[c(0.2, 0.1)], 1e-12);
        check(QTarget::T { n: 2 }, 8, tau, &[c(0.21, 0.05), c(-0.33, 0.12)], 1e-8);
        check(QTarget::T { n: 3 }, 10, tau, &[c(0.21, 0.05), c(-0.33, 0.02), c(0.12, -0.04)], 1e-7);
    }

    #[test]
    fn order_limit() {
        assert!(matches!(qexpand(QTarget::Theta, 21), Err(Error::Overflow(_))));
    }
}
