//! The elliptic Gromov-Witten layer: the theta quotient `varpi_n`, its bordered
//! determinant form, closed-form `T̂_S` and `Ĝ_S` as set-partition sums, the
//! epsilon generating series and their numeric oracles.

use itertools::Itertools;
use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::combinatorics::{complete_bell_sequence, enumerate_partitions, CycleDecomposition, EpsMonomial, EpsPoly};
use crate::error::{lattice, Error, Result};
use crate::integrals::{averaged_a_integral, AveragedIntegral, Integrand};
use crate::kronecker::{EkRoute, EkVariant, Kronecker};
use crate::modular::ModularPoint;
use crate::numerics::{excised_integral_many, factorial, ExcisionSpec};
use crate::symbolic::{symbolic_reg_integrate_all, EKExpr, EKMonomial, Factor, LinearForm};
use crate::theta::{ThetaEvaluator, NEAR_LATTICE};

/// Largest `n` for which the determinant expansion is enumerated.
pub const MAX_DETERMINANT_EXPANSION: usize = 5;

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn lattice_distance(m: &ModularPoint, z: Complex64) -> f64 {
    m.reduce(z).0.norm()
}

fn subset_label(s: &[usize]) -> String {
    s.iter().map(|i| format!("w_{i}")).join(" + ")
}

/// Parameters `w_1..w_n` at a modular point, checked for genericity: every
/// nonempty subset sum of the `w_i` stays off the lattice.
#[derive(Debug, Clone, Serialize)]
pub struct GwPoint {
    pub n: usize,
    pub w: Vec<Complex64>,
    pub tau: Complex64,
    /// Smallest lattice distance over all nonempty subset sums.
    pub min_subset_distance: f64,
}

impl GwPoint {
    pub fn new(w: Vec<Complex64>, m: &ModularPoint) -> Result<Self> {
        if w.is_empty() || w.len() > 16 {
            return Err(Error::Domain(format!("n = {} is outside 1..=16", w.len())));
        }
        let n = w.len();
        let mut min_subset_distance = f64::INFINITY;
        for size in 1..=n {
            for s in (1..=n).combinations(size) {
                let sum: Complex64 = s.iter().map(|i| w[i - 1]).sum();
                let d = lattice_distance(m, sum);
                if d < NEAR_LATTICE {
                    return Err(lattice(subset_label(&s), sum));
                }
                min_subset_distance = min_subset_distance.min(d);
            }
        }
        Ok(GwPoint { n, w, tau: m.tau(), min_subset_distance })
    }

    /// `w` with an unused slot at index 0, matching `LinearForm` indexing.
    pub fn padded(&self) -> Vec<Complex64> {
        std::iter::once(Complex64::zero()).chain(self.w.iter().copied()).collect()
    }
}

fn denominator(theta: &ThetaEvaluator, z: Complex64, what: impl FnOnce() -> String) -> Result<Complex64> {
    if lattice_distance(theta.modular(), z) < NEAR_LATTICE {
        return Err(lattice(what(), z));
    }
    Ok(theta.theta(z, false))
}

/// `theta(sum w) / prod theta(w_i) * prod_{i<j} theta(z_i+w_i-z_j-w_j) theta(z_i-z_j)
/// / (theta(z_i+w_i-z_j) theta(z_i-w_j-z_j))`; positions `0..n` hold `z_1..z_n`.
pub fn varpi(theta: &ThetaEvaluator, z: &[Complex64], w: &[Complex64]) -> Result<Complex64> {
    let n = w.len();
    if z.len() != n {
        return Err(Error::Domain("varpi needs as many z as w values".into()));
    }
    let sum: Complex64 = w.iter().sum();
    let mut v = theta.theta(sum, false);
    for (i, wi) in w.iter().enumerate() {
        v /= denominator(theta, *wi, || format!("theta(w_{})", i + 1))?;
    }
    for i in 0..n {
        for j in i + 1..n {
            v *= theta.theta(z[i] + w[i] - z[j] - w[j], false) * theta.theta(z[i] - z[j], false);
            v /= denominator(theta, z[i] + w[i] - z[j], || format!("theta(z_{0} + w_{0} - z_{1})", i + 1, j + 1))?;
            v /= denominator(theta, z[i] - w[j] - z[j], || format!("theta(z_{0} - w_{1} - z_{1})", i + 1, j + 1))?;
        }
    }
    Ok(v)
}

/// Entry `(i, j)` of the unbordered matrix: `Z` (or `Ẑ`) at `w_i + z_i - z_j`.
fn z_entry(
    theta: &ThetaEvaluator,
    z: &[Complex64],
    w: &[Complex64],
    i: usize,
    j: usize,
    hat: bool,
) -> Result<Complex64> {
    let s = w[i] + z[i] - z[j];
    theta.z_fn(s, hat).map_err(|e| match e {
        Error::LatticePoint { .. } => lattice(format!("Z(w_{0} + z_{0} - z_{1})", i + 1, j + 1), s),
        other => other,
    })
}

/// The `(n+1) x (n+1)` matrix with border row `(0, 1, .., 1)`, border column
/// `(0, -1, .., -1)` and entries `Z(w_i + z_i - z_j)`.
pub fn bordered_matrix(
    theta: &ThetaEvaluator,
    z: &[Complex64],
    w: &[Complex64],
    hat: bool,
) -> Result<DMatrix<Complex64>> {
    let n = w.len();
    let mut m = DMatrix::from_element(n + 1, n + 1, Complex64::zero());
    for k in 1..=n {
        m[(0, k)] = Complex64::one();
        m[(k, 0)] = -Complex64::one();
    }
    for i in 0..n {
        for j in 0..n {
            m[(i + 1, j + 1)] = z_entry(theta, z, w, i, j, hat)?;
        }
    }
    Ok(m)
}

/// Determinant of [`bordered_matrix`].
pub fn varpi_det(theta: &ThetaEvaluator, z: &[Complex64], w: &[Complex64], hat: bool) -> Result<Complex64> {
    if z.len() != w.len() {
        return Err(Error::Domain("varpi_det needs as many z as w values".into()));
    }
    Ok(bordered_matrix(theta, z, w, hat)?.determinant())
}

/// Determinant of the unbordered principal submatrix on `rows` (0-based positions).
pub fn principal_minor(
    theta: &ThetaEvaluator,
    z: &[Complex64],
    w: &[Complex64],
    rows: &[usize],
    hat: bool,
) -> Result<Complex64> {
    let k = rows.len();
    let mut m = DMatrix::from_element(k, k, Complex64::zero());
    for (a, i) in rows.iter().enumerate() {
        for (b, j) in rows.iter().enumerate() {
            m[(a, b)] = z_entry(theta, z, w, *i, *j, hat)?;
        }
    }
    Ok(m.determinant())
}

fn block_factor(block: &[usize]) -> Factor {
    let form = block.iter().fold(LinearForm::zero(), |f, i| f.with_w(*i, 1));
    Factor::hat(block.len() as u32, form)
}

/// `sum_{pi in Pi_S} prod_k (|pi_k| - 1)! ê_{|pi_k|}(sum_{i in pi_k} w_i)`.
pub fn g_hat_expr(set: &[usize]) -> Result<EKExpr> {
    let mut out = EKExpr::zero();
    for p in enumerate_partitions(set)? {
        let coefficient =
            p.blocks().iter().map(|b| rat(factorial(b.len() - 1) as i64)).fold(BigRational::one(), |a, b| a * b);
        let factors = p.blocks().iter().map(|b| block_factor(b)).collect();
        out.add_monomial(EKMonomial::new(coefficient, factors));
    }
    Ok(out)
}

/// `sum_{j in S} Ĝ_{S \ j}`.
pub fn t_hat_expr(set: &[usize]) -> Result<EKExpr> {
    let mut out = EKExpr::zero();
    for j in set {
        let rest: Vec<usize> = set.iter().copied().filter(|i| i != j).collect();
        out = out + g_hat_expr(&rest)?;
    }
    Ok(out)
}

/// How the permutations of `{0} ∪ [n]` split by the shape of the cycle through 0.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ExpansionCensus {
    /// `(0)` is a fixed point, so the term carries `Z_00 = 0`.
    pub trivial_zero_cycle: usize,
    /// `(0 j_0 .. j_r)` with `r >= 1`: an open chain, integrating to zero.
    pub open_chain: usize,
    /// `(0 j_0)`: the remaining permutation of `[n] \ j_0` contributes.
    pub contributing: usize,
}

/// The bordered determinant expanded over permutations, each term integrated
/// by the symbolic engine.
#[derive(Debug, Clone)]
pub struct DeterminantExpansion {
    pub n: usize,
    /// `det` itself as a polynomial in `ê_1` factors.
    pub determinant: EKExpr,
    /// Regularized integral over `E_1 x .. x E_n`.
    pub integral: EKExpr,
    pub census: ExpansionCensus,
}

fn matrix_factor(i: usize, j: usize) -> Factor {
    let form = if i == j { LinearForm::w(i) } else { LinearForm::s(i, j, i) };
    Factor::hat(1, form)
}

/// Expands `det` of the bordered matrix with symbolic entries `ê_1(z_i - z_j + w_i)`
/// and integrates every term. Open chains are checked to integrate to zero.
pub fn determinant_expansion(n: usize) -> Result<DeterminantExpansion> {
    if n == 0 || n > MAX_DETERMINANT_EXPANSION {
        return Err(Error::Unsupported(format!("determinant expansion for n = {n}")));
    }
    let ground: Vec<usize> = (0..=n).collect();
    let mut determinant = EKExpr::zero();
    let mut integral = EKExpr::zero();
    let mut census = ExpansionCensus::default();
    for image in ground.iter().copied().permutations(n + 1) {
        let rho = CycleDecomposition::from_images(&ground, &image)?;
        let zero_cycle = &rho.cycles[0];
        if zero_cycle.len() == 1 {
            census.trivial_zero_cycle += 1;
            continue;
        }
        // Z_{0 j_0} = 1 and Z_{j_r 0} = -1.
        let coefficient = -i64::from(rho.sign);
        let mut factors = Vec::new();
        for (k, i) in image.iter().enumerate().skip(1) {
            if *i != 0 {
                factors.push(matrix_factor(k, *i));
            }
        }
        let term = EKExpr::from_monomial(EKMonomial::new(rat(coefficient), factors));
        let value = symbolic_reg_integrate_all(&term, n)?;
        if zero_cycle.len() > 2 {
            census.open_chain += 1;
            if !value.is_empty() {
                return Err(Error::Consistency(format!("open chain {zero_cycle:?} integrated to {value}")));
            }
        } else {
            census.contributing += 1;
        }
        determinant = determinant + term;
        integral = integral + value;
    }
    Ok(DeterminantExpansion { n, determinant, integral, census })
}

/// Unbordered determinant on `set` expanded and integrated symbolically.
pub fn g_hat_by_determinant(set: &[usize]) -> Result<EKExpr> {
    let k = set.len();
    if k > MAX_DETERMINANT_EXPANSION {
        return Err(Error::Unsupported(format!("determinant expansion on {k} indices")));
    }
    let n = set.iter().copied().max().unwrap_or(0);
    let mut out = EKExpr::zero();
    for image in set.iter().copied().permutations(k) {
        let sigma = CycleDecomposition::from_images(set, &image)?;
        let factors = set.iter().zip(&image).map(|(i, j)| matrix_factor(*i, *j)).collect();
        let term = EKExpr::from_monomial(EKMonomial::new(rat(i64::from(sigma.sign)), factors));
        out = out + symbolic_reg_integrate_all(&term, n)?;
    }
    Ok(out)
}

fn closed_value(expr: &EKExpr, point: &GwPoint, kron: &Kronecker, hat: bool) -> Result<Complex64> {
    let e = if hat { expr.clone() } else { expr.holomorphic_limit() };
    e.numeric_eval(&[], &point.padded(), kron)
}

/// Closed-form `T̂_S` (or its holomorphic limit `T_S`); indices in `set` refer to `point.w`.
pub fn t_hat_closed(set: &[usize], point: &GwPoint, kron: &Kronecker, hat: bool) -> Result<Complex64> {
    closed_value(&t_hat_expr(set)?, point, kron, hat)
}

/// Closed-form `Ĝ_S` (or `G_S`).
pub fn g_hat_closed(set: &[usize], point: &GwPoint, kron: &Kronecker, hat: bool) -> Result<Complex64> {
    closed_value(&g_hat_expr(set)?, point, kron, hat)
}

/// `(B̂_m(Ê*_1, .., Ê*_m) / m, (m-1)! ê_m)` at `w`, the first through the
/// Eisenstein-Kronecker series and the second through the theta jet.
pub fn bell_normalization(kron: &Kronecker, m: usize, w: Complex64) -> Result<(Complex64, Complex64)> {
    let stars = kron.ek_series_all(m, w, EkVariant::StarHat)?;
    let bell = complete_bell_sequence(&stars[1..=m]);
    let lhs = bell[m] / m as f64;
    let rhs = kron.ek_coeff(m as i64, w, true, EkRoute::JetExtraction)? * factorial(m - 1);
    Ok((lhs, rhs))
}

/// Exact check that `B_m(x) / m = (m-1)! [t^m] exp(sum_k x_k t^k / k!)` for
/// formal `x_k`, with `x_k` modeled as independent `ê_k(w_k)` symbols.
pub fn bell_normalization_exact(max_m: usize) -> bool {
    let xs: Vec<EKExpr> = (1..=max_m).map(|k| EKExpr::e_hat(k as u32, LinearForm::w(k))).collect();
    let bell = complete_bell_sequence(&xs);
    // E' = P' E for E = exp(P), P = sum x_k t^k / k!.
    let mut e = vec![EKExpr::one()];
    for m in 1..=max_m {
        let mut acc = EKExpr::zero();
        for k in 1..=m {
            let c = BigRational::new(BigInt::from(k), BigInt::from(factorial(k) as i64));
            acc = acc + xs[k - 1].scale(&c) * e[m - k].clone();
        }
        e.push(acc.scale(&BigRational::new(BigInt::one(), BigInt::from(m))));
    }
    (1..=max_m).all(|m| {
        let lhs = bell[m].scale(&BigRational::new(BigInt::one(), BigInt::from(m)));
        let rhs = e[m].scale(&rat(factorial(m - 1) as i64));
        (lhs - rhs).is_empty()
    })
}

/// `varpi_n` in the integration variables.
pub struct VarpiIntegrand<'a> {
    pub theta: &'a ThetaEvaluator,
    pub w: Vec<Complex64>,
}

impl Integrand for VarpiIntegrand<'_> {
    fn arity(&self) -> usize {
        self.w.len()
    }

    fn eval(&self, z: &[Complex64]) -> Result<Complex64> {
        varpi(self.theta, z, &self.w)
    }

    fn pole_distance(&self, z: &[Complex64]) -> Option<f64> {
        let m = self.theta.modular();
        let n = self.w.len();
        let mut d = f64::INFINITY;
        for i in 0..n {
            for j in i + 1..n {
                d = d.min(lattice_distance(m, z[i] + self.w[i] - z[j]));
                d = d.min(lattice_distance(m, z[i] - self.w[j] - z[j]));
            }
        }
        Some(d)
    }
}

/// Ordering-averaged A-cycle integral of `varpi_n`; compares with the
/// holomorphic limit `T_{[n]}`.
pub fn t_numeric(kron: &Kronecker, point: &GwPoint, offsets: &[f64], node_count: usize) -> Result<AveragedIntegral> {
    let f = VarpiIntegrand { theta: kron.theta(), w: point.w.clone() };
    averaged_a_integral(&f, offsets, node_count, kron.modular().tau(), false)
}

/// Which generating series to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SeriesKind {
    T,
    G,
    H,
}

fn subsets(n: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..=n).flat_map(move |k| (1..=n).combinations(k))
}

/// `T̂ = 1 + sum_{S nonempty} e_0 e_S T̂_S`, `Ĝ = sum_S e_S Ĝ_S`, and
/// `Ĥ = e_0 [e_0^1] T̂ + Ĝ`.
pub fn generating_series(
    point: &GwPoint,
    kron: &Kronecker,
    which: SeriesKind,
    hat: bool,
) -> Result<EpsPoly<Complex64>> {
    let n = point.n;
    match which {
        SeriesKind::T => {
            let mut t = EpsPoly::constant(Complex64::one());
            for s in subsets(n).filter(|s| !s.is_empty()) {
                let mono = EpsMonomial::from_indices(std::iter::once(0).chain(s.iter().copied()))?;
                t.add_term(mono, t_hat_closed(&s, point, kron, hat)?);
            }
            Ok(t)
        }
        SeriesKind::G => {
            let mut g = EpsPoly::zero();
            for s in subsets(n) {
                g.add_term(EpsMonomial::from_indices(s.iter().copied())?, g_hat_closed(&s, point, kron, hat)?);
            }
            Ok(g)
        }
        SeriesKind::H => {
            let t = generating_series(point, kron, SeriesKind::T, hat)?;
            let g = generating_series(point, kron, SeriesKind::G, hat)?;
            Ok(assemble_h(&t, &g))
        }
    }
}

/// `e_0 [e_0^1] T + G`. Every non-constant term of `T` already carries
/// `e_0`, so this is `(T - 1) + G`.
pub fn assemble_h(t: &EpsPoly<Complex64>, g: &EpsPoly<Complex64>) -> EpsPoly<Complex64> {
    let mut h = g.clone();
    for (m, c) in t.terms() {
        if m.contains(0) {
            h.add_term(*m, *c);
        }
    }
    h
}

/// Largest coefficient of `a - b`.
pub fn eps_distance(a: &EpsPoly<Complex64>, b: &EpsPoly<Complex64>) -> f64 {
    let keys: std::collections::BTreeSet<EpsMonomial> = a.terms().chain(b.terms()).map(|(m, _)| *m).collect();
    keys.into_iter().map(|m| (a.coeff(m) - b.coeff(m)).norm()).fold(0.0, f64::max)
}

/// `Ĥ` for `n <= 2` from the regularized integrals of the principal minors of
/// the bordered matrix, each computed by the excision oracle.
pub fn h_by_minor_integration(point: &GwPoint, kron: &Kronecker, spec: &ExcisionSpec) -> Result<EpsPoly<Complex64>> {
    let theta = kron.theta();
    let w = &point.w;
    let mut h = EpsPoly::constant(Complex64::one());
    for i in 1..=point.n {
        // {i}: a z-free entry; {0, i}: det [[0, 1], [-1, Z_ii]] = 1.
        h.add_term(EpsMonomial::from_indices([i])?, kron.e_hat(1, w[i - 1])?);
        h.add_term(EpsMonomial::from_indices([0, i])?, Complex64::one());
    }
    match point.n {
        1 => {}
        2 => {
            // Both minors depend on z_1 - z_2 only, so E_1 x E_2 reduces to one torus.
            let f = |x: Complex64| -> Vec<Complex64> {
                let z = [x, Complex64::zero()];
                match (principal_minor(theta, &z, w, &[0, 1], true), varpi_det(theta, &z, w, true)) {
                    (Ok(g), Ok(t)) => vec![g, t],
                    _ => vec![Complex64::new(f64::NAN, f64::NAN); 2],
                }
            };
            let poles = [-w[0], w[1]];
            let v = excised_integral_many(f, 2, kron.modular().tau(), &poles, spec)?;
            h.add_term(EpsMonomial::from_indices([1, 2])?, v[0]);
            h.add_term(EpsMonomial::from_indices([0, 1, 2])?, v[1]);
        }
        n => return Err(Error::Unsupported(format!("minor integration at n = {n}"))),
    }
    Ok(h)
}

/// One coefficient of both sides of `T - 1 - e_0(e_1 + ..) = (T - 1)(G - 1)`.
#[derive(Debug, Clone, Serialize)]
pub struct CoefficientRow {
    pub monomial: String,
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub deviation: f64,
}

/// Informational comparison; never gates.
#[derive(Debug, Clone, Serialize)]
pub struct Prop49Report {
    pub n: usize,
    pub w: Vec<Complex64>,
    pub tau: Complex64,
    pub hat: bool,
    pub rows: Vec<CoefficientRow>,
    /// Top coefficient `T_{[n]}` (holomorphic limit) from the partition formula.
    pub top_closed: Complex64,
    /// Top coefficient predicted by the convolution `sum_{I} T_I G_{I^c}`.
    pub top_convolution: Complex64,
    /// Ordering-averaged A-cycle integral of `varpi_n`, when requested.
    pub top_numeric: Option<Complex64>,
    pub numeric_vs_closed: Option<f64>,
    pub numeric_vs_convolution: Option<f64>,
    /// `|Ĥ - e_0 [e_0^1] T̂ - Ĝ|`, zero by construction.
    pub h_assembly_residual: f64,
    /// Deviation of the assembled `Ĥ` from minor integration, for `n <= 2`.
    pub h_minor_deviation: Option<f64>,
}

/// Numeric settings for the oracle parts of [`prop49_report`].
#[derive(Debug, Clone)]
pub struct Prop49Numerics {
    pub offsets: Vec<f64>,
    pub node_count: usize,
    pub excision: Option<ExcisionSpec>,
}

/// Both sides of the `T`/`G` convolution relation per coefficient, plus the
/// numeric top coefficient when `numerics` is given.
pub fn prop49_report(
    point: &GwPoint,
    kron: &Kronecker,
    hat: bool,
    numerics: Option<&Prop49Numerics>,
) -> Result<Prop49Report> {
    let n = point.n;
    if !(2..=3).contains(&n) {
        return Err(Error::Domain(format!("the convolution report covers n = 2, 3, not {n}")));
    }
    let t = generating_series(point, kron, SeriesKind::T, hat)?;
    let g = generating_series(point, kron, SeriesKind::G, hat)?;
    let minus_one = EpsPoly::constant(-Complex64::one());
    let mut lhs = t.clone() + minus_one.clone();
    for i in 1..=n {
        lhs.add_term(EpsMonomial::from_indices([0, i])?, -Complex64::one());
    }
    let rhs = &(t.clone() + minus_one.clone()) * &(g.clone() + minus_one.clone());
    let keys: std::collections::BTreeSet<EpsMonomial> = lhs.terms().chain(rhs.terms()).map(|(m, _)| *m).collect();
    let rows = keys
        .into_iter()
        .map(|m| {
            let (l, r) = (lhs.coeff(m), rhs.coeff(m));
            CoefficientRow { monomial: m.to_string(), lhs: l, rhs: r, deviation: (l - r).norm() }
        })
        .collect();

    let full: Vec<usize> = (1..=n).collect();
    let top_closed = t_hat_closed(&full, point, kron, false)?;
    let mut top_convolution = Complex64::zero();
    for k in 1..n {
        for part in full.iter().copied().combinations(k) {
            let rest: Vec<usize> = full.iter().copied().filter(|i| !part.contains(i)).collect();
            top_convolution += t_hat_closed(&part, point, kron, false)? * g_hat_closed(&rest, point, kron, false)?;
        }
    }

    let h = assemble_h(&t, &g);
    let h_assembly_residual = eps_distance(&h, &(t.clone() + minus_one.clone() + g.clone()));
    let (mut top_numeric, mut h_minor_deviation) = (None, None);
    if let Some(num) = numerics {
        top_numeric = Some(t_numeric(kron, point, &num.offsets, num.node_count)?.mean);
        if let (Some(spec), true) = (&num.excision, n <= 2) {
            h_minor_deviation = Some(eps_distance(&h, &h_by_minor_integration(point, kron, spec)?));
        }
    }
    Ok(Prop49Report {
        n,
        w: point.w.clone(),
        tau: point.tau,
        hat,
        rows,
        top_closed,
        top_convolution,
        numeric_vs_closed: top_numeric.map(|v| (v - top_closed).norm()),
        numeric_vs_convolution: top_numeric.map(|v| (v - top_convolution).norm()),
        top_numeric,
        h_assembly_residual,
        h_minor_deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn kron() -> Kronecker {
        Kronecker::from_modular(ModularPoint::new(c(0.1, 1.05)).unwrap())
    }

    #[test]
    fn varpi_basics() {
        let k = kron();
        let th = k.theta();
        let w = [c(0.21, 0.13)];
        assert!((varpi(th, &[c(0.3, 0.2)], &w).unwrap() - 1.0).norm() < 1e-13);

        let w = [c(0.17, 0.05), c(-0.31, 0.11)];
        let z = [c(0.4, 0.3), c(-0.2, 0.5)];
        let v = varpi(th, &z, &w).unwrap();
        let shifted = varpi(th, &[z[0] + k.modular().tau(), z[1]], &w).unwrap();
        assert!((v - shifted).norm() < 1e-8 * v.norm().max(1.0));
        let swapped = varpi(th, &[z[1], z[0]], &[w[1], w[0]]).unwrap();
        assert!((v - swapped).norm() < 1e-10 * v.norm().max(1.0));
        for hat in [false, true] {
            let d = varpi_det(th, &z, &w, hat).unwrap();
            assert!((v - d).norm() < 1e-9 * v.norm().max(1.0), "hat={hat}");
        }
    }

    #[test]
    fn lattice_hits_are_named() {
        let k = kron();
        let err = varpi(k.theta(), &[c(0.0, 0.0), c(0.0, 0.0)], &[c(0.2, 0.1), c(0.0, 0.0)]).unwrap_err();
        assert!(err.to_string().contains("w_2"), "{err}");
        let m = k.modular();
        assert!(GwPoint::new(vec![c(0.3, 0.1), c(-0.3, -0.1)], m).is_err());
    }

    #[test]
    fn closed_forms_small_sets() {
        assert_eq!(t_hat_expr(&[1]).unwrap(), EKExpr::one());
        assert_eq!(g_hat_expr(&[]).unwrap(), EKExpr::one());
        let two: EKExpr = "1 * eh[1](w1) + 1 * eh[1](w2)".parse().unwrap();
        assert_eq!(t_hat_expr(&[1, 2]).unwrap(), two);
        let g2: EKExpr = "1 * eh[1](w1)*eh[1](w2) + 1 * eh[2](w1 + w2)".parse().unwrap();
        assert_eq!(g_hat_expr(&[1, 2]).unwrap(), g2);
        assert_eq!(t_hat_expr(&[1, 2, 3]).unwrap().len(), 6);
    }

    #[test]
    fn determinant_route_matches_partitions() {
        for n in 1..=4 {
            let e = determinant_expansion(n).unwrap();
            let full: Vec<usize> = (1..=n).collect();
            assert_eq!(e.integral, t_hat_expr(&full).unwrap(), "n={n}");
            assert_eq!(e.census.contributing, n * factorial(n - 1) as usize);
            assert_eq!(g_hat_by_determinant(&full).unwrap(), g_hat_expr(&full).unwrap(), "n={n}");
        }
    }

    #[test]
    fn bell_normalization_agrees() {
        assert!(bell_normalization_exact(8));
        let k = kron();
        for m in 1..=8 {
            let (l, r) = bell_normalization(&k, m, c(0.23, 0.31)).unwrap();
            assert!((l - r).norm() < 1e-8 * r.norm().max(1.0), "m={m}: {l} vs {r}");
        }
    }

    #[test]
    fn generating_series_n1() {
        let k = kron();
        let p = GwPoint::new(vec![c(0.21, 0.13)], k.modular()).unwrap();
        let t = generating_series(&p, &k, SeriesKind::T, true).unwrap();
        assert_eq!(t.len(), 2);
        assert!((t.coeff(EpsMonomial::from_indices([0, 1]).unwrap()) - 1.0).norm() < 1e-14);
        let g = generating_series(&p, &k, SeriesKind::G, true).unwrap();
        let e1 = k.e_hat(1, c(0.21, 0.13)).unwrap();
        assert!((g.coeff(EpsMonomial::from_indices([1]).unwrap()) - e1).norm() < 1e-12);
        let h = generating_series(&p, &k, SeriesKind::H, true).unwrap();
        assert_eq!(h.coeff(EpsMonomial::ONE), Complex64::one());
    }

    #[test]
    fn two_point_function_numeric() {
        let k = kron();
        let p = GwPoint::new(vec![c(0.17, 0.0), c(0.38, 0.0)], k.modular()).unwrap();
        let v = t_numeric(&k, &p, &[0.04, 0.02], 128).unwrap();
        let th = k.theta();
        let expect = th.z_fn(p.w[0], false).unwrap() + th.z_fn(p.w[1], false).unwrap();
        assert!((v.mean - expect).norm() < 1e-6, "{} vs {expect}", v.mean);
        let closed = t_hat_closed(&[1, 2], &p, &k, false).unwrap();
        assert!((closed - expect).norm() < 1e-10);
    }
}
