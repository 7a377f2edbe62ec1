//! Iterated A-cycle integrals on nested shifted contours, their average over
//! orderings, and numeric regularized integrals built on the excision oracle.

use itertools::Itertools;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kronecker::{EkRoute, Kronecker};
use crate::numerics::{excised_integral_many, extrapolate_to_zero, ExcisionSpec};

/// Offset step between consecutive nested contours, in units of `Im tau`.
pub const DEFAULT_OFFSET_STEP: f64 = 0.02;
/// Samples closer than this to a polar hypersurface abort the integration.
pub const POLE_PROXIMITY: f64 = 1e-4;
/// Largest arity for which every ordering is integrated by default.
pub const MAX_AVERAGED_ARITY: usize = 3;

/// A function of `z_1..z_n` (slice positions `0..n`).
pub trait Integrand: Sync {
    fn arity(&self) -> usize;

    fn eval(&self, z: &[Complex64]) -> Result<Complex64>;

    /// Distance from `z` to the nearest polar hypersurface, modulo the lattice, when known.
    fn pole_distance(&self, _z: &[Complex64]) -> Option<f64> {
        None
    }
}

/// Adapter for closures.
pub struct FnIntegrand<F> {
    pub arity: usize,
    pub f: F,
}

impl<F> Integrand for FnIntegrand<F>
where
    F: Fn(&[Complex64]) -> Complex64 + Sync,
{
    fn arity(&self) -> usize {
        self.arity
    }

    fn eval(&self, z: &[Complex64]) -> Result<Complex64> {
        Ok((self.f)(z))
    }
}

/// Which variable is integrated first and at which height each contour sits:
/// `z = eps tau + tau + t`, with `ordering[0]` innermost and offsets strictly
/// decreasing along the ordering.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IteratedContourPlan {
    ordering: Vec<usize>,
    offsets: Vec<f64>,
    node_count: usize,
}

impl IteratedContourPlan {
    pub fn new(ordering: Vec<usize>, offsets: Vec<f64>, node_count: usize) -> Result<Self> {
        let n = ordering.len();
        let mut seen = ordering.clone();
        seen.sort_unstable();
        if seen != (0..n).collect::<Vec<_>>() {
            return Err(Error::Domain(format!("{ordering:?} is not a permutation of 0..{n}")));
        }
        if offsets.len() != n {
            return Err(Error::Domain("one offset per variable is required".into()));
        }
        if offsets.iter().any(|e| *e <= 0.0) || offsets.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Domain("contour offsets must be positive and strictly decreasing".into()));
        }
        if node_count < 16 {
            return Err(Error::Domain(format!("node count {node_count} is below 16")));
        }
        Ok(IteratedContourPlan { ordering, offsets, node_count })
    }

    /// Offsets `n*step, (n-1)*step, .., step` along the ordering.
    pub fn with_default_offsets(ordering: Vec<usize>, node_count: usize) -> Result<Self> {
        let n = ordering.len();
        let offsets = default_offsets(n);
        Self::new(ordering, offsets, node_count)
    }

    pub fn ordering(&self) -> &[usize] {
        &self.ordering
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// `eps_i` for every variable `i`.
    pub fn heights(&self) -> Vec<f64> {
        let mut h = vec![0.0; self.ordering.len()];
        for (k, v) in self.ordering.iter().enumerate() {
            h[*v] = self.offsets[k];
        }
        h
    }

    /// Same ordering with every offset multiplied by `lambda > 0`.
    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        Self::new(self.ordering.clone(), self.offsets.iter().map(|e| e * lambda).collect(), self.node_count)
    }
}

/// `n*step, .., step`.
pub fn default_offsets(n: usize) -> Vec<f64> {
    (0..n).map(|k| (n - k) as f64 * DEFAULT_OFFSET_STEP).collect()
}

/// Trapezoid rule on the product of the plan's contours. With fixed heights
/// the nested integral is a product-domain integral, so the nesting only
/// enters through the heights.
pub fn iterated_a_integral(f: &dyn Integrand, plan: &IteratedContourPlan, tau: Complex64) -> Result<Complex64> {
    let n = f.arity();
    if plan.ordering.len() != n {
        return Err(Error::Domain(format!("plan has {} variables, integrand {n}", plan.ordering.len())));
    }
    let nodes = plan.node_count;
    let bases: Vec<Complex64> = plan.heights().iter().map(|e| tau * (1.0 + e)).collect();
    if n == 0 {
        return f.eval(&[]);
    }
    let inner: usize = nodes.pow(n as u32 - 1);
    let partial: Vec<Result<Complex64>> = (0..nodes)
        .into_par_iter()
        .map(|first| {
            let mut z = vec![Complex64::new(0.0, 0.0); n];
            let mut acc = Complex64::new(0.0, 0.0);
            for rest in 0..inner {
                let mut idx = rest;
                z[0] = bases[0] + first as f64 / nodes as f64;
                for (k, zk) in z.iter_mut().enumerate().skip(1) {
                    *zk = bases[k] + (idx % nodes) as f64 / nodes as f64;
                    idx /= nodes;
                }
                if let Some(d) = f.pole_distance(&z) {
                    if d < POLE_PROXIMITY {
                        return Err(Error::PoleProximity(format!(
                            "sample {z:?} lies {d:.2e} from a pole; reduce the contour offsets"
                        )));
                    }
                }
                let v = f.eval(&z)?;
                if !v.is_finite() {
                    return Err(Error::ContourSingularity { node: first * inner + rest, z: z[0] });
                }
                acc += v;
            }
            Ok(acc)
        })
        .collect();
    let mut total = Complex64::new(0.0, 0.0);
    for p in partial {
        total += p?;
    }
    Ok(total / (nodes.pow(n as u32) as f64))
}

/// Per-ordering values and their mean.
#[derive(Debug, Clone, Serialize)]
pub struct AveragedIntegral {
    pub per_ordering: Vec<(Vec<usize>, Complex64)>,
    pub mean: Complex64,
}

/// `(1/n!) sum_sigma` of the iterated integrals, orderings in lexicographic
/// order; `offsets` is the decreasing height list reused for every ordering.
pub fn averaged_a_integral(
    f: &dyn Integrand,
    offsets: &[f64],
    node_count: usize,
    tau: Complex64,
    allow_four: bool,
) -> Result<AveragedIntegral> {
    let n = f.arity();
    if n > MAX_AVERAGED_ARITY && !(allow_four && n == 4 && node_count <= 32) {
        return Err(Error::Unsupported(format!(
            "averaging over all orderings at n = {n} needs the explicit n = 4 flag and at most 32 nodes"
        )));
    }
    let mut per_ordering = Vec::new();
    for perm in (0..n).permutations(n) {
        let plan = IteratedContourPlan::new(perm.clone(), offsets.to_vec(), node_count)?;
        per_ordering.push((perm, iterated_a_integral(f, &plan, tau)?));
    }
    let count = per_ordering.len().max(1) as f64;
    let mean = per_ordering.iter().map(|(_, v)| v).sum::<Complex64>() / count;
    Ok(AveragedIntegral { per_ordering, mean })
}

/// `prod_k ê_{m_k}(t_k - a_k)` in the integration variables `t_k` with fixed anchors `a_k`.
pub struct ChenIntegrand<'a> {
    pub kron: &'a Kronecker,
    pub ms: Vec<u32>,
    pub anchors: Vec<Complex64>,
}

impl Integrand for ChenIntegrand<'_> {
    fn arity(&self) -> usize {
        self.ms.len()
    }

    fn eval(&self, t: &[Complex64]) -> Result<Complex64> {
        let mut v = Complex64::new(1.0, 0.0);
        for ((m, a), tk) in self.ms.iter().zip(&self.anchors).zip(t) {
            v *= self.kron.ek_coeff(*m as i64, tk - a, true, EkRoute::BellPolynomial)?;
        }
        Ok(v)
    }

    fn pole_distance(&self, t: &[Complex64]) -> Option<f64> {
        let m = self.kron.modular();
        t.iter().zip(&self.anchors).map(|(tk, a)| m.reduce(tk - a).0.norm()).reduce(f64::min)
    }
}

/// Ordering comparison for a product of shifted `ê` factors.
#[derive(Debug, Clone, Serialize)]
pub struct OrderingReport {
    /// Value per ordering after extrapolating the offsets to zero.
    pub values: Vec<(Vec<usize>, Complex64)>,
    pub max_deviation: f64,
    /// Spread at the unscaled offsets, before extrapolation.
    pub raw_max_deviation: f64,
}

fn max_pairwise(vs: &[Complex64]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, a) in vs.iter().enumerate() {
        for b in &vs[i + 1..] {
            d = d.max((a - b).norm());
        }
    }
    d
}

/// Integrates `prod ê_{m_k}(t_k - a_k)` in every ordering. The integrand is
/// not holomorphic, so each value depends on the contour heights; they are
/// scaled by `1, 1/2, 1/4, 1/8` and extrapolated to zero before comparing.
pub fn ordering_independence_check(
    kron: &Kronecker,
    ms: &[u32],
    anchors: &[Complex64],
    offsets: &[f64],
    node_count: usize,
) -> Result<OrderingReport> {
    if ms.len() != anchors.len() {
        return Err(Error::Domain("one anchor per factor is required".into()));
    }
    let f = ChenIntegrand { kron, ms: ms.to_vec(), anchors: anchors.to_vec() };
    let n = ms.len();
    let tau = kron.modular().tau();
    let lambdas = [1.0, 0.5, 0.25, 0.125];
    let mut values = Vec::new();
    let mut raw = Vec::new();
    for perm in (0..n).permutations(n) {
        let plan = IteratedContourPlan::new(perm.clone(), offsets.to_vec(), node_count)?;
        let ys: Vec<Complex64> =
            lambdas.iter().map(|l| iterated_a_integral(&f, &plan.scaled(*l)?, tau)).collect::<Result<_>>()?;
        raw.push(ys[0]);
        values.push((perm, extrapolate_to_zero(&lambdas, &ys)));
    }
    let vs: Vec<Complex64> = values.iter().map(|(_, v)| *v).collect();
    Ok(OrderingReport { max_deviation: max_pairwise(&vs), raw_max_deviation: max_pairwise(&raw), values })
}

/// One row of the two-factor regularized-integral comparison.
#[derive(Debug, Clone, Serialize)]
pub struct TwoFactorRow {
    pub m1: u32,
    pub mn: u32,
    pub numeric: Complex64,
    pub closed: Complex64,
}

/// Regularized integral over `z_1` of `ê_{m1}(w1 + z1 - z2) ê_{mn}(wn + zn - z1)`
/// for every pair with `m1 + mn <= max_total`, by the excision oracle, next to
/// `(delta_{mn,0} - [m1 >= 1]) ê_{m1+mn}(w1 + wn + zn - z2)`.
pub fn two_factor_integrals(
    kron: &Kronecker,
    max_total: u32,
    z2: Complex64,
    zn: Complex64,
    w1: Complex64,
    wn: Complex64,
    spec: &ExcisionSpec,
) -> Result<Vec<TwoFactorRow>> {
    let pairs: Vec<(u32, u32)> = (0..=max_total).flat_map(|a| (0..=max_total - a).map(move |b| (a, b))).collect();
    let top = max_total as usize;
    let tau = kron.modular().tau();
    let poles = [z2 - w1, zn + wn];
    let integrand = |z1: Complex64| -> Vec<Complex64> {
        let a = kron.ek_coeffs(top, w1 + z1 - z2, true, EkRoute::BellPolynomial);
        let b = kron.ek_coeffs(top, wn + zn - z1, true, EkRoute::BellPolynomial);
        match (a, b) {
            (Ok(a), Ok(b)) => pairs.iter().map(|(m1, mn)| a.get(*m1 as i64) * b.get(*mn as i64)).collect(),
            _ => vec![Complex64::new(f64::NAN, f64::NAN); pairs.len()],
        }
    };
    let numeric = excised_integral_many(integrand, pairs.len(), tau, &poles, spec)?;
    let total = kron.ek_coeffs(top, w1 + wn + zn - z2, true, EkRoute::BellPolynomial)?;
    Ok(pairs
        .iter()
        .zip(numeric)
        .map(|((m1, mn), v)| {
            let c = f64::from(u8::from(*mn == 0)) - f64::from(u8::from(*m1 >= 1));
            TwoFactorRow { m1: *m1, mn: *mn, numeric: v, closed: total.get((m1 + mn) as i64) * c }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modular::ModularPoint;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn plan_validation() {
        assert!(IteratedContourPlan::new(vec![0, 1], vec![0.04, 0.02], 64).is_ok());
        assert!(IteratedContourPlan::new(vec![0, 1], vec![0.02, 0.04], 64).is_err());
        assert!(IteratedContourPlan::new(vec![0, 0], vec![0.04, 0.02], 64).is_err());
        let p = IteratedContourPlan::with_default_offsets(vec![1, 0], 32).unwrap();
        assert_eq!(p.heights(), vec![0.02, 0.04]);
    }

    #[test]
    fn constant_integrand() {
        let f = FnIntegrand { arity: 2, f: |_: &[Complex64]| c(1.0, 0.0) };
        let v = averaged_a_integral(&f, &default_offsets(2), 16, c(0.1, 1.0), false).unwrap();
        assert!((v.mean - 1.0).norm() < 1e-14);
    }

    // The contour just above tau has crossed the zero of theta at tau, so the
    // period of e_m is the Bernoulli polynomial value B_m(-1), not delta_{m,0}.
    #[test]
    fn single_variable_e_m() {
        use crate::numerics::{bernoulli_f64, binomial, factorial};
        let kron = Kronecker::from_modular(ModularPoint::new(c(0.3, 1.1)).unwrap());
        let two_pi_i = c(0.0, 2.0 * std::f64::consts::PI);
        for m in 0..=4u32 {
            let f = FnIntegrand {
                arity: 1,
                f: |z: &[Complex64]| kron.ek_coeff(m as i64, z[0], false, EkRoute::BellPolynomial).unwrap(),
            };
            let v = averaged_a_integral(&f, &[0.02], 512, kron.modular().tau(), false).unwrap();
            let b_at_minus_one: f64 = (0..=m as usize)
                .map(|k| binomial(m as i64, k as i64) * bernoulli_f64(k) * (-1f64).powi((m as usize - k) as i32))
                .sum();
            let expect = two_pi_i.powu(m) * b_at_minus_one / factorial(m as usize);
            assert!((v.mean - expect).norm() < 1e-8, "m={m}: {} vs {expect}", v.mean);
        }
    }

    #[test]
    fn lemma_ordering_two_factors() {
        let kron = Kronecker::from_modular(ModularPoint::new(c(0.2, 1.0)).unwrap());
        let r = ordering_independence_check(&kron, &[1, 1], &[c(0.1, 0.4), c(-0.3, 0.35)], &[0.04, 0.02], 48).unwrap();
        assert!(r.raw_max_deviation > 1e-4);
        assert!(r.max_deviation < 1e-7, "{}", r.max_deviation);
    }
}
