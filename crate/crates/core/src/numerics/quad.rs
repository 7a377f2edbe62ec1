//! Periodic contour quadrature, residues on shrinking circles, excised area
//! integrals and finite-difference Wirtinger derivatives.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// A straight periodic contour `base + t * direction`, `t in [0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourSpec {
    pub base_point: Complex64,
    pub direction: Complex64,
    pub node_count: usize,
    /// The `eps` of a shifted A-cycle `eps*tau + tau + t`; informational for
    /// contours built by hand.
    pub offset_height: f64,
}

impl ContourSpec {
    /// The shifted A-cycle `eps*tau + tau + t`.
    pub fn a_cycle(tau: Complex64, eps: f64, node_count: usize) -> Self {
        ContourSpec {
            base_point: tau * (1.0 + eps),
            direction: Complex64::new(1.0, 0.0),
            node_count,
            offset_height: eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.node_count < 16 {
            return Err(Error::Domain(format!("node_count {} < 16", self.node_count)));
        }
        Ok(())
    }

    /// Trapezoid nodes of the contour.
    pub fn nodes(&self) -> impl Iterator<Item = Complex64> + '_ {
        let n = self.node_count as f64;
        (0..self.node_count).map(move |k| self.base_point + self.direction * (k as f64 / n))
    }
}

/// Trapezoid rule for `int f dz` over one period of the contour.
pub fn contour_integrate<F>(f: F, c: &ContourSpec) -> Result<Complex64>
where
    F: Fn(Complex64) -> Complex64,
{
    c.validate()?;
    let mut sum = Complex64::new(0.0, 0.0);
    for (node, z) in c.nodes().enumerate() {
        let v = f(z);
        if !v.is_finite() {
            return Err(Error::ContourSingularity { node, z });
        }
        sum += v;
    }
    Ok(sum * c.direction / c.node_count as f64)
}

/// Value at `x = 0` of the interpolating polynomial through `(xs[i], ys[i])`.
pub fn extrapolate_to_zero(xs: &[f64], ys: &[Complex64]) -> Complex64 {
    let mut p: Vec<Complex64> = ys.to_vec();
    let n = p.len();
    for m in 1..n {
        for i in 0..n - m {
            let (xi, xj) = (xs[i], xs[i + m]);
            p[i] = (p[i + 1] * xi - p[i] * xj) / (xi - xj);
        }
    }
    p[0]
}

/// Richardson table over decreasing abscissae: returns the full extrapolant and
/// the one obtained without the largest abscissa.
fn last_two_extrapolants(xs: &[f64], ys: &[Complex64]) -> (Complex64, Complex64) {
    let full = extrapolate_to_zero(xs, ys);
    let tail = extrapolate_to_zero(&xs[1..], &ys[1..]);
    (full, tail)
}

/// Default stabilization target for [`circle_residue`].
pub const RESIDUE_TOL: f64 = 1e-8;

/// `(1/2 pi i) oint f dz` over circles of radius `radius / 2^k`, extrapolated to
/// zero radius with a polynomial model in `r^2`.
pub fn circle_residue<F>(f: F, center: Complex64, radius: f64, node_count: usize) -> Result<Complex64>
where
    F: Fn(Complex64) -> Complex64,
{
    circle_residue_tol(f, center, radius, node_count, RESIDUE_TOL)
}

pub fn circle_residue_tol<F>(f: F, center: Complex64, radius: f64, node_count: usize, tol: f64) -> Result<Complex64>
where
    F: Fn(Complex64) -> Complex64,
{
    if radius <= 0.0 || node_count < 8 {
        return Err(Error::Domain("circle_residue needs radius > 0 and at least 8 nodes".into()));
    }
    let levels = 5;
    let mut xs = Vec::with_capacity(levels);
    let mut ys = Vec::with_capacity(levels);
    for l in 0..levels {
        let r = radius / f64::powi(2.0, l as i32);
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..node_count {
            let d = Complex64::from_polar(r, 2.0 * PI * k as f64 / node_count as f64);
            let v = f(center + d);
            if !v.is_finite() {
                return Err(Error::ContourSingularity { node: k, z: center + d });
            }
            acc += v * d;
        }
        xs.push(r * r);
        ys.push(acc / node_count as f64);
    }
    let (full, tail) = last_two_extrapolants(&xs, &ys);
    let diff = (full - tail).norm();
    if diff > 10.0 * tol * full.norm().max(1.0) {
        return Err(Error::ResidueNotConverged(diff));
    }
    Ok(full)
}

/// Grid and radius schedule of the excised area-integral oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcisionSpec {
    pub grid_resolution: usize,
    pub excision_radii: Vec<f64>,
    pub extrapolation_order: usize,
    /// Tolerance the caller intends to test against; convergence is declared when
    /// the last two extrapolants differ by less than ten times this.
    pub target_tol: f64,
}

impl Default for ExcisionSpec {
    fn default() -> Self {
        ExcisionSpec {
            grid_resolution: 400,
            excision_radii: vec![0.08, 0.04, 0.02],
            extrapolation_order: 2,
            target_tol: 1e-4,
        }
    }
}

impl ExcisionSpec {
    pub fn validate(&self, tau: Complex64) -> Result<()> {
        if self.excision_radii.is_empty() {
            return Err(Error::Domain("no excision radii".into()));
        }
        if self.excision_radii.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Domain("excision radii must be strictly decreasing".into()));
        }
        let spacing = tau.norm().max(1.0) / self.grid_resolution as f64;
        let smallest = *self.excision_radii.last().unwrap_or(&0.0);
        if smallest < 4.0 * spacing {
            return Err(Error::Domain(format!(
                "smallest excision radius {smallest} is below 4x grid spacing {spacing:.3e}"
            )));
        }
        Ok(())
    }
}

/// C-infinity step: 0 at t <= 0, 1 at t >= 1, flat to all orders at both ends.
fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / t).exp();
    let b = (-1.0 / (1.0 - t)).exp();
    a / (a + b)
}

/// Shortest representative of `d` modulo the lattice `Z + Z tau`.
fn reduce_to_nearest(d: Complex64, tau: Complex64) -> Complex64 {
    let b = (d.im / tau.im).round();
    let d = d - tau * b;
    let a = d.re.round();
    let d = d - a;
    let mut best = d;
    for i in -1..=1 {
        for j in -1..=1 {
            let cand = d + i as f64 + tau * j as f64;
            if cand.norm() < best.norm() {
                best = cand;
            }
        }
    }
    best
}

/// Area integral of `f` against the unit-mass volume form over a fundamental
/// domain of `Z + Z tau`, with smooth radial cut-offs of radius `r` around the
/// listed poles (taken modulo the lattice), extrapolated to `r -> 0`.
///
/// The integrand must be doubly periodic away from the poles; the grid is the
/// midpoint rule on the centered parallelogram.
pub fn excised_integral<F>(f: F, tau: Complex64, poles: &[Complex64], spec: &ExcisionSpec) -> Result<Complex64>
where
    F: Fn(Complex64) -> Complex64 + Sync,
{
    Ok(excised_integral_many(|z| vec![f(z)], 1, tau, poles, spec)?[0])
}

/// [`excised_integral`] for `width` integrands sharing one grid and one pole set.
pub fn excised_integral_many<F>(
    f: F,
    width: usize,
    tau: Complex64,
    poles: &[Complex64],
    spec: &ExcisionSpec,
) -> Result<Vec<Complex64>>
where
    F: Fn(Complex64) -> Vec<Complex64> + Sync,
{
    spec.validate(tau)?;
    let n = spec.grid_resolution;
    let radii = &spec.excision_radii;
    let zero = Complex64::new(0.0, 0.0);
    let rows: Vec<Result<Vec<Vec<Complex64>>>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let b = (j as f64 + 0.5) / n as f64 - 0.5;
            let mut acc = vec![vec![zero; width]; radii.len()];
            for i in 0..n {
                let a = (i as f64 + 0.5) / n as f64 - 0.5;
                let z = Complex64::new(a, 0.0) + tau * b;
                let dists: Vec<f64> = poles.iter().map(|p| reduce_to_nearest(z - p, tau).norm()).collect();
                let weights: Vec<f64> =
                    radii.iter().map(|r| dists.iter().map(|d| smooth_step(d / r)).product()).collect();
                if weights.iter().all(|w| *w < 1e-300) {
                    continue;
                }
                let v = f(z);
                if v.len() != width || v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::ContourSingularity { node: j * n + i, z });
                }
                for (slot, w) in acc.iter_mut().zip(&weights) {
                    for (s, x) in slot.iter_mut().zip(&v) {
                        *s += x * *w;
                    }
                }
            }
            Ok(acc)
        })
        .collect();
    let mut totals = vec![vec![zero; width]; radii.len()];
    for row in rows {
        for (t, v) in totals.iter_mut().zip(row?) {
            for (a, b) in t.iter_mut().zip(v) {
                *a += b;
            }
        }
    }
    let cells = (n * n) as f64;
    let use_count = if poles.is_empty() { 1 } else { (spec.extrapolation_order + 1).min(radii.len()) };
    let start = radii.len() - use_count;
    let xs: Vec<f64> = radii[start..].iter().map(|r| r * r).collect();
    (0..width)
        .map(|k| {
            let ys: Vec<Complex64> = totals[start..].iter().map(|t| t[k] / cells).collect();
            if use_count == 1 {
                return Ok(ys[0]);
            }
            let (full, tail) = last_two_extrapolants(&xs, &ys);
            let diff = (full - tail).norm();
            if diff > 10.0 * spec.target_tol {
                return Err(Error::ExtrapolationNotConverged(diff));
            }
            Ok(full)
        })
        .collect()
}

fn partials<F>(f: &F, z: Complex64, h: f64) -> (Complex64, Complex64)
where
    F: Fn(Complex64) -> Complex64,
{
    let i = Complex64::new(0.0, 1.0);
    let dx = (f(z + h) - f(z - h)) / (2.0 * h);
    let dy = (f(z + i * h) - f(z - i * h)) / (2.0 * h);
    (dx, dy)
}

fn check_step(h: f64) -> Result<()> {
    if !(1e-6..=1e-3).contains(&h) {
        return Err(Error::Domain(format!("finite-difference step {h} outside [1e-6, 1e-3]")));
    }
    Ok(())
}

/// `(d/dx + i d/dy)/2` by central differences with one Richardson step.
pub fn wirtinger_dbar<F>(f: F, z: Complex64, h: f64) -> Result<Complex64>
where
    F: Fn(Complex64) -> Complex64,
{
    check_step(h)?;
    let i = Complex64::new(0.0, 1.0);
    let d = |h: f64| {
        let (dx, dy) = partials(&f, z, h);
        (dx + i * dy) * 0.5
    };
    let v = (d(h / 2.0) * 4.0 - d(h)) / 3.0;
    if !v.is_finite() {
        return Err(Error::Domain(format!("non-finite sample near {z}")));
    }
    Ok(v)
}

/// `(d/dx - i d/dy)/2` by central differences with one Richardson step.
pub fn wirtinger_d<F>(f: F, z: Complex64, h: f64) -> Result<Complex64>
where
    F: Fn(Complex64) -> Complex64,
{
    check_step(h)?;
    let i = Complex64::new(0.0, 1.0);
    let d = |h: f64| {
        let (dx, dy) = partials(&f, z, h);
        (dx - i * dy) * 0.5
    };
    let v = (d(h / 2.0) * 4.0 - d(h)) / 3.0;
    if !v.is_finite() {
        return Err(Error::Domain(format!("non-finite sample near {z}")));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn contour_of_one_is_one() {
        let spec = ContourSpec::a_cycle(c(0.2, 1.1), 0.02, 64);
        let v = contour_integrate(|_| c(1.0, 0.0), &spec).unwrap();
        assert!((v - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn contour_reports_singular_node() {
        let spec = ContourSpec { base_point: c(0.0, 0.0), direction: c(1.0, 0.0), node_count: 16, offset_height: 0.0 };
        let err = contour_integrate(|z| c(1.0, 0.0) / z, &spec).unwrap_err();
        assert!(matches!(err, Error::ContourSingularity { node: 0, .. }));
    }

    #[test]
    fn residue_of_simple_pole_and_conjugate_quotient() {
        let r = circle_residue(|z| c(1.0, 0.0) / z, c(0.0, 0.0), 0.1, 64).unwrap();
        assert!((r - c(1.0, 0.0)).norm() < 1e-12);
        let r = circle_residue(|z| z.conj() / z, c(0.0, 0.0), 0.1, 64).unwrap();
        assert!(r.norm() < 1e-12);
    }

    #[test]
    fn residue_with_non_holomorphic_smooth_factor() {
        // (1 + |z|^2 + zbar) / z has holomorphic residue 1.
        let f = |z: Complex64| (c(1.0, 0.0) + z.norm_sqr() + z.conj()) / z;
        for r in [0.05, 0.1, 0.2] {
            let v = circle_residue(f, c(0.0, 0.0), r, 64).unwrap();
            assert!((v - c(1.0, 0.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn extrapolation_is_exact_on_polynomials() {
        let xs = [0.4, 0.2, 0.1, 0.05];
        let ys: Vec<Complex64> = xs.iter().map(|x| c(2.0 + 3.0 * x - x * x * x, *x)).collect();
        assert!((extrapolate_to_zero(&xs, &ys) - c(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn wirtinger_of_coordinates() {
        let z = c(0.3, -0.2);
        assert!(wirtinger_dbar(|z| z, z, 1e-4).unwrap().norm() < 1e-8);
        assert!((wirtinger_dbar(|z: Complex64| z.conj(), z, 1e-4).unwrap() - c(1.0, 0.0)).norm() < 1e-8);
        assert!((wirtinger_d(|z: Complex64| z * z, z, 1e-4).unwrap() - z * 2.0).norm() < 1e-8);
    }

    #[test]
    fn step_outside_range_is_rejected() {
        assert!(wirtinger_dbar(|z| z, c(0.0, 0.0), 1e-2).is_err());
    }

    #[test]
    fn excision_spec_validation() {
        let tau = c(0.1, 1.0);
        let mut spec = ExcisionSpec { grid_resolution: 50, ..ExcisionSpec::default() };
        assert!(spec.validate(tau).is_err());
        spec.grid_resolution = 400;
        assert!(spec.validate(tau).is_ok());
        spec.excision_radii = vec![0.04, 0.08];
        assert!(spec.validate(tau).is_err());
    }

    #[test]
    fn excised_integral_of_constant() {
        let spec = ExcisionSpec {
            grid_resolution: 64,
            excision_radii: vec![0.4, 0.2],
            extrapolation_order: 1,
            target_tol: 1e-6,
        };
        let v = excised_integral(|_| c(1.0, 0.0), c(0.2, 1.1), &[], &spec).unwrap();
        assert!((v - c(1.0, 0.0)).norm() < 1e-14);
    }
}
