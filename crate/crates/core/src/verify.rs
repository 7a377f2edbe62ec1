//! Verification suites: every checked identity becomes a [`VerificationReport`]
//! row with both sides, the error, the tolerance and a stable anchor string.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gw::{
    assemble_h, determinant_expansion, eps_distance, g_hat_by_determinant, g_hat_expr, generating_series,
    h_by_minor_integration, prop49_report, t_hat_closed, t_hat_expr, t_numeric, varpi, varpi_det, GwPoint,
    Prop49Numerics, SeriesKind,
};
use crate::integrals::{averaged_a_integral, ordering_independence_check, two_factor_integrals, FnIntegrand};
use crate::kronecker::{EkRoute, Kronecker};
use crate::modular::{eisenstein_g, eisenstein_g_reordered, EisensteinMethod, ModularPoint};
use crate::numerics::{circle_residue, excised_integral, factorial, wirtinger_dbar, ExcisionSpec};
use crate::qseries::{qexpand, QTarget};
use crate::symbolic::{
    chain_closed_form, integrate_iterated, iterated_residue, loop_closed_form, symbolic_reg_integrate_all, xi_chain,
    xi_loop, EKExpr,
};
use crate::theta::{ThetaEvaluator, ThetaRepresentation};

/// One checked identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub suite: String,
    pub case: String,
    pub anchor: String,
    pub lhs: [f64; 2],
    pub rhs: [f64; 2],
    pub abs_err: f64,
    pub tol: f64,
    pub pass: bool,
    /// Whether a failure of this row fails the run.
    pub gating: bool,
    pub runtime_ms: u64,
    pub parameters: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Theta,
    Eisenstein,
    Kronecker,
    Residues,
    Prop38,
    Thm41,
    Lemma42,
    Ordering,
    Qexp,
    Prop49Report,
}

impl Suite {
    pub const ALL: [Suite; 10] = [
        Suite::Theta,
        Suite::Eisenstein,
        Suite::Kronecker,
        Suite::Residues,
        Suite::Prop38,
        Suite::Thm41,
        Suite::Lemma42,
        Suite::Ordering,
        Suite::Qexp,
        Suite::Prop49Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Theta => "theta",
            Suite::Eisenstein => "eisenstein",
            Suite::Kronecker => "kronecker",
            Suite::Residues => "residues",
            Suite::Prop38 => "prop38",
            Suite::Thm41 => "thm41",
            Suite::Lemma42 => "lemma42",
            Suite::Ordering => "ordering",
            Suite::Qexp => "qexp",
            Suite::Prop49Report => "prop49-report",
        }
    }

    /// Informational suites never fail a run.
    pub fn gating(self) -> bool {
        self != Suite::Prop49Report
    }
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| Error::Parse(format!("unknown suite '{s}'")))
    }
}

/// Tolerance scaling: `strict` multiplies every tolerance by 0.1, `fast` by 10
/// and also lowers node counts and sample sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Strict,
    #[default]
    Default,
    Fast,
}

impl Profile {
    pub fn tol_scale(self) -> f64 {
        match self {
            Profile::Strict => 0.1,
            Profile::Default => 1.0,
            Profile::Fast => 10.0,
        }
    }

    fn is_fast(self) -> bool {
        self == Profile::Fast
    }
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strict" => Ok(Profile::Strict),
            "default" => Ok(Profile::Default),
            "fast" => Ok(Profile::Fast),
            other => Err(Error::Parse(format!("unknown profile '{other}'"))),
        }
    }
}

/// Settings shared by all suites.
#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub profile: Profile,
    pub seed: u64,
    /// Restricts size-dependent suites to one `n`.
    pub n: Option<usize>,
    /// Random points per sampled identity.
    pub samples: usize,
    /// Trapezoid nodes for the `n = 2` A-cycle oracle; `n = 3` uses half.
    pub nodes: usize,
    pub excision: ExcisionSpec,
    /// Record wall-clock time per case (breaks byte-identical reports).
    pub timings: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            profile: Profile::Default,
            seed: 20240601,
            n: None,
            samples: 50,
            nodes: 128,
            excision: ExcisionSpec::default(),
            timings: false,
        }
    }
}

impl VerifyConfig {
    fn samples(&self) -> usize {
        if self.profile.is_fast() {
            (self.samples / 5).max(5)
        } else {
            self.samples
        }
    }

    // Trapezoid error near the inner contour offsets dominates the fast
    // tolerance at half the nodes, so node counts are not reduced.
    fn nodes(&self) -> usize {
        self.nodes
    }

    fn excision(&self) -> ExcisionSpec {
        let mut s = self.excision.clone();
        // Convergence is declared relative to the tolerance being tested.
        s.target_tol *= self.profile.tol_scale();
        if self.profile.is_fast() {
            s.grid_resolution = (s.grid_resolution / 2).max(100);
            // Coarser grid: keep only radii it still resolves for any |tau| <= 2.
            let h = 1.0 / s.grid_resolution as f64;
            let keep: Vec<f64> = s.excision_radii.iter().copied().filter(|r| *r >= 8.0 * h).collect();
            if keep.len() >= 2 {
                s.extrapolation_order = s.extrapolation_order.min(keep.len() - 1);
                s.excision_radii = keep;
            }
        }
        s
    }

    fn wants(&self, n: usize) -> bool {
        self.n.is_none_or(|k| k == n)
    }
}

struct Recorder<'a> {
    suite: Suite,
    cfg: &'a VerifyConfig,
    rows: Vec<VerificationReport>,
}

impl<'a> Recorder<'a> {
    fn new(suite: Suite, cfg: &'a VerifyConfig) -> Self {
        Recorder { suite, cfg, rows: Vec::new() }
    }

    /// Records `|lhs - rhs| <= tol * scale(profile)`.
    #[allow(clippy::too_many_arguments)]
    fn compare(
        &mut self,
        case: String,
        anchor: &str,
        lhs: Complex64,
        rhs: Complex64,
        tol: f64,
        start: Instant,
        params: Params,
    ) {
        let err = (lhs - rhs).norm();
        self.record(case, anchor, lhs, rhs, err, tol, start, params);
    }

    /// Records with an explicitly computed error (e.g. normalized by a scale noted in `params`).
    #[allow(clippy::too_many_arguments)]
    fn record(
        &mut self,
        case: String,
        anchor: &str,
        lhs: Complex64,
        rhs: Complex64,
        abs_err: f64,
        tol: f64,
        start: Instant,
        params: Params,
    ) {
        let tol = tol * self.cfg.profile.tol_scale();
        let runtime_ms = if self.cfg.timings { start.elapsed().as_millis() as u64 } else { 0 };
        self.rows.push(VerificationReport {
            suite: self.suite.name().to_string(),
            case,
            anchor: anchor.to_string(),
            lhs: [lhs.re, lhs.im],
            rhs: [rhs.re, rhs.im],
            abs_err,
            tol,
            pass: abs_err.is_finite() && abs_err <= tol,
            gating: self.suite.gating(),
            runtime_ms,
            parameters: params.0,
        });
    }

    /// Records a failed case for an error raised while computing it.
    fn failure(&mut self, case: String, anchor: &str, err: &Error, start: Instant) {
        let nan = Complex64::new(f64::NAN, f64::NAN);
        self.record(case, anchor, nan, nan, f64::INFINITY, 0.0, start, Params::new().with("error", err));
    }
}

#[derive(Default)]
struct Params(BTreeMap<String, String>);

impl Params {
    fn new() -> Self {
        Params::default()
    }

    fn with(mut self, k: &str, v: impl std::fmt::Display) -> Self {
        self.0.insert(k.to_string(), v.to_string());
        self
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn fmt_c(z: Complex64) -> String {
    format!("{:.6}{:+.6}i", z.re, z.im)
}

/// Worst case over a sample: `(err, lhs, rhs, label)`.
struct Worst {
    err: f64,
    lhs: Complex64,
    rhs: Complex64,
    at: String,
}

impl Worst {
    fn new() -> Self {
        Worst { err: -1.0, lhs: Complex64::default(), rhs: Complex64::default(), at: String::new() }
    }

    fn update(&mut self, err: f64, lhs: Complex64, rhs: Complex64, at: impl FnOnce() -> String) {
        let err = if err.is_nan() { f64::INFINITY } else { err };
        if err > self.err {
            *self = Worst { err, lhs, rhs, at: at() };
        }
    }
}

/// `|a - b| / max(1, |b|)`.
fn scaled_err(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(1.0)
}

fn random_tau(rng: &mut ChaCha8Rng) -> Complex64 {
    c(rng.gen_range(-0.5..0.5), rng.gen_range(0.8..1.5))
}

fn random_point(rng: &mut ChaCha8Rng, radius: f64) -> Complex64 {
    c(rng.gen_range(-radius..radius), rng.gen_range(-radius..radius))
}

/// A point whose theta value (and that of every listed shift) exceeds `1e-3`.
fn well_conditioned(rng: &mut ChaCha8Rng, th: &ThetaEvaluator, radius: f64, shifts: &[Complex64]) -> Complex64 {
    loop {
        let z = random_point(rng, radius);
        let ok = std::iter::once(Complex64::default())
            .chain(shifts.iter().copied())
            .all(|s| th.theta(z + s, false).norm() > 1e-3);
        if ok {
            return z;
        }
    }
}

/// Runs one suite; rows come back sorted by case id.
pub fn run_suite(suite: Suite, cfg: &VerifyConfig) -> Vec<VerificationReport> {
    let mut r = Recorder::new(suite, cfg);
    match suite {
        Suite::Theta => theta_suite(&mut r),
        Suite::Eisenstein => eisenstein_suite(&mut r),
        Suite::Kronecker => kronecker_suite(&mut r),
        Suite::Residues => residues_suite(&mut r),
        Suite::Prop38 => loop_chain_suite(&mut r),
        Suite::Thm41 => partition_formula_suite(&mut r),
        Suite::Lemma42 => determinant_suite(&mut r),
        Suite::Ordering => ordering_suite(&mut r),
        Suite::Qexp => qexp_suite(&mut r),
        Suite::Prop49Report => convolution_report_suite(&mut r),
    }
    let mut rows = r.rows;
    rows.sort_by(|a, b| a.case.cmp(&b.case));
    rows
}

/// Runs several suites; rows sorted by `(suite, case)`.
pub fn run_suites(suites: &[Suite], cfg: &VerifyConfig) -> Vec<VerificationReport> {
    let mut rows: Vec<VerificationReport> = suites.par_iter().flat_map_iter(|s| run_suite(*s, cfg)).collect();
    rows.sort_by(|a, b| (a.suite.as_str(), a.case.as_str()).cmp(&(b.suite.as_str(), b.case.as_str())));
    rows
}

/// `true` when every gating row passes.
pub fn gating_pass(rows: &[VerificationReport]) -> bool {
    rows.iter().filter(|r| r.gating).all(|r| r.pass)
}

fn rng_for(cfg: &VerifyConfig, suite: Suite) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cfg.seed ^ (suite as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn theta_suite(r: &mut Recorder) {
    let mut rng = rng_for(r.cfg, Suite::Theta);
    let start = Instant::now();
    let mut worst = Worst::new();
    for _ in 0..5 {
        let tau = random_tau(&mut rng);
        let th = ThetaEvaluator::new(ModularPoint::new(tau).expect("upper half plane"));
        let d = th.theta_jet(Complex64::default(), 2).coeff(1);
        worst.update((d - 1.0).norm(), d, c(1.0, 0.0), || fmt_c(tau));
    }
    r.compare(
        "normalization".into(),
        "theta-normalization",
        worst.lhs,
        worst.rhs,
        1e-10,
        start,
        Params::new().with("tau", &worst.at),
    );

    let start = Instant::now();
    let (mut w1, mut wt) = (Worst::new(), Worst::new());
    let mut th = ThetaEvaluator::new(ModularPoint::new(c(0.0, 1.0)).expect("upper half plane"));
    for i in 0..100 {
        // Ten tau values with ten points each.
        if i % 10 == 0 {
            let tau = random_tau(&mut rng);
            th = ThetaEvaluator::new(ModularPoint::new(tau).expect("upper half plane"));
        }
        let tau = th.modular().tau();
        let z = random_point(&mut rng, 2.0);
        let v = th.theta(z, false);
        let scale = v.norm().max(1.0);
        let a = th.theta(z + 1.0, false);
        w1.update((a + v).norm() / scale, a, -v, || format!("tau={} z={}", fmt_c(tau), fmt_c(z)));
        let b = th.theta(z + tau, false);
        let expect = -(-PI * Complex64::i() * tau).exp() * (-2.0 * PI * Complex64::i() * z).exp() * v;
        wt.update((b - expect).norm() / expect.norm().max(1.0), b, expect, || {
            format!("tau={} z={}", fmt_c(tau), fmt_c(z))
        });
    }
    let p = |w: &Worst| {
        Params::new().with("points", 100).with("worst_at", &w.at).with("error", "relative to max(1, |rhs|)")
    };
    r.record("automorphy-one".into(), "theta-automorphy", w1.lhs, w1.rhs, w1.err, 1e-10, start, p(&w1));
    r.record("automorphy-tau".into(), "theta-automorphy", wt.lhs, wt.rhs, wt.err, 1e-10, start, p(&wt));

    let start = Instant::now();
    let mut worst = Worst::new();
    for _ in 0..20 {
        let tau = random_tau(&mut rng);
        let m = ModularPoint::new(tau).expect("upper half plane");
        let a = ThetaEvaluator::new(m.clone());
        let b = ThetaEvaluator::new(m).with_representation(ThetaRepresentation::WeierstrassExpSum);
        let z = random_point(&mut rng, 1.5);
        let (x, y) = (a.theta(z, false), b.theta(z, false));
        worst.update(scaled_err(y, x), y, x, || format!("tau={} z={}", fmt_c(tau), fmt_c(z)));
    }
    r.record(
        "dual-representation".into(),
        "theta-dual-representation",
        worst.lhs,
        worst.rhs,
        worst.err,
        1e-8,
        start,
        Params::new().with("points", 20).with("worst_at", &worst.at).with("error", "relative to max(1, |rhs|)"),
    );
}

fn eisenstein_suite(r: &mut Recorder) {
    let taus = [c(0.0, 1.0), c(0.3, 1.1), c(-0.45, 0.9), c(0.5, 0.87), c(0.1, 2.0)];
    for (t, tau) in taus.iter().enumerate() {
        let m = ModularPoint::with_cutoff(*tau, 60).expect("valid tau");
        for k in [2usize, 4, 6] {
            let start = Instant::now();
            let case = format!("g{k}-tau{t}");
            match eisenstein_g(k, &m, EisensteinMethod::LatticeEisensteinSummation) {
                Ok(lat) => r.compare(
                    case,
                    "eisenstein-lattice-vs-qseries",
                    lat.value,
                    m.g(k),
                    1e-8,
                    start,
                    Params::new().with("tau", fmt_c(*tau)).with("k", k).with("cutoff", 60),
                ),
                Err(e) => r.failure(case, "eisenstein-lattice-vs-qseries", &e, start),
            }
        }
    }
    // Summing the tau-direction first shifts G_2 by -pi i / tau.
    for (t, tau) in taus.iter().take(2).enumerate() {
        let start = Instant::now();
        let m = ModularPoint::with_cutoff(*tau, 60).expect("valid tau");
        let case = format!("g2-order-tau{t}");
        match eisenstein_g_reordered(2, &m) {
            Ok(re) => {
                let diff = re - m.g(2);
                let params =
                    Params::new().with("tau", fmt_c(*tau)).with("difference_norm", format!("{:.6e}", diff.norm()));
                let err = if diff.norm() > 1e-3 { (diff + PI * Complex64::i() / tau).norm() } else { f64::INFINITY };
                r.record(
                    case,
                    "eisenstein-summation-order",
                    diff,
                    -PI * Complex64::i() / tau,
                    err,
                    1e-6,
                    start,
                    params,
                );
            }
            Err(e) => r.failure(case, "eisenstein-summation-order", &e, start),
        }
        let start = Instant::now();
        let wide = ModularPoint::with_cutoff(*tau, 120).expect("valid tau");
        let a = eisenstein_g(2, &m, EisensteinMethod::LatticeEisensteinSummation).map(|v| v.value);
        let b = eisenstein_g(2, &wide, EisensteinMethod::LatticeEisensteinSummation).map(|v| v.value);
        if let (Ok(a), Ok(b)) = (a, b) {
            r.compare(
                format!("g2-stable-tau{t}"),
                "eisenstein-summation-order",
                a,
                b,
                1e-8,
                start,
                Params::new().with("cutoffs", "60,120"),
            );
        }
    }
}

fn kronecker_suite(r: &mut Recorder) {
    let mut rng = rng_for(r.cfg, Suite::Kronecker);
    let n = r.cfg.samples();
    let tau = c(0.3, 1.4);
    let kron = Kronecker::from_modular(ModularPoint::new(tau).expect("valid tau"));
    let th = kron.theta();

    let start = Instant::now();
    let mut worst = Worst::new();
    for _ in 0..n {
        let z = well_conditioned(&mut rng, th, 1.0, &[]);
        let a = kron.modular().a_of_z(z);
        let routes: Vec<_> = [EkRoute::JetExtraction, EkRoute::BellPolynomial, EkRoute::BinomialCompletion]
            .into_iter()
            .map(|route| kron.ek_coeffs(8, z, true, route))
            .collect();
        if let [Ok(x), Ok(y), Ok(w)] = routes.as_slice() {
            for m in 0..=8i64 {
                let scale = ((1.0 + a.norm()).powi(m as i32) / factorial(m as usize)).max(x.get(m).norm());
                for (p, q) in [(x, y), (x, w), (y, w)] {
                    worst.update((p.get(m) - q.get(m)).norm() / scale, p.get(m), q.get(m), || {
                        format!("z={} m={m}", fmt_c(z))
                    });
                }
            }
        } else {
            worst.update(f64::INFINITY, Complex64::default(), Complex64::default(), || {
                format!("z={} route error", fmt_c(z))
            });
        }
    }
    r.record(
        "three-routes".into(),
        "ek-three-routes",
        worst.lhs,
        worst.rhs,
        worst.err,
        1e-7,
        start,
        Params::new()
            .with("points", n)
            .with("max_m", 8)
            .with("worst_at", &worst.at)
            .with("error", "relative to max(|value|, (1+|A|)^m/m!)"),
    );

    let start = Instant::now();
    let (mut wp, mut we) = (Worst::new(), Worst::new());
    for _ in 0..n {
        let z = well_conditioned(&mut rng, th, 1.0, &[]);
        let base = kron.ek_coeffs(6, z, true, EkRoute::BellPolynomial);
        let neg = kron.ek_coeffs(6, -z, true, EkRoute::BellPolynomial);
        let one = kron.ek_coeffs(6, z + 1.0, true, EkRoute::BellPolynomial);
        let sh = kron.ek_coeffs(6, z + tau, true, EkRoute::BellPolynomial);
        if let (Ok(b), Ok(ng), Ok(o), Ok(s)) = (base, neg, one, sh) {
            for m in 0..=6i64 {
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                wp.update(scaled_err(ng.get(m) * sign, b.get(m)), ng.get(m) * sign, b.get(m), || {
                    format!("z={} m={m}", fmt_c(z))
                });
                we.update(scaled_err(o.get(m), b.get(m)), o.get(m), b.get(m), || {
                    format!("z={} m={m} shift=1", fmt_c(z))
                });
                we.update(scaled_err(s.get(m), b.get(m)), s.get(m), b.get(m), || {
                    format!("z={} m={m} shift=tau", fmt_c(z))
                });
            }
        }
    }
    let p = |w: &Worst| {
        Params::new()
            .with("points", n)
            .with("max_m", 6)
            .with("worst_at", &w.at)
            .with("error", "relative to max(1, |rhs|)")
    };
    r.record("parity".into(), "ek-parity-ellipticity", wp.lhs, wp.rhs, wp.err, 1e-7, start, p(&wp));
    r.record("ellipticity".into(), "ek-parity-ellipticity", we.lhs, we.rhs, we.err, 1e-7, start, p(&we));

    for m in 1..=5usize {
        let start = Instant::now();
        let zbar = c(0.4, -0.3);
        match kron.polar_probe(m, 0.7, zbar, &[1e-1, 1e-2, 1e-3]) {
            Ok(rows) => {
                let (rad, value, target) = rows[rows.len() - 1];
                let err = (value - target).norm() / target.norm().max(f64::MIN_POSITIVE);
                r.record(
                    format!("polar-m{m}"),
                    "ek-polar-part",
                    value,
                    target,
                    err,
                    0.05,
                    start,
                    Params::new().with("r", rad).with("zbar_frozen", fmt_c(zbar)).with("error", "relative"),
                );
            }
            Err(e) => r.failure(format!("polar-m{m}"), "ek-polar-part", &e, start),
        }
    }

    for hat in [false, true] {
        let start = Instant::now();
        let mut worst = Worst::new();
        for _ in 0..n {
            let (a, b) = (random_point(&mut rng, 0.4), random_point(&mut rng, 0.4));
            let x = well_conditioned(&mut rng, th, 0.8, &[a, a + b]);
            let y = well_conditioned(&mut rng, th, 0.8, &[b, -x, a + b]);
            if let Ok(res) = kron.fay_residual(a, b, x, y, hat) {
                worst.update(res.norm(), res, Complex64::default(), || {
                    format!("a={} b={} x={} y={}", fmt_c(a), fmt_c(b), fmt_c(x), fmt_c(y))
                });
            }
        }
        let case = if hat { "fay-hatted" } else { "fay-plain" };
        r.compare(
            case.into(),
            "fay-trisecant",
            worst.lhs,
            worst.rhs,
            1e-9,
            start,
            Params::new().with("tuples", n).with("worst_at", &worst.at),
        );
    }

    for i in 1..=5usize {
        for j in 1..=(6 - i) {
            let start = Instant::now();
            let mut worst = Worst::new();
            for _ in 0..5 {
                let x = well_conditioned(&mut rng, th, 0.8, &[]);
                let y = well_conditioned(&mut rng, th, 0.8, &[-x]);
                match kron.quadratic_relation_residual(i, j, x, y) {
                    Ok(res) => {
                        worst.update(res.norm(), res, Complex64::default(), || format!("x={} y={}", fmt_c(x), fmt_c(y)))
                    }
                    Err(_) => {
                        worst.update(f64::INFINITY, Complex64::default(), Complex64::default(), || "error".into())
                    }
                }
            }
            r.compare(
                format!("quadratic-{i}-{j}"),
                "ek-quadratic-relation",
                worst.lhs,
                worst.rhs,
                1e-7,
                start,
                Params::new().with("worst_at", &worst.at),
            );
        }
    }

    for m in 1..=5i64 {
        let start = Instant::now();
        let z = c(0.23, 0.31);
        let f = |x: Complex64| kron.e_hat(m, x).unwrap_or(Complex64::new(f64::NAN, f64::NAN));
        let lhs = wirtinger_dbar(f, z, 1e-4);
        let rhs = kron.e_hat(m - 1, z).map(|v| v * kron.modular().y());
        match (lhs, rhs) {
            (Ok(l), Ok(rv)) => r.compare(
                format!("dbar-m{m}"),
                "ek-dbar-relation",
                l,
                rv,
                1e-5,
                start,
                Params::new().with("z", fmt_c(z)).with("h", 1e-4),
            ),
            (Err(e), _) | (_, Err(e)) => r.failure(format!("dbar-m{m}"), "ek-dbar-relation", &e, start),
        }
    }
}

fn residues_suite(r: &mut Recorder) {
    let mut rng = rng_for(r.cfg, Suite::Residues);
    let tau = c(0.2, 1.1);
    let kron = Kronecker::from_modular(ModularPoint::new(tau).expect("valid tau"));
    let spec = r.cfg.excision();
    for m in 0..=4i64 {
        let start = Instant::now();
        let f = |z: Complex64| kron.e_hat(m, z).unwrap_or(Complex64::new(f64::NAN, f64::NAN));
        let expect = c(if m == 1 { 1.0 } else { 0.0 }, 0.0);
        match circle_residue(f, Complex64::default(), 0.05, 256) {
            Ok(v) => r.compare(
                format!("residue-m{m}"),
                "residue-ek",
                v,
                expect,
                1e-6,
                start,
                Params::new().with("radius", 0.05),
            ),
            Err(e) => r.failure(format!("residue-m{m}"), "residue-ek", &e, start),
        }
        let start = Instant::now();
        let expect = c(if m == 0 { 1.0 } else { 0.0 }, 0.0);
        match excised_integral(f, tau, &[Complex64::default()], &spec) {
            Ok(v) => r.compare(
                format!("regularized-m{m}"),
                "regularized-integral-ek",
                v,
                expect,
                1e-4,
                start,
                Params::new().with("grid", spec.grid_resolution),
            ),
            Err(e) => r.failure(format!("regularized-m{m}"), "regularized-integral-ek", &e, start),
        }
    }

    let samples = if r.cfg.profile.is_fast() { 3 } else { 10 };
    let mut spec18 = spec.clone();
    spec18.target_tol = 1e-3 * r.cfg.profile.tol_scale();
    let mut worst: BTreeMap<(u32, u32), Worst> = BTreeMap::new();
    let start = Instant::now();
    for _ in 0..samples {
        let z2 = random_point(&mut rng, 0.45);
        let zn = random_point(&mut rng, 0.45);
        let w1 = random_point(&mut rng, 0.3);
        let wn = random_point(&mut rng, 0.3);
        // Keep the two poles and the total shift apart.
        if (z2 - w1 - zn - wn).norm() < 0.25 || kron.theta().theta(w1 + wn + zn - z2, false).norm() < 0.05 {
            continue;
        }
        match two_factor_integrals(&kron, 4, z2, zn, w1, wn, &spec18) {
            Ok(rows) => {
                for row in rows {
                    worst.entry((row.m1, row.mn)).or_insert_with(Worst::new).update(
                        (row.numeric - row.closed).norm(),
                        row.numeric,
                        row.closed,
                        || format!("z2={} zn={} w1={} wn={}", fmt_c(z2), fmt_c(zn), fmt_c(w1), fmt_c(wn)),
                    );
                }
            }
            Err(e) => {
                r.failure("two-factor-error".into(), "two-factor-regularized-integral", &e, start);
            }
        }
    }
    for ((m1, mn), w) in worst {
        r.compare(
            format!("two-factor-{m1}-{mn}"),
            "two-factor-regularized-integral",
            w.lhs,
            w.rhs,
            1e-3,
            start,
            Params::new().with("samples", samples).with("worst_at", &w.at),
        );
    }
}

/// Every `m` in `N^n` with `|m| <= max_total`.
fn compositions(n: usize, max_total: u32) -> Vec<Vec<u32>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for first in 0..=max_total {
        for mut rest in compositions(n - 1, max_total - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn expr_mismatch(a: &EKExpr, b: &EKExpr) -> f64 {
    (a.clone() - b.clone()).len() as f64
}

fn loop_chain_suite(r: &mut Recorder) {
    let zero = Complex64::default();
    for n in 1..=4usize {
        let start = Instant::now();
        let (mut bad_loop, mut bad_chain, mut total) = (0.0, 0.0, 0usize);
        let mut first_bad = String::new();
        for ms in compositions(n, 5) {
            total += 1;
            let lp = symbolic_reg_integrate_all(&xi_loop(&ms), n);
            let ch = symbolic_reg_integrate_all(&xi_chain(&ms), n);
            let dl = lp.map(|v| expr_mismatch(&v, &loop_closed_form(&ms))).unwrap_or(f64::INFINITY);
            let dc = ch.map(|v| expr_mismatch(&v, &chain_closed_form(&ms))).unwrap_or(f64::INFINITY);
            if (dl > 0.0 || dc > 0.0) && first_bad.is_empty() {
                first_bad = format!("{ms:?}");
            }
            bad_loop += dl;
            bad_chain += dc;
        }
        let p = Params::new()
            .with("n", n)
            .with("cases", total)
            .with("first_mismatch", &first_bad)
            .with("error", "count of differing monomials");
        r.record(format!("loop-n{n}"), "loop-chain-integrals", c(bad_loop, 0.0), zero, bad_loop, 0.0, start, p);
        let p = Params::new().with("n", n).with("cases", total).with("error", "count of differing monomials");
        r.record(format!("chain-n{n}"), "loop-chain-integrals", c(bad_chain, 0.0), zero, bad_chain, 0.0, start, p);

        let start = Instant::now();
        let mut bad = 0.0;
        for ms in compositions(n, 5).into_iter().filter(|m| m.iter().sum::<u32>() == 5 || n == 1) {
            let order: Vec<usize> = (1..=n).collect();
            let it = integrate_iterated(&xi_loop(&ms), &order);
            bad += it.map(|v| expr_mismatch(&v, &loop_closed_form(&ms))).unwrap_or(f64::INFINITY);
        }
        r.record(
            format!("loop-iterated-n{n}"),
            "loop-chain-integrals",
            c(bad, 0.0),
            zero,
            bad,
            0.0,
            start,
            Params::new().with("n", n),
        );
    }
    for n in 2..=6usize {
        let start = Instant::now();
        let order: Vec<usize> = (1..=n).collect();
        let v = iterated_residue(&xi_loop(&vec![1; n]), &order).map(|e| e.len() as f64).unwrap_or(f64::INFINITY);
        r.record(
            format!("loop-residue-n{n}"),
            "loop-iterated-residue",
            c(v, 0.0),
            zero,
            v,
            0.0,
            start,
            Params::new().with("n", n),
        );
    }

    // Numeric spot check: the averaged A-cycle integral of e_1(z1-z2+w1) e_1(z2-z1+w2).
    // Reducing the product to -e_2(w1+w2) - e_2(x+w1) - e_2(w2-x) and integrating
    // over x near the real axis leaves the two A-periods of e_2, each (2 pi i)^2 B_2 / 2.
    let start = Instant::now();
    let kron = Kronecker::from_modular(ModularPoint::new(c(0.1, 1.05)).expect("valid tau"));
    let (w1, w2) = (c(0.17, 0.0), c(0.38, 0.0));
    let f = FnIntegrand {
        arity: 2,
        f: |z: &[Complex64]| {
            let a = kron.ek_coeff(1, z[0] - z[1] + w1, false, EkRoute::BellPolynomial);
            let b = kron.ek_coeff(1, z[1] - z[0] + w2, false, EkRoute::BellPolynomial);
            match (a, b) {
                (Ok(a), Ok(b)) => a * b,
                _ => Complex64::new(f64::NAN, f64::NAN),
            }
        },
    };
    let nodes = r.cfg.nodes();
    match (
        averaged_a_integral(&f, &[0.04, 0.02], nodes, kron.modular().tau(), false),
        kron.ek_coeff(2, w1 + w2, false, EkRoute::JetExtraction),
    ) {
        (Ok(v), Ok(e2)) => {
            let period = -(2.0 * PI * Complex64::i()).powi(2) / 6.0;
            r.compare(
                "loop-a-cycle-n2".into(),
                "loop-a-cycle-average",
                v.mean,
                period - e2,
                1e-5,
                start,
                Params::new().with("nodes", nodes).with("contour_constant", "-(2 pi i)^2 B_2 = 2 pi^2/3"),
            )
        }
        (Err(e), _) | (_, Err(e)) => r.failure("loop-a-cycle-n2".into(), "loop-a-cycle-average", &e, start),
    }
}

fn partition_formula_suite(r: &mut Recorder) {
    let kron = Kronecker::from_modular(ModularPoint::new(c(0.1, 1.05)).expect("valid tau"));
    let th = kron.theta();
    if r.cfg.wants(2) {
        let start = Instant::now();
        let nodes = r.cfg.nodes();
        match GwPoint::new(vec![c(0.17, 0.0), c(0.38, 0.0)], kron.modular()).and_then(|p| {
            let v = t_numeric(&kron, &p, &[0.04, 0.02], nodes)?;
            Ok((v, th.z_fn(p.w[0], false)? + th.z_fn(p.w[1], false)?))
        }) {
            Ok((v, expect)) => r.compare(
                "numeric-n2".into(),
                "gw-partition-formula",
                v.mean,
                expect,
                1e-6,
                start,
                Params::new().with("nodes", nodes),
            ),
            Err(e) => r.failure("numeric-n2".into(), "gw-partition-formula", &e, start),
        }
    }
    if r.cfg.wants(3) {
        let start = Instant::now();
        let nodes = (r.cfg.nodes() / 2).max(32);
        match GwPoint::new(vec![c(0.17, 0.0), c(0.38, 0.0), c(-0.29, 0.0)], kron.modular()).and_then(|p| {
            let v = t_numeric(&kron, &p, &[0.3, 0.2, 0.1], nodes)?;
            Ok((v, t_hat_closed(&[1, 2, 3], &p, &kron, false)?))
        }) {
            Ok((v, expect)) => r.compare(
                "numeric-n3".into(),
                "gw-partition-formula",
                v.mean,
                expect,
                1e-4,
                start,
                Params::new().with("nodes", nodes),
            ),
            Err(e) => r.failure("numeric-n3".into(), "gw-partition-formula", &e, start),
        }
    }
    for n in 1..=4usize {
        if r.cfg.n.is_some_and(|k| k != n) {
            continue;
        }
        let start = Instant::now();
        let full: Vec<usize> = (1..=n).collect();
        let zero = Complex64::default();
        match determinant_expansion(n)
            .and_then(|e| Ok((e, t_hat_expr(&full)?, g_hat_by_determinant(&full)?, g_hat_expr(&full)?)))
        {
            Ok((e, t, gd, g)) => {
                let d = expr_mismatch(&e.integral, &t);
                let p = Params::new()
                    .with("n", n)
                    .with("trivial_zero_cycle", e.census.trivial_zero_cycle)
                    .with("open_chain", e.census.open_chain)
                    .with("contributing", e.census.contributing)
                    .with("error", "count of differing monomials");
                r.record(
                    format!("determinant-expansion-n{n}"),
                    "gw-determinant-expansion",
                    c(d, 0.0),
                    zero,
                    d,
                    0.0,
                    start,
                    p,
                );
                let d = expr_mismatch(&gd, &g);
                r.record(
                    format!("minor-expansion-n{n}"),
                    "gw-determinant-expansion",
                    c(d, 0.0),
                    zero,
                    d,
                    0.0,
                    start,
                    Params::new().with("n", n),
                );
            }
            Err(e) => r.failure(format!("determinant-expansion-n{n}"), "gw-determinant-expansion", &e, start),
        }
    }
}

fn determinant_suite(r: &mut Recorder) {
    let mut rng = rng_for(r.cfg, Suite::Lemma42);
    let n_points = r.cfg.samples();
    for n in [2usize, 3] {
        if !r.cfg.wants(n) {
            continue;
        }
        for hat in [false, true] {
            let start = Instant::now();
            let mut worst = Worst::new();
            let mut done = 0;
            while done < n_points {
                let tau = random_tau(&mut rng);
                let th = ThetaEvaluator::new(ModularPoint::new(tau).expect("upper half plane"));
                let w: Vec<Complex64> = (0..n).map(|_| random_point(&mut rng, 0.45)).collect();
                let z: Vec<Complex64> = (0..n).map(|_| random_point(&mut rng, 0.5)).collect();
                // Well-conditioned: every denominator theta factor above 1e-3.
                let mut args: Vec<Complex64> = w.clone();
                args.push(w.iter().sum());
                for i in 0..n {
                    for j in i + 1..n {
                        args.extend([z[i] + w[i] - z[j], z[i] - w[j] - z[j], z[i] - z[j]]);
                    }
                }
                if args.iter().any(|a| th.theta(*a, false).norm() < 1e-3) {
                    continue;
                }
                done += 1;
                match (varpi(&th, &z, &w), varpi_det(&th, &z, &w, hat)) {
                    (Ok(a), Ok(b)) => {
                        worst.update(scaled_err(b, a), b, a, || format!("tau={} w0={}", fmt_c(tau), fmt_c(w[0])))
                    }
                    _ => worst.update(f64::INFINITY, Complex64::default(), Complex64::default(), || "error".into()),
                }
            }
            r.record(
                format!("n{n}-{}", if hat { "hatted" } else { "plain" }),
                "gw-determinant-formula",
                worst.lhs,
                worst.rhs,
                worst.err,
                1e-8,
                start,
                Params::new()
                    .with("points", n_points)
                    .with("worst_at", &worst.at)
                    .with("error", "relative to max(1, |rhs|)"),
            );
        }
    }
}

fn ordering_suite(r: &mut Recorder) {
    let kron = Kronecker::from_modular(ModularPoint::new(c(0.2, 1.0)).expect("valid tau"));
    let cases: [(&[u32], &[Complex64], usize, f64); 3] = [
        (&[1, 1], &[c(0.1, 0.4), c(-0.3, 0.35)], 48, 1e-7),
        (&[2, 1], &[c(0.1, 0.4), c(-0.3, 0.35)], 48, 1e-7),
        (&[1, 1, 1], &[c(0.1, 0.4), c(-0.3, 0.35), c(0.25, 0.3)], 32, 1e-5),
    ];
    for (ms, anchors, nodes, tol) in cases {
        let n = ms.len();
        if !r.cfg.wants(n) {
            continue;
        }
        let start = Instant::now();
        let offsets = crate::integrals::default_offsets(n);
        let case = format!("m{}", ms.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(""));
        match ordering_independence_check(&kron, ms, anchors, &offsets, nodes) {
            Ok(rep) => r.record(
                case,
                "ordering-independence",
                c(rep.max_deviation, 0.0),
                Complex64::default(),
                rep.max_deviation,
                tol,
                start,
                Params::new().with("nodes", nodes).with("raw_max_deviation", format!("{:.3e}", rep.raw_max_deviation)),
            ),
            Err(e) => r.failure(case, "ordering-independence", &e, start),
        }
    }
}

fn qexp_suite(r: &mut Recorder) {
    let tau = c(0.1, 0.5);
    let kron = Kronecker::from_modular(ModularPoint::new(tau).expect("valid tau"));
    let z1 = [c(0.23, 0.07)];
    let targets: Vec<(QTarget, u32, Vec<Complex64>)> = vec![
        (QTarget::Theta, 12, z1.to_vec()),
        (QTarget::ThetaReciprocal, 12, z1.to_vec()),
        (QTarget::Z, 14, z1.to_vec()),
        (QTarget::G { k: 2 }, 14, vec![]),
        (QTarget::G { k: 4 }, 14, vec![]),
        (QTarget::G { k: 6 }, 14, vec![]),
        (QTarget::E { m: 2 }, 12, z1.to_vec()),
        (QTarget::E { m: 3 }, 12, z1.to_vec()),
        (QTarget::T { n: 1 }, 8, vec![c(0.2, 0.05)]),
        (QTarget::T { n: 2 }, 10, vec![c(0.21, 0.05), c(-0.33, 0.04)]),
        (QTarget::T { n: 3 }, 10, vec![c(0.21, 0.05), c(-0.33, 0.02), c(0.12, -0.04)]),
    ];
    for (target, order, z) in targets {
        let start = Instant::now();
        let case = match target {
            QTarget::Theta => "theta".to_string(),
            QTarget::ThetaReciprocal => "theta-reciprocal".to_string(),
            QTarget::Z => "z".to_string(),
            QTarget::G { k } => format!("g{k}"),
            QTarget::E { m } => format!("e{m}"),
            QTarget::T { n } => format!("t{n}"),
        };
        let res = qexpand(target, order).and_then(|s| Ok((s.evaluate(tau, &z)?, target.numeric(&kron, &z)?)));
        match res {
            Ok((series, direct)) => r.record(
                case,
                "qseries-pointwise",
                series,
                direct,
                scaled_err(series, direct),
                1e-7,
                start,
                Params::new().with("order", order).with("q_abs", format!("{:.4}", kron.modular().q().norm())),
            ),
            Err(e) => r.failure(case, "qseries-pointwise", &e, start),
        }
    }
    let start = Instant::now();
    let unit =
        qexpand(QTarget::Theta, 8).and_then(|a| a.mul(&qexpand(QTarget::ThetaReciprocal, 8)?)).map(|p| p.is_unit());
    let v = if matches!(unit, Ok(true)) { 0.0 } else { 1.0 };
    r.record(
        "theta-times-reciprocal".into(),
        "qseries-pointwise",
        c(v, 0.0),
        Complex64::default(),
        v,
        0.0,
        start,
        Params::new().with("order", 8),
    );
}

fn convolution_report_suite(r: &mut Recorder) {
    let kron = Kronecker::from_modular(ModularPoint::new(c(0.1, 1.05)).expect("valid tau"));
    let zero = Complex64::default();
    let ws = [vec![c(0.17, 0.0), c(0.38, 0.0)], vec![c(0.17, 0.0), c(0.38, 0.0), c(-0.29, 0.0)]];
    for w in ws {
        let n = w.len();
        if !r.cfg.wants(n) {
            continue;
        }
        let start = Instant::now();
        let point = match GwPoint::new(w, kron.modular()) {
            Ok(p) => p,
            Err(e) => {
                r.failure(format!("n{n}"), "generating-series-convolution", &e, start);
                continue;
            }
        };
        let numerics = Prop49Numerics {
            offsets: if n == 2 { vec![0.04, 0.02] } else { vec![0.3, 0.2, 0.1] },
            node_count: if n == 2 { r.cfg.nodes() } else { (r.cfg.nodes() / 2).max(32) },
            excision: (n == 2).then(|| r.cfg.excision()),
        };
        match prop49_report(&point, &kron, true, Some(&numerics)) {
            Ok(rep) => {
                for row in &rep.rows {
                    r.compare(
                        format!("n{n}-coeff-{}", row.monomial),
                        "generating-series-convolution",
                        row.lhs,
                        row.rhs,
                        1e-6,
                        start,
                        Params::new(),
                    );
                }
                let num = rep.top_numeric.unwrap_or(zero);
                r.compare(
                    format!("n{n}-top-numeric-vs-closed"),
                    "gw-partition-formula",
                    num,
                    rep.top_closed,
                    1e-4,
                    start,
                    Params::new(),
                );
                r.compare(
                    format!("n{n}-top-numeric-vs-convolution"),
                    "generating-series-convolution",
                    num,
                    rep.top_convolution,
                    1e-4,
                    start,
                    Params::new(),
                );
                r.record(
                    format!("n{n}-h-assembly"),
                    "generating-series-h-assembly",
                    c(rep.h_assembly_residual, 0.0),
                    zero,
                    rep.h_assembly_residual,
                    1e-12,
                    start,
                    Params::new(),
                );
                if let Some(d) = rep.h_minor_deviation {
                    r.record(
                        format!("n{n}-h-minor-integration"),
                        "generating-series-minor-integration",
                        c(d, 0.0),
                        zero,
                        d,
                        1e-4,
                        start,
                        Params::new(),
                    );
                }
            }
            Err(e) => r.failure(format!("n{n}"), "generating-series-convolution", &e, start),
        }
    }
    // The assembly is also exercised at n = 1 against minor integration.
    if r.cfg.wants(1) {
        let start = Instant::now();
        if let Ok(point) = GwPoint::new(vec![c(0.21, 0.13)], kron.modular()) {
            let h = generating_series(&point, &kron, SeriesKind::H, true);
            let t = generating_series(&point, &kron, SeriesKind::T, true);
            let g = generating_series(&point, &kron, SeriesKind::G, true);
            let m = h_by_minor_integration(&point, &kron, &r.cfg.excision());
            if let (Ok(h), Ok(t), Ok(g), Ok(m)) = (h, t, g, m) {
                let d = eps_distance(&h, &assemble_h(&t, &g));
                r.record(
                    "n1-h-assembly".into(),
                    "generating-series-h-assembly",
                    c(d, 0.0),
                    zero,
                    d,
                    1e-12,
                    start,
                    Params::new(),
                );
                let d = eps_distance(&h, &m);
                r.record(
                    "n1-h-minor-integration".into(),
                    "generating-series-minor-integration",
                    c(d, 0.0),
                    zero,
                    d,
                    1e-4,
                    start,
                    Params::new(),
                );
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
        assert!(!Suite::Prop49Report.gating());
    }

    #[test]
    fn composition_counts() {
        // C(5 + n, n) vectors in N^n with |m| <= 5
        assert_eq!(compositions(2, 5).len(), 21);
        assert_eq!(compositions(4, 5).len(), 126);
    }

    #[test]
    fn reports_are_deterministic_and_consistent() {
        let cfg = VerifyConfig { profile: Profile::Fast, ..VerifyConfig::default() };
        let a = run_suite(Suite::Theta, &cfg);
        let b = run_suite(Suite::Theta, &cfg);
        assert_eq!(a, b);
        for r in &a {
            assert_eq!(r.pass, r.abs_err <= r.tol);
            assert_eq!(r.runtime_ms, 0);
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn profiles_scale_tolerances() {
        let strict = VerifyConfig { profile: Profile::Strict, ..VerifyConfig::default() };
        let fast = VerifyConfig { profile: Profile::Fast, ..VerifyConfig::default() };
        let s = run_suite(Suite::Eisenstein, &strict);
        let f = run_suite(Suite::Eisenstein, &fast);
        assert!((s[0].tol * 100.0 - f[0].tol).abs() < 1e-20);
    }
}
