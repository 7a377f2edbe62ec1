use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use ekgw_core::gw::{g_hat_closed, t_hat_closed, t_numeric, GwPoint};
use ekgw_core::integrals::default_offsets;
use ekgw_core::kronecker::{EkRoute, EkVariant, Kronecker};
use ekgw_core::modular::eisenstein_g;
use ekgw_core::qseries::{qexpand, QSeriesRow, QTarget};
use ekgw_core::verify::{gating_pass, run_suites, Profile, Suite, VerificationReport, VerifyConfig};
use ekgw_core::{Complex64, EisensteinMethod, ModularPoint};
use serde::Serialize;

use crate::config::Config;
use crate::parse::{format_complex, parse_complex, parse_complex_list};
use crate::CliError;

const DEFAULT_TAU: &str = "0.1+1.05i";
const DEFAULT_W: [f64; 5] = [0.17, 0.38, -0.29, 0.07, -0.44];

fn tau_from(flag: Option<String>, cfg: &Config, fallback: &str) -> Result<ModularPoint, CliError> {
    let tau = match flag {
        Some(s) => parse_complex(&s)?,
        None => cfg.parsed("tau", parse_complex)?.unwrap_or(parse_complex(fallback)?),
    };
    Ok(ModularPoint::new(tau)?)
}

fn require<T>(v: Option<T>, what: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Domain(format!("missing required argument {what}")))
}

fn parse_num<T: std::str::FromStr>(s: &str) -> Result<T, String> {
    s.parse::<T>().map_err(|_| format!("invalid number '{s}'"))
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(format!("invalid boolean '{other}'")),
    }
}

fn json<T: Serialize>(v: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(v).map_err(|e| CliError::Domain(format!("serialization: {e}")))
}

#[derive(Clone, Copy, Debug, ValueEnum)]
#[value(rename_all = "verbatim")]
pub enum EvalFn {
    /// theta(z), or theta-hat with --hat
    #[value(name = "theta")]
    Theta,
    /// Z(z) = (ln theta)'(z)
    #[value(name = "Z")]
    Z,
    /// Z(z) + A(z)
    #[value(name = "Zhat")]
    Zhat,
    /// Laurent coefficient e_m (or ê_m with --hat)
    #[value(name = "ek")]
    Ek,
    /// Eisenstein-Kronecker series E_m
    #[value(name = "E")]
    E,
    /// E*_m
    #[value(name = "Estar")]
    Estar,
    /// Ê*_m
    #[value(name = "Estarhat")]
    Estarhat,
    /// Eisenstein series G_k (zero for odd k)
    #[value(name = "G")]
    G,
    /// Completed Eisenstein series Ĝ_k
    #[value(name = "Ghat")]
    Ghat,
    /// Weierstrass p(z)
    #[value(name = "wp")]
    Wp,
    /// Kronecker theta function S_c(z), completed with --hat
    #[value(name = "S")]
    S,
    /// A(z) = Y (zbar - z)
    #[value(name = "A")]
    A,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum RouteArg {
    Jet,
    Bell,
    Binomial,
}

impl From<RouteArg> for EkRoute {
    fn from(r: RouteArg) -> Self {
        match r {
            RouteArg::Jet => EkRoute::JetExtraction,
            RouteArg::Bell => EkRoute::BellPolynomial,
            RouteArg::Binomial => EkRoute::BinomialCompletion,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum GMethod {
    Qseries,
    Lattice,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long = "fn", value_enum)]
    function: EvalFn,
    #[arg(long, allow_hyphen_values = true)]
    z: Option<String>,
    /// Second argument `c` of S_c(z).
    #[arg(long, allow_hyphen_values = true)]
    c: Option<String>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    tau: Option<String>,
    #[arg(long)]
    hat: bool,
    #[arg(long, value_enum, default_value = "bell")]
    route: RouteArg,
    /// How G_k is computed.
    #[arg(long, value_enum, default_value = "qseries")]
    method: GMethod,
    #[arg(long)]
    json: bool,
}

#[derive(Serialize)]
struct EvalOut {
    #[serde(rename = "fn")]
    function: String,
    args: BTreeMap<String, String>,
    value: [f64; 2],
}

pub fn eval(a: EvalArgs, cfg: &Config) -> Result<(), CliError> {
    let m = tau_from(a.tau.clone(), cfg, DEFAULT_TAU)?;
    let mut args = BTreeMap::new();
    args.insert("tau".to_string(), format_complex(m.tau()));
    let z = a.z.as_deref().map(parse_complex).transpose()?;
    if let Some(z) = z {
        args.insert("z".into(), format_complex(z));
    }
    if let Some(v) = a.m {
        args.insert("m".into(), v.to_string());
    }
    if let Some(v) = a.k {
        args.insert("k".into(), v.to_string());
    }
    if a.hat {
        args.insert("hat".into(), "true".into());
    }
    let kron = Kronecker::from_modular(m);
    let th = kron.theta();
    let zreq = || require(z, "--z");
    let value = match a.function {
        EvalFn::Theta => th.theta(zreq()?, a.hat),
        EvalFn::Z => th.z_fn(zreq()?, false)?,
        EvalFn::Zhat => th.z_fn(zreq()?, true)?,
        EvalFn::Ek => {
            args.insert("route".into(), format!("{:?}", a.route).to_lowercase());
            kron.ek_coeff(require(a.m, "--m")? as i64, zreq()?, a.hat, a.route.into())?
        }
        EvalFn::E | EvalFn::Estar | EvalFn::Estarhat => {
            let variant = match a.function {
                EvalFn::E => EkVariant::Raw,
                EvalFn::Estar => EkVariant::Star,
                _ => EkVariant::StarHat,
            };
            kron.ek_series(require(a.m, "--m")?, zreq()?, variant)?
        }
        EvalFn::G => {
            let k = require(a.k, "--k")?;
            match a.method {
                GMethod::Qseries => kron.modular().g(k),
                GMethod::Lattice => {
                    args.insert("method".into(), "lattice".into());
                    eisenstein_g(k, kron.modular(), EisensteinMethod::LatticeEisensteinSummation)?.value
                }
            }
        }
        EvalFn::Ghat => kron.modular().g_hat(require(a.k, "--k")?),
        EvalFn::Wp => th.weierstrass_p(zreq()?)?,
        EvalFn::S => {
            let c = parse_complex(&require(a.c.clone(), "--c")?)?;
            args.insert("c".into(), format_complex(c));
            kron.kronecker_s(c, zreq()?, a.hat)?
        }
        EvalFn::A => kron.modular().a_of_z(zreq()?),
    };
    let name = a.function.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
    if a.json {
        println!("{}", json(&EvalOut { function: name, args, value: [value.re, value.im] })?);
    } else {
        println!("{}", format_complex(value));
    }
    Ok(())
}

#[derive(Args)]
pub struct VerifyArgs {
    /// Suite name or `all`.
    #[arg(long, default_value = "all")]
    suite: String,
    /// strict (tolerances x0.1), default, or fast (x10, reduced nodes).
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Restrict size-dependent suites to this n.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    /// Grid resolution of the excised area-integral oracle.
    #[arg(long)]
    grid: Option<usize>,
    /// Record wall-clock time per case (output is then not reproducible).
    #[arg(long)]
    timings: bool,
    /// Print the JSON report instead of the table.
    #[arg(long)]
    json: bool,
    /// Also write the JSON report to this file.
    #[arg(long)]
    report: Option<PathBuf>,
}

pub fn verify(a: VerifyArgs, cfg: &Config) -> Result<(), CliError> {
    let suites: Vec<Suite> = if a.suite == "all" { Suite::ALL.to_vec() } else { vec![a.suite.parse()?] };
    let mut vc = VerifyConfig::default();
    vc.profile = match a.profile {
        Some(p) => p.parse()?,
        None => cfg.parsed("profile", |s| s.parse::<Profile>().map_err(|e| e.to_string()))?.unwrap_or_default(),
    };
    vc.seed = a.seed.or(cfg.parsed("seed", parse_num)?).unwrap_or(vc.seed);
    vc.n = a.n;
    vc.nodes = a.nodes.or(cfg.parsed("nodes", parse_num)?).unwrap_or(vc.nodes);
    vc.samples = a.samples.or(cfg.parsed("samples", parse_num)?).unwrap_or(vc.samples);
    vc.excision.grid_resolution = a.grid.or(cfg.parsed("grid", parse_num)?).unwrap_or(vc.excision.grid_resolution);
    vc.timings = a.timings || cfg.parsed("timings", parse_bool)?.unwrap_or(false);
    if vc.nodes < 16 {
        return Err(CliError::Domain(format!("--nodes {} is below 16", vc.nodes)));
    }

    let rows = run_suites(&suites, &vc);
    let report = json(&rows)?;
    if let Some(path) = &a.report {
        let mut f = File::create(path)?;
        writeln!(f, "{report}")?;
    }
    if a.json {
        println!("{report}");
    } else {
        print_table(&rows);
    }
    let failed = rows.iter().filter(|r| r.gating && !r.pass).count();
    if gating_pass(&rows) {
        Ok(())
    } else {
        Err(CliError::Gating(format!("{failed} gating case(s) failed")))
    }
}

fn print_table(rows: &[VerificationReport]) {
    for r in rows {
        let status = match (r.pass, r.gating) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "INFO",
        };
        println!("{status}  {:<14} {:<34} err={:<11.3e} tol={:<8.1e} {}", r.suite, r.case, r.abs_err, r.tol, r.anchor);
    }
    let pass = rows.iter().filter(|r| r.pass).count();
    println!("{pass}/{} cases pass", rows.len());
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
pub enum GwMode {
    Closed,
    Numeric,
    Both,
}

#[derive(Args)]
pub struct GwArgs {
    #[arg(long)]
    n: usize,
    /// Comma-separated w_1..w_n (defaults to a fixed real generic list).
    #[arg(long, allow_hyphen_values = true)]
    w: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    tau: Option<String>,
    #[arg(long, value_enum, default_value = "closed")]
    mode: GwMode,
    /// Completed (hatted) closed forms.
    #[arg(long)]
    hat: bool,
    /// Trapezoid nodes per variable for the numeric oracle.
    #[arg(long)]
    nodes: Option<usize>,
    /// Comma-separated contour offsets (strictly decreasing, positive).
    #[arg(long)]
    offsets: Option<String>,
    #[arg(long)]
    json: bool,
}

#[derive(Serialize)]
struct GwOut {
    n: usize,
    tau: [f64; 2],
    w: Vec<[f64; 2]>,
    hat: bool,
    t_closed: [f64; 2],
    g_closed: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    t_closed_holomorphic: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_numeric: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    deviation: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    nodes: Option<usize>,
}

fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

pub fn gw(a: GwArgs, cfg: &Config) -> Result<(), CliError> {
    let m = tau_from(a.tau.clone(), cfg, DEFAULT_TAU)?;
    let w = match a.w.clone().or_else(|| cfg.get("w").map(str::to_string)) {
        Some(s) => parse_complex_list(&s)?,
        None if a.n <= DEFAULT_W.len() => DEFAULT_W[..a.n].iter().map(|x| Complex64::new(*x, 0.0)).collect(),
        None => return Err(CliError::Domain(format!("--w is required for n = {} > {}", a.n, DEFAULT_W.len()))),
    };
    if w.len() != a.n {
        return Err(CliError::Domain(format!("--w has {} entries but n = {}", w.len(), a.n)));
    }
    let hat = a.hat || cfg.parsed("hat", parse_bool)?.unwrap_or(false);
    if a.mode != GwMode::Closed && a.n > 3 {
        return Err(CliError::Domain(format!("numeric mode needs n <= 3 (got n = {})", a.n)));
    }
    let kron = Kronecker::from_modular(m);
    let point = GwPoint::new(w, kron.modular())?;
    let set: Vec<usize> = (1..=a.n).collect();
    let t_closed = t_hat_closed(&set, &point, &kron, hat)?;
    let g_closed = g_hat_closed(&set, &point, &kron, hat)?;
    let mut out = GwOut {
        n: a.n,
        tau: pair(kron.modular().tau()),
        w: point.w.iter().copied().map(pair).collect(),
        hat,
        t_closed: pair(t_closed),
        g_closed: pair(g_closed),
        t_closed_holomorphic: None,
        t_numeric: None,
        deviation: None,
        nodes: None,
    };
    if a.mode != GwMode::Closed {
        let nodes = a.nodes.or(cfg.parsed("nodes", parse_num)?).unwrap_or(if a.n <= 2 { 128 } else { 64 });
        let offsets: Vec<f64> = match &a.offsets {
            Some(s) => s.split(',').map(parse_num).collect::<Result<_, _>>()?,
            None => match a.n {
                2 => vec![0.04, 0.02],
                3 => vec![0.3, 0.2, 0.1],
                n => default_offsets(n),
            },
        };
        let numeric = t_numeric(&kron, &point, &offsets, nodes)?.mean;
        out.t_numeric = Some(pair(numeric));
        out.nodes = Some(nodes);
        // The A-cycle oracle computes the holomorphic limit.
        let holo = if hat { t_hat_closed(&set, &point, &kron, false)? } else { t_closed };
        if hat {
            out.t_closed_holomorphic = Some(pair(holo));
        }
        if a.mode == GwMode::Both {
            out.deviation = Some((numeric - holo).norm());
        }
    }
    if a.json {
        println!("{}", json(&out)?);
    } else {
        let c = |p: [f64; 2]| format_complex(Complex64::new(p[0], p[1]));
        let label = if hat { "hatted" } else { "holomorphic" };
        println!("n = {}  tau = {}", out.n, c(out.tau));
        println!("T_closed ({label}) = {}", c(out.t_closed));
        println!("G_closed ({label}) = {}", c(out.g_closed));
        if let Some(v) = out.t_closed_holomorphic {
            println!("T_closed (holomorphic) = {}", c(v));
        }
        if let Some(v) = out.t_numeric {
            println!("T_numeric (A-cycle average, {} nodes) = {}", out.nodes.unwrap_or(0), c(v));
        }
        if let Some(d) = out.deviation {
            println!("deviation = {d:.3e}");
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, ValueEnum)]
#[value(rename_all = "verbatim")]
pub enum QexpTarget {
    #[value(name = "theta")]
    Theta,
    #[value(name = "theta-reciprocal")]
    ThetaReciprocal,
    #[value(name = "Z")]
    Z,
    /// Eisenstein series of weight --k.
    #[value(name = "G2k")]
    G2k,
    /// Holomorphic Laurent coefficient e_m (--m).
    #[value(name = "E")]
    E,
    /// Holomorphic generating function T_n (--n).
    #[value(name = "T")]
    T,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
pub enum QexpFormat {
    Csv,
    Json,
}

#[derive(Args)]
pub struct QexpArgs {
    #[arg(long, value_enum)]
    target: QexpTarget,
    /// Truncation order in q.
    #[arg(long)]
    order: u32,
    #[arg(long)]
    m: Option<u32>,
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    k: Option<u32>,
    /// Output file; format follows the extension unless --format is given.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<QexpFormat>,
    /// Re-evaluate the series at these comma-separated points and compare
    /// with direct evaluation (fails with exit 1 above --check-tol).
    #[arg(long, allow_hyphen_values = true)]
    check: Option<String>,
    /// tau for --check.
    #[arg(long, allow_hyphen_values = true)]
    tau: Option<String>,
    #[arg(long, default_value_t = 1e-7)]
    check_tol: f64,
}

#[derive(Serialize)]
struct QexpDoc<'a> {
    target: QTarget,
    q_order: u32,
    nvars: usize,
    /// The series carries the prefactor (2 pi i)^weight.
    weight: i32,
    /// Factors (1 - u^{e/2})^p of the common denominator as (e, p).
    denominator_factors: Vec<(Vec<i32>, u32)>,
    rows: &'a [QSeriesRow],
}

pub fn qexp(a: QexpArgs, cfg: &Config) -> Result<(), CliError> {
    let target = match a.target {
        QexpTarget::Theta => QTarget::Theta,
        QexpTarget::ThetaReciprocal => QTarget::ThetaReciprocal,
        QexpTarget::Z => QTarget::Z,
        QexpTarget::G2k => QTarget::G { k: require(a.k, "--k")? },
        QexpTarget::E => QTarget::E { m: require(a.m, "--m")? },
        QexpTarget::T => QTarget::T { n: require(a.n, "--n")? },
    };
    let series = qexpand(target, a.order)?;
    let rows = series.rows();
    let doc = QexpDoc {
        target,
        q_order: series.q_order(),
        nvars: series.nvars(),
        weight: series.weight(),
        denominator_factors: series.denominator_factors().map(|(e, p)| (e.clone(), *p)).collect(),
        rows: &rows,
    };
    let format = a.format.unwrap_or(match a.out.as_ref().and_then(|p| p.extension()).and_then(|e| e.to_str()) {
        Some("csv") => QexpFormat::Csv,
        _ => QexpFormat::Json,
    });
    let text = match format {
        QexpFormat::Json => json(&doc)? + "\n",
        QexpFormat::Csv => csv_text(&doc)?,
    };
    match &a.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }

    if let Some(points) = &a.check {
        let z = parse_complex_list(points)?;
        let z = if target.nvars() == 0 { Vec::new() } else { z };
        if z.len() != target.nvars() {
            return Err(CliError::Domain(format!("--check needs {} point(s)", target.nvars())));
        }
        let m = tau_from(a.tau.clone(), cfg, "0.4768i")?;
        let kron = Kronecker::from_modular(m);
        let tau = kron.modular().tau();
        let s = series.evaluate(tau, &z)?;
        let d = target.numeric(&kron, &z)?;
        let err = (s - d).norm() / d.norm().max(1.0);
        eprintln!("check: series={},{} direct={},{} error={err:e}", s.re, s.im, d.re, d.im);
        if err.is_nan() || err > a.check_tol {
            return Err(CliError::Gating(format!("pointwise check failed: {err:.3e} > {:.1e}", a.check_tol)));
        }
    }
    Ok(())
}

/// CSV with `#` header lines for the prefactor and denominator, then one row
/// per coefficient: q_exponent_doubled, exponents_doubled (`;`-separated),
/// numerator, denominator.
fn csv_text(doc: &QexpDoc) -> Result<String, CliError> {
    let mut out = format!(
        "# target={} q_order={} nvars={} weight={}\n",
        serde_json::to_string(&doc.target).unwrap_or_default(),
        doc.q_order,
        doc.nvars,
        doc.weight
    );
    for (e, p) in &doc.denominator_factors {
        out.push_str(&format!("# denominator_factor exponents_doubled={} power={p}\n", join(e)));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Domain(format!("csv: {e}"));
    w.write_record(["q_exponent_doubled", "exponents_doubled", "numerator", "denominator"]).map_err(err)?;
    for r in doc.rows {
        w.write_record([
            r.q_exponent_doubled.to_string(),
            join(&r.exponents_doubled),
            r.numerator.clone(),
            r.denominator.clone(),
        ])
        .map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Domain(format!("csv: {e}")))?;
    out.push_str(&String::from_utf8_lossy(&bytes));
    Ok(out)
}

fn join(e: &[i32]) -> String {
    e.iter().map(i32::to_string).collect::<Vec<_>>().join(";")
}
