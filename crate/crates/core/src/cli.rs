//! Command-line front end.
//!
//! Exit codes: 0 success, 1 domain/diagnostic/parse error (one JSON line on
//! stderr), 2 I/O error, 3 `verify` found a failing check, 64 usage error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Parser;
use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::norms::{
    besov_norm_sphere, bloch_norm, bmo_norm, default_bmo_centers, BlochReport, NormReport, DEFAULT_SPHERE,
};
use crate::operators::{
    analyze_operator, besov_norm_of_composition, carleson_constant, essential_norm_bounds, pullback_measure, AGrid,
    CarlesonReport, EssentialNormOptions, EssentialNormReport, OperatorReport, SelfMap, DEFAULT_N_CUT,
};
use crate::quadrature::{DiskRule, RuleSpec, DEFAULT_R_MAX};
use crate::quaternion::{sample_sphere, slice_decompose, ImaginaryUnit, Quaternion};
use crate::series::{mobius, mobius_degree_for, FunctionSpec, Mobius, PowerSeries, SliceFunction};
use crate::verify::run_suite;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_VERIFY_FAILED: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

/// BMO disks use this Bergman radius.
pub const BMO_RADIUS: f64 = 1.0;

const COMMANDS: [&str; 7] = ["norm", "bloch", "bmo", "verify", "compose", "essnorm", "carleson"];

/// Numerical diagnostics for slice-regular quaternionic functions.
///
/// Commands: norm, bloch, bmo, verify, compose, essnorm, carleson.
/// Functions are JSON files {"coeffs": [[w,x,y,z], ...]} or built-ins:
/// identity, monomial:N, mobius:A, constant:C, scale:C, where A and C are a
/// real number or w,x,y,z.
#[derive(Debug, Clone, Parser)]
#[command(name = "hyperslice", version)]
pub struct RunConfig {
    /// One of norm, bloch, bmo, verify, compose, essnorm, carleson.
    pub command: String,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub alpha: f64,
    /// Function f.
    #[arg(long)]
    pub f: Option<String>,
    /// Self-map Φ.
    #[arg(long)]
    pub phi: Option<String>,
    #[arg(long, default_value_t = 128)]
    pub rule_radial: usize,
    #[arg(long, default_value_t = 128)]
    pub rule_angular: usize,
    #[arg(long, default_value_t = DEFAULT_R_MAX)]
    pub rmax: f64,
    /// Number of sampled imaginary units.
    #[arg(long, default_value_t = DEFAULT_SPHERE)]
    pub sphere: usize,
    /// Comma-separated radii of the a-grid.
    #[arg(long, default_value = "0.9,0.99,0.999")]
    pub a_rhos: String,
    #[arg(long, default_value_t = 16)]
    pub a_angles: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for report.json and CSV tables.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

/// A function argument: a series, or a closed-form Moebius map.
pub enum FunctionArg {
    Series(PowerSeries),
    Mobius(Mobius),
}

impl SliceFunction for FunctionArg {
    fn value(&self, q: Quaternion) -> Result<Quaternion> {
        match self {
            FunctionArg::Series(s) => s.value(q),
            FunctionArg::Mobius(m) => m.value(q),
        }
    }
    fn derivative(&self, q: Quaternion) -> Result<Quaternion> {
        match self {
            FunctionArg::Series(s) => s.derivative(q),
            FunctionArg::Mobius(m) => m.derivative(q),
        }
    }
    fn reference_unit(&self) -> ImaginaryUnit {
        match self {
            FunctionArg::Series(s) => s.reference_unit(),
            FunctionArg::Mobius(m) => m.reference_unit(),
        }
    }
    fn hotspots(&self) -> Vec<Complex64> {
        match self {
            FunctionArg::Series(s) => s.hotspots(),
            FunctionArg::Mobius(m) => m.hotspots(),
        }
    }
}

fn parse_quaternion(s: &str) -> Result<Quaternion> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Error::Parse(format!("not a number: {t:?}"))))
        .collect::<Result<_>>()?;
    match parts.as_slice() {
        [r] => Ok(Quaternion::real(*r)),
        [w, x, y, z] => Ok(Quaternion::new(*w, *x, *y, *z)),
        _ => Err(Error::Parse(format!("expected 1 or 4 components, got {s:?}"))),
    }
}

fn builtin(spec: &str) -> Option<Result<FunctionArg>> {
    let (name, arg) = spec.split_once(':').unwrap_or((spec, ""));
    let out = match name {
        "identity" => Ok(FunctionArg::Series(PowerSeries::identity())),
        "monomial" => arg
            .parse::<usize>()
            .map(|n| FunctionArg::Series(PowerSeries::monomial(n, Quaternion::ONE)))
            .map_err(|_| Error::Parse(format!("monomial needs a degree, got {arg:?}"))),
        "mobius" => parse_quaternion(arg).and_then(Mobius::new).map(FunctionArg::Mobius),
        "constant" => parse_quaternion(arg).map(|c| FunctionArg::Series(PowerSeries::constant(c))),
        "scale" => parse_quaternion(arg).map(|c| FunctionArg::Series(PowerSeries::monomial(1, c))),
        _ => return None,
    };
    Some(out)
}

fn read_spec(path: &str) -> Result<PowerSeries> {
    let text = fs::read_to_string(path)?;
    let spec: FunctionSpec =
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{path}: {e}")))?;
    spec.to_series()
}

/// Resolves `--f`.
pub fn load_function(spec: &str) -> Result<FunctionArg> {
    match builtin(spec) {
        Some(f) => f,
        None => read_spec(spec).map(FunctionArg::Series),
    }
}

/// The slice a series preserves: the direction of its first non-real
/// coefficient, or `i` when all coefficients are real.
fn natural_slice(s: &PowerSeries) -> ImaginaryUnit {
    s.coeffs()
        .iter()
        .find(|c| c.im().norm() > 0.0)
        .map(|c| slice_decompose(*c).unit)
        .unwrap_or(ImaginaryUnit::I)
}

/// Resolves `--phi`; Moebius self-maps become series exact to 1e-16.
pub fn load_self_map(spec: &str) -> Result<SelfMap> {
    let series = match load_function(spec)? {
        FunctionArg::Series(s) => s,
        FunctionArg::Mobius(m) => {
            let a = m.parameter();
            mobius(a, mobius_degree_for(a, 1e-16))?.allow_tail(true)
        }
    };
    let unit = natural_slice(&series);
    SelfMap::verified(series, unit)
}

fn parse_rhos(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad a-grid radius {t:?}"))))
        .collect()
}

struct Context {
    rule: DiskRule,
    units: Vec<ImaginaryUnit>,
    a_grid: AGrid,
}

impl RunConfig {
    fn context(&self) -> Result<Context> {
        let rule = DiskRule::from_spec(RuleSpec {
            radial: self.rule_radial,
            angular: self.rule_angular,
            r_max: self.rmax,
            extrapolate: true,
        })?;
        let units = sample_sphere(self.sphere, self.seed)?;
        let a_grid = AGrid { rhos: parse_rhos(&self.a_rhos)?, angles: self.a_angles };
        Ok(Context { rule, units, a_grid })
    }

    fn essnorm_options(&self, ctx: &Context) -> EssentialNormOptions {
        EssentialNormOptions {
            p: self.p,
            alpha: self.alpha,
            a_grid: ctx.a_grid.clone(),
            n_cut: DEFAULT_N_CUT,
            calibrate: true,
            c_cal: None,
        }
    }
}

/// Usage failures are separate from computation failures.
enum Failure {
    Usage(String),
    Compute(Error),
    VerifyFailed,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Compute(e)
    }
}

fn require<'a>(value: &'a Option<String>, flag: &str, command: &str) -> std::result::Result<&'a str, Failure> {
    value.as_deref().ok_or_else(|| Failure::Usage(format!("{command} requires --{flag}")))
}

#[derive(Serialize)]
struct BmoOutput {
    command: &'static str,
    p: f64,
    radius: f64,
    value: f64,
    per_slice: Vec<(ImaginaryUnit, f64)>,
}

#[derive(Serialize)]
struct ComposeOutput {
    command: &'static str,
    composition_norm: Option<NormReport>,
    operator: OperatorReport,
}

#[derive(Serialize)]
struct EssnormOutput {
    command: &'static str,
    p: f64,
    alpha: f64,
    lower: f64,
    upper: f64,
    report: EssentialNormReport,
}

#[derive(Serialize)]
struct CarlesonOutput {
    command: &'static str,
    p: f64,
    family_size: usize,
    report: CarlesonReport,
}

#[derive(Serialize)]
struct Tagged<'a, T: Serialize> {
    command: &'static str,
    #[serde(flatten)]
    report: &'a T,
}

fn write_outputs(out: Option<&Path>, report: &impl Serialize, tables: &[(&str, String)]) -> Result<String> {
    let text = serde_json::to_string_pretty(report).map_err(|e| Error::Parse(e.to_string()))? + "\n";
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.json"), &text)?;
        for (name, body) in tables {
            fs::write(dir.join(name), body)?;
        }
    }
    Ok(text)
}

fn dispatch(cfg: &RunConfig, stdout: &mut dyn Write) -> std::result::Result<(), Failure> {
    let cmd = cfg.command.as_str();
    if !COMMANDS.contains(&cmd) {
        return Err(Failure::Usage(format!("unknown command {cmd:?}")));
    }
    let ctx = cfg.context()?;
    let out = cfg.out.as_deref();
    let text = match cmd {
        "norm" => {
            let f = load_function(require(&cfg.f, "f", cmd)?)?;
            let rep = besov_norm_sphere(&f, cfg.p, cfg.sphere, cfg.seed, &ctx.rule)?;
            let csv = rep.to_csv();
            write_outputs(out, &Tagged { command: "norm", report: &rep }, &[("per_slice.csv", csv)])?
        }
        "bloch" => {
            let f = load_function(require(&cfg.f, "f", cmd)?)?;
            let rep: BlochReport = bloch_norm(&f, &ctx.units, &ctx.rule)?;
            let mut csv = String::from("unit_x,unit_y,unit_z,seminorm\n");
            for e in &rep.per_slice {
                let c = e.unit.components();
                csv.push_str(&format!("{},{},{},{}\n", c[0], c[1], c[2], e.seminorm));
            }
            write_outputs(out, &Tagged { command: "bloch", report: &rep }, &[("per_slice.csv", csv)])?
        }
        "bmo" => {
            let f = load_function(require(&cfg.f, "f", cmd)?)?;
            let centers = default_bmo_centers(&ctx.rule);
            let mut per_slice = Vec::new();
            for u in &ctx.units {
                per_slice.push((*u, bmo_norm(&f, cfg.p, BMO_RADIUS, *u, &ctx.rule, &centers)?.value));
            }
            let value = per_slice.iter().map(|e| e.1).fold(0.0, f64::max);
            let mut csv = String::from("unit_x,unit_y,unit_z,seminorm\n");
            for (u, v) in &per_slice {
                let c = u.components();
                csv.push_str(&format!("{},{},{},{}\n", c[0], c[1], c[2], v));
            }
            let rep = BmoOutput { command: "bmo", p: cfg.p, radius: BMO_RADIUS, value, per_slice };
            write_outputs(out, &rep, &[("per_slice.csv", csv)])?
        }
        "verify" => {
            let rep = run_suite(cfg.seed)?;
            let table = rep.table();
            write_outputs(out, &Tagged { command: "verify", report: &rep }, &[])?;
            stdout.write_all(table.as_bytes()).map_err(Error::from)?;
            if !rep.passed() {
                return Err(Failure::VerifyFailed);
            }
            return Ok(());
        }
        "compose" => {
            let phi = load_self_map(require(&cfg.phi, "phi", cmd)?)?;
            let composition_norm = match &cfg.f {
                Some(spec) => Some(besov_norm_of_composition(&load_function(spec)?, &phi, cfg.p, &ctx.units, &ctx.rule)?),
                None => None,
            };
            let operator = analyze_operator(&phi, &cfg.essnorm_options(&ctx), &ctx.units, &ctx.rule)?;
            let csv = operator.trace_csv();
            write_outputs(out, &ComposeOutput { command: "compose", composition_norm, operator }, &[("trace.csv", csv)])?
        }
        "essnorm" => {
            let phi = load_self_map(require(&cfg.phi, "phi", cmd)?)?;
            let rep = essential_norm_bounds(&phi, &cfg.essnorm_options(&ctx), &ctx.units, &ctx.rule)?;
            let mut csv = String::from("|a|,angle,K(a)\n");
            for (a, k) in ctx.a_grid.points().iter().zip(&rep.kernel) {
                csv.push_str(&format!("{},{},{}\n", a.norm(), a.arg(), k));
            }
            let o = EssnormOutput { command: "essnorm", p: cfg.p, alpha: cfg.alpha, lower: rep.lower, upper: rep.upper, report: rep };
            write_outputs(out, &o, &[("kernel.csv", csv)])?
        }
        "carleson" => {
            let phi = load_self_map(require(&cfg.phi, "phi", cmd)?)?;
            let mu = pullback_measure(&phi, cfg.p, &ctx.rule.without_extrapolation(), phi.verified_slice())?;
            let mut family: Vec<FunctionArg> = ctx
                .a_grid
                .points()
                .into_iter()
                .map(|a| Mobius::on_slice(a, phi.verified_slice()).map(FunctionArg::Mobius))
                .collect::<Result<_>>()?;
            if let Some(spec) = &cfg.f {
                family.push(load_function(spec)?);
            }
            let report = carleson_constant(&mu, cfg.p, &family, &ctx.units, &ctx.rule)?;
            let o = CarlesonOutput { command: "carleson", p: cfg.p, family_size: family.len(), report };
            write_outputs(out, &o, &[])?
        }
        _ => unreachable!("checked against COMMANDS"),
    };
    stdout.write_all(text.as_bytes()).map_err(Error::from)?;
    Ok(())
}

fn error_record(e: &Error) -> String {
    json!({ "error": e.kind(), "message": e.to_string() }).to_string()
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code. Reports go to `stdout`, errors and usage to `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cfg = match RunConfig::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(stderr, "{}", e.render())
            } else {
                write!(stdout, "{}", e.render())
            };
            return code;
        }
    };
    if let Some(n) = cfg.threads {
        // the global pool can only be set once per process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match dispatch(&cfg, stdout) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(stderr, "error: {msg}\n\n{}", usage());
            EXIT_USAGE
        }
        Err(Failure::VerifyFailed) => EXIT_VERIFY_FAILED,
        Err(Failure::Compute(e)) => {
            let _ = writeln!(stderr, "{}", error_record(&e));
            match e {
                Error::Io(_) => EXIT_IO,
                _ => EXIT_ERROR,
            }
        }
    }
}

fn usage() -> String {
    use clap::CommandFactory;
    RunConfig::command().render_usage().to_string() + "\ncommands: " + &COMMANDS.join(", ")
}
