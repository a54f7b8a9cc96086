//! Command-line front end.
//!
//! Exit codes: 0 success, 1 inequality violation, 2 usage or configuration
//! error, 3 engine failure. Outputs are assembled only after every
//! computation succeeded, so a failing run never leaves a partial CSV.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::derivatives::{sweep, DEFAULT_LEVELS};
use crate::engines::{Engine, GridConfig, McConfig, Method};
use crate::error::Error;
use crate::geometry::Domain;
use crate::inequalities::{
    build_case, compare_constants, default_t_grid, geometric_grid, probe, verify, CaseId,
    TolerancePolicy, VerificationReport, CONSTANTS_CSV_HEADER, REPORT_CSV_HEADER,
};
use crate::rng::DEFAULT_SEED;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_ENGINE: i32 = 3;

/// Points per case in the default verification grids.
pub const DEFAULT_GRID_POINTS: usize = 20;

pub const SWEEP_CSV_HEADER: &str = "t,H,H_err,dH1,dH1_err,dH2,dH2_err,dH3,dH3_err";

#[derive(Debug, Parser)]
#[command(
    name = "heatcontent",
    version,
    about = "Heat content of bounded sets in R^m"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Heat content at one time or along a time grid
    Compute {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long, allow_negative_numbers = true, conflicts_with = "t_grid")]
        t: Option<f64>,
        #[arg(long = "t-grid")]
        t_grid: Option<String>,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Check inequality cases and write the report CSV
    Verify {
        /// Domain file; repeat for several domains
        #[arg(long, required = true)]
        domain: Vec<PathBuf>,
        /// Comma-separated case ids, or `all`
        #[arg(long, default_value = "all")]
        cases: String,
        /// Time grid; defaults to 20 geometric points inside each case's window
        #[arg(long = "t-grid")]
        t_grid: Option<String>,
        #[command(flatten)]
        engine: EngineArgs,
        #[command(flatten)]
        tolerance: ToleranceArgs,
        /// Evaluate times outside the validity windows instead of clipping them
        #[arg(long)]
        probe: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// H and its first three time derivatives along a time grid
    Sweep {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long = "t-grid")]
        t_grid: String,
        #[command(flatten)]
        engine: EngineArgs,
        #[arg(long, default_value_t = DEFAULT_LEVELS)]
        levels: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Refined versus baseline constants
    CompareConstants {
        #[arg(long, default_value_t = 1)]
        m_min: usize,
        #[arg(long, default_value_t = 20)]
        m_max: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct EngineArgs {
    /// closed, grid, mc or brute; defaults to closed where available, grid otherwise
    #[arg(long)]
    pub engine: Option<String>,
    /// Raster spacing for grid and brute
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub padding_sigmas: Option<f64>,
    #[arg(long)]
    pub points_per_sigma: Option<f64>,
    /// Skip the 2h rerun of the grid engine
    #[arg(long)]
    pub no_richardson: bool,
    #[arg(long)]
    pub n_samples: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ToleranceArgs {
    /// Tolerance floor relative to max(|lhs|, |rhs|)
    #[arg(long, default_value_t = 1e-9)]
    pub rel_tol: f64,
    #[arg(long, default_value_t = 0.0)]
    pub abs_tol: f64,
    #[arg(long, default_value_t = DEFAULT_LEVELS)]
    pub levels: usize,
}

impl ToleranceArgs {
    fn policy(&self) -> Result<TolerancePolicy<f64>, Failure> {
        if !(self.rel_tol >= 0.0 && self.abs_tol >= 0.0) {
            return Err(Failure::usage("tolerances must be non-negative"));
        }
        if self.levels == 0 {
            return Err(Failure::usage("--levels must be at least 1"));
        }
        Ok(TolerancePolicy {
            relative_floor: self.rel_tol,
            absolute_floor: self.abs_tol,
            richardson_levels: self.levels,
        })
    }
}

impl EngineArgs {
    fn engine_for(&self, d: &Domain<f64>) -> Result<Engine<f64>, Failure> {
        let method = match &self.engine {
            None => Engine::default_for(d).method(),
            Some(name) => name.parse::<Method>().map_err(Failure::from)?,
        };
        let engine = match method {
            Method::Closed => Engine::Closed,
            Method::Grid => {
                let mut cfg = GridConfig {
                    h: self.h,
                    richardson: !self.no_richardson,
                    ..GridConfig::default()
                };
                if let Some(p) = self.padding_sigmas {
                    cfg.padding_sigmas = p;
                }
                if let Some(p) = self.points_per_sigma {
                    cfg.points_per_sigma = p;
                }
                cfg.validate()?;
                Engine::Grid(cfg)
            }
            Method::Mc => {
                let cfg = McConfig {
                    n_samples: self.n_samples.unwrap_or(McConfig::default().n_samples),
                    seed: self.seed,
                };
                cfg.validate()?;
                Engine::Mc(cfg)
            }
            Method::Brute => {
                if let Some(h) = self.h {
                    if !(h > 0.0 && h.is_finite()) {
                        return Err(Failure::usage(format!("--h must be positive, got {h}")));
                    }
                }
                Engine::Brute { h: self.h }
            }
        };
        Ok(engine)
    }
}

/// Diagnostic plus exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Self {
            code: EXIT_USAGE,
            message: format!("i/o error: {e}"),
        }
    }
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::OracleScaleExceeded { .. }
        | Error::StepUnderflow(_)
        | Error::OutsideValidity { .. } => EXIT_ENGINE,
        _ => EXIT_USAGE,
    }
}

/// Parses `geom:<lo>:<hi>:<n>` or `list:v1,v2,...` into a non-empty,
/// strictly ascending sequence of positive times.
pub fn parse_t_grid(spec: &str) -> Result<Vec<f64>, Error> {
    let bad = |why: &str| Error::InvalidConfig(format!("t-grid `{spec}`: {why}"));
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| bad(&format!("`{s}` is not a number")))
    };
    let grid = if let Some(rest) = spec.strip_prefix("geom:") {
        let parts: Vec<&str> = rest.split(':').collect();
        let [lo, hi, n] = parts[..] else {
            return Err(bad("expected geom:<lo>:<hi>:<n>"));
        };
        let (lo, hi) = (num(lo)?, num(hi)?);
        let n: usize = n
            .trim()
            .parse()
            .map_err(|_| bad("point count must be a positive integer"))?;
        if n == 0 {
            return Err(bad("empty grid"));
        }
        if !(lo > 0.0 && hi.is_finite() && (hi > lo || (n == 1 && hi == lo))) {
            return Err(bad("need 0 < lo < hi"));
        }
        geometric_grid(lo, hi, n)
    } else if let Some(rest) = spec.strip_prefix("list:") {
        if rest.trim().is_empty() {
            return Err(bad("empty grid"));
        }
        rest.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    } else {
        return Err(bad("expected geom:<lo>:<hi>:<n> or list:v1,v2,..."));
    };
    if grid.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(bad("times must be positive and finite"));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(bad("times must be strictly ascending"));
    }
    Ok(grid)
}

/// Parses `all` or a comma-separated list of case ids.
pub fn parse_cases(spec: &str) -> Result<Vec<CaseId>, Error> {
    if spec.trim().eq_ignore_ascii_case("all") {
        return Ok(CaseId::ALL.to_vec());
    }
    let ids = spec
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<Vec<CaseId>, _>>()?;
    if ids.is_empty() {
        return Err(Error::UnknownCase(spec.to_string()));
    }
    Ok(ids)
}

/// `x` with 12 significant digits.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x:?}");
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        let s = if s.contains('.') {
            s.trim_end_matches('0').to_string()
        } else {
            s
        };
        if s.ends_with('.') {
            format!("{s}0")
        } else {
            s
        }
    } else {
        let m = mantissa.trim_end_matches('0').trim_end_matches('.');
        format!("{m}e{exp}")
    }
}

fn load_domain(path: &Path) -> Result<Domain<f64>, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read domain file {}: {e}", path.display())))?;
    Domain::from_json(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn domain_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn emit(out_path: &Option<PathBuf>, body: &[u8], stdout: &mut dyn Write) -> Result<(), Failure> {
    match out_path {
        Some(p) => fs::write(p, body)
            .map_err(|e| Failure::usage(format!("cannot write {}: {e}", p.display()))),
        None => Ok(stdout.write_all(body)?),
    }
}

fn run_compute(
    domain: &Path,
    t: Option<f64>,
    t_grid: Option<&str>,
    engine: &EngineArgs,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    let d = load_domain(domain)?;
    let eng = engine.engine_for(&d)?;
    match (t, t_grid) {
        (Some(t), _) => {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::InvalidTime(t).into());
            }
            let e = eng.heat_content(&d, t)?;
            writeln!(out, "value = {}", fmt_sig(e.value))?;
            writeln!(out, "error_bound = {}", fmt_sig(e.error_bound))?;
            writeln!(out, "kind = {}", e.kind)?;
            writeln!(out, "method = {}", e.method)?;
            for (k, v) in &e.meta {
                writeln!(out, "{k} = {v}")?;
            }
        }
        (None, Some(spec)) => {
            let grid = parse_t_grid(spec)?;
            let rows = grid
                .iter()
                .map(|&t| eng.heat_content(&d, t))
                .collect::<Result<Vec<_>, _>>()?;
            writeln!(out, "t value error_bound")?;
            for (t, e) in grid.iter().zip(rows) {
                writeln!(
                    out,
                    "{} {} {}",
                    fmt_sig(*t),
                    fmt_sig(e.value),
                    fmt_sig(e.error_bound)
                )?;
            }
        }
        (None, None) => return Err(Failure::usage("compute needs --t or --t-grid")),
    }
    Ok(EXIT_OK)
}

#[allow(clippy::too_many_arguments)]
fn run_verify(
    domains: &[PathBuf],
    cases: &str,
    t_grid: Option<&str>,
    engine: &EngineArgs,
    tolerance: &ToleranceArgs,
    probing: bool,
    out_path: &Option<PathBuf>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, Failure> {
    let ids = parse_cases(cases)?;
    let policy = tolerance.policy()?;
    let grid = t_grid.map(parse_t_grid).transpose()?;
    let loaded = domains
        .iter()
        .map(|p| {
            let d = load_domain(p)?;
            let e = engine.engine_for(&d)?;
            Ok((domain_id(p), d, e))
        })
        .collect::<Result<Vec<_>, Failure>>()?;

    let mut reports: Vec<(String, VerificationReport<f64>)> = Vec::new();
    for &id in &ids {
        let case = build_case::<f64>(id);
        for (name, d, eng) in &loaded {
            let times = match &grid {
                Some(g) => g.clone(),
                None => default_t_grid(
                    &case,
                    eng.prepare(d)?.diameter_squared(),
                    DEFAULT_GRID_POINTS,
                ),
            };
            let report = if probing {
                probe(&case, d, &times, eng, &policy)?
            } else {
                verify(&case, d, &times, eng, &policy)?
            };
            reports.push((name.clone(), report));
        }
    }

    let mut body = Vec::new();
    writeln!(body, "# heatcontent verify")?;
    writeln!(body, "# seed={}", engine.seed)?;
    writeln!(
        body,
        "# tolerance: rel={:?} abs={:?} levels={}",
        policy.relative_floor, policy.absolute_floor, policy.richardson_levels
    )?;
    if probing {
        writeln!(body, "# probe: validity windows not enforced")?;
    }
    for (name, d, eng) in &loaded {
        writeln!(body, "# domain {name}: {d} engine={}", eng.describe())?;
    }
    writeln!(body, "{REPORT_CSV_HEADER}")?;
    for (name, r) in &reports {
        r.write_csv(name, &mut body)?;
    }
    emit(out_path, &body, out)?;

    let mut all_pass = true;
    for (name, r) in &reports {
        let evaluated = r.evaluated().count();
        let clipped = r.rows.len() - evaluated;
        let failed = r.failures().count();
        all_pass &= r.overall;
        let worst = r
            .evaluated()
            .map(|row| row.margin + row.tolerance)
            .fold(f64::INFINITY, f64::min);
        writeln!(
            err,
            "{:<10} {:<12} {} ({} rows, {} failed, {} clipped, min margin+tol {})",
            r.case,
            name,
            if r.overall { "pass" } else { "FAIL" },
            evaluated,
            failed,
            clipped,
            fmt_sig(worst)
        )?;
    }
    Ok(if all_pass { EXIT_OK } else { EXIT_VIOLATION })
}

fn run_sweep(
    domain: &Path,
    t_grid: &str,
    engine: &EngineArgs,
    levels: usize,
    out_path: &Option<PathBuf>,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    let d = load_domain(domain)?;
    let grid = parse_t_grid(t_grid)?;
    let eng = engine.engine_for(&d)?;
    if eng.method() == Method::Mc {
        return Err(Error::TooNoisy { order: 2 }.into());
    }
    let target = eng.prepare(&d)?;
    let rows = sweep(|t| eng.heat_content(&target, t), &grid, levels)?;

    let mut body = Vec::new();
    writeln!(body, "# heatcontent sweep")?;
    writeln!(body, "# seed={}", engine.seed)?;
    writeln!(
        body,
        "# domain {}: {target} engine={}",
        domain_id(domain),
        eng.describe()
    )?;
    writeln!(body, "{SWEEP_CSV_HEADER}")?;
    for r in rows {
        write!(body, "{:?},{:?},{:?}", r.t, r.value, r.value_err)?;
        for dv in &r.derivatives {
            write!(body, ",{:?},{:?}", dv.value, dv.error_estimate)?;
        }
        writeln!(body)?;
    }
    emit(out_path, &body, out)?;
    Ok(EXIT_OK)
}

fn run_compare(
    m_min: usize,
    m_max: usize,
    out_path: &Option<PathBuf>,
    out: &mut dyn Write,
) -> Result<i32, Failure> {
    if m_min == 0 || m_min > m_max {
        return Err(Failure::usage(format!(
            "need 1 <= m-min <= m-max, got {m_min}..{m_max}"
        )));
    }
    let mut body = Vec::new();
    writeln!(body, "# heatcontent compare-constants")?;
    writeln!(body, "{CONSTANTS_CSV_HEADER}")?;
    for row in compare_constants::<f64>(m_min..=m_max) {
        row.write_csv(&mut body)?;
    }
    emit(out_path, &body, out)?;
    Ok(EXIT_OK)
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(rendered.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = err.write_all(rendered.as_bytes());
                    EXIT_USAGE
                }
            };
        }
    };
    let result = match &cli.command {
        Command::Compute {
            domain,
            t,
            t_grid,
            engine,
        } => run_compute(domain, *t, t_grid.as_deref(), engine, out),
        Command::Verify {
            domain,
            cases,
            t_grid,
            engine,
            tolerance,
            probe,
            out: path,
        } => run_verify(
            domain,
            cases,
            t_grid.as_deref(),
            engine,
            tolerance,
            *probe,
            path,
            out,
            err,
        ),
        Command::Sweep {
            domain,
            t_grid,
            engine,
            levels,
            out: path,
        } => run_sweep(domain, t_grid, engine, *levels, path, out),
        Command::CompareConstants {
            m_min,
            m_max,
            out: path,
        } => run_compare(*m_min, *m_max, path, out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}
