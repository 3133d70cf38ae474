//! Command-line front end: load system specs from JSON, run checks,
//! simulations and scans, and emit CSV/JSON suitable for external plotting.
//!
//! Exit codes: 0 success, 2 input error, 3 numerical-search failure,
//! 4 construction infeasible.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::Value;

use crate::construct::{multi_transition, ConstructError, MultiSystemSpec, WindowsReport};
use crate::ctmc::{stationary, Generator};
use crate::fmt_float;
use crate::linalg::{
    average_matrix, commute, is_hurwitz, is_normal, mat_exp, operator_norm, SquareMatrix,
    DEFAULT_PREDICATE_TOL, DEFAULT_SPECTRAL_TOL,
};
use crate::planar::{
    find_window, g_eval, lyapunov_analytic, AngularDensity, PlanarError, PlanarParams,
    DEFAULT_WINDOW_TOL,
};
use crate::sim::{lyapunov_mc, propagator_norm_mc, SimError, SwitchedSystem};

/// Environment variable consulted for the default seed.
pub const SEED_ENV_VAR: &str = "SWITCHSTAB_SEED";

#[derive(Debug)]
pub enum CliError {
    /// Malformed input: bad JSON, invalid system, bad flags. Exit 2.
    Input(String),
    /// A numerical search failed (quadrature budget, scan boundary). Exit 3.
    Numerical(String),
    /// A requested construction cannot exist. Exit 4.
    Infeasible(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Infeasible(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Infeasible(m) => write!(f, "construction infeasible: {m}"),
        }
    }
}

impl From<PlanarError> for CliError {
    fn from(e: PlanarError) -> Self {
        match &e {
            PlanarError::ScanBoundary { .. } | PlanarError::Quad(_) => {
                CliError::Numerical(e.to_string())
            }
            PlanarError::CertificationFailed(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<ConstructError> for CliError {
    fn from(e: ConstructError) -> Self {
        match &e {
            ConstructError::NoWindow { .. }
            | ConstructError::ScaleTooSmall { .. }
            | ConstructError::ScaleUnderflow { .. } => CliError::Infeasible(e.to_string()),
            ConstructError::BadParams(_) => CliError::Input(e.to_string()),
            ConstructError::Planar(p) => CliError::from(p.clone_message()),
        }
    }
}

impl PlanarError {
    fn clone_message(&self) -> PlanarError {
        // PlanarError is not Clone (QuadError isn't); rebuild the scan/cert
        // variants we care about and degrade the rest to BadParams.
        match self {
            PlanarError::ScanBoundary { lambda, lo, hi } => PlanarError::ScanBoundary {
                lambda: *lambda,
                lo: *lo,
                hi: *hi,
            },
            PlanarError::CertificationFailed(s) => PlanarError::CertificationFailed(s.clone()),
            other => PlanarError::BadParams(other.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match &e {
            SimError::BadParams(_) | SimError::DenseOverflow { .. } => {
                CliError::Input(e.to_string())
            }
            SimError::Ctmc(_) | SimError::Linalg(_) => CliError::Input(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

fn io_input(context: &str, e: std::io::Error) -> CliError {
    CliError::Input(format!("{context}: {e}"))
}

/// Analyze and simulate randomly switched linear ODEs.
#[derive(Debug, Parser)]
#[command(name = "switchstab", version, about)]
pub struct Cli {
    /// Worker threads for Monte Carlo replicas (0 = rayon default).
    /// Results are identical for any thread count.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Spectral and structural checks of a system spec.
    Check(CheckArgs),
    /// Monte Carlo Lyapunov exponent estimate.
    Lyapunov(LyapunovArgs),
    /// Exponent scan over a grid of switching rates.
    Scan(ScanArgs),
    /// Locate the instability window of a planar family.
    Window(WindowArgs),
    /// Build a block system with k instability windows.
    Construct(ConstructArgs),
    /// Tabulate the angular invariant density.
    Density(DensityArgs),
    /// Propagator-norm averaging limit across rates.
    Kurtz(KurtzArgs),
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// System spec JSON file.
    pub spec: PathBuf,
}

#[derive(Debug, Args)]
pub struct LyapunovArgs {
    pub spec: PathBuf,
    /// Measurement horizon after burn-in.
    #[arg(long = "T", default_value_t = 1000.0)]
    pub horizon: f64,
    /// Burn-in time (default T/10).
    #[arg(long = "burn-in")]
    pub burn_in: Option<f64>,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    /// Master seed (default from SWITCHSTAB_SEED, else 0).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the replica-0 trajectory CSV (t,state,log_radius,theta) here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    pub spec: PathBuf,
    /// Rate grid as min:max:points, logarithmically spaced.
    #[arg(long = "r-grid")]
    pub r_grid: String,
    /// Fill the analytic-exponent column (planar/multi families only).
    #[arg(long)]
    pub analytic: bool,
    /// Fill the Monte Carlo columns.
    #[arg(long)]
    pub mc: bool,
    #[arg(long = "T", default_value_t = 1000.0)]
    pub horizon: f64,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WindowArgs {
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub c: f64,
    #[arg(long, default_value_t = DEFAULT_WINDOW_TOL)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct ConstructArgs {
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub alpha1: f64,
    #[arg(long)]
    pub c1: f64,
    /// Scale factor between consecutive windows (default 2 b1/a1).
    #[arg(long = "N")]
    pub n_scale: Option<f64>,
    /// Where to write the explicit system spec JSON.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_WINDOW_TOL)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    /// The ratio r/c.
    #[arg(long)]
    pub lambda: f64,
    #[arg(long, default_value_t = 2000)]
    pub points: usize,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct KurtzArgs {
    pub spec: PathBuf,
    #[arg(long = "T", default_value_t = 9.0)]
    pub horizon: f64,
    /// Comma-separated switching rates.
    #[arg(long = "r-list", default_value = "1,10,100,1000")]
    pub r_list: String,
    #[arg(long, default_value_t = 200)]
    pub reps: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Default seed: flag, else SWITCHSTAB_SEED, else 0.
pub fn resolve_seed(flag: Option<u64>) -> Result<u64, CliError> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV_VAR) {
        Ok(v) => v
            .parse()
            .map_err(|_| CliError::Input(format!("{SEED_ENV_VAR} must be an integer, got {v:?}"))),
        Err(_) => Ok(0),
    }
}

/// Analytic structure behind a loaded system, when it has one.
#[derive(Debug, Clone)]
pub enum Family {
    Planar(PlanarParams),
    Multi(MultiSystemSpec),
}

/// A system spec resolved into matrices, generator, and rate.
#[derive(Debug)]
pub struct LoadedSystem {
    pub system: SwitchedSystem,
    pub family: Option<Family>,
}

impl LoadedSystem {
    /// Analytic exponent at rate `r`, when the family supports it.
    pub fn analytic_exponent(&self, r: f64, tol: f64) -> Result<Option<f64>, CliError> {
        match &self.family {
            None => Ok(None),
            Some(Family::Planar(params)) => Ok(Some(lyapunov_analytic(params, r, tol)?)),
            Some(Family::Multi(spec)) => {
                Ok(Some(crate::construct::block_lyapunov(spec, r, tol)?))
            }
        }
    }
}

#[derive(Deserialize)]
struct ExplicitSpec {
    matrices: Vec<SquareMatrix>,
    #[serde(rename = "Q")]
    q: Generator,
    r: f64,
}

#[derive(Deserialize)]
struct PlanarSpec {
    alpha: f64,
    c: f64,
    r: f64,
}

#[derive(Deserialize)]
struct MultiSpec {
    k: usize,
    alpha1: f64,
    c1: f64,
    #[serde(rename = "N")]
    n_scale: Option<f64>,
    r: Option<f64>,
}

/// Parse a system spec JSON document.
pub fn parse_system(text: &str) -> Result<LoadedSystem, CliError> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| CliError::Input(format!("malformed JSON: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| CliError::Input("spec must be a JSON object".into()))?;

    if let Some(family) = obj.get("family") {
        match family.as_str() {
            Some("planar") => {
                let spec: PlanarSpec = serde_json::from_value(value.clone())
                    .map_err(|e| CliError::Input(format!("planar family spec: {e}")))?;
                let params = PlanarParams::new(spec.alpha, spec.c)
                    .map_err(|e| CliError::Input(e.to_string()))?;
                let (a0, a1) = crate::construct::planar_pair(spec.alpha, spec.c)
                    .map_err(|e| CliError::Input(e.to_string()))?;
                let system =
                    SwitchedSystem::new(vec![a0, a1], Generator::symmetric_two_state(), spec.r)?;
                Ok(LoadedSystem {
                    system,
                    family: Some(Family::Planar(params)),
                })
            }
            Some("multi") => {
                let spec: MultiSpec = serde_json::from_value(value.clone())
                    .map_err(|e| CliError::Input(format!("multi family spec: {e}")))?;
                let (a0, a1, multi) = multi_transition(
                    spec.k,
                    spec.alpha1,
                    spec.c1,
                    spec.n_scale,
                    DEFAULT_WINDOW_TOL,
                    None,
                )?;
                let r = spec.r.unwrap_or(multi.blocks[0].r_star);
                let system =
                    SwitchedSystem::new(vec![a0, a1], Generator::symmetric_two_state(), r)?;
                Ok(LoadedSystem {
                    system,
                    family: Some(Family::Multi(multi)),
                })
            }
            other => Err(CliError::Input(format!(
                "unknown family {other:?}; expected \"planar\" or \"multi\""
            ))),
        }
    } else if obj.contains_key("matrices") {
        let spec: ExplicitSpec = serde_json::from_value(value.clone())
            .map_err(|e| CliError::Input(format!("explicit system spec: {e}")))?;
        let system = SwitchedSystem::new(spec.matrices, spec.q, spec.r)?;
        Ok(LoadedSystem {
            system,
            family: None,
        })
    } else {
        Err(CliError::Input(
            "spec must contain either \"family\" or \"matrices\"".into(),
        ))
    }
}

pub fn load_system(path: &Path) -> Result<LoadedSystem, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| io_input(&format!("reading {}", path.display()), e))?;
    parse_system(&text)
}

fn write_output(path: Option<&Path>, content: &str, out: &mut dyn Write) -> Result<(), CliError> {
    match path {
        Some(p) => {
            fs::write(p, content).map_err(|e| io_input(&format!("writing {}", p.display()), e))
        }
        None => out
            .write_all(content.as_bytes())
            .map_err(|e| io_input("writing stdout", e)),
    }
}

/// `check`: spectral verdicts, commutation table, stationary distribution,
/// and the averaged matrix.
pub fn cmd_check(args: &CheckArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let loaded = load_system(&args.spec)?;
    let sys = &loaded.system;
    let mut w = Vec::new();
    for (i, m) in sys.matrices().iter().enumerate() {
        let verdict = is_hurwitz(m, DEFAULT_SPECTRAL_TOL).map_err(SimError::Linalg)?;
        let normal = is_normal(m, DEFAULT_PREDICATE_TOL);
        writeln!(
            w,
            "A{i}: dim={} {} normal={} norm={}",
            m.dim(),
            verdict,
            normal,
            fmt_float(operator_norm(m))
        )
        .map_err(|e| io_input("formatting", e))?;
    }
    for i in 0..sys.matrices().len() {
        for j in (i + 1)..sys.matrices().len() {
            let c = commute(
                &sys.matrices()[i],
                &sys.matrices()[j],
                DEFAULT_PREDICATE_TOL,
            )
            .map_err(SimError::Linalg)?;
            writeln!(w, "commute(A{i},A{j})={c}").map_err(|e| io_input("formatting", e))?;
        }
    }
    let pi = stationary(sys.generator()).map_err(SimError::Ctmc)?;
    let pi_str = pi
        .probabilities()
        .iter()
        .map(|p| fmt_float(*p))
        .collect::<Vec<_>>()
        .join(",");
    writeln!(w, "pi={pi_str}").map_err(|e| io_input("formatting", e))?;
    let avg = average_matrix(sys.matrices(), pi.probabilities()).map_err(SimError::Linalg)?;
    let avg_verdict = is_hurwitz(&avg, DEFAULT_SPECTRAL_TOL).map_err(SimError::Linalg)?;
    writeln!(
        w,
        "average: {} norm={}",
        avg_verdict,
        fmt_float(operator_norm(&avg))
    )
    .map_err(|e| io_input("formatting", e))?;
    writeln!(w, "rate r={}", fmt_float(sys.rate())).map_err(|e| io_input("formatting", e))?;
    out.write_all(&w).map_err(|e| io_input("writing stdout", e))
}

/// `lyapunov`: Monte Carlo exponent estimate with a 3-sigma sign verdict.
pub fn cmd_lyapunov(args: &LyapunovArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let loaded = load_system(&args.spec)?;
    let seed = resolve_seed(args.seed)?;
    let burn_in = args.burn_in.unwrap_or(args.horizon / 10.0);
    let est = lyapunov_mc(&loaded.system, args.horizon, burn_in, args.reps, seed)?;
    let verdict = est.verdict(3.0);
    writeln!(
        out,
        "lyapunov mean={} stderr={} reps={} T={} burn_in={} verdict={}",
        fmt_float(est.mean),
        fmt_float(est.stderr),
        est.replicas,
        fmt_float(est.horizon),
        fmt_float(est.burn_in),
        verdict
    )
    .map_err(|e| io_input("writing stdout", e))?;
    if let Some(path) = &args.out {
        let mut rng = crate::rngutil::stream_rng(seed, crate::rngutil::StreamDomain::Lyapunov, 0);
        let path_sample = crate::ctmc::sample_path_with(
            loaded.system.generator(),
            loaded.system.rate(),
            0,
            burn_in + args.horizon,
            &mut rng,
        )
        .map_err(SimError::Ctmc)?;
        let mut buf = Vec::new();
        crate::sim::write_trajectory_csv(
            &loaded.system,
            &path_sample,
            &loaded.system.default_direction(),
            &mut buf,
        )?;
        fs::write(path, buf).map_err(|e| io_input(&format!("writing {}", path.display()), e))?;
    }
    Ok(())
}

fn parse_r_grid(grid: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = grid.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::Input(format!(
            "--r-grid expects min:max:points, got {grid:?}"
        )));
    }
    let min: f64 = parts[0]
        .parse()
        .map_err(|_| CliError::Input(format!("bad grid minimum {:?}", parts[0])))?;
    let max: f64 = parts[1]
        .parse()
        .map_err(|_| CliError::Input(format!("bad grid maximum {:?}", parts[1])))?;
    let points: usize = parts[2]
        .parse()
        .map_err(|_| CliError::Input(format!("bad grid point count {:?}", parts[2])))?;
    if !(min > 0.0) || !(max > min) || points < 2 {
        return Err(CliError::Input(format!(
            "grid needs 0 < min < max and at least 2 points, got {grid:?}"
        )));
    }
    let (ln_min, ln_max) = (min.ln(), max.ln());
    Ok((0..points)
        .map(|i| (ln_min + (ln_max - ln_min) * i as f64 / (points - 1) as f64).exp())
        .collect())
}

/// `scan`: CSV of `r,lambda_analytic,lambda_mc,mc_stderr` over a log grid.
pub fn cmd_scan(args: &ScanArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if !args.analytic && !args.mc {
        return Err(CliError::Input(
            "nothing to compute: pass --analytic and/or --mc".into(),
        ));
    }
    let loaded = load_system(&args.spec)?;
    let grid = parse_r_grid(&args.r_grid)?;
    let seed = resolve_seed(args.seed)?;
    let reps = args.reps.unwrap_or(100);
    let mut csv = String::from("r,lambda_analytic,lambda_mc,mc_stderr\n");
    for &r in &grid {
        let analytic = if args.analytic {
            loaded.analytic_exponent(r, 1e-10)?
        } else {
            None
        };
        let mc = if args.mc {
            let sys = loaded.system.with_rate(r)?;
            let est = lyapunov_mc(&sys, args.horizon, args.horizon / 10.0, reps, seed)?;
            Some((est.mean, est.stderr))
        } else {
            None
        };
        let analytic_str = analytic.map(fmt_float).unwrap_or_default();
        let (mc_str, err_str) = match mc {
            Some((m, s)) => (fmt_float(m), fmt_float(s)),
            None => (String::new(), String::new()),
        };
        csv.push_str(&format!("{},{analytic_str},{mc_str},{err_str}\n", fmt_float(r)));
    }
    write_output(args.out.as_deref(), &csv, out)
}

/// `window`: JSON report of the instability window of `(alpha, c)`.
pub fn cmd_window(args: &WindowArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let params = PlanarParams::new(args.alpha, args.c).map_err(CliError::from)?;
    let report = match find_window(&params, args.tol)? {
        Some(w) => serde_json::to_string_pretty(&w).expect("window serializes"),
        None => "{\"window\": null}".to_string(),
    };
    writeln!(out, "{report}").map_err(|e| io_input("writing stdout", e))
}

/// `construct`: write the explicit block system spec and print the window
/// report.
pub fn cmd_construct(args: &ConstructArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (a0, a1, spec) =
        multi_transition(args.k, args.alpha1, args.c1, args.n_scale, args.tol, None)?;
    let r = spec.blocks[0].r_star;
    let doc = serde_json::json!({
        "matrices": [a0, a1],
        "Q": Generator::symmetric_two_state(),
        "r": r,
    });
    let text = serde_json::to_string_pretty(&doc).expect("system serializes");
    fs::write(&args.out, text)
        .map_err(|e| io_input(&format!("writing {}", args.out.display()), e))?;
    let report = WindowsReport::from(&spec);
    writeln!(
        out,
        "{}",
        serde_json::to_string_pretty(&report).expect("report serializes")
    )
    .map_err(|e| io_input("writing stdout", e))
}

/// `density`: CSV of `theta,p0,p1` on an offset uniform grid, with the
/// stability functional and normalizing constant as footer comments.
pub fn cmd_density(args: &DensityArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if args.points < 4 {
        return Err(CliError::Input("need at least 4 grid points".into()));
    }
    let density = AngularDensity::new(args.lambda, 1e-10)?;
    let mut csv = String::from("theta,p0,p1\n");
    let n = args.points;
    for j in 0..n {
        // Half-step offset keeps the grid away from multiples of pi/2.
        let theta = (j as f64 + 0.5) * 2.0 * std::f64::consts::PI / n as f64;
        let p0 = density.density(theta, 0)?;
        let p1 = density.density(theta, 1)?;
        csv.push_str(&format!(
            "{},{},{}\n",
            fmt_float(theta),
            fmt_float(p0),
            fmt_float(p1)
        ));
    }
    let g = g_eval(args.lambda, 1e-10)?;
    csv.push_str(&format!("# G = {}\n", fmt_float(g)));
    csv.push_str(&format!("# C = {}\n", fmt_float(density.c_value())));
    write_output(args.out.as_deref(), &csv, out)
}

fn parse_r_list(list: &str) -> Result<Vec<f64>, CliError> {
    let rates: Result<Vec<f64>, _> = list.split(',').map(|s| s.trim().parse::<f64>()).collect();
    let rates = rates.map_err(|_| CliError::Input(format!("bad --r-list {list:?}")))?;
    if rates.is_empty() || rates.iter().any(|r| !(*r > 0.0)) {
        return Err(CliError::Input("rates must be positive".into()));
    }
    Ok(rates)
}

/// `kurtz`: propagator-norm means across rates with the averaged-flow limit.
pub fn cmd_kurtz(args: &KurtzArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let loaded = load_system(&args.spec)?;
    let rates = parse_r_list(&args.r_list)?;
    let seed = resolve_seed(args.seed)?;
    let mut csv = String::from("r,mean_norm,stderr\n");
    for &r in &rates {
        let sys = loaded.system.with_rate(r)?;
        let est = propagator_norm_mc(&sys, args.horizon, args.reps, seed)?;
        csv.push_str(&format!(
            "{},{},{}\n",
            fmt_float(r),
            fmt_float(est.mean),
            fmt_float(est.stderr)
        ));
    }
    let pi = stationary(loaded.system.generator()).map_err(SimError::Ctmc)?;
    let avg =
        average_matrix(loaded.system.matrices(), pi.probabilities()).map_err(SimError::Linalg)?;
    let limit = operator_norm(&mat_exp(&avg, args.horizon).map_err(SimError::Linalg)?);
    csv.push_str(&format!("limit,{},\n", fmt_float(limit)));
    write_output(args.out.as_deref(), &csv, out)
}

/// Dispatch a parsed command line.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Check(a) => cmd_check(a, out),
        Command::Lyapunov(a) => cmd_lyapunov(a, out),
        Command::Scan(a) => cmd_scan(a, out),
        Command::Window(a) => cmd_window(a, out),
        Command::Construct(a) => cmd_construct(a, out),
        Command::Density(a) => cmd_density(a, out),
        Command::Kurtz(a) => cmd_kurtz(a, out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_planar_family() {
        let loaded =
            parse_system("{\"family\":\"planar\",\"alpha\":1.0,\"c\":2.0,\"r\":0.5}").unwrap();
        assert_eq!(loaded.system.dim(), 2);
        assert!(matches!(loaded.family, Some(Family::Planar(_))));
        assert_eq!(loaded.system.rate(), 0.5);
    }

    #[test]
    fn parses_explicit_system() {
        let text = r#"{
            "matrices": [
                {"dim": 2, "rows": [[1.0, 4.0], [0.0, -2.0]]},
                {"dim": 2, "rows": [[-2.0, 0.0], [0.0, 1.0]]}
            ],
            "Q": {"states": 2, "Q": [[-1.0, 1.0], [1.0, -1.0]]},
            "r": 2.0
        }"#;
        let loaded = parse_system(text).unwrap();
        assert!(loaded.family.is_none());
        assert_eq!(loaded.system.rate(), 2.0);
    }

    #[test]
    fn rejects_malformed_and_invalid_specs() {
        assert!(matches!(parse_system("{"), Err(CliError::Input(_))));
        assert!(matches!(parse_system("{}"), Err(CliError::Input(_))));
        assert!(matches!(
            parse_system("{\"family\":\"circular\"}"),
            Err(CliError::Input(_))
        ));
        // Bad generator (row sums) must be rejected on load.
        let text = r#"{
            "matrices": [
                {"dim": 1, "rows": [[-1.0]]},
                {"dim": 1, "rows": [[-2.0]]}
            ],
            "Q": {"states": 2, "Q": [[-1.0, 2.0], [1.0, -1.0]]},
            "r": 1.0
        }"#;
        let err = parse_system(text).unwrap_err();
        assert!(matches!(err, CliError::Input(_)), "{err}");
    }

    #[test]
    fn r_grid_parsing() {
        let g = parse_r_grid("0.1:10:3").unwrap();
        assert_eq!(g.len(), 3);
        assert!((g[0] - 0.1).abs() < 1e-12);
        assert!((g[1] - 1.0).abs() < 1e-12);
        assert!((g[2] - 10.0).abs() < 1e-12);
        assert!(parse_r_grid("0:1:5").is_err());
        assert!(parse_r_grid("1:2").is_err());
        assert!(parse_r_grid("2:1:5").is_err());
    }

    #[test]
    fn r_list_parsing() {
        assert_eq!(parse_r_list("1,10").unwrap(), vec![1.0, 10.0]);
        assert!(parse_r_list("1,-2").is_err());
        assert!(parse_r_list("abc").is_err());
    }

    #[test]
    fn exit_codes_by_variant() {
        assert_eq!(CliError::Input("x".into()).exit_code(), 2);
        assert_eq!(CliError::Numerical("x".into()).exit_code(), 3);
        assert_eq!(CliError::Infeasible("x".into()).exit_code(), 4);
    }
}
