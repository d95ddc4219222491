//! Command-line front end.
//!
//! Every run resolves one [`RunConfig`] (defaults, then an optional TOML
//! file, then flags) and echoes it with the tool version as the first line
//! of its output.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::booktree::{broken_geodesic_k, largest_certified, measure_rho, sweep_csv, sweep_ell, SweepConfig};
use crate::combine::{power_series_sum, pull_apart_amalgam, pull_apart_hnn, PolyhedronData, PullApartTrace};
use crate::dimension::{box_counting, certify_dimension_upper, empirical_constants, lambda0_from_dim, CoveringConstants};
use crate::error::Error;
use crate::groups::GroupSpec;
use crate::limitset::{
    cloud_csv, disk_tree, render, render_svg, sample_limit_set_capped, sample_orbit_shadows, write_png, PointCloud,
    Window,
};
use crate::moebius::{Complex, MoebiusMap, UhsPoint};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const PARSE: i32 = 2;
    pub const CAP: i32 = 3;
    pub const CERTIFICATE: i32 = 4;
    pub const KLEIN: i32 = 5;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DimMethod {
    Box,
    Certificate,
}

/// Every tunable with its default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Maximum word length for enumeration.
    pub depth: usize,
    /// Ping-pong disk radius below which a branch is cut.
    pub prune_eps: f64,
    pub node_cap: usize,
    pub width: u32,
    pub height: u32,
    pub method: DimMethod,
    pub alpha: f64,
    /// Circle-tree depth for certificates and the book sweep.
    pub tree_depth: usize,
    pub kmax: u32,
    /// Exponent `s` of the power series in HNN mode.
    pub series_exponent: f64,
    pub z0: Option<[f64; 2]>,
    pub z1: Option<[f64; 2]>,
    pub m: u32,
    pub ell_grid: Vec<f64>,
    /// Orbit shadow scale for groups without ping-pong data.
    pub shadow_eps: f64,
    /// Adds the wall-clock column to sweep output, which then stops being
    /// reproducible byte for byte.
    pub timing: bool,
    pub theta_steps: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            depth: 10,
            prune_eps: 1e-3,
            node_cap: crate::limitset::DEFAULT_NODE_CAP,
            width: 800,
            height: 800,
            method: DimMethod::Box,
            alpha: 1.5,
            tree_depth: 4,
            kmax: 12,
            series_exponent: 1.0,
            z0: None,
            z1: None,
            m: 2,
            ell_grid: vec![1.0, 0.5, 0.25, 0.1],
            shadow_eps: crate::booktree::DEFAULT_SHADOW_EPS,
            timing: false,
            theta_steps: 12,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "limitsetlab", version, about = "Kleinian group limit sets and dimension certificates")]
pub struct Cli {
    /// TOML file overriding the built-in defaults; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a limit set to .png, .svg or .csv (chosen by the --out extension).
    Render {
        group: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// Estimate the limit-set dimension and the matching bottom of spectrum.
    Dim {
        group: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// Pull-apart sweep over k = 1..kmax for an amalgam or an HNN extension.
    Pullapart {
        g0: PathBuf,
        g1: Option<PathBuf>,
        /// JSON file with the loxodromic map of the HNN extension.
        #[arg(long)]
        hnn: Option<PathBuf>,
        #[command(flatten)]
        flags: Flags,
    },
    /// Binding-length sweep for the book of one-holed tori.
    Book {
        #[command(flatten)]
        flags: Flags,
    },
    /// Table of the broken-geodesic constant K(θ).
    BrokenGeodesics {
        #[command(flatten)]
        flags: Flags,
    },
}

/// Flag overrides; unset flags keep the configured value.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub prune_eps: Option<f64>,
    #[arg(long)]
    pub node_cap: Option<usize>,
    #[arg(long)]
    pub width: Option<u32>,
    #[arg(long)]
    pub height: Option<u32>,
    #[arg(long, value_enum)]
    pub method: Option<DimMethod>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub tree_depth: Option<usize>,
    #[arg(long)]
    pub kmax: Option<u32>,
    #[arg(long)]
    pub series_exponent: Option<f64>,
    /// Point `re,im` near the second factor.
    #[arg(long, value_delimiter = ',', num_args = 2, allow_negative_numbers = true)]
    pub z0: Option<Vec<f64>>,
    /// Point `re,im` near the first factor.
    #[arg(long, value_delimiter = ',', num_args = 2, allow_negative_numbers = true)]
    pub z1: Option<Vec<f64>>,
    #[arg(long)]
    pub m: Option<u32>,
    #[arg(long, value_delimiter = ',')]
    pub ell_grid: Option<Vec<f64>>,
    #[arg(long)]
    pub shadow_eps: Option<f64>,
    #[arg(long)]
    pub timing: bool,
    #[arg(long)]
    pub theta_steps: Option<usize>,
}

impl Flags {
    fn apply(&self, c: &mut RunConfig) {
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f.clone() { c.$f = v; })* };
        }
        set!(depth, prune_eps, node_cap, width, height, method, alpha, tree_depth, kmax, series_exponent, m, ell_grid, shadow_eps, theta_steps);
        if let Some(v) = &self.z0 {
            c.z0 = Some([v[0], v[1]]);
        }
        if let Some(v) = &self.z1 {
            c.z1 = Some([v[0], v[1]]);
        }
        if self.timing {
            c.timing = true;
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(code: i32, message: impl Into<String>) -> Self {
        CliError { code, message: message.into() }
    }
}

/// Default exit code for a library error.
fn code_of(e: &Error) -> i32 {
    match e {
        Error::ExplosionGuard { .. } | Error::NodeCapExceeded(_) => exit::CAP,
        Error::ParamsOutOfRange(_)
        | Error::OutOfRange(..)
        | Error::AngleOutOfRange(_)
        | Error::AlphaOutOfRange(_)
        | Error::BadChainLength(_) => exit::USAGE,
        Error::KleinHypothesisFails | Error::NoSeparatingDisks(_) | Error::DisksNotInDomain => exit::KLEIN,
        Error::GeometricBoundViolated { .. } | Error::TreeTooShallow { .. } | Error::TrivialTree => exit::CERTIFICATE,
        _ => exit::PARSE,
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError { code: code_of(&e), message: e.to_string() }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Resolved configuration echoed into every output.
#[derive(Debug, Serialize)]
struct Resolved<'a> {
    command: &'a str,
    inputs: Vec<String>,
    out: Option<String>,
    config: &'a RunConfig,
}

fn absolute(p: &Path) -> CliResult<PathBuf> {
    std::path::absolute(p).map_err(|e| CliError::new(exit::USAGE, format!("{}: {e}", p.display())))
}

fn read_text(p: &Path) -> CliResult<String> {
    std::fs::read_to_string(p).map_err(|e| CliError::new(exit::PARSE, format!("{}: {e}", p.display())))
}

fn load_group(p: &Path) -> CliResult<GroupSpec> {
    GroupSpec::from_json(&read_text(p)?).map_err(|e| CliError::new(exit::PARSE, format!("{}: {e}", p.display())))
}

fn load_config(path: Option<&Path>) -> CliResult<RunConfig> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => toml::from_str(&read_text(p)?).map_err(|e| CliError::new(exit::PARSE, format!("{}: {e}", p.display()))),
    }
}

fn to_complex(p: Option<[f64; 2]>) -> Option<Complex> {
    p.map(|[re, im]| Complex::new(re, im))
}

/// Mean of the finite complement-disk centers, a point near the factor.
fn default_anchor(g: &GroupSpec) -> CliResult<Complex> {
    let centers: Vec<Complex> = g.complement_disks().iter().filter_map(|d| d.circle().map(|(c, _)| c)).collect();
    if centers.is_empty() {
        return Err(CliError::new(exit::USAGE, "cannot place a default anchor; pass --z0 and --z1"));
    }
    Ok(centers.iter().sum::<Complex>() / centers.len() as f64)
}

/// Samples the limit set: ping-pong pruning when the group carries disks,
/// orbit shadows at scale `shadow_eps` otherwise.
fn sample(g: &GroupSpec, cfg: &RunConfig) -> crate::Result<PointCloud> {
    if g.pingpong.is_some() || g.generators.is_empty() {
        sample_limit_set_capped(g, cfg.depth, cfg.prune_eps, cfg.node_cap)
    } else {
        sample_orbit_shadows(g, cfg.shadow_eps, cfg.node_cap)
    }
}

struct Output {
    header: String,
    path: Option<PathBuf>,
}

impl Output {
    fn text(&self, body: &str, stdout: &mut dyn Write) -> CliResult<()> {
        let full = format!("{}\n{body}", self.header);
        match &self.path {
            Some(p) => std::fs::write(p, full).map_err(|e| CliError::new(exit::PARSE, format!("{}: {e}", p.display()))),
            None => stdout.write_all(full.as_bytes()).map_err(|e| CliError::new(exit::PARSE, e.to_string())),
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("nan".into(), |x| format!("{x:.6}"))
}

/// Parse `args` and run; returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = if e.use_stderr() { write!(stderr, "{}", e.render()) } else { write!(stdout, "{}", e.render()) };
            return code;
        }
    };
    match execute(&cli, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message);
            e.code
        }
    }
}

fn execute(cli: &Cli, stdout: &mut dyn Write) -> CliResult<i32> {
    let mut cfg = load_config(cli.config.as_deref())?;
    let (name, flags, inputs): (&str, &Flags, Vec<&PathBuf>) = match &cli.command {
        Command::Render { group, flags } => ("render", flags, vec![group]),
        Command::Dim { group, flags } => ("dim", flags, vec![group]),
        Command::Pullapart { g0, g1, hnn, flags } => {
            ("pullapart", flags, [Some(g0), g1.as_ref(), hnn.as_ref()].into_iter().flatten().collect())
        }
        Command::Book { flags } => ("book", flags, vec![]),
        Command::BrokenGeodesics { flags } => ("broken-geodesics", flags, vec![]),
    };
    flags.apply(&mut cfg);
    let inputs = inputs.iter().map(|p| absolute(p).map(|a| a.display().to_string())).collect::<CliResult<_>>()?;
    let out_path = cli.out.as_deref().map(absolute).transpose()?;
    let resolved = Resolved { command: name, inputs, out: out_path.as_ref().map(|p| p.display().to_string()), config: &cfg };
    let json = serde_json::to_string(&resolved).map_err(|e| CliError::new(exit::PARSE, e.to_string()))?;
    let out = Output { header: format!("# limitsetlab {VERSION} {json}"), path: out_path };
    match &cli.command {
        Command::Render { group, .. } => cmd_render(&load_group(group)?, &cfg, &out, stdout),
        Command::Dim { group, .. } => cmd_dim(&load_group(group)?, &cfg, &out, stdout),
        Command::Pullapart { g0, g1, hnn, .. } => {
            let g0 = load_group(g0)?;
            match (g1, hnn) {
                (Some(g1), None) => cmd_pullapart_amalgam(&g0, &load_group(g1)?, &cfg, &out, stdout),
                (None, Some(h)) => {
                    let gamma: MoebiusMap = serde_json::from_str(&read_text(h)?)
                        .map_err(|e| CliError::new(exit::PARSE, format!("{}: {e}", h.display())))?;
                    cmd_pullapart_hnn(&g0, &gamma, &cfg, &out, stdout)
                }
                _ => Err(CliError::new(exit::USAGE, "pass exactly one of a second group or --hnn")),
            }
        }
        Command::Book { .. } => cmd_book(&cfg, &out, stdout),
        Command::BrokenGeodesics { .. } => cmd_broken_geodesics(&cfg, &out, stdout),
    }
}

fn cmd_render(g: &GroupSpec, cfg: &RunConfig, out: &Output, stdout: &mut dyn Write) -> CliResult<i32> {
    let ext = out.path.as_ref().and_then(|p| p.extension()).and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    let cloud = sample(g, cfg)?;
    let window = Window::fit(&cloud.points)?;
    match ext.as_deref() {
        Some("png") => {
            let raster = render(&cloud, cfg.width, cfg.height, &window)?;
            let path = out.path.as_ref().expect("extension implies a path");
            write_png(&raster, path, Some(&out.header))?;
        }
        Some("svg") => {
            let svg = render_svg(g, cfg.depth, cfg.prune_eps, cfg.width, cfg.height, &window)?;
            let comment = out.header.trim_start_matches("# ").replace("--", "- -");
            let path = out.path.as_ref().expect("extension implies a path");
            std::fs::write(path, format!("<!-- {comment} -->\n{svg}"))
                .map_err(|e| CliError::new(exit::PARSE, format!("{}: {e}", path.display())))?;
        }
        Some("csv") | None => out.text(&cloud_csv(&cloud), stdout)?,
        Some(other) => return Err(CliError::new(exit::USAGE, format!("unsupported output extension .{other}"))),
    }
    Ok(exit::OK)
}

fn cmd_dim(g: &GroupSpec, cfg: &RunConfig, out: &Output, stdout: &mut dyn Write) -> CliResult<i32> {
    match cfg.method {
        DimMethod::Box => {
            let cloud = sample(g, cfg)?;
            let est = box_counting(&cloud.points, None)?;
            let lambda0 = lambda0_from_dim(est.value)?;
            let mut body = String::from("method,d,lambda0,r2,n_points\n");
            body.push_str(&format!("box,{:.6},{:.6},{},{}\n", est.value, lambda0, fmt_opt(est.r2), cloud.points.len()));
            for w in &est.warnings {
                body.push_str(&format!("# warning: {w}\n"));
            }
            out.text(&body, stdout)?;
        }
        DimMethod::Certificate => {
            let cert_err = |e: Error| match e {
                Error::AlphaOutOfRange(_) => CliError::new(exit::CERTIFICATE, e.to_string()),
                other => other.into(),
            };
            let tree = disk_tree(g, cfg.tree_depth, cfg.node_cap)?;
            let rho = measure_rho(&tree)?;
            if rho >= 0.5 {
                return Err(CliError::new(exit::CERTIFICATE, format!("measured rho = {rho} is not below 1/2")));
            }
            let consts = empirical_constants(&tree, cfg.alpha, rho).map_err(cert_err)?;
            let cert = certify_dimension_upper(&tree, cfg.alpha, rho, &consts, cfg.tree_depth).map_err(cert_err)?;
            let last = cert.masses.last().expect("nonempty k range");
            let lambda0 = lambda0_from_dim(cfg.alpha)?;
            let mut body = String::from("method,alpha,lambda0_at_alpha,rho,a0,A_alpha,Mk,condition_holds,monotone,certified\n");
            body.push_str(&format!(
                "certificate,{},{:.6},{:.6e},{:.6e},{:.6e},{:.6e},{},{},{}\n",
                cfg.alpha, lambda0, rho, consts.a0, last.a_alpha, last.mk, cert.condition_holds, cert.monotone, cert.certified
            ));
            for w in &cert.estimate.warnings {
                body.push_str(&format!("# warning: {w}\n"));
            }
            out.text(&body, stdout)?;
        }
    }
    Ok(exit::OK)
}

fn is_klein_failure(e: &Error) -> bool {
    code_of(e) == exit::KLEIN || matches!(e, Error::OverlappingDisks(..) | Error::ZeroDistance)
}

/// Shared tail of both pull-apart modes.
fn pullapart_rows(
    cfg: &RunConfig,
    out: &Output,
    stdout: &mut dyn Write,
    step: impl Fn(u32) -> crate::Result<(PullApartTrace, Option<f64>)>,
) -> CliResult<i32> {
    if cfg.kmax == 0 {
        return Err(CliError::new(exit::USAGE, "kmax must be at least 1"));
    }
    let mut body = String::from("k,klein,ratio,set_distance,sup_derivative,gamma_length,power_series,box_estimate\n");
    let mut any = false;
    for k in 1..=cfg.kmax {
        match step(k) {
            Ok((t, series)) => {
                any = true;
                let est = sample(&t.combined, cfg).and_then(|c| box_counting(&c.points, None)).map(|e| e.value);
                let est = match est {
                    Ok(v) => Some(v),
                    Err(e @ (Error::ExplosionGuard { .. } | Error::NodeCapExceeded(_))) => return Err(e.into()),
                    Err(_) => None,
                };
                body.push_str(&format!(
                    "{k},true,{:.12e},{:.12e},{:.12e},{},{},{}\n",
                    t.ratio,
                    t.set_distance,
                    t.sup_derivative,
                    t.gamma_length,
                    series.map_or("nan".into(), |s| format!("{s:.12e}")),
                    fmt_opt(est)
                ));
            }
            Err(e) if is_klein_failure(&e) => body.push_str(&format!("{k},false,nan,nan,nan,nan,nan,nan\n")),
            Err(e) => return Err(e.into()),
        }
    }
    out.text(&body, stdout)?;
    if any {
        Ok(exit::OK)
    } else {
        Err(CliError::new(exit::KLEIN, format!("Klein combination hypothesis never held for k <= {}", cfg.kmax)))
    }
}

fn cmd_pullapart_amalgam(g0: &GroupSpec, g1: &GroupSpec, cfg: &RunConfig, out: &Output, stdout: &mut dyn Write) -> CliResult<i32> {
    PolyhedronData::from_group(g0)?;
    PolyhedronData::from_group(g1)?;
    let z0 = match to_complex(cfg.z0) {
        Some(z) => z,
        None => default_anchor(g1)?,
    };
    let z1 = match to_complex(cfg.z1) {
        Some(z) => z,
        None => default_anchor(g0)?,
    };
    pullapart_rows(cfg, out, stdout, |k| Ok((pull_apart_amalgam(g0, g1, z0, z1, k)?, None)))
}

fn cmd_pullapart_hnn(g0: &GroupSpec, gamma: &MoebiusMap, cfg: &RunConfig, out: &Output, stdout: &mut dyn Write) -> CliResult<i32> {
    let w = UhsPoint::basepoint();
    pullapart_rows(cfg, out, stdout, |k| {
        let t = pull_apart_hnn(g0, gamma, k)?;
        let s = power_series_sum(gamma, &w, cfg.series_exponent, k)?;
        Ok((t, Some(s)))
    })
}

fn cmd_book(cfg: &RunConfig, out: &Output, stdout: &mut dyn Write) -> CliResult<i32> {
    let sweep = SweepConfig {
        alpha: cfg.alpha,
        m: cfg.m,
        depth: cfg.tree_depth,
        shadow_eps: cfg.shadow_eps,
        constants: CoveringConstants::default(),
    };
    let rows = sweep_ell(&sweep, &cfg.ell_grid)?;
    let mut body = sweep_csv(&rows, cfg.timing);
    match largest_certified(&rows) {
        Some(ell) => body.push_str(&format!("# largest certified ell = {ell}\n")),
        None => body.push_str("# no ell in the grid certified\n"),
    }
    out.text(&body, stdout)?;
    Ok(exit::OK)
}

fn cmd_broken_geodesics(cfg: &RunConfig, out: &Output, stdout: &mut dyn Write) -> CliResult<i32> {
    if cfg.theta_steps == 0 {
        return Err(CliError::new(exit::USAGE, "theta_steps must be at least 1"));
    }
    let mut body = String::from("theta,K\n");
    for i in 1..=cfg.theta_steps {
        let theta = std::f64::consts::PI * i as f64 / cfg.theta_steps as f64;
        body.push_str(&format!("{theta:.12},{:.12}\n", broken_geodesic_k(theta)?));
    }
    out.text(&body, stdout)?;
    Ok(exit::OK)
}

/// Apply `LIMITSETLAB_THREADS` to the global thread pool.
pub fn init_threads() -> std::result::Result<(), String> {
    match std::env::var("LIMITSETLAB_THREADS") {
        Ok(v) => {
            let n: usize = v.trim().parse().map_err(|_| format!("LIMITSETLAB_THREADS={v} is not a thread count"))?;
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
        }
        Err(_) => Ok(()),
    }
}
