//! Command-line front end: argument parsing, config files and run directories.
//!
//! Each invocation resolves its settings (flags over config file over
//! defaults), writes them to `config.resolved.toml` in a run directory named
//! after the command and its inputs, and leaves its data next to it as CSV
//! plus a `report.json`. Nothing time- or host-dependent is written, so
//! re-running a command reproduces its directory byte for byte.

use crate::constructions::{
    bending_function_report, capped_catenoid, capped_paraboloid, elliptic_torus, round_sphere, BendingFunction,
    BendingParams, Certification, CertificationTolerances, Constructed, ConstructionError,
};
use crate::diagnostics::{
    perturbation_experiment, sign_tracker, verify, DiagnosticError, DiagnosticReport, PerturbationReport, VerifyConfig,
};
use crate::flow::{run, FlowConfig, FlowError, FlowVariant, TerminalReport, TrackedField, Trajectory};
use crate::geometry::curvature_field;
use crate::profile::{GeneratingProfile, GeometryError, ProfileIoError};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Environment variable naming the output root.
pub const OUT_ENV: &str = "CURVFLOW_OUT";
const DEFAULT_ROOT: &str = "runs";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Config { path: String, source: toml::de::Error },
    #[error("cannot serialize resolved config: {0}")]
    Resolve(#[from] toml::ser::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Profile(#[from] ProfileIoError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Construction(#[from] ConstructionError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Diagnostic(#[from] DiagnosticError),
    #[error("{0}")]
    Usage(String),
}

#[derive(Debug, Parser)]
#[command(
    name = "curvflow",
    version,
    about = "Constrained mean curvature flow of hypersurfaces of revolution"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build and certify one of the closed examples.
    Construct(ConstructArgs),
    /// Evolve a profile by the volume-preserving, area-preserving or plain flow.
    Evolve(EvolveArgs),
    /// Check the closed-form identities and first-step rates.
    Verify(VerifyArgs),
    /// Pre-flow a mean convex example and look for loss of mean convexity.
    Perturb(PerturbArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// TOML config with [construct], [evolve], [verify] or [perturb] sections.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output root (default: $CURVFLOW_OUT, then the config's `out`, then ./runs).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Run directory name below the output root.
    #[arg(long)]
    pub run_name: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Example {
    CatenoidCapped,
    EllipticTorus,
    ParaboloidCapped,
    Sphere,
}

impl Example {
    pub fn name(self) -> &'static str {
        match self {
            Example::CatenoidCapped => "catenoid_capped",
            Example::EllipticTorus => "elliptic_torus",
            Example::ParaboloidCapped => "paraboloid_capped",
            Example::Sphere => "sphere",
        }
    }

    /// Default grid: capped profiles get an odd count so the waist is a node.
    pub fn default_samples(self) -> usize {
        match self {
            Example::EllipticTorus => 1024,
            Example::CatenoidCapped | Example::ParaboloidCapped => 1025,
            Example::Sphere => 257,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SourceArgs {
    #[arg(long)]
    pub n_samples: Option<usize>,
    /// Half-width of the neck band.
    #[arg(long)]
    pub a: Option<f64>,
    /// Height of the caps.
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long)]
    pub radius: Option<f64>,
    /// Hypersurface dimension of the round sphere.
    #[arg(long)]
    pub dimension: Option<usize>,
    #[arg(long)]
    pub steepness: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct ConstructArgs {
    pub example: Option<Example>,
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct FlowArgs {
    #[arg(long)]
    pub variant: Option<FlowVariant>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub dt_max: Option<f64>,
    #[arg(long)]
    pub cfl: Option<f64>,
    /// Resample to this many points before starting.
    #[arg(long)]
    pub resample: Option<usize>,
    #[arg(long)]
    pub regrid_every: Option<usize>,
    #[arg(long)]
    pub record_every: Option<usize>,
    /// Disable the conservation projection.
    #[arg(long)]
    pub no_projection: bool,
    #[arg(long)]
    pub drift_tol: Option<f64>,
    #[arg(long)]
    pub sign_floor: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct EvolveArgs {
    /// Profile CSV written by `construct` (with its JSON sidecar).
    #[arg(long, conflicts_with = "example")]
    pub profile: Option<PathBuf>,
    #[arg(long)]
    pub example: Option<Example>,
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub flow: FlowArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Torus grid size.
    #[arg(long)]
    pub n_samples: Option<usize>,
    #[arg(long)]
    pub capped_samples: Option<usize>,
    /// Use this tolerance for every near-check.
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub rate_dt: Option<f64>,
    /// Skip the checks that integrate the flow.
    #[arg(long)]
    pub no_dynamics: bool,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct PerturbArgs {
    #[arg(long, conflicts_with = "example")]
    pub profile: Option<PathBuf>,
    #[arg(long)]
    pub example: Option<Example>,
    /// Pre-flow times, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub s: Option<Vec<f64>>,
    /// Constrained variants to run after the pre-flow, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub variants: Option<Vec<FlowVariant>>,
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub flow: FlowArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

/// The config file. Every section is optional; unknown keys are errors.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub out: Option<PathBuf>,
    pub construct: Option<ConstructConfig>,
    pub evolve: Option<EvolveConfig>,
    pub verify: Option<VerifyConfig>,
    pub perturb: Option<PerturbConfig>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        toml::from_str(&text).map_err(|source| CliError::Config {
            path: path.display().to_string(),
            source,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstructConfig {
    pub example: Option<Example>,
    pub n_samples: Option<usize>,
    pub a: f64,
    pub b: f64,
    pub radius: f64,
    pub dimension: usize,
    pub bending: BendingParams,
    pub tolerances: CertificationTolerances,
}

impl Default for ConstructConfig {
    fn default() -> Self {
        Self {
            example: None,
            n_samples: None,
            a: 1.0,
            b: 2.0,
            radius: 1.0,
            dimension: 2,
            bending: BendingParams::default(),
            tolerances: CertificationTolerances::default(),
        }
    }
}

impl ConstructConfig {
    fn apply(&mut self, args: &SourceArgs) {
        if args.n_samples.is_some() {
            self.n_samples = args.n_samples;
        }
        set(&mut self.a, args.a);
        set(&mut self.b, args.b);
        set(&mut self.radius, args.radius);
        set(&mut self.dimension, args.dimension);
        set(&mut self.bending.steepness, args.steepness);
    }

    /// Fill in the example and grid size.
    fn resolve(&mut self, fallback: Option<Example>) -> Result<Example, CliError> {
        let example = self.example.or(fallback).ok_or_else(|| {
            CliError::Usage("no example given (catenoid_capped, elliptic_torus, paraboloid_capped, sphere)".into())
        })?;
        self.example = Some(example);
        self.n_samples.get_or_insert(example.default_samples());
        Ok(example)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveConfig {
    /// Profile CSV; when absent the example in `[evolve.construct]` is built.
    pub profile: Option<PathBuf>,
    pub construct: ConstructConfig,
    pub flow: FlowConfig,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            profile: None,
            construct: ConstructConfig::default(),
            flow: FlowConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbConfig {
    pub profile: Option<PathBuf>,
    pub s: Vec<f64>,
    pub variants: Vec<FlowVariant>,
    pub construct: ConstructConfig,
    pub flow: FlowConfig,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        Self {
            profile: None,
            s: vec![0.0, 1e-4, 1e-3],
            variants: vec![FlowVariant::VolumePreserving, FlowVariant::AreaPreserving],
            construct: ConstructConfig::default(),
            flow: FlowConfig {
                t_end: 0.02,
                ..FlowConfig::default()
            },
        }
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl FlowArgs {
    fn apply(&self, cfg: &mut FlowConfig) {
        set(&mut cfg.variant, self.variant);
        set(&mut cfg.t_end, self.t_end);
        set(&mut cfg.dt_max, self.dt_max);
        set(&mut cfg.cfl, self.cfl);
        if self.resample.is_some() {
            cfg.n_samples = self.resample;
        }
        set(&mut cfg.regrid_every, self.regrid_every);
        set(&mut cfg.record_every, self.record_every);
        if self.no_projection {
            cfg.projection = false;
        }
        set(&mut cfg.drift_tol, self.drift_tol);
        set(&mut cfg.sign_floor, self.sign_floor);
    }
}

/// Where a command left its files and whether everything in scope passed.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub dir: PathBuf,
    pub passed: bool,
    pub summary: String,
}

/// Output root: `--out`, then `$CURVFLOW_OUT`, then the config's `out`,
/// then `./runs`.
pub fn output_root(flag: Option<&Path>, env: Option<PathBuf>, config: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or(env)
        .or_else(|| config.map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_ROOT))
}

struct RunDir {
    path: PathBuf,
}

impl RunDir {
    fn create(common: &CommonArgs, file: &ConfigFile, default_name: String) -> Result<Self, CliError> {
        let env = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
        let root = output_root(common.out.as_deref(), env, file.out.as_deref());
        let path = root.join(common.run_name.clone().unwrap_or(default_name));
        std::fs::create_dir_all(&path).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(Self { path })
    }

    fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.file(name);
        std::fs::write(&path, bytes).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    fn resolved<T: Serialize>(&self, section: &str, value: &T) -> Result<(), CliError> {
        #[derive(Serialize)]
        struct Wrapper<'a, T> {
            #[serde(flatten)]
            inner: std::collections::BTreeMap<&'a str, &'a T>,
        }
        let mut inner = std::collections::BTreeMap::new();
        inner.insert(section, value);
        let text = toml::to_string(&Wrapper { inner })?;
        self.write("config.resolved.toml", text.as_bytes())
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn csv(&self, name: &str, fill: impl FnOnce(&mut Vec<u8>) -> Result<(), CliError>) -> Result<(), CliError> {
        let mut buf = Vec::new();
        fill(&mut buf)?;
        self.write(name, &buf)
    }
}

fn load_config(common: &CommonArgs) -> Result<ConfigFile, CliError> {
    match &common.config {
        Some(path) => ConfigFile::load(path),
        None => Ok(ConfigFile::default()),
    }
}

/// Build an example; a failed certification still yields its report.
fn build(example: Example, cfg: &ConstructConfig) -> Result<(Option<Constructed>, Vec<Certification>), CliError> {
    let n = cfg.n_samples.unwrap_or(example.default_samples());
    let capped =
        |make: fn(&BendingFunction, usize, &CertificationTolerances) -> Result<Constructed, ConstructionError>| {
            let (bf, bending) = bending_function_report(cfg.a, cfg.b, &cfg.bending)?;
            if !bending.passed {
                return Ok((None, vec![bending]));
            }
            finish(make(&bf, n, &cfg.tolerances), vec![bending])
        };
    match example {
        Example::CatenoidCapped => capped(capped_catenoid),
        Example::ParaboloidCapped => capped(capped_paraboloid),
        Example::EllipticTorus => finish(elliptic_torus(n, &cfg.tolerances), Vec::new()),
        Example::Sphere => finish(round_sphere(cfg.radius, cfg.dimension, n), Vec::new()),
    }
}

fn finish(
    result: Result<Constructed, ConstructionError>,
    mut certs: Vec<Certification>,
) -> Result<(Option<Constructed>, Vec<Certification>), CliError> {
    match result {
        Ok(c) => {
            certs.push(c.certification.clone());
            Ok((Some(c), certs))
        }
        Err(ConstructionError::Certification(cert)) => {
            certs.push(*cert);
            Ok((None, certs))
        }
        Err(e) => Err(e.into()),
    }
}

/// Load the input profile of `evolve`/`perturb`, or build the configured example.
fn source_profile(
    profile: &Option<PathBuf>,
    construct: &mut ConstructConfig,
    fallback: Example,
) -> Result<(GeneratingProfile, String), CliError> {
    if let Some(path) = profile {
        let p = GeneratingProfile::load(path)?;
        let stem = path
            .file_stem()
            .map_or("profile".into(), |s| s.to_string_lossy().into_owned());
        return Ok((p, stem));
    }
    let example = construct.resolve(Some(fallback))?;
    let (built, certs) = build(example, construct)?;
    match built {
        Some(c) => Ok((c.profile, example.name().to_string())),
        None => {
            let failed: Vec<String> = certs.iter().filter(|c| !c.passed).map(|c| c.to_string()).collect();
            Err(CliError::Usage(format!(
                "input example failed certification:\n{}",
                failed.join("\n")
            )))
        }
    }
}

pub fn run_cli(cli: &Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Construct(args) => construct(args),
        Command::Evolve(args) => evolve(args),
        Command::Verify(args) => verify_cmd(args),
        Command::Perturb(args) => perturb(args),
    }
}

#[derive(Serialize)]
struct ConstructReport<'a> {
    example: &'a str,
    passed: bool,
    certifications: &'a [Certification],
}

fn construct(args: &ConstructArgs) -> Result<Outcome, CliError> {
    let file = load_config(&args.common)?;
    let mut cfg = file.construct.clone().unwrap_or_default();
    if args.example.is_some() {
        cfg.example = args.example;
    }
    cfg.apply(&args.source);
    let example = cfg.resolve(None)?;
    let dir = RunDir::create(&args.common, &file, format!("construct-{}", example.name()))?;
    dir.resolved("construct", &cfg)?;
    let (built, certs) = build(example, &cfg)?;
    let passed = built.is_some() && certs.iter().all(|c| c.passed);
    if let Some(c) = &built {
        c.profile.save(&dir.file("profile.csv"))?;
        let field = curvature_field(&c.profile)?;
        dir.csv("curvature.csv", |buf| Ok(field.write_csv(buf)?))?;
    }
    dir.json(
        "report.json",
        &ConstructReport {
            example: example.name(),
            passed,
            certifications: &certs,
        },
    )?;
    let summary = certs.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("\n");
    Ok(Outcome {
        dir: dir.path,
        passed,
        summary,
    })
}

#[derive(Serialize)]
struct EvolveReport<'a> {
    source: &'a str,
    passed: bool,
    h_initial: f64,
    terminal: &'a TerminalReport,
}

fn write_minima(traj: &Trajectory, buf: &mut Vec<u8>) -> Result<(), CliError> {
    let h = sign_tracker(traj, TrackedField::H);
    let r = sign_tracker(traj, TrackedField::R);
    let mut w = csv::Writer::from_writer(buf);
    w.write_record(["t", "minH", "u_minH", "z_minH", "minR", "u_minR", "z_minR"])?;
    for k in 0..h.t.len() {
        w.write_record([h.t[k], h.minimum[k], h.u[k], h.z[k], r.minimum[k], r.u[k], r.z[k]].map(|v| format!("{v:e}")))?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn evolve(args: &EvolveArgs) -> Result<Outcome, CliError> {
    let file = load_config(&args.common)?;
    let mut cfg = file.evolve.clone().unwrap_or_default();
    if args.profile.is_some() {
        cfg.profile = args.profile.clone();
    }
    if args.example.is_some() {
        cfg.construct.example = args.example;
        cfg.profile = None;
    }
    cfg.construct.apply(&args.source);
    args.flow.apply(&mut cfg.flow);
    let (profile, source) = source_profile(&cfg.profile, &mut cfg.construct, Example::EllipticTorus)?;
    if cfg.profile.is_some() {
        cfg.construct = ConstructConfig::default();
    }
    let dir = RunDir::create(
        &args.common,
        &file,
        format!("evolve-{source}-{}", cfg.flow.variant.name()),
    )?;
    dir.resolved("evolve", &cfg)?;
    let traj = run(&profile, &cfg.flow)?;
    dir.csv("trajectory.csv", |buf| Ok(traj.write_csv(buf)?))?;
    dir.csv("minima.csv", |buf| write_minima(&traj, buf))?;
    traj.last().profile.save(&dir.file("final_profile.csv"))?;
    let t = &traj.terminal;
    let passed = traj.completed() && t.drift_within_tol != Some(false);
    dir.json(
        "report.json",
        &EvolveReport {
            source: &source,
            passed,
            h_initial: traj.states[0].h_flow,
            terminal: t,
        },
    )?;
    let summary = format!(
        "{} {}: t = {:.6} after {} steps, min H = {:.6e}, min R = {:.6e}, drift = {}, H crossing = {}",
        source,
        t.variant.name(),
        t.t_final,
        t.steps,
        t.min_h_final,
        t.min_r_final,
        t.relative_drift.map_or("n/a".into(), |d| format!("{d:.3e}")),
        t.crossing_h
            .as_ref()
            .map_or("none".into(), |c| format!("t = {:.6}", c.t_refined.unwrap_or(c.t_hi))),
    );
    Ok(Outcome {
        dir: dir.path,
        passed,
        summary,
    })
}

fn write_checks(report: &DiagnosticReport, buf: &mut Vec<u8>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(buf);
    w.write_record(["name", "anchor", "computed", "target", "tolerance", "mode", "passed"])?;
    for c in &report.checks {
        let mode = serde_json::to_value(c.mode)?;
        w.write_record([
            c.name.clone(),
            c.anchor.clone(),
            format!("{:e}", c.computed),
            format!("{:e}", c.target),
            format!("{:e}", c.tolerance),
            mode.as_str().unwrap_or_default().to_string(),
            c.passed.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn verify_cmd(args: &VerifyArgs) -> Result<Outcome, CliError> {
    let file = load_config(&args.common)?;
    let mut cfg = file.verify.clone().unwrap_or_default();
    set(&mut cfg.n_samples, args.n_samples);
    set(&mut cfg.capped_samples, args.capped_samples);
    set(&mut cfg.rate_dt, args.rate_dt);
    if args.tolerance.is_some() {
        cfg.tolerance_override = args.tolerance;
    }
    if args.no_dynamics {
        cfg.dynamics = false;
    }
    let dir = RunDir::create(&args.common, &file, "verify".into())?;
    dir.resolved("verify", &cfg)?;
    let report = verify(&cfg)?;
    dir.json("report.json", &report)?;
    dir.csv("checks.csv", |buf| write_checks(&report, buf))?;
    let summary = report
        .checks
        .iter()
        .map(|c| {
            format!(
                "{:<6}{:<24}{:>16.9e}  target {:>16.9e}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.computed,
                c.target
            )
        })
        .collect::<Vec<_>>()
        .join("\n");
    Ok(Outcome {
        dir: dir.path,
        passed: report.passed,
        summary,
    })
}

fn write_perturb(report: &PerturbationReport, variant: FlowVariant, buf: &mut Vec<u8>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(buf);
    w.write_record(["s", "minH_after_preflow", "first_crossing_t"])?;
    for row in &report.rows {
        let crossing = row
            .runs
            .iter()
            .find(|r| r.variant == variant)
            .and_then(|r| r.first_crossing_t)
            .map_or(String::new(), |t| format!("{t:e}"));
        w.write_record([
            format!("{:e}", row.s),
            format!("{:e}", row.min_h_after_preflow),
            crossing,
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn perturb(args: &PerturbArgs) -> Result<Outcome, CliError> {
    let file = load_config(&args.common)?;
    let mut cfg = file.perturb.clone().unwrap_or_default();
    if args.profile.is_some() {
        cfg.profile = args.profile.clone();
    }
    if args.example.is_some() {
        cfg.construct.example = args.example;
        cfg.profile = None;
    }
    set(&mut cfg.s, args.s.clone());
    set(&mut cfg.variants, args.variants.clone());
    cfg.construct.apply(&args.source);
    args.flow.apply(&mut cfg.flow);
    if cfg.s.iter().any(|s| !(*s >= 0.0 && s.is_finite())) || cfg.variants.is_empty() {
        return Err(CliError::Usage(
            "pre-flow times must be finite and non-negative, and at least one variant is needed".into(),
        ));
    }
    let (profile, source) = source_profile(&cfg.profile, &mut cfg.construct, Example::CatenoidCapped)?;
    if cfg.profile.is_some() {
        cfg.construct = ConstructConfig::default();
    }
    let dir = RunDir::create(&args.common, &file, format!("perturb-{source}"))?;
    dir.resolved("perturb", &cfg)?;
    let report = perturbation_experiment(&profile, &cfg.s, &cfg.variants, &cfg.flow)?;
    for &v in &cfg.variants {
        dir.csv(&format!("perturb_{}.csv", v.name()), |buf| {
            write_perturb(&report, v, buf)
        })?;
    }
    dir.json("report.json", &report)?;
    let mut lines = Vec::new();
    for row in &report.rows {
        let runs: Vec<String> = row
            .runs
            .iter()
            .map(|r| {
                format!(
                    "{}: {}",
                    r.variant.name(),
                    r.first_crossing_t
                        .map_or("no crossing".into(), |t| format!("crossing at t = {t:.6}"))
                )
            })
            .collect();
        lines.push(format!(
            "s = {:e}: min H after pre-flow {:.6e} ({}) {}",
            row.s,
            row.min_h_after_preflow,
            if row.mean_convex {
                "ok"
            } else {
                "not strictly mean convex"
            },
            runs.join(", ")
        ));
    }
    Ok(Outcome {
        dir: dir.path,
        passed: report.passed,
        summary: lines.join("\n"),
    })
}
