//! Config-driven front end for the `almhawkes` binary.
//!
//! A run reads a JSON [`RunConfig`], applies command-line overrides, executes
//! one pipeline and writes its artifacts plus `manifest.json` into the output
//! directory. Artifacts never contain timing or thread information, so
//! reruns and different thread counts give byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{AlmError, Result};
use crate::limit_sde;
use crate::metrics;
use crate::model::{hex_digest, presets, validate_assumptions, ModelSpec, SCHEMA_VERSION};
use crate::par;
use crate::particle_sim::{self as sim_export, SimOptions, Simulator};
use crate::path_integral::{self, PathIntegralConfig};
use crate::pde_solver::{self, Grid, PdeOptions};
use crate::xpath::XPath;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_STRICT: i32 = 3;
pub const EXIT_MISSING_FILE: i32 = 4;
pub const EXIT_DOWNSTREAM: i32 = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Simulate,
    Limit,
    Pde,
    Pathint,
    Converge,
    Couple,
    Validate,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::Limit => "limit",
            Self::Pde => "pde",
            Self::Pathint => "pathint",
            Self::Converge => "converge",
            Self::Couple => "couple",
            Self::Validate => "validate",
        }
    }
}

/// Where the model comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSource {
    Preset(String),
    /// Path to a spec JSON, relative to the config file.
    File(PathBuf),
    Inline(Box<ModelSpec>),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum XSource {
    #[default]
    Pde,
    Picard,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    pub n: usize,
    pub t_end: f64,
    pub dt: f64,
    /// Target memory cell width for default grids.
    pub dm: f64,
    /// Overrides the default grid.
    pub grid: Option<Grid>,
    pub save_times: Vec<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub n_particles: usize,
    pub k_max: Option<usize>,
    pub tail_epsilon: f64,
    pub quadrature_order: usize,
    pub mc_samples: usize,
    /// Grid on which the path-integral density is evaluated.
    pub slice_grid: Option<Grid>,
    pub ladder: Vec<usize>,
    pub replicas: usize,
    pub directions: usize,
    pub x_source: XSource,
    pub event_cap: usize,
    pub validation_samples: usize,
    /// Worker threads; 0 uses every core. `--threads` wins.
    pub threads: usize,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            n: 100,
            t_end: 5.0,
            dt: 0.01,
            dm: 0.02,
            grid: None,
            save_times: Vec::new(),
            tol: limit_sde::DEFAULT_TOL,
            max_iter: 50,
            n_particles: limit_sde::DEFAULT_PARTICLES,
            k_max: None,
            tail_epsilon: 1e-4,
            quadrature_order: 16,
            mc_samples: 20_000,
            slice_grid: None,
            ladder: vec![100, 400, 1600],
            replicas: 10,
            directions: metrics::DEFAULT_DIRECTIONS,
            x_source: XSource::Pde,
            event_cap: 10_000_000,
            validation_samples: 10_000,
            threads: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub command: Command,
    pub model: ModelSource,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(AlmError::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_json(&fs::read_to_string(path)?)?;
        if let ModelSource::File(p) = &cfg.model {
            if p.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.model = ModelSource::File(base.join(p));
            }
        }
        Ok(cfg)
    }

    pub fn resolve_model(&self) -> Result<ModelSpec> {
        match &self.model {
            ModelSource::Preset(name) => presets::preset(name),
            ModelSource::File(p) => ModelSpec::from_json(&fs::read_to_string(p)?),
            ModelSource::Inline(spec) => {
                spec.check()?;
                Ok((**spec).clone())
            }
        }
    }

    /// Range checks that do not need the model.
    pub fn check(&self) -> Result<()> {
        let n = &self.numerics;
        let bad = |m: &str| Err(AlmError::Validation(m.into()));
        if !(n.t_end > 0.0 && n.t_end.is_finite()) {
            return bad("t_end must be positive");
        }
        if !(n.dt > 0.0 && n.dt <= n.t_end) {
            return bad("dt must lie in (0, t_end]");
        }
        if !(n.dm > 0.0) || !(n.tol > 0.0) || !(n.tail_epsilon > 0.0 && n.tail_epsilon < 1.0) {
            return bad("dm, tol and tail_epsilon must be positive (tail_epsilon below 1)");
        }
        if n.save_times.iter().any(|&t| !(0.0..=n.t_end).contains(&t)) {
            return bad("save times must lie in [0, t_end]");
        }
        match self.command {
            Command::Simulate | Command::Couple if n.n == 0 => bad("N must be at least 1"),
            Command::Limit if n.n_particles == 0 || n.max_iter == 0 => bad("Picard needs particles and iterations"),
            Command::Converge | Command::Couple if n.ladder.is_empty() || n.ladder.contains(&0) => {
                bad("ladder must hold positive sizes")
            }
            Command::Converge | Command::Couple if n.replicas == 0 => bad("replicas must be at least 1"),
            Command::Converge if n.directions == 0 => bad("directions must be at least 1"),
            Command::Pathint if n.quadrature_order == 0 => bad("quadrature order must be positive"),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, Parser)]
#[command(name = "almhawkes", version, about = "Age and leaky-memory Hawkes networks and their mean-field limit")]
pub struct Cli {
    #[command(subcommand)]
    pub action: Action,
}

#[derive(Clone, Debug, Subcommand)]
pub enum Action {
    /// Execute the pipeline named in the config.
    Run(RunArgs),
    /// Print a preset model spec as JSON.
    Preset { name: String },
}

#[derive(Clone, Debug, Default, clap::Args)]
pub struct RunArgs {
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Treat numerical warnings as errors (exit 3).
    #[arg(long)]
    pub strict: bool,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Check that the config names this command.
    #[arg(long, value_enum)]
    pub expect: Option<Command>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub file: String,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: Command,
    pub inputs_hash: String,
    pub model_hash: String,
    pub seed: u64,
    pub version: String,
    pub schema_version: u32,
    pub wall_time_s: f64,
    pub artifacts: Vec<ArtifactEntry>,
    pub warnings: Vec<String>,
}

pub struct Outcome {
    pub exit_code: i32,
    pub manifest: Option<Manifest>,
    pub message: String,
}

/// Exit status for an error.
pub fn exit_code(err: &AlmError) -> i32 {
    match err {
        AlmError::Validation(_) | AlmError::Config(_) | AlmError::Json(_) => EXIT_VALIDATION,
        AlmError::Io(e) if e.kind() == std::io::ErrorKind::NotFound => EXIT_MISSING_FILE,
        AlmError::Io(_) | AlmError::Csv(_) => EXIT_INTERNAL,
        AlmError::Domain(_)
        | AlmError::EventCap { .. }
        | AlmError::NoPreimage(_)
        | AlmError::NotSaved(_)
        | AlmError::Numerical(_) => EXIT_DOWNSTREAM,
    }
}

struct Artifacts {
    dir: PathBuf,
    files: Vec<String>,
    warnings: Vec<String>,
}

impl Artifacts {
    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    fn json<T: Serialize>(&mut self, name: &str, v: &T) -> Result<()> {
        let p = self.path(name);
        fs::write(p, serde_json::to_string_pretty(v)? + "\n")?;
        Ok(())
    }
}

fn default_grid(spec: &ModelSpec, n: &Numerics) -> Grid {
    n.grid.clone().unwrap_or_else(|| Grid::for_spec(spec, n.t_end, n.dt, n.dm))
}

fn pde_x(spec: &ModelSpec, n: &Numerics, save_times: Vec<f64>, art: &mut Artifacts) -> Result<pde_solver::DensitySolution> {
    let grid = default_grid(spec, n);
    let opts = PdeOptions {
        save_times,
        test_functions: pde_solver::default_family(spec),
        validation_samples: n.validation_samples,
        ..Default::default()
    };
    let sol = pde_solver::solve_alm_pde(spec, &grid, &spec.h_bar(), &opts)?;
    art.warnings.extend(sol.warnings.iter().cloned());
    Ok(sol)
}

fn x_path(spec: &ModelSpec, cfg: &RunConfig, art: &mut Artifacts) -> Result<XPath> {
    let n = &cfg.numerics;
    match n.x_source {
        XSource::Pde => Ok(pde_x(spec, n, Vec::new(), art)?.x),
        XSource::Picard => {
            let (x, rep) = limit_sde::solve_x_picard(spec, n.t_end, n.dt, n.n_particles, cfg.seed, n.tol, n.max_iter)?;
            if !rep.converged {
                art.warnings.push(format!("Picard iteration stopped at delta {}", rep.final_delta));
            }
            Ok(x)
        }
    }
}

fn execute(cfg: &RunConfig, spec: &ModelSpec, art: &mut Artifacts) -> Result<()> {
    let n = &cfg.numerics;
    let coords = spec.coordinates;
    match cfg.command {
        Command::Validate => {
            let rep = validate_assumptions(spec, n.validation_samples, cfg.seed);
            art.json("validation.json", &rep)?;
            if !rep.passed {
                return Err(AlmError::Validation(rep.failures().join("; ")));
            }
        }
        Command::Simulate => {
            let sim = Simulator::new(spec, SimOptions { event_cap: n.event_cap, validation_samples: n.validation_samples, ..Default::default() })?;
            let rec = sim.run(n.n, n.t_end, cfg.seed, &n.save_times)?;
            sim_export::write_events_csv(art.path("events.csv"), &rec.events, spec.d, coords)?;
            sim_export::write_snapshots_csv(art.path("snapshots.csv"), &rec, spec.d, coords)?;
            art.json("run.json", &sim_export::RunMetadata::from(&rec))?;
        }
        Command::Limit => {
            let (x, rep) = limit_sde::solve_x_picard(spec, n.t_end, n.dt, n.n_particles, cfg.seed, n.tol, n.max_iter)?;
            if !rep.converged {
                art.warnings.push(format!("Picard iteration stopped at delta {}", rep.final_delta));
            }
            x.write_csv(art.path("x.csv"))?;
            art.json("picard.json", &rep)?;
        }
        Command::Pde => {
            let sol = pde_x(spec, n, n.save_times.clone(), art)?;
            pde_solver::write_density_csv(art.path("density.csv"), &sol, coords)?;
            pde_solver::write_binary_dump(art.path("density.bin"), &sol)?;
            sol.x.write_csv(art.path("x.csv"))?;
            art.json(
                "diagnostics.json",
                &serde_json::json!({
                    "grid": sol.grid,
                    "times": sol.times,
                    "mass_trace": sol.mass_trace,
                    "max_flux_imbalance": sol.flux_balance.iter().cloned().fold(0.0, f64::max),
                    "leaked_mass": sol.leaked_mass,
                    "weak_residuals": sol.weak_residuals,
                    "outside_mass": sol.outside_mass,
                    "warnings": sol.warnings,
                }),
            )?;
        }
        Command::Pathint => {
            let x = x_path(spec, cfg, art)?;
            let t = n.save_times.last().copied().unwrap_or(n.t_end);
            let mut pcfg = match n.k_max {
                Some(k) => PathIntegralConfig::new(k, n.tail_epsilon),
                None => PathIntegralConfig::for_horizon(spec, t, n.tail_epsilon),
            };
            pcfg.order = n.quadrature_order;
            pcfg.mc_samples = n.mc_samples;
            pcfg.seed = cfg.seed;
            let slice = n.slice_grid.clone().unwrap_or_else(|| {
                let g = default_grid(spec, n);
                let d = spec.d;
                Grid { n_a: 20.min(g.n_a), n_m: vec![20; d], ..g }
            });
            let vals = path_integral::density_on_grid(t, &slice, &x, &pcfg, spec)?;
            path_integral::write_density_slice_csv(art.path("density_slice.csv"), t, &slice, &vals, coords)?;
            art.json("pathint.json", &serde_json::json!({ "t": t, "config": pcfg, "grid": slice }))?;
        }
        Command::Converge => {
            let t = n.save_times.last().copied().unwrap_or(n.t_end);
            let sol = pde_x(spec, n, vec![t], art)?;
            let table = metrics::convergence_study(spec, &n.ladder, t, n.replicas, cfg.seed, &sol, n.directions)?;
            table.write_csv(art.path("convergence.csv"))?;
            if table.fit.is_none() {
                art.warnings.push("slope undefined for this ladder".into());
            }
            let p = art.path("convergence.json");
            fs::write(p, table.summary_json() + "\n")?;
        }
        Command::Couple => {
            let x = x_path(spec, cfg, art)?;
            let table = metrics::coupling_decay_study(spec, &n.ladder, n.t_end, &x, n.replicas, cfg.seed)?;
            let p = art.path("coupling.csv");
            let mut w = csv::Writer::from_path(p)?;
            w.write_record(["N", "replicate", "seed", "mean_sup", "first_sup", "mismatches"])?;
            for s in &table.summaries {
                for (r, rep) in s.replicas.iter().enumerate() {
                    w.write_record([
                        s.n.to_string(),
                        r.to_string(),
                        rep.seed.to_string(),
                        crate::xpath::fmt_f64(rep.mean_sup),
                        crate::xpath::fmt_f64(rep.first_sup),
                        rep.mismatches.to_string(),
                    ])?;
                }
            }
            w.flush()?;
            if table.fit.is_none() {
                art.warnings.push("slope undefined for this ladder".into());
            }
            art.json("coupling.json", &table)?;
        }
    }
    Ok(())
}

fn sha256_file(p: &Path) -> Result<String> {
    Ok(hex_digest(&fs::read(p)?))
}

/// Loads, overrides, checks and executes one config.
pub fn run(args: &RunArgs) -> Result<(Manifest, bool)> {
    let start = Instant::now();
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = &args.out {
        cfg.output = o.clone();
    }
    if let Some(t) = args.threads {
        cfg.numerics.threads = t;
    }
    if let Some(c) = args.expect {
        if c != cfg.command {
            return Err(AlmError::Config(format!("config runs {}, not {}", cfg.command.name(), c.name())));
        }
    }
    cfg.check()?;
    let spec = cfg.resolve_model()?;
    fs::create_dir_all(&cfg.output)?;
    let mut art = Artifacts { dir: cfg.output.clone(), files: Vec::new(), warnings: Vec::new() };
    let res = par::with_threads(cfg.numerics.threads, || execute(&cfg, &spec, &mut art));
    let mut hashed = cfg.clone();
    hashed.output = PathBuf::new();
    hashed.numerics.threads = 0;
    hashed.model = ModelSource::Inline(Box::new(spec.clone()));
    let mut artifacts = Vec::new();
    for f in &art.files {
        let p = art.dir.join(f);
        if p.exists() {
            artifacts.push(ArtifactEntry { file: f.clone(), sha256: sha256_file(&p)? });
        }
    }
    let manifest = Manifest {
        command: cfg.command,
        inputs_hash: hex_digest(serde_json::to_string(&hashed)?.as_bytes()),
        model_hash: spec.hash(),
        seed: cfg.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        schema_version: SCHEMA_VERSION,
        wall_time_s: start.elapsed().as_secs_f64(),
        artifacts,
        warnings: art.warnings.clone(),
    };
    fs::write(cfg.output.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    res?;
    let strict_fail = args.strict && !manifest.warnings.is_empty();
    Ok((manifest, strict_fail))
}

pub fn run_outcome(args: &RunArgs) -> Outcome {
    match run(args) {
        Ok((m, true)) => Outcome {
            exit_code: EXIT_STRICT,
            message: format!("warnings under --strict: {}", m.warnings.join("; ")),
            manifest: Some(m),
        },
        Ok((m, false)) => Outcome { exit_code: EXIT_OK, message: String::new(), manifest: Some(m) },
        Err(e) => Outcome { exit_code: exit_code(&e), message: e.to_string(), manifest: None },
    }
}

/// Entry point behind `main`; returns the process exit status.
pub fn main_with(cli: Cli) -> i32 {
    match cli.action {
        Action::Preset { name } => match presets::preset(&name) {
            Ok(s) => {
                println!("{}", s.to_json());
                EXIT_OK
            }
            Err(e) => {
                eprintln!("error: {e}");
                exit_code(&e)
            }
        },
        Action::Run(args) => {
            let out = run_outcome(&args);
            if out.exit_code != EXIT_OK {
                eprintln!("error: {}", out.message);
            } else if let Some(m) = &out.manifest {
                for w in &m.warnings {
                    eprintln!("warning: {w}");
                }
            }
            out.exit_code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_fields_are_rejected() {
        let s = r#"{"schema_version":1,"command":"validate","model":{"preset":"stp"},"bogus":1}"#;
        assert!(matches!(RunConfig::from_json(s), Err(AlmError::Json(_))));
        let s = r#"{"schema_version":1,"command":"validate","model":{"preset":"stp"},"numerics":{"nn":1}}"#;
        assert!(RunConfig::from_json(s).is_err());
        let s = r#"{"schema_version":2,"command":"validate","model":{"preset":"stp"}}"#;
        assert!(matches!(RunConfig::from_json(s), Err(AlmError::Config(_))));
    }

    #[test]
    fn zero_neurons_is_a_validation_error() {
        let s = r#"{"schema_version":1,"command":"simulate","model":{"preset":"stp"},"numerics":{"n":0}}"#;
        let cfg = RunConfig::from_json(s).unwrap();
        assert_eq!(exit_code(&cfg.check().unwrap_err()), EXIT_VALIDATION);
    }
}
