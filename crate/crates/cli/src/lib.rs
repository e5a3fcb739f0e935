//! Argument parsing, run execution and file output for the `jamguard` binary.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;
use sha2::{Digest, Sha256};

use jamguard::metrics::{Evaluation, SolutionTrace};
use jamguard::orchestrator::{run_bcd, run_benchmark_no_irs, run_sweep, BcdOptions, Solution, SweepAxis, SweepRow};
use jamguard::scenario::{DevicesConfig, ScenarioConfig};
use jamguard::{Scenario, Setup};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DEGRADED: i32 = 3;

/// Relative slack allowed when checking that EE never drops between blocks.
pub const MONOTONE_TOL: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Usage(#[from] clap::Error),
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(e) if !e.use_stderr() => EXIT_OK,
            CliError::Usage(_) | CliError::Config(_) => EXIT_CONFIG,
            CliError::Io { .. } => EXIT_IO,
        }
    }
}

impl From<jamguard::Error> for CliError {
    fn from(e: jamguard::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Parser)]
#[command(name = "jamguard", version, about = "Energy-efficient UAV data collection with an IRS under jamming")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Optimize one scenario and write its trajectory, slots, trace and summary.
    Run(CommonArgs),
    /// Re-run the optimization over a list of parameter values.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SetupArg {
    A,
    B,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON scenario file; mutually exclusive with --setup.
    #[arg(long, conflicts_with = "setup")]
    pub scenario: Option<PathBuf>,
    /// Built-in jammer placement (default a).
    #[arg(long, value_enum)]
    pub setup: Option<SetupArg>,
    /// Run without the IRS.
    #[arg(long)]
    pub no_irs: bool,
    /// Seed of the device cluster.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    /// Outer iteration cap.
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Relative EE gain that ends the outer loop.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// pj_dbm, M or pbar_dbm.
    #[arg(long)]
    pub axis: String,
    /// Comma-separated axis values.
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    pub values: Vec<f64>,
    /// Add a no-IRS run for every value.
    #[arg(long)]
    pub benchmark: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioSource {
    File(PathBuf),
    Preset(Setup),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Mode {
    Run,
    Sweep {
        axis: SweepAxis,
        values: Vec<f64>,
        benchmark: bool,
    },
}

/// Fully resolved command line.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub mode: Mode,
    pub source: ScenarioSource,
    pub seed: Option<u64>,
    pub irs: bool,
    pub out_dir: PathBuf,
    pub max_iter: usize,
    pub tol: f64,
}

pub fn parse_args<I, T>(argv: I) -> Result<RunSpec, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv)?;
    let (common, mode) = match cli.command {
        Command::Run(c) => (c, Mode::Run),
        Command::Sweep(s) => {
            let axis: SweepAxis = s.axis.parse()?;
            (
                s.common,
                Mode::Sweep {
                    axis,
                    values: s.values,
                    benchmark: s.benchmark,
                },
            )
        }
    };
    let defaults = BcdOptions::default();
    let tol = common.tol.unwrap_or(defaults.mu2);
    if !(tol >= 0.0 && tol.is_finite()) {
        return Err(CliError::Config(format!("--tol must be a finite non-negative number, got {tol}")));
    }
    let max_iter = common.max_iter.unwrap_or(defaults.i_max);
    if max_iter == 0 {
        return Err(CliError::Config("--max-iter must be at least 1".into()));
    }
    let source = match (common.scenario, common.setup) {
        (Some(p), _) => ScenarioSource::File(p),
        (None, Some(SetupArg::B)) => ScenarioSource::Preset(Setup::B),
        (None, _) => ScenarioSource::Preset(Setup::A),
    };
    Ok(RunSpec {
        mode,
        source,
        seed: common.seed,
        irs: !common.no_irs,
        out_dir: common.out_dir,
        max_iter,
        tol,
    })
}

impl RunSpec {
    pub fn options(&self) -> BcdOptions {
        BcdOptions {
            mu2: self.tol,
            i_max: self.max_iter,
            ..BcdOptions::default()
        }
    }

    /// Scenario configuration with the seed applied to a generated cluster.
    pub fn config(&self) -> Result<ScenarioConfig, CliError> {
        let mut cfg = match &self.source {
            ScenarioSource::Preset(setup) => return self.finish(Scenario::preset(*setup, self.seed.unwrap_or(1))?.to_config()),
            ScenarioSource::File(p) => {
                let text = fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                serde_json::from_str::<ScenarioConfig>(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
        };
        if let Some(seed) = self.seed {
            cfg.devices = Some(match cfg.devices {
                Some(DevicesConfig::Cluster { center, radius, count, .. }) => DevicesConfig::Cluster {
                    center,
                    radius,
                    count,
                    seed,
                },
                Some(explicit @ DevicesConfig::Explicit { .. }) => explicit,
                None => DevicesConfig::Cluster {
                    center: jamguard::scenario::DEFAULT_CLUSTER_CENTER,
                    radius: 20.0,
                    count: 5,
                    seed,
                },
            });
        }
        self.finish(cfg)
    }

    fn finish(&self, mut cfg: ScenarioConfig) -> Result<ScenarioConfig, CliError> {
        cfg.irs.enabled = cfg.irs.enabled && self.irs;
        Ok(cfg)
    }
}

/// `f64` written with 17 significant digits.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(transparent)]
pub struct Num(pub Option<f64>);

impl From<f64> for Num {
    fn from(v: f64) -> Self {
        Num(v.is_finite().then_some(v))
    }
}

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            Some(v) => RawValue::from_string(fmt17(v)).map_err(serde::ser::Error::custom)?.serialize(ser),
            None => ser.serialize_none(),
        }
    }
}

pub fn fmt17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub throughput_bits: Num,
    pub energy_j: Num,
    pub ee_bits_per_j: Num,
}

impl From<&Evaluation> for Totals {
    fn from(e: &Evaluation) -> Self {
        Totals {
            throughput_bits: e.throughput.into(),
            energy_j: e.energy.into(),
            ee_bits_per_j: e.ee.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfCheck {
    pub name: String,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    /// SHA-256 over tool version, command, options and configuration.
    pub run_id: String,
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    pub max_iter: usize,
    pub tol: Num,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub meta: RunMeta,
    pub variant: String,
    pub totals: Totals,
    pub outer_iterations: usize,
    pub converged: bool,
    pub degraded: bool,
    pub self_checks: Vec<SelfCheck>,
    pub config: ScenarioConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummaryRow {
    pub axis_value: Num,
    pub variant: String,
    pub totals: Totals,
    pub degraded: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub meta: RunMeta,
    pub axis: String,
    pub rows: Vec<SweepSummaryRow>,
    pub config: ScenarioConfig,
}

pub fn load_summary(text: &str) -> Result<RunSummary, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Config(format!("summary.json: {e}")))
}

fn run_meta(spec: &RunSpec, command: &str, cfg: &ScenarioConfig) -> RunMeta {
    let mut h = Sha256::new();
    h.update(env!("CARGO_PKG_VERSION"));
    h.update(command);
    h.update(format!("{:?}|{}|{}|{:?}", spec.seed, spec.max_iter, fmt17(spec.tol), spec.mode));
    h.update(serde_json::to_string(cfg).unwrap_or_default());
    let run_id = h.finalize().iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    });
    RunMeta {
        run_id,
        tool: "jamguard".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        seed: spec.seed,
        max_iter: spec.max_iter,
        tol: spec.tol.into(),
    }
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    fs::write(&tmp, contents).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn trajectory_csv(sol: &Solution) -> String {
    let mut out = String::from("n,x,y,z\n");
    for (n, p) in sol.trajectory.points.iter().enumerate() {
        let _ = writeln!(out, "{n},{},{},{}", fmt17(p.x), fmt17(p.y), fmt17(p.z));
    }
    out
}

pub fn slots_csv(eval: &Evaluation) -> String {
    let mut out = String::from("n,scheduled_k,p_w,g_k,g_j,sinr,rate_bits,speed_mps,power_w,energy_j\n");
    for r in &eval.slots {
        let k = r.scheduled.map(|k| k.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{k},{},{},{},{},{},{},{},{}",
            r.n,
            fmt17(r.power_w),
            fmt17(r.g_k),
            fmt17(r.g_j),
            fmt17(r.sinr),
            fmt17(r.rate_bits),
            fmt17(r.speed_mps),
            fmt17(r.propulsion_w),
            fmt17(r.energy_j)
        );
    }
    out
}

pub fn trace_csv(trace: &SolutionTrace) -> String {
    let mut out = String::from("iter,block,throughput_bits,energy_j,ee_bits_per_j\n");
    for e in &trace.entries {
        let _ = writeln!(out, "{},{},{},{},{}", e.iter, e.block, fmt17(e.throughput), fmt17(e.energy), fmt17(e.ee));
    }
    out
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("axis_value,variant,throughput,energy,ee\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt17(r.axis_value),
            r.variant,
            fmt17(r.throughput),
            fmt17(r.energy),
            fmt17(r.ee)
        );
    }
    out
}

/// Invariants every finished run must satisfy.
pub fn self_checks(s: &Scenario, sol: &Solution, trace: &SolutionTrace) -> Vec<SelfCheck> {
    let mut checks = Vec::new();
    let mut push = |name: &str, detail: String| {
        checks.push(SelfCheck {
            name: name.into(),
            passed: detail.is_empty(),
            detail,
        })
    };
    let drop = trace
        .entries
        .windows(2)
        .find(|w| w[1].ee < w[0].ee * (1.0 - MONOTONE_TOL))
        .map(|w| format!("EE fell from {} to {} in block {} of iteration {}", w[0].ee, w[1].ee, w[1].block, w[1].iter))
        .unwrap_or_default();
    push("ee_monotone", drop);
    push("resource_constraints", sol.resource_plan.violations(s).join("; "));
    push(
        "trajectory_constraints",
        sol.trajectory.validate(s).err().map(|e| e.to_string()).unwrap_or_default(),
    );
    let sum: f64 = sol.evaluation.slots.iter().map(|r| r.rate_bits).sum();
    let t = sol.evaluation.throughput;
    push(
        "slot_rates_sum",
        if (sum - t).abs() <= 1e-6 * t.abs().max(1.0) {
            String::new()
        } else {
            format!("slot rates sum to {sum}, throughput is {t}")
        },
    );
    checks
}

/// Result of a finished command: files written and the exit status.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub exit_code: i32,
    pub message: String,
}

/// Writes the four files of a single run and returns their paths.
pub fn write_outputs(
    out_dir: &Path,
    sol: &Solution,
    trace: &SolutionTrace,
    summary: &RunSummary,
) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let json = serde_json::to_string_pretty(summary).map_err(|e| CliError::Config(e.to_string()))? + "\n";
    let files = [
        ("trajectory.csv", trajectory_csv(sol)),
        ("slots.csv", slots_csv(&sol.evaluation)),
        ("trace.csv", trace_csv(trace)),
        ("summary.json", json),
    ];
    let mut paths = Vec::new();
    for (name, body) in files {
        let p = out_dir.join(name);
        write_atomic(&p, &body)?;
        paths.push(p);
    }
    Ok(paths)
}

pub fn execute(spec: &RunSpec) -> Result<Outcome, CliError> {
    let cfg = spec.config()?;
    let scenario = cfg.build()?;
    let opts = spec.options();
    match &spec.mode {
        Mode::Run => {
            let (sol, trace) = if scenario.irs_enabled {
                run_bcd(&scenario, &opts)?
            } else {
                run_benchmark_no_irs(&scenario, &opts)?
            };
            let checks = self_checks(&scenario, &sol, &trace);
            let summary = RunSummary {
                meta: run_meta(spec, "run", &cfg),
                variant: if scenario.irs_enabled { "irs" } else { "no_irs" }.into(),
                totals: (&sol.evaluation).into(),
                outer_iterations: trace.outer_iterations,
                converged: trace.converged,
                degraded: trace.degraded,
                self_checks: checks.clone(),
                config: cfg,
            };
            let files = write_outputs(&spec.out_dir, &sol, &trace, &summary)?;
            let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
            let (exit_code, message) = if !failed.is_empty() {
                (EXIT_DEGRADED, format!("self-checks failed: {}", failed.join(", ")))
            } else if trace.degraded {
                (EXIT_DEGRADED, "solver hit an iteration limit".to_string())
            } else {
                (
                    EXIT_OK,
                    format!(
                        "EE {:.6e} bits/J after {} iterations",
                        sol.evaluation.ee, trace.outer_iterations
                    ),
                )
            };
            Ok(Outcome {
                files,
                exit_code,
                message,
            })
        }
        Mode::Sweep {
            axis,
            values,
            benchmark,
        } => {
            let rows = run_sweep(&scenario, *axis, values, &opts, *benchmark)?;
            let summary = SweepSummary {
                meta: run_meta(spec, "sweep", &cfg),
                axis: axis.name().into(),
                rows: rows
                    .iter()
                    .map(|r| SweepSummaryRow {
                        axis_value: r.axis_value.into(),
                        variant: r.variant.clone(),
                        totals: Totals {
                            throughput_bits: r.throughput.into(),
                            energy_j: r.energy.into(),
                            ee_bits_per_j: r.ee.into(),
                        },
                        degraded: r.degraded,
                        error: r.error.clone(),
                    })
                    .collect(),
                config: cfg,
            };
            fs::create_dir_all(&spec.out_dir).map_err(io_err(&spec.out_dir))?;
            let json = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Config(e.to_string()))? + "\n";
            let csv_path = spec.out_dir.join("sweep.csv");
            let json_path = spec.out_dir.join("summary.json");
            write_atomic(&csv_path, &sweep_csv(&rows))?;
            write_atomic(&json_path, &json)?;
            let bad = rows.iter().filter(|r| r.degraded || r.error.is_some()).count();
            Ok(Outcome {
                files: vec![csv_path, json_path],
                exit_code: if bad > 0 { EXIT_DEGRADED } else { EXIT_OK },
                message: format!("{} sweep points, {bad} degraded or failed", rows.len()),
            })
        }
    }
}

/// Caps the global thread pool from `JAMGUARD_THREADS`.
pub fn configure_threads(value: Option<&str>) -> Result<(), CliError> {
    let Some(v) = value else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("JAMGUARD_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}
