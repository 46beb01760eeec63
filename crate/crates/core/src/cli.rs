//! Command-line surface tying the protocols to files.
//!
//! Exit codes: 0 on success, 1 on configuration or usage errors, 2 on
//! simulation faults. Output files are written via a temporary sibling
//! and renamed into place, so a fault never leaves partial output.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::analysis::{MetricsReport, Window};
use crate::config::{load_config, ConfigError, LoadedConfig};
use crate::experiments::{
    run_drop_test, run_natural_frequency, run_spring_calibration, run_sweep, ExperimentError,
    Protocol, SweepOutcome,
};
use crate::robot::Joint;
use crate::sea::SpringMode;
use crate::trace_io::{read_trace, write_trace};

#[derive(Parser)]
#[command(
    name = "seahop",
    version,
    about = "Series-elastic single-leg hopping robot simulator and experiment harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quasi-static spring calibration of one actuator unit.
    CalibrateSpring(CalibrateSpringArgs),
    /// Free-vibration natural frequency of one joint.
    NaturalFreq(NaturalFreqArgs),
    /// Drop test (landing or hopping) with PD posture hold.
    DropTest(DropTestArgs),
    /// Run a parameter sweep of drop tests.
    Sweep(SweepArgs),
    /// Compute metrics from a recorded trace.
    Metrics(MetricsArgs),
}

#[derive(Args)]
struct CalibrateSpringArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output CSV of the measured load steps (default: output.dir from
    /// the config).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct NaturalFreqArgs {
    #[arg(long)]
    config: PathBuf,
    /// Joint to excite.
    #[arg(long, value_parser = parse_joint_arg)]
    joint: Joint,
    /// Output trace CSV (default: output.dir from the config).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DropTestArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output trace CSV (default: output.dir from the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override a joint's spring mode, e.g. `knee=locked` (repeatable).
    #[arg(long = "spring-mode", value_parser = parse_spring_mode_arg)]
    spring_mode: Vec<(Joint, SpringMode)>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory for per-cell traces and the summary table
    /// (default: output.dir from the config).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MetricsArgs {
    /// Input trace CSV.
    #[arg(long)]
    trace: PathBuf,
    /// Restrict metrics to a time window, `T0:T1` in seconds.
    #[arg(long, value_parser = parse_window_arg)]
    window: Option<Window>,
    /// Emit one CSV row instead of the key-value block.
    #[arg(long)]
    csv: bool,
}

fn parse_joint_arg(s: &str) -> Result<Joint, String> {
    Joint::parse(s).ok_or_else(|| format!("expected hip|knee|ankle, got {s:?}"))
}

fn parse_spring_mode_arg(s: &str) -> Result<(Joint, SpringMode), String> {
    let (joint, mode) = s
        .split_once('=')
        .ok_or_else(|| format!("expected <joint>=<active|locked>, got {s:?}"))?;
    let joint = parse_joint_arg(joint)?;
    let mode = match mode {
        "active" => SpringMode::Active,
        "locked" => SpringMode::Locked,
        other => return Err(format!("expected active|locked, got {other:?}")),
    };
    Ok((joint, mode))
}

fn parse_window_arg(s: &str) -> Result<Window, String> {
    let (t0, t1) = s
        .split_once(':')
        .ok_or_else(|| format!("expected T0:T1, got {s:?}"))?;
    let t0_s: f64 = t0.parse().map_err(|_| format!("invalid start time {t0:?}"))?;
    let t1_s: f64 = t1.parse().map_err(|_| format!("invalid end time {t1:?}"))?;
    if !(t1_s > t0_s) {
        return Err(format!("window end {t1_s} must exceed start {t0_s}"));
    }
    Ok(Window { t0_s, t1_s })
}

const EXIT_OK: i32 = 0;
const EXIT_VALIDATION: i32 = 1;
const EXIT_SIM_FAULT: i32 = 2;

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error(transparent)]
    TraceIo(#[from] crate::trace_io::TraceIoError),
    #[error(transparent)]
    Analysis(#[from] crate::analysis::AnalysisError),
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            // Experiment-time diagnostics are simulation faults; bad inputs
            // and unreadable files are validation failures.
            CliError::Experiment(ExperimentError::Analysis(_)) => EXIT_VALIDATION,
            CliError::Experiment(_) => EXIT_SIM_FAULT,
            _ => EXIT_VALIDATION,
        }
    }
}

/// Run the CLI against explicit arguments and return the process exit
/// code. The binary forwards `std::env::args_os()`.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_VALIDATION,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::CalibrateSpring(args) => calibrate_spring(args),
        Command::NaturalFreq(args) => natural_freq(args),
        Command::DropTest(args) => drop_test(args),
        Command::Sweep(args) => sweep(args),
        Command::Metrics(args) => metrics(args),
    }
}

fn load_for(path: &Path, expected: Protocol) -> Result<LoadedConfig, CliError> {
    let loaded = load_config(path)?;
    for line in &loaded.provenance {
        eprintln!("config: {line}");
    }
    if loaded.config.protocol != expected {
        return Err(ConfigError::Validation {
            key: "experiment.protocol".into(),
            message: format!(
                "config declares {:?} but this subcommand runs {:?}",
                loaded.config.protocol.name(),
                expected.name()
            ),
        }
        .into());
    }
    Ok(loaded)
}

/// Resolve the output path: the `--out` flag, else `output.dir` from the
/// config joined with a per-protocol default name.
fn resolve_out(
    flag: Option<PathBuf>,
    loaded: &LoadedConfig,
    default_name: &str,
) -> Result<PathBuf, CliError> {
    if let Some(path) = flag {
        return Ok(path);
    }
    match &loaded.config.output.dir {
        Some(dir) if default_name.is_empty() => Ok(PathBuf::from(dir)),
        Some(dir) => Ok(Path::new(dir).join(default_name)),
        None => Err(ConfigError::Validation {
            key: "output.dir".into(),
            message: "no output path: pass --out or set output.dir".into(),
        }
        .into()),
    }
}

/// Write text to a file atomically (temp sibling + rename).
fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let io = |source| CliError::Write { path: path.display().to_string(), source };
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or(Path::new("."))).map_err(io)?;
    tmp.write_all(contents.as_bytes()).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn calibrate_spring(args: CalibrateSpringArgs) -> Result<(), CliError> {
    let loaded = load_for(&args.config, Protocol::SpringCal)?;
    let out = resolve_out(args.out, &loaded, "calibration.csv")?;
    let record = run_spring_calibration(&loaded.config)?;

    let mut csv = String::from("phase,applied_nm,deflection_deg\n");
    for step in &record.steps {
        let phase = match step.phase {
            crate::experiments::LoadPhase::Loading => "loading",
            crate::experiments::LoadPhase::Unloading => "unloading",
        };
        csv.push_str(&format!(
            "{phase},{:.16e},{:.16e}\n",
            step.applied_nm, step.deflection_deg
        ));
    }
    write_atomic(&out, &csv)?;

    print!(
        "fitted_k_loading_nm_per_deg = {:.6}\n\
         fitted_k_unloading_nm_per_deg = {:.6}\n\
         loop_area_nm_deg = {:.6}\n\
         r_squared = {:.6}\n",
        record.fitted_k_loading,
        record.fitted_k_unloading,
        record.loop_area_nm_deg,
        record.r_squared
    );
    Ok(())
}

fn natural_freq(args: NaturalFreqArgs) -> Result<(), CliError> {
    let loaded = load_for(&args.config, Protocol::NaturalFreq)?;
    let out = resolve_out(args.out, &loaded, &format!("natural_freq_{}.csv", args.joint))?;
    let (trace, frequency) = run_natural_frequency(&loaded.config, args.joint)?;
    write_trace(&trace, &out)?;
    println!("joint = {}", args.joint);
    println!("frequency_hz = {frequency:.4}");
    Ok(())
}

fn drop_test(args: DropTestArgs) -> Result<(), CliError> {
    let mut loaded = load_for(&args.config, Protocol::DropTest)?;
    let out = resolve_out(args.out, &loaded, "drop_test.csv")?;
    for (joint, mode) in args.spring_mode {
        loaded.config.spring_mode[joint] = mode;
    }
    let trace = run_drop_test(&loaded.config)?;
    write_trace(&trace, &out)?;
    let report = MetricsReport::compute(&trace, None)?;
    print!("{}", report.to_kv_block());
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<(), CliError> {
    let loaded = load_for(&args.config, Protocol::Sweep)?;
    let out = resolve_out(args.out, &loaded, "")?;
    std::fs::create_dir_all(&out).map_err(|source| CliError::Write {
        path: out.display().to_string(),
        source,
    })?;

    let report = run_sweep(&loaded.raw, &loaded.config);
    let mut summary = format!("cell,overrides,status,{}\n", MetricsReport::csv_header());
    for cell in &report.cells {
        let name = format!("cell_{:03}", cell.index);
        let overrides: Vec<String> = cell
            .overrides
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        let overrides = overrides.join(";").replace(',', ";");
        match &cell.outcome {
            SweepOutcome::Completed { trace, metrics } => {
                write_trace(trace, &out.join(format!("{name}.csv")))?;
                summary.push_str(&format!(
                    "{name},{overrides},ok,{}\n",
                    metrics.to_csv_row()
                ));
            }
            SweepOutcome::Failed { error } => {
                let error = error.replace(['\n', ','], ";");
                summary.push_str(&format!("{name},{overrides},failed: {error},\n"));
            }
        }
    }
    write_atomic(&out.join("summary.csv"), &summary)?;
    println!(
        "cells = {}\ncompleted = {}\nfailed = {}",
        report.cells.len(),
        report.completed(),
        report.failed()
    );
    Ok(())
}

fn metrics(args: MetricsArgs) -> Result<(), CliError> {
    let trace = read_trace(&args.trace)?;
    let report = MetricsReport::compute(&trace, args.window)?;
    if args.csv {
        println!("{}", MetricsReport::csv_header());
        println!("{}", report.to_csv_row());
    } else {
        print!("{}", report.to_kv_block());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn help_exits_zero() {
        assert_eq!(cli_main(["seahop", "--help"]), 0);
        assert_eq!(cli_main(["seahop", "drop-test", "--help"]), 0);
    }

    #[test]
    fn version_exits_zero() {
        assert_eq!(cli_main(["seahop", "--version"]), 0);
    }

    #[test]
    fn unknown_subcommand_exits_one() {
        assert_eq!(cli_main(["seahop", "fly"]), 1);
    }

    #[test]
    fn metrics_on_missing_trace_exits_one() {
        assert_eq!(
            cli_main(["seahop", "metrics", "--trace", "missing.csv"]),
            1
        );
    }

    #[test]
    fn window_parser_accepts_colon_pair() {
        let w = parse_window_arg("0.1:0.9").unwrap();
        assert_eq!(w.t0_s, 0.1);
        assert_eq!(w.t1_s, 0.9);
        assert!(parse_window_arg("0.9:0.1").is_err());
        assert!(parse_window_arg("nope").is_err());
    }

    #[test]
    fn spring_mode_parser() {
        let (j, m) = parse_spring_mode_arg("knee=locked").unwrap();
        assert_eq!(j, Joint::Knee);
        assert_eq!(m, SpringMode::Locked);
        assert!(parse_spring_mode_arg("knee").is_err());
        assert!(parse_spring_mode_arg("elbow=active").is_err());
    }
}
