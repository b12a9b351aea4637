//! Command-line front end: model files, verification, classification and reports.
//!
//! Exit status: 0 when every record passes, 1 when a verification record
//! fails, 2 for input errors (bad arguments, unreadable or invalid model files).

pub mod commands;
pub mod model_file;
pub mod report;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::{residual_fields, run_classify, run_verify};
use model_file::{load_model, parse_probe, LoadedModel};
use report::{to_csv, Report, REPORT_SCHEMA};
use seqwarp::{PseudoProjectiveParams, Tolerance};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "seqwarp", version, about = "Curvature checks for sequential warped products")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct SampleArgs {
    /// Number of sample points (overrides the model file).
    #[arg(long)]
    samples: Option<usize>,
    /// Sampling seed (overrides the model file).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compare every closed form against the brute-force curvature.
    Verify {
        model: PathBuf,
        #[command(flatten)]
        sampling: SampleArgs,
        /// Relative tolerance; the absolute floor stays at the model's value.
        #[arg(long)]
        tol: Option<f64>,
        /// Perturb the adopted reading of one record (testing aid).
        #[arg(long, value_name = "ID")]
        inject_fault: Option<String>,
        /// Print the JSON report instead of the table.
        #[arg(long)]
        json: bool,
    },
    /// Flatness verdict, necessary-condition diagnostics and structure residuals.
    Classify {
        model: PathBuf,
        #[command(flatten)]
        sampling: SampleArgs,
        /// TOML file with phi, m or catino_coeff, psi, lambda, conformal.
        #[arg(long)]
        probe: Option<PathBuf>,
        #[arg(long, requires = "beta", allow_hyphen_values = true)]
        alpha: Option<f64>,
        #[arg(long, requires = "alpha", allow_hyphen_values = true)]
        beta: Option<f64>,
        /// Flatness threshold (overrides the model file).
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        json: bool,
    },
    /// Run verify and classify and write report files.
    Report {
        model: PathBuf,
        #[command(flatten)]
        sampling: SampleArgs,
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Format::Json, Format::Txt])]
        format: Vec<Format>,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, value_name = "ID")]
        inject_fault: Option<String>,
    },
    /// Built-in model presets.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
    /// Print the JSON schema of report.json.
    Schema,
}

#[derive(Debug, Subcommand)]
enum PresetAction {
    List,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Txt,
    Csv,
}

/// Runs the command line and returns the process exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_PASS };
            let target: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(target, "{}", e.render());
            return code;
        }
    };
    match dispatch(cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            EXIT_INPUT
        }
    }
}

fn configure(path: &Path, s: &SampleArgs) -> Result<LoadedModel> {
    let mut loaded = load_model(path)?;
    if let Some(n) = s.samples {
        anyhow::ensure!(n > 0, "--samples must be positive");
        loaded.sampling.count = n;
    }
    if let Some(seed) = s.seed {
        loaded.sampling.seed = seed;
    }
    Ok(loaded)
}

fn exit_for(report: &Report) -> i32 {
    if report.summary.all_passed {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<i32> {
    match cli.command {
        Command::Verify {
            model,
            sampling,
            tol,
            inject_fault,
            json,
        } => {
            let mut loaded = configure(&model, &sampling)?;
            if let Some(t) = tol {
                anyhow::ensure!(t > 0.0 && t.is_finite(), "--tol must be a positive number");
                loaded.tolerances.verify = Tolerance::new(t, loaded.tolerances.verify.abs);
            }
            let start = Instant::now();
            let m = &loaded.model;
            let points = m.sample_points(loaded.sampling.count, loaded.sampling.seed)?;
            let records = run_verify(m, &points, loaded.tolerances.verify, inject_fault.as_deref())?;
            let mut report = Report::new("verify", &loaded, m, loaded.sampling, loaded.tolerances, records, None);
            report.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
            write!(out, "{}", if json { report.to_json()? } else { report.to_text() })?;
            Ok(exit_for(&report))
        }
        Command::Classify {
            model,
            sampling,
            probe,
            alpha,
            beta,
            threshold,
            json,
        } => {
            let mut loaded = configure(&model, &sampling)?;
            if let (Some(a), Some(b)) = (alpha, beta) {
                let params = PseudoProjectiveParams::new(a, b)
                    .map_err(|e| anyhow::anyhow!("--alpha/--beta: {e}"))?;
                loaded.model = loaded.model.clone().with_params(params);
            }
            if let Some(t) = threshold {
                anyhow::ensure!(t > 0.0 && t.is_finite(), "--threshold must be a positive number");
                loaded.tolerances.flatness = t;
            }
            let probe = match &probe {
                Some(p) => Some(
                    parse_probe(&std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)
                        .with_context(|| format!("loading {}", p.display()))?,
                ),
                None => None,
            };
            let start = Instant::now();
            let m = &loaded.model;
            let points = m.sample_points(loaded.sampling.count, loaded.sampling.seed)?;
            let c = run_classify(m, &points, loaded.tolerances.flatness, probe.as_ref())?;
            let mut report = Report::new("classify", &loaded, m, loaded.sampling, loaded.tolerances, Vec::new(), Some(c));
            report.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
            write!(out, "{}", if json { report.to_json()? } else { report.to_text() })?;
            Ok(EXIT_PASS)
        }
        Command::Report {
            model,
            sampling,
            format,
            out: dir,
            inject_fault,
        } => {
            let loaded = configure(&model, &sampling)?;
            let start = Instant::now();
            let m = &loaded.model;
            let points = m.sample_points(loaded.sampling.count, loaded.sampling.seed)?;
            let records = run_verify(m, &points, loaded.tolerances.verify, inject_fault.as_deref())?;
            let c = run_classify(m, &points, loaded.tolerances.flatness, None)?;
            let mut report = Report::new("report", &loaded, m, loaded.sampling, loaded.tolerances, records, Some(c));
            report.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
            std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            let mut written = Vec::new();
            for f in &format {
                let (name, body) = match f {
                    Format::Json => ("report.json", report.to_json()?),
                    Format::Txt => ("report.txt", report.to_text()),
                    Format::Csv => ("residuals.csv", to_csv(&points, &residual_fields(m, &points)?)?),
                };
                let path = dir.join(name);
                std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
                written.push(path);
            }
            for p in written {
                writeln!(out, "wrote {}", p.display())?;
            }
            writeln!(out, "{} of {} records passed", report.summary.passed, report.summary.total)?;
            Ok(exit_for(&report))
        }
        Command::Presets {
            action: PresetAction::List,
        } => {
            for (name, text) in model_file::preset_table() {
                writeln!(out, "{name:<10} {text}")?;
            }
            Ok(EXIT_PASS)
        }
        Command::Schema => {
            write!(out, "{REPORT_SCHEMA}")?;
            Ok(EXIT_PASS)
        }
    }
}
