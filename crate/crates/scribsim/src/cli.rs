//! Command-line surface.
//!
//! Exit codes: 0 on full success, 1 when some images failed (or a run aborted
//! on an IO error), 2 on usage and configuration errors.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use scribsim_core::distmap::DistanceKind;
use scribsim_core::loss::{EntropySign, Reduction};
use scribsim_core::synth::SimulationConfig;

use crate::convert::convert_pairs;
use crate::error::{Error, Result};
use crate::losscheck::{run_losscheck, LossCheckRequest};
use crate::manifest::load_manifest;
use crate::pipeline::{run_distmaps, run_simulate, RunReport};
use crate::stats::{compute_stats, Bins};
use crate::synthetic::{generate_dataset, SyntheticSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARTIAL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "scribsim", version, about = "Synthesize scribble annotations from instance masks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate scribbles for every image of a manifest.
    Simulate(SimulateArgs),
    /// Build distance maps from a directory of label masks.
    Distmap(DistmapArgs),
    /// Mask-ratio / scribble-ratio heatmap as CSV.
    Stats(StatsArgs),
    /// Evaluate loss kernels on tensors from disk.
    Losscheck(LossArgs),
    /// Build a manifest from paired semantic and instance-id PNGs.
    Convert(ConvertArgs),
    /// Write a seeded synthetic instance dataset.
    Demo(DemoArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Global seed; overrides `global_seed` from --config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON object overriding simulation defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Write the run report here instead of standard output.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Scribble,
    Pseudo,
}

impl From<KindArg> for DistanceKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Scribble => DistanceKind::Scribble,
            KindArg::Pseudo => DistanceKind::PseudoBoundary,
        }
    }
}

#[derive(Debug, Args)]
pub struct DistmapArgs {
    /// Directory of scribble or pseudo-label PNGs.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long, value_enum)]
    pub kind: KindArg,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory holding `<image_id>.png` scribbles.
    #[arg(long)]
    pub scribbles: PathBuf,
    /// Bins per axis.
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SignArg {
    Printed,
    Negated,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReductionArg {
    Mean,
    Sum,
}

#[derive(Debug, Args)]
pub struct LossArgs {
    #[arg(long)]
    pub logits: Option<PathBuf>,
    #[arg(long)]
    pub scribble: Option<PathBuf>,
    #[arg(long)]
    pub pseudo: Option<PathBuf>,
    #[arg(long, default_value_t = 0.2)]
    pub epsilon: f64,
    #[arg(long)]
    pub dmap: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "printed")]
    pub sign: SignArg,
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub cam_weights: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub cam_class: usize,
    #[arg(long)]
    pub lorm_mask: Option<PathBuf>,
    #[arg(long)]
    pub proj_q: Option<PathBuf>,
    /// Omit to share the query projection.
    #[arg(long)]
    pub proj_k: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    #[arg(long, value_enum, default_value = "mean")]
    pub reduction: ReductionArg,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[arg(long)]
    pub semantic: PathBuf,
    #[arg(long)]
    pub instances: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub images: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 320)]
    pub width: usize,
    #[arg(long, default_value_t = 240)]
    pub height: usize,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<SimulationConfig> {
    let mut config = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| Error::Parse {
                path: p.to_path_buf(),
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            })?
        }
        None => SimulationConfig::default(),
    };
    if let Some(s) = seed {
        config.global_seed = s;
    }
    config.validate().map_err(|e| Error::Config(e.to_string()))?;
    Ok(config)
}

fn emit_report(report: &RunReport, dest: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
    let text = report.to_json();
    match dest {
        Some(p) => fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => stdout.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e)),
    }
}

fn report_code(report: &RunReport) -> i32 {
    if report.has_errors() {
        EXIT_PARTIAL
    } else {
        EXIT_OK
    }
}

fn execute(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    match cli.command {
        Command::Simulate(a) => {
            let config = load_config(a.config.as_deref(), a.seed)?;
            let manifest = load_manifest(&a.manifest).map_err(config_if_unreadable)?;
            let report = run_simulate(&manifest, &config, &a.out, a.jobs.unwrap_or_else(default_jobs))?;
            emit_report(&report, a.report.as_deref(), stdout)?;
            Ok(report_code(&report))
        }
        Command::Distmap(a) => {
            if !a.input.is_dir() {
                return Err(Error::Config(format!("{}: not a directory", a.input.display())));
            }
            let report = run_distmaps(&a.input, a.lambda, a.kind.into(), &a.out, a.jobs.unwrap_or_else(default_jobs))?;
            emit_report(&report, a.report.as_deref(), stdout)?;
            Ok(report_code(&report))
        }
        Command::Stats(a) => {
            let manifest = load_manifest(&a.manifest).map_err(config_if_unreadable)?;
            let stats = compute_stats(&manifest, &a.scribbles, Bins::square(a.bins))?;
            let csv = stats.heatmap.to_csv();
            match &a.out {
                Some(p) => fs::write(p, csv).map_err(|e| Error::io(p, e))?,
                None => stdout.write_all(csv.as_bytes()).map_err(|e| Error::io("<stdout>", e))?,
            }
            for (id, reason) in &stats.problems {
                let _ = writeln!(stderr, "{id}: {reason}");
            }
            Ok(if stats.problems.is_empty() { EXIT_OK } else { EXIT_PARTIAL })
        }
        Command::Losscheck(a) => {
            let req = LossCheckRequest {
                logits: a.logits,
                scribble: a.scribble,
                pseudo: a.pseudo,
                epsilon: a.epsilon,
                dmap: a.dmap,
                sign: match a.sign {
                    SignArg::Printed => EntropySign::AsPrinted,
                    SignArg::Negated => EntropySign::Negated,
                },
                features: a.features,
                cam_weights: a.cam_weights,
                cam_class: a.cam_class,
                lorm_mask: a.lorm_mask,
                proj_q: a.proj_q,
                proj_k: a.proj_k,
                delta: a.delta,
                reduction: match a.reduction {
                    ReductionArg::Mean => Reduction::Mean,
                    ReductionArg::Sum => Reduction::Sum,
                },
            };
            let value = run_losscheck(&req).map_err(|e| match e {
                Error::Core(c) => Error::Config(c.to_string()),
                other => other,
            })?;
            let text = serde_json::to_string_pretty(&value).expect("json serializes") + "\n";
            stdout.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e))?;
            Ok(EXIT_OK)
        }
        Command::Convert(a) => {
            let path = convert_pairs(&a.semantic, &a.instances, &a.out)?;
            let _ = writeln!(stdout, "{}", path.display());
            Ok(EXIT_OK)
        }
        Command::Demo(a) => {
            let spec = SyntheticSpec { images: a.images, seed: a.seed, width: a.width, height: a.height, ..Default::default() };
            let path = generate_dataset(&a.out, &spec)?;
            let _ = writeln!(stdout, "{}", path.display());
            Ok(EXIT_OK)
        }
    }
}

/// A manifest that cannot be read at all is a configuration problem.
fn config_if_unreadable(e: Error) -> Error {
    match e {
        Error::Io { path, source } => Error::Config(format!("{}: {source}", path.display())),
        other => other,
    }
}

/// Parses `argv` (including the program name) and runs the command.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                return EXIT_CONFIG;
            }
            let _ = write!(stdout, "{text}");
            return EXIT_OK;
        }
    };
    match execute(cli, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            if e.is_configuration() {
                EXIT_CONFIG
            } else {
                EXIT_PARTIAL
            }
        }
    }
}
