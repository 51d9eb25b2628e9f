use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use weatherpair_core::manifest::{
    load_annotations, save_state, split_file_name, split_manifest_bytes, write_atomic,
    write_trajectories, SCHEMA_VERSION,
};
use weatherpair_core::pipeline::{ensure_pairs, STATE_FILE};
use weatherpair_core::stats::{DistributionReport, ReportOptions, STATIONARY_THRESHOLD};
use weatherpair_core::synthetic::{generate, SynthConfig};
use weatherpair_core::{
    distribution_report, generate_splits, load_state, run_pipeline, write_outputs, Error,
    RunConfig,
};

pub const EXIT_ERROR: u8 = 1;
pub const EXIT_REVIEW_PENDING: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "weatherpair", version, about = "Pair snowy and clear driving logs by spatial coverage")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Matching pipeline.
    #[command(subcommand)]
    Pipeline(PipelineCommand),
    /// Human review service.
    #[command(subcommand)]
    Review(ReviewCommand),
    /// Training split generation.
    #[command(subcommand)]
    Splits(SplitsCommand),
    /// Annotation distribution statistics for two domains.
    Stats(StatsArgs),
    /// Write a synthetic trajectory corpus.
    Synth(SynthArgs),
}

#[derive(Debug, Subcommand)]
pub enum PipelineCommand {
    Run(PipelineArgs),
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// TOML run config; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data_dir: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum ReviewCommand {
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub state: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8717")]
    pub bind: String,
}

#[derive(Debug, Subcommand)]
pub enum SplitsCommand {
    Generate(SplitArgs),
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub state: PathBuf,
    /// Snowy share of the training labels; clear gets the rest.
    #[arg(long)]
    pub fraction_snowy: f64,
    /// Where to write the manifest; defaults to the state file's directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub snowy: PathBuf,
    #[arg(long)]
    pub clear: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Restrict track speeds to one category, e.g. `Car`.
    #[arg(long)]
    pub category: Option<String>,
    #[arg(long, default_value_t = STATIONARY_THRESHOLD)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 74)]
    pub snowy: usize,
    #[arg(long, default_value_t = 400)]
    pub clear: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

/// Successful command result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Done,
    ReviewPending(usize),
}

impl Status {
    pub fn exit_code(self) -> ExitCode {
        match self {
            Status::Done => ExitCode::SUCCESS,
            Status::ReviewPending(_) => ExitCode::from(EXIT_REVIEW_PENDING),
        }
    }
}

pub fn run(cli: Cli) -> anyhow::Result<Status> {
    match cli.command {
        Command::Pipeline(PipelineCommand::Run(a)) => pipeline_run(&a),
        Command::Review(ReviewCommand::Serve(a)) => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(crate::review::serve(&a.state, &a.bind))?;
            Ok(Status::Done)
        }
        Command::Splits(SplitsCommand::Generate(a)) => splits_generate(&a),
        Command::Stats(a) => stats(&a),
        Command::Synth(a) => synth(&a),
    }
}

/// Runs the pipeline. An existing state file in the output directory
/// contributes its human decisions.
pub fn pipeline_run(args: &PipelineArgs) -> anyhow::Result<Status> {
    let config = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if !args.data_dir.is_dir() {
        bail!("data directory {} does not exist", args.data_dir.display());
    }
    let state_path = args.out_dir.join(STATE_FILE);
    let previous = if state_path.exists() {
        Some(load_state(&state_path).with_context(|| "reading previous state")?)
    } else {
        None
    };
    let run = run_pipeline(&config, &args.data_dir, previous.as_ref())?;
    write_outputs(&run, &args.out_dir)?;
    let pending = run.pending();
    println!(
        "{} snowy sequences: {} paired, {} pending review",
        run.state.outcomes.len(),
        run.state.pairs.len(),
        pending
    );
    if pending > 0 {
        println!("review pending: {pending}");
        Ok(Status::ReviewPending(pending))
    } else {
        Ok(Status::Done)
    }
}

pub fn splits_generate(args: &SplitArgs) -> anyhow::Result<Status> {
    let mut state = load_state(&args.state)?;
    let pending = state.pending().count();
    if pending > 0 {
        eprintln!("refusing to generate splits: {pending} outcomes pending review");
        return Ok(Status::ReviewPending(pending));
    }
    ensure_pairs(&mut state)?;
    let manifest = match generate_splits(&state, args.fraction_snowy) {
        Ok(m) => m,
        Err(Error::PendingReviews(n)) => return Ok(Status::ReviewPending(n)),
        Err(e) => return Err(e.into()),
    };
    let out_dir = match &args.out_dir {
        Some(d) => d.clone(),
        None => args
            .state
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default(),
    };
    fs::create_dir_all(&out_dir)?;
    let path = out_dir.join(split_file_name(args.fraction_snowy));
    write_atomic(&path, &split_manifest_bytes(&manifest))?;

    let s = &manifest.summary;
    println!(
        "snowy {} + clear {} = {} training labels (reference {}, {}), validation {} + {}",
        s.train_snowy,
        s.train_clear,
        s.train_total,
        s.reference_total,
        if s.within_tolerance { "within 10%" } else { "outside 10%" },
        s.validation_snowy,
        s.validation_clear
    );
    state
        .splits
        .retain(|m| m.summary.fraction_snowy != manifest.summary.fraction_snowy);
    state.splits.push(manifest);
    state
        .splits
        .sort_by(|a, b| a.summary.fraction_snowy.total_cmp(&b.summary.fraction_snowy));
    save_state(&state, &args.state)?;
    println!("wrote {}", path.display());
    Ok(Status::Done)
}

#[derive(Serialize)]
struct ReportDocument<'a> {
    schema_version: u32,
    kind: &'static str,
    #[serde(flatten)]
    report: &'a DistributionReport,
}

pub fn stats(args: &StatsArgs) -> anyhow::Result<Status> {
    let snowy = load_annotations(&args.snowy)?;
    let clear = load_annotations(&args.clear)?;
    if snowy.is_empty() || clear.is_empty() {
        bail!("both annotation files must contain records");
    }
    let options = ReportOptions {
        stationary_threshold: args.threshold,
        speed_category: args.category.clone(),
    };
    let report = distribution_report(&snowy, &clear, &options);
    fs::create_dir_all(&args.out_dir)?;
    let mut doc = serde_json::to_vec_pretty(&ReportDocument {
        schema_version: SCHEMA_VERSION,
        kind: "distribution-report",
        report: &report,
    })?;
    doc.push(b'\n');
    write_atomic(&args.out_dir.join("report.json"), &doc)?;
    for (domain, stats) in [("snowy", &report.snowy), ("clear", &report.clear)] {
        for (name, ecdf) in [
            ("point_count", &stats.point_counts),
            ("objects_per_frame", &stats.objects_per_frame),
            ("track_speed", &stats.track_speeds),
        ] {
            let mut buf = Vec::new();
            ecdf.write_csv(&mut buf)?;
            write_atomic(&args.out_dir.join(format!("ecdf_{name}_{domain}.csv")), &buf)?;
        }
    }
    let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.4}"));
    println!(
        "KS point count {}, objects per frame {}, track speed {}",
        fmt(report.ks.point_counts),
        fmt(report.ks.objects_per_frame),
        fmt(report.ks.track_speeds)
    );
    Ok(Status::Done)
}

pub fn synth(args: &SynthArgs) -> anyhow::Result<Status> {
    let config = SynthConfig {
        seed: args.seed,
        snowy: args.snowy,
        clear: args.clear,
        ..SynthConfig::default()
    };
    let set = generate(&config);
    write_trajectories(&args.out_dir, &set)?;
    println!(
        "wrote {} sequences to {}",
        set.sequences.len(),
        args.out_dir.display()
    );
    Ok(Status::Done)
}
