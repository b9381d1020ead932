//! Command-line front end: one subcommand per pipeline stage, each reading
//! and writing artifacts in a run directory.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::artifacts::RunDir;
use crate::commands::{
    CorpusArgs, Context, ExtractArgs, FaithfulnessArgs, FramingArgs, IngestArgs, TrainArgs,
};
use crate::config::PipelineConfig;
use crate::error::CliResult;

#[derive(Debug, Parser)]
#[command(name = "opframe", version, about = "Opinion-framing analysis pipeline")]
pub struct Cli {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Run directory for artifacts.
    #[arg(long, global = true, default_value = "run")]
    pub out_dir: PathBuf,
    /// Overrides the root seed from the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Combine artifacts produced under different configurations.
    #[arg(long, global = true)]
    pub force: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Filter and deduplicate the article collection.
    Corpus(CorpusArgs),
    /// Extract opinion tuples from dependency parses.
    Extract(ExtractArgs),
    /// Aggregate crowd annotations into item labels.
    Aggregate,
    /// Fit the ordinal model of annotator covariates.
    Demographics,
    /// Estimate held-out human annotator accuracy.
    HumanPerf,
    /// Train the linear stance classifier.
    TrainStance(TrainArgs),
    /// Label extracted tuples with the trained classifier.
    Classify,
    /// Import stance labels produced elsewhere.
    IngestLabels(IngestArgs),
    /// Score the classifier on its held-out split.
    Eval,
    /// Framing-device statistics and coverage.
    Framing(FramingArgs),
    /// Attribution faithfulness against the entity roster.
    Faithfulness(FaithfulnessArgs),
    /// Assemble a JSON and Markdown summary of the run.
    Report,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Corpus(_) => "corpus",
            Command::Extract(_) => "extract",
            Command::Aggregate => "aggregate",
            Command::Demographics => "demographics",
            Command::HumanPerf => "human-perf",
            Command::TrainStance(_) => "train-stance",
            Command::Classify => "classify",
            Command::IngestLabels(_) => "ingest-labels",
            Command::Eval => "eval",
            Command::Framing(_) => "framing",
            Command::Faithfulness(_) => "faithfulness",
            Command::Report => "report",
        }
    }
}

/// Loads, overrides, hashes and validates the configuration.
pub fn prepare_config(path: Option<&Path>, seed: Option<u64>) -> CliResult<(PipelineConfig, String)> {
    let mut config = match path {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = seed {
        config.seed = s;
    }
    let hash = config.hash();
    if let Some(p) = path {
        config.resolve_paths(p.parent().unwrap_or(Path::new(".")));
    }
    config.validate()?;
    Ok((config, hash))
}

fn dispatch(cli: &Cli, ctx: &Context) -> CliResult<()> {
    use commands as c;
    match &cli.command {
        Command::Corpus(a) => c::corpus(ctx, a),
        Command::Extract(a) => c::extract(ctx, a),
        Command::Aggregate => c::aggregate(ctx),
        Command::Demographics => c::demographics(ctx),
        Command::HumanPerf => c::human_perf(ctx),
        Command::TrainStance(a) => c::train_stance(ctx, a),
        Command::Classify => c::classify(ctx),
        Command::IngestLabels(a) => c::ingest_labels(ctx, a),
        Command::Eval => c::eval(ctx),
        Command::Framing(a) => c::framing(ctx, a),
        Command::Faithfulness(a) => c::faithfulness(ctx, a),
        Command::Report => c::report(ctx),
    }
}

/// Runs a parsed command line and returns the process exit status.
pub fn execute(cli: &Cli) -> i32 {
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return 1;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already configured: {e}");
        }
    }
    let result = prepare_config(cli.config.as_deref(), cli.seed).and_then(|(config, hash)| {
        let ctx = Context {
            run: RunDir {
                root: cli.out_dir.clone(),
                config_hash: hash,
                seed: config.seed,
                force: cli.force,
            },
            config,
        };
        ctx.run.log_run(&format!("start {} config={}", cli.command.name(), ctx.run.config_hash));
        let r = dispatch(cli, &ctx);
        let status = match &r {
            Ok(()) => "ok".to_string(),
            Err(e) => format!("exit={} {e}", e.exit_code()),
        };
        ctx.run.log_run(&format!("end {} {status}", cli.command.name()));
        r
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Parses arguments and runs; usage errors exit 1.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .try_init();
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(&cli),
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            code
        }
    }
}
