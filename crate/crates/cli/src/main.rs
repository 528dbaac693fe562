use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use tandem_cli::synth::{self, SynthOptions};
use tandem_cli::{pipeline, Experiment};

#[derive(Parser)]
#[command(name = "tandem", version, about = "MFCC / local-feature tandem phoneme recognition experiments")]
struct Cli {
    /// Worker threads for per-utterance stages (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Only report warnings and errors.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct StageArgs {
    /// Experiment config (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Override a config key, e.g. `--set hmm.mixtures=[1,2]`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Compute MFCC39 / LF25 feature files.
    Extract(StageArgs),
    /// Train the network on the training features.
    TrainMln(StageArgs),
    /// Write per-frame network outputs for every utterance.
    Posteriors(StageArgs),
    /// Train the HMM mixture ladder on the training posteriors.
    TrainHmm(StageArgs),
    /// Phone-loop decode every utterance at every mixture rung.
    Decode(StageArgs),
    /// Score the decodes and write results.csv.
    Score(StageArgs),
    /// Run every stage in order.
    RunAll(StageArgs),
    /// Generate a synthetic corpus with manifests and a config.
    Synth {
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        train: usize,
        #[arg(long, default_value_t = 50)]
        test: usize,
        /// Phonemes besides `sil`.
        #[arg(long, default_value_t = 5)]
        phonemes: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

fn run(cli: Cli) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build_global()
        .context("starting the worker pool")?;
    let stage = |args: &StageArgs, f: fn(&Experiment) -> Result<()>| -> Result<()> {
        let exp = Experiment::from_file(&args.config, &args.overrides)?;
        f(&exp)
    };
    match &cli.command {
        Command::Extract(a) => stage(a, pipeline::extract),
        Command::TrainMln(a) => stage(a, pipeline::train_mln),
        Command::Posteriors(a) => stage(a, pipeline::posteriors),
        Command::TrainHmm(a) => stage(a, pipeline::train_hmm),
        Command::Decode(a) => stage(a, pipeline::decode),
        Command::Score(a) => stage(a, |e| pipeline::score(e).map(drop)),
        Command::RunAll(a) => stage(a, |e| pipeline::run_all(e).map(drop)),
        Command::Synth {
            out,
            train,
            test,
            phonemes,
            seed,
        } => {
            let opts = SynthOptions {
                train: *train,
                test: *test,
                phonemes: *phonemes,
                seed: *seed,
            };
            let config = synth::write_corpus(out, &opts)?;
            log::info!("synthetic corpus written; config at {}", config.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::from(1)
        }
    }
}
