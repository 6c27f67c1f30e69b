use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mee::config::{parse_config, Command};
use mee::error::Error;
use mee::run::execute;

#[derive(Parser)]
#[command(name = "mee", version, about = "Minimum error entropy regression experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit a hypothesis to a dataset file or to a fresh sample.
    Fit(Args),
    /// Population Renyi entropy of a hypothesis.
    Entropy(Args),
    /// Population information potential V of a hypothesis.
    Oracle(Args),
    /// Closed-form decomposition for the two-interval model.
    Counterexample(Args),
    /// Consistency sweep over sample sizes and seeds.
    Sweep(Args),
    /// Empirical concentration of the sample error.
    Concentration(Args),
    /// Write a synthetic `x,y` dataset.
    Generate(Args),
}

#[derive(clap::Args)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    /// Output path; overrides `out` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed; overrides `seed` in the config (and `seeds` for sweeps).
    #[arg(long)]
    seed: Option<u64>,
}

fn run(cli: Cli) -> Result<(), Error> {
    let (expected, args) = match cli.command {
        Cmd::Fit(a) => (Command::Fit, a),
        Cmd::Entropy(a) => (Command::Entropy, a),
        Cmd::Oracle(a) => (Command::Oracle, a),
        Cmd::Counterexample(a) => (Command::Counterexample, a),
        Cmd::Sweep(a) => (Command::Sweep, a),
        Cmd::Concentration(a) => (Command::Concentration, a),
        Cmd::Generate(a) => (Command::Generate, a),
    };
    let text = std::fs::read_to_string(&args.config).map_err(|e| Error::Io {
        path: args.config.clone(),
        source: e,
    })?;
    let mut cfg = parse_config(&text)?;
    if cfg.command != expected {
        return Err(Error::ConfigField {
            field: "command".into(),
            message: format!("config is for `{:?}` but `{:?}` was requested", cfg.command, expected).to_lowercase(),
        });
    }
    if let Some(out) = args.out {
        cfg.out = Some(out);
    }
    if let Some(seed) = args.seed {
        cfg.fit.seed = seed;
        cfg.seeds = vec![seed];
    }
    execute(&cfg)
}

fn main() -> ExitCode {
    if let Some(threads) = std::env::var("MEE_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // a pool can only be installed once; failure just keeps the default
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build_global();
    }
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
