//! `qssm`: run state-learning experiments from a configuration file.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Command, ExperimentConfig, Overrides};
use error::CliError;

#[derive(Parser)]
#[command(name = "qssm", version, about = "Sequential scattering state learning experiments")]
struct Cli {
    #[command(subcommand)]
    action: Action,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML or JSON experiment file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Top-level seed; overrides every seed in the file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for the parallel parts.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Action {
    /// Run the command named in the config file.
    Run(Common),
    /// Train the scattering model.
    Learn(Common),
    /// Train a single global circuit on the same target.
    LearnGlobal(Common),
    /// Gradient-variance sweep.
    Variance(Common),
    /// Noisy training with shot-estimated costs.
    Noisy(Common),
    /// Print the Schmidt rank sequence of the target.
    RankSeq(Common),
    /// Monte-Carlo check of the Haar moment identities.
    HaarCheck(Common),
    /// Compare two `summary.json` files from learn / learn-global runs.
    Compare {
        first: PathBuf,
        second: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Cost level that counts as reached.
        #[arg(long, default_value_t = 1e-3)]
        threshold: f64,
    },
}

fn experiment(common: &Common, command: Option<Command>) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    cfg.apply(&Overrides { command, seed: common.seed, out: common.out.clone(), threads: common.threads });
    Ok(cfg)
}

fn dispatch(action: Action) -> (Result<serde_json::Value, CliError>, Option<PathBuf>) {
    let (common, command) = match action {
        Action::Compare { first, second, out, threshold } => {
            let out = out.unwrap_or_else(|| PathBuf::from("out"));
            let res = std::fs::create_dir_all(&out)
                .map_err(CliError::from)
                .and_then(|_| commands::compare(&first, &second, threshold))
                .and_then(|c| {
                    commands::write_json(&out.join("comparison.json"), &c)?;
                    Ok(serde_json::to_value(c)?)
                });
            return (res, Some(out));
        }
        Action::Run(c) => (c, None),
        Action::Learn(c) => (c, Some(Command::Learn)),
        Action::LearnGlobal(c) => (c, Some(Command::LearnGlobal)),
        Action::Variance(c) => (c, Some(Command::Variance)),
        Action::Noisy(c) => (c, Some(Command::Noisy)),
        Action::RankSeq(c) => (c, Some(Command::RankSeq)),
        Action::HaarCheck(c) => (c, Some(Command::HaarCheck)),
    };
    let cfg = match experiment(&common, command) {
        Ok(c) => c,
        Err(e) => return (Err(e), common.out.clone()),
    };
    let out = Some(cfg.out_dir());
    if let Some(t) = cfg.threads.filter(|&t| t > 0) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            return (Err(CliError::Io(e.to_string())), out);
        }
    }
    (commands::run(&cfg), out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (result, out) = dispatch(cli.action);
    match result {
        Ok(summary) => {
            if let Some(f) = summary.get("fidelity") {
                eprintln!("fidelity {f}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let report = serde_json::to_string_pretty(&e.report()).unwrap_or_else(|_| e.to_string());
            eprintln!("{report}");
            if let Some(dir) = out {
                if std::fs::create_dir_all(&dir).is_ok() {
                    let _ = std::fs::write(dir.join("error.json"), &report);
                }
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
