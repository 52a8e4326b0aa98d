//! Experiment configuration files (TOML or JSON) and their validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qssm::baseline::VarianceExperimentConfig;
use qssm::noisy::{NoiseModel, NoisyTrainConfig, ShotEstimator, MAX_NOISY_REGISTERS};
use qssm::rng::split_seed;
use qssm::targets::TargetSpec;
use qssm::TrainConfig;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Learn,
    LearnGlobal,
    Variance,
    Noisy,
    RankSeq,
    HaarCheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Learn => "learn",
            Command::LearnGlobal => "learn-global",
            Command::Variance => "variance",
            Command::Noisy => "noisy",
            Command::RankSeq => "rank-seq",
            Command::HaarCheck => "haar-check",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HaarCheckConfig {
    pub dims: Vec<usize>,
    pub samples: usize,
    pub seed: u64,
}

impl Default for HaarCheckConfig {
    fn default() -> Self {
        Self { dims: vec![2, 4], samples: 100_000, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankConfig {
    /// Singular values at or below this are treated as zero.
    pub tol: f64,
}

impl Default for RankConfig {
    fn default() -> Self {
        Self { tol: 1e-10 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Option<Command>,
    /// Top-level seed; when set it replaces every section seed.
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub target: Option<TargetSpec>,
    pub train: TrainConfig,
    pub variance: Option<VarianceExperimentConfig>,
    pub noise: NoiseModel,
    pub shots: ShotEstimator,
    pub noisy: NoisyTrainConfig,
    pub haar: HaarCheckConfig,
    pub rank: RankConfig,
}

/// Overrides given on the command line; they win over file values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub command: Option<Command>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
}

/// Shot streams live on their own branch of the top-level seed.
const SHOT_STREAM: u64 = 1;

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        } else {
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if o.command.is_some() {
            self.command = o.command;
        }
        if o.seed.is_some() {
            self.seed = o.seed;
        }
        if o.out.is_some() {
            self.out = o.out.clone();
        }
        if o.threads.is_some() {
            self.threads = o.threads;
        }
        if let Some(s) = self.seed {
            self.train.seed = s;
            self.noisy.seed = s;
            self.haar.seed = s;
            self.shots.seed = split_seed(s, SHOT_STREAM);
            if let Some(v) = self.variance.as_mut() {
                v.seed = s;
            }
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    /// Every violated field for the selected command.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let Some(cmd) = self.command else {
            v.push("command must be one of learn, learn-global, variance, noisy, rank-seq, haar-check".into());
            return v;
        };
        if self.threads == Some(0) {
            v.push("threads must be >= 1".into());
        }
        let needs_target = matches!(cmd, Command::Learn | Command::LearnGlobal | Command::Noisy | Command::RankSeq);
        if needs_target {
            match &self.target {
                None => v.push("target is required".into()),
                Some(t) => v.extend(t.violations()),
            }
        }
        match cmd {
            Command::Learn | Command::LearnGlobal => {
                v.extend(self.train.violations().into_iter().map(|m| format!("train.{m}")));
            }
            Command::Variance => match &self.variance {
                None => v.push("variance section is required".into()),
                Some(c) => v.extend(c.violations()),
            },
            Command::Noisy => {
                v.extend(self.noisy.violations());
                v.extend(self.noise.violations());
                if let Some(n) = self.target.as_ref().and_then(target_size) {
                    if n > MAX_NOISY_REGISTERS {
                        v.push(format!("target.n must be <= {MAX_NOISY_REGISTERS} for noisy runs (got {n})"));
                    }
                }
            }
            Command::RankSeq => {
                if !(self.rank.tol > 0.0) {
                    v.push(format!("rank.tol must be > 0 (got {})", self.rank.tol));
                }
            }
            Command::HaarCheck => {
                if self.haar.dims.is_empty() || self.haar.dims.iter().any(|&d| d < 2) {
                    v.push("haar.dims must be a nonempty list of values >= 2".into());
                }
                if self.haar.samples == 0 {
                    v.push("haar.samples must be >= 1".into());
                }
            }
        }
        v
    }
}

fn target_size(t: &TargetSpec) -> Option<usize> {
    match t {
        TargetSpec::Ghz { n }
        | TargetSpec::HeisenbergXxx { n }
        | TargetSpec::HeisenbergXxz { n, .. }
        | TargetSpec::Gaussian { n, .. }
        | TargetSpec::HaarRandom { n, .. } => Some(*n),
        TargetSpec::File { n, .. } => *n,
    }
}
