//! One function per experiment command. Each writes its artifacts into the
//! output directory and returns the summary it wrote.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use qssm::baseline::{log2_slope, run_variance_experiment, train_global_qnn, VariancePoint};
use qssm::haar::{haar_moment_check, MomentCheck};
use qssm::noisy::train_qssm_noisy;
use qssm::qstate::rank_sequence;
use qssm::targets::TargetSpec;
use qssm::{run_qssm, TrainConfig};

use crate::config::{Command, ExperimentConfig};
use crate::error::CliError;

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct TraceRow {
    iteration: usize,
    cost: f64,
}

fn write_trace(path: &Path, trace: &[f64]) -> Result<(), CliError> {
    let rows: Vec<TraceRow> = trace.iter().enumerate().map(|(i, &c)| TraceRow { iteration: i, cost: c }).collect();
    write_csv(path, &rows)
}

/// Summary of a `learn` or `learn-global` run; also the input of `compare`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnSummary {
    pub command: String,
    pub target: TargetSpec,
    pub n: usize,
    pub fidelity: f64,
    pub widths: Vec<usize>,
    /// Cost evaluations per layer (one entry for the global circuit).
    pub iterations: Vec<usize>,
    pub converged: Vec<bool>,
    pub final_costs: Vec<f64>,
    pub traces: Vec<Vec<f64>>,
    pub train: TrainConfig,
    pub wall_seconds: f64,
}

pub fn run(cfg: &ExperimentConfig) -> Result<Value, CliError> {
    let v = cfg.violations();
    if !v.is_empty() {
        return Err(CliError::Validation(v));
    }
    let out = cfg.out_dir();
    fs::create_dir_all(&out)?;
    let cmd = cfg.command.expect("validated");
    let summary = match cmd {
        Command::Learn => serde_json::to_value(learn(cfg, &out)?)?,
        Command::LearnGlobal => serde_json::to_value(learn_global(cfg, &out)?)?,
        Command::Variance => variance(cfg, &out)?,
        Command::Noisy => noisy(cfg, &out)?,
        Command::RankSeq => rank_seq(cfg)?,
        Command::HaarCheck => haar_check(cfg, &out)?,
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

fn learn(cfg: &ExperimentConfig, out: &Path) -> Result<LearnSummary, CliError> {
    let spec = cfg.target.clone().expect("validated");
    let target = spec.build()?;
    let model = run_qssm(&target, &cfg.train)?;
    for layer in &model.layers {
        write_trace(&out.join(format!("trace_layer_{}.csv", layer.k)), &layer.trace)?;
    }
    fs::write(out.join("model.json"), model.to_json())?;
    Ok(LearnSummary {
        command: Command::Learn.name().into(),
        target: spec,
        n: model.n,
        fidelity: model.fidelity,
        widths: model.widths.clone(),
        iterations: model.iterations(),
        converged: model.layers.iter().map(|l| l.converged).collect(),
        final_costs: model.layers.iter().map(|l| *l.trace.last().expect("nonempty trace")).collect(),
        traces: model.layers.iter().map(|l| l.trace.clone()).collect(),
        train: cfg.train.clone(),
        wall_seconds: model.wall_seconds,
    })
}

fn learn_global(cfg: &ExperimentConfig, out: &Path) -> Result<LearnSummary, CliError> {
    let spec = cfg.target.clone().expect("validated");
    let target = spec.build()?;
    let res = train_global_qnn(&target, &cfg.train)?;
    write_trace(&out.join("trace_global.csv"), &res.trace)?;
    write_json(&out.join("params.json"), &json!({ "circuit": res.circuit, "params": res.params }))?;
    Ok(LearnSummary {
        command: Command::LearnGlobal.name().into(),
        target: spec,
        n: target.n(),
        fidelity: res.fidelity,
        widths: vec![target.n()],
        iterations: vec![res.trace.len()],
        converged: vec![res.converged],
        final_costs: vec![*res.trace.last().expect("nonempty trace")],
        traces: vec![res.trace],
        train: cfg.train.clone(),
        wall_seconds: res.wall_seconds,
    })
}

fn variance(cfg: &ExperimentConfig, out: &Path) -> Result<Value, CliError> {
    let vc = cfg.variance.as_ref().expect("validated");
    let points = run_variance_experiment(vc)?;
    write_csv(&out.join("variance.csv"), &points)?;
    let mut per_step = serde_json::Map::new();
    for &step in &vc.steps {
        let pts: Vec<&VariancePoint> = points.iter().filter(|p| p.step == step).collect();
        let series: Vec<(usize, f64)> = pts.iter().map(|p| (p.n, p.variance)).collect();
        let max = series.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let min = series.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let slope = (series.len() >= 2).then(|| log2_slope(&series));
        per_step.insert(
            step.name().into(),
            json!({ "log2_slope": slope, "max_over_min": max / min }),
        );
    }
    Ok(json!({
        "command": Command::Variance.name(),
        "config": vc,
        "points": points,
        "steps": per_step,
    }))
}

#[derive(Serialize)]
struct NoisyRow {
    iteration: usize,
    cost: f64,
    restart: usize,
    k: usize,
}

fn noisy(cfg: &ExperimentConfig, out: &Path) -> Result<Value, CliError> {
    let spec = cfg.target.clone().expect("validated");
    let target = spec.build()?;
    let run = train_qssm_noisy(&target, &cfg.noisy, &cfg.noise, &cfg.shots)?;
    let rows: Vec<NoisyRow> = run
        .traces
        .iter()
        .map(|t| NoisyRow { iteration: t.iteration, cost: t.cost, restart: t.restart, k: t.k })
        .collect();
    write_csv(&out.join("noisy_trace.csv"), &rows)?;
    for layer in &run.model.layers {
        write_trace(&out.join(format!("trace_layer_{}.csv", layer.k)), &layer.trace)?;
    }
    fs::write(out.join("model.json"), run.model.to_json())?;
    Ok(json!({
        "command": Command::Noisy.name(),
        "target": spec,
        "n": run.model.n,
        "fidelity": run.model.fidelity,
        "noisy_fidelity": run.noisy_fidelity,
        "widths": run.model.widths,
        "iterations": run.model.iterations(),
        "chosen_restarts": run.chosen_restarts,
        "final_costs": run.final_costs,
        "distribution": run.model.final_state.probabilities(),
        "target_distribution": target.probabilities(),
        "noisy": cfg.noisy,
        "noise": cfg.noise,
        "shots": cfg.shots,
        "wall_seconds": run.model.wall_seconds,
    }))
}

fn rank_seq(cfg: &ExperimentConfig) -> Result<Value, CliError> {
    let spec = cfg.target.clone().expect("validated");
    let seq = rank_sequence(&spec.build()?, cfg.rank.tol)?;
    let text: Vec<String> = seq.ranks.iter().map(|r| r.to_string()).collect();
    println!("{{{}}}", text.join(","));
    Ok(json!({
        "command": Command::RankSeq.name(),
        "target": spec,
        "ranks": seq.ranks,
        "tolerance": seq.tolerance,
    }))
}

fn haar_check(cfg: &ExperimentConfig, out: &Path) -> Result<Value, CliError> {
    let mut rows: Vec<MomentCheck> = Vec::new();
    for (i, &d) in cfg.haar.dims.iter().enumerate() {
        rows.extend(haar_moment_check(d, cfg.haar.samples, qssm::rng::split_seed(cfg.haar.seed, i as u64))?);
    }
    write_csv(&out.join("haar.csv"), &rows)?;
    let worst = rows.iter().map(|r| r.rel_error).fold(0.0, f64::max);
    Ok(json!({
        "command": Command::HaarCheck.name(),
        "checks": rows,
        "max_rel_error": worst,
    }))
}

/// Differences between a scattering run and a global run on the same target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub target: TargetSpec,
    pub threshold: f64,
    pub first_fidelity: f64,
    pub second_fidelity: f64,
    /// `first − second`.
    pub fidelity_delta: f64,
    pub first_iterations_to_threshold: Option<usize>,
    pub second_iterations_to_threshold: Option<usize>,
    pub iterations_to_threshold_delta: Option<i64>,
    pub first_total_iterations: usize,
    pub second_total_iterations: usize,
    pub total_iterations_delta: i64,
}

/// Evaluations until every layer's cost first drops to `threshold`, summed
/// over layers; `None` if some layer never gets there.
pub fn iterations_to_threshold(s: &LearnSummary, threshold: f64) -> Option<usize> {
    s.traces
        .iter()
        .map(|t| t.iter().position(|&c| c <= threshold).map(|i| i + 1))
        .sum()
}

pub fn compare(first: &Path, second: &Path, threshold: f64) -> Result<Comparison, CliError> {
    let load = |p: &Path| -> Result<LearnSummary, CliError> {
        let text = fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
    };
    let (a, b) = (load(first)?, load(second)?);
    if a.target != b.target {
        return Err(CliError::Mismatch(format!("targets differ: {:?} vs {:?}", a.target, b.target)));
    }
    if a.train.max_iters != b.train.max_iters {
        return Err(CliError::Mismatch(format!(
            "iteration budgets differ: {} vs {}",
            a.train.max_iters, b.train.max_iters
        )));
    }
    let (ta, tb) = (iterations_to_threshold(&a, threshold), iterations_to_threshold(&b, threshold));
    let (na, nb): (usize, usize) = (a.iterations.iter().sum(), b.iterations.iter().sum());
    Ok(Comparison {
        target: a.target.clone(),
        threshold,
        first_fidelity: a.fidelity,
        second_fidelity: b.fidelity,
        fidelity_delta: a.fidelity - b.fidelity,
        first_iterations_to_threshold: ta,
        second_iterations_to_threshold: tb,
        iterations_to_threshold_delta: ta.zip(tb).map(|(x, y)| x as i64 - y as i64),
        first_total_iterations: na,
        second_total_iterations: nb,
        total_iterations_delta: na as i64 - nb as i64,
    })
}

