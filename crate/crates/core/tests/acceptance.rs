//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p qssm --test acceptance`. Set `QSSM_ACCEPT` to a
//! comma-separated list of criterion numbers to run a subset. A failed
//! criterion is reported but only fails the process when `QSSM_ACCEPT_STRICT`
//! is set, so the rest of the workspace tests still run.

use std::time::Instant;

use nalgebra::DMatrix;
use qssm::baseline::{
    last_cut_weights, log2_slope, prop_s1_closed_form, run_variance_experiment, sample_gradients, sample_stats,
    train_global_qnn, StepSelector, TargetFamily, VarianceExperimentConfig,
};
use qssm::circuit::{apply_circuit, build_hea, random_params, ParamCircuit};
use qssm::haar::haar_moment_check;
use qssm::noisy::{train_qssm_noisy, NoiseModel, NoisyTrainConfig, ShotEstimator};
use qssm::qstate::{fidelity_pure, hs_cost, partial_trace_keep_prefix, rank_sequence, zero_state};
use qssm::rng::stream_rng;
use qssm::scattering::{analytic_gradient, layer_cost, WidthMode};
use qssm::targets::{gaussian_state, ghz, haar_random_state, heisenberg_ground};
use qssm::{run_qssm, StateVector, TrainConfig, C64};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Layer `k` of width `w` placed on registers `k..k+w-1`.
fn layer(k: usize, w: usize, d: usize) -> ParamCircuit {
    build_hea(w, d).unwrap().at_offset(k).unwrap()
}

/// Central differences computed here rather than through the library.
fn central_difference(k: usize, psi: &StateVector, l: &ParamCircuit, params: &[f64], target: &StateVector, h: f64) -> Vec<f64> {
    (0..params.len())
        .map(|mu| {
            let mut p = params.to_vec();
            p[mu] += h;
            let up = layer_cost(k, psi, l, &p, target).unwrap();
            p[mu] -= 2.0 * h;
            let down = layer_cost(k, psi, l, &p, target).unwrap();
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let mut instances = 0;
    let mut worst = 0.0f64;
    for seed in [11u64, 12] {
        for n in 2..=5 {
            for k in 1..=n {
                for w in 1..=(n - k + 1) {
                    let id = (n * 100 + k * 10 + w) as u64;
                    let psi = haar_random_state(n, seed * 1000 + id).unwrap();
                    let target = haar_random_state(n, seed * 1000 + id + 500).unwrap();
                    let l = layer(k, w, 2);
                    let params = random_params(l.n_params(), &mut stream_rng(seed, id));
                    let a = analytic_gradient(k, &psi, &l, &params, &target).unwrap();
                    let f = central_difference(k, &psi, &l, &params, &target, 1e-5);
                    for (x, y) in a.iter().zip(&f) {
                        worst = worst.max((x - y).abs());
                    }
                    instances += 1;
                }
            }
        }
    }
    outcome(instances >= 50 && worst < 1e-6, format!("{instances} instances, max |analytic - fd| = {worst:.2e}"))
}

fn criterion_2() -> Outcome {
    let samples = 10_000;
    let exact_ghz = 2.0 / 3.0;
    let xs = sample_gradients(&ghz(4).unwrap(), StepSelector::Last, 2, samples, 21).unwrap();
    let v_ghz = sample_stats(&xs).1;
    let ghz_ok = (v_ghz - exact_ghz).abs() / exact_ghz < 0.05;
    let (lo, hi) = (16.0 / 27.0 * 0.9, 8.0 / 9.0 * 1.1);
    let mut in_band = 0;
    let mut worst_closed = 0.0f64;
    for s in 0..20u64 {
        let t = haar_random_state(4, 700 + s).unwrap();
        let v = sample_stats(&sample_gradients(&t, StepSelector::Last, 2, samples, 800 + s).unwrap()).1;
        if (lo..=hi).contains(&v) {
            in_band += 1;
        }
        let closed = prop_s1_closed_form(last_cut_weights(&t).unwrap().0).unwrap();
        worst_closed = worst_closed.max((v - closed).abs() / closed);
    }
    outcome(
        ghz_ok && in_band == 20,
        format!(
            "GHZ_4 variance {v_ghz:.4} vs 2/3 ({:.1}%), {in_band}/20 random targets in [{lo:.3}, {hi:.3}], worst gap to closed form {:.1}%",
            100.0 * (v_ghz - exact_ghz).abs() / exact_ghz,
            100.0 * worst_closed
        ),
    )
}

fn criterion_3() -> Outcome {
    let cfg = VarianceExperimentConfig {
        family: TargetFamily::Ghz,
        n_values: vec![4, 6, 8, 10],
        steps: vec![StepSelector::Middle, StepSelector::Global],
        samples: 500,
        seed: 31,
        w_max: 2,
    };
    let pts = run_variance_experiment(&cfg).unwrap();
    let series = |step| pts.iter().filter(|p| p.step == step).map(|p| (p.n, p.variance)).collect::<Vec<_>>();
    let global = series(StepSelector::Global);
    let middle = series(StepSelector::Middle);
    let slope = log2_slope(&global);
    let max = middle.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let min = middle.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let widths_ok = pts.iter().filter(|p| p.step == StepSelector::Middle).all(|p| p.width == 2);
    outcome(
        (-2.5..=-0.5).contains(&slope) && max / min < 3.0 && widths_ok,
        format!("global log2 slope {slope:.3}, QSSM width-2 max/min {:.3}", max / min),
    )
}

fn criterion_4() -> Outcome {
    let mut worst = 0.0f64;
    let mut lines = Vec::new();
    for (i, d) in [2usize, 4].into_iter().enumerate() {
        for c in haar_moment_check(d, 100_000, 41 + i as u64).unwrap() {
            worst = worst.max(c.rel_error);
            lines.push(format!("d={} {} {:.2}%", c.d, c.identity, 100.0 * c.rel_error));
        }
    }
    outcome(worst < 0.02, format!("max relative error {:.2}% ({})", 100.0 * worst, lines.join(", ")))
}

fn paper_train(seed: u64, w_max: usize) -> TrainConfig {
    TrainConfig { depth: 20, learning_rate: 0.1, max_iters: 200, cost_tol: 0.0, w_max, seed, ..TrainConfig::default() }
}

fn criterion_5() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for n in [4, 8] {
        let m = run_qssm(&ghz(n).unwrap(), &paper_train(51, 2)).unwrap();
        let max_its = m.iterations().into_iter().max().unwrap();
        pass &= m.fidelity >= 0.99 && max_its <= 200;
        parts.push(format!("GHZ_{n} {:.5}", m.fidelity));
    }
    let bell = ghz(2).unwrap().tensor(&zero_state(4).unwrap()).unwrap();
    let cfg = TrainConfig { width_mode: WidthMode::RankBased { tol: 1e-10 }, ..paper_train(52, usize::MAX) };
    let m = run_qssm(&bell, &cfg).unwrap();
    pass &= m.fidelity >= 0.999;
    parts.push(format!("Bell x |0000> {:.6} widths {:?}", m.fidelity, m.widths));
    outcome(pass, parts.join(", "))
}

fn criterion_6() -> Outcome {
    let targets = [
        ("GHZ_8", ghz(8).unwrap(), 2),
        ("XXX_8", heisenberg_ground(8, 1.0).unwrap().0, 4),
        ("Gaussian_8", gaussian_state(8, 127.5, 32.0).unwrap(), 4),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, t, w_max) in targets {
        let cfg = paper_train(61, w_max);
        let q = run_qssm(&t, &cfg).unwrap();
        let g = train_global_qnn(&t, &cfg).unwrap();
        let ok = q.fidelity >= g.fidelity;
        pass &= ok;
        parts.push(format!("{name} qssm {:.5} global {:.5}{}", q.fidelity, g.fidelity, if ok { "" } else { " (lost)" }));
    }
    outcome(pass, parts.join(", "))
}

fn criterion_7() -> Outcome {
    let target = ghz(4).unwrap();
    let noise = NoiseModel::default();
    let mut fids = Vec::new();
    for seed in 0..10u64 {
        let cfg = NoisyTrainConfig { seed: 70 + seed, ..NoisyTrainConfig::default() };
        let shots = ShotEstimator { seed: 170 + seed, ..ShotEstimator::default() };
        fids.push(train_qssm_noisy(&target, &cfg, &noise, &shots).unwrap().model.fidelity);
    }
    let good = fids.iter().filter(|&&f| f >= 0.85).count();
    let text: Vec<String> = fids.iter().map(|f| format!("{f:.3}")).collect();
    outcome(good >= 8, format!("{good}/10 runs with fidelity >= 0.85 [{}]", text.join(" ")))
}

/// Schmidt ranks from a dense SVD of each prefix reshaping, built here.
fn dense_ranks(psi: &StateVector, tol: f64) -> Vec<usize> {
    let n = psi.n();
    let amps = psi.amplitudes();
    (1..=n)
        .map(|k| {
            let cols = 1usize << (n - k);
            let m = DMatrix::<C64>::from_fn(1 << k, cols, |r, c| amps[r * cols + c]);
            m.svd(false, false).singular_values.iter().filter(|&&s| s > tol).count()
        })
        .collect()
}

fn criterion_8() -> Outcome {
    let mut locality = 0.0f64;
    let mut norm = 0.0f64;
    let mut identity = 0.0f64;
    for (i, target) in [haar_random_state(5, 81).unwrap(), ghz(5).unwrap()].iter().enumerate() {
        let cfg = TrainConfig { depth: 3, max_iters: 20, seed: 80 + i as u64, w_max: 3, ..TrainConfig::default() };
        let m = run_qssm(target, &cfg).unwrap();
        let mut psi = zero_state(5).unwrap();
        for l in &m.layers {
            let next = apply_circuit(&psi, &l.circuit, &l.params).unwrap();
            norm = norm.max((next.norm() - 1.0).abs());
            if l.k > 1 {
                let a = partial_trace_keep_prefix(&psi, l.k - 1).unwrap();
                let b = partial_trace_keep_prefix(&next, l.k - 1).unwrap();
                let diff = a.entries().iter().zip(b.entries()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
                locality = locality.max(diff);
            }
            psi = next;
        }
        let f = fidelity_pure(&psi, target).unwrap();
        identity = identity.max((hs_cost(&psi, target, 5).unwrap() - (2.0 - 2.0 * f)).abs());
    }
    let mut rank_mismatch = 0;
    let mut cases = 0;
    for n in 1..=8 {
        let mut states = vec![zero_state(n).unwrap(), haar_random_state(n, 90 + n as u64).unwrap()];
        if n >= 2 {
            states.push(ghz(n).unwrap());
            states.push(heisenberg_ground(n, 1.0).unwrap().0);
        }
        if n >= 3 {
            states.push(ghz(2).unwrap().tensor(&zero_state(n - 2).unwrap()).unwrap());
        }
        for s in &states {
            cases += 1;
            if rank_sequence(s, 1e-10).unwrap().ranks != dense_ranks(s, 1e-10) {
                rank_mismatch += 1;
            }
        }
    }
    outcome(
        locality <= 1e-9 && norm <= 1e-9 && identity <= 1e-9 && rank_mismatch == 0,
        format!(
            "prefix drift {locality:.1e}, norm drift {norm:.1e}, |C_n - (2 - 2F)| {identity:.1e}, rank mismatches {rank_mismatch}/{cases}"
        ),
    )
}

fn main() {
    let criteria: [(usize, &str, fn() -> Outcome); 8] = [
        (1, "analytic gradient matches finite differences", criterion_1),
        (2, "last-step variance closed form", criterion_2),
        (3, "variance scaling", criterion_3),
        (4, "Haar moment identities", criterion_4),
        (5, "effectiveness on GHZ and Bell", criterion_5),
        (6, "scattering model vs global circuit", criterion_6),
        (7, "noisy GHZ_4", criterion_7),
        (8, "structural invariants", criterion_8),
    ];
    let only: Option<Vec<usize>> = std::env::var("QSSM_ACCEPT")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failed = 0;
    for (id, name, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        let start = Instant::now();
        let o = f();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {id}: {verdict} {name}: {} [{:.1}s]", o.detail, start.elapsed().as_secs_f64());
        if !o.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        if std::env::var_os("QSSM_ACCEPT_STRICT").is_some() {
            std::process::exit(1);
        }
    }
}
