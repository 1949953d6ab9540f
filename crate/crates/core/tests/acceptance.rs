//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero if any fail.

use std::collections::BTreeSet;
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ccnn::analysis::{complexity_profile, measured_factors, ChannelRule, Scheme};
use ccnn::nn::{convert_to_ccnn, LayerGraph};
use ccnn::sampler::{checkered, SamplerBank};
use ccnn::trace::{lattice_sequence, random_sequence, trace_positions, SamplerSequence, TraceState};
use ccnn::train::{compare, TrainConfig, TOY_GRAPH};
use ccnn::verify::{dilation_error, gradient_cases, random_toy_graph, subset_error};
use ccnn::Tensor;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:?}, limit {limit:?}"))
}

/// Per-row and per-column sample counts of a traced state, by enumeration.
fn counts(state: &TraceState) -> (Vec<usize>, Vec<usize>) {
    let mut rows = vec![0; state.original_height];
    let mut cols = vec![0; state.original_width];
    for (r, c) in trace_positions(state) {
        rows[r] += 1;
        cols[c] += 1;
    }
    (rows, cols)
}

fn fig2_geometry() -> Outcome {
    let start = Instant::now();
    let mut state = TraceState::new(16, 16, 2).map_err(|e| e.to_string())?;
    let mut got = Vec::new();
    for _ in 0..3 {
        state = state.subsample_uniform(&checkered()).map_err(|e| e.to_string())?;
        got.push(state.structure());
    }
    ensure(got == [Some((2, 8, 8)), Some((4, 4, 4)), Some((8, 2, 2))], || format!("{got:?}"))?;
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok("16x16 -> 2x8x8, 4x4x4, 8x2x2".into())
}

fn toy_input(g: &LayerGraph, seed: u64) -> Tensor {
    let i = g.input();
    Tensor::uniform(&[2, i.channels, i.height, i.width], -1.0, 1.0, seed)
}

fn subset_equivalence() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..6u64 {
        let g = random_toy_graph(seed, 2 + seed as usize % 2).map_err(|e| e.to_string())?;
        worst = worst.max(subset_error(&g, &toy_input(&g, seed + 50)).map_err(|e| e.to_string())?);
    }
    ensure(worst < 1e-9, || format!("max abs diff {worst:.1e}"))?;
    Ok(format!("6 random graphs, max abs diff {worst:.1e}"))
}

fn dilation_equivalence() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..4u64 {
        let g = random_toy_graph(seed + 100, 2 + seed as usize % 2).map_err(|e| e.to_string())?;
        worst = worst.max(dilation_error(&g, &toy_input(&g, seed + 70)).map_err(|e| e.to_string())?);
    }
    ensure(worst < 1e-9, || format!("max abs diff {worst:.1e}"))?;
    let mut state = TraceState::new(32, 32, 2).map_err(|e| e.to_string())?;
    for _ in 0..5 {
        state = state
            .subsample_uniform(&ccnn::sampler::complete(2).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        ensure(trace_positions(&state).len() == 1024, || "complete sampling lost positions".into())?;
    }
    Ok(format!("4 random graphs, max abs diff {worst:.1e}; n=k^2 keeps all 1024 positions"))
}

fn n_rooks_coverage() -> Outcome {
    let bank = SamplerBank::standard(2).map_err(|e| e.to_string())?;
    let mut sequences = vec![
        SamplerSequence::constant(2, 5, 0),
        lattice_sequence(5).map_err(|e| e.to_string())?,
    ];
    sequences.extend((0..10).map(|s| random_sequence(2, 5, s)));
    for (i, seq) in sequences.iter().enumerate() {
        let mut state = TraceState::new(32, 32, 2).map_err(|e| e.to_string())?;
        for (t, line) in seq.lines().iter().enumerate() {
            state = state.subsample_step(&bank, line).map_err(|e| e.to_string())?;
            let (rows, cols) = counts(&state);
            let want = 32 >> (t + 1);
            ensure(rows.iter().chain(&cols).all(|&n| n == want), || {
                format!("sequence {i} step {}: rows {rows:?}", t + 1)
            })?;
        }
    }
    Ok("fixed, lattice and 10 random sequences, 5 steps on 32x32".into())
}

fn lattice_regularity() -> Outcome {
    let bank = SamplerBank::standard(2).map_err(|e| e.to_string())?;
    let seq = lattice_sequence(5).map_err(|e| e.to_string())?;
    let mut state = TraceState::new(32, 32, 2).map_err(|e| e.to_string())?;
    for (t, line) in seq.lines().iter().enumerate() {
        state = state.subsample_step(&bank, line).map_err(|e| e.to_string())?;
        let b = 1usize << (t + 1);
        let per_block = b * b / (1 << (t + 1));
        let mut blocks = vec![0usize; (32 / b) * (32 / b)];
        for (r, c) in trace_positions(&state) {
            blocks[(r / b) * (32 / b) + c / b] += 1;
        }
        ensure(blocks.iter().all(|&n| n == per_block), || {
            format!("step {}: block counts {blocks:?}", t + 1)
        })?;
    }
    let (rows, cols) = counts(&state);
    ensure(rows.iter().chain(&cols).all(|&n| n == 1), || "not one sample per row/column".into())?;
    Ok("one sample per row and column; zero block discrepancy at every step".into())
}

fn gradient_checks() -> Outcome {
    let start = Instant::now();
    let required = ["checkered_conv", "conv3d_submap", "batchnorm (training)", "mean_over_submaps"];
    let mut worst = 0.0f64;
    let mut seen = BTreeSet::new();
    for (name, err) in gradient_cases(3) {
        let err = err.map_err(|e| format!("{name}: {e}"))?;
        ensure(err < 1e-4, || format!("{name}: relative error {err:e}"))?;
        worst = worst.max(err);
        seen.insert(name);
    }
    ensure(required.iter().all(|r| seen.contains(r)), || format!("missing cases: {seen:?}"))?;
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!("{} layers, max relative error {worst:.2e}", seen.len()))
}

/// Table cells as written: `(memory, compute)` in closed form.
fn table(scheme: Scheme, rule: ChannelRule, s: i32) -> Option<(f64, f64)> {
    let p = |b: f64| b.powi(s);
    Some(match (rule, scheme) {
        (ChannelRule::Double, Scheme::Traditional) => (p(0.5), 1.0),
        (ChannelRule::Double, Scheme::Checkered) => (1.0, p(2.0)),
        (ChannelRule::Double, Scheme::Dilated) => (p(2.0), p(4.0)),
        (ChannelRule::Constant, Scheme::Traditional) => (p(0.25), p(0.25)),
        (ChannelRule::Constant, Scheme::Checkered) => (p(0.5), p(0.5)),
        (ChannelRule::Constant, Scheme::Dilated) => (1.0, 1.0),
        (ChannelRule::Sqrt2, Scheme::Checkered) => (1.0 / 2f64.powf(s as f64 / 2.0), 1.0),
        (ChannelRule::Sqrt2, _) => return None,
    })
}

fn complexity_tables() -> Outcome {
    let mut cells = 0;
    for rule in [ChannelRule::Double, ChannelRule::Constant, ChannelRule::Sqrt2] {
        for scheme in Scheme::ALL {
            for s in 0..=6u32 {
                let want = table(scheme, rule, s as i32);
                let got = complexity_profile(scheme, rule, s).ok();
                match (want, got) {
                    (None, None) => continue,
                    (Some((m, c)), Some(p)) => {
                        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs();
                        ensure(close(p.memory_factor.value(), m) && close(p.compute_factor.value(), c), || {
                            format!("{scheme}/{rule:?}/s={s}: {} {}", p.memory_factor, p.compute_factor)
                        })?;
                        if rule != ChannelRule::Sqrt2 {
                            let counted = measured_factors(scheme, rule, s, 6, 64).map_err(|e| e.to_string())?;
                            ensure(counted == (Some(p.memory_factor), Some(p.compute_factor)), || {
                                format!("{scheme}/{rule:?}/s={s}: counted {counted:?}")
                            })?;
                        }
                        cells += 1;
                    }
                    (w, g) => return Err(format!("{scheme}/{rule:?}/s={s}: want {w:?}, got {g:?}")),
                }
            }
        }
    }
    Ok(format!("{cells} table cells; counted MAC/activation ratios agree"))
}

fn conversion_conservation() -> Outcome {
    let mut graphs = vec![LayerGraph::from_text(TOY_GRAPH, 0).map_err(|e| e.to_string())?];
    for seed in 0..6 {
        graphs.push(random_toy_graph(seed, 2 + seed as usize % 2).map_err(|e| e.to_string())?);
    }
    for (i, g) in graphs.iter().enumerate() {
        let c = convert_to_ccnn(g).map_err(|e| e.to_string())?;
        ensure(c.param_count() == g.param_count(), || format!("graph {i}: count changed"))?;
        let same = g
            .parameters()
            .zip(c.parameters())
            .all(|(a, b)| a.shape() == b.shape() && a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
        ensure(same && g.parameters().count() == c.parameters().count(), || format!("graph {i}: values changed"))?;
    }
    Ok(format!("{} graphs, bit-identical parameters", graphs.len()))
}

fn training_demo() -> Outcome {
    let start = Instant::now();
    let cfg = TrainConfig {
        epochs: 50,
        target_accuracy: Some(0.95),
        seed: 11,
        ..TrainConfig::default()
    };
    let r = compare(&cfg, 256, 128).map_err(|e| e.to_string())?;
    ensure(r.cnn_params == r.ccnn_params, || "parameter counts differ".into())?;
    for (name, log) in [("cnn", &r.cnn), ("ccnn", &r.ccnn)] {
        ensure(!log.diverged, || format!("{name} diverged"))?;
        ensure(log.final_train_accuracy() > 0.95, || {
            format!("{name} reached {:.3}", log.best_train_accuracy())
        })?;
    }
    within(start.elapsed(), Duration::from_secs(300))?;
    Ok(format!(
        "cnn {:.3} after {} epochs, ccnn {:.3} after {} epochs, {:.1?}",
        r.cnn.final_train_accuracy(),
        r.cnn.epochs.len(),
        r.ccnn.final_train_accuracy(),
        r.ccnn.epochs.len(),
        start.elapsed()
    ))
}

fn naive_diagonal() -> Outcome {
    let bank = SamplerBank::standard(2).map_err(|e| e.to_string())?;
    let mut state = TraceState::new(64, 64, 2).map_err(|e| e.to_string())?;
    for (t, line) in SamplerSequence::constant(2, 6, 0).lines().iter().enumerate() {
        state = state.subsample_step(&bank, line).map_err(|e| e.to_string())?;
        ensure(state.submaps.iter().all(|m| m.row_offset == m.col_offset), || {
            format!("off-diagonal submap after step {}", t + 1)
        })?;
    }
    Ok("row_offset == col_offset after each of 6 steps".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("sampling geometry of repeated checkered steps", fig2_geometry),
        ("origin submap equals the traditional network", subset_equivalence),
        ("complete multisampling equals the dilated network", dilation_equivalence),
        ("n-rooks sequences represent every row and column", n_rooks_coverage),
        ("lattice sequence regularity", lattice_regularity),
        ("finite-difference gradient checks", gradient_checks),
        ("complexity tables", complexity_tables),
        ("conversion adds no parameters", conversion_conservation),
        ("CNN and CCNN both train on fine-detail data", training_demo),
        ("naive sequence stays on the diagonal", naive_diagonal),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(p.downcast_ref::<String>().cloned().unwrap_or_else(|| "panicked".into())));
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
