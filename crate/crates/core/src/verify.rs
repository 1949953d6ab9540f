//! Seeded invariant suites: checkered layers contain the traditional ones,
//! complete multisampling matches dilation, gradients match finite
//! differences, sampling patterns cover every row and column, and the
//! complexity calculators agree with counted costs.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analysis::{
    complexity_profile, measured_factors, resolution_after, ChannelRule, Factor, Scheme,
};
use crate::autograd::{Tape, Var};
use crate::error::{Error, Result};
use crate::nn::{
    self, convert_to_ccnn, convert_with, dilation_equivalent, Activation, BatchNormConfig,
    ConvSpec, FeatureMap, InputSpec, LayerGraph, LayerKind, Mode, PoolMode, PoolSpec,
    RunningStats, Sampling,
};
use crate::sampler::{checkered, SamplerBank};
use crate::tensor::Tensor;
use crate::trace::{coverage_stats, lattice_sequence, random_sequence, SamplerSequence, TraceState};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Subset,
    Dilation,
    Gradients,
    Coverage,
    Complexity,
    All,
}

impl Suite {
    pub const NAMES: [&'static str; 6] = ["subset", "dilation", "gradients", "coverage", "complexity", "all"];

    fn members(self) -> Vec<Suite> {
        match self {
            Suite::All => vec![
                Suite::Subset,
                Suite::Dilation,
                Suite::Gradients,
                Suite::Coverage,
                Suite::Complexity,
            ],
            s => vec![s],
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = *self as usize;
        f.write_str(Self::NAMES[i])
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "subset" => Ok(Suite::Subset),
            "dilation" => Ok(Suite::Dilation),
            "gradients" => Ok(Suite::Gradients),
            "coverage" => Ok(Suite::Coverage),
            "complexity" => Ok(Suite::Complexity),
            "all" => Ok(Suite::All),
            _ => Err(format!("unknown suite {s:?}; expected one of {}", Suite::NAMES.join(", "))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Largest observed error, where the check is numeric.
    pub max_error: Option<f64>,
    pub detail: String,
}

impl Check {
    fn exact(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            max_error: None,
            detail: detail.into(),
        }
    }

    fn within(name: impl Into<String>, err: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            passed: err < tol,
            max_error: Some(err),
            detail: format!("max error {err:.3e} (tolerance {tol:.0e})"),
        }
    }

    fn failed(name: impl Into<String>, e: &Error) -> Self {
        Self::exact(name, false, e.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub passed: bool,
    pub checks: Vec<Check>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub passed: bool,
    pub suites: Vec<SuiteReport>,
}

impl Summary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }
}

pub fn run(suite: Suite, seed: u64) -> Summary {
    let suites: Vec<SuiteReport> = suite
        .members()
        .into_iter()
        .map(|s| {
            let checks = match s {
                Suite::Subset => subset_checks(seed, 5),
                Suite::Dilation => dilation_checks(seed, 3),
                Suite::Gradients => gradient_checks(seed),
                Suite::Coverage => coverage_checks(seed),
                Suite::Complexity => complexity_checks(6),
                Suite::All => unreachable!(),
            };
            SuiteReport {
                suite: s.to_string(),
                passed: checks.iter().all(|c| c.passed),
                checks,
            }
        })
        .collect();
    Summary {
        passed: suites.iter().all(|s| s.passed),
        suites,
    }
}

/// A small random traditional network with `stages` stride-2 layers, a
/// classifier on top, and non-trivial batchnorm state. Spatial extents are
/// multiples of `2^stages`.
pub fn random_toy_graph(seed: u64, stages: usize) -> Result<LayerGraph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let channels = rng.gen_range(1..=3);
    let size = (1 << stages) * rng.gen_range(2..=4);
    let mut kinds = Vec::new();
    let mut c = channels;
    for _ in 0..stages {
        if rng.gen_bool(0.5) {
            let k = if rng.gen_bool(0.5) { 3 } else { 1 };
            c = rng.gen_range(2..=4);
            kinds.push(LayerKind::Conv(ConvSpec::new(c, k, 1, k / 2)));
        }
        if rng.gen_bool(0.5) {
            kinds.push(LayerKind::BatchNorm {
                channels: c,
                eps: 1e-5,
                momentum: 0.1,
            });
        }
        kinds.push(LayerKind::Relu);
        match rng.gen_range(0..3) {
            0 => kinds.push(LayerKind::MaxPool(PoolSpec::new(2, 2))),
            1 => {
                c = rng.gen_range(2..=4);
                kinds.push(LayerKind::Conv(ConvSpec::new(c, 2, 2, 0)));
            }
            _ => {
                c = rng.gen_range(2..=4);
                kinds.push(LayerKind::Conv(ConvSpec::new(c, 3, 2, 1)));
            }
        }
    }
    kinds.push(LayerKind::Conv(ConvSpec::new(c, 3, 1, 1)));
    kinds.push(LayerKind::Dropout { rate: 0.25 });
    let side = size >> stages;
    kinds.push(LayerKind::Linear {
        in_features: c * side * side,
        out_features: 3,
    });
    let input = InputSpec {
        channels,
        height: size,
        width: size,
    };
    let mut g = LayerGraph::new(input, kinds, seed)?;
    for (i, layer) in g.layers_mut().iter_mut().enumerate() {
        if let LayerKind::BatchNorm { channels, .. } = layer.kind {
            let s = seed ^ ((i as u64) << 32);
            layer.params = vec![
                Tensor::uniform(&[channels], 0.5, 1.5, s),
                Tensor::uniform(&[channels], -0.5, 0.5, s + 1),
            ];
            layer.buffers = vec![
                Tensor::uniform(&[channels], -0.3, 0.3, s + 2),
                Tensor::uniform(&[channels], 0.5, 2.0, s + 3),
            ];
        }
    }
    Ok(g)
}

fn first_linear(g: &LayerGraph) -> usize {
    g.layers()
        .iter()
        .position(|l| matches!(l.kind, LayerKind::Linear { .. }))
        .unwrap_or(g.len())
}

/// Eval-mode activations of layers `0..end`, all still on the tape.
fn activations(g: &LayerGraph, tape: &mut Tape, x: &Tensor, end: usize) -> Result<Vec<Activation>> {
    let input = FeatureMap::from_images(tape, x.clone(), false)?;
    Ok(g.forward_range(tape, Activation::Map(input), Mode::Eval, 0..end)?.activations)
}

fn random_input(g: &LayerGraph, batch: usize, seed: u64) -> Tensor {
    let i = g.input();
    Tensor::uniform(&[batch, i.channels, i.height, i.width], -1.0, 1.0, seed)
}

/// Largest difference between the origin submap of every checkered layer
/// and the traditional layer's output, plus the difference between the
/// traditional logits and the CCNN logits computed from the origin submap
/// alone.
pub fn subset_error(g: &LayerGraph, x: &Tensor) -> Result<f64> {
    let c = convert_to_ccnn(g)?;
    let end = first_linear(g);
    let mut tape = Tape::new();
    let trad = activations(g, &mut tape, x, end)?;
    let conv = activations(&c, &mut tape, x, end)?;
    let mut worst = 0.0f64;
    for (i, (a, b)) in trad.iter().zip(&conv).enumerate() {
        let (Some(a), Some(b)) = (a.as_map(), b.as_map()) else {
            continue;
        };
        let m = b.origin_submap().ok_or_else(|| {
            Error::InvalidArgument(format!("layer {i}: no submap at the origin"))
        })?;
        let (ta, tb) = (a.submap(&tape, 0), b.submap(&tape, m));
        if ta.shape() != tb.shape() {
            return Err(Error::InvalidArgument(format!(
                "layer {i}: shapes {:?} vs {:?}",
                ta.shape(),
                tb.shape()
            )));
        }
        worst = worst.max(ta.max_abs_diff(&tb));
    }

    // Keep only the origin submap, scaled so the submap mean equals it.
    if end < g.len() && end > 0 {
        let last = conv[end - 1].as_map().cloned().expect("map before classifier");
        let mut v = tape.value(last.var).clone();
        let (ms, plane) = (v.shape()[2], v.shape()[3] * v.shape()[4]);
        let keep = last.origin_submap().expect("checked above");
        for (idx, val) in v.data_mut().iter_mut().enumerate() {
            let m = idx / plane % ms;
            *val = if m == keep { *val * ms as f64 } else { 0.0 };
        }
        let masked = FeatureMap::from_parts(&mut tape, v, last.metas.clone(), false)?;
        let out = c.forward_range(&mut tape, Activation::Map(masked), Mode::Eval, end..c.len())?;
        let logits = tape.value(out.output().expect("classifier").var()).clone();
        worst = worst.max(logits.max_abs_diff(&g.forward(x, Mode::Eval)?));
    }
    Ok(worst)
}

/// Largest difference between complete-multisampling activations and the
/// dilated network's activations at the positions each submap element
/// came from. Also confirms that every position is accounted for.
pub fn dilation_error(g: &LayerGraph, x: &Tensor) -> Result<f64> {
    let comp = convert_with(g, Sampling::Complete)?;
    let dil = dilation_equivalent(g)?;
    let end = first_linear(g);
    let mut tape = Tape::new();
    let a = activations(&comp, &mut tape, x, end)?;
    let b = activations(&dil, &mut tape, x, end)?;
    let mut worst = 0.0f64;
    for (i, (a, b)) in a.iter().zip(&b).enumerate() {
        let (Some(a), Some(b)) = (a.as_map(), b.as_map()) else {
            continue;
        };
        let [bs, ch, ms, h, w] = a.shape(&tape);
        let [_, _, _, dh, dw] = b.shape(&tape);
        let (va, vb) = (tape.value(a.var).data(), tape.value(b.var).data());
        let mut seen = 0usize;
        for (m, meta) in a.metas.iter().enumerate() {
            for (pi, pj, r, c) in (0..h).flat_map(|pi| {
                (0..w).map(move |pj| {
                    (pi, pj, meta.row_offset + pi * meta.step_stride, meta.col_offset + pj * meta.step_stride)
                })
            }) {
                if r >= dh || c >= dw {
                    return Err(Error::InvalidArgument(format!(
                        "layer {i}: submap {m} element ({pi},{pj}) maps outside the dilated map"
                    )));
                }
                seen += 1;
                for bc in 0..bs * ch {
                    let ia = ((bc * ms + m) * h + pi) * w + pj;
                    let ib = (bc * dh + r) * dw + c;
                    worst = worst.max((va[ia] - vb[ib]).abs());
                }
            }
        }
        if seen != dh * dw {
            return Err(Error::InvalidArgument(format!(
                "layer {i}: {seen} submap elements for a {dh}x{dw} dilated map"
            )));
        }
    }
    Ok(worst)
}

pub fn subset_checks(seed: u64, graphs: usize) -> Vec<Check> {
    (0..graphs)
        .map(|i| {
            let gseed = seed.wrapping_add(i as u64);
            let stages = 2 + i % 2;
            let name = format!("subset: graph seed {gseed}, {stages} stride-2 layers");
            match random_toy_graph(gseed, stages)
                .and_then(|g| subset_error(&g, &random_input(&g, 2, gseed ^ 0xABCD)))
            {
                Ok(err) => Check::within(name, err, 1e-9),
                Err(e) => Check::failed(name, &e),
            }
        })
        .collect()
}

pub fn dilation_checks(seed: u64, graphs: usize) -> Vec<Check> {
    let mut checks: Vec<Check> = (0..graphs)
        .map(|i| {
            let gseed = seed.wrapping_add(100 + i as u64);
            let stages = 2 + i % 2;
            let name = format!("dilation: graph seed {gseed}, {stages} stride-2 layers");
            match random_toy_graph(gseed, stages)
                .and_then(|g| dilation_error(&g, &random_input(&g, 2, gseed ^ 0x1234)))
            {
                Ok(err) => Check::within(name, err, 1e-9),
                Err(e) => Check::failed(name, &e),
            }
        })
        .collect();
    let keeps = (0..=6).all(|s| resolution_after(4096, 2, 2, 4, s).ok() == Some(4096));
    checks.push(Check::exact(
        "dilation: complete sampling keeps the resolution",
        keeps,
        "resolution_after(4096, k=2, d=2, n=4, s) for s in 0..=6",
    ));
    checks
}

/// Max relative error between reverse-mode gradients of
/// `sum(f(inputs) * probe)` and central differences with step `h`, over
/// every element of every input. Relative error is taken against
/// `max(|analytic|, |numeric|, 1e-3)` so exact zeros do not blow up.
pub fn gradient_check<F>(inputs: &[Tensor], f: F, h: f64, seed: u64) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let eval = |values: &[Tensor], probe: Option<&Tensor>, grad: bool| -> Result<(f64, Vec<Tensor>, Tensor)> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values
            .iter()
            .map(|t| if grad { tape.variable(t.clone()) } else { tape.constant(t.clone()) })
            .collect();
        let y = f(&mut tape, &vars)?;
        let probe = probe
            .cloned()
            .unwrap_or_else(|| Tensor::uniform(tape.value(y).shape(), -1.0, 1.0, seed));
        let loss = nn::dot_const(&mut tape, y, &probe)?;
        let value = tape.value(loss).data()[0];
        let grads = if grad {
            let mut g = tape.backward(loss)?;
            vars.iter()
                .map(|&v| g.take(v).unwrap_or_else(|| Tensor::zeros(tape.value(v).shape())))
                .collect()
        } else {
            Vec::new()
        };
        Ok((value, grads, probe))
    };

    let (_, analytic, probe) = eval(inputs, None, true)?;
    let mut worst = 0.0f64;
    let mut values = inputs.to_vec();
    for (t, grad) in analytic.iter().enumerate() {
        for i in 0..values[t].len() {
            let orig = values[t].data()[i];
            values[t].data_mut()[i] = orig + h;
            let up = eval(&values, Some(&probe), false)?.0;
            values[t].data_mut()[i] = orig - h;
            let down = eval(&values, Some(&probe), false)?.0;
            values[t].data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = grad.data()[i];
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-3));
        }
    }
    Ok(worst)
}

fn map_of(tape: &Tape, v: Var) -> FeatureMap {
    let [_, _, m, h, w] = nn::kernel::dims5(tape.value(v));
    let metas = if m == 1 {
        vec![crate::trace::SubmapMeta::root(h, w)]
    } else {
        // distinct synthetic provenance is enough for layers that only
        // look at values
        (0..m)
            .map(|i| crate::trace::SubmapMeta {
                row_offset: i,
                col_offset: i,
                step_stride: m,
                height: h,
                width: w,
            })
            .collect()
    };
    FeatureMap { var: v, metas }
}

/// Named gradient checks over every differentiable layer, seeded.
pub fn gradient_cases(seed: u64) -> Vec<(&'static str, Result<f64>)> {
    let h = 1e-5;
    let t = |shape: &[usize], s: u64| Tensor::uniform(shape, -1.0, 1.0, seed.wrapping_add(s));
    vec![
        (
            "checkered_conv",
            gradient_check(
                &[t(&[1, 2, 1, 6, 6], 1), t(&[3, 2, 3, 3], 2), t(&[3], 3)],
                |tape, v| {
                    let x = map_of(tape, v[0]);
                    Ok(nn::checkered_conv(tape, &x, v[1], Some(v[2]), 1)?.var)
                },
                h,
                seed,
            ),
        ),
        (
            "checkered_conv_complement",
            gradient_check(
                &[t(&[2, 1, 1, 6, 6], 4), t(&[2, 1, 3, 3], 5), t(&[2], 6)],
                |tape, v| {
                    let x = map_of(tape, v[0]);
                    Ok(nn::checkered_conv_complement(tape, &x, v[1], Some(v[2]), 1)?.var)
                },
                h,
                seed,
            ),
        ),
        (
            "conv2d stride 2 dilation 2",
            gradient_check(
                &[t(&[1, 2, 2, 7, 7], 7), t(&[2, 2, 3, 3], 8), t(&[2], 9)],
                |tape, v| {
                    let x = map_of(tape, v[0]);
                    Ok(nn::conv2d(tape, &x, v[1], Some(v[2]), nn::Conv2dParams::new(2, 2, 2))?.var)
                },
                h,
                seed,
            ),
        ),
        (
            "conv3d_submap",
            gradient_check(
                &[t(&[2, 2, 3, 4, 4], 10), t(&[2, 2, 2, 3, 3], 11), t(&[2], 12)],
                |tape, v| {
                    let x = map_of(tape, v[0]);
                    Ok(nn::conv3d_submap(tape, &x, v[1], Some(v[2]), 1)?.var)
                },
                h,
                seed,
            ),
        ),
        (
            "batchnorm (training)",
            gradient_check(
                &[t(&[2, 3, 2, 3, 3], 13), t(&[3], 14), t(&[3], 15)],
                |tape, v| {
                    let x = map_of(tape, v[0]);
                    let mut stats = RunningStats::new(3);
                    Ok(nn::batchnorm(tape, &x, v[1], v[2], BatchNormConfig::default(), true, &mut stats)?.var)
                },
                h,
                seed,
            ),
        ),
        (
            "mean_over_submaps",
            gradient_check(
                &[t(&[2, 2, 4, 3, 3], 16)],
                |tape, v| Ok(nn::mean_over_submaps(tape, &map_of(tape, v[0])).var),
                h,
                seed,
            ),
        ),
        (
            "checkered_maxpool",
            gradient_check(
                &[t(&[1, 2, 2, 6, 6], 17)],
                |tape, v| Ok(nn::checkered_maxpool(tape, &map_of(tape, v[0]), 2)?.var),
                h,
                seed,
            ),
        ),
        (
            "global_pool3d avg",
            gradient_check(
                &[t(&[2, 3, 2, 3, 3], 18)],
                |tape, v| Ok(nn::global_pool3d(tape, &map_of(tape, v[0]), PoolMode::Avg)),
                h,
                seed,
            ),
        ),
        (
            "linear + cross_entropy",
            gradient_check(
                &[t(&[4, 5], 19), t(&[3, 5], 20), t(&[3], 21)],
                |tape, v| {
                    let z = nn::linear(tape, v[0], v[1], v[2])?;
                    nn::cross_entropy(tape, z, &[0, 2, 1, 2])
                },
                h,
                seed,
            ),
        ),
        (
            "dropout (training)",
            gradient_check(
                &[t(&[2, 2, 2, 3, 3], 22)],
                |tape, v| Ok(nn::dropout(tape, &map_of(tape, v[0]), 0.3, 5, true)?.var),
                h,
                seed,
            ),
        ),
    ]
}

pub fn gradient_checks(seed: u64) -> Vec<Check> {
    gradient_cases(seed)
        .into_iter()
        .map(|(name, r)| {
            let name = format!("gradients: {name}");
            match r {
                Ok(err) => Check::within(name, err, 1e-4),
                Err(e) => Check::failed(name, &e),
            }
        })
        .collect()
}

/// After every step of `seq` on a `size x size` grid: every row and column
/// is sampled and per-row / per-column counts are all equal.
pub fn balanced_after_every_step(size: usize, seq: &SamplerSequence) -> Result<bool> {
    let bank = SamplerBank::standard(2)?;
    let mut state = TraceState::new(size, size, 2)?;
    for line in seq.lines() {
        state = state.subsample_step(&bank, line)?;
        let r = coverage_stats(&state);
        if r.rows_covered != size || r.cols_covered != size || !r.is_balanced() {
            return Ok(false);
        }
    }
    Ok(true)
}

pub fn coverage_checks(seed: u64) -> Vec<Check> {
    let mut checks = Vec::new();

    let mut state = TraceState::new(16, 16, 2).expect("non-empty");
    let mut structures = Vec::new();
    for _ in 0..3 {
        state = state.subsample_uniform(&checkered()).expect("k matches");
        structures.push(state.structure());
    }
    checks.push(Check::exact(
        "coverage: 16x16 checkered structures",
        structures == [Some((2, 8, 8)), Some((4, 4, 4)), Some((8, 2, 2))],
        format!("{structures:?}"),
    ));

    let mut sequences = vec![
        ("fixed".to_string(), SamplerSequence::constant(2, 5, 0)),
        ("lattice".to_string(), lattice_sequence(5).expect("in range")),
    ];
    for i in 0..10 {
        let s = seed.wrapping_add(i);
        sequences.push((format!("random seed {s}"), random_sequence(2, 5, s)));
    }
    for (name, seq) in &sequences {
        let ok = balanced_after_every_step(32, seq);
        checks.push(Check::exact(
            format!("coverage: {name} sequence represents every row and column"),
            matches!(ok, Ok(true)),
            format!("{ok:?}"),
        ));
    }

    let bank = SamplerBank::standard(2).expect("k=2");
    let lattice = lattice_sequence(5).expect("in range");
    let mut state = TraceState::new(32, 32, 2).expect("non-empty");
    let mut discrepancy = Vec::new();
    for line in lattice.lines() {
        state = state.subsample_step(&bank, line).expect("valid lattice line");
        discrepancy.push(coverage_stats(&state).block_discrepancy);
    }
    let last = coverage_stats(&state);
    checks.push(Check::exact(
        "coverage: lattice gives one sample per row and column at 32x32",
        last.per_row.iter().all(|&n| n == 1) && last.per_col.iter().all(|&n| n == 1),
        format!("{} samples", last.samples),
    ));
    checks.push(Check::exact(
        "coverage: lattice block discrepancy is zero at every step",
        discrepancy.iter().all(|&d| d == 0.0),
        format!("{discrepancy:?}"),
    ));

    let mut naive_ok = true;
    let mut state = TraceState::new(32, 32, 2).expect("non-empty");
    for line in SamplerSequence::constant(2, 5, 0).lines() {
        state = state.subsample_step(&bank, line).expect("valid");
        naive_ok &= state.submaps.iter().all(|m| m.row_offset == m.col_offset);
    }
    checks.push(Check::exact(
        "coverage: naive sequence stays on the diagonal",
        naive_ok,
        "row_offset == col_offset for every submap after each of 5 steps",
    ));
    checks
}

/// The three tables as literal expected cells: `(memory, compute)` as
/// powers of two in half steps, per depth `s`.
pub fn table_cell(scheme: Scheme, rule: ChannelRule, s: u32) -> Option<(Factor, Factor)> {
    let s = i64::from(s);
    let p = Factor::pow2;
    Some(match (rule, scheme) {
        (ChannelRule::Double, Scheme::Traditional) => (p(-s), Factor::ONE),
        (ChannelRule::Double, Scheme::Checkered) => (Factor::ONE, p(s)),
        (ChannelRule::Double, Scheme::Dilated) => (p(s), p(2 * s)),
        (ChannelRule::Constant, Scheme::Traditional) => (p(-2 * s), p(-2 * s)),
        (ChannelRule::Constant, Scheme::Checkered) => (p(-s), p(-s)),
        (ChannelRule::Constant, Scheme::Dilated) => (Factor::ONE, Factor::ONE),
        (ChannelRule::Sqrt2, Scheme::Checkered) => (Factor::sqrt2_pow(-s), Factor::ONE),
        (ChannelRule::Sqrt2, _) => return None,
    })
}

pub fn complexity_checks(max_steps: u32) -> Vec<Check> {
    let mut checks = Vec::new();
    let mut mismatches = Vec::new();
    for rule in [ChannelRule::Double, ChannelRule::Constant, ChannelRule::Sqrt2] {
        for scheme in Scheme::ALL {
            for s in 0..=max_steps {
                let got = complexity_profile(scheme, rule, s)
                    .ok()
                    .map(|p| (p.memory_factor, p.compute_factor));
                if got != table_cell(scheme, rule, s) {
                    mismatches.push(format!("{scheme}/{rule:?}/s={s}: {got:?}"));
                }
            }
        }
    }
    checks.push(Check::exact(
        "complexity: analytic profiles match every table cell",
        mismatches.is_empty(),
        if mismatches.is_empty() {
            format!("s in 0..={max_steps}")
        } else {
            mismatches.join("; ")
        },
    ));

    let size = 1usize << max_steps;
    let mut mismatches = Vec::new();
    for rule in [ChannelRule::Double, ChannelRule::Constant] {
        for scheme in Scheme::ALL {
            for s in 0..=max_steps {
                let want = table_cell(scheme, rule, s).map(|(m, c)| (Some(m), Some(c)));
                match measured_factors(scheme, rule, s, max_steps, size) {
                    Ok(got) if Some(got) == want => {}
                    other => mismatches.push(format!("{scheme}/{rule:?}/s={s}: {other:?}")),
                }
            }
        }
    }
    checks.push(Check::exact(
        "complexity: counted costs match the analytic ratios",
        mismatches.is_empty(),
        if mismatches.is_empty() {
            format!("reference graphs on {size}x{size}, s in 0..={max_steps}")
        } else {
            mismatches.join("; ")
        },
    ));
    checks
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for name in Suite::NAMES {
            assert_eq!(name.parse::<Suite>().unwrap().to_string(), name);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn toy_graphs_are_valid_and_seeded() {
        for seed in 0..6 {
            let g = random_toy_graph(seed, 2 + seed as usize % 2).unwrap();
            assert_eq!(g, random_toy_graph(seed, 2 + seed as usize % 2).unwrap());
            assert!(g.shapes().is_ok());
            assert_eq!(g.subsampling_layers(), 2 + seed as usize % 2);
        }
    }

    #[test]
    fn gradient_check_catches_a_wrong_gradient() {
        // y = x * x with a backward that forgets the factor 2
        let err = gradient_check(
            &[Tensor::uniform(&[3], 0.5, 1.0, 1)],
            |tape, v| {
                let x = tape.value(v[0]).clone();
                let y = x.map(|a| a * a);
                Ok(tape.push(
                    y,
                    &[v[0]],
                    Box::new(|g, inputs, _| {
                        let d = inputs[0].data().iter().zip(g.data()).map(|(a, g)| a * g).collect();
                        vec![Tensor::new(inputs[0].shape().to_vec(), d).unwrap()]
                    }),
                ))
            },
            1e-5,
            0,
        )
        .unwrap();
        assert!(err > 0.1);
    }

    #[test]
    fn every_suite_passes() {
        let summary = run(Suite::All, 7);
        for s in &summary.suites {
            for c in &s.checks {
                assert!(c.passed, "{}: {}", c.name, c.detail);
            }
        }
        assert!(summary.passed);
    }
}
