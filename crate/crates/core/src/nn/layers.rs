//! Submap-aware convolution, pooling, normalization and dropout.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autograd::{Tape, Var};
use crate::error::{invalid, Result};
use crate::sampler::{self, Sampler};
use crate::tensor::Tensor;
use crate::trace::{canonical_order, SubmapMeta};

use super::kernel::{self, dims5, SubmapSource, WindowPlan};
use super::ops::mul_const;
use super::FeatureMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Conv2dParams {
    pub stride: usize,
    pub padding: usize,
    pub dilation: usize,
}

impl Conv2dParams {
    pub fn new(stride: usize, padding: usize, dilation: usize) -> Self {
        Self {
            stride,
            padding,
            dilation,
        }
    }
}

impl Default for Conv2dParams {
    fn default() -> Self {
        Self::new(1, 0, 1)
    }
}

/// Window geometry of a subsampling layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Geometry {
    pub kernel: (usize, usize),
    pub stride: usize,
    pub padding: usize,
    pub dilation: usize,
    /// Rounds the stride-1 output extent up to a multiple of this before
    /// subsampling (the extra windows read fill values).
    pub out_multiple: usize,
}

impl Geometry {
    /// Stride-1 output extent along an axis of length `len`.
    fn dense_extent(&self, len: usize, kernel: usize) -> Option<usize> {
        let span = self.dilation * (kernel - 1) + 1;
        let padded = len + 2 * self.padding;
        (padded >= span).then(|| padded - span + 1)
    }

    /// Per-submap output extent `(height, width)`.
    pub fn out_extent(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        let m = self.out_multiple.max(1);
        let ho = self.dense_extent(h, self.kernel.0)?.next_multiple_of(m);
        let wo = self.dense_extent(w, self.kernel.1)?.next_multiple_of(m);
        Some((ho.div_ceil(self.stride), wo.div_ceil(self.stride)))
    }
}

/// Builds the window plan and the child metas (canonical order) for applying
/// `samplers[m]` to input submap `m`.
pub(crate) fn subsample_plan(
    metas: &[SubmapMeta],
    h: usize,
    w: usize,
    geom: &Geometry,
    samplers: &[&Sampler],
) -> Result<(WindowPlan, Vec<SubmapMeta>)> {
    if samplers.len() != metas.len() {
        return Err(invalid(format!(
            "{} samplers for {} submaps",
            samplers.len(),
            metas.len()
        )));
    }
    if geom.stride == 0 || geom.dilation == 0 {
        return Err(invalid("stride and dilation must be at least 1"));
    }
    if let Some(s) = samplers.iter().find(|s| s.k() != geom.stride) {
        return Err(invalid(format!(
            "sampler window {} does not match stride {}",
            s.k(),
            geom.stride
        )));
    }
    let (ho, wo) = geom.out_extent(h, w).ok_or_else(|| {
        invalid(format!(
            "kernel {:?} with dilation {} does not fit a {h}x{w} input with padding {}",
            geom.kernel, geom.dilation, geom.padding
        ))
    })?;
    let pad = geom.padding as isize;
    let mut children = Vec::new();
    let mut sources = Vec::new();
    for (m, (meta, s)) in metas.iter().zip(samplers).enumerate() {
        for (dr, dc) in s.samples() {
            children.push(SubmapMeta {
                height: ho,
                width: wo,
                ..meta.child(dr, dc, geom.stride)
            });
            sources.push(SubmapSource {
                inputs: vec![(m, 0)],
                origin: (dr as isize - pad, dc as isize - pad),
            });
        }
    }
    let order = canonical_order(&children);
    let plan = WindowPlan {
        kernel: geom.kernel,
        stride: geom.stride,
        dilation: geom.dilation,
        out_hw: (ho, wo),
        submaps: order.iter().map(|&i| sources[i].clone()).collect(),
    };
    Ok((plan, order.iter().map(|&i| children[i]).collect()))
}

fn check_feature_map(tape: &Tape, x: &FeatureMap) -> Result<[usize; 5]> {
    let v = tape.value(x.var);
    if v.ndim() != 5 {
        return Err(invalid(format!("feature map must be 5D, got {:?}", v.shape())));
    }
    let d = dims5(v);
    if d[2] != x.metas.len() {
        return Err(invalid(format!(
            "feature map has {} submaps but {} metas",
            d[2],
            x.metas.len()
        )));
    }
    Ok(d)
}

fn check_conv_params(tape: &Tape, x_channels: usize, w: Var, bias: Option<Var>, depth: Option<usize>) -> Result<(usize, usize)> {
    let ws = tape.value(w).shape();
    let ok_rank = match depth {
        None => ws.len() == 4,
        Some(_) => ws.len() == 5,
    };
    if !ok_rank {
        return Err(invalid(format!("unexpected weight shape {ws:?}")));
    }
    if ws[1] != x_channels {
        return Err(invalid(format!(
            "weight expects {} input channels, feature map has {x_channels}",
            ws[1]
        )));
    }
    if let Some(b) = bias {
        if tape.value(b).shape() != [ws[0]] {
            return Err(invalid(format!(
                "bias shape {:?} does not match {} output channels",
                tape.value(b).shape(),
                ws[0]
            )));
        }
    }
    let n = ws.len();
    Ok((ws[n - 2], ws[n - 1]))
}

fn push_conv(tape: &mut Tape, x: Var, w: Var, bias: Option<Var>, plan: WindowPlan) -> Var {
    let y = kernel::conv_forward(
        tape.value(x),
        tape.value(w),
        bias.map(|b| tape.value(b)),
        &plan,
    );
    let mut parents = vec![x, w];
    parents.extend(bias);
    let has_bias = bias.is_some();
    tape.push(
        y,
        &parents,
        Box::new(move |g, inputs, _| {
            let (dx, dw, db) = kernel::conv_backward(inputs[0], inputs[1], g, &plan);
            let mut grads = vec![dx, dw];
            if has_bias {
                grads.push(db);
            }
            grads
        }),
    )
}

/// Convolution applied per submap with one sampler per input submap.
/// `params.stride` is the sampling window size `k`.
pub fn multisample_conv(
    tape: &mut Tape,
    x: &FeatureMap,
    w: Var,
    bias: Option<Var>,
    params: Conv2dParams,
    samplers: &[&Sampler],
) -> Result<FeatureMap> {
    multisample_conv_with(tape, x, w, bias, params, 1, samplers)
}

pub(crate) fn multisample_conv_with(
    tape: &mut Tape,
    x: &FeatureMap,
    w: Var,
    bias: Option<Var>,
    params: Conv2dParams,
    out_multiple: usize,
    samplers: &[&Sampler],
) -> Result<FeatureMap> {
    let [_, c, _, h, wd] = check_feature_map(tape, x)?;
    let kernel = check_conv_params(tape, c, w, bias, None)?;
    let geom = Geometry {
        kernel,
        stride: params.stride,
        padding: params.padding,
        dilation: params.dilation,
        out_multiple,
    };
    let (plan, metas) = subsample_plan(&x.metas, h, wd, &geom, samplers)?;
    let var = push_conv(tape, x.var, w, bias, plan);
    Ok(FeatureMap { var, metas })
}

/// Ordinary strided cross-correlation, applied to every submap.
pub fn conv2d(
    tape: &mut Tape,
    x: &FeatureMap,
    w: Var,
    bias: Option<Var>,
    params: Conv2dParams,
) -> Result<FeatureMap> {
    let s = sampler::traditional(params.stride)?;
    let samplers = vec![&s; x.metas.len()];
    multisample_conv(tape, x, w, bias, params, &samplers)
}

fn check_even_padded(h: usize, w: usize, padding: usize) -> Result<()> {
    if !(h + 2 * padding).is_multiple_of(2) || !(w + 2 * padding).is_multiple_of(2) {
        return Err(invalid(format!(
            "checkered layers need even padded extents, got {}x{}",
            h + 2 * padding,
            w + 2 * padding
        )));
    }
    Ok(())
}

fn checkered_conv_using(
    tape: &mut Tape,
    x: &FeatureMap,
    w: Var,
    bias: Option<Var>,
    padding: usize,
    s: Sampler,
) -> Result<FeatureMap> {
    let [_, _, _, h, wd] = check_feature_map(tape, x)?;
    check_even_padded(h, wd, padding)?;
    let samplers = vec![&s; x.metas.len()];
    multisample_conv(tape, x, w, bias, Conv2dParams::new(2, padding, 1), &samplers)
}

/// Stride-2 convolution keeping the top-left and bottom-right window
/// elements: every input submap yields the plain strided output and the
/// output with its window grid moved one element down and right.
pub fn checkered_conv(
    tape: &mut Tape,
    x: &FeatureMap,
    w: Var,
    bias: Option<Var>,
    padding: usize,
) -> Result<FeatureMap> {
    checkered_conv_using(tape, x, w, bias, padding, sampler::checkered())
}

/// As [`checkered_conv`] with the window grid moved right, then down.
pub fn checkered_conv_complement(
    tape: &mut Tape,
    x: &FeatureMap,
    w: Var,
    bias: Option<Var>,
    padding: usize,
) -> Result<FeatureMap> {
    checkered_conv_using(tape, x, w, bias, padding, sampler::complement(&sampler::checkered()))
}

/// 3D cross-correlation over `(submap, row, col)` with weights
/// `(C_out, C_in, km, kh, kw)`; no padding along the submap axis.
pub fn conv3d_submap(
    tape: &mut Tape,
    x: &FeatureMap,
    w: Var,
    bias: Option<Var>,
    padding: usize,
) -> Result<FeatureMap> {
    let [_, c, m, h, wd] = check_feature_map(tape, x)?;
    let km = tape.value(w).shape().get(2).copied().unwrap_or(0);
    let kernel = check_conv_params(tape, c, w, bias, Some(km))?;
    if km == 0 || km > m {
        return Err(invalid(format!(
            "submap kernel extent {km} exceeds the {m} available submaps"
        )));
    }
    let geom = Geometry {
        kernel,
        stride: 1,
        padding,
        dilation: 1,
        out_multiple: 1,
    };
    let (ho, wo) = geom
        .out_extent(h, wd)
        .ok_or_else(|| invalid("kernel larger than padded input"))?;
    let pad = padding as isize;
    let plan = WindowPlan {
        kernel,
        stride: 1,
        dilation: 1,
        out_hw: (ho, wo),
        submaps: (0..=m - km)
            .map(|j| SubmapSource {
                inputs: (0..km).map(|dz| (j + dz, dz)).collect(),
                origin: (-pad, -pad),
            })
            .collect(),
    };
    let metas = x.metas[..=m - km]
        .iter()
        .map(|meta| SubmapMeta {
            height: ho,
            width: wo,
            ..*meta
        })
        .collect();
    let var = push_conv(tape, x.var, w, bias, plan);
    Ok(FeatureMap { var, metas })
}

pub(crate) fn multisample_maxpool_with(
    tape: &mut Tape,
    x: &FeatureMap,
    kernel: usize,
    dilation: usize,
    out_multiple: usize,
    samplers: &[&Sampler],
) -> Result<FeatureMap> {
    let [_, _, _, h, wd] = check_feature_map(tape, x)?;
    let stride = samplers.first().map_or(1, |s| s.k());
    let geom = Geometry {
        kernel: (kernel, kernel),
        stride,
        padding: 0,
        dilation,
        out_multiple,
    };
    let (plan, metas) = subsample_plan(&x.metas, h, wd, &geom, samplers)?;
    let (y, argmax) = kernel::pool_forward(tape.value(x.var), &plan);
    let var = tape.push(
        y,
        &[x.var],
        Box::new(move |g, inputs, _| vec![kernel::pool_backward(inputs[0].shape(), &argmax, g)]),
    );
    Ok(FeatureMap { var, metas })
}

/// Max pooling with one sampler per submap; the sampler size is the stride.
pub fn multisample_maxpool(
    tape: &mut Tape,
    x: &FeatureMap,
    kernel: usize,
    samplers: &[&Sampler],
) -> Result<FeatureMap> {
    multisample_maxpool_with(tape, x, kernel, 1, 1, samplers)
}

pub fn maxpool2d(tape: &mut Tape, x: &FeatureMap, kernel: usize, stride: usize) -> Result<FeatureMap> {
    let s = sampler::traditional(stride)?;
    let samplers = vec![&s; x.metas.len()];
    multisample_maxpool(tape, x, kernel, &samplers)
}

/// Stride-2 max pooling with the checkered sampler. Windows that run past
/// the bottom/right edge only see the elements that exist.
pub fn checkered_maxpool(tape: &mut Tape, x: &FeatureMap, kernel: usize) -> Result<FeatureMap> {
    let [_, _, _, h, wd] = check_feature_map(tape, x)?;
    check_even_padded(h, wd, 0)?;
    let s = sampler::checkered();
    let samplers = vec![&s; x.metas.len()];
    multisample_maxpool(tape, x, kernel, &samplers)
}

/// Per-channel running statistics of a batchnorm layer.
#[derive(Clone, Debug, PartialEq)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl RunningStats {
    pub fn new(channels: usize) -> Self {
        Self {
            mean: vec![0.0; channels],
            var: vec![1.0; channels],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BatchNormConfig {
    pub eps: f64,
    pub momentum: f64,
}

impl Default for BatchNormConfig {
    fn default() -> Self {
        Self {
            eps: 1e-5,
            momentum: 0.1,
        }
    }
}

/// Batch normalization with statistics pooled over batch, submaps and both
/// spatial axes. Training mode normalizes with batch statistics and folds
/// them into `running` (`running = (1 - momentum) * running + momentum *
/// batch`, unbiased variance); evaluation mode uses `running` as is.
pub fn batchnorm(
    tape: &mut Tape,
    x: &FeatureMap,
    gamma: Var,
    beta: Var,
    cfg: BatchNormConfig,
    training: bool,
    running: &mut RunningStats,
) -> Result<FeatureMap> {
    let [batch, ch, m, h, w] = check_feature_map(tape, x)?;
    for (name, p) in [("gamma", gamma), ("beta", beta)] {
        if tape.value(p).shape() != [ch] {
            return Err(invalid(format!(
                "batchnorm {name} shape {:?} does not match {ch} channels",
                tape.value(p).shape()
            )));
        }
    }
    if running.mean.len() != ch || running.var.len() != ch {
        return Err(invalid("batchnorm running statistics have the wrong channel count"));
    }
    let inner = m * h * w;
    let count = batch * inner;
    let v = tape.value(x.var);
    let channel_values = |c: usize| {
        (0..batch).flat_map(move |b| v.data()[(b * ch + c) * inner..][..inner].iter().copied())
    };

    let (mean, var): (Vec<f64>, Vec<f64>) = if training {
        let stats: Vec<(f64, f64)> = (0..ch)
            .map(|c| {
                let mu = channel_values(c).sum::<f64>() / count as f64;
                let var = channel_values(c).map(|v| (v - mu) * (v - mu)).sum::<f64>() / count as f64;
                (mu, var)
            })
            .collect();
        let mom = cfg.momentum;
        for (c, &(mu, var)) in stats.iter().enumerate() {
            let unbiased = if count > 1 {
                var * count as f64 / (count - 1) as f64
            } else {
                var
            };
            running.mean[c] = (1.0 - mom) * running.mean[c] + mom * mu;
            running.var[c] = (1.0 - mom) * running.var[c] + mom * unbiased;
        }
        stats.into_iter().unzip()
    } else {
        (running.mean.clone(), running.var.clone())
    };

    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + cfg.eps).sqrt()).collect();
    let (gd, bd) = (tape.value(gamma).data(), tape.value(beta).data());
    let mut xhat = Tensor::zeros(v.shape());
    let mut y = Tensor::zeros(v.shape());
    for b in 0..batch {
        for c in 0..ch {
            let r = (b * ch + c) * inner..(b * ch + c + 1) * inner;
            for i in r {
                let n = (v.data()[i] - mean[c]) * inv_std[c];
                xhat.data_mut()[i] = n;
                y.data_mut()[i] = gd[c] * n + bd[c];
            }
        }
    }

    let var_id = tape.push(
        y,
        &[x.var, gamma, beta],
        Box::new(move |g, inputs, _| {
            let gamma = inputs[1].data();
            let mut dx = Tensor::zeros(g.shape());
            let mut dgamma = Tensor::zeros(&[ch]);
            let mut dbeta = Tensor::zeros(&[ch]);
            for c in 0..ch {
                let idx = |b: usize| (b * ch + c) * inner..(b * ch + c + 1) * inner;
                let (mut sg, mut sgx) = (0.0, 0.0);
                for b in 0..batch {
                    for i in idx(b) {
                        sg += g.data()[i];
                        sgx += g.data()[i] * xhat.data()[i];
                    }
                }
                dbeta.data_mut()[c] = sg;
                dgamma.data_mut()[c] = sgx;
                let k = gamma[c] * inv_std[c];
                for b in 0..batch {
                    for i in idx(b) {
                        dx.data_mut()[i] = if training {
                            k * (g.data()[i] - sg / count as f64 - xhat.data()[i] * sgx / count as f64)
                        } else {
                            k * g.data()[i]
                        };
                    }
                }
            }
            vec![dx, dgamma, dbeta]
        }),
    );
    Ok(FeatureMap {
        var: var_id,
        metas: x.metas.clone(),
    })
}

/// Inverted dropout. The mask is drawn from `seed`; evaluation mode and
/// `rate == 0` pass values through unchanged.
pub fn dropout(tape: &mut Tape, x: &FeatureMap, rate: f64, seed: u64, training: bool) -> Result<FeatureMap> {
    Ok(FeatureMap {
        var: dropout_var(tape, x.var, rate, seed, training)?,
        metas: x.metas.clone(),
    })
}

pub(crate) fn dropout_var(tape: &mut Tape, x: Var, rate: f64, seed: u64, training: bool) -> Result<Var> {
    if !(0.0..1.0).contains(&rate) {
        return Err(invalid(format!("dropout rate {rate} outside [0, 1)")));
    }
    if !training || rate == 0.0 {
        return Ok(x);
    }
    let shape = tape.value(x).shape().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keep = 1.0 / (1.0 - rate);
    let mask: Vec<f64> = (0..shape.iter().product::<usize>())
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect();
    mul_const(tape, x, &Tensor::new(shape, mask)?)
}
