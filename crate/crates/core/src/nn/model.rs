//! Running a [`LayerGraph`] on a tape.

use std::ops::Range;

use crate::autograd::{Tape, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::graph::{Layer, LayerGraph, LayerKind};
use super::layers::{self, BatchNormConfig, Conv2dParams, RunningStats};
use super::ops::{self, global_pool3d, linear, mean_over_submaps, relu};
use super::FeatureMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics, active dropout drawn from `seed`.
    Train { seed: u64 },
    Eval,
}

impl Mode {
    pub fn is_training(self) -> bool {
        matches!(self, Mode::Train { .. })
    }
}

/// A layer output: a feature map, or a `(batch, features)` matrix once the
/// spatial axes are gone.
#[derive(Clone, Debug)]
pub enum Activation {
    Map(FeatureMap),
    Flat(Var),
}

impl Activation {
    pub fn var(&self) -> Var {
        match self {
            Activation::Map(m) => m.var,
            Activation::Flat(v) => *v,
        }
    }

    pub fn as_map(&self) -> Option<&FeatureMap> {
        match self {
            Activation::Map(m) => Some(m),
            Activation::Flat(_) => None,
        }
    }
}

pub struct ForwardOutput {
    /// Output of every executed layer, in order.
    pub activations: Vec<Activation>,
    /// Tape handles of each executed layer's parameters.
    pub params: Vec<Vec<Var>>,
    /// Batchnorm running statistics produced in training mode, by layer index.
    pub running_updates: Vec<(usize, RunningStats)>,
}

impl ForwardOutput {
    pub fn output(&self) -> Option<&Activation> {
        self.activations.last()
    }
}

fn layer_error(index: usize, layer: &Layer, e: Error) -> Error {
    match e {
        Error::InvalidArgument(reason) => Error::ShapeMismatch {
            index,
            layer: layer.kind.name().to_owned(),
            reason,
        },
        other => other,
    }
}

impl LayerGraph {
    /// Runs every layer on `images` (`(batch, channels, height, width)`) and
    /// returns the final output value.
    pub fn forward(&self, images: &Tensor, mode: Mode) -> Result<Tensor> {
        let mut tape = Tape::new();
        let x = FeatureMap::from_images(&mut tape, images.clone(), false)?;
        let input = x.var;
        let out = self.forward_range(&mut tape, Activation::Map(x), mode, 0..self.len())?;
        let last = out.output().map_or(input, Activation::var);
        Ok(tape.value(last).clone())
    }

    /// Runs layers `range` starting from `input`, recording on `tape`.
    pub fn forward_range(
        &self,
        tape: &mut Tape,
        input: Activation,
        mode: Mode,
        range: Range<usize>,
    ) -> Result<ForwardOutput> {
        let mut out = ForwardOutput {
            activations: Vec::with_capacity(range.len()),
            params: Vec::with_capacity(range.len()),
            running_updates: Vec::new(),
        };
        let mut act = input;
        for index in range {
            let layer = &self.layers()[index];
            let pvars: Vec<Var> = layer.params.iter().map(|p| tape.variable(p.clone())).collect();
            act = self
                .apply_layer(tape, index, layer, act, &pvars, mode, &mut out.running_updates)
                .map_err(|e| layer_error(index, layer, e))?;
            out.params.push(pvars);
            out.activations.push(act.clone());
        }
        Ok(out)
    }

    #[allow(clippy::too_many_arguments)]
    fn apply_layer(
        &self,
        tape: &mut Tape,
        index: usize,
        layer: &Layer,
        act: Activation,
        pvars: &[Var],
        mode: Mode,
        updates: &mut Vec<(usize, RunningStats)>,
    ) -> Result<Activation> {
        let need_map = |a: &Activation| {
            a.as_map().cloned().ok_or_else(|| Error::ShapeMismatch {
                index,
                layer: layer.kind.name().to_owned(),
                reason: "needs a spatial feature map".into(),
            })
        };
        Ok(match &layer.kind {
            LayerKind::Conv(spec) => {
                let x = need_map(&act)?;
                let y = match spec.submap_kernel {
                    Some(_) => layers::conv3d_submap(tape, &x, pvars[0], Some(pvars[1]), spec.padding)?,
                    None => {
                        let s = spec.sampling.sampler(spec.stride)?;
                        let samplers = vec![&s; x.metas.len()];
                        layers::multisample_conv_with(
                            tape,
                            &x,
                            pvars[0],
                            Some(pvars[1]),
                            Conv2dParams::new(spec.stride, spec.padding, spec.dilation),
                            spec.out_multiple,
                            &samplers,
                        )?
                    }
                };
                Activation::Map(y)
            }
            LayerKind::MaxPool(spec) => {
                let x = need_map(&act)?;
                let s = spec.sampling.sampler(spec.stride)?;
                let samplers = vec![&s; x.metas.len()];
                Activation::Map(layers::multisample_maxpool_with(
                    tape,
                    &x,
                    spec.kernel,
                    spec.dilation,
                    spec.out_multiple,
                    &samplers,
                )?)
            }
            LayerKind::BatchNorm { eps, momentum, .. } => {
                let x = need_map(&act)?;
                let mut stats = RunningStats {
                    mean: layer.buffers[0].data().to_vec(),
                    var: layer.buffers[1].data().to_vec(),
                };
                let cfg = BatchNormConfig {
                    eps: *eps,
                    momentum: *momentum,
                };
                let y = layers::batchnorm(tape, &x, pvars[0], pvars[1], cfg, mode.is_training(), &mut stats)?;
                if mode.is_training() {
                    updates.push((index, stats));
                }
                Activation::Map(y)
            }
            LayerKind::Relu => match act {
                Activation::Map(x) => Activation::Map(FeatureMap {
                    var: relu(tape, x.var),
                    metas: x.metas,
                }),
                Activation::Flat(v) => Activation::Flat(relu(tape, v)),
            },
            LayerKind::Dropout { rate } => {
                let seed = match mode {
                    Mode::Train { seed } => seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
                    Mode::Eval => 0,
                };
                match act {
                    Activation::Map(x) => {
                        Activation::Map(layers::dropout(tape, &x, *rate, seed, mode.is_training())?)
                    }
                    Activation::Flat(v) => {
                        Activation::Flat(layers::dropout_var(tape, v, *rate, seed, mode.is_training())?)
                    }
                }
            }
            LayerKind::MeanSubmaps => Activation::Map(mean_over_submaps(tape, &need_map(&act)?)),
            LayerKind::GlobalPool3d(m) => Activation::Flat(global_pool3d(tape, &need_map(&act)?, *m)),
            LayerKind::Linear { .. } => Activation::Flat(linear(tape, act.var(), pvars[0], pvars[1])?),
        })
    }

    /// Stores batchnorm running statistics produced by a training forward.
    pub fn apply_running_updates(&mut self, updates: Vec<(usize, RunningStats)>) {
        for (index, stats) in updates {
            let layer = &mut self.layers_mut()[index];
            layer.buffers[0] = Tensor::new(vec![stats.mean.len()], stats.mean).expect("sized");
            layer.buffers[1] = Tensor::new(vec![stats.var.len()], stats.var).expect("sized");
        }
    }

    /// Evaluation-mode forward that returns the mean cross-entropy and the
    /// predicted classes.
    pub fn evaluate(&self, images: &Tensor, labels: &[usize]) -> Result<(f64, Vec<usize>)> {
        let logits = self.forward(images, Mode::Eval)?;
        let mut tape = Tape::new();
        let z = tape.constant(logits.clone());
        let loss = ops::cross_entropy(&mut tape, z, labels)?;
        Ok((tape.value(loss).data()[0], argmax_rows(&logits)))
    }
}

/// Row-wise argmax of a `(rows, cols)` tensor.
pub fn argmax_rows(t: &Tensor) -> Vec<usize> {
    let cols = t.shape().last().copied().unwrap_or(1).max(1);
    t.data()
        .chunks(cols)
        .map(|r| {
            r.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc })
                .0
        })
        .collect()
}
