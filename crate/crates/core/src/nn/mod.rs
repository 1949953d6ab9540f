//! Minimal CNN core: feature maps with a submap axis, differentiable
//! layers, layer graphs and the traditional → checkered converters.

mod convert;
mod graph;
pub(crate) mod kernel;
mod layers;
mod model;
mod ops;
mod params;

pub use convert::{convert_to_ccnn, convert_with, dilation_equivalent};
pub use graph::{parse_graph, ActShape, ConvSpec, InputSpec, Layer, LayerGraph, LayerKind, PoolSpec, Sampling};
pub use layers::{
    batchnorm, checkered_conv, checkered_conv_complement, checkered_maxpool, conv2d,
    conv3d_submap, dropout, maxpool2d, multisample_conv, multisample_maxpool, BatchNormConfig,
    Conv2dParams, RunningStats,
};
pub use model::{argmax_rows, Activation, ForwardOutput, Mode};
pub use ops::{
    add, cross_entropy, dot_const, global_pool3d, linear, mean, mean_over_submaps, mul_const,
    relu, scale, sum, PoolMode,
};

use crate::autograd::{Tape, Var};
use crate::error::{invalid, Result};
use crate::tensor::Tensor;
use crate::trace::SubmapMeta;

/// A `(batch, channels, submaps, height, width)` value on a tape plus the
/// provenance of each submap.
#[derive(Clone, Debug)]
pub struct FeatureMap {
    pub var: Var,
    pub metas: Vec<SubmapMeta>,
}

impl FeatureMap {
    /// Wraps `(batch, channels, height, width)` images as a single-submap map.
    pub fn from_images(tape: &mut Tape, images: Tensor, requires_grad: bool) -> Result<Self> {
        let &[b, c, h, w] = images.shape() else {
            return Err(invalid(format!(
                "images must be (batch, channels, height, width), got {:?}",
                images.shape()
            )));
        };
        let t = images.reshape(&[b, c, 1, h, w])?;
        let var = if requires_grad {
            tape.variable(t)
        } else {
            tape.constant(t)
        };
        Ok(Self {
            var,
            metas: vec![SubmapMeta::root(h, w)],
        })
    }

    /// Wraps a 5D tensor with explicit metas.
    pub fn from_parts(tape: &mut Tape, value: Tensor, metas: Vec<SubmapMeta>, requires_grad: bool) -> Result<Self> {
        if value.ndim() != 5 || value.shape()[2] != metas.len() {
            return Err(invalid(format!(
                "value shape {:?} does not fit {} submap metas",
                value.shape(),
                metas.len()
            )));
        }
        let var = if requires_grad {
            tape.variable(value)
        } else {
            tape.constant(value)
        };
        Ok(Self { var, metas })
    }

    pub fn shape(&self, tape: &Tape) -> [usize; 5] {
        kernel::dims5(tape.value(self.var))
    }

    /// Submap `m` as a `(batch, channels, height, width)` tensor.
    pub fn submap(&self, tape: &Tape, m: usize) -> Tensor {
        extract_submap(tape.value(self.var), m)
    }

    /// Index of the submap whose samples start at the image origin.
    pub fn origin_submap(&self) -> Option<usize> {
        self.metas
            .iter()
            .position(|m| m.row_offset == 0 && m.col_offset == 0)
    }
}

pub(crate) fn extract_submap(v: &Tensor, m: usize) -> Tensor {
    let [b, c, ms, h, w] = kernel::dims5(v);
    let plane = h * w;
    let mut out = Vec::with_capacity(b * c * plane);
    for bc in 0..b * c {
        out.extend_from_slice(&v.data()[(bc * ms + m) * plane..][..plane]);
    }
    Tensor::new(vec![b, c, h, w], out).expect("sized")
}
