//! Closed-form resolution and complexity calculators, plus a shape-only
//! cost counter used to check them against real layer graphs.

use std::fmt;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::nn::{convert_to_ccnn, dilation_equivalent, ActShape, ConvSpec, InputSpec, LayerGraph, LayerKind};

/// Resolution after `steps` layers with stride `k` in `d` dimensions taking
/// `n` samples per window: `r * (n / k^d)^steps`.
pub fn resolution_after(r: u64, k: u64, d: u32, n: u64, steps: u32) -> Result<u64> {
    if k < 1 {
        return Err(invalid("stride must be at least 1"));
    }
    let window = k
        .checked_pow(d)
        .ok_or_else(|| invalid("window size overflows"))?;
    if n < 1 || n > window {
        return Err(invalid(format!("sample count {n} outside 1..={window}")));
    }
    let mut res = r;
    for step in 0..steps {
        let scaled = res
            .checked_mul(n)
            .ok_or_else(|| invalid("resolution overflows"))?;
        if scaled % window != 0 {
            return Err(invalid(format!(
                "resolution {res} is not divisible by {window}/{n} at step {}",
                step + 1
            )));
        }
        res = scaled / window;
    }
    Ok(res)
}

/// An exact power of `sqrt(2)`: the value is `2^(half_log2 / 2)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Factor {
    pub half_log2: i64,
}

impl Factor {
    pub const ONE: Factor = Factor { half_log2: 0 };

    pub fn pow2(exp: i64) -> Self {
        Self { half_log2: 2 * exp }
    }

    pub fn sqrt2_pow(exp: i64) -> Self {
        Self { half_log2: exp }
    }

    /// `num / den` when it is an exact power of two.
    pub fn from_ratio(num: u128, den: u128) -> Option<Self> {
        if num == 0 || den == 0 {
            return None;
        }
        let (pn, pd) = (num.trailing_zeros(), den.trailing_zeros());
        if num >> pn != den >> pd {
            return None;
        }
        Some(Self::pow2(pn as i64 - pd as i64))
    }

    pub fn value(self) -> f64 {
        2f64.powf(self.half_log2 as f64 / 2.0)
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let h = self.half_log2;
        match (h % 2 == 0, h >= 0) {
            (true, true) => write!(f, "{}", 1u128 << (h / 2)),
            (true, false) => write!(f, "1/{}", 1u128 << (-h / 2)),
            (false, _) => write!(f, "2^({h}/2)"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Traditional,
    Checkered,
    Dilated,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Traditional, Scheme::Checkered, Scheme::Dilated];

    /// Per-step change of spatial resolution, in half powers of two.
    fn resolution_half_log2(self) -> i64 {
        match self {
            Scheme::Traditional => -4,
            Scheme::Checkered => -2,
            Scheme::Dilated => 0,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Traditional => "Traditional",
            Scheme::Checkered => "Checkered",
            Scheme::Dilated => "Dilated",
        })
    }
}

/// How the channel count changes at each subsampling step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelRule {
    Double,
    Constant,
    Sqrt2,
}

impl ChannelRule {
    fn channel_half_log2(self) -> i64 {
        match self {
            ChannelRule::Double => 2,
            ChannelRule::Constant => 0,
            ChannelRule::Sqrt2 => 1,
        }
    }
}

/// Memory and compute of a layer preceded by `s` subsampling steps,
/// relative to the same layer with none.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ComplexityProfile {
    pub scheme: Scheme,
    pub channel_rule: ChannelRule,
    pub s: u32,
    pub memory_factor: Factor,
    pub compute_factor: Factor,
}

/// Activations scale with `channels * resolution`, a same-width conv's
/// multiply-accumulates with `channels^2 * resolution`.
pub fn complexity_profile(scheme: Scheme, channel_rule: ChannelRule, s: u32) -> Result<ComplexityProfile> {
    if channel_rule == ChannelRule::Sqrt2 && scheme != Scheme::Checkered {
        return Err(Error::Unsupported(format!(
            "the sqrt2 channel rule is only defined for checkered subsampling, not {scheme}"
        )));
    }
    let s64 = i64::from(s);
    let ch = channel_rule.channel_half_log2() * s64;
    let res = scheme.resolution_half_log2() * s64;
    Ok(ComplexityProfile {
        scheme,
        channel_rule,
        s,
        memory_factor: Factor::sqrt2_pow(ch + res),
        compute_factor: Factor::sqrt2_pow(2 * ch + res),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LayerCost {
    pub index: usize,
    pub layer: String,
    /// Multiply-accumulates (conv and linear only; bias and normalization ignored).
    pub macs: u64,
    /// Output activation elements, batch included.
    pub activations: u64,
}

/// Counts per-layer MACs and activation sizes from shapes alone.
pub fn measured_cost(graph: &LayerGraph, batch: usize) -> Result<Vec<LayerCost>> {
    let shapes = graph.shapes()?;
    let input = graph.input();
    let mut prev = ActShape::Map {
        channels: input.channels,
        submaps: 1,
        height: input.height,
        width: input.width,
    };
    let batch = batch as u64;
    let mut costs = Vec::with_capacity(shapes.len());
    for ((index, layer), &shape) in graph.layers().iter().enumerate().zip(&shapes) {
        let out = shape.elements() as u64;
        let macs = match (&layer.kind, prev) {
            (LayerKind::Conv(c), ActShape::Map { channels: cin, .. }) => {
                let taps = (cin * c.kernel.0 * c.kernel.1 * c.submap_kernel.unwrap_or(1)) as u64;
                batch * out * taps
            }
            (LayerKind::Linear { in_features, out_features }, _) => {
                batch * (*in_features as u64) * (*out_features as u64)
            }
            _ => 0,
        };
        costs.push(LayerCost {
            index,
            layer: layer.kind.name().to_owned(),
            macs,
            activations: batch * out,
        });
        prev = shape;
    }
    Ok(costs)
}

/// A stack of `steps` stages, each a stride-2 3x3 conv followed by a
/// same-width 3x3 "probe" conv, after an initial probe at full resolution.
/// Probe `t` sits at layer index `2 * t`.
pub fn reference_graph(
    scheme: Scheme,
    channel_rule: ChannelRule,
    steps: u32,
    base_channels: usize,
    size: usize,
) -> Result<LayerGraph> {
    let channels = |t: u32| match channel_rule {
        ChannelRule::Double => Ok(base_channels << t),
        ChannelRule::Constant => Ok(base_channels),
        ChannelRule::Sqrt2 => Err(Error::Unsupported(
            "sqrt2 channel counts are not integral; no reference graph".into(),
        )),
    };
    let mut kinds = vec![LayerKind::Conv(ConvSpec::new(channels(0)?, 3, 1, 1))];
    for t in 1..=steps {
        kinds.push(LayerKind::Conv(ConvSpec::new(channels(t)?, 3, 2, 1)));
        kinds.push(LayerKind::Conv(ConvSpec::new(channels(t)?, 3, 1, 1)));
    }
    let input = InputSpec {
        channels: base_channels,
        height: size,
        width: size,
    };
    let traditional = LayerGraph::new(input, kinds, 0)?;
    match scheme {
        Scheme::Traditional => Ok(traditional),
        Scheme::Checkered => convert_to_ccnn(&traditional),
        Scheme::Dilated => dilation_equivalent(&traditional),
    }
}

/// Exact `(memory, compute)` ratios of probe `s` to probe 0 in a reference
/// graph; `None` when a ratio is not a power of two.
pub fn measured_factors(
    scheme: Scheme,
    channel_rule: ChannelRule,
    s: u32,
    max_steps: u32,
    size: usize,
) -> Result<(Option<Factor>, Option<Factor>)> {
    if s > max_steps {
        return Err(invalid("probe depth beyond the reference graph"));
    }
    let graph = reference_graph(scheme, channel_rule, max_steps, 4, size)?;
    let costs = measured_cost(&graph, 1)?;
    let (base, probe) = (&costs[0], &costs[2 * s as usize]);
    Ok((
        Factor::from_ratio(probe.activations.into(), base.activations.into()),
        Factor::from_ratio(probe.macs.into(), base.macs.into()),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolution_examples() {
        assert_eq!(resolution_after(256, 2, 2, 2, 3).unwrap(), 32);
        assert_eq!(resolution_after(256, 2, 2, 1, 3).unwrap(), 4);
        assert_eq!(resolution_after(81, 3, 2, 3, 1).unwrap(), 27);
        assert_eq!(resolution_after(100, 2, 2, 4, 7).unwrap(), 100);
    }

    #[test]
    fn resolution_errors() {
        assert!(resolution_after(6, 2, 2, 1, 1).is_err());
        assert!(resolution_after(16, 2, 2, 5, 1).is_err());
        assert!(resolution_after(16, 2, 2, 0, 1).is_err());
        assert!(resolution_after(16, 0, 2, 1, 1).is_err());
    }

    #[test]
    fn factor_display_and_ratio() {
        assert_eq!(Factor::pow2(3).to_string(), "8");
        assert_eq!(Factor::pow2(-2).to_string(), "1/4");
        assert_eq!(Factor::ONE.to_string(), "1");
        assert_eq!(Factor::sqrt2_pow(-3).to_string(), "2^(-3/2)");
        assert_eq!(Factor::from_ratio(48, 6), Some(Factor::pow2(3)));
        assert_eq!(Factor::from_ratio(3, 12), Some(Factor::pow2(-2)));
        assert_eq!(Factor::from_ratio(3, 2), None);
        assert!((Factor::sqrt2_pow(1).value() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn profile_examples() {
        let p = complexity_profile(Scheme::Checkered, ChannelRule::Double, 3).unwrap();
        assert_eq!((p.memory_factor, p.compute_factor), (Factor::ONE, Factor::pow2(3)));
        let p = complexity_profile(Scheme::Dilated, ChannelRule::Constant, 5).unwrap();
        assert_eq!((p.memory_factor, p.compute_factor), (Factor::ONE, Factor::ONE));
        let p = complexity_profile(Scheme::Checkered, ChannelRule::Sqrt2, 2).unwrap();
        assert_eq!((p.memory_factor, p.compute_factor), (Factor::pow2(-1), Factor::ONE));
        assert!(complexity_profile(Scheme::Dilated, ChannelRule::Sqrt2, 1).is_err());
    }

    #[test]
    fn one_by_one_conv_macs() {
        let g = LayerGraph::from_text("input c=1 h=4 w=4\nconv out=1 k=1\n", 0).unwrap();
        let c = measured_cost(&g, 1).unwrap();
        assert_eq!(c[0].macs, 16);
        assert_eq!(c[0].activations, 16);
    }
}
