//! Layer graphs: an input spec, an ordered list of layer descriptors, and
//! the parameter tensors each layer owns.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sampler::{self, Sampler};
use crate::tensor::Tensor;

use super::layers::Geometry;
use super::PoolMode;

/// How a strided layer samples its `stride x stride` windows.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Sampling {
    /// Top-left element only.
    #[default]
    Traditional,
    /// Top-left and bottom-right.
    Checkered,
    /// Top-right and bottom-left.
    Complement,
    /// Every element.
    Complete,
}

impl Sampling {
    pub fn sampler(self, stride: usize) -> Result<Sampler> {
        match (self, stride) {
            (Sampling::Traditional, k) => sampler::traditional(k),
            (Sampling::Complete, k) => sampler::complete(k),
            (Sampling::Checkered, 2) => Ok(sampler::checkered()),
            (Sampling::Complement, 2) => Ok(sampler::complement(&sampler::checkered())),
            (s, k) => Err(Error::Unsupported(format!("{s} sampling needs stride 2, got {k}"))),
        }
    }

    fn samples(self, stride: usize) -> usize {
        match self {
            Sampling::Traditional => 1,
            Sampling::Checkered | Sampling::Complement => 2,
            Sampling::Complete => stride * stride,
        }
    }
}

impl fmt::Display for Sampling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sampling::Traditional => "traditional",
            Sampling::Checkered => "checkered",
            Sampling::Complement => "complement",
            Sampling::Complete => "complete",
        })
    }
}

impl FromStr for Sampling {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "traditional" => Ok(Self::Traditional),
            "checkered" => Ok(Self::Checkered),
            "complement" => Ok(Self::Complement),
            "complete" => Ok(Self::Complete),
            _ => Err(format!("unknown sampler {s:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConvSpec {
    pub out_channels: usize,
    pub kernel: (usize, usize),
    pub stride: usize,
    pub padding: usize,
    pub dilation: usize,
    /// Extent along the submap axis; `Some` makes this a 3D submap conv.
    pub submap_kernel: Option<usize>,
    pub sampling: Sampling,
    /// Rounds the dense output extent up to a multiple (see `dilation_equivalent`).
    pub out_multiple: usize,
}

impl ConvSpec {
    pub fn new(out_channels: usize, kernel: usize, stride: usize, padding: usize) -> Self {
        Self {
            out_channels,
            kernel: (kernel, kernel),
            stride,
            padding,
            dilation: 1,
            submap_kernel: None,
            sampling: Sampling::Traditional,
            out_multiple: 1,
        }
    }

    pub(crate) fn geometry(&self) -> Geometry {
        Geometry {
            kernel: self.kernel,
            stride: self.stride,
            padding: self.padding,
            dilation: self.dilation,
            out_multiple: self.out_multiple,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PoolSpec {
    pub kernel: usize,
    pub stride: usize,
    pub dilation: usize,
    pub sampling: Sampling,
    pub out_multiple: usize,
}

impl PoolSpec {
    pub fn new(kernel: usize, stride: usize) -> Self {
        Self {
            kernel,
            stride,
            dilation: 1,
            sampling: Sampling::Traditional,
            out_multiple: 1,
        }
    }

    pub(crate) fn geometry(&self) -> Geometry {
        Geometry {
            kernel: (self.kernel, self.kernel),
            stride: self.stride,
            padding: 0,
            dilation: self.dilation,
            out_multiple: self.out_multiple,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LayerKind {
    Conv(ConvSpec),
    BatchNorm { channels: usize, eps: f64, momentum: f64 },
    Relu,
    MaxPool(PoolSpec),
    Dropout { rate: f64 },
    MeanSubmaps,
    GlobalPool3d(PoolMode),
    Linear { in_features: usize, out_features: usize },
}

impl LayerKind {
    pub fn name(&self) -> &'static str {
        match self {
            LayerKind::Conv(_) => "conv",
            LayerKind::BatchNorm { .. } => "bn",
            LayerKind::Relu => "relu",
            LayerKind::MaxPool(_) => "maxpool",
            LayerKind::Dropout { .. } => "dropout",
            LayerKind::MeanSubmaps => "mean_submaps",
            LayerKind::GlobalPool3d(_) => "gpool3d",
            LayerKind::Linear { .. } => "linear",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InputSpec {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

/// Activation shape without the batch axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ActShape {
    Map { channels: usize, submaps: usize, height: usize, width: usize },
    Flat { features: usize },
}

impl ActShape {
    pub fn elements(&self) -> usize {
        match *self {
            ActShape::Map { channels, submaps, height, width } => channels * submaps * height * width,
            ActShape::Flat { features } => features,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub kind: LayerKind,
    /// Trainable tensors: `[weight, bias]` or `[gamma, beta]`.
    pub params: Vec<Tensor>,
    /// Non-trainable state: batchnorm `[running_mean, running_var]`.
    pub buffers: Vec<Tensor>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGraph {
    input: InputSpec,
    layers: Vec<Layer>,
}

fn mismatch(index: usize, kind: &LayerKind, reason: impl Into<String>) -> Error {
    Error::ShapeMismatch {
        index,
        layer: kind.name().to_owned(),
        reason: reason.into(),
    }
}

/// Output shape of one layer given its input shape.
pub(crate) fn infer_layer(index: usize, kind: &LayerKind, input: ActShape) -> Result<ActShape> {
    let map = |what: &str| match input {
        ActShape::Map { channels, submaps, height, width } => Ok((channels, submaps, height, width)),
        ActShape::Flat { .. } => Err(mismatch(index, kind, format!("{what} needs a spatial feature map"))),
    };
    Ok(match kind {
        LayerKind::Conv(spec) => {
            let (_, m, h, w) = map("conv")?;
            let geom = spec.geometry();
            let (ho, wo) = geom
                .out_extent(h, w)
                .ok_or_else(|| mismatch(index, kind, format!("kernel does not fit {h}x{w} input")))?;
            let submaps = match spec.submap_kernel {
                Some(km) => {
                    if spec.stride != 1 {
                        return Err(Error::UnsupportedLayer {
                            index,
                            reason: "submap convolutions must have stride 1".into(),
                        });
                    }
                    if km == 0 || km > m {
                        return Err(mismatch(index, kind, format!("submap kernel {km} exceeds {m} submaps")));
                    }
                    m - km + 1
                }
                None => {
                    spec.sampling
                        .sampler(spec.stride)
                        .map_err(|e| Error::UnsupportedLayer { index, reason: e.to_string() })?;
                    m * spec.sampling.samples(spec.stride)
                }
            };
            ActShape::Map { channels: spec.out_channels, submaps, height: ho, width: wo }
        }
        LayerKind::MaxPool(spec) => {
            let (c, m, h, w) = map("maxpool")?;
            spec.sampling
                .sampler(spec.stride)
                .map_err(|e| Error::UnsupportedLayer { index, reason: e.to_string() })?;
            let (ho, wo) = spec
                .geometry()
                .out_extent(h, w)
                .ok_or_else(|| mismatch(index, kind, format!("window does not fit {h}x{w} input")))?;
            ActShape::Map { channels: c, submaps: m * spec.sampling.samples(spec.stride), height: ho, width: wo }
        }
        LayerKind::BatchNorm { channels, .. } => {
            let (c, ..) = map("batchnorm")?;
            if c != *channels {
                return Err(mismatch(index, kind, format!("expects {channels} channels, got {c}")));
            }
            input
        }
        LayerKind::Relu | LayerKind::Dropout { .. } => input,
        LayerKind::MeanSubmaps => {
            let (c, _, h, w) = map("mean_submaps")?;
            ActShape::Map { channels: c, submaps: 1, height: h, width: w }
        }
        LayerKind::GlobalPool3d(_) => {
            let (c, ..) = map("gpool3d")?;
            ActShape::Flat { features: c }
        }
        LayerKind::Linear { in_features, out_features } => {
            if input.elements() != *in_features {
                return Err(mismatch(
                    index,
                    kind,
                    format!("expects {in_features} features, input has {}", input.elements()),
                ));
            }
            ActShape::Flat { features: *out_features }
        }
    })
}

fn uniform(rng: &mut ChaCha8Rng, shape: &[usize], bound: f64) -> Tensor {
    let dist = Uniform::new_inclusive(-bound, bound);
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| dist.sample(rng)).collect()).expect("sized")
}

impl LayerGraph {
    /// Builds a graph and draws fan-in-scaled uniform weights from `seed`.
    pub fn new(input: InputSpec, kinds: Vec<LayerKind>, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut shape = ActShape::Map {
            channels: input.channels,
            submaps: 1,
            height: input.height,
            width: input.width,
        };
        let mut layers = Vec::with_capacity(kinds.len());
        for (index, kind) in kinds.into_iter().enumerate() {
            let next = infer_layer(index, &kind, shape)?;
            let (params, buffers) = match &kind {
                LayerKind::Conv(spec) => {
                    let ActShape::Map { channels: cin, .. } = shape else { unreachable!() };
                    let (kh, kw) = spec.kernel;
                    let wshape = match spec.submap_kernel {
                        Some(km) => vec![spec.out_channels, cin, km, kh, kw],
                        None => vec![spec.out_channels, cin, kh, kw],
                    };
                    let fan_in: usize = wshape[1..].iter().product();
                    let bound = 1.0 / (fan_in as f64).sqrt();
                    let w = uniform(&mut rng, &wshape, bound);
                    let b = uniform(&mut rng, &[spec.out_channels], bound);
                    (vec![w, b], vec![])
                }
                LayerKind::BatchNorm { channels, .. } => (
                    vec![Tensor::ones(&[*channels]), Tensor::zeros(&[*channels])],
                    vec![Tensor::zeros(&[*channels]), Tensor::ones(&[*channels])],
                ),
                LayerKind::Linear { in_features, out_features } => {
                    let bound = 1.0 / (*in_features as f64).sqrt();
                    let w = uniform(&mut rng, &[*out_features, *in_features], bound);
                    let b = uniform(&mut rng, &[*out_features], bound);
                    (vec![w, b], vec![])
                }
                _ => (vec![], vec![]),
            };
            layers.push(Layer { kind, params, buffers });
            shape = next;
        }
        Ok(Self { input, layers })
    }

    /// Assembles a graph from existing layers, checking shapes.
    pub fn from_layers(input: InputSpec, layers: Vec<Layer>) -> Result<Self> {
        let g = Self { input, layers };
        g.shapes()?;
        Ok(g)
    }

    pub(crate) fn from_layers_unchecked(input: InputSpec, layers: Vec<Layer>) -> Self {
        Self { input, layers }
    }

    pub fn input(&self) -> InputSpec {
        self.input
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Activation shape after every layer.
    pub fn shapes(&self) -> Result<Vec<ActShape>> {
        self.shapes_from(ActShape::Map {
            channels: self.input.channels,
            submaps: 1,
            height: self.input.height,
            width: self.input.width,
        })
    }

    pub fn shapes_from(&self, input: ActShape) -> Result<Vec<ActShape>> {
        let mut shape = input;
        self.layers
            .iter()
            .enumerate()
            .map(|(i, l)| {
                shape = infer_layer(i, &l.kind, shape)?;
                Ok(shape)
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().flat_map(|l| &l.params).map(Tensor::len).sum()
    }

    pub fn parameters(&self) -> impl Iterator<Item = &Tensor> {
        self.layers.iter().flat_map(|l| &l.params)
    }

    pub fn parameters_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.layers.iter_mut().flat_map(|l| &mut l.params)
    }

    /// Number of stride-2 subsampling layers.
    pub fn subsampling_layers(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| match &l.kind {
                LayerKind::Conv(c) => c.stride > 1,
                LayerKind::MaxPool(p) => p.stride > 1,
                _ => false,
            })
            .count()
    }

    pub fn to_text(&self) -> String {
        self.to_string()
    }

    /// Parses the line format and initializes parameters from `seed`.
    pub fn from_text(text: &str, seed: u64) -> Result<Self> {
        let (input, kinds) = parse_graph(text)?;
        Self::new(input, kinds, seed)
    }
}

impl fmt::Display for LayerGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = self.input;
        writeln!(f, "input c={} h={} w={}", i.channels, i.height, i.width)?;
        for l in &self.layers {
            writeln!(f, "{}", format_layer(&l.kind))?;
        }
        Ok(())
    }
}

fn format_kernel((kh, kw): (usize, usize)) -> String {
    if kh == kw {
        kh.to_string()
    } else {
        format!("{kh}x{kw}")
    }
}

fn format_layer(kind: &LayerKind) -> String {
    let mut s = kind.name().to_owned();
    match kind {
        LayerKind::Conv(c) => {
            let _ = write!(
                s,
                " out={} k={} stride={} pad={} dil={}",
                c.out_channels,
                format_kernel(c.kernel),
                c.stride,
                c.padding,
                c.dilation
            );
            if let Some(km) = c.submap_kernel {
                let _ = write!(s, " km={km}");
            }
            if c.sampling != Sampling::Traditional {
                let _ = write!(s, " sampler={}", c.sampling);
            }
            if c.out_multiple != 1 {
                let _ = write!(s, " mult={}", c.out_multiple);
            }
        }
        LayerKind::MaxPool(p) => {
            let _ = write!(s, " k={} stride={}", p.kernel, p.stride);
            if p.dilation != 1 {
                let _ = write!(s, " dil={}", p.dilation);
            }
            if p.sampling != Sampling::Traditional {
                let _ = write!(s, " sampler={}", p.sampling);
            }
            if p.out_multiple != 1 {
                let _ = write!(s, " mult={}", p.out_multiple);
            }
        }
        LayerKind::BatchNorm { channels, eps, momentum } => {
            let _ = write!(s, " c={channels} eps={eps:e} momentum={momentum}");
        }
        LayerKind::Dropout { rate } => {
            let _ = write!(s, " p={rate}");
        }
        LayerKind::GlobalPool3d(mode) => {
            s.push_str(match mode {
                PoolMode::Avg => " mode=avg",
                PoolMode::Max => " mode=max",
            });
        }
        LayerKind::Linear { in_features, out_features } => {
            let _ = write!(s, " in={in_features} out={out_features}");
        }
        LayerKind::Relu | LayerKind::MeanSubmaps => {}
    }
    s
}

struct Fields<'a> {
    line: usize,
    pairs: Vec<(&'a str, &'a str)>,
}

impl<'a> Fields<'a> {
    fn parse(line: usize, tokens: &[&'a str]) -> Result<Self> {
        let pairs = tokens
            .iter()
            .map(|t| {
                t.split_once('=').ok_or_else(|| Error::Parse {
                    line,
                    reason: format!("expected key=value, got {t:?}"),
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { line, pairs })
    }

    fn take(&mut self, key: &str) -> Option<&'a str> {
        let pos = self.pairs.iter().position(|(k, _)| *k == key)?;
        Some(self.pairs.remove(pos).1)
    }

    fn value<T: FromStr>(&mut self, key: &str, default: Option<T>) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        let line = self.line;
        match (self.take(key), default) {
            (Some(v), _) => v.parse().map_err(|e| Error::Parse {
                line,
                reason: format!("bad value for {key}: {e}"),
            }),
            (None, Some(d)) => Ok(d),
            (None, None) => Err(Error::Parse {
                line,
                reason: format!("missing {key}="),
            }),
        }
    }

    fn kernel(&mut self) -> Result<(usize, usize)> {
        let line = self.line;
        let raw = self.take("k").ok_or(Error::Parse {
            line,
            reason: "missing k=".into(),
        })?;
        let bad = || Error::Parse {
            line,
            reason: format!("bad kernel size {raw:?}"),
        };
        match raw.split_once('x') {
            Some((a, b)) => Ok((a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?)),
            None => {
                let k = raw.parse().map_err(|_| bad())?;
                Ok((k, k))
            }
        }
    }

    fn finish(self) -> Result<()> {
        match self.pairs.first() {
            None => Ok(()),
            Some((k, _)) => Err(Error::Parse {
                line: self.line,
                reason: format!("unknown key {k:?}"),
            }),
        }
    }
}

fn parse_layer(line: usize, name: &str, rest: &[&str]) -> Result<LayerKind> {
    let mut f = Fields::parse(line, rest)?;
    let kind = match name {
        "conv" => {
            let out_channels = f.value("out", None)?;
            let kernel = f.kernel()?;
            LayerKind::Conv(ConvSpec {
                out_channels,
                kernel,
                stride: f.value("stride", Some(1))?,
                padding: f.value("pad", Some(0))?,
                dilation: f.value("dil", Some(1))?,
                submap_kernel: match f.take("km") {
                    Some(v) => Some(v.parse().map_err(|_| Error::Parse {
                        line,
                        reason: format!("bad km {v:?}"),
                    })?),
                    None => None,
                },
                sampling: f.value("sampler", Some(Sampling::Traditional))?,
                out_multiple: f.value("mult", Some(1))?,
            })
        }
        "maxpool" => {
            let (kernel, _) = f.kernel()?;
            LayerKind::MaxPool(PoolSpec {
                kernel,
                stride: f.value("stride", Some(kernel))?,
                dilation: f.value("dil", Some(1))?,
                sampling: f.value("sampler", Some(Sampling::Traditional))?,
                out_multiple: f.value("mult", Some(1))?,
            })
        }
        "bn" => LayerKind::BatchNorm {
            channels: f.value("c", None)?,
            eps: f.value("eps", Some(1e-5))?,
            momentum: f.value("momentum", Some(0.1))?,
        },
        "relu" => LayerKind::Relu,
        "dropout" => LayerKind::Dropout {
            rate: f.value("p", None)?,
        },
        "mean_submaps" => LayerKind::MeanSubmaps,
        "gpool3d" => LayerKind::GlobalPool3d(match f.value::<String>("mode", Some("avg".into()))?.as_str() {
            "avg" => PoolMode::Avg,
            "max" => PoolMode::Max,
            other => {
                return Err(Error::Parse {
                    line,
                    reason: format!("unknown pooling mode {other:?}"),
                })
            }
        }),
        "linear" => LayerKind::Linear {
            in_features: f.value("in", None)?,
            out_features: f.value("out", None)?,
        },
        other => {
            return Err(Error::Parse {
                line,
                reason: format!("unknown layer {other:?}"),
            })
        }
    };
    f.finish()?;
    Ok(kind)
}

/// Parses the text format into an input spec and layer descriptors.
pub fn parse_graph(text: &str) -> Result<(InputSpec, Vec<LayerKind>)> {
    let mut input = None;
    let mut kinds = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        let tokens: Vec<&str> = content.split_whitespace().collect();
        let Some((&name, rest)) = tokens.split_first() else {
            continue;
        };
        if name == "input" {
            if input.is_some() || !kinds.is_empty() {
                return Err(Error::Parse {
                    line,
                    reason: "input must be the first descriptor and appear once".into(),
                });
            }
            let mut f = Fields::parse(line, rest)?;
            input = Some(InputSpec {
                channels: f.value("c", None)?,
                height: f.value("h", None)?,
                width: f.value("w", None)?,
            });
            f.finish()?;
        } else {
            if input.is_none() {
                return Err(Error::Parse {
                    line,
                    reason: "graph must start with an input descriptor".into(),
                });
            }
            kinds.push(parse_layer(line, name, rest)?);
        }
    }
    let input = input.ok_or(Error::Parse {
        line: 0,
        reason: "empty graph".into(),
    })?;
    Ok((input, kinds))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY: &str = "\
input c=3 h=16 w=16
conv out=8 k=3 stride=2 pad=1 dil=1
bn c=8 eps=1e-5
relu
maxpool k=2 stride=2
dropout p=0.2
mean_submaps
gpool3d mode=avg
linear in=8 out=10
";

    #[test]
    fn parses_every_descriptor() {
        let g = LayerGraph::from_text(TOY, 0).unwrap();
        assert_eq!(g.len(), 8);
        assert_eq!(g.input(), InputSpec { channels: 3, height: 16, width: 16 });
        assert_eq!(g.layers()[0].params[0].shape(), &[8, 3, 3, 3]);
        assert_eq!(g.param_count(), 8 * 27 + 8 + 16 + 80 + 10);
        let shapes = g.shapes().unwrap();
        assert_eq!(shapes[0], ActShape::Map { channels: 8, submaps: 1, height: 8, width: 8 });
        assert_eq!(shapes[3], ActShape::Map { channels: 8, submaps: 1, height: 4, width: 4 });
        assert_eq!(*shapes.last().unwrap(), ActShape::Flat { features: 10 });
    }

    #[test]
    fn text_round_trips() {
        let g = LayerGraph::from_text(TOY, 0).unwrap();
        let again = LayerGraph::from_text(&g.to_text(), 0).unwrap();
        assert_eq!(g, again);
    }

    #[test]
    fn parse_errors_name_the_line() {
        let err = LayerGraph::from_text("input c=1 h=4 w=4\nrelu\nconv out=2 k=3 bogus=1\n", 0).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = LayerGraph::from_text("relu\n", 0).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = LayerGraph::from_text("input c=1 h=4 w=4\nwarp\n", 0).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn shape_errors_name_the_layer() {
        let err = LayerGraph::from_text("input c=1 h=4 w=4\nconv out=2 k=3 pad=1\nbn c=3\n", 0).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch { index: 1, .. }), "{err}");
        let err = LayerGraph::from_text("input c=1 h=4 w=4\nlinear in=3 out=2\n", 0).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch { index: 0, .. }), "{err}");
    }

    #[test]
    fn init_is_seeded_and_fan_in_bounded() {
        let a = LayerGraph::from_text(TOY, 5).unwrap();
        assert_eq!(a, LayerGraph::from_text(TOY, 5).unwrap());
        assert_ne!(a, LayerGraph::from_text(TOY, 6).unwrap());
        let bound = 1.0 / 27f64.sqrt();
        assert!(a.layers()[0].params[0].data().iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn checkered_sampling_doubles_submaps() {
        let g = LayerGraph::from_text(
            "input c=1 h=16 w=16\nconv out=2 k=3 stride=2 pad=1 sampler=checkered\nmaxpool k=2 stride=2 sampler=checkered\n",
            0,
        )
        .unwrap();
        let shapes = g.shapes().unwrap();
        assert_eq!(shapes[1], ActShape::Map { channels: 2, submaps: 4, height: 4, width: 4 });
    }

    #[test]
    fn checkered_needs_stride_two() {
        let err = LayerGraph::from_text("input c=1 h=9 w=9\nconv out=2 k=3 stride=3 sampler=checkered\n", 0).unwrap_err();
        assert!(matches!(err, Error::UnsupportedLayer { index: 0, .. }));
    }
}
