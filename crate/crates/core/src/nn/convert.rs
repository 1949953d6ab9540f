//! Graph rewrites: traditional → checkered (or any multisampling scheme), and
//! traditional → stride-1 with growing dilation.

use crate::error::{Error, Result};

use super::graph::{Layer, LayerGraph, LayerKind, Sampling};

fn strided(kind: &LayerKind) -> Option<usize> {
    match kind {
        LayerKind::Conv(c) if c.submap_kernel.is_none() => Some(c.stride),
        LayerKind::MaxPool(p) => Some(p.stride),
        _ => None,
    }
}

/// Replaces every stride-2 conv/pool with the checkered sampler and adds a
/// submap average in front of the classifier. Parameters are carried over
/// untouched.
pub fn convert_to_ccnn(graph: &LayerGraph) -> Result<LayerGraph> {
    convert_with(graph, Sampling::Checkered)
}

/// As [`convert_to_ccnn`] with an arbitrary sampling scheme for the stride-2
/// layers (`Complete` gives complete multisampling).
pub fn convert_with(graph: &LayerGraph, sampling: Sampling) -> Result<LayerGraph> {
    let mut layers: Vec<Layer> = Vec::with_capacity(graph.len() + 1);
    let mut reduced = false;
    for (index, layer) in graph.layers().iter().enumerate() {
        let mut layer = layer.clone();
        match strided(&layer.kind) {
            Some(1) | None => {}
            Some(2) => match &mut layer.kind {
                LayerKind::Conv(c) => c.sampling = sampling,
                LayerKind::MaxPool(p) => p.sampling = sampling,
                _ => unreachable!(),
            },
            Some(s) => {
                return Err(Error::UnsupportedLayer {
                    index,
                    reason: format!("stride {s} is not supported by the converter"),
                })
            }
        }
        match &layer.kind {
            LayerKind::MeanSubmaps | LayerKind::GlobalPool3d(_) => reduced = true,
            LayerKind::Linear { .. } if !reduced => {
                layers.push(Layer {
                    kind: LayerKind::MeanSubmaps,
                    params: vec![],
                    buffers: vec![],
                });
                reduced = true;
            }
            _ => {}
        }
        layers.push(layer);
    }
    LayerGraph::from_layers(graph.input(), layers)
}

/// Removes subsampling: every stride-2 layer becomes stride 1 and every
/// later conv/pool has its dilation and padding multiplied by the product of
/// the removed strides. The former stride-2 layers round their output extent
/// up so that it covers the same window grid the strided layer tiled.
pub fn dilation_equivalent(graph: &LayerGraph) -> Result<LayerGraph> {
    let mut factor = 1usize;
    let mut layers = Vec::with_capacity(graph.len());
    for (index, layer) in graph.layers().iter().enumerate() {
        let mut layer = layer.clone();
        match &mut layer.kind {
            LayerKind::Conv(c) if c.submap_kernel.is_some() => {
                return Err(Error::UnsupportedLayer {
                    index,
                    reason: "submap convolutions have no dilated counterpart".into(),
                })
            }
            LayerKind::Conv(c) => {
                c.dilation *= factor;
                c.padding *= factor;
                match c.stride {
                    1 => {}
                    2 => {
                        c.stride = 1;
                        c.out_multiple = 2 * factor;
                        factor *= 2;
                    }
                    s => {
                        return Err(Error::UnsupportedLayer {
                            index,
                            reason: format!("stride {s} is not supported by the converter"),
                        })
                    }
                }
            }
            LayerKind::MaxPool(p) => {
                p.dilation *= factor;
                match p.stride {
                    1 => {}
                    2 => {
                        p.stride = 1;
                        p.out_multiple = 2 * factor;
                        factor *= 2;
                    }
                    s => {
                        return Err(Error::UnsupportedLayer {
                            index,
                            reason: format!("stride {s} is not supported by the converter"),
                        })
                    }
                }
            }
            _ => {}
        }
        layers.push(layer);
    }
    // A flattening classifier sees a larger map now; shape checks would
    // reject it, so the rewrite keeps whatever the original layers declared.
    Ok(LayerGraph::from_layers_unchecked(graph.input(), layers))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::graph::ActShape;

    fn graph(text: &str) -> LayerGraph {
        LayerGraph::from_text(text, 1).unwrap()
    }

    #[test]
    fn no_stride_two_means_only_mean_insertion() {
        let g = graph("input c=1 h=8 w=8\nconv out=2 k=3 pad=1\nrelu\nlinear in=128 out=3\n");
        let c = convert_to_ccnn(&g).unwrap();
        assert_eq!(c.len(), 4);
        assert_eq!(c.layers()[2].kind, LayerKind::MeanSubmaps);
        let x = crate::tensor::Tensor::uniform(&[2, 1, 8, 8], -1.0, 1.0, 3);
        let a = g.forward(&x, crate::nn::Mode::Eval).unwrap();
        let b = c.forward(&x, crate::nn::Mode::Eval).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn stride_two_layers_become_checkered() {
        let g = graph(
            "input c=1 h=32 w=32\nconv out=2 k=3 stride=2 pad=1\nconv out=2 k=3 stride=2 pad=1\nmaxpool k=2 stride=2\nlinear in=32 out=2\n",
        );
        let c = convert_to_ccnn(&g).unwrap();
        let shapes = c.shapes().unwrap();
        assert_eq!(shapes[2], ActShape::Map { channels: 2, submaps: 8, height: 4, width: 4 });
        assert_eq!(c.param_count(), g.param_count());
        let before: Vec<_> = g.parameters().collect();
        let after: Vec<_> = c.parameters().collect();
        assert_eq!(before, after);
    }

    #[test]
    fn existing_pool_suppresses_mean_insertion() {
        let g = graph("input c=1 h=8 w=8\nconv out=2 k=3 stride=2 pad=1\ngpool3d mode=avg\nlinear in=2 out=2\n");
        let c = convert_to_ccnn(&g).unwrap();
        assert_eq!(c.len(), g.len());
    }

    #[test]
    fn unsupported_stride_names_the_layer() {
        let g = graph("input c=1 h=9 w=9\nrelu\nconv out=2 k=3 stride=3\n");
        assert!(matches!(convert_to_ccnn(&g), Err(Error::UnsupportedLayer { index: 1, .. })));
        assert!(matches!(dilation_equivalent(&g), Err(Error::UnsupportedLayer { index: 1, .. })));
    }

    #[test]
    fn dilation_rule() {
        let g = graph("input c=1 h=16 w=16\nconv out=2 k=3 stride=2 pad=1\nconv out=2 k=3 pad=1\n");
        let d = dilation_equivalent(&g).unwrap();
        let LayerKind::Conv(first) = &d.layers()[0].kind else { panic!() };
        let LayerKind::Conv(second) = &d.layers()[1].kind else { panic!() };
        assert_eq!((first.stride, first.dilation, first.padding), (1, 1, 1));
        assert_eq!((second.dilation, second.padding), (2, 2));
        assert_eq!(d.shapes().unwrap()[1], ActShape::Map { channels: 2, submaps: 1, height: 16, width: 16 });
    }

    #[test]
    fn dilation_leaves_unstrided_graphs_alone() {
        let g = graph("input c=1 h=8 w=8\nconv out=2 k=3 pad=1\nrelu\n");
        assert_eq!(dilation_equivalent(&g).unwrap(), g);
    }
}
