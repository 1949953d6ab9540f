//! Minibatch SGD and the CNN-vs-CCNN training comparison.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::autograd::Tape;
use crate::data::{stripes, Dataset, StripeConfig};
use crate::error::Result;
use crate::nn::{argmax_rows, convert_to_ccnn, cross_entropy, ActShape, Activation, FeatureMap, LayerGraph, Mode};
use crate::tensor::Tensor;

/// Toy classifier for 32x32 single-channel input with three stride-2 convs.
pub const TOY_GRAPH: &str = "\
input c=1 h=32 w=32
conv out=4 k=3 stride=1 pad=1
relu
conv out=8 k=3 stride=2 pad=1
bn c=8
relu
conv out=8 k=3 stride=2 pad=1
relu
conv out=8 k=3 stride=2 pad=1
relu
linear in=128 out=2
";

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub nesterov: bool,
    pub seed: u64,
    /// Stop once training accuracy exceeds this.
    pub target_accuracy: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 16,
            learning_rate: 0.02,
            momentum: 0.9,
            nesterov: false,
            seed: 0,
            target_accuracy: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean minibatch loss during the epoch.
    pub loss: f64,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
    pub diverged: bool,
}

impl TrainLog {
    pub fn final_train_accuracy(&self) -> f64 {
        self.epochs.last().map_or(0.0, |e| e.train_accuracy)
    }

    pub fn best_train_accuracy(&self) -> f64 {
        self.epochs.iter().map(|e| e.train_accuracy).fold(0.0, f64::max)
    }
}

/// SGD with (optionally Nesterov) momentum; one velocity per parameter.
pub struct Sgd {
    lr: f64,
    momentum: f64,
    nesterov: bool,
    velocity: Vec<Vec<f64>>,
}

impl Sgd {
    pub fn new(graph: &LayerGraph, lr: f64, momentum: f64, nesterov: bool) -> Self {
        Self {
            lr,
            momentum,
            nesterov,
            velocity: graph.parameters().map(|p| vec![0.0; p.len()]).collect(),
        }
    }

    /// `grads` lines up with [`LayerGraph::parameters_mut`].
    pub fn step(&mut self, graph: &mut LayerGraph, grads: &[Tensor]) {
        for ((p, v), g) in graph.parameters_mut().zip(&mut self.velocity).zip(grads) {
            for ((w, v), &g) in p.data_mut().iter_mut().zip(v.iter_mut()).zip(g.data()) {
                *v = self.momentum * *v + g;
                *w -= self.lr * if self.nesterov { g + self.momentum * *v } else { *v };
            }
        }
    }
}

pub fn accuracy(graph: &LayerGraph, data: &Dataset) -> Result<f64> {
    let logits = graph.forward(&data.images, Mode::Eval)?;
    let hits = argmax_rows(&logits)
        .iter()
        .zip(&data.labels)
        .filter(|(p, l)| p == l)
        .count();
    Ok(hits as f64 / data.len().max(1) as f64)
}

/// Trains `graph` in place. A non-finite loss stops training and marks the
/// log as diverged.
pub fn train(graph: &mut LayerGraph, train_set: &Dataset, test_set: &Dataset, cfg: &TrainConfig) -> Result<TrainLog> {
    let mut opt = Sgd::new(graph, cfg.learning_rate, cfg.momentum, cfg.nesterov);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut log = TrainLog {
        epochs: Vec::new(),
        diverged: false,
    };
    let mut step = 0u64;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0usize;
        for idx in order.chunks(cfg.batch_size.max(1)) {
            let (x, y) = train_set.batch(idx);
            let mut tape = Tape::new();
            let input = FeatureMap::from_images(&mut tape, x, false)?;
            let mode = Mode::Train {
                seed: cfg.seed ^ step.wrapping_mul(0xD1B5_4A32_D192_ED03),
            };
            let out = graph.forward_range(&mut tape, Activation::Map(input), mode, 0..graph.len())?;
            let logits = out.output().expect("non-empty graph").var();
            let loss = cross_entropy(&mut tape, logits, &y)?;
            let value = tape.value(loss).data()[0];
            if !value.is_finite() {
                log.diverged = true;
                return Ok(log);
            }
            let mut g = tape.backward(loss)?;
            let grads: Vec<Tensor> = out
                .params
                .iter()
                .flatten()
                .map(|&v| g.take(v).unwrap_or_else(|| Tensor::zeros(tape.value(v).shape())))
                .collect();
            opt.step(graph, &grads);
            graph.apply_running_updates(out.running_updates);
            total += value;
            batches += 1;
            step += 1;
        }
        let entry = EpochLog {
            epoch,
            loss: total / batches.max(1) as f64,
            train_accuracy: accuracy(graph, train_set)?,
            test_accuracy: accuracy(graph, test_set)?,
        };
        let done = cfg.target_accuracy.is_some_and(|t| entry.train_accuracy > t);
        log.epochs.push(entry);
        if done {
            break;
        }
    }
    Ok(log)
}

#[derive(Clone, Debug, Serialize)]
pub struct Comparison {
    pub config: TrainConfig,
    pub cnn_params: usize,
    pub ccnn_params: usize,
    /// Shape of the CCNN feature map entering the classifier.
    pub ccnn_final_map: Option<ActShape>,
    pub cnn: TrainLog,
    pub ccnn: TrainLog,
}

impl Comparison {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }
}

/// Trains [`TOY_GRAPH`] and its checkered conversion from the same initial
/// parameters on the same stripe data.
pub fn compare(cfg: &TrainConfig, train_size: usize, test_size: usize) -> Result<Comparison> {
    let data_cfg = StripeConfig::default();
    let train_set = stripes(train_size, data_cfg, cfg.seed);
    let test_set = stripes(test_size, data_cfg, cfg.seed ^ 0x5EED);

    let mut cnn = LayerGraph::from_text(TOY_GRAPH, cfg.seed)?;
    let mut ccnn = convert_to_ccnn(&cnn)?;
    let shapes = ccnn.shapes()?;
    let ccnn_final_map = shapes.iter().rev().find(|s| matches!(s, ActShape::Map { submaps, .. } if *submaps > 1)).copied();

    let (cnn_params, ccnn_params) = (cnn.param_count(), ccnn.param_count());
    let cnn_log = train(&mut cnn, &train_set, &test_set, cfg)?;
    let ccnn_log = train(&mut ccnn, &train_set, &test_set, cfg)?;
    Ok(Comparison {
        config: *cfg,
        cnn_params,
        ccnn_params,
        ccnn_final_map,
        cnn: cnn_log,
        ccnn: ccnn_log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_momentum_update() {
        let mut g = LayerGraph::from_text("input c=1 h=1 w=1\nlinear in=1 out=1\n", 0).unwrap();
        let w0 = g.layers()[0].params[0].data()[0];
        let mut opt = Sgd::new(&g, 0.1, 0.9, false);
        let grads = [Tensor::ones(&[1, 1]), Tensor::zeros(&[1])];
        opt.step(&mut g, &grads);
        opt.step(&mut g, &grads);
        // v1 = 1, v2 = 1.9
        let w = g.layers()[0].params[0].data()[0];
        assert!((w0 - w - 0.29).abs() < 1e-12);
    }

    #[test]
    fn toy_graph_geometry() {
        let g = LayerGraph::from_text(TOY_GRAPH, 0).unwrap();
        let c = convert_to_ccnn(&g).unwrap();
        assert_eq!(g.param_count(), c.param_count());
        let shapes = c.shapes().unwrap();
        assert!(shapes.contains(&ActShape::Map { channels: 8, submaps: 8, height: 4, width: 4 }));
    }

    #[test]
    fn loss_decreases_on_a_small_run() {
        let cfg = TrainConfig {
            epochs: 3,
            ..TrainConfig::default()
        };
        let data = stripes(32, StripeConfig::default(), 1);
        let mut g = LayerGraph::from_text(TOY_GRAPH, 0).unwrap();
        let log = train(&mut g, &data, &data, &cfg).unwrap();
        assert!(!log.diverged);
        assert_eq!(log.epochs.len(), 3);
        assert!(log.epochs[2].loss < log.epochs[0].loss);
    }
}
