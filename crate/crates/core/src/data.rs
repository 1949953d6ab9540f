//! Synthetic two-class images whose label lives in fine, period-2 texture.
//!
//! Each image is low-amplitude noise with one square patch of stripes:
//! vertical stripes for class 0, horizontal for class 1. The patch position
//! is random, so a classifier has to detect the texture, not a location, and
//! the texture is invisible after a single naive 2x subsampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StripeConfig {
    pub size: usize,
    pub patch: usize,
    pub amplitude: f64,
    pub noise: f64,
}

impl Default for StripeConfig {
    fn default() -> Self {
        Self {
            size: 32,
            patch: 8,
            amplitude: 1.0,
            noise: 0.2,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Dataset {
    /// `(n, 1, size, size)`
    pub images: Tensor,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Rows `idx` as a new batch.
    pub fn batch(&self, idx: &[usize]) -> (Tensor, Vec<usize>) {
        let per = self.images.len() / self.len().max(1);
        let mut data = Vec::with_capacity(per * idx.len());
        for &i in idx {
            data.extend_from_slice(&self.images.data()[i * per..][..per]);
        }
        let mut shape = self.images.shape().to_vec();
        shape[0] = idx.len();
        (
            Tensor::new(shape, data).expect("sized"),
            idx.iter().map(|&i| self.labels[i]).collect(),
        )
    }
}

/// `n` images with alternating labels.
pub fn stripes(n: usize, cfg: StripeConfig, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = cfg.size;
    let mut data = Vec::with_capacity(n * s * s);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % 2;
        let (pr, pc) = (
            rng.gen_range(0..=s - cfg.patch),
            rng.gen_range(0..=s - cfg.patch),
        );
        let phase = rng.gen_range(0..2usize);
        for r in 0..s {
            for c in 0..s {
                let mut v = rng.gen_range(-cfg.noise..=cfg.noise);
                if (pr..pr + cfg.patch).contains(&r) && (pc..pc + cfg.patch).contains(&c) {
                    let along = if label == 0 { c } else { r };
                    v += if (along + phase) % 2 == 0 { cfg.amplitude } else { -cfg.amplitude };
                }
                data.push(v);
            }
        }
        labels.push(label);
    }
    Dataset {
        images: Tensor::new(vec![n, 1, s, s], data).expect("sized"),
        labels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::LayerGraph;

    #[test]
    fn deterministic_and_balanced() {
        let a = stripes(10, StripeConfig::default(), 4);
        let b = stripes(10, StripeConfig::default(), 4);
        assert_eq!(a.images, b.images);
        assert_eq!(a.labels.iter().filter(|&&l| l == 1).count(), 5);
        let (x, y) = a.batch(&[3, 0]);
        assert_eq!(x.shape(), &[2, 1, 32, 32]);
        assert_eq!(y, vec![1, 0]);
    }

    /// Hand-set weights: horizontal and vertical neighbour differences,
    /// rectified, averaged, then compared. Solves the set exactly.
    #[test]
    fn two_layer_oracle_net_separates_the_classes() {
        let mut g = LayerGraph::from_text(
            "input c=1 h=32 w=32\nconv out=4 k=2 pad=0\nrelu\ngpool3d mode=avg\nlinear in=4 out=2\n",
            0,
        )
        .unwrap();
        let conv = &mut g.layers_mut()[0].params;
        // channels: +dx, -dx, +dy, -dy
        conv[0] = Tensor::new(
            vec![4, 1, 2, 2],
            vec![
                1.0, -1.0, 0.0, 0.0, //
                -1.0, 1.0, 0.0, 0.0, //
                1.0, 0.0, -1.0, 0.0, //
                -1.0, 0.0, 1.0, 0.0,
            ],
        )
        .unwrap();
        conv[1] = Tensor::zeros(&[4]);
        let lin = &mut g.layers_mut()[3].params;
        lin[0] = Tensor::new(vec![2, 4], vec![1.0, 1.0, -1.0, -1.0, -1.0, -1.0, 1.0, 1.0]).unwrap();
        lin[1] = Tensor::zeros(&[2]);

        let d = stripes(200, StripeConfig::default(), 9);
        let (_, preds) = g.evaluate(&d.images, &d.labels).unwrap();
        assert_eq!(preds, d.labels);
    }
}
