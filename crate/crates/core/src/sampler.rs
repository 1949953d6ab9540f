//! Samplers: binary selectors over a `k x k` sampling window.
//!
//! A stride-`k` subsampling layer partitions its (stride-1) output grid into
//! `k x k` windows. A sampler picks which elements of every window are kept;
//! each picked element becomes its own submap.

use std::fmt;

use crate::error::{invalid, Result};

/// A `k x k` binary selection mask with at least one sample.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Sampler {
    k: usize,
    mask: Vec<bool>,
    n: usize,
}

impl Sampler {
    /// Builds a sampler from a row-major `k x k` mask.
    pub fn from_mask(k: usize, mask: Vec<bool>) -> Result<Self> {
        if k == 0 {
            return Err(invalid("sampler window size must be at least 1"));
        }
        if mask.len() != k * k {
            return Err(invalid(format!(
                "mask has {} entries, expected {}",
                mask.len(),
                k * k
            )));
        }
        let n = mask.iter().filter(|&&b| b).count();
        if n == 0 {
            return Err(invalid("sampler mask must select at least one element"));
        }
        Ok(Self { k, mask, n })
    }

    /// Builds a sampler from rows of 0/1 values.
    pub fn from_rows(rows: &[&[u8]]) -> Result<Self> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(invalid("sampler rows must form a square"));
        }
        Self::from_mask(k, rows.iter().flat_map(|r| r.iter().map(|&v| v != 0)).collect())
    }

    fn from_positions(k: usize, positions: &[(usize, usize)]) -> Self {
        let mut mask = vec![false; k * k];
        for &(r, c) in positions {
            mask[r * k + c] = true;
        }
        Self::from_mask(k, mask).expect("non-empty in-window positions")
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of samples taken per window.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.mask[row * self.k + col]
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Positions of the selected elements, row-major.
    pub fn samples(&self) -> Vec<(usize, usize)> {
        samples_of(self)
    }
}

impl fmt::Debug for Sampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<String> = self
            .mask
            .chunks(self.k)
            .map(|r| r.iter().map(|&b| if b { '1' } else { '0' }).collect())
            .collect();
        write!(f, "Sampler(k={}, n={}, [{}])", self.k, self.n, rows.join("/"))
    }
}

/// The 2x2 checkered sampler: top-left and bottom-right.
pub fn checkered() -> Sampler {
    Sampler::from_positions(2, &[(0, 0), (1, 1)])
}

/// Mirrors the mask across the vertical axis (columns reversed).
pub fn complement(s: &Sampler) -> Sampler {
    let k = s.k;
    let mut mask = vec![false; k * k];
    for r in 0..k {
        for c in 0..k {
            mask[r * k + (k - 1 - c)] = s.mask[r * k + c];
        }
    }
    Sampler { k, mask, n: s.n }
}

/// Single sample at the top-left of each window: an ordinary stride-`k` layer.
pub fn traditional(k: usize) -> Result<Sampler> {
    if k < 1 {
        return Err(invalid("traditional sampler needs k >= 1"));
    }
    Ok(Sampler::from_positions(k, &[(0, 0)]))
}

/// Every element of the window is sampled.
pub fn complete(k: usize) -> Result<Sampler> {
    if k < 1 {
        return Err(invalid("complete sampler needs k >= 1"));
    }
    Ok(Sampler::from_mask(k, vec![true; k * k]).expect("k >= 1"))
}

/// The three 3x3 n-rooks samplers for stride-3 multisampling.
///
/// Sampler `i` selects the cells with `(row + col) % 3 == (2 + i) % 3`: id 0 is
/// the anti-diagonal, ids 1 and 2 are its cyclic shifts. Together they
/// partition the window, and every sample pattern runs bottom-left to top-right.
pub fn stride3_set() -> [Sampler; 3] {
    std::array::from_fn(|i| {
        let positions: Vec<(usize, usize)> = (0..3)
            .flat_map(|r| (0..3).map(move |c| (r, c)))
            .filter(|(r, c)| (r + c) % 3 == (2 + i) % 3)
            .collect();
        Sampler::from_positions(3, &positions)
    })
}

/// One sample in every row and every column of the window.
pub fn is_n_rooks(s: &Sampler) -> bool {
    let k = s.k;
    let rows_ok = (0..k).all(|r| (0..k).filter(|&c| s.get(r, c)).count() == 1);
    let cols_ok = (0..k).all(|c| (0..k).filter(|&r| s.get(r, c)).count() == 1);
    rows_ok && cols_ok
}

pub fn samples_of(s: &Sampler) -> Vec<(usize, usize)> {
    (0..s.k)
        .flat_map(|r| (0..s.k).map(move |c| (r, c)))
        .filter(|&(r, c)| s.get(r, c))
        .collect()
}

/// Samplers addressed by small integer ids, as used in sampler sequences.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SamplerBank {
    k: usize,
    samplers: Vec<Sampler>,
}

impl SamplerBank {
    pub fn new(samplers: Vec<Sampler>) -> Result<Self> {
        let k = samplers
            .first()
            .ok_or_else(|| invalid("sampler bank must not be empty"))?
            .k;
        if samplers.iter().any(|s| s.k != k) {
            return Err(invalid("all samplers in a bank must share the window size"));
        }
        Ok(Self { k, samplers })
    }

    /// The registered n-rooks bank for a window size: `0 = checkered,
    /// 1 = complement` for k=2, the stride-3 set for k=3.
    pub fn standard(k: usize) -> Result<Self> {
        match k {
            2 => Self::new(vec![checkered(), complement(&checkered())]),
            3 => Self::new(stride3_set().to_vec()),
            _ => Err(crate::Error::Unsupported(format!(
                "no registered sampler bank for k={k}"
            ))),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.samplers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samplers.is_empty()
    }

    pub fn get(&self, id: usize) -> Option<&Sampler> {
        self.samplers.get(id)
    }

    pub fn samplers(&self) -> &[Sampler] {
        &self.samplers
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkered_mask() {
        let s = checkered();
        assert_eq!(s.k(), 2);
        assert_eq!(s.n(), 2);
        assert_eq!(s.mask(), &[true, false, false, true]);
        assert!(is_n_rooks(&s));
        assert_eq!(samples_of(&s), vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn complement_reverses_columns() {
        let c = complement(&checkered());
        assert_eq!(c, Sampler::from_rows(&[&[0, 1], &[1, 0]]).unwrap());
        assert_eq!(samples_of(&c), vec![(0, 1), (1, 0)]);
        assert_eq!(complement(&c), checkered());

        let diag = Sampler::from_rows(&[&[1, 0, 0], &[0, 1, 0], &[0, 0, 1]]).unwrap();
        let anti = Sampler::from_rows(&[&[0, 0, 1], &[0, 1, 0], &[1, 0, 0]]).unwrap();
        assert_eq!(complement(&diag), anti);
    }

    #[test]
    fn traditional_and_complete() {
        assert_eq!(
            traditional(2).unwrap(),
            Sampler::from_rows(&[&[1, 0], &[0, 0]]).unwrap()
        );
        assert_eq!(traditional(1).unwrap().mask(), &[true]);
        assert_eq!(traditional(3).unwrap().n(), 1);
        assert!(traditional(0).is_err());

        assert_eq!(complete(2).unwrap().n(), 4);
        assert_eq!(complete(1).unwrap(), traditional(1).unwrap());
        assert_eq!(complete(3).unwrap().n(), 9);
        assert!(complete(0).is_err());
        assert_eq!(
            samples_of(&complete(2).unwrap()),
            vec![(0, 0), (0, 1), (1, 0), (1, 1)]
        );
    }

    #[test]
    fn n_rooks_predicate() {
        assert!(!is_n_rooks(&traditional(2).unwrap()));
        assert!(!is_n_rooks(&complete(2).unwrap()));
        assert!(is_n_rooks(&traditional(1).unwrap()));
    }

    #[test]
    fn stride3_partition() {
        let set = stride3_set();
        let mut hits = [0u32; 9];
        for s in &set {
            assert_eq!(s.k(), 3);
            assert_eq!(s.n(), 3);
            assert!(is_n_rooks(s));
            for (r, c) in samples_of(s) {
                hits[r * 3 + c] += 1;
            }
        }
        assert_eq!(hits, [1; 9]);
        // id 0 is the bottom-left to top-right diagonal
        assert_eq!(samples_of(&set[0]), vec![(0, 2), (1, 1), (2, 0)]);
    }

    #[test]
    fn rejects_bad_masks() {
        assert!(Sampler::from_mask(2, vec![false; 4]).is_err());
        assert!(Sampler::from_mask(2, vec![true; 3]).is_err());
        assert!(Sampler::from_rows(&[&[1, 0], &[1]]).is_err());
    }

    #[test]
    fn standard_banks() {
        let b2 = SamplerBank::standard(2).unwrap();
        assert_eq!(b2.get(0), Some(&checkered()));
        assert_eq!(b2.get(1), Some(&complement(&checkered())));
        assert!(b2.get(2).is_none());
        assert_eq!(SamplerBank::standard(3).unwrap().len(), 3);
        assert!(SamplerBank::standard(4).is_err());
        assert!(SamplerBank::new(vec![checkered(), complete(3).unwrap()]).is_err());
    }
}
