use serde::{Deserialize, Serialize};

use super::{SubmapMeta, TraceState};

/// Row/column representation and block regularity of a traced pattern.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub rows_covered: usize,
    pub cols_covered: usize,
    pub samples: usize,
    /// Relative deviation of aligned `b x b` block counts from uniform, with
    /// `b` the current step stride.
    pub block_discrepancy: f64,
    pub per_row: Vec<usize>,
    pub per_col: Vec<usize>,
}

impl CoverageReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain data serializes")
    }

    /// Every row has the same count, and so does every column.
    pub fn is_balanced(&self) -> bool {
        let even = |v: &[usize]| v.windows(2).all(|w| w[0] == w[1]);
        even(&self.per_row) && even(&self.per_col)
    }
}

pub fn coverage_stats(state: &TraceState) -> CoverageReport {
    let (h, w) = (state.original_height, state.original_width);
    let mut per_row = vec![0usize; h];
    let mut per_col = vec![0usize; w];
    let mut samples = 0usize;
    let block = state
        .submaps
        .iter()
        .map(|m| m.step_stride)
        .max()
        .unwrap_or(1);
    let (brows, bcols) = (h / block, w / block);
    let mut blocks = vec![0usize; brows * bcols];

    for (r, c) in state.submaps.iter().flat_map(SubmapMeta::positions) {
        per_row[r] += 1;
        per_col[c] += 1;
        samples += 1;
        let (bi, bj) = (r / block, c / block);
        if bi < brows && bj < bcols {
            blocks[bi * bcols + bj] += 1;
        }
    }

    let block_discrepancy = if blocks.is_empty() || samples == 0 {
        0.0
    } else {
        let expected = (block * block) as f64 * samples as f64 / (h * w) as f64;
        blocks
            .iter()
            .map(|&n| (n as f64 - expected).abs() / expected)
            .fold(0.0, f64::max)
    };

    CoverageReport {
        rows_covered: per_row.iter().filter(|&&n| n > 0).count(),
        cols_covered: per_col.iter().filter(|&&n| n > 0).count(),
        samples,
        block_discrepancy,
        per_row,
        per_col,
    }
}
