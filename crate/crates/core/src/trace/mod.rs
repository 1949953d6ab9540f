//! Geometry-only tracing of multisampling: where every submap's samples sit
//! in the original image.

mod sequence;
mod stats;

pub use sequence::{
    lattice_sequence, random_sequence, stride3_reference_sequence, SamplerSequence,
    LATTICE_STEPS,
};
pub use stats::{coverage_stats, CoverageReport};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::par;
use crate::sampler::{Sampler, SamplerBank};

/// Provenance of one submap in original-image coordinates.
///
/// Element `(i, j)` of the submap sits at
/// `(row_offset + i * step_stride, col_offset + j * step_stride)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SubmapMeta {
    pub row_offset: usize,
    pub col_offset: usize,
    pub step_stride: usize,
    pub height: usize,
    pub width: usize,
}

impl SubmapMeta {
    pub fn root(height: usize, width: usize) -> Self {
        Self {
            row_offset: 0,
            col_offset: 0,
            step_stride: 1,
            height,
            width,
        }
    }

    /// Number of samples in the submap.
    pub fn resolution(&self) -> usize {
        self.height * self.width
    }

    /// Child produced by taking window element `(dr, dc)` from every
    /// `k x k` window. `height`/`width` are left for the caller.
    pub fn child(&self, dr: usize, dc: usize, k: usize) -> Self {
        Self {
            row_offset: self.row_offset + self.step_stride * dr,
            col_offset: self.col_offset + self.step_stride * dc,
            step_stride: self.step_stride * k,
            height: self.height,
            width: self.width,
        }
    }

    pub fn positions(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.height).flat_map(move |i| {
            (0..self.width).map(move |j| {
                (
                    self.row_offset + i * self.step_stride,
                    self.col_offset + j * self.step_stride,
                )
            })
        })
    }
}

/// Sorts metas into canonical order (by row offset, then column offset) and
/// returns the permutation applied: `order[new] = old`.
pub fn canonical_order(metas: &[SubmapMeta]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..metas.len()).collect();
    order.sort_by_key(|&i| (metas[i].row_offset, metas[i].col_offset));
    order
}

/// Number of samples along an axis of length `len` taken at window offset
/// `offset` with stride `k`; windows hanging past the end are padded and
/// their padded elements never count.
fn valid_extent(len: usize, offset: usize, k: usize) -> usize {
    if len > offset {
        (len - offset).div_ceil(k)
    } else {
        0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceState {
    pub original_height: usize,
    pub original_width: usize,
    pub k: usize,
    pub steps_applied: usize,
    pub submaps: Vec<SubmapMeta>,
}

impl TraceState {
    pub fn new(height: usize, width: usize, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(invalid("window size must be at least 1"));
        }
        Ok(Self {
            original_height: height,
            original_width: width,
            k,
            steps_applied: 0,
            submaps: vec![SubmapMeta::root(height, width)],
        })
    }

    /// Applies sampler `assignment[i]` (an id into `bank`) to submap `i`.
    pub fn subsample_step(&self, bank: &SamplerBank, assignment: &[usize]) -> Result<Self> {
        if bank.k() != self.k {
            return Err(invalid(format!(
                "bank window size {} does not match trace window size {}",
                bank.k(),
                self.k
            )));
        }
        if assignment.len() != self.submaps.len() {
            return Err(invalid(format!(
                "assignment has {} entries but there are {} submaps",
                assignment.len(),
                self.submaps.len()
            )));
        }
        let samplers = assignment
            .iter()
            .map(|&id| {
                bank.get(id)
                    .ok_or_else(|| invalid(format!("unknown sampler id {id}")))
            })
            .collect::<Result<Vec<_>>>()?;
        self.subsample_with(&samplers)
    }

    /// Applies one sampler per submap (in canonical order).
    pub fn subsample_with(&self, samplers: &[&Sampler]) -> Result<Self> {
        if samplers.len() != self.submaps.len() {
            return Err(invalid(format!(
                "{} samplers given for {} submaps",
                samplers.len(),
                self.submaps.len()
            )));
        }
        if let Some(s) = samplers.iter().find(|s| s.k() != self.k) {
            return Err(invalid(format!(
                "sampler window {} does not match trace window {}",
                s.k(),
                self.k
            )));
        }
        let k = self.k;
        let children: Vec<Vec<SubmapMeta>> = par::map_range(self.submaps.len(), |i| {
            let parent = &self.submaps[i];
            samplers[i]
                .samples()
                .into_iter()
                .map(|(dr, dc)| SubmapMeta {
                    height: valid_extent(parent.height, dr, k),
                    width: valid_extent(parent.width, dc, k),
                    ..parent.child(dr, dc, k)
                })
                .collect()
        });
        let mut submaps: Vec<SubmapMeta> = children.into_iter().flatten().collect();
        submaps.sort_by_key(|m| (m.row_offset, m.col_offset));
        Ok(Self {
            submaps,
            steps_applied: self.steps_applied + 1,
            ..self.clone()
        })
    }

    /// Same sampler on every submap.
    pub fn subsample_uniform(&self, sampler: &Sampler) -> Result<Self> {
        let samplers = vec![sampler; self.submaps.len()];
        self.subsample_with(&samplers)
    }

    /// Folds [`TraceState::subsample_step`] over every line of `seq`.
    pub fn apply_sequence(&self, bank: &SamplerBank, seq: &SamplerSequence) -> Result<Self> {
        let mut state = self.clone();
        for (t, line) in seq.lines().iter().enumerate() {
            if line.len() != state.submaps.len() {
                return Err(invalid(format!(
                    "sequence step {} has {} entries but there are {} submaps",
                    t + 1,
                    line.len(),
                    state.submaps.len()
                )));
            }
            state = state
                .subsample_step(bank, line)
                .map_err(|e| invalid(format!("sequence step {}: {e}", t + 1)))?;
        }
        Ok(state)
    }

    /// `(submap count, height, width)` when all submaps share an extent.
    pub fn structure(&self) -> Option<(usize, usize, usize)> {
        let first = self.submaps.first()?;
        self.submaps
            .iter()
            .all(|m| m.height == first.height && m.width == first.width)
            .then_some((self.submaps.len(), first.height, first.width))
    }

    pub fn total_samples(&self) -> usize {
        self.submaps.iter().map(SubmapMeta::resolution).sum()
    }

    /// Every sampled original-image position.
    pub fn positions(&self) -> BTreeSet<(usize, usize)> {
        trace_positions(self)
    }
}

pub fn trace_positions(state: &TraceState) -> BTreeSet<(usize, usize)> {
    state.submaps.iter().flat_map(SubmapMeta::positions).collect()
}

/// Index of the submap owning each sampled position, as a row-major
/// `original_height x original_width` grid (`None` = not sampled).
pub fn submap_owner_grid(state: &TraceState) -> Vec<Option<usize>> {
    let w = state.original_width;
    let mut grid = vec![None; state.original_height * w];
    for (id, meta) in state.submaps.iter().enumerate() {
        for (r, c) in meta.positions() {
            grid[r * w + c] = Some(id);
        }
    }
    grid
}
