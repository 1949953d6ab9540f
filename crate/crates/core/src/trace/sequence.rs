use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Per-step sampler ids. Line `t` assigns one id to every submap present
/// before step `t`, in canonical (row offset) order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SamplerSequence {
    lines: Vec<Vec<usize>>,
}

impl SamplerSequence {
    pub fn new(lines: Vec<Vec<usize>>) -> Self {
        Self { lines }
    }

    pub fn lines(&self) -> &[Vec<usize>] {
        &self.lines
    }

    pub fn steps(&self) -> usize {
        self.lines.len()
    }

    /// The first `steps` lines.
    pub fn truncated(&self, steps: usize) -> Self {
        Self {
            lines: self.lines[..steps.min(self.lines.len())].to_vec(),
        }
    }

    /// Sampler 0 on every submap for `steps` steps, for an n-rooks bank of
    /// window size `k`.
    pub fn constant(k: usize, steps: usize, id: usize) -> Self {
        Self {
            lines: (0..steps).map(|t| vec![id; k.pow(t as u32)]).collect(),
        }
    }

    pub fn line_lengths(&self) -> Vec<usize> {
        self.lines.iter().map(Vec::len).collect()
    }
}

/// One line per step, one character per sampler id. Commas and spaces
/// between ids are tolerated; blank lines are skipped.
impl FromStr for SamplerSequence {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut lines = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let ids = line
                .chars()
                .filter(|c| !matches!(c, ',' | ' ' | '\t'))
                .map(|c| {
                    c.to_digit(10).map(|d| d as usize).ok_or_else(|| Error::Parse {
                        line: idx + 1,
                        reason: format!("unexpected character {c:?}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            lines.push(ids);
        }
        Ok(Self { lines })
    }
}

impl fmt::Display for SamplerSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for line in &self.lines {
            for id in line {
                write!(f, "{id}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Uniform random sampler ids in `0..k`, one per submap, from a seeded
/// generator. Line `t` (0-based) has `k^t` entries.
pub fn random_sequence(k: usize, steps: usize, seed: u64) -> SamplerSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lines = (0..steps)
        .map(|t| (0..k.pow(t as u32)).map(|_| rng.gen_range(0..k)).collect())
        .collect();
    SamplerSequence { lines }
}

pub const LATTICE_STEPS: usize = 10;

// Lines 1-9 of the published low-discrepancy lattice sequence for the
// checkered bank (0 = checkered, 1 = complement).
const LATTICE_LINES: [&str; 9] = [
    "0",
    "00",
    "0101",
    "01100011",
    "0010100101001010",
    "00011000110001100011000110001100",
    "0000011111000001111100000111110000011111000001111100000111110000",
    "00000000001111111111000000000011111111110000000000111111111100000000011111111110000000000111111111100000000001111111111000000000",
    "0000000000000000000011111111111111111111000000000000000000001111111111111111111000000000000000000001111111111111111111100000000000000000001111111111111111111100000000000000000000111111111111111111100000000000000000000111111111111111111110000000000000000000",
];

/// The checkered lattice sequence for `steps` subsampling steps (1..=10).
///
/// Line 10 is the alternating `01` pattern over all 512 submaps; the
/// published listing breaks off after 408 ids.
pub fn lattice_sequence(steps: usize) -> Result<SamplerSequence> {
    if !(1..=LATTICE_STEPS).contains(&steps) {
        return Err(Error::Unsupported(format!(
            "lattice sequence is defined for 1..={LATTICE_STEPS} steps, got {steps}"
        )));
    }
    let mut lines: Vec<Vec<usize>> = LATTICE_LINES
        .iter()
        .map(|l| l.bytes().map(|b| (b - b'0') as usize).collect())
        .collect();
    lines.push((0..512).map(|i| i % 2).collect());
    lines.truncate(steps);
    Ok(SamplerSequence { lines })
}

/// The published 4-step sequence for the stride-3 bank.
pub fn stride3_reference_sequence() -> SamplerSequence {
    "0\n\
     0, 2, 2\n\
     0, 2, 2, 1, 0, 0, 1, 0, 2\n\
     1, 1, 0, 0, 2, 1, 1, 1, 2, 1, 2, 1, 1, 1, 2, 0, 2, 0, 1, 2, 0, 0, 0, 0, 0, 1, 2\n"
        .parse()
        .expect("static sequence")
}
