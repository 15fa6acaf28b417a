//! Per-frame log-posterior matrices.

use crate::error::{Error, Result};
use crate::util::log_sum_exp;

/// Tolerance for per-row normalization: each row must log-sum-exp to zero
/// within this bound, and every entry must stay below it.
pub const ROW_NORM_TOL: f64 = 1e-6;

/// A `T x V` matrix of natural-log posterior probabilities, one row per frame.
/// Rows are normalized distributions; `-inf` entries encode exact zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionMatrix {
    num_frames: usize,
    vocab_size: usize,
    data: Vec<f64>,
}

impl EmissionMatrix {
    /// Validates shape, per-row normalization and log-probability range.
    pub fn new(num_frames: usize, vocab_size: usize, data: Vec<f64>) -> Result<Self> {
        if num_frames == 0 {
            return Err(Error::InvalidEmissions("at least one frame required".into()));
        }
        if vocab_size < 2 {
            return Err(Error::InvalidEmissions("vocabulary size must be >= 2".into()));
        }
        if data.len() != num_frames * vocab_size {
            return Err(Error::InvalidEmissions(format!(
                "expected {} entries, got {}",
                num_frames * vocab_size,
                data.len()
            )));
        }
        for (i, &x) in data.iter().enumerate() {
            if x.is_nan() || x == f64::INFINITY {
                return Err(Error::InvalidEmissions(format!("entry {i} is {x}")));
            }
            if x > ROW_NORM_TOL {
                return Err(Error::InvalidEmissions(format!(
                    "entry {i} = {x} is not a log-probability"
                )));
            }
        }
        for t in 0..num_frames {
            let row = &data[t * vocab_size..(t + 1) * vocab_size];
            let lse = log_sum_exp(row);
            if lse.is_nan() || lse.abs() > ROW_NORM_TOL {
                return Err(Error::InvalidEmissions(format!(
                    "row {t} log-sum-exps to {lse}, expected 0"
                )));
            }
        }
        Ok(EmissionMatrix {
            num_frames,
            vocab_size,
            data,
        })
    }

    /// Normalizes raw scores row-wise via log-softmax. `-inf` entries are kept
    /// as exact zeros; a row of only `-inf` is rejected.
    pub fn from_logits(num_frames: usize, vocab_size: usize, mut logits: Vec<f64>) -> Result<Self> {
        if logits.len() != num_frames * vocab_size {
            return Err(Error::InvalidEmissions(format!(
                "expected {} entries, got {}",
                num_frames * vocab_size,
                logits.len()
            )));
        }
        for (i, &x) in logits.iter().enumerate() {
            if x.is_nan() || x == f64::INFINITY {
                return Err(Error::InvalidEmissions(format!("entry {i} is {x}")));
            }
        }
        for t in 0..num_frames {
            let row = &mut logits[t * vocab_size..(t + 1) * vocab_size];
            let lse = log_sum_exp(row);
            if lse == f64::NEG_INFINITY {
                return Err(Error::InvalidEmissions(format!(
                    "row {t} has zero total probability"
                )));
            }
            for x in row.iter_mut() {
                *x -= lse;
            }
        }
        Self::new(num_frames, vocab_size, logits)
    }

    /// Uniform distribution over all `vocab_size` symbols at every frame.
    pub fn uniform(num_frames: usize, vocab_size: usize) -> Result<Self> {
        let p = -((vocab_size as f64).ln());
        Self::new(num_frames, vocab_size, vec![p; num_frames * vocab_size])
    }

    /// One-hot rows spelling the given alignment (probability 1 on each
    /// symbol, exact zero elsewhere).
    pub fn one_hot(alignment: &[usize], vocab_size: usize) -> Result<Self> {
        let mut data = vec![f64::NEG_INFINITY; alignment.len() * vocab_size];
        for (t, &k) in alignment.iter().enumerate() {
            if k >= vocab_size {
                return Err(Error::InvalidEmissions(format!(
                    "symbol {k} out of range for vocabulary of {vocab_size}"
                )));
            }
            data[t * vocab_size + k] = 0.0;
        }
        Self::new(alignment.len(), vocab_size, data)
    }

    /// Copy with `delta` added to a single entry, skipping validation.
    /// Intended for finite-difference probes of loss gradients.
    pub fn perturbed(&self, frame: usize, symbol: usize, delta: f64) -> Self {
        let mut out = self.clone();
        out.data[frame * self.vocab_size + symbol] += delta;
        out
    }

    #[inline]
    pub fn get(&self, frame: usize, symbol: usize) -> f64 {
        self.data[frame * self.vocab_size + symbol]
    }

    pub fn row(&self, frame: usize) -> &[f64] {
        &self.data[frame * self.vocab_size..(frame + 1) * self.vocab_size]
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}
