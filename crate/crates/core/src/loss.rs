//! Alignment-marginal losses and their gradients.
//!
//! [`gtc_loss`] scores a whole label graph by intersecting it with the
//! emissions and running forward-backward; its gradient with respect to each
//! log-posterior entry is the negated symbol occupancy `-gamma(t, k)`.
//! [`ctc_loss_reference`] is an independent implementation of the
//! single-sequence special case using the classical blank-interleaved array
//! recursion; it deliberately shares no code with the trellis path so the two
//! can cross-check each other. [`brute_force_loss`] sums over every alignment
//! string explicitly and is the testing oracle for both.

use crate::acceptor::LabelGraph;
use crate::emissions::EmissionMatrix;
use crate::error::{Error, Result};
use crate::topology::enumerate_collapsed;
use crate::trellis::{forward_backward, intersect};
use crate::util::log_add;
use crate::vocab::BLANK;

/// Search-space guard for [`brute_force_loss`]: `V^T` may not exceed this.
pub const BRUTE_FORCE_GUARD: u128 = 1_000_000;

/// Phoneme sequence without blanks; may be empty.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct TargetSequence(Vec<usize>);

impl TargetSequence {
    pub fn new(phonemes: Vec<usize>) -> Result<Self> {
        if phonemes.contains(&BLANK) {
            return Err(Error::InvalidTarget("target contains the blank symbol".into()));
        }
        Ok(TargetSequence(phonemes))
    }

    pub fn phonemes(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<&crate::topology::Pronunciation> for TargetSequence {
    fn from(p: &crate::topology::Pronunciation) -> Self {
        TargetSequence(p.phonemes().to_vec())
    }
}

/// Loss value plus per-entry gradient and symbol occupancies, both `T x V`
/// row-major. `grad = -occupancy`; for every frame of a feasible target the
/// occupancies sum to one. An infeasible target yields `loss = +inf` with a
/// zero gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct LossResult {
    pub loss: f64,
    grad: Vec<f64>,
    occupancy: Vec<f64>,
    num_frames: usize,
    vocab_size: usize,
}

impl LossResult {
    fn infeasible(num_frames: usize, vocab_size: usize) -> Self {
        LossResult {
            loss: f64::INFINITY,
            grad: vec![0.0; num_frames * vocab_size],
            occupancy: vec![0.0; num_frames * vocab_size],
            num_frames,
            vocab_size,
        }
    }

    fn from_occupancy(loss: f64, occupancy: Vec<f64>, num_frames: usize, vocab_size: usize) -> Self {
        let grad = occupancy.iter().map(|&g| -g).collect();
        LossResult {
            loss,
            grad,
            occupancy,
            num_frames,
            vocab_size,
        }
    }

    pub fn grad(&self, frame: usize, symbol: usize) -> f64 {
        self.grad[frame * self.vocab_size + symbol]
    }

    pub fn occupancy(&self, frame: usize, symbol: usize) -> f64 {
        self.occupancy[frame * self.vocab_size + symbol]
    }

    /// Row-major `T x V` gradient matrix.
    pub fn grad_matrix(&self) -> &[f64] {
        &self.grad
    }

    pub fn occupancy_matrix(&self) -> &[f64] {
        &self.occupancy
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }
}

/// Collapses repeating consecutive symbols into one, then deletes blanks.
pub fn collapse(alignment: &[usize]) -> TargetSequence {
    let mut merged: Vec<usize> = Vec::with_capacity(alignment.len());
    for &s in alignment {
        if merged.last() != Some(&s) {
            merged.push(s);
        }
    }
    TargetSequence(merged.into_iter().filter(|&s| s != BLANK).collect())
}

/// Log-probability of one alignment string under per-frame independence:
/// the sum of the log-posteriors it selects. `-inf` entries propagate.
pub fn alignment_logprob(alignment: &[usize], emissions: &EmissionMatrix) -> Result<f64> {
    if alignment.len() != emissions.num_frames() {
        return Err(Error::Mismatch(format!(
            "alignment length {} vs {} frames",
            alignment.len(),
            emissions.num_frames()
        )));
    }
    let mut total = 0.0;
    for (t, &s) in alignment.iter().enumerate() {
        if s >= emissions.vocab_size() {
            return Err(Error::Mismatch(format!(
                "symbol {s} out of range for vocabulary of {}",
                emissions.vocab_size()
            )));
        }
        total += emissions.get(t, s);
    }
    Ok(total)
}

/// Classical CTC loss and gradient over the blank-interleaved state chain.
///
/// Kept free of any graph or trellis machinery so it can serve as an
/// independent oracle for the graph-based path. Returns `+inf` loss and a
/// zero gradient when no alignment of the given length exists.
pub fn ctc_loss_reference(target: &TargetSequence, emissions: &EmissionMatrix) -> Result<LossResult> {
    let v = emissions.vocab_size();
    let t_max = emissions.num_frames();
    if let Some(&s) = target.phonemes().iter().find(|&&s| s >= v) {
        return Err(Error::InvalidTarget(format!(
            "phoneme {s} out of range for vocabulary of {v}"
        )));
    }
    let l = target.len();
    let s_len = 2 * l + 1;
    let sym = |s: usize| -> usize {
        if s % 2 == 0 {
            BLANK
        } else {
            target.phonemes()[(s - 1) / 2]
        }
    };
    // Skip from s-2 to s is allowed only onto a label that differs from the
    // label two positions back.
    let skip_ok = |s: usize| s >= 2 && sym(s) != BLANK && sym(s) != sym(s - 2);

    let neg = f64::NEG_INFINITY;
    let mut alpha = vec![neg; t_max * s_len];
    alpha[0] = emissions.get(0, BLANK);
    if l > 0 {
        alpha[1] = emissions.get(0, sym(1));
    }
    for t in 1..t_max {
        for s in 0..s_len {
            let mut v_in = alpha[(t - 1) * s_len + s];
            if s >= 1 {
                v_in = log_add(v_in, alpha[(t - 1) * s_len + s - 1]);
            }
            if skip_ok(s) {
                v_in = log_add(v_in, alpha[(t - 1) * s_len + s - 2]);
            }
            alpha[t * s_len + s] = v_in + emissions.get(t, sym(s));
        }
    }
    let mut total = alpha[(t_max - 1) * s_len + s_len - 1];
    if l > 0 {
        total = log_add(total, alpha[(t_max - 1) * s_len + s_len - 2]);
    }
    if total == f64::NEG_INFINITY {
        return Ok(LossResult::infeasible(t_max, v));
    }

    // beta[t][s] covers frames t+1.. only, so alpha + beta is the full path
    // mass through (t, s).
    let mut beta = vec![neg; t_max * s_len];
    beta[(t_max - 1) * s_len + s_len - 1] = 0.0;
    if l > 0 {
        beta[(t_max - 1) * s_len + s_len - 2] = 0.0;
    }
    for t in (0..t_max - 1).rev() {
        for s in 0..s_len {
            let mut v_out = emissions.get(t + 1, sym(s)) + beta[(t + 1) * s_len + s];
            if s + 1 < s_len {
                v_out = log_add(
                    v_out,
                    emissions.get(t + 1, sym(s + 1)) + beta[(t + 1) * s_len + s + 1],
                );
            }
            if s + 2 < s_len && skip_ok(s + 2) {
                v_out = log_add(
                    v_out,
                    emissions.get(t + 1, sym(s + 2)) + beta[(t + 1) * s_len + s + 2],
                );
            }
            beta[t * s_len + s] = v_out;
        }
    }

    let mut occupancy = vec![0.0; t_max * v];
    for t in 0..t_max {
        for s in 0..s_len {
            let w = alpha[t * s_len + s] + beta[t * s_len + s];
            if w != f64::NEG_INFINITY {
                occupancy[t * v + sym(s)] += (w - total).exp();
            }
        }
    }
    Ok(LossResult::from_occupancy(-total, occupancy, t_max, v))
}

/// Loss over every sequence a label graph accepts, via intersection and
/// forward-backward. `gamma(t, k)` sums the posteriors of trellis arcs
/// entering frame `t` with symbol `k`; the gradient treats the log-posterior
/// entries as free variables, so `grad = -gamma` with no softmax coupling.
pub fn gtc_loss(graph: &LabelGraph, emissions: &EmissionMatrix) -> Result<LossResult> {
    let t_max = emissions.num_frames();
    let v = emissions.vocab_size();
    let trellis = match intersect(graph, emissions) {
        Ok(tr) => tr,
        Err(Error::EmptyIntersection { .. }) => return Ok(LossResult::infeasible(t_max, v)),
        Err(e) => return Err(e),
    };
    let (total, posteriors) = forward_backward(&trellis);
    if total == f64::NEG_INFINITY {
        return Ok(LossResult::infeasible(t_max, v));
    }
    let mut occupancy = vec![0.0; t_max * v];
    for (arc, &p) in trellis.arcs().iter().zip(&posteriors) {
        occupancy[trellis.frame_of(arc.dst) * v + arc.symbol] += p;
    }
    Ok(LossResult::from_occupancy(-total, occupancy, t_max, v))
}

/// Exhaustive oracle: sums the probability of every alignment string whose
/// collapse the graph accepts. Exponential in the frame count; guarded by
/// [`BRUTE_FORCE_GUARD`].
pub fn brute_force_loss(graph: &LabelGraph, emissions: &EmissionMatrix) -> Result<f64> {
    let v = emissions.vocab_size();
    let t_max = emissions.num_frames();
    let size = (v as u128).saturating_pow(t_max as u32);
    if size > BRUTE_FORCE_GUARD {
        return Err(Error::TooLarge {
            size,
            guard: BRUTE_FORCE_GUARD,
        });
    }
    let accepted = enumerate_collapsed(graph, BRUTE_FORCE_GUARD as usize)?;

    let mut total = f64::NEG_INFINITY;
    let mut alignment = vec![0usize; t_max];
    loop {
        if accepted.contains(collapse(&alignment).phonemes()) {
            total = log_add(total, alignment_logprob(&alignment, emissions)?);
        }
        // Odometer over the V^T alignment strings.
        let mut pos = t_max;
        loop {
            if pos == 0 {
                return Ok(-total);
            }
            pos -= 1;
            alignment[pos] += 1;
            if alignment[pos] < v {
                break;
            }
            alignment[pos] = 0;
        }
    }
}

/// Best-path decoding: per-frame argmax (ties go to the lowest index, so the
/// blank wins them) followed by collapse.
pub fn greedy_decode(emissions: &EmissionMatrix) -> TargetSequence {
    let mut alignment = Vec::with_capacity(emissions.num_frames());
    for t in 0..emissions.num_frames() {
        let row = emissions.row(t);
        let mut best = 0usize;
        for (k, &x) in row.iter().enumerate() {
            if x > row[best] {
                best = k;
            }
        }
        alignment.push(best);
    }
    collapse(&alignment)
}
