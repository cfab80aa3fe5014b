//! Log-semiring forward-backward over acyclic lattices.
//!
//! The total score is `log Σ_paths exp(Σ arc scores)`. Arc posteriors are the
//! occupation probabilities from forward-backward, and they are also the
//! derivative of the total with respect to each arc score; summing them per
//! `(frame, label)` gives the gradient with respect to the dense
//! log-probabilities.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::fst::Lattice;

/// `log(exp(a) + exp(b))` without overflow; `-inf` is the identity.
pub fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Max-shifted log-sum-exp. Empty input gives `-inf`.
pub fn log_sum_exp(values: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return max;
    }
    let sum: f64 = values.into_iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreResult {
    pub total: f64,
    /// Forward scores per state.
    pub forward: Vec<f64>,
    /// Backward scores per state.
    pub backward: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorResult {
    pub arc_posterior: Vec<f64>,
}

pub fn total_score(lat: &Lattice) -> Result<ScoreResult> {
    if lat.is_empty() {
        return Err(Error::EmptyLattice);
    }
    let fsa = lat.fsa();
    let n = fsa.num_states();
    let arcs = fsa.arcs();

    // Arcs are grouped by source and states are topologically numbered, so
    // one pass in storage order sees every arc after its source is complete.
    let mut forward = vec![f64::NEG_INFINITY; n];
    forward[fsa.start_state()] = 0.0;
    for a in arcs {
        forward[a.dst] = log_add(forward[a.dst], forward[a.src] + a.score);
    }

    let mut backward = vec![f64::NEG_INFINITY; n];
    backward[fsa.final_state()] = 0.0;
    for a in arcs.iter().rev() {
        backward[a.src] = log_add(backward[a.src], a.score + backward[a.dst]);
    }

    Ok(ScoreResult {
        total: forward[fsa.final_state()],
        forward,
        backward,
    })
}

pub fn arc_posteriors(lat: &Lattice, s: &ScoreResult) -> Result<PosteriorResult> {
    if lat.is_empty() {
        return Err(Error::EmptyLattice);
    }
    let arc_posterior = lat
        .fsa()
        .arcs()
        .iter()
        .map(|a| {
            let lp = s.forward[a.src] + a.score + s.backward[a.dst] - s.total;
            if lp == f64::NEG_INFINITY || lp.is_nan() {
                0.0
            } else {
                lp.exp()
            }
        })
        .collect();
    Ok(PosteriorResult { arc_posterior })
}

/// `∂ total / ∂ logprobs[t][k]`: the summed posteriors of arcs at frame `t`
/// reading label `k`. The final arcs (frame `T`) are not part of the matrix.
pub fn grad_wrt_logprobs(
    lat: &Lattice,
    p: &PosteriorResult,
    num_frames: usize,
    vocab_plus_blank: usize,
) -> Result<Array2<f64>> {
    let frames = lat.frames().ok_or(Error::MissingFrameInfo)?;
    let mut grad = Array2::zeros((num_frames, vocab_plus_blank));
    for ((a, &t), &gamma) in lat.fsa().arcs().iter().zip(frames).zip(&p.arc_posterior) {
        if a.is_final() {
            continue;
        }
        let k = a.in_label as usize;
        if t >= num_frames || k >= vocab_plus_blank {
            return Err(Error::BadShape(format!(
                "arc at ({t}, {k}) outside a {num_frames}x{vocab_plus_blank} gradient"
            )));
        }
        grad[[t, k]] += gamma;
    }
    Ok(grad)
}

/// Total score plus its gradient with respect to the dense log-probabilities.
pub fn score_and_grad(lat: &Lattice) -> Result<(f64, Array2<f64>)> {
    let (frames, vp1) = lat
        .num_frames()
        .zip(lat.vocab_plus_blank())
        .ok_or(Error::MissingFrameInfo)?;
    let s = total_score(lat)?;
    let p = arc_posteriors(lat, &s)?;
    let grad = grad_wrt_logprobs(lat, &p, frames, vp1)?;
    Ok((s.total, grad))
}
