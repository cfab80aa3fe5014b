//! Delay-penalized CTC.
//!
//! Arcs flagged `emit_attr` are exactly the first frame of each token run, so
//! an alignment's delay score `d = Σ_u ((T-1)/2 - q_u)` is the sum of
//! per-arc offsets along its path. Adding `λ · ((T-1)/2 - t)` to those arcs
//! turns the lattice total into `log Σ_π exp(s_π + λ d_π)`.

use ndarray::Array2;

use crate::ctc::{build_ctc_lattice, ctc_topology};
use crate::error::{Error, Result};
use crate::fst::{DenseFsa, Label, Lattice};
use crate::scoring::{arc_posteriors, score_and_grad, total_score};

pub const DEFAULT_LAMBDA: f64 = 0.01;

/// Largest lattice `exact_aug_loss` accepts, in accepting paths.
pub const MAX_EXACT_PATHS: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyConfig {
    lambda: f64,
}

impl PenaltyConfig {
    pub fn new(lambda: f64) -> Result<PenaltyConfig> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidLambda(lambda));
        }
        Ok(PenaltyConfig { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `(T-1)/2`, possibly half-integer.
    pub fn midpoint(num_frames: usize) -> f64 {
        (num_frames as f64 - 1.0) / 2.0
    }
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        PenaltyConfig {
            lambda: DEFAULT_LAMBDA,
        }
    }
}

/// Frame offset `(T-1)/2 - t` of every first-emission arc, zero elsewhere.
fn delay_offsets(lat: &Lattice) -> Result<Vec<f64>> {
    let (Some(frames), Some(num_frames)) = (lat.frames(), lat.num_frames()) else {
        return Err(Error::MissingEmitInfo);
    };
    let mid = PenaltyConfig::midpoint(num_frames);
    Ok(lat
        .fsa()
        .arcs()
        .iter()
        .zip(frames)
        .map(|(a, &t)| if a.emit_attr { mid - t as f64 } else { 0.0 })
        .collect())
}

pub fn apply_delay_penalty(lat: &Lattice, cfg: &PenaltyConfig) -> Result<Lattice> {
    let offsets = delay_offsets(lat)?;
    if cfg.lambda == 0.0 {
        return Ok(lat.clone());
    }
    let scores: Vec<f64> = lat
        .scores()
        .zip(&offsets)
        .map(|(s, &o)| if o == 0.0 { s } else { s + cfg.lambda * o })
        .collect();
    Ok(lat.with_scores(scores))
}

fn penalized_lattice(logprobs: &Array2<f64>, labels: &[Label], cfg: &PenaltyConfig) -> Result<Lattice> {
    let dense = DenseFsa::new(logprobs.clone())?;
    let topo = ctc_topology(dense.vocab_size())?;
    let lat = build_ctc_lattice(&topo, labels, &dense)?;
    apply_delay_penalty(&lat, cfg)
}

/// `log Σ_π exp(s_π + λ d_π)` and its gradient with respect to `logprobs`.
/// The offsets are constants, so the gradient is the penalized lattice's
/// posterior occupancy.
pub fn delay_penalized_ctc_loss(
    logprobs: &Array2<f64>,
    labels: &[Label],
    lambda: f64,
) -> Result<(f64, Array2<f64>)> {
    let cfg = PenaltyConfig::new(lambda)?;
    score_and_grad(&penalized_lattice(logprobs, labels, &cfg)?)
}

/// Posterior mean of the delay score under the λ-penalized lattice,
/// `Σ_π w'_π d_π`, computed from arc posteriors. At λ = 0 this is the
/// unscaled regularizer. It is also `∂/∂λ` of the penalized loss.
pub fn expected_delay(logprobs: &Array2<f64>, labels: &[Label], lambda: f64) -> Result<f64> {
    let cfg = PenaltyConfig::new(lambda)?;
    lattice_expected_delay(&penalized_lattice(logprobs, labels, &cfg)?)
}

/// Expected delay score of an annotated lattice under its own arc scores.
pub fn lattice_expected_delay(lat: &Lattice) -> Result<f64> {
    let offsets = delay_offsets(lat)?;
    let s = total_score(lat)?;
    let p = arc_posteriors(lat, &s)?;
    Ok(p.arc_posterior.iter().zip(&offsets).map(|(g, o)| g * o).sum())
}

/// The regularized objective taken literally: `L + λ Σ_π w_π d_π` with
/// unpenalized weights. Agrees with [`delay_penalized_ctc_loss`] up to O(λ²).
pub fn exact_aug_loss(logprobs: &Array2<f64>, labels: &[Label], lambda: f64) -> Result<f64> {
    let cfg = PenaltyConfig::new(lambda)?;
    let plain = penalized_lattice(logprobs, labels, &PenaltyConfig::new(0.0)?)?;
    let paths = plain.count_paths();
    if paths > MAX_EXACT_PATHS {
        return Err(Error::InstanceTooLarge(format!("{paths} alignments")));
    }
    let total = total_score(&plain)?.total;
    Ok(total + cfg.lambda * lattice_expected_delay(&plain)?)
}
