//! Differentiable weighted finite-state transducers for CTC training with an
//! emission-delay penalty.
//!
//! The CTC lattice is `intersect(compose(H, L), U)` where `H` is the compact
//! CTC topology whose token-entry arcs carry a binary emit attribute, `L` is
//! the linear label graph of one utterance and `U` the dense acceptor over the
//! acoustic log-probabilities. The emit attribute survives both operations, so
//! the first-emission arcs of the lattice can be found and shifted by
//! `λ · ((T-1)/2 - t)` before forward-backward scoring.
//!
//! ```
//! use latgraph::{ctc_loss, delay_penalized_ctc_loss};
//! use ndarray::Array2;
//!
//! let logprobs = Array2::from_elem((2, 2), 0.5f64.ln());
//! let (l, _grad) = ctc_loss(&logprobs, &[1]).unwrap();
//! assert!((l - 0.75f64.ln()).abs() < 1e-12);
//! let (l_aug, _) = delay_penalized_ctc_loss(&logprobs, &[1], 0.1).unwrap();
//! assert!(l_aug > l);
//! ```

pub mod ctc;
pub mod delay;
pub mod error;
pub mod fst;
pub mod metrics;
pub mod oracle;
pub mod scoring;
pub mod synth;

pub use ctc::{build_ctc_lattice, ctc_loss, ctc_topology, dense_fsa, min_alignment_length, CtcTopology};
pub use delay::{
    apply_delay_penalty, delay_penalized_ctc_loss, exact_aug_loss, expected_delay, PenaltyConfig,
    DEFAULT_LAMBDA,
};
pub use error::{Error, Result};
pub use fst::{compose, intersect_dense, linear_fsa, Arc, DenseFsa, Fsa, Label, Lattice, Validation};
pub use metrics::{
    align_words, delay_metrics, greedy_decode, DelayReport, Timed, TimedToken, TimedWord,
    DEFAULT_FRAME_SHIFT_MS,
};
pub use scoring::{arc_posteriors, grad_wrt_logprobs, total_score, PosteriorResult, ScoreResult};
