//! CTC decoding graphs: the compact topology, per-utterance label graphs, the
//! dense acceptor and the lattice `intersect(compose(H, L), U)`.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::fst::{
    compose, intersect_dense, linear_fsa, Arc, DenseFsa, Fsa, Label, Lattice, Validation, BLANK,
    EPSILON,
};
use crate::scoring::score_and_grad;

/// The compact CTC topology over tokens `1..=V` plus blank `0`.
///
/// State 0 is the blank state and state `k` means "inside a run of token
/// `k`". Entering a token state (from blank or from a different token) outputs
/// the token and carries `emit_attr = 1`; staying in a run or falling back to
/// blank outputs epsilon. Every state has a `-1` arc to the final state.
#[derive(Debug, Clone, PartialEq)]
pub struct CtcTopology {
    fsa: Fsa,
    vocab_size: usize,
}

impl CtcTopology {
    pub fn fsa(&self) -> &Fsa {
        &self.fsa
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }
}

pub fn ctc_topology(vocab_size: usize) -> Result<CtcTopology> {
    if vocab_size == 0 || vocab_size > Label::MAX as usize - 1 {
        return Err(Error::InvalidVocabSize(vocab_size));
    }
    let v = vocab_size;
    let final_state = v + 1;
    let mut arcs = Vec::with_capacity((v + 1) * (v + 2));
    for from in 0..=v {
        for to in 0..=v {
            let label = to as Label;
            let arc = if to == BLANK as usize {
                Arc::new(from, 0, BLANK, EPSILON, 0.0)
            } else if from == to {
                Arc::new(from, to, label, EPSILON, 0.0)
            } else {
                Arc::new(from, to, label, label, 0.0).with_emit(true)
            };
            arcs.push(arc);
        }
        arcs.push(Arc::final_arc(from, final_state));
    }
    let fsa = Fsa::new(v + 2, arcs)?;
    Ok(CtcTopology {
        fsa,
        vocab_size: v,
    })
}

/// Builds the dense acceptor, checking row normalization when asked to.
pub fn dense_fsa(logprobs: Array2<f64>, validation: Validation) -> Result<DenseFsa> {
    DenseFsa::validated(logprobs, validation)
}

/// Shortest alignment length for `labels`: one frame per token plus one blank
/// between each pair of equal neighbours.
pub fn min_alignment_length(labels: &[Label]) -> usize {
    labels.len() + labels.windows(2).filter(|w| w[0] == w[1]).count()
}

pub fn build_ctc_lattice(topo: &CtcTopology, labels: &[Label], dense: &DenseFsa) -> Result<Lattice> {
    if dense.vocab_size() != topo.vocab_size() {
        return Err(Error::BadShape(format!(
            "dense acceptor has {} tokens, topology has {}",
            dense.vocab_size(),
            topo.vocab_size()
        )));
    }
    let l = linear_fsa(labels, topo.vocab_size())?;
    let required = min_alignment_length(labels);
    let frames = dense.num_frames();
    if frames < required {
        return Err(Error::NoValidAlignment { frames, required });
    }
    let hl = compose(topo.fsa(), &l)?;
    intersect_dense(&hl, dense).map_err(|e| match e {
        // -inf entries can still leave no path
        Error::NoValidPath => Error::NoValidAlignment { frames, required },
        e => e,
    })
}

/// CTC log-likelihood `log Σ_π exp(s_π)` and its gradient with respect to
/// `logprobs`. Higher is better.
pub fn ctc_loss(logprobs: &Array2<f64>, labels: &[Label]) -> Result<(f64, Array2<f64>)> {
    let dense = DenseFsa::new(logprobs.clone())?;
    let topo = ctc_topology(dense.vocab_size())?;
    let lat = build_ctc_lattice(&topo, labels, &dense)?;
    score_and_grad(&lat)
}
