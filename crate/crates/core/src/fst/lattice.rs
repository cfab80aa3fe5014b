use super::{Fsa, Label};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
struct FrameInfo {
    num_frames: usize,
    vocab_plus_blank: usize,
    frame_of_arc: Vec<usize>,
    graph_arc: Vec<usize>,
}

/// An acyclic, trimmed, topologically numbered Fsa, optionally annotated with
/// the frame index of every arc (as produced by [`super::intersect_dense`]).
///
/// Emission arcs sit at frames `0..T`; the final arc sits at frame `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    fsa: Fsa,
    frames: Option<FrameInfo>,
}

impl Lattice {
    /// Wraps an arbitrary acyclic Fsa without frame annotations.
    pub fn from_fsa(fsa: &Fsa) -> Result<Lattice> {
        let fsa = fsa.trim_and_sort();
        if !fsa.is_topologically_sorted() {
            return Err(Error::Cyclic);
        }
        Ok(Lattice { fsa, frames: None })
    }

    /// `fsa` must already be trimmed and sorted, `frame_of_arc` and `graph_arc`
    /// indexed like its arcs.
    pub(crate) fn annotated(
        fsa: Fsa,
        num_frames: usize,
        vocab_plus_blank: usize,
        frame_of_arc: Vec<usize>,
        graph_arc: Vec<usize>,
    ) -> Lattice {
        debug_assert!(fsa.is_topologically_sorted());
        debug_assert_eq!(frame_of_arc.len(), fsa.num_arcs());
        Lattice {
            fsa,
            frames: Some(FrameInfo {
                num_frames,
                vocab_plus_blank,
                frame_of_arc,
                graph_arc,
            }),
        }
    }

    pub fn fsa(&self) -> &Fsa {
        &self.fsa
    }

    pub fn num_arcs(&self) -> usize {
        self.fsa.num_arcs()
    }

    pub fn num_states(&self) -> usize {
        self.fsa.num_states()
    }

    pub fn is_empty(&self) -> bool {
        self.fsa.is_empty()
    }

    pub fn has_frame_info(&self) -> bool {
        self.frames.is_some()
    }

    /// Number of frames T of the dense acceptor this lattice was built from.
    pub fn num_frames(&self) -> Option<usize> {
        self.frames.as_ref().map(|f| f.num_frames)
    }

    pub fn vocab_plus_blank(&self) -> Option<usize> {
        self.frames.as_ref().map(|f| f.vocab_plus_blank)
    }

    pub fn frame_of_arc(&self, arc: usize) -> Option<usize> {
        self.frames.as_ref().map(|f| f.frame_of_arc[arc])
    }

    pub fn frames(&self) -> Option<&[usize]> {
        self.frames.as_ref().map(|f| f.frame_of_arc.as_slice())
    }

    /// Index of the decoding-graph arc this lattice arc was taken from.
    pub fn graph_arc(&self, arc: usize) -> Option<usize> {
        self.frames.as_ref().map(|f| f.graph_arc[arc])
    }

    pub fn emit_of_arc(&self, arc: usize) -> bool {
        self.fsa.arcs()[arc].emit_attr
    }

    pub fn token_of_arc(&self, arc: usize) -> Label {
        self.fsa.arcs()[arc].in_label
    }

    pub fn scores(&self) -> impl Iterator<Item = f64> + '_ {
        self.fsa.arcs().iter().map(|a| a.score)
    }

    /// Same structure and annotations, different arc scores.
    pub(crate) fn with_scores(&self, scores: impl IntoIterator<Item = f64>) -> Lattice {
        Lattice {
            fsa: self.fsa.with_scores(scores),
            frames: self.frames.clone(),
        }
    }

    /// Number of accepting paths, saturating at `u128::MAX`.
    pub fn count_paths(&self) -> u128 {
        if self.is_empty() {
            return 0;
        }
        let mut count = vec![0u128; self.num_states()];
        count[self.fsa.start_state()] = 1;
        for a in self.fsa.arcs() {
            count[a.dst] = count[a.dst].saturating_add(count[a.src]);
        }
        count[self.fsa.final_state()]
    }

    /// Every accepting path as a sequence of arc indices, in lexicographic
    /// arc order. Fails if there are more than `limit` paths.
    pub fn paths(&self, limit: usize) -> Result<Vec<Vec<usize>>> {
        let n = self.count_paths();
        if n > limit as u128 {
            return Err(Error::InstanceTooLarge(format!("{n} paths exceed limit {limit}")));
        }
        let mut out = Vec::with_capacity(n as usize);
        if self.is_empty() {
            return Ok(out);
        }
        let mut stack = vec![(self.fsa.start_state(), Vec::new())];
        while let Some((state, prefix)) = stack.pop() {
            if state == self.fsa.final_state() {
                out.push(prefix);
                continue;
            }
            for i in self.fsa.arc_range(state).rev() {
                let mut next = prefix.clone();
                next.push(i);
                stack.push((self.fsa.arcs()[i].dst, next));
            }
        }
        Ok(out)
    }
}
