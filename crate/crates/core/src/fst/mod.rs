//! Attributed weighted finite-state transducers.
//!
//! An [`Fsa`] has a single start state (always 0) and a single final state.
//! Every arc entering the final state carries input label `-1` and no other arc
//! does. Arcs are stored grouped by source state; within a group they are
//! ordered by input label with the `-1` final arc last, so iteration order is a
//! pure function of the arc set.
//!
//! Each arc carries a binary `emit_attr`. Derived graphs ([`compose`],
//! [`intersect_dense`]) copy it from the arc of the left operand that produced
//! them and keep an arc-origin map pointing back at their operands.

mod compose;
mod dense;
mod intersect;
mod lattice;
mod text;

pub use compose::compose;
pub use dense::{DenseFsa, Validation};
pub use intersect::intersect_dense;
pub use lattice::Lattice;
pub use text::format_score;

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use crate::error::{Error, Result};

pub type StateId = usize;
pub type Label = i32;

/// Input (and output) label of arcs entering the final state.
pub const FINAL_LABEL: Label = -1;
/// Output label meaning "no output".
pub const EPSILON: Label = 0;
/// Input label of the CTC blank symbol.
pub const BLANK: Label = 0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arc {
    pub src: StateId,
    pub dst: StateId,
    pub in_label: Label,
    pub out_label: Label,
    /// Natural-log score.
    pub score: f64,
    pub emit_attr: bool,
}

impl Arc {
    pub fn new(src: StateId, dst: StateId, in_label: Label, out_label: Label, score: f64) -> Self {
        Arc {
            src,
            dst,
            in_label,
            out_label,
            score,
            emit_attr: false,
        }
    }

    pub fn with_emit(mut self, emit_attr: bool) -> Self {
        self.emit_attr = emit_attr;
        self
    }

    /// Final arc shorthand: `src -> dst` with labels `-1:-1`.
    pub fn final_arc(src: StateId, dst: StateId) -> Self {
        Arc::new(src, dst, FINAL_LABEL, FINAL_LABEL, 0.0)
    }

    pub fn is_final(&self) -> bool {
        self.in_label == FINAL_LABEL
    }
}

/// Where a derived arc came from: `left` indexes the arc of the left operand
/// (H in H∘L, the decoding graph in an intersection), `right` the arc of the
/// right operand when both sides advanced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ArcOrigin {
    pub left: usize,
    pub right: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fsa {
    num_states: usize,
    final_state: StateId,
    arcs: Vec<Arc>,
    /// CSR offsets: arcs of state `s` are `arcs[offsets[s]..offsets[s + 1]]`.
    offsets: Vec<usize>,
    origin: Option<Vec<ArcOrigin>>,
}

fn invalid(index: usize, reason: impl Into<String>) -> Error {
    Error::InvalidArc {
        index,
        reason: reason.into(),
    }
}

/// Sort key: source state, then input label with `-1` last, then output
/// label and destination. The sort is stable so exact duplicates keep
/// insertion order.
fn sort_permutation(arcs: &[Arc]) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..arcs.len()).collect();
    perm.sort_by_key(|&i| {
        let a = &arcs[i];
        (a.src, a.is_final(), a.in_label, a.out_label, a.dst)
    });
    perm
}

fn permute<T: Copy>(items: &[T], perm: &[usize]) -> Vec<T> {
    perm.iter().map(|&i| items[i]).collect()
}

impl Fsa {
    /// Validates and builds an Fsa. The final state is the destination of the
    /// `-1` arcs; without any, the last state is taken as final.
    pub fn new(num_states: usize, arcs: Vec<Arc>) -> Result<Fsa> {
        if num_states == 0 {
            if let Some(i) = (0..arcs.len()).next() {
                return Err(invalid(i, "arc in a graph with no states"));
            }
            return Ok(Fsa::empty());
        }
        let mut final_state = None;
        for (i, a) in arcs.iter().enumerate() {
            if a.is_final() {
                match final_state {
                    None => final_state = Some(a.dst),
                    Some(f) if f != a.dst => {
                        return Err(invalid(i, format!("second final state {} (first {f})", a.dst)))
                    }
                    _ => {}
                }
            }
        }
        Fsa::with_final(num_states, final_state.unwrap_or(num_states - 1), arcs)
    }

    /// Validates and builds an Fsa with an explicit final state.
    pub fn with_final(num_states: usize, final_state: StateId, arcs: Vec<Arc>) -> Result<Fsa> {
        if num_states == 0 {
            return Fsa::new(0, arcs);
        }
        if final_state >= num_states {
            return Err(invalid(0, format!("final state {final_state} out of range")));
        }
        for (i, a) in arcs.iter().enumerate() {
            if a.src >= num_states || a.dst >= num_states {
                return Err(invalid(
                    i,
                    format!("state index out of range ({} -> {}, {num_states} states)", a.src, a.dst),
                ));
            }
            if a.src == final_state {
                return Err(invalid(i, "arc leaves the final state"));
            }
            if a.is_final() != (a.dst == final_state) {
                return Err(invalid(i, "label -1 must be used exactly on arcs entering the final state"));
            }
            if a.in_label < FINAL_LABEL || a.out_label < FINAL_LABEL {
                return Err(invalid(i, "negative label other than -1"));
            }
            if a.score.is_nan() || a.score == f64::INFINITY {
                return Err(invalid(i, format!("score {}", a.score)));
            }
            if a.emit_attr && a.out_label <= EPSILON {
                return Err(invalid(i, "emit attribute on an arc without output"));
            }
        }
        Ok(Fsa::from_parts(num_states, final_state, arcs, None).0)
    }

    /// The Fsa with no states; the result of trimming a graph with an empty language.
    pub fn empty() -> Fsa {
        Fsa {
            num_states: 0,
            final_state: 0,
            arcs: Vec::new(),
            offsets: vec![0],
            origin: None,
        }
    }

    /// Sorts arcs into canonical order and builds the state index. Returns the
    /// permutation applied (new position -> old position).
    pub(crate) fn from_parts(
        num_states: usize,
        final_state: StateId,
        arcs: Vec<Arc>,
        origin: Option<Vec<ArcOrigin>>,
    ) -> (Fsa, Vec<usize>) {
        let perm = sort_permutation(&arcs);
        let arcs = permute(&arcs, &perm);
        let origin = origin.map(|o| permute(&o, &perm));
        let mut offsets = vec![0usize; num_states + 1];
        for a in &arcs {
            offsets[a.src + 1] += 1;
        }
        for s in 0..num_states {
            offsets[s + 1] += offsets[s];
        }
        let fsa = Fsa {
            num_states,
            final_state,
            arcs,
            offsets,
            origin,
        };
        (fsa, perm)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_arcs(&self) -> usize {
        self.arcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.num_states == 0
    }

    pub fn start_state(&self) -> StateId {
        0
    }

    pub fn final_state(&self) -> StateId {
        self.final_state
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    /// Index range (into [`Fsa::arcs`]) of the arcs leaving `state`.
    pub fn arc_range(&self, state: StateId) -> std::ops::Range<usize> {
        self.offsets[state]..self.offsets[state + 1]
    }

    pub fn arcs_from(&self, state: StateId) -> &[Arc] {
        &self.arcs[self.arc_range(state)]
    }

    pub fn arc_origin(&self, arc: usize) -> Option<ArcOrigin> {
        self.origin.as_ref().map(|o| o[arc])
    }

    pub fn origins(&self) -> Option<&[ArcOrigin]> {
        self.origin.as_deref()
    }

    /// True when every arc goes from a lower to a higher state number, which
    /// is what `trim_and_sort` produces for acyclic input.
    pub fn is_topologically_sorted(&self) -> bool {
        self.arcs.iter().all(|a| a.src < a.dst)
    }

    /// Returns a copy with identical topology and attributes but new scores.
    pub(crate) fn with_scores(&self, scores: impl IntoIterator<Item = f64>) -> Fsa {
        let mut out = self.clone();
        for (a, s) in out.arcs.iter_mut().zip(scores) {
            a.score = s;
        }
        out
    }

    pub fn trim_and_sort(&self) -> Fsa {
        self.trim_and_sort_with_map().0
    }

    /// Like [`Fsa::trim_and_sort`], also returning for every arc of the result
    /// the index of the arc of `self` it came from.
    pub(crate) fn trim_and_sort_with_map(&self) -> (Fsa, Vec<usize>) {
        if self.is_empty() {
            return (self.clone(), Vec::new());
        }
        let n = self.num_states;
        let start = self.start_state();

        let mut fwd = vec![false; n];
        let mut queue = VecDeque::from([start]);
        fwd[start] = true;
        while let Some(s) = queue.pop_front() {
            for a in self.arcs_from(s) {
                if !fwd[a.dst] {
                    fwd[a.dst] = true;
                    queue.push_back(a.dst);
                }
            }
        }

        let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, a) in self.arcs.iter().enumerate() {
            incoming[a.dst].push(i);
        }
        let mut bwd = vec![false; n];
        bwd[self.final_state] = true;
        queue.push_back(self.final_state);
        while let Some(s) = queue.pop_front() {
            for &i in &incoming[s] {
                let src = self.arcs[i].src;
                if !bwd[src] {
                    bwd[src] = true;
                    queue.push_back(src);
                }
            }
        }

        let keep: Vec<bool> = (0..n).map(|s| fwd[s] && bwd[s]).collect();
        if !keep[start] || !keep[self.final_state] {
            let mut empty = Fsa::empty();
            empty.origin = self.origin.as_ref().map(|_| Vec::new());
            return (empty, Vec::new());
        }
        let kept_arcs: Vec<usize> = (0..self.arcs.len())
            .filter(|&i| keep[self.arcs[i].src] && keep[self.arcs[i].dst])
            .collect();

        // Kahn's algorithm, smallest state first for a deterministic order.
        let mut indegree = vec![0usize; n];
        for &i in &kept_arcs {
            indegree[self.arcs[i].dst] += 1;
        }
        let mut ready: BinaryHeap<Reverse<StateId>> = (0..n)
            .filter(|&s| keep[s] && indegree[s] == 0)
            .map(Reverse)
            .collect();
        let mut order = Vec::new();
        while let Some(Reverse(s)) = ready.pop() {
            order.push(s);
            for a in self.arcs_from(s) {
                if keep[a.dst] {
                    indegree[a.dst] -= 1;
                    if indegree[a.dst] == 0 {
                        ready.push(Reverse(a.dst));
                    }
                }
            }
        }
        let num_kept = keep.iter().filter(|&&k| k).count();
        if order.len() != num_kept {
            // Cyclic: keep relative numbering, final state last.
            order = (0..n)
                .filter(|&s| keep[s] && s != self.final_state)
                .chain(std::iter::once(self.final_state))
                .collect();
        }
        let mut new_id = vec![usize::MAX; n];
        for (k, &s) in order.iter().enumerate() {
            new_id[s] = k;
        }

        let arcs: Vec<Arc> = kept_arcs
            .iter()
            .map(|&i| {
                let a = self.arcs[i];
                Arc {
                    src: new_id[a.src],
                    dst: new_id[a.dst],
                    ..a
                }
            })
            .collect();
        let origin = self
            .origin
            .as_ref()
            .map(|o| kept_arcs.iter().map(|&i| o[i]).collect());
        let (fsa, perm) = Fsa::from_parts(num_kept, new_id[self.final_state], arcs, origin);
        let map = perm.iter().map(|&p| kept_arcs[p]).collect();
        (fsa, map)
    }
}

/// Linear graph accepting exactly `labels` followed by the final arc; an
/// identity transducer with all scores zero.
pub fn linear_fsa(labels: &[Label], vocab_size: usize) -> Result<Fsa> {
    if labels.is_empty() {
        return Err(Error::EmptyLabels);
    }
    let max = vocab_size as Label;
    let mut arcs = Vec::with_capacity(labels.len() + 1);
    for (i, &label) in labels.iter().enumerate() {
        if label < 1 || label > max {
            return Err(Error::LabelOutOfRange { label, max });
        }
        arcs.push(Arc::new(i, i + 1, label, label, 0.0));
    }
    let last = labels.len();
    arcs.push(Arc::final_arc(last, last + 1));
    Fsa::new(labels.len() + 2, arcs)
}
