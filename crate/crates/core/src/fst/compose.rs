use std::collections::{HashMap, VecDeque};

use super::{Arc, ArcOrigin, Fsa, StateId, EPSILON};
use crate::error::{Error, Result};

#[derive(Default)]
struct StateTable {
    ids: HashMap<(StateId, StateId), StateId>,
    queue: VecDeque<((StateId, StateId), StateId)>,
}

impl StateTable {
    fn lookup(&mut self, pair: (StateId, StateId)) -> StateId {
        let next = self.ids.len();
        let id = *self.ids.entry(pair).or_insert(next);
        if id == next {
            self.queue.push_back((pair, id));
        }
        id
    }
}

/// Composes `h` with an input-epsilon-free `l`.
///
/// An `h` arc with epsilon output advances only the `h` side; an `h` arc with
/// output `k` pairs with every `l` arc reading `k`; final arcs pair with final
/// arcs. Scores add, `emit_attr` is copied from the `h` arc, and the origin map
/// records `(h arc, l arc)`. The result is trimmed.
pub fn compose(h: &Fsa, l: &Fsa) -> Result<Fsa> {
    if let Some((i, a)) = l
        .arcs()
        .iter()
        .enumerate()
        .find(|(_, a)| !a.is_final() && a.in_label <= EPSILON)
    {
        return Err(Error::AlphabetMismatch(format!(
            "right operand arc {i} reads label {}; it must be input-epsilon-free",
            a.in_label
        )));
    }
    if h.is_empty() || l.is_empty() {
        return Ok(Fsa::empty());
    }

    let mut states = StateTable::default();
    states.lookup((h.start_state(), l.start_state()));

    let mut arcs = Vec::new();
    let mut origin = Vec::new();
    while let Some(((hs, ls), src)) = states.queue.pop_front() {
        for hi in h.arc_range(hs) {
            let ha = h.arcs()[hi];
            if !ha.is_final() && ha.out_label == EPSILON {
                let dst = states.lookup((ha.dst, ls));
                arcs.push(Arc {
                    src,
                    dst,
                    ..ha
                });
                origin.push(ArcOrigin { left: hi, right: None });
                continue;
            }
            for li in l.arc_range(ls) {
                let la = l.arcs()[li];
                let matched = if ha.is_final() {
                    la.is_final()
                } else {
                    !la.is_final() && la.in_label == ha.out_label
                };
                if !matched {
                    continue;
                }
                let dst = states.lookup((ha.dst, la.dst));
                arcs.push(Arc {
                    src,
                    dst,
                    in_label: ha.in_label,
                    out_label: la.out_label,
                    score: ha.score + la.score,
                    emit_attr: ha.emit_attr,
                });
                origin.push(ArcOrigin {
                    left: hi,
                    right: Some(li),
                });
            }
        }
    }

    let Some(&final_state) = states.ids.get(&(h.final_state(), l.final_state())) else {
        let mut empty = Fsa::empty();
        empty.origin = Some(Vec::new());
        return Ok(empty);
    };
    let (fsa, _) = Fsa::from_parts(states.ids.len(), final_state, arcs, Some(origin));
    Ok(fsa.trim_and_sort())
}
