use std::collections::HashMap;

use super::{Arc, DenseFsa, Fsa, Lattice, StateId};
use crate::error::{Error, Result};

/// Time-synchronous intersection of a decoding graph with a dense acceptor.
///
/// Lattice states are pairs `(graph state, frame)`. A graph arc with input
/// label `k >= 0` leaving a state at frame `t < T` scores
/// `arc.score + logprobs[t][k]` and reaches frame `t + 1`; arcs whose dense
/// score is `-inf` are dropped. The `-1` final arc is only taken at frame `T`
/// and adds nothing. The result is trimmed and topologically numbered, so
/// every accepting path has exactly `T + 1` arcs.
pub fn intersect_dense(graph: &Fsa, dense: &DenseFsa) -> Result<Lattice> {
    let frames = dense.num_frames();
    let vp1 = dense.vocab_plus_blank();
    if let Some((i, a)) = graph
        .arcs()
        .iter()
        .enumerate()
        .find(|(_, a)| a.in_label as i64 >= vp1 as i64)
    {
        return Err(Error::AlphabetMismatch(format!(
            "graph arc {i} reads label {} but the dense acceptor has {vp1} columns",
            a.in_label
        )));
    }
    if graph.is_empty() {
        return Err(Error::NoValidPath);
    }
    let logprobs = dense.logprobs();

    let mut num_states = 1usize;
    let mut layer: Vec<(StateId, StateId)> = vec![(graph.start_state(), 0)];
    let final_state = usize::MAX; // patched once the state count is known
    let mut arcs = Vec::new();
    let mut frame_of_arc = Vec::new();
    let mut graph_arc = Vec::new();

    for t in 0..=frames {
        let mut next: Vec<(StateId, StateId)> = Vec::new();
        let mut next_ids: HashMap<StateId, StateId> = HashMap::new();
        for &(gs, src) in &layer {
            for gi in graph.arc_range(gs) {
                let ga = graph.arcs()[gi];
                if ga.is_final() {
                    if t == frames {
                        arcs.push(Arc {
                            src,
                            dst: final_state,
                            score: ga.score,
                            ..ga
                        });
                        frame_of_arc.push(t);
                        graph_arc.push(gi);
                    }
                    continue;
                }
                if t == frames {
                    continue;
                }
                let acoustic = logprobs[[t, ga.in_label as usize]];
                if acoustic == f64::NEG_INFINITY {
                    continue;
                }
                let dst = *next_ids.entry(ga.dst).or_insert_with(|| {
                    next.push((ga.dst, num_states));
                    num_states += 1;
                    num_states - 1
                });
                arcs.push(Arc {
                    src,
                    dst,
                    score: ga.score + acoustic,
                    ..ga
                });
                frame_of_arc.push(t);
                graph_arc.push(gi);
            }
        }
        layer = next;
    }

    let final_id = num_states;
    num_states += 1;
    for a in arcs.iter_mut().filter(|a| a.dst == final_state) {
        a.dst = final_id;
    }

    let (raw, perm) = Fsa::from_parts(num_states, final_id, arcs, None);
    let frame_sorted: Vec<usize> = perm.iter().map(|&i| frame_of_arc[i]).collect();
    let graph_sorted: Vec<usize> = perm.iter().map(|&i| graph_arc[i]).collect();
    let (trimmed, kept) = raw.trim_and_sort_with_map();
    if trimmed.is_empty() {
        return Err(Error::NoValidPath);
    }
    let frame_of_arc = kept.iter().map(|&i| frame_sorted[i]).collect();
    let graph_arc = kept.iter().map(|&i| graph_sorted[i]).collect();
    Ok(Lattice::annotated(trimmed, frames, vp1, frame_of_arc, graph_arc))
}
