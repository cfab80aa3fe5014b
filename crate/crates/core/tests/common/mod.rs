#![allow(dead_code)]

use latgraph::fst::{Fsa, Label, Lattice};
use ndarray::Array2;

/// Every accepting path of an Fsa as (arc indices, summed score), by plain
/// depth-first search. Only for acyclic graphs.
pub fn brute_paths(fsa: &Fsa) -> Vec<(Vec<usize>, f64)> {
    let mut out = Vec::new();
    if fsa.is_empty() {
        return out;
    }
    let mut stack = vec![(fsa.start_state(), Vec::<usize>::new(), 0.0f64)];
    while let Some((s, arcs, score)) = stack.pop() {
        if s == fsa.final_state() {
            out.push((arcs, score));
            continue;
        }
        for (i, a) in fsa.arcs().iter().enumerate() {
            if a.src == s {
                let mut next = arcs.clone();
                next.push(i);
                stack.push((a.dst, next, score + a.score));
            }
        }
    }
    out
}

/// Alignment (input labels without the final arc) and score of every path.
pub fn lattice_alignments(lat: &Lattice) -> Vec<(Vec<Label>, f64)> {
    let mut out: Vec<_> = brute_paths(lat.fsa())
        .into_iter()
        .map(|(arcs, score)| {
            let labels: Vec<Label> = arcs
                .iter()
                .map(|&i| lat.token_of_arc(i))
                .filter(|&k| k != -1)
                .collect();
            (labels, score)
        })
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

pub fn lse(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn uniform(frames: usize, cols: usize) -> Array2<f64> {
    Array2::from_elem((frames, cols), (1.0 / cols as f64).ln())
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// Central finite differences of `f` at every entry of `x`.
pub fn finite_diff_grad(x: &Array2<f64>, step: f64, f: impl Fn(&Array2<f64>) -> f64) -> Array2<f64> {
    let mut grad = Array2::zeros(x.dim());
    for idx in ndarray::indices(x.dim()) {
        let mut plus = x.clone();
        plus[idx] += step;
        let mut minus = x.clone();
        minus[idx] -= step;
        grad[idx] = (f(&plus) - f(&minus)) / (2.0 * step);
    }
    grad
}
