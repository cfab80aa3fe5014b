//! Brute-force reference for the CTC lattice machinery.
//!
//! Everything here is computed from the definitions over explicitly
//! enumerated alignments and shares no code with the graph pipeline.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::fst::Label;

/// Cap on `(V+1)^T`, the number of candidate sequences filtered.
pub const MAX_CANDIDATES: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentPath {
    /// One label per frame, 0 = blank.
    pub pi: Vec<Label>,
    /// First frame of each token run.
    pub q: Vec<usize>,
    /// `Σ_u ((T-1)/2 - q_u)`.
    pub d: f64,
}

impl AlignmentPath {
    /// `s_π = Σ_t logprobs[t][π_t]`.
    pub fn score(&self, logprobs: &Array2<f64>) -> f64 {
        self.pi
            .iter()
            .enumerate()
            .map(|(t, &k)| logprobs[[t, k as usize]])
            .sum()
    }
}

/// Merge repeats, drop blanks. Returns the collapsed labels and the first
/// frame of each surviving run.
pub fn collapse(pi: &[Label]) -> (Vec<Label>, Vec<usize>) {
    let mut labels = Vec::new();
    let mut starts = Vec::new();
    let mut prev = None;
    for (t, &k) in pi.iter().enumerate() {
        if k != 0 && prev != Some(k) {
            labels.push(k);
            starts.push(t);
        }
        prev = Some(k);
    }
    (labels, starts)
}

/// All length-`num_frames` sequences over `{0..=V}` that collapse to
/// `labels`, in lexicographic order.
pub fn enumerate_alignments(
    num_frames: usize,
    labels: &[Label],
    vocab_size: usize,
) -> Result<Vec<AlignmentPath>> {
    let base = vocab_size as u128 + 1;
    let candidates = (0..num_frames).try_fold(1u128, |acc, _| {
        acc.checked_mul(base).filter(|&c| c <= MAX_CANDIDATES)
    });
    let Some(candidates) = candidates else {
        return Err(Error::InstanceTooLarge(format!(
            "{base}^{num_frames} candidate sequences"
        )));
    };
    let mid = (num_frames as f64 - 1.0) / 2.0;
    let mut out = Vec::new();
    let mut pi = vec![0 as Label; num_frames];
    for code in 0..candidates {
        let mut c = code;
        for slot in pi.iter_mut().rev() {
            *slot = (c % base) as Label;
            c /= base;
        }
        let (collapsed, q) = collapse(&pi);
        if collapsed == labels {
            let d = q.iter().map(|&qu| mid - qu as f64).sum();
            out.push(AlignmentPath {
                pi: pi.clone(),
                q,
                d,
            });
        }
    }
    Ok(out)
}

/// Number of CTC alignments by the classical recurrence over the
/// blank-interleaved label sequence `∅ y1 ∅ y2 … yU ∅`.
pub fn count_alignments(num_frames: usize, labels: &[Label]) -> u128 {
    if num_frames == 0 {
        return u128::from(labels.is_empty());
    }
    let mut ext = vec![0 as Label];
    for &y in labels {
        ext.push(y);
        ext.push(0);
    }
    let s = ext.len();
    let mut prev = vec![0u128; s];
    prev[0] = 1;
    if s > 1 {
        prev[1] = 1;
    }
    for _ in 1..num_frames {
        let mut cur = vec![0u128; s];
        for j in 0..s {
            let mut c = prev[j];
            if j >= 1 {
                c += prev[j - 1];
            }
            if j >= 2 && ext[j] != 0 && ext[j] != ext[j - 2] {
                c += prev[j - 2];
            }
            cur[j] = c;
        }
        prev = cur;
    }
    if s == 1 {
        return prev[0];
    }
    prev[s - 1] + prev[s - 2]
}

fn lse(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleLosses {
    /// `log Σ_π exp(s_π)`.
    pub l: f64,
    /// `L + λ Σ_π w_π d_π`.
    pub l_aug_exact: f64,
    /// `log Σ_π exp(s_π + λ d_π)`.
    pub l_aug_approx: f64,
    /// `log Σ_π exp(s_π) · exp(λ d_π)`, the Bayes-risk grouping of the above.
    pub l_aug_bayes: f64,
    /// `Σ_π w_π d_π` with unpenalized weights.
    pub expected_d: f64,
    /// `Σ_π w'_π d_π` with weights of the penalized scores.
    pub expected_d_penalized: f64,
    /// `w_π = exp(s_π) / Σ exp(s_π)`.
    pub weights: Vec<f64>,
    pub scores: Vec<f64>,
    pub paths: Vec<AlignmentPath>,
}

pub fn oracle_losses(logprobs: &Array2<f64>, labels: &[Label], lambda: f64) -> Result<OracleLosses> {
    let (num_frames, cols) = logprobs.dim();
    if cols < 2 {
        return Err(Error::BadShape(format!("{cols} columns")));
    }
    let paths = enumerate_alignments(num_frames, labels, cols - 1)?;
    let scores: Vec<f64> = paths.iter().map(|p| p.score(logprobs)).collect();
    let l = lse(&scores);
    if paths.is_empty() || l == f64::NEG_INFINITY {
        return Err(Error::NoValidAlignment {
            frames: num_frames,
            required: labels.len() + labels.windows(2).filter(|w| w[0] == w[1]).count(),
        });
    }
    let weights: Vec<f64> = scores.iter().map(|s| (s - l).exp()).collect();
    let expected_d = weights.iter().zip(&paths).map(|(w, p)| w * p.d).sum::<f64>();

    let penalized: Vec<f64> = scores.iter().zip(&paths).map(|(s, p)| s + lambda * p.d).collect();
    let l_aug_approx = lse(&penalized);
    let expected_d_penalized = penalized
        .iter()
        .zip(&paths)
        .map(|(s, p)| (s - l_aug_approx).exp() * p.d)
        .sum();

    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let bayes_sum: f64 = scores
        .iter()
        .zip(&paths)
        .map(|(s, p)| (s - m).exp() * (lambda * p.d).exp())
        .sum();

    Ok(OracleLosses {
        l,
        l_aug_exact: l + lambda * expected_d,
        l_aug_approx,
        l_aug_bayes: m + bayes_sum.ln(),
        expected_d,
        expected_d_penalized,
        weights,
        scores,
        paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn collapse_merges_and_drops_blanks() {
        assert_eq!(collapse(&[1, 1, 0, 2, 2, 0, 2]), (vec![1, 2, 2], vec![0, 3, 6]));
        assert_eq!(collapse(&[0, 0]), (vec![], vec![]));
    }

    #[test]
    fn enumerations_by_hand() {
        let one = enumerate_alignments(1, &[1], 1).unwrap();
        assert_eq!(one, vec![AlignmentPath { pi: vec![1], q: vec![0], d: 0.0 }]);

        let two = enumerate_alignments(2, &[1], 1).unwrap();
        let got: Vec<_> = two.iter().map(|p| (p.pi.clone(), p.q.clone(), p.d)).collect();
        assert_eq!(
            got,
            vec![
                (vec![0, 1], vec![1], -0.5),
                (vec![1, 0], vec![0], 0.5),
                (vec![1, 1], vec![0], 0.5),
            ]
        );

        let rep = enumerate_alignments(3, &[1, 1], 1).unwrap();
        assert_eq!(rep, vec![AlignmentPath { pi: vec![1, 0, 1], q: vec![0, 2], d: 0.0 }]);
    }

    #[test]
    fn size_cap() {
        assert!(matches!(enumerate_alignments(10, &[1], 4), Err(Error::InstanceTooLarge(_))));
        assert!(enumerate_alignments(6, &[1], 9).is_ok());
    }

    #[test]
    fn recurrence_matches_enumeration() {
        for v in 1..=3usize {
            for t in 1..=5usize {
                for labels in [vec![1], vec![1, 1], vec![1, v as Label], vec![v as Label, 1, 1]] {
                    let n = enumerate_alignments(t, &labels, v).unwrap().len() as u128;
                    assert_eq!(count_alignments(t, &labels), n, "T={t} y={labels:?}");
                }
            }
        }
    }

    #[test]
    fn single_frame_losses() {
        let lp = array![[0.3f64.ln(), 0.7f64.ln()]];
        let o = oracle_losses(&lp, &[1], 0.2).unwrap();
        assert_eq!(o.l, 0.7f64.ln());
        assert_eq!(o.weights, vec![1.0]);
        assert_eq!(o.expected_d, 0.0);
        assert_eq!(o.l_aug_exact, o.l);
        assert_eq!(o.l_aug_approx, o.l);
    }

    #[test]
    fn two_frame_uniform_losses() {
        let lp = Array2::from_elem((2, 2), 0.5f64.ln());
        let o = oracle_losses(&lp, &[1], 0.0).unwrap();
        assert!((o.l - 0.75f64.ln()).abs() < 1e-15);
        for w in &o.weights {
            assert!((w - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!((o.expected_d - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(o.l_aug_approx, o.l);
    }

    #[test]
    fn infeasible_instance() {
        let lp = Array2::from_elem((2, 2), 0.5f64.ln());
        assert!(matches!(oracle_losses(&lp, &[1, 1], 0.0), Err(Error::NoValidAlignment { .. })));
    }
}
