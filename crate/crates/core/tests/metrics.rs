use latgraph::metrics::{
    align_words, decode_argmax, delay_metrics, greedy_decode, tokens_to_words, Timed, TimedWord,
};
use latgraph::synth::{peaked_instance, rng, shift_earlier, PeakConfig};
use proptest::prelude::*;

/// Best (cost, matches) over every edit script, by exhaustive recursion.
fn brute_best(hyp: &[u8], reference: &[u8]) -> (usize, usize) {
    fn go(h: &[u8], r: &[u8], best: &mut Vec<(usize, usize)>, cost: usize, matches: usize) {
        if h.is_empty() && r.is_empty() {
            best.push((cost, matches));
            return;
        }
        if !h.is_empty() {
            go(&h[1..], r, best, cost + 1, matches);
        }
        if !r.is_empty() {
            go(h, &r[1..], best, cost + 1, matches);
        }
        if !h.is_empty() && !r.is_empty() {
            let m = h[0] == r[0];
            go(&h[1..], &r[1..], best, cost + usize::from(!m), matches + usize::from(m));
        }
    }
    let mut all = Vec::new();
    go(hyp, reference, &mut all, 0, 0);
    let min_cost = all.iter().map(|x| x.0).min().unwrap();
    let max_matches = all.iter().filter(|x| x.0 == min_cost).map(|x| x.1).max().unwrap();
    (min_cost, max_matches)
}

fn words(hyp: &[(u8, usize)]) -> Vec<TimedWord> {
    hyp.iter().map(|&(w, s)| Timed::new(w.to_string(), s, s + 1)).collect()
}

proptest! {
    #[test]
    fn alignment_is_optimal(hyp in prop::collection::vec(0u8..3, 0..6), reference in prop::collection::vec(0u8..3, 0..6)) {
        let al = align_words(&hyp, &reference);
        let (cost, matches) = brute_best(&hyp, &reference);
        prop_assert_eq!(al.errors(), cost);
        prop_assert_eq!(al.matches.len(), matches);
        prop_assert_eq!(reference.len(), al.matches.len() + al.substitutions + al.deletions);
        prop_assert_eq!(hyp.len(), al.matches.len() + al.substitutions + al.insertions);
        for w in al.matches.windows(2) {
            prop_assert!(w[0].0 < w[1].0 && w[0].1 < w[1].1);
        }
        for &(i, j) in &al.matches {
            prop_assert_eq!(hyp[i], reference[j]);
        }
    }

    #[test]
    fn swapping_roles_negates_delays(
        hyp in prop::collection::vec((0u8..3, 0usize..50), 1..5),
        reference in prop::collection::vec((0u8..3, 0usize..50), 1..5),
    ) {
        let mut h = hyp.clone();
        h.sort_by_key(|x| x.1);
        let mut r = reference.clone();
        r.sort_by_key(|x| x.1);
        let (hw, rw) = (words(&h), words(&r));
        let fwd = align_words(&h.iter().map(|x| x.0).collect::<Vec<_>>(), &r.iter().map(|x| x.0).collect::<Vec<_>>());
        let back = align_words(&r.iter().map(|x| x.0).collect::<Vec<_>>(), &h.iter().map(|x| x.0).collect::<Vec<_>>());
        let flipped: Vec<_> = back.matches.iter().map(|&(a, b)| (b, a)).collect();
        prop_assume!(fwd.matches == flipped);
        let a = delay_metrics(&hw, &rw, 40.0).unwrap();
        let b = delay_metrics(&rw, &hw, 40.0).unwrap();
        prop_assert_eq!(a.msd_ms.map(|x| -x), b.msd_ms.map(|x| x + 0.0));
        prop_assert_eq!(a.med_ms.map(|x| -x), b.med_ms.map(|x| x + 0.0));
    }

    #[test]
    fn decoded_runs_are_ordered(best in prop::collection::vec(0i32..4, 0..30)) {
        let toks = decode_argmax(&best);
        for t in &toks {
            prop_assert!(t.start_frame <= t.end_frame);
            prop_assert!(t.end_frame < best.len());
            for f in t.start_frame..=t.end_frame {
                prop_assert_eq!(best[f], t.token);
            }
        }
        for w in toks.windows(2) {
            prop_assert!(w[0].end_frame < w[1].start_frame);
        }
    }
}

#[test]
fn identical_alignments_have_zero_delay() {
    let r = words(&[(1, 2), (2, 7), (1, 12)]);
    let rep = delay_metrics(&r, &r, 40.0).unwrap();
    assert_eq!(rep.msd_ms, Some(0.0));
    assert_eq!(rep.med_ms, Some(0.0));
    assert_eq!(rep.wer, 0.0);
    assert_eq!(rep.matched_words, 3);
}

#[test]
fn leftward_shift_moves_msd_by_whole_frames() {
    for seed in 0..20 {
        let inst = peaked_instance(&mut rng(seed), &PeakConfig::default());
        let reference = inst.reference.clone().unwrap();
        let base_hyp = tokens_to_words(&greedy_decode(&inst.logprobs), None);
        let base = delay_metrics(&base_hyp, &reference, 40.0).unwrap();
        for k in 1..=3usize {
            let shifted = shift_earlier(&inst.logprobs, k);
            let hyp = tokens_to_words(&greedy_decode(&shifted), None);
            let rep = delay_metrics(&hyp, &reference, 40.0).unwrap();
            assert_eq!(rep.matched_words, base.matched_words);
            let d = rep.msd_ms.unwrap() - base.msd_ms.unwrap();
            assert!((d + k as f64 * 40.0).abs() < 1e-9, "seed {seed} k {k}: {d}");
            let e = rep.med_ms.unwrap() - base.med_ms.unwrap();
            assert!((e + k as f64 * 40.0).abs() < 1e-9);
        }
    }
}
