//! Greedy CTC decoding with run timing, word alignment, WER and emission
//! latency (mean start / end delay against a reference alignment).

use std::collections::HashMap;
use std::fmt::Write as _;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fst::{Label, BLANK};

pub const DEFAULT_FRAME_SHIFT_MS: f64 = 40.0;

/// A unit with the inclusive frame range of its run.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Timed<T> {
    pub token: T,
    pub start_frame: usize,
    pub end_frame: usize,
}

pub type TimedToken = Timed<Label>;
pub type TimedWord = Timed<String>;

impl<T> Timed<T> {
    pub fn new(token: T, start_frame: usize, end_frame: usize) -> Self {
        debug_assert!(start_frame <= end_frame);
        Timed {
            token,
            start_frame,
            end_frame,
        }
    }
}

/// Index of the row maximum; ties go to the smaller index.
fn argmax(row: ndarray::ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = k;
        }
    }
    best
}

/// Per-frame argmax, repeats merged, blanks dropped. Each token spans the
/// frames of its argmax run.
pub fn greedy_decode(logprobs: &Array2<f64>) -> Vec<TimedToken> {
    let best: Vec<Label> = logprobs.rows().into_iter().map(|r| argmax(r) as Label).collect();
    decode_argmax(&best)
}

/// Collapse an explicit per-frame label sequence.
pub fn decode_argmax(best: &[Label]) -> Vec<TimedToken> {
    let mut out: Vec<TimedToken> = Vec::new();
    let mut prev = None;
    for (t, &k) in best.iter().enumerate() {
        if prev == Some(k) {
            if k != BLANK {
                out.last_mut().expect("open run").end_frame = t;
            }
        } else if k != BLANK {
            out.push(Timed::new(k, t, t));
        }
        prev = Some(k);
    }
    out
}

/// Groups word pieces into words. A piece starting with `▁` opens a new
/// word; other pieces extend the current one. Ids missing from `pieces`
/// become their own word named by the id.
pub fn tokens_to_words(tokens: &[TimedToken], pieces: Option<&HashMap<Label, String>>) -> Vec<TimedWord> {
    let mut words: Vec<TimedWord> = Vec::new();
    for tok in tokens {
        let Some(piece) = pieces.and_then(|m| m.get(&tok.token)) else {
            words.push(Timed::new(tok.token.to_string(), tok.start_frame, tok.end_frame));
            continue;
        };
        match (piece.strip_prefix('\u{2581}'), words.last_mut()) {
            (None, Some(last)) => {
                last.token.push_str(piece);
                last.end_frame = tok.end_frame;
            }
            (stripped, _) => {
                let text = stripped.unwrap_or(piece).to_string();
                words.push(Timed::new(text, tok.start_frame, tok.end_frame));
            }
        }
    }
    words
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct WordAlignment {
    /// `(hyp index, ref index)` of equal words.
    pub matches: Vec<(usize, usize)>,
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
    pub ref_len: usize,
}

impl WordAlignment {
    pub fn errors(&self) -> usize {
        self.substitutions + self.insertions + self.deletions
    }

    /// Errors over reference length; an empty reference counts as length 1.
    pub fn wer(&self) -> f64 {
        self.errors() as f64 / self.ref_len.max(1) as f64
    }
}

/// Unit-cost Levenshtein alignment. Among minimum-cost alignments the one
/// with the most matches wins; remaining ties place matches as early as
/// possible (the traceback prefers deletions, then insertions, over the
/// diagonal).
pub fn align_words<S: PartialEq>(hyp: &[S], reference: &[S]) -> WordAlignment {
    let (n, m) = (hyp.len(), reference.len());
    // (cost, -matches), compared lexicographically
    let mut best = vec![vec![(0usize, 0isize); m + 1]; n + 1];
    for i in 0..=n {
        for j in 0..=m {
            if i == 0 && j == 0 {
                continue;
            }
            let mut cand = Vec::with_capacity(3);
            if j > 0 {
                let (c, nm) = best[i][j - 1];
                cand.push((c + 1, nm));
            }
            if i > 0 {
                let (c, nm) = best[i - 1][j];
                cand.push((c + 1, nm));
            }
            if i > 0 && j > 0 {
                let (c, nm) = best[i - 1][j - 1];
                cand.push(if hyp[i - 1] == reference[j - 1] {
                    (c, nm - 1)
                } else {
                    (c + 1, nm)
                });
            }
            best[i][j] = *cand.iter().min().expect("non-empty");
        }
    }

    let mut out = WordAlignment {
        ref_len: m,
        ..Default::default()
    };
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = best[i][j];
        if j > 0 && (best[i][j - 1].0 + 1, best[i][j - 1].1) == here {
            out.deletions += 1;
            j -= 1;
        } else if i > 0 && (best[i - 1][j].0 + 1, best[i - 1][j].1) == here {
            out.insertions += 1;
            i -= 1;
        } else {
            if hyp[i - 1] == reference[j - 1] {
                out.matches.push((i - 1, j - 1));
            } else {
                out.substitutions += 1;
            }
            i -= 1;
            j -= 1;
        }
    }
    out.matches.reverse();
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DelayReport {
    /// Mean start delay in ms; absent when no word matched.
    pub msd_ms: Option<f64>,
    /// Mean end delay in ms; absent when no word matched.
    pub med_ms: Option<f64>,
    pub matched_words: usize,
    pub wer: f64,
    pub frame_shift_ms: f64,
    pub ref_words: usize,
    pub errors: usize,
}

impl DelayReport {
    pub fn delays(&self) -> Result<(f64, f64)> {
        self.msd_ms.zip(self.med_ms).ok_or(Error::NoMatchedWords)
    }
}

/// Corpus-level accumulator: delays are averaged per matched word over all
/// utterances, WER is total errors over total reference words.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DelayAccumulator {
    start_delta_frames: i64,
    end_delta_frames: i64,
    matched: usize,
    errors: usize,
    ref_words: usize,
}

impl DelayAccumulator {
    pub fn add(&mut self, hyp: &[TimedWord], reference: &[TimedWord]) {
        let hyp_words: Vec<&str> = hyp.iter().map(|w| w.token.as_str()).collect();
        let ref_words: Vec<&str> = reference.iter().map(|w| w.token.as_str()).collect();
        let al = align_words(&hyp_words, &ref_words);
        for &(i, j) in &al.matches {
            self.start_delta_frames += hyp[i].start_frame as i64 - reference[j].start_frame as i64;
            self.end_delta_frames += hyp[i].end_frame as i64 - reference[j].end_frame as i64;
        }
        self.matched += al.matches.len();
        self.errors += al.errors();
        self.ref_words += al.ref_len;
    }

    pub fn merge(&mut self, other: &DelayAccumulator) {
        self.start_delta_frames += other.start_delta_frames;
        self.end_delta_frames += other.end_delta_frames;
        self.matched += other.matched;
        self.errors += other.errors;
        self.ref_words += other.ref_words;
    }

    pub fn report(&self, frame_shift_ms: f64) -> Result<DelayReport> {
        if !(frame_shift_ms > 0.0) || !frame_shift_ms.is_finite() {
            return Err(Error::InvalidFrameShift(frame_shift_ms));
        }
        let mean = |sum: i64| {
            (self.matched > 0).then(|| sum as f64 / self.matched as f64 * frame_shift_ms)
        };
        Ok(DelayReport {
            msd_ms: mean(self.start_delta_frames),
            med_ms: mean(self.end_delta_frames),
            matched_words: self.matched,
            wer: self.errors as f64 / self.ref_words.max(1) as f64,
            frame_shift_ms,
            ref_words: self.ref_words,
            errors: self.errors,
        })
    }
}

/// MSD, MED and WER of one hypothesis against its reference alignment.
/// Positive delays mean the hypothesis emits later than the reference.
pub fn delay_metrics(hyp: &[TimedWord], reference: &[TimedWord], frame_shift_ms: f64) -> Result<DelayReport> {
    let mut acc = DelayAccumulator::default();
    acc.add(hyp, reference);
    acc.report(frame_shift_ms)
}

/// Parses `utt_id<TAB>word:start:end word:start:end ...` lines.
pub fn parse_alignments(text: &str) -> Result<Vec<(String, Vec<TimedWord>)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { line: line_no, msg };
        let (utt, rest) = line.split_once('\t').unwrap_or((line.trim_end(), ""));
        if utt.is_empty() {
            return Err(err("empty utterance id".into()));
        }
        let mut words: Vec<TimedWord> = Vec::new();
        for item in rest.split_whitespace() {
            let mut parts = item.rsplitn(3, ':');
            let (Some(end), Some(start), Some(word)) = (parts.next(), parts.next(), parts.next()) else {
                return Err(err(format!("expected word:start:end, got {item:?}")));
            };
            let start: usize = start.parse().map_err(|_| err(format!("bad start frame in {item:?}")))?;
            let end: usize = end.parse().map_err(|_| err(format!("bad end frame in {item:?}")))?;
            if word.is_empty() || start > end {
                return Err(err(format!("invalid entry {item:?}")));
            }
            if let Some(prev) = words.last() {
                if start <= prev.end_frame {
                    return Err(err(format!("{item:?} overlaps the previous word")));
                }
            }
            words.push(Timed::new(word.to_string(), start, end));
        }
        out.push((utt.to_string(), words));
    }
    Ok(out)
}

pub fn format_alignment(utt: &str, words: &[TimedWord]) -> String {
    let mut line = format!("{utt}\t");
    for (i, w) in words.iter().enumerate() {
        if i > 0 {
            line.push(' ');
        }
        write!(line, "{}:{}:{}", w.token, w.start_frame, w.end_frame).expect("write to String");
    }
    line
}
