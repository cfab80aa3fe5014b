//! Seeded instance generators: small random instances for oracle checks and
//! peaked synthetic emission matrices with a known reference alignment.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::ctc::min_alignment_length;
use crate::fst::Label;
use crate::metrics::{Timed, TimedWord};
use crate::oracle::MAX_CANDIDATES;

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub logprobs: Array2<f64>,
    pub labels: Vec<Label>,
    /// Reference word timing, when the generator knows it.
    pub reference: Option<Vec<TimedWord>>,
}

impl Instance {
    pub fn num_frames(&self) -> usize {
        self.logprobs.nrows()
    }

    pub fn vocab_size(&self) -> usize {
        self.logprobs.ncols() - 1
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Row-wise log-softmax.
pub fn log_softmax(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        row.mapv_inplace(|v| v - lse);
    }
    out
}

/// Bounds for [`random_instance`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomBounds {
    pub max_frames: usize,
    pub max_labels: usize,
    pub max_vocab: usize,
}

impl Default for RandomBounds {
    fn default() -> Self {
        RandomBounds {
            max_frames: 6,
            max_labels: 3,
            max_vocab: 4,
        }
    }
}

/// A feasible random instance: `V` in `1..=max_vocab`, `U` in
/// `1..=max_labels`, `T` between the minimum alignment length and
/// `max_frames`, logits drawn from N(0, 1.5²) and log-softmaxed. Also keeps
/// `(V+1)^T` within the oracle's enumeration cap.
pub fn random_instance<R: Rng>(rng: &mut R, bounds: RandomBounds) -> Instance {
    let normal = Normal::new(0.0, 1.5).expect("valid normal");
    loop {
        let v = rng.random_range(1..=bounds.max_vocab.max(1));
        let u = rng.random_range(1..=bounds.max_labels.max(1));
        let labels: Vec<Label> = (0..u).map(|_| rng.random_range(1..=v as Label)).collect();
        let min_t = min_alignment_length(&labels);
        if min_t > bounds.max_frames {
            continue;
        }
        let t = rng.random_range(min_t..=bounds.max_frames);
        if (v as u128 + 1).checked_pow(t as u32).is_none_or(|c| c > MAX_CANDIDATES) {
            continue;
        }
        let logits = Array2::from_shape_fn((t, v + 1), |_| normal.sample(rng));
        return Instance {
            logprobs: log_softmax(&logits),
            labels,
            reference: None,
        };
    }
}

/// Parameters for [`peaked_instance`].
#[derive(Debug, Clone, PartialEq)]
pub struct PeakConfig {
    pub num_frames: usize,
    pub vocab_size: usize,
    /// Label sequence; drawn at random (no adjacent repeats) when `None`.
    pub labels: Option<Vec<Label>>,
    pub num_labels: usize,
    /// Reference start frame of each token; evenly spaced when `None`.
    pub reference_frames: Option<Vec<usize>>,
    /// Frames between the reference start and the emitted peak; positive
    /// emulates late emission.
    pub peak_offset: i64,
    /// Logit added at the peak centre.
    pub peak_height: f64,
    /// Gaussian width of each bump, in frames.
    pub peak_width: f64,
    /// Constant logit of the blank column.
    pub blank_logit: f64,
    /// Standard deviation of the logit noise.
    pub noise: f64,
    /// Length in frames of each reference word.
    pub reference_len: usize,
}

impl Default for PeakConfig {
    fn default() -> Self {
        PeakConfig {
            num_frames: 60,
            vocab_size: 8,
            labels: None,
            num_labels: 5,
            reference_frames: None,
            peak_offset: 3,
            peak_height: 4.0,
            peak_width: 3.0,
            blank_logit: 3.0,
            noise: 0.3,
            reference_len: 2,
        }
    }
}

/// An emission matrix with one Gaussian bump per label token on its own
/// column and blank elsewhere. The reference alignment marks each token
/// (named by its id) at its reference frames; the bump sits `peak_offset`
/// frames away from that.
pub fn peaked_instance<R: Rng>(rng: &mut R, cfg: &PeakConfig) -> Instance {
    let t_len = cfg.num_frames.max(1);
    let v = cfg.vocab_size.max(1);
    let labels: Vec<Label> = cfg.labels.clone().unwrap_or_else(|| {
        let mut out: Vec<Label> = Vec::with_capacity(cfg.num_labels);
        while out.len() < cfg.num_labels.max(1) {
            let k = rng.random_range(1..=v as Label);
            if v == 1 || out.last() != Some(&k) {
                out.push(k);
            }
        }
        out
    });
    let u = labels.len();
    let starts: Vec<usize> = cfg.reference_frames.clone().unwrap_or_else(|| {
        (0..u)
            .map(|i| ((i as f64 + 0.5) * t_len as f64 / u as f64).floor() as usize)
            .collect()
    });
    let noise = Normal::new(0.0, cfg.noise.max(0.0)).expect("valid normal");
    let mut logits = Array2::from_shape_fn((t_len, v + 1), |_| noise.sample(rng));
    logits.column_mut(0).mapv_inplace(|x| x + cfg.blank_logit);
    for (&k, &start) in labels.iter().zip(&starts) {
        let centre = start as f64 + cfg.peak_offset as f64;
        for t in 0..t_len {
            let z = (t as f64 - centre) / cfg.peak_width.max(1e-6);
            logits[[t, k as usize]] += cfg.peak_height * (-0.5 * z * z).exp();
        }
    }
    let reference = labels
        .iter()
        .zip(&starts)
        .map(|(&k, &s)| {
            let s = s.min(t_len - 1);
            Timed::new(k.to_string(), s, (s + cfg.reference_len.max(1) - 1).min(t_len - 1))
        })
        .collect();
    Instance {
        logprobs: log_softmax(&logits),
        labels,
        reference: Some(reference),
    }
}

/// Moves every frame `k` frames earlier, filling the tail with confident
/// blank frames. Token runs starting at or after frame `k` shift by exactly
/// `k`.
pub fn shift_earlier(logprobs: &Array2<f64>, k: usize) -> Array2<f64> {
    let (frames, cols) = logprobs.dim();
    let mut blank_row = vec![-30.0; cols];
    blank_row[0] = 0.0;
    Array2::from_shape_fn((frames, cols), |(t, c)| {
        if t + k < frames {
            logprobs[[t + k, c]]
        } else {
            blank_row[c]
        }
    })
}
