use ndarray::Array2;

use crate::error::{Error, Result};
use crate::scoring::log_sum_exp;

/// Row-normalization checking applied when building a [`DenseFsa`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Validation {
    #[default]
    Off,
    /// Every row's log-sum-exp must be within `1e-3` of zero.
    Strict,
}

pub const NORMALIZATION_TOLERANCE: f64 = 1e-3;

/// A `T x (V+1)` matrix of natural-log probabilities viewed as a linear
/// acceptor: frame `t` offers every label `k` with score `logprobs[[t, k]]`.
/// Column 0 is the blank.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseFsa {
    logprobs: Array2<f64>,
}

impl DenseFsa {
    pub fn new(logprobs: Array2<f64>) -> Result<DenseFsa> {
        DenseFsa::validated(logprobs, Validation::Off)
    }

    pub fn validated(logprobs: Array2<f64>, validation: Validation) -> Result<DenseFsa> {
        let (frames, cols) = logprobs.dim();
        if frames == 0 {
            return Err(Error::BadShape("at least one frame is required".into()));
        }
        if cols < 2 {
            return Err(Error::BadShape(format!(
                "{cols} columns; need blank plus at least one token"
            )));
        }
        for (t, row) in logprobs.rows().into_iter().enumerate() {
            for (k, &v) in row.iter().enumerate() {
                if v.is_nan() || v == f64::INFINITY {
                    return Err(Error::InvalidLogProb {
                        row: t,
                        col: k,
                        value: v,
                    });
                }
            }
            if row.iter().all(|&v| v == f64::NEG_INFINITY) {
                return Err(Error::AllNegInfRow(t));
            }
            if validation == Validation::Strict {
                let lse = log_sum_exp(row.iter().copied());
                if lse.abs() > NORMALIZATION_TOLERANCE {
                    return Err(Error::NotNormalized { row: t, lse });
                }
            }
        }
        Ok(DenseFsa { logprobs })
    }

    pub fn num_frames(&self) -> usize {
        self.logprobs.nrows()
    }

    pub fn vocab_plus_blank(&self) -> usize {
        self.logprobs.ncols()
    }

    /// Number of non-blank tokens V.
    pub fn vocab_size(&self) -> usize {
        self.logprobs.ncols() - 1
    }

    pub fn logprobs(&self) -> &Array2<f64> {
        &self.logprobs
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.logprobs
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn single_frame() {
        let d = DenseFsa::new(array![[0.3f64.ln(), 0.7f64.ln()]]).unwrap();
        assert_eq!(d.num_frames(), 1);
        assert_eq!(d.vocab_size(), 1);
    }

    #[test]
    fn rejects_bad_rows() {
        let ninf = f64::NEG_INFINITY;
        assert_eq!(
            DenseFsa::new(array![[0.0, 0.0], [ninf, ninf]]),
            Err(Error::AllNegInfRow(1))
        );
        assert!(matches!(
            DenseFsa::new(array![[f64::NAN, 0.0]]),
            Err(Error::InvalidLogProb { .. })
        ));
        assert!(matches!(
            DenseFsa::new(Array2::zeros((0, 3))),
            Err(Error::BadShape(_))
        ));
        assert!(matches!(
            DenseFsa::new(Array2::zeros((2, 1))),
            Err(Error::BadShape(_))
        ));
    }

    #[test]
    fn strict_mode_checks_normalization() {
        let half = 0.5f64.ln();
        assert!(DenseFsa::validated(array![[half, half]], Validation::Strict).is_ok());
        assert!(DenseFsa::validated(array![[half, half + 0.01]], Validation::Strict).is_err());
        assert!(DenseFsa::validated(array![[half, half + 0.01]], Validation::Off).is_ok());
    }
}
