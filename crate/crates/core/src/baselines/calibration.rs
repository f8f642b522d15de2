//! Held-out threshold calibration over the grid {0.01, ..., 0.99}.
//!
//! For threshold `t`, the abstain error counts correct answers that would be
//! abstained on (`p < t`) plus wrong answers that would be kept (`p >= t`).
//! The chosen threshold is the smallest grid point minimizing that error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Number of grid points; point `i` (1-based) is `i / 100`.
pub const GRID_POINTS: u32 = 99;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceRecord<F> {
    pub sample_id: String,
    pub confidence: F,
    pub correct: bool,
}

impl<F: Scalar> ConfidenceRecord<F> {
    pub fn new(sample_id: impl Into<String>, confidence: F, correct: bool) -> Result<Self> {
        if !(confidence >= F::zero() && confidence <= F::one()) {
            return Err(Error::Input(format!(
                "confidence {confidence:?} outside [0, 1]"
            )));
        }
        Ok(ConfidenceRecord {
            sample_id: sample_id.into(),
            confidence,
            correct,
        })
    }
}

pub fn grid<F: Scalar>() -> impl Iterator<Item = F> {
    (1..=GRID_POINTS).map(F::hundredths)
}

/// Abstain error of threshold `t` on `dev`.
pub fn abstain_error<F: Scalar>(dev: &[ConfidenceRecord<F>], t: F) -> usize {
    dev.iter()
        .filter(|r| if r.correct { r.confidence < t } else { r.confidence >= t })
        .count()
}

/// Smallest grid threshold with minimal abstain error.
///
/// Sorts the confidences once per label and counts with binary search, so the
/// cost is `O(n log n)` for the whole grid.
pub fn calibrate_threshold<F: Scalar>(dev: &[ConfidenceRecord<F>]) -> Result<F> {
    if dev.is_empty() {
        return Err(Error::Calibration("empty development set".into()));
    }
    let sorted = |correct: bool| {
        let mut v: Vec<F> = dev
            .iter()
            .filter(|r| r.correct == correct)
            .map(|r| r.confidence)
            .collect();
        v.sort_by(|a, b| a.partial_cmp(b).expect("confidences are ordered"));
        v
    };
    let right = sorted(true);
    let wrong = sorted(false);

    let mut best: Option<(usize, F)> = None;
    for t in grid::<F>() {
        let abstained_right = right.partition_point(|&p| p < t);
        let kept_wrong = wrong.len() - wrong.partition_point(|&p| p < t);
        let error = abstained_right + kept_wrong;
        if best.is_none_or(|(e, _)| error < e) {
            best = Some((error, t));
        }
    }
    Ok(best.expect("grid is non-empty").1)
}
