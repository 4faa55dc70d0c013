use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::model::Rating;
use crate::weights::WeightMatrix;

/// Weighted percentage agreement between two annotation sequences.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WpaResult {
    /// `1 - total_penalty / (n_items * w_max)`, in `[0, 1]`.
    pub value: f64,
    pub n_items: usize,
    pub total_penalty: f64,
}

fn penalty(a: Rating, b: Rating, w: &WeightMatrix) -> Result<f64, MetricsError> {
    for r in [a, b] {
        if !w.supports(r) {
            return Err(MetricsError::InvalidCode {
                code: r.code(),
                size: w.size(),
            });
        }
    }
    Ok(w.get(a, b).expect("codes checked against matrix size"))
}

/// Weighted percentage agreement over two equally long, fully observed
/// sequences.
pub fn wpa(a: &[Rating], b: &[Rating], w: &WeightMatrix) -> Result<WpaResult, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut total = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        total += penalty(x, y, w)?;
    }
    let n = a.len();
    Ok(WpaResult {
        value: 1.0 - total / (n as f64 * w.max()),
        n_items: n,
        total_penalty: total,
    })
}

/// Like [`wpa`], but items missing on either side are dropped first.
/// Returns `Ok(None)` when no item is observed on both sides.
pub fn wpa_observed(
    a: &[Option<Rating>],
    b: &[Option<Rating>],
    w: &WeightMatrix,
) -> Result<Option<WpaResult>, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let (xs, ys): (Vec<Rating>, Vec<Rating>) = a
        .iter()
        .zip(b)
        .filter_map(|(x, y)| Some(((*x)?, (*y)?)))
        .unzip();
    if xs.is_empty() {
        return Ok(None);
    }
    wpa(&xs, &ys, w).map(Some)
}

/// Mean WPA over all unordered pairs of distinct runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairwiseWpa {
    /// `None` only when every pair was undefined.
    pub mean: Option<f64>,
    pub pairs_evaluated: usize,
    /// Pairs with no jointly observed item; excluded from the mean.
    pub pairs_undefined: usize,
}

/// Mean WPA over every unordered pair of runs, `C(R, 2)` pairs for `R` runs.
pub fn pairwise_mean_wpa(runs: &[Vec<Rating>], w: &WeightMatrix) -> Result<PairwiseWpa, MetricsError> {
    let observed: Vec<Vec<Option<Rating>>> = runs
        .iter()
        .map(|r| r.iter().copied().map(Some).collect())
        .collect();
    pairwise_mean_wpa_observed(&observed, w)
}

/// Pairwise mean over runs that may contain missing ratings; each pair only
/// compares the items observed in both runs.
pub fn pairwise_mean_wpa_observed(
    runs: &[Vec<Option<Rating>>],
    w: &WeightMatrix,
) -> Result<PairwiseWpa, MetricsError> {
    if runs.len() < 2 {
        return Err(MetricsError::TooFewRuns(runs.len()));
    }
    let mut sum = 0.0;
    let mut defined = 0usize;
    let mut undefined = 0usize;
    for i in 0..runs.len() {
        for j in (i + 1)..runs.len() {
            match wpa_observed(&runs[i], &runs[j], w)? {
                Some(r) => {
                    sum += r.value;
                    defined += 1;
                }
                None => undefined += 1,
            }
        }
    }
    Ok(PairwiseWpa {
        mean: (defined > 0).then(|| sum / defined as f64),
        pairs_evaluated: defined + undefined,
        pairs_undefined: undefined,
    })
}
