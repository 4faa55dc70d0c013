//! Per-cell statistics of repeated annotations: mode, range, share of the
//! mode and share within one code of the mode.

use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::model::{AnnotationMatrix, Rating};
use crate::weights::WeightMatrix;

fn counts(values: &[Rating], w: &WeightMatrix) -> Result<Vec<usize>, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut counts = vec![0usize; w.size()];
    for v in values {
        match counts.get_mut(v.index()) {
            Some(c) => *c += 1,
            None => {
                return Err(MetricsError::InvalidCode {
                    code: v.code(),
                    size: w.size(),
                })
            }
        }
    }
    Ok(counts)
}

/// Most frequent code. Ties go to the candidate with the smallest total
/// penalty against all values under `w`, then to the smaller code.
pub fn mode_annotation(values: &[Rating], w: &WeightMatrix) -> Result<Rating, MetricsError> {
    let counts = counts(values, w)?;
    let top = *counts.iter().max().expect("matrix is non-empty");
    let mut best: Option<(usize, f64)> = None;
    for (code, &count) in counts.iter().enumerate() {
        if count != top {
            continue;
        }
        let cost: f64 = counts
            .iter()
            .enumerate()
            .map(|(other, &n)| w.rows()[code][other] * n as f64)
            .sum();
        if best.is_none_or(|(_, c)| cost < c) {
            best = Some((code, cost));
        }
    }
    let (code, _) = best.expect("at least one code has the top count");
    Ok(values
        .iter()
        .copied()
        .find(|v| v.index() == code)
        .expect("mode is drawn from the values"))
}

/// `max - min` over the numeric codes, with 0 taking part like any code.
pub fn annotation_range(values: &[Rating]) -> Result<u8, MetricsError> {
    let min = values.iter().min().ok_or(MetricsError::Empty)?;
    let max = values.iter().max().ok_or(MetricsError::Empty)?;
    Ok(max.code() - min.code())
}

pub fn proportion_of_mode(values: &[Rating], w: &WeightMatrix) -> Result<f64, MetricsError> {
    let mode = mode_annotation(values, w)?;
    Ok(share(values, |v| v == mode))
}

/// Share of values whose code is within ±1 of the mode's code.
pub fn proportion_in_proximity(values: &[Rating], w: &WeightMatrix) -> Result<f64, MetricsError> {
    let mode = mode_annotation(values, w)?;
    Ok(share(values, |v| v.code().abs_diff(mode.code()) <= 1))
}

fn share(values: &[Rating], pred: impl Fn(Rating) -> bool) -> f64 {
    values.iter().filter(|v| pred(**v)).count() as f64 / values.len() as f64
}

/// Statistics of one (review, variable) cell over the runs that produced a
/// rating for it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub mode: Rating,
    pub range: u8,
    pub prop_mode: f64,
    pub prop_proximity: f64,
    /// Runs with an observed rating for this cell.
    pub n_runs: usize,
}

pub fn cell_stats(values: &[Rating], w: &WeightMatrix) -> Result<CellStats, MetricsError> {
    let mode = mode_annotation(values, w)?;
    Ok(CellStats {
        mode,
        range: annotation_range(values)?,
        prop_mode: share(values, |v| v == mode),
        prop_proximity: share(values, |v| v.code().abs_diff(mode.code()) <= 1),
        n_runs: values.len(),
    })
}

/// Reviews × variables grid of [`CellStats`]. A cell with no observed rating
/// in any run is `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyStats {
    pub review_ids: Vec<String>,
    pub variables: Vec<String>,
    pub total_runs: usize,
    /// Indexed `[review][variable]`.
    pub cells: Vec<Vec<Option<CellStats>>>,
}

impl ConsistencyStats {
    pub fn get(&self, review: usize, variable: usize) -> Option<&CellStats> {
        self.cells.get(review)?.get(variable)?.as_ref()
    }

    /// Mode of every cell, indexed `[variable][review]`.
    pub fn modes_by_variable(&self) -> Vec<Vec<Option<Rating>>> {
        (0..self.variables.len())
            .map(|v| {
                self.cells
                    .iter()
                    .map(|row| row[v].map(|c| c.mode))
                    .collect()
            })
            .collect()
    }
}

pub fn consistency_table(
    matrix: &AnnotationMatrix,
    w: &WeightMatrix,
) -> Result<ConsistencyStats, MetricsError> {
    if matrix.n_runs() < 2 {
        return Err(MetricsError::TooFewRuns(matrix.n_runs()));
    }
    let n_vars = matrix.variables().len();
    let mut cells = Vec::with_capacity(matrix.review_ids().len());
    for review in 0..matrix.review_ids().len() {
        let mut row = Vec::with_capacity(n_vars);
        for variable in 0..n_vars {
            let observed: Vec<Rating> = matrix.cell(review, variable).into_iter().flatten().collect();
            row.push(if observed.is_empty() {
                None
            } else {
                Some(cell_stats(&observed, w)?)
            });
        }
        cells.push(row);
    }
    Ok(ConsistencyStats {
        review_ids: matrix.review_ids().to_vec(),
        variables: matrix.variables().names().iter().map(|s| s.to_string()).collect(),
        total_runs: matrix.n_runs(),
        cells,
    })
}
