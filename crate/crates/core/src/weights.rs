//! Disagreement penalty matrix used by weighted percentage agreement.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Rating;

/// One way in which a candidate penalty matrix is unusable.
#[derive(Clone, Debug, PartialEq)]
pub enum WeightViolation {
    Empty,
    NotSquare { row: usize, len: usize, expected: usize },
    NonFinite { row: usize, col: usize },
    Negative { row: usize, col: usize, value: f64 },
    NonzeroDiagonal { index: usize, value: f64 },
    Asymmetric { row: usize, col: usize, upper: f64, lower: f64 },
    WrongMax { stated: f64, actual: f64 },
    ZeroMax,
}

impl fmt::Display for WeightViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightViolation::Empty => write!(f, "matrix is empty"),
            WeightViolation::NotSquare { row, len, expected } => {
                write!(f, "row {row} has {len} entries, expected {expected}")
            }
            WeightViolation::NonFinite { row, col } => {
                write!(f, "entry ({row},{col}) is not a finite number")
            }
            WeightViolation::Negative { row, col, value } => {
                write!(f, "entry ({row},{col}) is negative ({value})")
            }
            WeightViolation::NonzeroDiagonal { index, value } => {
                write!(f, "diagonal entry at {index} is {value}, expected 0")
            }
            WeightViolation::Asymmetric {
                row,
                col,
                upper,
                lower,
            } => write!(
                f,
                "asymmetric at ({row},{col}): w[{row}][{col}]={upper} but w[{col}][{row}]={lower}"
            ),
            WeightViolation::WrongMax { stated, actual } => {
                write!(f, "w_max is {stated} but the largest entry is {actual}")
            }
            WeightViolation::ZeroMax => write!(f, "all entries are zero; w_max must be positive"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid weight matrix: {}", render_violations(.0))]
pub struct InvalidWeightMatrix(pub Vec<WeightViolation>);

fn render_violations(v: &[WeightViolation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PenaltyError {
    #[error("code {0} is not a Likert level; the no-information code has its own penalty row")]
    NotLikert(u8),
}

/// Symmetric, zero-diagonal, non-negative k×k penalty table indexed by rating
/// code, together with its largest entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WeightMatrixRepr", into = "WeightMatrixRepr")]
pub struct WeightMatrix {
    rows: Vec<Vec<f64>>,
    max: f64,
}

#[derive(Serialize, Deserialize)]
struct WeightMatrixRepr {
    rows: Vec<Vec<f64>>,
    #[serde(default)]
    w_max: Option<f64>,
}

impl TryFrom<WeightMatrixRepr> for WeightMatrix {
    type Error = InvalidWeightMatrix;
    fn try_from(r: WeightMatrixRepr) -> Result<Self, Self::Error> {
        match r.w_max {
            Some(max) => WeightMatrix::with_max(r.rows, max),
            None => WeightMatrix::new(r.rows),
        }
    }
}

impl From<WeightMatrix> for WeightMatrixRepr {
    fn from(w: WeightMatrix) -> Self {
        WeightMatrixRepr {
            rows: w.rows,
            w_max: Some(w.max),
        }
    }
}

/// The shipped 6×6 matrix for codes 0..=5: quadratic distance between Likert
/// levels, and a hand-set row for the no-information code.
pub fn default_weight_matrix() -> WeightMatrix {
    WeightMatrix::new(vec![
        vec![0.0, 16.0, 9.0, 4.0, 9.0, 16.0],
        vec![16.0, 0.0, 1.0, 4.0, 9.0, 16.0],
        vec![9.0, 1.0, 0.0, 1.0, 4.0, 9.0],
        vec![4.0, 4.0, 1.0, 0.0, 1.0, 4.0],
        vec![9.0, 9.0, 4.0, 1.0, 0.0, 1.0],
        vec![16.0, 16.0, 9.0, 4.0, 1.0, 0.0],
    ])
    .expect("default matrix is valid")
}

impl Default for WeightMatrix {
    fn default() -> Self {
        default_weight_matrix()
    }
}

/// Checks a candidate matrix and its stated maximum, listing every violation.
pub fn validate_weight_matrix(rows: &[Vec<f64>], w_max: f64) -> Result<(), InvalidWeightMatrix> {
    let mut violations = structural_violations(rows);
    if violations.is_empty() {
        let actual = largest_entry(rows);
        if actual == 0.0 {
            violations.push(WeightViolation::ZeroMax);
        } else if w_max != actual {
            violations.push(WeightViolation::WrongMax {
                stated: w_max,
                actual,
            });
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(InvalidWeightMatrix(violations))
    }
}

fn structural_violations(rows: &[Vec<f64>]) -> Vec<WeightViolation> {
    let mut out = Vec::new();
    let k = rows.len();
    if k == 0 {
        out.push(WeightViolation::Empty);
        return out;
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != k {
            out.push(WeightViolation::NotSquare {
                row: i,
                len: row.len(),
                expected: k,
            });
        }
    }
    if !out.is_empty() {
        return out;
    }
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                out.push(WeightViolation::NonFinite { row: i, col: j });
            } else if v < 0.0 {
                out.push(WeightViolation::Negative {
                    row: i,
                    col: j,
                    value: v,
                });
            }
        }
    }
    for (i, row) in rows.iter().enumerate() {
        if row[i] != 0.0 {
            out.push(WeightViolation::NonzeroDiagonal {
                index: i,
                value: row[i],
            });
        }
    }
    for (i, row) in rows.iter().enumerate() {
        for j in (i + 1)..k {
            if row[j] != rows[j][i] {
                out.push(WeightViolation::Asymmetric {
                    row: i,
                    col: j,
                    upper: row[j],
                    lower: rows[j][i],
                });
            }
        }
    }
    out
}

fn largest_entry(rows: &[Vec<f64>]) -> f64 {
    rows.iter().flatten().copied().fold(0.0, f64::max)
}

impl WeightMatrix {
    /// Validates `rows` and takes w_max as the largest entry.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, InvalidWeightMatrix> {
        let violations = structural_violations(&rows);
        if !violations.is_empty() {
            return Err(InvalidWeightMatrix(violations));
        }
        let max = largest_entry(&rows);
        validate_weight_matrix(&rows, max)?;
        Ok(WeightMatrix { rows, max })
    }

    /// Validates `rows` against an explicitly stated w_max.
    pub fn with_max(rows: Vec<Vec<f64>>, w_max: f64) -> Result<Self, InvalidWeightMatrix> {
        validate_weight_matrix(&rows, w_max)?;
        Ok(WeightMatrix { rows, max: w_max })
    }

    /// Number of codes covered (6 for codes 0..=5).
    pub fn size(&self) -> usize {
        self.rows.len()
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn supports(&self, r: Rating) -> bool {
        r.index() < self.rows.len()
    }

    /// Penalty for a pair of codes, or `None` if either is outside the matrix.
    pub fn get(&self, a: Rating, b: Rating) -> Option<f64> {
        self.rows.get(a.index())?.get(b.index()).copied()
    }
}

/// Quadratic distance between two Likert levels.
pub fn likert_penalty(a: Rating, b: Rating) -> Result<f64, PenaltyError> {
    for r in [a, b] {
        if r.is_no_information() {
            return Err(PenaltyError::NotLikert(r.code()));
        }
    }
    let d = a.code() as f64 - b.code() as f64;
    Ok(d * d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(c: u8) -> Rating {
        Rating::new(c).unwrap()
    }

    #[test]
    fn default_matrix_entries() {
        let w = default_weight_matrix();
        assert_eq!(w.get(r(1), r(5)), Some(16.0));
        assert_eq!(w.get(r(3), r(3)), Some(0.0));
        assert_eq!(w.get(r(0), r(3)), Some(4.0));
        assert_eq!(w.rows()[0], vec![0.0, 16.0, 9.0, 4.0, 9.0, 16.0]);
        assert_eq!(w.max(), 16.0);
        assert_eq!(w.size(), 6);
    }

    #[test]
    fn default_matrix_invariants() {
        let w = default_weight_matrix();
        for i in 0..6u8 {
            for j in 0..6u8 {
                assert_eq!(w.get(r(i), r(j)), w.get(r(j), r(i)));
                if i >= 1 && j >= 1 {
                    assert_eq!(w.get(r(i), r(j)), Some(likert_penalty(r(i), r(j)).unwrap()));
                }
            }
            assert_eq!(w.get(r(i), r(i)), Some(0.0));
        }
        assert!(validate_weight_matrix(w.rows(), w.max()).is_ok());
    }

    #[test]
    fn likert_penalty_values() {
        assert_eq!(likert_penalty(r(1), r(5)), Ok(16.0));
        assert_eq!(likert_penalty(r(2), r(2)), Ok(0.0));
        assert_eq!(likert_penalty(r(2), r(4)), Ok(4.0));
        assert_eq!(likert_penalty(r(0), r(4)), Err(PenaltyError::NotLikert(0)));
    }

    #[test]
    fn asymmetry_is_reported_with_indices() {
        let mut rows = default_weight_matrix().rows().to_vec();
        rows[2][1] = 2.0;
        let err = validate_weight_matrix(&rows, 16.0).unwrap_err();
        assert_eq!(
            err.0,
            vec![WeightViolation::Asymmetric {
                row: 1,
                col: 2,
                upper: 1.0,
                lower: 2.0
            }]
        );
    }

    #[test]
    fn nonzero_diagonal_is_reported() {
        let mut rows = default_weight_matrix().rows().to_vec();
        rows[0][0] = 1.0;
        let err = validate_weight_matrix(&rows, 16.0).unwrap_err();
        assert_eq!(
            err.0,
            vec![WeightViolation::NonzeroDiagonal {
                index: 0,
                value: 1.0
            }]
        );
    }

    #[test]
    fn negative_and_wrong_max() {
        let rows = vec![vec![0.0, -1.0], vec![-1.0, 0.0]];
        let err = validate_weight_matrix(&rows, 1.0).unwrap_err();
        assert_eq!(err.0.len(), 2);
        let rows = vec![vec![0.0, 2.0], vec![2.0, 0.0]];
        assert_eq!(
            validate_weight_matrix(&rows, 3.0).unwrap_err().0,
            vec![WeightViolation::WrongMax {
                stated: 3.0,
                actual: 2.0
            }]
        );
        let zeros = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        assert_eq!(
            WeightMatrix::new(zeros).unwrap_err().0,
            vec![WeightViolation::ZeroMax]
        );
    }

    #[test]
    fn ragged_matrix_is_rejected() {
        let rows = vec![vec![0.0, 1.0], vec![1.0]];
        assert!(matches!(
            WeightMatrix::new(rows).unwrap_err().0[0],
            WeightViolation::NotSquare { row: 1, .. }
        ));
    }

    #[test]
    fn custom_seven_point_matrix() {
        let rows: Vec<Vec<f64>> = (0..8)
            .map(|i: i32| (0..8).map(|j: i32| ((i - j) * (i - j)) as f64).collect())
            .collect();
        let w = WeightMatrix::new(rows).unwrap();
        assert_eq!(w.max(), 49.0);
        assert!(w.supports(Rating::on_scale(7, 7).unwrap()));
    }

    #[test]
    fn serde_roundtrip_validates() {
        let json = serde_json::to_string(&default_weight_matrix()).unwrap();
        let back: WeightMatrix = serde_json::from_str(&json).unwrap();
        assert_eq!(back, default_weight_matrix());
        let bad = r#"{"rows": [[0, 1], [2, 0]]}"#;
        assert!(serde_json::from_str::<WeightMatrix>(bad).is_err());
    }
}
