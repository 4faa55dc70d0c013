//! Domain types shared across the crate: rating codes, reviews, the rated
//! variables and the runs × reviews × variables annotation matrix.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Number of Likert points on the default scale.
pub const DEFAULT_SCALE_POINTS: u8 = 5;

/// Largest scale a custom configuration may use.
pub const MAX_SCALE_POINTS: u8 = 10;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("rating code {code} is outside 0..={max}")]
    RatingOutOfRange { code: i64, max: u8 },
    #[error("scale of {0} points is not supported (1..={MAX_SCALE_POINTS})")]
    UnsupportedScale(u8),
    #[error("review id must not be empty")]
    EmptyReviewId,
    #[error("review {0:?} has empty text")]
    EmptyReviewText(String),
    #[error("duplicate review id {0:?}")]
    DuplicateReview(String),
    #[error("variable set must not be empty")]
    NoVariables,
    #[error("duplicate variable name {0:?}")]
    DuplicateVariable(String),
    #[error("variable name must not be empty")]
    EmptyVariableName,
    #[error("annotation for review {review_id:?} has {got} ratings, expected {expected}")]
    VectorShape {
        review_id: String,
        got: usize,
        expected: usize,
    },
    #[error("annotation for review {review_id:?} does not match the variable set: {detail}")]
    VectorKeys { review_id: String, detail: String },
    #[error("run {run_id} does not cover the review set: {detail}")]
    RunCoverage { run_id: u32, detail: String },
    #[error("duplicate run id {0}")]
    DuplicateRun(u32),
}

/// A single annotation code.
///
/// Code 0 means the review gives no information about the variable; codes
/// 1..=k are the ordinal attitude levels of a k-point scale. A rating that
/// could not be obtained at all is modelled as `Option<Rating>::None`, never
/// as code 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rating(u8);

impl Rating {
    pub const NO_INFORMATION: Rating = Rating(0);

    /// A code on the default 5-point scale (0..=5).
    pub fn new(code: u8) -> Result<Self, ModelError> {
        Self::on_scale(code as i64, DEFAULT_SCALE_POINTS)
    }

    /// A code on a `points`-point scale (0..=points).
    pub fn on_scale(code: i64, points: u8) -> Result<Self, ModelError> {
        if points == 0 || points > MAX_SCALE_POINTS {
            return Err(ModelError::UnsupportedScale(points));
        }
        if !(0..=points as i64).contains(&code) {
            return Err(ModelError::RatingOutOfRange { code, max: points });
        }
        Ok(Rating(code as u8))
    }

    pub fn code(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_no_information(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for Rating {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for Rating {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.0)
    }
}

impl<'de> Deserialize<'de> for Rating {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let code = i64::deserialize(d)?;
        Rating::on_scale(code, MAX_SCALE_POINTS).map_err(serde::de::Error::custom)
    }
}

/// Builds a vector of default-scale ratings. Panics on an invalid code; meant
/// for literals in examples and tests.
pub fn ratings(codes: &[u8]) -> Vec<Rating> {
    codes
        .iter()
        .map(|&c| Rating::new(c).expect("rating literal out of range"))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Review {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

impl Review {
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        source: Option<String>,
    ) -> Result<Self, ModelError> {
        let review = Review {
            id: id.into(),
            text: text.into(),
            source,
        };
        review.validate()?;
        Ok(review)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.id.trim().is_empty() {
            return Err(ModelError::EmptyReviewId);
        }
        if self.text.trim().is_empty() {
            return Err(ModelError::EmptyReviewText(self.id.clone()));
        }
        Ok(())
    }
}

/// An ordered collection of reviews with unique ids.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ReviewSet {
    reviews: Vec<Review>,
}

impl ReviewSet {
    pub fn new(reviews: Vec<Review>) -> Result<Self, ModelError> {
        let mut seen = HashSet::new();
        for review in &reviews {
            review.validate()?;
            if !seen.insert(review.id.as_str()) {
                return Err(ModelError::DuplicateReview(review.id.clone()));
            }
        }
        Ok(ReviewSet { reviews })
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Review> {
        self.reviews.iter()
    }

    pub fn len(&self) -> usize {
        self.reviews.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reviews.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.reviews.iter().map(|r| r.id.clone()).collect()
    }

    pub fn get(&self, index: usize) -> Option<&Review> {
        self.reviews.get(index)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub definition: Option<String>,
    /// Alternative spellings accepted by the response parser.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aliases: Vec<String>,
}

impl Variable {
    pub fn named(name: impl Into<String>) -> Self {
        Variable {
            name: name.into(),
            definition: None,
            aliases: Vec::new(),
        }
    }
}

/// The rated variables, in prompt and output-column order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Variable>", into = "Vec<Variable>")]
pub struct VariableSet {
    variables: Vec<Variable>,
}

impl VariableSet {
    pub fn new(variables: Vec<Variable>) -> Result<Self, ModelError> {
        if variables.is_empty() {
            return Err(ModelError::NoVariables);
        }
        let mut seen = HashSet::new();
        for v in &variables {
            let key = normalize_name(&v.name);
            if key.is_empty() {
                return Err(ModelError::EmptyVariableName);
            }
            if !seen.insert(key) {
                return Err(ModelError::DuplicateVariable(v.name.clone()));
            }
        }
        Ok(VariableSet { variables })
    }

    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self, ModelError> {
        Self::new(names.iter().map(|n| Variable::named(n.as_ref())).collect())
    }

    /// Performance expectancy, Effort expectancy, Social influence and
    /// Facilitating conditions.
    pub fn utaut() -> Self {
        Self::from_names(&[
            "Performance expectancy",
            "Effort expectancy",
            "Social influence",
            "Facilitating conditions",
        ])
        .expect("static variable set is valid")
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Variable> {
        self.variables.iter()
    }

    pub fn names(&self) -> Vec<&str> {
        self.variables.iter().map(|v| v.name.as_str()).collect()
    }

    pub fn get(&self, index: usize) -> Option<&Variable> {
        self.variables.get(index)
    }

    /// Position of `name`, compared case- and punctuation-insensitively.
    pub fn position(&self, name: &str) -> Option<usize> {
        let key = normalize_name(name);
        self.variables
            .iter()
            .position(|v| normalize_name(&v.name) == key)
    }
}

impl TryFrom<Vec<Variable>> for VariableSet {
    type Error = ModelError;
    fn try_from(v: Vec<Variable>) -> Result<Self, Self::Error> {
        VariableSet::new(v)
    }
}

impl From<VariableSet> for Vec<Variable> {
    fn from(v: VariableSet) -> Self {
        v.variables
    }
}

/// Lowercases, drops punctuation and collapses whitespace.
pub(crate) fn normalize_name(name: &str) -> String {
    let cleaned: String = name
        .chars()
        .map(|c| {
            if c.is_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                ' '
            }
        })
        .collect();
    cleaned.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Ratings of one review, aligned with a [`VariableSet`]. `None` marks a
/// rating that could not be obtained.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationVector {
    pub review_id: String,
    ratings: Vec<Option<Rating>>,
}

impl AnnotationVector {
    pub fn new(
        review_id: impl Into<String>,
        variables: &VariableSet,
        ratings: Vec<Option<Rating>>,
    ) -> Result<Self, ModelError> {
        let review_id = review_id.into();
        if ratings.len() != variables.len() {
            return Err(ModelError::VectorShape {
                review_id,
                got: ratings.len(),
                expected: variables.len(),
            });
        }
        Ok(AnnotationVector { review_id, ratings })
    }

    /// Builds a vector from a name → rating map whose keys must be exactly
    /// the variable names.
    pub fn from_map(
        review_id: impl Into<String>,
        variables: &VariableSet,
        map: &BTreeMap<String, Option<Rating>>,
    ) -> Result<Self, ModelError> {
        let review_id = review_id.into();
        let mut ratings = vec![None; variables.len()];
        let mut filled = vec![false; variables.len()];
        for (name, rating) in map {
            let Some(idx) = variables.position(name) else {
                return Err(ModelError::VectorKeys {
                    review_id,
                    detail: format!("unknown variable {name:?}"),
                });
            };
            if filled[idx] {
                return Err(ModelError::VectorKeys {
                    review_id,
                    detail: format!("variable {name:?} given twice"),
                });
            }
            filled[idx] = true;
            ratings[idx] = *rating;
        }
        if let Some(idx) = filled.iter().position(|f| !f) {
            return Err(ModelError::VectorKeys {
                review_id,
                detail: format!("variable {:?} absent", variables.variables[idx].name),
            });
        }
        Ok(AnnotationVector { review_id, ratings })
    }

    /// A vector in which every rating is missing.
    pub fn missing(review_id: impl Into<String>, variables: &VariableSet) -> Self {
        AnnotationVector {
            review_id: review_id.into(),
            ratings: vec![None; variables.len()],
        }
    }

    pub fn ratings(&self) -> &[Option<Rating>] {
        &self.ratings
    }

    pub fn get(&self, index: usize) -> Option<Rating> {
        self.ratings.get(index).copied().flatten()
    }

    pub fn by_name(&self, variables: &VariableSet, name: &str) -> Option<Rating> {
        variables.position(name).and_then(|i| self.get(i))
    }

    pub fn is_complete(&self) -> bool {
        self.ratings.iter().all(Option::is_some)
    }

    pub fn to_map(&self, variables: &VariableSet) -> BTreeMap<String, Option<Rating>> {
        variables
            .iter()
            .zip(&self.ratings)
            .map(|(v, r)| (v.name.clone(), *r))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub model: String,
    pub temperature: f64,
    /// RFC 3339 start time of the run.
    pub timestamp: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Run {
    pub id: u32,
    pub metadata: RunMetadata,
    /// One vector per review, in the matrix's review order.
    pub vectors: Vec<AnnotationVector>,
}

/// Runs × reviews × variables table of ratings.
#[derive(Clone, Debug, PartialEq)]
pub struct AnnotationMatrix {
    variables: VariableSet,
    review_ids: Vec<String>,
    runs: Vec<Run>,
}

impl AnnotationMatrix {
    pub fn new(variables: VariableSet, review_ids: Vec<String>) -> Self {
        AnnotationMatrix {
            variables,
            review_ids,
            runs: Vec::new(),
        }
    }

    /// Adds a run; it must cover exactly the matrix's reviews, in order.
    pub fn push_run(&mut self, run: Run) -> Result<(), ModelError> {
        if self.runs.iter().any(|r| r.id == run.id) {
            return Err(ModelError::DuplicateRun(run.id));
        }
        if run.vectors.len() != self.review_ids.len() {
            return Err(ModelError::RunCoverage {
                run_id: run.id,
                detail: format!(
                    "{} vectors for {} reviews",
                    run.vectors.len(),
                    self.review_ids.len()
                ),
            });
        }
        for (vector, id) in run.vectors.iter().zip(&self.review_ids) {
            if &vector.review_id != id {
                return Err(ModelError::RunCoverage {
                    run_id: run.id,
                    detail: format!("expected review {id:?}, found {:?}", vector.review_id),
                });
            }
            if vector.ratings.len() != self.variables.len() {
                return Err(ModelError::VectorShape {
                    review_id: id.clone(),
                    got: vector.ratings.len(),
                    expected: self.variables.len(),
                });
            }
        }
        self.runs.push(run);
        self.runs.sort_by_key(|r| r.id);
        Ok(())
    }

    /// Builds a matrix from plain code grids, `grid[run][review][variable]`.
    /// Handy for tests and examples.
    pub fn from_codes(
        variables: VariableSet,
        review_ids: Vec<String>,
        grid: &[Vec<Vec<Option<u8>>>],
    ) -> Result<Self, ModelError> {
        let mut matrix = AnnotationMatrix::new(variables, review_ids);
        for (run_idx, run) in grid.iter().enumerate() {
            let mut vectors = Vec::with_capacity(run.len());
            for (review_idx, codes) in run.iter().enumerate() {
                let ratings = codes
                    .iter()
                    .map(|c| c.map(Rating::new).transpose())
                    .collect::<Result<Vec<_>, _>>()?;
                let id = matrix
                    .review_ids
                    .get(review_idx)
                    .cloned()
                    .unwrap_or_default();
                vectors.push(AnnotationVector::new(id, &matrix.variables, ratings)?);
            }
            matrix.push_run(Run {
                id: run_idx as u32 + 1,
                metadata: RunMetadata {
                    model: "fixture".into(),
                    temperature: 1.0,
                    timestamp: String::new(),
                },
                vectors,
            })?;
        }
        Ok(matrix)
    }

    pub fn variables(&self) -> &VariableSet {
        &self.variables
    }

    pub fn review_ids(&self) -> &[String] {
        &self.review_ids
    }

    pub fn runs(&self) -> &[Run] {
        &self.runs
    }

    pub fn n_runs(&self) -> usize {
        self.runs.len()
    }

    /// Ratings of one (review, variable) cell across all runs.
    pub fn cell(&self, review: usize, variable: usize) -> Vec<Option<Rating>> {
        self.runs
            .iter()
            .map(|run| run.vectors[review].get(variable))
            .collect()
    }

    /// For one variable, each run's ratings over the reviews.
    pub fn variable_runs(&self, variable: usize) -> Vec<Vec<Option<Rating>>> {
        self.runs
            .iter()
            .map(|run| run.vectors.iter().map(|v| v.get(variable)).collect())
            .collect()
    }

    pub fn missing_cells(&self) -> usize {
        self.runs
            .iter()
            .flat_map(|r| &r.vectors)
            .flat_map(|v| &v.ratings)
            .filter(|r| r.is_none())
            .count()
    }
}
