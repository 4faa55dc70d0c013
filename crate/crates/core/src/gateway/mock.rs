//! Seeded stand-in for a stochastic LLM annotator.
//!
//! Every (review, variable) cell has a categorical distribution over codes.
//! Temperature reshapes it as `p_i(T) ∝ p_i^(1/T)`; at `T = 0` all mass goes
//! to the most likely code. Each draw reads a ChaCha stream keyed by
//! `(seed, review, variable, draw_index)`, so outputs are reproducible across
//! processes and platforms, and the same uniform draw is used at every
//! temperature.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use async_trait::async_trait;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CompletionBackend, CompletionRequest, CompletionResult, GatewayError};
use crate::model::{AnnotationVector, Rating, Review, MAX_SCALE_POINTS};
use crate::parse::format_response;
use crate::prompt::PromptSpec;

/// Probabilities of codes `0..len`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct CellDistribution(Vec<f64>);

impl CellDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self, String> {
        if probs.is_empty() || probs.len() > MAX_SCALE_POINTS as usize + 1 {
            return Err(format!("distribution must cover 1..={} codes", MAX_SCALE_POINTS + 1));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err("probabilities must be finite and non-negative".into());
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(format!("probabilities sum to {total}, not 1"));
        }
        Ok(CellDistribution(probs))
    }

    /// Normalizes non-negative weights into a distribution.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self, String> {
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err("weights must have a positive finite sum".into());
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    /// All mass on one code.
    pub fn point(code: u8, len: usize) -> Self {
        let mut p = vec![0.0; len.max(code as usize + 1)];
        p[code as usize] = 1.0;
        CellDistribution(p)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    /// Most likely code; the lowest one on ties.
    pub fn argmax(&self) -> u8 {
        argmax(&self.0) as u8
    }

    fn sample(&self, temperature: f64, u: f64) -> u8 {
        let p = sharpen(&self.0, temperature);
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (i, &pi) in p.iter().enumerate() {
            if pi > 0.0 {
                last_positive = i;
                acc += pi;
                if u < acc {
                    return i as u8;
                }
            }
        }
        last_positive as u8
    }
}

impl TryFrom<Vec<f64>> for CellDistribution {
    type Error = String;
    fn try_from(v: Vec<f64>) -> Result<Self, String> {
        CellDistribution::new(v)
    }
}

impl From<CellDistribution> for Vec<f64> {
    fn from(d: CellDistribution) -> Self {
        d.0
    }
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

/// Temperature-adjusted copy of `probs`: `p_i^(1/T)` renormalized, computed in
/// log space. `T = 0` returns a point mass on the argmax.
pub fn sharpen(probs: &[f64], temperature: f64) -> Vec<f64> {
    let top = argmax(probs);
    if temperature <= 0.0 {
        let mut out = vec![0.0; probs.len()];
        out[top] = 1.0;
        return out;
    }
    let log_top = probs[top].ln();
    let raw: Vec<f64> = probs
        .iter()
        .map(|&p| {
            if p > 0.0 {
                ((p.ln() - log_top) / temperature).exp()
            } else {
                0.0
            }
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|q| q / total).collect()
}

fn stream(seed: u64, domain: &str, review: &str, variable: &str, index: u64) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for part in [domain, review, variable] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    h.update(index.to_le_bytes());
    let digest = h.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

/// Per-cell rating distributions for the mock backend.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MockAnnotatorProfile {
    pub seed: u64,
    /// review id → variable name → distribution.
    #[serde(default)]
    pub cells: BTreeMap<String, BTreeMap<String, CellDistribution>>,
    /// When set, cells not listed in `cells` are generated from the seed
    /// with this spread.
    #[serde(default)]
    pub synthetic_spread: Option<f64>,
}

impl MockAnnotatorProfile {
    /// A profile with only explicitly inserted cells.
    pub fn new(seed: u64) -> Self {
        MockAnnotatorProfile {
            seed,
            cells: BTreeMap::new(),
            synthetic_spread: None,
        }
    }

    /// A profile that generates a distribution for any cell on demand. Each
    /// cell peaks at a seed-chosen code and decays with distance from it at a
    /// rate set by `spread`.
    pub fn synthetic(seed: u64, spread: f64) -> Self {
        MockAnnotatorProfile {
            synthetic_spread: Some(spread),
            ..Self::new(seed)
        }
    }

    pub fn insert(&mut self, review_id: &str, variable: &str, dist: CellDistribution) {
        self.cells
            .entry(review_id.to_string())
            .or_default()
            .insert(variable.to_string(), dist);
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GatewayError::Config(format!("reading {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| GatewayError::Config(format!("parsing {}: {e}", path.display())))
    }

    pub fn distribution(
        &self,
        review_id: &str,
        variable: &str,
        spec: &PromptSpec,
    ) -> Result<CellDistribution, GatewayError> {
        if let Some(d) = self.cells.get(review_id).and_then(|m| m.get(variable)) {
            return Ok(d.clone());
        }
        match self.synthetic_spread {
            Some(spread) => Ok(self.synthesize(review_id, variable, spec, spread)),
            None => Err(GatewayError::MissingCell {
                review_id: review_id.to_string(),
                variable: variable.to_string(),
            }),
        }
    }

    fn synthesize(&self, review_id: &str, variable: &str, spec: &PromptSpec, spread: f64) -> CellDistribution {
        let mut rng = stream(self.seed, "profile", review_id, variable, 0);
        let len = spec.scale_points() as usize + 1;
        let accepted: Vec<usize> = (0..len).filter(|&c| spec.accepts_code(c as i64)).collect();
        let peak = accepted[rng.random_range(0..accepted.len())];
        let mut weights = vec![0.0; len];
        for &c in &accepted {
            let distance = c.abs_diff(peak) as f64;
            weights[c] = (-distance / spread).exp() * (0.5 + rng.random::<f64>());
        }
        CellDistribution::from_weights(weights).expect("positive weights")
    }
}

/// Samples one rating per variable and renders them in the default response
/// format.
pub fn mock_complete(
    profile: &MockAnnotatorProfile,
    temperature: f64,
    review: &Review,
    spec: &PromptSpec,
    draw_index: u64,
) -> Result<String, GatewayError> {
    let mut ratings = Vec::with_capacity(spec.variables().len());
    for var in spec.variables().iter() {
        let dist = profile.distribution(&review.id, &var.name, spec)?;
        let u = stream(profile.seed, "draw", &review.id, &var.name, draw_index).random::<f64>();
        let code = dist.sample(temperature, u);
        if !spec.accepts_code(code as i64) {
            return Err(GatewayError::Config(format!(
                "mock distribution for {:?}/{:?} puts mass on code {code}, which the prompt does not allow",
                review.id, var.name
            )));
        }
        ratings.push(Some(
            Rating::on_scale(code as i64, MAX_SCALE_POINTS).expect("accepted code"),
        ));
    }
    let vector = AnnotationVector::new(&review.id, spec.variables(), ratings).expect("one per variable");
    Ok(format_response(&vector, spec))
}

/// [`CompletionBackend`] over a [`MockAnnotatorProfile`]. Requests are keyed by
/// `review_id` and `draw_index`; prompt text is ignored.
pub struct MockBackend {
    profile: MockAnnotatorProfile,
    spec: PromptSpec,
    model: String,
    temperature: f64,
}

impl MockBackend {
    pub fn new(profile: MockAnnotatorProfile, spec: PromptSpec, model: String, temperature: f64) -> Self {
        MockBackend {
            profile,
            spec,
            model,
            temperature,
        }
    }

    pub fn profile(&self) -> &MockAnnotatorProfile {
        &self.profile
    }
}

#[async_trait]
impl CompletionBackend for MockBackend {
    fn endpoint(&self) -> String {
        "mock://local".into()
    }

    fn model(&self) -> &str {
        &self.model
    }

    fn temperature(&self) -> f64 {
        self.temperature
    }

    async fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, GatewayError> {
        let review = Review {
            id: request.review_id.clone(),
            text: request.user.clone(),
            source: None,
        };
        let raw_text = mock_complete(&self.profile, self.temperature, &review, &self.spec, request.draw_index)?;
        Ok(CompletionResult {
            raw_text,
            model: self.model.clone(),
            request_id: format!("mock-{}-{}", request.review_id, request.draw_index),
            latency: Duration::ZERO,
            attempt_count: 1,
        })
    }
}
