//! Qualitative agreement labels and comparison of several annotators (human
//! experts and an LLM) over the same reviews.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::wpa::{wpa_observed, WpaResult};
use super::MetricsError;
use crate::model::{Rating, VariableSet};
use crate::weights::WeightMatrix;

pub const BETWEEN_EXPERTS: &str = "between-experts";
pub const EXPERTS_WITH_LLM: &str = "experts-with-llm";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgreementLabel {
    Weak,
    Moderate,
    Strong,
}

impl fmt::Display for AgreementLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AgreementLabel::Weak => "weak",
            AgreementLabel::Moderate => "moderate",
            AgreementLabel::Strong => "strong",
        })
    }
}

/// Strong above 0.8, moderate above 0.6, weak otherwise.
pub fn agreement_label(value: f64) -> Result<AgreementLabel, MetricsError> {
    if !(0.0..=1.0).contains(&value) {
        return Err(MetricsError::OutOfRange(value));
    }
    Ok(if value > 0.8 {
        AgreementLabel::Strong
    } else if value > 0.6 {
        AgreementLabel::Moderate
    } else {
        AgreementLabel::Weak
    })
}

/// One annotator's ratings, `by_variable[variable][review]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AnnotatorRatings {
    pub label: String,
    pub by_variable: Vec<Vec<Option<Rating>>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairKind {
    BetweenExperts,
    ExpertWithLlm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairAgreement {
    pub label_a: String,
    pub label_b: String,
    pub kind: PairKind,
    /// `None` when the two annotators share no observed item.
    pub value: Option<f64>,
    /// Items compared; `None` when the value was supplied rather than computed.
    pub n_items: Option<usize>,
}

impl PairAgreement {
    fn computed(a: &str, b: &str, kind: PairKind, r: Option<WpaResult>) -> Self {
        PairAgreement {
            label_a: a.to_string(),
            label_b: b.to_string(),
            kind,
            value: r.map(|r| r.value),
            n_items: r.map(|r| r.n_items),
        }
    }

    /// A pair whose agreement value is already known.
    pub fn given(a: &str, b: &str, kind: PairKind, value: f64) -> Self {
        PairAgreement {
            label_a: a.to_string(),
            label_b: b.to_string(),
            kind,
            value: Some(value),
            n_items: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariableAgreement {
    pub variable: String,
    pub pairs: Vec<PairAgreement>,
    pub between_experts: Option<f64>,
    pub experts_with_llm: Option<f64>,
    /// Label of the experts-with-LLM mean.
    pub label: Option<AgreementLabel>,
}

impl VariableAgreement {
    /// Aggregates pair values into the two unweighted group means.
    pub fn from_pairs(variable: impl Into<String>, pairs: Vec<PairAgreement>) -> Result<Self, MetricsError> {
        let mean_of = |kind| {
            let vals: Vec<f64> = pairs
                .iter()
                .filter(|p| p.kind == kind)
                .filter_map(|p| p.value)
                .collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        };
        let between_experts = mean_of(PairKind::BetweenExperts);
        let experts_with_llm = mean_of(PairKind::ExpertWithLlm);
        let label = experts_with_llm.map(agreement_label).transpose()?;
        Ok(VariableAgreement {
            variable: variable.into(),
            pairs,
            between_experts,
            experts_with_llm,
            label,
        })
    }

    pub fn group_means(&self) -> BTreeMap<&'static str, f64> {
        let mut m = BTreeMap::new();
        if let Some(v) = self.between_experts {
            m.insert(BETWEEN_EXPERTS, v);
        }
        if let Some(v) = self.experts_with_llm {
            m.insert(EXPERTS_WITH_LLM, v);
        }
        m
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub llm_label: String,
    pub variables: Vec<VariableAgreement>,
}

impl AgreementReport {
    pub fn variable(&self, name: &str) -> Option<&VariableAgreement> {
        self.variables.iter().find(|v| v.variable == name)
    }
}

fn check_shape(
    variables: &VariableSet,
    annotator: &AnnotatorRatings,
    n_reviews: usize,
) -> Result<(), MetricsError> {
    if annotator.by_variable.len() != variables.len() {
        return Err(MetricsError::Shape(format!(
            "annotator {:?} rates {} variables, expected {}",
            annotator.label,
            annotator.by_variable.len(),
            variables.len()
        )));
    }
    for seq in &annotator.by_variable {
        if seq.len() != n_reviews {
            return Err(MetricsError::LengthMismatch {
                left: seq.len(),
                right: n_reviews,
            });
        }
    }
    Ok(())
}

/// WPA for every expert pair and every expert against the LLM, per variable.
///
/// Pairs are listed in annotator order with the LLM last, so three experts
/// give E1–E2, E1–E3, E1–LLM, E2–E3, E2–LLM, E3–LLM.
pub fn expert_agreement_report(
    variables: &VariableSet,
    experts: &[AnnotatorRatings],
    llm: &AnnotatorRatings,
    w: &WeightMatrix,
) -> Result<AgreementReport, MetricsError> {
    if experts.len() < 2 {
        return Err(MetricsError::TooFewAnnotators(experts.len()));
    }
    let n_reviews = llm.by_variable.first().map_or(0, Vec::len);
    check_shape(variables, llm, n_reviews)?;
    for e in experts {
        check_shape(variables, e, n_reviews)?;
    }
    let everyone: Vec<&AnnotatorRatings> = experts.iter().chain(std::iter::once(llm)).collect();
    let llm_index = everyone.len() - 1;

    let mut out = Vec::with_capacity(variables.len());
    for (v, var) in variables.iter().enumerate() {
        let mut pairs = Vec::new();
        for i in 0..everyone.len() {
            for j in (i + 1)..everyone.len() {
                let kind = if j == llm_index {
                    PairKind::ExpertWithLlm
                } else {
                    PairKind::BetweenExperts
                };
                let r = wpa_observed(&everyone[i].by_variable[v], &everyone[j].by_variable[v], w)?;
                pairs.push(PairAgreement::computed(&everyone[i].label, &everyone[j].label, kind, r));
            }
        }
        out.push(VariableAgreement::from_pairs(var.name.clone(), pairs)?);
    }
    Ok(AgreementReport {
        llm_label: llm.label.clone(),
        variables: out,
    })
}

/// Per-variable WPA between two annotators, e.g. the mode annotations of two
/// different models.
pub fn annotator_agreement(
    variables: &VariableSet,
    a: &AnnotatorRatings,
    b: &AnnotatorRatings,
    w: &WeightMatrix,
) -> Result<Vec<(String, Option<WpaResult>)>, MetricsError> {
    let n_reviews = a.by_variable.first().map_or(0, Vec::len);
    check_shape(variables, a, n_reviews)?;
    check_shape(variables, b, n_reviews)?;
    variables
        .iter()
        .enumerate()
        .map(|(v, var)| Ok((var.name.clone(), wpa_observed(&a.by_variable[v], &b.by_variable[v], w)?)))
        .collect()
}
