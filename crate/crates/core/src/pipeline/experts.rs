use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::records::{load_matrix, RECORDS_HEADER};
use super::report::{fixed, render_table};
use super::{read_text, to_json, write_text, PipelineError};
use crate::metrics::{consistency_table, expert_agreement_report, AgreementReport, AnnotatorRatings};
use crate::model::{AnnotationMatrix, Rating, VariableSet, MAX_SCALE_POINTS};
use crate::weights::WeightMatrix;

pub const ANNOTATIONS_HEADER: &str = "# tam-annotate annotations v1";
pub const AGREEMENT_JSON: &str = "agreement.json";
pub const AGREEMENT_TXT: &str = "agreement.txt";
const MISSING: &str = "NA";

/// Ratings by several annotators over the same reviews and variables.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpertDataset {
    pub review_ids: Vec<String>,
    pub variables: VariableSet,
    /// Each annotator's `by_variable[variable][review]`.
    pub annotators: Vec<AnnotatorRatings>,
}

#[derive(Serialize, Deserialize)]
struct Row {
    annotator: String,
    review_id: String,
    variable: String,
    rating: String,
}

fn first_seen<'a>(items: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut seen = HashSet::new();
    items.filter(|s| seen.insert(*s)).map(str::to_string).collect()
}

/// Reads an annotations file: a version line, then
/// `annotator,review_id,variable,rating` rows with `NA` for a missing rating.
/// Annotator, review and (unless `variables` is given) variable order follow
/// first appearance. Every annotator must rate every (review, variable).
pub fn load_annotations(path: &Path, variables: Option<&VariableSet>) -> Result<ExpertDataset, PipelineError> {
    let text = read_text(path)?;
    let (first, body) = text.split_once('\n').unwrap_or((&text, ""));
    if first.trim_end() != ANNOTATIONS_HEADER {
        return Err(PipelineError::format(
            path,
            format!("expected version line {ANNOTATIONS_HEADER:?}, found {first:?}"),
        ));
    }
    let rows: Vec<Row> = csv::Reader::from_reader(body.as_bytes())
        .deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| PipelineError::format(path, format!("record {}: {e}", i + 1))))
        .collect::<Result<_, _>>()?;
    if rows.is_empty() {
        return Err(PipelineError::format(path, "no annotations"));
    }
    let variables = match variables {
        Some(v) => v.clone(),
        None => VariableSet::from_names(&first_seen(rows.iter().map(|r| r.variable.as_str())))
            .map_err(|e| PipelineError::format(path, e))?,
    };
    let labels = first_seen(rows.iter().map(|r| r.annotator.as_str()));
    let review_ids = first_seen(rows.iter().map(|r| r.review_id.as_str()));
    let label_pos: HashMap<&str, usize> = labels.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let review_pos: HashMap<&str, usize> = review_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();

    let mut grid = vec![vec![vec![None::<Option<Rating>>; review_ids.len()]; variables.len()]; labels.len()];
    for (i, row) in rows.iter().enumerate() {
        let at = |m: String| PipelineError::format(path, format!("record {}: {m}", i + 1));
        let v = variables
            .position(&row.variable)
            .ok_or_else(|| at(format!("unknown variable {:?}", row.variable)))?;
        let rating = if row.rating.trim() == MISSING {
            None
        } else {
            let code: i64 = row
                .rating
                .trim()
                .parse()
                .map_err(|_| at(format!("bad rating {:?}", row.rating)))?;
            Some(Rating::on_scale(code, MAX_SCALE_POINTS).map_err(|e| at(e.to_string()))?)
        };
        let slot = &mut grid[label_pos[row.annotator.as_str()]][v][review_pos[row.review_id.as_str()]];
        if slot.is_some() {
            return Err(at(format!(
                "duplicate rating by {:?} for review {:?}, variable {:?}",
                row.annotator, row.review_id, row.variable
            )));
        }
        *slot = Some(rating);
    }

    let mut annotators = Vec::with_capacity(labels.len());
    for (a, label) in labels.iter().enumerate() {
        let mut by_variable = Vec::with_capacity(variables.len());
        for (v, var) in variables.iter().enumerate() {
            let mut seq = Vec::with_capacity(review_ids.len());
            for (r, id) in review_ids.iter().enumerate() {
                seq.push(grid[a][v][r].ok_or_else(|| {
                    PipelineError::format(
                        path,
                        format!("{label:?} has no rating for review {id:?}, variable {:?}", var.name),
                    )
                })?);
            }
            by_variable.push(seq);
        }
        annotators.push(AnnotatorRatings {
            label: label.clone(),
            by_variable,
        });
    }
    Ok(ExpertDataset {
        review_ids,
        variables,
        annotators,
    })
}

/// Writes rows ordered by annotator, review, variable.
pub fn write_annotations(path: &Path, data: &ExpertDataset) -> Result<(), PipelineError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(["annotator", "review_id", "variable", "rating"])
        .map_err(|e| PipelineError::format(path, e))?;
    for a in &data.annotators {
        for (r, id) in data.review_ids.iter().enumerate() {
            for (v, var) in data.variables.iter().enumerate() {
                let rating = a.by_variable[v][r].map_or_else(|| MISSING.to_string(), |x| x.code().to_string());
                w.write_record([a.label.as_str(), id.as_str(), var.name.as_str(), rating.as_str()])
                    .map_err(|e| PipelineError::format(path, e))?;
            }
        }
    }
    let body = String::from_utf8(w.into_inner().map_err(|e| PipelineError::format(path, e))?)
        .expect("csv output of utf-8 input");
    write_text(path, &format!("{ANNOTATIONS_HEADER}\n{body}"))
}

/// The mode of every (review, variable) cell across runs, as a single
/// annotator called `label`. Cells never rated stay missing.
pub fn mode_export(matrix: &AnnotationMatrix, w: &WeightMatrix, label: &str) -> Result<ExpertDataset, PipelineError> {
    let stats = consistency_table(matrix, w)?;
    Ok(ExpertDataset {
        review_ids: matrix.review_ids().to_vec(),
        variables: matrix.variables().clone(),
        annotators: vec![AnnotatorRatings {
            label: label.to_string(),
            by_variable: stats.modes_by_variable(),
        }],
    })
}

/// LLM annotations from either an annotations file or a persisted experiment
/// (directory or run-records file), whose modes are taken.
pub fn load_llm_annotations(
    path: &Path,
    variables: Option<&VariableSet>,
    w: &WeightMatrix,
    label: &str,
) -> Result<ExpertDataset, PipelineError> {
    let is_records = path.is_dir()
        || read_text(path)?
            .lines()
            .next()
            .is_some_and(|l| l.trim_end() == RECORDS_HEADER);
    if is_records {
        mode_export(&load_matrix(path)?, w, label)
    } else {
        load_annotations(path, variables)
    }
}

fn reorder(
    llm: &ExpertDataset,
    review_ids: &[String],
    variables: &VariableSet,
) -> Result<AnnotatorRatings, PipelineError> {
    if llm.annotators.len() != 1 {
        return Err(PipelineError::Config(format!(
            "LLM annotations must come from exactly one annotator, found {}",
            llm.annotators.len()
        )));
    }
    let expert_set: HashSet<&str> = review_ids.iter().map(String::as_str).collect();
    let llm_set: HashSet<&str> = llm.review_ids.iter().map(String::as_str).collect();
    if expert_set != llm_set {
        let mut only_experts: Vec<&str> = expert_set.difference(&llm_set).copied().collect();
        let mut only_llm: Vec<&str> = llm_set.difference(&expert_set).copied().collect();
        only_experts.sort_unstable();
        only_llm.sort_unstable();
        return Err(PipelineError::Config(format!(
            "review sets differ: only experts rated {only_experts:?}, only the LLM rated {only_llm:?}"
        )));
    }
    let src = &llm.annotators[0];
    let llm_review: HashMap<&str, usize> = llm.review_ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut by_variable = Vec::with_capacity(variables.len());
    for var in variables.iter() {
        let v = llm
            .variables
            .position(&var.name)
            .ok_or_else(|| PipelineError::Config(format!("LLM annotations lack variable {:?}", var.name)))?;
        by_variable.push(review_ids.iter().map(|id| src.by_variable[v][llm_review[id.as_str()]]).collect());
    }
    Ok(AnnotatorRatings {
        label: src.label.clone(),
        by_variable,
    })
}

/// Pairwise WPA among experts and between each expert and the LLM, with
/// both group means, per variable in the experts' variable order.
pub fn compare_experts(
    experts: &ExpertDataset,
    llm: &ExpertDataset,
    w: &WeightMatrix,
) -> Result<AgreementReport, PipelineError> {
    let llm = reorder(llm, &experts.review_ids, &experts.variables)?;
    Ok(expert_agreement_report(&experts.variables, &experts.annotators, &llm, w)?)
}

/// Variables as columns; one row per annotator pair (4 decimals), then the
/// two group means (2 decimals) and the label.
pub fn render_agreement_text(report: &AgreementReport) -> String {
    let mut header = vec!["Pair".to_string()];
    header.extend(report.variables.iter().map(|v| v.variable.clone()));
    let mut rows = Vec::new();
    if let Some(first) = report.variables.first() {
        for (i, p) in first.pairs.iter().enumerate() {
            let mut row = vec![format!("{} vs {}", p.label_a, p.label_b)];
            row.extend(report.variables.iter().map(|v| fixed(v.pairs.get(i).and_then(|p| p.value), 4)));
            rows.push(row);
        }
    }
    let mut means = vec!["Mean between experts".to_string()];
    means.extend(report.variables.iter().map(|v| fixed(v.between_experts, 2)));
    rows.push(means);
    let mut means = vec!["Mean experts with LLM".to_string()];
    means.extend(report.variables.iter().map(|v| fixed(v.experts_with_llm, 2)));
    rows.push(means);
    let mut labels = vec!["Agreement with LLM".to_string()];
    labels.extend(report.variables.iter().map(|v| v.label.map_or("-".into(), |l| l.to_string())));
    rows.push(labels);
    format!(
        "Agreement between experts and {}\n{}",
        report.llm_label,
        render_table(&header, &rows, 1)
    )
}

/// Writes `agreement.json` and `agreement.txt` into `dir`.
pub fn write_agreement_report(dir: &Path, report: &AgreementReport) -> Result<(), PipelineError> {
    write_text(&dir.join(AGREEMENT_JSON), &to_json(report))?;
    write_text(&dir.join(AGREEMENT_TXT), &render_agreement_text(report))
}
