use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{read_text, to_json, write_text, PipelineError};
use crate::gateway::ProviderKind;
use crate::model::{AnnotationMatrix, AnnotationVector, Rating, Run, RunMetadata, VariableSet, MAX_SCALE_POINTS};

pub const RECORDS_HEADER: &str = "# tam-annotate run-records v1";
pub const RECORDS_FILE: &str = "run_records.csv";
pub const RESPONSES_FILE: &str = "responses.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
const MANIFEST_FORMAT: &str = "tam-annotate experiment v1";
const MISSING: &str = "NA";

/// One rating cell of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub run_id: u32,
    pub review_id: String,
    pub variable: String,
    /// `None` when no valid rating was obtained.
    pub rating: Option<Rating>,
    /// `responses.jsonl:<line>` of the response the rating came from.
    pub raw_ref: String,
    pub started_at: String,
    pub finished_at: String,
    pub model: String,
    pub temperature: f64,
}

#[derive(Serialize, Deserialize)]
struct RecordRow {
    run_id: u32,
    review_id: String,
    variable: String,
    rating: String,
    raw_ref: String,
    started_at: String,
    finished_at: String,
    model: String,
    temperature: f64,
}

/// One completion as received, kept for audit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawResponse {
    pub run_id: u32,
    pub review_id: String,
    /// 0 for the first query, then one more per parse retry.
    pub attempt: u32,
    pub request_id: String,
    pub model: String,
    /// Transport attempts the gateway needed.
    pub transport_attempts: u32,
    pub latency_ms: u64,
    pub raw_text: String,
    /// Parse problems, empty when the response parsed cleanly.
    pub diagnostics: Vec<String>,
}

/// Summary of an experiment directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    /// False when the experiment was aborted before every cell was attempted.
    pub complete: bool,
    pub runs_requested: u32,
    pub runs_completed: u32,
    pub review_ids: Vec<String>,
    pub variables: VariableSet,
    pub provider: ProviderKind,
    pub model: String,
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub parse_retry_limit: u32,
    /// Cells left without a rating after parse retries.
    pub missing_cells: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Manifest {
    pub fn new(review_ids: Vec<String>, variables: VariableSet, model: String, temperature: f64) -> Self {
        Manifest {
            format: MANIFEST_FORMAT.into(),
            complete: true,
            runs_requested: 0,
            runs_completed: 0,
            review_ids,
            variables,
            provider: ProviderKind::HostedChat,
            model,
            temperature,
            seed: None,
            parse_retry_limit: 0,
            missing_cells: 0,
            error: None,
        }
    }

    pub fn read(path: &Path) -> Result<Self, PipelineError> {
        let m: Manifest = serde_json::from_str(&read_text(path)?).map_err(|e| PipelineError::format(path, e))?;
        if m.format != MANIFEST_FORMAT {
            return Err(PipelineError::format(path, format!("unsupported format {:?}", m.format)));
        }
        Ok(m)
    }

    pub fn write(&self, path: &Path) -> Result<(), PipelineError> {
        write_text(path, &to_json(self))
    }
}

fn rating_text(r: Option<Rating>) -> String {
    r.map_or_else(|| MISSING.to_string(), |r| r.code().to_string())
}

pub fn write_run_records(path: &Path, records: &[RunRecord]) -> Result<(), PipelineError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    for r in records {
        w.serialize(RecordRow {
            run_id: r.run_id,
            review_id: r.review_id.clone(),
            variable: r.variable.clone(),
            rating: rating_text(r.rating),
            raw_ref: r.raw_ref.clone(),
            started_at: r.started_at.clone(),
            finished_at: r.finished_at.clone(),
            model: r.model.clone(),
            temperature: r.temperature,
        })
        .map_err(|e| PipelineError::format(path, e))?;
    }
    if records.is_empty() {
        w.write_record([
            "run_id",
            "review_id",
            "variable",
            "rating",
            "raw_ref",
            "started_at",
            "finished_at",
            "model",
            "temperature",
        ])
        .map_err(|e| PipelineError::format(path, e))?;
    }
    let body = String::from_utf8(w.into_inner().map_err(|e| PipelineError::format(path, e))?)
        .expect("csv output of utf-8 input");
    write_text(path, &format!("{RECORDS_HEADER}\n{body}"))
}

pub fn read_run_records(path: &Path) -> Result<Vec<RunRecord>, PipelineError> {
    let text = read_text(path)?;
    let (first, body) = text.split_once('\n').unwrap_or((&text, ""));
    if first.trim_end() != RECORDS_HEADER {
        return Err(PipelineError::format(
            path,
            format!("expected version line {RECORDS_HEADER:?}, found {first:?}"),
        ));
    }
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<RecordRow>().enumerate() {
        let row = row.map_err(|e| PipelineError::format(path, format!("record {}: {e}", i + 1)))?;
        let rating = if row.rating == MISSING {
            None
        } else {
            let code: i64 = row
                .rating
                .parse()
                .map_err(|_| PipelineError::format(path, format!("record {}: bad rating {:?}", i + 1, row.rating)))?;
            Some(
                Rating::on_scale(code, MAX_SCALE_POINTS)
                    .map_err(|e| PipelineError::format(path, format!("record {}: {e}", i + 1)))?,
            )
        };
        out.push(RunRecord {
            run_id: row.run_id,
            review_id: row.review_id,
            variable: row.variable,
            rating,
            raw_ref: row.raw_ref,
            started_at: row.started_at,
            finished_at: row.finished_at,
            model: row.model,
            temperature: row.temperature,
        });
    }
    Ok(out)
}

/// Flattens a matrix into records ordered by run, review, variable. Both
/// timestamps are the run's timestamp and `raw_ref` is empty.
pub fn matrix_to_records(matrix: &AnnotationMatrix) -> Vec<RunRecord> {
    let mut out = Vec::new();
    for run in matrix.runs() {
        for vector in &run.vectors {
            for (var, rating) in matrix.variables().iter().zip(vector.ratings()) {
                out.push(RunRecord {
                    run_id: run.id,
                    review_id: vector.review_id.clone(),
                    variable: var.name.clone(),
                    rating: *rating,
                    raw_ref: String::new(),
                    started_at: run.metadata.timestamp.clone(),
                    finished_at: run.metadata.timestamp.clone(),
                    model: run.metadata.model.clone(),
                    temperature: run.metadata.temperature,
                });
            }
        }
    }
    out
}

fn first_seen<'a>(items: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    items.filter(|s| seen.insert(*s)).map(str::to_string).collect()
}

/// Rebuilds the matrix from records. Review and variable order come from the
/// arguments when given, otherwise from first appearance. Each run takes its
/// model and temperature from its first record and its timestamp from the
/// earliest `started_at`.
pub fn records_to_matrix(
    records: &[RunRecord],
    variables: Option<&VariableSet>,
    review_ids: Option<&[String]>,
) -> Result<AnnotationMatrix, PipelineError> {
    let src = PathBuf::from(RECORDS_FILE);
    let variables = match variables {
        Some(v) => v.clone(),
        None => VariableSet::from_names(&first_seen(records.iter().map(|r| r.variable.as_str())))
            .map_err(|e| PipelineError::format(&src, e))?,
    };
    let review_ids: Vec<String> = match review_ids {
        Some(ids) => ids.to_vec(),
        None => first_seen(records.iter().map(|r| r.review_id.as_str())),
    };
    let review_pos: HashMap<&str, usize> = review_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();

    struct Acc<'a> {
        first: &'a RunRecord,
        timestamp: &'a str,
        cells: Vec<Vec<Option<Option<Rating>>>>,
    }
    let mut runs: BTreeMap<u32, Acc> = BTreeMap::new();
    for r in records {
        let review = *review_pos
            .get(r.review_id.as_str())
            .ok_or_else(|| PipelineError::format(&src, format!("unknown review {:?}", r.review_id)))?;
        let var = variables
            .position(&r.variable)
            .ok_or_else(|| PipelineError::format(&src, format!("unknown variable {:?}", r.variable)))?;
        let acc = runs.entry(r.run_id).or_insert_with(|| Acc {
            first: r,
            timestamp: &r.started_at,
            cells: vec![vec![None; variables.len()]; review_ids.len()],
        });
        if r.started_at.as_str() < acc.timestamp {
            acc.timestamp = &r.started_at;
        }
        let slot = &mut acc.cells[review][var];
        if slot.is_some() {
            return Err(PipelineError::format(
                &src,
                format!("duplicate record for run {}, review {:?}, variable {:?}", r.run_id, r.review_id, r.variable),
            ));
        }
        *slot = Some(r.rating);
    }

    let mut matrix = AnnotationMatrix::new(variables.clone(), review_ids.clone());
    for (run_id, acc) in runs {
        let mut vectors = Vec::with_capacity(review_ids.len());
        for (review, row) in acc.cells.into_iter().enumerate() {
            let mut ratings = Vec::with_capacity(row.len());
            for (var, cell) in row.into_iter().enumerate() {
                ratings.push(cell.ok_or_else(|| {
                    PipelineError::Incomplete(format!(
                        "run {run_id} has no record for review {:?}, variable {:?}",
                        review_ids[review],
                        variables.get(var).map_or("", |v| v.name.as_str())
                    ))
                })?);
            }
            vectors.push(AnnotationVector::new(&review_ids[review], &variables, ratings)?);
        }
        matrix.push_run(Run {
            id: run_id,
            metadata: RunMetadata {
                model: acc.first.model.clone(),
                temperature: acc.first.temperature,
                timestamp: acc.timestamp.to_string(),
            },
            vectors,
        })?;
    }
    Ok(matrix)
}

/// Writes `run_records.csv` and `manifest.json` for a matrix.
pub fn save_matrix(dir: &Path, matrix: &AnnotationMatrix) -> Result<(), PipelineError> {
    let first = matrix.runs().first().map(|r| &r.metadata);
    let mut manifest = Manifest::new(
        matrix.review_ids().to_vec(),
        matrix.variables().clone(),
        first.map_or_else(String::new, |m| m.model.clone()),
        first.map_or(0.0, |m| m.temperature),
    );
    manifest.runs_requested = matrix.n_runs() as u32;
    manifest.runs_completed = matrix.n_runs() as u32;
    manifest.missing_cells = matrix.missing_cells();
    write_run_records(&dir.join(RECORDS_FILE), &matrix_to_records(matrix))?;
    manifest.write(&dir.join(MANIFEST_FILE))
}

/// Reads the manifest (if any) and records of an experiment. `path` is the
/// experiment directory or its records file.
pub fn load_experiment(path: &Path) -> Result<(Option<Manifest>, Vec<RunRecord>), PipelineError> {
    let (dir, records_path) = if path.is_dir() {
        (path.to_path_buf(), path.join(RECORDS_FILE))
    } else {
        (path.parent().unwrap_or(Path::new("")).to_path_buf(), path.to_path_buf())
    };
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest = if manifest_path.is_file() { Some(Manifest::read(&manifest_path)?) } else { None };
    Ok((manifest, read_run_records(&records_path)?))
}

/// Loads a persisted matrix. Fails with [`PipelineError::Incomplete`] when the
/// manifest says the experiment was aborted.
pub fn load_matrix(path: &Path) -> Result<AnnotationMatrix, PipelineError> {
    let (manifest, records) = load_experiment(path)?;
    if let Some(m) = &manifest {
        if !m.complete {
            return Err(PipelineError::Incomplete(format!(
                "{} was aborted after {} of {} runs{}",
                path.display(),
                m.runs_completed,
                m.runs_requested,
                m.error.as_deref().map(|e| format!(": {e}")).unwrap_or_default()
            )));
        }
    }
    records_to_matrix(
        &records,
        manifest.as_ref().map(|m| &m.variables),
        manifest.as_ref().map(|m| m.review_ids.as_slice()),
    )
}
