use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{to_json, write_text, PipelineError};
use crate::metrics::{
    agreement_label, consistency_table, pairwise_mean_wpa_observed, AgreementLabel, CellStats, ConsistencyStats,
};
use crate::model::AnnotationMatrix;
use crate::weights::WeightMatrix;

pub const CONSISTENCY_JSON: &str = "consistency.json";
pub const CONSISTENCY_TXT: &str = "consistency.txt";

/// Mean pairwise WPA across runs for one variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariableConsistency {
    pub variable: String,
    /// `None` if no pair of runs shares an observed rating.
    pub mean_pairwise_wpa: Option<f64>,
    pub label: Option<AgreementLabel>,
    pub pairs_evaluated: usize,
    pub pairs_undefined: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub runs: usize,
    pub missing_cells: usize,
    pub cells: ConsistencyStats,
    pub agreement: Vec<VariableConsistency>,
}

/// Per-cell statistics plus per-variable mean pairwise WPA with labels.
pub fn consistency_report(matrix: &AnnotationMatrix, w: &WeightMatrix) -> Result<ConsistencyReport, PipelineError> {
    let cells = consistency_table(matrix, w)?;
    let mut agreement = Vec::with_capacity(matrix.variables().len());
    for (v, var) in matrix.variables().iter().enumerate() {
        let p = pairwise_mean_wpa_observed(&matrix.variable_runs(v), w)?;
        agreement.push(VariableConsistency {
            variable: var.name.clone(),
            mean_pairwise_wpa: p.mean,
            label: p.mean.map(agreement_label).transpose()?,
            pairs_evaluated: p.pairs_evaluated,
            pairs_undefined: p.pairs_undefined,
        });
    }
    Ok(ConsistencyReport {
        runs: matrix.n_runs(),
        missing_cells: matrix.missing_cells(),
        cells,
        agreement,
    })
}

/// Lays out rows with the first `left` columns left-aligned and the rest
/// right-aligned, two spaces apart.
pub(crate) fn render_table(header: &[String], rows: &[Vec<String>], left: usize) -> String {
    let n = header.len();
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate().take(n) {
            widths[i] = widths[i].max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| {
        let mut s = String::new();
        for (i, cell) in cells.iter().enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            if i < left {
                s.push_str(&format!("{cell:<w$}", w = widths[i]));
            } else {
                s.push_str(&format!("{cell:>w$}", w = widths[i]));
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(header);
    out.push_str(&line(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>()));
    for row in rows {
        out.push_str(&line(row));
    }
    out
}

pub(crate) fn fixed(v: Option<f64>, decimals: usize) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.decimals$}"))
}

fn block(report: &ConsistencyReport, title: &str, f: impl Fn(&CellStats) -> String) -> String {
    let stats = &report.cells;
    let mut header = vec!["Variable".to_string()];
    header.extend(stats.review_ids.iter().cloned());
    let rows: Vec<Vec<String>> = stats
        .variables
        .iter()
        .enumerate()
        .map(|(v, name)| {
            let mut row = vec![name.clone()];
            row.extend((0..stats.review_ids.len()).map(|r| stats.get(r, v).map_or("-".into(), &f)));
            row
        })
        .collect();
    format!("{title}\n{}", render_table(&header, &rows, 1))
}

/// Plain-text rendering: one block per statistic with variables as rows and
/// reviews as columns, then the agreement summary. Proportions and WPA are
/// rounded to 2 decimals.
pub fn render_consistency_text(report: &ConsistencyReport) -> String {
    let mut out = format!(
        "Annotation consistency over {} runs ({} missing cells)\n\n",
        report.runs, report.missing_cells
    );
    let blocks = [
        block(report, "Mode annotation", |c| c.mode.to_string()),
        block(report, "Range", |c| c.range.to_string()),
        block(report, "Proportion of mode", |c| format!("{:.2}", c.prop_mode)),
        block(report, "Proportion in proximity of mode", |c| format!("{:.2}", c.prop_proximity)),
        block(report, "Effective n (runs with a rating)", |c| c.n_runs.to_string()),
    ];
    out.push_str(&blocks.join("\n"));
    out.push('\n');
    let header: Vec<String> = ["Variable", "Mean pairwise WPA", "Agreement", "Pairs", "Undefined pairs"]
        .map(String::from)
        .to_vec();
    let rows: Vec<Vec<String>> = report
        .agreement
        .iter()
        .map(|a| {
            vec![
                a.variable.clone(),
                fixed(a.mean_pairwise_wpa, 2),
                a.label.map_or("-".into(), |l| l.to_string()),
                a.pairs_evaluated.to_string(),
                a.pairs_undefined.to_string(),
            ]
        })
        .collect();
    out.push_str("Agreement across runs\n");
    out.push_str(&render_table(&header, &rows, 1));
    out
}

/// Writes `consistency.json` and `consistency.txt` into `dir`.
pub fn write_consistency_report(dir: &Path, report: &ConsistencyReport) -> Result<(), PipelineError> {
    write_text(&dir.join(CONSISTENCY_JSON), &to_json(report))?;
    write_text(&dir.join(CONSISTENCY_TXT), &render_consistency_text(report))
}
