use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::annotate::{annotate, Clock};
use super::report::{consistency_report, fixed, render_table, write_consistency_report, ConsistencyReport};
use super::{to_json, write_text, ExperimentConfig, PipelineError};
use crate::model::AnnotationMatrix;
use crate::weights::WeightMatrix;

pub const SWEEP_JSON: &str = "sweep.json";
pub const SWEEP_TXT: &str = "sweep.txt";

/// A cell whose mode is not the same at every temperature.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeShift {
    pub review_id: String,
    pub variable: String,
    /// Mode per temperature, in sweep order; `None` if never rated.
    pub modes: Vec<Option<u8>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub temperatures: Vec<f64>,
    pub variables: Vec<String>,
    /// `mean_wpa[temperature][variable]`.
    pub mean_wpa: Vec<Vec<Option<f64>>>,
    pub mode_shifts: Vec<ModeShift>,
}

impl SweepReport {
    /// Builds the comparison from per-temperature consistency reports over
    /// the same reviews and variables.
    pub fn from_reports(temperatures: &[f64], reports: &[ConsistencyReport]) -> Result<Self, PipelineError> {
        if temperatures.len() != reports.len() || reports.len() < 2 {
            return Err(PipelineError::Config(
                "a sweep needs one report per temperature and at least two temperatures".into(),
            ));
        }
        let base = &reports[0].cells;
        if reports
            .iter()
            .any(|r| r.cells.review_ids != base.review_ids || r.cells.variables != base.variables)
        {
            return Err(PipelineError::Config("sweep reports cover different reviews or variables".into()));
        }
        let mean_wpa = reports
            .iter()
            .map(|r| r.agreement.iter().map(|a| a.mean_pairwise_wpa).collect())
            .collect();
        let mut mode_shifts = Vec::new();
        for (ri, review_id) in base.review_ids.iter().enumerate() {
            for (vi, variable) in base.variables.iter().enumerate() {
                let modes: Vec<Option<u8>> = reports
                    .iter()
                    .map(|r| r.cells.get(ri, vi).map(|c| c.mode.code()))
                    .collect();
                if modes.iter().any(|m| *m != modes[0]) {
                    mode_shifts.push(ModeShift {
                        review_id: review_id.clone(),
                        variable: variable.clone(),
                        modes,
                    });
                }
            }
        }
        Ok(SweepReport {
            temperatures: temperatures.to_vec(),
            variables: base.variables.clone(),
            mean_wpa,
            mode_shifts,
        })
    }

    /// Convenience over matrices already in memory.
    pub fn from_matrices(
        temperatures: &[f64],
        matrices: &[AnnotationMatrix],
        w: &WeightMatrix,
    ) -> Result<Self, PipelineError> {
        let reports = matrices
            .iter()
            .map(|m| consistency_report(m, w))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_reports(temperatures, &reports)
    }
}

/// Where the experiment for the `index`-th temperature is stored.
pub fn sweep_dir(out: &Path, index: usize, temperature: f64) -> PathBuf {
    out.join(format!("t{index}-{temperature}"))
}

/// Runs the experiment once per temperature, each into its own
/// subdirectory of `cfg.out` together with its consistency report, and
/// compares them. Stops at the first provider failure.
pub async fn temperature_sweep(
    cfg: &ExperimentConfig,
    temperatures: &[f64],
    clock: &Clock,
) -> Result<SweepReport, PipelineError> {
    if temperatures.len() < 2 {
        return Err(PipelineError::Config("a sweep needs at least two temperatures".into()));
    }
    let mut reports = Vec::with_capacity(temperatures.len());
    for (i, &t) in temperatures.iter().enumerate() {
        let mut sub = cfg.clone();
        sub.provider.temperature = t;
        sub.out = sweep_dir(&cfg.out, i, t);
        let outcome = annotate(&sub, clock).await?;
        if let Some(e) = outcome.error {
            return Err(PipelineError::Provider(e));
        }
        let report = consistency_report(&outcome.matrix, &cfg.weights)?;
        write_consistency_report(&sub.out, &report)?;
        reports.push(report);
    }
    SweepReport::from_reports(temperatures, &reports)
}

/// Temperatures as columns, variables as rows, then the mode shifts.
pub fn render_sweep_text(report: &SweepReport) -> String {
    let mut header = vec!["Variable".to_string()];
    header.extend(report.temperatures.iter().map(|t| format!("T={t}")));
    let rows: Vec<Vec<String>> = report
        .variables
        .iter()
        .enumerate()
        .map(|(v, name)| {
            let mut row = vec![name.clone()];
            row.extend(report.mean_wpa.iter().map(|per_t| fixed(per_t[v], 2)));
            row
        })
        .collect();
    let mut out = format!("Mean pairwise WPA by temperature\n{}", render_table(&header, &rows, 1));
    out.push_str(&format!("\nCells whose mode changes with temperature: {}\n", report.mode_shifts.len()));
    if !report.mode_shifts.is_empty() {
        let mut header = vec!["Review".to_string(), "Variable".to_string()];
        header.extend(report.temperatures.iter().map(|t| format!("T={t}")));
        let rows: Vec<Vec<String>> = report
            .mode_shifts
            .iter()
            .map(|s| {
                let mut row = vec![s.review_id.clone(), s.variable.clone()];
                row.extend(s.modes.iter().map(|m| m.map_or("-".into(), |c| c.to_string())));
                row
            })
            .collect();
        out.push_str(&render_table(&header, &rows, 2));
    }
    out
}

/// Writes `sweep.json` and `sweep.txt` into `dir`.
pub fn write_sweep_report(dir: &Path, report: &SweepReport) -> Result<(), PipelineError> {
    write_text(&dir.join(SWEEP_JSON), &to_json(report))?;
    write_text(&dir.join(SWEEP_TXT), &render_sweep_text(report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{ProviderConfig, ProviderKind};
    use crate::model::VariableSet;
    use crate::weights::default_weight_matrix;

    #[test]
    fn mode_shift_flags_changed_cells() {
        let vars = VariableSet::from_names(&["FC"]).unwrap();
        let ids = vec!["7".to_string(), "8".to_string()];
        let hot = AnnotationMatrix::from_codes(
            vars.clone(),
            ids.clone(),
            &[
                vec![vec![Some(2)], vec![Some(0)]],
                vec![vec![Some(2)], vec![Some(0)]],
                vec![vec![Some(2)], vec![Some(4)]],
            ],
        )
        .unwrap();
        let cold = AnnotationMatrix::from_codes(
            vars,
            ids,
            &[
                vec![vec![Some(2)], vec![Some(4)]],
                vec![vec![Some(2)], vec![Some(4)]],
                vec![vec![Some(2)], vec![Some(0)]],
            ],
        )
        .unwrap();
        let r = SweepReport::from_matrices(&[1.0, 0.25], &[hot, cold], &default_weight_matrix()).unwrap();
        assert_eq!(
            r.mode_shifts,
            vec![ModeShift {
                review_id: "8".into(),
                variable: "FC".into(),
                modes: vec![Some(0), Some(4)],
            }]
        );
        let text = render_sweep_text(&r);
        assert!(text.contains("T=0.25"));
        assert!(text.contains("Cells whose mode changes with temperature: 1"));
    }

    #[tokio::test]
    async fn mock_sweep_is_reproducible_and_sharper_when_cold() {
        let dir = tempfile::tempdir().unwrap();
        let reviews = dir.path().join("reviews.csv");
        let mut body = String::from("id,text\n");
        for i in 1..=15 {
            body.push_str(&format!("{i},review {i}\n"));
        }
        std::fs::write(&reviews, body).unwrap();
        let mut cfg = ExperimentConfig::new(&reviews, dir.path().join("a"));
        cfg.runs = 20;
        cfg.provider = ProviderConfig::mock(17, 1.0);
        let clock = Clock::for_provider(ProviderKind::Mock);
        let a = temperature_sweep(&cfg, &[1.0, 0.25], &clock).await.unwrap();
        cfg.out = dir.path().join("b");
        let b = temperature_sweep(&cfg, &[1.0, 0.25], &clock).await.unwrap();
        assert_eq!(a, b);
        for v in 0..a.variables.len() {
            assert!(a.mean_wpa[1][v].unwrap() >= a.mean_wpa[0][v].unwrap(), "{a:?}");
        }
        assert!(dir.path().join("a/t1-0.25/consistency.txt").is_file());
        assert!(temperature_sweep(&cfg, &[1.0], &clock).await.is_err());
    }
}
