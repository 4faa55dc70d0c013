//! A complete multi-run experiment against the mock provider: annotate,
//! persist, reload, report and export modes.
//!
//! Run with `cargo run --example run_experiment [output-dir]`.

use std::path::PathBuf;

use tam_annotate::gateway::{ProviderConfig, ProviderKind};
use tam_annotate::pipeline::{
    annotate, consistency_report, load_matrix, mode_export, render_consistency_text, write_annotations,
    write_consistency_report, Clock, ExperimentConfig,
};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("tam-annotate-example"));
    std::fs::create_dir_all(&out)?;

    let reviews = out.join("reviews.jsonl");
    let lines: Vec<String> = (1..=15)
        .map(|i| format!("{{\"id\": {i}, \"text\": \"Review number {i} about the app.\"}}"))
        .collect();
    std::fs::write(&reviews, lines.join("\n"))?;

    let mut cfg = ExperimentConfig::new(&reviews, out.join("experiment")).study_one();
    cfg.provider = ProviderConfig::mock(7, 1.0);
    let outcome = annotate(&cfg, &Clock::for_provider(ProviderKind::Mock)).await?;
    println!(
        "{} run records, {} responses, exit code {}",
        outcome.records.len(),
        outcome.responses.len(),
        outcome.exit_code()
    );

    let matrix = load_matrix(&cfg.out)?;
    assert_eq!(matrix, outcome.matrix);
    let report = consistency_report(&matrix, &cfg.weights)?;
    write_consistency_report(&cfg.out, &report)?;
    print!("{}", render_consistency_text(&report));

    let modes = mode_export(&matrix, &cfg.weights, "mock")?;
    write_annotations(&cfg.out.join("modes.csv"), &modes)?;
    println!("\nfiles in {}:", cfg.out.display());
    let mut names: Vec<_> = std::fs::read_dir(&cfg.out)?.map(|e| e.unwrap().file_name()).collect();
    names.sort();
    for n in names {
        println!("  {}", n.to_string_lossy());
    }
    Ok(())
}
