//! Repeating an experiment at two temperatures with the mock provider and
//! comparing run-to-run agreement.
//!
//! Run with `cargo run --example temperature_sweep`.

use tam_annotate::gateway::{ProviderConfig, ProviderKind, DEFAULT_TEMPERATURE, LOW_TEMPERATURE};
use tam_annotate::pipeline::{render_sweep_text, temperature_sweep, write_sweep_report, Clock, ExperimentConfig};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("tam-annotate-sweep-example");
    std::fs::create_dir_all(&dir)?;
    let reviews = dir.join("reviews.csv");
    let mut csv = String::from("id,text\n");
    for i in 1..=15 {
        csv.push_str(&format!("{i},\"Review {i}: works, mostly.\"\n"));
    }
    std::fs::write(&reviews, csv)?;

    let mut cfg = ExperimentConfig::new(&reviews, dir.join("out"));
    cfg.runs = 20;
    cfg.provider = ProviderConfig::mock(11, DEFAULT_TEMPERATURE);
    cfg.provider.mock_spread = 1.5;

    let report = temperature_sweep(
        &cfg,
        &[DEFAULT_TEMPERATURE, LOW_TEMPERATURE],
        &Clock::for_provider(ProviderKind::Mock),
    )
    .await?;
    write_sweep_report(&cfg.out, &report)?;
    print!("{}", render_sweep_text(&report));
    Ok(())
}
