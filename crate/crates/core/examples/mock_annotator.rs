//! The seeded mock annotator and the effect of temperature on its output.
//!
//! Run with `cargo run --example mock_annotator`.

use tam_annotate::gateway::{mock_complete, sharpen, CellDistribution, MockAnnotatorProfile};
use tam_annotate::model::Review;
use tam_annotate::prompt::PromptSpec;

fn main() {
    let p = CellDistribution::new(vec![0.05, 0.10, 0.15, 0.40, 0.20, 0.10]).unwrap();
    for t in [2.0, 1.0, 0.5, 0.25, 0.0] {
        let q: Vec<String> = sharpen(p.probs(), t).iter().map(|x| format!("{x:.3}")).collect();
        println!("T = {t:<4} -> [{}]", q.join(", "));
    }

    let spec = PromptSpec::default_utaut();
    let review = Review::new("8", "Needs a fast connection, otherwise great.", None).unwrap();
    let mut profile = MockAnnotatorProfile::synthetic(2024, 1.5);
    profile.insert("8", "Facilitating conditions", p);

    for t in [1.0, 0.25] {
        println!("\ntemperature {t}:");
        for draw in 0..3 {
            let text = mock_complete(&profile, t, &review, &spec, draw).unwrap();
            println!("  draw {draw}: {}", text.trim_end().replace('\n', " | "));
        }
    }
}
