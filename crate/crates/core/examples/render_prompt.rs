//! The annotation prompt for one review, as chat messages and as a single
//! block.
//!
//! Run with `cargo run --example render_prompt`.

use tam_annotate::model::Review;
use tam_annotate::prompt::{render_messages, render_prompt, MessagePlacement, PromptSpec};

fn main() {
    let review = Review::new(
        "42",
        "Setup took two minutes and my parents use it daily. Support never answered though.",
        Some("app store".into()),
    )
    .unwrap();

    let spec = PromptSpec::default_utaut();
    let messages = render_messages(&spec, &review).unwrap();
    println!("=== system ===\n{}\n", messages.system.unwrap_or_default());
    println!("=== user ===\n{}\n", messages.user);

    let single = spec.with_placement(MessagePlacement::UserOnly);
    println!("=== single message ===\n{}", render_prompt(&single, &review).unwrap());

    let custom: PromptSpec = toml::from_str(
        r#"
variables = [{ name = "Price value", aliases = ["PV"] }, { name = "Habit" }]
no_information = false
"#,
    )
    .unwrap();
    println!("\n=== custom spec instructions ===\n{}", custom.instructions());
}
