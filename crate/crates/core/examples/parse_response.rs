//! Extracting ratings from model output, including the failure diagnostics.
//!
//! Run with `cargo run --example parse_response`.

use tam_annotate::parse::{format_response, parse_annotation_response};
use tam_annotate::prompt::PromptSpec;

fn main() {
    let spec = PromptSpec::default_utaut();

    let clean = "Performance expectancy: 2\nEffort expectancy: 4\nSocial influence: 0\nFacilitating conditions: 3\n";
    let outcome = parse_annotation_response(clean, &spec, "1");
    let vector = outcome.vector(&spec).unwrap();
    println!("clean response -> {:?}", vector.to_map(spec.variables()));
    println!("formatted back:\n{}", format_response(&vector, &spec));

    let chatty = "Sure! Here are my ratings:\n\
                  1. **Performance Expectancy** (PE): 4\n\
                  - effort expectancy = 5\n\
                  Social influence: 0 (not mentioned)\n";
    let outcome = parse_annotation_response(chatty, &spec, "2");
    println!("chatty response, success = {}", outcome.is_success());
    for d in &outcome.diagnostics {
        println!("  problem: {d}");
    }
    println!("salvaged: {:?}", outcome.partial_vector(&spec).ratings());

    let bad = "Performance expectancy: 7\nEffort expectancy: 2\nEffort expectancy: 3\n";
    match parse_annotation_response(bad, &spec, "3").vector(&spec) {
        Ok(_) => unreachable!(),
        Err(e) => println!("\n{e}"),
    }
}
