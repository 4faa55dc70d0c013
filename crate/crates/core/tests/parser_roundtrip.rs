use proptest::prelude::*;
use tam_annotate::model::{AnnotationVector, Rating, VariableSet};
use tam_annotate::parse::{format_response, parse_annotation_response, ParseIssue};
use tam_annotate::prompt::PromptSpec;

fn vector(codes: &[u8], spec: &PromptSpec) -> AnnotationVector {
    AnnotationVector::new(
        "r",
        spec.variables(),
        codes.iter().map(|&c| Some(Rating::new(c).unwrap())).collect(),
    )
    .unwrap()
}

#[test]
fn default_format_golden() {
    let spec = PromptSpec::default_utaut();
    let raw = "Performance expectancy: 2\nEffort expectancy: 4\nSocial influence: 0\nFacilitating conditions: 3\n";
    let v = parse_annotation_response(raw, &spec, "1").vector(&spec).unwrap();
    let codes: Vec<u8> = v.ratings().iter().map(|r| r.unwrap().code()).collect();
    assert_eq!(codes, vec![2, 4, 0, 3]);
}

#[test]
fn custom_variables_round_trip() {
    let spec = PromptSpec::default_utaut().with_variables(VariableSet::from_names(&["Price value", "Habit"]).unwrap());
    let v = vector(&[5, 0], &spec);
    let back = parse_annotation_response(&format_response(&v, &spec), &spec, "r").vector(&spec).unwrap();
    assert_eq!(back, v);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn format_then_parse_is_identity(codes in prop::collection::vec(0u8..=5, 4)) {
        let spec = PromptSpec::default_utaut();
        let v = vector(&codes, &spec);
        let raw = format_response(&v, &spec);
        let back = parse_annotation_response(&raw, &spec, "r").vector(&spec).unwrap();
        prop_assert_eq!(back, v);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn decorations_and_order_do_not_matter(
        codes in prop::collection::vec(0u8..=5, 4),
        order in Just(vec![0usize, 1, 2, 3]).prop_shuffle(),
        bullet in prop::sample::select(vec!["", "- ", "* ", "1. ", "> "]),
        upper in any::<bool>(),
        bold in any::<bool>(),
    ) {
        let spec = PromptSpec::default_utaut();
        let mut raw = String::from("Here you go:\n");
        for &i in &order {
            let mut name = spec.variables().get(i).unwrap().name.clone();
            if upper {
                name = name.to_uppercase();
            }
            if bold {
                name = format!("**{name}**");
            }
            raw.push_str(&format!("{bullet}{name}: {}\n", codes[i]));
        }
        let back = parse_annotation_response(&raw, &spec, "r").vector(&spec).unwrap();
        prop_assert_eq!(back, vector(&codes, &spec));
    }

    #[test]
    fn out_of_range_values_are_reported(bad in 6i64..1000, slot in 0usize..4) {
        let spec = PromptSpec::default_utaut();
        let mut lines = Vec::new();
        for (i, var) in spec.variables().iter().enumerate() {
            let value = if i == slot { bad } else { 3 };
            lines.push(format!("{}: {value}", var.name));
        }
        let out = parse_annotation_response(&lines.join("\n"), &spec, "r");
        prop_assert_eq!(out.diagnostics.len(), 1);
        let is_out_of_range = matches!(out.diagnostics[0].issue, ParseIssue::OutOfRange { .. });
        prop_assert!(is_out_of_range);
        prop_assert!(out.ratings[slot].is_none());
    }
}
