//! Agreement of three human experts with each other and with an LLM, both
//! from raw annotations and from already-computed pair values.
//!
//! Run with `cargo run --example expert_comparison`.

use tam_annotate::metrics::{expert_agreement_report, AnnotatorRatings, PairKind, PairAgreement, VariableAgreement};
use tam_annotate::model::{Rating, VariableSet};
use tam_annotate::pipeline::render_agreement_text;
use tam_annotate::weights::default_weight_matrix;

fn annotator(label: &str, rows: &[&[u8]]) -> AnnotatorRatings {
    AnnotatorRatings {
        label: label.into(),
        by_variable: rows
            .iter()
            .map(|r| r.iter().map(|&c| Some(Rating::new(c).unwrap())).collect())
            .collect(),
    }
}

fn main() {
    let vars = VariableSet::from_names(&["PE", "EE"]).unwrap();
    let experts = vec![
        annotator("E1", &[&[4, 4, 1, 2, 5, 1], &[3, 3, 1, 2, 4, 1]]),
        annotator("E2", &[&[3, 4, 2, 2, 5, 1], &[4, 3, 1, 3, 5, 1]]),
        annotator("E3", &[&[4, 5, 1, 1, 4, 0], &[3, 2, 1, 2, 4, 0]]),
    ];
    let llm = annotator("LLM", &[&[4, 4, 1, 2, 5, 1], &[3, 3, 1, 3, 4, 1]]);
    let report = expert_agreement_report(&vars, &experts, &llm, &default_weight_matrix()).unwrap();
    print!("{}", render_agreement_text(&report));

    // group means straight from published pair values
    let names = ["E1", "E2", "E3", "LLM"];
    let values = [0.6625, 0.9542, 0.9458, 0.6833, 0.6917, 0.9833];
    let mut pairs = Vec::new();
    let mut k = 0;
    for i in 0..4 {
        for j in (i + 1)..4 {
            let kind = if j == 3 { PairKind::ExpertWithLlm } else { PairKind::BetweenExperts };
            pairs.push(PairAgreement::given(names[i], names[j], kind, values[k]));
            k += 1;
        }
    }
    let pe = VariableAgreement::from_pairs("PE", pairs).unwrap();
    println!(
        "\nfrom given pairs: between experts {:.6}, experts with LLM {:.6} ({})",
        pe.between_experts.unwrap(),
        pe.experts_with_llm.unwrap(),
        pe.label.unwrap()
    );
}
