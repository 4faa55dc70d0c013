//! Mode, range and proportion statistics of repeated annotations.
//!
//! Run with `cargo run --example consistency_stats`.

use tam_annotate::metrics::{cell_stats, mode_annotation, pairwise_mean_wpa};
use tam_annotate::model::{ratings, AnnotationMatrix, VariableSet};
use tam_annotate::pipeline::{consistency_report, render_consistency_text};
use tam_annotate::weights::default_weight_matrix;

fn main() {
    let w = default_weight_matrix();

    let cell = ratings(&[2, 2, 3, 0]);
    let s = cell_stats(&cell, &w).unwrap();
    println!(
        "ratings {:?}: mode {}, range {}, prop_mode {:.2}, prop_proximity {:.2}",
        cell.iter().map(|r| r.code()).collect::<Vec<_>>(),
        s.mode,
        s.range,
        s.prop_mode,
        s.prop_proximity
    );
    println!(
        "tie between 0, 4 and 5 resolves to {}",
        mode_annotation(&ratings(&[0, 5, 4]), &w).unwrap()
    );

    let runs = vec![ratings(&[3, 3]), ratings(&[3, 3]), ratings(&[3, 4])];
    let p = pairwise_mean_wpa(&runs, &w).unwrap();
    println!("mean pairwise WPA of 3 runs: {:.6} over {} pairs\n", p.mean.unwrap(), p.pairs_evaluated);

    // four runs over three reviews; run 4 failed to rate review r2's EE
    let matrix = AnnotationMatrix::from_codes(
        VariableSet::from_names(&["PE", "EE"]).unwrap(),
        vec!["r1".into(), "r2".into(), "r3".into()],
        &[
            vec![vec![Some(4), Some(3)], vec![Some(1), Some(1)], vec![Some(0), Some(2)]],
            vec![vec![Some(4), Some(4)], vec![Some(1), Some(2)], vec![Some(0), Some(2)]],
            vec![vec![Some(5), Some(3)], vec![Some(2), Some(1)], vec![Some(3), Some(2)]],
            vec![vec![Some(4), Some(3)], vec![Some(1), None], vec![Some(0), Some(2)]],
        ],
    )
    .unwrap();
    let report = consistency_report(&matrix, &w).unwrap();
    print!("{}", render_consistency_text(&report));
}
