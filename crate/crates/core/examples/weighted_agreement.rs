//! Weighted percentage agreement between two annotation sequences.
//!
//! Run with `cargo run --example weighted_agreement`.

use tam_annotate::metrics::{agreement_label, wpa};
use tam_annotate::model::ratings;
use tam_annotate::weights::{default_weight_matrix, likert_penalty};

fn main() {
    let w = default_weight_matrix();
    println!("penalty matrix (w_max = {}):", w.max());
    for row in w.rows() {
        println!("  {row:?}");
    }

    // mode annotations of two models over 15 reviews
    let older = ratings(&[4, 4, 1, 2, 5, 1, 4, 2, 4, 1, 3, 2, 3, 2, 1]);
    let newer = ratings(&[3, 4, 1, 2, 5, 1, 5, 2, 4, 2, 2, 2, 3, 1, 1]);
    let r = wpa(&older, &newer, &w).expect("same length, valid codes");
    println!(
        "\nWPA = {:.6} over {} items (total penalty {}), {}",
        r.value,
        r.n_items,
        r.total_penalty,
        agreement_label(r.value).unwrap()
    );

    let mixed = wpa(&ratings(&[2, 3, 0]), &ratings(&[3, 3, 5]), &w).unwrap();
    println!("[2,3,0] vs [3,3,5]: {:.6}", mixed.value);

    let a = ratings(&[1, 5]);
    println!(
        "quadratic Likert penalty between 1 and 5: {}",
        likert_penalty(a[0], a[1]).unwrap()
    );
}
