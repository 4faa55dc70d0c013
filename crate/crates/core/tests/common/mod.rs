//! Naive reference implementations and shared fixtures for the integration
//! tests. Deliberately written without the library's metric code.

#![allow(dead_code)]

pub const W_MAX: f64 = 16.0;

/// Penalty between two codes on the 0..=5 scale: squared distance between
/// Likert levels, and a fixed row for the no-information code.
pub fn penalty(a: u8, b: u8) -> f64 {
    const NO_INFO_ROW: [f64; 6] = [0.0, 16.0, 9.0, 4.0, 9.0, 16.0];
    if a == b {
        0.0
    } else if a == 0 {
        NO_INFO_ROW[b as usize]
    } else if b == 0 {
        NO_INFO_ROW[a as usize]
    } else {
        let d = a as f64 - b as f64;
        d * d
    }
}

pub fn naive_wpa(a: &[u8], b: &[u8]) -> f64 {
    let mut total = 0.0;
    for i in 0..a.len() {
        total += penalty(a[i], b[i]);
    }
    1.0 - total / (a.len() as f64 * W_MAX)
}

pub fn naive_mode(values: &[u8]) -> u8 {
    let mut counts = [0usize; 6];
    for &v in values {
        counts[v as usize] += 1;
    }
    let top = *counts.iter().max().unwrap();
    let mut best: Option<(f64, u8)> = None;
    for c in 0..6u8 {
        if counts[c as usize] != top {
            continue;
        }
        let cost: f64 = values.iter().map(|&v| penalty(c, v)).sum();
        match best {
            Some((b, _)) if b <= cost => {}
            _ => best = Some((cost, c)),
        }
    }
    best.unwrap().1
}

pub fn naive_range(values: &[u8]) -> u8 {
    values.iter().max().unwrap() - values.iter().min().unwrap()
}

pub fn naive_prop_mode(values: &[u8]) -> f64 {
    let m = naive_mode(values);
    values.iter().filter(|&&v| v == m).count() as f64 / values.len() as f64
}

pub fn naive_prop_proximity(values: &[u8]) -> f64 {
    let m = naive_mode(values) as i32;
    values.iter().filter(|&&v| (v as i32 - m).abs() <= 1).count() as f64 / values.len() as f64
}

pub fn naive_pairwise_mean(runs: &[Vec<u8>]) -> f64 {
    let mut sum = 0.0;
    let mut n = 0;
    for i in 0..runs.len() {
        for j in 0..runs.len() {
            if i < j {
                sum += naive_wpa(&runs[i], &runs[j]);
                n += 1;
            }
        }
    }
    sum / n as f64
}

/// Every sequence over codes 0..=5 of the given length.
pub fn all_sequences(len: usize) -> Vec<Vec<u8>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|s| {
                (0..6u8).map(move |c| {
                    let mut t = s.clone();
                    t.push(c);
                    t
                })
            })
            .collect();
    }
    out
}

pub const VARIABLES: [&str; 4] = ["PE", "EE", "SI", "FC"];

/// Mode annotations of the earlier model at temperature 1, reviews 1..=15.
pub const OLDER_MODEL_MODES: [[u8; 15]; 4] = [
    [4, 4, 1, 2, 5, 1, 4, 2, 4, 1, 3, 2, 3, 2, 1],
    [3, 3, 1, 2, 4, 1, 4, 3, 2, 1, 2, 2, 3, 2, 1],
    [3, 0, 0, 0, 4, 0, 5, 0, 2, 1, 2, 2, 0, 1, 1],
    [0, 3, 1, 1, 4, 1, 4, 0, 2, 1, 2, 2, 0, 1, 1],
];

/// Mode annotations of the later model, reviews 1..=15.
pub const NEWER_MODEL_MODES: [[u8; 15]; 4] = [
    [3, 4, 1, 2, 5, 1, 5, 2, 4, 2, 2, 2, 3, 1, 1],
    [4, 3, 1, 3, 5, 1, 5, 3, 2, 3, 4, 1, 2, 2, 1],
    [0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 1, 0],
    [4, 4, 1, 1, 5, 1, 5, 1, 2, 1, 1, 1, 2, 1, 1],
];

/// Published pairwise WPA per variable in the order E1–E2, E1–E3, E1–LLM,
/// E2–E3, E2–LLM, E3–LLM.
pub const EXPERT_PAIRS: [[f64; 6]; 4] = [
    [0.6625, 0.9542, 0.9458, 0.6833, 0.6917, 0.9833],
    [0.6625, 0.8250, 0.6667, 0.6625, 0.6542, 0.8750],
    [0.2917, 0.8208, 0.9333, 0.4208, 0.3250, 0.7542],
    [0.4583, 0.4750, 0.3083, 0.6750, 0.6500, 0.8417],
];

/// Expected (between experts, experts with LLM) means, from an independent
/// computation.
pub const EXPERT_MEANS: [(f64, f64); 4] = [
    (0.766667, 0.873600),
    (0.716667, 0.731967),
    (0.511100, 0.670833),
    (0.536100, 0.600000),
];

/// Writes `n` short reviews as CSV and returns the path.
pub fn write_reviews(dir: &std::path::Path, n: usize) -> std::path::PathBuf {
    let path = dir.join("reviews.csv");
    let mut body = String::from("id,text,source\n");
    for i in 1..=n {
        body.push_str(&format!("{i},\"Review {i}: it works, mostly.\",fixture\n"));
    }
    std::fs::write(&path, body).unwrap();
    path
}
