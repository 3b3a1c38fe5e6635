//! Independent oracles shared by the integration tests. None of them call
//! into the library's matching, metric or agreement code.

#![allow(dead_code)]

use std::path::PathBuf;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

/// Leftmost non-overlapping occurrences of every pattern in the
/// space-padded, ASCII-lowercased text, sorted by (start, end, pattern).
pub fn naive_hits(patterns: &[String], text: &str) -> Vec<(usize, usize, usize)> {
    let hay = format!(" {text} ").to_ascii_lowercase();
    let mut hits = Vec::new();
    for (i, p) in patterns.iter().enumerate() {
        let needle = p.to_ascii_lowercase();
        let mut from = 0;
        while let Some(pos) = hay[from..].find(&needle) {
            let start = from + pos;
            hits.push((start, start + needle.len(), i));
            from = start + needle.len();
        }
    }
    hits.sort_unstable();
    hits
}

/// Two nested loops over all occurrences of both layers.
pub fn naive_two_layer(specific: &[String], additional: &[String], text: &str) -> u8 {
    let s = naive_hits(specific, text);
    let a = naive_hits(additional, text);
    for &(ss, se, _) in &s {
        for &(as_, ae, _) in &a {
            if (ss, se) != (as_, ae) {
                return 1;
            }
        }
    }
    0
}

/// Fleiss' kappa for two categories from the count of "1" votes per item,
/// in exact rational arithmetic. `None` when chance agreement is 1.
pub fn kappa_oracle(ones: &[usize], n: usize) -> Option<f64> {
    let items = ones.len() as i128;
    let n = n as i128;
    // P_bar = sum_i (o^2 + (n-o)^2 - n) / (items * n * (n-1))
    let agree: i128 = ones
        .iter()
        .map(|&o| {
            let o = o as i128;
            o * o + (n - o) * (n - o) - n
        })
        .sum();
    let pbar_den = items * n * (n - 1);
    // P_e = (S1^2 + S0^2) / (items*n)^2
    let s1: i128 = ones.iter().map(|&o| o as i128).sum();
    let s0 = items * n - s1;
    let pe_num = s1 * s1 + s0 * s0;
    let pe_den = (items * n) * (items * n);
    if pe_num == pe_den {
        return None;
    }
    // (agree/pbar_den - pe_num/pe_den) / (1 - pe_num/pe_den)
    let num = agree * pe_den - pe_num * pbar_den;
    let den = pbar_den * (pe_den - pe_num);
    Some(num as f64 / den as f64)
}

/// Confusion counts by a plain loop: (tp, fp, fn, tn).
pub fn brute_confusion(pred: &[u8], gold: &[u8]) -> (u64, u64, u64, u64) {
    let mut c = (0, 0, 0, 0);
    for (&p, &g) in pred.iter().zip(gold) {
        match (p, g) {
            (1, 1) => c.0 += 1,
            (1, 0) => c.1 += 1,
            (0, 1) => c.2 += 1,
            _ => c.3 += 1,
        }
    }
    c
}

const FILLER: &[&str] = &[
    "the", "company", "reported", "growth", "in", "revenue", "and", "our", "plants", "we",
    "continue", "to", "invest", "across", "regions", "Lake", "lakes", "hunter", "hunt", "soy",
    "soybean", "Soy", "woodland", "wood", "trees", "street", "farm", "farmer", "aqua", "Aquarium",
    "rainfall", "Rain", "terrain", "ENSO", "Enso", "El", "Nino", "naturally", "NATURE", "Épée",
    "café", "über", "river", "RIVERS", "wind", "window", "sea", "season", "fish", "shipping",
    "climate", "forests", "deforestation", "coral", "habitat", "species", "biodiversity",
];

/// Random sentence mixing keyword fragments, case variants, punctuation and
/// some non-ASCII words.
pub fn random_sentence(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(1..25);
    let mut words = Vec::with_capacity(n);
    for _ in 0..n {
        let w = FILLER[rng.gen_range(0..FILLER.len())];
        let w = match rng.gen_range(0..6) {
            0 => w.to_uppercase(),
            1 => format!("{w},"),
            2 => format!("({w}"),
            _ => w.to_string(),
        };
        words.push(w);
    }
    let sep = if rng.gen_bool(0.1) { "  " } else { " " };
    let mut s = words.join(sep);
    if rng.gen_bool(0.7) {
        s.push('.');
    }
    s
}
