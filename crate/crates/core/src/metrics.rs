//! Answer normalization, tokenization, exact match and token F1.

use std::collections::HashMap;

/// Lowercases, drops punctuation and splits on whitespace. Used for the
/// retrieval index and for the metrics.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect::<String>()
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

fn answer_tokens(text: &str) -> Vec<String> {
    tokenize(text).into_iter().filter(|t| !matches!(t.as_str(), "a" | "an" | "the")).collect()
}

pub fn normalize_answer(text: &str) -> String {
    answer_tokens(text).join(" ")
}

pub fn exact_match(pred: &str, golds: &[String]) -> f64 {
    let p = normalize_answer(pred);
    if golds.iter().any(|g| normalize_answer(g) == p) {
        1.0
    } else {
        0.0
    }
}

fn f1_pair(pred: &[String], gold: &[String]) -> f64 {
    if pred.is_empty() || gold.is_empty() {
        return if pred == gold { 1.0 } else { 0.0 };
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in gold {
        *counts.entry(t).or_default() += 1;
    }
    let mut common = 0usize;
    for t in pred {
        if let Some(c) = counts.get_mut(t.as_str()).filter(|c| **c > 0) {
            *c -= 1;
            common += 1;
        }
    }
    if common == 0 {
        return 0.0;
    }
    let precision = common as f64 / pred.len() as f64;
    let recall = common as f64 / gold.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

pub fn token_f1(pred: &str, golds: &[String]) -> f64 {
    let p = answer_tokens(pred);
    golds.iter().map(|g| f1_pair(&p, &answer_tokens(g))).fold(0.0, f64::max)
}
