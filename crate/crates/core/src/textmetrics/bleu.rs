use std::collections::HashMap;

use super::tokenize::tokenize_13a;

const MAX_ORDER: usize = 4;

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    for g in tokens.windows(n) {
        *counts.entry(g).or_insert(0) += 1;
    }
    counts
}

/// Sentence BLEU on the 0–100 scale: case-sensitive 13a tokens, clipped
/// n-gram precisions up to 4, exponential smoothing of zero precisions,
/// effective order (orders with no candidate n-grams are left out) and the
/// usual brevity penalty.
pub fn bleu_sentence(candidate: &str, reference: &str) -> f64 {
    let cand = tokenize_13a(candidate);
    let reference = tokenize_13a(reference);
    if cand.is_empty() {
        return 0.0;
    }
    let mut correct = [0usize; MAX_ORDER];
    let mut total = [0usize; MAX_ORDER];
    for n in 1..=MAX_ORDER {
        let c = ngram_counts(&cand, n);
        let r = ngram_counts(&reference, n);
        total[n - 1] = c.values().sum();
        correct[n - 1] = c.iter().map(|(g, &k)| k.min(r.get(g).copied().unwrap_or(0))).sum();
    }
    if correct.iter().all(|&c| c == 0) {
        return 0.0;
    }
    let (sys_len, ref_len) = (cand.len() as f64, reference.len() as f64);
    let bp = if sys_len < ref_len { (1.0 - ref_len / sys_len).exp() } else { 1.0 };

    let mut smooth = 1.0;
    let mut log_sum = 0.0;
    let mut order = 0;
    for n in 0..MAX_ORDER {
        if total[n] == 0 {
            break;
        }
        order = n + 1;
        let p = if correct[n] == 0 {
            smooth *= 2.0;
            1.0 / (smooth * total[n] as f64)
        } else {
            correct[n] as f64 / total[n] as f64
        };
        log_sum += p.ln();
    }
    (100.0 * bp * (log_sum / order as f64).exp()).min(100.0)
}
