//! Surface-overlap metrics over [`tokenize`] tokens.

use std::collections::HashMap;

use crate::index::{tokenize, Token};

pub const BLEU_MAX_ORDER: usize = 4;

/// Length of the longest common subsequence of two token sequences.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    let mut row = vec![0usize; short.len() + 1];
    for x in long {
        let mut diag = 0;
        for (j, y) in short.iter().enumerate() {
            let above = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { above.max(row[j]) };
            diag = above;
        }
    }
    row[short.len()]
}

/// LCS-based F1 over token sequences. Zero when either side is empty.
pub fn rouge_l_tokens<T: PartialEq>(candidate: &[T], reference: &[T]) -> f64 {
    let lcs = lcs_len(candidate, reference);
    if lcs == 0 {
        return 0.0;
    }
    let p = lcs as f64 / candidate.len() as f64;
    let r = lcs as f64 / reference.len() as f64;
    2.0 * p * r / (p + r)
}

pub fn rouge_l_f1(candidate: &str, reference: &str) -> f64 {
    rouge_l_tokens(&tokenize(candidate), &tokenize(reference))
}

fn ngram_counts(tokens: &[Token], n: usize) -> HashMap<&[Token], usize> {
    let mut counts = HashMap::new();
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

/// Sentence BLEU on a 0–100 scale.
///
/// Orders 1..=4 with clipped counts. An order with no matches uses
/// `1 / (total + 1)` as its precision. Brevity penalty applies when the
/// candidate is shorter than the reference. Empty candidate or reference
/// scores 0.
pub fn bleu_sentence(candidate: &str, reference: &str) -> f64 {
    bleu_tokens(&tokenize(candidate), &tokenize(reference))
}

pub fn bleu_tokens(cand: &[Token], refr: &[Token]) -> f64 {
    if cand.is_empty() || refr.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=BLEU_MAX_ORDER {
        let total = cand.len().saturating_sub(n - 1);
        let ref_counts = ngram_counts(refr, n);
        let matched: usize = ngram_counts(cand, n)
            .into_iter()
            .map(|(gram, c)| c.min(ref_counts.get(gram).copied().unwrap_or(0)))
            .sum();
        let precision = if matched == 0 {
            1.0 / (total as f64 + 1.0)
        } else {
            matched as f64 / total as f64
        };
        log_sum += precision.ln();
    }
    let bp = if cand.len() < refr.len() {
        (1.0 - refr.len() as f64 / cand.len() as f64).exp()
    } else {
        1.0
    };
    100.0 * bp * (log_sum / BLEU_MAX_ORDER as f64).exp()
}
