use std::collections::{BTreeMap, BTreeSet};

fn ngram_counts(tokens: &[String], n: usize) -> BTreeMap<&[String], usize> {
    let mut m = BTreeMap::new();
    for w in tokens.windows(n) {
        *m.entry(w).or_insert(0) += 1;
    }
    m
}

/// Clipped n-gram matches and hypothesis n-gram total.
fn modified_precision(hyp: &[String], reference: &[String], n: usize) -> (usize, usize) {
    let h = ngram_counts(hyp, n);
    let r = ngram_counts(reference, n);
    let matches = h.iter().map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0))).sum();
    (matches, hyp.len().saturating_sub(n - 1))
}

/// Cumulative BLEU-`n` with uniform weights: unsmoothed unigram precision,
/// add-one smoothed precisions for orders two and up, brevity penalty.
pub fn bleu_n(hyp: &[String], reference: &[String], n: usize) -> f64 {
    assert!((1..=4).contains(&n), "bleu order must be 1..=4");
    if hyp.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for k in 1..=n {
        let (m, t) = modified_precision(hyp, reference, k);
        let p = if k == 1 {
            m as f64 / t as f64
        } else {
            (m as f64 + 1.0) / (t as f64 + 1.0)
        };
        if p == 0.0 {
            return 0.0;
        }
        log_sum += p.ln();
    }
    let (c, r) = (hyp.len() as f64, reference.len() as f64);
    let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    bp * (log_sum / n as f64).exp()
}

/// Mean of cumulative BLEU-1 to BLEU-4, in `[0, 1]`.
pub fn bleu_sentence(hyp: &[String], reference: &[String]) -> f64 {
    (1..=4).map(|n| bleu_n(hyp, reference, n)).sum::<f64>() / 4.0
}

/// F1 between predicted and gold sets. Both empty scores 1, exactly one
/// empty scores 0.
pub fn entity_f1<T: Ord>(pred: &BTreeSet<T>, gold: &BTreeSet<T>) -> f64 {
    match (pred.is_empty(), gold.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let hit = pred.intersection(gold).count() as f64;
    if hit == 0.0 {
        return 0.0;
    }
    let p = hit / pred.len() as f64;
    let r = hit / gold.len() as f64;
    2.0 * p * r / (p + r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn identical_sentences_score_one() {
        let s = toks("do you have a fever or cough ?");
        assert_eq!(bleu_sentence(&s, &s), 1.0);
        assert_eq!(bleu_sentence(&[], &s), 0.0);
    }

    #[test]
    fn short_hypothesis_pays_brevity() {
        let r = toks("you may have flu , please rest");
        let h = toks("you may have");
        let b1 = bleu_n(&h, &r, 1);
        assert!((b1 - (1.0 - 7.0 / 3.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn f1_conventions() {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<BTreeSet<_>>();
        assert_eq!(entity_f1(&s(&["a", "b"]), &s(&["b", "c"])), 0.5);
        assert_eq!(entity_f1(&s(&["a"]), &s(&["a"])), 1.0);
        assert_eq!(entity_f1(&s(&[]), &s(&[])), 1.0);
        assert_eq!(entity_f1(&s(&["a"]), &s(&[])), 0.0);
        assert_eq!(entity_f1(&s(&["a"]), &s(&["b"])), 0.0);
    }
}
