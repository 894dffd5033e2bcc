use std::collections::{BTreeSet, HashMap};

use rand::Rng;

/// BLEU written again from its definition: n-grams keyed by joined strings,
/// precisions multiplied and rooted instead of averaged in log space.
pub fn oracle_bleu(hyp: &[String], reference: &[String]) -> f64 {
    if hyp.is_empty() {
        return 0.0;
    }
    let grams = |t: &[String], n: usize| -> HashMap<String, f64> {
        let mut m = HashMap::new();
        if t.len() >= n {
            for i in 0..=t.len() - n {
                *m.entry(t[i..i + n].join("\u{1}")).or_insert(0.0) += 1.0;
            }
        }
        m
    };
    let c = hyp.len() as f64;
    let r = reference.len() as f64;
    let bp = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    let mut precisions = Vec::new();
    for n in 1..=4 {
        let h = grams(hyp, n);
        let rf = grams(reference, n);
        let total: f64 = h.values().sum();
        let hit: f64 = h.iter().map(|(g, &k)| k.min(*rf.get(g).unwrap_or(&0.0))).sum();
        precisions.push(if n == 1 {
            hit / total
        } else {
            (hit + 1.0) / (total + 1.0)
        });
    }
    let mut sum = 0.0;
    for n in 1..=4 {
        let prod: f64 = precisions[..n].iter().product();
        sum += bp * prod.powf(1.0 / n as f64);
    }
    sum / 4.0
}

fn sentence(r: &mut impl Rng, words: &[&str]) -> Vec<String> {
    let len = r.gen_range(1..14);
    (0..len)
        .map(|_| words[r.gen_range(0..words.len())].to_string())
        .collect()
}

pub fn fixed_pairs() -> Vec<(Vec<String>, Vec<String>)> {
    let words = [
        "you", "may", "have", "flu", "fever", "cough", "do", "any", "?", ",", "rest",
    ];
    let r = &mut geml_core::rng::stream(2024, "bleu-pairs");
    (0..20)
        .map(|i| {
            let reference = sentence(r, &words);
            let hyp = if i % 4 == 0 {
                let mut h = reference.clone();
                let j = r.gen_range(0..h.len());
                h[j] = "rest".into();
                h
            } else {
                sentence(r, &words)
            };
            (hyp, reference)
        })
        .collect()
}

pub fn oracle_f1(pred: &BTreeSet<u8>, gold: &BTreeSet<u8>) -> f64 {
    if pred.is_empty() && gold.is_empty() {
        return 1.0;
    }
    if pred.is_empty() || gold.is_empty() {
        return 0.0;
    }
    let hit = pred.iter().filter(|x| gold.iter().any(|y| y == *x)).count() as f64;
    if hit == 0.0 {
        return 0.0;
    }
    let p = hit / pred.len() as f64;
    let r = hit / gold.len() as f64;
    2.0 * p * r / (p + r)
}
