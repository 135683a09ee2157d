//! Deterministic synthetic models and corpora for tests, benchmarks and demos.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::forest::{Condition, DecisionPath, FeatureCategory, FeatureSchema, FeatureSpec, LabelSet, RandomForest, Tree};

/// The two-feature tree from the responsibility walkthrough, in raw units
/// (`len`, `emotion` on `[0, 100]`). At `(len=10, emotion=30)` the point is
/// low quality; one high path needs `emotion <= 10`, the other needs
/// `len > 20` and `emotion <= 15`.
pub fn walkthrough_model() -> RandomForest {
    let schema = FeatureSchema::new(vec![
        FeatureSpec { name: "len".into(), category: FeatureCategory::Informativeness, raw_min: 0.0, raw_max: 100.0 },
        FeatureSpec { name: "emotion".into(), category: FeatureCategory::Subjectivity, raw_min: 0.0, raw_max: 100.0 },
    ])
    .expect("valid schema");
    let hi = |conds| DecisionPath { conditions: conds, vote: 0, label_counts: vec![1, 0] };
    let lo = |conds| DecisionPath { conditions: conds, vote: 1, label_counts: vec![0, 1] };
    let tree = Tree {
        paths: vec![
            hi(vec![Condition::le(0, 20.0), Condition::le(1, 10.0)]),
            lo(vec![Condition::le(0, 20.0), Condition::gt(1, 10.0)]),
            hi(vec![Condition::gt(0, 20.0), Condition::le(1, 15.0)]),
            lo(vec![Condition::gt(0, 20.0), Condition::gt(1, 15.0)]),
        ],
    };
    RandomForest::new(schema, vec![tree], LabelSet::binary("high", "low"), 0).expect("valid model")
}

/// Random binary tree over `[0,1]^n`. Thresholds are drawn inside the
/// interval still open on the split feature, so every path is satisfiable
/// and the paths partition the cube. Leaf counts are random with at least
/// one sample.
pub fn random_tree<R: Rng>(rng: &mut R, n_features: usize, max_depth: usize, labels: &LabelSet) -> Tree {
    let mut paths = Vec::new();
    let mut conds = Vec::new();
    let mut lo = vec![0.0f64; n_features];
    let mut hi = vec![1.0f64; n_features];
    grow(rng, labels, max_depth, 0, &mut conds, &mut lo, &mut hi, &mut paths);
    Tree { paths }
}

#[allow(clippy::too_many_arguments)]
fn grow<R: Rng>(
    rng: &mut R,
    labels: &LabelSet,
    max_depth: usize,
    depth: usize,
    conds: &mut Vec<Condition>,
    lo: &mut [f64],
    hi: &mut [f64],
    out: &mut Vec<DecisionPath>,
) {
    let split = depth < max_depth && (depth == 0 || rng.gen_bool(0.7));
    if !split {
        let mut counts: Vec<u64> = (0..labels.len()).map(|_| rng.gen_range(0..4)).collect();
        if counts.iter().all(|&c| c == 0) {
            let i = rng.gen_range(0..counts.len());
            counts[i] = 1;
        }
        let vote = labels.resolve(&counts);
        out.push(DecisionPath { conditions: conds.clone(), vote, label_counts: counts });
        return;
    }
    let f = rng.gen_range(0..lo.len());
    // keep thresholds on a 1/100 grid so breakpoint gaps dwarf epsilon
    let a = libm::ceil(lo[f] * 100.0) as i64 + 1;
    let b = libm::floor(hi[f] * 100.0) as i64 - 1;
    if a > b {
        grow(rng, labels, max_depth, max_depth, conds, lo, hi, out);
        return;
    }
    let t = rng.gen_range(a..=b) as f64 / 100.0;
    let (old_lo, old_hi) = (lo[f], hi[f]);
    conds.push(Condition::le(f, t));
    hi[f] = t;
    grow(rng, labels, max_depth, depth + 1, conds, lo, hi, out);
    hi[f] = old_hi;
    conds.pop();
    conds.push(Condition::gt(f, t));
    lo[f] = t;
    grow(rng, labels, max_depth, depth + 1, conds, lo, hi, out);
    lo[f] = old_lo;
    conds.pop();
}

pub fn random_forest<R: Rng>(rng: &mut R, n_features: usize, max_depth: usize, num_trees: usize) -> RandomForest {
    let labels = LabelSet::binary("high", "low");
    let trees = (0..num_trees).map(|_| random_tree(rng, n_features, max_depth, &labels)).collect();
    let schema = FeatureSchema::unit((0..n_features).map(|i| format!("f{i}")).collect());
    RandomForest::new(schema, trees, labels, 0).expect("generated trees are valid")
}

/// Uniform point in the unit cube that the model scores below its maximal
/// utility, or `None` after `tries` misses.
pub fn random_low_point<R: Rng>(rng: &mut R, model: &RandomForest, tries: usize) -> Option<Vec<f64>> {
    let max_u = model.labels.max_utility();
    for _ in 0..tries {
        let d: Vec<f64> = (0..model.num_features()).map(|_| rng.gen::<f64>()).collect();
        if model.utility_at(&d).ok()? < max_u {
            return Some(d);
        }
    }
    None
}

/// Disjoint per-topic vocabularies: topic `t` owns words `"{prefix}{t}w{i}"`.
pub fn topic_vocabularies(num_topics: usize, words_per_topic: usize, prefix: &str) -> Vec<Vec<String>> {
    (0..num_topics)
        .map(|t| (0..words_per_topic).map(|i| format!("{prefix}{}w{i}", letter(t))).collect())
        .collect()
}

fn letter(t: usize) -> char {
    (b'a' + (t % 26) as u8) as char
}

/// One sentence of `len` words drawn from `vocab`, capitalized and ending in
/// a period.
pub fn sentence<R: Rng>(rng: &mut R, vocab: &[String], len: usize) -> String {
    let mut s = String::new();
    for i in 0..len {
        let w = vocab.choose(rng).expect("nonempty vocabulary");
        if i == 0 {
            let mut cs = w.chars();
            if let Some(c) = cs.next() {
                s.extend(c.to_uppercase());
                s.push_str(cs.as_str());
            }
        } else {
            s.push(' ');
            s.push_str(w);
        }
    }
    s.push('.');
    s
}

/// A document whose first `first` sentences come from topic `a` and the
/// remaining `total - first` from topic `b`. The true boundary is sentence
/// gap `first`.
pub fn two_topic_document<R: Rng>(
    rng: &mut R,
    vocabs: &[Vec<String>],
    a: usize,
    b: usize,
    first: usize,
    total: usize,
    words_per_sentence: usize,
) -> String {
    let sentences: Vec<String> = (0..total)
        .map(|i| sentence(rng, &vocabs[if i < first { a } else { b }], words_per_sentence))
        .collect();
    sentences.join(" ")
}

/// Labeled document produced by [`planted_corpus`].
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedDoc {
    pub text: String,
    pub high: bool,
}

const GENERIC_LOW: &[&str] = &[
    "bad", "awful", "hate", "terrible", "worst", "stuff", "thing", "really", "so", "very", "just", "ugh",
    "horrible", "junk", "lame", "meh",
];

const NEUTRAL_CONNECTIVES: &[&str] = &["the", "and", "with", "which", "for", "its", "this", "that", "has", "offers"];

/// Corpus with a planted quality rule. High documents cover three topics,
/// four long topical sentences each; low documents are a few short,
/// emotional sentences about a single topic. Segment-level quality follows
/// the same rule: every segment of a high document is long and topical,
/// every segment of a low document short and emotional.
pub fn planted_corpus<R: Rng>(rng: &mut R, vocabs: &[Vec<String>], num_docs: usize) -> Vec<PlantedDoc> {
    (0..num_docs)
        .map(|i| {
            let high = i % 2 == 0;
            let text = if high { planted_high(rng, vocabs) } else { planted_low(rng, vocabs) };
            PlantedDoc { text, high }
        })
        .collect()
}

pub fn planted_high<R: Rng>(rng: &mut R, vocabs: &[Vec<String>]) -> String {
    let mut topics: Vec<usize> = (0..vocabs.len()).collect();
    topics.shuffle(rng);
    let mut sentences = Vec::new();
    for &t in topics.iter().take(3) {
        for _ in 0..4 {
            let len = rng.gen_range(12..18);
            let mut words = Vec::with_capacity(len);
            for j in 0..len {
                let w = if j % 3 == 2 {
                    NEUTRAL_CONNECTIVES.choose(rng).copied().unwrap_or("the")
                } else {
                    vocabs[t].choose(rng).map(String::as_str).unwrap_or("x")
                };
                words.push(w);
            }
            sentences.push(capitalize_sentence(&words, '.'));
        }
    }
    sentences.join(" ")
}

pub fn planted_low<R: Rng>(rng: &mut R, vocabs: &[Vec<String>]) -> String {
    let t = rng.gen_range(0..vocabs.len());
    let n = rng.gen_range(3..6);
    let mut sentences = Vec::new();
    for _ in 0..n {
        let len = rng.gen_range(4..7);
        let mut words = Vec::with_capacity(len);
        for j in 0..len {
            let w = if j % 2 == 0 {
                GENERIC_LOW.choose(rng).copied().unwrap_or("bad")
            } else {
                vocabs[t].choose(rng).map(String::as_str).unwrap_or("x")
            };
            words.push(w);
        }
        sentences.push(capitalize_sentence(&words, '!'));
    }
    sentences.join(" ")
}

fn capitalize_sentence(words: &[&str], end: char) -> String {
    let mut s = String::new();
    for (i, w) in words.iter().enumerate() {
        if i == 0 {
            let mut cs = w.chars();
            if let Some(c) = cs.next() {
                s.extend(c.to_uppercase());
                s.push_str(cs.as_str());
            }
        } else {
            s.push(' ');
            s.push_str(w);
        }
    }
    s.push(end);
    s
}
