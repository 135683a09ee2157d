//! Synthetic experiment suites shared by the CLI and the acceptance tests.

use prehoc_core::oracle::{agreement, exact_max_influence, oracle_responsibility, perturbation_impact, OracleError, OracleLimits};
use prehoc_core::segment::{
    benchmark_segmenters, fit_lda, BenchmarkReport, LdaModel, LdaParams, SegmentError, Segmentation, Segmenter, TilingParams,
    TopicTiler,
};
use prehoc_core::synth::{planted_corpus, planted_high, planted_low, random_forest, random_low_point, topic_vocabularies, two_topic_document};
use prehoc_core::tcruise::{ImpactConfig, TCruise, TcruiseError};
use prehoc_core::text::{content_tokens, sentence_spans};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{GoldDoc, LabeledDoc, Split};
use crate::pipeline::{wordy_segments, PipelineError, ReadyBundle};

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Tcruise(#[from] TcruiseError),
    #[error(transparent)]
    Segment(#[from] SegmentError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DominanceSummary {
    /// Retained TCruise perturbations compared.
    pub checked: usize,
    pub violations: usize,
    /// Largest `impact(p) - exact_max_influence(supp p)`; at most 0 when
    /// dominance holds.
    pub max_excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScanSummary {
    pub violations: usize,
    pub max_impact_evaluations: usize,
    pub max_improving_paths: usize,
}

/// Heuristic-versus-oracle comparison on random two-tree forests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OracleReport {
    pub instances: usize,
    pub top1_agreement: f64,
    pub mean_rank_correlation: f64,
    pub correlated_instances: usize,
    pub dominance: DominanceSummary,
    pub linear_scan: ScanSummary,
    pub seed: u64,
}

pub const ORACLE_FEATURES: usize = 4;
pub const ORACLE_DEPTH: usize = 3;
pub const ORACLE_TREES: usize = 2;

/// Draws `instances` random forests, each with a low-utility point, and
/// compares TCruise against the exact oracle. Each retained TCruise
/// perturbation is scored under the oracle's impact definition and must not
/// beat the oracle's optimum over the same feature subset.
pub fn oracle_report(instances: usize, seed: u64) -> Result<OracleReport, SuiteError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = ImpactConfig::default();
    let limits = OracleLimits::default();
    let mut pairs = Vec::with_capacity(instances);
    let mut dom = DominanceSummary { checked: 0, violations: 0, max_excess: f64::NEG_INFINITY };
    let mut scan = ScanSummary { violations: 0, max_impact_evaluations: 0, max_improving_paths: 0 };
    while pairs.len() < instances {
        let model = random_forest(&mut rng, ORACLE_FEATURES, ORACLE_DEPTH, ORACLE_TREES);
        let Some(d) = random_low_point(&mut rng, &model, 200) else { continue };
        let scanner = TCruise::new(&model, cfg);
        let (h, stats) = scanner.responsibility_with_stats(&d)?;
        if stats.impact_evaluations > stats.improving_paths {
            scan.violations += 1;
        }
        scan.max_impact_evaluations = scan.max_impact_evaluations.max(stats.impact_evaluations);
        scan.max_improving_paths = scan.max_improving_paths.max(stats.improving_paths);
        let (retained, _) = scanner.retained_paths(&d)?;
        for r in &retained {
            let mine = perturbation_impact(&d, &r.perturbation, &model)?;
            let best = exact_max_influence(&d, &r.perturbation.features(), &model, &cfg, &limits)?;
            let excess = mine - best.impact;
            dom.checked += 1;
            dom.max_excess = dom.max_excess.max(excess);
            if excess > 1e-9 {
                dom.violations += 1;
            }
        }
        let o = oracle_responsibility(&d, &model, &cfg, &limits)?;
        pairs.push((h, o));
    }
    if dom.checked == 0 {
        dom.max_excess = 0.0;
    }
    let a = agreement(&pairs);
    Ok(OracleReport {
        instances: a.instances,
        top1_agreement: a.top1_agreement,
        mean_rank_correlation: a.mean_rank_correlation,
        correlated_instances: a.correlated_instances,
        dominance: dom,
        linear_scan: scan,
        seed,
    })
}

/// Vocabulary of the planted-quality corpus: four disjoint topics.
pub fn planted_vocabularies() -> Vec<Vec<String>> {
    topic_vocabularies(4, 20, "t")
}

/// Planted-quality corpus as labeled documents, alternating high and low.
pub fn planted_labeled(num_docs: usize, seed: u64, split: Split) -> Vec<LabeledDoc> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    planted_corpus(&mut rng, &planted_vocabularies(), num_docs)
        .into_iter()
        .map(|d| {
            let mut doc = LabeledDoc::new(d.text, d.high);
            doc.split = split;
            doc
        })
        .collect()
}

/// Feature table over topic and subjectivity features with one feedback
/// function bound to each.
pub const TOPIC_TONE_DDL: &str = include_str!("../fixtures/topic_tone.ddl");

/// Corpus whose low class has two separate causes: short emotional
/// documents that range over every topic, and documents written like high
/// ones but about a single topic.
pub fn mixed_low_labeled(num_docs: usize, seed: u64) -> Vec<LabeledDoc> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocabs = planted_vocabularies();
    let merged = vec![vocabs.concat()];
    (0..num_docs)
        .map(|i| match i % 4 {
            0 | 2 => LabeledDoc::new(planted_high(&mut rng, &vocabs), true),
            1 => LabeledDoc::new(planted_low(&mut rng, &merged), false),
            _ => LabeledDoc::new(single_topic_text(&mut rng, &vocabs, i / 4 % vocabs.len()), false),
        })
        .collect()
}

/// Twelve long neutral sentences about topic `t` only.
pub fn single_topic_text<R: Rng>(rng: &mut R, vocabs: &[Vec<String>], t: usize) -> String {
    planted_high(rng, &vec![vocabs[t].clone(); 3])
}

/// Fraction of segments of `docs` whose segment-model label equals their
/// document's label.
pub fn segment_accuracy(bundle: &ReadyBundle, docs: &[LabeledDoc]) -> Result<(f64, usize), SuiteError> {
    let b = &bundle.bundle;
    let mut hit = 0;
    let mut total = 0;
    for d in docs {
        for s in wordy_segments(&d.text, &b.resources, &b.config.tiling) {
            let label = bundle.segment_label(&s.text)?;
            total += 1;
            if label == d.label {
                hit += 1;
            }
        }
    }
    Ok((if total == 0 { 0.0 } else { hit as f64 / total as f64 }, total))
}

/// Two-topic documents with disjoint vocabularies and a known boundary,
/// plus an LDA model fit on a separate sample from the same topics.
pub struct TwoTopicSuite {
    pub model: LdaModel,
    pub gold: Vec<GoldDoc>,
}

pub const TWO_TOPIC_SENTENCES: usize = 10;

pub fn two_topic_suite(num_docs: usize, seed: u64) -> Result<TwoTopicSuite, SuiteError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocabs = topic_vocabularies(4, 25, "s");
    let mut training = Vec::new();
    for _ in 0..120 {
        let t = rng.gen_range(0..vocabs.len());
        training.push(content_tokens(&two_topic_document(&mut rng, &vocabs, t, t, 6, 6, 8)));
    }
    let model = fit_lda(&training, &LdaParams { k: 4, iterations: 150, seed, ..LdaParams::default() })?;
    let gold = (0..num_docs)
        .map(|_| {
            let a = rng.gen_range(0..vocabs.len());
            let b = (a + rng.gen_range(1..vocabs.len())) % vocabs.len();
            let first = rng.gen_range(3..=7);
            let text = two_topic_document(&mut rng, &vocabs, a, b, first, TWO_TOPIC_SENTENCES, 8);
            GoldDoc { text, boundaries: vec![first] }
        })
        .collect();
    Ok(TwoTopicSuite { model, gold })
}

/// `true` when `hyp` has exactly one boundary within one sentence of the
/// gold boundary.
pub fn recovers(gold: &Segmentation, hyp: &Segmentation) -> bool {
    match (gold.boundaries.as_slice(), hyp.boundaries.as_slice()) {
        ([g], [h]) => g.abs_diff(*h) <= 1,
        _ => false,
    }
}

/// Baseline that never places a boundary.
pub struct NoBoundaries;

impl Segmenter for NoBoundaries {
    fn name(&self) -> &str {
        "none"
    }

    fn boundaries(&self, _text: &str) -> Segmentation {
        Segmentation::default()
    }
}

/// Baseline cutting every document into `segments` equal runs of sentences.
pub struct EvenSplit {
    pub name: String,
    pub segments: usize,
}

impl Segmenter for EvenSplit {
    fn name(&self) -> &str {
        &self.name
    }

    fn boundaries(&self, text: &str) -> Segmentation {
        let n = sentence_spans(text).len();
        let mut b: Vec<usize> = (1..self.segments).map(|i| i * n / self.segments).filter(|&g| g > 0 && g < n).collect();
        b.dedup();
        Segmentation { boundaries: b }
    }
}

/// Ranks TopicTiling at each window size against the two baselines.
pub fn bench_segment(gold: &[GoldDoc], model: &LdaModel, windows: &[usize]) -> Result<BenchmarkReport, SuiteError> {
    let tilers: Vec<TopicTiler<'_>> = windows
        .iter()
        .map(|&w| TopicTiler {
            name: format!("topictiling-w{w}"),
            model,
            params: TilingParams { window: w, ..TilingParams::default() },
        })
        .collect();
    let even = EvenSplit { name: "even-2".into(), segments: 2 };
    let mut all: Vec<&dyn Segmenter> = tilers.iter().map(|t| t as &dyn Segmenter).collect();
    all.push(&NoBoundaries);
    all.push(&even);
    let pairs: Vec<(String, Segmentation)> = gold.iter().map(|g| (g.text.clone(), g.segmentation())).collect();
    Ok(benchmark_segmenters(&all, &pairs)?)
}
