//! Text feature library: length, topic, subjectivity, readability and
//! similarity measures, plus the resources they are computed against.
//!
//! Features are produced as raw values in catalog order; a fitted
//! [`FeatureSchema`] maps them to the unit cube.

mod apriori;
mod lexicon;
mod readability;
mod tfidf;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use apriori::{mine_jargon, TermSet};
pub use lexicon::{subjectivity_scores, LexEntry, Lexicon, SubjectivityScores, FIRST_PERSON};
pub use readability::{readability_from_counts, readability_scores, syllables, text_counts, ReadabilityScores, TextCounts};
pub use tfidf::{tfidf_similarity, Idf, TfIdfProfile};

use crate::forest::{FeatureCategory, FeatureSchema, FeatureVector};
use crate::segment::{fit_lda, LdaModel, LdaParams, SegmentError};
use crate::text::{content_tokens, is_stopword, sentence_spans, word_spans};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FeatureError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("lexicon: {0}")]
    Lexicon(String),
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("unknown extractor `{0}`")]
    UnknownExtractor(String),
    #[error("training corpus needs at least one high and one low document")]
    MissingClass,
    #[error(transparent)]
    Segment(#[from] SegmentError),
}

use FeatureCategory::{Informativeness as Inf, Readability as Rd, Similarity as Sim, Subjectivity as Subj, Topic as Top};

/// Every built-in feature, in extraction order.
pub const CATALOG: &[(&str, FeatureCategory)] = &[
    ("word_count", Inf),
    ("sentence_count", Inf),
    ("char_count", Inf),
    ("unique_word_count", Inf),
    ("jargon_hits", Inf),
    ("jargon_set_hits", Inf),
    ("jargon_ratio", Inf),
    ("capitalized_run_count", Inf),
    ("topic_entropy", Top),
    ("top_topic_prob", Top),
    ("second_topic_prob", Top),
    ("topic_coverage", Top),
    ("prevalent_topic_mass", Top),
    ("mean_valence", Subj),
    ("abs_valence", Subj),
    ("polarity_spread", Subj),
    ("lexicon_coverage", Subj),
    ("positive_ratio", Subj),
    ("negative_ratio", Subj),
    ("upper_case_ratio", Subj),
    ("first_person_ratio", Subj),
    ("exclamation_ratio", Subj),
    ("adjective_surrogate_ratio", Subj),
    ("social_ratio", Subj),
    ("inclusive_ratio", Subj),
    ("ari", Rd),
    ("coleman_liau", Rd),
    ("flesch_reading_ease", Rd),
    ("gunning_fog", Rd),
    ("smog", Rd),
    ("mean_sentence_length", Rd),
    ("mean_word_length", Rd),
    ("long_word_ratio", Rd),
    ("lexical_diversity", Rd),
    ("function_word_ratio", Rd),
    ("punctuation_ratio", Rd),
    ("tfidf_sim_high", Sim),
    ("tfidf_sim_low", Sim),
    ("top_terms_overlap_high", Sim),
    ("top_terms_overlap_low", Sim),
];

pub fn catalog_index(name: &str) -> Option<usize> {
    CATALOG.iter().position(|(n, _)| *n == name)
}

/// `(name, category)` pairs for [`FeatureSchema::fit`].
pub fn catalog_entries() -> Vec<(String, FeatureCategory)> {
    CATALOG.iter().map(|&(n, c)| (String::from(n), c)).collect()
}

/// Topic-probability floor above which a topic counts as covered.
const TOPIC_PRESENT: f64 = 0.1;

/// Corpus-derived state the extractors read. Built once per training run,
/// immutable afterwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FeatureResources {
    pub jargon_sets: Vec<TermSet>,
    pub lda: LdaModel,
    pub idf: Idf,
    pub high_sample: TfIdfProfile,
    pub low_sample: TfIdfProfile,
    pub high_top_terms: Vec<String>,
    pub low_top_terms: Vec<String>,
    pub lexicon: Lexicon,
    /// Topics with the most mass in the high-quality sample, descending.
    pub preferred_topics: Vec<usize>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ResourceParams {
    pub lda: LdaParams,
    pub min_support: f64,
    pub max_set_size: usize,
    /// Documents drawn per class for the TF-IDF profiles and jargon mining.
    pub sample_size: usize,
    pub top_terms: usize,
    pub preferred_topics: usize,
    pub seed: u64,
}

impl Default for ResourceParams {
    fn default() -> Self {
        Self {
            lda: LdaParams::default(),
            min_support: 0.1,
            max_set_size: 2,
            sample_size: 200,
            top_terms: 20,
            preferred_topics: 5,
            seed: 23,
        }
    }
}

fn sample_indices(n: usize, take: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.truncate(take);
    idx.sort_unstable();
    idx
}

/// Builds all resources from `(text, is_high_quality)` training documents.
/// LDA is fit on every document; jargon, profiles and preferred topics come
/// from seeded per-class samples.
pub fn build_resources(
    docs: &[(&str, bool)],
    lexicon: Lexicon,
    params: &ResourceParams,
) -> Result<FeatureResources, FeatureError> {
    let tokenized: Vec<Vec<String>> = docs.iter().map(|(t, _)| content_tokens(t)).collect();
    let high: Vec<usize> = (0..docs.len()).filter(|&i| docs[i].1).collect();
    let low: Vec<usize> = (0..docs.len()).filter(|&i| !docs[i].1).collect();
    if high.is_empty() || low.is_empty() {
        return Err(FeatureError::MissingClass);
    }
    let lda = fit_lda(&tokenized, &params.lda)?;
    let idf = Idf::fit(&tokenized);

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let high_pick: Vec<usize> = sample_indices(high.len(), params.sample_size, &mut rng).into_iter().map(|i| high[i]).collect();
    let low_pick: Vec<usize> = sample_indices(low.len(), params.sample_size, &mut rng).into_iter().map(|i| low[i]).collect();
    let high_docs: Vec<Vec<String>> = high_pick.iter().map(|&i| tokenized[i].clone()).collect();
    let low_docs: Vec<Vec<String>> = low_pick.iter().map(|&i| tokenized[i].clone()).collect();

    let jargon_sets = mine_jargon(&high_docs, params.min_support, params.max_set_size)?;
    let high_sample = TfIdfProfile::build(&high_docs, &idf);
    let low_sample = TfIdfProfile::build(&low_docs, &idf);

    let mut mass = alloc::vec![0.0; lda.k];
    for d in &high_docs {
        for (m, p) in mass.iter_mut().zip(lda.infer_topic_dist(d)) {
            *m += p;
        }
    }
    let mut preferred: Vec<usize> = (0..lda.k).collect();
    preferred.sort_by(|&a, &b| mass[b].total_cmp(&mass[a]).then(a.cmp(&b)));
    preferred.truncate(params.preferred_topics.min(lda.k));

    Ok(FeatureResources {
        jargon_sets,
        high_top_terms: high_sample.top_terms(params.top_terms),
        low_top_terms: low_sample.top_terms(params.top_terms),
        lda,
        idf,
        high_sample,
        low_sample,
        lexicon,
        preferred_topics: preferred,
        seed: params.seed,
    })
}

impl FeatureResources {
    /// Frequent single terms by descending support, ties alphabetical.
    pub fn frequent_terms(&self) -> Vec<&str> {
        let mut singles: Vec<&TermSet> = self.jargon_sets.iter().filter(|s| s.terms.len() == 1).collect();
        singles.sort_by(|a, b| b.support.total_cmp(&a.support).then_with(|| a.terms.cmp(&b.terms)));
        singles.into_iter().map(|s| s.terms[0].as_str()).collect()
    }

    /// Label of a topic: its three most probable terms joined by `/`.
    pub fn topic_label(&self, topic: usize) -> String {
        self.lda.top_terms(topic, 3).join("/")
    }
}

fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * libm::log(x)).sum::<f64>()
}

/// Counts runs of consecutive capitalized words that do not open a
/// sentence; a rough stand-in for named-entity mentions.
fn capitalized_runs(text: &str) -> usize {
    let sentence_starts: Vec<usize> = sentence_spans(text)
        .iter()
        .filter_map(|r| word_spans(&text[r.clone()]).first().map(|w| r.start + w.start))
        .collect();
    let mut runs = 0;
    let mut in_run = false;
    for w in word_spans(text) {
        let cap = text[w.clone()].chars().next().is_some_and(char::is_uppercase);
        let opener = sentence_starts.binary_search(&w.start).is_ok();
        if cap && !opener {
            if !in_run {
                runs += 1;
            }
            in_run = true;
        } else {
            in_run = false;
        }
    }
    runs
}

/// Raw values of every catalog feature, in catalog order.
pub fn extract_all(text: &str, res: &FeatureResources) -> Vec<f64> {
    let toks = crate::text::tokens(text);
    let content = content_tokens(text);
    let counts = text_counts(text);
    let words = counts.words as f64;
    let per_word = |c: usize| if counts.words == 0 { 0.0 } else { c as f64 / words };

    let mut distinct: Vec<&str> = toks.iter().map(String::as_str).collect();
    distinct.sort_unstable();
    distinct.dedup();
    let has = |t: &str| distinct.binary_search(&t).is_ok();

    let singles: Vec<&str> = res.jargon_sets.iter().filter(|s| s.terms.len() == 1).map(|s| s.terms[0].as_str()).collect();
    let jargon_hits = singles.iter().filter(|t| has(t)).count();
    let jargon_set_hits = res
        .jargon_sets
        .iter()
        .filter(|s| s.terms.len() > 1 && s.terms.iter().all(|t| has(t)))
        .count();
    let jargon_tokens = toks.iter().filter(|t| singles.contains(&t.as_str())).count();

    let theta = res.lda.infer_topic_dist(&content);
    let mut sorted = theta.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let prevalent: f64 = res.preferred_topics.iter().map(|&t| theta[t]).sum();

    let subj = subjectivity_scores(text, &res.lexicon);
    let read = readability_from_counts(&counts);

    let long_words = word_spans(text).into_iter().filter(|r| text[r.clone()].chars().count() >= 7).count();
    let function_words = toks.iter().filter(|t| is_stopword(t)).count();
    let visible = text.chars().filter(|c| !c.is_whitespace()).count();
    let punct = text.chars().filter(|c| !c.is_whitespace() && !c.is_alphanumeric()).count();

    let overlap = |terms: &[String]| {
        if terms.is_empty() {
            0.0
        } else {
            terms.iter().filter(|t| has(t)).count() as f64 / terms.len() as f64
        }
    };

    let out = alloc::vec![
        words,
        counts.sentences as f64,
        text.chars().count() as f64,
        distinct.len() as f64,
        jargon_hits as f64,
        jargon_set_hits as f64,
        per_word(jargon_tokens),
        capitalized_runs(text) as f64,
        entropy(&theta),
        sorted.first().copied().unwrap_or(0.0),
        sorted.get(1).copied().unwrap_or(0.0),
        theta.iter().filter(|&&p| p >= TOPIC_PRESENT).count() as f64,
        prevalent,
        subj.mean_valence,
        subj.abs_valence,
        subj.polarity_spread,
        subj.coverage,
        subj.positive_ratio,
        subj.negative_ratio,
        subj.upper_case_ratio,
        subj.first_person_ratio,
        subj.exclamation_ratio,
        subj.adjective_surrogate_ratio,
        subj.social_ratio,
        subj.inclusive_ratio,
        read.ari,
        read.coleman_liau,
        read.flesch_reading_ease,
        read.gunning_fog,
        read.smog,
        if counts.sentences == 0 { 0.0 } else { words / counts.sentences as f64 },
        per_word(counts.letters),
        per_word(long_words),
        per_word(distinct.len()),
        per_word(function_words),
        if visible == 0 { 0.0 } else { punct as f64 / visible as f64 },
        tfidf_similarity(&content, &res.high_sample, &res.idf),
        tfidf_similarity(&content, &res.low_sample, &res.idf),
        overlap(&res.high_top_terms),
        overlap(&res.low_top_terms),
    ];
    debug_assert_eq!(out.len(), CATALOG.len());
    out
}

/// Raw feature vector of `text` in `schema` order. Every schema feature
/// must name a catalog feature.
pub fn extract_features(text: &str, res: &FeatureResources, schema: &FeatureSchema) -> Result<FeatureVector, FeatureError> {
    let idx = schema_indices(schema)?;
    let all = extract_all(text, res);
    Ok(FeatureVector(idx.into_iter().map(|i| all[i]).collect()))
}

/// Catalog index of every schema feature.
pub fn schema_indices(schema: &FeatureSchema) -> Result<Vec<usize>, FeatureError> {
    schema
        .features()
        .iter()
        .map(|f| catalog_index(&f.name).ok_or_else(|| FeatureError::UnknownFeature(f.name.clone())))
        .collect()
}

/// Schema over the full catalog with raw ranges fitted to `rows`.
pub fn fit_schema(rows: &[Vec<f64>]) -> Result<FeatureSchema, FeatureError> {
    FeatureSchema::fit(&catalog_entries(), rows).map_err(|e| FeatureError::InvalidParams(format!("{e}")))
}

/// A `CREATE FEATURE TABLE` declaration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FeatureTableDef {
    pub name: String,
    pub key_attribute: String,
    pub entries: Vec<FeatureEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FeatureEntry {
    pub feature_name: String,
    pub extractor_id: String,
}

/// Extractor ids and the catalog features each one yields. Every catalog
/// name is an extractor of itself; group extractors cover a category or a
/// family of related measures.
pub fn extractor_registry() -> BTreeMap<String, Vec<&'static str>> {
    let mut reg: BTreeMap<String, Vec<&'static str>> = BTreeMap::new();
    for &(name, _) in CATALOG {
        reg.insert(String::from(name), alloc::vec![name]);
    }
    let groups: [(&str, FeatureCategory); 5] = [
        ("informativeness_extractor", Inf),
        ("topic_extractor", Top),
        ("subjectivity_extractor", Subj),
        ("readability_extractor", Rd),
        ("similarity_extractor", Sim),
    ];
    for (id, cat) in groups {
        reg.insert(String::from(id), CATALOG.iter().filter(|(_, c)| *c == cat).map(|(n, _)| *n).collect());
    }
    reg.insert("len_extractor".into(), alloc::vec!["word_count", "sentence_count", "char_count"]);
    reg.insert("jargon_extractor".into(), alloc::vec!["jargon_hits", "jargon_set_hits", "jargon_ratio"]);
    reg.insert("friendliness_extractor".into(), alloc::vec!["social_ratio", "inclusive_ratio", "mean_valence"]);
    reg
}

impl FeatureTableDef {
    /// Resolves every entry's extractor to catalog feature names.
    pub fn resolve(&self) -> Result<Vec<(String, Vec<&'static str>)>, FeatureError> {
        let reg = extractor_registry();
        self.entries
            .iter()
            .map(|e| {
                reg.get(&e.extractor_id)
                    .map(|v| (e.feature_name.clone(), v.clone()))
                    .ok_or_else(|| FeatureError::UnknownExtractor(e.extractor_id.clone()))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{planted_corpus, topic_vocabularies};
    use alloc::vec;

    fn resources() -> FeatureResources {
        let vocabs = topic_vocabularies(4, 20, "t");
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let corpus = planted_corpus(&mut rng, &vocabs, 40);
        let docs: Vec<(&str, bool)> = corpus.iter().map(|d| (d.text.as_str(), d.high)).collect();
        let params = ResourceParams { lda: LdaParams { k: 4, iterations: 30, ..LdaParams::default() }, ..ResourceParams::default() };
        build_resources(&docs, Lexicon::builtin(), &params).unwrap()
    }

    #[test]
    fn catalog_names_unique() {
        let mut names: Vec<&str> = CATALOG.iter().map(|(n, _)| *n).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), CATALOG.len());
    }

    #[test]
    fn empty_text_has_zero_counts() {
        let r = resources();
        let v = extract_all("", &r);
        for name in ["word_count", "sentence_count", "char_count", "unique_word_count", "jargon_hits", "ari", "smog"] {
            assert_eq!(v[catalog_index(name).unwrap()], 0.0, "{name}");
        }
        // unknown text folds to the uniform topic mixture
        let k = r.lda.k as f64;
        assert!((v[catalog_index("topic_entropy").unwrap()] - libm::log(k)).abs() < 1e-12);
    }

    #[test]
    fn deterministic_extraction() {
        let r = resources();
        let t = "The tAw1 tbw2 was great. I think we loved it!";
        assert_eq!(extract_all(t, &r), extract_all(t, &r));
    }

    #[test]
    fn schema_subset_and_unknown_names() {
        let r = resources();
        let schema = FeatureSchema::unit(vec!["smog".into(), "word_count".into()]);
        let v = extract_features("One two three.", &r, &schema).unwrap();
        assert_eq!(v.0[1], 3.0);
        let bad = FeatureSchema::unit(vec!["nope".into()]);
        assert_eq!(extract_features("x", &r, &bad).unwrap_err(), FeatureError::UnknownFeature("nope".into()));
    }

    #[test]
    fn capitalized_runs_skip_sentence_openers() {
        assert_eq!(capitalized_runs("We met New York Times staff. Then Paris."), 2);
        assert_eq!(capitalized_runs("Hello world."), 0);
    }

    #[test]
    fn feature_table_resolution() {
        let t = FeatureTableDef {
            name: "review_feats".into(),
            key_attribute: "review".into(),
            entries: vec![
                FeatureEntry { feature_name: "topics".into(), extractor_id: "topic_extractor".into() },
                FeatureEntry { feature_name: "len".into(), extractor_id: "len_extractor".into() },
            ],
        };
        let r = t.resolve().unwrap();
        assert_eq!(r[0].1.len(), 5);
        let mut bad = t.clone();
        bad.entries[1].extractor_id = "len_extracton".into();
        assert!(bad.resolve().is_err());
    }

    #[test]
    fn resources_need_both_classes() {
        let docs = [("a text here", true)];
        assert_eq!(build_resources(&docs, Lexicon::builtin(), &ResourceParams::default()).unwrap_err(), FeatureError::MissingClass);
    }
}
