//! Feature explanation functions: bind feature subsets to feedback
//! generators, rank them by normalized responsibility, and assemble the
//! feedback report for a document and its segments.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::features::FeatureResources;
use crate::forest::{FeatureCategory, FeatureSchema};
use crate::text::tokens;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FefError {
    #[error("feature `{0}` is not in the schema")]
    UnknownFeature(String),
    #[error("explanation function `{0}` binds no features")]
    EmptyBinding(String),
    #[error("duplicate explanation function id {0}")]
    DuplicateId(u32),
    #[error("feature index {0} is outside the schema")]
    FeatureOutOfRange(usize),
    #[error("unknown explanation function `{0}`")]
    UnknownGenerator(String),
    #[error("generator failed: {0}")]
    Generator(String),
}

pub type FefId = u32;

pub const NOT_ENOUGH_DETAIL: FefId = 1;
pub const OFF_TOPIC: FefId = 2;
pub const READABILITY: FefId = 3;
pub const SUBJECTIVITY: FefId = 4;
pub const FRIENDLINESS: FefId = 5;

/// What a generator may look at: the scope's text and raw features, the
/// bound feature indices, and the corpus resources.
pub struct FefContext<'a> {
    pub text: &'a str,
    pub raw: &'a [f64],
    pub bound: &'a [usize],
    pub schema: &'a FeatureSchema,
    pub resources: &'a FeatureResources,
}

impl FefContext<'_> {
    pub fn raw_value(&self, name: &str) -> Option<f64> {
        self.schema.index_of(name).and_then(|i| self.raw.get(i).copied())
    }

    pub fn bound_values(&self) -> Vec<f64> {
        self.bound.iter().filter_map(|&i| self.raw.get(i).copied()).collect()
    }
}

/// A deterministic feedback generator. `Ok(None)` means the function has
/// nothing to say for this input.
pub trait FeedbackGenerator: Send + Sync {
    fn generate(&self, ctx: &FefContext<'_>) -> Result<Option<String>, FefError>;
}

/// Fixed prescriptive sentence.
pub struct StaticFeedback(pub &'static str);

impl FeedbackGenerator for StaticFeedback {
    fn generate(&self, _: &FefContext<'_>) -> Result<Option<String>, FefError> {
        Ok(Some(String::from(self.0)))
    }
}

/// Suggests frequent high-quality terms missing from short texts with few
/// domain terms.
pub struct NotEnoughDetail {
    pub max_jargon_hits: f64,
    pub max_words: f64,
    pub suggestions: usize,
}

impl Default for NotEnoughDetail {
    fn default() -> Self {
        Self { max_jargon_hits: 10.0, max_words: 150.0, suggestions: 5 }
    }
}

impl FeedbackGenerator for NotEnoughDetail {
    fn generate(&self, ctx: &FefContext<'_>) -> Result<Option<String>, FefError> {
        let hits = ctx.raw_value("jargon_hits").ok_or_else(|| FefError::UnknownFeature("jargon_hits".into()))?;
        let len = ctx.raw_value("word_count").ok_or_else(|| FefError::UnknownFeature("word_count".into()))?;
        if !(hits < self.max_jargon_hits && len < self.max_words) {
            return Ok(None);
        }
        let present: BTreeSet<String> = tokens(ctx.text).into_iter().collect();
        let mut picks: Vec<&str> = ctx
            .resources
            .frequent_terms()
            .into_iter()
            .filter(|t| !present.contains(*t))
            .take(self.suggestions)
            .collect();
        if picks.is_empty() {
            picks = ctx.resources.high_top_terms.iter().map(String::as_str).filter(|t| !present.contains(*t)).take(self.suggestions).collect();
        }
        if picks.is_empty() {
            return Ok(None);
        }
        Ok(Some(format!("Try adding information about: {}", picks.join(", "))))
    }
}

/// Suggests the corpus's preferred topics that the text barely covers.
pub struct OffTopic {
    pub max_topics: usize,
    pub present_at: f64,
}

impl Default for OffTopic {
    fn default() -> Self {
        Self { max_topics: 5, present_at: 0.1 }
    }
}

impl FeedbackGenerator for OffTopic {
    fn generate(&self, ctx: &FefContext<'_>) -> Result<Option<String>, FefError> {
        let lda = &ctx.resources.lda;
        let theta = lda.infer_topic_dist(&crate::text::content_tokens(ctx.text));
        let covered = theta.iter().filter(|&&p| p >= self.present_at).count();
        if covered >= self.max_topics {
            return Ok(None);
        }
        let labels: Vec<String> = ctx
            .resources
            .preferred_topics
            .iter()
            .filter(|&&t| theta.get(t).is_some_and(|&p| p < self.present_at))
            .take(self.max_topics)
            .map(|&t| ctx.resources.topic_label(t))
            .collect();
        if labels.is_empty() {
            return Ok(None);
        }
        Ok(Some(format!("Try discussing some of these topics: {}", labels.join(", "))))
    }
}

pub const SUBJECTIVITY_TEXT: &str = "Please make your writing more balanced and neutral";
pub const FRIENDLINESS_TEXT: &str = "Try writing in a friendlier, more inclusive tone";
pub const READABILITY_TEXT: &str = "Try using shorter sentences and simpler words";

#[derive(Clone)]
pub struct Fef {
    pub id: FefId,
    pub name: String,
    pub bound: Vec<usize>,
    pub generator: Arc<dyn FeedbackGenerator>,
}

impl fmt::Debug for Fef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fef").field("id", &self.id).field("name", &self.name).field("bound", &self.bound).finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Reviews,
    Profiles,
}

#[derive(Debug, Clone)]
pub struct FefRegistry {
    pub id: String,
    fefs: Vec<Fef>,
    num_features: usize,
}

impl FefRegistry {
    pub fn new(id: impl Into<String>, num_features: usize) -> Self {
        Self { id: id.into(), fefs: Vec::new(), num_features }
    }

    /// Adds a function; bound indices are sorted and deduplicated.
    pub fn register(&mut self, mut fef: Fef) -> Result<(), FefError> {
        fef.bound.sort_unstable();
        fef.bound.dedup();
        if fef.bound.is_empty() {
            return Err(FefError::EmptyBinding(fef.name));
        }
        if let Some(&i) = fef.bound.iter().find(|&&i| i >= self.num_features) {
            return Err(FefError::FeatureOutOfRange(i));
        }
        if self.fefs.iter().any(|f| f.id == fef.id) {
            return Err(FefError::DuplicateId(fef.id));
        }
        self.fefs.push(fef);
        self.fefs.sort_by_key(|f| f.id);
        Ok(())
    }

    pub fn fefs(&self) -> &[Fef] {
        &self.fefs
    }

    pub fn get(&self, id: FefId) -> Option<&Fef> {
        self.fefs.iter().find(|f| f.id == id)
    }

    pub fn len(&self) -> usize {
        self.fefs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fefs.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn binding_matrix(&self) -> FefBindingMatrix {
        let rows = self
            .fefs
            .iter()
            .map(|f| {
                let mut row = alloc::vec![0u8; self.num_features];
                for &i in &f.bound {
                    row[i] = 1;
                }
                row
            })
            .collect();
        FefBindingMatrix { ids: self.fefs.iter().map(|f| f.id).collect(), rows }
    }
}

fn indices(schema: &FeatureSchema, names: &[&str]) -> Result<Vec<usize>, FefError> {
    names.iter().map(|n| schema.index_of(n).ok_or_else(|| FefError::UnknownFeature(String::from(*n)))).collect()
}

fn category(schema: &FeatureSchema, c: FeatureCategory) -> Vec<usize> {
    schema.indices_in(c)
}

/// Features the friendliness function binds.
pub const FRIENDLINESS_FEATURES: &[&str] = &["social_ratio", "inclusive_ratio", "positive_ratio", "first_person_ratio"];

/// Built-in generator for a function name, as used by DDL bindings.
pub fn builtin_generator(name: &str) -> Option<(FefId, Arc<dyn FeedbackGenerator>)> {
    let g: (FefId, Arc<dyn FeedbackGenerator>) = match name {
        "notEnoughDetail" => (NOT_ENOUGH_DETAIL, Arc::new(NotEnoughDetail::default())),
        "offTopic" => (OFF_TOPIC, Arc::new(OffTopic::default())),
        "readability" => (READABILITY, Arc::new(StaticFeedback(READABILITY_TEXT))),
        "subjectivity" => (SUBJECTIVITY, Arc::new(StaticFeedback(SUBJECTIVITY_TEXT))),
        "friendliness" => (FRIENDLINESS, Arc::new(StaticFeedback(FRIENDLINESS_TEXT))),
        _ => return None,
    };
    Some(g)
}

/// Pre-populated registry. Informativeness, topic and readability functions
/// are shared; reviews add subjectivity, profiles add friendliness.
pub fn builtin_registry(domain: Domain, schema: &FeatureSchema) -> Result<FefRegistry, FefError> {
    let id = match domain {
        Domain::Reviews => "reviews",
        Domain::Profiles => "profiles",
    };
    let mut reg = FefRegistry::new(id, schema.len());
    let mut add = |name: &str, bound: Vec<usize>| -> Result<(), FefError> {
        let (id, generator) = builtin_generator(name).ok_or_else(|| FefError::UnknownGenerator(name.into()))?;
        reg.register(Fef { id, name: name.into(), bound, generator })
    };
    add("notEnoughDetail", category(schema, FeatureCategory::Informativeness))?;
    add("offTopic", category(schema, FeatureCategory::Topic))?;
    add("readability", category(schema, FeatureCategory::Readability))?;
    match domain {
        Domain::Reviews => add("subjectivity", category(schema, FeatureCategory::Subjectivity))?,
        Domain::Profiles => add("friendliness", indices(schema, FRIENDLINESS_FEATURES)?)?,
    }
    Ok(reg)
}

/// `A[j][i] = 1` iff feature `i` is bound to function `ids[j]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FefBindingMatrix {
    pub ids: Vec<FefId>,
    pub rows: Vec<Vec<u8>>,
}

impl FefBindingMatrix {
    /// Mean responsibility of each function's bound features, `(A s)_j / |row j|`.
    pub fn scores(&self, s: &[f64]) -> Vec<(FefId, f64)> {
        self.ids
            .iter()
            .zip(&self.rows)
            .map(|(&id, row)| {
                let (sum, n) = row
                    .iter()
                    .zip(s)
                    .filter(|(&a, _)| a == 1)
                    .fold((0.0, 0usize), |(acc, n), (_, &x)| (acc + x, n + 1));
                (id, if n == 0 { 0.0 } else { sum / n as f64 })
            })
            .collect()
    }
}

/// The `k` best functions with score strictly above `t`, descending; ties
/// go to the smaller id.
pub fn score_fefs(snorm: &[f64], matrix: &FefBindingMatrix, k: usize, t: f64) -> Vec<(FefId, f64)> {
    let mut scored: Vec<(FefId, f64)> = matrix.scores(snorm).into_iter().filter(|&(_, s)| s > t).collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}

/// Where a feedback item applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    Document,
    Segment(usize),
}

impl Serialize for Scope {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Scope::Document => s.serialize_str("document"),
            Scope::Segment(i) => s.serialize_u64(*i as u64),
        }
    }
}

impl<'de> Deserialize<'de> for Scope {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl serde::de::Visitor<'_> for V {
            type Value = Scope;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("\"document\" or a segment index")
            }
            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<Scope, E> {
                if v == "document" {
                    Ok(Scope::Document)
                } else {
                    Err(E::custom(format!("unknown scope `{v}`")))
                }
            }
            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<Scope, E> {
                Ok(Scope::Segment(v as usize))
            }
            fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<Scope, E> {
                usize::try_from(v).map(Scope::Segment).map_err(|_| E::custom("negative segment index"))
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FeedbackItem {
    pub fef_id: FefId,
    pub fef_name: String,
    pub score: f64,
    pub text: String,
    pub scope: Scope,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Quality {
    pub label: String,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SegmentFeedback {
    pub start_char: usize,
    pub end_char: usize,
    pub label: String,
    pub confidence: f64,
    pub feedback: Vec<FeedbackItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FeedbackReport {
    pub doc_quality: Quality,
    pub doc_feedback: Vec<FeedbackItem>,
    pub segments: Vec<SegmentFeedback>,
    /// Set when the text has no words; such reports carry no feedback.
    #[serde(default, skip_serializing_if = "core::ops::Not::not")]
    pub degenerate: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

/// Per-scope selection parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub k: usize,
    pub t: f64,
}

impl Default for Selection {
    fn default() -> Self {
        Self { k: 2, t: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FeedbackParams {
    pub document: Selection,
    pub segment: Selection,
}

/// One scope's prediction and inputs. `snorm` is required for low-quality
/// scopes and ignored otherwise.
pub struct ScopeInput<'a> {
    pub text: &'a str,
    pub start_char: usize,
    pub end_char: usize,
    pub raw: &'a [f64],
    pub quality: Quality,
    pub low_quality: bool,
    pub snorm: Option<&'a [f64]>,
}

pub struct FeedbackEnv<'a> {
    pub registry: &'a FefRegistry,
    pub schema: &'a FeatureSchema,
    pub resources: &'a FeatureResources,
    pub params: FeedbackParams,
}

fn scope_feedback(
    input: &ScopeInput<'_>,
    scope: Scope,
    sel: Selection,
    env: &FeedbackEnv<'_>,
    matrix: &FefBindingMatrix,
    diagnostics: &mut Vec<String>,
) -> Vec<FeedbackItem> {
    if !input.low_quality {
        return Vec::new();
    }
    let Some(snorm) = input.snorm else {
        diagnostics.push(format!("{scope:?}: low quality but no responsibility vector"));
        return Vec::new();
    };
    let mut items = Vec::new();
    for (id, score) in score_fefs(snorm, matrix, sel.k, sel.t) {
        let Some(fef) = env.registry.get(id) else { continue };
        let ctx = FefContext { text: input.text, raw: input.raw, bound: &fef.bound, schema: env.schema, resources: env.resources };
        match fef.generator.generate(&ctx) {
            Ok(Some(text)) if !text.is_empty() => {
                items.push(FeedbackItem { fef_id: id, fef_name: fef.name.clone(), score, text, scope })
            }
            Ok(_) => {}
            Err(e) => diagnostics.push(format!("{scope:?}: {} skipped: {e}", fef.name)),
        }
    }
    items
}

/// Runs the selected functions for the document and every low-quality
/// segment. High-quality scopes get no items; a failing generator is
/// skipped and recorded in `diagnostics`.
pub fn generate_feedback(doc: &ScopeInput<'_>, segments: &[ScopeInput<'_>], env: &FeedbackEnv<'_>) -> FeedbackReport {
    let matrix = env.registry.binding_matrix();
    let mut diagnostics = Vec::new();
    let doc_feedback = scope_feedback(doc, Scope::Document, env.params.document, env, &matrix, &mut diagnostics);
    let segments = segments
        .iter()
        .enumerate()
        .map(|(i, s)| SegmentFeedback {
            start_char: s.start_char,
            end_char: s.end_char,
            label: s.quality.label.clone(),
            confidence: s.quality.confidence,
            feedback: scope_feedback(s, Scope::Segment(i), env.params.segment, env, &matrix, &mut diagnostics),
        })
        .collect();
    FeedbackReport { doc_quality: doc.quality.clone(), doc_feedback, segments, degenerate: false, diagnostics }
}
