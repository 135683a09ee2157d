//! Segment-Predict-Explain: training a bundle from a labeled corpus and
//! turning a submitted text into a feedback report.

use std::collections::BTreeSet;

use prehoc_core::features::{
    build_resources, catalog_index, extract_all, FeatureError, FeatureResources, Lexicon, ResourceParams, CATALOG,
};
use prehoc_core::fef::{
    builtin_generator, builtin_registry, generate_feedback, Domain, Fef, FefError, FefId, FefRegistry, FeedbackEnv,
    FeedbackParams, FeedbackReport, Quality, ScopeInput,
};
use prehoc_core::forest::{
    train_forest, FeatureCategory, FeatureSchema, FeatureSpec, FeatureVector, ForestError, ForestParams, LabelId,
    LabelSet, RandomForest,
};
use prehoc_core::segment::{topictiling_segment, LdaParams, Segment, SegmentError, TilingParams};
use prehoc_core::tcruise::{Baseline, ImpactConfig, TCruise, TcruiseError};
use prehoc_core::text::word_spans;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{check_labels, LabeledDoc, Split, HIGH, LOW};
use crate::ddl::{DdlError, Schema};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("degenerate corpus: {0}")]
    DegenerateCorpus(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error(transparent)]
    Tcruise(#[from] TcruiseError),
    #[error(transparent)]
    Fef(#[from] FefError),
    #[error(transparent)]
    Ddl(#[from] DdlError),
    #[error(transparent)]
    Segment(#[from] SegmentError),
    #[error("{0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct TrainConfig {
    /// Built-in feedback functions used when no DDL binds any.
    pub domain: Domain,
    /// DDL source with a feature table and, optionally, feature explanation
    /// bindings over it.
    pub ddl: Option<String>,
    /// Feature table to use when the DDL declares several.
    pub feature_table: Option<String>,
    pub resources: ResourceParams,
    pub doc_forest: ForestParams,
    pub seg_forest: ForestParams,
    pub tiling: TilingParams,
    pub feedback: FeedbackParams,
    pub impact: ImpactConfig,
    /// Low-quality documents (and their segments) sampled for baseline
    /// normalization.
    pub baseline_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            domain: Domain::Reviews,
            ddl: None,
            feature_table: None,
            resources: ResourceParams { lda: LdaParams { k: 8, iterations: 100, ..LdaParams::default() }, ..ResourceParams::default() },
            doc_forest: ForestParams::default(),
            seg_forest: ForestParams::default(),
            tiling: TilingParams::default(),
            feedback: FeedbackParams::default(),
            impact: ImpactConfig::default(),
            baseline_size: 100,
            seed: 7,
        }
    }
}

impl TrainConfig {
    /// Derives every component seed from one master seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.resources.seed = seed;
        self.resources.lda.seed = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ 1;
        self.doc_forest.seed = seed.wrapping_add(1);
        self.seg_forest.seed = seed.wrapping_add(2);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FefSpec {
    pub id: FefId,
    pub name: String,
    /// Built-in generator name.
    pub generator: String,
    pub features: Vec<String>,
}

/// Serializable description of a feedback registry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RegistrySpec {
    pub id: String,
    pub fefs: Vec<FefSpec>,
}

fn catalog_schema() -> FeatureSchema {
    FeatureSchema::new(
        CATALOG
            .iter()
            .map(|&(n, c)| FeatureSpec { name: n.into(), category: c, raw_min: 0.0, raw_max: 1.0 })
            .collect(),
    )
    .expect("catalog names are unique")
}

impl RegistrySpec {
    /// The built-in functions for `domain`, restricted to `features`;
    /// functions left with no bound feature are dropped.
    pub fn builtin(domain: Domain, features: &[String]) -> Result<Self, FefError> {
        let full = catalog_schema();
        let reg = builtin_registry(domain, &full)?;
        let keep: BTreeSet<&str> = features.iter().map(String::as_str).collect();
        let fefs = reg
            .fefs()
            .iter()
            .map(|f| FefSpec {
                id: f.id,
                name: f.name.clone(),
                generator: f.name.clone(),
                features: f
                    .bound
                    .iter()
                    .map(|&i| full.features()[i].name.clone())
                    .filter(|n| keep.contains(n.as_str()))
                    .collect(),
            })
            .filter(|f| !f.features.is_empty())
            .collect();
        Ok(Self { id: format!("builtin:{}", reg.id), fefs })
    }

    pub fn build(&self, schema: &FeatureSchema) -> Result<FefRegistry, FefError> {
        let mut reg = FefRegistry::new(self.id.clone(), schema.len());
        for f in &self.fefs {
            let (_, generator) =
                builtin_generator(&f.generator).ok_or_else(|| FefError::UnknownGenerator(f.generator.clone()))?;
            let bound = f
                .features
                .iter()
                .map(|n| schema.index_of(n).ok_or_else(|| FefError::UnknownFeature(n.clone())))
                .collect::<Result<Vec<_>, _>>()?;
            reg.register(Fef { id: f.id, name: f.name.clone(), bound, generator })?;
        }
        Ok(reg)
    }
}

/// Model features and feedback registry declared by a DDL feature table.
/// Each binding `CREATE EXPLANATION name ON feats(a, b) USING generator`
/// binds the features the extractors of `a` and `b` produce.
pub fn ddl_features(src: &str, table: Option<&str>, domain: Domain) -> Result<(Vec<String>, RegistrySpec), PipelineError> {
    let schema = Schema::parse(src)?;
    let ft = match table {
        Some(t) => schema.feature_table(t).ok_or_else(|| PipelineError::Config(format!("no feature table {t}")))?,
        None => schema
            .feature_tables()
            .next()
            .ok_or_else(|| PipelineError::Config("DDL declares no feature table".into()))?,
    };
    let resolved = ft.to_def().resolve()?;
    let mut wanted: BTreeSet<&str> = BTreeSet::new();
    for (_, feats) in &resolved {
        wanted.extend(feats.iter().copied());
    }
    let features: Vec<String> =
        CATALOG.iter().filter(|(n, _)| wanted.contains(n)).map(|(n, _)| n.to_string()).collect();
    let bindings = schema.fef_bindings(&ft.name);
    if bindings.is_empty() {
        return Ok((features.clone(), RegistrySpec::builtin(domain, &features)?));
    }
    let mut fefs = Vec::new();
    for b in bindings {
        let (id, _) =
            builtin_generator(&b.explainer_id).ok_or_else(|| FefError::UnknownGenerator(b.explainer_id.clone()))?;
        let mut bound: BTreeSet<&str> = BTreeSet::new();
        for a in &b.attributes {
            let (_, feats) = resolved.iter().find(|(n, _)| n == a).expect("resolution checked attributes");
            bound.extend(feats.iter().copied());
        }
        let features = features.iter().filter(|n| bound.contains(n.as_str())).cloned().collect();
        fefs.push(FefSpec {
            id,
            name: b.name.clone().unwrap_or_else(|| b.explainer_id.clone()),
            generator: b.explainer_id.clone(),
            features,
        });
    }
    Ok((features, RegistrySpec { id: format!("ddl:{}", ft.name), fefs }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BundleMeta {
    pub corpus: String,
    pub version: u32,
    pub seed: u64,
    pub documents: usize,
    pub high_documents: usize,
    pub low_documents: usize,
    pub segments: usize,
    pub features: Vec<String>,
    pub registry_id: String,
    pub doc_train_accuracy: f64,
    pub seg_train_accuracy: f64,
}

impl BundleMeta {
    pub fn id(&self) -> String {
        format!("{}/v{}", self.corpus, self.version)
    }
}

/// Everything feedback generation needs for one corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Bundle {
    pub meta: BundleMeta,
    pub config: TrainConfig,
    pub doc_model: RandomForest,
    pub seg_model: RandomForest,
    pub resources: FeatureResources,
    pub registry: RegistrySpec,
    pub doc_baseline: Baseline,
    pub seg_baseline: Baseline,
}

fn feature_indices(names: &[String]) -> Vec<usize> {
    names.iter().map(|n| catalog_index(n).expect("feature names come from the catalog")).collect()
}

fn raw_features(text: &str, res: &FeatureResources, idx: &[usize]) -> Vec<f64> {
    let all = extract_all(text, res);
    idx.iter().map(|&i| all[i]).collect()
}

fn has_words(text: &str) -> bool {
    !word_spans(text).is_empty()
}

/// Segments of `text` that contain at least one word.
pub fn wordy_segments(text: &str, res: &FeatureResources, tiling: &TilingParams) -> Vec<Segment> {
    topictiling_segment(text, &res.lda, tiling).into_iter().filter(|s| has_words(&s.text)).collect()
}

fn accuracy(model: &RandomForest, rows: &[FeatureVector], targets: &[LabelId]) -> Result<f64, ForestError> {
    let mut hit = 0;
    for (r, &t) in rows.iter().zip(targets) {
        if model.predict(r.values())?.label == t {
            hit += 1;
        }
    }
    Ok(if rows.is_empty() { 0.0 } else { hit as f64 / rows.len() as f64 })
}

fn labels() -> LabelSet {
    LabelSet::binary(HIGH, LOW)
}

fn baseline(model: &RandomForest, low_rows: &[&FeatureVector], cfg: &TrainConfig, salt: u64) -> Result<Baseline, PipelineError> {
    let mut pick: Vec<&FeatureVector> = low_rows.to_vec();
    pick.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed ^ salt));
    pick.truncate(cfg.baseline_size);
    let scanner = TCruise::new(model, cfg.impact);
    let raws = pick.iter().map(|r| scanner.responsibility(r.values())).collect::<Result<Vec<_>, _>>()?;
    Ok(Baseline::from_raw(&raws)?)
}

/// Fits resources, the document and segment models and their baselines.
/// Segments inherit their document's label. Documents marked as test split
/// are ignored.
pub fn train_bundle(corpus: &str, docs: &[LabeledDoc], cfg: &TrainConfig) -> Result<Bundle, PipelineError> {
    check_labels(docs).map_err(PipelineError::DegenerateCorpus)?;
    let train: Vec<&LabeledDoc> = docs.iter().filter(|d| d.split == Split::Train && has_words(&d.text)).collect();
    let high = train.iter().filter(|d| d.is_high()).count();
    let low = train.len() - high;
    if high == 0 || low == 0 {
        return Err(PipelineError::DegenerateCorpus(format!(
            "need both labels among training documents with words, got {high} high and {low} low"
        )));
    }
    if low < 2 {
        return Err(PipelineError::DegenerateCorpus("baseline needs at least two low-quality documents".into()));
    }

    let (features, registry) = match &cfg.ddl {
        Some(src) => ddl_features(src, cfg.feature_table.as_deref(), cfg.domain)?,
        None => {
            let all: Vec<String> = CATALOG.iter().map(|(n, _)| n.to_string()).collect();
            let spec = RegistrySpec::builtin(cfg.domain, &all)?;
            (all, spec)
        }
    };
    if features.is_empty() {
        return Err(PipelineError::Config("no model features".into()));
    }
    let idx = feature_indices(&features);
    let named: Vec<(String, FeatureCategory)> = idx.iter().map(|&i| (CATALOG[i].0.to_string(), CATALOG[i].1)).collect();

    let pairs: Vec<(&str, bool)> = train.iter().map(|d| (d.text.as_str(), d.is_high())).collect();
    let resources = build_resources(&pairs, Lexicon::builtin(), &cfg.resources)?;
    let labels = labels();
    let target = |high: bool| labels.id(if high { HIGH } else { LOW }).expect("binary labels");

    let doc_raw: Vec<Vec<f64>> = train.iter().map(|d| raw_features(&d.text, &resources, &idx)).collect();
    let doc_targets: Vec<LabelId> = train.iter().map(|d| target(d.is_high())).collect();
    let doc_schema = FeatureSchema::fit(&named, &doc_raw)?;
    let doc_rows = doc_raw.iter().map(|r| doc_schema.normalize(r)).collect::<Result<Vec<_>, _>>()?;
    let doc_model = train_forest(doc_schema, labels.clone(), &doc_rows, &doc_targets, &cfg.doc_forest)?;

    let mut seg_raw = Vec::new();
    let mut seg_targets = Vec::new();
    for d in &train {
        for s in wordy_segments(&d.text, &resources, &cfg.tiling) {
            seg_raw.push(raw_features(&s.text, &resources, &idx));
            seg_targets.push(target(d.is_high()));
        }
    }
    let seg_schema = FeatureSchema::fit(&named, &seg_raw)?;
    let seg_rows = seg_raw.iter().map(|r| seg_schema.normalize(r)).collect::<Result<Vec<_>, _>>()?;
    let seg_model = train_forest(seg_schema, labels.clone(), &seg_rows, &seg_targets, &cfg.seg_forest)?;

    let low_id = target(false);
    let low_docs: Vec<&FeatureVector> = doc_rows.iter().zip(&doc_targets).filter(|(_, &t)| t == low_id).map(|(r, _)| r).collect();
    let low_segs: Vec<&FeatureVector> = seg_rows.iter().zip(&seg_targets).filter(|(_, &t)| t == low_id).map(|(r, _)| r).collect();
    let doc_baseline = baseline(&doc_model, &low_docs, cfg, 0x646f63)?;
    let seg_baseline = baseline(&seg_model, &low_segs, cfg, 0x736567)?;

    // validate the registry against the schema before publishing
    registry.build(&doc_model.schema)?;

    let meta = BundleMeta {
        corpus: corpus.into(),
        version: 0,
        seed: cfg.seed,
        documents: train.len(),
        high_documents: high,
        low_documents: low,
        segments: seg_rows.len(),
        features,
        registry_id: registry.id.clone(),
        doc_train_accuracy: accuracy(&doc_model, &doc_rows, &doc_targets)?,
        seg_train_accuracy: accuracy(&seg_model, &seg_rows, &seg_targets)?,
    };
    Ok(Bundle {
        meta,
        config: cfg.clone(),
        doc_model,
        seg_model,
        resources,
        registry,
        doc_baseline,
        seg_baseline,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DocumentScores {
    pub features: Vec<String>,
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
    pub fefs: Vec<(String, f64)>,
}

/// A bundle with its registry built and feature indices resolved.
#[derive(Debug, Clone)]
pub struct ReadyBundle {
    pub bundle: Bundle,
    pub registry: FefRegistry,
    idx: Vec<usize>,
}

struct Scored {
    raw: Vec<f64>,
    quality: Quality,
    low: bool,
    snorm: Option<Vec<f64>>,
}

impl ReadyBundle {
    pub fn new(bundle: Bundle) -> Result<Self, PipelineError> {
        let registry = bundle.registry.build(&bundle.doc_model.schema)?;
        for f in &bundle.meta.features {
            if catalog_index(f).is_none() {
                return Err(FeatureError::UnknownFeature(f.clone()).into());
            }
        }
        let idx = feature_indices(&bundle.meta.features);
        Ok(Self { bundle, registry, idx })
    }

    fn score(&self, text: &str, model: &RandomForest, baseline: &Baseline) -> Result<Scored, PipelineError> {
        let raw = raw_features(text, &self.bundle.resources, &self.idx);
        let d = model.schema.normalize(&raw)?;
        let pred = model.predict(d.values())?;
        let low = model.labels.utility(pred.label) < model.labels.max_utility();
        let snorm = if low {
            let s = TCruise::new(model, self.bundle.config.impact).responsibility(d.values())?;
            Some(baseline.normalize(&s))
        } else {
            None
        };
        let quality = Quality { label: model.labels.names[pred.label as usize].clone(), confidence: pred.confidence };
        Ok(Scored { raw, quality, low, snorm })
    }

    /// Document-scope explanation internals: TCruise responsibility per
    /// model feature, raw and baseline-normalized, and every feedback
    /// function's mean normalized score. `None` when the document model
    /// predicts the top label.
    pub fn document_scores(&self, text: &str) -> Result<Option<DocumentScores>, PipelineError> {
        let b = &self.bundle;
        let d = b.doc_model.schema.normalize(&raw_features(text, &b.resources, &self.idx))?;
        let pred = b.doc_model.predict(d.values())?;
        if b.doc_model.labels.utility(pred.label) >= b.doc_model.labels.max_utility() {
            return Ok(None);
        }
        let raw = TCruise::new(&b.doc_model, b.config.impact).responsibility(d.values())?;
        let normalized = b.doc_baseline.normalize(&raw);
        let fefs = self
            .registry
            .binding_matrix()
            .scores(&normalized)
            .into_iter()
            .map(|(id, score)| (self.registry.get(id).map(|f| f.name.clone()).unwrap_or_default(), score))
            .collect();
        Ok(Some(DocumentScores { features: b.meta.features.clone(), raw, normalized, fefs }))
    }

    /// Segment-model label of `text`.
    pub fn segment_label(&self, text: &str) -> Result<String, PipelineError> {
        let m = &self.bundle.seg_model;
        let raw = raw_features(text, &self.bundle.resources, &self.idx);
        let pred = m.predict(m.schema.normalize(&raw)?.values())?;
        Ok(m.labels.names[pred.label as usize].clone())
    }

    /// Segment, predict the document and each segment, and explain the
    /// low-quality ones. Pure in (bundle, text).
    pub fn get_feedback(&self, text: &str) -> Result<FeedbackReport, PipelineError> {
        let b = &self.bundle;
        let segments = topictiling_segment(text, &b.resources.lda, &b.config.tiling);
        let degenerate = !has_words(text);
        let doc = self.score(text, &b.doc_model, &b.doc_baseline)?;
        let mut scored = Vec::with_capacity(segments.len());
        for s in &segments {
            scored.push(self.score(&s.text, &b.seg_model, &b.seg_baseline)?);
        }
        let doc_input = ScopeInput {
            text,
            start_char: 0,
            end_char: text.chars().count(),
            raw: &doc.raw,
            quality: doc.quality.clone(),
            low_quality: doc.low && !degenerate,
            snorm: doc.snorm.as_deref(),
        };
        let seg_inputs: Vec<ScopeInput<'_>> = segments
            .iter()
            .zip(&scored)
            .map(|(s, sc)| ScopeInput {
                text: &s.text,
                start_char: s.start_char,
                end_char: s.end_char,
                raw: &sc.raw,
                quality: sc.quality.clone(),
                low_quality: sc.low && has_words(&s.text),
                snorm: sc.snorm.as_deref(),
            })
            .collect();
        let env = FeedbackEnv {
            registry: &self.registry,
            schema: &b.doc_model.schema,
            resources: &b.resources,
            params: b.config.feedback,
        };
        let mut report = generate_feedback(&doc_input, &seg_inputs, &env);
        report.degenerate = degenerate;
        Ok(report)
    }
}
