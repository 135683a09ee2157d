//! Random-forest classifiers whose decision paths are first-class values.
//!
//! Trees are stored as flat lists of root-to-leaf [`DecisionPath`]s rather
//! than node graphs: the explainer consumes paths directly, and a trained
//! tree's paths partition the feature space so prediction is a scan for the
//! single matching path.

mod schema;
mod train;

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use schema::{FeatureCategory, FeatureSchema, FeatureSpec, FeatureVector};
pub use train::{train_forest, ForestParams};

/// Index into a model's label list.
pub type LabelId = u32;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ForestError {
    #[error("degenerate labels: training needs at least two distinct labels")]
    DegenerateLabels,
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("schema mismatch: expected {expected} features, got {actual}")]
    SchemaMismatch { expected: usize, actual: usize },
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("empty leaf: path has no training samples")]
    EmptyLeaf,
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Comparator {
    /// `value <= threshold`
    Le,
    /// `value > threshold`
    Gt,
}

/// One split decision along a path. Serialized as `[featIdx, "le"|"gt", thr]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(usize, Comparator, f64)", into = "(usize, Comparator, f64)")]
pub struct Condition {
    pub feature: usize,
    pub comparator: Comparator,
    pub threshold: f64,
}

impl Condition {
    pub fn le(feature: usize, threshold: f64) -> Self {
        Self { feature, comparator: Comparator::Le, threshold }
    }

    pub fn gt(feature: usize, threshold: f64) -> Self {
        Self { feature, comparator: Comparator::Gt, threshold }
    }

    pub fn holds(&self, value: f64) -> bool {
        match self.comparator {
            Comparator::Le => value <= self.threshold,
            Comparator::Gt => value > self.threshold,
        }
    }
}

impl From<(usize, Comparator, f64)> for Condition {
    fn from((feature, comparator, threshold): (usize, Comparator, f64)) -> Self {
        Self { feature, comparator, threshold }
    }
}

impl From<Condition> for (usize, Comparator, f64) {
    fn from(c: Condition) -> Self {
        (c.feature, c.comparator, c.threshold)
    }
}

/// The interval `(lower, upper]` a path allows on one feature. `None` means
/// the path does not bound that side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    /// Strict lower bound (from `>` conditions).
    pub lower: Option<f64>,
    /// Inclusive upper bound (from `<=` conditions).
    pub upper: Option<f64>,
}

impl Interval {
    pub const UNBOUNDED: Interval = Interval { lower: None, upper: None };

    pub fn contains(&self, x: f64) -> bool {
        self.lower.map_or(true, |l| x > l) && self.upper.map_or(true, |u| x <= u)
    }

    pub fn is_empty(&self) -> bool {
        matches!((self.lower, self.upper), (Some(l), Some(u)) if l >= u)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionPath {
    #[serde(rename = "conds")]
    pub conditions: Vec<Condition>,
    pub vote: LabelId,
    /// Training samples reaching this leaf, indexed by label id.
    #[serde(rename = "counts")]
    pub label_counts: Vec<u64>,
}

impl DecisionPath {
    pub fn matches(&self, d: &[f64]) -> bool {
        self.conditions.iter().all(|c| c.holds(d[c.feature]))
    }

    /// Tightest interval the path's conditions impose on `feature`.
    pub fn interval(&self, feature: usize) -> Interval {
        let mut iv = Interval::UNBOUNDED;
        for c in self.conditions.iter().filter(|c| c.feature == feature) {
            match c.comparator {
                Comparator::Le => {
                    iv.upper = Some(iv.upper.map_or(c.threshold, |u| u.min(c.threshold)))
                }
                Comparator::Gt => {
                    iv.lower = Some(iv.lower.map_or(c.threshold, |l| l.max(c.threshold)))
                }
            }
        }
        iv
    }

    /// Sorted, deduplicated features the path constrains.
    pub fn features(&self) -> Vec<usize> {
        let mut fs: Vec<usize> = self.conditions.iter().map(|c| c.feature).collect();
        fs.sort_unstable();
        fs.dedup();
        fs
    }

    pub fn total_count(&self) -> u64 {
        self.label_counts.iter().sum()
    }
}

/// Fraction of the path's training samples whose label equals its vote.
pub fn path_confidence(path: &DecisionPath) -> Result<f64, ForestError> {
    let total = path.total_count();
    if total == 0 {
        return Err(ForestError::EmptyLeaf);
    }
    let hits = path.label_counts.get(path.vote as usize).copied().unwrap_or(0);
    Ok(hits as f64 / total as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub paths: Vec<DecisionPath>,
}

impl Tree {
    /// Ordinal of the first path matching `d`; trained trees have exactly one.
    pub fn matching_path(&self, d: &[f64]) -> Option<usize> {
        self.paths.iter().position(|p| p.matches(d))
    }
}

/// Label names plus the utility of predicting each one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSet {
    pub names: Vec<String>,
    pub utility: Vec<f64>,
}

impl LabelSet {
    pub fn new(names: Vec<String>, utility: Vec<f64>) -> Result<Self, ForestError> {
        if names.len() != utility.len() {
            return Err(ForestError::InvalidModel(alloc::format!(
                "{} labels but {} utilities",
                names.len(),
                utility.len()
            )));
        }
        if names.is_empty() {
            return Err(ForestError::InvalidModel("no labels".into()));
        }
        Ok(Self { names, utility })
    }

    /// Binary labels where `high` gets utility 1 and everything else 0.
    pub fn binary(high: &str, low: &str) -> Self {
        Self { names: alloc::vec![high.into(), low.into()], utility: alloc::vec![1.0, 0.0] }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<LabelId> {
        self.names.iter().position(|n| n == name).map(|i| i as LabelId)
    }

    pub fn utility(&self, label: LabelId) -> f64 {
        self.utility[label as usize]
    }

    pub fn max_utility(&self) -> f64 {
        self.utility.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Argmax over per-label tallies. Ties go to the higher-utility label,
    /// then the smaller id.
    pub fn resolve<T: PartialOrd + Copy>(&self, tallies: &[T]) -> LabelId {
        let mut best = 0usize;
        for i in 1..tallies.len() {
            let better = tallies[i] > tallies[best]
                || (tallies[i] == tallies[best] && self.utility[i] > self.utility[best]);
            if better {
                best = i;
            }
        }
        best as LabelId
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: LabelId,
    /// Fraction of trees voting for `label`.
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub schema: FeatureSchema,
    pub trees: Vec<Tree>,
    pub labels: LabelSet,
    pub seed: u64,
}

impl RandomForest {
    /// Assembles a model from explicit trees, checking structural invariants.
    pub fn new(
        schema: FeatureSchema,
        trees: Vec<Tree>,
        labels: LabelSet,
        seed: u64,
    ) -> Result<Self, ForestError> {
        let model = Self { schema, trees, labels, seed };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), ForestError> {
        if self.trees.is_empty() {
            return Err(ForestError::InvalidModel("forest has no trees".into()));
        }
        let n = self.schema.len();
        let k = self.labels.len();
        if self.labels.utility.len() != k {
            return Err(ForestError::InvalidModel("utility missing for some label".into()));
        }
        for (t, tree) in self.trees.iter().enumerate() {
            if tree.paths.is_empty() {
                return Err(ForestError::InvalidModel(alloc::format!("tree {t} has no paths")));
            }
            for path in &tree.paths {
                if path.vote as usize >= k || path.label_counts.len() != k {
                    return Err(ForestError::InvalidModel(alloc::format!(
                        "tree {t}: path label data does not match {k} labels"
                    )));
                }
                if let Some(c) = path.conditions.iter().find(|c| c.feature >= n) {
                    return Err(ForestError::InvalidModel(alloc::format!(
                        "tree {t}: condition on feature {} outside schema of {n}",
                        c.feature
                    )));
                }
                if path.features().iter().any(|&f| path.interval(f).is_empty()) {
                    return Err(ForestError::InvalidModel(alloc::format!(
                        "tree {t}: path with unsatisfiable conditions"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn num_features(&self) -> usize {
        self.schema.len()
    }

    fn check_len(&self, d: &[f64]) -> Result<(), ForestError> {
        if d.len() != self.schema.len() {
            return Err(ForestError::SchemaMismatch { expected: self.schema.len(), actual: d.len() });
        }
        Ok(())
    }

    /// Per-label vote tallies at `d`.
    pub fn votes(&self, d: &[f64]) -> Result<Vec<u32>, ForestError> {
        self.check_len(d)?;
        let mut votes = alloc::vec![0u32; self.labels.len()];
        for (t, tree) in self.trees.iter().enumerate() {
            let p = tree.matching_path(d).ok_or_else(|| {
                ForestError::InvalidModel(alloc::format!("tree {t} does not cover the point"))
            })?;
            votes[tree.paths[p].vote as usize] += 1;
        }
        Ok(votes)
    }

    /// Majority vote. Ties go to the higher-utility label, then the smaller id.
    pub fn predict(&self, d: &[f64]) -> Result<Prediction, ForestError> {
        let votes = self.votes(d)?;
        let label = self.labels.resolve(&votes);
        let confidence = votes[label as usize] as f64 / self.trees.len() as f64;
        Ok(Prediction { label, confidence })
    }

    pub fn utility_at(&self, d: &[f64]) -> Result<f64, ForestError> {
        Ok(self.labels.utility(self.predict(d)?.label))
    }

    /// Total number of decision paths across all trees.
    pub fn num_paths(&self) -> usize {
        self.trees.iter().map(|t| t.paths.len()).sum()
    }

    /// All distinct split thresholds on `feature`, ascending.
    pub fn thresholds(&self, feature: usize) -> Vec<f64> {
        let mut ts: Vec<f64> = self
            .trees
            .iter()
            .flat_map(|t| t.paths.iter())
            .flat_map(|p| p.conditions.iter())
            .filter(|c| c.feature == feature)
            .map(|c| c.threshold)
            .collect();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        ts
    }
}

/// Reference to one path: `(tree ordinal, path ordinal)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PathRef {
    pub tree: usize,
    pub path: usize,
}

/// Paths grouped by the utility of their vote, ascending by utility.
#[derive(Debug, Clone)]
pub struct PathIndex {
    buckets: Vec<(f64, Vec<PathRef>)>,
}

impl PathIndex {
    pub fn buckets(&self) -> &[(f64, Vec<PathRef>)] {
        &self.buckets
    }

    /// Paths whose vote utility equals `utility` exactly.
    pub fn bucket(&self, utility: f64) -> &[PathRef] {
        self.buckets
            .iter()
            .find(|(u, _)| *u == utility)
            .map_or(&[][..], |(_, refs)| refs.as_slice())
    }

    /// Paths with utility strictly greater than `utility`, in
    /// (bucket, tree, path) order.
    pub fn improving(&self, utility: f64) -> impl Iterator<Item = PathRef> + '_ {
        self.buckets
            .iter()
            .filter(move |(u, _)| *u > utility)
            .flat_map(|(_, refs)| refs.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.buckets.iter().map(|(_, r)| r.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn index_paths_by_utility(model: &RandomForest) -> PathIndex {
    let mut buckets: Vec<(f64, Vec<PathRef>)> = Vec::new();
    for (t, tree) in model.trees.iter().enumerate() {
        for (p, path) in tree.paths.iter().enumerate() {
            let u = model.labels.utility(path.vote);
            let r = PathRef { tree: t, path: p };
            match buckets.iter_mut().find(|(bu, _)| *bu == u) {
                Some((_, refs)) => refs.push(r),
                None => buckets.push((u, alloc::vec![r])),
            }
        }
    }
    buckets.sort_by(|a, b| a.0.total_cmp(&b.0));
    PathIndex { buckets }
}
