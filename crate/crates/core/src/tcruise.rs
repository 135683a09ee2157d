//! Per-feature responsibility scores for a low-utility point.
//!
//! For every tree, the scan looks only at paths whose vote has higher utility
//! than the forest's current prediction. Each such path yields its minimal L2
//! perturbation; its impact is the utility gain divided by the perturbation
//! norm, scaled by a confidence. Within a tree only the best path per
//! perturbed-feature set is kept, and a feature's responsibility is the sum of
//! impacts of retained paths whose perturbation touches it.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forest::{index_paths_by_utility, path_confidence, DecisionPath, ForestError, PathIndex, PathRef, RandomForest};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TcruiseError {
    #[error("infeasible path: empty interval on feature {0}")]
    InfeasiblePath(usize),
    #[error("unreachable path: feature {feature} would need value {target} outside the domain")]
    UnreachablePath { feature: usize, target: f64 },
    #[error("inconsistent model state: zero-norm perturbation with nonzero utility gain")]
    InconsistentModelState,
    #[error("baseline needs at least 2 points, got {0}")]
    BaselineTooSmall(usize),
    #[error(transparent)]
    Forest(#[from] ForestError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ConfidenceSource {
    /// Purity of the target path's training samples.
    PathPurity,
    /// Fraction of trees agreeing with the forest's vote at `d + p`.
    ForestMajority,
}

/// Closed box every perturbed point must stay inside.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub lower: f64,
    pub upper: f64,
}

impl Domain {
    pub const UNIT: Domain = Domain { lower: 0.0, upper: 1.0 };

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }
}

/// Impact is always discounted by the L2 norm of the perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ImpactConfig {
    /// Margin used to step strictly past a `>` threshold.
    pub epsilon: f64,
    pub confidence: ConfidenceSource,
    pub domain: Domain,
}

impl Default for ImpactConfig {
    fn default() -> Self {
        Self { epsilon: 1e-6, confidence: ConfidenceSource::PathPurity, domain: Domain::UNIT }
    }
}

/// Sparse change vector; entries are sorted by feature and nonzero.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Perturbation {
    deltas: Vec<(usize, f64)>,
}

impl Perturbation {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds from `(feature, delta)` pairs, dropping zeros and sorting.
    pub fn from_deltas(mut deltas: Vec<(usize, f64)>) -> Self {
        deltas.retain(|&(_, v)| v != 0.0);
        deltas.sort_by_key(|&(i, _)| i);
        Self { deltas }
    }

    pub fn deltas(&self) -> &[(usize, f64)] {
        &self.deltas
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    pub fn delta(&self, feature: usize) -> f64 {
        self.deltas.iter().find(|&&(i, _)| i == feature).map_or(0.0, |&(_, v)| v)
    }

    /// The perturbed feature set, ascending.
    pub fn features(&self) -> Vec<usize> {
        self.deltas.iter().map(|&(i, _)| i).collect()
    }

    pub fn touches(&self, feature: usize) -> bool {
        self.deltas.iter().any(|&(i, _)| i == feature)
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.deltas.iter().map(|&(_, v)| v * v).sum())
    }

    pub fn apply(&self, d: &[f64]) -> Vec<f64> {
        let mut out = d.to_vec();
        for &(i, v) in &self.deltas {
            out[i] += v;
        }
        out
    }
}

/// Smallest-L2 perturbation moving `d` into `path`. Each violated feature is
/// moved to the nearest end of the path's interval: exactly onto an inclusive
/// `<=` bound, `epsilon` past a strict `>` bound.
pub fn min_perturbation(d: &[f64], path: &DecisionPath, cfg: &ImpactConfig) -> Result<Perturbation, TcruiseError> {
    let mut deltas = Vec::new();
    for f in path.features() {
        let iv = path.interval(f);
        if iv.is_empty() {
            return Err(TcruiseError::InfeasiblePath(f));
        }
        let x = d[f];
        if iv.contains(x) {
            continue;
        }
        let target = match iv.lower {
            Some(l) if x <= l => {
                let t = l + cfg.epsilon;
                if iv.upper.is_some_and(|u| t > u) {
                    return Err(TcruiseError::UnreachablePath { feature: f, target: t });
                }
                t
            }
            _ => iv.upper.expect("x violates the interval, so an upper bound exists"),
        };
        if !cfg.domain.contains(target) {
            return Err(TcruiseError::UnreachablePath { feature: f, target });
        }
        deltas.push((f, delta_to(x, target)));
    }
    Ok(Perturbation::from_deltas(deltas))
}

/// Delta with `x + delta <= target` and as close as floating point allows.
/// `x + (target - x)` can round one ulp past an inclusive `<=` bound.
pub(crate) fn delta_to(x: f64, target: f64) -> f64 {
    let mut delta = target - x;
    while x + delta > target {
        delta = delta.next_down();
    }
    delta
}

fn confidence_at(
    model: &RandomForest,
    path: &DecisionPath,
    point: &[f64],
    cfg: &ImpactConfig,
) -> Result<f64, TcruiseError> {
    Ok(match cfg.confidence {
        ConfidenceSource::PathPurity => path_confidence(path)?,
        ConfidenceSource::ForestMajority => model.predict(point)?.confidence,
    })
}

fn impact_with(
    d: &[f64],
    path: &DecisionPath,
    p: &Perturbation,
    base_utility: f64,
    model: &RandomForest,
    cfg: &ImpactConfig,
) -> Result<f64, TcruiseError> {
    let gain = model.labels.utility(path.vote) - base_utility;
    let norm = p.norm();
    if norm == 0.0 {
        if gain != 0.0 {
            return Err(TcruiseError::InconsistentModelState);
        }
        return Ok(0.0);
    }
    if gain == 0.0 {
        return Ok(0.0);
    }
    let conf = confidence_at(model, path, &p.apply(d), cfg)?;
    Ok(gain / norm * conf)
}

/// Impact of moving `d` onto `path`: `(U(vote) - U(M(d))) / |minp|_2 * C`.
pub fn path_impact(d: &[f64], path: &DecisionPath, model: &RandomForest, cfg: &ImpactConfig) -> Result<f64, TcruiseError> {
    let base = model.utility_at(d)?;
    let p = min_perturbation(d, path, cfg)?;
    impact_with(d, path, &p, base, model, cfg)
}

/// A path kept as the best representative of its perturbed-feature set.
#[derive(Debug, Clone, PartialEq)]
pub struct RetainedPath {
    pub path: PathRef,
    pub perturbation: Perturbation,
    pub impact: f64,
}

/// Counters from one responsibility scan.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ScanStats {
    /// Paths whose vote utility exceeds the current prediction's.
    pub improving_paths: usize,
    pub impact_evaluations: usize,
}

/// Responsibility scanner bound to one model; holds the utility index.
#[derive(Debug, Clone)]
pub struct TCruise<'m> {
    model: &'m RandomForest,
    index: PathIndex,
    cfg: ImpactConfig,
}

impl<'m> TCruise<'m> {
    pub fn new(model: &'m RandomForest, cfg: ImpactConfig) -> Self {
        Self { model, index: index_paths_by_utility(model), cfg }
    }

    pub fn model(&self) -> &RandomForest {
        self.model
    }

    pub fn config(&self) -> &ImpactConfig {
        &self.cfg
    }

    /// `Q_i(d)` for every tree at once, grouped by tree then feature set.
    pub fn retained_paths(&self, d: &[f64]) -> Result<(Vec<RetainedPath>, ScanStats), TcruiseError> {
        let base = self.model.utility_at(d)?;
        let mut stats = ScanStats::default();
        let mut best: BTreeMap<(usize, Vec<usize>), RetainedPath> = BTreeMap::new();
        for r in self.index.improving(base) {
            stats.improving_paths += 1;
            let path = &self.model.trees[r.tree].paths[r.path];
            let p = match min_perturbation(d, path, &self.cfg) {
                Ok(p) => p,
                Err(TcruiseError::UnreachablePath { .. }) => continue,
                Err(e) => return Err(e),
            };
            // d already sits on this path; an empty perturbation touches no feature.
            if p.is_empty() {
                continue;
            }
            stats.impact_evaluations += 1;
            let impact = impact_with(d, path, &p, base, self.model, &self.cfg)?;
            let key = (r.tree, p.features());
            let replace = match best.get(&key) {
                None => true,
                Some(cur) => impact > cur.impact || (impact == cur.impact && r.path < cur.path.path),
            };
            if replace {
                best.insert(key, RetainedPath { path: r, perturbation: p, impact });
            }
        }
        Ok((best.into_values().collect(), stats))
    }

    /// `Q_i(d)` for a single tree.
    pub fn maximal_impact_paths(&self, d: &[f64], tree: usize) -> Result<Vec<RetainedPath>, TcruiseError> {
        Ok(self.retained_paths(d)?.0.into_iter().filter(|r| r.path.tree == tree).collect())
    }

    /// Raw responsibility `S` per feature, with scan counters. A point already
    /// at maximal utility gets the zero vector.
    pub fn responsibility_with_stats(&self, d: &[f64]) -> Result<(Vec<f64>, ScanStats), TcruiseError> {
        let n = self.model.num_features();
        let base = self.model.utility_at(d)?;
        if base >= self.model.labels.max_utility() {
            return Ok((vec![0.0; n], ScanStats::default()));
        }
        let (retained, stats) = self.retained_paths(d)?;
        let mut s = vec![0.0; n];
        for r in &retained {
            for &(f, _) in r.perturbation.deltas() {
                s[f] += r.impact;
            }
        }
        Ok((s, stats))
    }

    pub fn responsibility(&self, d: &[f64]) -> Result<Vec<f64>, TcruiseError> {
        Ok(self.responsibility_with_stats(d)?.0)
    }
}

/// One-shot form of [`TCruise::responsibility`].
pub fn feature_responsibility(d: &[f64], model: &RandomForest, cfg: &ImpactConfig) -> Result<Vec<f64>, TcruiseError> {
    TCruise::new(model, *cfg).responsibility(d)
}

/// Per-feature mean and population standard deviation of raw
/// responsibilities over a sample of low-quality points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Baseline {
    pub fn from_raw(raws: &[Vec<f64>]) -> Result<Self, TcruiseError> {
        if raws.len() < 2 {
            return Err(TcruiseError::BaselineTooSmall(raws.len()));
        }
        let n = raws[0].len();
        let count = raws.len() as f64;
        let mut mean = vec![0.0; n];
        for r in raws {
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= count);
        let mut var = vec![0.0; n];
        for r in raws {
            for i in 0..n {
                let dx = r[i] - mean[i];
                var[i] += dx * dx;
            }
        }
        let std = var.into_iter().map(|v| libm::sqrt(v / count)).collect();
        Ok(Self { mean, std })
    }

    pub fn from_points(points: &[Vec<f64>], scanner: &TCruise<'_>) -> Result<Self, TcruiseError> {
        let raws = points.iter().map(|p| scanner.responsibility(p)).collect::<Result<Vec<_>, _>>()?;
        Self::from_raw(&raws)
    }

    /// Z-scores; a coordinate with zero spread maps to 0.
    pub fn normalize(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .enumerate()
            .map(|(i, &x)| if self.std[i] > 0.0 { (x - self.mean[i]) / self.std[i] } else { 0.0 })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ResponsibilityVector {
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
    pub baseline_mean: Vec<f64>,
    pub baseline_std: Vec<f64>,
}

/// Normalizes `raw` against the responsibilities of `baseline` points.
pub fn normalize_responsibility(
    raw: &[f64],
    baseline: &[Vec<f64>],
    model: &RandomForest,
    cfg: &ImpactConfig,
) -> Result<ResponsibilityVector, TcruiseError> {
    let stats = Baseline::from_points(baseline, &TCruise::new(model, *cfg))?;
    Ok(ResponsibilityVector {
        raw: raw.to_vec(),
        normalized: stats.normalize(raw),
        baseline_mean: stats.mean,
        baseline_std: stats.std,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::{Condition, FeatureSchema, LabelSet, Tree};
    use crate::synth::walkthrough_model;

    const LEN: usize = 0;
    const EMOTION: usize = 1;

    fn walkthrough_cfg() -> ImpactConfig {
        ImpactConfig { domain: Domain { lower: 0.0, upper: 100.0 }, ..ImpactConfig::default() }
    }

    #[test]
    fn minp_reduces_emotion_by_twenty() {
        let path = DecisionPath { conditions: vec![Condition::le(EMOTION, 10.0)], vote: 0, label_counts: vec![1, 0] };
        let p = min_perturbation(&[10.0, 30.0], &path, &walkthrough_cfg()).unwrap();
        assert_eq!(p.deltas(), &[(EMOTION, -20.0)]);
    }

    #[test]
    fn minp_of_matched_path_is_empty() {
        let path = DecisionPath { conditions: vec![Condition::le(LEN, 20.0)], vote: 0, label_counts: vec![1, 0] };
        assert!(min_perturbation(&[10.0, 30.0], &path, &walkthrough_cfg()).unwrap().is_empty());
    }

    #[test]
    fn minp_steps_past_strict_bound() {
        let cfg = walkthrough_cfg();
        let path = DecisionPath { conditions: vec![Condition::gt(LEN, 20.0)], vote: 0, label_counts: vec![1, 0] };
        let d = [10.0, 30.0];
        let p = min_perturbation(&d, &path, &cfg).unwrap();
        assert_eq!(p.features(), vec![LEN]);
        assert!((p.delta(LEN) - (10.0 + cfg.epsilon)).abs() < 1e-12);
        assert!(path.matches(&p.apply(&d)));
    }

    #[test]
    fn minp_errors() {
        let cfg = ImpactConfig::default();
        let empty = DecisionPath {
            conditions: vec![Condition::gt(0, 0.6), Condition::le(0, 0.4)],
            vote: 0,
            label_counts: vec![1, 0],
        };
        assert_eq!(min_perturbation(&[0.5], &empty, &cfg), Err(TcruiseError::InfeasiblePath(0)));
        let edge = DecisionPath { conditions: vec![Condition::gt(0, 1.0)], vote: 0, label_counts: vec![1, 0] };
        assert!(matches!(min_perturbation(&[0.5], &edge, &cfg), Err(TcruiseError::UnreachablePath { .. })));
    }

    #[test]
    fn walkthrough_path_impacts() {
        let model = walkthrough_model();
        let cfg = walkthrough_cfg();
        let d = [10.0, 30.0];
        let impacts: Vec<f64> = model.trees[0]
            .paths
            .iter()
            .filter(|p| p.vote == 0)
            .map(|p| path_impact(&d, p, &model, &cfg).unwrap())
            .collect();
        assert_eq!(impacts.len(), 2);
        assert!(impacts.iter().any(|&i| (i - 0.05).abs() < 1e-6));
        assert!(impacts.iter().any(|&i| (i - 1.0 / libm::sqrt(325.0)).abs() < 1e-6));
    }

    #[test]
    fn same_utility_path_has_zero_impact() {
        let model = walkthrough_model();
        let cfg = walkthrough_cfg();
        let low_path = model.trees[0].paths.iter().find(|p| p.vote == 1 && !p.matches(&[10.0, 30.0])).unwrap();
        assert_eq!(path_impact(&[10.0, 30.0], low_path, &model, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn walkthrough_retained_paths_and_responsibility() {
        let model = walkthrough_model();
        let scanner = TCruise::new(&model, walkthrough_cfg());
        let q = scanner.maximal_impact_paths(&[10.0, 30.0], 0).unwrap();
        assert_eq!(q.len(), 2);
        assert_eq!(q[0].perturbation.features(), vec![LEN, EMOTION]);
        assert_eq!(q[1].perturbation.features(), vec![EMOTION]);
        let s = scanner.responsibility(&[10.0, 30.0]).unwrap();
        let blue = 1.0 / libm::sqrt(325.0);
        assert!((s[EMOTION] - (0.05 + blue)).abs() < 1e-6);
        assert!((s[LEN] - blue).abs() < 1e-6);
    }

    #[test]
    fn keeps_best_path_per_feature_set() {
        // two high paths both perturbing feature 0 only: impacts 1/0.2 vs 1/0.5
        let tree = Tree {
            paths: vec![
                DecisionPath { conditions: vec![Condition::le(0, 0.3)], vote: 0, label_counts: vec![1, 0] },
                DecisionPath { conditions: vec![Condition::gt(0, 0.3), Condition::le(0, 0.5)], vote: 1, label_counts: vec![0, 1] },
                DecisionPath { conditions: vec![Condition::gt(0, 0.5), Condition::le(0, 0.8)], vote: 1, label_counts: vec![0, 1] },
                DecisionPath { conditions: vec![Condition::gt(0, 0.8)], vote: 0, label_counts: vec![1, 0] },
            ],
        };
        let model = RandomForest::new(FeatureSchema::unit(vec!["x".into()]), vec![tree], LabelSet::binary("hi", "lo"), 0).unwrap();
        let cfg = ImpactConfig::default();
        let q = TCruise::new(&model, cfg).maximal_impact_paths(&[0.6], 0).unwrap();
        assert_eq!(q.len(), 1);
        assert_eq!(q[0].path.path, 3);
        assert!((q[0].impact - 1.0 / (0.2 + cfg.epsilon)).abs() < 1e-6);
    }

    #[test]
    fn high_point_has_zero_responsibility() {
        let model = walkthrough_model();
        let s = feature_responsibility(&[10.0, 5.0], &model, &walkthrough_cfg()).unwrap();
        assert_eq!(s, vec![0.0, 0.0]);
    }

    #[test]
    fn baseline_zscores() {
        let raws = vec![vec![1.0, 5.0], vec![3.0, 5.0]];
        let b = Baseline::from_raw(&raws).unwrap();
        assert_eq!(b.normalize(&[2.0, 5.0]), vec![0.0, 0.0]);
        assert_eq!(b.normalize(&[3.0, 9.0]), vec![1.0, 0.0]);
        assert_eq!(Baseline::from_raw(&raws[..1]), Err(TcruiseError::BaselineTooSmall(1)));
    }
}
