//! Exact maximum-influence search for small models.
//!
//! A forest is piecewise constant on the grid cut out by its split
//! thresholds, so the best perturbation restricted to a feature subset `F`
//! is found by visiting every grid cell over `F` and taking, per cell, the
//! L2-closest point to `d`. Impact here uses the general definition: gain
//! of the forest's own prediction at `d + p`, confidence = fraction of trees
//! agreeing with that prediction.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forest::{ForestError, RandomForest};
use crate::tcruise::{delta_to, ImpactConfig, Perturbation};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("instance too large for oracle: {0}")]
    TooLarge(&'static str),
    #[error("feature {0} outside the model schema")]
    UnknownFeature(usize),
    #[error(transparent)]
    Forest(#[from] ForestError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct OracleLimits {
    /// Largest feature subset [`exact_max_influence`] accepts.
    pub max_subset: usize,
    /// Largest number of distinct thresholds per feature.
    pub max_breakpoints: usize,
    /// Largest schema [`oracle_responsibility`] enumerates.
    pub max_features: usize,
}

impl Default for OracleLimits {
    fn default() -> Self {
        Self { max_subset: 4, max_breakpoints: 16, max_features: 6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleAnswer {
    pub perturbation: Perturbation,
    pub impact: f64,
}

/// Impact under the general definition:
/// `(U(M(d+p)) - U(M(d))) / |p|_2 * C(d+p)` with forest-majority `C`.
/// The empty perturbation has impact 0.
pub fn perturbation_impact(d: &[f64], p: &Perturbation, model: &RandomForest) -> Result<f64, OracleError> {
    if p.is_empty() {
        return Ok(0.0);
    }
    let base = model.utility_at(d)?;
    let moved = p.apply(d);
    let pred = model.predict(&moved)?;
    let gain = model.labels.utility(pred.label) - base;
    Ok(gain / p.norm() * pred.confidence)
}

/// Candidate coordinates for one feature: the closest value to `x` inside
/// each threshold cell that fits the domain.
fn cell_targets(x: f64, thresholds: &[f64], cfg: &ImpactConfig) -> Vec<f64> {
    let dom = cfg.domain;
    let mut out = Vec::with_capacity(thresholds.len() + 1);
    // cells: [dom.lower, t0], (t0, t1], ..., (t_last, dom.upper]
    let mut lower: Option<f64> = None;
    for i in 0..=thresholds.len() {
        let upper = thresholds.get(i).copied().unwrap_or(dom.upper).min(dom.upper);
        let target = match lower {
            Some(l) if x <= l => l + cfg.epsilon,
            None if x < dom.lower => dom.lower,
            _ if x > upper => upper,
            _ => x,
        };
        let lo_ok = lower.map_or(target >= dom.lower, |l| target > l);
        if lo_ok && target <= upper && dom.contains(target) {
            out.push(target);
        }
        if i < thresholds.len() {
            lower = Some(thresholds[i]);
        }
    }
    out.dedup();
    out
}

/// Best perturbation touching only features in `subset`. Ties keep the
/// first cell in enumeration order; with no improving cell the answer is
/// the empty perturbation with impact 0.
pub fn exact_max_influence(
    d: &[f64],
    subset: &[usize],
    model: &RandomForest,
    cfg: &ImpactConfig,
    limits: &OracleLimits,
) -> Result<OracleAnswer, OracleError> {
    if subset.len() > limits.max_subset {
        return Err(OracleError::TooLarge("feature subset exceeds bound"));
    }
    search(d, subset, model, cfg, limits)
}

fn search(
    d: &[f64],
    subset: &[usize],
    model: &RandomForest,
    cfg: &ImpactConfig,
    limits: &OracleLimits,
) -> Result<OracleAnswer, OracleError> {
    let n = model.num_features();
    if d.len() != n {
        return Err(ForestError::SchemaMismatch { expected: n, actual: d.len() }.into());
    }
    let mut axes: Vec<(usize, Vec<f64>)> = Vec::with_capacity(subset.len());
    for &f in subset {
        if f >= n {
            return Err(OracleError::UnknownFeature(f));
        }
        let ts = model.thresholds(f);
        if ts.len() > limits.max_breakpoints {
            return Err(OracleError::TooLarge("too many breakpoints on a feature"));
        }
        axes.push((f, cell_targets(d[f], &ts, cfg)));
    }
    let base = model.utility_at(d)?;
    let mut best = OracleAnswer { perturbation: Perturbation::empty(), impact: 0.0 };
    if axes.iter().any(|(_, t)| t.is_empty()) {
        return Ok(best);
    }
    let mut digits = vec![0usize; axes.len()];
    let mut point = d.to_vec();
    loop {
        let mut deltas = Vec::with_capacity(axes.len());
        for (k, (f, targets)) in axes.iter().enumerate() {
            let delta = delta_to(d[*f], targets[digits[k]]);
            point[*f] = d[*f] + delta;
            deltas.push((*f, delta));
        }
        let p = Perturbation::from_deltas(deltas);
        if !p.is_empty() {
            let pred = model.predict(&point)?;
            let gain = model.labels.utility(pred.label) - base;
            if gain > 0.0 {
                let impact = gain / p.norm() * pred.confidence;
                if impact > best.impact {
                    best = OracleAnswer { perturbation: p, impact };
                }
            }
        }
        // mixed-radix increment
        let mut k = 0;
        loop {
            if k == axes.len() {
                return Ok(best);
            }
            digits[k] += 1;
            if digits[k] < axes[k].1.len() {
                break;
            }
            digits[k] = 0;
            k += 1;
        }
    }
}

/// Maximum-influence perturbations over every feature subset, deduplicated,
/// with the impact of each distinct perturbation credited once to every
/// feature it touches.
pub fn oracle_perturbations(
    d: &[f64],
    model: &RandomForest,
    cfg: &ImpactConfig,
    limits: &OracleLimits,
) -> Result<Vec<OracleAnswer>, OracleError> {
    let n = model.num_features();
    if n > limits.max_features {
        return Err(OracleError::TooLarge("too many features for subset enumeration"));
    }
    let mut found: Vec<OracleAnswer> = Vec::new();
    for mask in 1u32..(1u32 << n) {
        let subset: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
        let ans = search(d, &subset, model, cfg, limits)?;
        if ans.perturbation.is_empty() {
            continue;
        }
        if !found.iter().any(|a| a.perturbation == ans.perturbation) {
            found.push(ans);
        }
    }
    Ok(found)
}

/// Exact responsibility: `S_i = sum of I(d, p)` over the distinct
/// maximum-influence perturbations `p` with `p_i != 0`.
pub fn oracle_responsibility(
    d: &[f64],
    model: &RandomForest,
    cfg: &ImpactConfig,
    limits: &OracleLimits,
) -> Result<Vec<f64>, OracleError> {
    let mut s = vec![0.0; model.num_features()];
    for ans in oracle_perturbations(d, model, cfg, limits)? {
        for &(f, _) in ans.perturbation.deltas() {
            s[f] += ans.impact;
        }
    }
    Ok(s)
}

/// Summary of how the heuristic's feature ranking matches the oracle's.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AgreementReport {
    pub instances: usize,
    /// Fraction of instances whose highest-responsibility feature agrees.
    pub top1_agreement: f64,
    /// Mean Spearman correlation over instances where both vectors vary.
    pub mean_rank_correlation: f64,
    pub correlated_instances: usize,
}

/// Index of the largest entry; ties go to the smaller index.
pub fn top_feature(s: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &x) in s.iter().enumerate() {
        if best.map_or(true, |b| x > s[b]) {
            best = Some(i);
        }
    }
    best
}

fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties; `None` when either
/// input is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for i in 0..a.len() {
        cov += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return None;
    }
    Some(cov / libm::sqrt(va * vb))
}

/// Aggregates per-instance `(heuristic, oracle)` responsibility pairs.
pub fn agreement(pairs: &[(Vec<f64>, Vec<f64>)]) -> AgreementReport {
    let mut agree = 0usize;
    let mut corr_sum = 0.0;
    let mut corr_n = 0usize;
    for (h, o) in pairs {
        if top_feature(h) == top_feature(o) {
            agree += 1;
        }
        if let Some(r) = spearman(h, o) {
            corr_sum += r;
            corr_n += 1;
        }
    }
    AgreementReport {
        instances: pairs.len(),
        top1_agreement: if pairs.is_empty() { 0.0 } else { agree as f64 / pairs.len() as f64 },
        mean_rank_correlation: if corr_n == 0 { 0.0 } else { corr_sum / corr_n as f64 },
        correlated_instances: corr_n,
    }
}
