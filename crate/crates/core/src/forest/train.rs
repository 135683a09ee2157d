//! Bagged CART training with Gini splits on normalized features.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Condition, DecisionPath, FeatureSchema, FeatureVector, ForestError, LabelId, LabelSet, RandomForest, Tree};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ForestParams {
    pub num_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Candidate features per split; `None` uses `ceil(sqrt(n))`.
    pub features_per_split: Option<usize>,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self { num_trees: 30, max_depth: 6, min_leaf: 2, features_per_split: None, seed: 7 }
    }
}

/// Trains a random forest. Each tree draws a bootstrap sample and its own
/// ChaCha stream derived from `params.seed`, so results are reproducible.
pub fn train_forest(
    schema: FeatureSchema,
    labels: LabelSet,
    rows: &[FeatureVector],
    targets: &[LabelId],
    params: &ForestParams,
) -> Result<RandomForest, ForestError> {
    if rows.is_empty() {
        return Err(ForestError::EmptyCorpus);
    }
    if rows.len() != targets.len() {
        return Err(ForestError::InvalidParams("rows and labels differ in length".into()));
    }
    if params.num_trees == 0 || params.min_leaf == 0 {
        return Err(ForestError::InvalidParams("numTrees and minLeaf must be at least 1".into()));
    }
    let n = schema.len();
    if n == 0 {
        return Err(ForestError::InvalidSchema("schema has no features".into()));
    }
    for r in rows {
        if r.len() != n {
            return Err(ForestError::SchemaMismatch { expected: n, actual: r.len() });
        }
    }
    if let Some(&t) = targets.iter().find(|&&t| t as usize >= labels.len()) {
        return Err(ForestError::InvalidParams(alloc::format!("label id {t} out of range")));
    }
    let first = targets[0];
    if targets.iter().all(|&t| t == first) {
        return Err(ForestError::DegenerateLabels);
    }

    let mtry = params
        .features_per_split
        .unwrap_or_else(|| libm::ceil(libm::sqrt(n as f64)) as usize)
        .clamp(1, n);

    let mut trees = Vec::with_capacity(params.num_trees);
    for t in 0..params.num_trees {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        rng.set_stream(t as u64);
        let sample: Vec<usize> = (0..rows.len()).map(|_| rng.gen_range(0..rows.len())).collect();
        let mut builder = Builder {
            rows,
            targets,
            labels: &labels,
            n_features: n,
            mtry,
            max_depth: params.max_depth,
            min_leaf: params.min_leaf,
            rng,
            paths: Vec::new(),
        };
        let mut conds = Vec::new();
        builder.grow(sample, 0, &mut conds);
        trees.push(Tree { paths: builder.paths });
    }
    RandomForest::new(schema, trees, labels, params.seed)
}

struct Builder<'a> {
    rows: &'a [FeatureVector],
    targets: &'a [LabelId],
    labels: &'a LabelSet,
    n_features: usize,
    mtry: usize,
    max_depth: usize,
    min_leaf: usize,
    rng: ChaCha8Rng,
    paths: Vec<DecisionPath>,
}

struct Split {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

fn gini(counts: &[u64], total: u64) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t) * (c as f64 / t)).sum::<f64>()
}

impl Builder<'_> {
    fn counts(&self, sample: &[usize]) -> Vec<u64> {
        let mut c = vec![0u64; self.labels.len()];
        for &i in sample {
            c[self.targets[i] as usize] += 1;
        }
        c
    }

    fn grow(&mut self, sample: Vec<usize>, depth: usize, conds: &mut Vec<Condition>) {
        let counts = self.counts(&sample);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let split = if depth >= self.max_depth || pure || sample.len() < 2 * self.min_leaf {
            None
        } else {
            self.best_split(&sample, &counts)
        };
        match split {
            None => {
                let vote = self.labels.resolve(&counts);
                self.paths.push(DecisionPath { conditions: conds.clone(), vote, label_counts: counts });
            }
            Some(s) => {
                let (left, right): (Vec<usize>, Vec<usize>) =
                    sample.iter().partition(|&&i| self.rows[i][s.feature] <= s.threshold);
                conds.push(Condition::le(s.feature, s.threshold));
                self.grow(left, depth + 1, conds);
                conds.pop();
                conds.push(Condition::gt(s.feature, s.threshold));
                self.grow(right, depth + 1, conds);
                conds.pop();
            }
        }
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let mut all: Vec<usize> = (0..self.n_features).collect();
        for i in 0..self.mtry {
            let j = self.rng.gen_range(i..all.len());
            all.swap(i, j);
        }
        all.truncate(self.mtry);
        all
    }

    fn best_split(&mut self, sample: &[usize], counts: &[u64]) -> Option<Split> {
        let total = sample.len() as u64;
        let parent = gini(counts, total);
        let mut best: Option<Split> = None;
        let k = self.labels.len();
        for f in self.candidate_features() {
            let mut order: Vec<(f64, LabelId)> =
                sample.iter().map(|&i| (self.rows[i][f], self.targets[i])).collect();
            order.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left = vec![0u64; k];
            let mut right = counts.to_vec();
            for pos in 0..order.len() - 1 {
                let (x, y) = order[pos];
                left[y as usize] += 1;
                right[y as usize] -= 1;
                let next = order[pos + 1].0;
                if next <= x {
                    continue;
                }
                let nl = pos as u64 + 1;
                let nr = total - nl;
                if (nl as usize) < self.min_leaf || (nr as usize) < self.min_leaf {
                    continue;
                }
                let impurity = (nl as f64 * gini(&left, nl) + nr as f64 * gini(&right, nr)) / total as f64;
                if impurity < best.as_ref().map_or(parent - 1e-12, |b| b.impurity) {
                    best = Some(Split { feature: f, threshold: x + (next - x) / 2.0, impurity });
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::String;

    fn grid_data(n_points: usize, seed: u64) -> (Vec<FeatureVector>, Vec<LabelId>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut ys = Vec::new();
        for _ in 0..n_points {
            let v: Vec<f64> = (0..3).map(|_| rng.gen::<f64>()).collect();
            // label 0 = high when x0 > 0.5
            ys.push(if v[0] > 0.5 { 0 } else { 1 });
            rows.push(FeatureVector(v));
        }
        (rows, ys)
    }

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| alloc::format!("x{i}")).collect()
    }

    #[test]
    fn learns_threshold_rule() {
        let (rows, ys) = grid_data(200, 1);
        let params = ForestParams { num_trees: 5, max_depth: 3, min_leaf: 1, features_per_split: Some(3), seed: 3 };
        let m = train_forest(FeatureSchema::unit(names(3)), LabelSet::binary("high", "low"), &rows, &ys, &params).unwrap();
        let (test, ty) = grid_data(500, 99);
        let correct = test.iter().zip(&ty).filter(|(r, &y)| m.predict(r).unwrap().label == y).count();
        assert!(correct as f64 / 500.0 >= 0.95, "accuracy {}", correct as f64 / 500.0);
    }

    #[test]
    fn single_label_is_degenerate() {
        let rows = vec![FeatureVector(vec![0.1]), FeatureVector(vec![0.2])];
        let err = train_forest(FeatureSchema::unit(names(1)), LabelSet::binary("h", "l"), &rows, &[1, 1], &ForestParams::default());
        assert_eq!(err.unwrap_err(), ForestError::DegenerateLabels);
        let err = train_forest(FeatureSchema::unit(names(1)), LabelSet::binary("h", "l"), &[], &[], &ForestParams::default());
        assert_eq!(err.unwrap_err(), ForestError::EmptyCorpus);
    }

    #[test]
    fn deterministic_given_seed() {
        let (rows, ys) = grid_data(120, 5);
        let p = ForestParams { seed: 11, ..ForestParams::default() };
        let a = train_forest(FeatureSchema::unit(names(3)), LabelSet::binary("h", "l"), &rows, &ys, &p).unwrap();
        let b = train_forest(FeatureSchema::unit(names(3)), LabelSet::binary("h", "l"), &rows, &ys, &p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn every_point_matches_one_path_per_tree() {
        let (rows, ys) = grid_data(150, 8);
        let m = train_forest(FeatureSchema::unit(names(3)), LabelSet::binary("h", "l"), &rows, &ys, &ForestParams::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..1000 {
            let d: Vec<f64> = (0..3).map(|_| rng.gen::<f64>()).collect();
            for tree in &m.trees {
                assert_eq!(tree.paths.iter().filter(|p| p.matches(&d)).count(), 1);
            }
        }
    }

    #[test]
    fn leaf_votes_follow_counts() {
        let (rows, ys) = grid_data(100, 4);
        let m = train_forest(FeatureSchema::unit(names(3)), LabelSet::binary("h", "l"), &rows, &ys, &ForestParams::default()).unwrap();
        for path in m.trees.iter().flat_map(|t| &t.paths) {
            assert!(path.total_count() >= 1);
            assert_eq!(path.vote, m.labels.resolve(&path.label_counts));
        }
    }
}
