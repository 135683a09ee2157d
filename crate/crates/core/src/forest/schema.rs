use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::ForestError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureCategory {
    Informativeness,
    Topic,
    Subjectivity,
    Readability,
    Similarity,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FeatureSpec {
    pub name: String,
    pub category: FeatureCategory,
    pub raw_min: f64,
    pub raw_max: f64,
}

/// Ordered feature list; feature `i` is coordinate `i` of every vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    features: Vec<FeatureSpec>,
}

impl FeatureSchema {
    pub fn new(features: Vec<FeatureSpec>) -> Result<Self, ForestError> {
        for (i, f) in features.iter().enumerate() {
            if features[..i].iter().any(|g| g.name == f.name) {
                return Err(ForestError::InvalidSchema(alloc::format!(
                    "duplicate feature name {:?}",
                    f.name
                )));
            }
            if !(f.raw_min < f.raw_max) {
                return Err(ForestError::InvalidSchema(alloc::format!(
                    "feature {:?}: rawMin must be below rawMax",
                    f.name
                )));
            }
        }
        Ok(Self { features })
    }

    /// Schema over already-normalized features named `names`.
    pub fn unit(names: Vec<String>) -> Self {
        let features = names
            .into_iter()
            .map(|name| FeatureSpec { name, category: FeatureCategory::Custom, raw_min: 0.0, raw_max: 1.0 })
            .collect();
        Self { features }
    }

    /// Fits `rawMin`/`rawMax` to the observed range of each column. Constant
    /// columns get a unit-width range so the invariant `rawMin < rawMax` holds.
    pub fn fit(
        names: &[(String, FeatureCategory)],
        raw_rows: &[Vec<f64>],
    ) -> Result<Self, ForestError> {
        let mut features = Vec::with_capacity(names.len());
        for (i, (name, category)) in names.iter().enumerate() {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for row in raw_rows {
                if row.len() != names.len() {
                    return Err(ForestError::SchemaMismatch { expected: names.len(), actual: row.len() });
                }
                lo = lo.min(row[i]);
                hi = hi.max(row[i]);
            }
            if !lo.is_finite() || !hi.is_finite() {
                lo = 0.0;
                hi = 1.0;
            }
            if hi <= lo {
                hi = lo + 1.0;
            }
            features.push(FeatureSpec { name: name.clone(), category: *category, raw_min: lo, raw_max: hi });
        }
        Self::new(features)
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn indices_in(&self, category: FeatureCategory) -> Vec<usize> {
        (0..self.features.len()).filter(|&i| self.features[i].category == category).collect()
    }

    /// Min-max scales raw values into `[0, 1]`, clamping out-of-range input.
    pub fn normalize(&self, raw: &[f64]) -> Result<FeatureVector, ForestError> {
        if raw.len() != self.features.len() {
            return Err(ForestError::SchemaMismatch { expected: self.features.len(), actual: raw.len() });
        }
        let values = raw
            .iter()
            .zip(&self.features)
            .map(|(&x, f)| {
                let v = (x - f.raw_min) / (f.raw_max - f.raw_min);
                if v.is_nan() {
                    0.0
                } else {
                    v.clamp(0.0, 1.0)
                }
            })
            .collect();
        Ok(FeatureVector(values))
    }
}

/// A point in feature space. Vectors produced by [`FeatureSchema::normalize`]
/// lie in `[0, 1]^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl core::ops::Deref for FeatureVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}
