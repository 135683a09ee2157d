//! TF-IDF vectors and centroid profiles.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Smoothed inverse document frequency, `ln((1 + N) / (1 + df)) + 1`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Idf {
    pub doc_count: usize,
    pub weights: BTreeMap<String, f64>,
}

impl Idf {
    pub fn fit<S: AsRef<str>>(docs: &[Vec<S>]) -> Self {
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for d in docs {
            let mut seen: Vec<&str> = d.iter().map(AsRef::as_ref).collect();
            seen.sort_unstable();
            seen.dedup();
            for t in seen {
                *df.entry(String::from(t)).or_insert(0) += 1;
            }
        }
        let n = docs.len();
        let weights = df.into_iter().map(|(t, c)| (t, smooth(n, c))).collect();
        Self { doc_count: n, weights }
    }

    /// Weight of `term`; unseen terms get the `df = 0` weight.
    pub fn weight(&self, term: &str) -> f64 {
        self.weights.get(term).copied().unwrap_or_else(|| smooth(self.doc_count, 0))
    }

    /// L2-normalized TF-IDF vector of a token list; empty for no tokens.
    pub fn vector<S: AsRef<str>>(&self, tokens: &[S]) -> BTreeMap<String, f64> {
        let mut tf: BTreeMap<String, f64> = BTreeMap::new();
        for t in tokens {
            *tf.entry(String::from(t.as_ref())).or_insert(0.0) += 1.0;
        }
        for (t, v) in tf.iter_mut() {
            *v *= self.weight(t);
        }
        normalize(&mut tf);
        tf
    }
}

fn smooth(n: usize, df: usize) -> f64 {
    libm::log((1.0 + n as f64) / (1.0 + df as f64)) + 1.0
}

fn normalize(v: &mut BTreeMap<String, f64>) {
    let norm = libm::sqrt(v.values().map(|x| x * x).sum::<f64>());
    if norm > 0.0 {
        v.values_mut().for_each(|x| *x /= norm);
    }
}

/// Centroid of the unit TF-IDF vectors of a document sample.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TfIdfProfile {
    pub centroid: BTreeMap<String, f64>,
    pub documents: usize,
}

impl TfIdfProfile {
    pub fn build<S: AsRef<str>>(docs: &[Vec<S>], idf: &Idf) -> Self {
        let mut centroid: BTreeMap<String, f64> = BTreeMap::new();
        for d in docs {
            for (t, x) in idf.vector(d) {
                *centroid.entry(t).or_insert(0.0) += x;
            }
        }
        if !docs.is_empty() {
            let n = docs.len() as f64;
            centroid.values_mut().for_each(|x| *x /= n);
        }
        Self { centroid, documents: docs.len() }
    }

    /// The `n` heaviest centroid terms, ties alphabetical.
    pub fn top_terms(&self, n: usize) -> Vec<String> {
        let mut terms: Vec<(&String, f64)> = self.centroid.iter().map(|(t, &w)| (t, w)).collect();
        terms.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        terms.into_iter().take(n).map(|(t, _)| t.clone()).collect()
    }
}

/// Cosine similarity between a token list's TF-IDF vector and a profile
/// centroid; 0 when either side is empty or they share no term.
pub fn tfidf_similarity<S: AsRef<str>>(tokens: &[S], profile: &TfIdfProfile, idf: &Idf) -> f64 {
    let v = idf.vector(tokens);
    let dot: f64 = v.iter().filter_map(|(t, x)| profile.centroid.get(t).map(|c| c * x)).sum();
    let cn = libm::sqrt(profile.centroid.values().map(|x| x * x).sum::<f64>());
    if dot == 0.0 || cn == 0.0 {
        return 0.0;
    }
    // v is unit length already
    (dot / cn).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn d(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn identical_single_doc_is_one() {
        let docs = vec![d("battery screen battery"), d("price shipping")];
        let idf = Idf::fit(&docs);
        let p = TfIdfProfile::build(&docs[..1], &idf);
        assert!((tfidf_similarity(&docs[0], &p, &idf) - 1.0).abs() < 1e-12);
        assert_eq!(tfidf_similarity(&d("price shipping"), &p, &idf), 0.0);
        assert_eq!(tfidf_similarity(&Vec::<String>::new(), &p, &idf), 0.0);
    }

    #[test]
    fn hand_computed_overlap() {
        // five-term vocabulary over three documents
        let docs = vec![d("a b c"), d("a d"), d("e")];
        let idf = Idf::fit(&docs);
        let w = |df: f64| libm::log(4.0 / (1.0 + df)) + 1.0;
        assert!((idf.weight("a") - w(2.0)).abs() < 1e-15);
        let profile = TfIdfProfile::build(&docs[..1], &idf);
        // profile: a, b, c with weights w(2), w(1), w(1) normalized
        let q = d("a b d");
        let (wa, wb) = (w(2.0), w(1.0));
        let pn = libm::sqrt(wa * wa + 2.0 * wb * wb);
        let qn = libm::sqrt(wa * wa + 2.0 * wb * wb);
        let expected = (wa * wa + wb * wb) / (pn * qn);
        assert!((tfidf_similarity(&q, &profile, &idf) - expected).abs() < 1e-12);
    }

    #[test]
    fn top_terms_ordered() {
        let docs = vec![d("x x y"), d("x z")];
        let idf = Idf::fit(&docs);
        let p = TfIdfProfile::build(&docs, &idf);
        assert_eq!(p.top_terms(2)[0], "x");
    }
}
