//! Frequent term-set mining with Apriori candidate generation.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::FeatureError;

/// A frequent term set: terms sorted ascending, support as a document
/// fraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermSet {
    pub terms: Vec<String>,
    pub support: f64,
}

fn meets(count: usize, n: usize, min_support: f64) -> bool {
    // tolerance absorbs fractions like 2/3 that are not exact in binary
    count as f64 >= min_support * n as f64 - 1e-9
}

/// Mines every term set of at most `max_set_size` terms whose document
/// support is at least `min_support`. Each document counts a term once.
/// Output is ordered by set size, then lexicographically.
pub fn mine_jargon<S: AsRef<str>>(
    docs: &[Vec<S>],
    min_support: f64,
    max_set_size: usize,
) -> Result<Vec<TermSet>, FeatureError> {
    if !(min_support > 0.0 && min_support <= 1.0) {
        return Err(FeatureError::InvalidParams("minSupport must lie in (0, 1]".into()));
    }
    if docs.is_empty() || max_set_size == 0 {
        return Ok(Vec::new());
    }
    let mut ids: BTreeMap<&str, u32> = BTreeMap::new();
    for d in docs {
        for t in d {
            ids.entry(t.as_ref()).or_insert(0);
        }
    }
    let names: Vec<&str> = ids.keys().copied().collect();
    for (i, v) in ids.values_mut().enumerate() {
        *v = i as u32;
    }
    let transactions: Vec<BTreeSet<u32>> =
        docs.iter().map(|d| d.iter().map(|t| ids[t.as_ref()]).collect()).collect();
    let n = docs.len();

    let mut out: Vec<TermSet> = Vec::new();
    let emit = |level: &[(Vec<u32>, usize)], out: &mut Vec<TermSet>| {
        for (set, count) in level {
            out.push(TermSet {
                terms: set.iter().map(|&i| String::from(names[i as usize])).collect(),
                support: *count as f64 / n as f64,
            });
        }
    };

    let mut singles = alloc::vec![0usize; names.len()];
    for t in &transactions {
        for &i in t {
            singles[i as usize] += 1;
        }
    }
    let mut level: Vec<(Vec<u32>, usize)> = singles
        .iter()
        .enumerate()
        .filter(|(_, &c)| meets(c, n, min_support))
        .map(|(i, &c)| (alloc::vec![i as u32], c))
        .collect();
    emit(&level, &mut out);

    let mut size = 1;
    while size < max_set_size && level.len() > 1 {
        let frequent: BTreeSet<&[u32]> = level.iter().map(|(s, _)| s.as_slice()).collect();
        let mut next = Vec::new();
        for a in 0..level.len() {
            for b in a + 1..level.len() {
                let (x, y) = (&level[a].0, &level[b].0);
                if x[..size - 1] != y[..size - 1] {
                    // level is sorted, so no later b shares the prefix either
                    break;
                }
                let mut cand = x.clone();
                cand.push(y[size - 1]);
                // downward closure: every (size)-subset must be frequent
                let closed = (0..cand.len()).all(|skip| {
                    let sub: Vec<u32> =
                        cand.iter().enumerate().filter(|&(i, _)| i != skip).map(|(_, &v)| v).collect();
                    frequent.contains(sub.as_slice())
                });
                if !closed {
                    continue;
                }
                let count = transactions.iter().filter(|t| cand.iter().all(|i| t.contains(i))).count();
                if meets(count, n, min_support) {
                    next.push((cand, count));
                }
            }
        }
        emit(&next, &mut out);
        level = next;
        size += 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;

    fn docs(v: &[&[&str]]) -> Vec<Vec<String>> {
        v.iter().map(|d| d.iter().map(|s| String::from(*s)).collect()).collect()
    }

    #[test]
    fn small_example() {
        let r = mine_jargon(&docs(&[&["a", "b"], &["a", "b"], &["a", "c"]]), 2.0 / 3.0, 3).unwrap();
        let got: Vec<(Vec<&str>, f64)> =
            r.iter().map(|t| (t.terms.iter().map(String::as_str).collect(), t.support)).collect();
        assert_eq!(got, vec![(vec!["a"], 1.0), (vec!["b"], 2.0 / 3.0), (vec!["a", "b"], 2.0 / 3.0)]);
    }

    #[test]
    fn edge_cases() {
        let empty: Vec<Vec<String>> = Vec::new();
        assert!(mine_jargon(&empty, 0.5, 3).unwrap().is_empty());
        assert!(mine_jargon(&empty, 0.0, 3).is_err());
        assert!(mine_jargon(&empty, 1.5, 3).is_err());
        let r = mine_jargon(&docs(&[&["x", "y"], &["x", "z"]]), 1.0, 3).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].terms, vec!["x"]);
    }

    #[test]
    fn size_cap_respected() {
        let d = docs(&[&["a", "b", "c"], &["a", "b", "c"]]);
        let r = mine_jargon(&d, 0.5, 2).unwrap();
        assert_eq!(r.len(), 6);
        assert!(r.iter().all(|t| t.terms.len() <= 2));
    }
}
