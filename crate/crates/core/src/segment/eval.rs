//! WindowDiff and segmenter benchmarking.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{SegmentError, Segmentation, Segmenter};
use crate::text::sentence_spans;

/// Half the mean reference segment length, rounded, at least 1.
pub fn default_window_diff_k(reference: &Segmentation, doc_len: usize) -> usize {
    let mean = doc_len as f64 / reference.num_segments() as f64;
    (libm::round(mean / 2.0) as usize).max(1)
}

/// Fraction of the `doc_len - k` windows `(i, i + k]` over sentence gaps in
/// which the two segmentations place a different number of boundaries.
pub fn window_diff(
    reference: &Segmentation,
    hypothesis: &Segmentation,
    doc_len: usize,
    k: usize,
) -> Result<f64, SegmentError> {
    if k == 0 {
        return Err(SegmentError::InvalidParams("k must be at least 1".into()));
    }
    if doc_len <= k {
        return Err(SegmentError::WindowTooLarge { doc_len, k });
    }
    reference.validate(doc_len)?;
    hypothesis.validate(doc_len)?;
    let count = |s: &Segmentation, i: usize| s.boundaries.iter().filter(|&&b| b > i && b <= i + k).count();
    let windows = doc_len - k;
    let differing = (0..windows).filter(|&i| count(reference, i) != count(hypothesis, i)).count();
    Ok(differing as f64 / windows as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SegmenterScore {
    pub name: String,
    pub mean_window_diff: f64,
    /// Documents too short for a window were skipped.
    pub scored_documents: usize,
}

/// Segmenters ranked best first (lowest mean WindowDiff).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BenchmarkReport {
    pub ranking: Vec<SegmenterScore>,
    pub recommended: Option<String>,
}

/// Scores every segmenter against the gold corpus with the default `k` per
/// document. Equal means keep registration order. Documents with no more
/// sentences than `k` are skipped for all segmenters alike.
pub fn benchmark_segmenters(
    segmenters: &[&dyn Segmenter],
    gold: &[(String, Segmentation)],
) -> Result<BenchmarkReport, SegmentError> {
    if gold.is_empty() {
        return Err(SegmentError::EmptyCorpus);
    }
    let mut ranking: Vec<SegmenterScore> = Vec::with_capacity(segmenters.len());
    for seg in segmenters {
        let mut total = 0.0;
        let mut scored = 0;
        for (doc, reference) in gold {
            let n = sentence_spans(doc).len();
            let k = default_window_diff_k(reference, n);
            if n <= k {
                continue;
            }
            let hyp = seg.boundaries(doc);
            total += window_diff(reference, &hyp, n, k)?;
            scored += 1;
        }
        let mean = if scored == 0 { 0.0 } else { total / scored as f64 };
        ranking.push(SegmenterScore { name: seg.name().into(), mean_window_diff: mean, scored_documents: scored });
    }
    // stable sort keeps registration order among equals
    ranking.sort_by(|a, b| a.mean_window_diff.total_cmp(&b.mean_window_diff));
    let recommended = ranking.first().map(|s| s.name.clone());
    Ok(BenchmarkReport { ranking, recommended })
}
