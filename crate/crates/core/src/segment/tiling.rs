//! Sliding-window topic segmentation with TextTiling depth scores.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

use super::{LdaModel, Segment, Segmentation};
use crate::text::{char_offset, content_tokens, sentence_spans};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "mode", content = "value")]
pub enum DepthThreshold {
    /// `mean(depth) + 0.5 * std(depth)` over the document's gaps, but never
    /// below `TilingParams::min_depth`.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TilingParams {
    /// Sentences on each side of a gap.
    pub window: usize,
    pub threshold: DepthThreshold,
    /// Floor for the automatic threshold, so near-constant similarity curves
    /// do not produce boundaries out of sampling noise.
    pub min_depth: f64,
    pub min_segment_sentences: usize,
}

impl Default for TilingParams {
    fn default() -> Self {
        Self { window: 3, threshold: DepthThreshold::Auto, min_depth: 0.1, min_segment_sentences: 2 }
    }
}

/// Anything that can place sentence-gap boundaries in a document.
pub trait Segmenter {
    fn name(&self) -> &str;
    fn boundaries(&self, text: &str) -> Segmentation;
}

/// The LDA-backed segmenter as a [`Segmenter`].
pub struct TopicTiler<'m> {
    pub name: String,
    pub model: &'m LdaModel,
    pub params: TilingParams,
}

impl Segmenter for TopicTiler<'_> {
    fn name(&self) -> &str {
        &self.name
    }

    fn boundaries(&self, text: &str) -> Segmentation {
        tile(text, self.model, &self.params).boundaries
    }
}

struct Tiling {
    spans: Vec<Range<usize>>,
    hists: Vec<Vec<u32>>,
    boundaries: Segmentation,
}

fn cosine(a: &[u32], b: &[u32]) -> Option<f64> {
    let dot: f64 = a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum();
    let na: f64 = a.iter().map(|&x| (x as f64) * (x as f64)).sum();
    let nb: f64 = b.iter().map(|&x| (x as f64) * (x as f64)).sum();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some(dot / (libm::sqrt(na) * libm::sqrt(nb)))
}

fn sum_hists(hists: &[Vec<u32>], k: usize) -> Vec<u32> {
    let mut out = vec![0u32; k];
    for h in hists {
        for (o, &x) in out.iter_mut().zip(h) {
            *o += x;
        }
    }
    out
}

/// Depth of each gap: how far the similarity curve climbs on both sides
/// before it starts to fall again.
fn depth_scores(sim: &[f64]) -> Vec<f64> {
    (0..sim.len())
        .map(|i| {
            let mut l = i;
            while l > 0 && sim[l - 1] >= sim[l] {
                l -= 1;
            }
            let mut r = i;
            while r + 1 < sim.len() && sim[r + 1] >= sim[r] {
                r += 1;
            }
            (sim[l] - sim[i]) + (sim[r] - sim[i])
        })
        .collect()
}

fn tile(text: &str, model: &LdaModel, params: &TilingParams) -> Tiling {
    let spans = sentence_spans(text);
    let k = model.k;
    let sentence_tokens: Vec<Vec<String>> = spans.iter().map(|r| content_tokens(&text[r.clone()])).collect();
    let all: Vec<&str> = sentence_tokens.iter().flatten().map(String::as_str).collect();
    let inferred = model.infer(&all);
    let mut hists = Vec::with_capacity(spans.len());
    let mut pos = 0;
    for toks in &sentence_tokens {
        let mut h = vec![0u32; k];
        for a in &inferred.assignments[pos..pos + toks.len()] {
            if let Some(t) = a {
                h[*t] += 1;
            }
        }
        pos += toks.len();
        hists.push(h);
    }

    let n = spans.len();
    if n < 2 {
        return Tiling { spans, hists, boundaries: Segmentation::default() };
    }
    let w = params.window.max(1);
    // sim[i] belongs to gap i + 1
    let sim: Vec<f64> = (1..n)
        .map(|g| {
            let left = sum_hists(&hists[g.saturating_sub(w)..g], k);
            let right = sum_hists(&hists[g..(g + w).min(n)], k);
            cosine(&left, &right).unwrap_or(1.0)
        })
        .collect();
    let depth = depth_scores(&sim);
    let threshold = match params.threshold {
        DepthThreshold::Fixed(t) => t,
        DepthThreshold::Auto => {
            let m = depth.len() as f64;
            let mean = depth.iter().sum::<f64>() / m;
            let var = depth.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / m;
            (mean + 0.5 * libm::sqrt(var)).max(params.min_depth)
        }
    };
    let mut cuts: Vec<usize> = (0..sim.len())
        .filter(|&i| {
            let left_ok = i == 0 || sim[i] <= sim[i - 1];
            let right_ok = i + 1 == sim.len() || sim[i] < sim[i + 1];
            left_ok && right_ok && depth[i] > threshold
        })
        .map(|i| i + 1)
        .collect();
    merge_short(&mut cuts, &hists, params.min_segment_sentences, k);
    Tiling { spans, hists, boundaries: Segmentation { boundaries: cuts } }
}

/// Merges segments with fewer than `min_len` sentences into whichever
/// neighbor has the more similar topic histogram; ties go left.
fn merge_short(cuts: &mut Vec<usize>, hists: &[Vec<u32>], min_len: usize, k: usize) {
    let n = hists.len();
    loop {
        let mut edges = Vec::with_capacity(cuts.len() + 2);
        edges.push(0);
        edges.extend_from_slice(cuts);
        edges.push(n);
        let segs: Vec<Range<usize>> = edges.windows(2).map(|e| e[0]..e[1]).collect();
        if segs.len() < 2 {
            return;
        }
        let Some(i) = segs.iter().position(|s| s.len() < min_len) else {
            return;
        };
        let own = sum_hists(&hists[segs[i].clone()], k);
        let sim_to = |j: usize| cosine(&own, &sum_hists(&hists[segs[j].clone()], k)).unwrap_or(0.0);
        let merge_left = if i == 0 {
            false
        } else if i + 1 == segs.len() {
            true
        } else {
            sim_to(i - 1) >= sim_to(i + 1)
        };
        // removing the cut between segment i and its chosen neighbor
        let cut_idx = if merge_left { i - 1 } else { i };
        cuts.remove(cut_idx);
    }
}

/// Segments `text` into topically coherent runs of sentences. Segments tile
/// the text exactly; a text without sentences is a single segment (or none
/// when empty).
pub fn topictiling_segment(text: &str, model: &LdaModel, params: &TilingParams) -> Vec<Segment> {
    if text.is_empty() {
        return Vec::new();
    }
    let t = tile(text, model, params);
    if t.spans.is_empty() {
        return vec![Segment { start_char: 0, end_char: text.chars().count(), text: text.into(), topic_dist: model.uniform() }];
    }
    let n = t.spans.len();
    let mut edges = vec![0];
    edges.extend_from_slice(&t.boundaries.boundaries);
    edges.push(n);
    let k = model.k;
    edges
        .windows(2)
        .map(|e| {
            let start = if e[0] == 0 { 0 } else { t.spans[e[0]].start };
            let end = if e[1] == n { text.len() } else { t.spans[e[1]].start };
            let h = sum_hists(&t.hists[e[0]..e[1]], k);
            let total: u32 = h.iter().sum();
            let denom = total as f64 + k as f64 * model.alpha;
            let mut dist: Vec<f64> = h.iter().map(|&c| (c as f64 + model.alpha) / denom).collect();
            let s: f64 = dist.iter().sum();
            dist.iter_mut().for_each(|x| *x /= s);
            Segment {
                start_char: char_offset(text, start),
                end_char: char_offset(text, end),
                text: text[start..end].into(),
                topic_dist: dist,
            }
        })
        .collect()
}
