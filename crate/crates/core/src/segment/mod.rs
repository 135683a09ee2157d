//! Topic modeling and topic segmentation.
//!
//! Documents are split into sentences, each sentence's tokens are folded into
//! an LDA model, and boundaries are placed where the topic similarity of
//! adjacent sentence windows dips into a deep valley.

mod eval;
mod lda;
mod tiling;

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use eval::{benchmark_segmenters, default_window_diff_k, window_diff, BenchmarkReport, SegmenterScore};
pub use lda::{fit_lda, LdaModel, LdaParams, TopicInference};
pub use tiling::{topictiling_segment, DepthThreshold, Segmenter, TilingParams, TopicTiler};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SegmentError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("vocabulary is empty after stopword removal")]
    EmptyVocabulary,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid topic model: {0}")]
    InvalidModel(String),
    #[error("invalid segmentation: {0}")]
    InvalidSegmentation(String),
    #[error("document length {doc_len} must exceed window size {k}")]
    WindowTooLarge { doc_len: usize, k: usize },
}

/// A contiguous slice of a document. Offsets count Unicode scalar values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Segment {
    pub start_char: usize,
    pub end_char: usize,
    pub text: String,
    pub topic_dist: Vec<f64>,
}

/// Boundaries as sentence-gap indices: gap `g` separates sentence `g - 1`
/// from sentence `g`, so valid gaps are `1..num_sentences`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segmentation {
    pub boundaries: Vec<usize>,
}

impl Segmentation {
    pub fn new(boundaries: Vec<usize>, num_sentences: usize) -> Result<Self, SegmentError> {
        let s = Self { boundaries };
        s.validate(num_sentences)?;
        Ok(s)
    }

    pub fn validate(&self, num_sentences: usize) -> Result<(), SegmentError> {
        if self.boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SegmentError::InvalidSegmentation("boundaries must be strictly increasing".into()));
        }
        if let Some(&b) = self.boundaries.iter().find(|&&b| b == 0 || b >= num_sentences) {
            return Err(SegmentError::InvalidSegmentation(alloc::format!(
                "boundary {b} outside 1..{num_sentences}"
            )));
        }
        Ok(())
    }

    /// Number of segments this segmentation induces.
    pub fn num_segments(&self) -> usize {
        self.boundaries.len() + 1
    }
}
