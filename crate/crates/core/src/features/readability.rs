//! Closed-form readability indices.

use serde::{Deserialize, Serialize};

use crate::text::{sentence_spans, word_spans};

/// Counts the indices are computed from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TextCounts {
    /// Alphanumeric characters inside words.
    pub letters: usize,
    pub words: usize,
    pub sentences: usize,
    pub syllables: usize,
    /// Words of three or more syllables.
    pub complex_words: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReadabilityScores {
    pub ari: f64,
    pub coleman_liau: f64,
    pub flesch_reading_ease: f64,
    pub gunning_fog: f64,
    pub smog: f64,
    /// Set when the text has no words; all indices are then 0.
    pub degenerate: bool,
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y')
}

/// Vowel-group syllable estimate: one per run of vowels, minus a silent
/// final `e` (but not `-le`), at least one for any word.
pub fn syllables(word: &str) -> usize {
    let w: alloc::vec::Vec<char> = word.chars().flat_map(char::to_lowercase).collect();
    if w.is_empty() {
        return 0;
    }
    let mut groups = 0;
    let mut prev = false;
    for &c in &w {
        let v = is_vowel(c);
        if v && !prev {
            groups += 1;
        }
        prev = v;
    }
    let n = w.len();
    if groups > 1 && w[n - 1] == 'e' && !(n >= 2 && w[n - 2] == 'l') && !is_vowel(w[n - 2]) {
        groups -= 1;
    }
    groups.max(1)
}

pub fn text_counts(text: &str) -> TextCounts {
    let mut c = TextCounts { sentences: sentence_spans(text).len(), ..TextCounts::default() };
    for r in word_spans(text) {
        let w = &text[r];
        c.words += 1;
        c.letters += w.chars().count();
        let s = syllables(w);
        c.syllables += s;
        if s >= 3 {
            c.complex_words += 1;
        }
    }
    c
}

pub fn readability_from_counts(c: &TextCounts) -> ReadabilityScores {
    if c.words == 0 || c.sentences == 0 {
        return ReadabilityScores { degenerate: true, ..ReadabilityScores::default() };
    }
    let words = c.words as f64;
    let sentences = c.sentences as f64;
    let wps = words / sentences;
    let l = 100.0 * c.letters as f64 / words;
    let s = 100.0 * sentences / words;
    ReadabilityScores {
        ari: 4.71 * (c.letters as f64 / words) + 0.5 * wps - 21.43,
        coleman_liau: 0.0588 * l - 0.296 * s - 15.8,
        flesch_reading_ease: 206.835 - 1.015 * wps - 84.6 * (c.syllables as f64 / words),
        gunning_fog: 0.4 * (wps + 100.0 * c.complex_words as f64 / words),
        smog: 1.0430 * libm::sqrt(c.complex_words as f64 * 30.0 / sentences) + 3.1291,
        degenerate: false,
    }
}

pub fn readability_scores(text: &str) -> ReadabilityScores {
    readability_from_counts(&text_counts(text))
}
