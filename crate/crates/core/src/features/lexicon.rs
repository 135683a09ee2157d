//! Open valence lexicon and subjectivity scores.
//!
//! Lexicon files are tab-separated `term<TAB>valence<TAB>tags`, where tags
//! is a comma-separated (possibly empty) list such as `social,inclusive`.
//! Lines starting with `#` and blank lines are ignored.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::text::{sentence_spans, tokens};

const BUILTIN_TSV: &str = include_str!("../../data/lexicon.tsv");

pub const FIRST_PERSON: &[&str] = &["i", "me", "mine", "my", "our", "ours", "us", "we"];

const ADJECTIVE_SUFFIXES: &[&str] = &["able", "al", "ful", "ible", "ic", "ish", "ive", "less", "ous"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexEntry {
    pub valence: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tags: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Lexicon {
    pub entries: BTreeMap<String, LexEntry>,
}

impl Lexicon {
    /// The lexicon shipped with the crate.
    pub fn builtin() -> Self {
        Self::parse_tsv(BUILTIN_TSV).expect("packaged lexicon is well formed")
    }

    pub fn parse_tsv(src: &str) -> Result<Self, FeatureError> {
        let mut entries = BTreeMap::new();
        for (n, line) in src.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            let term = cols.next().unwrap_or("").trim().to_lowercase();
            let valence: f64 = cols
                .next()
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| FeatureError::Lexicon(format!("line {}: missing or bad valence", n + 1)))?;
            if term.is_empty() || !(-1.0..=1.0).contains(&valence) {
                return Err(FeatureError::Lexicon(format!("line {}: bad term or valence outside [-1, 1]", n + 1)));
            }
            let tags = cols
                .next()
                .map(|t| t.split(',').map(str::trim).filter(|s| !s.is_empty()).map(ToString::to_string).collect())
                .unwrap_or_default();
            entries.insert(term, LexEntry { valence, tags });
        }
        Ok(Self { entries })
    }

    /// Lexicon of bare valences, no tags.
    pub fn from_valences<'a>(pairs: impl IntoIterator<Item = (&'a str, f64)>) -> Self {
        Self {
            entries: pairs.into_iter().map(|(t, v)| (t.to_lowercase(), LexEntry { valence: v, tags: Vec::new() })).collect(),
        }
    }

    pub fn get(&self, term: &str) -> Option<&LexEntry> {
        self.entries.get(term)
    }

    pub fn has_tag(&self, term: &str, tag: &str) -> bool {
        self.entries.get(term).is_some_and(|e| e.tags.iter().any(|t| t == tag))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SubjectivityScores {
    /// Mean valence over lexicon hits; 0 without hits.
    pub mean_valence: f64,
    /// Mean absolute valence over lexicon hits.
    pub abs_valence: f64,
    /// Population standard deviation of per-sentence mean valence.
    pub polarity_spread: f64,
    /// Uppercase letters over letters.
    pub upper_case_ratio: f64,
    pub first_person_count: usize,
    pub first_person_ratio: f64,
    /// Share of tokens with a typical adjective suffix; stands in for a
    /// part-of-speech adjective rate.
    pub adjective_surrogate_ratio: f64,
    /// Lexicon hits over tokens.
    pub coverage: f64,
    pub positive_ratio: f64,
    pub negative_ratio: f64,
    pub social_ratio: f64,
    pub inclusive_ratio: f64,
    /// Exclamation marks per sentence.
    pub exclamation_ratio: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, libm::sqrt(v))
}

pub fn subjectivity_scores(text: &str, lexicon: &Lexicon) -> SubjectivityScores {
    let toks = tokens(text);
    let n_tok = toks.len();
    let ratio = |c: usize| if n_tok == 0 { 0.0 } else { c as f64 / n_tok as f64 };

    let (mut letters, mut upper) = (0usize, 0usize);
    for c in text.chars().filter(|c| c.is_alphabetic()) {
        letters += 1;
        if c.is_uppercase() {
            upper += 1;
        }
    }

    let hits: Vec<f64> = toks.iter().filter_map(|t| lexicon.get(t)).map(|e| e.valence).collect();
    let (mean_valence, _) = mean_std(&hits);
    let abs_valence = if hits.is_empty() { 0.0 } else { hits.iter().map(|v| v.abs()).sum::<f64>() / hits.len() as f64 };

    let sentences = sentence_spans(text);
    let per_sentence: Vec<f64> = sentences
        .iter()
        .filter_map(|r| {
            let vs: Vec<f64> = tokens(&text[r.clone()]).iter().filter_map(|t| lexicon.get(t)).map(|e| e.valence).collect();
            (!vs.is_empty()).then(|| vs.iter().sum::<f64>() / vs.len() as f64)
        })
        .collect();
    let (_, polarity_spread) = mean_std(&per_sentence);

    let first_person_count = toks.iter().filter(|t| FIRST_PERSON.binary_search(&t.as_str()).is_ok()).count();
    let adjectives = toks
        .iter()
        .filter(|t| t.chars().count() > 4 && ADJECTIVE_SUFFIXES.iter().any(|s| t.ends_with(s)))
        .count();
    let positive = hits.iter().filter(|&&v| v > 0.0).count();
    let negative = hits.iter().filter(|&&v| v < 0.0).count();
    let social = toks.iter().filter(|t| lexicon.has_tag(t, "social")).count();
    let inclusive = toks.iter().filter(|t| lexicon.has_tag(t, "inclusive")).count();
    let bangs = text.chars().filter(|&c| c == '!').count();

    SubjectivityScores {
        mean_valence,
        abs_valence,
        polarity_spread,
        upper_case_ratio: if letters == 0 { 0.0 } else { upper as f64 / letters as f64 },
        first_person_count,
        first_person_ratio: ratio(first_person_count),
        adjective_surrogate_ratio: ratio(adjectives),
        coverage: ratio(hits.len()),
        positive_ratio: ratio(positive),
        negative_ratio: ratio(negative),
        social_ratio: ratio(social),
        inclusive_ratio: ratio(inclusive),
        exclamation_ratio: if sentences.is_empty() { 0.0 } else { bangs as f64 / sentences.len() as f64 },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shouted_praise() {
        let lex = Lexicon::from_valences([("great", 0.8)]);
        let s = subjectivity_scores("GREAT product", &lex);
        assert!((s.mean_valence - 0.8).abs() < 1e-15);
        assert!((s.upper_case_ratio - 5.0 / 12.0).abs() < 1e-15);
        assert_eq!(s.coverage, 0.5);
    }

    #[test]
    fn first_person_hand_count() {
        let s = subjectivity_scores("I love it. I use it daily.", &Lexicon::default());
        assert_eq!(s.first_person_count, 2);
        assert!((s.first_person_ratio - 2.0 / 7.0).abs() < 1e-15);
        assert_eq!(s.upper_case_ratio, 2.0 / 18.0);
    }

    #[test]
    fn no_hits_means_zero_valence_and_coverage() {
        let s = subjectivity_scores("plain words only", &Lexicon::builtin());
        assert_eq!(s.mean_valence, 0.0);
        assert_eq!(s.coverage, 0.0);
        assert_eq!(s.upper_case_ratio, 0.0);
        assert_eq!(subjectivity_scores("", &Lexicon::builtin()), SubjectivityScores::default());
    }

    #[test]
    fn spread_across_sentences() {
        let lex = Lexicon::from_valences([("good", 0.5), ("bad", -0.5)]);
        let s = subjectivity_scores("Good. Bad.", &lex);
        assert!((s.polarity_spread - 0.5).abs() < 1e-15);
        assert_eq!(s.mean_valence, 0.0);
    }

    #[test]
    fn parses_tsv_and_tags() {
        let lex = Lexicon::parse_tsv("# c\nfriend\t0.4\tsocial\nwe\t0\tinclusive,social\n\nbad\t-0.6\t\n").unwrap();
        assert_eq!(lex.len(), 3);
        assert!(lex.has_tag("we", "inclusive"));
        assert!(!lex.has_tag("bad", "social"));
        assert!(Lexicon::parse_tsv("x\t2.0\t").is_err());
        assert!(Lexicon::parse_tsv("x\tnope").is_err());
        let b = Lexicon::builtin();
        assert!(b.has_tag("friends", "social") && b.get("great").unwrap().valence > 0.0);
    }

    #[test]
    fn first_person_list_sorted() {
        assert!(FIRST_PERSON.windows(2).all(|w| w[0] < w[1]));
    }
}
