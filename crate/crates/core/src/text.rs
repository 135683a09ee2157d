//! Tokenization, sentence splitting and offset helpers shared by the feature
//! library and the segmenter.
//!
//! Tokens are maximal runs of alphanumeric characters, lowercased. A
//! sentence ends at `.`, `!` or `?` followed by whitespace or end of text;
//! sentence spans tile the input, each carrying its trailing whitespace.

use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;

/// Byte ranges of alphanumeric runs.
pub fn word_spans(text: &str) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if c.is_alphanumeric() {
            if start.is_none() {
                start = Some(i);
            }
        } else if let Some(s) = start.take() {
            out.push(s..i);
        }
    }
    if let Some(s) = start {
        out.push(s..text.len());
    }
    out
}

pub fn tokens(text: &str) -> Vec<String> {
    word_spans(text).into_iter().map(|r| text[r].to_lowercase()).collect()
}

pub fn is_stopword(token: &str) -> bool {
    STOPWORDS.binary_search(&token).is_ok()
}

/// English function words, sorted for binary search.
pub const STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "also", "am", "an", "and", "any",
    "are", "aren", "as", "at", "be", "because", "been", "before", "being", "below", "between",
    "both", "but", "by", "can", "could", "d", "did", "didn", "do", "does", "doesn", "doing", "don",
    "down", "during", "each", "few", "for", "from", "further", "had", "has", "have", "having", "he",
    "her", "here", "hers", "herself", "him", "himself", "his", "how", "i", "if", "in", "into", "is",
    "isn", "it", "its", "itself", "just", "ll", "m", "me", "more", "most", "my", "myself", "no",
    "nor", "not", "now", "o", "of", "off", "on", "once", "only", "or", "other", "our", "ours",
    "ourselves", "out", "over", "own", "re", "s", "same", "she", "should", "so", "some", "such",
    "t", "than", "that", "the", "their", "theirs", "them", "themselves", "then", "there", "these",
    "they", "this", "those", "through", "to", "too", "under", "until", "up", "us", "ve", "very",
    "was", "wasn", "we", "were", "what", "when", "where", "which", "while", "who", "whom", "why",
    "will", "with", "won", "would", "y", "you", "your", "yours", "yourself", "yourselves",
];

/// Lowercased tokens minus stopwords and pure numbers.
pub fn content_tokens(text: &str) -> Vec<String> {
    tokens(text).into_iter().filter(|t| is_content(t)).collect()
}

pub fn is_content(token: &str) -> bool {
    !is_stopword(token) && !token.chars().all(|c| c.is_numeric()) && token.chars().count() > 1
}

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

/// Byte ranges that tile `text`, one per sentence. Every span contains at
/// least one word; leading or trailing text without words is attached to the
/// neighboring sentence. Text without any word yields no spans.
pub fn sentence_spans(text: &str) -> Vec<Range<usize>> {
    let mut raw: Vec<Range<usize>> = Vec::new();
    let mut start = 0;
    let mut iter = text.char_indices().peekable();
    while let Some((i, c)) = iter.next() {
        if !is_terminator(c) {
            continue;
        }
        let next = iter.peek().map(|&(_, n)| n);
        if next.map_or(true, char::is_whitespace) {
            let mut end = i + c.len_utf8();
            while let Some(&(j, n)) = iter.peek() {
                if !n.is_whitespace() {
                    break;
                }
                end = j + n.len_utf8();
                iter.next();
            }
            raw.push(start..end);
            start = end;
        }
    }
    if start < text.len() {
        raw.push(start..text.len());
    }

    let has_word = |r: &Range<usize>| text[r.clone()].chars().any(char::is_alphanumeric);
    let mut out: Vec<Range<usize>> = Vec::new();
    let mut pending: Option<usize> = None;
    for r in raw {
        if has_word(&r) {
            let s = pending.take().unwrap_or(r.start);
            out.push(s..r.end);
        } else if let Some(last) = out.last_mut() {
            last.end = r.end;
        } else if pending.is_none() {
            pending = Some(r.start);
        }
    }
    out
}

/// Converts a byte offset into a Unicode scalar offset.
pub fn char_offset(text: &str, byte: usize) -> usize {
    text[..byte].chars().count()
}

/// Converts a Unicode scalar offset into a byte offset, clamped to the end.
pub fn byte_offset(text: &str, chars: usize) -> usize {
    text.char_indices().nth(chars).map_or(text.len(), |(b, _)| b)
}

/// Stable 64-bit FNV-1a over a token sequence.
pub fn hash_tokens<S: AsRef<str>>(tokens: &[S]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for t in tokens {
        for b in t.as_ref().bytes().chain(core::iter::once(0xff)) {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}
