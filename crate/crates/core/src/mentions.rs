//! Greedy longest-first mention detection over token windows.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::anchors::normalize_mention;
use crate::corpus::{SentenceSpan, Token};
use crate::span::{IndexedText, Span};

pub const DEFAULT_MAX_NGRAM: usize = 10;

/// A set of normalized mention keys.
pub trait MentionLexicon {
    fn contains_key(&self, key: &str) -> bool;
}

impl MentionLexicon for HashSet<String> {
    fn contains_key(&self, key: &str) -> bool {
        self.contains(key)
    }
}

impl MentionLexicon for BTreeSet<String> {
    fn contains_key(&self, key: &str) -> bool {
        self.contains(key)
    }
}

impl<L: MentionLexicon + ?Sized> MentionLexicon for &L {
    fn contains_key(&self, key: &str) -> bool {
        (**self).contains_key(key)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MentionCandidate {
    /// Normalized key.
    pub mention: String,
    /// Text as it appears in the article.
    pub surface: String,
    pub span: Span,
    pub sentence_index: usize,
    /// Token count.
    pub n: usize,
}

/// Text from the start of token `i` to the end of token `i + n - 1`, with the
/// original characters between tokens. `None` when the window is out of
/// range or empty.
pub fn concat_window<'a>(
    text: &'a IndexedText,
    tokens: &[Token],
    i: usize,
    n: usize,
) -> Option<&'a str> {
    if n == 0 || i + n > tokens.len() {
        return None;
    }
    text.get(Span::new(tokens[i].span.start, tokens[i + n - 1].span.end))
}

/// Per-sentence precomputation: normalized tokens and whether each token is
/// separated from its predecessor by whitespace.
struct Window<'a> {
    tokens: &'a [Token],
    normalized: Vec<String>,
    gap_before: Vec<bool>,
    punct: Vec<bool>,
}

impl<'a> Window<'a> {
    fn new(tokens: &'a [Token]) -> Self {
        Window {
            tokens,
            normalized: tokens.iter().map(|t| normalize_mention(&t.text)).collect(),
            gap_before: tokens
                .iter()
                .enumerate()
                .map(|(k, t)| k > 0 && tokens[k - 1].span.end < t.span.start)
                .collect(),
            punct: tokens.iter().map(Token::is_punctuation).collect(),
        }
    }

    fn span(&self, i: usize, n: usize) -> Span {
        Span::new(self.tokens[i].span.start, self.tokens[i + n - 1].span.end)
    }

    // Tokens never split a combining sequence and everything between two
    // tokens is whitespace, so joining normalized tokens equals normalizing
    // the window's surface text.
    fn key(&self, i: usize, n: usize) -> String {
        let mut key = String::new();
        for k in i..i + n {
            if k > i && self.gap_before[k] {
                key.push(' ');
            }
            key.push_str(&self.normalized[k]);
        }
        key
    }

    fn bounded_by_words(&self, i: usize, n: usize) -> bool {
        !self.punct[i] && !self.punct[i + n - 1]
    }
}

/// Finds non-overlapping dictionary mentions in one sentence.
///
/// Window sizes are tried from `n_max` down to 1 and, within a size, left to
/// right. A window is accepted when its normalized text is a lexicon key, it
/// neither starts nor ends with a punctuation token, and it overlaps neither
/// `skip_spans` nor an earlier acceptance. The result is ordered by start.
pub fn detect_mentions<L: MentionLexicon + ?Sized>(
    text: &IndexedText,
    sentence: &SentenceSpan,
    sentence_index: usize,
    lexicon: &L,
    n_max: usize,
    skip_spans: &[Span],
) -> Vec<MentionCandidate> {
    let tokens = &sentence.tokens;
    if tokens.is_empty() || n_max == 0 {
        return Vec::new();
    }
    let skip: Vec<Span> = skip_spans
        .iter()
        .copied()
        .filter(|s| s.overlaps(&sentence.span))
        .collect();
    let w = Window::new(tokens);
    let mut accepted: Vec<MentionCandidate> = Vec::new();

    for n in (1..=n_max.min(tokens.len())).rev() {
        for i in 0..=tokens.len() - n {
            if !w.bounded_by_words(i, n) {
                continue;
            }
            let span = w.span(i, n);
            if skip.iter().any(|s| s.overlaps(&span))
                || accepted.iter().any(|m| m.span.overlaps(&span))
            {
                continue;
            }
            let key = w.key(i, n);
            if lexicon.contains_key(&key) {
                accepted.push(MentionCandidate {
                    mention: key,
                    surface: text.slice(span).to_string(),
                    span,
                    sentence_index,
                    n,
                });
            }
        }
    }
    accepted.sort_by_key(|m| m.span.start);
    accepted
}

/// Every lexicon window in the sentence, overlaps allowed, ordered by
/// (start, length). Windows touching `skip_spans` are excluded.
pub fn all_mention_windows<L: MentionLexicon + ?Sized>(
    text: &IndexedText,
    sentence: &SentenceSpan,
    sentence_index: usize,
    lexicon: &L,
    n_max: usize,
    skip_spans: &[Span],
) -> Vec<MentionCandidate> {
    let tokens = &sentence.tokens;
    let w = Window::new(tokens);
    let mut out = Vec::new();
    for i in 0..tokens.len() {
        for n in 1..=n_max.min(tokens.len() - i) {
            if !w.bounded_by_words(i, n) {
                continue;
            }
            let span = w.span(i, n);
            if skip_spans.iter().any(|s| s.overlaps(&span)) {
                continue;
            }
            let key = w.key(i, n);
            if lexicon.contains_key(&key) {
                out.push(MentionCandidate {
                    mention: key,
                    surface: text.slice(span).to_string(),
                    span,
                    sentence_index,
                    n,
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{split_sentences, tokenize, SentenceConfig};
    use proptest::prelude::*;

    fn lexicon(keys: &[&str]) -> HashSet<String> {
        keys.iter().map(|k| k.to_string()).collect()
    }

    fn sentence(text: &str) -> (IndexedText, SentenceSpan) {
        let t = IndexedText::new(text);
        let s = SentenceSpan {
            span: Span::new(0, t.char_len()),
            tokens: tokenize(text),
        };
        (t, s)
    }

    fn surfaces(found: &[MentionCandidate]) -> Vec<&str> {
        found.iter().map(|m| m.surface.as_str()).collect()
    }

    #[test]
    fn longer_window_wins() {
        let (t, s) = sentence("a female mathematician");
        let lex = lexicon(&["female mathematician", "mathematician"]);
        let found = detect_mentions(&t, &s, 0, &lex, 10, &[]);
        assert_eq!(surfaces(&found), ["female mathematician"]);
        assert_eq!(found[0].n, 2);
        assert_eq!(found[0].span, Span::new(2, 22));
    }

    #[test]
    fn empty_lexicon_finds_nothing() {
        let (t, s) = sentence("nothing to see");
        assert!(detect_mentions(&t, &s, 0, &HashSet::new(), 10, &[]).is_empty());
    }

    #[test]
    fn all_unigrams_match() {
        let (t, s) = sentence("one two three four five six");
        let lex = lexicon(&["one", "two", "three", "four", "five", "six"]);
        assert_eq!(detect_mentions(&t, &s, 0, &lex, 10, &[]).len(), 6);
    }

    #[test]
    fn skip_spans_and_punctuation() {
        let (t, s) = sentence("Paris, France and Paris");
        let lex = lexicon(&["paris", "paris, france", ", france", "france"]);
        let skip = [Span::new(0, 5)];
        let found = detect_mentions(&t, &s, 0, &lex, 10, &skip);
        assert_eq!(surfaces(&found), ["France", "Paris"]);
        let found = detect_mentions(&t, &s, 0, &lex, 10, &[]);
        assert_eq!(surfaces(&found), ["Paris, France", "Paris"]);
    }

    #[test]
    fn equal_length_prefers_leftmost() {
        let (t, s) = sentence("new york city");
        let lex = lexicon(&["new york", "york city"]);
        let found = detect_mentions(&t, &s, 0, &lex, 10, &[]);
        assert_eq!(surfaces(&found), ["new york"]);
    }

    #[test]
    fn concat_window_preserves_gaps() {
        let (t, s) = sentence("Eastern Roman Empire");
        assert_eq!(
            concat_window(&t, &s.tokens, 0, 3),
            Some("Eastern Roman Empire")
        );
        assert_eq!(concat_window(&t, &s.tokens, 1, 1), Some("Roman"));
        assert_eq!(concat_window(&t, &s.tokens, 2, 2), None);
        let (t, s) = sentence("Eastern  Roman");
        let surface = concat_window(&t, &s.tokens, 0, 2).unwrap();
        assert_eq!(surface, "Eastern  Roman");
        assert_eq!(normalize_mention(surface), "eastern roman");
        let found = detect_mentions(&t, &s, 0, &lexicon(&["eastern roman"]), 10, &[]);
        assert_eq!(found[0].surface, "Eastern  Roman");
        assert_eq!(found[0].mention, "eastern roman");
    }

    #[test]
    fn n_max_limits_window() {
        let (t, s) = sentence("a b c");
        let lex = lexicon(&["a b c", "a"]);
        let found = detect_mentions(&t, &s, 0, &lex, 2, &[]);
        assert_eq!(surfaces(&found), ["a"]);
    }

    #[test]
    fn overlapping_windows_are_all_listed() {
        let (t, s) = sentence("new york city");
        let lex = lexicon(&["new york", "york city", "york"]);
        let all = all_mention_windows(&t, &s, 0, &lex, 10, &[]);
        assert_eq!(surfaces(&all), ["new york", "york", "york city"]);
    }

    proptest! {
        // the joined-token key must equal normalizing the surface text
        #[test]
        fn window_key_matches_normalized_surface(text in "[a-zA-ZÀ-ÿ\u{300}-\u{36f}ß .,;'-]{0,40}") {
            let t = IndexedText::new(text.as_str());
            for s in split_sentences(&t, &SentenceConfig::default()) {
                let w = Window::new(&s.tokens);
                for i in 0..s.tokens.len() {
                    for n in 1..=(s.tokens.len() - i).min(4) {
                        let surface = concat_window(&t, &s.tokens, i, n).unwrap();
                        prop_assert_eq!(w.key(i, n), normalize_mention(surface));
                    }
                }
            }
        }
    }
}
