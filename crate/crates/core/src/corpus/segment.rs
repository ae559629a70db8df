//! Language-agnostic sentence splitting and tokenization.
//!
//! Tokens follow Unicode word boundaries (UAX #29). Whitespace segments are
//! dropped and every punctuation mark is its own token. Scripts written
//! without spaces (Han, Kana) come out one ideograph per token, since UAX #29
//! has no rule joining ideographs.
//!
//! Sentences end at a terminator (`. ! ?` and their fullwidth forms, plus any
//! per-language extras) that is followed by whitespace or end of text.
//! Closing quotes and brackets directly after the terminator stay with the
//! sentence.

use serde::{Deserialize, Serialize};
use unicode_segmentation::UnicodeSegmentation;

use crate::span::{IndexedText, Span};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub span: Span,
}

impl Token {
    pub fn is_punctuation(&self) -> bool {
        is_punctuation(&self.text)
    }
}

/// A token made only of non-alphanumeric characters.
pub fn is_punctuation(token: &str) -> bool {
    !token.chars().any(char::is_alphanumeric)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceSpan {
    pub span: Span,
    pub tokens: Vec<Token>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceConfig {
    pub terminators: Vec<char>,
}

const BASE_TERMINATORS: [char; 7] = ['.', '!', '?', '。', '！', '？', '．'];
const CLOSERS: [char; 10] = ['"', '\'', ')', ']', '»', '”', '’', '」', '』', '）'];

impl Default for SentenceConfig {
    fn default() -> Self {
        SentenceConfig {
            terminators: BASE_TERMINATORS.to_vec(),
        }
    }
}

impl SentenceConfig {
    pub fn with_extra(mut self, extra: impl IntoIterator<Item = char>) -> Self {
        for c in extra {
            if !self.terminators.contains(&c) {
                self.terminators.push(c);
            }
        }
        self
    }

    /// Default terminators plus the ones a language commonly needs.
    pub fn for_language(code: &str) -> Self {
        let base = SentenceConfig::default();
        match code {
            "bn" | "hi" | "mr" | "ne" | "sa" => base.with_extra(['।', '॥']),
            "ar" | "fa" | "ur" => base.with_extra(['؟', '۔']),
            "hy" => base.with_extra(['։']),
            "am" => base.with_extra(['።']),
            _ => base,
        }
    }
}

/// Tokenizes `text`, reporting spans relative to `base` (a code-point offset).
pub fn tokenize_at(text: &str, base: usize) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut chars_before = 0usize;
    let mut last_byte = 0usize;
    for (byte, seg) in text.split_word_bound_indices() {
        chars_before += text[last_byte..byte].chars().count();
        last_byte = byte;
        // a combining mark after a space is glued to the space by WB4
        let lead = seg.chars().take_while(|c| c.is_whitespace()).count();
        let core = seg.trim_matches(char::is_whitespace);
        if core.is_empty() {
            continue;
        }
        let start = base + chars_before + lead;
        tokens.push(Token {
            text: core.to_string(),
            span: Span::new(start, start + core.chars().count()),
        });
    }
    tokens
}

pub fn tokenize(text: &str) -> Vec<Token> {
    tokenize_at(text, 0)
}

pub fn split_sentences(text: &IndexedText, config: &SentenceConfig) -> Vec<SentenceSpan> {
    raw_sentence_spans(text.as_str(), config)
        .into_iter()
        .map(|span| sentence(text, span))
        .collect()
}

/// Like [`split_sentences`], but a sentence boundary never falls inside one
/// of `links`; offending sentences are merged with their successors.
pub fn split_sentences_with_links(
    text: &IndexedText,
    links: &[Span],
    config: &SentenceConfig,
) -> Vec<SentenceSpan> {
    let raw = raw_sentence_spans(text.as_str(), config);
    let mut merged: Vec<Span> = Vec::with_capacity(raw.len());
    for span in raw {
        match merged.last_mut() {
            Some(prev) if links.iter().any(|l| l.start < prev.end && l.end > prev.end) => {
                prev.end = span.end;
            }
            _ => merged.push(span),
        }
    }
    merged
        .into_iter()
        .map(|span| sentence(text, span))
        .collect()
}

fn sentence(text: &IndexedText, span: Span) -> SentenceSpan {
    SentenceSpan {
        span,
        tokens: tokenize_at(text.slice(span), span.start),
    }
}

fn raw_sentence_spans(text: &str, config: &SentenceConfig) -> Vec<Span> {
    let chars: Vec<char> = text.chars().collect();
    let mut spans = Vec::new();
    let mut start: Option<usize> = None;
    let mut last_content = 0usize;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if start.is_none() {
            start = Some(i);
        }
        last_content = i + 1;
        if config.terminators.contains(&c) {
            let mut end = i + 1;
            while end < chars.len() && CLOSERS.contains(&chars[end]) {
                end += 1;
            }
            if end == chars.len() || chars[end].is_whitespace() {
                spans.push(Span::new(start.take().unwrap_or(i), end));
                i = end;
                continue;
            }
        }
        i += 1;
    }
    if let Some(s) = start {
        spans.push(Span::new(s, last_content));
    }
    spans
}
