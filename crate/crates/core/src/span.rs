use std::fmt;

use serde::{Deserialize, Serialize};

/// Half-open range `[start, end)` of Unicode code-point offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end, "span start {start} after end {end}");
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn shift(&self, by: usize) -> Span {
        Span::new(self.start + by, self.end + by)
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

/// A string together with its code-point to byte offset table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexedText {
    text: String,
    // byte offset of every char, plus text.len() as a sentinel
    offsets: Vec<usize>,
}

impl IndexedText {
    pub fn new(text: impl Into<String>) -> Self {
        let text = text.into();
        let mut offsets: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
        offsets.push(text.len());
        IndexedText { text, offsets }
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn into_string(self) -> String {
        self.text
    }

    /// Length in code points.
    pub fn char_len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn byte_offset(&self, char_offset: usize) -> usize {
        self.offsets[char_offset]
    }

    /// Code-point offset of a byte position that falls on a char boundary.
    pub fn char_offset(&self, byte_offset: usize) -> usize {
        self.offsets
            .binary_search(&byte_offset)
            .expect("byte offset is not on a char boundary")
    }

    pub fn slice(&self, span: Span) -> &str {
        &self.text[self.offsets[span.start]..self.offsets[span.end]]
    }

    pub fn get(&self, span: Span) -> Option<&str> {
        if span.start <= span.end && span.end <= self.char_len() {
            Some(self.slice(span))
        } else {
            None
        }
    }
}

impl From<&str> for IndexedText {
    fn from(s: &str) -> Self {
        IndexedText::new(s)
    }
}
