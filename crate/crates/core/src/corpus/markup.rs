//! WikiLite link markup.
//!
//! The only construct is the internal link, written either `[[Target]]` or
//! `[[Target|anchor text]]`. Links cannot nest. A lone `[` or `]` is ordinary
//! text; `[[` always opens a link and `]]` always closes one.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::span::Span;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MarkupError {
    #[error("link opened at offset {offset} is never closed")]
    Unclosed { offset: usize },
    #[error("nested link at offset {offset}")]
    Nested { offset: usize },
    #[error("unbalanced `]]` at offset {offset}")]
    Unbalanced { offset: usize },
    #[error("link at offset {offset} has an empty target")]
    EmptyTarget { offset: usize },
    #[error("link at offset {offset} has an empty anchor")]
    EmptyAnchor { offset: usize },
}

impl MarkupError {
    /// Code-point offset into the raw text where the problem was found.
    pub fn offset(&self) -> usize {
        match *self {
            MarkupError::Unclosed { offset }
            | MarkupError::Nested { offset }
            | MarkupError::Unbalanced { offset }
            | MarkupError::EmptyTarget { offset }
            | MarkupError::EmptyAnchor { offset } => offset,
        }
    }
}

/// An existing link as it appears in text: target as written, the anchor and
/// its code-point span in the plain text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LinkFragment {
    pub target: String,
    pub mention: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedMarkup {
    pub plain_text: String,
    /// Links in text order.
    pub links: Vec<LinkFragment>,
    /// Span of each link's markup in the raw text, parallel to `links`.
    pub raw_spans: Vec<Span>,
}

impl ParsedMarkup {
    /// Maps a plain-text offset that lies outside every link to the
    /// corresponding raw-text offset.
    pub fn raw_offset(&self, plain_offset: usize) -> usize {
        let mut shift = 0usize;
        for (link, raw) in self.links.iter().zip(&self.raw_spans) {
            if link.span.end <= plain_offset {
                shift += raw.len() - link.span.len();
            } else {
                break;
            }
        }
        plain_offset + shift
    }
}

pub fn parse_markup(raw_text: &str) -> Result<ParsedMarkup, MarkupError> {
    let chars: Vec<char> = raw_text.chars().collect();
    let mut plain = String::with_capacity(raw_text.len());
    let mut plain_len = 0usize;
    let mut links = Vec::new();
    let mut raw_spans = Vec::new();

    let is_pair = |i: usize, c: char| i + 1 < chars.len() && chars[i] == c && chars[i + 1] == c;

    let mut i = 0;
    while i < chars.len() {
        if is_pair(i, '[') {
            let open = i;
            let mut j = i + 2;
            let close = loop {
                if j >= chars.len() {
                    return Err(MarkupError::Unclosed { offset: open });
                }
                if is_pair(j, '[') {
                    return Err(MarkupError::Nested { offset: j });
                }
                if is_pair(j, ']') {
                    break j;
                }
                j += 1;
            };
            let inner: String = chars[open + 2..close].iter().collect();
            let (target, anchor) = match inner.split_once('|') {
                Some((t, a)) => (t.to_string(), a.to_string()),
                None => (inner.clone(), inner),
            };
            if target.trim().is_empty() {
                return Err(MarkupError::EmptyTarget { offset: open });
            }
            if anchor.is_empty() {
                return Err(MarkupError::EmptyAnchor { offset: open });
            }
            let anchor_len = anchor.chars().count();
            links.push(LinkFragment {
                target,
                span: Span::new(plain_len, plain_len + anchor_len),
                mention: anchor.clone(),
            });
            raw_spans.push(Span::new(open, close + 2));
            plain.push_str(&anchor);
            plain_len += anchor_len;
            i = close + 2;
        } else if is_pair(i, ']') {
            return Err(MarkupError::Unbalanced { offset: i });
        } else {
            plain.push(chars[i]);
            plain_len += 1;
            i += 1;
        }
    }

    Ok(ParsedMarkup {
        plain_text: plain,
        links,
        raw_spans,
    })
}

/// Markup for a link, collapsing to `[[Target]]` when the anchor equals the
/// target.
pub fn link_markup(target: &str, anchor: &str) -> String {
    if target == anchor {
        format!("[[{target}]]")
    } else {
        format!("[[{target}|{anchor}]]")
    }
}

/// Wraps each span of `plain` in link markup. `links` must be sorted and
/// non-overlapping, with spans in code points.
pub fn link_markup_text(plain: &str, links: &[LinkFragment]) -> String {
    let mut out = String::with_capacity(plain.len() + links.len() * 8);
    let mut chars = plain.chars();
    let mut pos = 0usize;
    for link in links {
        out.extend(chars.by_ref().take(link.span.start - pos));
        let anchor: String = chars.by_ref().take(link.span.len()).collect();
        out.push_str(&link_markup(&link.target, &anchor));
        pos = link.span.end;
    }
    out.extend(chars);
    out
}

/// True when `s` can be embedded in a link without changing how it parses.
pub fn is_markup_safe(s: &str, allow_pipe: bool) -> bool {
    !s.is_empty()
        && !s.contains("[[")
        && !s.contains("]]")
        && !s.ends_with(']')
        && !s.starts_with('[')
        && (allow_pipe || !s.contains('|'))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frag(target: &str, mention: &str, start: usize, end: usize) -> LinkFragment {
        LinkFragment {
            target: target.into(),
            mention: mention.into(),
            span: Span::new(start, end),
        }
    }

    #[test]
    fn plain_link() {
        let p = parse_markup("born in [[Chicago]].").unwrap();
        assert_eq!(p.plain_text, "born in Chicago.");
        assert_eq!(p.links, vec![frag("Chicago", "Chicago", 8, 15)]);
        assert_eq!(p.raw_spans, vec![Span::new(8, 19)]);
    }

    #[test]
    fn piped_link() {
        let p = parse_markup("a [[Mathematician|female mathematician]]").unwrap();
        assert_eq!(p.plain_text, "a female mathematician");
        assert_eq!(
            p.links,
            vec![frag("Mathematician", "female mathematician", 2, 22)]
        );
        // offsets counted on the output string
        assert_eq!(&p.plain_text[2..22], "female mathematician");
    }

    #[test]
    fn no_links() {
        let p = parse_markup("no links here").unwrap();
        assert_eq!(p.plain_text, "no links here");
        assert!(p.links.is_empty());
    }

    #[test]
    fn offsets_are_code_points() {
        let p = parse_markup("ولد في [[القاهرة]] عام").unwrap();
        let link = &p.links[0];
        let got: String = p
            .plain_text
            .chars()
            .skip(link.span.start)
            .take(link.span.len())
            .collect();
        assert_eq!(got, "القاهرة");
        assert_eq!(link.span.start, 7);
    }

    #[test]
    fn malformed_markup_reports_offset() {
        assert_eq!(
            parse_markup("x [[a [[b]] c]]"),
            Err(MarkupError::Nested { offset: 6 })
        );
        assert_eq!(
            parse_markup("ab [[open"),
            Err(MarkupError::Unclosed { offset: 3 })
        );
        assert_eq!(
            parse_markup("close]] here"),
            Err(MarkupError::Unbalanced { offset: 5 })
        );
        assert_eq!(
            parse_markup("[[|x]]"),
            Err(MarkupError::EmptyTarget { offset: 0 })
        );
        assert_eq!(
            parse_markup("[[T|]]"),
            Err(MarkupError::EmptyAnchor { offset: 0 })
        );
    }

    #[test]
    fn single_brackets_are_text() {
        let p = parse_markup("a [b] c").unwrap();
        assert_eq!(p.plain_text, "a [b] c");
    }

    #[test]
    fn raw_offset_skips_link_markup() {
        let p = parse_markup("[[A|x]] and [[B]] end").unwrap();
        assert_eq!(p.plain_text, "x and B end");
        assert_eq!(p.raw_offset(0), 0);
        assert_eq!(p.raw_offset(2), 8); // "and"
        assert_eq!(p.raw_offset(8), 18); // "end"
    }

    #[test]
    fn link_markup_collapses() {
        assert_eq!(link_markup("Chicago", "Chicago"), "[[Chicago]]");
        assert_eq!(link_markup("Chicago", "the city"), "[[Chicago|the city]]");
    }
}
