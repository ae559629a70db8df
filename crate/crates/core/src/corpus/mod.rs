//! Corpus data model and the line-delimited WikiLite file format.
//!
//! A WikiLite file holds one JSON object per line:
//!
//! ```text
//! {"id":"Q1297","title":"Chicago","language":"en","type_tags":["Q515"],"redirect_to":null,"text":"Chicago is a city in [[Illinois]]."}
//! {"id":"R1","title":"Chicago, Illinois","language":"en","type_tags":[],"redirect_to":"Chicago","text":""}
//! ```
//!
//! `id` is the language-independent entity identifier, `type_tags` stand in
//! for instance-of values, and `text` uses the link grammar described in
//! [`markup`]. Blank lines are ignored.

pub mod markup;
pub mod redirect;
pub mod segment;

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use markup::{
    is_markup_safe, link_markup, link_markup_text, parse_markup, LinkFragment, MarkupError,
    ParsedMarkup,
};
pub use redirect::{resolve_redirects, RedirectCycle, RedirectMap};
pub use segment::{
    is_punctuation, split_sentences, split_sentences_with_links, tokenize, tokenize_at,
    SentenceConfig, SentenceSpan, Token,
};

use crate::span::{IndexedText, Span};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Article {
    pub id: String,
    pub title: String,
    pub language: String,
    #[serde(default)]
    pub type_tags: BTreeSet<String>,
    #[serde(default)]
    pub redirect_to: Option<String>,
    #[serde(rename = "text", default)]
    pub raw_text: String,
}

impl Article {
    pub fn content(id: &str, title: &str, language: &str, raw_text: &str) -> Self {
        Article {
            id: id.to_string(),
            title: title.to_string(),
            language: language.to_string(),
            type_tags: BTreeSet::new(),
            redirect_to: None,
            raw_text: raw_text.to_string(),
        }
    }

    pub fn redirect(id: &str, title: &str, language: &str, target: &str) -> Self {
        Article {
            redirect_to: Some(target.to_string()),
            ..Article::content(id, title, language, "")
        }
    }

    pub fn with_tags<I, S>(mut self, tags: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.type_tags.extend(tags.into_iter().map(Into::into));
        self
    }

    pub fn is_redirect(&self) -> bool {
        self.redirect_to.is_some()
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: invalid record: {message}")]
    InvalidRecord { line: usize, message: String },
    #[error("duplicate title {title:?} on lines {first} and {second}")]
    DuplicateTitle {
        title: String,
        first: usize,
        second: usize,
    },
    #[error("line {line}: {source}")]
    Markup {
        line: usize,
        #[source]
        source: MarkupError,
    },
    #[error("line {line}: language {found:?} differs from corpus language {expected:?}")]
    MixedLanguage {
        line: usize,
        expected: String,
        found: String,
    },
    #[error("redirect cycle: {0}")]
    RedirectCycle(RedirectCycle),
}

/// An immutable set of articles in one language.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    language: String,
    articles: Vec<Article>,
    by_title: HashMap<String, usize>,
    redirects: RedirectMap,
    sentence_config: SentenceConfig,
}

/// A content article after markup parsing, redirect resolution and
/// segmentation.
#[derive(Debug, Clone)]
pub struct ParsedArticle {
    pub title: String,
    pub text: IndexedText,
    /// Existing links whose target resolved to a content article.
    pub links: Vec<LinkFragment>,
    /// Links dropped because their target is missing from the corpus.
    pub dropped_links: usize,
    pub sentences: Vec<SentenceSpan>,
}

impl ParsedArticle {
    pub fn link_spans(&self) -> Vec<Span> {
        self.links.iter().map(|l| l.span).collect()
    }

    /// Links lying inside sentence `index`.
    pub fn links_in_sentence(&self, index: usize) -> impl Iterator<Item = &LinkFragment> {
        let span = self.sentences[index].span;
        self.links.iter().filter(move |l| span.contains(&l.span))
    }
}

impl Corpus {
    /// Builds a corpus from in-memory articles. Line numbers in errors are
    /// 1-based positions in `articles`.
    pub fn from_articles(articles: Vec<Article>) -> Result<Self, CorpusError> {
        Self::build(articles.into_iter().enumerate().map(|(i, a)| (i + 1, a)))
    }

    fn build(records: impl IntoIterator<Item = (usize, Article)>) -> Result<Self, CorpusError> {
        let mut articles = Vec::new();
        let mut lines = Vec::new();
        let mut by_title: HashMap<String, usize> = HashMap::new();
        let mut language: Option<String> = None;

        for (line, article) in records {
            if article.title.is_empty() {
                return Err(CorpusError::InvalidRecord {
                    line,
                    message: "empty title".into(),
                });
            }
            if article.redirect_to.as_deref() == Some(article.title.as_str()) {
                return Err(CorpusError::InvalidRecord {
                    line,
                    message: format!("{:?} redirects to itself", article.title),
                });
            }
            match &language {
                None => language = Some(article.language.clone()),
                Some(lang) if *lang != article.language => {
                    return Err(CorpusError::MixedLanguage {
                        line,
                        expected: lang.clone(),
                        found: article.language.clone(),
                    })
                }
                Some(_) => {}
            }
            parse_markup(&article.raw_text)
                .map_err(|source| CorpusError::Markup { line, source })?;
            if let Some(&prev) = by_title.get(&article.title) {
                return Err(CorpusError::DuplicateTitle {
                    title: article.title,
                    first: lines[prev],
                    second: line,
                });
            }
            by_title.insert(article.title.clone(), articles.len());
            lines.push(line);
            articles.push(article);
        }

        let redirects = RedirectMap::new(
            articles
                .iter()
                .filter_map(|a| a.redirect_to.as_ref().map(|t| (a.title.clone(), t.clone()))),
        )
        .map_err(CorpusError::RedirectCycle)?;

        let language = language.unwrap_or_default();
        Ok(Corpus {
            sentence_config: SentenceConfig::for_language(&language),
            language,
            articles,
            by_title,
            redirects,
        })
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn redirects(&self) -> &RedirectMap {
        &self.redirects
    }

    pub fn sentence_config(&self) -> &SentenceConfig {
        &self.sentence_config
    }

    pub fn set_sentence_config(&mut self, config: SentenceConfig) {
        self.sentence_config = config;
    }

    /// All records, redirects included, in load order.
    pub fn articles(&self) -> &[Article] {
        &self.articles
    }

    pub fn content_articles(&self) -> impl Iterator<Item = &Article> {
        self.articles.iter().filter(|a| !a.is_redirect())
    }

    pub fn content_count(&self) -> usize {
        self.content_articles().count()
    }

    pub fn len(&self) -> usize {
        self.articles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.articles.is_empty()
    }

    pub fn get(&self, title: &str) -> Option<&Article> {
        self.by_title.get(title).map(|&i| &self.articles[i])
    }

    /// True for titles of non-redirect articles.
    pub fn is_content(&self, title: &str) -> bool {
        self.get(title).is_some_and(|a| !a.is_redirect())
    }

    /// Canonical content title a link target resolves to, if any.
    pub fn canonical<'a>(&'a self, title: &'a str) -> Option<&'a str> {
        let resolved = self.redirects.resolve(title);
        self.is_content(resolved).then_some(resolved)
    }

    /// Title → entity id for content articles.
    pub fn entity_ids(&self) -> HashMap<String, String> {
        self.content_articles()
            .map(|a| (a.title.clone(), a.id.clone()))
            .collect()
    }

    pub fn parse(&self, article: &Article) -> ParsedArticle {
        // markup was validated at load
        let parsed = parse_markup(&article.raw_text).expect("validated markup");
        self.parse_markup_text(&article.title, parsed)
    }

    /// Parses replacement text for an article, e.g. after an edit.
    pub fn parse_text(&self, title: &str, raw_text: &str) -> Result<ParsedArticle, MarkupError> {
        Ok(self.parse_markup_text(title, parse_markup(raw_text)?))
    }

    fn parse_markup_text(&self, title: &str, parsed: ParsedMarkup) -> ParsedArticle {
        let total = parsed.links.len();
        let links: Vec<LinkFragment> = resolve_redirects(parsed.links, &self.redirects)
            .into_iter()
            .filter(|l| self.is_content(&l.target))
            .collect();
        let text = IndexedText::new(parsed.plain_text);
        let spans: Vec<Span> = links.iter().map(|l| l.span).collect();
        let sentences = split_sentences_with_links(&text, &spans, &self.sentence_config);
        ParsedArticle {
            title: title.to_string(),
            dropped_links: total - links.len(),
            links,
            text,
            sentences,
        }
    }

    /// SHA-256 over the canonical serialization of every record.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for a in &self.articles {
            hasher.update(serde_json::to_vec(a).expect("article serializes"));
            hasher.update(b"\n");
        }
        hex_digest(hasher.finalize().as_slice())
    }

    pub fn write_wikilite<W: Write>(&self, mut out: W) -> io::Result<()> {
        write_wikilite(&mut out, &self.articles)
    }
}

pub fn write_wikilite<W: Write>(out: &mut W, articles: &[Article]) -> io::Result<()> {
    for a in articles {
        serde_json::to_writer(&mut *out, a)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Hex SHA-256 of a text.
pub fn text_digest(text: &str) -> String {
    hex_digest(Sha256::digest(text.as_bytes()).as_slice())
}

pub(crate) fn text_digest_bytes(bytes: &[u8]) -> String {
    hex_digest(Sha256::digest(bytes).as_slice())
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn read_corpus<R: BufRead>(reader: R) -> Result<Corpus, CorpusError> {
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let article: Article =
            serde_json::from_str(&line).map_err(|e| CorpusError::InvalidRecord {
                line: line_no,
                message: e.to_string(),
            })?;
        records.push((line_no, article));
    }
    Corpus::build(records)
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    read_corpus(BufReader::new(File::open(path)?))
}
