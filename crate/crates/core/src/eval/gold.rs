use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::corpus::{link_markup_text, tokenize, Corpus, LinkFragment, SentenceSpan};
use crate::span::{IndexedText, Span};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// One evaluation sentence: plain text plus the links that were removed
/// from it, with spans relative to the sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldSentence {
    pub source: String,
    pub sentence_index: usize,
    pub text: String,
    pub links: Vec<LinkFragment>,
    pub split: Split,
}

impl GoldSentence {
    /// The sentence as a single segment ready for mention detection.
    pub fn segment(&self) -> (IndexedText, SentenceSpan) {
        let text = IndexedText::new(self.text.clone());
        let span = SentenceSpan {
            span: Span::new(0, text.char_len()),
            tokens: tokenize(&self.text),
        };
        (text, span)
    }

    /// The sentence with its links put back as markup.
    pub fn to_markup(&self) -> String {
        link_markup_text(&self.text, &self.links)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoldConfig {
    pub max_sentences: Option<usize>,
    /// Share of sentences in the training split.
    pub train_ratio: f64,
    pub seed: u64,
}

impl Default for GoldConfig {
    fn default() -> Self {
        GoldConfig {
            max_sentences: None,
            train_ratio: 0.5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GoldSet {
    pub train: Vec<GoldSentence>,
    pub test: Vec<GoldSentence>,
}

impl GoldSet {
    pub fn all(&self) -> impl Iterator<Item = &GoldSentence> {
        self.train.iter().chain(&self.test)
    }
}

/// The first sentence of every content article that holds at least one link.
pub fn first_linked_sentences(corpus: &Corpus) -> Vec<GoldSentence> {
    let mut articles: Vec<_> = corpus.content_articles().collect();
    articles.sort_by(|a, b| a.title.cmp(&b.title));
    let mut out = Vec::new();
    for article in articles {
        let parsed = corpus.parse(article);
        let Some(index) =
            (0..parsed.sentences.len()).find(|&i| parsed.links_in_sentence(i).next().is_some())
        else {
            continue;
        };
        let span = parsed.sentences[index].span;
        let links = parsed
            .links_in_sentence(index)
            .map(|l| LinkFragment {
                target: l.target.clone(),
                mention: l.mention.clone(),
                span: Span::new(l.span.start - span.start, l.span.end - span.start),
            })
            .collect();
        out.push(GoldSentence {
            source: article.title.clone(),
            sentence_index: index,
            text: parsed.text.slice(span).to_string(),
            links,
            split: Split::Train,
        });
    }
    out
}

/// Selects gold sentences, samples down to `max_sentences` and splits them
/// into disjoint train and test sets. Deterministic for a given seed.
pub fn build_gold(corpus: &Corpus, config: &GoldConfig) -> Result<GoldSet, EvalError> {
    let mut sentences = first_linked_sentences(corpus);
    if sentences.is_empty() {
        return Err(EvalError::NoLinkedSentences);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    sentences.shuffle(&mut rng);
    if let Some(max) = config.max_sentences {
        sentences.truncate(max);
    }
    let n_train = (sentences.len() as f64 * config.train_ratio.clamp(0.0, 1.0)).round() as usize;
    let mut test = sentences.split_off(n_train);
    let mut train = sentences;
    for s in &mut train {
        s.split = Split::Train;
    }
    for s in &mut test {
        s.split = Split::Test;
    }
    train.sort_by(|a, b| a.source.cmp(&b.source));
    test.sort_by(|a, b| a.source.cmp(&b.source));
    Ok(GoldSet { train, test })
}

/// Plain text and the gold links of a sentence.
pub fn strip_links(sentence: &GoldSentence) -> (&str, &[LinkFragment]) {
    (&sentence.text, &sentence.links)
}

pub fn write_gold<W: Write>(mut out: W, sentences: &[GoldSentence]) -> io::Result<()> {
    for s in sentences {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_gold(path: impl AsRef<Path>, gold: &GoldSet) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_gold(&mut w, &gold.train)?;
    write_gold(&mut w, &gold.test)?;
    w.flush()
}

pub fn read_gold<R: BufRead>(reader: R) -> Result<GoldSet, EvalError> {
    let mut gold = GoldSet::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let s: GoldSentence = serde_json::from_str(&line).map_err(|e| EvalError::Format {
            line: i + 1,
            message: e.to_string(),
        })?;
        match s.split {
            Split::Train => gold.train.push(s),
            Split::Test => gold.test.push(s),
        }
    }
    Ok(gold)
}

pub fn load_gold(path: impl AsRef<Path>) -> Result<GoldSet, EvalError> {
    read_gold(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_markup, Article};

    fn corpus(texts: &[(&str, &str)]) -> Corpus {
        let mut articles: Vec<Article> = texts
            .iter()
            .enumerate()
            .map(|(i, (t, x))| Article::content(&format!("Q{i}"), t, "en", x))
            .collect();
        articles.push(Article::content("QX", "X", "en", "Target."));
        Corpus::from_articles(articles).unwrap()
    }

    #[test]
    fn one_sentence_per_linked_article() {
        let texts: Vec<(String, String)> = (0..10)
            .map(|i| (format!("A{i}"), format!("See [[X|x{i}]]. Then more.")))
            .collect();
        let refs: Vec<(&str, &str)> = texts
            .iter()
            .map(|(a, b)| (a.as_str(), b.as_str()))
            .collect();
        let gold = build_gold(&corpus(&refs), &GoldConfig::default()).unwrap();
        assert_eq!(gold.train.len(), 5);
        assert_eq!(gold.test.len(), 5);
        assert!(gold
            .all()
            .all(|s| s.links.len() == 1 && s.sentence_index == 0));
    }

    #[test]
    fn first_linked_sentence_is_chosen() {
        let c = corpus(&[("A", "One. Two. Three [[X|here]]. Four [[X]].")]);
        let s = &first_linked_sentences(&c)[0];
        assert_eq!(s.sentence_index, 2);
        assert_eq!(s.text, "Three here.");
        assert_eq!(s.links[0].span, Span::new(6, 10));
    }

    #[test]
    fn sampling_is_seeded() {
        let texts: Vec<(String, String)> = (0..10)
            .map(|i| (format!("A{i}"), format!("[[X]] {i}.")))
            .collect();
        let refs: Vec<(&str, &str)> = texts
            .iter()
            .map(|(a, b)| (a.as_str(), b.as_str()))
            .collect();
        let c = corpus(&refs);
        let cfg = GoldConfig {
            max_sentences: Some(4),
            seed: 9,
            ..GoldConfig::default()
        };
        let a = build_gold(&c, &cfg).unwrap();
        assert_eq!(a.all().count(), 4);
        assert_eq!(a, build_gold(&c, &cfg).unwrap());
        for s in &a.train {
            assert!(!a.test.iter().any(|t| t.source == s.source));
        }
    }

    #[test]
    fn unlinked_corpus_is_an_error() {
        let c = corpus(&[("A", "Nothing here.")]);
        assert!(matches!(
            build_gold(&c, &GoldConfig::default()),
            Err(EvalError::NoLinkedSentences)
        ));
    }

    #[test]
    fn markup_round_trip() {
        let c = corpus(&[("A", "Go to [[X|the x]] and [[X]] now.")]);
        let s = &first_linked_sentences(&c)[0];
        let parsed = parse_markup(&s.to_markup()).unwrap();
        assert_eq!(parsed.plain_text, s.text);
        assert_eq!(parsed.links, s.links);
        let (plain, links) = strip_links(s);
        assert_eq!(plain, "Go to the x and X now.");
        assert_eq!(links.len(), 2);
    }

    #[test]
    fn file_round_trip() {
        let c = corpus(&[("A", "[[X]] a."), ("B", "[[X]] b.")]);
        let gold = build_gold(&c, &GoldConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_gold(&mut buf, &gold.train).unwrap();
        write_gold(&mut buf, &gold.test).unwrap();
        assert_eq!(read_gold(buf.as_slice()).unwrap(), gold);
    }
}
