//! Article vector spaces: content embeddings trained on article text with
//! links as entity tokens, and navigation embeddings trained on reading
//! sessions. Both feed cosine-similarity features.
//!
//! Vector files are plain text: a `count dim` header line, then one
//! `key v1 … v_dim` line per vector. Spaces inside keys are written as `_`
//! and read back as spaces, the usual wiki title convention.
//!
//! Session files hold one reading session per line as tab-separated entity
//! ids.

pub mod sgns;

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anchors::normalize_mention;
use crate::corpus::Corpus;
use crate::scalar::Scalar;

pub use sgns::SgnsParams;

pub const DEFAULT_DIM: usize = 50;

/// Prefix marking entity tokens in content training streams.
pub const ENTITY_PREFIX: &str = "ENTITY/";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingKind {
    Content,
    Navigation,
}

impl std::str::FromStr for EmbeddingKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "content" => Ok(EmbeddingKind::Content),
            "navigation" | "nav" => Ok(EmbeddingKind::Navigation),
            other => Err(format!("unknown embedding kind {other:?}")),
        }
    }
}

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("vector for {key:?} has {found} values, store dimension is {expected}")]
    Dimension {
        key: String,
        expected: usize,
        found: usize,
    },
    #[error("vector for {key:?} has a non-finite value")]
    NonFinite { key: String },
    #[error("no training input")]
    EmptyInput,
}

/// Cosine similarity with a flag for the missing-vector fallback.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Similarity<T> {
    pub value: T,
    pub missing: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore<T> {
    dim: usize,
    kind: EmbeddingKind,
    vectors: BTreeMap<String, Vec<T>>,
}

impl<T: Scalar> EmbeddingStore<T> {
    pub fn new(dim: usize, kind: EmbeddingKind) -> Self {
        EmbeddingStore {
            dim,
            kind,
            vectors: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> EmbeddingKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&[T]> {
        self.vectors.get(key).map(Vec::as_slice)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.vectors.keys().map(String::as_str)
    }

    pub fn insert(&mut self, key: impl Into<String>, vector: Vec<T>) -> Result<(), EmbeddingError> {
        let key = key.into();
        if vector.len() != self.dim {
            return Err(EmbeddingError::Dimension {
                key,
                expected: self.dim,
                found: vector.len(),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite { key });
        }
        self.vectors.insert(key, vector);
        Ok(())
    }

    /// Cosine of the two vectors, clamped to [-1, 1]. Absent or zero-norm
    /// vectors give 0.0 with `missing` set.
    pub fn cosine(&self, a: &str, b: &str) -> Similarity<T> {
        let missing = Similarity {
            value: T::zero(),
            missing: true,
        };
        let (Some(va), Some(vb)) = (self.get(a), self.get(b)) else {
            return missing;
        };
        let dot: T = va.iter().zip(vb).map(|(&x, &y)| x * y).sum();
        let na = va.iter().map(|&x| x * x).sum::<T>().sqrt();
        let nb = vb.iter().map(|&x| x * x).sum::<T>().sqrt();
        if na == T::zero() || nb == T::zero() {
            return missing;
        }
        Similarity {
            value: (dot / (na * nb)).max(-T::one()).min(T::one()),
            missing: false,
        }
    }

    /// Re-keys the store through `key_of`: every title whose key has a vector
    /// gets that vector. Used to turn entity-id navigation vectors into
    /// per-language title vectors.
    pub fn reverse_map(&self, key_of: &HashMap<String, String>) -> EmbeddingStore<T> {
        let mut out = EmbeddingStore::new(self.dim, self.kind);
        for (title, key) in key_of {
            if let Some(v) = self.vectors.get(key) {
                out.vectors.insert(title.clone(), v.clone());
            }
        }
        out
    }

    pub fn write<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{} {}", self.vectors.len(), self.dim)?;
        for (key, v) in &self.vectors {
            write!(out, "{}", key.replace(' ', "_"))?;
            for x in v {
                write!(out, " {x}")?;
            }
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()
    }

    pub fn read<R: BufRead>(reader: R, kind: EmbeddingKind) -> Result<Self, EmbeddingError> {
        let mut lines = reader.lines().enumerate();
        let header = loop {
            match lines.next() {
                None => return Ok(EmbeddingStore::new(DEFAULT_DIM, kind)),
                Some((_, line)) => {
                    let line = line?;
                    if !line.trim().is_empty() {
                        break line;
                    }
                }
            }
        };
        let fields: Vec<&str> = header.split_whitespace().collect();
        let parse = |s: &str| s.parse::<usize>().ok();
        let (count, dim) = match fields.as_slice() {
            [c, d] => match (parse(c), parse(d)) {
                (Some(c), Some(d)) if d > 0 => (c, d),
                _ => return Err(format_err(1, "header must be `count dim`")),
            },
            _ => return Err(format_err(1, "header must be `count dim`")),
        };
        let mut store = EmbeddingStore::new(dim, kind);
        for (i, line) in lines {
            let line_no = i + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let key = parts.next().unwrap_or_default().replace('_', " ");
            let values: Vec<T> = parts
                .map(|p| {
                    p.parse::<T>()
                        .map_err(|_| format_err(line_no, &format!("bad value {p:?}")))
                })
                .collect::<Result<_, _>>()?;
            store.insert(key, values).map_err(|e| match e {
                EmbeddingError::Dimension {
                    found, expected, ..
                } => format_err(
                    line_no,
                    &format!("expected {expected} values, found {found}"),
                ),
                other => format_err(line_no, &other.to_string()),
            })?;
        }
        if store.len() != count {
            return Err(format_err(
                1,
                &format!("header declares {count} vectors, found {}", store.len()),
            ));
        }
        Ok(store)
    }

    pub fn load(path: impl AsRef<Path>, kind: EmbeddingKind) -> Result<Self, EmbeddingError> {
        Self::read(BufReader::new(File::open(path)?), kind)
    }
}

fn format_err(line: usize, message: &str) -> EmbeddingError {
    EmbeddingError::Format {
        line,
        message: message.to_string(),
    }
}

pub fn entity_token(title: &str) -> String {
    format!("{ENTITY_PREFIX}{title}")
}

/// Token streams for content training, one per sentence.
///
/// Each stream starts with the article's own entity token, followed by the
/// sentence's normalized word tokens; every link's target entity token is
/// emitted right after its anchor words.
pub fn content_streams(corpus: &Corpus) -> Vec<Vec<String>> {
    let mut streams = Vec::new();
    for article in corpus.content_articles() {
        let parsed = corpus.parse(article);
        let own = entity_token(&article.title);
        for sentence in &parsed.sentences {
            let mut stream = vec![own.clone()];
            let links: Vec<_> = parsed
                .links
                .iter()
                .filter(|l| sentence.span.contains(&l.span))
                .collect();
            let mut next_link = 0;
            for tok in &sentence.tokens {
                while next_link < links.len() && links[next_link].span.end <= tok.span.start {
                    stream.push(entity_token(&links[next_link].target));
                    next_link += 1;
                }
                if !tok.is_punctuation() {
                    stream.push(normalize_mention(&tok.text));
                }
            }
            for link in &links[next_link..] {
                stream.push(entity_token(&link.target));
            }
            streams.push(stream);
        }
    }
    streams
}

/// Trains content vectors keyed by article title.
pub fn train_content_embeddings<T: Scalar>(
    corpus: &Corpus,
    params: &SgnsParams,
) -> Result<EmbeddingStore<T>, EmbeddingError> {
    if corpus.content_count() == 0 {
        return Err(EmbeddingError::EmptyInput);
    }
    let streams = content_streams(corpus);
    let out = sgns::train::<T, _>(&streams, params);
    if out.pairs_per_epoch == 0 {
        tracing::warn!("content corpus produced no training pairs; embedding store is empty");
    }
    let mut store = EmbeddingStore::new(params.dim, EmbeddingKind::Content);
    for (token, v) in out.vectors {
        if let Some(title) = token.strip_prefix(ENTITY_PREFIX) {
            store.insert(title, v)?;
        }
    }
    Ok(store)
}

/// A sequence of entity ids visited in one reading session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReadingSession(pub Vec<String>);

pub fn read_sessions<R: BufRead>(reader: R) -> Result<Vec<ReadingSession>, EmbeddingError> {
    let mut sessions = Vec::new();
    for line in reader.lines() {
        let line = line?;
        let ids: Vec<String> = line
            .split('\t')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect();
        if !ids.is_empty() {
            sessions.push(ReadingSession(ids));
        }
    }
    Ok(sessions)
}

pub fn load_sessions(path: impl AsRef<Path>) -> Result<Vec<ReadingSession>, EmbeddingError> {
    read_sessions(BufReader::new(File::open(path)?))
}

pub fn write_sessions<W: Write>(mut out: W, sessions: &[ReadingSession]) -> io::Result<()> {
    for s in sessions {
        writeln!(out, "{}", s.0.join("\t"))?;
    }
    Ok(())
}

/// Trains navigation vectors keyed by entity id. Sessions of length one carry
/// no co-occurrence; if nothing else is left the store is empty and a warning
/// is logged.
pub fn train_navigation_embeddings<T: Scalar>(
    sessions: &[ReadingSession],
    params: &SgnsParams,
) -> Result<EmbeddingStore<T>, EmbeddingError> {
    if sessions.is_empty() {
        return Err(EmbeddingError::EmptyInput);
    }
    let seqs: Vec<&Vec<String>> = sessions.iter().map(|s| &s.0).collect();
    let seqs: Vec<Vec<&str>> = seqs
        .iter()
        .map(|s| s.iter().map(String::as_str).collect())
        .collect();
    let out = sgns::train::<T, _>(&seqs, params);
    if out.vectors.is_empty() {
        tracing::warn!("reading sessions contain no co-visits; navigation store is empty");
    }
    let mut store = EmbeddingStore::new(params.dim, EmbeddingKind::Navigation);
    for (id, v) in out.vectors {
        store.insert(id, v)?;
    }
    Ok(store)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Article;
    use proptest::prelude::*;

    fn store(rows: &[(&str, Vec<f64>)]) -> EmbeddingStore<f64> {
        let mut s = EmbeddingStore::new(rows[0].1.len(), EmbeddingKind::Content);
        for (k, v) in rows {
            s.insert(*k, v.clone()).unwrap();
        }
        s
    }

    #[test]
    fn cosine_cases() {
        let s = store(&[
            ("a", vec![1.0, 2.0, 3.0]),
            ("b", vec![1.0, 2.0, 3.0]),
            ("x", vec![1.0, 0.0, 0.0]),
            ("y", vec![0.0, 1.0, 0.0]),
            ("z", vec![0.0, 0.0, 0.0]),
        ]);
        assert!((s.cosine("a", "b").value - 1.0).abs() < 1e-15);
        assert_eq!(s.cosine("x", "y").value, 0.0);
        assert!(!s.cosine("x", "y").missing);
        let absent = s.cosine("a", "nope");
        assert_eq!((absent.value, absent.missing), (0.0, true));
        assert!(s.cosine("a", "z").missing);
    }

    #[test]
    fn load_vector_file() {
        let row = |k: &str| {
            let vals: Vec<String> = (0..50).map(|i| format!("{}", i as f64 * 0.01)).collect();
            format!("{k} {}", vals.join(" "))
        };
        let text = format!(
            "3 50\n{}\n{}\n{}\n",
            row("A"),
            row("Eastern_Roman_Empire"),
            row("C")
        );
        let s = EmbeddingStore::<f64>::read(text.as_bytes(), EmbeddingKind::Content).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.dim(), 50);
        assert!(s.get("Eastern Roman Empire").is_some());

        let short: Vec<String> = (0..49).map(|i| i.to_string()).collect();
        let bad = format!("2 50\n{}\nB {}\n", row("A"), short.join(" "));
        match EmbeddingStore::<f64>::read(bad.as_bytes(), EmbeddingKind::Content) {
            Err(EmbeddingError::Format { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected format error, got {other:?}"),
        }

        let empty = EmbeddingStore::<f32>::read(&b""[..], EmbeddingKind::Navigation).unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn write_read_round_trip_is_exact() {
        let s = store(&[
            ("Paris, Texas", vec![0.1, -1.0 / 3.0, 1e-300]),
            ("b", vec![2.0, 0.0, -0.5]),
        ]);
        let mut buf = Vec::new();
        s.write(&mut buf).unwrap();
        let back = EmbeddingStore::<f64>::read(buf.as_slice(), EmbeddingKind::Content).unwrap();
        assert_eq!(back, s);
    }

    proptest! {
        #[test]
        fn cosine_symmetric_and_scale_invariant(
            a in prop::collection::vec(-10.0f64..10.0, 6),
            b in prop::collection::vec(-10.0f64..10.0, 6),
            c in 0.01f64..100.0,
        ) {
            let s = store(&[("a", a.clone()), ("b", b.clone())]);
            let ab = s.cosine("a", "b");
            let ba = s.cosine("b", "a");
            prop_assert!((ab.value - ba.value).abs() <= 1e-12);
            prop_assert!((-1.0..=1.0).contains(&ab.value));
            let scaled = store(&[("a", a.iter().map(|x| x * c).collect()), ("b", b)]);
            prop_assert!((scaled.cosine("a", "b").value - ab.value).abs() <= 1e-9);
        }
    }

    #[test]
    fn content_streams_interleave_entities() {
        let c = Corpus::from_articles(vec![
            Article::content(
                "1",
                "S",
                "en",
                "She was born in [[Chicago|the city]], Illinois.",
            ),
            Article::content("2", "Chicago", "en", "x"),
        ])
        .unwrap();
        let streams = content_streams(&c);
        assert_eq!(
            streams[0],
            [
                "ENTITY/S",
                "she",
                "was",
                "born",
                "in",
                "the",
                "city",
                "ENTITY/Chicago",
                "illinois"
            ]
        );
    }

    fn two_cluster_corpus() -> Corpus {
        let a = "the river delta floods every spring and farmers plant rice near the river banks";
        let b = "the orbital probe measured solar wind and cosmic rays beyond the outer planets";
        let mut articles = Vec::new();
        for (i, (title, base)) in [("A1", a), ("A2", a), ("B1", b)].iter().enumerate() {
            let text = (0..12)
                .map(|k| format!("{base} {} item{k}.", title.to_lowercase()))
                .collect::<Vec<_>>()
                .join(" ");
            articles.push(Article::content(&i.to_string(), title, "en", &text));
        }
        Corpus::from_articles(articles).unwrap()
    }

    #[test]
    fn shared_text_gives_similar_entities() {
        let params = SgnsParams {
            epochs: 10,
            seed: 7,
            ..SgnsParams::default()
        };
        let s = train_content_embeddings::<f64>(&two_cluster_corpus(), &params).unwrap();
        assert_eq!(s.dim(), 50);
        assert!(s.get("A1").unwrap().len() == 50);
        assert!(s.cosine("A1", "A2").value > s.cosine("A1", "B1").value);
    }

    #[test]
    fn min_count_drops_rare_entities() {
        let c = Corpus::from_articles(vec![
            Article::content("1", "S", "en", "a b c [[T]]. a b c. a b c."),
            Article::content("2", "T", "en", ""),
        ])
        .unwrap();
        let params = SgnsParams {
            min_count: 2,
            dim: 8,
            ..SgnsParams::default()
        };
        let s = train_content_embeddings::<f64>(&c, &params).unwrap();
        assert!(s.get("S").is_some());
        assert!(s.get("T").is_none());
        assert!(matches!(
            train_content_embeddings::<f64>(&Corpus::default(), &params),
            Err(EmbeddingError::EmptyInput)
        ));
    }

    #[test]
    fn navigation_follows_co_visits() {
        let mut sessions = Vec::new();
        for i in 0..300 {
            let tail = if i % 2 == 0 { "D" } else { "E" };
            sessions.push(ReadingSession(vec!["A".into(), "B".into(), tail.into()]));
            sessions.push(ReadingSession(vec!["C".into(), "F".into()]));
        }
        let params = SgnsParams {
            seed: 3,
            ..SgnsParams::default()
        };
        let s = train_navigation_embeddings::<f64>(&sessions, &params).unwrap();
        assert_eq!(s.dim(), 50);
        assert!(s.cosine("A", "B").value > s.cosine("A", "C").value);

        let ids: HashMap<String, String> = [("Alpha".to_string(), "A".to_string())].into();
        assert_eq!(s.reverse_map(&ids).get("Alpha"), s.get("A"));
    }

    #[test]
    fn navigation_degenerate_inputs() {
        let params = SgnsParams::default();
        assert!(matches!(
            train_navigation_embeddings::<f64>(&[], &params),
            Err(EmbeddingError::EmptyInput)
        ));
        let singles = vec![
            ReadingSession(vec!["A".into()]),
            ReadingSession(vec!["B".into()]),
        ];
        assert!(train_navigation_embeddings::<f64>(&singles, &params)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn sessions_file_round_trip() {
        let s = vec![ReadingSession(vec!["Q1".into(), "Q2".into()])];
        let mut buf = Vec::new();
        write_sessions(&mut buf, &s).unwrap();
        assert_eq!(buf, b"Q1\tQ2\n");
        assert_eq!(read_sessions(buf.as_slice()).unwrap(), s);
    }
}
