//! The anchor dictionary: every normalized anchor text seen on an existing
//! link, the targets it points to, and how often the text occurs at all.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::corpus::Corpus;
use crate::mentions::{detect_mentions, MentionLexicon, DEFAULT_MAX_NGRAM};

/// Identifies [`normalize_mention`]; stored in dictionary files.
pub const NORMALIZATION: &str = "nfc-casefold-ws/1";

pub const DEFAULT_PRIOR_CUTOFF: f64 = 0.065;

/// Instance-of values whose articles are never link targets: disambiguation
/// page, list page, year, calendar year.
pub const DEFAULT_TYPE_BLOCKLIST: [&str; 4] = ["Q4167410", "Q13406463", "Q577", "Q3186692"];

const FORMAT_TAG: &str = "anchorlink-dict";
const FORMAT_VERSION: u32 = 1;

/// NFC, default case folding, trim and internal whitespace collapse.
pub fn normalize_mention(text: &str) -> String {
    let composed: String = text.nfc().collect();
    let folded = caseless::default_case_fold_str(&composed);
    let collapsed = folded.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed.nfc().collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorStats {
    /// Occurrences of the mention anywhere in corpus text.
    pub n_mention: u64,
    /// Occurrences as the anchor of a surviving link.
    pub n_linked: u64,
    pub candidates: BTreeMap<String, u64>,
}

impl AnchorStats {
    pub fn prior(&self) -> Option<Ratio<u64>> {
        (self.n_mention > 0).then(|| Ratio::new(self.n_linked, self.n_mention))
    }

    /// Candidates by descending count, ties in title order.
    pub fn ranked(&self) -> Vec<(&str, u64)> {
        let mut out: Vec<(&str, u64)> = self
            .candidates
            .iter()
            .map(|(t, &c)| (t.as_str(), c))
            .collect();
        out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        out
    }

    pub fn counts(&self) -> Vec<u64> {
        self.candidates.values().copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DictionaryConfig {
    pub prior_cutoff: f64,
    pub type_blocklist: BTreeSet<String>,
    /// Longest window, in tokens, used when counting unlinked occurrences.
    pub max_ngram: usize,
}

impl Default for DictionaryConfig {
    fn default() -> Self {
        DictionaryConfig {
            prior_cutoff: DEFAULT_PRIOR_CUTOFF,
            type_blocklist: DEFAULT_TYPE_BLOCKLIST
                .iter()
                .map(|s| s.to_string())
                .collect(),
            max_ngram: DEFAULT_MAX_NGRAM,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnchorDictionary {
    entries: BTreeMap<String, AnchorStats>,
    normalization: String,
    prior_cutoff: f64,
    type_blocklist: BTreeSet<String>,
}

#[derive(Debug, Error)]
pub enum DictionaryError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("unsupported dictionary {found}, expected {FORMAT_TAG} v{FORMAT_VERSION}")]
    Version { found: String },
    #[error("dictionary normalization {found:?} does not match {NORMALIZATION:?}")]
    Normalization { found: String },
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    normalization: String,
    prior_cutoff: f64,
    type_blocklist: BTreeSet<String>,
    entries: usize,
}

#[derive(Serialize, Deserialize)]
struct EntryRecord {
    mention: String,
    n_mention: u64,
    n_linked: u64,
    candidates: Vec<(String, u64)>,
}

impl AnchorDictionary {
    pub fn empty(config: &DictionaryConfig) -> Self {
        AnchorDictionary {
            entries: BTreeMap::new(),
            normalization: NORMALIZATION.to_string(),
            prior_cutoff: config.prior_cutoff,
            type_blocklist: config.type_blocklist.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn prior_cutoff(&self) -> f64 {
        self.prior_cutoff
    }

    pub fn type_blocklist(&self) -> &BTreeSet<String> {
        &self.type_blocklist
    }

    pub fn normalization(&self) -> &str {
        &self.normalization
    }

    /// Lookup by an already-normalized key.
    pub fn get_normalized(&self, key: &str) -> Option<&AnchorStats> {
        self.entries.get(key)
    }

    pub fn get(&self, mention: &str) -> Option<&AnchorStats> {
        self.entries.get(&normalize_mention(mention))
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &AnchorStats)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// `n_linked / n_mention`, or `None` for unknown mentions.
    pub fn prior(&self, mention: &str) -> Option<f64> {
        self.prior_exact(mention)
            .map(|r| *r.numer() as f64 / *r.denom() as f64)
    }

    pub fn prior_exact(&self, mention: &str) -> Option<Ratio<u64>> {
        self.get(mention).and_then(AnchorStats::prior)
    }

    /// Candidate targets by descending count, ties in title order; empty for
    /// unknown mentions.
    pub fn candidates(&self, mention: &str) -> Vec<(String, u64)> {
        self.get(mention)
            .map(|s| {
                s.ranked()
                    .into_iter()
                    .map(|(t, c)| (t.to_string(), c))
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Count of the (mention, target) pair.
    pub fn pair_count(&self, mention: &str, target: &str) -> Option<u64> {
        self.get(mention)?.candidates.get(target).copied()
    }

    pub fn write<W: Write>(&self, mut out: W) -> io::Result<()> {
        let header = Header {
            format: FORMAT_TAG.to_string(),
            version: FORMAT_VERSION,
            normalization: self.normalization.clone(),
            prior_cutoff: self.prior_cutoff,
            type_blocklist: self.type_blocklist.clone(),
            entries: self.entries.len(),
        };
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        for (mention, stats) in &self.entries {
            let record = EntryRecord {
                mention: mention.clone(),
                n_mention: stats.n_mention,
                n_linked: stats.n_linked,
                candidates: stats
                    .ranked()
                    .into_iter()
                    .map(|(t, c)| (t.to_string(), c))
                    .collect(),
            };
            serde_json::to_writer(&mut out, &record)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self, DictionaryError> {
        let mut lines = reader.lines();
        let header_line = lines.next().transpose()?.ok_or(DictionaryError::Format {
            line: 1,
            message: "missing header".into(),
        })?;
        let header: Header =
            serde_json::from_str(&header_line).map_err(|e| DictionaryError::Format {
                line: 1,
                message: e.to_string(),
            })?;
        if header.format != FORMAT_TAG || header.version != FORMAT_VERSION {
            return Err(DictionaryError::Version {
                found: format!("{} v{}", header.format, header.version),
            });
        }
        if header.normalization != NORMALIZATION {
            return Err(DictionaryError::Normalization {
                found: header.normalization,
            });
        }
        let mut entries = BTreeMap::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: EntryRecord =
                serde_json::from_str(&line).map_err(|e| DictionaryError::Format {
                    line: i + 2,
                    message: e.to_string(),
                })?;
            let stats = AnchorStats {
                n_mention: rec.n_mention,
                n_linked: rec.n_linked,
                candidates: rec.candidates.into_iter().collect(),
            };
            if stats.candidates.values().sum::<u64>() != stats.n_linked
                || stats.n_linked > stats.n_mention
            {
                return Err(DictionaryError::Format {
                    line: i + 2,
                    message: format!("inconsistent counts for {:?}", rec.mention),
                });
            }
            entries.insert(rec.mention, stats);
        }
        if entries.len() != header.entries {
            return Err(DictionaryError::Format {
                line: 1,
                message: format!(
                    "header declares {} entries, found {}",
                    header.entries,
                    entries.len()
                ),
            });
        }
        Ok(AnchorDictionary {
            entries,
            normalization: header.normalization,
            prior_cutoff: header.prior_cutoff,
            type_blocklist: header.type_blocklist,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DictionaryError> {
        Self::read(BufReader::new(File::open(path)?))
    }
}

impl MentionLexicon for AnchorDictionary {
    fn contains_key(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }
}

/// Builds the dictionary from every link in the corpus's content articles.
///
/// Link targets are redirect-resolved; links to missing pages are ignored.
/// Candidates whose target carries a blocklisted type tag are dropped.
/// `n_mention` counts every link anchor with the key plus every unlinked
/// occurrence found by the same longest-first matcher used at inference
/// (existing links act as skip spans). Entries whose prior falls below the
/// cutoff, or that have no candidate left, are removed.
pub fn build_dictionary(corpus: &Corpus, config: &DictionaryConfig) -> AnchorDictionary {
    let parsed: Vec<_> = corpus.content_articles().map(|a| corpus.parse(a)).collect();

    let mut anchor_occurrences: HashMap<String, u64> = HashMap::new();
    let mut candidates: HashMap<String, BTreeMap<String, u64>> = HashMap::new();
    for article in &parsed {
        for link in &article.links {
            let key = normalize_mention(&link.mention);
            if key.is_empty() {
                continue;
            }
            *anchor_occurrences.entry(key.clone()).or_default() += 1;
            let blocked = corpus
                .get(&link.target)
                .is_some_and(|t| !t.type_tags.is_disjoint(&config.type_blocklist));
            if !blocked {
                *candidates
                    .entry(key)
                    .or_default()
                    .entry(link.target.clone())
                    .or_default() += 1;
            }
        }
    }

    let keys: HashSet<String> = candidates.keys().cloned().collect();
    let mut unlinked: HashMap<String, u64> = HashMap::new();
    for article in &parsed {
        let skip = article.link_spans();
        for (index, sentence) in article.sentences.iter().enumerate() {
            for m in detect_mentions(
                &article.text,
                sentence,
                index,
                &keys,
                config.max_ngram,
                &skip,
            ) {
                *unlinked.entry(m.mention).or_default() += 1;
            }
        }
    }

    let mut dict = AnchorDictionary::empty(config);
    for (key, cands) in candidates {
        let n_linked: u64 = cands.values().sum();
        let n_mention = anchor_occurrences[&key] + unlinked.get(&key).copied().unwrap_or(0);
        if (n_linked as f64) / (n_mention as f64) < config.prior_cutoff {
            continue;
        }
        dict.entries.insert(
            key,
            AnchorStats {
                n_mention,
                n_linked,
                candidates: cands,
            },
        );
    }
    dict
}
