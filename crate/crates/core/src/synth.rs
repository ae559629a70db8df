//! Seeded generator for a planted-rule corpus.
//!
//! Articles fall into two topic clusters with disjoint filler vocabularies.
//! Ambiguous names have one target per cluster, and an article always links
//! the target from its own cluster; a few rarely linked extra targets and
//! disambiguation pages add noise. Concept words are linked only
//! occasionally, so their link counts stay low while named entities are
//! linked often. Reading sessions stay inside one cluster.

use std::collections::{BTreeSet, HashSet};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::anchors::DEFAULT_TYPE_BLOCKLIST;
use crate::corpus::{link_markup, write_wikilite, Article, Corpus, CorpusError};
use crate::embeddings::{write_sessions, ReadingSession};

const CONSONANTS: &[char] = &[
    'b', 'd', 'f', 'g', 'k', 'l', 'm', 'n', 'p', 'r', 's', 't', 'v', 'z',
];
const VOWELS: &[char] = &['a', 'e', 'i', 'o', 'u'];
const FUNCTION_WORDS: &[&str] = &[
    "the", "of", "and", "in", "a", "with", "near", "by", "from", "to", "was", "is", "its", "on",
    "at", "for", "as", "or", "that", "which",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub named_per_cluster: usize,
    /// Names shared by one entity in each cluster.
    pub ambiguous_names: usize,
    pub concepts_per_cluster: usize,
    pub fillers_per_cluster: usize,
    pub min_later_sentences: usize,
    pub max_later_sentences: usize,
    pub concept_link_rate: f64,
    /// Chance that a later sentence links a rarely used extra target.
    pub noise_link_rate: f64,
    pub disambiguation_pages: usize,
    pub redirects: usize,
    pub sessions: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 7,
            named_per_cluster: 150,
            ambiguous_names: 90,
            concepts_per_cluster: 300,
            fillers_per_cluster: 1900,
            min_later_sentences: 6,
            max_later_sentences: 10,
            concept_link_rate: 0.12,
            noise_link_rate: 0.015,
            disambiguation_pages: 10,
            redirects: 20,
            sessions: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    Named,
    Noise,
    Concept,
    Disambiguation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthEntity {
    pub id: String,
    pub title: String,
    /// Text used when the entity is mentioned.
    pub surface: String,
    pub cluster: usize,
    pub kind: EntityKind,
    pub alias: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub articles: Vec<Article>,
    pub sessions: Vec<ReadingSession>,
    pub entities: Vec<SynthEntity>,
    /// Distinct words used anywhere in article text.
    pub vocabulary: usize,
}

impl SynthCorpus {
    pub fn corpus(&self) -> Result<Corpus, CorpusError> {
        Corpus::from_articles(self.articles.clone())
    }

    pub fn cluster_of(&self, title: &str) -> Option<usize> {
        self.entities
            .iter()
            .find(|e| e.title == title)
            .map(|e| e.cluster)
    }

    /// Writes `corpus.jsonl` and `sessions.tsv` into `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> io::Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut w = BufWriter::new(File::create(dir.join("corpus.jsonl"))?);
        write_wikilite(&mut w, &self.articles)?;
        w.flush()?;
        let mut w = BufWriter::new(File::create(dir.join("sessions.tsv"))?);
        write_sessions(&mut w, &self.sessions)?;
        w.flush()
    }
}

struct Words {
    rng: ChaCha8Rng,
    used: HashSet<String>,
}

impl Words {
    fn fresh(&mut self) -> String {
        loop {
            let syllables = if self.rng.gen_bool(0.6) { 2 } else { 3 };
            let mut w = String::new();
            for _ in 0..syllables {
                w.push(*CONSONANTS.choose(&mut self.rng).unwrap());
                w.push(*VOWELS.choose(&mut self.rng).unwrap());
            }
            if self.rng.gen_bool(0.3) {
                w.push(*CONSONANTS.choose(&mut self.rng).unwrap());
            }
            if self.used.insert(w.clone()) {
                return w;
            }
        }
    }

    fn phrase(&mut self, two_word_rate: f64) -> String {
        if self.rng.gen_bool(two_word_rate) {
            format!("{} {}", self.fresh(), self.fresh())
        } else {
            self.fresh()
        }
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn title_case(s: &str) -> String {
    s.split(' ').map(capitalize).collect::<Vec<_>>().join(" ")
}

struct Builder {
    entities: Vec<SynthEntity>,
}

impl Builder {
    fn add(&mut self, title: String, surface: String, cluster: usize, kind: EntityKind) -> usize {
        let id = format!("Q{}", 1000 + self.entities.len());
        self.entities.push(SynthEntity {
            id,
            title,
            surface,
            cluster,
            kind,
            alias: None,
        });
        self.entities.len() - 1
    }
}

pub fn generate(config: &SynthConfig) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut words = Words {
        rng: ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed),
        used: FUNCTION_WORDS.iter().map(|s| s.to_string()).collect(),
    };
    let mut b = Builder {
        entities: Vec::new(),
    };
    let ambiguous = config.ambiguous_names.min(config.named_per_cluster);

    for i in 0..ambiguous {
        let name = title_case(&words.phrase(0.3));
        for cluster in 0..2 {
            let title = format!("{name} ({})", words.fresh());
            b.add(title, name.clone(), cluster, EntityKind::Named);
        }
        for _ in 0..i % 3 {
            let title = format!("{name} ({})", words.fresh());
            let cluster = rng.gen_range(0..2);
            b.add(title, name.clone(), cluster, EntityKind::Noise);
        }
        if i < config.disambiguation_pages {
            b.add(
                format!("{name} (disambiguation)"),
                name.clone(),
                rng.gen_range(0..2),
                EntityKind::Disambiguation,
            );
        }
    }
    for cluster in 0..2 {
        for _ in ambiguous..config.named_per_cluster {
            let name = title_case(&words.phrase(0.3));
            b.add(name.clone(), name, cluster, EntityKind::Named);
        }
        for _ in 0..config.concepts_per_cluster {
            let word = words.phrase(0.3);
            b.add(capitalize(&word), word, cluster, EntityKind::Concept);
        }
    }
    let mut redirected = 0;
    for e in b.entities.iter_mut() {
        if redirected < config.redirects && e.kind == EntityKind::Named && e.title == e.surface {
            e.alias = Some(format!("{} {}", e.title, capitalize(&words.fresh())));
            redirected += 1;
        }
    }
    let fillers: Vec<Pool> = (0..2)
        .map(|_| {
            Pool::zipf(
                (0..config.fillers_per_cluster)
                    .map(|_| words.fresh())
                    .collect(),
            )
        })
        .collect();

    let entities = b.entities;
    let by = |kind: EntityKind, cluster: Option<usize>| -> Vec<usize> {
        (0..entities.len())
            .filter(|&i| {
                entities[i].kind == kind && cluster.is_none_or(|c| entities[i].cluster == c)
            })
            .collect()
    };
    let named: Vec<Vec<usize>> = (0..2).map(|c| by(EntityKind::Named, Some(c))).collect();
    let concepts: Vec<Vec<usize>> = (0..2).map(|c| by(EntityKind::Concept, Some(c))).collect();
    let noise = by(EntityKind::Noise, None);
    let disambiguation = by(EntityKind::Disambiguation, None);

    let mut articles = Vec::new();
    let mut vocabulary: BTreeSet<String> = BTreeSet::new();
    for (idx, e) in entities.iter().enumerate() {
        let c = e.cluster;
        let other = 1 - c;
        let mut sentences = Vec::new();

        // first sentence: named links from the own cluster plus concepts
        let mut items: Vec<String> = Vec::new();
        let picks: Vec<usize> = named[c]
            .choose_multiple(&mut rng, 4)
            .copied()
            .filter(|&i| i != idx)
            .take(3)
            .collect();
        for i in picks {
            items.push(named_link(&entities[i], &mut rng));
        }
        let picks: Vec<usize> = concepts[c]
            .choose_multiple(&mut rng, 4)
            .copied()
            .filter(|&i| i != idx)
            .take(3)
            .collect();
        for i in picks {
            items.push(concept_mention(
                &entities[i],
                config.concept_link_rate,
                &mut rng,
            ));
        }
        for _ in 0..rng.gen_range(6..=10) {
            items.push(filler(&fillers[c], &mut rng));
        }
        sentences.push(sentence(items, &fillers[c], &mut rng));

        let later = rng.gen_range(config.min_later_sentences..=config.max_later_sentences);
        for _ in 0..later {
            let mut items = Vec::new();
            for _ in 0..rng.gen_range(5..=10) {
                let pool = if rng.gen_bool(0.9) {
                    &fillers[c]
                } else {
                    &fillers[other]
                };
                items.push(filler(pool, &mut rng));
            }
            for _ in 0..rng.gen_range(1..=2) {
                let pool = if rng.gen_bool(0.85) {
                    &concepts[c]
                } else {
                    &concepts[other]
                };
                let i = *pool.choose(&mut rng).unwrap();
                if i != idx {
                    items.push(concept_mention(
                        &entities[i],
                        config.concept_link_rate,
                        &mut rng,
                    ));
                }
            }
            if rng.gen_bool(0.6) {
                let i = *named[c].choose(&mut rng).unwrap();
                if i != idx {
                    items.push(if rng.gen_bool(0.15) {
                        named_link(&entities[i], &mut rng)
                    } else {
                        entities[i].surface.clone()
                    });
                }
            }
            if !noise.is_empty() && rng.gen_bool(config.noise_link_rate) {
                let i = *noise.choose(&mut rng).unwrap();
                items.push(link_markup(&entities[i].title, &entities[i].surface));
            }
            if !disambiguation.is_empty() && rng.gen_bool(config.noise_link_rate / 3.0) {
                let i = *disambiguation.choose(&mut rng).unwrap();
                items.push(link_markup(&entities[i].title, &entities[i].surface));
            }
            sentences.push(sentence(items, &fillers[c], &mut rng));
        }
        let text = sentences.join(" ");
        for w in text.split(|ch: char| !ch.is_alphanumeric()) {
            if !w.is_empty() {
                vocabulary.insert(w.to_lowercase());
            }
        }
        let mut article = Article::content(&e.id, &e.title, "en", &text);
        if e.kind == EntityKind::Disambiguation {
            article = article.with_tags([DEFAULT_TYPE_BLOCKLIST[0]]);
        }
        articles.push(article);
    }
    for e in &entities {
        if let Some(alias) = &e.alias {
            let id = format!("R{}", &e.id[1..]);
            articles.push(Article::redirect(&id, alias, "en", &e.title));
        }
    }

    let members: Vec<Vec<&str>> = (0..2)
        .map(|c| {
            entities
                .iter()
                .filter(|e| e.cluster == c && e.kind != EntityKind::Disambiguation)
                .map(|e| e.id.as_str())
                .collect()
        })
        .collect();
    let sessions = (0..config.sessions)
        .map(|_| {
            let c = rng.gen_range(0..2);
            let len = rng.gen_range(4..=9);
            ReadingSession(
                (0..len)
                    .map(|_| members[c].choose(&mut rng).unwrap().to_string())
                    .collect(),
            )
        })
        .collect();

    SynthCorpus {
        articles,
        sessions,
        entities,
        vocabulary: vocabulary.len(),
    }
}

fn named_link(e: &SynthEntity, rng: &mut ChaCha8Rng) -> String {
    match &e.alias {
        Some(alias) if rng.gen_bool(0.3) => link_markup(alias, &e.surface),
        _ => link_markup(&e.title, &e.surface),
    }
}

fn concept_mention(e: &SynthEntity, rate: f64, rng: &mut ChaCha8Rng) -> String {
    if rng.gen_bool(rate) {
        link_markup(&e.title, &e.surface)
    } else {
        e.surface.clone()
    }
}

/// Words drawn with probability proportional to 1 / rank.
struct Pool {
    words: Vec<String>,
    weights: WeightedIndex<f64>,
}

impl Pool {
    fn zipf(words: Vec<String>) -> Pool {
        let weights =
            WeightedIndex::new((1..=words.len()).map(|r| 1.0 / r as f64)).expect("non-empty pool");
        Pool { words, weights }
    }

    fn pick(&self, rng: &mut ChaCha8Rng) -> &str {
        &self.words[self.weights.sample(rng)]
    }
}

fn filler(pool: &Pool, rng: &mut ChaCha8Rng) -> String {
    if rng.gen_bool(0.25) {
        FUNCTION_WORDS.choose(rng).unwrap().to_string()
    } else {
        pool.pick(rng).to_string()
    }
}

/// Shuffles the items behind a capitalized filler word and closes the
/// sentence; a comma now and then gives the tokenizer punctuation to skip.
fn sentence(mut items: Vec<String>, pool: &Pool, rng: &mut ChaCha8Rng) -> String {
    items.shuffle(rng);
    let mut out = capitalize(pool.pick(rng));
    for item in items {
        if rng.gen_bool(0.1) {
            out.push(',');
        }
        out.push(' ');
        out.push_str(&item);
    }
    out.push('.');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            named_per_cluster: 20,
            ambiguous_names: 10,
            concepts_per_cluster: 30,
            fillers_per_cluster: 100,
            sessions: 50,
            disambiguation_pages: 2,
            redirects: 3,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn deterministic_and_loadable() {
        let a = generate(&small());
        let b = generate(&small());
        assert_eq!(a.articles, b.articles);
        assert_eq!(a.sessions, b.sessions);
        let corpus = a.corpus().unwrap();
        assert_eq!(corpus.len(), a.articles.len());
        assert_eq!(corpus.redirects().len(), 3);
    }

    #[test]
    fn ambiguous_names_link_by_cluster() {
        let s = generate(&small());
        let corpus = s.corpus().unwrap();
        let mut checked = 0;
        for a in corpus.content_articles() {
            let own = s.cluster_of(&a.title).unwrap();
            let parsed = corpus.parse(a);
            for l in parsed.links_in_sentence(0) {
                let target = s.entities.iter().find(|e| e.title == l.target).unwrap();
                assert_eq!(target.cluster, own);
                checked += 1;
            }
        }
        assert!(checked > 100);
    }

    #[test]
    fn sessions_stay_in_one_cluster() {
        let s = generate(&small());
        for session in &s.sessions {
            let clusters: HashSet<usize> = session
                .0
                .iter()
                .map(|id| s.entities.iter().find(|e| &e.id == id).unwrap().cluster)
                .collect();
            assert_eq!(clusters.len(), 1);
        }
    }

    #[test]
    fn default_size() {
        let s = generate(&SynthConfig::default());
        let content = s.articles.iter().filter(|a| !a.is_redirect()).count();
        assert!((900..=1100).contains(&content), "{content} articles");
        assert!(
            (4000..=6000).contains(&s.vocabulary),
            "{} words",
            s.vocabulary
        );
    }
}
