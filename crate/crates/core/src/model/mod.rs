//! Training-instance generation and the link classifier.

pub mod gbdt;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anchors::normalize_mention;
use crate::eval::GoldSentence;
use crate::features::{Feature, FeatureExtractor, FeatureVector, INPUT_NAMES};
use crate::mentions::{detect_mentions, DEFAULT_MAX_NGRAM};
use crate::scalar::Scalar;
use crate::span::Span;

pub use gbdt::{BoostError, BoostParams, Booster};

pub const DEFAULT_NEGATIVES_CAP: usize = 10;

const FORMAT_TAG: &str = "anchorlink-model";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Positive,
    NegativeAltCandidate,
    NegativeUnlinkedMention,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TripleRecord {
    pub source: String,
    pub target: String,
    pub mention: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingInstance<T> {
    pub features: FeatureVector<T>,
    /// 1 for an existing link, 0 otherwise.
    pub label: u8,
    pub provenance: Provenance,
    pub triple: TripleRecord,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceOptions {
    /// Negatives drawn per mention, highest-frequency candidates first.
    pub negatives_cap: usize,
    pub max_ngram: usize,
}

impl Default for InstanceOptions {
    fn default() -> Self {
        InstanceOptions {
            negatives_cap: DEFAULT_NEGATIVES_CAP,
            max_ngram: DEFAULT_MAX_NGRAM,
        }
    }
}

/// Labeled instances from gold sentences.
///
/// Each existing link whose (mention, target) pair is in the dictionary gives
/// a positive; the mention's other candidates give negatives. Dictionary
/// mentions found in the unlinked remainder of the sentence give negatives
/// for each of their candidates. Negatives per mention are capped, and the
/// source article is never a candidate of its own mentions.
pub fn generate_training_data<T: Scalar>(
    gold: &[GoldSentence],
    extractor: &FeatureExtractor<'_, T>,
    options: &InstanceOptions,
) -> Vec<TrainingInstance<T>> {
    let mut out = Vec::new();
    let dict = extractor.dict;
    for sentence in gold {
        let (text, span) = sentence.segment();
        for link in &sentence.links {
            let key = normalize_mention(&link.mention);
            let Some(stats) = dict.get_normalized(&key) else {
                continue;
            };
            let mut record = |target: &str, provenance: Provenance| {
                let features = extractor
                    .extract(&sentence.source, target, &key)
                    .expect("candidate comes from the dictionary");
                out.push(TrainingInstance {
                    features,
                    label: u8::from(provenance == Provenance::Positive),
                    provenance,
                    triple: TripleRecord {
                        source: sentence.source.clone(),
                        target: target.to_string(),
                        mention: link.mention.clone(),
                        span: link.span,
                    },
                });
            };
            if stats.candidates.contains_key(&link.target) {
                record(&link.target, Provenance::Positive);
            }
            for (alt, _) in stats
                .ranked()
                .into_iter()
                .filter(|(t, _)| *t != link.target && *t != sentence.source)
                .take(options.negatives_cap)
            {
                record(alt, Provenance::NegativeAltCandidate);
            }
        }

        let skip: Vec<Span> = sentence.links.iter().map(|l| l.span).collect();
        for m in detect_mentions(&text, &span, 0, dict, options.max_ngram, &skip) {
            let stats = dict.get_normalized(&m.mention).expect("detected key");
            let candidates = stats
                .ranked()
                .into_iter()
                .filter(|(t, _)| *t != sentence.source);
            for (target, _) in candidates.take(options.negatives_cap) {
                let features = extractor
                    .extract(&sentence.source, target, &m.mention)
                    .expect("candidate comes from the dictionary");
                out.push(TrainingInstance {
                    features,
                    label: 0,
                    provenance: Provenance::NegativeUnlinkedMention,
                    triple: TripleRecord {
                        source: sentence.source.clone(),
                        target: target.to_string(),
                        mention: m.surface.clone(),
                        span: m.span,
                    },
                });
            }
        }
    }
    out
}

pub fn write_instances<T: Scalar, W: Write>(
    mut out: W,
    instances: &[TrainingInstance<T>],
) -> io::Result<()> {
    for inst in instances {
        serde_json::to_writer(&mut out, inst)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_instances<T: Scalar, R: BufRead>(
    reader: R,
) -> Result<Vec<TrainingInstance<T>>, ModelError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| ModelError::Format {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Train(#[from] BoostError),
    #[error("expected {expected} inputs, got {found}")]
    InputCount { expected: usize, found: usize },
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("unsupported model file {found}")]
    Version { found: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub corpus_fingerprint: Option<String>,
    pub trained_at_unix: u64,
    pub instances: usize,
    pub positives: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkModel<T> {
    format: String,
    version: u32,
    pub input_names: Vec<String>,
    pub params: BoostParams,
    pub booster: Booster<T>,
    pub metadata: TrainingMetadata,
}

impl<T: Scalar> LinkModel<T> {
    /// Wraps a booster over the nine standard inputs.
    pub fn from_booster(
        booster: Booster<T>,
        params: BoostParams,
        metadata: TrainingMetadata,
    ) -> Self {
        assert_eq!(booster.n_inputs, INPUT_NAMES.len());
        LinkModel {
            format: FORMAT_TAG.to_string(),
            version: FORMAT_VERSION,
            input_names: INPUT_NAMES.iter().map(|s| s.to_string()).collect(),
            params,
            booster,
            metadata,
        }
    }

    /// Probability that the candidate should be linked.
    pub fn predict(&self, features: &FeatureVector<T>) -> T {
        self.booster.predict(&features.to_inputs())
    }

    pub fn predict_inputs(&self, inputs: &[T]) -> Result<T, ModelError> {
        if inputs.len() != self.booster.n_inputs {
            return Err(ModelError::InputCount {
                expected: self.booster.n_inputs,
                found: inputs.len(),
            });
        }
        Ok(self.booster.predict(inputs))
    }

    /// Total split gain per feature scaled to sum to 100. Missing flags count
    /// towards their similarity feature. All zeros when no split was made.
    pub fn feature_importance(&self) -> Vec<(Feature, T)> {
        let gains = self.booster.gain_by_input();
        let per_feature: Vec<(Feature, T)> = Feature::ALL
            .iter()
            .map(|&f| (f, f.inputs().iter().map(|&i| gains[i]).sum::<T>()))
            .collect();
        let total: T = per_feature.iter().map(|(_, g)| *g).sum();
        let hundred = T::from_f64_lossy(100.0);
        per_feature
            .into_iter()
            .map(|(f, g)| {
                let score = if total > T::zero() {
                    g / total * hundred
                } else {
                    T::zero()
                };
                (f, score)
            })
            .collect()
    }

    pub fn write<W: Write>(&self, out: W) -> io::Result<()> {
        serde_json::to_writer(out, self).map_err(io::Error::other)
    }

    /// Short hash of the serialized model, used as its version label.
    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("model serializes");
        let mut hex = crate::corpus::text_digest_bytes(&bytes);
        hex.truncate(16);
        hex
    }

    pub fn save(&self, path: impl AsRef<Path>) -> io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self, ModelError> {
        let model: LinkModel<T> =
            serde_json::from_reader(reader).map_err(|e| ModelError::Format {
                line: e.line(),
                message: e.to_string(),
            })?;
        if model.format != FORMAT_TAG || model.version != FORMAT_VERSION {
            return Err(ModelError::Version {
                found: format!("{} v{}", model.format, model.version),
            });
        }
        if model.input_names != INPUT_NAMES || model.booster.n_inputs != INPUT_NAMES.len() {
            return Err(ModelError::Format {
                line: 1,
                message: format!("unexpected inputs {:?}", model.input_names),
            });
        }
        Ok(model)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        Self::read(BufReader::new(File::open(path)?))
    }
}

/// Fits the booster on the instances' nine inputs.
pub fn train<T: Scalar>(
    instances: &[TrainingInstance<T>],
    params: &BoostParams,
    corpus_fingerprint: Option<String>,
) -> Result<LinkModel<T>, ModelError> {
    let rows: Vec<Vec<T>> = instances.iter().map(|i| i.features.to_inputs()).collect();
    let labels: Vec<bool> = instances.iter().map(|i| i.label == 1).collect();
    let booster = gbdt::train(&rows, &labels, params)?;
    Ok(LinkModel::from_booster(
        booster,
        params.clone(),
        TrainingMetadata {
            corpus_fingerprint,
            trained_at_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            instances: instances.len(),
            positives: labels.iter().filter(|&&l| l).count(),
        },
    ))
}

/// Boost parameters with every input of `removed` disabled.
pub fn without_features(params: &BoostParams, removed: &[Feature]) -> BoostParams {
    let mut p = params.clone();
    for f in removed {
        for &i in f.inputs() {
            if !p.disabled_inputs.contains(&i) {
                p.disabled_inputs.push(i);
            }
        }
    }
    p.disabled_inputs.sort_unstable();
    p
}

/// Count of instances per provenance, handy for reports.
pub fn provenance_counts<T>(instances: &[TrainingInstance<T>]) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for i in instances {
        let key = serde_json::to_value(i.provenance)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        *out.entry(key).or_default() += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anchors::{build_dictionary, AnchorDictionary, DictionaryConfig};
    use crate::corpus::{Article, Corpus, LinkFragment};
    use crate::eval::Split;

    fn fv(ngram: usize, freq: u64) -> FeatureVector<f64> {
        FeatureVector {
            ngram,
            freq,
            ambig: 2,
            kurtosis: 0.0,
            lev: 3,
            w2v: 0.0,
            nav: 0.0,
            w2v_missing: true,
            nav_missing: true,
        }
    }

    fn instance(features: FeatureVector<f64>, positive: bool) -> TrainingInstance<f64> {
        TrainingInstance {
            features,
            label: u8::from(positive),
            provenance: if positive {
                Provenance::Positive
            } else {
                Provenance::NegativeAltCandidate
            },
            triple: TripleRecord {
                source: "S".into(),
                target: "T".into(),
                mention: "m".into(),
                span: Span::new(0, 1),
            },
        }
    }

    /// freq high ⇔ positive; ngram is noise.
    fn toy() -> Vec<TrainingInstance<f64>> {
        (0..300)
            .map(|i| {
                let pos = i % 3 == 0;
                let freq = if pos { 30 + i % 11 } else { 1 + i % 6 };
                instance(fv(1 + (i / 3) % 3, freq as u64), pos)
            })
            .collect()
    }

    #[test]
    fn separable_toy_set_is_learned() {
        let data = toy();
        let m = train(&data, &BoostParams::default(), None).unwrap();
        let acc = data
            .iter()
            .filter(|i| (m.predict(&i.features) > 0.5) == (i.label == 1))
            .count() as f64
            / data.len() as f64;
        assert!(acc >= 0.99);
        assert!(m.predict(&fv(1, 35)) > 0.5);
        assert!(m.predict(&fv(1, 2)) < 0.5);
    }

    #[test]
    fn constant_features_match_class_ratio() {
        let data: Vec<_> = (0..50).map(|i| instance(fv(1, 5), i < 15)).collect();
        let m = train(&data, &BoostParams::default(), None).unwrap();
        assert!((m.predict(&fv(1, 5)) - 0.3).abs() <= 0.1);
    }

    #[test]
    fn single_class_is_an_error() {
        let data: Vec<_> = (0..5).map(|_| instance(fv(1, 5), true)).collect();
        assert!(matches!(
            train(&data, &BoostParams::default(), None),
            Err(ModelError::Train(BoostError::SingleClass))
        ));
    }

    #[test]
    fn predictions_stay_in_unit_interval() {
        let m = train(&toy(), &BoostParams::default(), None).unwrap();
        for freq in [0, 1, 10, 1_000_000] {
            let p = m.predict(&fv(9, freq));
            assert!((0.0..=1.0).contains(&p));
        }
        assert!(matches!(
            m.predict_inputs(&[1.0, 2.0]),
            Err(ModelError::InputCount {
                expected: 9,
                found: 2
            })
        ));
    }

    #[test]
    fn importance_sums_to_hundred_and_favours_freq() {
        let m = train(&toy(), &BoostParams::default(), None).unwrap();
        let imp = m.feature_importance();
        let total: f64 = imp.iter().map(|(_, s)| s).sum();
        assert!((total - 100.0).abs() < 0.1);
        let top = imp
            .iter()
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        assert_eq!(top.0, Feature::Frequency);
        let kurt = imp.iter().find(|(f, _)| *f == Feature::Kurtosis).unwrap();
        assert_eq!(kurt.1, 0.0);
    }

    #[test]
    fn save_load_predicts_identically() {
        let m = train(&toy(), &BoostParams::default(), Some("abc".into())).unwrap();
        let mut buf = Vec::new();
        m.write(&mut buf).unwrap();
        let back = LinkModel::<f64>::read(buf.as_slice()).unwrap();
        assert_eq!(back, m);
        for i in toy().iter().take(50) {
            assert_eq!(
                back.predict(&i.features).to_bits(),
                m.predict(&i.features).to_bits()
            );
        }
    }

    fn fixture_dict() -> AnchorDictionary {
        // "mercury" → 3 candidates, "venus" → 2 candidates, "mars" → 1
        let corpus = Corpus::from_articles(vec![
            Article::content(
                "1",
                "Src",
                "en",
                "[[Mercury (planet)|Mercury]] [[Mercury (planet)|Mercury]] [[Mercury (element)|Mercury]] \
                 [[Mercury (god)|Mercury]] [[Venus (planet)|Venus]] [[Venus (goddess)|Venus]] [[Mars]]",
            ),
            Article::content("2", "Mercury (planet)", "en", ""),
            Article::content("3", "Mercury (element)", "en", ""),
            Article::content("4", "Mercury (god)", "en", ""),
            Article::content("5", "Venus (planet)", "en", ""),
            Article::content("6", "Venus (goddess)", "en", ""),
            Article::content("7", "Mars", "en", ""),
        ])
        .unwrap();
        build_dictionary(&corpus, &DictionaryConfig::default())
    }

    fn gold(text: &str, links: &[(&str, &str, usize, usize)]) -> GoldSentence {
        GoldSentence {
            source: "Doc".into(),
            sentence_index: 0,
            text: text.into(),
            links: links
                .iter()
                .map(|&(t, m, s, e)| LinkFragment {
                    target: t.into(),
                    mention: m.into(),
                    span: Span::new(s, e),
                })
                .collect(),
            split: Split::Train,
        }
    }

    #[test]
    fn alternative_candidates_become_negatives() {
        let dict = fixture_dict();
        let fx = FeatureExtractor::<f64>::new(&dict, None, None);
        let g = gold(
            "Mercury is small.",
            &[("Mercury (planet)", "Mercury", 0, 7)],
        );
        let data = generate_training_data(&[g], &fx, &InstanceOptions::default());
        let counts = provenance_counts(&data);
        assert_eq!(counts["positive"], 1);
        assert_eq!(counts["negative_alt_candidate"], 2);
        assert_eq!(data.len(), 3);
        assert!(data
            .iter()
            .all(|i| (i.label == 1) == (i.provenance == Provenance::Positive)));
    }

    #[test]
    fn unlinked_mentions_add_negatives() {
        let dict = fixture_dict();
        let fx = FeatureExtractor::<f64>::new(&dict, None, None);
        let g = gold("Mars and Venus.", &[("Mars", "Mars", 0, 4)]);
        let data = generate_training_data(&[g], &fx, &InstanceOptions::default());
        let counts = provenance_counts(&data);
        assert_eq!(counts["positive"], 1);
        assert_eq!(counts.get("negative_alt_candidate"), None);
        assert_eq!(counts["negative_unlinked_mention"], 2);
    }

    #[test]
    fn negatives_are_capped_by_frequency() {
        let dict = fixture_dict();
        let fx = FeatureExtractor::<f64>::new(&dict, None, None);
        let g = gold("Mercury.", &[("Mercury (god)", "Mercury", 0, 7)]);
        let opts = InstanceOptions {
            negatives_cap: 1,
            ..InstanceOptions::default()
        };
        let data = generate_training_data(&[g], &fx, &opts);
        let negs: Vec<&str> = data
            .iter()
            .filter(|i| i.label == 0)
            .map(|i| i.triple.target.as_str())
            .collect();
        assert_eq!(negs, ["Mercury (planet)"]);
    }

    #[test]
    fn instance_file_round_trip() {
        let data = toy();
        let mut buf = Vec::new();
        write_instances(&mut buf, &data[..5]).unwrap();
        let back: Vec<TrainingInstance<f64>> = read_instances(buf.as_slice()).unwrap();
        assert_eq!(back, data[..5]);
    }
}
