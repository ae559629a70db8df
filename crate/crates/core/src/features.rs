//! The classifier inputs for one (source, candidate, mention) triple.
//!
//! Seven features describe the triple; the two embedding similarities also
//! carry a missing flag, so the model sees nine inputs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anchors::{normalize_mention, AnchorDictionary};
use crate::corpus::tokenize;
use crate::embeddings::EmbeddingStore;
use crate::scalar::Scalar;

/// Model input names, in [`FeatureVector::to_inputs`] order.
pub const INPUT_NAMES: [&str; 9] = [
    "ngram",
    "freq",
    "ambig",
    "kurtosis",
    "lev",
    "w2v",
    "nav",
    "w2v_missing",
    "nav_missing",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Ngram,
    Frequency,
    Ambiguity,
    Kurtosis,
    Levenshtein,
    EntityEmbedding,
    NavigationEmbedding,
}

impl Feature {
    pub const ALL: [Feature; 7] = [
        Feature::Ngram,
        Feature::Frequency,
        Feature::Ambiguity,
        Feature::Kurtosis,
        Feature::Levenshtein,
        Feature::EntityEmbedding,
        Feature::NavigationEmbedding,
    ];

    /// Model inputs that carry this feature.
    pub fn inputs(self) -> &'static [usize] {
        match self {
            Feature::Ngram => &[0],
            Feature::Frequency => &[1],
            Feature::Ambiguity => &[2],
            Feature::Kurtosis => &[3],
            Feature::Levenshtein => &[4],
            Feature::EntityEmbedding => &[5, 7],
            Feature::NavigationEmbedding => &[6, 8],
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            Feature::Ngram => "Ngr.",
            Feature::Frequency => "Frq.",
            Feature::Ambiguity => "Amb.",
            Feature::Kurtosis => "Kur.",
            Feature::Levenshtein => "Lev.",
            Feature::EntityEmbedding => "Ent.",
            Feature::NavigationEmbedding => "Nav.",
        }
    }
}

impl std::fmt::Display for Feature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(INPUT_NAMES[self.inputs()[0]])
    }
}

impl std::str::FromStr for Feature {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Feature::ALL
            .into_iter()
            .find(|f| f.to_string() == s)
            .ok_or_else(|| format!("unknown feature {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector<T> {
    pub ngram: usize,
    pub freq: u64,
    pub ambig: usize,
    pub kurtosis: T,
    pub lev: usize,
    pub w2v: T,
    pub nav: T,
    pub w2v_missing: bool,
    pub nav_missing: bool,
}

impl<T: Scalar> FeatureVector<T> {
    pub fn to_inputs(&self) -> Vec<T> {
        let flag = |b: bool| if b { T::one() } else { T::zero() };
        vec![
            T::from_usize_lossy(self.ngram),
            T::from_u64(self.freq).unwrap_or_else(T::infinity),
            T::from_usize_lossy(self.ambig),
            self.kurtosis,
            T::from_usize_lossy(self.lev),
            self.w2v,
            self.nav,
            flag(self.w2v_missing),
            flag(self.nav_missing),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeatureError {
    #[error("({mention:?}, {target:?}) is not in the anchor dictionary")]
    PairAbsent { mention: String, target: String },
}

/// Unit-cost edit distance over code points.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Non-excess population kurtosis `m4 / m2²` of raw counts. Returns 0.0 for
/// fewer than two values or zero variance.
pub fn kurtosis<T: Scalar>(counts: &[u64]) -> T {
    if counts.len() < 2 {
        return T::zero();
    }
    let n = T::from_usize_lossy(counts.len());
    let xs: Vec<T> = counts
        .iter()
        .map(|&c| T::from_u64(c).unwrap_or_else(T::infinity))
        .collect();
    let mean = xs.iter().copied().sum::<T>() / n;
    let (mut m2, mut m4) = (T::zero(), T::zero());
    for &x in &xs {
        let d2 = (x - mean) * (x - mean);
        m2 += d2;
        m4 += d2 * d2;
    }
    m2 /= n;
    m4 /= n;
    if m2 == T::zero() {
        return T::zero();
    }
    m4 / (m2 * m2)
}

/// Number of tokens in a mention, as the tokenizer sees it.
pub fn ngram_size(mention: &str) -> usize {
    tokenize(mention).len()
}

/// Everything needed to compute features; stores may be absent, in which
/// case their similarity is reported missing.
#[derive(Debug, Clone, Copy)]
pub struct FeatureExtractor<'a, T> {
    pub dict: &'a AnchorDictionary,
    pub content: Option<&'a EmbeddingStore<T>>,
    pub navigation: Option<&'a EmbeddingStore<T>>,
}

impl<'a, T: Scalar> FeatureExtractor<'a, T> {
    pub fn new(
        dict: &'a AnchorDictionary,
        content: Option<&'a EmbeddingStore<T>>,
        navigation: Option<&'a EmbeddingStore<T>>,
    ) -> Self {
        FeatureExtractor {
            dict,
            content,
            navigation,
        }
    }

    pub fn extract(
        &self,
        source: &str,
        target: &str,
        mention: &str,
    ) -> Result<FeatureVector<T>, FeatureError> {
        let key = normalize_mention(mention);
        let absent = || FeatureError::PairAbsent {
            mention: key.clone(),
            target: target.to_string(),
        };
        let stats = self.dict.get_normalized(&key).ok_or_else(absent)?;
        let freq = *stats.candidates.get(target).ok_or_else(absent)?;
        let similarity = |store: Option<&EmbeddingStore<T>>| {
            store
                .map(|s| s.cosine(source, target))
                .map(|s| (s.value, s.missing))
                .unwrap_or((T::zero(), true))
        };
        let (w2v, w2v_missing) = similarity(self.content);
        let (nav, nav_missing) = similarity(self.navigation);
        Ok(FeatureVector {
            ngram: ngram_size(&key),
            freq,
            ambig: stats.candidates.len(),
            kurtosis: kurtosis(&stats.counts()),
            lev: levenshtein(&key, &normalize_mention(target)),
            w2v,
            nav,
            w2v_missing,
            nav_missing,
        })
    }
}

pub fn extract<T: Scalar>(
    source: &str,
    target: &str,
    mention: &str,
    dict: &AnchorDictionary,
    content: &EmbeddingStore<T>,
    navigation: &EmbeddingStore<T>,
) -> Result<FeatureVector<T>, FeatureError> {
    FeatureExtractor::new(dict, Some(content), Some(navigation)).extract(source, target, mention)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anchors::{build_dictionary, DictionaryConfig};
    use crate::corpus::{Article, Corpus};
    use crate::embeddings::EmbeddingKind;
    use proptest::prelude::*;

    // Textbook full-matrix DP, kept separate from the two-row version.
    fn levenshtein_matrix(a: &str, b: &str) -> usize {
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for (i, row) in d.iter_mut().enumerate() {
            row[0] = i;
        }
        for (j, cell) in d[0].iter_mut().enumerate() {
            *cell = j;
        }
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                let cost = if a[i - 1] == b[j - 1] { 0 } else { 1 };
                d[i][j] = (d[i - 1][j] + 1)
                    .min(d[i][j - 1] + 1)
                    .min(d[i - 1][j - 1] + cost);
            }
        }
        d[a.len()][b.len()]
    }

    // Moments from the definition, accumulated in f64 over a second pass.
    fn kurtosis_oracle(xs: &[u64]) -> f64 {
        let n = xs.len() as f64;
        let mean = xs.iter().map(|&x| x as f64).sum::<f64>() / n;
        let m2 = xs.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / n;
        let m4 = xs.iter().map(|&x| (x as f64 - mean).powi(4)).sum::<f64>() / n;
        if xs.len() < 2 || m2 == 0.0 {
            0.0
        } else {
            m4 / (m2 * m2)
        }
    }

    #[test]
    fn kitten_sitting() {
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein("chicago", "chicago"), 0);
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(levenshtein("abc", ""), 3);
        assert_eq!(levenshtein("女数学者", "数学者"), 1);
    }

    #[test]
    fn kurtosis_sentinels() {
        assert_eq!(kurtosis::<f64>(&[5, 5, 5]), 0.0);
        assert_eq!(kurtosis::<f64>(&[7]), 0.0);
        assert_eq!(kurtosis::<f64>(&[]), 0.0);
    }

    #[test]
    fn kurtosis_of_one_outlier() {
        // mean 3, deviations -2,-2,-2,6: m2 = 48/4 = 12, m4 = 1344/4 = 336
        assert!((kurtosis::<f64>(&[1, 1, 1, 9]) - 336.0 / 144.0).abs() < 1e-12);
        assert!((kurtosis::<f64>(&[1, 1, 1, 9]) - kurtosis_oracle(&[1, 1, 1, 9])).abs() < 1e-12);
        assert!((kurtosis::<f32>(&[1, 1, 1, 9]) - 336.0 / 144.0).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn levenshtein_matches_matrix(a in "[abc女]{0,8}", b in "[abc女]{0,8}") {
            prop_assert_eq!(levenshtein(&a, &b), levenshtein_matrix(&a, &b));
            prop_assert_eq!(levenshtein(&a, &b), levenshtein(&b, &a));
        }

        #[test]
        fn kurtosis_matches_moments(xs in prop::collection::vec(1u64..1000, 2..20)) {
            prop_assert!((kurtosis::<f64>(&xs) - kurtosis_oracle(&xs)).abs() <= 1e-9);
        }
    }

    fn fixture() -> (AnchorDictionary, Corpus) {
        let mut text = String::new();
        for _ in 0..12 {
            text.push_str("[[Paris]] ");
        }
        text.push_str("[[Paris, Texas|Paris]]");
        let corpus = Corpus::from_articles(vec![
            Article::content("1", "Source", "en", &text),
            Article::content("2", "Paris", "en", ""),
            Article::content("3", "Paris, Texas", "en", ""),
        ])
        .unwrap();
        (
            build_dictionary(&corpus, &DictionaryConfig::default()),
            corpus,
        )
    }

    #[test]
    fn extract_paris() {
        let (dict, _) = fixture();
        let content = EmbeddingStore::<f64>::new(50, EmbeddingKind::Content);
        let nav = EmbeddingStore::<f64>::new(50, EmbeddingKind::Navigation);
        let f = extract("Source", "Paris", "Paris", &dict, &content, &nav).unwrap();
        assert_eq!((f.ngram, f.ambig, f.freq), (1, 2, 12));
        assert_eq!(f.lev, 0);
        assert_eq!((f.w2v, f.nav), (0.0, 0.0));
        assert!(f.w2v_missing && f.nav_missing);
        assert_eq!(f.to_inputs().len(), INPUT_NAMES.len());

        let g = extract("Source", "Paris, Texas", "paris", &dict, &content, &nav).unwrap();
        assert_eq!(g.freq, 1);
        assert_eq!(g.lev, levenshtein("paris", "paris, texas"));
        assert_eq!(g.kurtosis, f.kurtosis);
        // freq over all candidates adds up to n_linked
        assert_eq!(f.freq + g.freq, dict.get("paris").unwrap().n_linked);

        assert!(matches!(
            extract("Source", "London", "paris", &dict, &content, &nav),
            Err(FeatureError::PairAbsent { .. })
        ));
    }

    #[test]
    fn extract_uses_embeddings_when_present() {
        let (dict, _) = fixture();
        let mut content = EmbeddingStore::<f64>::new(2, EmbeddingKind::Content);
        content.insert("Source", vec![1.0, 0.0]).unwrap();
        content.insert("Paris", vec![1.0, 1.0]).unwrap();
        let fx = FeatureExtractor::new(&dict, Some(&content), None);
        let f = fx.extract("Source", "Paris", "Paris").unwrap();
        assert!((f.w2v - 0.5f64.sqrt()).abs() < 1e-12);
        assert!(!f.w2v_missing && f.nav_missing);
        assert_eq!(f, fx.extract("Source", "Paris", "Paris").unwrap());
    }

    #[test]
    fn feature_names_parse() {
        for f in Feature::ALL {
            assert_eq!(f.to_string().parse::<Feature>().unwrap(), f);
        }
    }
}
