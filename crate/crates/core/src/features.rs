//! Per-token feature extraction.
//!
//! Every token maps to a fixed vector of [`NUM_FEATURES`] values:
//!
//! | index | name | meaning |
//! |-------|------|---------|
//! | 0–2 | `is_verb_prev3` … `is_verb_prev1` | token 3/2/1 positions back is a verb |
//! | 3 | `is_verb_curr` | token itself is a verb |
//! | 4–6 | `is_verb_next1` … `is_verb_next3` | token 1/2/3 positions ahead is a verb |
//! | 7 | `dist_prev_verb` | tokens back to the nearest verb, sentence length if none |
//! | 8 | `dist_next_verb` | tokens ahead to the nearest verb, sentence length if none |
//! | 9 | `is_capitalized` | first character is uppercase |
//! | 10 | `word_length` | length in characters |
//! | 11 | `word_id` | vocabulary id of the lowercased form, 0 if unseen |
//! | 12 | `position_in_sentence` | 0-based index |
//! | 13 | `sentence_length` | tokens in the sentence |
//!
//! Windows and distances never cross sentence boundaries.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Sentence};
use crate::scalar::Scalar;

pub const FEATURE_SCHEMA_VERSION: &str = "condet-features/1";
pub const NUM_FEATURES: usize = 14;

pub const FEATURE_NAMES: [&str; NUM_FEATURES] = [
    "is_verb_prev3",
    "is_verb_prev2",
    "is_verb_prev1",
    "is_verb_curr",
    "is_verb_next1",
    "is_verb_next2",
    "is_verb_next3",
    "dist_prev_verb",
    "dist_next_verb",
    "is_capitalized",
    "word_length",
    "word_id",
    "position_in_sentence",
    "sentence_length",
];

pub const IS_VERB_CURR: usize = 3;
pub const DIST_PREV_VERB: usize = 7;
pub const DIST_NEXT_VERB: usize = 8;
pub const IS_CAPITALIZED: usize = 9;
pub const WORD_LENGTH: usize = 10;
pub const WORD_ID: usize = 11;
pub const POSITION: usize = 12;
pub const SENTENCE_LENGTH: usize = 13;

/// Features 0..=8 are the verb-based group.
pub fn is_verb_feature(index: usize) -> bool {
    index <= DIST_NEXT_VERB
}

pub type FeatureVector<F> = [F; NUM_FEATURES];

/// Lowercased form to id. Ids run 1..=V by descending training frequency,
/// ties broken lexicographically; 0 is reserved for unseen forms.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Vocabulary {
    pub const OOV_ID: u32 = 0;

    pub fn build(corpus: &Corpus) -> Self {
        let mut counts: HashMap<String, usize> = HashMap::new();
        for token in corpus.tokens() {
            *counts.entry(token.form.to_lowercase()).or_default() += 1;
        }
        let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Self::from_words(ranked.into_iter().map(|(w, _)| w).collect()).expect("counted forms are unique")
    }

    /// Rebuilds a vocabulary from its words in id order (id = position + 1).
    pub fn from_words(words: Vec<String>) -> Result<Self, String> {
        let mut ids = HashMap::with_capacity(words.len());
        for (i, word) in words.iter().enumerate() {
            if ids.insert(word.clone(), i as u32 + 1).is_some() {
                return Err(format!("duplicate vocabulary entry {word:?}"));
            }
        }
        Ok(Vocabulary { words, ids })
    }

    pub fn id(&self, form: &str) -> u32 {
        self.ids.get(&form.to_lowercase()).copied().unwrap_or(Self::OOV_ID)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Which POS tags count as verbs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerbPolicy {
    pub verb_tags: BTreeSet<String>,
    #[serde(default)]
    pub include_aux: bool,
}

impl Default for VerbPolicy {
    fn default() -> Self {
        VerbPolicy {
            verb_tags: BTreeSet::from(["VERB".to_string()]),
            include_aux: false,
        }
    }
}

impl VerbPolicy {
    pub fn with_aux(mut self, include_aux: bool) -> Self {
        self.include_aux = include_aux;
        self
    }

    pub fn from_tags<I, S>(tags: I, include_aux: bool) -> Result<Self, String>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let verb_tags: BTreeSet<String> = tags.into_iter().map(Into::into).collect();
        if verb_tags.is_empty() {
            return Err("verb tag set must not be empty".to_string());
        }
        Ok(VerbPolicy { verb_tags, include_aux })
    }

    pub fn is_verb(&self, upos: &str) -> bool {
        self.verb_tags.contains(upos) || (self.include_aux && upos == "AUX")
    }
}

/// Row-major `rows x cols` matrix of feature values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<F> {
    n_cols: usize,
    data: Vec<F>,
}

impl<F: Scalar> FeatureMatrix<F> {
    pub fn new(n_cols: usize, data: Vec<F>) -> Self {
        assert!(n_cols > 0, "a feature matrix needs at least one column");
        assert_eq!(data.len() % n_cols, 0, "data length must be a multiple of n_cols");
        FeatureMatrix { n_cols, data }
    }

    pub fn empty(n_cols: usize) -> Self {
        Self::new(n_cols, Vec::new())
    }

    pub fn from_rows<R: AsRef<[F]>>(n_cols: usize, rows: &[R]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for row in rows {
            assert_eq!(row.as_ref().len(), n_cols, "ragged rows");
            data.extend_from_slice(row.as_ref());
        }
        Self::new(n_cols, data)
    }

    pub fn n_rows(&self) -> usize {
        self.data.len() / self.n_cols
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn get(&self, row: usize, col: usize) -> F {
        self.data[row * self.n_cols + col]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[F]> + '_ {
        self.data.chunks_exact(self.n_cols)
    }

    pub fn push_row(&mut self, row: &[F]) {
        assert_eq!(row.len(), self.n_cols, "row width mismatch");
        self.data.extend_from_slice(row);
    }

    pub fn as_slice(&self) -> &[F] {
        &self.data
    }
}

/// Features for every token of one sentence.
pub fn extract_features<F: Scalar>(
    sentence: &Sentence,
    vocab: &Vocabulary,
    policy: &VerbPolicy,
) -> Vec<FeatureVector<F>> {
    extract_with(sentence, vocab, |upos| policy.is_verb(upos))
}

/// One verb lookup per token, then two sweeps for the distances.
fn extract_with<F: Scalar>(
    sentence: &Sentence,
    vocab: &Vocabulary,
    mut is_verb: impl FnMut(&str) -> bool,
) -> Vec<FeatureVector<F>> {
    let n = sentence.len();
    let verbs: Vec<bool> = sentence.tokens.iter().map(|t| is_verb(&t.upos)).collect();

    let mut dist_prev = vec![n; n];
    let mut last = None;
    for i in 0..n {
        if let Some(j) = last {
            dist_prev[i] = i - j;
        }
        if verbs[i] {
            last = Some(i);
        }
    }
    let mut dist_next = vec![n; n];
    let mut next = None;
    for i in (0..n).rev() {
        if let Some(j) = next {
            dist_next[i] = j - i;
        }
        if verbs[i] {
            next = Some(i);
        }
    }

    let flag = |pos: isize| -> F {
        if pos >= 0 && (pos as usize) < n && verbs[pos as usize] {
            F::one()
        } else {
            F::zero()
        }
    };

    sentence
        .tokens
        .iter()
        .enumerate()
        .map(|(i, token)| {
            let p = i as isize;
            let capitalized = token.form.chars().next().is_some_and(char::is_uppercase);
            [
                flag(p - 3),
                flag(p - 2),
                flag(p - 1),
                flag(p),
                flag(p + 1),
                flag(p + 2),
                flag(p + 3),
                F::of_usize(dist_prev[i]),
                F::of_usize(dist_next[i]),
                if capitalized { F::one() } else { F::zero() },
                F::of_usize(token.form.chars().count()),
                F::of_usize(vocab.id(&token.form) as usize),
                F::of_usize(i),
                F::of_usize(n),
            ]
        })
        .collect()
}

/// Feature rows in corpus token order, with class indices `O=0, B=1, I=2`.
pub fn featurize_corpus<F: Scalar>(
    corpus: &Corpus,
    vocab: &Vocabulary,
    policy: &VerbPolicy,
) -> (FeatureMatrix<F>, Vec<usize>) {
    let n = corpus.token_count();
    let mut data = Vec::with_capacity(n * NUM_FEATURES);
    let mut labels = Vec::with_capacity(n);
    for sentence in corpus.sentences() {
        for row in extract_features::<F>(sentence, vocab, policy) {
            data.extend_from_slice(&row);
        }
        labels.extend(sentence.labels().map(|l| l.index()));
    }
    (FeatureMatrix::new(NUM_FEATURES, data), labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Label, Token};

    fn sentence(pairs: &[(&str, &str)]) -> Sentence {
        Sentence::new(pairs.iter().map(|(f, p)| Token::new(*f, *p, Label::O)).collect())
    }

    #[test]
    fn vocabulary_frequency_then_lexicographic() {
        let c = Corpus::from_sentences(vec![sentence(&[("The", "DET"), ("the", "DET"), ("dog", "NOUN")])]);
        let v = Vocabulary::build(&c);
        assert_eq!(v.id("the"), 1);
        assert_eq!(v.id("THE"), 1);
        assert_eq!(v.id("dog"), 2);
        assert_eq!(v.len(), 2);

        let c = Corpus::from_sentences(vec![sentence(&[("b", "X"), ("a", "X")])]);
        let v = Vocabulary::build(&c);
        assert_eq!((v.id("a"), v.id("b")), (1, 2));
    }

    #[test]
    fn empty_vocabulary_is_all_oov() {
        let v = Vocabulary::build(&Corpus::default());
        assert!(v.is_empty());
        assert_eq!(v.id("anything"), Vocabulary::OOV_ID);
    }

    #[test]
    fn worked_example_and_token() {
        let s = sentence(&[
            ("He", "PRON"),
            ("speaks", "VERB"),
            ("English", "PROPN"),
            ("and", "CCONJ"),
            ("French", "PROPN"),
        ]);
        let c = Corpus::from_sentences(vec![s.clone()]);
        let v = Vocabulary::build(&c);
        let rows = extract_features::<f64>(&s, &v, &VerbPolicy::default());
        let and_id = v.id("and") as f64;
        assert_eq!(rows[3], [0., 1., 0., 0., 0., 0., 0., 2., 5., 0., 3., and_id, 3., 5.]);
    }

    #[test]
    fn verbless_sentence_caps_distances() {
        let s = sentence(&[("a", "X"), ("b", "X"), ("c", "X"), ("d", "X")]);
        let rows = extract_features::<f64>(&s, &Vocabulary::default(), &VerbPolicy::default());
        assert_eq!(rows[0][DIST_PREV_VERB], 4.0);
        assert_eq!(rows[0][DIST_NEXT_VERB], 4.0);
        assert!(rows[0][..=6].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn predecessor_verb() {
        let s = sentence(&[("ran", "VERB"), ("then", "ADV")]);
        let rows = extract_features::<f64>(&s, &Vocabulary::default(), &VerbPolicy::default());
        assert_eq!(rows[1][2], 1.0);
        assert_eq!(rows[1][DIST_PREV_VERB], 1.0);
        assert_eq!(rows[0][IS_VERB_CURR], 1.0);
        assert_eq!(rows[0][4], 0.0);
    }

    #[test]
    fn aux_policy() {
        let s = sentence(&[("is", "AUX")]);
        let v = Vocabulary::default();
        let off = extract_features::<f64>(&s, &v, &VerbPolicy::default());
        let on = extract_features::<f64>(&s, &v, &VerbPolicy::default().with_aux(true));
        assert_eq!(off[0][IS_VERB_CURR], 0.0);
        assert_eq!(on[0][IS_VERB_CURR], 1.0);
        assert!(VerbPolicy::from_tags(Vec::<String>::new(), false).is_err());
    }

    #[test]
    fn capitalization_is_unicode_aware() {
        let s = sentence(&[("İçin", "ADP"), ("için", "ADP"), ("Öyle", "ADV")]);
        let rows = extract_features::<f32>(&s, &Vocabulary::default(), &VerbPolicy::default());
        assert_eq!(rows[0][IS_CAPITALIZED], 1.0);
        assert_eq!(rows[1][IS_CAPITALIZED], 0.0);
        assert_eq!(rows[2][IS_CAPITALIZED], 1.0);
        assert_eq!(rows[1][WORD_LENGTH], 4.0);
    }

    #[test]
    fn one_verb_lookup_per_token() {
        let s = sentence(&[("a", "VERB"); 37]);
        let mut calls = 0usize;
        let policy = VerbPolicy::default();
        let rows = extract_with::<f64>(&s, &Vocabulary::default(), |p| {
            calls += 1;
            policy.is_verb(p)
        });
        assert_eq!(rows.len(), 37);
        assert_eq!(calls, 37);
    }

    #[test]
    fn featurize_shapes() {
        let c = Corpus::from_sentences(vec![sentence(&[("a", "X"), ("b", "VERB"), ("c", "X")])]);
        let v = Vocabulary::build(&c);
        let (m, y) = featurize_corpus::<f64>(&c, &v, &VerbPolicy::default());
        assert_eq!((m.n_rows(), m.n_cols()), (3, NUM_FEATURES));
        assert_eq!(y, vec![0, 0, 0]);
        let (m2, _) = featurize_corpus::<f64>(&c, &v, &VerbPolicy::default());
        assert_eq!(m, m2);

        let (empty, y) = featurize_corpus::<f64>(&Corpus::default(), &v, &VerbPolicy::default());
        assert_eq!((empty.n_rows(), empty.n_cols(), y.len()), (0, NUM_FEATURES, 0));
    }
}
