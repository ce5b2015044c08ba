use crate::corpus::{Corpus, Label};
use crate::error::{Error, Result};
use crate::features::{
    featurize_corpus, FeatureMatrix, VerbPolicy, Vocabulary, FEATURE_NAMES, FEATURE_SCHEMA_VERSION, NUM_FEATURES,
};
use crate::gbdt::booster::{argmax, train_traced, Ensemble};
use crate::gbdt::importance::ImportanceKind;
use crate::gbdt::params::Hyperparams;
use crate::scalar::Scalar;

/// Connective detector: an [`Ensemble`] plus everything needed to featurize
/// new text the same way the training text was featurized.
#[derive(Debug, Clone, PartialEq)]
pub struct GbdtModel<F> {
    pub ensemble: Ensemble<F>,
    pub vocab: Vocabulary,
    pub verb_policy: VerbPolicy,
    pub feature_schema_version: String,
    pub class_labels: Vec<Label>,
}

impl<F: Scalar> GbdtModel<F> {
    /// Builds the vocabulary from `corpus`, featurizes it and trains.
    pub fn fit(corpus: &Corpus, hp: &Hyperparams, weighted: bool, policy: &VerbPolicy) -> Result<Self> {
        Self::fit_traced(corpus, hp, weighted, policy).map(|(m, _)| m)
    }

    /// Like [`GbdtModel::fit`], also returning the per-round training loss.
    pub fn fit_traced(
        corpus: &Corpus,
        hp: &Hyperparams,
        weighted: bool,
        policy: &VerbPolicy,
    ) -> Result<(Self, Vec<F>)> {
        let vocab = Vocabulary::build(corpus);
        let (x, y) = featurize_corpus::<F>(corpus, &vocab, policy);
        let (ensemble, trace) = train_traced(&x, &y, Label::COUNT, hp, weighted)?;
        let model = GbdtModel {
            ensemble,
            vocab,
            verb_policy: policy.clone(),
            feature_schema_version: FEATURE_SCHEMA_VERSION.to_string(),
            class_labels: Label::ALL.to_vec(),
        };
        Ok((model, trace))
    }

    pub fn check_schema(&self) -> Result<()> {
        if self.feature_schema_version != FEATURE_SCHEMA_VERSION || self.ensemble.n_features() != NUM_FEATURES {
            return Err(Error::SchemaMismatch {
                expected: FEATURE_SCHEMA_VERSION.to_string(),
                found: self.feature_schema_version.clone(),
            });
        }
        Ok(())
    }

    pub fn n_rounds(&self) -> usize {
        self.ensemble.n_rounds()
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        self.ensemble.hyperparams()
    }

    pub fn featurize(&self, corpus: &Corpus) -> FeatureMatrix<F> {
        featurize_corpus(corpus, &self.vocab, &self.verb_policy).0
    }

    pub fn predict_scores(&self, x: &FeatureMatrix<F>) -> Result<Vec<F>> {
        self.check_schema()?;
        self.ensemble.predict_scores(x)
    }

    /// One label per corpus token; score ties resolve to `O`, then `B-Conn`.
    pub fn predict_labels(&self, corpus: &Corpus) -> Result<Vec<Label>> {
        self.check_schema()?;
        let x = self.featurize(corpus);
        let scores = self.ensemble.predict_scores(&x)?;
        Ok(scores
            .chunks_exact(self.class_labels.len())
            .map(|row| self.class_labels[argmax(row)])
            .collect())
    }

    pub fn feature_importance(&self, kind: ImportanceKind) -> Vec<(String, f64)> {
        self.ensemble.feature_importance(kind, &FEATURE_NAMES)
    }
}
