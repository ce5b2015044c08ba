//! Grid search with k-fold cross-validation, selecting by span F1.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document};
use crate::error::{Error, Result};
use crate::eval::score_corpus;
use crate::features::VerbPolicy;
use crate::gbdt::{GbdtModel, Hyperparams};

pub const DEFAULT_FOLDS: usize = 3;

/// Candidate values per hyperparameter. The grid is their Cartesian product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamGrid {
    pub learning_rate: Vec<f64>,
    pub max_depth: Vec<usize>,
    pub n_estimators: Vec<usize>,
    pub max_delta_step: Vec<f64>,
    pub min_child_weight: Vec<f64>,
    #[serde(default = "default_lambda")]
    pub lambda_reg: f64,
    #[serde(default)]
    pub gamma: f64,
}

fn default_lambda() -> f64 {
    1.0
}

impl Default for ParamGrid {
    /// Spans every best configuration reported for both corpora and loss variants.
    fn default() -> Self {
        ParamGrid {
            learning_rate: vec![0.15, 0.2, 0.25, 0.3],
            max_depth: vec![8, 10],
            n_estimators: vec![400, 500],
            max_delta_step: vec![4.0],
            min_child_weight: vec![1.0],
            lambda_reg: 1.0,
            gamma: 0.0,
        }
    }
}

impl ParamGrid {
    pub fn single(hp: &Hyperparams) -> Self {
        ParamGrid {
            learning_rate: vec![hp.learning_rate],
            max_depth: vec![hp.max_depth],
            n_estimators: vec![hp.n_estimators],
            max_delta_step: vec![hp.max_delta_step],
            min_child_weight: vec![hp.min_child_weight],
            lambda_reg: hp.lambda_reg,
            gamma: hp.gamma,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let grid: ParamGrid = serde_json::from_str(text)?;
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        let lists = [
            ("learning_rate", self.learning_rate.len()),
            ("max_depth", self.max_depth.len()),
            ("n_estimators", self.n_estimators.len()),
            ("max_delta_step", self.max_delta_step.len()),
            ("min_child_weight", self.min_child_weight.len()),
        ];
        if let Some((name, _)) = lists.iter().find(|(_, n)| *n == 0) {
            return Err(Error::InvalidHyperparams(format!("grid list {name} is empty")));
        }
        for hp in self.combinations(0) {
            hp.validate()?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.learning_rate.len()
            * self.max_depth.len()
            * self.n_estimators.len()
            * self.max_delta_step.len()
            * self.min_child_weight.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every combination, in nested list order.
    pub fn combinations(&self, seed: u64) -> Vec<Hyperparams> {
        let mut out = Vec::with_capacity(self.len());
        for &learning_rate in &self.learning_rate {
            for &max_depth in &self.max_depth {
                for &n_estimators in &self.n_estimators {
                    for &max_delta_step in &self.max_delta_step {
                        for &min_child_weight in &self.min_child_weight {
                            out.push(Hyperparams {
                                learning_rate,
                                max_depth,
                                n_estimators,
                                max_delta_step,
                                min_child_weight,
                                lambda_reg: self.lambda_reg,
                                gamma: self.gamma,
                                seed,
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

/// Cross-validated score of one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub params: Hyperparams,
    pub fold_f1: Vec<f64>,
    pub mean_f1: f64,
    /// 1 = selected.
    pub rank: usize,
}

impl CvResult {
    pub const TSV_HEADER: &'static str =
        "rank\tlearning_rate\tmax_depth\tn_estimators\tmax_delta_step\tmin_child_weight\tmean_f1\tfold_f1";

    pub fn tsv_row(&self) -> String {
        let folds: Vec<String> = self.fold_f1.iter().map(|f| format!("{:.4}", f)).collect();
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{:.4}\t{}",
            self.rank,
            self.params.learning_rate,
            self.params.max_depth,
            self.params.n_estimators,
            self.params.max_delta_step,
            self.params.min_child_weight,
            self.mean_f1,
            folds.join(",")
        )
    }
}

/// Shuffles document indices with `seed` and deals them round-robin into
/// `k` folds.
pub fn make_folds(corpus: &Corpus, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let units = corpus.documents.len();
    if k < 2 || k > units {
        return Err(Error::TooFewDocuments { k, units });
    }
    let mut order: Vec<usize> = (0..units).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::new(); k];
    for (i, doc) in order.into_iter().enumerate() {
        folds[i % k].push(doc);
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(folds)
}

/// Cross-validation units: the documents, or for a single-document corpus,
/// `k` contiguous blocks of its sentences.
pub fn cv_units(corpus: &Corpus, k: usize) -> Corpus {
    if corpus.documents.len() != 1 || k < 2 {
        return corpus.clone();
    }
    let doc = &corpus.documents[0];
    let n = doc.sentences.len();
    if n < k {
        return corpus.clone();
    }
    let documents = (0..k)
        .map(|b| Document {
            id: format!("{}#{}", doc.id, b),
            sentences: doc.sentences[b * n / k..(b + 1) * n / k].to_vec(),
        })
        .collect();
    Corpus::new(documents)
}

/// Total order used to pick the winner: higher mean F1, then fewer trees,
/// shallower trees, smaller learning rate, smaller step cap, smaller child
/// weight.
fn selection_order(a: &CvResult, b: &CvResult) -> Ordering {
    b.mean_f1
        .total_cmp(&a.mean_f1)
        .then(a.params.n_estimators.cmp(&b.params.n_estimators))
        .then(a.params.max_depth.cmp(&b.params.max_depth))
        .then(a.params.learning_rate.total_cmp(&b.params.learning_rate))
        .then(a.params.max_delta_step.total_cmp(&b.params.max_delta_step))
        .then(a.params.min_child_weight.total_cmp(&b.params.min_child_weight))
}

/// Runs k-fold CV for every grid point and returns the winner plus every
/// result in grid order. Each fold's model builds its vocabulary from its
/// own training documents only.
pub fn grid_search(
    corpus: &Corpus,
    grid: &ParamGrid,
    k: usize,
    weighted: bool,
    seed: u64,
    policy: &VerbPolicy,
) -> Result<(Hyperparams, Vec<CvResult>)> {
    grid.validate()?;
    let units = cv_units(corpus, k);
    let folds = make_folds(&units, k, seed)?;
    let splits: Vec<(Corpus, Corpus)> = (0..k)
        .map(|held_out| {
            let train: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != held_out)
                .flat_map(|(_, f)| f.iter().copied())
                .collect();
            (units.select_documents(&train), units.select_documents(&folds[held_out]))
        })
        .collect();

    let points = grid.combinations(seed);
    let jobs: Vec<(usize, usize)> = (0..points.len()).flat_map(|p| (0..k).map(move |f| (p, f))).collect();
    let scores: Vec<f64> = jobs
        .par_iter()
        .map(|&(p, f)| {
            let (train, test) = &splits[f];
            let hp = &points[p];
            let model = GbdtModel::<f64>::fit(train, hp, weighted, policy).map_err(|e| Error::GridPoint {
                params: hp.to_string(),
                source: Box::new(e),
            })?;
            let pred = model.predict_labels(test)?;
            Ok(score_corpus(test, &test.labels(), &pred)?.f1)
        })
        .collect::<Result<_>>()?;

    let mut results: Vec<CvResult> = points
        .into_iter()
        .enumerate()
        .map(|(p, params)| {
            let fold_f1 = scores[p * k..(p + 1) * k].to_vec();
            let mean_f1 = fold_f1.iter().sum::<f64>() / k as f64;
            CvResult {
                params,
                fold_f1,
                mean_f1,
                rank: 0,
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..results.len()).collect();
    order.sort_by(|&a, &b| selection_order(&results[a], &results[b]));
    for (rank, &i) in order.iter().enumerate() {
        results[i].rank = rank + 1;
    }
    let best = results[order[0]].params.clone();
    Ok((best, results))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Label, Sentence, Token};

    fn docs(n: usize) -> Corpus {
        Corpus::new(
            (0..n)
                .map(|i| Document {
                    id: format!("d{i}"),
                    sentences: vec![Sentence::new(vec![Token::new("w", "NOUN", Label::O)])],
                })
                .collect(),
        )
    }

    #[test]
    fn folds_partition_documents() {
        let folds = make_folds(&docs(9), 3, 7).unwrap();
        assert!(folds.iter().all(|f| f.len() == 3));
        let mut all: Vec<usize> = folds.concat();
        all.sort();
        assert_eq!(all, (0..9).collect::<Vec<_>>());
        assert_eq!(make_folds(&docs(9), 3, 7).unwrap(), folds);

        let uneven = make_folds(&docs(10), 3, 1).unwrap();
        let sizes: Vec<usize> = uneven.iter().map(Vec::len).collect();
        assert_eq!(sizes.iter().sum::<usize>(), 10);
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn too_many_folds() {
        assert!(matches!(
            make_folds(&docs(2), 3, 0),
            Err(Error::TooFewDocuments { k: 3, units: 2 })
        ));
        assert!(make_folds(&docs(5), 1, 0).is_err());
    }

    #[test]
    fn single_document_falls_back_to_sentence_blocks() {
        let doc = Document {
            id: "only".into(),
            sentences: (0..7)
                .map(|_| Sentence::new(vec![Token::new("w", "NOUN", Label::O)]))
                .collect(),
        };
        let units = cv_units(&Corpus::new(vec![doc]), 3);
        assert_eq!(units.documents.len(), 3);
        assert_eq!(units.sentence_count(), 7);
    }

    #[test]
    fn default_grid_covers_reported_configurations() {
        let grid = ParamGrid::default();
        assert_eq!(grid.len(), 16);
        let points = grid.combinations(0);
        for hp in [
            Hyperparams::pdtb(),
            Hyperparams::pdtb_weighted(),
            Hyperparams::tdb(),
            Hyperparams::tdb_weighted(),
        ] {
            assert!(points.contains(&hp), "{hp}");
        }
    }

    #[test]
    fn empty_grid_list_rejected() {
        let grid = ParamGrid {
            max_depth: vec![],
            ..ParamGrid::default()
        };
        assert!(grid.validate().is_err());
        assert!(ParamGrid::from_json(
            r#"{"learning_rate":[0.1],"max_depth":[2],"n_estimators":[3],"max_delta_step":[0],"min_child_weight":[1]}"#
        )
        .is_ok());
    }
}
