use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::gbdt::objective::{compute_class_weights, log_loss, softmax_grad_hess, ClassWeights};
use crate::gbdt::params::Hyperparams;
use crate::gbdt::tree::{presort, Node, Tree, TreeBuilder};
use crate::scalar::Scalar;

const SCORE_BLOCK: usize = 256;

/// A trained (or hand-assembled) boosted ensemble: one tree per class per round.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble<F> {
    hyperparams: Hyperparams,
    n_classes: usize,
    n_features: usize,
    base_score: Vec<F>,
    rounds: Vec<Vec<Tree<F>>>,
    class_weights: Option<ClassWeights<F>>,
}

impl<F: Scalar> Ensemble<F> {
    /// Assembles an ensemble, checking that every round has one tree per
    /// class, trees only reference known features, the round count fits
    /// `n_estimators`, and leaves respect a positive `max_delta_step`.
    pub fn new(
        hyperparams: Hyperparams,
        n_classes: usize,
        n_features: usize,
        base_score: Vec<F>,
        rounds: Vec<Vec<Tree<F>>>,
        class_weights: Option<ClassWeights<F>>,
    ) -> Result<Self> {
        hyperparams.validate()?;
        let invalid = |msg: String| Err(Error::ModelFormat(msg));
        if n_classes < 2 {
            return invalid(format!("{n_classes} classes; need at least 2"));
        }
        if base_score.len() != n_classes {
            return invalid(format!("{} base scores for {n_classes} classes", base_score.len()));
        }
        if rounds.len() > hyperparams.n_estimators {
            return invalid(format!(
                "{} rounds exceed n_estimators {}",
                rounds.len(),
                hyperparams.n_estimators
            ));
        }
        if let Some(w) = &class_weights {
            if w.len() != n_classes {
                return invalid(format!("{} class weights for {n_classes} classes", w.len()));
            }
        }
        let cap = F::of(hyperparams.max_delta_step);
        for (t, round) in rounds.iter().enumerate() {
            if round.len() != n_classes {
                return invalid(format!("round {t} has {} trees, expected {n_classes}", round.len()));
            }
            for tree in round {
                if tree.max_feature().is_some_and(|f| f >= n_features) {
                    return invalid(format!("round {t} splits on a feature beyond {n_features}"));
                }
                if cap > F::zero() && tree.leaf_values().any(|v| v.abs() > cap) {
                    return invalid(format!("round {t} has a leaf beyond max_delta_step"));
                }
            }
        }
        Ok(Ensemble {
            hyperparams,
            n_classes,
            n_features,
            base_score,
            rounds,
            class_weights,
        })
    }

    /// Zero-round ensemble with base score 0 for every class.
    pub fn empty(hyperparams: Hyperparams, n_classes: usize, n_features: usize) -> Result<Self> {
        Self::new(
            hyperparams,
            n_classes,
            n_features,
            vec![F::zero(); n_classes],
            Vec::new(),
            None,
        )
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        &self.hyperparams
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn base_score(&self) -> &[F] {
        &self.base_score
    }

    pub fn rounds(&self) -> &[Vec<Tree<F>>] {
        &self.rounds
    }

    pub fn n_rounds(&self) -> usize {
        self.rounds.len()
    }

    pub fn class_weights(&self) -> Option<&ClassWeights<F>> {
        self.class_weights.as_ref()
    }

    /// Raw class scores of one row into `out`.
    #[inline]
    pub fn score_row(&self, row: &[F], out: &mut [F]) {
        out.copy_from_slice(&self.base_score);
        let lr = F::of(self.hyperparams.learning_rate);
        for round in &self.rounds {
            for (o, tree) in out.iter_mut().zip(round) {
                *o = *o + lr * tree.predict(row);
            }
        }
    }

    /// Tree-major over a block of rows so each tree stays in cache. Every
    /// row still accumulates in round order, matching `score_row` bit for bit.
    fn score_block(&self, rows: &[F], out: &mut [F]) {
        let (c, d) = (self.n_classes, self.n_features);
        for o in out.chunks_exact_mut(c) {
            o.copy_from_slice(&self.base_score);
        }
        let lr = F::of(self.hyperparams.learning_rate);
        for round in &self.rounds {
            for (class, tree) in round.iter().enumerate() {
                tree.accumulate(rows, d, lr, out, c, class);
            }
        }
    }

    /// Row-major `N x n_classes` scores.
    pub fn predict_scores(&self, x: &FeatureMatrix<F>) -> Result<Vec<F>> {
        if x.n_cols() != self.n_features {
            return Err(Error::Contract(format!(
                "feature matrix has {} columns, model expects {}",
                x.n_cols(),
                self.n_features
            )));
        }
        let (c, d) = (self.n_classes, self.n_features);
        let mut scores = vec![F::zero(); x.n_rows() * c];
        if d == 0 {
            for out in scores.chunks_exact_mut(c) {
                out.copy_from_slice(&self.base_score);
            }
            return Ok(scores);
        }
        scores
            .par_chunks_mut(SCORE_BLOCK * c)
            .zip(x.as_slice().par_chunks(SCORE_BLOCK * d))
            .for_each(|(out, rows)| self.score_block(rows, out));
        Ok(scores)
    }

    /// Highest-scoring class per row; ties go to the lowest class index.
    pub fn predict_classes(&self, x: &FeatureMatrix<F>) -> Result<Vec<usize>> {
        let scores = self.predict_scores(x)?;
        Ok(scores.chunks_exact(self.n_classes).map(argmax).collect())
    }

    pub(crate) fn split_nodes(&self) -> impl Iterator<Item = &Node<F>> + '_ {
        self.rounds
            .iter()
            .flatten()
            .flat_map(|t| t.nodes().iter())
            .filter(|n| matches!(n, Node::Split { .. }))
    }
}

pub(crate) fn argmax<F: Scalar>(row: &[F]) -> usize {
    let mut best = 0;
    for (c, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = c;
        }
    }
    best
}

pub fn train<F: Scalar>(
    x: &FeatureMatrix<F>,
    labels: &[usize],
    n_classes: usize,
    hp: &Hyperparams,
    weighted: bool,
) -> Result<Ensemble<F>> {
    train_traced(x, labels, n_classes, hp, weighted).map(|(model, _)| model)
}

/// Trains and also returns the weighted training log-loss before the first
/// round and after every round (`n_estimators + 1` values).
///
/// Scores start at 0. Each round computes softmax gradients at the current
/// scores, fits one tree per class, and adds `learning_rate * tree(x)`.
/// With `weighted`, each row is weighted by its class's inverse frequency.
/// No step is random, so identical inputs give bit-identical ensembles.
pub fn train_traced<F: Scalar>(
    x: &FeatureMatrix<F>,
    labels: &[usize],
    n_classes: usize,
    hp: &Hyperparams,
    weighted: bool,
) -> Result<(Ensemble<F>, Vec<F>)> {
    hp.validate()?;
    let n = x.n_rows();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if labels.len() != n {
        return Err(Error::Contract(format!("{} labels for {n} feature rows", labels.len())));
    }
    if n_classes < 2 {
        return Err(Error::Contract(format!("need at least 2 classes, got {n_classes}")));
    }
    if let Some(&bad) = labels.iter().find(|&&c| c >= n_classes) {
        return Err(Error::Contract(format!(
            "class index {bad} out of range 0..{n_classes}"
        )));
    }
    if n > u32::MAX as usize {
        return Err(Error::Contract(format!("{n} rows exceed the supported maximum")));
    }

    let class_weights = if weighted {
        Some(compute_class_weights::<F>(labels, n_classes)?)
    } else {
        None
    };
    let sample_weights = match &class_weights {
        Some(w) => w.sample_weights(labels),
        None => vec![F::one(); n],
    };

    let all_rows: Vec<u32> = (0..n as u32).collect();
    let sorted = presort(&all_rows, x);
    let lr = F::of(hp.learning_rate);
    let base_score = vec![F::zero(); n_classes];
    let mut scores: Vec<F> = base_score.iter().copied().cycle().take(n * n_classes).collect();
    let mut trace = Vec::with_capacity(hp.n_estimators + 1);
    trace.push(log_loss(&scores, n_classes, labels, &sample_weights));

    let mut rounds = Vec::with_capacity(hp.n_estimators);
    for _ in 0..hp.n_estimators {
        let (grad, hess) = softmax_grad_hess(&scores, n_classes, labels, &sample_weights);
        let round: Vec<Tree<F>> = (0..n_classes)
            .into_par_iter()
            .map(|c| {
                let g: Vec<F> = grad.iter().skip(c).step_by(n_classes).copied().collect();
                let h: Vec<F> = hess.iter().skip(c).step_by(n_classes).copied().collect();
                TreeBuilder::new(x, &g, &h, hp).build(&sorted)
            })
            .collect();
        for (row, out) in x.rows().zip(scores.chunks_exact_mut(n_classes)) {
            for (o, tree) in out.iter_mut().zip(&round) {
                *o = *o + lr * tree.predict(row);
            }
        }
        rounds.push(round);
        trace.push(log_loss(&scores, n_classes, labels, &sample_weights));
    }

    let ensemble = Ensemble::new(hp.clone(), n_classes, x.n_cols(), base_score, rounds, class_weights)?;
    Ok((ensemble, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable() -> (FeatureMatrix<f64>, Vec<usize>) {
        (FeatureMatrix::new(1, vec![0.0, 1.0, 2.0, 3.0]), vec![0, 0, 1, 1])
    }

    fn small_hp(rounds: usize, depth: usize) -> Hyperparams {
        Hyperparams {
            learning_rate: 0.3,
            max_depth: depth,
            n_estimators: rounds,
            min_child_weight: 0.0,
            ..Hyperparams::default()
        }
    }

    #[test]
    fn one_stump_lowers_the_loss() {
        let (x, y) = separable();
        let (model, trace) = train_traced(&x, &y, 2, &small_hp(1, 1), false).unwrap();
        assert_eq!(model.n_rounds(), 1);
        assert_eq!(trace.len(), 2);
        assert!(trace[1] < trace[0]);
        assert!((trace[0] - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn zero_round_ensemble_predicts_base_and_class_zero() {
        let e = Ensemble::<f64>::empty(Hyperparams::default(), 3, 14).unwrap();
        let x = FeatureMatrix::new(14, vec![1.0; 28]);
        assert_eq!(e.predict_scores(&x).unwrap(), vec![0.0; 6]);
        assert_eq!(e.predict_classes(&x).unwrap(), vec![0, 0]);
    }

    #[test]
    fn training_preconditions() {
        let (x, y) = separable();
        assert!(matches!(
            train(&FeatureMatrix::<f64>::empty(1), &[], 2, &small_hp(1, 1), false),
            Err(Error::EmptyInput)
        ));
        assert!(matches!(
            train(&x, &y, 3, &small_hp(1, 1), true),
            Err(Error::MissingClass(2))
        ));
        assert!(matches!(
            train(&x, &y[..3], 2, &small_hp(1, 1), false),
            Err(Error::Contract(_))
        ));
        assert!(train(&x, &y, 3, &small_hp(1, 1), false).is_ok());
    }

    #[test]
    fn table_configuration_is_echoed() {
        let (x, y) = separable();
        let hp = Hyperparams {
            n_estimators: 3,
            ..Hyperparams::pdtb()
        };
        let model = train(&x, &y, 2, &hp, false).unwrap();
        assert_eq!(model.hyperparams(), &hp);
        assert_eq!(model.hyperparams().learning_rate, 0.2);
    }

    #[test]
    fn ensemble_invariants_enforced() {
        let hp = Hyperparams {
            n_estimators: 1,
            max_delta_step: 1.0,
            ..Hyperparams::default()
        };
        let leaf = |v: f64| Tree::leaf(v);
        assert!(Ensemble::new(hp.clone(), 2, 1, vec![0.0; 2], vec![vec![leaf(0.5), leaf(-0.5)]], None).is_ok());
        assert!(Ensemble::new(hp.clone(), 2, 1, vec![0.0; 2], vec![vec![leaf(0.5)]], None).is_err());
        assert!(Ensemble::new(hp.clone(), 2, 1, vec![0.0; 2], vec![vec![leaf(2.0), leaf(0.0)]], None).is_err());
        let two_rounds = vec![vec![leaf(0.0), leaf(0.0)]; 2];
        assert!(Ensemble::new(hp.clone(), 2, 1, vec![0.0; 2], two_rounds, None).is_err());
        let stump = Tree::stump(3, 0.0, 0.0, 0.0);
        assert!(Ensemble::new(hp, 2, 1, vec![0.0; 2], vec![vec![stump, leaf(0.0)]], None).is_err());
    }

    #[test]
    fn argmax_ties_pick_lowest() {
        assert_eq!(argmax(&[0.0f64, 0.0, 0.0]), 0);
        assert_eq!(argmax(&[0.0f64, 1.0, 1.0]), 1);
        assert_eq!(argmax(&[-1.0f64, -2.0, 0.5]), 2);
    }

    #[test]
    fn f32_training_works() {
        let x = FeatureMatrix::<f32>::new(1, vec![0.0, 1.0, 2.0, 3.0]);
        let (model, trace) = train_traced(&x, &[0, 0, 1, 1], 2, &small_hp(5, 2), true).unwrap();
        assert!(trace.last().unwrap() < &trace[0]);
        assert_eq!(model.predict_classes(&x).unwrap(), vec![0, 0, 1, 1]);
    }

    #[test]
    fn blocked_scores_match_row_at_a_time() {
        let n = 613;
        let data: Vec<f64> = (0..n * 3).map(|k| ((k * 7919) % 97) as f64 / 7.0).collect();
        let x = FeatureMatrix::new(3, data);
        let y: Vec<usize> = (0..n)
            .map(|r| (x.get(r, 0) as usize + x.get(r, 2) as usize) % 3)
            .collect();
        let model = train(&x, &y, 3, &small_hp(12, 5), true).unwrap();
        assert!(model.rounds().iter().flatten().any(|t| t.depth() > 1));
        let blocked = model.predict_scores(&x).unwrap();
        let mut out = [0.0; 3];
        for (r, row) in x.rows().enumerate() {
            model.score_row(row, &mut out);
            for c in 0..3 {
                assert_eq!(out[c].to_bits(), blocked[r * 3 + c].to_bits());
            }
        }
    }
}
