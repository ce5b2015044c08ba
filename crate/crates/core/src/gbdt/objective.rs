use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const HESSIAN_FLOOR: f64 = 1e-16;

/// Per-class sample weights `w_c = N / (C * n_c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassWeights<F> {
    weights: Vec<F>,
}

impl<F: Scalar> ClassWeights<F> {
    pub fn from_vec(weights: Vec<F>) -> Result<Self> {
        if weights.is_empty() || weights.iter().any(|w| !(*w > F::zero() && w.is_finite())) {
            return Err(Error::Contract("class weights must be positive and finite".into()));
        }
        Ok(ClassWeights { weights })
    }

    pub fn as_slice(&self) -> &[F] {
        &self.weights
    }

    pub fn get(&self, class: usize) -> F {
        self.weights[class]
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Sample weight of each row, looked up by its class.
    pub fn sample_weights(&self, labels: &[usize]) -> Vec<F> {
        labels.iter().map(|&c| self.weights[c]).collect()
    }
}

pub fn compute_class_weights<F: Scalar>(labels: &[usize], n_classes: usize) -> Result<ClassWeights<F>> {
    let mut counts = vec![0usize; n_classes];
    for &c in labels {
        if c >= n_classes {
            return Err(Error::Contract(format!("class index {c} out of range 0..{n_classes}")));
        }
        counts[c] += 1;
    }
    if let Some(missing) = counts.iter().position(|&n| n == 0) {
        return Err(Error::MissingClass(missing));
    }
    let total = labels.len() as f64;
    let weights = counts
        .iter()
        .map(|&n| F::of(total / (n_classes as f64 * n as f64)))
        .collect();
    ClassWeights::from_vec(weights)
}

fn softmax_row<F: Scalar>(scores: &[F], out: &mut [F]) {
    let max = scores.iter().copied().fold(F::neg_infinity(), F::max);
    let mut sum = F::zero();
    for (o, &s) in out.iter_mut().zip(scores) {
        *o = (s - max).exp();
        sum = sum + *o;
    }
    for o in out.iter_mut() {
        *o = *o / sum;
    }
}

/// Gradient and hessian of the weighted softmax log-loss with respect to the
/// raw scores. `scores` is row-major `N x n_classes`.
///
/// `grad[i][c] = w_i (p_ic - [c == t_i])`, `hess[i][c] = max(w_i p_ic (1 - p_ic), 1e-16)`.
pub fn softmax_grad_hess<F: Scalar>(
    scores: &[F],
    n_classes: usize,
    targets: &[usize],
    weights: &[F],
) -> (Vec<F>, Vec<F>) {
    assert_eq!(scores.len(), targets.len() * n_classes);
    assert_eq!(targets.len(), weights.len());
    let floor = F::of(HESSIAN_FLOOR);
    let mut grad = vec![F::zero(); scores.len()];
    let mut hess = vec![F::zero(); scores.len()];
    let mut p = vec![F::zero(); n_classes];
    for (i, (&t, &w)) in targets.iter().zip(weights).enumerate() {
        let row = i * n_classes..(i + 1) * n_classes;
        softmax_row(&scores[row.clone()], &mut p);
        for c in 0..n_classes {
            let indicator = if c == t { F::one() } else { F::zero() };
            grad[row.start + c] = w * (p[c] - indicator);
            hess[row.start + c] = (w * p[c] * (F::one() - p[c])).max(floor);
        }
    }
    (grad, hess)
}

/// Weighted mean of `-log p_target`, computed stably via log-sum-exp.
pub fn log_loss<F: Scalar>(scores: &[F], n_classes: usize, targets: &[usize], weights: &[F]) -> F {
    let mut total = F::zero();
    let mut weight_sum = F::zero();
    for (i, (&t, &w)) in targets.iter().zip(weights).enumerate() {
        let row = &scores[i * n_classes..(i + 1) * n_classes];
        let max = row.iter().copied().fold(F::neg_infinity(), F::max);
        let lse = max + row.iter().map(|&s| (s - max).exp()).sum::<F>().ln();
        total = total + w * (lse - row[t]);
        weight_sum = weight_sum + w;
    }
    if weight_sum > F::zero() {
        total / weight_sum
    } else {
        F::zero()
    }
}
