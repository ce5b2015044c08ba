//! Independent reference implementations used by the integration tests.
//! Nothing here calls into the code paths it checks.

#![allow(dead_code)]

use condet::FeatureMatrix;
use rand::Rng;

/// Weighted softmax log-loss summed over rows, computed naively.
pub fn naive_loss(scores: &[f64], n_classes: usize, targets: &[usize], weights: &[f64]) -> f64 {
    let mut total = 0.0;
    for (i, (&t, &w)) in targets.iter().zip(weights).enumerate() {
        let row = &scores[i * n_classes..(i + 1) * n_classes];
        let z: f64 = row.iter().map(|s| s.exp()).sum();
        total += w * (z.ln() - row[t]);
    }
    total
}

/// Central finite-difference gradient of [`naive_loss`].
pub fn finite_difference_grad(
    scores: &[f64],
    n_classes: usize,
    targets: &[usize],
    weights: &[f64],
    step: f64,
) -> Vec<f64> {
    let mut out = vec![0.0; scores.len()];
    let mut work = scores.to_vec();
    for j in 0..scores.len() {
        work[j] = scores[j] + step;
        let up = naive_loss(&work, n_classes, targets, weights);
        work[j] = scores[j] - step;
        let down = naive_loss(&work, n_classes, targets, weights);
        work[j] = scores[j];
        out[j] = (up - down) / (2.0 * step);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSplit {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Enumerates every (feature, midpoint threshold) pair, partitions the rows
/// directly and keeps the best admissible split. Ties: lower feature, then
/// lower threshold.
pub fn brute_force_split(
    rows: &[usize],
    x: &FeatureMatrix<f64>,
    grad: &[f64],
    hess: &[f64],
    lambda: f64,
    gamma: f64,
    min_child_weight: f64,
) -> Option<OracleSplit> {
    let score = |g: f64, h: f64| g * g / (h + lambda);
    let mut best: Option<OracleSplit> = None;
    for f in 0..x.n_cols() {
        let mut values: Vec<f64> = rows.iter().map(|&r| x.get(r, f)).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let t = w[0] + (w[1] - w[0]) / 2.0;
            let (mut gl, mut hl, mut gr, mut hr) = (0.0, 0.0, 0.0, 0.0);
            for &r in rows {
                if x.get(r, f) < t {
                    gl += grad[r];
                    hl += hess[r];
                } else {
                    gr += grad[r];
                    hr += hess[r];
                }
            }
            if hl < min_child_weight || hr < min_child_weight {
                continue;
            }
            let gain = 0.5 * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr)) - gamma;
            if gain <= 0.0 {
                continue;
            }
            let better = match best {
                None => true,
                Some(b) => gain > b.gain + 1e-12,
            };
            if better {
                best = Some(OracleSplit {
                    feature: f,
                    threshold: t,
                    gain,
                });
            }
        }
    }
    best
}

/// Random split instance: up to 32 rows, up to 4 features. Half of the
/// instances use small integer grids so that exact ties occur.
pub fn random_split_instance(rng: &mut impl Rng) -> (FeatureMatrix<f64>, Vec<f64>, Vec<f64>, f64) {
    let rows = rng.gen_range(2..=32);
    let cols = rng.gen_range(1..=4);
    let discrete = rng.gen_bool(0.5);
    let data: Vec<f64> = (0..rows * cols)
        .map(|_| {
            if discrete {
                rng.gen_range(0..5) as f64
            } else {
                rng.gen_range(-3.0..3.0)
            }
        })
        .collect();
    let grad: Vec<f64> = (0..rows)
        .map(|_| {
            if discrete {
                rng.gen_range(-4..=4) as f64 / 2.0
            } else {
                rng.gen_range(-1.0..1.0)
            }
        })
        .collect();
    let hess: Vec<f64> = (0..rows)
        .map(|_| {
            if discrete {
                rng.gen_range(1..=4) as f64 / 4.0
            } else {
                rng.gen_range(0.01..0.25)
            }
        })
        .collect();
    let mcw = [0.0, 0.0, 0.5, 1.0][rng.gen_range(0..4)];
    (FeatureMatrix::new(cols, data), grad, hess, mcw)
}
