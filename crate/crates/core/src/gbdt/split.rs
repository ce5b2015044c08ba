use rayon::prelude::*;

use crate::features::FeatureMatrix;
use crate::gbdt::params::Hyperparams;
use crate::scalar::Scalar;

/// Nodes at least this large search their features in parallel.
const PARALLEL_ROWS: usize = 8192;

/// A chosen split: rows with `x[feature] < threshold` go left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split<F> {
    pub feature: usize,
    pub threshold: F,
    pub gain: F,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct SplitParams<F> {
    pub lambda: F,
    pub gamma: F,
    pub min_child_weight: F,
}

impl<F: Scalar> SplitParams<F> {
    pub fn from_hyperparams(hp: &Hyperparams) -> Self {
        SplitParams {
            lambda: F::of(hp.lambda_reg),
            gamma: F::of(hp.gamma),
            min_child_weight: F::of(hp.min_child_weight),
        }
    }

    pub fn gain(&self, gl: F, hl: F, gr: F, hr: F) -> F {
        let score = |g: F, h: F| g * g / (h + self.lambda);
        let half = F::of(0.5);
        half * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr)) - self.gamma
    }
}

/// Midpoint between two distinct ordered values that still separates them.
fn midpoint<F: Scalar>(lo: F, hi: F) -> F {
    let mid = lo + (hi - lo) / F::of(2.0);
    if mid <= lo {
        hi
    } else {
        mid
    }
}

fn better<F: Scalar>(candidate: &Split<F>, incumbent: &Option<Split<F>>) -> bool {
    match incumbent {
        None => true,
        Some(b) => {
            candidate.gain > b.gain
                || (candidate.gain == b.gain && (candidate.feature, candidate.threshold) < (b.feature, b.threshold))
        }
    }
}

/// Scans one feature whose node rows are already sorted by value.
/// Returns the best valid split on it, preferring the lowest threshold on ties.
#[allow(clippy::too_many_arguments)]
pub(crate) fn scan_sorted<F: Scalar>(
    feature: usize,
    sorted: &[u32],
    x: &FeatureMatrix<F>,
    grad: &[F],
    hess: &[F],
    g_total: F,
    h_total: F,
    params: &SplitParams<F>,
) -> Option<Split<F>> {
    let mut best: Option<Split<F>> = None;
    let (mut gl, mut hl) = (F::zero(), F::zero());
    for pair in sorted.windows(2) {
        let (r, next) = (pair[0] as usize, pair[1] as usize);
        gl = gl + grad[r];
        hl = hl + hess[r];
        let (v, v_next) = (x.get(r, feature), x.get(next, feature));
        if v >= v_next {
            continue;
        }
        let (gr, hr) = (g_total - gl, h_total - hl);
        if hl < params.min_child_weight || hr < params.min_child_weight {
            continue;
        }
        let gain = params.gain(gl, hl, gr, hr);
        if gain > F::zero() && best.is_none_or(|b| gain > b.gain) {
            best = Some(Split {
                feature,
                threshold: midpoint(v, v_next),
                gain,
            });
        }
    }
    best
}

/// Best split across features given one value-sorted row list per feature.
pub(crate) fn best_over_features<F: Scalar>(
    sorted_lists: &[Vec<u32>],
    x: &FeatureMatrix<F>,
    grad: &[F],
    hess: &[F],
    g_total: F,
    h_total: F,
    params: &SplitParams<F>,
) -> Option<Split<F>> {
    let scan = |(f, list): (usize, &Vec<u32>)| scan_sorted(f, list, x, grad, hess, g_total, h_total, params);
    let per_feature: Vec<Option<Split<F>>> = if sorted_lists.first().map_or(0, Vec::len) >= PARALLEL_ROWS {
        sorted_lists.par_iter().enumerate().map(scan).collect()
    } else {
        sorted_lists.iter().enumerate().map(scan).collect()
    };
    let mut best = None;
    for candidate in per_feature.into_iter().flatten() {
        if better(&candidate, &best) {
            best = Some(candidate);
        }
    }
    best
}

pub(crate) fn sort_rows_by_feature<F: Scalar>(rows: &[u32], x: &FeatureMatrix<F>, feature: usize) -> Vec<u32> {
    let mut sorted = rows.to_vec();
    sorted.sort_by(|&a, &b| {
        x.get(a as usize, feature)
            .partial_cmp(&x.get(b as usize, feature))
            .expect("feature values are not NaN")
            .then(a.cmp(&b))
    });
    sorted
}

/// Exact greedy split search over `rows`.
///
/// Candidate thresholds are midpoints between consecutive distinct values of
/// each feature. A split is admissible when both children carry at least
/// `min_child_weight` hessian and its gain
/// `½ [G_L²/(H_L+λ) + G_R²/(H_R+λ) − G²/(H+λ)] − γ` is positive. Ties go to
/// the lower feature index, then the lower threshold. `grad` and `hess` are
/// indexed by matrix row.
pub fn find_best_split<F: Scalar>(
    rows: &[usize],
    x: &FeatureMatrix<F>,
    grad: &[F],
    hess: &[F],
    hp: &Hyperparams,
) -> Option<Split<F>> {
    if rows.len() < 2 {
        return None;
    }
    let rows: Vec<u32> = rows.iter().map(|&r| r as u32).collect();
    let g_total: F = rows.iter().map(|&r| grad[r as usize]).sum();
    let h_total: F = rows.iter().map(|&r| hess[r as usize]).sum();
    let lists: Vec<Vec<u32>> = (0..x.n_cols()).map(|f| sort_rows_by_feature(&rows, x, f)).collect();
    best_over_features(
        &lists,
        x,
        grad,
        hess,
        g_total,
        h_total,
        &SplitParams::from_hyperparams(hp),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hp(mcw: f64) -> Hyperparams {
        Hyperparams {
            min_child_weight: mcw,
            lambda_reg: 1.0,
            gamma: 0.0,
            ..Hyperparams::default()
        }
    }

    fn column(values: &[f64]) -> FeatureMatrix<f64> {
        FeatureMatrix::new(1, values.to_vec())
    }

    #[test]
    fn four_point_example() {
        let x = column(&[1.0, 2.0, 3.0, 4.0]);
        let s = find_best_split(&[0, 1, 2, 3], &x, &[-1.0, -1.0, 1.0, 1.0], &[1.0; 4], &hp(0.0)).unwrap();
        assert_eq!(s.feature, 0);
        assert_eq!(s.threshold, 2.5);
        assert!((s.gain - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn constant_features_have_no_split() {
        let x = FeatureMatrix::new(2, vec![1.0, 7.0, 1.0, 7.0, 1.0, 7.0]);
        assert!(find_best_split(&[0, 1, 2], &x, &[-1.0, 0.0, 1.0], &[1.0; 3], &hp(0.0)).is_none());
    }

    #[test]
    fn min_child_weight_restricts_candidates() {
        // Gradients favour a 1-vs-3 split, which the weight floor forbids.
        let x = column(&[1.0, 2.0, 3.0, 4.0]);
        let g = [-3.0, 1.0, 1.0, 1.0];
        let free = find_best_split(&[0, 1, 2, 3], &x, &g, &[1.0; 4], &hp(0.0)).unwrap();
        assert_eq!(free.threshold, 1.5);
        let constrained = find_best_split(&[0, 1, 2, 3], &x, &g, &[1.0; 4], &hp(2.0)).unwrap();
        assert_eq!(constrained.threshold, 2.5);
        assert!(find_best_split(&[0, 1, 2, 3], &x, &g, &[1.0; 4], &hp(3.0)).is_none());
    }

    #[test]
    fn ties_prefer_lower_feature() {
        let x = FeatureMatrix::new(2, vec![1.0, 1.0, 2.0, 2.0]);
        let s = find_best_split(&[0, 1], &x, &[-1.0, 1.0], &[1.0; 2], &hp(0.0)).unwrap();
        assert_eq!(s.feature, 0);
    }

    #[test]
    fn single_row_has_no_split() {
        let x = column(&[1.0]);
        assert!(find_best_split(&[0], &x, &[1.0], &[1.0], &hp(0.0)).is_none());
    }

    #[test]
    fn midpoint_separates_adjacent_floats() {
        let lo = 1.0f64;
        let hi = f64::from_bits(lo.to_bits() + 1);
        let m = midpoint(lo, hi);
        assert!(lo < m && m <= hi);
    }
}
