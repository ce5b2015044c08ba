use std::fmt;
use std::str::FromStr;

use crate::gbdt::booster::Ensemble;
use crate::gbdt::tree::Node;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImportanceKind {
    /// Total split gain per feature.
    Gain,
    /// Number of splits per feature.
    SplitCount,
}

impl FromStr for ImportanceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "gain" => Ok(ImportanceKind::Gain),
            "split_count" | "split-count" | "weight" => Ok(ImportanceKind::SplitCount),
            other => Err(format!(
                "unknown importance kind {other:?} (expected gain or split_count)"
            )),
        }
    }
}

impl fmt::Display for ImportanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ImportanceKind::Gain => "gain",
            ImportanceKind::SplitCount => "split_count",
        })
    }
}

impl<F: Scalar> Ensemble<F> {
    /// Importance of every feature, highest first, ties by name.
    ///
    /// `names` labels the feature columns and must cover `n_features`.
    pub fn feature_importance(&self, kind: ImportanceKind, names: &[&str]) -> Vec<(String, f64)> {
        assert!(names.len() >= self.n_features(), "missing feature names");
        let mut totals = vec![0.0f64; self.n_features()];
        for node in self.split_nodes() {
            if let Node::Split { feature, gain, .. } = node {
                totals[*feature] += match kind {
                    ImportanceKind::Gain => gain.as_f64(),
                    ImportanceKind::SplitCount => 1.0,
                };
            }
        }
        let mut ranked: Vec<(String, f64)> = names[..self.n_features()]
            .iter()
            .map(|n| n.to_string())
            .zip(totals)
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked
    }
}
