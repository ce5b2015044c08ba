use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boosting hyperparameters.
///
/// `Default` is the best PDTB 2.0 configuration (learning rate 0.2, depth 8,
/// 500 trees, max delta step 4, min child weight 1). Missing keys in a
/// params file fall back to these defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub max_depth: usize,
    pub n_estimators: usize,
    /// Leaf output cap; 0 disables it.
    pub max_delta_step: f64,
    /// Minimum hessian mass in each child of a split.
    pub min_child_weight: f64,
    pub lambda_reg: f64,
    pub gamma: f64,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self::pdtb()
    }
}

impl Hyperparams {
    fn table_row(learning_rate: f64, max_depth: usize, n_estimators: usize) -> Self {
        Hyperparams {
            learning_rate,
            max_depth,
            n_estimators,
            max_delta_step: 4.0,
            min_child_weight: 1.0,
            lambda_reg: 1.0,
            gamma: 0.0,
            seed: 0,
        }
    }

    pub fn pdtb() -> Self {
        Self::table_row(0.2, 8, 500)
    }

    pub fn pdtb_weighted() -> Self {
        Self::table_row(0.3, 8, 400)
    }

    pub fn tdb() -> Self {
        Self::table_row(0.15, 10, 500)
    }

    pub fn tdb_weighted() -> Self {
        Self::table_row(0.15, 8, 400)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidHyperparams(msg));
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad(format!("learning_rate {} outside (0, 1]", self.learning_rate));
        }
        if self.max_depth < 1 {
            return bad("max_depth must be at least 1".into());
        }
        if self.n_estimators < 1 {
            return bad("n_estimators must be at least 1".into());
        }
        for (name, v) in [
            ("max_delta_step", self.max_delta_step),
            ("min_child_weight", self.min_child_weight),
            ("lambda_reg", self.lambda_reg),
            ("gamma", self.gamma),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} {v} must be a finite non-negative number"));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("hyperparams serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let hp: Hyperparams = serde_json::from_str(text)?;
        hp.validate()?;
        Ok(hp)
    }
}

impl fmt::Display for Hyperparams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "lr={} depth={} n={} mds={} mcw={}",
            self.learning_rate, self.max_depth, self.n_estimators, self.max_delta_step, self.min_child_weight
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_rows() {
        let p = Hyperparams::default();
        assert_eq!(
            (
                p.learning_rate,
                p.max_depth,
                p.n_estimators,
                p.max_delta_step,
                p.min_child_weight
            ),
            (0.2, 8, 500, 4.0, 1.0)
        );
        assert_eq!(Hyperparams::pdtb_weighted().learning_rate, 0.3);
        assert_eq!(Hyperparams::tdb().max_depth, 10);
        assert_eq!(Hyperparams::tdb_weighted().n_estimators, 400);
    }

    #[test]
    fn validation() {
        let mut p = Hyperparams::default();
        assert!(p.validate().is_ok());
        p.learning_rate = 0.0;
        assert!(p.validate().is_err());
        p.learning_rate = 1.5;
        assert!(p.validate().is_err());
        assert!(Hyperparams {
            max_depth: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(Hyperparams {
            gamma: -1.0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn json_partial_and_round_trip() {
        let p = Hyperparams::from_json(r#"{"learning_rate": 0.15, "max_depth": 10}"#).unwrap();
        assert_eq!(
            p,
            Hyperparams {
                learning_rate: 0.15,
                max_depth: 10,
                ..Hyperparams::default()
            }
        );
        assert_eq!(Hyperparams::from_json(&p.to_json()).unwrap(), p);
        assert!(Hyperparams::from_json(r#"{"eta": 0.1}"#).is_err());
    }
}
