//! Multiclass gradient-boosted decision trees.
//!
//! Newton boosting on the softmax log-loss: every round fits one regression
//! tree per class to the per-class gradient and hessian, with exact greedy
//! split search and leaves `-G / (H + lambda)` clamped to `max_delta_step`.

mod booster;
mod importance;
mod model;
mod objective;
mod params;
mod split;
mod tree;

pub use booster::{train, train_traced, Ensemble};
pub use importance::ImportanceKind;
pub use model::GbdtModel;
pub use objective::{compute_class_weights, log_loss, softmax_grad_hess, ClassWeights, HESSIAN_FLOOR};
pub use params::Hyperparams;
pub use split::{find_best_split, Split};
pub use tree::{build_tree, Node, Tree};
