//! JSON model files.
//!
//! A model file is one self-contained JSON document:
//!
//! ```json
//! {
//!   "version": "condet-model/1",
//!   "scalar": "f64",
//!   "feature_schema_version": "condet-features/1",
//!   "hyperparams": { "learning_rate": 0.2, ... },
//!   "class_labels": ["O", "B-Conn", "I-Conn"],
//!   "class_weights": null,
//!   "vocabulary": { "oov_id": 0, "words": ["the", "and", ...] },
//!   "verb_policy": { "verb_tags": ["VERB"], "include_aux": false },
//!   "n_features": 14,
//!   "base_score": [0.0, 0.0, 0.0],
//!   "trees": [[{"split": {...}}, {"leaf": {"value": -0.1}}, ...], ...]
//! }
//! ```
//!
//! `trees` holds one array per round with one nested node record per class.
//! Word ids are implicit: the word at position `k` has id `k + 1`.
//! Floats are written in shortest round-trip form, so a loaded model scores
//! bit-identically to the one that was saved.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::features::{VerbPolicy, Vocabulary};
use crate::gbdt::{ClassWeights, Ensemble, GbdtModel, Hyperparams, Node, Tree};
use crate::scalar::Scalar;

pub const MODEL_VERSION: &str = "condet-model/1";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile<F> {
    version: String,
    scalar: String,
    feature_schema_version: String,
    hyperparams: Hyperparams,
    class_labels: Vec<Label>,
    class_weights: Option<Vec<F>>,
    vocabulary: VocabularyRecord,
    verb_policy: VerbPolicy,
    n_features: usize,
    base_score: Vec<F>,
    trees: Vec<Vec<NodeRecord<F>>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VocabularyRecord {
    oov_id: u32,
    words: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum NodeRecord<F> {
    Split {
        feature: usize,
        threshold: F,
        gain: F,
        cover: F,
        left: Box<NodeRecord<F>>,
        right: Box<NodeRecord<F>>,
    },
    Leaf {
        value: F,
    },
}

fn to_record<F: Scalar>(tree: &Tree<F>, index: usize) -> NodeRecord<F> {
    match tree.nodes()[index] {
        Node::Leaf { value } => NodeRecord::Leaf { value },
        Node::Split {
            feature,
            threshold,
            left,
            right,
            gain,
            cover,
        } => NodeRecord::Split {
            feature,
            threshold,
            gain,
            cover,
            left: Box::new(to_record(tree, left as usize)),
            right: Box::new(to_record(tree, right as usize)),
        },
    }
}

/// Flattens a record in pre-order, the same layout training produces.
fn flatten<F: Scalar>(record: NodeRecord<F>, nodes: &mut Vec<Node<F>>) -> u32 {
    let index = nodes.len();
    match record {
        NodeRecord::Leaf { value } => nodes.push(Node::Leaf { value }),
        NodeRecord::Split {
            feature,
            threshold,
            gain,
            cover,
            left,
            right,
        } => {
            nodes.push(Node::Leaf { value: F::zero() });
            let left = flatten(*left, nodes);
            let right = flatten(*right, nodes);
            nodes[index] = Node::Split {
                feature,
                threshold,
                left,
                right,
                gain,
                cover,
            };
        }
    }
    index as u32
}

pub fn model_to_string<F: Scalar>(model: &GbdtModel<F>) -> String {
    let e = &model.ensemble;
    let file = ModelFile {
        version: MODEL_VERSION.to_string(),
        scalar: F::NAME.to_string(),
        feature_schema_version: model.feature_schema_version.clone(),
        hyperparams: e.hyperparams().clone(),
        class_labels: model.class_labels.clone(),
        class_weights: e.class_weights().map(|w| w.as_slice().to_vec()),
        vocabulary: VocabularyRecord {
            oov_id: Vocabulary::OOV_ID,
            words: model.vocab.words().to_vec(),
        },
        verb_policy: model.verb_policy.clone(),
        n_features: e.n_features(),
        base_score: e.base_score().to_vec(),
        trees: e
            .rounds()
            .iter()
            .map(|round| round.iter().map(|t| to_record(t, 0)).collect())
            .collect(),
    };
    let mut text = serde_json::to_string(&file).expect("model serializes");
    text.push('\n');
    text
}

pub fn model_from_str<F: Scalar>(text: &str) -> Result<GbdtModel<F>> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    match value.get("version").and_then(|v| v.as_str()) {
        Some(MODEL_VERSION) => {}
        Some(other) => return Err(Error::UnsupportedModelVersion(other.to_string())),
        None => return Err(Error::ModelFormat("missing version field".into())),
    }
    let file: ModelFile<F> = serde_json::from_value(value)?;
    if file.scalar != F::NAME {
        return Err(Error::ModelFormat(format!(
            "model stores {} scores, loading as {}",
            file.scalar,
            F::NAME
        )));
    }
    if file.vocabulary.oov_id != Vocabulary::OOV_ID {
        return Err(Error::ModelFormat(format!(
            "unsupported out-of-vocabulary id {}",
            file.vocabulary.oov_id
        )));
    }
    let vocab = Vocabulary::from_words(file.vocabulary.words).map_err(Error::ModelFormat)?;
    if file.verb_policy.verb_tags.is_empty() {
        return Err(Error::ModelFormat("empty verb tag set".into()));
    }
    let class_weights = file.class_weights.map(ClassWeights::from_vec).transpose()?;
    let rounds = file
        .trees
        .into_iter()
        .map(|round| {
            round
                .into_iter()
                .map(|record| {
                    let mut nodes = Vec::new();
                    flatten(record, &mut nodes);
                    Tree::from_nodes(nodes)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let n_classes = file.class_labels.len();
    let ensemble = Ensemble::new(
        file.hyperparams,
        n_classes,
        file.n_features,
        file.base_score,
        rounds,
        class_weights,
    )?;
    Ok(GbdtModel {
        ensemble,
        vocab,
        verb_policy: file.verb_policy,
        feature_schema_version: file.feature_schema_version,
        class_labels: file.class_labels,
    })
}

pub fn save_model<F: Scalar>(model: &GbdtModel<F>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(model_to_string(model).as_bytes())
        .map_err(|e| Error::io(path, e))
}

pub fn load_model<F: Scalar>(path: impl AsRef<Path>) -> Result<GbdtModel<F>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_str(&text)
}
