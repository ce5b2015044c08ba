//! Generated corpora and models for tests, demos and benchmarks.
//!
//! The licensed discourse treebanks cannot ship with the crate, so these
//! generators stand in for them.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Corpus, Document, Label, Sentence, Token};
use crate::features::{VerbPolicy, Vocabulary, FEATURE_SCHEMA_VERSION, NUM_FEATURES};
use crate::gbdt::{Ensemble, GbdtModel, Hyperparams, Node, Tree};
use crate::scalar::Scalar;

/// Ten connective forms with the POS tag they carry.
pub const CONNECTIVE_LEXICON: [(&str, &str); 10] = [
    ("because", "SCONJ"),
    ("however", "ADV"),
    ("although", "SCONJ"),
    ("but", "CCONJ"),
    ("then", "ADV"),
    ("meanwhile", "ADV"),
    ("therefore", "ADV"),
    ("and", "CCONJ"),
    ("for instance", "ADP"),
    ("as well as", "ADV"),
];

const NOUNS: [&str; 24] = [
    "market", "company", "report", "price", "river", "teacher", "garden", "letter", "city", "engine", "budget",
    "island", "window", "doctor", "season", "bridge", "council", "painting", "station", "harvest", "network",
    "village", "museum", "contract",
];
const ADJECTIVES: [&str; 10] = [
    "large", "quiet", "recent", "bright", "careful", "distant", "early", "modern", "narrow", "strong",
];
const DETERMINERS: [&str; 4] = ["the", "a", "this", "every"];
const VERBS: [&str; 16] = [
    "said", "rose", "opened", "visited", "expects", "remained", "wrote", "found", "closed", "raised", "built", "moved",
    "reported", "carried", "signed", "painted",
];

fn filler(rng: &mut impl Rng) -> Token {
    match rng.gen_range(0..10) {
        0..=2 => Token::new(*DETERMINERS.choose(rng).unwrap(), "DET", Label::O),
        3..=4 => Token::new(*ADJECTIVES.choose(rng).unwrap(), "ADJ", Label::O),
        _ => Token::new(*NOUNS.choose(rng).unwrap(), "NOUN", Label::O),
    }
}

fn connective_tokens(entry: (&str, &str), discourse: bool) -> Vec<Token> {
    entry
        .0
        .split(' ')
        .enumerate()
        .map(|(i, form)| {
            let label = match (discourse, i) {
                (false, _) => Label::O,
                (true, 0) => Label::BConn,
                (true, _) => Label::IConn,
            };
            Token::new(form, entry.1, label)
        })
        .collect()
}

/// One verb-anchored sentence: a discourse connective within two tokens
/// of the verb (most of the time) and, often, a non-discourse occurrence of
/// a lexicon form at least six tokens away from it.
fn verb_adjacent_sentence(rng: &mut impl Rng) -> Sentence {
    let len = rng.gen_range(16..=24);
    let verb = rng.gen_range(2..=4);
    let mut slots: Vec<Option<Token>> = (0..len).map(|_| None).collect();
    slots[verb] = Some(Token::new(*VERBS.choose(rng).unwrap(), "VERB", Label::O));

    let mut taken_until = verb;
    if rng.gen_bool(0.8) {
        let entry = *CONNECTIVE_LEXICON.choose(rng).unwrap();
        let tokens = connective_tokens(entry, true);
        let start = if tokens.len() == 1 && rng.gen_bool(0.4) {
            verb - rng.gen_range(1..=2)
        } else {
            verb + rng.gen_range(1..=2)
        };
        for (k, t) in tokens.into_iter().enumerate() {
            slots[start + k] = Some(t);
            taken_until = taken_until.max(start + k);
        }
    }
    if rng.gen_bool(0.7) {
        let entry = *CONNECTIVE_LEXICON.choose(rng).unwrap();
        let tokens = connective_tokens(entry, false);
        let earliest = (verb + 6).max(taken_until + 1);
        let latest = len - tokens.len();
        if earliest <= latest {
            let start = rng.gen_range(earliest..=latest);
            for (k, t) in tokens.into_iter().enumerate() {
                slots[start + k] = Some(t);
            }
        }
    }
    let mut tokens: Vec<Token> = slots.into_iter().map(|s| s.unwrap_or_else(|| filler(rng))).collect();
    if let Some(first) = tokens.first_mut() {
        let mut chars = first.form.chars();
        if let Some(c) = chars.next() {
            first.form = c.to_uppercase().chain(chars).collect();
        }
    }
    Sentence::new(tokens)
}

/// Corpus where connective status is decided by verb proximity: lexicon
/// forms near a verb are discourse connectives, the same forms far from
/// every verb are not.
pub fn verb_adjacent_corpus(documents: usize, sentences_per_doc: usize, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Corpus::new(
        (0..documents)
            .map(|d| Document {
                id: format!("synth{d:04}"),
                sentences: (0..sentences_per_doc)
                    .map(|_| verb_adjacent_sentence(&mut rng))
                    .collect(),
            })
            .collect(),
    )
}

/// Corpus with exactly the given label counts, in 50-token sentences.
/// `count_i` must not exceed `count_b`.
pub fn label_count_corpus(count_b: usize, count_i: usize, count_o: usize) -> Corpus {
    assert!(count_i <= count_b, "every I-Conn needs an opening B-Conn");
    let mut labels = Vec::with_capacity(count_b + count_i + count_o);
    for k in 0..count_b {
        labels.push(Label::BConn);
        if k < count_i {
            labels.push(Label::IConn);
        }
    }
    labels.extend(std::iter::repeat_n(Label::O, count_o));
    let sentences: Vec<Sentence> = labels
        .chunks(50)
        .map(|chunk| {
            Sentence::new(
                chunk
                    .iter()
                    .map(|&l| Token::new(if l == Label::O { "w" } else { "c" }, "X", l))
                    .collect(),
            )
        })
        .collect();
    Corpus::from_sentences(sentences)
}

/// Gold corpus plus predicted labels realising the given per-form
/// `(form, tp, tn, fp, fn)` outcome counts, one occurrence per sentence.
pub fn error_table_fixture(rows: &[(&str, usize, usize, usize, usize)]) -> (Corpus, Vec<Label>) {
    let mut sentences = Vec::new();
    let mut predicted = Vec::new();
    for &(form, tp, tn, fp, fn_) in rows {
        let outcomes = [
            (tp, true, true),
            (tn, false, false),
            (fp, false, true),
            (fn_, true, false),
        ];
        for (count, gold_conn, pred_conn) in outcomes {
            for _ in 0..count {
                let parts: Vec<&str> = form.split(' ').collect();
                let mut tokens = vec![Token::new("x", "NOUN", Label::O)];
                let mut pred = vec![Label::O];
                for (k, part) in parts.iter().enumerate() {
                    let conn = if k == 0 { Label::BConn } else { Label::IConn };
                    tokens.push(Token::new(*part, "X", if gold_conn { conn } else { Label::O }));
                    pred.push(if pred_conn { conn } else { Label::O });
                }
                tokens.push(Token::new("y", "NOUN", Label::O));
                pred.push(Label::O);
                sentences.push(Sentence::new(tokens));
                predicted.extend(pred);
            }
        }
    }
    (Corpus::from_sentences(sentences), predicted)
}

fn random_threshold<F: Scalar>(feature: usize, vocab_len: usize, rng: &mut impl Rng) -> F {
    let v = match feature {
        0..=6 | 9 => 0.5,
        7 | 8 | 12 | 13 => rng.gen_range(1..30) as f64 + 0.5,
        10 => rng.gen_range(1..12) as f64 + 0.5,
        _ => rng.gen_range(0..vocab_len.max(1)) as f64 + 0.5,
    };
    F::of(v)
}

fn full_tree<F: Scalar>(depth: usize, vocab_len: usize, rng: &mut impl Rng) -> Tree<F> {
    fn grow<F: Scalar>(nodes: &mut Vec<Node<F>>, depth: usize, vocab_len: usize, rng: &mut impl Rng) -> u32 {
        let index = nodes.len();
        nodes.push(Node::Leaf {
            value: F::of(rng.gen_range(-0.5..0.5)),
        });
        if depth > 0 {
            let feature = rng.gen_range(0..NUM_FEATURES);
            let threshold = random_threshold(feature, vocab_len, rng);
            let left = grow(nodes, depth - 1, vocab_len, rng);
            let right = grow(nodes, depth - 1, vocab_len, rng);
            nodes[index] = Node::Split {
                feature,
                threshold,
                left,
                right,
                gain: F::one(),
                cover: F::one(),
            };
        }
        index as u32
    }
    let mut nodes = Vec::with_capacity((1 << (depth + 1)) - 1);
    grow(&mut nodes, depth, vocab_len, rng);
    Tree::from_nodes(nodes).expect("generated tree is well formed")
}

/// Model whose every tree is a complete binary tree of the given depth,
/// the worst case for inference cost.
pub fn full_depth_model<F: Scalar>(rounds: usize, depth: usize, vocab: Vocabulary, seed: u64) -> GbdtModel<F> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hp = Hyperparams {
        n_estimators: rounds.max(1),
        max_depth: depth.max(1),
        ..Hyperparams::default()
    };
    let trees = (0..rounds)
        .map(|_| {
            (0..Label::COUNT)
                .map(|_| full_tree(depth, vocab.len(), &mut rng))
                .collect()
        })
        .collect();
    let ensemble = Ensemble::new(
        hp,
        Label::COUNT,
        NUM_FEATURES,
        vec![F::zero(); Label::COUNT],
        trees,
        None,
    )
    .expect("generated ensemble is valid");
    GbdtModel {
        ensemble,
        vocab,
        verb_policy: VerbPolicy::default(),
        feature_schema_version: FEATURE_SCHEMA_VERSION.to_string(),
        class_labels: Label::ALL.to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::corpus_stats;
    use crate::eval::error_report;

    #[test]
    fn verb_adjacent_corpus_is_deterministic_and_labelled() {
        let a = verb_adjacent_corpus(3, 10, 5);
        assert_eq!(a, verb_adjacent_corpus(3, 10, 5));
        assert_eq!(a.documents.len(), 3);
        a.validate().unwrap();
        let stats = corpus_stats(&a);
        assert!(stats.count_b > 0 && stats.count_i > 0 && stats.count_o > stats.count_b);
    }

    #[test]
    fn label_counts_exact() {
        let s = corpus_stats(&label_count_corpus(7, 3, 40));
        assert_eq!((s.count_b, s.count_i, s.count_o), (7, 3, 40));
    }

    #[test]
    fn error_fixture_realises_counts() {
        let (corpus, pred) = error_table_fixture(&[("and", 3, 2, 1, 4), ("for instance", 1, 1, 0, 2)]);
        let rows = error_report(&corpus, &corpus.labels(), &pred).unwrap();
        let get = |f: &str| rows.iter().find(|r| r.form == f).unwrap();
        let and = get("and");
        assert_eq!((and.tp, and.tn, and.fp, and.fn_), (3, 2, 1, 4));
        let fi = get("for instance");
        assert_eq!((fi.tp, fi.tn, fi.fp, fi.fn_), (1, 1, 0, 2));
    }

    #[test]
    fn full_depth_trees() {
        let m = full_depth_model::<f64>(2, 3, Vocabulary::default(), 1);
        assert_eq!(m.n_rounds(), 2);
        assert!(m.ensemble.rounds().iter().flatten().all(|t| t.depth() == 3));
    }
}
