use std::collections::BTreeSet;

use condet::corpus::{corpus_stats, parse_corpus, render_corpus};
use condet::eval::{extract_spans, score_spans};
use condet::features::{extract_features, featurize_corpus};
use condet::gbdt::{compute_class_weights, train};
use condet::{Corpus, Document, FeatureMatrix, Format, Hyperparams, Label, Sentence, Token, VerbPolicy, Vocabulary};
use proptest::prelude::*;

fn label() -> impl Strategy<Value = Label> {
    prop_oneof![4 => Just(Label::O), 2 => Just(Label::BConn), 1 => Just(Label::IConn)]
}

fn token() -> impl Strategy<Value = Token> {
    (
        "[A-Za-zçğışöü]{1,8}",
        prop_oneof![Just("VERB"), Just("NOUN"), Just("AUX"), Just("CCONJ"), Just("ADV")],
        label(),
    )
        .prop_map(|(form, upos, label)| Token::new(form, upos, label))
}

fn sentence() -> impl Strategy<Value = Sentence> {
    prop::collection::vec(token(), 1..12).prop_map(Sentence::new)
}

fn corpus() -> impl Strategy<Value = Corpus> {
    prop::collection::vec(prop::collection::vec(sentence(), 1..4), 0..4).prop_map(|docs| {
        Corpus::new(
            docs.into_iter()
                .enumerate()
                .map(|(i, sentences)| Document {
                    id: format!("d{i}"),
                    sentences,
                })
                .collect(),
        )
    })
}

proptest! {
    #[test]
    fn corpus_round_trips_through_both_formats(c in corpus()) {
        for format in [Format::Tsv, Format::Conllu] {
            let back = parse_corpus(&render_corpus(&c, format), format).unwrap();
            prop_assert_eq!(&back, &c);
        }
    }

    #[test]
    fn stats_account_for_every_token(c in corpus()) {
        let s = corpus_stats(&c);
        prop_assert_eq!(s.total(), c.token_count());
        prop_assert!((0.0..=1.0).contains(&s.connective_proportion));
    }

    #[test]
    fn spans_cover_exactly_the_labelled_positions(labels in prop::collection::vec(label(), 0..40)) {
        let spans = extract_spans(&labels);
        let covered: BTreeSet<usize> = spans.iter().flat_map(|s| s.start..=s.end).collect();
        let labelled: BTreeSet<usize> = labels.iter().enumerate().filter(|(_, l)| l.is_connective()).map(|(i, _)| i).collect();
        prop_assert_eq!(covered, labelled);
        for w in spans.windows(2) {
            prop_assert!(w[0].end < w[1].start);
        }
    }

    #[test]
    fn self_score_is_perfect(labels in prop::collection::vec(label(), 1..40)) {
        let r = score_spans(&labels, &labels).unwrap();
        if labels.iter().any(|l| l.is_connective()) {
            prop_assert_eq!(r.f1, 1.0);
            let none = vec![Label::O; labels.len()];
            prop_assert_eq!(score_spans(&labels, &none).unwrap().recall, 0.0);
        }
    }

    #[test]
    fn feature_invariants(s in sentence()) {
        let vocab = Vocabulary::build(&Corpus::from_sentences(vec![s.clone()]));
        let policy = VerbPolicy::default();
        let rows = extract_features::<f64>(&s, &vocab, &policy);
        let n = s.len() as f64;
        for (i, (row, tok)) in rows.iter().zip(&s.tokens).enumerate() {
            for &b in row[..=6].iter().chain(std::iter::once(&row[9])) {
                prop_assert!(b == 0.0 || b == 1.0);
            }
            prop_assert!(row[7] >= 1.0 && row[7] <= n);
            prop_assert!(row[8] >= 1.0 && row[8] <= n);
            prop_assert!(row[12] < row[13]);
            prop_assert_eq!(row[3] == 1.0, policy.is_verb(&tok.upos));
            let verb_before = s.tokens[..i].iter().any(|t| policy.is_verb(&t.upos));
            if !verb_before {
                prop_assert_eq!(row[7], n);
            } else {
                prop_assert!(row[7] < (i + 1) as f64);
            }
        }
    }

    #[test]
    fn windows_stay_inside_sentences(a in sentence(), b in sentence(), c in sentence()) {
        let ordered = Corpus::from_sentences(vec![a.clone(), b.clone(), c.clone()]);
        let permuted = Corpus::from_sentences(vec![c.clone(), b.clone(), a.clone()]);
        let vocab = Vocabulary::build(&ordered);
        let policy = VerbPolicy::default();
        let (x1, _) = featurize_corpus::<f64>(&ordered, &vocab, &policy);
        let (x2, _) = featurize_corpus::<f64>(&permuted, &vocab, &policy);
        for k in 0..b.len() {
            prop_assert_eq!(x1.row(a.len() + k), x2.row(c.len() + k));
        }
    }

    #[test]
    fn class_weights_balance_to_n(labels in prop::collection::vec(0usize..3, 3..200)) {
        prop_assume!((0..3).all(|c| labels.contains(&c)));
        let w = compute_class_weights::<f64>(&labels, 3).unwrap();
        let n = labels.len() as f64;
        let sum: f64 = (0..3).map(|c| w.get(c) * labels.iter().filter(|&&l| l == c).count() as f64).sum();
        prop_assert!((sum - n).abs() <= 1e-9 * n);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn trained_leaves_respect_the_step_cap(
        data in prop::collection::vec(-5.0f64..5.0, 60),
        labels in prop::collection::vec(0usize..3, 30),
        mds in 0.05f64..2.0,
        weighted in any::<bool>(),
    ) {
        prop_assume!(!weighted || (0..3).all(|c| labels.contains(&c)));
        let x = FeatureMatrix::new(2, data);
        let hp = Hyperparams { learning_rate: 0.3, max_depth: 4, n_estimators: 5, max_delta_step: mds, min_child_weight: 0.0, ..Hyperparams::default() };
        let model = train(&x, &labels, 3, &hp, weighted).unwrap();
        for tree in model.rounds().iter().flatten() {
            prop_assert!(tree.depth() <= 4);
            for v in tree.leaf_values() {
                prop_assert!(v.abs() <= mds);
            }
        }
        let again = train(&x, &labels, 3, &hp, weighted).unwrap();
        prop_assert_eq!(model, again);
    }
}
