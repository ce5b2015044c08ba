//! Exact-span evaluation.
//!
//! A connective span is a maximal run of `B-Conn` followed by `I-Conn`
//! labels. An `I-Conn` without a preceding connective label opens its own
//! span. A predicted span counts only when both its start and end match a
//! gold span, so finding "because" inside "That's because" earns nothing.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::time::Instant;

use crate::corpus::{Corpus, Label};
use crate::error::{Error, Result};
use crate::gbdt::GbdtModel;
use crate::scalar::Scalar;

/// Inclusive token range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

pub fn extract_spans(labels: &[Label]) -> Vec<Span> {
    extract_spans_offset(labels, 0)
}

fn extract_spans_offset(labels: &[Label], offset: usize) -> Vec<Span> {
    let mut spans = Vec::new();
    let mut open: Option<usize> = None;
    for (i, &label) in labels.iter().enumerate() {
        match label {
            Label::O => {
                if let Some(s) = open.take() {
                    spans.push(Span::new(offset + s, offset + i - 1));
                }
            }
            Label::BConn => {
                if let Some(s) = open.replace(i) {
                    spans.push(Span::new(offset + s, offset + i - 1));
                }
            }
            Label::IConn => {
                if open.is_none() {
                    open = Some(i);
                }
            }
        }
    }
    if let Some(s) = open {
        spans.push(Span::new(offset + s, offset + labels.len() - 1));
    }
    spans
}

/// Spans decoded sentence by sentence, indexed over the whole corpus.
pub fn corpus_spans(corpus: &Corpus, labels: &[Label]) -> Result<Vec<Span>> {
    check_len(corpus.token_count(), labels.len())?;
    let mut spans = Vec::new();
    let mut offset = 0;
    for sentence in corpus.sentences() {
        spans.extend(extract_spans_offset(&labels[offset..offset + sentence.len()], offset));
        offset += sentence.len();
    }
    Ok(spans)
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Contract(format!(
            "label sequences differ in length: {expected} vs {got}"
        )));
    }
    Ok(())
}

/// Micro-averaged span counts and scores.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScoreReport {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub inference_seconds: Option<f64>,
}

impl ScoreReport {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        ScoreReport {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
            inference_seconds: None,
        }
    }

    fn from_spans(gold: &[Span], pred: &[Span]) -> Self {
        let gold_set: HashSet<&Span> = gold.iter().collect();
        let tp = pred.iter().filter(|s| gold_set.contains(s)).count();
        Self::from_counts(tp, pred.len() - tp, gold.len() - tp)
    }

    /// TSV header matching [`ScoreReport::tsv_row`].
    pub const TSV_HEADER: &'static str = "tp\tfp\tfn\tprecision\trecall\tf1";

    /// Counts, then P/R/F1 as percentages with two decimals.
    pub fn tsv_row(&self) -> String {
        format!(
            "{}\t{}\t{}\t{:.2}\t{:.2}\t{:.2}",
            self.tp,
            self.fp,
            self.fn_,
            self.precision * 100.0,
            self.recall * 100.0,
            self.f1 * 100.0
        )
    }
}

/// Scores one label sequence against another, decoded as a single stream.
pub fn score_spans(gold: &[Label], pred: &[Label]) -> Result<ScoreReport> {
    check_len(gold.len(), pred.len())?;
    Ok(ScoreReport::from_spans(&extract_spans(gold), &extract_spans(pred)))
}

/// Scores corpus-aligned label sequences, decoding each sentence separately.
pub fn score_corpus(corpus: &Corpus, gold: &[Label], pred: &[Label]) -> Result<ScoreReport> {
    check_len(gold.len(), pred.len())?;
    Ok(ScoreReport::from_spans(
        &corpus_spans(corpus, gold)?,
        &corpus_spans(corpus, pred)?,
    ))
}

/// Outcome counts for one connective surface form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectiveErrorRow {
    pub form: String,
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl ConnectiveErrorRow {
    pub fn new(form: impl Into<String>, tp: usize, tn: usize, fp: usize, fn_: usize) -> Self {
        ConnectiveErrorRow {
            form: form.into(),
            tp,
            tn,
            fp,
            fn_,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// `(tp + tn) / (tp + tn + fp + fn)`, 0 for an empty row.
    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            n => (self.tp + self.tn) as f64 / n as f64,
        }
    }

    pub const TSV_HEADER: &'static str = "form\ttp\ttn\tfp\tfn\taccuracy";

    pub fn tsv_row(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{:.2}",
            self.form,
            self.tp,
            self.tn,
            self.fp,
            self.fn_,
            self.accuracy() * 100.0
        )
    }
}

/// Per-form error counts, most frequent forms first (ties by form).
///
/// A row exists for every surface form that is a gold or predicted span.
/// TP counts gold spans of the form predicted exactly, FN the gold spans
/// missed, FP predicted spans with no gold match. TN counts occurrences of
/// the form's token sequence lying entirely outside every gold and
/// predicted span.
pub fn error_report(corpus: &Corpus, gold: &[Label], pred: &[Label]) -> Result<Vec<ConnectiveErrorRow>> {
    check_len(gold.len(), pred.len())?;
    let forms: Vec<&str> = corpus.tokens().map(|t| t.form.as_str()).collect();
    let surface = |s: &Span| forms[s.start..=s.end].join(" ");

    let gold_spans = corpus_spans(corpus, gold)?;
    let pred_spans = corpus_spans(corpus, pred)?;
    let gold_set: HashSet<Span> = gold_spans.iter().copied().collect();
    let pred_set: HashSet<Span> = pred_spans.iter().copied().collect();

    let mut rows: BTreeMap<String, ConnectiveErrorRow> = BTreeMap::new();
    fn row(rows: &mut BTreeMap<String, ConnectiveErrorRow>, form: String) -> &mut ConnectiveErrorRow {
        rows.entry(form.clone())
            .or_insert_with(|| ConnectiveErrorRow::new(form, 0, 0, 0, 0))
    }
    for s in &gold_spans {
        let r = row(&mut rows, surface(s));
        if pred_set.contains(s) {
            r.tp += 1;
        } else {
            r.fn_ += 1;
        }
    }
    for s in &pred_spans {
        if !gold_set.contains(s) {
            row(&mut rows, surface(s)).fp += 1;
        }
    }

    // True negatives: unlabelled occurrences, matched sentence by sentence.
    let covered: Vec<bool> = gold
        .iter()
        .zip(pred)
        .map(|(g, p)| g.is_connective() || p.is_connective())
        .collect();
    let keys: Vec<String> = rows.keys().cloned().collect();
    let mut by_first: HashMap<&str, Vec<(Vec<&str>, &String)>> = HashMap::new();
    for key in &keys {
        let parts: Vec<&str> = key.split(' ').collect();
        by_first.entry(parts[0]).or_default().push((parts, key));
    }
    let mut offset = 0;
    for sentence in corpus.sentences() {
        let end = offset + sentence.len();
        for i in offset..end {
            let Some(candidates) = by_first.get(forms[i]) else {
                continue;
            };
            for (parts, key) in candidates {
                let stop = i + parts.len();
                if stop <= end && forms[i..stop] == parts[..] && !covered[i..stop].iter().any(|&c| c) {
                    rows.get_mut(*key).expect("row exists").tn += 1;
                }
            }
        }
        offset = end;
    }

    let mut out: Vec<ConnectiveErrorRow> = rows.into_values().collect();
    out.sort_by(|a, b| b.total().cmp(&a.total()).then_with(|| a.form.cmp(&b.form)));
    Ok(out)
}

/// Wall-clock cost of featurizing and labelling a corpus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InferenceTiming {
    /// Median over the repetitions.
    pub seconds: f64,
    pub tokens_per_second: f64,
    pub repetitions: usize,
}

/// Times featurize + predict over the whole corpus `repetitions` times and
/// reports the median. File I/O is not included.
pub fn time_inference<F: Scalar>(model: &GbdtModel<F>, corpus: &Corpus, repetitions: usize) -> Result<InferenceTiming> {
    if repetitions == 0 {
        return Err(Error::Contract("repetitions must be at least 1".into()));
    }
    let mut samples = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        let start = Instant::now();
        let labels = model.predict_labels(corpus)?;
        let elapsed = start.elapsed().as_secs_f64();
        std::hint::black_box(labels);
        samples.push(elapsed.max(f64::MIN_POSITIVE));
    }
    samples.sort_by(f64::total_cmp);
    let mid = samples.len() / 2;
    let seconds = if samples.len() % 2 == 1 {
        samples[mid]
    } else {
        (samples[mid - 1] + samples[mid]) / 2.0
    };
    Ok(InferenceTiming {
        seconds,
        tokens_per_second: corpus.token_count() as f64 / seconds,
        repetitions,
    })
}
