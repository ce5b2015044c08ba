//! Token-level corpus files and label statistics.
//!
//! Two on-disk formats are understood:
//!
//! * `conllu`: ten tab-separated CoNLL-U columns. The gold label sits in the
//!   MISC column under `Conn=` (`B-Conn` / `I-Conn`, absent means `O`).
//!   `# newdoc id = ...` comments open documents. Multi-word token ranges
//!   (`3-4`) and empty nodes (`5.1`) are skipped.
//! * `tsv`: three tab-separated columns `FORM UPOS LABEL`, blank lines between
//!   sentences and `# doc = ...` lines between documents.
//!
//! Sentences that appear before any document marker belong to an implicit
//! document named [`DEFAULT_DOC_ID`].

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_DOC_ID: &str = "doc0";

const CONLLU_COLUMNS: usize = 10;
const CONLLU_MISC: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Label {
    O,
    BConn,
    IConn,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::O, Label::BConn, Label::IConn];
    pub const COUNT: usize = 3;

    pub fn as_str(self) -> &'static str {
        match self {
            Label::O => "O",
            Label::BConn => "B-Conn",
            Label::IConn => "I-Conn",
        }
    }

    pub fn index(self) -> usize {
        match self {
            Label::O => 0,
            Label::BConn => 1,
            Label::IConn => 2,
        }
    }

    pub fn from_index(index: usize) -> Option<Label> {
        Label::ALL.get(index).copied()
    }

    pub fn is_connective(self) -> bool {
        self != Label::O
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "O" => Ok(Label::O),
            "B-Conn" => Ok(Label::BConn),
            "I-Conn" => Ok(Label::IConn),
            other => Err(Error::BadLabel(other.to_string())),
        }
    }
}

impl TryFrom<String> for Label {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Label> for String {
    fn from(label: Label) -> String {
        label.as_str().to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub form: String,
    pub upos: String,
    pub label: Label,
}

impl Token {
    pub fn new(form: impl Into<String>, upos: impl Into<String>, label: Label) -> Self {
        Token {
            form: form.into(),
            upos: upos.into(),
            label,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn new(tokens: Vec<Token>) -> Self {
        Sentence { tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        self.tokens.iter().map(|t| t.label)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub sentences: Vec<Sentence>,
}

impl Document {
    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }
}

/// Documents of sentences of tokens, in file order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub documents: Vec<Document>,
}

impl Corpus {
    pub fn new(documents: Vec<Document>) -> Self {
        Corpus { documents }
    }

    /// Wraps loose sentences in a single default document. An empty list
    /// gives an empty corpus.
    pub fn from_sentences(sentences: Vec<Sentence>) -> Self {
        if sentences.is_empty() {
            return Corpus::default();
        }
        Corpus::new(vec![Document {
            id: DEFAULT_DOC_ID.to_string(),
            sentences,
        }])
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn sentences(&self) -> impl Iterator<Item = &Sentence> + '_ {
        self.documents.iter().flat_map(|d| d.sentences.iter())
    }

    pub fn tokens(&self) -> impl Iterator<Item = &Token> + '_ {
        self.sentences().flat_map(|s| s.tokens.iter())
    }

    pub fn token_count(&self) -> usize {
        self.documents.iter().map(Document::token_count).sum()
    }

    pub fn sentence_count(&self) -> usize {
        self.documents.iter().map(|d| d.sentences.len()).sum()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.tokens().map(|t| t.label).collect()
    }

    /// Copy of the corpus with its labels replaced, token by token.
    pub fn with_labels(&self, labels: &[Label]) -> Result<Corpus> {
        let total = self.token_count();
        if labels.len() != total {
            return Err(Error::Contract(format!(
                "{} labels given for a corpus of {} tokens",
                labels.len(),
                total
            )));
        }
        let mut out = self.clone();
        let slots = out
            .documents
            .iter_mut()
            .flat_map(|d| d.sentences.iter_mut())
            .flat_map(|s| s.tokens.iter_mut());
        for (token, &label) in slots.zip(labels) {
            token.label = label;
        }
        Ok(out)
    }

    /// Sub-corpus made of the given documents, in the given order.
    pub fn select_documents(&self, indices: &[usize]) -> Corpus {
        Corpus::new(indices.iter().map(|&i| self.documents[i].clone()).collect())
    }

    /// Checks the structural invariants: unique document ids, no empty
    /// documents or sentences, non-empty forms.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for doc in &self.documents {
            if !seen.insert(doc.id.as_str()) {
                return Err(Error::Contract(format!("duplicate document id {:?}", doc.id)));
            }
            if doc.sentences.is_empty() {
                return Err(Error::Contract(format!("document {:?} is empty", doc.id)));
            }
            for sentence in &doc.sentences {
                if sentence.is_empty() {
                    return Err(Error::Contract(format!(
                        "document {:?} contains an empty sentence",
                        doc.id
                    )));
                }
                if sentence.tokens.iter().any(|t| t.form.is_empty()) {
                    return Err(Error::Contract(format!(
                        "document {:?} contains an empty token form",
                        doc.id
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Conllu,
    Tsv,
}

impl Format {
    /// `.conllu` files are CoNLL-U, anything else is TSV.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("conllu") => Format::Conllu,
            _ => Format::Tsv,
        }
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "conllu" => Ok(Format::Conllu),
            "tsv" => Ok(Format::Tsv),
            other => Err(format!("unknown corpus format {other:?} (expected conllu or tsv)")),
        }
    }
}

pub fn load_corpus(path: impl AsRef<Path>, format: Format) -> Result<Corpus> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&text, format)
}

pub fn parse_corpus(text: &str, format: Format) -> Result<Corpus> {
    let mut builder = Builder::default();
    for (i, raw) in text.split('\n').enumerate() {
        let line_no = i + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        match format {
            Format::Conllu => builder.conllu_line(line, line_no)?,
            Format::Tsv => builder.tsv_line(line, line_no)?,
        }
    }
    builder.finish()
}

#[derive(Default)]
struct Builder {
    documents: Vec<Document>,
    current_doc: Option<(String, usize)>,
    sentences: Vec<Sentence>,
    tokens: Vec<Token>,
    seen_ids: HashSet<String>,
}

impl Builder {
    fn end_sentence(&mut self) {
        if !self.tokens.is_empty() {
            self.sentences.push(Sentence::new(std::mem::take(&mut self.tokens)));
        }
    }

    fn end_document(&mut self) -> Result<()> {
        self.end_sentence();
        let sentences = std::mem::take(&mut self.sentences);
        match self.current_doc.take() {
            Some((id, line)) => {
                if sentences.is_empty() {
                    return Err(Error::Parse {
                        line,
                        message: format!("document {id:?} has no sentences"),
                    });
                }
                self.documents.push(Document { id, sentences });
            }
            None => {
                if !sentences.is_empty() {
                    self.register(DEFAULT_DOC_ID, 1)?;
                    self.documents.push(Document {
                        id: DEFAULT_DOC_ID.to_string(),
                        sentences,
                    });
                }
            }
        }
        Ok(())
    }

    fn register(&mut self, id: &str, line: usize) -> Result<()> {
        if !self.seen_ids.insert(id.to_string()) {
            return Err(Error::Parse {
                line,
                message: format!("duplicate document id {id:?}"),
            });
        }
        Ok(())
    }

    fn start_document(&mut self, id: &str, line: usize) -> Result<()> {
        self.end_document()?;
        if id.is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty document id".to_string(),
            });
        }
        self.register(id, line)?;
        self.current_doc = Some((id.to_string(), line));
        Ok(())
    }

    fn conllu_line(&mut self, line: &str, line_no: usize) -> Result<()> {
        if line.trim().is_empty() {
            self.end_sentence();
            return Ok(());
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(id) = comment_value(comment, &["newdoc id", "newdoc_id"]) {
                self.start_document(id, line_no)?;
            }
            return Ok(());
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != CONLLU_COLUMNS {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {CONLLU_COLUMNS} columns, found {}", cols.len()),
            });
        }
        let id = cols[0];
        if id.contains('-') || id.contains('.') {
            return Ok(());
        }
        if id.parse::<u32>().is_err() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("bad token id {id:?}"),
            });
        }
        let label = misc_label(cols[CONLLU_MISC], line_no)?;
        self.push_token(cols[1], cols[3], label, line_no)
    }

    fn tsv_line(&mut self, line: &str, line_no: usize) -> Result<()> {
        if line.trim().is_empty() {
            self.end_sentence();
            return Ok(());
        }
        if !line.contains('\t') {
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(id) = comment_value(comment, &["doc"]) {
                    self.start_document(id, line_no)?;
                }
                return Ok(());
            }
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 3 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 3 columns, found {}", cols.len()),
            });
        }
        let label = cols[2].parse().map_err(|_| Error::UnknownLabel {
            line: line_no,
            value: cols[2].to_string(),
        })?;
        self.push_token(cols[0], cols[1], label, line_no)
    }

    fn push_token(&mut self, form: &str, upos: &str, label: Label, line_no: usize) -> Result<()> {
        if form.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: "empty token form".to_string(),
            });
        }
        self.tokens.push(Token::new(form, upos, label));
        Ok(())
    }

    fn finish(mut self) -> Result<Corpus> {
        self.end_document()?;
        Ok(Corpus::new(self.documents))
    }
}

/// Parses `# key = value` comment bodies.
fn comment_value<'a>(comment: &'a str, keys: &[&str]) -> Option<&'a str> {
    let (key, value) = comment.split_once('=')?;
    let key = key.trim();
    keys.contains(&key).then(|| value.trim())
}

fn misc_label(misc: &str, line_no: usize) -> Result<Label> {
    if misc == "_" {
        return Ok(Label::O);
    }
    // `Seg=` is the key used by the DISRPT connective releases.
    let value = misc
        .split('|')
        .filter_map(|kv| kv.split_once('='))
        .find(|(k, _)| *k == "Conn")
        .or_else(|| {
            misc.split('|')
                .filter_map(|kv| kv.split_once('='))
                .find(|(k, _)| *k == "Seg")
        })
        .map(|(_, v)| v);
    match value {
        None | Some("_") => Ok(Label::O),
        Some(v) => v.parse().map_err(|_| Error::UnknownLabel {
            line: line_no,
            value: v.to_string(),
        }),
    }
}

/// Serializes a corpus in the given format. An empty corpus yields an empty
/// string.
pub fn render_corpus(corpus: &Corpus, format: Format) -> String {
    let mut out = String::new();
    for doc in &corpus.documents {
        match format {
            Format::Conllu => out.push_str(&format!("# newdoc id = {}\n", doc.id)),
            Format::Tsv => out.push_str(&format!("# doc = {}\n", doc.id)),
        }
        for sentence in &doc.sentences {
            for (i, token) in sentence.tokens.iter().enumerate() {
                match format {
                    Format::Conllu => {
                        let misc = match token.label {
                            Label::O => "_".to_string(),
                            label => format!("Conn={label}"),
                        };
                        out.push_str(&format!(
                            "{}\t{}\t_\t{}\t_\t_\t_\t_\t_\t{}\n",
                            i + 1,
                            token.form,
                            token.upos,
                            misc
                        ));
                    }
                    Format::Tsv => {
                        out.push_str(&format!("{}\t{}\t{}\n", token.form, token.upos, token.label));
                    }
                }
            }
            out.push('\n');
        }
    }
    out
}

pub fn write_corpus(corpus: &Corpus, path: impl AsRef<Path>, format: Format) -> Result<()> {
    let path = path.as_ref();
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(render_corpus(corpus, format).as_bytes())
        .map_err(|e| Error::io(path, e))
}

/// Writes `corpus` with `predictions` substituted for its labels.
pub fn write_predictions(corpus: &Corpus, predictions: &[Label], path: impl AsRef<Path>, format: Format) -> Result<()> {
    let predicted = corpus.with_labels(predictions)?;
    write_corpus(&predicted, path, format)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelStats {
    pub count_b: usize,
    pub count_i: usize,
    pub count_o: usize,
    pub connective_proportion: f64,
}

impl LabelStats {
    pub fn from_counts(count_b: usize, count_i: usize, count_o: usize) -> Self {
        let total = count_b + count_i + count_o;
        let connective_proportion = if total == 0 {
            0.0
        } else {
            (count_b + count_i) as f64 / total as f64
        };
        LabelStats {
            count_b,
            count_i,
            count_o,
            connective_proportion,
        }
    }

    pub fn total(&self) -> usize {
        self.count_b + self.count_i + self.count_o
    }

    /// Proportion as a percentage with two decimals, e.g. `"2.11"`.
    pub fn percent_display(&self) -> String {
        format!("{:.2}", self.connective_proportion * 100.0)
    }
}

pub fn corpus_stats(corpus: &Corpus) -> LabelStats {
    let mut counts = [0usize; Label::COUNT];
    for token in corpus.tokens() {
        counts[token.label.index()] += 1;
    }
    LabelStats::from_counts(
        counts[Label::BConn.index()],
        counts[Label::IConn.index()],
        counts[Label::O.index()],
    )
}
