use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use condet::corpus::{corpus_stats, load_corpus, write_predictions};
use condet::eval::{error_report, score_corpus, time_inference, ConnectiveErrorRow, ScoreReport};
use condet::model_store::{model_from_str, save_model};
use condet::tuning::{grid_search, CvResult, ParamGrid, DEFAULT_FOLDS};
use condet::{Corpus, Error, Format, GbdtModel, Hyperparams, ImportanceKind, Scalar, VerbPolicy};

#[derive(Parser)]
#[command(
    name = "condet",
    version,
    about = "Discourse connective detection with gradient-boosted trees"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print label counts and the connective proportion of a corpus.
    Stats {
        corpus: PathBuf,
        #[arg(long)]
        format: Option<Format>,
    },
    /// Train a model and write it as JSON.
    Train(TrainArgs),
    /// Grid-search hyperparameters with k-fold cross-validation.
    Tune(TuneArgs),
    /// Label a corpus with a trained model.
    Predict(PredictArgs),
    /// Exact-span precision, recall and F1 of predictions against gold.
    Score(PairArgs),
    /// Per-connective TP/TN/FP/FN table.
    Report(PairArgs),
    /// Rank the features of a trained model.
    Importance {
        #[arg(long)]
        model: PathBuf,
        /// gain or split_count
        #[arg(long, default_value = "gain")]
        kind: ImportanceKind,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Pdtb,
    PdtbWeighted,
    Tdb,
    TdbWeighted,
}

#[derive(Clone, Copy, ValueEnum)]
enum Precision {
    F64,
    F32,
}

#[derive(Args)]
struct PolicyArgs {
    /// Comma-separated UPOS tags counted as verbs.
    #[arg(long, value_delimiter = ',', default_value = "VERB")]
    verb_tags: Vec<String>,
    /// Also count AUX as a verb.
    #[arg(long)]
    include_aux: bool,
}

impl PolicyArgs {
    fn policy(&self) -> Result<VerbPolicy, Failure> {
        VerbPolicy::from_tags(self.verb_tags.iter().map(String::as_str), self.include_aux).map_err(Failure::Input)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    train: PathBuf,
    /// Where to write the model file.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    format: Option<Format>,
    /// Hyperparameter file, e.g. the output of `tune`.
    #[arg(long, conflicts_with = "preset")]
    params: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    n_estimators: Option<usize>,
    #[arg(long)]
    max_delta_step: Option<f64>,
    #[arg(long)]
    min_child_weight: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Use inverse-frequency class weights.
    #[arg(long)]
    weighted: bool,
    #[arg(long, value_enum, default_value = "f64")]
    precision: Precision,
    #[command(flatten)]
    policy: PolicyArgs,
}

#[derive(Args)]
struct TuneArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    format: Option<Format>,
    /// Grid file; the built-in grid is used when absent.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long, short, default_value_t = DEFAULT_FOLDS)]
    k: usize,
    #[arg(long)]
    weighted: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Where to write the winning hyperparameters.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    policy: PolicyArgs,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    format: Option<Format>,
    /// Print median inference time and throughput.
    #[arg(long)]
    time: bool,
    #[arg(long, default_value_t = 5)]
    reps: usize,
}

#[derive(Args)]
struct PairArgs {
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    format: Option<Format>,
}

enum Failure {
    Input(String),
    Compute(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_input_error() {
            Failure::Input(e.to_string())
        } else {
            Failure::Compute(e.to_string())
        }
    }
}

type CmdResult = Result<(), Failure>;

fn load(path: &Path, format: Option<Format>) -> Result<Corpus, Failure> {
    Ok(load_corpus(path, format.unwrap_or_else(|| Format::from_path(path)))?)
}

fn cmd_stats(path: &Path, format: Option<Format>) -> CmdResult {
    let corpus = load(path, format)?;
    let s = corpus_stats(&corpus);
    println!("documents\t{}", corpus.documents.len());
    println!("sentences\t{}", corpus.sentence_count());
    println!("tokens\t{}", s.total());
    println!("B-Conn\t{}", s.count_b);
    println!("I-Conn\t{}", s.count_i);
    println!("O\t{}", s.count_o);
    println!("connective proportion\t{}%", s.percent_display());
    Ok(())
}

fn hyperparams(args: &TrainArgs) -> Result<Hyperparams, Failure> {
    let mut hp = match (&args.params, args.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
            Hyperparams::from_json(&text)?
        }
        (None, Some(Preset::Pdtb)) | (None, None) => Hyperparams::pdtb(),
        (None, Some(Preset::PdtbWeighted)) => Hyperparams::pdtb_weighted(),
        (None, Some(Preset::Tdb)) => Hyperparams::tdb(),
        (None, Some(Preset::TdbWeighted)) => Hyperparams::tdb_weighted(),
    };
    if let Some(v) = args.learning_rate {
        hp.learning_rate = v;
    }
    if let Some(v) = args.max_depth {
        hp.max_depth = v;
    }
    if let Some(v) = args.n_estimators {
        hp.n_estimators = v;
    }
    if let Some(v) = args.max_delta_step {
        hp.max_delta_step = v;
    }
    if let Some(v) = args.min_child_weight {
        hp.min_child_weight = v;
    }
    if let Some(v) = args.lambda {
        hp.lambda_reg = v;
    }
    if let Some(v) = args.gamma {
        hp.gamma = v;
    }
    if let Some(v) = args.seed {
        hp.seed = v;
    }
    hp.validate()?;
    Ok(hp)
}

fn train_as<F: Scalar>(corpus: &Corpus, hp: &Hyperparams, args: &TrainArgs, policy: &VerbPolicy) -> CmdResult {
    let (model, trace) = GbdtModel::<F>::fit_traced(corpus, hp, args.weighted, policy)?;
    save_model(&model, &args.model)?;
    println!("hyperparameters\t{hp}");
    println!("rounds\t{}", model.n_rounds());
    println!(
        "final training loss\t{:.6}",
        trace.last().map_or(f64::NAN, |l| l.as_f64())
    );
    println!("model\t{}", args.model.display());
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> CmdResult {
    let hp = hyperparams(args)?;
    let policy = args.policy.policy()?;
    let corpus = load(&args.train, args.format)?;
    match args.precision {
        Precision::F64 => train_as::<f64>(&corpus, &hp, args, &policy),
        Precision::F32 => train_as::<f32>(&corpus, &hp, args, &policy),
    }
}

fn cmd_tune(args: &TuneArgs) -> CmdResult {
    let grid = match &args.grid {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
            ParamGrid::from_json(&text)?
        }
        None => ParamGrid::default(),
    };
    let policy = args.policy.policy()?;
    let corpus = load(&args.train, args.format)?;
    let (best, mut results) = grid_search(&corpus, &grid, args.k, args.weighted, args.seed, &policy)?;
    results.sort_by_key(|r| r.rank);
    println!("{}", CvResult::TSV_HEADER);
    for r in &results {
        println!("{}", r.tsv_row());
    }
    fs::write(&args.out, best.to_json() + "\n").map_err(|e| Failure::Input(format!("{}: {e}", args.out.display())))?;
    println!("best\t{best}");
    Ok(())
}

fn predict_as<F: Scalar>(text: &str, args: &PredictArgs) -> CmdResult {
    let model: GbdtModel<F> = model_from_str(text)?;
    model.check_schema()?;
    let format = args.format.unwrap_or_else(|| Format::from_path(&args.input));
    let corpus = load(&args.input, Some(format))?;
    let labels = model.predict_labels(&corpus)?;
    write_predictions(&corpus, &labels, &args.output, format)?;
    println!("tokens\t{}", labels.len());
    if args.time {
        let timing = time_inference(&model, &corpus, args.reps)?;
        println!("inference seconds\t{:.6}", timing.seconds);
        println!("tokens per second\t{:.0}", timing.tokens_per_second);
    }
    Ok(())
}

fn read_model_text(path: &Path) -> Result<(String, String), Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Failure::Input(e.to_string()))?;
    let scalar = value
        .get("scalar")
        .and_then(|s| s.as_str())
        .unwrap_or("f64")
        .to_string();
    Ok((text, scalar))
}

fn cmd_predict(args: &PredictArgs) -> CmdResult {
    let (text, scalar) = read_model_text(&args.model)?;
    match scalar.as_str() {
        "f32" => predict_as::<f32>(&text, args),
        _ => predict_as::<f64>(&text, args),
    }
}

fn load_pair(args: &PairArgs) -> Result<(Corpus, Corpus), Failure> {
    let gold = load(&args.gold, args.format)?;
    let pred = load(&args.pred, args.format)?;
    let shape = |c: &Corpus| c.sentences().map(|s| s.len()).collect::<Vec<_>>();
    if shape(&gold) != shape(&pred) {
        return Err(Failure::Input(format!(
            "{} and {} do not have the same sentences and tokens",
            args.gold.display(),
            args.pred.display()
        )));
    }
    Ok((gold, pred))
}

fn cmd_score(args: &PairArgs) -> CmdResult {
    let (gold, pred) = load_pair(args)?;
    let report = score_corpus(&gold, &gold.labels(), &pred.labels())?;
    println!("{}", ScoreReport::TSV_HEADER);
    println!("{}", report.tsv_row());
    Ok(())
}

fn cmd_report(args: &PairArgs) -> CmdResult {
    let (gold, pred) = load_pair(args)?;
    println!("{}", ConnectiveErrorRow::TSV_HEADER);
    for row in error_report(&gold, &gold.labels(), &pred.labels())? {
        println!("{}", row.tsv_row());
    }
    Ok(())
}

fn importance_as<F: Scalar>(text: &str, kind: ImportanceKind) -> CmdResult {
    let model: GbdtModel<F> = model_from_str(text)?;
    println!("rank\tfeature\t{kind}");
    for (rank, (name, value)) in model.feature_importance(kind).into_iter().enumerate() {
        println!("{}\t{name}\t{value}", rank + 1);
    }
    Ok(())
}

fn cmd_importance(path: &Path, kind: ImportanceKind) -> CmdResult {
    let (text, scalar) = read_model_text(path)?;
    match scalar.as_str() {
        "f32" => importance_as::<f32>(&text, kind),
        _ => importance_as::<f64>(&text, kind),
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("CONDET_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| Failure::Input(format!("CONDET_THREADS must be a non-negative integer, got {raw:?}")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Compute(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> CmdResult {
    configure_threads()?;
    match &cli.command {
        Command::Stats { corpus, format } => cmd_stats(corpus, *format),
        Command::Train(args) => cmd_train(args),
        Command::Tune(args) => cmd_tune(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Score(args) => cmd_score(args),
        Command::Report(args) => cmd_report(args),
        Command::Importance { model, kind } => cmd_importance(model, *kind),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Compute(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
