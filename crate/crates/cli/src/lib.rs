//! Command-line driver: training, evaluation, single-question and interactive
//! classification, gradient checking and hidden-size sweeps.
//!
//! Exit codes: 0 success, 1 gradient check failed, 2 configuration or data
//! error, 3 training diverged.

pub mod config;
pub mod container;

use std::fs::File;
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use ilstm_core::dataset::{display_name, load_qa, load_trec, scan_labels, LabelTaxonomy, TREC_MAIN_CLASSES};
use ilstm_core::models::{condition_vector, embed_all, AnswerVocab, Classifier, ModelKind, Prediction, QaExample, Responder};
use ilstm_core::numerics::Rng;
use ilstm_core::textpipe::{clean_and_tokenize, embed, load_glove_dim, EmbeddingTable};
use ilstm_core::trainer::{
    evaluate, format_percent, grad_check, sweep_h, train_classifier, train_unlabeled, write_epoch_csv, CheckKind, EpochRecord,
    GradCheckReport,
};
use ilstm_core::Error;

pub use config::RunConfig;
pub use container::ModelContainer;

pub const EXIT_OK: u8 = 0;
pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "ilstm", version, about = "LSTM question intent classifier")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a classifier and write the model file plus an epoch CSV.
    Train(TrainArgs),
    /// Report accuracy of a saved classifier on a labelled file.
    Eval(EvalArgs),
    /// Classify one question.
    Classify(ClassifyArgs),
    /// Classify questions read from standard input, one per line.
    Repl(ReplArgs),
    /// Compare analytic and finite-difference gradients on random instances.
    Gradcheck(GradcheckArgs),
    /// Train one classifier per hidden size and print the accuracy table.
    Sweep(SweepArgs),
    /// Train the answer generator on question/answer pairs.
    TrainResponder(TrainResponderArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub model: Option<ModelKind>,
    /// Hidden size; overrides the config.
    #[arg(long = "h")]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Epoch CSV path; defaults to the model path with a `.csv` extension.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EmbeddingArgs {
    /// Config file supplying `glove_path` (and `test_path` for eval).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Embedding file; overrides the config.
    #[arg(long)]
    pub glove: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub model_file: PathBuf,
    /// Labelled question file; overrides the config's `test_path`.
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[command(flatten)]
    pub embeddings: EmbeddingArgs,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    pub model_file: PathBuf,
    pub question: String,
    #[command(flatten)]
    pub embeddings: EmbeddingArgs,
}

#[derive(Debug, Args)]
pub struct ReplArgs {
    pub model_file: PathBuf,
    #[arg(long)]
    pub responder: Option<PathBuf>,
    #[command(flatten)]
    pub embeddings: EmbeddingArgs,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub model: Option<ModelKind>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// CSV output path; the CSV goes to standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainResponderArgs {
    /// Config file supplying `glove_path` and `qa_path`.
    #[arg(long)]
    pub config: PathBuf,
    /// Trained two-head classifier whose outputs condition the generator.
    #[arg(long)]
    pub classifier: PathBuf,
    #[arg(long = "h")]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

/// A command's failure: message plus process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Diverged { .. } | Error::NonFinite(_) => EXIT_NUMERIC,
            _ => EXIT_INPUT,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::input(e.to_string())
    }
}

type CmdResult = std::result::Result<u8, Failure>;

/// Runs a parsed command. Normal output goes to `out`; `input` feeds the REPL.
pub fn run(cli: Cli, out: &mut dyn Write, input: &mut dyn BufRead) -> CmdResult {
    match cli.command {
        Command::Train(a) => cmd_train(&a, out),
        Command::Eval(a) => cmd_eval(&a, out),
        Command::Classify(a) => cmd_classify(&a, out),
        Command::Repl(a) => cmd_repl(&a, input, out),
        Command::Gradcheck(a) => cmd_gradcheck(&a, out),
        Command::Sweep(a) => cmd_sweep(&a, out),
        Command::TrainResponder(a) => cmd_train_responder(&a, out),
    }
}

fn load_embeddings(path: &Path, dim: usize) -> Result<EmbeddingTable<f64>, Failure> {
    info!("loading embeddings from {}", path.display());
    Ok(load_glove_dim(path, dim)?)
}

fn embeddings_for(args: &EmbeddingArgs, dim: usize) -> Result<(EmbeddingTable<f64>, Option<RunConfig>), Failure> {
    let cfg = args.config.as_ref().map(RunConfig::load).transpose()?;
    let path = match (&args.glove, &cfg) {
        (Some(p), _) => {
            if !p.exists() {
                return Err(Failure::input(format!("embedding file {} does not exist", p.display())));
            }
            p.clone()
        }
        (None, Some(c)) => c.require("glove_path", &c.glove_path)?.to_path_buf(),
        (None, None) => return Err(Failure::input("no embedding file: pass --glove or --config")),
    };
    Ok((load_embeddings(&path, dim)?, cfg))
}

/// Taxonomy of a training file, warning when it is not TREC-shaped.
fn taxonomy_of(path: &Path) -> Result<LabelTaxonomy, Failure> {
    let taxonomy = LabelTaxonomy::from_labels(scan_labels(path)?)?;
    if let Err(e) = taxonomy.validate_trec() {
        warn!("{}: {e}", path.display());
    }
    Ok(taxonomy)
}

fn write_csv(path: &Path, records: &[EpochRecord]) -> Result<(), Failure> {
    let file = File::create(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    write_epoch_csv(records, BufWriter::new(file))?;
    Ok(())
}

fn print_accuracy(out: &mut dyn Write, label: &str, main: f64, sub: Option<f64>) -> std::io::Result<()> {
    writeln!(out, "{label} main accuracy: {}", format_percent(main))?;
    if let Some(s) = sub {
        writeln!(out, "{label} sub accuracy: {}", format_percent(s))?;
    }
    Ok(())
}

fn cmd_train(a: &TrainArgs, out: &mut dyn Write) -> CmdResult {
    let mut cfg = RunConfig::load(&a.config)?;
    if let Some(k) = a.model {
        cfg.model = k;
    }
    if let Some(h) = a.hidden {
        cfg.train.hidden = h;
    }
    if let Some(s) = a.seed {
        cfg.train.seed = s;
    }
    cfg.validate()?;
    let glove = load_embeddings(cfg.require("glove_path", &cfg.glove_path)?, cfg.embedding_dim)?;
    let train_path = cfg.require("train_path", &cfg.train_path)?;
    let taxonomy = taxonomy_of(train_path)?;
    let train_q = load_trec(train_path, &taxonomy)?;
    let test_q = cfg.test_path.as_ref().map(|p| load_trec(p, &taxonomy)).transpose()?;
    let train_data = embed_all(&glove, &train_q);
    let test_data = test_q.as_ref().map(|t| embed_all(&glove, t));
    info!("{} out-of-vocabulary tokens", glove.oov_count());

    let (model, records) = train_classifier(
        cfg.model,
        &cfg.train,
        taxonomy.num_main(),
        taxonomy.num_fine(),
        &train_data,
        test_data.as_deref(),
    )?;
    ModelContainer::from_classifier(&model, &taxonomy).save(&a.out)?;
    let csv = a.csv.clone().unwrap_or_else(|| a.out.with_extension("csv"));
    write_csv(&csv, &records)?;
    if let Some(last) = records.last() {
        print_accuracy(out, "train", last.train.main, last.train.sub)?;
        if let Some(t) = last.test {
            print_accuracy(out, "test", t.main, t.sub)?;
        }
    }
    writeln!(out, "wrote {} and {}", a.out.display(), csv.display())?;
    Ok(EXIT_OK)
}

fn load_classifier(path: &Path) -> Result<(Classifier<f64>, LabelTaxonomy), Failure> {
    Ok(ModelContainer::load(path)?.to_classifier()?)
}

fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> CmdResult {
    let (model, taxonomy) = load_classifier(&a.model_file)?;
    let (glove, cfg) = embeddings_for(&a.embeddings, model.input())?;
    let test_path = match (&a.test, &cfg) {
        (Some(p), _) => p.clone(),
        (None, Some(c)) => c.require("test_path", &c.test_path)?.to_path_buf(),
        (None, None) => return Err(Failure::input("no test file: pass --test or --config")),
    };
    let questions = load_trec(&test_path, &taxonomy).map_err(|e| match e {
        Error::UnknownLabel { label, line } => Failure::input(format!(
            "{}:{line}: label {label:?} is not in the model's taxonomy",
            test_path.display()
        )),
        other => other.into(),
    })?;
    let data = embed_all(&glove, &questions);
    let acc = match &model {
        Classifier::One(m) => evaluate(m, &data)?,
        Classifier::Two(m) => evaluate(m, &data)?,
    };
    print_accuracy(out, "test", acc.main, acc.sub)?;
    Ok(EXIT_OK)
}

fn describe(pred: &Prediction<f64>, taxonomy: &LabelTaxonomy) -> String {
    let main = pred.main.argmax();
    let name = &taxonomy.main_classes()[main];
    let mut s = format!("main: {name} ({}) p={:.4}", display_name(name), pred.main[main]);
    if let Some(sub) = &pred.sub {
        let k = sub.argmax();
        s.push_str(&format!("\nsub: {} p={:.4}", taxonomy.fine_labels()[k], sub[k]));
    }
    s
}

fn cmd_classify(a: &ClassifyArgs, out: &mut dyn Write) -> CmdResult {
    let (model, taxonomy) = load_classifier(&a.model_file)?;
    let tokens = clean_and_tokenize(&a.question);
    if tokens.is_empty() {
        return Err(Failure::input("question is empty after cleaning"));
    }
    let (glove, _) = embeddings_for(&a.embeddings, model.input())?;
    let pred = model.predict(&embed(&glove, &tokens))?;
    writeln!(out, "tokens: {}", tokens.join(" "))?;
    writeln!(out, "{}", describe(&pred, &taxonomy))?;
    Ok(EXIT_OK)
}

fn load_responder(path: &Path, model: &Classifier<f64>, taxonomy: &LabelTaxonomy) -> Result<Responder<f64>, Failure> {
    let r = ModelContainer::load(path)?.to_responder()?;
    if model.kind() != ModelKind::Two {
        return Err(Failure::input("the answer generator needs a two-head classifier"));
    }
    if r.cond_width() != taxonomy.num_main() + taxonomy.num_fine() || r.input() != model.input() {
        return Err(Failure::input(format!(
            "{} does not fit this classifier (conditioning width {}, input {})",
            path.display(),
            r.cond_width(),
            r.input()
        )));
    }
    Ok(r)
}

fn cmd_repl(a: &ReplArgs, input: &mut dyn BufRead, out: &mut dyn Write) -> CmdResult {
    let (model, taxonomy) = load_classifier(&a.model_file)?;
    let responder = a.responder.as_ref().map(|p| load_responder(p, &model, &taxonomy)).transpose()?;
    let (glove, _) = embeddings_for(&a.embeddings, model.input())?;
    let mut line = String::new();
    loop {
        write!(out, "> ")?;
        out.flush()?;
        line.clear();
        if input.read_line(&mut line)? == 0 {
            writeln!(out)?;
            break;
        }
        let question = line.trim();
        if question.is_empty() {
            continue;
        }
        if question == "exit" || question == "quit" {
            break;
        }
        let tokens = clean_and_tokenize(question);
        if tokens.is_empty() {
            writeln!(out, "error: question is empty after cleaning")?;
            continue;
        }
        let xs = embed(&glove, &tokens);
        match model.predict(&xs) {
            Ok(pred) => {
                writeln!(out, "{}", describe(&pred, &taxonomy))?;
                if let (Some(r), Some(sub)) = (&responder, &pred.sub) {
                    match r.generate(&condition_vector(&pred.main, sub), &xs) {
                        Ok(answer) => writeln!(out, "answer: {}", answer.join(" "))?,
                        Err(e) => writeln!(out, "error: {e}")?,
                    }
                }
            }
            Err(e) => writeln!(out, "error: {e}")?,
        }
    }
    Ok(EXIT_OK)
}

/// Runs every gradient check kind and merges the reports.
pub fn full_grad_check(trials: usize, tolerance: f64, seed: u64) -> ilstm_core::Result<GradCheckReport> {
    let mut report: Option<GradCheckReport> = None;
    for kind in CheckKind::ALL {
        let r = grad_check(kind, trials, tolerance, seed)?;
        report = Some(match report {
            Some(acc) => acc.merge(r),
            None => r,
        });
    }
    Ok(report.expect("at least one check kind"))
}

fn cmd_gradcheck(a: &GradcheckArgs, out: &mut dyn Write) -> CmdResult {
    if a.tolerance.is_nan() || a.tolerance <= 0.0 || a.trials == 0 {
        return Err(Failure::input("tolerance and trials must be positive"));
    }
    let report = full_grad_check(a.trials, a.tolerance, a.seed)?;
    writeln!(out, "{report}")?;
    Ok(if report.passed() { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn cmd_sweep(a: &SweepArgs, out: &mut dyn Write) -> CmdResult {
    let mut cfg = RunConfig::load(&a.config)?;
    if let Some(k) = a.model {
        cfg.model = k;
    }
    if let Some(s) = a.seed {
        cfg.train.seed = s;
    }
    let glove = load_embeddings(cfg.require("glove_path", &cfg.glove_path)?, cfg.embedding_dim)?;
    let train_path = cfg.require("train_path", &cfg.train_path)?;
    let taxonomy = taxonomy_of(train_path)?;
    let train_data = embed_all(&glove, &load_trec(train_path, &taxonomy)?);
    let test_data = embed_all(&glove, &load_trec(cfg.require("test_path", &cfg.test_path)?, &taxonomy)?);
    let table = sweep_h(
        cfg.model,
        &cfg.hs,
        &cfg.train,
        taxonomy.num_main(),
        taxonomy.num_fine(),
        &train_data,
        &test_data,
    )?;
    write!(out, "{}", table.to_text())?;
    match &a.out {
        Some(p) => {
            std::fs::write(p, table.to_csv()).map_err(|e| Failure::input(format!("{}: {e}", p.display())))?;
            writeln!(out, "wrote {}", p.display())?;
        }
        None => write!(out, "\n{}", table.to_csv())?,
    }
    Ok(EXIT_OK)
}

fn cmd_train_responder(a: &TrainResponderArgs, out: &mut dyn Write) -> CmdResult {
    let mut cfg = RunConfig::load(&a.config)?;
    if let Some(h) = a.hidden {
        cfg.train.hidden = h;
    }
    if let Some(s) = a.seed {
        cfg.train.seed = s;
    }
    cfg.validate()?;
    let (model, taxonomy) = load_classifier(&a.classifier)?;
    if model.kind() != ModelKind::Two {
        return Err(Failure::input("the answer generator needs a two-head classifier"));
    }
    if taxonomy.main_classes() != TREC_MAIN_CLASSES {
        warn!("classifier taxonomy is not the TREC one");
    }
    let glove = load_embeddings(cfg.require("glove_path", &cfg.glove_path)?, model.input())?;
    let pairs = load_qa(cfg.require("qa_path", &cfg.qa_path)?)?;
    let vocab = AnswerVocab::from_answers(pairs.iter().map(|p| p.answer.clone()));
    let mut examples = Vec::with_capacity(pairs.len());
    for p in &pairs {
        let xs = embed(&glove, &p.question);
        let pred = model.predict(&xs)?;
        let sub = pred.sub.as_ref().expect("two-head classifier");
        examples.push(QaExample {
            cond: condition_vector(&pred.main, sub),
            answer: vocab.encode(&p.answer)?,
            xs,
        });
    }
    let cond_width = taxonomy.num_main() + taxonomy.num_fine();
    let mut rng = Rng::seed_from_u64(cfg.train.seed);
    let responder = Responder::new(cfg.train.hidden, model.input(), cond_width, vocab, &mut rng)?;
    let (responder, records) = train_unlabeled(responder, &examples, None, &cfg.train)?;
    ModelContainer::from_responder(&responder, &taxonomy).save(&a.out)?;
    let csv = a.csv.clone().unwrap_or_else(|| a.out.with_extension("csv"));
    write_csv(&csv, &records)?;
    if let Some(last) = records.last() {
        writeln!(out, "final loss {:.4}, token accuracy {}", last.train_loss, format_percent(last.train.main))?;
    }
    writeln!(out, "wrote {} and {}", a.out.display(), csv.display())?;
    Ok(EXIT_OK)
}
