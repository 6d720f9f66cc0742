//! Command implementations behind the `legalner` binary.
//!
//! Every command writes its human- or machine-readable result to the given
//! writer and reports failure through [`exit_code`].

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use legalner::corpus::{
    bio_to_spans, parse_annotations, parse_conll, parse_documents, parse_stoplist, read_conll, remove_stopwords,
    to_conll_string, tokenize, validate_bio, AlignMode, Annotation, BioMode, ConllSentence, Document, TagSet,
};
use legalner::evaluation::{MatchMode, Report};
use legalner::rng::seeded;
use legalner::training::{build_model, evaluate, train, Checkpoint, Hyperparameters, TrainingSentence};
use legalner::{Error, Result, Tagger};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

pub const LOG_FILE: &str = "train_log.jsonl";

#[derive(Debug, Parser)]
#[command(name = "legalner", version, about = "Bi-LSTM-CRF named-entity tagger for legal text")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert character-offset annotation JSON to BIO CoNLL.
    Convert(ConvertArgs),
    /// Count entity spans per class in one or more datasets.
    Stats(StatsArgs),
    /// Train a tagger and write a checkpoint directory.
    Train(TrainArgs),
    /// Score a checkpoint against a gold CoNLL file.
    Evaluate(EvaluateArgs),
    /// Tag raw text or annotation JSON documents.
    Predict(PredictArgs),
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    pub input: PathBuf,
    pub output: PathBuf,
    /// Reject annotations that do not align to token boundaries (default).
    #[arg(long, conflicts_with = "lenient")]
    pub strict: bool,
    /// Widen misaligned annotations to whole tokens, with a warning.
    #[arg(long)]
    pub lenient: bool,
    /// File of stopwords (one per line) to drop outside entity spans.
    #[arg(long)]
    pub stoplist: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// CoNLL files, or annotation JSON when the name ends in `.json`.
    #[arg(required = true)]
    pub datasets: Vec<PathBuf>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub dev: Option<PathBuf>,
    /// Checkpoint directory; also receives the per-epoch log.
    #[arg(long)]
    pub out: PathBuf,
    /// GloVe-format text vectors for the word table.
    #[arg(long)]
    pub glove: Option<PathBuf>,
    /// Plain text for character-LM pretraining (defaults to the training text).
    #[arg(long)]
    pub lm_corpus: Option<PathBuf>,
    /// Train on train+dev, without early stopping.
    #[arg(long, requires = "dev")]
    pub merge_dev: bool,
    /// Overrides the seed in the config file.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    /// Count any overlap with a same-class gold span as a match.
    #[arg(long)]
    pub relaxed: bool,
    /// Decode without the BIO transition mask.
    #[arg(long)]
    pub unconstrained: bool,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Raw text, or annotation JSON documents when the name ends in `.json`.
    pub input: PathBuf,
    /// Where to write the annotation JSON (standard output if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub unconstrained: bool,
}

/// Maps an error onto the process exit status.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Annotation { .. } | Error::Validation { .. } | Error::Labeling { .. } | Error::Empty(_) => EXIT_DATA,
        Error::Divergence { .. } | Error::NonFinite(_) => EXIT_DIVERGED,
        _ => EXIT_USAGE,
    }
}

/// Runs `cli`, printing errors to standard error. Returns the exit status.
pub fn run(cli: &Cli, out: &mut dyn Write) -> i32 {
    let result = match &cli.command {
        Command::Convert(a) => cmd_convert(a, out),
        Command::Stats(a) => cmd_stats(a, out),
        Command::Train(a) => cmd_train(a, out),
        Command::Evaluate(a) => cmd_evaluate(a, out),
        Command::Predict(a) => cmd_predict(a, out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

fn stdout_err(e: std::io::Error) -> Error {
    Error::Io { path: PathBuf::from("<stdout>"), source: e }
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn to_json<S: Serialize>(value: &S) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ConvertSummary {
    pub sentences: usize,
    pub tokens: usize,
    pub spans: usize,
    pub violations: usize,
    pub warnings: usize,
}

pub fn cmd_convert(args: &ConvertArgs, out: &mut dyn Write) -> Result<()> {
    let tagset = TagSet::legal();
    let mode = if args.lenient { AlignMode::Lenient } else { AlignMode::Strict };
    let stoplist = args.stoplist.as_deref().map(read).transpose()?.map(|t| parse_stoplist(&t));
    let parsed = parse_annotations(&read(&args.input)?, &tagset, mode)?;
    for w in &parsed.warnings {
        log::warn!("document {:?}, annotation {}: {}", w.doc_id, w.index, w.message);
    }

    let mut summary = ConvertSummary { warnings: parsed.warnings.len(), ..Default::default() };
    let mut conll = Vec::new();
    for sentence in &parsed.sentences {
        let sentence = match &stoplist {
            Some(stop) => remove_stopwords(sentence, stop),
            None => sentence.clone(),
        };
        if sentence.tokens.is_empty() {
            continue;
        }
        let converted = ConllSentence::from_labeled(&sentence, &tagset)?;
        summary.violations += validate_bio(&converted.tag_ids(&tagset)?, &tagset).violations.len();
        summary.sentences += 1;
        summary.tokens += converted.len();
        summary.spans += sentence.spans.len();
        conll.push(converted);
    }
    if summary.violations > 0 && mode == AlignMode::Strict {
        return Err(Error::Validation {
            position: 0,
            reason: format!("{} BIO violations in converted output", summary.violations),
        });
    }
    write_file(&args.output, to_conll_string(&conll).as_bytes())?;
    writeln!(
        out,
        "sentences {}  tokens {}  spans {}  violations {}  warnings {}",
        summary.sentences, summary.tokens, summary.spans, summary.violations, summary.warnings
    )
    .map_err(stdout_err)
}

/// Span counts for one dataset, in tag-set class order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DatasetStats {
    pub file: String,
    pub counts: BTreeMap<String, usize>,
    pub total: usize,
}

pub fn dataset_stats(path: &Path, tagset: &TagSet) -> Result<DatasetStats> {
    let mut counts: BTreeMap<String, usize> = tagset.classes().iter().map(|c| (c.clone(), 0)).collect();
    let text = read(path)?;
    let labels: Vec<String> = if is_json(path) {
        parse_documents(&text)?.into_iter().flat_map(|d| d.annotations.into_iter().map(|a| a.label)).collect()
    } else {
        let mut labels = Vec::new();
        for s in parse_conll(&text, tagset, &path.display().to_string())? {
            labels.extend(bio_to_spans(&s.tag_ids(tagset)?, tagset, BioMode::Repair)?.into_iter().map(|sp| sp.label));
        }
        labels
    };
    for label in labels {
        *counts.get_mut(&label).ok_or(Error::UnknownClass(label.clone()))? += 1;
    }
    let total = counts.values().sum();
    Ok(DatasetStats { file: path.display().to_string(), counts, total })
}

pub fn cmd_stats(args: &StatsArgs, out: &mut dyn Write) -> Result<()> {
    let tagset = TagSet::legal();
    let stats = args.datasets.iter().map(|p| dataset_stats(p, &tagset)).collect::<Result<Vec<_>>>()?;
    if args.json {
        return writeln!(out, "{}", to_json(&stats)?).map_err(stdout_err);
    }
    let names: Vec<String> = stats
        .iter()
        .map(|s| Path::new(&s.file).file_name().map_or(s.file.clone(), |n| n.to_string_lossy().into_owned()))
        .collect();
    let width = tagset.classes().iter().map(String::len).max().unwrap_or(5).max(5);
    let cols: Vec<usize> = names.iter().map(|n| n.len().max(6)).collect();
    let mut text = format!("{:<width$}", "Class");
    for (n, w) in names.iter().zip(&cols) {
        text += &format!("  {n:>w$}");
    }
    text.push('\n');
    let mut row = |label: &str, values: Vec<usize>| {
        text += &format!("{label:<width$}");
        for (v, w) in values.iter().zip(&cols) {
            text += &format!("  {v:>w$}");
        }
        text.push('\n');
    };
    for class in tagset.classes() {
        row(class, stats.iter().map(|s| s.counts[class]).collect());
    }
    row("Total", stats.iter().map(|s| s.total).collect());
    out.write_all(text.as_bytes()).map_err(stdout_err)
}

fn load_sentences(path: &Path, tagset: &TagSet) -> Result<Vec<TrainingSentence>> {
    read_conll(path, tagset)?.iter().map(|s| TrainingSentence::from_conll(s, tagset)).collect()
}

pub fn cmd_train(args: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    let mut config = Hyperparameters::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let tagset = TagSet::legal();
    let mut train_set = load_sentences(&args.train, &tagset)?;
    let mut dev_set = args.dev.as_deref().map(|p| load_sentences(p, &tagset)).transpose()?.unwrap_or_default();
    if args.merge_dev {
        train_set.append(&mut dev_set);
    }
    let lm_corpus = args.lm_corpus.as_deref().map(read).transpose()?;

    let mut rng = seeded(config.seed);
    let (model, report) =
        build_model::<f64, _>(&config, &tagset, &train_set, args.glove.as_deref(), lm_corpus.as_deref(), &mut rng)?;
    log::info!("vocabulary of {} words, {} parameters", report.vocab_size, {
        use legalner::params::ParamSet;
        model.num_params()
    });

    fs::create_dir_all(&args.out).map_err(|e| Error::Io { path: args.out.clone(), source: e })?;
    let log_path = args.out.join(LOG_FILE);
    let file = File::create(&log_path).map_err(|e| Error::Io { path: log_path.clone(), source: e })?;
    let mut log = BufWriter::new(file);
    let mut log_err = None;
    let checkpoint = train(&config, &train_set, &dev_set, model, &mut rng, |line| {
        let res = serde_json::to_string(line)
            .map_err(std::io::Error::other)
            .and_then(|json| writeln!(log, "{json}"))
            .and_then(|()| log.flush());
        if let Err(e) = res {
            log_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = log_err {
        return Err(Error::Io { path: log_path, source: e });
    }
    checkpoint.save(&args.out)?;

    let last = checkpoint.history.last();
    let best = checkpoint.best_epoch.and_then(|e| checkpoint.history.iter().find(|r| r.epoch == e));
    writeln!(
        out,
        "trained {} epochs; best epoch {}; dev micro-F1 {}; checkpoint in {}",
        last.map_or(0, |r| r.epoch),
        checkpoint.best_epoch.map_or("-".into(), |e| e.to_string()),
        best.and_then(|r| r.dev_micro_f1).map_or("-".into(), |f| format!("{f:.4}")),
        args.out.display()
    )
    .map_err(stdout_err)
}

#[derive(Debug, Clone, Serialize)]
pub struct EvaluateOutput {
    pub report: Report,
    pub token_accuracy: f64,
}

pub fn evaluate_checkpoint(args: &EvaluateArgs) -> Result<EvaluateOutput> {
    let checkpoint = Checkpoint::<f64>::load(&args.checkpoint)?;
    let tagger = &checkpoint.tagger;
    let test = load_sentences(&args.test, &tagger.tagset)?;
    let mode = if args.relaxed { MatchMode::Relaxed } else { MatchMode::Strict };
    let eval = evaluate(tagger, &test, !args.unconstrained, mode)?;
    Ok(EvaluateOutput { report: eval.report, token_accuracy: eval.accuracy })
}

pub fn cmd_evaluate(args: &EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    let result = evaluate_checkpoint(args)?;
    let text = if args.json {
        to_json(&result)? + "\n"
    } else {
        format!("{}{:<11}  {:>9.4}\n", result.report.to_table(), "Accuracy", result.token_accuracy)
    };
    out.write_all(text.as_bytes()).map_err(stdout_err)
}

/// Tags `text` line by line; offsets in the result index into `text`.
pub fn predict_text(tagger: &Tagger, text: &str, constrained: bool) -> Result<Vec<Annotation>> {
    let mut annotations = Vec::new();
    let mut line_start = 0;
    for line in text.split('\n') {
        let tokens = tokenize(line);
        if !tokens.is_empty() {
            let words: Vec<&str> = tokens.iter().map(|t| t.text.as_str()).collect();
            for span in tagger.predict_spans(&words, constrained)? {
                annotations.push(Annotation {
                    start: line_start + tokens[span.token_start].char_start,
                    end: line_start + tokens[span.token_end - 1].char_end,
                    label: span.label,
                });
            }
        }
        line_start += line.chars().count() + 1;
    }
    Ok(annotations)
}

pub fn predict_documents(tagger: &Tagger, input: &Path, constrained: bool) -> Result<Vec<Document>> {
    let text = read(input)?;
    let mut docs = if is_json(input) {
        parse_documents(&text)?
    } else {
        let id = input.file_stem().map_or("input".into(), |s| s.to_string_lossy().into_owned());
        vec![Document { id, text, meta: None, annotations: Vec::new() }]
    };
    for doc in &mut docs {
        doc.annotations = predict_text(tagger, &doc.text, constrained)?;
    }
    Ok(docs)
}

pub fn cmd_predict(args: &PredictArgs, out: &mut dyn Write) -> Result<()> {
    let checkpoint = Checkpoint::<f64>::load(&args.checkpoint)?;
    let docs = predict_documents(&checkpoint.tagger, &args.input, !args.unconstrained)?;
    let json = to_json(&docs)? + "\n";
    match &args.out {
        Some(path) => write_file(path, json.as_bytes()),
        None => out.write_all(json.as_bytes()).map_err(stdout_err),
    }
}
