//! Command-line front end and annotation HTTP service for `corwa-core`.

pub mod server;

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use corwa_core::analysis::{
    citation_units, cooccurrence_stats, mine_patterns, retrieval_compare, span_length_stats, span_sentence_ratio,
    style_profile, AnalysisError, CooccurrenceUnit, PatternQuery,
};
use corwa_core::annotation::{AnnotationError, AnnotationService, Pretagger};
use corwa_core::corpus::s2orc::read_records;
use corwa_core::corpus::{
    extract_related_work, link_citations, make_splits, prioritize, segment_and_tokenize, IngestError, PaperRecord,
    TitlePatterns,
};
use corwa_core::generation::{
    build_examples, generate_all, read_examples, sample_human_eval, score_predictions, write_examples, write_sheets,
    CitedPaper, CommandSeq2Seq, DecodingParams, ExampleLine, GenError, HumanEvalItem, NearestNeighborSeq2Seq,
    Prediction, Seq2Seq, TargetUnit,
};
use corwa_core::metrics::MetricError;
use corwa_core::schema::dataset::{load_labeled, load_unlabeled, save_labeled};
use corwa_core::synth::{random_corpus, random_unlabeled};
use corwa_core::tagger::{
    cross_validate, distant_supervision_round, load_model, save_model, score_paragraphs, train, TaggerError,
};
use corwa_core::{LabeledParagraph, LabeledSection, LossWeights, ModelConfig, TrainConfig};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}: {1}")]
    Io(PathBuf, #[source] io::Error),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Tagger(#[from] TaggerError),
    #[error(transparent)]
    Generation(#[from] GenError),
    #[error(transparent)]
    Annotation(#[from] AnnotationError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("{0}: {1}")]
    Json(PathBuf, #[source] serde_json::Error),
    #[error("{0}")]
    Usage(String),
}

fn io_at(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |e| CliError::Io(path.to_path_buf(), e)
}

#[derive(Debug, Parser)]
#[command(name = "corwa", version, about = "Related-work citation annotation toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract, link and segment related-work sections from paper records.
    Ingest(IngestArgs),
    /// Train a tagger, optionally with k-fold cross-validation first.
    Train(TrainArgs),
    /// Tag unlabeled sections with a trained model.
    Tag(TagArgs),
    /// Distant supervision: self-label unlabeled sections and retrain.
    Distant(DistantArgs),
    /// Score predicted sections against gold sections.
    Eval(EvalArgs),
    /// Corpus statistics over labeled sections.
    Analyze(AnalyzeArgs),
    /// Build span-generation examples.
    Genprep(GenprepArgs),
    /// Run a text-to-text model over generation examples.
    Generate(GenerateArgs),
    /// Score generated spans with citation-mark-stripped ROUGE.
    Genscore(GenscoreArgs),
    /// Blind human-evaluation sheets with a separate answer key.
    GenevalSheets(GenevalSheetsArgs),
    /// Serve the annotation API.
    Serve(ServeArgs),
    /// Write a synthetic labeled (or unlabeled) corpus.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Line-delimited paper records.
    #[arg(long)]
    pub input: PathBuf,
    /// Title patterns, one regex per line; built-in defaults when omitted.
    #[arg(long)]
    pub patterns: Option<PathBuf>,
    #[arg(long, default_value_t = 2019)]
    pub year_split: i32,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Run k-fold cross-validation (by paper) before the final fit; 0 skips it.
    #[arg(long, default_value_t = 0)]
    pub folds: usize,
    /// JSON file with optional `model`, `train` and `loss_weights` objects.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Sections scored after every epoch.
    #[arg(long)]
    pub heldout: Option<PathBuf>,
    /// Checkpoint directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TagArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DistantArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Gold sections mixed into every retraining round.
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub unlabeled: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub rounds: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Task {
    Disc,
    Cs,
    Ct,
    All,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long, value_enum, default_value_t = Task::All)]
    pub task: Task,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Report {
    Cooccurrence,
    Spans,
    Style,
    Patterns,
    Retrieval,
    Ratio,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub report: Report,
    /// JSON report; a `.csv` sibling is written next to it.
    #[arg(long)]
    pub out: PathBuf,
    /// Co-occurrence counted per sentence instead of per span.
    #[arg(long)]
    pub by_sentence: bool,
    /// Pattern mining: minimum number of supporting paragraphs.
    #[arg(long)]
    pub min_support: Option<usize>,
    #[arg(long)]
    pub max_gap: Option<usize>,
    #[arg(long)]
    pub closed: bool,
    /// Retrieval: JSON object mapping cited paper id to its sentences.
    #[arg(long)]
    pub cited_sentences: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Unit {
    Span,
    Sentence,
}

impl From<Unit> for TargetUnit {
    fn from(u: Unit) -> Self {
        match u {
            Unit::Span => TargetUnit::Span,
            Unit::Sentence => TargetUnit::Sentence,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenprepArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Paper records (file or directory of line-delimited files) supplying
    /// target introductions and cited-paper titles and abstracts.
    #[arg(long)]
    pub intros: PathBuf,
    #[arg(long, value_enum, default_value_t = Unit::Span)]
    pub unit: Unit,
    /// Truncate assembled inputs to this many words.
    #[arg(long)]
    pub max_words: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub examples: PathBuf,
    /// External generator: reads `{"input", "params"}` JSON on stdin.
    #[arg(long, conflicts_with = "memorize")]
    pub command: Option<PathBuf>,
    #[arg(long = "arg", allow_hyphen_values = true)]
    pub args: Vec<String>,
    /// Nearest-neighbour memorizer fitted on this example file.
    #[arg(long)]
    pub memorize: Option<PathBuf>,
    #[arg(long, default_value_t = 1024)]
    pub max_input_words: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenscoreArgs {
    /// Line-delimited `{"id", "text"}` predictions.
    #[arg(long)]
    pub pred: PathBuf,
    /// Example file written by `genprep`.
    #[arg(long)]
    pub gold: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenevalSheetsArgs {
    /// Span-level example file written by `genprep`.
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub span_pred: PathBuf,
    #[arg(long)]
    pub sentence_pred: PathBuf,
    /// Items per span type.
    #[arg(long, default_value_t = 15)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Unlabeled sections to annotate.
    #[arg(long)]
    pub data: PathBuf,
    /// Tagger checkpoint used for pre-tagging.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Directory for the correction log.
    #[arg(long, default_value = "annotation_store")]
    pub store: PathBuf,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 20)]
    pub sections: usize,
    #[arg(long, default_value_t = 4)]
    pub max_paragraphs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write sections without labels.
    #[arg(long)]
    pub unlabeled: bool,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Ingest(a) => ingest(&a),
        Command::Train(a) => train_cmd(&a),
        Command::Tag(a) => tag(&a),
        Command::Distant(a) => distant(&a),
        Command::Eval(a) => eval(&a, &mut io::stdout()),
        Command::Analyze(a) => analyze(&a),
        Command::Genprep(a) => genprep(&a),
        Command::Generate(a) => generate(&a),
        Command::Genscore(a) => genscore(&a, &mut io::stdout()),
        Command::GenevalSheets(a) => geneval_sheets(&a),
        Command::Serve(a) => serve(&a),
        Command::Synth(a) => synth(&a),
    }
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_at(parent))?;
    }
    let mut f = BufWriter::new(File::create(path).map_err(io_at(path))?);
    serde_json::to_writer_pretty(&mut f, value).map_err(|e| CliError::Json(path.to_path_buf(), e))?;
    f.write_all(b"\n").and_then(|_| f.flush()).map_err(io_at(path))
}

fn print_json<T: Serialize + ?Sized>(out: &mut dyn Write, value: &T) -> Result<(), CliError> {
    let s = serde_json::to_string_pretty(value).map_err(|e| CliError::Json(PathBuf::from("<stdout>"), e))?;
    writeln!(out, "{s}").map_err(io_at(Path::new("<stdout>")))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let f = File::open(path).map_err(io_at(path))?;
    serde_json::from_reader(BufReader::new(f)).map_err(|e| CliError::Json(path.to_path_buf(), e))
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, CliError> {
    let f = File::open(path).map_err(io_at(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io_at(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| CliError::Json(PathBuf::from(format!("{}:{}", path.display(), i + 1)), e))?,
        );
    }
    Ok(out)
}

fn labeled(path: &Path) -> Result<Vec<LabeledSection>, CliError> {
    load_labeled(path).map_err(io_at(path))
}

fn record_files(path: &Path) -> Result<Vec<PathBuf>, CliError> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)
        .map_err(io_at(path))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    Ok(files)
}

/// Every record in a file or directory; malformed lines are skipped with a
/// warning.
pub fn read_paper_records(path: &Path) -> Result<Vec<PaperRecord>, CliError> {
    let mut out = Vec::new();
    for file in record_files(path)? {
        let reader = BufReader::new(File::open(&file).map_err(io_at(&file))?);
        for record in read_records(reader) {
            match record {
                Ok(r) => out.push(r),
                Err(e) => log::warn!("{}: {e}", file.display()),
            }
        }
    }
    Ok(out)
}

// ------------------------------------------------------------------ ingest

/// Writes `sections/`, `splits.json` and `priority.json` under `out`.
pub fn ingest(a: &IngestArgs) -> Result<(), CliError> {
    let patterns = match &a.patterns {
        Some(p) => TitlePatterns::parse(&fs::read_to_string(p).map_err(io_at(p))?)?,
        None => TitlePatterns::default(),
    };
    let mut sections = Vec::new();
    let (mut records, mut without) = (0usize, 0usize);
    for record in read_paper_records(&a.input)? {
        records += 1;
        let extracted = match extract_related_work(&record, &patterns) {
            Ok(Some(s)) => s,
            Ok(None) => {
                without += 1;
                continue;
            }
            Err(e) => {
                log::warn!("{e}");
                continue;
            }
        };
        match segment_and_tokenize(link_citations(extracted, &record.bibliography)) {
            Ok(s) => sections.push(s),
            Err(e) => log::warn!("{e}"),
        }
    }
    log::info!("{records} records, {} sections extracted, {without} without a matching section", sections.len());
    let dir = a.out.join("sections");
    corwa_core::schema::dataset::save_unlabeled(&dir, &sections).map_err(io_at(&dir))?;
    write_json(&a.out.join("splits.json"), &make_splits(&sections, a.year_split))?;
    write_json(&a.out.join("priority.json"), &prioritize(&sections))
}

// ------------------------------------------------------------------ tagger

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainFile {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub loss_weights: LossWeights,
}

fn paragraphs(sections: &[LabeledSection]) -> Vec<LabeledParagraph> {
    sections.iter().flat_map(|s| s.paragraphs.iter().cloned()).collect()
}

/// Writes the checkpoint plus `train_log.jsonl` (and `cv.json` with folds).
pub fn train_cmd(a: &TrainArgs) -> Result<(), CliError> {
    let cfg: TrainFile = match &a.config {
        Some(p) => read_json(p)?,
        None => TrainFile::default(),
    };
    let sections = labeled(&a.data)?;
    fs::create_dir_all(&a.out).map_err(io_at(&a.out))?;
    if a.folds >= 2 {
        let report = cross_validate(&sections, a.folds, &cfg.model, &cfg.train, &cfg.loss_weights)?;
        log::info!(
            "cross-validation F1: disc {:.3}, cs {:.3}, ct {:.3}",
            report.pooled.disc.f1,
            report.pooled.cs.f1,
            report.pooled.ct.f1
        );
        write_json(&a.out.join("cv.json"), &report)?;
    }
    let heldout = a.heldout.as_deref().map(labeled).transpose()?.map(|s| paragraphs(&s));
    let log_path = a.out.join("train_log.jsonl");
    let mut log_file = BufWriter::new(File::create(&log_path).map_err(io_at(&log_path))?);
    let (model, _) = train(
        &paragraphs(&sections),
        heldout.as_deref(),
        &cfg.model,
        &cfg.train,
        &cfg.loss_weights,
        Some(&mut log_file),
    )?;
    log_file.flush().map_err(io_at(&log_path))?;
    save_model(&model, &a.out)?;
    Ok(())
}

pub fn tag(a: &TagArgs) -> Result<(), CliError> {
    let model = load_model(&a.model)?;
    let sections = load_unlabeled(&a.input).map_err(io_at(&a.input))?;
    let mut out = Vec::with_capacity(sections.len());
    for s in &sections {
        let mut paragraphs = Vec::with_capacity(s.paragraphs.len());
        for p in &s.paragraphs {
            paragraphs.push(model.predict(p)?);
        }
        out.push(LabeledSection {
            paper_id: s.paper_id.clone(),
            year: s.year,
            paragraphs,
        });
    }
    save_labeled(&a.out, &out).map_err(io_at(&a.out))
}

/// Writes `round_<k>/` (model checkpoint plus `silver/`) for every round.
pub fn distant(a: &DistantArgs) -> Result<(), CliError> {
    let mut model = load_model(&a.model)?;
    let gold = labeled(&a.gold)?;
    let unlabeled = load_unlabeled(&a.unlabeled).map_err(io_at(&a.unlabeled))?;
    for round in 1..=a.rounds {
        let dir = a.out.join(format!("round_{round}"));
        fs::create_dir_all(&dir).map_err(io_at(&dir))?;
        let log_path = dir.join("train_log.jsonl");
        let mut log_file = BufWriter::new(File::create(&log_path).map_err(io_at(&log_path))?);
        let r = distant_supervision_round(&model, &gold, &unlabeled, Some(&mut log_file))?;
        log_file.flush().map_err(io_at(&log_path))?;
        save_model(&r.model, &dir)?;
        let silver = dir.join("silver");
        save_labeled(&silver, &r.silver).map_err(io_at(&silver))?;
        model = r.model;
    }
    Ok(())
}

/// Pairs paragraphs by (paper id, paragraph index) and prints per-task F1.
pub fn eval(a: &EvalArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let pred = labeled(&a.pred)?;
    let gold = labeled(&a.gold)?;
    let by_id: HashMap<&str, &LabeledSection> = pred.iter().map(|s| (s.paper_id.as_str(), s)).collect();
    let (mut p, mut g) = (Vec::new(), Vec::new());
    let mut missing = Vec::new();
    for gs in &gold {
        match by_id.get(gs.paper_id.as_str()) {
            Some(ps) if ps.paragraphs.len() == gs.paragraphs.len() => {
                p.extend(ps.paragraphs.iter().cloned());
                g.extend(gs.paragraphs.iter().cloned());
            }
            Some(_) => return Err(CliError::Usage(format!("{}: paragraph counts differ", gs.paper_id))),
            None => missing.push(gs.paper_id.clone()),
        }
    }
    if !missing.is_empty() {
        log::warn!("{} gold sections have no prediction", missing.len());
    }
    let scores = score_paragraphs(&p, &g)?;
    let mut report = BTreeMap::new();
    if matches!(a.task, Task::Disc | Task::All) {
        report.insert("disc", scores.disc);
    }
    if matches!(a.task, Task::Cs | Task::All) {
        report.insert("cs", scores.cs);
    }
    if matches!(a.task, Task::Ct | Task::All) {
        report.insert("ct", scores.ct);
    }
    print_json(out, &serde_json::json!({"scores": report, "paragraphs": g.len(), "missing_sections": missing}))
}

// ------------------------------------------------------------------ analysis

pub fn analyze(a: &AnalyzeArgs) -> Result<(), CliError> {
    let data = paragraphs(&labeled(&a.data)?);
    let (json, csv) = match a.report {
        Report::Cooccurrence => {
            let unit = if a.by_sentence { CooccurrenceUnit::Sentence } else { CooccurrenceUnit::Span };
            let t = cooccurrence_stats(&data, unit)?;
            (to_value(&t)?, t.to_csv())
        }
        Report::Spans => {
            let s = span_length_stats(&data);
            (to_value(&s)?, s.to_csv())
        }
        Report::Style => {
            let s = style_profile(&data);
            (to_value(&s)?, s.to_csv())
        }
        Report::Ratio => {
            let r = span_sentence_ratio(&data);
            (to_value(&r)?, r.to_csv())
        }
        Report::Patterns => {
            let sequences: Vec<_> = data.iter().map(|lp| lp.sentence_labels.clone()).collect();
            let mut q = PatternQuery::default_for(sequences.len());
            if let Some(s) = a.min_support {
                q.min_support = s;
            }
            if a.max_gap.is_some() {
                q.max_gap = a.max_gap;
            }
            q.closed = a.closed;
            let patterns = mine_patterns(&sequences, &q)?;
            let mut csv = String::from("pattern,support\n");
            for p in &patterns {
                let items: Vec<&str> = p.items.iter().map(|l| l.as_str()).collect();
                csv.push_str(&format!("{},{}\n", items.join(" "), p.support));
            }
            (serde_json::json!({"query": q, "sequences": sequences.len(), "patterns": patterns}), csv)
        }
        Report::Retrieval => {
            let path = a
                .cited_sentences
                .as_deref()
                .ok_or_else(|| CliError::Usage("--report retrieval needs --cited-sentences".into()))?;
            let cited: HashMap<String, Vec<String>> = read_json(path)?;
            let r = retrieval_compare(&citation_units(&data), &cited);
            (to_value(&r)?, r.to_csv())
        }
    };
    write_json(&a.out, &json)?;
    let csv_path = a.out.with_extension("csv");
    fs::write(&csv_path, csv).map_err(io_at(&csv_path))
}

fn to_value<T: Serialize>(v: &T) -> Result<serde_json::Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Json(PathBuf::from("<report>"), e))
}

// ------------------------------------------------------------------ generation

/// Introductions keyed by paper id and title/abstract metadata for every
/// record.
pub fn paper_metadata(records: &[PaperRecord]) -> (HashMap<String, String>, HashMap<String, CitedPaper>) {
    let mut intros = HashMap::new();
    let mut cited = HashMap::new();
    for r in records {
        if let Some(intro) = r.introduction() {
            intros.insert(r.paper_id.clone(), intro);
        }
        let abstract_text = Some(r.abstract_text.trim()).filter(|s| !s.is_empty()).map(str::to_string);
        cited.insert(r.paper_id.clone(), CitedPaper {
            title: r.title.clone(),
            abstract_text,
        });
    }
    (intros, cited)
}

pub fn genprep(a: &GenprepArgs) -> Result<(), CliError> {
    let sections = labeled(&a.data)?;
    let (intros, cited) = paper_metadata(&read_paper_records(&a.intros)?);
    let report = build_examples(&sections, a.unit.into(), &intros, &cited);
    log::info!(
        "{} examples; skipped {:?}; {} sections without introduction; {} citations without abstract",
        report.examples.len(),
        report.skipped,
        report.missing_intros,
        report.missing_abstracts
    );
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_at(parent))?;
    }
    let mut f = BufWriter::new(File::create(&a.out).map_err(io_at(&a.out))?);
    write_examples(&mut f, &report.examples, a.max_words)?;
    f.flush().map_err(io_at(&a.out))
}

fn example_file(path: &Path) -> Result<Vec<ExampleLine>, CliError> {
    Ok(read_examples(BufReader::new(File::open(path).map_err(io_at(path))?))?)
}

/// Writes one `{"id", "text", ...}` line per example; failures are logged
/// and skipped.
pub fn generate(a: &GenerateArgs) -> Result<(), CliError> {
    let examples: Vec<_> = example_file(&a.examples)?.into_iter().map(|l| l.example).collect();
    let mut model: Box<dyn Seq2Seq> = match (&a.command, &a.memorize) {
        (Some(program), None) => Box::new(CommandSeq2Seq {
            program: program.clone(),
            args: a.args.clone(),
            max_input_words: a.max_input_words,
        }),
        (None, Some(train_file)) => {
            let mut nn = NearestNeighborSeq2Seq::new(a.max_input_words);
            let train: Vec<_> = example_file(train_file)?.into_iter().map(|l| l.example).collect();
            nn.fit_examples(&train);
            Box::new(nn)
        }
        _ => return Err(CliError::Usage("give exactly one of --command or --memorize".into())),
    };
    let params = DecodingParams {
        seed: a.seed,
        ..DecodingParams::default()
    };
    let mut f = BufWriter::new(File::create(&a.out).map_err(io_at(&a.out))?);
    let mut failed = 0;
    for r in generate_all(&examples, model.as_mut(), &params, 8) {
        match r {
            Ok(g) => {
                serde_json::to_writer(&mut f, &g).map_err(|e| CliError::Json(a.out.clone(), e))?;
                f.write_all(b"\n").map_err(io_at(&a.out))?;
            }
            Err(e) => {
                failed += 1;
                log::warn!("{e}");
            }
        }
    }
    if failed > 0 {
        log::warn!("{failed} of {} examples failed", examples.len());
    }
    f.flush().map_err(io_at(&a.out))
}

pub fn genscore(a: &GenscoreArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let preds: Vec<Prediction> = read_jsonl(&a.pred)?;
    let gold: Vec<_> = example_file(&a.gold)?.into_iter().map(|l| l.example).collect();
    print_json(out, &score_predictions(&preds, &gold))
}

pub fn geneval_sheets(a: &GenevalSheetsArgs) -> Result<(), CliError> {
    let gold = example_file(&a.gold)?;
    let span: HashMap<String, String> = read_jsonl::<Prediction>(&a.span_pred)?.into_iter().map(|p| (p.id, p.text)).collect();
    let sentence: HashMap<String, String> =
        read_jsonl::<Prediction>(&a.sentence_pred)?.into_iter().map(|p| (p.id, p.text)).collect();
    let items: Vec<HumanEvalItem> = gold
        .into_iter()
        .filter_map(|l| {
            let ex = l.example;
            Some(HumanEvalItem {
                span_output: span.get(&ex.id)?.clone(),
                sentence_output: sentence.get(&ex.id)?.clone(),
                cited_titles: ex.cited_inputs.iter().map(|c| c.title.clone()).collect(),
                context: ex.masked_context,
                gold: ex.gold_target,
                span_type: ex.span_type,
                id: ex.id,
            })
        })
        .collect();
    let sheets = sample_human_eval(&items, a.n, a.seed)?;
    write_sheets(&sheets, &a.out)?;
    Ok(())
}

// ------------------------------------------------------------------ service

pub fn build_service(a: &ServeArgs) -> Result<Arc<AnnotationService>, CliError> {
    let sections = load_unlabeled(&a.data).map_err(io_at(&a.data))?;
    let svc = AnnotationService::open(sections, &a.store)?;
    if let Some(dir) = &a.model {
        let model: Arc<dyn Pretagger> = Arc::new(load_model(dir)?);
        svc.set_model(Some(model));
    }
    Ok(Arc::new(svc))
}

pub fn serve(a: &ServeArgs) -> Result<(), CliError> {
    let svc = build_service(a)?;
    let addr = format!("{}:{}", a.host, a.port);
    let rt = tokio::runtime::Runtime::new().map_err(io_at(Path::new("<runtime>")))?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr).await.map_err(io_at(Path::new(&addr)))?;
        log::info!("listening on {addr}");
        axum::serve(listener, server::router(svc))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(io_at(Path::new(&addr)))
    })
}

// ------------------------------------------------------------------ synth

pub fn synth(a: &SynthArgs) -> Result<(), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    if a.unlabeled {
        let sections = random_unlabeled(&mut rng, a.sections, a.max_paragraphs);
        corwa_core::schema::dataset::save_unlabeled(&a.out, &sections).map_err(io_at(&a.out))
    } else {
        let sections = random_corpus(&mut rng, a.sections, a.max_paragraphs);
        save_labeled(&a.out, &sections).map_err(io_at(&a.out))
    }
}
