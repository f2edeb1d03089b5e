//! The `lexent` command line: one subcommand per pipeline stage.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error. `--config` loads a
//! JSON configuration tree, `--set key.path=value` overrides individual
//! entries, and `--seed` drives every random choice.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use super::config::{self, parse_decide_strategy, Config};
use super::metrics::{self, IdSets, MetricsReport};
use super::runfile::{RunFile, RunRecord};
use crate::chunker::{self, ChunkSpec};
use crate::corpus::{self, DocKind, Document, Language};
use crate::datagen::{self, AnnotatedQuestion, Article, LabeledPair, Provenance};
use crate::fusion::{self, ModelScores};
use crate::lexical::{self, Bm25Params};
use crate::paralaw;
use crate::scorer::{ExternalEndpoint, LogRegModel, ScorerBackend, TrainSchedule, TrainStage};
use crate::selflabel::{self, SelfLabelConfig};

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    fn usage(msg: impl Into<String>) -> Self {
        Self::Usage(msg.into())
    }
}

macro_rules! data_error_from {
    ($($ty:ty),+ $(,)?) => {
        $(impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::Data(e.to_string())
            }
        })+
    };
}

data_error_from!(
    corpus::CorpusError,
    lexical::LexicalError,
    chunker::ChunkError,
    datagen::DatagenError,
    paralaw::ParalawError,
    crate::scorer::ScorerError,
    crate::selflabel::SelfLabelError,
    fusion::FusionError,
    metrics::MetricsError,
    super::runfile::RunFileError,
    std::io::Error,
);

impl From<config::ConfigError> for CliError {
    fn from(e: config::ConfigError) -> Self {
        match e {
            config::ConfigError::BadOverride(_) | config::ConfigError::Invalid(_) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Data(other.to_string()),
        }
    }
}

type CliResult = Result<(), CliError>;

#[derive(Parser, Debug)]
#[command(
    name = "lexent",
    version,
    about = "Legal retrieval and entailment pipeline: BM25 candidates, score fusion, \
             training-data generation, self-labeled denoising, evaluation"
)]
struct Cli {
    /// JSON configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override one config entry, e.g. --set bm25.k1=1.2 (repeatable).
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ingest a directory of text files or a {"id","kind","text"} JSON-lines
    /// corpus into the document model.
    Ingest(IngestArgs),
    /// Build a BM25 index over a document corpus.
    Index(IndexArgs),
    /// Rank indexed documents for each query (BM25 top-k).
    Retrieve(RetrieveArgs),
    /// Chunk articles into sliding windows, or expand a pair file into
    /// per-chunk pairs.
    Chunk(ChunkArgs),
    /// Build (question, article) training pairs with tf-idf-capped
    /// negatives.
    Pairs(PairsArgs),
    /// Append tf-idf-similar articles to each question's gold set and add
    /// negation-flipped variants.
    Augment(AugmentArgs),
    /// Generate silver supporting pairs from segmented cases.
    Silver(SilverArgs),
    /// Generate cross-lingual sentence-pair pretraining samples from an
    /// aligned TSV corpus, with an optional 9:1 split.
    Paralaw(ParalawArgs),
    /// Train the built-in classifier through one or more stages.
    Train(TrainArgs),
    /// Run the train/predict/relabel/retrain denoising pass.
    Selflabel(SelfLabelArgs),
    /// Rank candidates by fused lexical-semantic score and decide result
    /// sets.
    Fuse(FuseArgs),
    /// Learn ensemble weights over multiple run files.
    Ensemble(EnsembleArgs),
    /// Score predictions against gold annotations or labels.
    Eval(EvalArgs),
}

#[derive(Args, Debug)]
struct IngestArgs {
    /// Directory of text files, or a .jsonl corpus file.
    #[arg(long)]
    input: PathBuf,
    /// Document kind for directory ingestion.
    #[arg(long, value_enum)]
    kind: Option<CliDocKind>,
    #[arg(long)]
    output: PathBuf,
    /// Drop non-English paragraphs.
    #[arg(long)]
    filter_language: bool,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum CliDocKind {
    Case,
    Article,
    Question,
}

impl From<CliDocKind> for DocKind {
    fn from(k: CliDocKind) -> Self {
        match k {
            CliDocKind::Case => DocKind::Case,
            CliDocKind::Article => DocKind::Article,
            CliDocKind::Question => DocKind::Question,
        }
    }
}

#[derive(Args, Debug)]
struct IndexArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct RetrieveArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    /// Candidates kept per query (default from config bm25.k).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value = "bm25")]
    run_tag: String,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct ChunkArgs {
    /// Document corpus to chunk.
    #[arg(long, conflicts_with = "pairs")]
    corpus: Option<PathBuf>,
    /// Pair file to expand chunk-wise.
    #[arg(long)]
    pairs: Option<PathBuf>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct PairsArgs {
    #[arg(long)]
    questions: PathBuf,
    #[arg(long)]
    articles: PathBuf,
    #[arg(long)]
    annotations: PathBuf,
    /// Maximum negatives per question.
    #[arg(long, default_value_t = 150)]
    cap: usize,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct AugmentArgs {
    #[arg(long)]
    questions: PathBuf,
    #[arg(long)]
    articles: PathBuf,
    #[arg(long)]
    annotations: PathBuf,
    /// Articles appended per question.
    #[arg(long, default_value_t = 5)]
    n: usize,
    /// Negation rule file (JSON lines); bundled rules when absent.
    #[arg(long)]
    rules: Option<PathBuf>,
    /// Rule language.
    #[arg(long, default_value = "english")]
    language: String,
    /// Skip negation augmentation.
    #[arg(long)]
    no_negation: bool,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct SilverArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    neg_ratio: f64,
    #[arg(long, default_value_t = 1.0)]
    sample_rate: f64,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct ParalawArgs {
    /// Aligned corpus TSV: doc_id, pos, text_a, text_b.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, requires = "val_output")]
    train_output: Option<PathBuf>,
    #[arg(long, requires = "train_output")]
    val_output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Training stage `<pairs.jsonl>:<epochs>[:<learning_rate>]`
    /// (repeatable, applied in order).
    #[arg(long = "stage", required = true)]
    stages: Vec<String>,
    /// Feature space size (power of two; default from config scorer.dim).
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct SelfLabelArgs {
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long)]
    e1: Option<usize>,
    #[arg(long)]
    e2: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    model_output: PathBuf,
    /// Pair file rewritten with the revised labels.
    #[arg(long)]
    pairs_output: Option<PathBuf>,
    /// Flip report (JSON lines).
    #[arg(long)]
    flips_output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FuseArgs {
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    candidates: PathBuf,
    /// Restrict candidates per query to the documents of this run file.
    #[arg(long)]
    run: Option<PathBuf>,
    /// Built-in classifier model file.
    #[arg(long, conflicts_with = "external")]
    model: Option<PathBuf>,
    /// External scorer endpoint descriptor.
    #[arg(long)]
    external: Option<String>,
    /// Semantic weight in the union score.
    #[arg(long)]
    alpha: Option<f64>,
    /// `max` or `mean_row_max`.
    #[arg(long)]
    aggregation: Option<String>,
    /// Decision rule: top1, topk[:k], relative[:beta].
    #[arg(long)]
    decide: Option<String>,
    #[arg(long, default_value = "fused")]
    run_tag: String,
    /// Selected candidates per query.
    #[arg(long)]
    output: PathBuf,
    /// Full ranking before the decision rule.
    #[arg(long)]
    full_output: Option<PathBuf>,
    /// Directory for lex/sem/fused matrix files.
    #[arg(long)]
    dump_matrices: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EnsembleArgs {
    /// Run file with model scores (repeatable; run tags must differ).
    #[arg(long = "run", required = true)]
    runs: Vec<PathBuf>,
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    decide: Option<String>,
    /// Learned weights as JSON.
    #[arg(long)]
    output: PathBuf,
    /// Decided result set under the learned weights.
    #[arg(long)]
    combined_output: Option<PathBuf>,
    #[arg(long, default_value = "ensemble")]
    run_tag: String,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Predictions as a run file.
    #[arg(long)]
    run: Option<PathBuf>,
    /// Gold annotations (JSON lines with query_id, positive_ids).
    #[arg(long)]
    gold: Option<PathBuf>,
    /// Predicted boolean labels (JSON lines with query_id, label).
    #[arg(long)]
    pred_labels: Option<PathBuf>,
    /// Gold boolean labels.
    #[arg(long)]
    gold_labels: Option<PathBuf>,
    /// Write the report JSON here as well as to stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Per-query metric rows (TSV) for plotting.
    #[arg(long)]
    plot_tsv: Option<PathBuf>,
}

/// Run the CLI; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let config = match config::load_config(cli.config.as_deref(), &cli.overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return match e {
                config::ConfigError::BadOverride(_) | config::ConfigError::Invalid(_) => 1,
                _ => 2,
            };
        }
    };
    let outcome = match cli.command {
        Command::Ingest(args) => cmd_ingest(&config, args),
        Command::Index(args) => cmd_index(&config, args),
        Command::Retrieve(args) => cmd_retrieve(&config, args),
        Command::Chunk(args) => cmd_chunk(&config, args),
        Command::Pairs(args) => cmd_pairs(&config, args),
        Command::Augment(args) => cmd_augment(&config, args),
        Command::Silver(args) => cmd_silver(&config, args, cli.seed),
        Command::Paralaw(args) => cmd_paralaw(&config, args, cli.seed),
        Command::Train(args) => cmd_train(&config, args, cli.seed),
        Command::Selflabel(args) => cmd_selflabel(&config, args, cli.seed),
        Command::Fuse(args) => cmd_fuse(&config, args),
        Command::Ensemble(args) => cmd_ensemble(&config, args),
        Command::Eval(args) => cmd_eval(&config, args),
    };
    match outcome {
        Ok(()) => 0,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(CliError::Data(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

fn cmd_ingest(config: &Config, args: IngestArgs) -> CliResult {
    let mut docs = if args.input.is_dir() {
        let kind = args
            .kind
            .ok_or_else(|| CliError::usage("--kind is required for directory ingestion"))?;
        corpus::ingest_collection(&args.input, kind.into())?
    } else {
        corpus::ingest_jsonl(&args.input)?
    };
    // a configured abbreviation file extends the bundled guard list
    if let Some(path) = &config.corpus.abbreviations {
        let mut guards = corpus::bundled_abbreviations().clone();
        guards.extend(corpus::load_word_list(path)?);
        for doc in &mut docs {
            doc.paragraphs = doc
                .paragraphs
                .iter()
                .map(|p| corpus::split_sentences_with(p, &guards))
                .collect();
        }
    }
    if args.filter_language || config.corpus.filter_language {
        let english = match &config.corpus.stopwords_en {
            Some(path) => corpus::load_word_list(path)?,
            None => corpus::bundled_english_stopwords().clone(),
        };
        let french = match &config.corpus.stopwords_fr {
            Some(path) => corpus::load_word_list(path)?,
            None => corpus::bundled_french_stopwords().clone(),
        };
        docs = docs
            .iter()
            .map(|d| {
                corpus::filter_document_language_with(d, Language::English, &english, &french)
            })
            .collect::<Result<_, _>>()?;
    }
    corpus::write_documents(&args.output, &docs)?;
    println!("ingested {} documents -> {}", docs.len(), args.output.display());
    Ok(())
}

fn bm25_params(config: &Config) -> Bm25Params {
    Bm25Params {
        k1: config.bm25.k1,
        b: config.bm25.b,
    }
}

fn cmd_index(config: &Config, args: IndexArgs) -> CliResult {
    let docs = corpus::read_documents(&args.corpus)?;
    let tokenized: Vec<(String, Vec<String>)> =
        docs.iter().map(|d| (d.id.clone(), d.tokens())).collect();
    let index = lexical::build_bm25(&tokenized, bm25_params(config))?;
    index.save(&args.output)?;
    println!(
        "indexed {} documents ({} avg tokens) -> {}",
        index.n_docs(),
        index.avgdl(),
        args.output.display()
    );
    Ok(())
}

fn cmd_retrieve(config: &Config, args: RetrieveArgs) -> CliResult {
    let index = lexical::Bm25Index::load(&args.index)?;
    let queries = corpus::read_documents(&args.queries)?;
    let k = args.k.unwrap_or(config.bm25.k);
    if k == 0 {
        return Err(CliError::usage("--k must be at least 1"));
    }
    let mut records = Vec::new();
    for query in &queries {
        for (rank, (doc_id, score)) in index.top_k(&query.tokens(), k).into_iter().enumerate() {
            records.push(RunRecord {
                query_id: query.id.clone(),
                doc_id,
                rank: rank as u32 + 1,
                score,
                run_tag: args.run_tag.clone(),
            });
        }
    }
    RunFile::new(records)?.write(&args.output)?;
    println!(
        "retrieved top-{k} for {} queries -> {}",
        queries.len(),
        args.output.display()
    );
    Ok(())
}

fn chunk_spec(config: &Config, window: Option<usize>, stride: Option<usize>) -> Result<ChunkSpec, CliError> {
    Ok(ChunkSpec::new(
        window.unwrap_or(config.chunk.window),
        stride.unwrap_or(config.chunk.stride),
    )?)
}

fn cmd_chunk(config: &Config, args: ChunkArgs) -> CliResult {
    let spec = chunk_spec(config, args.window, args.stride)?;
    match (&args.corpus, &args.pairs) {
        (Some(corpus_path), None) => {
            let docs = corpus::read_documents(corpus_path)?;
            let mut out = String::new();
            let mut count = 0usize;
            for doc in &docs {
                for chunk in chunker::chunk_tokens(&doc.id, &doc.tokens(), &spec) {
                    let _ = writeln!(
                        out,
                        "{}",
                        serde_json::to_string(&chunk).expect("chunk serializes")
                    );
                    count += 1;
                }
            }
            fs::write(&args.output, out)?;
            println!("wrote {count} chunks -> {}", args.output.display());
        }
        (None, Some(pairs_path)) => {
            let pairs = datagen::read_pairs(pairs_path)?;
            let mut expanded = Vec::new();
            for (i, pair) in pairs.iter().enumerate() {
                let article_id = pair
                    .article_id
                    .clone()
                    .unwrap_or_else(|| format!("pair{i}"));
                let tokens = lexical::tokenize(&pair.text_b);
                expanded.extend(chunker::expand_pairs(
                    &pair.query_id,
                    &pair.text_a,
                    &article_id,
                    &tokens,
                    pair.label,
                    &spec,
                )?);
            }
            datagen::write_pairs(&args.output, &expanded)?;
            println!(
                "expanded {} pairs into {} chunk pairs -> {}",
                pairs.len(),
                expanded.len(),
                args.output.display()
            );
        }
        _ => {
            return Err(CliError::usage(
                "chunk needs exactly one of --corpus or --pairs",
            ))
        }
    }
    Ok(())
}

fn load_questions_with_annotations(
    questions_path: &Path,
    annotations_path: &Path,
) -> Result<(Vec<AnnotatedQuestion>, Vec<datagen::Annotation>), CliError> {
    let questions = corpus::read_documents(questions_path)?;
    let annotations = datagen::read_annotations(annotations_path)?;
    let by_query: BTreeMap<&str, &datagen::Annotation> = annotations
        .iter()
        .map(|a| (a.query_id.as_str(), a))
        .collect();
    let annotated = questions
        .iter()
        .map(|q| {
            let ann = by_query
                .get(q.id.as_str())
                .ok_or_else(|| datagen::DatagenError::MissingAnnotation(q.id.clone()))?;
            Ok(AnnotatedQuestion {
                id: q.id.clone(),
                text: q.text(),
                positive_ids: ann.positive_ids.clone(),
            })
        })
        .collect::<Result<Vec<_>, datagen::DatagenError>>()?;
    Ok((annotated, annotations))
}

fn load_articles(path: &Path) -> Result<Vec<Article>, CliError> {
    Ok(corpus::read_documents(path)?
        .iter()
        .map(|d| Article {
            id: d.id.clone(),
            text: d.text(),
        })
        .collect())
}

fn article_idf(articles: &[Article]) -> BTreeMap<String, f64> {
    lexical::corpus_idf(
        &articles
            .iter()
            .map(|a| lexical::tokenize(&a.text))
            .collect::<Vec<_>>(),
    )
}

fn cmd_pairs(_config: &Config, args: PairsArgs) -> CliResult {
    let (questions, _) = load_questions_with_annotations(&args.questions, &args.annotations)?;
    let articles = load_articles(&args.articles)?;
    let idf = article_idf(&articles);
    let pairs = datagen::build_retrieval_pairs(&questions, &articles, &idf, args.cap)?;
    datagen::write_pairs(&args.output, &pairs)?;
    println!(
        "built {} pairs for {} questions -> {}",
        pairs.len(),
        questions.len(),
        args.output.display()
    );
    Ok(())
}

fn cmd_augment(_config: &Config, args: AugmentArgs) -> CliResult {
    let (questions, annotations) =
        load_questions_with_annotations(&args.questions, &args.annotations)?;
    let labels: BTreeMap<&str, Option<bool>> = annotations
        .iter()
        .map(|a| (a.query_id.as_str(), a.label))
        .collect();
    let articles = load_articles(&args.articles)?;
    let by_id: BTreeMap<&str, &Article> = articles.iter().map(|a| (a.id.as_str(), a)).collect();
    let idf = article_idf(&articles);

    let language = match args.language.as_str() {
        "english" => Language::English,
        "japanese" => Language::Japanese,
        other => {
            return Err(CliError::usage(format!(
                "unknown rule language `{other}` (use english or japanese)"
            )))
        }
    };
    let rules = match &args.rules {
        Some(path) => datagen::load_negation_rules(path)?,
        None => datagen::builtin_negation_rules().to_vec(),
    };
    let rules = datagen::rules_for(&rules, language);

    let mut out = Vec::new();
    for q in &questions {
        let gold: Vec<Article> = q
            .positive_ids
            .iter()
            .map(|id| {
                by_id
                    .get(id.as_str())
                    .map(|a| (*a).clone())
                    .ok_or_else(|| datagen::DatagenError::UnknownArticle {
                        query_id: q.id.clone(),
                        article_id: id.clone(),
                    })
            })
            .collect::<Result<_, _>>()?;
        let augmented = datagen::augment_relevant(&q.text, &gold, &articles, args.n, &idf);
        let joined = augmented
            .iter()
            .map(|a| a.text.as_str())
            .collect::<Vec<_>>()
            .join("\n\n");
        let label = labels.get(q.id.as_str()).copied().flatten().unwrap_or(true);
        let provenance = if args.n > 0 {
            Provenance::Augmented
        } else {
            Provenance::Gold
        };
        out.push(LabeledPair::new(&q.id, &joined, &q.text, label, provenance));
        if !args.no_negation {
            if let Some((negated, _)) = datagen::negate(&q.text, &rules) {
                out.push(LabeledPair::new(
                    &q.id,
                    &joined,
                    &negated,
                    !label,
                    Provenance::Augmented,
                ));
            }
        }
    }
    datagen::write_pairs(&args.output, &out)?;
    println!(
        "augmented {} questions into {} pairs -> {}",
        questions.len(),
        out.len(),
        args.output.display()
    );
    Ok(())
}

fn cmd_silver(_config: &Config, args: SilverArgs, seed: u64) -> CliResult {
    let cases = corpus::read_documents(&args.corpus)?;
    let opts = datagen::SilverOptions {
        neg_ratio: args.neg_ratio,
        sample_rate: args.sample_rate,
    };
    let pairs = datagen::build_silver_supporting(&cases, &opts, seed);
    datagen::write_pairs(&args.output, &pairs)?;
    println!(
        "generated {} silver pairs from {} cases -> {}",
        pairs.len(),
        cases.len(),
        args.output.display()
    );
    Ok(())
}

fn cmd_paralaw(_config: &Config, args: ParalawArgs, seed: u64) -> CliResult {
    let corpus = paralaw::read_parallel_tsv(&args.input)?;
    let samples = paralaw::build_dataset(&corpus, Language::English, Language::Japanese, seed)?;
    paralaw::write_samples(&args.output, &samples)?;
    println!(
        "generated {} samples from {} documents -> {}",
        samples.len(),
        corpus.len(),
        args.output.display()
    );
    if let (Some(train_path), Some(val_path)) = (&args.train_output, &args.val_output) {
        let (train, val) = paralaw::split(samples, seed)?;
        paralaw::write_samples(train_path, &train)?;
        paralaw::write_samples(val_path, &val)?;
        println!("split {} / {} -> {} , {}", train.len(), val.len(), train_path.display(), val_path.display());
    }
    Ok(())
}

fn parse_stage(spec: &str, default_lr: f64) -> Result<(PathBuf, usize, f64), CliError> {
    let bad = || {
        CliError::usage(format!(
            "bad --stage `{spec}`: expected <pairs.jsonl>:<epochs>[:<learning_rate>]"
        ))
    };
    let (head, last) = spec.rsplit_once(':').ok_or_else(bad)?;
    if let Ok(epochs) = last.parse::<usize>() {
        return Ok((PathBuf::from(head), epochs, default_lr));
    }
    let lr: f64 = last.parse().map_err(|_| bad())?;
    let (path, epochs) = head.rsplit_once(':').ok_or_else(bad)?;
    let epochs: usize = epochs.parse().map_err(|_| bad())?;
    Ok((PathBuf::from(path), epochs, lr))
}

fn cmd_train(config: &Config, args: TrainArgs, seed: u64) -> CliResult {
    let dim = args.dim.unwrap_or(config.scorer.dim);
    let mut stages = Vec::new();
    for spec in &args.stages {
        let (path, epochs, lr) = parse_stage(spec, config.scorer.learning_rate)?;
        let pairs = datagen::read_pairs(&path)?;
        stages.push(TrainStage {
            pairs,
            epochs,
            learning_rate: lr,
        });
    }
    let schedule = TrainSchedule { stages };
    let model = crate::scorer::train(&schedule, dim, seed)?;
    model.save(&args.output)?;
    println!("trained model -> {}", args.output.display());
    Ok(())
}

fn cmd_selflabel(config: &Config, args: SelfLabelArgs, seed: u64) -> CliResult {
    let pairs = datagen::read_pairs(&args.pairs)?;
    let y0: Vec<bool> = pairs.iter().map(|p| p.label).collect();
    let sl_config = SelfLabelConfig {
        e1: args.e1.unwrap_or(config.selflabel.e1),
        e2: args.e2.unwrap_or(config.selflabel.e2),
        decision_threshold: args.threshold.unwrap_or(config.selflabel.threshold),
        learning_rate: args.learning_rate.unwrap_or(config.scorer.learning_rate),
        rounds: args.rounds.unwrap_or(config.selflabel.rounds),
        dim: args.dim.unwrap_or(config.scorer.dim),
    };
    let outcome = selflabel::run_self_label(&pairs, &y0, &sl_config, seed)?;
    outcome.model.save(&args.model_output)?;
    if let Some(path) = &args.pairs_output {
        let relabeled: Vec<LabeledPair> = pairs
            .iter()
            .zip(&outcome.labels)
            .map(|(p, label)| {
                let mut p = p.clone();
                p.label = *label;
                p
            })
            .collect();
        datagen::write_pairs(path, &relabeled)?;
    }
    if let Some(path) = &args.flips_output {
        selflabel::write_flips(path, &outcome.flips)?;
    }
    println!(
        "self-label flipped {} of {} positives; model -> {}",
        outcome.flips.len(),
        y0.iter().filter(|&&l| l).count(),
        args.model_output.display()
    );
    Ok(())
}

fn resolve_backend(config: &Config, args: &FuseArgs) -> Result<ScorerBackend, CliError> {
    if let Some(descriptor) = &args.external {
        return Ok(ScorerBackend::External(ExternalEndpoint::parse(descriptor)?));
    }
    if let Some(path) = &args.model {
        return Ok(ScorerBackend::Builtin(LogRegModel::load(path)?));
    }
    if let Some(descriptor) = &config.scorer.external {
        return Ok(ScorerBackend::External(ExternalEndpoint::parse(descriptor)?));
    }
    Err(CliError::usage(
        "no scorer backend: pass --model or --external, set scorer.external, \
         or export LEXENT_SCORER",
    ))
}

fn cmd_fuse(config: &Config, args: FuseArgs) -> CliResult {
    let queries = corpus::read_documents(&args.queries)?;
    let candidates = corpus::read_documents(&args.candidates)?;
    let by_id: BTreeMap<&str, &Document> =
        candidates.iter().map(|d| (d.id.as_str(), d)).collect();
    let backend = resolve_backend(config, &args)?;
    let mut fusion_config = config.fusion.fusion_config()?;
    if let Some(alpha) = args.alpha {
        fusion_config.w_sem = alpha;
    }
    if let Some(agg) = &args.aggregation {
        let mut section = config.fusion.clone();
        section.aggregation = agg.clone();
        fusion_config.aggregation = section.aggregation()?;
    }
    let strategy = match &args.decide {
        Some(s) => parse_decide_strategy(s, config.fusion.beta, config.fusion.top_k)?,
        None => config.fusion.decide_strategy()?,
    };
    let params = bm25_params(config);

    let restriction: Option<BTreeMap<String, Vec<String>>> = match &args.run {
        Some(path) => {
            let run = RunFile::read(path)?;
            let mut per_query: BTreeMap<String, Vec<String>> = BTreeMap::new();
            for rec in run.records() {
                per_query
                    .entry(rec.query_id.clone())
                    .or_default()
                    .push(rec.doc_id.clone());
            }
            Some(per_query)
        }
        None => None,
    };

    let mut selected_records = Vec::new();
    let mut full_records = Vec::new();
    for query in &queries {
        let pool: Vec<Document> = match &restriction {
            Some(per_query) => match per_query.get(&query.id) {
                Some(ids) => ids
                    .iter()
                    .map(|id| {
                        by_id.get(id.as_str()).map(|d| (*d).clone()).ok_or_else(|| {
                            CliError::Data(format!(
                                "run file references `{id}` absent from the candidate corpus"
                            ))
                        })
                    })
                    .collect::<Result<_, _>>()?,
                None => {
                    eprintln!("warning: no candidates for query `{}`", query.id);
                    continue;
                }
            },
            None => candidates.clone(),
        };
        let ranked = fusion::rank(query, &pool, &fusion_config, &backend, params)?;
        if let Some(dir) = &args.dump_matrices {
            fs::create_dir_all(dir)?;
            for cand in &pool {
                let pair = fusion::build_matrices(query, cand, &backend, params)?;
                let fused = fusion::union(&pair, &fusion_config)?;
                let base = format!("{}__{}", query.id, cand.id);
                fusion::write_matrix(&dir.join(format!("{base}.lex.mat")), &pair.lex)?;
                fusion::write_matrix(&dir.join(format!("{base}.sem.mat")), &pair.sem)?;
                fusion::write_matrix(&dir.join(format!("{base}.fused.mat")), &fused)?;
            }
        }
        for (i, (doc_id, score)) in ranked.iter().enumerate() {
            full_records.push(RunRecord {
                query_id: query.id.clone(),
                doc_id: doc_id.clone(),
                rank: i as u32 + 1,
                score: *score,
                run_tag: args.run_tag.clone(),
            });
        }
        let keep: BTreeSet<String> = fusion::decide(&ranked, strategy)?.into_iter().collect();
        let mut rank_counter = 0u32;
        for (doc_id, score) in &ranked {
            if keep.contains(doc_id) {
                rank_counter += 1;
                selected_records.push(RunRecord {
                    query_id: query.id.clone(),
                    doc_id: doc_id.clone(),
                    rank: rank_counter,
                    score: *score,
                    run_tag: args.run_tag.clone(),
                });
            }
        }
    }
    RunFile::new(selected_records)?.write(&args.output)?;
    if let Some(path) = &args.full_output {
        RunFile::new(full_records)?.write(path)?;
    }
    println!(
        "fused {} queries -> {}",
        queries.len(),
        args.output.display()
    );
    Ok(())
}

fn gold_sets(path: &Path) -> Result<IdSets, CliError> {
    let annotations = datagen::read_annotations(path)?;
    Ok(annotations
        .into_iter()
        .map(|a| (a.query_id, a.positive_ids.into_iter().collect()))
        .collect())
}

fn cmd_ensemble(config: &Config, args: EnsembleArgs) -> CliResult {
    let mut model_scores = ModelScores::new();
    for path in &args.runs {
        let run = RunFile::read(path)?;
        let tag = run
            .records()
            .first()
            .map(|r| r.run_tag.clone())
            .unwrap_or_else(|| path.display().to_string());
        if model_scores.contains_key(&tag) {
            return Err(CliError::Data(format!(
                "duplicate run tag `{tag}`; ensemble inputs must carry distinct tags"
            )));
        }
        model_scores.insert(tag, run.scores_by_query());
    }
    let gold = gold_sets(&args.gold)?;
    let beta = args.beta.unwrap_or(config.eval.beta);
    let strategy = match &args.decide {
        Some(s) => parse_decide_strategy(s, config.fusion.beta, config.fusion.top_k)?,
        None => config.fusion.decide_strategy()?,
    };
    let (weights, metric) = fusion::learn_ensemble(&model_scores, &gold, beta, strategy)?;
    let payload = serde_json::json!({
        "weights": weights.weights,
        "metric": metric,
        "beta": beta,
    });
    fs::write(&args.output, format!("{payload}\n"))?;
    println!("learned weights (metric {metric:.4}) -> {}", args.output.display());
    if let Some(path) = &args.combined_output {
        let combined = fusion::combine_model_scores(&model_scores, &weights);
        let mut records = Vec::new();
        for (query_id, ranked) in &combined {
            let keep: BTreeSet<String> =
                fusion::decide(ranked, strategy)?.into_iter().collect();
            let mut rank_counter = 0u32;
            for (doc_id, score) in ranked {
                if keep.contains(doc_id) {
                    rank_counter += 1;
                    records.push(RunRecord {
                        query_id: query_id.clone(),
                        doc_id: doc_id.clone(),
                        rank: rank_counter,
                        score: *score,
                        run_tag: args.run_tag.clone(),
                    });
                }
            }
        }
        RunFile::new(records)?.write(path)?;
    }
    Ok(())
}

fn cmd_eval(_config: &Config, args: EvalArgs) -> CliResult {
    let run_mode = args.run.is_some() || args.gold.is_some();
    let label_mode = args.pred_labels.is_some() || args.gold_labels.is_some();
    if run_mode && (args.run.is_none() || args.gold.is_none()) {
        return Err(CliError::usage("--run and --gold go together"));
    }
    if label_mode && (args.pred_labels.is_none() || args.gold_labels.is_none()) {
        return Err(CliError::usage(
            "--pred-labels and --gold-labels go together",
        ));
    }
    if !run_mode && !label_mode {
        return Err(CliError::usage(
            "eval needs --run/--gold or --pred-labels/--gold-labels",
        ));
    }

    let mut report: Option<MetricsReport> = None;
    let mut per_query_rows: Vec<(String, f64, f64, f64)> = Vec::new();

    if run_mode {
        let run = RunFile::read(args.run.as_ref().expect("checked"))?;
        let predictions = run.predictions();
        let gold = gold_sets(args.gold.as_ref().expect("checked"))?;
        let r = MetricsReport::from_sets(&predictions, &gold)?;
        let empty = BTreeSet::new();
        for (q, gold_ids) in &gold {
            let pred = predictions.get(q).unwrap_or(&empty);
            let hits = pred.intersection(gold_ids).count() as f64;
            let p = if pred.is_empty() {
                0.0
            } else {
                hits / pred.len() as f64
            };
            let rr = hits / gold_ids.len() as f64;
            per_query_rows.push((q.clone(), p, rr, metrics::f_beta(p, rr, 2.0)));
        }
        report = Some(r);
    }

    if label_mode {
        let pred = metrics::read_labels(args.pred_labels.as_ref().expect("checked"))?;
        let gold = metrics::read_labels(args.gold_labels.as_ref().expect("checked"))?;
        let gold_by_query: BTreeMap<&str, bool> = gold
            .iter()
            .map(|l| (l.query_id.as_str(), l.label))
            .collect();
        let mut pred_vec = Vec::with_capacity(pred.len());
        let mut gold_vec = Vec::with_capacity(pred.len());
        for record in &pred {
            let g = gold_by_query.get(record.query_id.as_str()).ok_or_else(|| {
                CliError::Data(format!(
                    "predicted label for unknown query `{}`",
                    record.query_id
                ))
            })?;
            pred_vec.push(record.label);
            gold_vec.push(*g);
        }
        if pred.len() != gold.len() {
            return Err(CliError::Data(format!(
                "label files differ in size: {} predictions vs {} gold",
                pred.len(),
                gold.len()
            )));
        }
        let label_report = MetricsReport::from_labels(&pred_vec, &gold_vec)?;
        report = Some(match report {
            Some(mut r) => {
                r.accuracy = label_report.accuracy;
                r
            }
            None => {
                for (record, (p, g)) in pred.iter().zip(pred_vec.iter().zip(&gold_vec)) {
                    let hit = if p == g { 1.0 } else { 0.0 };
                    per_query_rows.push((record.query_id.clone(), hit, hit, hit));
                }
                label_report
            }
        });
    }

    let report = report.expect("one mode ran");
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    println!("{json}");
    if let Some(path) = &args.output {
        fs::write(path, format!("{json}\n"))?;
    }
    if let Some(path) = &args.plot_tsv {
        let mut out = String::from("query_id\tprecision\trecall\tf2\n");
        for (q, p, r, f) in &per_query_rows {
            let _ = writeln!(out, "{q}\t{p}\t{r}\t{f}");
        }
        fs::write(path, out)?;
    }
    Ok(())
}
