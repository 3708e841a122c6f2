use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cfrag::corpus::{
    Discard, SynthConfig, extract_document, load_corpus, synthesize_corpus, write_corpus,
    write_extraction,
};
use cfrag::evalkit::{Prediction, build_report, render_report};
use cfrag::jsonl;
use cfrag::par::Execution;
use cfrag::pipeline::{
    CriticMode, PipelineError, ReasonerMode, RetrieverMode, RunConfig, build_training_export,
    render_ablation_table, run_ablation, run_pipeline, write_training_export,
};
use cfrag::progdsl::run_source;
use cfrag::qagen::{
    GenConfig, QAItem, Split, generate_questions, read_dataset, split_dataset, validate_records,
    write_dataset, write_validation_csv,
};
use cfrag::retrieval::{RetrievalResult, TfIdfIndex, hit_curve, render_hit_table};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Carbon-footprint question answering over product reports.
#[derive(Debug, Parser)]
#[command(name = "cfrag", version)]
struct Cli {
    /// Process items one at a time instead of in parallel.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic report corpus.
    Synth {
        #[arg(long, default_value_t = 200)]
        docs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Corpus directory to create.
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract structured fields from every document in a corpus.
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate questions, gold programs and a document-level split.
    Genqa {
        #[arg(long)]
        corpus: PathBuf,
        /// Output JSONL file.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Share of documents in the train split.
        #[arg(long, default_value_t = 0.8)]
        ratio: f64,
        #[arg(long)]
        per_doc: Option<usize>,
    },
    /// Check extracted records and write a review CSV.
    Validate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// TF-IDF index operations.
    Index {
        #[command(subcommand)]
        action: IndexAction,
    },
    /// Rank documents for each question.
    Retrieve {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        questions: PathBuf,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
        /// Questions to retrieve for.
        #[arg(long, value_enum, default_value_t = SplitArg::All)]
        split: SplitArg,
    },
    /// Print hit@k for saved retrieval results.
    Hitrate {
        #[arg(long)]
        retrieval: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,3,5,10")]
        k: Vec<usize>,
        /// Question file giving gold documents; otherwise the ids stored
        /// with the results are used.
        #[arg(long)]
        questions: Option<PathBuf>,
    },
    /// Run the full pipeline on the test split.
    Run(RunArgs),
    /// Run several configurations over the same questions and compare them.
    Ablate {
        /// Configuration files, one per table row, in order.
        #[arg(long = "config", required = true)]
        configs: Vec<PathBuf>,
        /// Directory for the table and each run's artifacts.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write critic and reasoner fine-tuning pairs from the train split.
    ExportTrain {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        questions: PathBuf,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
        /// Used only when the question file has no split yet.
        #[arg(long, default_value_t = 0.8)]
        ratio: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Answer-program tools.
    Prog {
        #[command(subcommand)]
        action: ProgAction,
    },
    /// Score predictions against gold answers.
    Eval {
        #[arg(long)]
        questions: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        /// Gold questions to score against; `auto` means the test split
        /// when the file is split, otherwise everything.
        #[arg(long, value_enum, default_value_t = EvalSplit::Auto)]
        split: EvalSplit,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum IndexAction {
    /// Fit the index on a corpus and save it as JSON.
    Build {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum ProgAction {
    /// Execute a program file and print its answer list as JSON.
    Run { file: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SplitArg {
    Train,
    Test,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EvalSplit {
    Auto,
    Train,
    Test,
    All,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RetrieverArg {
    Tfidf,
    Gold,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CriticArg {
    None,
    Lexical,
    Remote,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReasonerArg {
    Oracle,
    Remote,
}

/// Flags override the configuration file.
#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, value_enum)]
    retriever: Option<RetrieverArg>,
    #[arg(long, value_enum)]
    critic: Option<CriticArg>,
    #[arg(long, value_enum)]
    reasoner: Option<ReasonerArg>,
    #[arg(long)]
    demote_probability: Option<f64>,
    #[arg(long)]
    llm_url: Option<String>,
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Data(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        if e.is_config_error() {
            CliError::Config(e.to_string())
        } else {
            CliError::Data(e.to_string())
        }
    }
}

/// Everything else the library reports is a problem with the input data.
fn data<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Data(e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    match dispatch(cli.command, exec) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                CliError::Config(m) => eprintln!("error: {m}"),
                CliError::Data(m) => eprintln!("error: {m}"),
            }
            ExitCode::from(e.code())
        }
    }
}

fn dispatch(command: Command, exec: Execution) -> Result<(), CliError> {
    match command {
        Command::Synth { docs, seed, out } => synth(docs, seed, &out),
        Command::Ingest { corpus, out } => ingest(&corpus, &out),
        Command::Genqa {
            corpus,
            out,
            seed,
            ratio,
            per_doc,
        } => genqa(&corpus, &out, seed, ratio, per_doc, exec),
        Command::Validate { corpus, out } => validate(&corpus, &out),
        Command::Index {
            action: IndexAction::Build { corpus, out },
        } => {
            let docs = load_corpus(&corpus).map_err(data)?;
            let index = TfIdfIndex::build_with(&docs, exec).map_err(data)?;
            ensure_parent(&out)?;
            index.save(&out).map_err(data)?;
            println!(
                "indexed {} documents, {} terms -> {}",
                index.len(),
                index.vocabulary.len(),
                out.display()
            );
            Ok(())
        }
        Command::Retrieve {
            index,
            questions,
            k,
            out,
            split,
        } => retrieve(&index, &questions, k, &out, split, exec),
        Command::Hitrate {
            retrieval,
            k,
            questions,
        } => hitrate(&retrieval, &k, questions.as_deref()),
        Command::Run(args) => run(args, exec),
        Command::Ablate { configs, out } => ablate(&configs, out.as_deref(), exec),
        Command::ExportTrain {
            corpus,
            questions,
            k,
            out,
            ratio,
            seed,
        } => export_train(&corpus, &questions, k, &out, ratio, seed, exec),
        Command::Prog {
            action: ProgAction::Run { file },
        } => {
            let source = fs::read_to_string(&file)
                .map_err(|e| CliError::Data(format!("{}: {e}", file.display())))?;
            let answers = run_source(&source).map_err(data)?;
            println!(
                "{}",
                serde_json::to_string(&answers).expect("answers serialize")
            );
            Ok(())
        }
        Command::Eval {
            questions,
            predictions,
            split,
            out,
        } => eval(&questions, &predictions, split, out.as_deref()),
    }
}

fn ensure_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))
        }
        _ => Ok(()),
    }
}

fn check_ratio(ratio: f64) -> Result<(), CliError> {
    if ratio > 0.0 && ratio < 1.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!(
            "--ratio must lie strictly between 0 and 1, got {ratio}"
        )))
    }
}

fn check_k(k: usize) -> Result<(), CliError> {
    if k == 0 {
        Err(CliError::Config("--k must be at least 1".into()))
    } else {
        Ok(())
    }
}

fn synth(docs: usize, seed: u64, out: &Path) -> Result<(), CliError> {
    let config = SynthConfig {
        documents: docs,
        ..SynthConfig::default()
    };
    let (documents, records) =
        synthesize_corpus(&config, seed).map_err(|e| CliError::Config(e.to_string()))?;
    write_corpus(out, &documents).map_err(data)?;
    // Ground truth for checking extraction.
    write_extraction(&out.join("truth"), &records, &[]).map_err(data)?;
    println!("wrote {} documents to {}", documents.len(), out.display());
    Ok(())
}

fn extract_all(
    corpus: &Path,
) -> Result<(Vec<cfrag::corpus::ExtractionRecord>, Vec<Discard>), CliError> {
    let docs = load_corpus(corpus).map_err(data)?;
    let mut records = Vec::new();
    let mut discards = Vec::new();
    for doc in &docs {
        match extract_document(doc) {
            Ok(r) => records.push(r),
            Err(d) => discards.push(d),
        }
    }
    Ok((records, discards))
}

fn ingest(corpus: &Path, out: &Path) -> Result<(), CliError> {
    let (records, discards) = extract_all(corpus)?;
    write_extraction(out, &records, &discards).map_err(data)?;
    println!(
        "extracted {} records, discarded {}",
        records.len(),
        discards.len()
    );
    for d in &discards {
        println!("  {}: {} ({})", d.doc_id, d.field, d.reason.as_str());
    }
    Ok(())
}

fn genqa(
    corpus: &Path,
    out: &Path,
    seed: u64,
    ratio: f64,
    per_doc: Option<usize>,
    exec: Execution,
) -> Result<(), CliError> {
    check_ratio(ratio)?;
    let mut config = GenConfig {
        execution: exec,
        ..GenConfig::default()
    };
    if let Some(n) = per_doc {
        if n == 0 {
            return Err(CliError::Config("--per-doc must be at least 1".into()));
        }
        config.questions_per_doc = n;
    }
    let (records, discards) = extract_all(corpus)?;
    if !discards.is_empty() {
        log::warn!(
            "{} documents could not be extracted and are skipped",
            discards.len()
        );
    }
    let items = generate_questions(&records, &config, seed).map_err(data)?;
    let items = split_dataset(items, ratio, seed).map_err(data)?;
    write_dataset(out, &items).map_err(data)?;
    let test = items
        .iter()
        .filter(|q| q.split == Some(Split::Test))
        .count();
    println!(
        "wrote {} questions ({} train, {} test) to {}",
        items.len(),
        items.len() - test,
        test,
        out.display()
    );
    Ok(())
}

fn validate(corpus: &Path, out: &Path) -> Result<(), CliError> {
    let (records, _) = extract_all(corpus)?;
    let report = validate_records(&records);
    ensure_parent(out)?;
    write_validation_csv(out, &report).map_err(data)?;
    let flagged: Vec<&str> = report.needs_review().map(|e| e.doc_id.as_str()).collect();
    println!(
        "{} records checked, {} need review",
        report.entries.len(),
        flagged.len()
    );
    for id in flagged {
        println!("  {id}");
    }
    Ok(())
}

fn select_split(items: Vec<QAItem>, split: SplitArg) -> Vec<QAItem> {
    let wanted = match split {
        SplitArg::All => return items,
        SplitArg::Train => Split::Train,
        SplitArg::Test => Split::Test,
    };
    items
        .into_iter()
        .filter(|q| q.split == Some(wanted))
        .collect()
}

fn retrieve(
    index: &Path,
    questions: &Path,
    k: usize,
    out: &Path,
    split: SplitArg,
    exec: Execution,
) -> Result<(), CliError> {
    check_k(k)?;
    let index = TfIdfIndex::load(index).map_err(data)?;
    let mut items = select_split(read_dataset(questions).map_err(data)?, split);
    items.sort_by(|a, b| a.qa_id.cmp(&b.qa_id));
    let results = index.retrieve_all(&items, k, exec).map_err(data)?;
    jsonl::write(out, &results).map_err(data)?;
    println!(
        "wrote {} retrieval results to {}",
        results.len(),
        out.display()
    );
    Ok(())
}

fn hitrate(retrieval: &Path, ks: &[usize], questions: Option<&Path>) -> Result<(), CliError> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(CliError::Config("--k values must be at least 1".into()));
    }
    let results: Vec<RetrievalResult> = jsonl::read(retrieval).map_err(data)?;
    let gold: HashMap<String, String> = match questions {
        Some(path) => read_dataset(path)
            .map_err(data)?
            .into_iter()
            .map(|q| (q.qa_id, q.doc_id))
            .collect(),
        None => HashMap::new(),
    };
    let curve = hit_curve(&results, &gold, ks).map_err(data)?;
    print!("{}", render_hit_table(&curve));
    Ok(())
}

fn run_config(args: RunArgs, exec: Execution) -> Result<RunConfig, CliError> {
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if exec == Execution::Sequential {
        config.execution = exec;
    }
    if let Some(v) = args.name {
        config.name = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
    }
    if let Some(v) = args.out {
        config.out = Some(v);
    }
    if let Some(v) = args.corpus {
        config.corpus = Some(v);
        config.synth = None;
    }
    if let Some(v) = args.dataset {
        config.dataset = Some(v);
    }
    if let Some(v) = args.k {
        config.k = v;
    }
    if let Some(v) = args.retriever {
        config.retriever = match v {
            RetrieverArg::Tfidf => RetrieverMode::Tfidf,
            RetrieverArg::Gold => RetrieverMode::Gold,
        };
    }
    if let Some(v) = args.critic {
        config.critic = match v {
            CriticArg::None => CriticMode::None,
            CriticArg::Lexical => CriticMode::Lexical,
            CriticArg::Remote => CriticMode::Remote,
        };
    }
    if let Some(v) = args.reasoner {
        config.reasoner = match v {
            ReasonerArg::Oracle => ReasonerMode::Oracle,
            ReasonerArg::Remote => ReasonerMode::Remote,
        };
    }
    if let Some(v) = args.demote_probability {
        config.demote_probability = v;
    }
    if let Some(v) = args.llm_url {
        config.llm.url = Some(v);
    }
    config.validate()?;
    Ok(config)
}

fn run(args: RunArgs, exec: Execution) -> Result<(), CliError> {
    let config = run_config(args, exec)?;
    let outcome = run_pipeline(&config)?;
    print!("{}", render_report(&outcome.report));
    if let Some(out) = &config.out {
        println!("artifacts written to {}", out.display());
    }
    Ok(())
}

fn ablate(configs: &[PathBuf], out: Option<&Path>, exec: Execution) -> Result<(), CliError> {
    let mut loaded = Vec::with_capacity(configs.len());
    for (i, path) in configs.iter().enumerate() {
        let mut config = RunConfig::load(path)?;
        if exec == Execution::Sequential {
            config.execution = exec;
        }
        if let Some(dir) = out {
            let stem = if config.name.is_empty() {
                format!("config{i}")
            } else {
                config
                    .name
                    .replace(|c: char| !c.is_ascii_alphanumeric() && c != '-', "_")
            };
            config.out = Some(dir.join(format!("{i:02}-{stem}")));
        }
        config.validate()?;
        loaded.push(config);
    }
    let result = run_ablation(&loaded)?;
    let table = render_ablation_table(&result.rows);
    print!("{table}");
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
        let write = |name: &str, text: String| {
            let path = dir.join(name);
            fs::write(&path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
        };
        write("ablation.txt", table)?;
        write(
            "ablation.json",
            serde_json::to_string_pretty(&result.rows).expect("rows serialize") + "\n",
        )?;
    }
    Ok(())
}

fn export_train(
    corpus: &Path,
    questions: &Path,
    k: usize,
    out: &Path,
    ratio: f64,
    seed: u64,
    exec: Execution,
) -> Result<(), CliError> {
    check_k(k)?;
    check_ratio(ratio)?;
    let docs = load_corpus(corpus).map_err(data)?;
    let mut items = read_dataset(questions).map_err(data)?;
    if items.iter().any(|q| q.split.is_none()) {
        items = split_dataset(items, ratio, seed).map_err(data)?;
    }
    let export = build_training_export(&docs, &items, k, exec)?;
    write_training_export(out, &export)?;
    println!(
        "wrote {} critic and {} reasoner training pairs to {}",
        export.critic.len(),
        export.reasoner.len(),
        out.display()
    );
    Ok(())
}

fn eval(
    questions: &Path,
    predictions: &Path,
    split: EvalSplit,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let items = read_dataset(questions).map_err(data)?;
    let preds: Vec<Prediction> = jsonl::read(predictions).map_err(data)?;
    let split = match split {
        EvalSplit::Auto if items.iter().any(|q| q.split.is_some()) => SplitArg::Test,
        EvalSplit::Auto | EvalSplit::All => SplitArg::All,
        EvalSplit::Train => SplitArg::Train,
        EvalSplit::Test => SplitArg::Test,
    };
    let golds = select_split(items, split);
    let report = build_report(&preds, &golds, None).map_err(data)?;
    let text = render_report(&report);
    print!("{text}");
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?;
        let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
        for (name, body) in [("report.json", json), ("report.txt", text)] {
            let path = dir.join(name);
            fs::write(&path, body)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        }
    }
    Ok(())
}
