use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use adhere::causal::{ate_comparison, AteOptions, DatasetKind, Estimator, Outcome};
use adhere::cohort::io::{read_cohort, read_encounters, read_notes, read_patients, write_cohort, write_notes, NoteStore};
use adhere::cohort::{build_cohort, dedup_for_independence, PairFilter};
use adhere::extraction::{
    apply_labels, requests_from_cohort, run_extraction, score_keyed, write_records, ChatBackend, HttpBackend,
    HttpConfig, MockBackend, PipelineOptions, VerifyMode,
};
use adhere::harness::{
    emit_report, run_ablation, run_factor_analysis, run_outcome_ttest, run_vary_ratio, CohortSource,
    ExperimentConfig, ExperimentReport, ReportFormat,
};
use adhere::learners::{classify, BaseLearner, ForestConfig, ModelKind, TrainedModel};
use adhere::synthcohort::{generate_cohort, SynthConfig};
use adhere::topics::{ctfidf_top_terms, render_topics, ClusteredCorpus};
use adhere::{Error, Result};

#[derive(Parser)]
#[command(name = "adhere", version, about = "Treatment non-adherence analysis toolkit")]
struct Cli {
    /// Configuration file (TOML or JSON) for the chosen command.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[arg(long, global = true, value_enum, default_value = "columnar")]
    format: Format,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Columnar,
    Structured,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Columnar => ReportFormat::Columnar,
            Format::Structured => ReportFormat::Structured,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Synthetic cohort with its ground truth.
    Generate {
        #[arg(long)]
        n: Option<usize>,
    },
    #[command(subcommand)]
    Cohort(CohortCommand),
    /// Label non-adherence in second-visit notes.
    Extract(ExtractArgs),
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Treatment-effect comparison, full against adherent-only data.
    Ate(AteArgs),
    #[command(subcommand)]
    Experiment(ExperimentCommand),
    /// Class-based TF-IDF keywords per cluster.
    Topics {
        /// CSV with `excerpt,cluster_id` columns.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
    /// Re-emits a saved structured experiment report.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        chart: bool,
    },
    /// Trains an outcome classifier.
    Train {
        #[arg(long)]
        cohort: PathBuf,
        #[arg(long, value_enum, default_value = "forest")]
        model: Model,
    },
    /// Scores a cohort with a trained classifier.
    Predict {
        #[arg(long)]
        cohort: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
}

#[derive(Subcommand)]
enum CohortCommand {
    /// Pairs encounters and joins patient attributes.
    Build {
        #[arg(long)]
        encounters: PathBuf,
        #[arg(long)]
        patients: PathBuf,
        #[arg(long)]
        notes: Option<PathBuf>,
        /// Outcome-cohort rules: under six months, both readings, top-five medication.
        #[arg(long)]
        outcome: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendKind {
    Mock,
    Http,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    cohort: PathBuf,
    #[arg(long)]
    notes: PathBuf,
    #[arg(long, value_enum, default_value = "mock")]
    backend: BackendKind,
    /// Skip the second, self-checking round.
    #[arg(long)]
    no_verify: bool,
    #[arg(long)]
    base_url: Option<String>,
    #[arg(long)]
    model: Option<String>,
}

#[derive(Subcommand)]
enum AnalyzeCommand {
    /// Unadjusted and adjusted odds ratios of non-adherence.
    Factors {
        #[arg(long)]
        cohort: PathBuf,
        /// Keep one pair per patient first.
        #[arg(long)]
        dedup: bool,
    },
    /// Welch tests of pressure reduction by adherence.
    Outcome {
        #[arg(long)]
        cohort: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Choice {
    Diastolic,
    Systolic,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum DataChoice {
    Full,
    Adherent,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum Base {
    Linear,
    Forest,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Logistic,
    Forest,
}

impl From<Model> for ModelKind {
    fn from(m: Model) -> Self {
        match m {
            Model::Logistic => ModelKind::Logistic,
            Model::Forest => ModelKind::Forest,
        }
    }
}

#[derive(Args)]
struct AteArgs {
    #[arg(long)]
    cohort: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    outcome: Choice,
    #[arg(long, value_enum, default_value = "both")]
    dataset: DataChoice,
    /// Comma-separated subset of ipw, s_learner, t_learner, x_learner.
    #[arg(long, value_delimiter = ',')]
    estimators: Option<Vec<String>>,
    #[arg(long, value_enum, default_value = "forest")]
    base: Base,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Labeled outcome cohort; without it each seed draws a synthetic cohort.
    #[arg(long)]
    cohort: Option<PathBuf>,
    #[arg(long)]
    n_seeds: Option<usize>,
    #[arg(long, value_enum, value_delimiter = ',')]
    models: Option<Vec<Model>>,
    /// Also write an SVG chart of mean +- SEM.
    #[arg(long)]
    chart: bool,
}

#[derive(Subcommand)]
enum ExperimentCommand {
    /// Fixed training size, varying non-adherent share.
    VaryRatio(ExperimentArgs),
    /// Full training set against its adherent part, across sizes.
    AblateNa(ExperimentArgs),
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    error: &'a str,
    message: String,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let rec = ErrorRecord {
                error: e.kind(),
                message: e.to_string(),
            };
            eprintln!("{}", serde_json::to_string(&rec).unwrap_or_else(|_| e.to_string()));
            ExitCode::from(2)
        }
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::Io {
            path: parent.to_path_buf(),
            source: e,
        })?;
    }
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

/// Writes `<stem>.csv` or `<stem>.json` depending on the format.
fn emit<T: Serialize>(cli: &Cli, stem: &str, value: &T, csv: impl FnOnce() -> String) -> Result<PathBuf> {
    let path = match cli.format {
        Format::Columnar => cli.out.join(format!("{stem}.csv")),
        Format::Structured => cli.out.join(format!("{stem}.json")),
    };
    let text = match cli.format {
        Format::Columnar => csv(),
        Format::Structured => json(value)?,
    };
    write(&path, &text)?;
    println!("wrote {}", path.display());
    Ok(path)
}

fn load_toml_or_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    if path.extension().is_some_and(|e| e == "json") {
        Ok(serde_json::from_str(&text)?)
    } else {
        toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))
    }
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    match &cli.command {
        Command::Generate { n } => generate(cli, *n),
        Command::Cohort(CohortCommand::Build {
            encounters,
            patients,
            notes,
            outcome,
        }) => {
            let store = notes.as_deref().map(read_notes).transpose()?;
            let enc = read_encounters(encounters, store.as_ref())?;
            let pats = read_patients(patients)?;
            let filter = if *outcome { PairFilter::outcome() } else { PairFilter::default() };
            let records = build_cohort(&enc, &pats, &filter)?;
            let path = cli.out.join("cohort.csv");
            write_cohort(&path, &records)?;
            println!("wrote {} ({} pairs)", path.display(), records.len());
            Ok(())
        }
        Command::Extract(args) => extract(cli, args),
        Command::Analyze(AnalyzeCommand::Factors { cohort, dedup }) => {
            let mut records = read_cohort(cohort, None)?;
            if *dedup {
                records = dedup_for_independence(records)?;
            }
            let report = run_factor_analysis(&records)?;
            print!("{}", report.to_table());
            emit(cli, "factors", &report, || report.to_csv())?;
            Ok(())
        }
        Command::Analyze(AnalyzeCommand::Outcome { cohort }) => {
            let records = read_cohort(cohort, None)?;
            let report = run_outcome_ttest(&records)?;
            print!("{}", report.to_table());
            emit(cli, "outcome", &report, || report.to_csv())?;
            Ok(())
        }
        Command::Ate(args) => ate(cli, args),
        Command::Experiment(cmd) => experiment(cli, cmd),
        Command::Topics { input, k } => {
            let corpus = ClusteredCorpus::read_csv(input)?;
            let topics = ctfidf_top_terms(&corpus, *k)?;
            print!("{}", render_topics(&topics, &BTreeMap::new()));
            emit(cli, "topics", &topics, || {
                let mut s = String::from("cluster,documents,share,rank,term,score\n");
                for t in &topics {
                    for (i, term) in t.terms.iter().enumerate() {
                        s.push_str(&format!(
                            "{},{},{},{},{},{}\n",
                            t.cluster,
                            t.documents,
                            t.share,
                            i + 1,
                            term.term,
                            term.score
                        ));
                    }
                }
                s
            })?;
            Ok(())
        }
        Command::Report { input, chart } => {
            let text = std::fs::read_to_string(input).map_err(|e| Error::Io {
                path: input.clone(),
                source: e,
            })?;
            let report = ExperimentReport::from_json(&text)?;
            for p in emit_report(&report, &cli.out, cli.format.into(), *chart)? {
                println!("wrote {}", p.display());
            }
            Ok(())
        }
        Command::Train { cohort, model } => {
            let records = read_cohort(cohort, None)?;
            let forest: ForestConfig = match &cli.config {
                Some(p) => load_toml_or_json(p)?,
                None => ForestConfig::default(),
            };
            let trained = TrainedModel::train(&records, (*model).into(), &forest, cli.seed.unwrap_or(0))?;
            let path = cli.out.join("model.json");
            std::fs::create_dir_all(&cli.out).map_err(|e| Error::Io {
                path: cli.out.clone(),
                source: e,
            })?;
            trained.save(&path)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Predict { cohort, model } => {
            let records = read_cohort(cohort, None)?;
            let trained = TrainedModel::load(model)?;
            let scores = trained.predict_proba(&records)?;
            let predicted = classify(&scores, trained.threshold);
            #[derive(Serialize)]
            struct Prediction {
                pair_id: String,
                score: f64,
                predicted: u8,
            }
            let rows: Vec<Prediction> = records
                .iter()
                .zip(scores.iter().zip(&predicted))
                .map(|(r, (&score, &predicted))| Prediction {
                    pair_id: r.pair_id(),
                    score,
                    predicted,
                })
                .collect();
            emit(cli, "predictions", &rows, || {
                let mut s = String::from("pair_id,score,predicted\n");
                for r in &rows {
                    s.push_str(&format!("{},{},{}\n", r.pair_id, r.score, r.predicted));
                }
                s
            })?;
            Ok(())
        }
    }
}

fn generate(cli: &Cli, n: Option<usize>) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => SynthConfig::load(p)?,
        None => SynthConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(n) = n {
        cfg.n = n;
    }
    let (mut records, truth) = generate_cohort(&cfg)?;
    let mut notes = NoteStore::new();
    for r in &mut records {
        if let (Some(id), Some(text)) = (r.pair.second.note_id.clone(), r.pair.second.note_text.take()) {
            notes.insert(id, text);
        }
    }
    let cohort = cli.out.join("cohort.csv");
    write_cohort(&cohort, &records)?;
    write_notes(&cli.out.join("notes.json"), &notes)?;
    write(&cli.out.join("truth.json"), &json(&truth)?)?;
    write(&cli.out.join("config.toml"), &cfg.to_toml()?)?;
    println!(
        "wrote {} records to {} (true ATE diastolic {:.3}, systolic {:.3})",
        records.len(),
        cohort.display(),
        truth.true_ate_diastolic,
        truth.true_ate_systolic
    );
    Ok(())
}

fn extract(cli: &Cli, args: &ExtractArgs) -> Result<()> {
    let notes = read_notes(&args.notes)?;
    let mut records = read_cohort(&args.cohort, Some(&notes))?;
    let gold: BTreeMap<String, _> = records
        .iter()
        .filter_map(|r| r.adherence.clone().map(|a| (r.pair_id(), a)))
        .collect();
    let requests = requests_from_cohort(&records)?;
    let mut options: PipelineOptions = match &cli.config {
        Some(p) => load_toml_or_json(p)?,
        None => PipelineOptions::default(),
    };
    options.verify = !args.no_verify;
    if let Some(t) = cli.threads {
        options.concurrency = t.max(1);
    }
    let backend: Box<dyn ChatBackend> = match args.backend {
        BackendKind::Mock => Box::new(MockBackend::new(VerifyMode::default())),
        BackendKind::Http => {
            let mut cfg = HttpConfig::default();
            if let Some(u) = &args.base_url {
                cfg.base_url = u.clone();
            }
            if let Some(m) = &args.model {
                cfg.model = m.clone();
            }
            Box::new(HttpBackend::from_env(cfg)?)
        }
    };
    let results = run_extraction(&requests, backend.as_ref(), &options);
    std::fs::create_dir_all(&cli.out).map_err(|e| Error::Io {
        path: cli.out.clone(),
        source: e,
    })?;
    write_records(&cli.out.join("extraction.jsonl"), &results)?;
    for r in &mut records {
        r.adherence = None;
    }
    let labeled = apply_labels(&mut records, &results);
    write_cohort(&cli.out.join("labeled_cohort.csv"), &records)?;
    println!("labeled {labeled} of {} pairs", records.len());
    if !gold.is_empty() {
        let predicted: BTreeMap<String, _> = records
            .iter()
            .filter_map(|r| r.adherence.clone().map(|a| (r.pair_id(), a)))
            .collect();
        let gold: BTreeMap<String, _> = gold.into_iter().filter(|(k, _)| predicted.contains_key(k)).collect();
        let metrics = score_keyed(&predicted, &gold)?;
        write(&cli.out.join("validation.json"), &json(&metrics)?)?;
        println!(
            "against existing labels: accuracy {}, precision {}, recall {}",
            show(metrics.accuracy),
            show(metrics.precision),
            show(metrics.recall)
        );
    }
    Ok(())
}

fn show(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.3}"))
}

fn ate(cli: &Cli, args: &AteArgs) -> Result<()> {
    let records = read_cohort(&args.cohort, None)?;
    let mut options = AteOptions {
        base: match args.base {
            Base::Linear => BaseLearner::Linear,
            Base::Forest => BaseLearner::default(),
        },
        ..AteOptions::default()
    };
    if let Some(s) = cli.seed {
        options.seed = s;
    }
    options.outcomes = match args.outcome {
        Choice::Diastolic => vec![Outcome::Diastolic],
        Choice::Systolic => vec![Outcome::Systolic],
        Choice::Both => Outcome::ALL.to_vec(),
    };
    options.datasets = match args.dataset {
        DataChoice::Full => vec![DatasetKind::Full],
        DataChoice::Adherent => vec![DatasetKind::AdherentOnly],
        DataChoice::Both => DatasetKind::ALL.to_vec(),
    };
    if let Some(list) = &args.estimators {
        options.estimators = list.iter().map(|s| s.parse::<Estimator>()).collect::<Result<_>>()?;
    }
    let report = ate_comparison(&records, &options)?;
    print!("{}", report.to_table());
    emit(cli, "ate", &report, || report.to_csv())?;
    Ok(())
}

fn experiment(cli: &Cli, cmd: &ExperimentCommand) -> Result<()> {
    let args = match cmd {
        ExperimentCommand::VaryRatio(a) | ExperimentCommand::AblateNa(a) => a,
    };
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.base_seed = s;
    }
    if let Some(n) = args.n_seeds {
        cfg.n_seeds = n;
    }
    if let Some(m) = &args.models {
        cfg.models = m.iter().map(|&m| m.into()).collect();
    }
    if let Some(path) = &args.cohort {
        cfg.source = CohortSource::File { path: path.clone() };
    }
    let report = match cmd {
        ExperimentCommand::VaryRatio(_) => run_vary_ratio(&cfg)?,
        ExperimentCommand::AblateNa(_) => run_ablation(&cfg)?,
    };
    for p in emit_report(&report, &cli.out, cli.format.into(), args.chart)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}
