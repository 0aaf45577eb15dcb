//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 backend error.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::augment::{
    augment_with_explainer, emit_training_records, write_records_jsonl, write_records_tsv, NeutralPolicy,
};
use crate::backend::{Backend, ClientOptions, HttpBackend, MockBackend, MockBackendSpec, MockServer, Normalization};
use crate::config::{CliConfig, MOCK_BACKEND};
use crate::dataset::{read_examples, read_scores, write_examples, write_predictions, DatasetFormat, ReadOptions};
use crate::domain::{Label, LabeledExample, Mode};
use crate::error::{Error, Result};
use crate::eval::{compute_metrics, tune_threshold, Objective};
use crate::features::{extract_features, train_linear, write_features_csv, LinearModel};
use crate::pipeline::score_batch;
use crate::template::ComponentKind;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_BACKEND: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "hhd", version, about = "Headline hallucination detection toolkit")]
struct Cli {
    /// TOML configuration file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Backend: http(s)://host:port, `mock`, or `mock:<fixture.json>`.
    #[arg(long, global = true)]
    backend: Option<String>,
    /// Maximum backend requests in flight.
    #[arg(long, global = true)]
    concurrency: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score (article, headline) pairs into a predictions file.
    Score(ScoreArgs),
    /// Compare predictions with gold labels.
    Eval(EvalArgs),
    /// Pick the decision threshold that maximizes an objective on a dev split.
    TuneThreshold(TuneArgs),
    /// Add explainer-generated explanations to a labeled corpus.
    Augment(AugmentArgs),
    /// Convert an NLI or TRUE file into the HHD JSONL schema.
    Adapt(AdaptArgs),
    /// Write teacher-forcing (input, target) records for each component.
    EmitTrain(EmitArgs),
    /// Export handcrafted baseline features as CSV.
    Features(FeaturesArgs),
    /// Train or apply the linear feature baseline.
    #[command(subcommand)]
    Baseline(BaselineCommand),
    /// Serve the mock backend over HTTP.
    MockServe(MockServeArgs),
}

#[derive(Debug, Args)]
struct PipelineFlags {
    /// full, no_hinted or no_explanation.
    #[arg(long)]
    mode: Option<Mode>,
    /// Scores at or above this are labeled Contradict.
    #[arg(long)]
    threshold: Option<f64>,
    /// renormalized_pair or raw_first_token.
    #[arg(long)]
    normalization: Option<Normalization>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_output_tokens: Option<usize>,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    /// HHD JSONL pairs.
    #[arg(long = "in")]
    input: PathBuf,
    /// Predictions JSONL; metadata goes to `<out>.meta.json`.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    pipeline: PipelineFlags,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// JSONL with `id` and `hallucination_prob`.
    #[arg(long)]
    pred: PathBuf,
    /// HHD JSONL with gold labels, matched to predictions by id.
    #[arg(long)]
    gold: PathBuf,
    /// Defaults to the configured pipeline threshold.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct TuneArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gold: PathBuf,
    /// accuracy or f1.
    #[arg(long, default_value = "accuracy")]
    objective: Objective,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct AugmentFlags {
    /// Generated explanations per example.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    no_dedupe: bool,
    #[arg(long)]
    aug_seed: Option<u64>,
}

#[derive(Debug, Args)]
struct AugmentArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    augmentation: AugmentFlags,
}

#[derive(Debug, Args)]
struct AdaptArgs {
    /// esnli, anli or true.
    #[arg(long)]
    format: DatasetFormat,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// What to do with NLI neutral items.
    #[arg(long)]
    neutral: Option<NeutralPolicyArg>,
    /// TRUE dataset name; inferred from the file name by default.
    #[arg(long)]
    true_dataset: Option<String>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum NeutralPolicyArg {
    Reject,
    AsContradict,
}

impl From<NeutralPolicyArg> for NeutralPolicy {
    fn from(p: NeutralPolicyArg) -> NeutralPolicy {
        match p {
            NeutralPolicyArg::Reject => NeutralPolicy::Reject,
            NeutralPolicyArg::AsContradict => NeutralPolicy::AsContradict,
        }
    }
}

#[derive(Debug, Args)]
struct EmitArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Receives records.jsonl and one TSV per component.
    #[arg(long)]
    out_dir: PathBuf,
    /// Comma-separated subset of reasoning, hinted, explainer.
    #[arg(long, value_delimiter = ',')]
    components: Option<Vec<ComponentKind>>,
}

#[derive(Debug, Args)]
struct FeaturesArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum BaselineCommand {
    /// Fit the model on labeled HHD JSONL.
    Train {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 500)]
        epochs: usize,
        #[arg(long, default_value_t = 0.1)]
        lr: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write `{"id","hallucination_prob","label"}` lines for each pair.
    Predict {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct MockServeArgs {
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// 0 picks a free port.
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Scripted fixture; the heuristic mock is served without one.
    #[arg(long)]
    fixture: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    threads: usize,
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to standard error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidConfig(_) => EXIT_USAGE,
        Error::Backend(_) | Error::MissingClassLogprobs => EXIT_BACKEND,
        _ => EXIT_DATA,
    }
}

fn execute(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => CliConfig::load(path)?,
        None => CliConfig::default(),
    };
    if let Some(url) = cli.backend {
        config.backend_url = url;
    }
    if let Some(n) = cli.concurrency {
        config.concurrency_limit = n;
    }
    match cli.command {
        Command::Score(args) => {
            apply_pipeline_flags(&mut config, &args.pipeline);
            config.validate()?;
            score(&config, &args)
        }
        Command::Eval(args) => {
            config.validate()?;
            eval(&config, &args)
        }
        Command::TuneThreshold(args) => tune(&args),
        Command::Augment(args) => {
            if let Some(k) = args.augmentation.k {
                config.augmentation.k = k;
            }
            if args.augmentation.no_dedupe {
                config.augmentation.dedupe = false;
            }
            if let Some(seed) = args.augmentation.aug_seed {
                config.augmentation.seed = seed;
            }
            config.validate()?;
            augment(&config, &args)
        }
        Command::Adapt(args) => {
            if let Some(p) = args.neutral {
                config.augmentation.neutral = p.into();
            }
            adapt(&config, &args)
        }
        Command::EmitTrain(args) => {
            config.validate()?;
            emit(&config, &args)
        }
        Command::Features(args) => features(&args),
        Command::Baseline(cmd) => baseline(cmd),
        Command::MockServe(args) => {
            config.validate()?;
            mock_serve(&config, &args)
        }
    }
}

fn apply_pipeline_flags(config: &mut CliConfig, flags: &PipelineFlags) {
    let p = &mut config.pipeline;
    if let Some(mode) = flags.mode {
        p.mode = mode;
    }
    if let Some(t) = flags.threshold {
        p.threshold = t;
    }
    if let Some(n) = flags.normalization {
        p.normalization = n;
    }
    if let Some(seed) = flags.seed {
        p.seed = Some(seed);
    }
    if let Some(n) = flags.max_output_tokens {
        p.max_output_tokens = n;
    }
}

/// Builds the backend named by `config.backend_url`.
pub fn connect(config: &CliConfig) -> Result<Arc<dyn Backend>> {
    let url = config.backend_url.trim();
    if url == MOCK_BACKEND {
        return Ok(Arc::new(MockBackend::heuristic().with_template(config.template.clone())));
    }
    if let Some(fixture) = url.strip_prefix("mock:") {
        return Ok(Arc::new(MockBackend::load(fixture)?));
    }
    if url.starts_with("http://") || url.starts_with("https://") {
        let options = ClientOptions {
            max_in_flight: config.concurrency_limit,
            ..ClientOptions::default()
        };
        return Ok(Arc::new(HttpBackend::with_options(url, options)));
    }
    Err(Error::InvalidConfig(format!(
        "backend {url:?} is neither an http(s) URL nor mock[:<fixture>]"
    )))
}

fn load_hhd(path: &Path) -> Result<Vec<LabeledExample>> {
    Ok(read_examples(path, DatasetFormat::HhdJsonl, &ReadOptions::default())?.examples)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".meta.json");
    out.with_file_name(name)
}

fn score(config: &CliConfig, args: &ScoreArgs) -> Result<()> {
    let examples = load_hhd(&args.input)?;
    let backend = connect(config)?;
    let pipeline = config.effective_pipeline();
    let results = score_batch(&examples, backend.as_ref(), &pipeline, config.concurrency_limit);

    let mut predictions = Vec::with_capacity(results.len());
    let mut ids = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (example, result) in examples.iter().zip(results) {
        match result {
            Ok(p) => {
                if let Some(w) = &p.warning {
                    log::warn!("{}: {w}", example.id());
                }
                predictions.push(p);
                ids.push(example.id().to_string());
            }
            Err(e) => {
                eprintln!("error: {}: {e}", example.id());
                failures.push((example.id().to_string(), e));
            }
        }
    }
    write_predictions(&predictions, &ids, &args.out)?;

    let meta = serde_json::json!({
        "config": config,
        "provenance": pipeline.provenance(),
        "input": args.input,
        "scored": predictions.len(),
        "failed_ids": failures.iter().map(|(id, _)| id.as_str()).collect::<Vec<_>>(),
    });
    let meta_path = sidecar_path(&args.out);
    let mut w = create(&meta_path)?;
    writeln!(w, "{}", serde_json::to_string_pretty(&meta).expect("metadata serializes")).map_err(|e| Error::io(&meta_path, e))?;
    w.flush().map_err(|e| Error::io(&meta_path, e))?;

    match failures.into_iter().next() {
        None => Ok(()),
        Some((_, first)) => Err(first),
    }
}

/// Pairs prediction scores with gold labels by id, in gold-file order.
fn aligned_scores(pred: &Path, gold: &Path) -> Result<(Vec<f64>, Vec<Label>)> {
    let scores: HashMap<String, f64> = read_scores(pred)?.into_iter().collect();
    let gold = load_hhd(gold)?;
    let mut s = Vec::with_capacity(gold.len());
    let mut l = Vec::with_capacity(gold.len());
    for example in &gold {
        let label = example
            .label()
            .ok_or_else(|| Error::Invalid(format!("gold example {} has no label", example.id())))?;
        let score = scores
            .get(example.id())
            .ok_or_else(|| Error::Invalid(format!("no prediction for gold example {}", example.id())))?;
        s.push(*score);
        l.push(label);
    }
    Ok((s, l))
}

fn eval(config: &CliConfig, args: &EvalArgs) -> Result<()> {
    let (scores, labels) = aligned_scores(&args.pred, &args.gold)?;
    let threshold = args.threshold.unwrap_or(config.pipeline.threshold);
    let report = compute_metrics(&scores, &labels, threshold)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else {
        print!("{report}");
    }
    Ok(())
}

fn tune(args: &TuneArgs) -> Result<()> {
    let (scores, labels) = aligned_scores(&args.pred, &args.gold)?;
    let threshold = tune_threshold(&scores, &labels, args.objective)?;
    let report = compute_metrics(&scores, &labels, threshold)?;
    if args.json {
        let out = serde_json::json!({ "threshold": threshold, "objective": args.objective, "report": report });
        println!("{}", serde_json::to_string_pretty(&out).expect("serializes"));
    } else {
        println!("{threshold}");
        eprint!("{report}");
    }
    Ok(())
}

fn augment(config: &CliConfig, args: &AugmentArgs) -> Result<()> {
    let examples = load_hhd(&args.input)?;
    let backend = connect(config)?;
    let out = augment_with_explainer(
        &examples,
        backend.as_ref(),
        &config.augmentation,
        &config.template,
        config.concurrency_limit,
    )?;
    write_examples(&out.examples, &args.out)?;
    eprintln!(
        "{} examples in, {} out, {} duplicate explanations dropped, {} explainer failures",
        examples.len(),
        out.examples.len(),
        out.dropped_duplicates,
        out.failures.len()
    );
    match out.failures.into_iter().next() {
        None => Ok(()),
        Some((id, e)) => {
            eprintln!("error: {id}: {e}");
            Err(e)
        }
    }
}

fn adapt(config: &CliConfig, args: &AdaptArgs) -> Result<()> {
    let options = ReadOptions {
        neutral: config.augmentation.neutral,
        true_dataset: args.true_dataset.clone(),
    };
    let loaded = read_examples(&args.input, args.format, &options)?;
    write_examples(&loaded.examples, &args.out)?;
    eprintln!(
        "{} examples written ({} contradict, {} with explanations), {} records skipped",
        loaded.manifest.count, loaded.manifest.positive_count, loaded.manifest.with_explanation_count, loaded.skipped
    );
    Ok(())
}

fn emit(config: &CliConfig, args: &EmitArgs) -> Result<()> {
    let examples = load_hhd(&args.input)?;
    let components = args.components.clone().unwrap_or_else(|| ComponentKind::ALL.to_vec());
    let records = emit_training_records(&examples, &components, &config.template)?;
    std::fs::create_dir_all(&args.out_dir).map_err(|e| Error::io(&args.out_dir, e))?;
    write_records_jsonl(&records, args.out_dir.join("records.jsonl"))?;
    for component in components {
        let path = args.out_dir.join(format!("{}.tsv", component.as_str()));
        write_records_tsv(records.iter().filter(|r| r.component == component), path)?;
    }
    eprintln!("{} records from {} examples", records.len(), examples.len());
    Ok(())
}

fn features(args: &FeaturesArgs) -> Result<()> {
    let rows: Vec<_> = load_hhd(&args.input)?
        .iter()
        .map(|e| (e.id().to_string(), extract_features(e), e.label()))
        .collect();
    write_features_csv(&rows, create(&args.out)?)
}

fn baseline(cmd: BaselineCommand) -> Result<()> {
    match cmd {
        BaselineCommand::Train {
            input,
            model,
            epochs,
            lr,
            seed,
        } => {
            let data = load_hhd(&input)?
                .iter()
                .map(|e| {
                    let label = e
                        .label()
                        .ok_or_else(|| Error::Invalid(format!("training example {} has no label", e.id())))?;
                    Ok((extract_features(e), label))
                })
                .collect::<Result<Vec<_>>>()?;
            train_linear(&data, epochs, lr, seed)?.save(&model)
        }
        BaselineCommand::Predict { input, model, out } => {
            let model = LinearModel::load(&model)?;
            let mut w = create(&out)?;
            for e in load_hhd(&input)? {
                let f = extract_features(&e);
                let line = serde_json::json!({
                    "id": e.id(),
                    "hallucination_prob": model.predict_proba(&f),
                    "label": model.predict(&f),
                });
                writeln!(w, "{line}").map_err(|err| Error::io(&out, err))?;
            }
            w.flush().map_err(|err| Error::io(&out, err))
        }
    }
}

fn mock_serve(config: &CliConfig, args: &MockServeArgs) -> Result<()> {
    let backend: Arc<dyn Backend> = match &args.fixture {
        Some(path) => Arc::new(MockBackend::from_spec(MockBackendSpec::load(path)?)?),
        None => Arc::new(MockBackend::heuristic().with_template(config.template.clone())),
    };
    let server = MockServer::start(&format!("{}:{}", args.host, args.port), backend, args.threads)?;
    println!("listening on {}", server.url());
    let _ = std::io::stdout().flush();
    server.join();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["hhd", "frobnicate"]), EXIT_USAGE);
        assert_eq!(run(["hhd"]), EXIT_USAGE);
        assert_eq!(run(["hhd", "score", "--in", "x.jsonl"]), EXIT_USAGE);
        assert_eq!(run(["hhd", "--help"]), EXIT_OK);
    }

    #[test]
    fn exit_code_mapping() {
        assert_eq!(exit_code(&Error::InvalidConfig("x".into())), EXIT_USAGE);
        assert_eq!(exit_code(&Error::EmptyInput), EXIT_DATA);
        assert_eq!(
            exit_code(&Error::Backend(crate::error::BackendError::Unavailable("x".into()))),
            EXIT_BACKEND
        );
    }

    #[test]
    fn backend_urls() {
        let mut cfg = CliConfig::default();
        assert!(connect(&cfg).is_ok());
        cfg.backend_url = "http://127.0.0.1:1".into();
        assert!(connect(&cfg).is_ok());
        cfg.backend_url = "ftp://x".into();
        assert!(matches!(connect(&cfg), Err(Error::InvalidConfig(_))));
        cfg.backend_url = "mock:/does/not/exist.json".into();
        assert!(matches!(connect(&cfg), Err(Error::Io { .. })));
    }

    #[test]
    fn sidecar_name() {
        assert_eq!(sidecar_path(Path::new("out/preds.jsonl")), Path::new("out/preds.jsonl.meta.json"));
    }
}
