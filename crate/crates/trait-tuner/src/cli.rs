//! Command-line surface: data preparation, training, search, evaluation,
//! prediction, baseline comparison, and report rendering.

use std::ffi::OsString;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Deserialize;

use crate::corpus::{
    chunk_user_comments, identity_stats, load_corpus, make_synthetic_corpus, normalize_labels,
    save_corpus, validate_stats, Corpus, LabeledText, NormalizationStats, Split, TraitName,
    TraitVector, UserComments,
};
use crate::error::{Error, Result};
use crate::metrics::{
    compare_to_baseline, derive_thresholds, evaluate, load_baseline_table, ComparisonCell,
    EvaluationReport,
};
use crate::model::{load_bundle, save_bundle, write_json_pretty, EncoderName, EncoderSpec, HeadKind, HeadSpec};
use crate::nn::scheduler::ScheduleKind;
use crate::runs::{
    corpus_fingerprint, load_run_summaries, new_run_dir, runs_root, write_manifest, RunManifest,
    RunStatus, RunSummary,
};
use crate::seed::derive_seed;
use crate::train::{
    run_strategy, search_hyperparameters, strategy_config, SearchSpace, StrategyId, TrainPlan,
    DEFAULT_SEARCH_BUDGET,
};

#[derive(Parser)]
#[command(
    name = "trait-tuner",
    version,
    about = "Fine-tune text encoders into continuous Big Five trait regressors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a normalized train/eval/test data directory.
    Prepare(PrepareArgs),
    /// Fine-tune one strategy and record a run directory.
    Train(TrainArgs),
    /// Run a standalone hyperparameter search.
    Search(SearchArgs),
    /// Score a saved bundle on one data split.
    Evaluate(EvaluateArgs),
    /// Predict trait scores for raw texts, one per line.
    Predict(PredictArgs),
    /// Compare evaluation metrics against a published baseline table.
    Compare(CompareArgs),
    /// Render overall and per-trait tables for completed runs.
    Report(ReportArgs),
}

fn parse_sizes(s: &str) -> std::result::Result<(usize, usize, usize), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err("expected three sizes: train,eval,test".to_string());
    }
    let mut sizes = [0usize; 3];
    for (slot, part) in sizes.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse()
            .map_err(|_| format!("`{part}` is not a split size"))?;
        if *slot == 0 {
            return Err("split sizes must be positive".to_string());
        }
    }
    Ok((sizes[0], sizes[1], sizes[2]))
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["users", "raw_splits", "synthetic"])))]
struct PrepareArgs {
    /// Raw per-user JSONL: {"user_id", "traits", "comments": [...]}.
    #[arg(long)]
    users: Option<PathBuf>,
    /// Directory holding raw-label train/eval/test JSONL files.
    #[arg(long)]
    raw_splits: Option<PathBuf>,
    /// Generate a synthetic corpus with sizes "train,eval,test".
    #[arg(long, value_parser = parse_sizes)]
    synthetic: Option<(usize, usize, usize)>,
    /// Output data directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Whitespace-token budget per chunk when packing user comments.
    #[arg(long, default_value_t = 384)]
    chunk_budget: usize,
    #[arg(long, default_value_t = 0.1)]
    eval_fraction: f64,
    #[arg(long, default_value_t = 0.1)]
    test_fraction: f64,
}

/// Knobs that layer on top of a strategy's defaults. A JSON config file is
/// applied first, then these flags; either may touch any subset.
#[derive(Args, Default)]
struct TrainOverrides {
    /// JSON file with a subset of the training fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    encoder: Option<EncoderName>,
    #[arg(long)]
    max_sequence_length: Option<usize>,
    /// Replace the head with the named kind's default shape.
    #[arg(long, value_enum)]
    head: Option<HeadKind>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long, value_enum)]
    scheduler: Option<ScheduleKind>,
    #[arg(long)]
    warmup_fraction: Option<f64>,
    #[arg(long)]
    mixed_precision: Option<bool>,
    #[arg(long)]
    early_stop_patience: Option<usize>,
    #[arg(long)]
    search_budget: Option<usize>,
    #[arg(long)]
    ensemble_size: Option<usize>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileOverrides {
    learning_rate: Option<f64>,
    batch_size: Option<usize>,
    epochs: Option<usize>,
    weight_decay: Option<f64>,
    dropout: Option<f64>,
    scheduler: Option<ScheduleKind>,
    warmup_fraction: Option<f64>,
    mixed_precision: Option<bool>,
    early_stop_patience: Option<usize>,
    search_budget: Option<usize>,
    ensemble_size: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_enum)]
    strategy: StrategyId,
    /// Directory with normalized train/eval/test JSONL files.
    #[arg(long)]
    data: PathBuf,
    /// Runs root; defaults to TRAIT_TUNER_RUNS or ./runs.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    overrides: TrainOverrides,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long, value_enum)]
    strategy: StrategyId,
    #[arg(long)]
    data: PathBuf,
    /// Directory for trials.json and best_config.json.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    overrides: TrainOverrides,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Bundle directory written by `train`.
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    split: Split,
    /// Also write the metrics JSON to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    bundle: PathBuf,
    /// Text file, one input per line; blank lines are skipped.
    #[arg(long)]
    input: PathBuf,
    /// Also write the prediction lines to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// metrics.json produced by `train` or `evaluate`.
    #[arg(long)]
    metrics: PathBuf,
    /// Delimited baseline table: algorithm,EXT,NEU,AGR,CON,OPN with acc(f1) cells.
    #[arg(long)]
    baseline: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum ReportFormat {
    Text,
    Csv,
}

#[derive(Args)]
struct ReportArgs {
    /// Runs root; defaults to TRAIT_TUNER_RUNS or ./runs.
    #[arg(long)]
    runs: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "text")]
    format: ReportFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses argv and runs one subcommand, translating errors into process exit
/// codes: 0 success, 1 runtime/resource, 2 usage/config.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Prepare(args) => cmd_prepare(args),
        Command::Train(args) => cmd_train(args),
        Command::Search(args) => cmd_search(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Report(args) => cmd_report(args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load_user_file(path: &Path) -> Result<Vec<UserComments>> {
    let text = std::fs::read_to_string(path).map_err(|_| {
        Error::Resource(format!("user file {} is not readable", path.display()))
    })?;
    let mut users = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let user: UserComments = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        users.push(user);
    }
    if users.is_empty() {
        return Err(Error::Validation(format!(
            "user file {} holds no records",
            path.display()
        )));
    }
    Ok(users)
}

/// User-disjoint split: users are shuffled by seed and dealt to test, eval,
/// then train; each chunk follows its user. Keeps all of one user's chunks
/// in a single split so no text leaks across splits.
fn split_chunks_by_user(
    chunks: Vec<LabeledText>,
    eval_fraction: f64,
    test_fraction: f64,
    seed: u64,
) -> Result<Corpus> {
    if !(eval_fraction > 0.0 && test_fraction > 0.0 && eval_fraction + test_fraction < 1.0) {
        return Err(Error::Config(format!(
            "split fractions must be positive and sum below 1, got eval {eval_fraction} test {test_fraction}"
        )));
    }
    let mut users: Vec<&str> = Vec::new();
    for chunk in &chunks {
        if users.last() != Some(&chunk.user_id.as_str()) && !users.contains(&chunk.user_id.as_str())
        {
            users.push(&chunk.user_id);
        }
    }
    if users.len() < 3 {
        return Err(Error::Validation(format!(
            "need at least 3 users to form three splits, got {}",
            users.len()
        )));
    }
    let mut shuffled: Vec<String> = users.iter().map(|u| u.to_string()).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(derive_seed(seed, 0x5117));
    shuffled.shuffle(&mut rng);
    let n = shuffled.len();
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 2);
    let n_eval = ((n as f64 * eval_fraction).round() as usize).clamp(1, n - n_test - 1);
    let assignment: std::collections::HashMap<&str, Split> = shuffled
        .iter()
        .enumerate()
        .map(|(i, u)| {
            let split = if i < n_test {
                Split::Test
            } else if i < n_test + n_eval {
                Split::Eval
            } else {
                Split::Train
            };
            (u.as_str(), split)
        })
        .collect();
    let mut corpus = Corpus {
        train: Vec::new(),
        eval: Vec::new(),
        test: Vec::new(),
    };
    for chunk in chunks {
        match assignment[chunk.user_id.as_str()] {
            Split::Train => corpus.train.push(chunk),
            Split::Eval => corpus.eval.push(chunk),
            Split::Test => corpus.test.push(chunk),
        }
    }
    Ok(corpus)
}

fn cmd_prepare(args: PrepareArgs) -> Result<()> {
    let (corpus, stats) = if let Some(sizes) = args.synthetic {
        (make_synthetic_corpus(args.seed, sizes), identity_stats())
    } else if let Some(path) = &args.users {
        let users = load_user_file(path)?;
        let outcome = chunk_user_comments(&users, args.chunk_budget)?;
        if outcome.skipped_users > 0 {
            eprintln!(
                "warning: skipped {} user(s) with no usable comments",
                outcome.skipped_users
            );
        }
        let corpus = split_chunks_by_user(
            outcome.chunks,
            args.eval_fraction,
            args.test_fraction,
            args.seed,
        )?;
        normalize_labels(&corpus)?
    } else {
        let dir = args.raw_splits.as_ref().expect("clap enforces one source");
        let corpus = load_corpus(dir, false)?;
        normalize_labels(&corpus)?
    };
    std::fs::create_dir_all(&args.out)?;
    save_corpus(&corpus, &args.out)?;
    write_json_pretty(&args.out.join("normalization.json"), &stats)?;
    println!(
        "wrote {} train / {} eval / {} test records to {}",
        corpus.train.len(),
        corpus.eval.len(),
        corpus.test.len(),
        args.out.display()
    );
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = File::open(path)
        .map_err(|_| Error::Resource(format!("cannot open {}", path.display())))?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

fn load_stats(data_dir: &Path) -> Result<NormalizationStats> {
    let path = data_dir.join("normalization.json");
    if !path.exists() {
        return Ok(identity_stats());
    }
    let stats: NormalizationStats = read_json(&path)?;
    validate_stats(&stats)?;
    Ok(stats)
}

fn build_plan(strategy: StrategyId, overrides: &TrainOverrides) -> Result<TrainPlan> {
    let mut plan = strategy_config(strategy);
    if let Some(path) = &overrides.config {
        let file = File::open(path)
            .map_err(|_| Error::Config(format!("config file {} is not readable", path.display())))?;
        let file: FileOverrides = serde_json::from_reader(BufReader::new(file))
            .map_err(|e| Error::Config(format!("config file {}: {e}", path.display())))?;
        apply_file_overrides(&mut plan, &file);
    }
    apply_flag_overrides(&mut plan, overrides);
    plan.validate()?;
    Ok(plan)
}

fn apply_file_overrides(plan: &mut TrainPlan, o: &FileOverrides) {
    let c = &mut plan.config;
    if let Some(v) = o.learning_rate {
        c.learning_rate = v;
    }
    if let Some(v) = o.batch_size {
        c.batch_size = v;
    }
    if let Some(v) = o.epochs {
        c.epochs = v;
    }
    if let Some(v) = o.weight_decay {
        c.weight_decay = v;
    }
    if let Some(v) = o.dropout {
        c.dropout = v;
    }
    if let Some(v) = o.scheduler {
        c.scheduler = v;
    }
    if let Some(v) = o.warmup_fraction {
        c.warmup_fraction = v;
    }
    if let Some(v) = o.mixed_precision {
        c.mixed_precision = v;
    }
    if let Some(v) = o.early_stop_patience {
        c.early_stop_patience = v;
    }
    if let Some(v) = o.search_budget {
        plan.search_budget = v;
    }
    if let Some(v) = o.ensemble_size {
        plan.ensemble_size = v;
    }
}

fn apply_flag_overrides(plan: &mut TrainPlan, o: &TrainOverrides) {
    if let Some(name) = o.encoder {
        plan.encoder = EncoderSpec::new(name);
    }
    if let Some(len) = o.max_sequence_length {
        plan.encoder.max_sequence_length = len;
    }
    if let Some(kind) = o.head {
        plan.head = match kind {
            HeadKind::Linear => HeadSpec::linear(),
            HeadKind::Mlp => HeadSpec::mlp(),
        };
    }
    let c = &mut plan.config;
    if let Some(v) = o.learning_rate {
        c.learning_rate = v;
    }
    if let Some(v) = o.batch_size {
        c.batch_size = v;
    }
    if let Some(v) = o.epochs {
        c.epochs = v;
    }
    if let Some(v) = o.weight_decay {
        c.weight_decay = v;
    }
    if let Some(v) = o.dropout {
        c.dropout = v;
    }
    if let Some(v) = o.scheduler {
        c.scheduler = v;
    }
    if let Some(v) = o.warmup_fraction {
        c.warmup_fraction = v;
    }
    if let Some(v) = o.mixed_precision {
        c.mixed_precision = v;
    }
    if let Some(v) = o.early_stop_patience {
        c.early_stop_patience = v;
    }
    if let Some(v) = o.search_budget {
        plan.search_budget = v;
    }
    if let Some(v) = o.ensemble_size {
        plan.ensemble_size = v;
    }
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let plan = build_plan(args.strategy, &args.overrides)?;
    let fingerprint = corpus_fingerprint(&args.data)?;
    let corpus = load_corpus(&args.data, true)?;
    let stats = load_stats(&args.data)?;
    let root = runs_root(args.out.as_deref());
    let (run_dir, run_id) = new_run_dir(&root, plan.strategy)?;
    let mut manifest = RunManifest {
        run_id: run_id.clone(),
        strategy: plan.strategy,
        status: RunStatus::Running,
        seed: args.seed,
        created: chrono::Utc::now().to_rfc3339(),
        data_dir: args.data.display().to_string(),
        corpus_fingerprint: fingerprint,
        error: None,
    };
    write_manifest(&run_dir, &manifest)?;

    match run_strategy(&plan, &corpus, args.seed) {
        Ok(outcome) => {
            let resolved = TrainPlan {
                config: outcome.config_used.clone(),
                ..outcome.plan.clone()
            };
            write_json_pretty(&run_dir.join("plan.json"), &resolved)?;
            write_json_pretty(&run_dir.join("history.json"), &outcome.histories)?;
            if let Some(trials) = &outcome.trials {
                write_json_pretty(&run_dir.join("trials.json"), trials)?;
            }
            let rule = derive_thresholds(&corpus.labels(Split::Train))?;
            save_bundle(
                &run_dir.join("bundle"),
                &outcome.model,
                &stats,
                &rule,
                Some(serde_json::to_value(&outcome.config_used)?),
            )?;
            let texts: Vec<String> = corpus.test.iter().map(|r| r.text.clone()).collect();
            let preds = outcome
                .model
                .predict(&texts, outcome.config_used.batch_size)?;
            let report = evaluate(&preds, &corpus.labels(Split::Test), &rule)?;
            write_json_pretty(&run_dir.join("metrics.json"), &report)?;
            manifest.status = RunStatus::Complete;
            write_manifest(&run_dir, &manifest)?;
            let best = outcome
                .histories
                .iter()
                .map(|h| h.best_eval_mse)
                .fold(f64::INFINITY, f64::min);
            println!("run {run_id} complete (strategy {})", plan.strategy);
            println!("  best eval MSE {best:.6}");
            println!(
                "  test MSE {:.6}  MAE {:.6}  accuracy {:.4}  F1 {:.4}",
                report.overall.mse, report.overall.mae, report.overall.accuracy, report.overall.f1
            );
            println!("  artifacts in {}", run_dir.display());
            Ok(())
        }
        Err(e) => {
            manifest.status = RunStatus::Failed;
            manifest.error = Some(e.to_string());
            let _ = write_manifest(&run_dir, &manifest);
            Err(e)
        }
    }
}

fn cmd_search(args: SearchArgs) -> Result<()> {
    let mut plan = build_plan(args.strategy, &args.overrides)?;
    plan.search_enabled = true;
    if plan.search_budget == 0 {
        plan.search_budget = DEFAULT_SEARCH_BUDGET;
    }
    let corpus = load_corpus(&args.data, true)?;
    let outcome = search_hyperparameters(
        &plan.encoder,
        &plan.head,
        &plan.config,
        &SearchSpace::default(),
        plan.search_budget,
        &corpus,
        derive_seed(args.seed, 0x5EA6C4),
    )?;
    std::fs::create_dir_all(&args.out)?;
    write_json_pretty(&args.out.join("trials.json"), &outcome.trials)?;
    let best = &outcome.trials[outcome.best_index];
    write_json_pretty(&args.out.join("best_config.json"), &best.config)?;
    println!(
        "search complete: {} finished trial(s), best objective {:.6} at trial {}",
        outcome.trials.len(),
        best.objective,
        best.trial
    );
    println!("  artifacts in {}", args.out.display());
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let bundle = load_bundle(&args.bundle)?;
    let corpus = load_corpus(&args.data, true)?;
    let records = corpus.split(args.split);
    let texts: Vec<String> = records.iter().map(|r| r.text.clone()).collect();
    let preds = bundle.model.predict(&texts, 16)?;
    let report = evaluate(&preds, &corpus.labels(args.split), &bundle.rule)?;
    if let Some(out) = &args.out {
        write_json_pretty(out, &report)?;
    }
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

/// Renders one prediction in the fixed five-trait line format.
pub fn format_prediction_line(v: &TraitVector) -> String {
    TraitName::ALL
        .iter()
        .map(|t| format!("{}: {:.2}", t.key(), v.get(*t)))
        .collect::<Vec<_>>()
        .join("; ")
}

fn cmd_predict(args: PredictArgs) -> Result<()> {
    let bundle = load_bundle(&args.bundle)?;
    let text = std::fs::read_to_string(&args.input).map_err(|_| {
        Error::Resource(format!("input file {} is not readable", args.input.display()))
    })?;
    let texts: Vec<String> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect();
    if texts.is_empty() {
        return Err(Error::Argument(format!(
            "input file {} holds no texts",
            args.input.display()
        )));
    }
    let preds = bundle.model.predict(&texts, 16)?;
    let lines: Vec<String> = preds.iter().map(format_prediction_line).collect();
    if let Some(out) = &args.out {
        std::fs::write(out, lines.join("\n") + "\n")?;
    }
    for line in &lines {
        println!("{line}");
    }
    Ok(())
}

/// Comparison rows as delimited text; deltas carry an explicit sign.
pub fn render_comparison_csv(cells: &[ComparisonCell]) -> String {
    let mut out = String::from(
        "algorithm,trait,our_accuracy,baseline_accuracy,accuracy_delta,accuracy_win,our_f1,baseline_f1,f1_delta,f1_win\n",
    );
    for c in cells {
        out.push_str(&format!(
            "{},{},{:.2},{:.2},{:+.2},{},{:.2},{:.2},{:+.2},{}\n",
            c.algorithm,
            c.trait_name.key(),
            c.our_accuracy,
            c.baseline_accuracy,
            c.accuracy_delta,
            c.accuracy_win,
            c.our_f1,
            c.baseline_f1,
            c.f1_delta,
            c.f1_win
        ));
    }
    out
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    let report: EvaluationReport = read_json(&args.metrics)?;
    let table = load_baseline_table(&args.baseline)?;
    let cells = compare_to_baseline(&report, &table);
    let rendered = render_comparison_csv(&cells);
    if let Some(out) = &args.out {
        std::fs::write(out, &rendered)?;
    }
    print!("{rendered}");
    Ok(())
}

fn cell(v: f64) -> String {
    format!("{v:.2}")
}

fn r2_cell(r2: Option<f64>) -> String {
    r2.map(cell).unwrap_or_else(|| "n/a".to_string())
}

fn metric_cells(m: &crate::metrics::TraitMetrics) -> String {
    format!(
        "{}, {}, {}, {}, {}",
        cell(m.mse),
        cell(m.mae),
        r2_cell(m.r2),
        cell(m.accuracy),
        cell(m.f1)
    )
}

fn complete_runs(summaries: &[RunSummary]) -> Result<Vec<&RunSummary>> {
    let mut rows: Vec<&RunSummary> = summaries
        .iter()
        .filter(|s| s.manifest.status == RunStatus::Complete && s.metrics.is_some())
        .collect();
    if rows.is_empty() {
        return Err(Error::Resource(
            "no complete runs with metrics to report".to_string(),
        ));
    }
    rows.sort_by(|a, b| {
        let ma = a.metrics.as_ref().unwrap().overall.mse;
        let mb = b.metrics.as_ref().unwrap().overall.mse;
        ma.total_cmp(&mb).then(a.manifest.run_id.cmp(&b.manifest.run_id))
    });
    Ok(rows)
}

/// Human-readable report: one overall row per run sorted by MSE ascending,
/// then a per-trait table for each run. Metric cells use two decimals.
pub fn render_report_text(summaries: &[RunSummary]) -> Result<String> {
    let rows = complete_runs(summaries)?;
    let mut out = String::new();
    out.push_str(&format!("complete runs: {}\n\n", rows.len()));
    out.push_str("overall (sorted by MSE ascending) - mse, mae, r2, accuracy, f1\n");
    for s in &rows {
        let m = s.metrics.as_ref().unwrap();
        out.push_str(&format!(
            "  {}  {}  {}\n",
            s.manifest.run_id,
            s.manifest.strategy,
            metric_cells(&m.overall)
        ));
    }
    for s in &rows {
        let m = s.metrics.as_ref().unwrap();
        out.push_str(&format!(
            "\nper-trait for {} ({}):\n",
            s.manifest.run_id, s.manifest.strategy
        ));
        for t in TraitName::ALL {
            let tm = m.traits.get(t);
            out.push_str(&format!(
                "  {:<17} {}, n={}\n",
                t.key(),
                metric_cells(tm),
                tm.n
            ));
        }
    }
    Ok(out)
}

/// The same report as delimited rows: overall rows first (trait column
/// "overall"), then per-trait rows, with identical two-decimal cells.
pub fn render_report_csv(summaries: &[RunSummary]) -> Result<String> {
    let rows = complete_runs(summaries)?;
    let mut out = String::from("run_id,strategy,trait,mse,mae,r2,accuracy,f1,n\n");
    for s in &rows {
        let m = s.metrics.as_ref().unwrap();
        out.push_str(&format!(
            "{},{},overall,{},{},{},{},{},{}\n",
            s.manifest.run_id,
            s.manifest.strategy,
            cell(m.overall.mse),
            cell(m.overall.mae),
            r2_cell(m.overall.r2),
            cell(m.overall.accuracy),
            cell(m.overall.f1),
            m.n
        ));
    }
    for s in &rows {
        let m = s.metrics.as_ref().unwrap();
        for t in TraitName::ALL {
            let tm = m.traits.get(t);
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                s.manifest.run_id,
                s.manifest.strategy,
                t.key(),
                cell(tm.mse),
                cell(tm.mae),
                r2_cell(tm.r2),
                cell(tm.accuracy),
                cell(tm.f1),
                tm.n
            ));
        }
    }
    Ok(out)
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let root = runs_root(args.runs.as_deref());
    let summaries = load_run_summaries(&root)?;
    let rendered = match args.format {
        ReportFormat::Text => render_report_text(&summaries)?,
        ReportFormat::Csv => render_report_csv(&summaries)?,
    };
    if let Some(out) = &args.out {
        std::fs::write(out, &rendered)?;
    }
    print!("{rendered}");
    Ok(())
}
