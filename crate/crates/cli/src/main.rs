//! betashap: generate data, value it, and run downstream evaluations.
//!
//! Every command is a pure function of its input files, flags, and --seed:
//! rerunning reproduces the data outputs byte for byte at any --threads
//! value. Exit codes: 0 success, 1 usage, 2 input/validation error,
//! 3 non-convergence under --strict.

mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use betashap_core as core;
use betashap_core::{
    io, tasks, BetaParams, CurveConfig, CurveDirection, Dataset, McConfig, Metric, ModelKind,
    ModelUtility, SnrConfig, SyntheticKind, TrainingConfig, Utility, UtilitySpec, WeightScheme,
};
use manifest::RunManifest;

#[derive(Parser)]
#[command(
    name = "betashap",
    version,
    about = "Beta-weighted semivalue data valuation: synthetic data, exact and Monte-Carlo values, and downstream evaluation tasks"
)]
struct Cli {
    /// Worker threads for parallel sections (default: all cores). Results
    /// are identical for any value.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset CSV, optionally with flipped labels
    Gen(GenArgs),
    /// Compute (exact) or estimate (Monte-Carlo) per-point data values
    Value(ValueArgs),
    /// Run a downstream task over a value table
    #[command(subcommand)]
    Task(TaskCommand),
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    GaussianClassification,
    GaussianRegression,
    SnrRegression,
    SnrClassification,
}

impl From<KindArg> for SyntheticKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::GaussianClassification => SyntheticKind::GaussianClassification,
            KindArg::GaussianRegression => SyntheticKind::GaussianRegression,
            KindArg::SnrRegression => SyntheticKind::SnrRegression,
            KindArg::SnrClassification => SyntheticKind::SnrClassification,
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path; companions derive from it (.noise.json, .manifest.json)
    #[arg(long)]
    out: PathBuf,
    /// Flip this fraction of binary labels and record which ids changed
    #[arg(long, default_value_t = 0.0)]
    flip_fraction: f64,
    /// Also write the dataset as JSON
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Exact,
    Mc,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Logistic,
    Constant,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Accuracy,
    NegMse,
}

#[derive(Args)]
struct ValueArgs {
    /// Dataset to value (CSV)
    #[arg(long)]
    data: PathBuf,
    /// Validation dataset defining the utility (CSV)
    #[arg(long)]
    validation: PathBuf,
    #[arg(long, default_value = "y")]
    label_column: String,

    /// Beta scheme: alpha parameter (requires --beta)
    #[arg(long)]
    alpha: Option<f64>,
    /// Beta scheme: beta parameter (requires --alpha)
    #[arg(long)]
    beta: Option<f64>,
    /// Uniform weights over cardinalities (alias of --alpha 1 --beta 1)
    #[arg(long)]
    data_shapley: bool,
    /// All weight on cardinality 2
    #[arg(long)]
    loo_first: bool,
    /// All weight on cardinality n (classic leave-one-out)
    #[arg(long)]
    loo_last: bool,

    #[arg(long, value_enum)]
    engine: EngineArg,
    #[arg(long, default_value_t = 10)]
    chains: usize,
    #[arg(long, default_value_t = 1.0005)]
    rho: f64,
    #[arg(long, default_value_t = 100)]
    min_iters: usize,
    #[arg(long, default_value_t = 50_000)]
    max_iters: usize,

    #[arg(long, value_enum, default_value_t = ModelArg::Logistic)]
    model: ModelArg,
    #[arg(long, value_enum, default_value_t = MetricArg::Accuracy)]
    metric: MetricArg,
    /// L2 regularization strength for logistic training
    #[arg(long, default_value_t = 1.0)]
    l2: f64,

    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output prefix; writes {out}.csv, {out}.json, {out}.manifest.json
    #[arg(long)]
    out: PathBuf,
    /// Exit with code 3 when the Monte-Carlo run hits the iteration cap
    #[arg(long)]
    strict: bool,
}

#[derive(Subcommand)]
enum TaskCommand {
    /// Two-means detection of mislabeled points from their values
    Detect(DetectArgs),
    /// Train on a value-weighted subsample and score held-out accuracy
    Subsample(SubsampleArgs),
    /// Utility along a value-ordered point addition or removal trajectory
    Curve(CurveArgs),
    /// Signal-to-noise scan of the marginal contribution by cardinality
    Snr(SnrArgs),
}

#[derive(Args)]
struct DetectArgs {
    /// Values CSV (id,value[,...]) produced by `betashap value`
    #[arg(long)]
    values: PathBuf,
    /// Noise record JSON produced by `betashap gen --flip-fraction`
    #[arg(long)]
    noise: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SubsampleArgs {
    #[arg(long)]
    values: PathBuf,
    /// Dataset the values refer to (CSV)
    #[arg(long)]
    data: PathBuf,
    /// Held-out evaluation dataset (CSV)
    #[arg(long)]
    validation: PathBuf,
    #[arg(long, default_value = "y")]
    label_column: String,
    /// Fraction of points to keep
    #[arg(long, default_value_t = 0.25)]
    keep: f64,
    #[arg(long, default_value_t = 1.0)]
    l2: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    Add,
    Remove,
}

#[derive(Args)]
struct CurveArgs {
    #[arg(long)]
    values: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    validation: PathBuf,
    #[arg(long, default_value = "y")]
    label_column: String,
    #[arg(long, value_enum)]
    direction: DirectionArg,
    /// Perturbation steps (default: half the dataset)
    #[arg(long)]
    steps: Option<usize>,
    /// Random initial set size for the addition curve
    #[arg(long, default_value_t = 10)]
    init_size: usize,
    /// Shuffle the order instead of sorting by value (baseline arm)
    #[arg(long)]
    random: bool,
    #[arg(long, default_value_t = 1.0)]
    l2: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SnrArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    #[arg(long)]
    n: usize,
    /// Cardinalities to scan, comma-separated (e.g. 2,50,150,400)
    #[arg(long, value_delimiter = ',', required = true)]
    grid: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    repeats: usize,
    /// Random subsets per cardinality within one repeat
    #[arg(long, default_value_t = 20)]
    samples: usize,
    /// Label-noise fraction on the background and validation draws
    #[arg(long, default_value_t = 0.0)]
    flip_fraction: f64,
    /// Invert the test point's label
    #[arg(long)]
    flip_test_point: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    if let Some(threads) = cli.threads {
        // ignore the error if a global pool already exists
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> core::Result<ExitCode> {
    match command {
        Command::Gen(args) => cmd_gen(args),
        Command::Value(args) => cmd_value(args),
        Command::Task(task) => match task {
            TaskCommand::Detect(args) => cmd_detect(args),
            TaskCommand::Subsample(args) => cmd_subsample(args),
            TaskCommand::Curve(args) => cmd_curve(args),
            TaskCommand::Snr(args) => cmd_snr(args),
        },
    }
}

fn companion(path: &Path, suffix: &str) -> PathBuf {
    path.with_extension(suffix)
}

fn load_dataset(path: &Path, label_column: &str) -> core::Result<Dataset> {
    io::load_csv(path, &io::CsvSchema::new(label_column))
}

fn usage_error(message: &str) -> core::Result<ExitCode> {
    eprintln!("usage error: {message}");
    Ok(ExitCode::from(1))
}

fn cmd_gen(args: GenArgs) -> core::Result<ExitCode> {
    let started = Instant::now();
    let kind: SyntheticKind = args.kind.into();
    let mut manifest = RunManifest::new(
        "gen",
        json!({
            "kind": kind.name(),
            "n": args.n,
            "flip_fraction": args.flip_fraction,
        }),
        Some(args.seed),
    );
    let data = core::generate(kind, args.n, args.seed)?;
    let (data, noise) = if args.flip_fraction > 0.0 {
        let (flipped, record) = core::flip_labels(
            &data,
            args.flip_fraction,
            core::rng::derive_seed(args.seed, "gen-noise", 0),
        )?;
        (flipped, Some(record))
    } else {
        (data, None)
    };
    io::save_csv(&data, &args.out)?;
    manifest.add_output(&args.out);
    if let Some(record) = &noise {
        let noise_path = companion(&args.out, "noise.json");
        io::save_noise_record(record, &noise_path)?;
        manifest.add_output(&noise_path);
    }
    if args.json {
        let json_path = companion(&args.out, "json");
        io::save_dataset_json(&data, &json_path)?;
        manifest.add_output(&json_path);
    }
    manifest.record_timing("total", started.elapsed());
    manifest.write(&companion(&args.out, "manifest.json"))?;
    println!(
        "wrote {} ({} rows, d = {})",
        args.out.display(),
        data.len(),
        data.dim()
    );
    Ok(ExitCode::SUCCESS)
}

fn scheme_from_flags(args: &ValueArgs, n: usize) -> Result<WeightScheme, String> {
    let mut picked = 0;
    if args.alpha.is_some() || args.beta.is_some() {
        picked += 1;
    }
    picked += [args.data_shapley, args.loo_first, args.loo_last]
        .iter()
        .filter(|b| **b)
        .count();
    if picked != 1 {
        return Err(
            "choose exactly one scheme: --alpha A --beta B, --data-shapley, --loo-first, or --loo-last"
                .into(),
        );
    }
    if args.alpha.is_some() != args.beta.is_some() {
        return Err("--alpha and --beta must be given together".into());
    }
    let scheme = if let (Some(a), Some(b)) = (args.alpha, args.beta) {
        WeightScheme::beta(n, BetaParams::new(a, b).map_err(|e| e.to_string())?)
    } else if args.data_shapley {
        WeightScheme::data_shapley(n)
    } else if args.loo_first {
        WeightScheme::loo_first(n)
    } else {
        WeightScheme::loo_last(n)
    };
    scheme.map_err(|e| e.to_string())
}

fn training_config(l2: f64) -> TrainingConfig {
    TrainingConfig {
        l2,
        ..TrainingConfig::default()
    }
}

fn build_spec(
    model: ModelArg,
    metric: MetricArg,
    validation: Dataset,
    l2: f64,
) -> core::Result<UtilitySpec> {
    let model = match model {
        ModelArg::Logistic => ModelKind::LogisticRegression,
        ModelArg::Constant => ModelKind::ConstantPredictor,
    };
    let metric = match metric {
        MetricArg::Accuracy => Metric::Accuracy,
        MetricArg::NegMse => Metric::NegativeMse,
    };
    UtilitySpec::new(model, metric, validation, training_config(l2))
}

fn cmd_value(args: ValueArgs) -> core::Result<ExitCode> {
    let started = Instant::now();
    let data = load_dataset(&args.data, &args.label_column)?;
    let validation = load_dataset(&args.validation, &args.label_column)?;
    let scheme = match scheme_from_flags(&args, data.len()) {
        Ok(s) => s,
        Err(msg) => return usage_error(&msg),
    };
    let spec = build_spec(args.model, args.metric, validation, args.l2)?;
    let utility = ModelUtility::new(&spec, &data);

    let mut manifest = RunManifest::new(
        "value",
        json!({
            "engine": match args.engine { EngineArg::Exact => "exact", EngineArg::Mc => "mc" },
            "scheme": &scheme,
            "model": match args.model { ModelArg::Logistic => "logistic", ModelArg::Constant => "constant" },
            "metric": match args.metric { MetricArg::Accuracy => "accuracy", MetricArg::NegMse => "neg-mse" },
            "l2": args.l2,
            "mc": { "chains": args.chains, "rho": args.rho,
                    "min_iterations": args.min_iters, "max_iterations": args.max_iters },
        }),
        Some(args.seed),
    );
    manifest.add_input(&args.data)?;
    manifest.add_input(&args.validation)?;

    let csv_path = args.out.with_extension("csv");
    let json_path = args.out.with_extension("json");
    let compute = Instant::now();
    let mut exit = ExitCode::SUCCESS;
    match args.engine {
        EngineArg::Exact => {
            let values = core::semivalue_exact(&utility, &scheme)?;
            manifest.record_timing("compute", compute.elapsed());
            std::fs::write(&csv_path, io::values_csv(&values))?;
            std::fs::write(&json_path, serde_json::to_string_pretty(&values)?)?;
        }
        EngineArg::Mc => {
            let config = McConfig {
                chains: args.chains,
                rho: args.rho,
                min_iterations_per_chain: args.min_iters,
                max_iterations_per_chain: args.max_iters,
                seed: args.seed,
            };
            let report = core::mc_estimate(&utility, &scheme, &config)?;
            manifest.record_timing("compute", compute.elapsed());
            std::fs::write(&csv_path, io::report_csv(&report))?;
            std::fs::write(&json_path, serde_json::to_string_pretty(&report)?)?;
            if !report.converged() {
                eprintln!(
                    "warning: not converged after {} iterations per chain",
                    report.iterations_per_chain
                );
                if args.strict {
                    exit = ExitCode::from(3);
                }
            }
        }
    }
    manifest.utility_evaluations = Some(utility.evaluations());
    manifest.add_output(&csv_path);
    manifest.add_output(&json_path);
    manifest.record_timing("total", started.elapsed());
    manifest.write(&args.out.with_extension("manifest.json"))?;
    println!("wrote {}", csv_path.display());
    Ok(exit)
}

fn cmd_detect(args: DetectArgs) -> core::Result<ExitCode> {
    let started = Instant::now();
    let values = io::read_values_csv(&args.values)?;
    let record = io::load_noise_record(&args.noise)?;
    let mut manifest = RunManifest::new("task detect", json!({}), None);
    manifest.add_input(&args.values)?;
    manifest.add_input(&args.noise)?;

    let result = tasks::detect_noisy(&values, &record)?;
    let json_path = args.out.with_extension("json");
    let csv_path = args.out.with_extension("csv");
    std::fs::write(&json_path, serde_json::to_string_pretty(&result)?)?;
    std::fs::write(&csv_path, io::detection_csv(&result, &values, &record))?;
    manifest.add_output(&json_path);
    manifest.add_output(&csv_path);
    manifest.record_timing("total", started.elapsed());
    manifest.write(&args.out.with_extension("manifest.json"))?;
    println!(
        "detect: f1 = {:.4}, precision = {:.4}, recall = {:.4}, selected {}",
        result.f1,
        result.precision,
        result.recall,
        result.selected.len()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_subsample(args: SubsampleArgs) -> core::Result<ExitCode> {
    let started = Instant::now();
    let values = io::read_values_csv(&args.values)?;
    let data = load_dataset(&args.data, &args.label_column)?;
    let validation = load_dataset(&args.validation, &args.label_column)?;
    let spec = UtilitySpec::new(
        ModelKind::LogisticRegression,
        Metric::Accuracy,
        validation,
        training_config(args.l2),
    )?;
    let mut manifest = RunManifest::new(
        "task subsample",
        json!({"keep": args.keep, "l2": args.l2}),
        Some(args.seed),
    );
    manifest.add_input(&args.values)?;
    manifest.add_input(&args.data)?;
    manifest.add_input(&args.validation)?;

    let outcome = tasks::subsample_train_eval(&data, &values, &spec, args.keep, args.seed)?;
    let json_path = args.out.with_extension("json");
    let csv_path = args.out.with_extension("csv");
    std::fs::write(&json_path, serde_json::to_string_pretty(&outcome)?)?;
    let mut csv = String::from("id,lambda,sampled\n");
    for (id, v) in &values {
        use std::fmt::Write as _;
        let _ = writeln!(
            csv,
            "{id},{},{}",
            v.max(0.0),
            outcome.sampled.contains(id) as u8
        );
    }
    std::fs::write(&csv_path, csv)?;
    manifest.add_output(&json_path);
    manifest.add_output(&csv_path);
    manifest.record_timing("total", started.elapsed());
    manifest.write(&args.out.with_extension("manifest.json"))?;
    println!(
        "subsample: accuracy = {:.4} on {} kept points",
        outcome.accuracy,
        outcome.sampled.len()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_curve(args: CurveArgs) -> core::Result<ExitCode> {
    let started = Instant::now();
    let values = io::read_values_csv(&args.values)?;
    let data = load_dataset(&args.data, &args.label_column)?;
    let validation = load_dataset(&args.validation, &args.label_column)?;
    let spec = UtilitySpec::new(
        ModelKind::LogisticRegression,
        Metric::Accuracy,
        validation,
        training_config(args.l2),
    )?;
    let utility = ModelUtility::new(&spec, &data);
    let direction = match args.direction {
        DirectionArg::Add => CurveDirection::Add,
        DirectionArg::Remove => CurveDirection::Remove,
    };
    let mut manifest = RunManifest::new(
        "task curve",
        json!({
            "direction": match args.direction { DirectionArg::Add => "add", DirectionArg::Remove => "remove" },
            "steps": args.steps,
            "init_size": args.init_size,
            "random": args.random,
            "l2": args.l2,
        }),
        Some(args.seed),
    );
    manifest.add_input(&args.values)?;
    manifest.add_input(&args.data)?;
    manifest.add_input(&args.validation)?;

    let config = CurveConfig {
        direction,
        random_order: args.random,
        init_size: args.init_size,
        steps: args.steps,
        seed: args.seed,
    };
    let curve = tasks::point_curve(&utility, &values, &config)?;
    let json_path = args.out.with_extension("json");
    let csv_path = args.out.with_extension("csv");
    std::fs::write(&json_path, serde_json::to_string_pretty(&curve)?)?;
    std::fs::write(&csv_path, io::curve_csv(&curve))?;
    manifest.utility_evaluations = Some(utility.evaluations());
    manifest.add_output(&json_path);
    manifest.add_output(&csv_path);
    manifest.record_timing("total", started.elapsed());
    manifest.write(&args.out.with_extension("manifest.json"))?;
    println!(
        "curve ({}): relative area = {:.6} over {} steps",
        curve.ordering,
        curve.relative_area,
        curve.step_utilities.len() - 1
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_snr(args: SnrArgs) -> core::Result<ExitCode> {
    let started = Instant::now();
    let kind: SyntheticKind = args.kind.into();
    let mut manifest = RunManifest::new(
        "task snr",
        json!({
            "kind": kind.name(),
            "n": args.n,
            "grid": &args.grid,
            "repeats": args.repeats,
            "samples": args.samples,
            "flip_fraction": args.flip_fraction,
            "flip_test_point": args.flip_test_point,
        }),
        Some(args.seed),
    );
    let config = SnrConfig {
        samples_per_cardinality: args.samples,
        flip_fraction: args.flip_fraction,
        flip_test_point: args.flip_test_point,
        ..SnrConfig::new(kind, args.n, args.grid.clone(), args.repeats, args.seed)
    };
    let profile = tasks::snr_scan(&config)?;
    let json_path = args.out.with_extension("json");
    let csv_path = args.out.with_extension("csv");
    std::fs::write(&json_path, serde_json::to_string_pretty(&profile)?)?;
    std::fs::write(&csv_path, io::snr_csv(&profile))?;
    manifest.add_output(&json_path);
    manifest.add_output(&csv_path);
    manifest.record_timing("total", started.elapsed());
    manifest.write(&args.out.with_extension("manifest.json"))?;
    println!(
        "snr: scanned {} cardinalities over {} repeats",
        profile.grid.len(),
        args.repeats
    );
    Ok(ExitCode::SUCCESS)
}
