use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use gpsurrogate_core::benchmark::{run_dimension, BenchmarkProtocol, Variant};
use gpsurrogate_core::predictor::MseKind;
use gpsurrogate_core::selection::{fit_full, outer_fold_plan, select, FinalValidation};
use gpsurrogate_core::validation::kfold_q2;

use crate::config::{self, ConfigFile, PipelineOptions};
use crate::error::{CliError, EXIT_USAGE};
use crate::{io, model_file, report};

#[derive(Debug, Parser)]
#[command(name = "gpsurrogate", version, about = "Gaussian process surrogates with sequential input selection")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for folds and replicates (default: available cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Flat `key = value` file with default settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Select inputs, estimate the model and write it to disk.
    Fit(FitArgs),
    /// Predict with a saved model.
    Predict(PredictArgs),
    /// Cross-validate the whole selection procedure.
    Cv(CvArgs),
    /// Replicated Sobol g-function benchmark.
    Benchmark(BenchArgs),
}

#[derive(Debug, clap::Args)]
struct FitArgs {
    /// Learning sample (CSV with a header row).
    #[arg(long)]
    data: PathBuf,
    /// Output column (default: the last column).
    #[arg(long)]
    output_col: Option<String>,
    /// Model file to write.
    #[arg(long)]
    model: PathBuf,
    /// Text report (default: <model>.report.txt).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Machine-readable trace (default: <model>.trace.json).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Validate on this sample instead of cross-validating.
    #[arg(long)]
    test_data: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineOptions,
}

#[derive(Debug, clap::Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// Query points (CSV); columns are matched to the model inputs by name.
    #[arg(long)]
    data: PathBuf,
    /// Output CSV (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Leave out the trend-estimation term of the mean squared error.
    #[arg(long)]
    plain_mse: bool,
}

#[derive(Debug, clap::Args)]
struct CvArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    output_col: Option<String>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineOptions,
}

#[derive(Debug, clap::Args)]
struct BenchArgs {
    /// Input dimensions, comma separated.
    #[arg(long, value_delimiter = ',')]
    d: Option<Vec<usize>>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Test sample size.
    #[arg(long)]
    n_test: Option<usize>,
    /// Learning sample size per input.
    #[arg(long)]
    n_per_input: Option<usize>,
    /// Smaller test samples and search budgets, for smoke runs.
    #[arg(long)]
    quick: bool,
    /// Run only the full procedure (no comparison without steps 4-5).
    #[arg(long)]
    no_compare: bool,
    /// Summary table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Per-replicate report without timings.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineOptions,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let file = config::load(cli.config.as_deref())?;
    let jobs = cli.jobs.or(file.jobs);
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        builder = builder.num_threads(j);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Fit(a) => fit(a, file),
        Command::Predict(a) => predict(a),
        Command::Cv(a) => cv(a, file),
        Command::Benchmark(a) => benchmark(a, file),
    })
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn fit(a: FitArgs, file: ConfigFile) -> Result<(), CliError> {
    let output_col = a.output_col.or(file.output_col);
    let ts = io::read_training_set(&a.data, output_col.as_deref())?;
    let options = a.pipeline.or(file.pipeline);
    let mut config = options.pipeline();
    if let Some(path) = &a.test_data {
        let test = io::read_training_set(path, output_col.as_deref())?;
        if test.input_names() != ts.input_names() {
            return Err(CliError::Data(format!(
                "{}: input columns differ from the learning sample",
                path.display()
            )));
        }
        config.final_validation = FinalValidation::TestSet(test);
    }
    let output_name = output_col.unwrap_or_else(|| "(last column)".into());
    let (model, trace) = fit_full(&ts, &config)?;

    io::write_text(&a.model, &model_file::to_string(&model, config.seed))?;
    let report = report::selection_report(&trace, ts.n(), &output_name, &config);
    io::write_text(&a.report.unwrap_or_else(|| with_suffix(&a.model, ".report.txt")), &report)?;
    let mut json = serde_json::to_string_pretty(&trace).expect("trace serializes");
    json.push('\n');
    io::write_text(&a.trace.unwrap_or_else(|| with_suffix(&a.model, ".trace.json")), &json)?;

    match &trace.final_validation {
        Some(v) => println!("final Q2 ({}): {:.6}", v.method, v.q2),
        None => println!("final Q2: not computed"),
    }
    let names = |idx: &[usize]| {
        idx.iter()
            .map(|&k| trace.input_names[k].as_str())
            .collect::<Vec<_>>()
            .join(", ")
    };
    println!("covariance inputs: {}", names(&trace.choice.cov_set));
    println!("regression inputs: {}", names(&trace.choice.reg_set));
    println!("model written to {}", a.model.display());
    Ok(())
}

fn predict(a: PredictArgs) -> Result<(), CliError> {
    let (model, _) = model_file::load(&a.model)?;
    let x = io::read_query(&a.data, model.input_names())?;
    let kind = if a.plain_mse {
        MseKind::Uncorrected
    } else {
        MseKind::Corrected
    };
    let preds = x
        .rows()
        .map(|r| model.predict_with(r, kind))
        .collect::<Result<Vec<_>, _>>()?;
    let mut buf = Vec::new();
    io::write_predictions(&mut buf, &preds).map_err(|e| CliError::Io("predictions".into(), e))?;
    let text = String::from_utf8(buf).expect("csv output is utf-8");
    io::write_text(a.out.as_deref().unwrap_or(Path::new("-")), &text)?;
    let clamped = model.kriging().clamped_mse_count();
    if clamped > 0 {
        eprintln!("note: {clamped} negative MSE value(s) from round-off were set to 0");
    }
    Ok(())
}

fn cv(a: CvArgs, file: ConfigFile) -> Result<(), CliError> {
    let output_col = a.output_col.or(file.output_col);
    let ts = io::read_training_set(&a.data, output_col.as_deref())?;
    let options = a.pipeline.or(file.pipeline);
    let config = options.pipeline();
    let k = match config.final_validation {
        FinalValidation::OuterCv { k } => k,
        _ => return Err(CliError::Usage("cv needs --k-valid of at least 2".into())),
    };
    let plan = outer_fold_plan(ts.n(), k, config.seed)?;
    let out = kfold_q2(&ts, &plan, |train, test| {
        let inner = select(train, &config)?;
        Ok(inner.model.predict_batch(test)?.into_iter().map(|p| p.mean).collect())
    })?;
    let text = report::cv_report(config.seed, k, ts.outputs(), &out.predictions, out.q2);
    print!("{text}");
    if let Some(path) = &a.report {
        io::write_text(path, &text)?;
    }
    Ok(())
}

fn benchmark(a: BenchArgs, file: ConfigFile) -> Result<(), CliError> {
    let mut options = a.pipeline.or(file.pipeline);
    if a.quick && options.evals_per_param.is_none() {
        options.evals_per_param = Some(100);
    }
    let defaults = BenchmarkProtocol::default();
    let protocol = BenchmarkProtocol {
        dims: a.d.or(file.d).unwrap_or(defaults.dims),
        n_per_input: a.n_per_input.or(file.n_per_input).unwrap_or(defaults.n_per_input),
        n_test: a
            .n_test
            .or(file.n_test)
            .unwrap_or(if a.quick { 200 } else { defaults.n_test }),
        replicates: a.replicates.or(file.replicates).unwrap_or(defaults.replicates),
        seed: options.seed(),
        variants: if a.no_compare {
            vec![Variant::WithSteps45]
        } else {
            defaults.variants
        },
        pipeline: options.pipeline(),
    };
    protocol.validate()?;
    let mut rows = Vec::new();
    let mut seconds = Vec::new();
    for &d in &protocol.dims {
        let start = Instant::now();
        let r = run_dimension(&protocol, d)?;
        let t = start.elapsed().as_secs_f64();
        seconds.extend(std::iter::repeat(t).take(r.len()));
        rows.extend(r);
    }
    print!("{}", report::benchmark_table(&rows, &seconds));
    if let Some(path) = &a.csv {
        io::write_text(path, &report::benchmark_csv(&rows, &seconds))?;
    }
    if let Some(path) = &a.report {
        io::write_text(path, &report::benchmark_report(&protocol, &rows))?;
    }
    Ok(())
}
