//! Command-line front end. `run` holds everything so tests can drive the
//! binary in-process with their own kernels and output buffers.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use heckfair::data::write_snapshot;
use heckfair::experiment::{
    load, results_csv, sweep_csv, write_fit, write_sweep, ResultRow,
};
use heckfair::selfcheck::format_table;
use heckfair::{
    full_report, generate_synthetic, run_fit, run_ratio_sweep, run_selfcheck, ConstraintForm, Error,
    ExperimentSpec, FairnessConstraint, FittedModel, Kernels, Notion, Result, Slice, SyntheticConfig,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SELFCHECK: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "heckfair", version, about = "Fair regression under sample selection bias")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit every method of an experiment spec and report both slices.
    Fit(SpecArgs),
    /// Re-split the training data at each ratio of the spec and report test metrics.
    Sweep(SpecArgs),
    /// Write train/test snapshots of a synthetic configuration.
    Synth(SynthArgs),
    /// Score fitted models (a `models.json`) on a spec's data.
    Metrics(MetricsArgs),
    /// Run the embedded invariant checks.
    Selfcheck,
}

#[derive(Debug, Args)]
struct SpecArgs {
    /// Experiment spec (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the dataset seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to the spec's `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    ridge: Option<f64>,
    /// md, msed, pearson or partial.
    #[arg(long)]
    constraint: Option<Notion>,
    /// `eq` or `thresh:<v>`.
    #[arg(long)]
    form: Option<ConstraintForm>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Synthetic configuration (JSON); the built-in biased design if omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    #[arg(long)]
    config: PathBuf,
    /// Models written by `fit`.
    #[arg(long)]
    models: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code. Errors are written to `stderr` as one JSON object.
pub fn run<I, T>(args: I, kernels: &Kernels, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = write!(stdout, "{e}");
            return EXIT_OK;
        }
        Err(e) => {
            report(stderr, "UsageError", "cli_bench", first_line(&e.to_string()).trim_start_matches("error: ").to_string());
            return EXIT_ERROR;
        }
    };
    let outcome = match cli.command {
        Command::Fit(a) => fit(&a, stdout),
        Command::Sweep(a) => sweep(&a, stdout),
        Command::Synth(a) => synth(&a, stdout),
        Command::Metrics(a) => metrics(&a, stdout),
        Command::Selfcheck => return selfcheck(kernels, stdout, stderr),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            report(stderr, e.code(), e.module(), e.to_string());
            EXIT_ERROR
        }
    }
}

fn first_line(s: &str) -> String {
    s.lines().find(|l| !l.trim().is_empty()).unwrap_or("").trim().to_string()
}

fn report(stderr: &mut dyn Write, code: &str, module: &str, message: String) {
    let body = serde_json::json!({ "code": code, "module": module, "message": message });
    let _ = writeln!(stderr, "{body}");
}

fn load_spec(a: &SpecArgs) -> Result<(ExperimentSpec, PathBuf)> {
    let mut spec = ExperimentSpec::from_json_file(&a.config)?;
    if let Some(seed) = a.seed {
        spec.set_seed(seed);
    }
    if let Some(r) = a.ridge {
        spec.solver.ridge = r;
    }
    let notion = a.constraint.or(spec.constraint.map(|c| c.notion));
    if a.constraint.is_some() || a.form.is_some() {
        let notion = notion.ok_or_else(|| Error::InvalidConfig("--form needs a constraint notion".into()))?;
        let form = a.form.or(spec.constraint.map(|c| c.form)).unwrap_or(ConstraintForm::Equality);
        spec.constraint = Some(FairnessConstraint::new(notion, form)?);
    }
    spec.validate()?;
    let out = output_dir(a.out.as_deref(), &spec)?;
    Ok((spec, out))
}

fn output_dir(flag: Option<&Path>, spec: &ExperimentSpec) -> Result<PathBuf> {
    flag.map(Path::to_path_buf)
        .or_else(|| spec.output_dir.clone())
        .ok_or_else(|| Error::InvalidConfig("no output directory: pass --out or set output_dir".into()))
}

fn fit(a: &SpecArgs, stdout: &mut dyn Write) -> Result<()> {
    let (spec, out) = load_spec(a)?;
    let result = run_fit(&spec)?;
    write_fit(&result, &out)?;
    stdout.write_all(results_csv(&result.rows).as_bytes())?;
    Ok(())
}

fn sweep(a: &SpecArgs, stdout: &mut dyn Write) -> Result<()> {
    let (spec, out) = load_spec(a)?;
    let rows = run_ratio_sweep(&spec)?;
    write_sweep(&rows, &out)?;
    stdout.write_all(sweep_csv(&rows).as_bytes())?;
    Ok(())
}

fn synth(a: &SynthArgs, stdout: &mut dyn Write) -> Result<()> {
    let mut config = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            serde_json::from_str::<SyntheticConfig>(&text)
                .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?
        }
        None => SyntheticConfig::default(),
    };
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    let data = generate_synthetic(&config)?;
    write_snapshot(&data.train, &a.out.join("train"))?;
    write_snapshot(&data.test, &a.out.join("test"))?;
    writeln!(
        stdout,
        "train: {} rows ({} selected), test: {} rows",
        data.train.n(),
        data.train.selected_count(),
        data.test.n()
    )?;
    Ok(())
}

fn metrics(a: &MetricsArgs, stdout: &mut dyn Write) -> Result<()> {
    let mut spec = ExperimentSpec::from_json_file(&a.config)?;
    if let Some(seed) = a.seed {
        spec.set_seed(seed);
    }
    let text = std::fs::read_to_string(&a.models).map_err(|e| Error::Io(format!("{}: {e}", a.models.display())))?;
    let models: Vec<FittedModel> =
        serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", a.models.display())))?;
    let (train, test) = load(&spec)?;
    let mut rows = Vec::new();
    for model in &models {
        model.validate()?;
        for (slice, data) in [(Slice::TrainSelected, &train), (Slice::Test, &test)] {
            rows.push(ResultRow {
                method: model.method,
                report: full_report(model, data, slice)?,
            });
        }
    }
    let csv = results_csv(&rows);
    if let Some(dir) = a.out.as_deref().or(spec.output_dir.as_deref()) {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("metrics.csv"), &csv)?;
    }
    stdout.write_all(csv.as_bytes())?;
    Ok(())
}

fn selfcheck(kernels: &Kernels, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let results = run_selfcheck(kernels);
    let _ = stdout.write_all(format_table(&results).as_bytes());
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.name).collect();
    if failed.is_empty() {
        EXIT_OK
    } else {
        report(stderr, "SelfcheckFailed", "cli_bench", format!("failing checks: {}", failed.join(", ")));
        EXIT_SELFCHECK
    }
}
