//! `moss` command line: two-stage search (`moss`), moving-window scan
//! (`mwindow`), optimal SNP recoding (`recode`) and the data simulator
//! (`simulate`).
//!
//! Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use moss_core::{
    build_run_report, code_map_tsv, load_dataset, load_dimens_sidecar, moving_window,
    recode_data, run_moss_pipeline, simulate_dataset, window_tsv, DimensSpec, Error, PriorConfig,
    SearchConfig, SimConfig,
};

const THREADS_ENV: &str = "MOSS_THREADS";

#[derive(Parser)]
#[command(
    name = "moss",
    version,
    about = "Bayesian variable selection for categorical case-control data"
)]
struct Cli {
    /// Worker threads (default: MOSS_THREADS or all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the two-stage stochastic search (stage 2 and cross-validation
    /// only when --k is given).
    Moss(MossArgs),
    /// Score every window of consecutive SNPs against the response.
    Mwindow(MwindowArgs),
    /// Find the best binary coding for each trinary SNP.
    Recode(RecodeArgs),
    /// Simulate a case-control dataset from the two-SNP disease model.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Input table (CSV/TSV with a header row; last column is the binary
    /// response; NA or empty cells mark missing values).
    #[arg(long)]
    data: PathBuf,

    /// Dimension sidecar (one integer per line); inferred from the data
    /// when omitted.
    #[arg(long)]
    dimens: Option<PathBuf>,

    /// Fictive grand total of the prior.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
}

#[derive(Args)]
struct MossArgs {
    #[command(flatten)]
    data: DataArgs,

    /// Retention fraction in (0,1).
    #[arg(long, default_value_t = 0.1)]
    c: f64,

    /// Elimination fraction, 0 < c-prime < c.
    #[arg(long = "c-prime", default_value_t = 1e-4)]
    c_prime: f64,

    /// Probability of the S(c) prune after each exploration.
    #[arg(long, default_value_t = 0.1)]
    q: f64,

    /// Stage-1 restarts merged into the result.
    #[arg(long, default_value_t = 5)]
    replicates: usize,

    /// Maximum variables per regression, response included.
    #[arg(long = "max-vars", default_value_t = 3)]
    max_vars: usize,

    /// Comma-separated column names forced into every regression.
    #[arg(long = "conf-vars", value_delimiter = ',')]
    conf_vars: Vec<String>,

    /// Cross-validation folds; omit to stop after stage 1.
    #[arg(long)]
    k: Option<usize>,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Base path for the report files (writes BASE.txt and BASE.json).
    #[arg(long)]
    out: Option<PathBuf>,

    /// What to print on stdout.
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args)]
struct MwindowArgs {
    #[command(flatten)]
    data: DataArgs,

    /// Number of consecutive SNPs per window.
    #[arg(long = "window-size")]
    window_size: usize,

    /// Output TSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RecodeArgs {
    #[command(flatten)]
    data: DataArgs,

    /// Output base path: writes BASE.csv, BASE.dimens and BASE.codemap.tsv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long = "n-cases", default_value_t = 1000)]
    n_cases: usize,

    #[arg(long = "n-controls", default_value_t = 1000)]
    n_controls: usize,

    /// Number of SNP columns.
    #[arg(long, default_value_t = 100)]
    p: usize,

    /// Two causal SNP indices (0-based), comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [0usize, 1])]
    causal: Vec<usize>,

    /// Logistic intercept.
    #[arg(long, default_value_t = -5.0, allow_hyphen_values = true)]
    intercept: f64,

    /// Effect size shared by the five causal terms.
    #[arg(long, default_value_t = 0.4)]
    effect: f64,

    /// Allele-frequency range for background SNPs, as LO,HI.
    #[arg(long, value_delimiter = ',', default_values_t = [0.05, 0.4])]
    maf: Vec<f64>,

    /// Allele-frequency range for the causal SNPs, as LO,HI.
    #[arg(long = "causal-maf", value_delimiter = ',', default_values_t = [0.3, 0.45])]
    causal_maf: Vec<f64>,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// JSON config file; when given it replaces the simulation flags
    /// (missing fields take their defaults).
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output base path: writes BASE.csv and BASE.dimens.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

enum CliError {
    Usage(String),
    Data(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Numerical(m) | CliError::Io(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        match err {
            Error::Invalid(m) => CliError::Usage(m),
            Error::Data(m) => CliError::Data(m),
            Error::Numerical(m) => CliError::Numerical(m),
            Error::Io { .. } => CliError::Io(err.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads(cli.threads);
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("moss: {}", err.message());
            ExitCode::from(err.code())
        }
    }
}

fn configure_threads(flag: Option<usize>) {
    let from_env = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    if let Some(n) = flag.or(from_env) {
        // Ignore failure: the global pool can only be set once.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
}

fn load(args: &DataArgs) -> Result<(moss_core::Dataset, PriorConfig), CliError> {
    let dimens = match &args.dimens {
        Some(path) => DimensSpec::Explicit(load_dimens_sidecar(path)?),
        None => DimensSpec::Auto,
    };
    let data = load_dataset(&args.data, dimens)?;
    let prior = PriorConfig::new(args.alpha)?;
    Ok((data, prior))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents)
        .map_err(|e| CliError::Io(format!("writing {}: {}", path.display(), e)))
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Moss(args) => run_moss(args),
        Command::Mwindow(args) => run_mwindow(args),
        Command::Recode(args) => run_recode(args),
        Command::Simulate(args) => run_simulate(args),
    }
}

fn run_moss(args: MossArgs) -> Result<(), CliError> {
    if let Some(k) = args.k {
        if k < 2 {
            return Err(CliError::Usage(format!("--k must be at least 2, got {}", k)));
        }
    }
    let (data, prior) = load(&args.data)?;
    let conf_vars = args
        .conf_vars
        .iter()
        .filter(|name| !name.is_empty())
        .map(|name| {
            data.column_index(name).ok_or_else(|| {
                CliError::Usage(format!("--conf-vars: unknown column '{}'", name))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    if conf_vars.contains(&data.response_index()) {
        return Err(CliError::Usage(
            "--conf-vars cannot include the response column".into(),
        ));
    }

    let cfg = SearchConfig {
        c: args.c,
        c_prime: args.c_prime,
        q: args.q,
        replicates: args.replicates,
        max_vars: args.max_vars,
        conf_vars,
        seed: args.seed,
    };
    cfg.validate()?;

    let outcome = run_moss_pipeline(&data, &prior, &cfg, args.k)?;
    let report = build_run_report(
        &data,
        &prior,
        &cfg,
        args.k,
        args.data.data.to_str(),
        &outcome,
    );

    for warning in &report.warnings {
        eprintln!("moss: warning: {}", warning);
    }

    let text = report.to_text();
    let json = report.to_json();
    if let Some(base) = &args.out {
        write_file(&base.with_extension("txt"), &text)?;
        write_file(&base.with_extension("json"), &json)?;
    }
    match args.format {
        Format::Text => print!("{}", text),
        Format::Json => print!("{}", json),
    }
    Ok(())
}

fn run_mwindow(args: MwindowArgs) -> Result<(), CliError> {
    let (data, prior) = load(&args.data)?;
    let result = moving_window(&data, &prior, args.window_size)?;
    let tsv = window_tsv(&result);
    match &args.out {
        Some(path) => write_file(path, &tsv)?,
        None => print!("{}", tsv),
    }
    Ok(())
}

fn run_recode(args: RecodeArgs) -> Result<(), CliError> {
    let (data, prior) = load(&args.data)?;
    let result = recode_data(&data, &prior)?;
    write_file(
        &args.out.with_extension("csv"),
        &result.data.to_csv_string(','),
    )?;
    write_file(
        &args.out.with_extension("dimens"),
        &result.data.dimens_sidecar(),
    )?;
    write_file(
        &args.out.with_extension("codemap.tsv"),
        &code_map_tsv(&data, &result.code_maps),
    )?;
    let recoded = result.code_maps.iter().filter(|m| m.is_some()).count();
    eprintln!("moss: recoded {} of {} columns", recoded, data.n_columns());
    Ok(())
}

fn run_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let cfg = if let Some(path) = &args.config {
        SimConfig::from_json_file(path)?
    } else {
        for (flag, values) in [
            ("--causal", args.causal.len()),
            ("--maf", args.maf.len()),
            ("--causal-maf", args.causal_maf.len()),
        ] {
            if values != 2 {
                return Err(CliError::Usage(format!(
                    "{} needs exactly two comma-separated values",
                    flag
                )));
            }
        }
        SimConfig {
            n_cases: args.n_cases,
            n_controls: args.n_controls,
            p: args.p,
            causal: [args.causal[0], args.causal[1]],
            intercept: args.intercept,
            effect: args.effect,
            maf_range: (args.maf[0], args.maf[1]),
            causal_maf_range: (args.causal_maf[0], args.causal_maf[1]),
            seed: args.seed,
        }
    };
    let data = simulate_dataset(&cfg)?;
    write_file(&args.out.with_extension("csv"), &data.to_csv_string(','))?;
    write_file(&args.out.with_extension("dimens"), &data.dimens_sidecar())?;
    eprintln!(
        "moss: wrote {} rows x {} columns to {}.csv",
        data.n_rows(),
        data.n_columns(),
        args.out.display()
    );
    Ok(())
}
