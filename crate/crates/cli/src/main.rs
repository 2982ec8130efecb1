use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ntsdr::io::Storage;
use ntsdr::NtsdrError;

mod commands;

#[derive(Parser, Debug)]
#[command(name = "ntsdr", version, about = "Nonlinear tensor sufficient dimension reduction")]
struct Cli {
    /// Worker threads; overrides NTSDR_THREADS. Defaults to the number of logical cores.
    #[arg(long, global = true, env = "NTSDR_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a simulated dataset (training split, plus `test/`) from a JSON config.
    Simulate {
        config: PathBuf,
        out_dir: PathBuf,
        /// Replication index whose random streams are used.
        #[arg(long, default_value_t = 0)]
        rep: usize,
        #[arg(long, value_enum, default_value_t = StorageArg::Bin)]
        storage: StorageArg,
    },
    /// Fit an estimator and write the model file plus a JSON fit report.
    Fit(FitArgs),
    /// Evaluate sufficient predictors (and Ŷ when available) on a dataset.
    Predict {
        model: PathBuf,
        data_dir: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Run the GCV grid search and write the score table.
    Tune {
        data_dir: PathBuf,
        #[command(flatten)]
        method: MethodArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        rho: RhoArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Run a benchmark config and write the results table.
    Bench {
        config: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StorageArg {
    Bin,
    Csv,
}

impl From<StorageArg> for Storage {
    fn from(s: StorageArg) -> Self {
        match s {
            StorageArg::Bin => Storage::Bin,
            StorageArg::Csv => Storage::Csv,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Tucker,
    Cp,
    Gsir,
}

#[derive(Args, Debug, Clone)]
pub struct MethodArgs {
    #[arg(long, value_enum)]
    pub method: MethodArg,
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long)]
    pub t: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct GridArgs {
    /// Comma-separated η grid; defaults to 1e-6..1e-1.
    #[arg(long, value_delimiter = ',')]
    pub eta_grid: Option<Vec<f64>>,
    /// Comma-separated ε grid; defaults to 1e-6..1e-1.
    #[arg(long, value_delimiter = ',')]
    pub eps_grid: Option<Vec<f64>>,
}

#[derive(Args, Debug, Clone, Copy)]
pub struct RhoArgs {
    #[arg(long, default_value_t = 1.0)]
    pub rho_u: f64,
    #[arg(long, default_value_t = 1.0)]
    pub rho_v: f64,
    #[arg(long, default_value_t = 1.0)]
    pub rho_y: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LinkArg {
    /// Log link when the dataset carries a noiseless signal, kernel ridge otherwise.
    Auto,
    Log,
    Ridge,
    None,
}

#[derive(Args, Debug, Clone)]
pub struct FitArgs {
    pub data_dir: PathBuf,
    #[command(flatten)]
    pub method: MethodArgs,
    /// Select regularization by GCV instead of the explicit values.
    #[arg(long)]
    pub tune: bool,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, default_value_t = 1e-3, conflicts_with = "tune")]
    pub eta_u: f64,
    #[arg(long, default_value_t = 1e-3, conflicts_with = "tune")]
    pub eta_v: f64,
    #[arg(long, default_value_t = 1e-3, conflicts_with = "tune")]
    pub eps_u: f64,
    #[arg(long, default_value_t = 1e-3, conflicts_with = "tune")]
    pub eps_v: f64,
    #[command(flatten)]
    pub rho: RhoArgs,
    #[arg(long, value_enum, default_value_t = LinkArg::Auto)]
    pub link: LinkArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub out: PathBuf,
    /// Fit report path; defaults to the model path with a `.report.json` suffix.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

fn exit_code(e: &NtsdrError) -> u8 {
    match e {
        NtsdrError::Io(_) => 1,
        e if e.is_validation() => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} worker threads: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Simulate { config, out_dir, rep, storage } => commands::simulate(&config, &out_dir, rep, storage.into()),
        Command::Fit(args) => commands::fit(&args),
        Command::Predict { model, data_dir, out } => commands::predict(&model, &data_dir, &out),
        Command::Tune { data_dir, method, grid, rho, seed, out } => commands::tune(&data_dir, &method, &grid, rho, seed, &out),
        Command::Bench { config, out } => commands::bench(&config, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
