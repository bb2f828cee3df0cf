mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "calibkit", version, about = "Calibration experiments for computer models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reproduce the three-candidate Gaussian-kernel example and its golden checks.
    Example1 {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "11,21,41,81")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = calibkit::example1::DEFAULT_QUAD_ORDER)]
        quad_order: usize,
        #[arg(long, default_value = "1:6:51")]
        phi_grid: String,
    },
    /// Run one calibration method, or all applicable ones, on a manifest.
    Calibrate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "all")]
        method: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep design sizes and fit convergence slopes against the L2 projection.
    Rates {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        /// Comma-separated estimators; defaults to the manifest's list.
        #[arg(long)]
        method: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Nyström eigenpairs of the manifest kernel on its domain.
    Eig {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        quad_order: Option<usize>,
        #[arg(long, default_value_t = 5)]
        modes: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the manifest kernel to the physical data and export the interpolant.
    Interp {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        quad_order: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

pub enum Failure {
    Usage(String),
    Core(calibkit::Error),
    Golden(usize),
}

impl From<calibkit::Error> for Failure {
    fn from(e: calibkit::Error) -> Self {
        Failure::Core(e)
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var("CALIBKIT_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Failure::Usage(format!("CALIBKIT_THREADS=`{value}` is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::Usage(e.to_string()))
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    match cli.command {
        Command::Example1 { out, sizes, quad_order, phi_grid } => {
            commands::example1(&out, &sizes, quad_order, &phi_grid)
        }
        Command::Calibrate { manifest, method, out } => commands::calibrate(&manifest, &method, &out),
        Command::Rates { manifest, sizes, method, out } => {
            commands::rates(&manifest, sizes.as_deref(), method.as_deref(), &out)
        }
        Command::Eig { manifest, quad_order, modes, out } => commands::eig(&manifest, quad_order, modes, &out),
        Command::Interp { manifest, quad_order, out } => commands::interp(&manifest, quad_order, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
        Err(Failure::Golden(n)) => {
            eprintln!("error: {n} golden check(s) failed");
            ExitCode::from(3)
        }
    }
}
