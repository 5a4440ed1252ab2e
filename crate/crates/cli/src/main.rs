use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thermops_cli::{parse_config, run, threads_from_env, Mode, RunError, RunOptions};

#[derive(Parser)]
#[command(
    name = "thermops",
    version,
    about = "Collision-model thermalization with noisy reservoirs"
)]
struct Cli {
    #[command(subcommand)]
    mode: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One delta realization: trajectory.csv, violations.json.
    SingleShot(Common),
    /// Monte Carlo ensemble: trajectory.csv, ensemble.csv, violations.json.
    Ensemble(Common),
    /// Free-energy lattice on the qutrit simplex: contour.csv.
    Contour(Common),
    /// Qubit violation scan over p0: scan.csv, scan.json.
    Scan(Common),
    /// Non-uniform block unitaries: trajectory.csv, curved.json.
    Curved(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, args) = match cli.mode {
        Command::SingleShot(a) => (Mode::SingleShot, a),
        Command::Ensemble(a) => (Mode::Ensemble, a),
        Command::Contour(a) => (Mode::Contour, a),
        Command::Scan(a) => (Mode::Scan, a),
        Command::Curved(a) => (Mode::Curved, a),
    };
    let threads = match threads_from_env() {
        Ok(n) => n,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let parsed = match parse_config(&args.config) {
        Ok(p) => p,
        Err(e) => return fail(RunError::Config(e)),
    };
    for w in &parsed.warnings {
        eprintln!("warning: {w}");
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return ExitCode::from(1);
        }
    };
    let opts = RunOptions {
        seed: args.seed,
        out_dir: args.out,
    };
    match pool.install(|| run(mode, &parsed.config, &opts)) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}

fn fail(e: RunError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}
