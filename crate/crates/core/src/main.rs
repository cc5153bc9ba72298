use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use particle_dg::cli::{self, ScenarioConfig};

/// Thread count for the compute pool; unset means one per core.
const THREADS_ENV: &str = "PARTICLE_DG_THREADS";

#[derive(Parser)]
#[command(name = "particle-dg", version, about = "Blob particle solver with discrete-gradient time stepping")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one scenario and write its diagnostics CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run several grid resolutions and fit error orders.
    Converge {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated cells-per-dimension list.
        #[arg(long = "M", value_delimiter = ',', required = true)]
        cells: Vec<usize>,
    },
    /// Reduced-scale invariant checks; exits 1 if any fails.
    Check {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match execute(args.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(2)
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got '{raw}'"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

/// `Ok(false)` means a check failed.
fn execute(command: Command) -> particle_dg::Result<bool> {
    match command {
        Command::Run { config } => {
            let cfg = ScenarioConfig::from_file(&config)?;
            let report = cli::run(&cfg)?;
            println!("scenario        {}", cfg.scenario);
            println!("cells_per_dim   {}", cfg.cells_per_dim);
            println!("particles       {}", report.final_ensemble.len());
            println!("epsilon         {:e}", report.epsilon);
            println!("steps           {}", report.records.len() - 1);
            println!("mean iterations {:.2}", report.mean_iterations);
            println!("max iterations  {}", report.max_iterations);
            if let Some(e) = report.final_errors {
                println!("errors at t_end L1 {:e}  L2 {:e}  Linf {:e}", e.l1, e.l2, e.linf);
            }
            if let Some(path) = &cfg.output {
                println!("csv             {}", path.display());
            }
            println!("wall clock      {:.3} s", report.wall_clock.as_secs_f64());
            Ok(true)
        }
        Command::Converge { config, cells } => {
            let cfg = ScenarioConfig::from_file(&config)?;
            let table = cli::converge(&cfg, &cells)?;
            println!("{:>5} {:>12} {:>12} {:>12} {:>12} {:>8} {:>5}", "M", "h", "L1", "L2", "Linf", "mean_it", "max_it");
            for r in &table.rows {
                println!(
                    "{:>5} {:>12.5e} {:>12.5e} {:>12.5e} {:>12.5e} {:>8.2} {:>5}",
                    r.cells_per_dim, r.cell_size, r.errors.l1, r.errors.l2, r.errors.linf, r.mean_iterations, r.max_iterations
                );
            }
            if let Some([l1, l2, linf]) = table.orders {
                println!("orders  L1 {l1:.3}  L2 {l2:.3}  Linf {linf:.3}");
            }
            Ok(true)
        }
        Command::Check { config } => {
            let cfg = ScenarioConfig::from_file(&config)?;
            let summary = cli::check(&cfg)?;
            for o in &summary.outcomes {
                println!("{} {:<20} {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
            }
            Ok(summary.passed())
        }
    }
}
