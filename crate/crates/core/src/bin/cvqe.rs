use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use diabatic_cvqe::error::{CvqeError, Result};
use diabatic_cvqe::scan::{self, ScanConfig};

#[derive(Parser)]
#[command(name = "cvqe", version, about = "Diabatic guiding states and measured-subspace diagonalization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads (0 = all cores)
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(clap::Args)]
struct Common {
    /// TOML scan configuration
    #[arg(long)]
    config: PathBuf,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Replace the configured seeds with 1..=N
    #[arg(long)]
    seeds: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Scan the (N_τ, Δτ) grid and write per-run and aggregate tables
    Scan(Common),
    /// Exact reference energy, optionally with ΔE for an existing scan.csv
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scan: Option<PathBuf>,
    },
    /// Write OpenQASM circuits and resource summaries for each grid point
    Compile(Common),
    /// Compare rotated-basis and computational-basis shot collection
    CompareMethods(Common),
    /// Print the operator-string weight table of one order
    Weights {
        #[arg(long, default_value_t = 3)]
        order: usize,
        /// Also write weights.csv here
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(c: &Common) -> Result<ScanConfig> {
    let mut cfg = ScanConfig::load(&c.config)?;
    if let Some(n) = c.seeds {
        if n == 0 {
            return Err(CvqeError::Config("--seeds must be at least 1".into()));
        }
        cfg.sampling.seeds = (1..=n).collect();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Scan(c) => {
            let cfg = load(&c)?;
            for p in scan::cmd_scan(&cfg, &c.out)? {
                println!("{}", p.display());
            }
        }
        Command::Oracle { common, scan: csv } => {
            let cfg = load(&common)?;
            let r = scan::cmd_oracle(&cfg, csv.as_deref(), &common.out)?;
            println!("{:?} {}", r.kind, r.energy);
        }
        Command::Compile(c) => {
            let cfg = load(&c)?;
            for p in scan::cmd_compile(&cfg, &c.out)? {
                println!("{}", p.display());
            }
        }
        Command::CompareMethods(c) => {
            let cfg = load(&c)?;
            let r = scan::cmd_compare_methods(&cfg, &c.out)?;
            println!("L={} E_B_m1={} E_B_m2={} overlap={}", r.l, r.e_b_m1, r.e_b_m2, r.overlap);
        }
        Command::Weights { order, out } => {
            scan::cmd_weights(order, std::io::stdout().lock())?;
            if let Some(dir) = out {
                std::fs::create_dir_all(&dir)?;
                scan::cmd_weights(order, std::fs::File::create(dir.join("weights.csv"))?)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads;
    match scan::with_threads(threads, || run(cli)).and_then(|r| r) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
