use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use aircomp_core::harness::{self, FunctionKind, ScenarioConfig};
use aircomp_core::planner::{self, BaselineModel, Plan};
use aircomp_core::{Error, Result};

#[derive(Parser)]
#[command(name = "aircomp", version, about = "Over-the-air aggregation planner and simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the analytical plan for one operating point.
    Plan {
        #[arg(long)]
        n: u64,
        #[arg(long, allow_negative_numbers = true)]
        snr_db: f64,
        #[arg(long)]
        bits: u32,
        /// Samples per measurement of the one-by-one baseline.
        #[arg(long)]
        md: Option<u64>,
    },
    /// Monte Carlo for the first (N, SNR) point of a config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo over the whole grid; writes runs.csv and gain.csv.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tables for plotting.
    Figure {
        kind: FigureKind,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FigureKind {
    /// Sum gain over the (N, SNR) grid.
    GainSum,
    /// Max gain over the (N, SNR) grid.
    GainMax,
    /// Per-bit correctness of the sum vs averaging depth.
    BitError,
}

fn plan(n: u64, snr_db: f64, bits: u32, md: Option<u64>) -> Result<()> {
    let md = match md {
        Some(0) => return Err(Error::config("md", "must be >= 1")),
        Some(md) => md,
        None => BaselineModel::default().samples_per_measurement(),
    };
    // Bad flag values are usage errors, not runtime failures.
    let p = planner::optimal_plan_with_md(n, snr_db, bits, md).map_err(|e| match e {
        Error::Domain(m) => Error::config("plan", m),
        e => e,
    })?;
    let mut w = csv::Writer::from_writer(std::io::stdout());
    let write = |w: &mut csv::Writer<std::io::Stdout>| -> csv::Result<()> {
        w.write_record(Plan::FIELDS.iter().copied().chain(["gain_closed_form"]))?;
        let mut rec = p.record();
        rec.push(planner::closed_form_gain(n, snr_db, bits, md).to_string());
        w.write_record(&rec)?;
        w.flush()?;
        Ok(())
    };
    write(&mut w).map_err(|e| Error::Csv {
        path: "<stdout>".into(),
        message: e.to_string(),
    })
}

fn load(path: &Path) -> Result<ScenarioConfig> {
    ScenarioConfig::load(path)
}

fn run(config: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<()> {
    let mut cfg = load(config)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let record = harness::run_scenario(&cfg)?;
    match out.or(cfg.output.clone()) {
        Some(path) => harness::emit_csv(std::slice::from_ref(&record), &path),
        None => harness::write_runs(std::slice::from_ref(&record), std::io::stdout().lock()).map_err(|e| Error::Csv {
            path: "<stdout>".into(),
            message: e.to_string(),
        }),
    }
}

fn sweep(config: &Path, out: &Path) -> Result<()> {
    let cfg = load(config)?;
    let (records, gains) = harness::run_sweep(&cfg)?;
    harness::emit_csv(&records, &out.join("runs.csv"))?;
    harness::write_gain_table(&gains, &out.join("gain.csv"))
}

fn figure(kind: FigureKind, config: &Path, out: &Path) -> Result<()> {
    let mut cfg = load(config)?;
    match kind {
        FigureKind::GainSum | FigureKind::GainMax => {
            cfg.function = if matches!(kind, FigureKind::GainSum) {
                FunctionKind::Sum
            } else {
                FunctionKind::Max
            };
            harness::write_gain_table(&harness::gain_table(&cfg)?, out)
        }
        FigureKind::BitError => {
            cfg.function = FunctionKind::Sum;
            let mut records = Vec::new();
            for n in cfg.ns()? {
                for snr in cfg.snrs()? {
                    records.push(harness::run_point(&cfg, n, snr)?);
                }
            }
            harness::write_depth_table(&records, out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Plan { n, snr_db, bits, md } => plan(n, snr_db, bits, md),
        Command::Run { config, seed, out } => run(&config, seed, out),
        Command::Sweep { config, out } => sweep(&config, &out),
        Command::Figure { kind, config, out } => figure(kind, &config, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
