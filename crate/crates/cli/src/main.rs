//! Batch front-end for the tomography pipeline.
//!
//! Exit codes: 0 success (reconstruct: converged; fidelity: gate passed),
//! 1 fidelity gate failure, 2 validation or I/O error, 3 solver iteration
//! cap, 4 line-search failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "pqdt",
    about = "Phase-insensitive quantum detector tomography toolkit",
    version
)]
struct Cli {
    /// JSON config; omitted means the built-in desk-scale demo defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker count override (0 = hardware parallelism).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// RNG seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Deterministic reduction override.
    #[arg(long, global = true)]
    deterministic: Option<bool>,
    /// Working directory for default input/output paths.
    #[arg(long, global = true)]
    workdir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the probe matrix, analytic POVMs, and a sampled outcome matrix.
    Simulate,
    /// Reconstruct the POVM matrix from probe/outcome files.
    Reconstruct {
        /// Probe matrix file (default <workdir>/F.pqdt).
        #[arg(long)]
        f: Option<PathBuf>,
        /// Outcome matrix file (default <workdir>/P.pqdt).
        #[arg(long)]
        p: Option<PathBuf>,
        /// Output POVM file (default <workdir>/Pi_rec.pqdt).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-iteration JSONL report (default <workdir>/report.jsonl).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Per-outcome fidelity gate between two POVM files.
    Fidelity {
        /// Reconstructed POVM (default <workdir>/Pi_rec.pqdt).
        #[arg(long)]
        rec: Option<PathBuf>,
        /// Analytic/reference POVM (default <workdir>/Pi_theo.pqdt).
        #[arg(long)]
        theo: Option<PathBuf>,
        /// Gate threshold on every occupied outcome.
        #[arg(long)]
        threshold: Option<f64>,
        /// Report JSON (default <workdir>/fidelity_report.json).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Wigner function of one POVM column on a square grid.
    Wigner {
        /// Outcome index.
        #[arg(long)]
        outcome: usize,
        /// POVM file (default <workdir>/Pi_theo.pqdt).
        #[arg(long)]
        pi: Option<PathBuf>,
        /// Mantissa bits of the wide-float recurrence.
        #[arg(long, default_value_t = 70)]
        bits: u32,
        /// Half-width of the grid window.
        #[arg(long, default_value_t = 6.0)]
        grid_half: f64,
        /// Points per axis.
        #[arg(long, default_value_t = 101)]
        grid_points: usize,
        /// Output CSV (default <workdir>/wigner_<outcome>.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed-form memory estimates for a problem geometry.
    MemEstimate {
        #[arg(long)]
        m: u64,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        d: u64,
        #[arg(long, default_value_t = 1)]
        nodes: u64,
        #[arg(long, default_value_t = 8)]
        ranks: u64,
        /// Usable main memory per node in bytes.
        #[arg(long, default_value_t = 200_000_000_000)]
        mem_node: u64,
    },
    /// Kernel micro-benchmarks over a worker sweep.
    BenchOps {
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        d: Option<usize>,
        /// Comma-separated worker counts.
        #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
        workers_sweep: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        reps: usize,
        /// Output CSV (default <workdir>/bench.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match RunConfig::load(cli.config.as_ref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(w) = cli.workers {
        cfg.engine.n_workers = w;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(d) = cli.deterministic {
        cfg.engine.deterministic_reduction = d;
    }
    if let Some(dir) = cli.workdir {
        cfg.workdir = dir;
    }

    let outcome = match cli.command {
        Command::Simulate => commands::simulate(&cfg),
        Command::Reconstruct { f, p, out, report } => {
            commands::reconstruct(&cfg, f, p, out, report)
        }
        Command::Fidelity {
            rec,
            theo,
            threshold,
            out,
        } => commands::fidelity_gate(&cfg, rec, theo, threshold, out),
        Command::Wigner {
            outcome,
            pi,
            bits,
            grid_half,
            grid_points,
            out,
        } => commands::wigner(&cfg, outcome, pi, bits, grid_half, grid_points, out),
        Command::MemEstimate {
            m,
            n,
            d,
            nodes,
            ranks,
            mem_node,
        } => commands::mem_estimate(m, n, d, nodes, ranks, mem_node),
        Command::BenchOps {
            m,
            n,
            d,
            workers_sweep,
            reps,
            out,
        } => commands::bench_ops(&cfg, m, n, d, &workers_sweep, reps, out),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
