//! Command implementations. Data goes to files or stdout; diagnostics go to
//! stderr. No command allocates the main matrices before the memory guard
//! passes.

use std::io::Write;
use std::path::PathBuf;

use pqdt_core::analysis::{
    emit_wigner_plot_data, infidelity_report, wigner_diag, GridSpec,
};
use pqdt_core::detector::{analytic_povm, build_probe_matrix, simulate_outcomes};
use pqdt_core::engine::{bench_ops as engine_bench, BenchRow, Engine};
use pqdt_core::io::{load_matrix, save_matrix, MatrixData, MatrixFormat};
use pqdt_core::matrix::{PovmMatrix, ProblemInstance};
use pqdt_core::mem::{max_hilbert_dim, mem_solver, mem_storage};
use pqdt_core::solver::{solve_two_stage, SolveStatus};
use pqdt_core::{Error, Result};

use crate::config::RunConfig;

fn engine_of(cfg: &RunConfig) -> Engine {
    Engine::new(cfg.engine.n_workers, cfg.engine.deterministic_reduction)
}

fn memory_guard(cfg: &RunConfig, m: usize, n: usize, d: usize) -> Result<u64> {
    let est = mem_solver(m as u64, n as u64, d as u64)?;
    if est.core_bytes > cfg.memory_budget_bytes {
        return Err(Error::MemoryBudget {
            estimate: est.core_bytes,
            budget: cfg.memory_budget_bytes,
        });
    }
    Ok(est.core_bytes)
}

pub fn simulate(cfg: &RunConfig) -> Result<u8> {
    cfg.validate()?;
    let (schedule, resolved_scale) = cfg.schedule()?;
    let (m, n) = (cfg.dims.m, cfg.dims.n);
    let estimate = memory_guard(cfg, m, n, schedule.len())?;
    std::fs::create_dir_all(&cfg.workdir)?;

    let f = build_probe_matrix(&schedule, m, cfg.tail_mass_cutoff)?;
    let pi_theo = analytic_povm(&cfg.detector, m, n, cfg.truncation)?;
    let p = simulate_outcomes(&f, &pi_theo, cfg.trials, cfg.seed)?;

    save_matrix(&MatrixData::Banded(f.clone()), cfg.path("F.pqdt"), MatrixFormat::Binary)?;
    save_matrix(&MatrixData::Dense(p), cfg.path("P.pqdt"), MatrixFormat::Binary)?;
    save_matrix(
        &MatrixData::Dense(pi_theo.to_dense()),
        cfg.path("Pi_theo.pqdt"),
        MatrixFormat::Binary,
    )?;

    let meta = serde_json::json!({
        "config": cfg,
        "resolved": {
            "probe_scale": if resolved_scale.is_nan() { None } else { Some(resolved_scale) },
            "mean_photons_max": schedule.mean_photons().last(),
            "probe_matrix_nnz": f.nnz(),
            "mem_solver_core_bytes": estimate,
        },
    });
    std::fs::write(cfg.path("meta.json"), serde_json::to_string_pretty(&meta).unwrap())?;
    eprintln!(
        "simulate: D={} probes, M={m}, N={n}, {} trials, {} stored probe values",
        schedule.len(),
        cfg.trials,
        f.nnz()
    );
    Ok(0)
}

pub fn reconstruct(
    cfg: &RunConfig,
    f_path: Option<PathBuf>,
    p_path: Option<PathBuf>,
    out: Option<PathBuf>,
    report_path: Option<PathBuf>,
) -> Result<u8> {
    cfg.solver.validate()?;
    let f_path = f_path.unwrap_or_else(|| cfg.path("F.pqdt"));
    let p_path = p_path.unwrap_or_else(|| cfg.path("P.pqdt"));
    let out = out.unwrap_or_else(|| cfg.path("Pi_rec.pqdt"));
    let report_path = report_path.unwrap_or_else(|| cfg.path("report.jsonl"));

    let f = load_matrix(&f_path, MatrixFormat::Binary)?.expect_banded()?;
    let p = load_matrix(&p_path, MatrixFormat::Binary)?.expect_dense()?;
    memory_guard(cfg, f.cols(), p.cols(), f.rows())?;
    let instance = ProblemInstance::new(f, p)?;
    let engine = engine_of(cfg);
    let (pi, report) = solve_two_stage(&engine, &instance, &cfg.solver, None)?;

    save_matrix(&MatrixData::Dense(pi.to_dense()), &out, MatrixFormat::Binary)?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(&report_path)?);
    report.write_jsonl(&mut w)?;
    w.flush()?;
    eprintln!(
        "reconstruct: status {:?}, {} stage-1 + {} stage-2 Newton iterations, objective {:.6e}, kkt {:.3e}",
        report.status,
        report.stage1_newton_iters,
        report.stage2_newton_iters,
        report.final_objective,
        report.final_kkt
    );
    Ok(match report.status {
        SolveStatus::Converged => 0,
        SolveStatus::IterationCap => 3,
        SolveStatus::LineSearchFailure => 4,
    })
}

fn load_povm(path: &PathBuf) -> Result<PovmMatrix> {
    let dense = load_matrix(path, MatrixFormat::Binary)?.expect_dense()?;
    let (m, n) = (dense.rows(), dense.cols());
    PovmMatrix::new(m, n, dense.into_values())
}

pub fn fidelity_gate(
    cfg: &RunConfig,
    rec: Option<PathBuf>,
    theo: Option<PathBuf>,
    threshold: Option<f64>,
    out: Option<PathBuf>,
) -> Result<u8> {
    let rec = rec.unwrap_or_else(|| cfg.path("Pi_rec.pqdt"));
    let theo = theo.unwrap_or_else(|| cfg.path("Pi_theo.pqdt"));
    let out = out.unwrap_or_else(|| cfg.path("fidelity_report.json"));
    let threshold = threshold.unwrap_or(cfg.fidelity_threshold);

    let pi_rec = load_povm(&rec)?;
    let pi_theo = load_povm(&theo)?;
    let report = infidelity_report(&pi_rec, &pi_theo, cfg.occupancy_threshold)?;
    std::fs::write(&out, serde_json::to_string_pretty(&report).unwrap())?;

    let mut pass = true;
    for (j, (f, occ)) in report
        .per_outcome_fidelity
        .iter()
        .zip(&report.occupied)
        .enumerate()
    {
        if *occ && *f < threshold {
            eprintln!("fidelity: outcome {j} at {f:.6} below threshold {threshold}");
            pass = false;
        }
    }
    println!(
        "mean_occupied_fidelity={:.6} occupied_outcomes={}",
        report.mean_occupied_fidelity,
        report.occupied.iter().filter(|o| **o).count()
    );
    Ok(if pass { 0 } else { 1 })
}

pub fn wigner(
    cfg: &RunConfig,
    outcome: usize,
    pi: Option<PathBuf>,
    bits: u32,
    grid_half: f64,
    grid_points: usize,
    out: Option<PathBuf>,
) -> Result<u8> {
    let pi_path = pi.unwrap_or_else(|| cfg.path("Pi_theo.pqdt"));
    let out = out.unwrap_or_else(|| cfg.path(&format!("wigner_{outcome}.csv")));
    let pi = load_povm(&pi_path)?;
    if outcome >= pi.outcomes() {
        return Err(Error::InvalidArgument(format!(
            "outcome {outcome} out of range (N = {})",
            pi.outcomes()
        )));
    }
    let theta = pi.column(outcome);
    let grid = GridSpec::square(grid_half, grid_points);
    let w = wigner_diag(&theta, &grid, bits)?;
    emit_wigner_plot_data(&w, &out)?;
    let (min, at_x, at_p) = w.min_entry();
    println!("min_w={min:.9e} at_x={at_x} at_p={at_p}");
    Ok(0)
}

pub fn mem_estimate(m: u64, n: u64, d: u64, nodes: u64, ranks: u64, mem_node: u64) -> Result<u8> {
    let storage = mem_storage(m, n, d)?;
    let solver = mem_solver(m, n, d)?;
    let m_max = max_hilbert_dim(n, d, ranks, nodes, mem_node);
    println!("mem_storage_bytes={storage}");
    println!("mem_solver_core_bytes={}", solver.core_bytes);
    println!(
        "mem_solver_slack=O(M)+O(N) 8-byte entries, M={} N={}",
        solver.slack_m_entries, solver.slack_n_entries
    );
    println!("max_hilbert_dim={m_max:.6e}");
    Ok(0)
}

pub fn bench_ops(
    cfg: &RunConfig,
    m: Option<usize>,
    n: Option<usize>,
    d: Option<usize>,
    workers_sweep: &[usize],
    reps: usize,
    out: Option<PathBuf>,
) -> Result<u8> {
    let m = m.unwrap_or(100_000);
    let n = n.unwrap_or(26);
    let d = d.unwrap_or_else(|| (m as f64).sqrt() as usize + 1);
    let out = out.unwrap_or_else(|| cfg.path("bench.csv"));
    if workers_sweep.is_empty() {
        return Err(Error::InvalidArgument("empty worker sweep".into()));
    }
    let mut all: Vec<BenchRow> = Vec::new();
    for &workers in workers_sweep {
        let rows = engine_bench(
            m,
            n,
            d,
            workers,
            reps,
            cfg.memory_budget_bytes,
            cfg.engine.deterministic_reduction,
            cfg.seed,
        )?;
        all.extend(rows);
    }
    let mut w = std::io::BufWriter::new(std::fs::File::create(&out)?);
    writeln!(w, "{}", BenchRow::CSV_HEADER)?;
    for row in &all {
        writeln!(w, "{}", row.to_csv())?;
    }
    w.flush()?;
    eprintln!("bench-ops: {} rows written to {}", all.len(), out.display());
    Ok(0)
}
