//! Row-block data distribution and reductions.
//!
//! `Π` is distributed in blocks of rows to workers; every worker holds the
//! columns of `F` matching its row block, computes a local contribution to
//! `O = F·Π`, and the partial `D×N` buffers are combined over a binary
//! (butterfly-shaped) tree. Shared-memory workers stand in for distributed
//! ranks: the interface is defined purely by the partition and reduction
//! contracts so a message-passing backend could be slotted in without
//! touching the solver.

use std::ops::Range;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::matrix::{BandedMatrix, DenseMatrix, ProblemInstance};
use crate::mem::mem_solver;
use rayon::prelude::*;

/// Disjoint contiguous row ranges covering `[0, M)`, one per worker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    ranges: Vec<Range<usize>>,
}

impl Partition {
    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    pub fn n_workers(&self) -> usize {
        self.ranges.len()
    }
}

/// Contiguous near-equal row blocks; block sizes differ by at most one.
/// Workers beyond `M` receive empty ranges.
pub fn partition_rows(m: usize, n_workers: usize) -> Partition {
    assert!(n_workers >= 1, "need at least one worker");
    let base = m / n_workers;
    let extra = m % n_workers;
    let mut ranges = Vec::with_capacity(n_workers);
    let mut start = 0;
    for w in 0..n_workers {
        let len = base + usize::from(w < extra);
        ranges.push(start..start + len);
        start += len;
    }
    Partition { ranges }
}

/// Binary combining tree over workers. At level `l` buffers `2^l` apart are
/// merged pairwise, so every worker's partial is combined exactly once per
/// level and the depth is `ceil(log2(n_workers))`.
#[derive(Debug, Clone)]
pub struct ReductionPlan {
    n_workers: usize,
    levels: Vec<Vec<(usize, usize)>>, // (dst, src) pairs per level
}

impl ReductionPlan {
    pub fn new(n_workers: usize) -> Self {
        assert!(n_workers >= 1);
        let mut levels = Vec::new();
        let mut stride = 1;
        while stride < n_workers {
            let mut pairs = Vec::new();
            let mut dst = 0;
            while dst + stride < n_workers {
                pairs.push((dst, dst + stride));
                dst += 2 * stride;
            }
            levels.push(pairs);
            stride *= 2;
        }
        Self { n_workers, levels }
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn n_workers(&self) -> usize {
        self.n_workers
    }
}

/// Elementwise sum of all partial buffers.
///
/// In deterministic mode the combining order follows the tree schedule, so
/// results are bit-identical across runs and across worker counts that share
/// a tree shape; otherwise partials are folded in whatever order the workers
/// finish.
pub fn reduce_partials(
    mut partials: Vec<Vec<f64>>,
    plan: &ReductionPlan,
    deterministic: bool,
) -> Vec<f64> {
    assert_eq!(partials.len(), plan.n_workers(), "one partial per worker");
    assert!(!partials.is_empty());
    if deterministic {
        for level in &plan.levels {
            for &(dst, src) in level {
                // split_at_mut: dst < src always holds in the schedule
                let (head, tail) = partials.split_at_mut(src);
                let a = &mut head[dst];
                let b = &tail[0];
                for (x, y) in a.iter_mut().zip(b.iter()) {
                    *x += *y;
                }
            }
        }
        partials.swap_remove(0)
    } else {
        let len = partials[0].len();
        partials
            .into_par_iter()
            .reduce(
                || vec![0.0; len],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(b.iter()) {
                        *x += *y;
                    }
                    a
                },
            )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReduceOp {
    Sum,
    Max,
}

/// Combines one scalar per worker into a single value (tree order for sums).
pub fn allreduce_scalar(values: &[f64], op: ReduceOp) -> f64 {
    assert!(!values.is_empty());
    match op {
        ReduceOp::Max => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        ReduceOp::Sum => tree_sum(values),
    }
}

fn tree_sum(values: &[f64]) -> f64 {
    match values.len() {
        1 => values[0],
        n => {
            let split = (n / 2).max(1);
            tree_sum(&values[..split]) + tree_sum(&values[split..])
        }
    }
}

/// Local contribution to `O = F·Π` from the probe-matrix columns inside
/// `rows`: `partial[d][n] = Σ_{i ∈ rows ∩ band(d)} F_{d,i} Π_{i,n}`.
pub fn spmm_local(f: &BandedMatrix, pi_values: &[f64], n: usize, rows: Range<usize>) -> Vec<f64> {
    let mut out = vec![0.0; f.rows() * n];
    spmm_local_into(f, pi_values, n, rows, &mut out);
    out
}

fn spmm_local_into(
    f: &BandedMatrix,
    pi_values: &[f64],
    n: usize,
    rows: Range<usize>,
    out: &mut [f64],
) {
    for d in 0..f.rows() {
        let (start, band) = f.band(d);
        let lo = start.max(rows.start);
        let hi = (start + band.len()).min(rows.end);
        if lo >= hi {
            continue;
        }
        let out_row = &mut out[d * n..(d + 1) * n];
        for i in lo..hi {
            let fv = band[i - start];
            let pi_row = &pi_values[i * n..(i + 1) * n];
            for (o, p) in out_row.iter_mut().zip(pi_row) {
                *o += fv * p;
            }
        }
    }
}

/// Shared-memory worker pool realizing the distribution scheme.
pub struct Engine {
    pool: rayon::ThreadPool,
    n_workers: usize,
    deterministic: bool,
}

impl Engine {
    /// `n_workers = 0` selects the available hardware parallelism.
    pub fn new(n_workers: usize, deterministic: bool) -> Self {
        let n_workers = if n_workers == 0 {
            std::thread::available_parallelism().map_or(1, |p| p.get())
        } else {
            n_workers
        };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(n_workers)
            .build()
            .expect("failed to build worker pool");
        Self {
            pool,
            n_workers,
            deterministic,
        }
    }

    pub fn n_workers(&self) -> usize {
        self.n_workers
    }

    pub fn deterministic(&self) -> bool {
        self.deterministic
    }

    /// Two-step `F·Π`: process-local partials over row blocks, then the tree
    /// reduction. Returns the dense `D×N` product.
    pub fn spmm(&self, f: &BandedMatrix, pi_values: &[f64], n: usize) -> Vec<f64> {
        let part = partition_rows(f.cols(), self.n_workers);
        let partials: Vec<Vec<f64>> = self.pool.install(|| {
            part.ranges()
                .par_iter()
                .map(|r| spmm_local(f, pi_values, n, r.clone()))
                .collect()
        });
        reduce_partials(partials, &ReductionPlan::new(self.n_workers), self.deterministic)
    }

    /// Runs a closure per worker over disjoint row blocks of a mutable
    /// row-major buffer (`row_width` values per row).
    pub fn for_each_row_block<F>(&self, out: &mut [f64], row_width: usize, func: F)
    where
        F: Fn(usize, Range<usize>, &mut [f64]) + Sync,
    {
        let m = if row_width == 0 { 0 } else { out.len() / row_width };
        debug_assert_eq!(m * row_width, out.len());
        let part = partition_rows(m, self.n_workers);
        let mut chunks: Vec<(usize, Range<usize>, &mut [f64])> = Vec::with_capacity(self.n_workers);
        let mut rest = out;
        for (w, r) in part.ranges().iter().enumerate() {
            let (head, tail) = rest.split_at_mut((r.end - r.start) * row_width);
            chunks.push((w, r.clone(), head));
            rest = tail;
        }
        self.pool.install(|| {
            chunks
                .into_par_iter()
                .for_each(|(w, r, chunk)| func(w, r, chunk));
        });
    }

    /// Per-worker partial sums over row blocks combined by the scalar tree.
    pub fn sum_over_blocks<F>(&self, m: usize, func: F) -> f64
    where
        F: Fn(usize, Range<usize>) -> f64 + Sync,
    {
        let part = partition_rows(m, self.n_workers);
        let partials: Vec<f64> = self.pool.install(|| {
            part.ranges()
                .par_iter()
                .enumerate()
                .map(|(w, r)| func(w, r.clone()))
                .collect()
        });
        allreduce_scalar(&partials, ReduceOp::Sum)
    }

    /// Dot product of two equally sized flat buffers.
    pub fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        assert_eq!(a.len(), b.len());
        let part = partition_rows(a.len(), self.n_workers);
        let partials: Vec<f64> = self.pool.install(|| {
            part.ranges()
                .par_iter()
                .map(|r| {
                    a[r.clone()]
                        .iter()
                        .zip(&b[r.clone()])
                        .map(|(x, y)| x * y)
                        .sum::<f64>()
                })
                .collect()
        });
        allreduce_scalar(&partials, ReduceOp::Sum)
    }

    pub fn norm_sq(&self, a: &[f64]) -> f64 {
        self.dot(a, a)
    }
}

/// One timed kernel evaluation.
#[derive(Debug, Clone)]
pub struct BenchRow {
    pub op: &'static str,
    pub m: usize,
    pub n: usize,
    pub d: usize,
    pub workers: usize,
    pub rep: usize,
    pub wall_ms: f64,
}

impl BenchRow {
    pub const CSV_HEADER: &'static str = "op,M,N,D,workers,rep,wall_ms";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.op, self.m, self.n, self.d, self.workers, self.rep, self.wall_ms
        )
    }
}

/// Median wall time for the performance-relevant operations (objective,
/// gradient, Hessian product, scalar product) on randomized dense `Π` and `P`
/// with the given worker count. Refuses to run when the solver memory
/// estimate exceeds `mem_budget_bytes`.
pub fn bench_ops(
    m: usize,
    n: usize,
    d: usize,
    n_workers: usize,
    reps: usize,
    mem_budget_bytes: u64,
    deterministic: bool,
    seed: u64,
) -> Result<Vec<BenchRow>> {
    use rand::{Rng, SeedableRng};
    let est = mem_solver(m as u64, n as u64, d as u64)?;
    if est.core_bytes > mem_budget_bytes {
        return Err(Error::MemoryBudget {
            estimate: est.core_bytes,
            budget: mem_budget_bytes,
        });
    }
    if reps == 0 {
        return Err(Error::InvalidArgument("reps must be at least 1".into()));
    }
    let scale = crate::detector::ProbeSchedule::auto_quadratic_scale(d, m);
    let schedule = crate::detector::ProbeSchedule::quadratic_scaled(d, scale)?;
    let f = crate::detector::build_probe_matrix(&schedule, m, 1e-12)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut pi = vec![0.0f64; m * n];
    rng.fill(&mut pi[..]);
    normalize_rows(&mut pi, n);
    let mut p_vals = vec![0.0f64; d * n];
    rng.fill(&mut p_vals[..]);
    normalize_rows(&mut p_vals, n);
    let mut dir = vec![0.0f64; m * n];
    rng.fill(&mut dir[..]);
    let p = DenseMatrix::new(d, n, p_vals)?;
    let instance = ProblemInstance::new_unchecked(f, p);
    let engine = Engine::new(n_workers, deterministic);
    let gamma = 1e-5;

    let mut rows = Vec::new();
    let mut grad = vec![0.0f64; m * n];
    let mut hess = vec![0.0f64; m * n];
    let mut resid = vec![0.0f64; instance.probes() * n];
    for rep in 0..reps {
        let t = Instant::now();
        let obj = crate::kernels::objective_value(&engine, &instance, &pi, gamma);
        push_row(&mut rows, "objective", m, n, d, n_workers, rep, t);
        std::hint::black_box(obj);

        let t = Instant::now();
        crate::kernels::residual_into(&engine, &instance, &pi, &mut resid);
        crate::kernels::gradient_into(&engine, &instance, &resid, &pi, gamma, &mut grad);
        push_row(&mut rows, "gradient", m, n, d, n_workers, rep, t);

        let t = Instant::now();
        crate::kernels::hessian_product_into(
            &engine,
            &instance,
            gamma,
            &dir,
            None,
            &mut hess,
        );
        push_row(&mut rows, "hessian_product", m, n, d, n_workers, rep, t);

        let t = Instant::now();
        let s = engine.dot(&pi, &dir);
        push_row(&mut rows, "scalar_product", m, n, d, n_workers, rep, t);
        std::hint::black_box(s);
    }
    Ok(rows)
}

fn push_row(
    rows: &mut Vec<BenchRow>,
    op: &'static str,
    m: usize,
    n: usize,
    d: usize,
    workers: usize,
    rep: usize,
    t: Instant,
) {
    rows.push(BenchRow {
        op,
        m,
        n,
        d,
        workers,
        rep,
        wall_ms: t.elapsed().as_secs_f64() * 1e3,
    });
}

fn normalize_rows(values: &mut [f64], n: usize) {
    for row in values.chunks_mut(n) {
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            for v in row {
                *v /= s;
            }
        }
    }
}

/// Median of the wall times recorded for one op name.
pub fn median_wall_ms(rows: &[BenchRow], op: &str) -> Option<f64> {
    let mut times: Vec<f64> = rows
        .iter()
        .filter(|r| r.op == op)
        .map(|r| r.wall_ms)
        .collect();
    if times.is_empty() {
        return None;
    }
    times.sort_by(f64::total_cmp);
    Some(times[times.len() / 2])
}
