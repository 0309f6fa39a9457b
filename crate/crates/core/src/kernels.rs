//! Objective, gradient and Hessian kernels of the least-squares problem,
//! plus the diagonally preconditioned conjugate gradient.
//!
//! The objective is `||P − F·Π||² + γ·Σ_n Σ_i (Π_{i,n} − Π_{i+1,n})²`. Its
//! Hessian acts columnwise as `2·FᵀF` plus a tridiagonal regulariser stencil
//! (diagonal 4γ in the interior, 2γ at the boundary rows, off-diagonal −2γ).
//! Stage-2 masking replaces the rows/columns of the active index set by their
//! diagonal action and removes the per-row implicit coordinates entirely.

use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, ProblemInstance};

/// Coordinate masking for the two-metric Hessian `D^(k)`.
///
/// `implicit[i]` is the per-row maximum column handled implicitly by the
/// stage-2 sum constraint, `active` flags the index set `I` (bound-adjacent
/// coordinates with ascent gradient, coupled only diagonally) and `frozen`
/// marks unidentifiable photon-number rows that stay at their initialization.
#[derive(Debug, Clone, Copy, Default)]
pub struct StageMask<'a> {
    pub implicit: Option<&'a [usize]>,
    pub active: Option<&'a [bool]>,
    pub frozen: Option<&'a [bool]>,
}

impl<'a> StageMask<'a> {
    pub fn frozen_only(frozen: &'a [bool]) -> Self {
        Self {
            implicit: None,
            active: None,
            frozen: Some(frozen),
        }
    }

    /// Coordinates removed from the Newton system altogether.
    #[inline]
    pub fn is_excluded(&self, i: usize, j: usize) -> bool {
        if let Some(f) = self.frozen {
            if f[i] {
                return true;
            }
        }
        if let Some(m) = self.implicit {
            if m[i] == j {
                return true;
            }
        }
        false
    }

    #[inline]
    pub fn is_active(&self, i: usize, j: usize, n: usize) -> bool {
        self.active.map_or(false, |a| a[i * n + j])
    }

    fn has_active(&self) -> bool {
        self.active.is_some()
    }

    fn has_exclusions(&self) -> bool {
        self.implicit.is_some() || self.frozen.is_some()
    }
}

/// `out = F·Π − P`, materialized densely (D×N).
pub fn residual_into(engine: &Engine, instance: &ProblemInstance, pi: &[f64], out: &mut [f64]) {
    let n = instance.outcomes();
    let prod = engine.spmm(instance.f(), pi, n);
    let p = instance.p().values();
    debug_assert_eq!(prod.len(), out.len());
    for ((o, fp), pv) in out.iter_mut().zip(&prod).zip(p) {
        *o = fp - pv;
    }
}

/// Regulariser energy `Σ_n Σ_{i<M−1} (Π_{i,n} − Π_{i+1,n})²`.
pub fn regulariser_energy(engine: &Engine, pi: &[f64], m: usize, n: usize) -> f64 {
    if m < 2 {
        return 0.0;
    }
    engine.sum_over_blocks(m - 1, |_, range| {
        let mut acc = 0.0;
        for i in range {
            for j in 0..n {
                let diff = pi[i * n + j] - pi[(i + 1) * n + j];
                acc += diff * diff;
            }
        }
        acc
    })
}

/// Objective value `||F·Π − P||² + γ·(regulariser)` from scratch.
pub fn objective_value(engine: &Engine, instance: &ProblemInstance, pi: &[f64], gamma: f64) -> f64 {
    let mut resid = vec![0.0; instance.probes() * instance.outcomes()];
    residual_into(engine, instance, pi, &mut resid);
    objective_from_residual(engine, instance, &resid, pi, gamma)
}

/// Objective value reusing a precomputed residual `O = F·Π − P`.
pub fn objective_from_residual(
    engine: &Engine,
    instance: &ProblemInstance,
    resid: &[f64],
    pi: &[f64],
    gamma: f64,
) -> f64 {
    let data = engine.norm_sq(resid);
    if gamma == 0.0 {
        data
    } else {
        data + gamma * regulariser_energy(engine, pi, instance.hilbert_dim(), instance.outcomes())
    }
}

/// Adds the regulariser gradient stencil applied to `src` into `out` for the
/// row block `range`: `2γ·[(src_i − src_{i+1}) − (src_{i−1} − src_i)]` with
/// boundary terms dropped. The same linear operator serves as the gradient
/// contribution (applied to `Π`) and the Hessian contribution (applied to a
/// direction).
fn add_regulariser_stencil(
    src: &[f64],
    m: usize,
    n: usize,
    gamma: f64,
    range: std::ops::Range<usize>,
    out: &mut [f64],
) {
    if gamma == 0.0 || m < 2 {
        return;
    }
    let two_gamma = 2.0 * gamma;
    for (local, i) in range.enumerate() {
        let row_out = &mut out[local * n..(local + 1) * n];
        let row = &src[i * n..(i + 1) * n];
        if i + 1 < m {
            let next = &src[(i + 1) * n..(i + 2) * n];
            for ((o, &a), &b) in row_out.iter_mut().zip(row).zip(next) {
                *o += two_gamma * (a - b);
            }
        }
        if i > 0 {
            let prev = &src[(i - 1) * n..i * n];
            for ((o, &a), &b) in row_out.iter_mut().zip(row).zip(prev) {
                *o -= two_gamma * (b - a);
            }
        }
    }
}

/// Gradient `G = 2·Fᵀ(FΠ − P) + γ-stencil(Π)` written into `out` (M×N).
pub fn gradient_into(
    engine: &Engine,
    instance: &ProblemInstance,
    resid: &[f64],
    pi: &[f64],
    gamma: f64,
    out: &mut [f64],
) {
    let n = instance.outcomes();
    let m = instance.hilbert_dim();
    let f = instance.f();
    engine.for_each_row_block(out, n, |_, range, chunk| {
        chunk.fill(0.0);
        for d in 0..f.rows() {
            let (start, band) = f.band(d);
            let lo = start.max(range.start);
            let hi = (start + band.len()).min(range.end);
            if lo >= hi {
                continue;
            }
            let resid_row = &resid[d * n..(d + 1) * n];
            for i in lo..hi {
                let fv = 2.0 * band[i - start];
                let g_row = &mut chunk[(i - range.start) * n..(i - range.start + 1) * n];
                for (g, r) in g_row.iter_mut().zip(resid_row) {
                    *g += fv * r;
                }
            }
        }
        add_regulariser_stencil(pi, m, n, gamma, range, chunk);
    });
}

/// Per-row Hessian diagonal `2·Σ_d F²_{d,i}` plus the regulariser stencil
/// diagonal (4γ interior, 2γ at the boundary; zero when M = 1). The data
/// term is independent of the outcome index.
pub fn hessian_diag_rows(instance: &ProblemInstance, gamma: f64) -> Vec<f64> {
    let m = instance.hilbert_dim();
    let mut diag: Vec<f64> = instance
        .f()
        .column_sq_sums()
        .iter()
        .map(|s| 2.0 * s)
        .collect();
    if gamma > 0.0 && m >= 2 {
        for (i, v) in diag.iter_mut().enumerate() {
            let stencil = if i == 0 || i == m - 1 { 2.0 } else { 4.0 };
            *v += stencil * gamma;
        }
    }
    diag
}

/// Spec-shaped Hessian diagonal as a full M×N matrix.
pub fn hessian_diag(instance: &ProblemInstance, gamma: f64) -> DenseMatrix {
    let rows = hessian_diag_rows(instance, gamma);
    let n = instance.outcomes();
    let mut out = DenseMatrix::zeros(instance.hilbert_dim(), n);
    for (i, v) in rows.iter().enumerate() {
        out.row_mut(i).fill(*v);
    }
    out
}

/// Modified Hessian product `D^(k)·d`.
///
/// The unmasked Hessian acts columnwise as `2FᵀF·d` plus the tridiagonal
/// regulariser. With a per-row implicit coordinate `m(i)` (stage 2) the
/// operator is conjugated by the sum-constraint elimination: the direction is
/// expanded with `d_{i,m(i)} = −Σ_{j≠m(i)} d_{i,j}`, pushed through the
/// unmasked Hessian, and reduced back via `y_{i,j} − y_{i,m(i)}` — the chain
/// rule of the transformation step. Active-set coordinates act diagonally
/// only; frozen rows are removed.
pub fn hessian_product_into(
    engine: &Engine,
    instance: &ProblemInstance,
    gamma: f64,
    dir: &[f64],
    mask: Option<&StageMask<'_>>,
    out: &mut [f64],
) {
    let n = instance.outcomes();
    let m = instance.hilbert_dim();
    let f = instance.f();
    let needs_mask = mask.is_some_and(|mk| mk.has_active() || mk.has_exclusions());
    // Zero masked coordinates, then fill the implicit ones from the
    // eliminated sum constraint.
    let masked_dir: Option<Vec<f64>> = if needs_mask {
        let mk = mask.unwrap();
        let mut dm = dir.to_vec();
        for i in 0..m {
            for j in 0..n {
                if mk.is_excluded(i, j) || mk.is_active(i, j, n) {
                    dm[i * n + j] = 0.0;
                }
            }
            if let Some(m_idx) = mk.implicit {
                if !mk.frozen.is_some_and(|fr| fr[i]) {
                    let row = &mut dm[i * n..(i + 1) * n];
                    let mi = m_idx[i];
                    row[mi] = 0.0;
                    let free_sum: f64 = row.iter().sum();
                    row[mi] = -free_sum;
                }
            }
        }
        Some(dm)
    } else {
        None
    };
    let src = masked_dir.as_deref().unwrap_or(dir);
    let u = engine.spmm(f, src, n);
    engine.for_each_row_block(out, n, |_, range, chunk| {
        chunk.fill(0.0);
        for d in 0..f.rows() {
            let (start, band) = f.band(d);
            let lo = start.max(range.start);
            let hi = (start + band.len()).min(range.end);
            if lo >= hi {
                continue;
            }
            let u_row = &u[d * n..(d + 1) * n];
            for i in lo..hi {
                let fv = 2.0 * band[i - start];
                let h_row = &mut chunk[(i - range.start) * n..(i - range.start + 1) * n];
                for (h, uv) in h_row.iter_mut().zip(u_row) {
                    *h += fv * uv;
                }
            }
        }
        add_regulariser_stencil(src, m, n, gamma, range, chunk);
    });
    if needs_mask {
        let mk = mask.unwrap();
        let diag = stage_diag_rows(instance, gamma, mk.implicit.is_some());
        for i in 0..m {
            // reduction step of the chain rule
            let y_mi = mk.implicit.map_or(0.0, |m_idx| out[i * n + m_idx[i]]);
            for j in 0..n {
                let idx = i * n + j;
                if mk.is_excluded(i, j) {
                    out[idx] = 0.0;
                } else if mk.is_active(i, j, n) {
                    out[idx] = diag[i] * dir[idx];
                } else if mk.implicit.is_some() {
                    out[idx] -= y_mi;
                }
            }
        }
    }
}

/// Hessian diagonal seen by the stage mask: the plain rows for stage 1, the
/// reduced-problem diagonal `2·(2ΣF² + stencil)` once a row's maximum is
/// eliminated (the implicit coordinate moves opposite to every free one).
pub fn stage_diag_rows(instance: &ProblemInstance, gamma: f64, reduced: bool) -> Vec<f64> {
    let mut diag = hessian_diag_rows(instance, gamma);
    if reduced {
        for v in diag.iter_mut() {
            *v *= 2.0;
        }
    }
    diag
}

/// Diagonally preconditioned conjugate gradient for `D^(k)·x = rhs`.
///
/// Terminates at `rel_tol` relative residual or after `max_iters`
/// iterations. Returns the approximate solution and the iteration count.
/// The right-hand side must already vanish on excluded coordinates.
pub fn pcg_solve(
    engine: &Engine,
    instance: &ProblemInstance,
    gamma: f64,
    rhs: &[f64],
    mask: Option<&StageMask<'_>>,
    diag_rows: &[f64],
    rel_tol: f64,
    max_iters: usize,
) -> Result<(Vec<f64>, usize)> {
    let n = instance.outcomes();
    let precond = |r: &[f64], z: &mut [f64]| {
        for (idx, (zv, rv)) in z.iter_mut().zip(r.iter()).enumerate() {
            let i = idx / n;
            let d = diag_rows[i];
            *zv = if d > 0.0 { rv / d } else { 0.0 };
        }
    };
    let rhs_norm = engine.norm_sq(rhs).sqrt();
    let mut x = vec![0.0; rhs.len()];
    if rhs_norm == 0.0 {
        return Ok((x, 0));
    }
    let mut r = rhs.to_vec();
    let mut z = vec![0.0; rhs.len()];
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut hp = vec![0.0; rhs.len()];
    let mut rz = engine.dot(&r, &z);
    let mut iters = 0;
    for it in 1..=max_iters {
        iters = it;
        hessian_product_into(engine, instance, gamma, &p, mask, &mut hp);
        let php = engine.dot(&p, &hp);
        if !php.is_finite() || !rz.is_finite() {
            return Err(Error::IllConditioned);
        }
        if php <= 0.0 {
            if it == 1 {
                x.copy_from_slice(&z);
            }
            break;
        }
        let alpha = rz / php;
        for ((xv, rv), (pv, hv)) in x.iter_mut().zip(r.iter_mut()).zip(p.iter().zip(&hp)) {
            *xv += alpha * pv;
            *rv -= alpha * hv;
        }
        if engine.norm_sq(&r).sqrt() <= rel_tol * rhs_norm {
            break;
        }
        precond(&r, &mut z);
        let rz_next = engine.dot(&r, &z);
        let beta = rz_next / rz;
        for (pv, zv) in p.iter_mut().zip(&z) {
            *pv = zv + beta * *pv;
        }
        rz = rz_next;
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::IllConditioned);
    }
    Ok((x, iters))
}
