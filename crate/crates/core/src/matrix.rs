//! Problem data model: dense matrices, the banded probe matrix, the POVM
//! matrix with its per-row simplex invariants, and the assembled problem
//! instance.
//!
//! All types are immutable after construction or load and safe to share
//! across workers without synchronization.

use crate::error::{Error, Result};

/// Tolerance for the per-row simplex sum of a POVM matrix.
pub const POVM_ROW_SUM_TOL: f64 = 1e-9;
/// Tolerance for the per-row sum of the measured outcome matrix `P`.
/// Finite-trial sampling and per-trial truncation make exactness impossible.
pub const OUTCOME_ROW_SUM_TOL: f64 = 1e-6;

/// Row-major 64-bit real matrix with explicit dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DenseMatrix {
    /// Builds a matrix from row-major values, checking shape and finiteness.
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        for (idx, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row: idx / cols.max(1),
                    col: idx % cols.max(1),
                });
            }
        }
        Ok(Self { rows, cols, values })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.values[r * self.cols + c] = v;
    }

    /// Column `c` as an owned vector (strided copy).
    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }
}

/// Sparse banded matrix: one contiguous column band per row.
///
/// Values live in a single contiguous buffer with a per-row offset table so
/// the `F·Π` kernel streams them sequentially. Entries outside a row's band
/// are exactly zero by construction; stored entries are non-negative (probe
/// probabilities).
#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix {
    rows: usize,
    cols: usize,
    band_starts: Vec<usize>,
    row_offsets: Vec<usize>, // len rows + 1, prefix sums of band lengths
    values: Vec<f64>,
}

impl BandedMatrix {
    /// Builds a banded matrix from per-row `(band_start, band_values)` pairs.
    pub fn new(rows: usize, cols: usize, bands: Vec<(usize, Vec<f64>)>) -> Result<Self> {
        if bands.len() != rows {
            return Err(Error::DimensionMismatch(format!(
                "expected {rows} bands, got {}",
                bands.len()
            )));
        }
        let mut band_starts = Vec::with_capacity(rows);
        let mut row_offsets = Vec::with_capacity(rows + 1);
        let mut values = Vec::new();
        row_offsets.push(0);
        for (r, (start, vals)) in bands.into_iter().enumerate() {
            if start + vals.len() > cols {
                return Err(Error::BandOutOfRange {
                    row: r,
                    start,
                    len: vals.len(),
                    cols,
                });
            }
            for (j, v) in vals.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        row: r,
                        col: start + j,
                    });
                }
                if *v < 0.0 {
                    return Err(Error::NegativeBandValue {
                        row: r,
                        col: start + j,
                    });
                }
            }
            band_starts.push(start);
            values.extend_from_slice(&vals);
            row_offsets.push(values.len());
        }
        Ok(Self {
            rows,
            cols,
            band_starts,
            row_offsets,
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// `(band_start, band_values)` of row `r`.
    pub fn band(&self, r: usize) -> (usize, &[f64]) {
        (
            self.band_starts[r],
            &self.values[self.row_offsets[r]..self.row_offsets[r + 1]],
        )
    }

    pub fn band_len(&self, r: usize) -> usize {
        self.row_offsets[r + 1] - self.row_offsets[r]
    }

    /// Number of stored values.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_sum(&self, r: usize) -> f64 {
        self.values[self.row_offsets[r]..self.row_offsets[r + 1]]
            .iter()
            .sum()
    }

    /// Entry access including implicit zeros (test and debug use).
    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (start, vals) = self.band(r);
        if c >= start && c < start + vals.len() {
            vals[c - start]
        } else {
            0.0
        }
    }

    /// Column sums of squares, i.e. the data part of the Hessian diagonal up
    /// to the factor 2.
    pub fn column_sq_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            let (start, vals) = self.band(r);
            for (j, v) in vals.iter().enumerate() {
                out[start + j] += v * v;
            }
        }
        out
    }

    /// Densifies the matrix (test and debug use; full-scale `F` is multi-GB).
    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            let (start, vals) = self.band(r);
            m.row_mut(r)[start..start + vals.len()].copy_from_slice(vals);
        }
        m
    }
}

/// The `M×N` POVM matrix `Π` with per-row simplex constraints.
///
/// Row `i` holds the diagonal weights `θ_i^{(n)}` of every outcome operator
/// at photon number `i`: all entries non-negative, each row summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct PovmMatrix {
    m: usize,
    n: usize,
    values: Vec<f64>,
}

impl PovmMatrix {
    /// Builds a POVM matrix, enforcing non-negativity and row sums within
    /// [`POVM_ROW_SUM_TOL`].
    pub fn new(m: usize, n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != m * n {
            return Err(Error::DimensionMismatch(format!(
                "{m}x{n} POVM matrix needs {} values, got {}",
                m * n,
                values.len()
            )));
        }
        for i in 0..m {
            let row = &values[i * n..(i + 1) * n];
            let mut sum = 0.0;
            for (j, v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
                if *v < 0.0 {
                    return Err(Error::PovmInvariant {
                        row: i,
                        reason: format!("negative entry {v} at outcome {j}"),
                    });
                }
                sum += *v;
            }
            if (sum - 1.0).abs() > POVM_ROW_SUM_TOL {
                return Err(Error::PovmInvariant {
                    row: i,
                    reason: format!("row sums to {sum}"),
                });
            }
        }
        Ok(Self { m, n, values })
    }

    /// Uniform feasible initialization `Π_{i,n} = 1/N`.
    pub fn uniform(m: usize, n: usize) -> Self {
        Self {
            m,
            n,
            values: vec![1.0 / n as f64; m * n],
        }
    }

    pub fn hilbert_dim(&self) -> usize {
        self.m
    }

    pub fn outcomes(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn get(&self, i: usize, n: usize) -> f64 {
        self.values[i * self.n + n]
    }

    /// Outcome column `n` (the diagonal weights of `π_n`).
    pub fn column(&self, n: usize) -> Vec<f64> {
        (0..self.m).map(|i| self.get(i, n)).collect()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix {
            rows: self.m,
            cols: self.n,
            values: self.values.clone(),
        }
    }
}

/// A validated reconstruction problem: banded probe matrix `F` (D×M) and
/// measured outcome matrix `P` (D×N).
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    f: BandedMatrix,
    p: DenseMatrix,
}

impl ProblemInstance {
    pub fn new(f: BandedMatrix, p: DenseMatrix) -> Result<Self> {
        if f.rows() != p.rows() {
            return Err(Error::DimensionMismatch(format!(
                "F has {} probe rows, P has {}",
                f.rows(),
                p.rows()
            )));
        }
        for d in 0..p.rows() {
            let sum: f64 = p.row(d).iter().sum();
            if (sum - 1.0).abs() > OUTCOME_ROW_SUM_TOL {
                return Err(Error::OutcomeRowSum {
                    row: d,
                    sum,
                    tol: OUTCOME_ROW_SUM_TOL,
                });
            }
        }
        Ok(Self { f, p })
    }

    /// Skips the row-sum validation of `P`. Used for synthetic kernels and
    /// benchmarks where `P` is random dense data.
    pub fn new_unchecked(f: BandedMatrix, p: DenseMatrix) -> Self {
        assert_eq!(f.rows(), p.rows(), "F and P must share the probe count");
        Self { f, p }
    }

    pub fn probes(&self) -> usize {
        self.f.rows()
    }

    pub fn hilbert_dim(&self) -> usize {
        self.f.cols()
    }

    pub fn outcomes(&self) -> usize {
        self.p.cols()
    }

    pub fn f(&self) -> &BandedMatrix {
        &self.f
    }

    pub fn p(&self) -> &DenseMatrix {
        &self.p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_rejects_length_mismatch() {
        assert!(DenseMatrix::new(2, 2, vec![1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn dense_rejects_non_finite() {
        let err = DenseMatrix::new(2, 2, vec![1.0, f64::NAN, 3.0, 4.0]).unwrap_err();
        match err {
            Error::NonFinite { row: 0, col: 1 } => {}
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn banded_rejects_out_of_range_band() {
        let err = BandedMatrix::new(1, 3, vec![(2, vec![1.0, 1.0])]).unwrap_err();
        assert!(matches!(err, Error::BandOutOfRange { .. }));
    }

    #[test]
    fn banded_rejects_negative_values() {
        let err = BandedMatrix::new(1, 3, vec![(0, vec![0.5, -0.1])]).unwrap_err();
        assert!(matches!(
            err,
            Error::NegativeBandValue { row: 0, col: 1 }
        ));
    }

    #[test]
    fn banded_entry_access_and_dense_round_trip() {
        let b = BandedMatrix::new(2, 4, vec![(1, vec![0.25, 0.75]), (0, vec![1.0])]).unwrap();
        assert_eq!(b.get(0, 0), 0.0);
        assert_eq!(b.get(0, 1), 0.25);
        assert_eq!(b.get(0, 2), 0.75);
        assert_eq!(b.get(1, 0), 1.0);
        assert_eq!(b.nnz(), 3);
        let d = b.to_dense();
        for r in 0..2 {
            for c in 0..4 {
                assert_eq!(d.get(r, c), b.get(r, c));
            }
        }
    }

    #[test]
    fn povm_accepts_uniform_and_rejects_violations() {
        let ok = PovmMatrix::uniform(3, 4);
        assert_eq!(ok.row(1), &[0.25; 4]);
        // negative entry
        assert!(PovmMatrix::new(1, 2, vec![-0.1, 1.1]).is_err());
        // bad row sum
        assert!(PovmMatrix::new(1, 2, vec![0.6, 0.6]).is_err());
        // within tolerance
        assert!(PovmMatrix::new(1, 2, vec![0.5 + 4e-10, 0.5]).is_ok());
    }

    #[test]
    fn instance_checks_outcome_row_sums() {
        let f = BandedMatrix::new(1, 1, vec![(0, vec![1.0])]).unwrap();
        let bad = DenseMatrix::new(1, 2, vec![0.4, 0.5]).unwrap();
        assert!(ProblemInstance::new(f.clone(), bad).is_err());
        let good = DenseMatrix::new(1, 2, vec![0.4, 0.6]).unwrap();
        assert!(ProblemInstance::new(f, good).is_ok());
    }
}
