//! Portable matrix I/O.
//!
//! The binary format is the canonical interchange (bit-exact round trips);
//! CSV is debug-only since full-scale matrices are multi-GB.
//!
//! Binary layout (little-endian): magic `"PQDT"` (4 bytes), format version
//! `u32 = 1`, kind `u8` (0 = dense, 1 = banded), 3 reserved bytes, `rows u64`,
//! `cols u64`; dense: `rows·cols` f64 row-major; banded: `rows` pairs
//! `(band_start u64, band_len u64)` followed by the concatenated f64 band
//! values.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::{BandedMatrix, DenseMatrix};

const MAGIC: &[u8; 4] = b"PQDT";
const FORMAT_VERSION: u32 = 1;
const KIND_DENSE: u8 = 0;
const KIND_BANDED: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Binary,
    Csv,
}

/// A loaded matrix of either kind.
#[derive(Debug, Clone)]
pub enum MatrixData {
    Dense(DenseMatrix),
    Banded(BandedMatrix),
}

impl MatrixData {
    pub fn rows(&self) -> usize {
        match self {
            MatrixData::Dense(m) => m.rows(),
            MatrixData::Banded(m) => m.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            MatrixData::Dense(m) => m.cols(),
            MatrixData::Banded(m) => m.cols(),
        }
    }

    pub fn expect_dense(self) -> Result<DenseMatrix> {
        match self {
            MatrixData::Dense(m) => Ok(m),
            MatrixData::Banded(_) => Err(Error::InvalidArgument(
                "expected a dense matrix, found a banded one".into(),
            )),
        }
    }

    pub fn expect_banded(self) -> Result<BandedMatrix> {
        match self {
            MatrixData::Banded(m) => Ok(m),
            MatrixData::Dense(_) => Err(Error::InvalidArgument(
                "expected a banded matrix, found a dense one".into(),
            )),
        }
    }
}

impl From<DenseMatrix> for MatrixData {
    fn from(m: DenseMatrix) -> Self {
        MatrixData::Dense(m)
    }
}

impl From<BandedMatrix> for MatrixData {
    fn from(m: BandedMatrix) -> Self {
        MatrixData::Banded(m)
    }
}

/// Loads and validates a matrix file.
pub fn load_matrix<P: AsRef<Path>>(path: P, format: MatrixFormat) -> Result<MatrixData> {
    match format {
        MatrixFormat::Binary => load_binary(path.as_ref()),
        MatrixFormat::Csv => Ok(MatrixData::Dense(load_csv(path.as_ref())?)),
    }
}

/// Saves a matrix. Binary round trips are bit-exact; non-finite values are
/// rejected before anything is written.
pub fn save_matrix<P: AsRef<Path>>(
    matrix: &MatrixData,
    path: P,
    format: MatrixFormat,
) -> Result<()> {
    match (format, matrix) {
        (MatrixFormat::Binary, _) => save_binary(matrix, path.as_ref()),
        (MatrixFormat::Csv, MatrixData::Dense(m)) => save_csv(m, path.as_ref()),
        (MatrixFormat::Csv, MatrixData::Banded(_)) => Err(Error::InvalidArgument(
            "csv output supports dense matrices only".into(),
        )),
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64_vec(r: &mut impl Read, len: u64, expected: u64) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(len as usize);
    let mut buf = [0u8; 8];
    for _ in 0..len {
        if r.read_exact(&mut buf).is_err() {
            return Err(Error::PayloadMismatch {
                expected,
                got: out.len() as u64,
            });
        }
        out.push(f64::from_le_bytes(buf));
    }
    Ok(out)
}

fn load_binary(path: &Path) -> Result<MatrixData> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::BadMagic);
    }
    let version = read_u32(&mut r)?;
    if version != FORMAT_VERSION {
        return Err(Error::BadVersion(version));
    }
    let mut kind_and_reserved = [0u8; 4];
    r.read_exact(&mut kind_and_reserved)?;
    let kind = kind_and_reserved[0];
    let rows = read_u64(&mut r)? as usize;
    let cols = read_u64(&mut r)? as usize;
    match kind {
        KIND_DENSE => {
            let expected = rows as u64 * cols as u64;
            let values = read_f64_vec(&mut r, expected, expected)?;
            ensure_eof(&mut r, expected)?;
            Ok(MatrixData::Dense(DenseMatrix::new(rows, cols, values)?))
        }
        KIND_BANDED => {
            let mut spans = Vec::with_capacity(rows);
            let mut total: u64 = 0;
            for _ in 0..rows {
                let start = read_u64(&mut r)?;
                let len = read_u64(&mut r)?;
                total += len;
                spans.push((start as usize, len as usize));
            }
            let values = read_f64_vec(&mut r, total, total)?;
            ensure_eof(&mut r, total)?;
            let mut bands = Vec::with_capacity(rows);
            let mut off = 0;
            for (start, len) in spans {
                bands.push((start, values[off..off + len].to_vec()));
                off += len;
            }
            Ok(MatrixData::Banded(BandedMatrix::new(rows, cols, bands)?))
        }
        other => Err(Error::BadKind(other)),
    }
}

fn ensure_eof(r: &mut impl Read, expected: u64) -> Result<()> {
    let mut probe = [0u8; 1];
    match r.read(&mut probe)? {
        0 => Ok(()),
        _ => Err(Error::PayloadMismatch {
            expected,
            got: expected + 1,
        }),
    }
}

fn check_finite_dense(m: &DenseMatrix) -> Result<()> {
    for (idx, v) in m.values().iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                row: idx / m.cols().max(1),
                col: idx % m.cols().max(1),
            });
        }
    }
    Ok(())
}

fn save_binary(matrix: &MatrixData, path: &Path) -> Result<()> {
    // Validate before touching the file.
    if let MatrixData::Dense(m) = matrix {
        check_finite_dense(m)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    match matrix {
        MatrixData::Dense(m) => {
            w.write_all(&[KIND_DENSE, 0, 0, 0])?;
            w.write_all(&(m.rows() as u64).to_le_bytes())?;
            w.write_all(&(m.cols() as u64).to_le_bytes())?;
            for v in m.values() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        MatrixData::Banded(m) => {
            w.write_all(&[KIND_BANDED, 0, 0, 0])?;
            w.write_all(&(m.rows() as u64).to_le_bytes())?;
            w.write_all(&(m.cols() as u64).to_le_bytes())?;
            for r in 0..m.rows() {
                let (start, vals) = m.band(r);
                w.write_all(&(start as u64).to_le_bytes())?;
                w.write_all(&(vals.len() as u64).to_le_bytes())?;
            }
            for r in 0..m.rows() {
                let (_, vals) = m.band(r);
                for v in vals {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn load_csv(path: &Path) -> Result<DenseMatrix> {
    let mut content = String::new();
    BufReader::new(File::open(path)?).read_to_string(&mut content)?;
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (lineno, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        match cols {
            None => cols = Some(fields.len()),
            Some(c) if c != fields.len() => {
                return Err(Error::MalformedCsv {
                    line: lineno + 1,
                    reason: format!("expected {c} fields, got {}", fields.len()),
                })
            }
            _ => {}
        }
        for field in fields {
            let v: f64 = field.trim().parse().map_err(|e| Error::MalformedCsv {
                line: lineno + 1,
                reason: format!("bad number {field:?}: {e}"),
            })?;
            values.push(v);
        }
        rows += 1;
    }
    DenseMatrix::new(rows, cols.unwrap_or(0), values)
}

fn save_csv(m: &DenseMatrix, path: &Path) -> Result<()> {
    check_finite_dense(m)?;
    let mut w = BufWriter::new(File::create(path)?);
    for r in 0..m.rows() {
        let line: Vec<String> = m.row(r).iter().map(|v| format!("{v}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = tempfile::tempdir().unwrap();
        // Leak the dir so the file outlives the handle within the test.
        let path = dir.path().join(name);
        std::mem::forget(dir);
        path
    }

    #[test]
    fn csv_identity_round_trip() {
        let path = tmp("id.csv");
        std::fs::write(&path, "1,0\n0,1\n").unwrap();
        let m = load_matrix(&path, MatrixFormat::Csv)
            .unwrap()
            .expect_dense()
            .unwrap();
        assert_eq!(m.rows(), 2);
        assert_eq!(m.values(), &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn binary_dense_round_trip_small() {
        let path = tmp("m.pqdt");
        let m = DenseMatrix::new(3, 2, vec![0.5, -1.25, 3.0, 4.5, 1e-300, 7.0]).unwrap();
        save_matrix(&MatrixData::Dense(m.clone()), &path, MatrixFormat::Binary).unwrap();
        let back = load_matrix(&path, MatrixFormat::Binary)
            .unwrap()
            .expect_dense()
            .unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn binary_scalar_round_trip_exact() {
        let path = tmp("s.pqdt");
        let m = DenseMatrix::new(1, 1, vec![0.5]).unwrap();
        save_matrix(&MatrixData::Dense(m.clone()), &path, MatrixFormat::Binary).unwrap();
        let back = load_matrix(&path, MatrixFormat::Binary)
            .unwrap()
            .expect_dense()
            .unwrap();
        assert_eq!(back.values()[0].to_bits(), 0.5f64.to_bits());
    }

    #[test]
    fn binary_banded_round_trip() {
        let path = tmp("b.pqdt");
        let b =
            BandedMatrix::new(3, 8, vec![(0, vec![1.0]), (2, vec![0.5, 0.25]), (7, vec![0.125])])
                .unwrap();
        save_matrix(&MatrixData::Banded(b.clone()), &path, MatrixFormat::Binary).unwrap();
        let back = load_matrix(&path, MatrixFormat::Binary)
            .unwrap()
            .expect_banded()
            .unwrap();
        assert_eq!(back, b);
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let path = tmp("trunc.pqdt");
        let m = DenseMatrix::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        save_matrix(&MatrixData::Dense(m), &path, MatrixFormat::Binary).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
        let err = load_matrix(&path, MatrixFormat::Binary).unwrap_err();
        assert!(matches!(err, Error::PayloadMismatch { expected: 4, got: 3 }));
    }

    #[test]
    fn trailing_bytes_are_rejected() {
        let path = tmp("trail.pqdt");
        let m = DenseMatrix::new(1, 1, vec![1.0]).unwrap();
        save_matrix(&MatrixData::Dense(m), &path, MatrixFormat::Binary).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.extend_from_slice(&[0u8; 4]);
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_matrix(&path, MatrixFormat::Binary).unwrap_err(),
            Error::PayloadMismatch { .. }
        ));
    }

    #[test]
    fn bad_magic_is_rejected() {
        let path = tmp("bad.pqdt");
        std::fs::write(&path, b"NOPE\x01\x00\x00\x00").unwrap();
        assert!(matches!(
            load_matrix(&path, MatrixFormat::Binary).unwrap_err(),
            Error::BadMagic
        ));
    }

    #[test]
    fn nan_rejected_before_write() {
        let path = tmp("nan.pqdt");
        let mut m = DenseMatrix::zeros(1, 2);
        m.values_mut()[1] = f64::NAN;
        let err = save_matrix(&MatrixData::Dense(m), &path, MatrixFormat::Binary).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
        assert!(!path.exists());
    }

    proptest! {
        // Binary round trips are bit-exact for every finite f64.
        #[test]
        fn binary_round_trip_is_bit_exact(
            rows in 1usize..12,
            cols in 1usize..12,
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let values: Vec<f64> = (0..rows * cols)
                .map(|_| {
                    // mix magnitudes, including denormals and negatives
                    let v: f64 = rng.gen_range(-1.0..1.0);
                    let scale: i32 = rng.gen_range(-300..300);
                    v * 2f64.powi(scale)
                })
                .collect();
            let m = DenseMatrix::new(rows, cols, values).unwrap();
            let path = tmp("prop.pqdt");
            save_matrix(&MatrixData::Dense(m.clone()), &path, MatrixFormat::Binary).unwrap();
            let back = load_matrix(&path, MatrixFormat::Binary).unwrap().expect_dense().unwrap();
            for (a, b) in m.values().iter().zip(back.values()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn large_random_round_trip() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let values: Vec<f64> = (0..1000 * 151).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let m = DenseMatrix::new(1000, 151, values).unwrap();
        let path = tmp("big.pqdt");
        save_matrix(&MatrixData::Dense(m.clone()), &path, MatrixFormat::Binary).unwrap();
        let back = load_matrix(&path, MatrixFormat::Binary)
            .unwrap()
            .expect_dense()
            .unwrap();
        assert_eq!(back, m);
    }
}
