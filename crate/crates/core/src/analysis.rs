//! Reconstruction quality metrics and extended-precision Wigner functions of
//! diagonal operators, plus CSV emitters for plots.
//!
//! Wigner convention: `W_n(x,p) = ((−1)^n/π)·e^{−(x²+p²)}·L_n(2(x²+p²))`,
//! normalized so each number state integrates to one; a diagonal operator
//! with weights `θ` integrates to `Σ_k θ_k`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::PovmMatrix;
use crate::wide::{div_u64, WideFloat, MAX_BITS, MIN_BITS};
use rayon::prelude::*;

/// Fidelity of two diagonal operators with non-negative weight vectors:
/// `F = (Σ_k √(a_k·b_k))² / (Σ_k a_k · Σ_k b_k)`, zero when either trace
/// vanishes.
pub fn fidelity(theta_a: &[f64], theta_b: &[f64]) -> Result<f64> {
    if theta_a.len() != theta_b.len() {
        return Err(Error::DimensionMismatch(format!(
            "operator weight vectors of length {} vs {}",
            theta_a.len(),
            theta_b.len()
        )));
    }
    let mut bhatta = 0.0;
    let mut tr_a = 0.0;
    let mut tr_b = 0.0;
    for (k, (&a, &b)) in theta_a.iter().zip(theta_b).enumerate() {
        if a < 0.0 || b < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "negative operator weight at photon number {k}"
            )));
        }
        bhatta += (a * b).sqrt();
        tr_a += a;
        tr_b += b;
    }
    if tr_a == 0.0 || tr_b == 0.0 {
        return Ok(0.0);
    }
    Ok(bhatta * bhatta / (tr_a * tr_b))
}

/// Per-outcome fidelities between a reconstruction and the analytic model.
#[derive(Debug, Clone, serde::Serialize)]
pub struct FidelityReport {
    /// Fidelity `F_n` per outcome.
    pub per_outcome_fidelity: Vec<f64>,
    /// Infidelity `1 − F_n` per outcome.
    pub per_outcome_infidelity: Vec<f64>,
    /// Outcomes whose analytic column trace exceeds the occupancy threshold.
    pub occupied: Vec<bool>,
    /// Mean fidelity over occupied outcomes.
    pub mean_occupied_fidelity: f64,
}

/// Compares POVM columns outcome by outcome. An outcome counts as occupied
/// when its analytic column trace exceeds `occupancy_threshold` times the
/// largest column trace.
pub fn infidelity_report(
    pi_rec: &PovmMatrix,
    pi_theo: &PovmMatrix,
    occupancy_threshold: f64,
) -> Result<FidelityReport> {
    if pi_rec.hilbert_dim() != pi_theo.hilbert_dim()
        || pi_rec.outcomes() != pi_theo.outcomes()
    {
        return Err(Error::DimensionMismatch(format!(
            "POVM dims {}x{} vs {}x{}",
            pi_rec.hilbert_dim(),
            pi_rec.outcomes(),
            pi_theo.hilbert_dim(),
            pi_theo.outcomes()
        )));
    }
    let n = pi_rec.outcomes();
    let traces: Vec<f64> = (0..n)
        .map(|j| pi_theo.column(j).iter().sum::<f64>())
        .collect();
    let max_trace = traces.iter().cloned().fold(0.0f64, f64::max);
    let mut fids = Vec::with_capacity(n);
    for j in 0..n {
        fids.push(fidelity(&pi_rec.column(j), &pi_theo.column(j))?);
    }
    let occupied: Vec<bool> = traces
        .iter()
        .map(|t| *t > occupancy_threshold * max_trace)
        .collect();
    let occ_count = occupied.iter().filter(|o| **o).count();
    let mean = if occ_count == 0 {
        0.0
    } else {
        fids.iter()
            .zip(&occupied)
            .filter(|(_, o)| **o)
            .map(|(f, _)| f)
            .sum::<f64>()
            / occ_count as f64
    };
    Ok(FidelityReport {
        per_outcome_infidelity: fids.iter().map(|f| 1.0 - f).collect(),
        per_outcome_fidelity: fids,
        occupied,
        mean_occupied_fidelity: mean,
    })
}

/// Rectangular phase-space grid.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub np: usize,
}

impl GridSpec {
    /// Symmetric square grid over `[−half, half]²`.
    pub fn square(half: f64, points: usize) -> Self {
        Self {
            x_min: -half,
            x_max: half,
            nx: points,
            p_min: -half,
            p_max: half,
            np: points,
        }
    }

    pub fn x_at(&self, ix: usize) -> f64 {
        if self.nx == 1 {
            self.x_min
        } else {
            self.x_min + (self.x_max - self.x_min) * ix as f64 / (self.nx - 1) as f64
        }
    }

    pub fn p_at(&self, ip: usize) -> f64 {
        if self.np == 1 {
            self.p_min
        } else {
            self.p_min + (self.p_max - self.p_min) * ip as f64 / (self.np - 1) as f64
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.np
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.np == 0 {
            return Err(Error::InvalidArgument("grid needs at least one point".into()));
        }
        if !(self.x_min <= self.x_max && self.p_min <= self.p_max) {
            return Err(Error::InvalidArgument("grid ranges are inverted".into()));
        }
        Ok(())
    }
}

/// Wigner function sampled on a grid, stored row-major over (x, p) after
/// down-conversion to f64.
#[derive(Debug, Clone)]
pub struct WignerGrid {
    pub spec: GridSpec,
    pub values: Vec<f64>,
    pub precision_bits: u32,
}

impl WignerGrid {
    pub fn value(&self, ix: usize, ip: usize) -> f64 {
        self.values[ix * self.spec.np + ip]
    }

    /// Minimum value and its grid location.
    pub fn min_entry(&self) -> (f64, f64, f64) {
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for ix in 0..self.spec.nx {
            for ip in 0..self.spec.np {
                let v = self.value(ix, ip);
                if v < best.0 {
                    best = (v, self.spec.x_at(ix), self.spec.p_at(ip));
                }
            }
        }
        best
    }

    /// Trapezoidal integral over the grid window.
    pub fn integral(&self) -> f64 {
        if self.spec.nx < 2 || self.spec.np < 2 {
            return 0.0;
        }
        let dx = (self.spec.x_max - self.spec.x_min) / (self.spec.nx - 1) as f64;
        let dp = (self.spec.p_max - self.spec.p_min) / (self.spec.np - 1) as f64;
        let mut acc = 0.0;
        for ix in 0..self.spec.nx {
            let wx = if ix == 0 || ix == self.spec.nx - 1 { 0.5 } else { 1.0 };
            for ip in 0..self.spec.np {
                let wp = if ip == 0 || ip == self.spec.np - 1 { 0.5 } else { 1.0 };
                acc += wx * wp * self.value(ix, ip);
            }
        }
        acc * dx * dp
    }
}

/// Single-point Wigner value of a diagonal operator via the Laguerre
/// three-term recurrence `(k+1)·L_{k+1} = (2k+1−z)·L_k − k·L_{k−1}` carried
/// in wide-exponent floats with `bits` of mantissa.
fn wigner_point(theta: &[f64], z: f64, bits: u32) -> Result<f64> {
    let overflow = |k: usize| Error::WideOverflow { k, z };
    let mut acc = WideFloat::ZERO;
    let mut l_prev = WideFloat::from_f64(1.0); // L_0
    if theta.is_empty() {
        return Ok(0.0);
    }
    if theta[0] != 0.0 {
        acc = l_prev.mul_f64(theta[0], bits);
    }
    if theta.len() > 1 {
        let z_wide = WideFloat::from_f64(z);
        let mut l_cur = WideFloat::from_f64(1.0).sub(z_wide, bits); // L_1
        if theta[1] != 0.0 {
            acc = acc.sub(l_cur.mul_f64(theta[1], bits), bits);
        }
        for k in 1..theta.len() - 1 {
            let coeff = WideFloat::from_f64((2 * k + 1) as f64).sub(z_wide, bits);
            let t = l_cur
                .mul(coeff, bits)
                .sub(l_prev.mul_f64(k as f64, bits), bits);
            let l_next = div_u64(t, (k + 1) as u64, bits);
            if l_next.is_overflow() {
                return Err(overflow(k + 1));
            }
            let idx = k + 1;
            if theta[idx] != 0.0 {
                let term = l_next.mul_f64(theta[idx], bits);
                acc = if idx % 2 == 1 {
                    acc.sub(term, bits)
                } else {
                    acc.add(term, bits)
                };
            }
            l_prev = l_cur;
            l_cur = l_next;
        }
    }
    if acc.is_overflow() {
        return Err(overflow(theta.len()));
    }
    // e^{−z/2} = 2^{−z/(2 ln 2)}
    let envelope = WideFloat::from_exp2(-z / (2.0 * std::f64::consts::LN_2), bits);
    let w = acc.mul(envelope, bits);
    if w.is_overflow() {
        return Err(overflow(theta.len()));
    }
    Ok(w.to_f64() / std::f64::consts::PI)
}

/// Wigner function of the diagonal operator `θ` on a grid. Each grid point
/// is a pure function of `(θ, x, p)`; points are evaluated in parallel.
pub fn wigner_diag(theta: &[f64], grid: &GridSpec, precision_bits: u32) -> Result<WignerGrid> {
    grid.validate()?;
    if !(MIN_BITS..=MAX_BITS).contains(&precision_bits) {
        return Err(Error::InvalidArgument(format!(
            "precision_bits {precision_bits} outside [{MIN_BITS}, {MAX_BITS}]"
        )));
    }
    for (k, t) in theta.iter().enumerate() {
        if !t.is_finite() || *t < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "operator weight at photon number {k} must be finite and non-negative"
            )));
        }
    }
    // trailing zero weights contribute nothing
    let effective = theta
        .iter()
        .rposition(|&t| t != 0.0)
        .map_or(0, |p| p + 1);
    let theta = &theta[..effective];
    let values: Result<Vec<f64>> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let x = grid.x_at(idx / grid.np);
            let p = grid.p_at(idx % grid.np);
            let z = 2.0 * (x * x + p * p);
            wigner_point(theta, z, precision_bits)
        })
        .collect();
    Ok(WignerGrid {
        spec: grid.clone(),
        values: values?,
        precision_bits,
    })
}

/// Result of a mantissa-width sweep.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PrecisionSweepReport {
    pub bits: Vec<u32>,
    /// Max abs deviation of each run from the highest-precision run.
    pub max_abs_deviation: Vec<f64>,
    /// Minimal width whose down-converted grid is bit-identical to the
    /// highest-precision run (and stays identical for all larger widths).
    pub stable_bits: Option<u32>,
}

/// Evaluates the grid at every mantissa width in ascending `bits_list` and
/// reports deviations against the highest-precision run.
pub fn wigner_precision_sweep(
    theta: &[f64],
    grid: &GridSpec,
    bits_list: &[u32],
) -> Result<PrecisionSweepReport> {
    if bits_list.is_empty() {
        return Err(Error::InvalidArgument("empty precision list".into()));
    }
    if bits_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "precision list must be strictly ascending".into(),
        ));
    }
    let runs: Result<Vec<WignerGrid>> = bits_list
        .iter()
        .map(|&b| wigner_diag(theta, grid, b))
        .collect();
    let runs = runs?;
    let reference = &runs[runs.len() - 1];
    let mut deviations = Vec::with_capacity(runs.len());
    for run in &runs {
        let mut dev = 0.0f64;
        let mut identical = true;
        for (a, b) in run.values.iter().zip(&reference.values) {
            if a.to_bits() != b.to_bits() {
                identical = false;
            }
            dev = dev.max((a - b).abs());
        }
        deviations.push(if identical { 0.0 } else { dev.max(f64::MIN_POSITIVE) });
    }
    let mut stable = None;
    for (i, dev) in deviations.iter().enumerate().rev() {
        if *dev == 0.0 {
            stable = Some(bits_list[i]);
        } else {
            break;
        }
    }
    Ok(PrecisionSweepReport {
        bits: bits_list.to_vec(),
        max_abs_deviation: deviations,
        stable_bits: stable,
    })
}

/// Writes POVM heatmap data as `i,n,value` triples. With `log_bins`, rows
/// are averaged over geometrically spaced photon-number bins, which keeps
/// plot files small at large `M`.
pub fn emit_povm_plot_data<P: AsRef<Path>>(
    pi: &PovmMatrix,
    path: P,
    log_bins: Option<usize>,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "i,n,value")?;
    let m = pi.hilbert_dim();
    match log_bins {
        None => {
            for i in 0..m {
                for (j, v) in pi.row(i).iter().enumerate() {
                    writeln!(w, "{i},{j},{v}")?;
                }
            }
        }
        Some(bins) => {
            let bins = bins.max(1);
            let mut edges: Vec<usize> = vec![0];
            let top = (m as f64).ln();
            for b in 1..=bins {
                let e = (top * b as f64 / bins as f64).exp().ceil() as usize;
                let e = e.min(m);
                if e > *edges.last().unwrap() {
                    edges.push(e);
                }
            }
            for pair in edges.windows(2) {
                let (lo, hi) = (pair[0], pair[1]);
                let center = (lo + hi - 1) / 2;
                for j in 0..pi.outcomes() {
                    let mean: f64 = (lo..hi).map(|i| pi.get(i, j)).sum::<f64>() / (hi - lo) as f64;
                    writeln!(w, "{center},{j},{mean}")?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes Wigner grid data as `x,p,w` rows.
pub fn emit_wigner_plot_data<P: AsRef<Path>>(grid: &WignerGrid, path: P) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "x,p,w")?;
    for ix in 0..grid.spec.nx {
        let x = grid.spec.x_at(ix);
        for ip in 0..grid.spec.np {
            writeln!(w, "{x},{},{}", grid.spec.p_at(ip), grid.value(ix, ip))?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fidelity_of_identical_operators_is_one() {
        let a = vec![0.2, 0.5, 0.3, 0.0];
        let f = fidelity(&a, &a).unwrap();
        assert!((f - 1.0).abs() < 1e-14);
    }

    #[test]
    fn fidelity_of_disjoint_supports_is_zero() {
        let a = vec![1.0, 0.0, 0.5, 0.0];
        let b = vec![0.0, 0.7, 0.0, 0.3];
        assert_eq!(fidelity(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn fidelity_symmetry_and_scale_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let a: Vec<f64> = (0..12).map(|_| rng.gen_range(0.0..1.0)).collect();
            let b: Vec<f64> = (0..12).map(|_| rng.gen_range(0.0..1.0)).collect();
            let fab = fidelity(&a, &b).unwrap();
            let fba = fidelity(&b, &a).unwrap();
            assert!((fab - fba).abs() < 1e-14);
            let c = 3.7;
            let scaled: Vec<f64> = a.iter().map(|v| c * v).collect();
            let fs = fidelity(&scaled, &b).unwrap();
            assert!((fs - fab).abs() < 1e-12);
            assert!((0.0..=1.0 + 1e-12).contains(&fab));
        }
    }

    #[test]
    fn fidelity_rejects_negative_weights_and_handles_zero_trace() {
        assert!(fidelity(&[0.5, -0.1], &[0.5, 0.5]).is_err());
        assert_eq!(fidelity(&[0.0, 0.0], &[0.5, 0.5]).unwrap(), 0.0);
    }

    #[test]
    fn report_localizes_perturbations() {
        let theo = PovmMatrix::new(
            4,
            3,
            vec![
                1.0, 0.0, 0.0, //
                0.4, 0.6, 0.0, //
                0.1, 0.5, 0.4, //
                0.0, 0.2, 0.8,
            ],
        )
        .unwrap();
        let identical = infidelity_report(&theo, &theo, 1e-3).unwrap();
        assert!(identical
            .per_outcome_infidelity
            .iter()
            .all(|v| v.abs() < 1e-12));
        assert!((identical.mean_occupied_fidelity - 1.0).abs() < 1e-12);

        // perturb outcome 1 only
        let mut vals = theo.values().to_vec();
        vals[4] += 0.05;
        vals[3] -= 0.05;
        let rec = PovmMatrix::new(4, 3, vals).unwrap();
        let rep = infidelity_report(&rec, &theo, 1e-3).unwrap();
        assert!(rep.per_outcome_infidelity[1] > 1e-5);
        assert!(rep.per_outcome_infidelity[2] < 1e-12);
    }

    #[test]
    fn vacuum_and_single_photon_values_at_the_origin() {
        let grid = GridSpec::square(0.0, 1);
        let w0 = wigner_diag(&[1.0], &grid, 70).unwrap();
        assert!((w0.value(0, 0) - 1.0 / std::f64::consts::PI).abs() < 1e-12);
        let w1 = wigner_diag(&[0.0, 1.0], &grid, 70).unwrap();
        assert!((w1.value(0, 0) + 1.0 / std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn sign_rule_at_the_origin() {
        let grid = GridSpec::square(0.0, 1);
        for n in 0..12 {
            let mut theta = vec![0.0; n + 1];
            theta[n] = 1.0;
            let w = wigner_diag(&theta, &grid, 70).unwrap().value(0, 0);
            let expect = if n % 2 == 0 { 1.0 } else { -1.0 } / std::f64::consts::PI;
            assert!((w - expect).abs() < 1e-12, "n={n}: {w}");
        }
    }

    /// Plain f64 recurrence oracle, valid while magnitudes stay in range.
    fn wigner_f64(theta: &[f64], x: f64, p: f64) -> f64 {
        let z = 2.0 * (x * x + p * p);
        let mut acc = 0.0;
        let mut l_prev = 1.0;
        if !theta.is_empty() {
            acc += theta[0] * l_prev;
        }
        if theta.len() > 1 {
            let mut l_cur = 1.0 - z;
            acc -= theta[1] * l_cur;
            for k in 1..theta.len() - 1 {
                let l_next = ((2.0 * k as f64 + 1.0 - z) * l_cur - k as f64 * l_prev)
                    / (k as f64 + 1.0);
                let sign = if (k + 1) % 2 == 1 { -1.0 } else { 1.0 };
                acc += sign * theta[k + 1] * l_next;
                l_prev = l_cur;
                l_cur = l_next;
            }
        }
        acc * (-z / 2.0).exp() / std::f64::consts::PI
    }

    #[test]
    fn small_operators_match_a_double_precision_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let theta: Vec<f64> = (0..25).map(|_| rng.gen_range(0.0..1.0)).collect();
        let grid = GridSpec::square(4.0, 9);
        let wide = wigner_diag(&theta, &grid, 70).unwrap();
        for ix in 0..9 {
            for ip in 0..9 {
                let oracle = wigner_f64(&theta, grid.x_at(ix), grid.p_at(ip));
                let got = wide.value(ix, ip);
                assert!(
                    (got - oracle).abs() <= 1e-12 * oracle.abs().max(1e-6),
                    "({ix},{ip}): {got} vs {oracle}"
                );
            }
        }
    }

    #[test]
    fn geometric_weights_match_the_closed_form_at_large_m() {
        // θ_k = c^k has Σ_k (−c)^k L_k(z) = e^{zc/(1+c)}/(1+c), so
        // W(z) = exp(−(z/2)(1−c)/(1+c)) / (π(1+c)).
        let c: f64 = 0.5061;
        let m = 10_000;
        let mut theta = Vec::with_capacity(m);
        let mut t = 1.0;
        for _ in 0..m {
            theta.push(t);
            t *= c;
        }
        for &(x, p) in &[(0.0, 0.0), (1.0, 2.0), (3.0, 4.0), (10.0, 5.0)] {
            let grid = GridSpec {
                x_min: x,
                x_max: x,
                nx: 1,
                p_min: p,
                p_max: p,
                np: 1,
            };
            let got = wigner_diag(&theta, &grid, 70).unwrap().value(0, 0);
            let z = 2.0 * (x * x + p * p);
            let expect =
                (-(z / 2.0) * (1.0 - c) / (1.0 + c)).exp() / (std::f64::consts::PI * (1.0 + c));
            assert!(
                (got - expect).abs() <= 1e-8 * expect,
                "(x={x},p={p}): {got} vs {expect}"
            );
        }
    }

    #[test]
    fn grid_integral_recovers_the_trace() {
        let theta = vec![0.3, 0.0, 0.45, 0.1, 0.0, 0.15];
        let trace: f64 = theta.iter().sum();
        let grid = GridSpec::square(15.0, 301);
        let w = wigner_diag(&theta, &grid, 64).unwrap();
        let integral = w.integral();
        assert!(
            (integral - trace).abs() <= 0.01 * trace,
            "integral {integral} vs trace {trace}"
        );
    }

    #[test]
    fn precision_sweep_is_stable_for_small_operators() {
        // a single-term operator reproduces bit-identically at every width
        let grid0 = GridSpec::square(2.0, 5);
        let trivial = wigner_precision_sweep(&[1.0], &grid0, &[53, 60, 70, 96]).unwrap();
        assert_eq!(trivial.stable_bits, Some(53));
        assert!(trivial.max_abs_deviation.iter().all(|&d| d == 0.0));

        // thirty-term recurrences stabilize well below 70 bits and any
        // low-width deviation sits at the last-ulp level
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let theta: Vec<f64> = (0..30).map(|_| rng.gen_range(0.0..1.0)).collect();
        let grid = GridSpec::square(3.0, 7);
        let report = wigner_precision_sweep(&theta, &grid, &[53, 60, 70, 96]).unwrap();
        assert!(report.stable_bits.is_some_and(|b| b <= 70));
        assert!(report.max_abs_deviation.iter().all(|&d| d <= 5e-15));
    }

    #[test]
    fn precision_sweep_validates_input() {
        let grid = GridSpec::square(1.0, 3);
        assert!(wigner_precision_sweep(&[1.0], &grid, &[]).is_err());
        assert!(wigner_precision_sweep(&[1.0], &grid, &[70, 60]).is_err());
    }

    #[test]
    fn plot_data_round_trips_at_full_precision() {
        let dir = tempfile::tempdir().unwrap();
        let pi = PovmMatrix::new(2, 2, vec![0.123456789012345678, 0.876543210987654322, 1.0, 0.0])
            .unwrap();
        let path = dir.path().join("povm.csv");
        emit_povm_plot_data(&pi, &path, None).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "i,n,value");
        let mut count = 0;
        for line in lines {
            let fields: Vec<&str> = line.split(',').collect();
            let i: usize = fields[0].parse().unwrap();
            let j: usize = fields[1].parse().unwrap();
            let v: f64 = fields[2].parse().unwrap();
            assert_eq!(v.to_bits(), pi.get(i, j).to_bits());
            count += 1;
        }
        assert_eq!(count, 4);
    }

    #[test]
    fn wigner_csv_has_one_row_per_grid_point() {
        let dir = tempfile::tempdir().unwrap();
        let grid = GridSpec::square(2.0, 11);
        let w = wigner_diag(&[1.0], &grid, 53).unwrap();
        let path = dir.path().join("wigner.csv");
        emit_wigner_plot_data(&w, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1 + 121);
    }
}
