//! Analytic model of the time-multiplexed click detector.
//!
//! A beam-splitter loop splits each pulse into `J` geometrically attenuated
//! time bins read out by a single click detector; the outcome is the number
//! of clicked bins. The module builds the coherent-probe matrix `F`,
//! synthesizes the analytic POVMs from bin-click probabilities via the
//! Poisson binomial distribution, simulates measured outcome matrices, and
//! fits the loop parameters from bin-click data.

use crate::error::{Error, Result};
use crate::matrix::{BandedMatrix, DenseMatrix, PovmMatrix};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

/// Mean photon numbers `|α_d|²` of the coherent probe states.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSchedule {
    mean_photons: Vec<f64>,
}

impl ProbeSchedule {
    /// Validates an explicit schedule: strictly increasing, first entry ≥ 0.
    pub fn explicit(mean_photons: Vec<f64>) -> Result<Self> {
        if mean_photons.is_empty() {
            return Err(Error::InvalidArgument("empty probe schedule".into()));
        }
        if mean_photons[0] < 0.0 || !mean_photons[0].is_finite() {
            return Err(Error::InvalidArgument(
                "first mean photon number must be finite and non-negative".into(),
            ));
        }
        for w in mean_photons.windows(2) {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(Error::InvalidArgument(
                    "mean photon numbers must be strictly increasing".into(),
                ));
            }
        }
        Ok(Self { mean_photons })
    }

    /// Quadratic schedule `|α_d|² = d²` for `d = 0..D−1`.
    pub fn quadratic(d: usize) -> Result<Self> {
        Self::quadratic_scaled(d, 1.0)
    }

    /// Quadratic schedule `|α_d|² = (scale·d)²`, used to fit the largest
    /// probe's photon-number band under a given Hilbert-space cutoff.
    pub fn quadratic_scaled(d: usize, scale: f64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("need at least one probe".into()));
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidArgument("scale must be positive".into()));
        }
        Ok(Self {
            mean_photons: (0..d).map(|k| (scale * k as f64).powi(2)).collect(),
        })
    }

    /// Largest quadratic scale whose top probe band fits `m` photon numbers
    /// at the given tail cutoff, capped at 1. Solves
    /// `λ + z·sqrt(λ) = m − 1` for the top mean photon number; a 1e-12 band
    /// reaches about 7.45σ, so z = 7.8 leaves a small margin while keeping
    /// the uncovered top rows within reach of the regulariser and the
    /// long-range smoothing windows.
    pub fn auto_quadratic_scale(d: usize, m: usize) -> f64 {
        if d <= 1 {
            return 1.0;
        }
        let z = 7.8;
        let target = (m - 1) as f64;
        let u = 0.5 * (-z + (z * z + 4.0 * target).sqrt());
        let lambda_max = u * u;
        (lambda_max.sqrt() / (d - 1) as f64).min(1.0)
    }

    pub fn len(&self) -> usize {
        self.mean_photons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean_photons.is_empty()
    }

    pub fn mean_photons(&self) -> &[f64] {
        &self.mean_photons
    }
}

/// Experimental parameters of the time-multiplexed detector.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DetectorParams {
    /// Out-coupling ratio of the beam-splitter loop, in (0,1).
    pub r: f64,
    /// Loop efficiency per round trip, in (0,1].
    pub eta_loop: f64,
    /// Detection efficiency of the click detector, in (0,1].
    pub eta_det: f64,
    /// Number of time bins `J`.
    pub bins: usize,
    /// Per-bin dark-count probability.
    pub p_dark: f64,
}

impl DetectorParams {
    pub fn new(r: f64, eta_loop: f64, eta_det: f64, bins: usize, p_dark: f64) -> Result<Self> {
        let ok = r > 0.0
            && r < 1.0
            && eta_loop > 0.0
            && eta_loop <= 1.0
            && eta_det > 0.0
            && eta_det <= 1.0
            && (0.0..=1.0).contains(&p_dark)
            && bins >= 1;
        if !ok {
            return Err(Error::InvalidArgument(format!(
                "detector parameters out of range: r={r}, eta_loop={eta_loop}, eta_det={eta_det}, bins={bins}, p_dark={p_dark}"
            )));
        }
        Ok(Self {
            r,
            eta_loop,
            eta_det,
            bins,
            p_dark,
        })
    }

    /// Same parameters with dark counts switched off (clean oracles, fits).
    pub fn without_dark_counts(&self) -> Self {
        Self {
            p_dark: 0.0,
            ..self.clone()
        }
    }

    /// Effective per-photon click probability of bin `j` (1-based):
    /// `x_1 = R·η_det`, `x_j = (1−R)²·R⁻¹·(R·η_loop)^{j−1}·η_det` for j ≥ 2.
    fn bin_attenuations(&self) -> Vec<f64> {
        let mut xs = Vec::with_capacity(self.bins);
        xs.push(self.r * self.eta_det);
        let base = (1.0 - self.r) * (1.0 - self.r) / self.r * self.eta_det;
        let mut loop_pow = self.r * self.eta_loop; // (R·η_loop)^{j−1} at j=2
        for _ in 1..self.bins {
            xs.push(base * loop_pow);
            loop_pow *= self.r * self.eta_loop;
        }
        xs
    }
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            r: 0.91644,
            eta_loop: 0.90524,
            eta_det: 0.528,
            bins: 25,
            p_dark: 5e-8,
        }
    }
}

/// Click probabilities `p_j` of the `J` time bins for one input state.
#[derive(Debug, Clone, PartialEq)]
pub struct BinClickVector {
    probs: Vec<f64>,
}

impl BinClickVector {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn bins(&self) -> usize {
        self.probs.len()
    }
}

fn compose_dark(p: f64, p_dark: f64) -> f64 {
    if p_dark == 0.0 {
        p
    } else {
        // 1 − (1−p)(1−p_dark)
        p + p_dark * (1.0 - p)
    }
}

/// Bin-click probabilities for a coherent input of mean photon number
/// `|α|²`: `p_j = 1 − exp(−x_j·|α|²)` with the per-photon attenuations
/// `x_j`; dark counts composed on top.
pub fn bin_click_coherent(params: &DetectorParams, mean_photons: f64) -> BinClickVector {
    let probs = params
        .bin_attenuations()
        .iter()
        .map(|x| compose_dark(-(-x * mean_photons).exp_m1(), params.p_dark))
        .collect();
    BinClickVector { probs }
}

/// Bin-click probabilities for a photon-number (Fock) input `|i⟩`:
/// `p_j = 1 − (1 − x_j)^i`, powers taken in the log domain so that
/// `i ~ 10^6` neither under- nor overflows.
pub fn bin_click_fock(params: &DetectorParams, photon_number: u64) -> BinClickVector {
    let probs = params
        .bin_attenuations()
        .iter()
        .map(|&x| {
            let p = match photon_number {
                0 => 0.0,
                1 => x,
                i => -((i as f64) * (-x).ln_1p()).exp_m1(),
            };
            compose_dark(p, params.p_dark)
        })
        .collect();
    BinClickVector { probs }
}

/// Distribution of the number of clicked bins among independent,
/// non-identical Bernoulli bins: DFT closed form for large `J`, exact
/// iterative convolution otherwise.
pub fn poisson_binomial(clicks: &BinClickVector) -> Vec<f64> {
    let p = clicks.probs();
    if p.len() <= 20 {
        poisson_binomial_conv(p)
    } else {
        poisson_binomial_dft(p)
    }
}

/// Exact O(J²) convolution of the per-bin Bernoulli distributions.
pub fn poisson_binomial_conv(p: &[f64]) -> Vec<f64> {
    let mut q = vec![0.0; p.len() + 1];
    q[0] = 1.0;
    for (j, &pj) in p.iter().enumerate() {
        // in-place backwards so q[k] still holds the j-bin value
        for k in (0..=j + 1).rev() {
            let stay = q[k] * (1.0 - pj);
            let up = if k > 0 { q[k - 1] * pj } else { 0.0 };
            q[k] = stay + up;
        }
    }
    q
}

/// Closed-form evaluation through the discrete Fourier transform of the
/// characteristic function:
/// `q_n = (J+1)⁻¹ Σ_l ω^{−ln} Π_m (1 + (ω^l − 1) p_m)`, `ω = e^{2πi/(J+1)}`.
pub fn poisson_binomial_dft(p: &[f64]) -> Vec<f64> {
    let j = p.len();
    let l_total = j + 1;
    let mut z = Vec::with_capacity(l_total);
    for l in 0..l_total {
        let omega_l = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * l as f64 / l_total as f64);
        let mut prod = Complex64::new(1.0, 0.0);
        for &pm in p {
            prod *= Complex64::new(1.0, 0.0) + (omega_l - Complex64::new(1.0, 0.0)) * pm;
        }
        z.push(prod);
    }
    (0..l_total)
        .map(|n| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (l, zl) in z.iter().enumerate() {
                let phase = -2.0 * std::f64::consts::PI * (l * n % l_total) as f64 / l_total as f64;
                acc += zl * Complex64::from_polar(1.0, phase);
            }
            acc.re / l_total as f64
        })
        .collect()
}

/// `ln k!` — exact integer factorials below 34, Stirling series beyond.
pub fn ln_factorial(k: u64) -> f64 {
    if k < 34 {
        let mut f: u128 = 1;
        for i in 2..=k as u128 {
            f *= i;
        }
        (f as f64).ln()
    } else {
        let x = k as f64;
        let x2 = x * x;
        x * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI * x).ln() + 1.0 / (12.0 * x)
            - 1.0 / (360.0 * x * x2)
            + 1.0 / (1260.0 * x * x2 * x2)
    }
}

/// Log-domain Poisson pmf `λ^k e^{−λ} / k!`.
///
/// For large `k` the naive `k·lnλ − λ − ln k!` cancels catastrophically
/// (three ~10^7-sized terms near the mode of λ ~ 10^6), so the Stirling form
/// `k·ln1p((λ−k)/k) + (k−λ) − ½·ln(2πk) − corr(k)` is used instead; every
/// term stays O(1)-accurate near the mode.
pub fn poisson_ln_pmf(lambda: f64, k: u64) -> f64 {
    if lambda == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if k < 34 {
        return k as f64 * lambda.ln() - lambda - ln_factorial(k);
    }
    let kf = k as f64;
    let k2 = kf * kf;
    let stirling_corr = 1.0 / (12.0 * kf) - 1.0 / (360.0 * kf * k2) + 1.0 / (1260.0 * kf * k2 * k2);
    kf * ((lambda - kf) / kf).ln_1p() + (kf - lambda)
        - 0.5 * (2.0 * std::f64::consts::PI * kf).ln()
        - stirling_corr
}

/// One banded probe row: the Poisson pmf of mean `lambda` scanned outward
/// from the mode until the omitted mass drops below `cutoff`.
fn poisson_band(lambda: f64, m: usize, cutoff: f64, row: usize) -> Result<(usize, Vec<f64>)> {
    if lambda == 0.0 {
        return Ok((0, vec![1.0]));
    }
    let mode = lambda.floor() as usize;
    if mode > m - 1 {
        return Err(Error::ProbeRowTooWide {
            row,
            mean_photons: lambda,
            cols: m,
            cutoff,
        });
    }
    let p_mode = poisson_ln_pmf(lambda, mode as u64).exp();
    let mut lo = mode;
    let mut hi = mode;
    let mut p_lo = p_mode;
    let mut p_hi = p_mode;
    let mut left: Vec<f64> = Vec::new(); // values below the mode, nearest first
    let mut right: Vec<f64> = Vec::new(); // values above the mode, nearest first
    let mut mass = p_mode;
    let mut comp = 0.0; // Neumaier compensation for the mass sum
    let add_mass = |mass: &mut f64, comp: &mut f64, v: f64| {
        let t = *mass + v;
        *comp += if mass.abs() >= v.abs() {
            (*mass - t) + v
        } else {
            (v - t) + *mass
        };
        *mass = t;
    };
    while mass + comp < 1.0 - cutoff {
        let cand_left = if lo > 0 { p_lo * lo as f64 / lambda } else { -1.0 };
        let cand_right = if hi < m - 1 {
            p_hi * lambda / (hi + 1) as f64
        } else {
            -1.0
        };
        if cand_left < 0.0 && cand_right < 0.0 {
            return Err(Error::ProbeRowTooWide {
                row,
                mean_photons: lambda,
                cols: m,
                cutoff,
            });
        }
        // Summation noise floor: further extension cannot move the mass.
        if cand_left.max(cand_right) < mass * 1e-18 {
            if mass + comp >= 1.0 - 2.0 * cutoff {
                break;
            }
            return Err(Error::ProbeRowTooWide {
                row,
                mean_photons: lambda,
                cols: m,
                cutoff,
            });
        }
        if cand_left >= cand_right {
            lo -= 1;
            p_lo = cand_left;
            left.push(p_lo);
            add_mass(&mut mass, &mut comp, p_lo);
        } else {
            hi += 1;
            p_hi = cand_right;
            right.push(p_hi);
            add_mass(&mut mass, &mut comp, p_hi);
        }
    }
    let mut vals = Vec::with_capacity(hi - lo + 1);
    vals.extend(left.iter().rev());
    vals.push(p_mode);
    vals.extend(right.iter());
    Ok((lo, vals))
}

/// Builds the banded coherent-probe matrix `F` (D×M): row `d` holds the
/// Poisson pmf of mean `|α_d|²`, truncated so that the omitted probability
/// mass per row stays below `tail_mass_cutoff`.
pub fn build_probe_matrix(
    schedule: &ProbeSchedule,
    m: usize,
    tail_mass_cutoff: f64,
) -> Result<BandedMatrix> {
    if m < 1 {
        return Err(Error::InvalidArgument("M must be at least 1".into()));
    }
    if !(tail_mass_cutoff > 0.0 && tail_mass_cutoff <= 1e-6) {
        return Err(Error::InvalidArgument(format!(
            "tail mass cutoff {tail_mass_cutoff} outside (0, 1e-6]"
        )));
    }
    let bands: Result<Vec<(usize, Vec<f64>)>> = schedule
        .mean_photons()
        .par_iter()
        .enumerate()
        .map(|(d, &lambda)| poisson_band(lambda, m, tail_mass_cutoff, d))
        .collect();
    BandedMatrix::new(schedule.len(), m, bands?)
}

/// How rows of the analytic POVM are reduced when the requested outcome
/// count is below `J + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationPolicy {
    /// Drop outcomes ≥ N and renormalize each row (default).
    RenormalizeDropped,
    /// Fold all outcomes ≥ N−1 into the final column.
    AccumulateLast,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy::RenormalizeDropped
    }
}

/// Analytic POVM matrix of the detector: row `i` is the Poisson-binomial
/// click-count distribution of the Fock state `|i⟩`.
pub fn analytic_povm(
    params: &DetectorParams,
    m: usize,
    n: usize,
    policy: TruncationPolicy,
) -> Result<PovmMatrix> {
    let max_outcomes = params.bins + 1;
    if n > max_outcomes || n == 0 {
        return Err(Error::InconsistentOutcomes {
            n,
            bins: params.bins,
            max: max_outcomes,
        });
    }
    let rows: Result<Vec<Vec<f64>>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let q = poisson_binomial(&bin_click_fock(params, i as u64));
            let mut row = if n == max_outcomes {
                q
            } else {
                match policy {
                    TruncationPolicy::RenormalizeDropped => {
                        let kept: f64 = q[..n].iter().sum();
                        if kept < 1e-300 {
                            return Err(Error::InvalidArgument(format!(
                                "outcome truncation at N={n} removes all probability mass of photon number {i}"
                            )));
                        }
                        q[..n].iter().map(|v| v / kept).collect()
                    }
                    TruncationPolicy::AccumulateLast => {
                        let mut kept: Vec<f64> = q[..n].to_vec();
                        kept[n - 1] += q[n..].iter().sum::<f64>();
                        kept
                    }
                }
            };
            for v in row.iter_mut() {
                // the DFT form can leave O(1e-16) negative noise
                if *v < 0.0 {
                    debug_assert!(*v > -1e-12, "poisson binomial produced {v}");
                    *v = 0.0;
                }
            }
            Ok(row)
        })
        .collect();
    let values: Vec<f64> = rows?.into_iter().flatten().collect();
    PovmMatrix::new(m, n, values)
}

/// Samples the measured outcome matrix `P`: the exact distribution
/// `(F·Π_theo)_d` of every probe is drawn multinomially with `trials` draws,
/// one independent deterministic RNG stream per probe row.
pub fn simulate_outcomes(
    f: &BandedMatrix,
    pi_theo: &PovmMatrix,
    trials: u64,
    rng_seed: u64,
) -> Result<DenseMatrix> {
    if f.cols() != pi_theo.hilbert_dim() {
        return Err(Error::DimensionMismatch(format!(
            "F has {} photon columns, Π has {} rows",
            f.cols(),
            pi_theo.hilbert_dim()
        )));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let n = pi_theo.outcomes();
    let d_total = f.rows();
    let rows: Result<Vec<Vec<f64>>> = (0..d_total)
        .into_par_iter()
        .map(|d| {
            let (start, band) = f.band(d);
            let mut exact = vec![0.0; n];
            for (j, &fv) in band.iter().enumerate() {
                let pi_row = pi_theo.row(start + j);
                for (e, p) in exact.iter_mut().zip(pi_row) {
                    *e += fv * p;
                }
            }
            let sum: f64 = exact.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::BadTruncation { row: d, sum });
            }
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            rng.set_stream(d as u64);
            let mut counts = vec![0u64; n];
            let mut remaining = trials;
            let mut rem_mass = sum;
            for outcome in 0..n - 1 {
                if remaining == 0 {
                    break;
                }
                let p_cond = if rem_mass > 0.0 {
                    (exact[outcome] / rem_mass).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let c = Binomial::new(remaining, p_cond)
                    .expect("conditional probability in [0,1]")
                    .sample(&mut rng);
                counts[outcome] = c;
                remaining -= c;
                rem_mass -= exact[outcome];
            }
            counts[n - 1] = remaining;
            Ok(counts
                .iter()
                .map(|&c| c as f64 / trials as f64)
                .collect())
        })
        .collect();
    let values: Vec<f64> = rows?.into_iter().flatten().collect();
    DenseMatrix::new(d_total, n, values)
}

/// Result of [`fit_detector_params`].
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub params: DetectorParams,
    /// Final sum of squared residuals.
    pub residual: f64,
    pub iterations: usize,
}

const FIT_MAX_ITERS: usize = 200;

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn sigmoid(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

fn fit_residuals(u: &[f64; 3], bins: usize, schedule: &[f64], measured: &DenseMatrix) -> Vec<f64> {
    let params = DetectorParams {
        r: sigmoid(u[0]),
        eta_loop: sigmoid(u[1]),
        eta_det: sigmoid(u[2]),
        bins,
        p_dark: 0.0,
    };
    let mut res = Vec::with_capacity(schedule.len() * bins);
    for (d, &lam) in schedule.iter().enumerate() {
        let model = bin_click_coherent(&params, lam);
        for (j, &pm) in model.probs().iter().enumerate() {
            res.push(pm - measured.get(d, j));
        }
    }
    res
}

fn solve3(a: &mut [[f64; 4]; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..4 {
                a[row][k] -= f * a[col][k];
            }
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let mut s = a[row][3];
        for k in row + 1..3 {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

/// Least-squares fit of `(R, η_loop, η_det)` to measured coherent bin-click
/// probabilities (`D×J`, row per probe). Gauss–Newton with backtracking and
/// Levenberg damping from the initial guess (0.9, 0.9, 0.5); the parameters
/// stay in (0,1) through a logit reparameterization. Dark counts are
/// neglected in the fit model.
pub fn fit_detector_params(
    schedule: &ProbeSchedule,
    measured_bin_clicks: &DenseMatrix,
) -> Result<FitOutcome> {
    let d = schedule.len();
    let bins = measured_bin_clicks.cols();
    if measured_bin_clicks.rows() != d {
        return Err(Error::DimensionMismatch(format!(
            "schedule has {d} probes, measured data has {} rows",
            measured_bin_clicks.rows()
        )));
    }
    if bins == 0 {
        return Err(Error::InvalidArgument("no time bins in measured data".into()));
    }
    let lit = schedule
        .mean_photons()
        .iter()
        .filter(|&&l| l > 0.0)
        .count();
    if lit < 3 {
        return Err(Error::UnderDetermined(format!(
            "need at least 3 probe states with nonzero light, got {lit}"
        )));
    }
    let lams = schedule.mean_photons();
    let ssr_of = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();

    let mut u = [logit(0.9), logit(0.9), logit(0.5)];
    let mut res = fit_residuals(&u, bins, lams, measured_bin_clicks);
    let mut ssr = ssr_of(&res);
    let mut mu = 0.0f64;
    let mut stalled = 0;
    for iter in 0..FIT_MAX_ITERS {
        // Jacobian by central differences in the logit coordinates.
        let h = 1e-6;
        let mut jac = vec![[0.0f64; 3]; res.len()];
        for c in 0..3 {
            let mut up = u;
            up[c] += h;
            let mut dn = u;
            dn[c] -= h;
            let rp = fit_residuals(&up, bins, lams, measured_bin_clicks);
            let rm = fit_residuals(&dn, bins, lams, measured_bin_clicks);
            for (row, (a, b)) in rp.iter().zip(rm.iter()).enumerate() {
                jac[row][c] = (a - b) / (2.0 * h);
            }
        }
        let mut jtj = [[0.0f64; 3]; 3];
        let mut jtr = [0.0f64; 3];
        for (row, jrow) in jac.iter().enumerate() {
            for a in 0..3 {
                jtr[a] += jrow[a] * res[row];
                for b in 0..3 {
                    jtj[a][b] += jrow[a] * jrow[b];
                }
            }
        }
        let mut improved = false;
        'damping: for _ in 0..12 {
            let mut aug = [[0.0f64; 4]; 3];
            for a in 0..3 {
                for b in 0..3 {
                    aug[a][b] = jtj[a][b] + if a == b { mu } else { 0.0 };
                }
                aug[a][3] = -jtr[a];
            }
            let Some(delta) = solve3(&mut aug) else {
                mu = (mu * 10.0).max(1e-12);
                continue;
            };
            let mut t = 1.0;
            for _ in 0..40 {
                let mut cand = u;
                for c in 0..3 {
                    cand[c] = (cand[c] + t * delta[c]).clamp(-40.0, 40.0);
                }
                let cres = fit_residuals(&cand, bins, lams, measured_bin_clicks);
                let cssr = ssr_of(&cres);
                if cssr < ssr {
                    let rel_gain = (ssr - cssr) / ssr.max(f64::MIN_POSITIVE);
                    u = cand;
                    res = cres;
                    ssr = cssr;
                    mu /= 4.0;
                    if mu < 1e-14 {
                        mu = 0.0;
                    }
                    improved = true;
                    stalled = if rel_gain < 1e-13 { stalled + 1 } else { 0 };
                    break 'damping;
                }
                t *= 0.5;
            }
            mu = (mu * 10.0).max(1e-12);
        }
        let params = DetectorParams {
            r: sigmoid(u[0]),
            eta_loop: sigmoid(u[1]),
            eta_det: sigmoid(u[2]),
            bins,
            p_dark: 0.0,
        };
        if !improved || stalled >= 2 || ssr == 0.0 {
            return Ok(FitOutcome {
                params,
                residual: ssr,
                iterations: iter + 1,
            });
        }
    }
    Err(Error::FitNonConvergence {
        iterations: FIT_MAX_ITERS,
        residual: ssr,
        best: Box::new(DetectorParams {
            r: sigmoid(u[0]),
            eta_loop: sigmoid(u[1]),
            eta_det: sigmoid(u[2]),
            bins,
            p_dark: 0.0,
        }),
    })
}
