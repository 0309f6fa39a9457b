//! Euclidean projections onto the probability simplex.
//!
//! The primary routine is Condat's algorithm (best case O(n), worst case
//! O(n²), O(1) extra memory). The sort-based reference is kept permanently as
//! a test oracle: the projection sits inside every stage-1 line-search step
//! and silent regressions would corrupt reconstructions.

use crate::error::{Error, Result};
use crate::matrix::PovmMatrix;
use rayon::prelude::*;

/// Projects `x` onto `S = {y : y_i ≥ 0, Σ y_i = 1}` in place.
///
/// The output is `max(x_i − τ, 0)` for the threshold `τ` determined by the
/// active support.
pub fn project_simplex_in_place(x: &mut [f64]) {
    let tau = simplex_threshold_condat(x);
    for v in x.iter_mut() {
        *v = (*v - tau).max(0.0);
    }
    debug_assert!(check_projection_optimality(x));
}

/// Euclidean projection onto the probability simplex (Condat's algorithm).
pub fn project_simplex(x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot project an empty vector onto the simplex".into(),
        ));
    }
    let mut y = x.to_vec();
    project_simplex_in_place(&mut y);
    Ok(y)
}

/// Finds the simplex threshold with Condat's candidate-set scheme; the final
/// threshold is recomputed from the support with a compensated sum for
/// accuracy.
fn simplex_threshold_condat(y: &[f64]) -> f64 {
    debug_assert!(!y.is_empty());
    // v holds candidate support values, rho the running (Σv − 1)/|v|.
    let mut v: Vec<f64> = Vec::with_capacity(16);
    let mut v_tilde: Vec<f64> = Vec::new();
    v.push(y[0]);
    let mut rho = y[0] - 1.0;
    for &yn in &y[1..] {
        if yn > rho {
            rho += (yn - rho) / (v.len() + 1) as f64;
            if rho > yn - 1.0 {
                v.push(yn);
            } else {
                v_tilde.append(&mut v);
                v.push(yn);
                rho = yn - 1.0;
            }
        }
    }
    for &yt in &v_tilde {
        if yt > rho {
            v.push(yt);
            rho += (yt - rho) / v.len() as f64;
        }
    }
    loop {
        let before = v.len();
        let mut i = 0;
        while i < v.len() {
            if v[i] <= rho {
                let removed = v.swap_remove(i);
                rho += (rho - removed) / v.len() as f64;
            } else {
                i += 1;
            }
        }
        if v.len() == before {
            break;
        }
    }
    // Recompute the threshold from the resolved support: τ = (Σ_v y − 1)/K.
    // A support that already sums to 1 within rounding noise means the input
    // is feasible; returning τ = 0 keeps the projection exactly idempotent.
    let excess = neumaier_sum(&v) - 1.0;
    if excess.abs() <= 1e-13 {
        0.0
    } else {
        excess / v.len() as f64
    }
}

fn neumaier_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// O(N log N) sort-and-threshold projection, the permanent oracle for the
/// Condat implementation.
pub fn project_simplex_reference(x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot project an empty vector onto the simplex".into(),
        ));
    }
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut k_active = 1;
    for (k, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let tau = (cumsum - 1.0) / (k + 1) as f64;
        if u - tau > 0.0 {
            k_active = k + 1;
        }
    }
    let tau = (neumaier_sum(&sorted[..k_active]) - 1.0) / k_active as f64;
    Ok(x.iter().map(|&v| (v - tau).max(0.0)).collect())
}

/// KKT conditions of the projection subproblem: some τ exists with
/// `y_i = max(x_i − τ, 0)` and `Σ y_i = 1`. After projecting, checking the
/// sum is enough since the output is already in threshold form.
fn check_projection_optimality(y: &[f64]) -> bool {
    let sum = neumaier_sum(y);
    (sum - 1.0).abs() <= 1e-9 * y.len() as f64 && y.iter().all(|&v| v >= 0.0)
}

/// Projects every row of an `M×N` matrix onto the simplex independently.
pub fn project_rows(values: &[f64], m: usize, n: usize) -> Result<PovmMatrix> {
    if values.len() != m * n {
        return Err(Error::DimensionMismatch(format!(
            "expected {m}x{n} values, got {}",
            values.len()
        )));
    }
    let mut out = values.to_vec();
    project_rows_in_place(&mut out, n);
    PovmMatrix::new(m, n, out)
}

/// In-place row-wise projection on a raw buffer (rows of length `n`).
pub fn project_rows_in_place(values: &mut [f64], n: usize) {
    values
        .par_chunks_mut(n)
        .for_each(|row| project_simplex_in_place(row));
}

/// Elementwise `max(0, ·)`, the non-negativity clamp of the stage-2 update.
pub fn clamp_nonneg(values: &mut [f64]) {
    for v in values.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn norm2(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn feasible_point_is_kept() {
        let y = project_simplex(&[0.3, 0.7]).unwrap();
        assert_eq!(y, vec![0.3, 0.7]);
    }

    #[test]
    fn threshold_case() {
        let y = project_simplex(&[2.0, 0.0]).unwrap();
        assert_eq!(y, vec![1.0, 0.0]);
    }

    #[test]
    fn three_point_case_matches_sort_reference() {
        // τ = 0.2/3 on (0.5, 0.4, 0.3)
        let y = project_simplex(&[0.5, 0.4, 0.3]).unwrap();
        let tau = 0.2 / 3.0;
        let expect = [0.5 - tau, 0.4 - tau, 0.3 - tau];
        for (a, b) in y.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
        let r = project_simplex_reference(&[0.5, 0.4, 0.3]).unwrap();
        for (a, b) in y.iter().zip(r.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn reference_symmetric_and_single() {
        assert_eq!(
            project_simplex_reference(&[-1.0, -1.0]).unwrap(),
            vec![0.5, 0.5]
        );
        assert_eq!(project_simplex_reference(&[5.0]).unwrap(), vec![1.0]);
        assert_eq!(project_simplex(&[5.0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn empty_vector_is_an_error() {
        assert!(project_simplex(&[]).is_err());
        assert!(project_simplex_reference(&[]).is_err());
    }

    #[test]
    fn agrees_with_reference_on_random_vectors() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..2000 {
            let n = rng.gen_range(1..=512);
            let scale = 10f64.powi(rng.gen_range(-3..4));
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0) * scale).collect();
            let a = project_simplex(&x).unwrap();
            let b = project_simplex_reference(&x).unwrap();
            for (u, v) in a.iter().zip(b.iter()) {
                assert!(
                    (u - v).abs() <= 1e-12,
                    "condat {u} vs reference {v} (n={n}, scale={scale})"
                );
            }
        }
    }

    #[test]
    fn idempotent() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..500 {
            let n = rng.gen_range(1..=64);
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let once = project_simplex(&x).unwrap();
            let twice = project_simplex(&once).unwrap();
            assert_eq!(once, twice, "projection is not idempotent on {x:?}");
        }
    }

    #[test]
    fn shift_invariant() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let n = rng.gen_range(1..=64);
            // entries on a coarse grid so that adding c stays exact in f64
            let x: Vec<f64> = (0..n)
                .map(|_| rng.gen_range(-1024i64..1024) as f64 / 1024.0)
                .collect();
            let c = 4.0;
            let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
            let a = project_simplex(&x).unwrap();
            let b = project_simplex(&shifted).unwrap();
            for (u, v) in a.iter().zip(b.iter()) {
                assert!((u - v).abs() <= 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn non_expansive(seed in any::<u64>()) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(2..32);
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let z: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let px = project_simplex(&x).unwrap();
            let pz = project_simplex(&z).unwrap();
            prop_assert!(norm2(&px, &pz) <= norm2(&x, &z) + 1e-12);
        }

        #[test]
        fn output_is_feasible(seed in any::<u64>()) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(1..64);
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let y = project_simplex(&x).unwrap();
            prop_assert!(y.iter().all(|&v| v >= 0.0));
            let sum: f64 = y.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12 * n as f64 + 1e-13);
        }
    }

    #[test]
    fn rows_projection_matches_reference_and_is_idempotent() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let (m, n) = (100, 5);
        let vals: Vec<f64> = (0..m * n).map(|_| rng.gen_range(-1.0..2.0)).collect();
        let pi = project_rows(&vals, m, n).unwrap();
        for i in 0..m {
            let r = project_simplex_reference(&vals[i * n..(i + 1) * n]).unwrap();
            for (a, b) in pi.row(i).iter().zip(r.iter()) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
        let again = project_rows(pi.values(), m, n).unwrap();
        assert_eq!(again.values(), pi.values());
    }

    #[test]
    fn all_zero_row_becomes_uniform() {
        let pi = project_rows(&[0.0, 0.0, 0.0, 0.0], 1, 4).unwrap();
        assert_eq!(pi.row(0), &[0.25; 4]);
    }

    #[test]
    fn clamp_examples() {
        let mut v = [-1.0, 2.0];
        clamp_nonneg(&mut v);
        assert_eq!(v, [0.0, 2.0]);
        let mut w = [0.5, 0.0, 3.0];
        let before = w;
        clamp_nonneg(&mut w);
        assert_eq!(w, before);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let x: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut y = x.clone();
            clamp_nonneg(&mut y);
            for (a, b) in x.iter().zip(y.iter()) {
                assert_eq!(*b, a.max(0.0));
            }
        }
    }
}
