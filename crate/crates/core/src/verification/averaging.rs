use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{PepError, Result};

/// Symmetric generalized doubly stochastic matrix with spectrum
/// `{1} ∪ eigs`. The eigenvector of `1` is the normalized all-ones vector;
/// the remaining eigenvectors are a seeded random orthonormal completion.
pub fn make_averaging_matrix(n: usize, eigs: &[f64], seed: u64) -> Result<DMatrix<f64>> {
    if n < 2 || eigs.len() != n - 1 {
        return Err(PepError::InvalidParameter(format!(
            "need N >= 2 and N-1 eigenvalues, got N={n} with {}",
            eigs.len()
        )));
    }
    if let Some(e) = eigs.iter().find(|e| !(e.abs() < 1.0)) {
        return Err(PepError::InvalidParameter(format!("eigenvalue {e} outside (-1, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    m.set_column(0, &DVector::from_element(n, 1.0));
    let mut q = m.qr().q();
    // QR fixes the first column only up to sign
    if q[(0, 0)] < 0.0 {
        q.column_mut(0).neg_mut();
    }
    let mut diag = DVector::from_element(n, 1.0);
    diag.rows_mut(1, n - 1).copy_from_slice(eigs);
    let w = &q * DMatrix::from_diagonal(&diag) * q.transpose();
    Ok((&w + w.transpose()) * 0.5)
}

/// `n - 1` eigenvalues drawn uniformly from `[lo, hi]`, with both endpoints
/// always present when `n >= 3` (worst cases sit at the ends of the range).
pub fn sample_spectrum(n: usize, lo: f64, hi: f64, rng: &mut impl Rng) -> Vec<f64> {
    let mut eigs: Vec<f64> = (0..n - 1).map(|_| rng.gen_range(lo..=hi)).collect();
    if n >= 3 {
        eigs[0] = lo;
        eigs[1] = hi;
    } else if rng.gen_bool(0.5) {
        eigs[0] = if rng.gen_bool(0.5) { lo } else { hi };
    }
    eigs
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::SymmetricEigen;

    #[test]
    fn two_agents_closed_form() {
        let a = 0.37;
        let w = make_averaging_matrix(2, &[a], 3).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[(1.0 + a) / 2.0, (1.0 - a) / 2.0, (1.0 - a) / 2.0, (1.0 + a) / 2.0]);
        assert_relative_eq!(w, expected, epsilon = 1e-14);
    }

    #[test]
    fn stochastic_symmetric_and_spectrum() {
        for (n, seed) in [(3, 1), (5, 2), (8, 3)] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let eigs = sample_spectrum(n, -0.6, 0.9, &mut rng);
            let w = make_averaging_matrix(n, &eigs, seed).unwrap();
            assert_eq!(w, w.transpose());
            for i in 0..n {
                assert!((w.row(i).sum() - 1.0).abs() < 1e-12);
            }
            let mut got: Vec<f64> = SymmetricEigen::new(w).eigenvalues.iter().copied().collect();
            let mut want = eigs.clone();
            want.push(1.0);
            got.sort_by(f64::total_cmp);
            want.sort_by(f64::total_cmp);
            for (g, e) in got.iter().zip(&want) {
                assert!((g - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lazy_limit() {
        let w = make_averaging_matrix(4, &[1.0 - 1e-9; 3], 7).unwrap();
        assert!((w - DMatrix::identity(4, 4)).amax() < 1e-8);
    }

    #[test]
    fn same_seed_same_matrix() {
        let a = make_averaging_matrix(5, &[0.1, 0.2, -0.3, 0.4], 11).unwrap();
        let b = make_averaging_matrix(5, &[0.1, 0.2, -0.3, 0.4], 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(make_averaging_matrix(1, &[], 0).is_err());
        assert!(make_averaging_matrix(3, &[0.5], 0).is_err());
        assert!(make_averaging_matrix(2, &[1.0], 0).is_err());
    }
}
