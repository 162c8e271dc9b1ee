//! Small dense linear-algebra helpers shared by the solver modules.

use nalgebra::{DMatrix, DVector};

/// Relative singular-value cutoff used for numerical rank.
pub const RANK_TOLERANCE: f64 = 1e-9;

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest absolute difference between `m[(i, j)]` and `m[(j, i)]`.
pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn singular_values(m: &DMatrix<f64>) -> DVector<f64> {
    if m.is_empty() {
        return DVector::zeros(0);
    }
    m.clone().svd(false, false).singular_values
}

/// Number of singular values above `RANK_TOLERANCE * sigma_max`.
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let sv = singular_values(m);
    let smax = sv.iter().cloned().fold(0.0_f64, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_TOLERANCE * smax).count()
}

/// `sigma_min / sigma_max` in the 2-norm; zero for a zero matrix.
pub fn reciprocal_condition(m: &DMatrix<f64>) -> f64 {
    let sv = singular_values(m);
    let smax = sv.iter().cloned().fold(0.0_f64, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if smax == 0.0 || !smax.is_finite() {
        0.0
    } else {
        smin / smax
    }
}

/// Extreme eigenvalues of the symmetric part of `m`, as `(min, max_abs)`.
pub fn symmetric_eigen_extremes(m: &DMatrix<f64>) -> (f64, f64) {
    let eig = symmetrize(m).symmetric_eigen();
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_abs = eig.eigenvalues.iter().map(|v| v.abs()).fold(0.0_f64, f64::max);
    (min, max_abs)
}

/// Positive-definiteness with a tolerance relative to the spectral norm.
pub fn is_positive_definite(m: &DMatrix<f64>, rel_tol: f64) -> (bool, f64) {
    let (min, max_abs) = symmetric_eigen_extremes(m);
    (min > rel_tol * max_abs && min > 0.0, min)
}

pub fn is_positive_semidefinite(m: &DMatrix<f64>, rel_tol: f64) -> bool {
    let (min, max_abs) = symmetric_eigen_extremes(m);
    min >= -rel_tol * max_abs.max(1.0)
}

/// Weighted sum `sum_k w_k M_k`, except that an entry on which every
/// summand agrees exactly is copied through untouched. Keeps quantities
/// that do not depend on the averaged variable bit-for-bit stable when
/// the weights change.
pub fn weighted_mean<'a, I>(items: I, nrows: usize, ncols: usize) -> DMatrix<f64>
where
    I: IntoIterator<Item = (f64, &'a DMatrix<f64>)>,
{
    let items: Vec<(f64, &DMatrix<f64>)> = items.into_iter().filter(|(w, _)| *w != 0.0).collect();
    let mut out = DMatrix::zeros(nrows, ncols);
    if items.is_empty() {
        return out;
    }
    for c in 0..ncols {
        for r in 0..nrows {
            let first = items[0].1[(r, c)];
            if items.iter().all(|(_, m)| m[(r, c)] == first) {
                out[(r, c)] = first;
            } else {
                out[(r, c)] = items.iter().map(|(w, m)| w * m[(r, c)]).sum();
            }
        }
    }
    out
}

pub fn weighted_mean_vec<'a, I>(items: I, len: usize) -> DVector<f64>
where
    I: IntoIterator<Item = (f64, &'a DVector<f64>)>,
{
    let items: Vec<(f64, &DVector<f64>)> = items.into_iter().filter(|(w, _)| *w != 0.0).collect();
    let mut out = DVector::zeros(len);
    if items.is_empty() {
        return out;
    }
    for r in 0..len {
        let first = items[0].1[r];
        if items.iter().all(|(_, v)| v[r] == first) {
            out[r] = first;
        } else {
            out[r] = items.iter().map(|(w, v)| w * v[r]).sum();
        }
    }
    out
}

pub fn weighted_mean_scalar<I>(items: I) -> f64
where
    I: IntoIterator<Item = (f64, f64)>,
{
    let items: Vec<(f64, f64)> = items.into_iter().filter(|(w, _)| *w != 0.0).collect();
    match items.first() {
        None => 0.0,
        Some(&(_, first)) if items.iter().all(|(_, v)| *v == first) => first,
        Some(_) => items.iter().map(|(w, v)| w * v).sum(),
    }
}

/// Relative Frobenius distance `|a - b|_F / max(|a|_F, |b|_F, 1e-300)`.
pub fn relative_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = a.norm().max(b.norm()).max(1e-300);
    (a - b).norm() / scale
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_of_identity_and_zero() {
        assert_eq!(numerical_rank(&DMatrix::identity(3, 3)), 3);
        assert_eq!(numerical_rank(&DMatrix::zeros(3, 2)), 0);
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        assert_eq!(numerical_rank(&m), 1);
    }

    #[test]
    fn rcond_of_diagonal() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 0.5]));
        assert!((reciprocal_condition(&m) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn weighted_mean_keeps_uniform_entries_exact() {
        let a = DMatrix::from_row_slice(1, 2, &[0.1, 1.0]);
        let b = DMatrix::from_row_slice(1, 2, &[0.1, 3.0]);
        let m = weighted_mean([(0.3, &a), (0.7000000000000001, &b)], 1, 2);
        assert_eq!(m[(0, 0)], 0.1);
        assert!((m[(0, 1)] - 2.4).abs() < 1e-12);
    }

    #[test]
    fn positive_definite_detection() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, -1e-3]);
        assert!(!is_positive_definite(&m, 1e-10).0);
        assert!(is_positive_definite(&DMatrix::identity(2, 2), 1e-10).0);
    }
}
