//! Dense and tridiagonal kernels: symmetric tridiagonal QL, Sturm bisection,
//! operator norms.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Which eigenvector data the tridiagonal solver accumulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenVectors {
    None,
    /// First components only (Golub–Welsch weights), `O(d^2)`.
    FirstRow,
    /// Full orthogonal matrix, `O(d^3)`.
    Full,
}

/// Eigen-decomposition of a symmetric tridiagonal matrix, eigenvalues sorted
/// increasingly.
#[derive(Debug, Clone)]
pub struct TridiagEigen {
    pub values: Vec<f64>,
    /// `first_row[i]` is component 0 of eigenvector `i`, made non-negative.
    pub first_row: Vec<f64>,
    /// Columns are eigenvectors; present for [`EigenVectors::Full`].
    pub vectors: Option<DMatrix<f64>>,
}

/// Implicit QL with Wilkinson shifts on the tridiagonal `(diag, off)`, where
/// `off[i]` couples rows `i` and `i + 1`.
pub fn tridiag_eigen(diag: &[f64], off: &[f64], want: EigenVectors) -> Result<TridiagEigen> {
    let n = diag.len();
    assert_eq!(off.len() + 1, n.max(1), "off-diagonal length must be d - 1");
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n.saturating_sub(1)].copy_from_slice(off);
    let mut first = vec![0.0; n];
    if n > 0 {
        first[0] = 1.0;
    }
    let mut z = match want {
        EigenVectors::Full => Some(DMatrix::<f64>::identity(n, n)),
        _ => None,
    };
    let track_first = want == EigenVectors::FirstRow;

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 100 {
                return Err(Error::NoConvergence { index: l });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if track_first {
                    let f0 = first[i + 1];
                    first[i + 1] = s * first[i] + c * f0;
                    first[i] = c * first[i] - s * f0;
                }
                if let Some(z) = z.as_mut() {
                    for k in 0..n {
                        let fk = z[(k, i + 1)];
                        z[(k, i + 1)] = s * z[(k, i)] + c * fk;
                        z[(k, i)] = c * z[(k, i)] - s * fk;
                    }
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values = order.iter().map(|&i| d[i]).collect();
    let vectors = z.map(|z| {
        let mut sorted = DMatrix::<f64>::zeros(n, n);
        for (col, &i) in order.iter().enumerate() {
            let sign = if z[(0, i)] < 0.0 { -1.0 } else { 1.0 };
            for k in 0..n {
                sorted[(k, col)] = sign * z[(k, i)];
            }
        }
        sorted
    });
    let first_row = match &vectors {
        Some(v) => (0..n).map(|i| v[(0, i)]).collect(),
        None => order.iter().map(|&i| first[i].abs()).collect(),
    };
    Ok(TridiagEigen {
        values,
        first_row,
        vectors,
    })
}

/// Number of eigenvalues of the symmetric tridiagonal `(diag, off)` below `x`.
pub fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..diag.len() {
        let coupling = if i == 0 { 0.0 } else { off[i - 1] * off[i - 1] };
        q = diag[i] - x - if i == 0 { 0.0 } else { coupling / q };
        if q == 0.0 {
            q = -f64::EPSILON * (diag[i].abs() + x.abs()).max(f64::MIN_POSITIVE);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Smallest and largest eigenvalues of a symmetric tridiagonal matrix by
/// Sturm-sequence bisection.
pub fn tridiag_extreme_eigenvalues(diag: &[f64], off: &[f64]) -> (f64, f64) {
    let n = diag.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let left = if i > 0 { off[i - 1].abs() } else { 0.0 };
        let right = if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - left - right);
        hi = hi.max(diag[i] + left + right);
    }
    let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    let bisect = |k: usize| {
        // k-th smallest eigenvalue (0-based)
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if b - a <= 2.0 * f64::EPSILON * scale {
                break;
            }
            if sturm_count(diag, off, mid) > k {
                b = mid;
            } else {
                a = mid;
            }
        }
        0.5 * (a + b)
    };
    (bisect(0), bisect(n - 1))
}

/// Operator norm of a symmetric tridiagonal matrix.
pub fn tridiag_opnorm(diag: &[f64], off: &[f64]) -> f64 {
    let (lo, hi) = tridiag_extreme_eigenvalues(diag, off);
    lo.abs().max(hi.abs())
}

fn is_symmetric(m: &DMatrix<f64>) -> bool {
    if !m.is_square() {
        return false;
    }
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            if m[(i, j)] != m[(j, i)] {
                return false;
            }
        }
    }
    true
}

/// Above this dimension dense norms use Lanczos on the Gram operator.
pub const DENSE_NORM_LIMIT: usize = 512;

/// Largest singular value. Symmetric input uses the largest |eigenvalue|;
/// large matrices use Lanczos on `MᵀM`.
pub fn opnorm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    if m.nrows().max(m.ncols()) > DENSE_NORM_LIMIT {
        return gram_lanczos_norm(m, 80);
    }
    if is_symmetric(m) {
        m.clone()
            .symmetric_eigenvalues()
            .iter()
            .fold(0.0_f64, |a, v| a.max(v.abs()))
    } else {
        m.singular_values().max()
    }
}

/// `σ_max(M)` from the largest Ritz value of `MᵀM` after `steps` Lanczos
/// steps with full reorthogonalization.
pub fn gram_lanczos_norm(m: &DMatrix<f64>, steps: usize) -> f64 {
    let n = m.ncols();
    let steps = steps.min(n);
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(steps);
    let mut alpha = Vec::with_capacity(steps);
    let mut beta: Vec<f64> = Vec::with_capacity(steps);
    // Deterministic start vector with no special alignment.
    let mut v = DVector::from_fn(n, |i, _| 1.0 + ((i * 7919) % 97) as f64 / 97.0);
    v /= v.norm();
    let mut last_estimate = 0.0;
    for k in 0..steps {
        let mv = m * &v;
        let mut w = m.transpose() * mv;
        let a = w.dot(&v);
        alpha.push(a);
        w -= a * &v;
        if k > 0 {
            w -= beta[k - 1] * &basis[k - 1];
        }
        for q in basis.iter().chain(std::iter::once(&v)) {
            let proj = w.dot(q);
            w -= proj * q;
        }
        basis.push(v.clone());
        let b = w.norm();
        let (_, top) = tridiag_extreme_eigenvalues(&alpha, &beta);
        if b <= 1e-14 * top.abs().max(f64::MIN_POSITIVE)
            || (k > 4 && (top - last_estimate).abs() <= 1e-15 * top.abs())
        {
            return top.max(0.0).sqrt();
        }
        last_estimate = top;
        beta.push(b);
        v = w / b;
    }
    let (_, top) = tridiag_extreme_eigenvalues(&alpha, &beta[..alpha.len() - 1]);
    top.max(0.0).sqrt()
}

/// `AB - BA`.
pub fn commutator(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a * b - b * a
}

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn opnorm_examples() {
        assert_relative_eq!(opnorm(&DMatrix::identity(5, 5)), 1.0, epsilon = 1e-14);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, -7.0]));
        assert_relative_eq!(opnorm(&d), 7.0, epsilon = 1e-14);
        let j = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert_relative_eq!(opnorm(&j), 1.0, epsilon = 1e-14);
        assert_relative_eq!(tridiag_opnorm(&[0.0, 0.0], &[1.0]), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn lanczos_agrees_with_svd() {
        let m = DMatrix::from_fn(60, 60, |i, j| {
            ((i * 31 + j * 17) % 23) as f64 / 23.0 - 0.4 + if i == j { 2.0 } else { 0.0 }
        });
        let svd = m.singular_values().max();
        assert_relative_eq!(gram_lanczos_norm(&m, 80), svd, max_relative = 1e-10);
    }

    #[test]
    fn ql_matches_dense_solver() {
        let diag = [0.3, -0.2, 0.5, 0.1, -0.7, 0.0];
        let off = [0.4, 0.3, 0.2, 0.6, 0.1];
        let eig = tridiag_eigen(&diag, &off, EigenVectors::Full).unwrap();
        let mut dense = DMatrix::<f64>::zeros(6, 6);
        for i in 0..6 {
            dense[(i, i)] = diag[i];
            if i < 5 {
                dense[(i, i + 1)] = off[i];
                dense[(i + 1, i)] = off[i];
            }
        }
        let mut reference: Vec<f64> = dense.clone().symmetric_eigenvalues().iter().cloned().collect();
        reference.sort_by(|a, b| a.total_cmp(b));
        for (a, b) in eig.values.iter().zip(&reference) {
            assert_relative_eq!(a, b, epsilon = 1e-13);
        }
        let q = eig.vectors.unwrap();
        let recon = &q * DMatrix::from_diagonal(&DVector::from_vec(eig.values.clone())) * q.transpose();
        assert!(max_abs(&(recon - dense)) < 1e-13);
        let first = tridiag_eigen(&diag, &off, EigenVectors::FirstRow).unwrap();
        for i in 0..6 {
            assert_relative_eq!(first.first_row[i], q[(0, i)], epsilon = 1e-12);
        }
    }

    #[test]
    fn sturm_extremes() {
        let (lo, hi) = tridiag_extreme_eigenvalues(&[2.0, 2.0, 2.0], &[-1.0, -1.0]);
        assert_relative_eq!(lo, 2.0 - 2f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(hi, 2.0 + 2f64.sqrt(), epsilon = 1e-14);
    }
}
