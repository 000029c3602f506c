//! Jacobi matrices: construction from discrete measures and spectral
//! utilities.
//!
//! A measure `μ = Σ w_k δ_{λ_k}` with `d` nodes determines orthonormal
//! polynomials `P_0, …, P_{d-1}` and the recurrence
//! `λ P_m = b_m P_{m-1} + a_m P_m + b_{m+1} P_{m+1}`. The matrix with
//! diagonal `a` and off-diagonal `b > 0` is the matrix of multiplication by
//! `λ` in that basis; its spectral measure at `e_0` is `μ` again.

mod reduction;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::{tridiag_eigen, tridiag_opnorm, EigenVectors};
use crate::measures::{balanced_measure, WeightedDiscreteMeasure};
use crate::polydyn::{BackwardOrbit, ExpandingPolynomial};
use crate::ddmath;
use crate::{Error, Result};

/// Floating point format used by the measure-to-matrix reduction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    Double,
    /// Double-double arithmetic (about 32 significant digits).
    Extended,
}

impl std::str::FromStr for Precision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "double" => Ok(Precision::Double),
            "extended" => Ok(Precision::Extended),
            other => Err(Error::InvalidParameter(format!(
                "precision must be double or extended, got {other}"
            ))),
        }
    }
}

/// Algorithm for [`jacobi_from_measure_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    /// Givens reduction of the bordered diagonal matrix.
    #[default]
    Rotation,
    /// Lanczos with full reorthogonalization; a cross-check.
    Lanczos,
}

/// Symmetric tridiagonal matrix with diagonal `a_0..a_{d-1}` and strictly
/// positive off-diagonal `b_1..b_{d-1}`; `b()[m]` couples rows `m` and
/// `m + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobiMatrix {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl JacobiMatrix {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.is_empty() || b.len() + 1 != a.len() {
            return Err(Error::InvalidParameter(format!(
                "Jacobi matrix needs d >= 1 diagonal and d - 1 off-diagonal entries, got {} and {}",
                a.len(),
                b.len()
            )));
        }
        if a.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("diagonal must be finite".into()));
        }
        if let Some(i) = b.iter().position(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "off-diagonal entry {} must be positive, got {}",
                i + 1,
                b[i]
            )));
        }
        Ok(JacobiMatrix { a, b })
    }

    /// The `1 × 1` matrix `[x]`.
    pub fn scalar(x: f64) -> Self {
        JacobiMatrix {
            a: vec![x],
            b: vec![],
        }
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        for i in 0..d {
            m[(i, i)] = self.a[i];
        }
        for (i, &b) in self.b.iter().enumerate() {
            m[(i, i + 1)] = b;
            m[(i + 1, i)] = b;
        }
        m
    }

    pub fn opnorm(&self) -> f64 {
        tridiag_opnorm(&self.a, &self.b)
    }

    /// `‖J - K‖` for matrices of equal size.
    pub fn distance(&self, other: &JacobiMatrix) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(Error::InvalidParameter(format!(
                "sizes differ: {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        let da: Vec<f64> = self.a.iter().zip(&other.a).map(|(x, y)| x - y).collect();
        let db: Vec<f64> = self.b.iter().zip(&other.b).map(|(x, y)| x - y).collect();
        Ok(tridiag_opnorm(&da, &db))
    }

    /// `max|Δa| + 2·max|Δb|` over rows `0..window`, an upper bound for the
    /// operator norm of the truncated difference.
    pub fn coeff_distance(&self, other: &JacobiMatrix, window: usize) -> f64 {
        let w = window.min(self.dim()).min(other.dim());
        let da = (0..w).fold(0.0_f64, |m, i| m.max((self.a[i] - other.a[i]).abs()));
        let db = (0..w.saturating_sub(1)).fold(0.0_f64, |m, i| m.max((self.b[i] - other.b[i]).abs()));
        da + 2.0 * db
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(tridiag_eigen(&self.a, &self.b, EigenVectors::None)?.values)
    }

    pub fn spectral_data(&self) -> Result<SpectralData> {
        let eig = tridiag_eigen(&self.a, &self.b, EigenVectors::Full)?;
        Ok(SpectralData {
            eigenvalues: eig.values,
            eigvec_matrix: eig.vectors.expect("full vectors requested"),
            first_components: eig.first_row,
        })
    }

    /// CSV `index,a,b` where `b` on row `m` is the coupling of rows `m - 1`
    /// and `m` (empty on row 0). Values round-trip exactly.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,a,b\n");
        for m in 0..self.dim() {
            if m == 0 {
                out.push_str(&format!("0,{},\n", self.a[0]));
            } else {
                out.push_str(&format!("{m},{},{}\n", self.a[m], self.b[m - 1]));
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |line: &str| Error::InvalidParameter(format!("malformed Jacobi CSV row: {line}"));
        let mut a = Vec::new();
        let mut b = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#')).skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(bad(line));
            }
            a.push(fields[1].trim().parse::<f64>().map_err(|_| bad(line))?);
            if !a.is_empty() && a.len() > 1 {
                b.push(fields[2].trim().parse::<f64>().map_err(|_| bad(line))?);
            }
        }
        JacobiMatrix::new(a, b)
    }
}

/// Eigen-decomposition `J = Q Λ Qᵀ` with the first row of `Q` non-negative.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub eigenvalues: Vec<f64>,
    /// Columns are eigenvectors.
    pub eigvec_matrix: DMatrix<f64>,
    pub first_components: Vec<f64>,
}

/// Jacobi matrix of `mu` by the rotation reduction in double precision.
pub fn jacobi_from_measure(mu: &WeightedDiscreteMeasure) -> Result<JacobiMatrix> {
    reduction::reduce(mu, Precision::Double, Reduction::Rotation)
}

pub fn jacobi_from_measure_with(
    mu: &WeightedDiscreteMeasure,
    precision: Precision,
    method: Reduction,
) -> Result<JacobiMatrix> {
    reduction::reduce(mu, precision, method)
}

/// Jacobi matrix of the balanced measure of `orbit` at parameter `t`.
///
/// In extended precision the nodes, `|T'|` and the weights are carried in
/// double-double before the reduction, so the result is accurate to the
/// last bit of `f64` even where the inverse problem amplifies input noise.
pub fn balanced_jacobi(
    p: &ExpandingPolynomial,
    orbit: &BackwardOrbit,
    t: f64,
    precision: Precision,
) -> Result<JacobiMatrix> {
    match precision {
        Precision::Double => jacobi_from_measure(&balanced_measure(orbit, t)?),
        Precision::Extended => {
            let (nodes, tp) = orbit.refine_extended(p);
            let q: Vec<_> = tp.into_iter().map(|x| ddmath::powf(x, -0.5 * t)).collect();
            reduction::reduce_extended(&nodes, &q)
        }
    }
}

/// Spectral measure at `e_0`: eigenvalues with squared first eigenvector
/// components.
pub fn spectral_measure(j: &JacobiMatrix) -> Result<WeightedDiscreteMeasure> {
    let eig = tridiag_eigen(j.a(), j.b(), EigenVectors::FirstRow)?;
    let raw: Vec<f64> = eig
        .first_row
        .iter()
        .map(|q| 2.0 * q.abs().max(f64::MIN_POSITIVE).ln())
        .collect();
    let total = crate::stats::log_sum_exp(&raw);
    Ok(WeightedDiscreteMeasure::from_parts(
        eig.values,
        raw.iter().map(|w| w - total).collect(),
    ))
}

/// `⟨(z - J)^{-1} e_0, e_0⟩` by the continued fraction
/// `1/(z - a_0 - b_1²/(z - a_1 - …))`, evaluated from the bottom.
pub fn resolvent_00(j: &JacobiMatrix, z: Complex64) -> Result<Complex64> {
    let pole = || Error::ResolventPole { re: z.re, im: z.im };
    if z.im.abs() <= 1e-13 {
        let eig = j.eigenvalues()?;
        if eig.iter().any(|l| (l - z.re).abs() <= 1e-13 * l.abs().max(1.0)) {
            return Err(pole());
        }
    }
    let d = j.dim();
    let mut g = z - j.a[d - 1];
    for m in (0..d - 1).rev() {
        if g == Complex64::new(0.0, 0.0) {
            g = Complex64::new(f64::MIN_POSITIVE, 0.0);
        }
        g = z - j.a[m] - j.b[m] * j.b[m] / g;
    }
    if g.norm() == 0.0 {
        return Err(pole());
    }
    Ok(g.inv())
}

/// `∫ dμ(λ)/(z - λ)` computed directly.
pub fn stieltjes_transform(mu: &WeightedDiscreteMeasure, z: Complex64) -> Complex64 {
    mu.nodes()
        .iter()
        .zip(mu.log_weights())
        .map(|(l, w)| w.exp() / (z - l))
        .sum()
}

/// Orthonormal polynomial values `P_0(λ), …, P_{d-1}(λ)` and derivatives from
/// the three-term recurrence and its derivative.
pub fn ortho_polys_at(j: &JacobiMatrix, lambda: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = j.dim();
    let mut p = vec![0.0; d];
    let mut dp = vec![0.0; d];
    p[0] = 1.0;
    for m in 0..d - 1 {
        let prev = if m > 0 { j.b[m - 1] * p[m - 1] } else { 0.0 };
        let dprev = if m > 0 { j.b[m - 1] * dp[m - 1] } else { 0.0 };
        p[m + 1] = ((lambda - j.a[m]) * p[m] - prev) / j.b[m];
        dp[m + 1] = (p[m] + (lambda - j.a[m]) * dp[m] - dprev) / j.b[m];
        if !(p[m + 1].is_finite() && dp[m + 1].is_finite()) {
            return Err(Error::RecurrenceOverflow { lambda });
        }
    }
    Ok((p, dp))
}
