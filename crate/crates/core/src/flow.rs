//! The x-derivative of `J(x)`: the operators `F(J)`, `D`, `H`, `G` with
//! `dJ/dx = F(J) + [G, J]`, the commutator identity for `D`, and the
//! closed form of `R = 𝒫^{-1} D F 𝒫`.
//!
//! Notation: `λ_i` are the nodes, `w_i` the weights of `μ_x`,
//! `𝒫_{ki} = P_k(λ_i)` and `ℙ_{ki} = P_k(λ_i) √w_i`, an orthogonal matrix
//! with `J ℙ = ℙ Λ`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::jacobi::{balanced_jacobi, ortho_polys_at, JacobiMatrix, Precision};
use crate::linalg::{commutator, max_abs, opnorm};
use crate::measures::balanced_measure;
use crate::polydyn::{backward_orbit, BackwardOrbit, ExpandingPolynomial};
use crate::{Error, Result};

/// Largest dimension for the dense flow computations.
pub const MAX_FLOW_DIM: usize = 256;

#[derive(Debug, Clone)]
pub struct FlowOperators {
    pub t: f64,
    pub orbit: BackwardOrbit,
    pub jacobi: JacobiMatrix,
    pub weights: Vec<f64>,
    /// `P_k(λ_i)` in row `k`, column `i`.
    pub pmat: DMatrix<f64>,
    /// `P'_k(λ_i)`.
    pub pmat_prime: DMatrix<f64>,
    /// Orthogonal diagonalizer with positive first row.
    pub ppmat: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub f_of_j: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub k: DMatrix<f64>,
    /// `φ'(λ_i) = -t T''(λ_i)/T'(λ_i)`.
    pub phi_prime_diag: Vec<f64>,
}

impl FlowOperators {
    pub fn dim(&self) -> usize {
        self.jacobi.dim()
    }

    /// `F(J) + [G, J]`.
    pub fn j_dot(&self) -> DMatrix<f64> {
        &self.f_of_j + commutator(&self.g, &self.jacobi.to_dense())
    }

    /// `[G, J]`.
    pub fn g_commutator(&self) -> DMatrix<f64> {
        commutator(&self.g, &self.jacobi.to_dense())
    }

    /// `max |ℙᵀℙ - I|`.
    pub fn orthogonality_defect(&self) -> f64 {
        let d = self.dim();
        max_abs(&(self.ppmat.transpose() * &self.ppmat - DMatrix::identity(d, d)))
    }
}

/// Strictly upper triangular part (row < column).
fn strict_upper(m: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| if i < j { m[(i, j)] } else { 0.0 })
}

pub fn build_flow_ops(p: &ExpandingPolynomial, n: usize, t: f64, x: f64) -> Result<FlowOperators> {
    build_flow_ops_with(p, n, t, x, Precision::Double)
}

pub fn build_flow_ops_with(
    p: &ExpandingPolynomial,
    n: usize,
    t: f64,
    x: f64,
    precision: Precision,
) -> Result<FlowOperators> {
    let orbit = backward_orbit(p, n, x)?;
    if orbit.len() > MAX_FLOW_DIM {
        return Err(Error::CapExceeded {
            requested: orbit.len(),
            cap: MAX_FLOW_DIM,
        });
    }
    let mu = balanced_measure(&orbit, t)?;
    let jacobi = balanced_jacobi(p, &orbit, t, precision)?;
    let d = orbit.len();
    let nodes = orbit.nodes();
    let weights = mu.weights();

    let mut pmat = DMatrix::zeros(d, d);
    let mut pmat_prime = DMatrix::zeros(d, d);
    for i in 0..d {
        let (vals, ders) = ortho_polys_at(&jacobi, nodes[i])?;
        for k in 0..d {
            pmat[(k, i)] = vals[k];
            pmat_prime[(k, i)] = ders[k];
        }
    }
    let sqrt_w = DVector::from_iterator(d, weights.iter().map(|w| w.sqrt()));
    let ppmat = DMatrix::from_fn(d, d, |k, i| pmat[(k, i)] * sqrt_w[i]);

    let inv_tp: Vec<f64> = (0..d).map(|i| orbit.inv_tprime(i)).collect();
    let phi_prime_diag: Vec<f64> = orbit.tsecond_over_tprime().iter().map(|r| -t * r).collect();
    let conj = |diag: &[f64]| {
        let scaled = DMatrix::from_fn(d, d, |k, i| ppmat[(k, i)] * diag[i]);
        &scaled * ppmat.transpose()
    };
    let f_of_j = conj(&inv_tp);
    let half_phi_f: Vec<f64> = (0..d).map(|i| 0.5 * phi_prime_diag[i] * inv_tp[i]).collect();

    // D_{km} = Σ_i w_i P'_k(λ_i) P_m(λ_i)
    let weighted_prime = DMatrix::from_fn(d, d, |k, i| pmat_prime[(k, i)] * weights[i]);
    let dmat = &weighted_prime * pmat.transpose();
    let df = &dmat * &f_of_j;
    let h = &df + conj(&half_phi_f);
    let upper = strict_upper(&h);
    let g = &upper - upper.transpose();

    let k = ppmat.transpose() * &df * &ppmat;
    let r = DMatrix::from_fn(d, d, |i, j| k[(i, j)] * sqrt_w[i] / sqrt_w[j]);

    Ok(FlowOperators {
        t,
        orbit,
        jacobi,
        weights,
        pmat,
        pmat_prime,
        ppmat,
        d: dmat,
        f_of_j,
        h,
        g,
        r,
        k,
        phi_prime_diag,
    })
}

/// Residuals of `[J, D] = I - c ⟨·, F^{-1} e_0⟩ e_{d-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DIdentityReport {
    pub dim: usize,
    /// `max |[J, D] - I|` over rows `0..d-1`.
    pub rows_residual: f64,
    /// Fitted constant `c`.
    pub c: f64,
    /// `max |row_{d-1}([J,D] - I) + c (F^{-1}e_0)ᵀ| / max |row_{d-1}|`.
    pub last_row_residual: f64,
    /// `max_i |c w_i P_{d-1}(λ_i) T'(λ_i) - 1|`.
    pub lar2_residual: f64,
    /// `max |([J, DF] - F) e_m|` over columns `m ≥ 1`.
    pub dfeq_residual: f64,
    /// `true` for `d = 1`, where both sides vanish and nothing is checked.
    pub degenerate: bool,
}

impl DIdentityReport {
    pub fn max_residual(&self) -> f64 {
        self.rows_residual
            .max(self.last_row_residual)
            .max(self.lar2_residual)
            .max(self.dfeq_residual)
    }
}

pub fn verify_d_identity(ops: &FlowOperators) -> DIdentityReport {
    let d = ops.dim();
    if d == 1 {
        return DIdentityReport {
            dim: 1,
            rows_residual: 0.0,
            c: 0.0,
            last_row_residual: 0.0,
            lar2_residual: 0.0,
            dfeq_residual: 0.0,
            degenerate: true,
        };
    }
    let j = ops.jacobi.to_dense();
    let defect = commutator(&j, &ops.d) - DMatrix::identity(d, d);
    let rows_residual = max_abs(&defect.rows(0, d - 1).into_owned());

    // (F^{-1} e_0)_m = Σ_i w_i T'(λ_i) P_m(λ_i)
    let v: Vec<f64> = (0..d)
        .map(|m| (0..d).map(|i| ops.weights[i] * ops.orbit.tprime(i) * ops.pmat[(m, i)]).sum())
        .collect();
    let row: Vec<f64> = (0..d).map(|m| defect[(d - 1, m)]).collect();
    let vv: f64 = v.iter().map(|x| x * x).sum();
    let c = -row.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() / vv;
    let scale = row.iter().fold(0.0_f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
    let last_row_residual = row
        .iter()
        .zip(&v)
        .fold(0.0_f64, |m, (a, b)| m.max((a + c * b).abs()))
        / scale;
    let lar2_residual = (0..d)
        .map(|i| (c * ops.weights[i] * ops.pmat[(d - 1, i)] * ops.orbit.tprime(i) - 1.0).abs())
        .fold(0.0, f64::max);

    let dfeq = commutator(&j, &(&ops.d * &ops.f_of_j)) - &ops.f_of_j;
    let dfeq_residual = max_abs(&dfeq.columns(1, d - 1).into_owned());

    DIdentityReport {
        dim: d,
        rows_residual,
        c,
        last_row_residual,
        lar2_residual,
        dfeq_residual,
        degenerate: false,
    }
}

/// `r_ij = 1/(T'(λ_i)(λ_j - λ_i))` for `i ≠ j`, `r_ii = T''(λ_i)/(2 T'(λ_i)²)`.
///
/// The off-diagonal sign follows from `[Λ, R] = F(Λ) - v 1ᵀ` with
/// `v_i = 1/T'(λ_i)`; it is the only sign compatible with zero column sums
/// and the diagonal above.
pub fn r_closed_form(orbit: &BackwardOrbit) -> DMatrix<f64> {
    r_closed_form_signed(orbit, -1.0)
}

fn r_closed_form_signed(orbit: &BackwardOrbit, off_sign: f64) -> DMatrix<f64> {
    let d = orbit.len();
    let nodes = orbit.nodes();
    DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            0.5 * orbit.tsecond_over_tprime()[i] * orbit.inv_tprime(i)
        } else {
            off_sign * orbit.inv_tprime(i) / (nodes[i] - nodes[j])
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RReport {
    pub dim: usize,
    /// `max |R - R_closed|`.
    pub entry_residual: f64,
    /// `max_j |Σ_i R_ij|`.
    pub column_sum: f64,
    /// Deviation of `[Λ, R]` from `-1/T'(λ_i)` off the diagonal and 0 on it.
    pub lambda_commutator_residual: f64,
    /// `max |R - R'|` where `R'` flips the off-diagonal sign; reported only.
    pub flipped_sign_residual: f64,
}

impl RReport {
    pub fn max_residual(&self) -> f64 {
        self.entry_residual
            .max(self.column_sum)
            .max(self.lambda_commutator_residual)
    }
}

pub fn verify_r_closed_form(ops: &FlowOperators) -> RReport {
    let d = ops.dim();
    let closed = r_closed_form(&ops.orbit);
    let entry_residual = max_abs(&(&ops.r - &closed));
    let column_sum = (0..d)
        .map(|j| ops.r.column(j).sum().abs())
        .fold(0.0, f64::max);
    let nodes = ops.orbit.nodes();
    let mut lambda_commutator_residual: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let value = (nodes[i] - nodes[j]) * ops.r[(i, j)];
            let expect = if i == j { 0.0 } else { -ops.orbit.inv_tprime(i) };
            lambda_commutator_residual = lambda_commutator_residual.max((value - expect).abs());
        }
    }
    RReport {
        dim: d,
        entry_residual,
        column_sum,
        lambda_commutator_residual,
        flipped_sign_residual: max_abs(&(&ops.r - r_closed_form_signed(&ops.orbit, 1.0))),
    }
}

/// `(J(x+h) - J(x-h))/(2h)` as a dense matrix.
pub fn central_difference(
    p: &ExpandingPolynomial,
    n: usize,
    t: f64,
    x: f64,
    h: f64,
    precision: Precision,
) -> Result<DMatrix<f64>> {
    if !(x - h >= -1.0 && x + h <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "x ± h = {x} ± {h} leaves [-1, 1]"
        )));
    }
    let at = |y: f64| -> Result<DMatrix<f64>> {
        Ok(balanced_jacobi(p, &backward_orbit(p, n, y)?, t, precision)?.to_dense())
    };
    Ok((at(x + h)? - at(x - h)?) / (2.0 * h))
}

/// `‖(J(x+h) - J(x-h))/(2h) - F(J(x)) - [G(x), J(x)]‖`.
pub fn flow_residual(p: &ExpandingPolynomial, n: usize, t: f64, x: f64, h: f64) -> Result<f64> {
    let ops = build_flow_ops_with(p, n, t, x, Precision::Extended)?;
    flow_residual_with(&ops, p, h)
}

pub fn flow_residual_with(ops: &FlowOperators, p: &ExpandingPolynomial, h: f64) -> Result<f64> {
    let fd = central_difference(
        p,
        ops.orbit.level(),
        ops.t,
        ops.orbit.base_point(),
        h,
        Precision::Extended,
    )?;
    Ok(opnorm(&(fd - ops.j_dot())))
}

/// `max_m |[G,J]_{m,m-1} - (b_m H_{mm} - b_{m-1} H_{m-1,m-1})|` with
/// `b_0 = 0`, compared by callers against the budget `10 ‖F(J)‖`.
pub fn tridiagonal_reduction_defect(ops: &FlowOperators) -> f64 {
    let gj = ops.g_commutator();
    let b = ops.jacobi.b();
    let mut worst: f64 = 0.0;
    for m in 1..ops.dim() {
        let bm = b[m - 1];
        let bm1 = if m >= 2 { b[m - 2] } else { 0.0 };
        let value = gj[(m, m - 1)] - (bm * ops.h[(m, m)] - bm1 * ops.h[(m - 1, m - 1)]);
        worst = worst.max(value.abs());
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommutatorRow {
    pub n: usize,
    pub t: f64,
    pub x: f64,
    pub dim: usize,
    pub norm_gj: f64,
    pub norm_f: f64,
    pub norm_g: f64,
    pub norm_jdot_fd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommutatorSummary {
    pub t: f64,
    pub max_all: f64,
    pub max_small_n: f64,
    pub ratio: f64,
}

/// `‖[G, J]‖`, `‖F(J)‖`, `‖G‖` and the finite difference `‖J̇‖` over a grid.
/// Grid points run in parallel; row order is `t`, then `n`, then `x`.
pub fn commutator_uniformity_scan(
    p: &ExpandingPolynomial,
    t_grid: &[f64],
    n_range: (usize, usize),
    x_grid: &[f64],
    h: f64,
) -> Result<Vec<CommutatorRow>> {
    let mut points = Vec::new();
    for &t in t_grid {
        for n in n_range.0..=n_range.1 {
            for &x in x_grid {
                points.push((t, n, x));
            }
        }
    }
    points
        .par_iter()
        .map(|&(t, n, x)| {
            let ops = build_flow_ops(p, n, t, x)?;
            let fd = central_difference(p, n, t, x, h, Precision::Double)?;
            Ok(CommutatorRow {
                n,
                t,
                x,
                dim: ops.dim(),
                norm_gj: opnorm(&ops.g_commutator()),
                norm_f: opnorm(&ops.f_of_j),
                norm_g: opnorm(&ops.g),
                norm_jdot_fd: opnorm(&fd),
            })
        })
        .collect()
}

/// Per-`t` maxima of `‖[G,J]‖` over all `n` and over `n ≤ small_n_max`.
pub fn summarize_commutator(rows: &[CommutatorRow], small_n_max: usize) -> Vec<CommutatorSummary> {
    let mut ts: Vec<f64> = Vec::new();
    for r in rows {
        if !ts.contains(&r.t) {
            ts.push(r.t);
        }
    }
    ts.iter()
        .map(|&t| {
            let sel = rows.iter().filter(|r| r.t == t);
            let max_all = sel.clone().map(|r| r.norm_gj).fold(0.0, f64::max);
            let max_small_n = sel
                .filter(|r| r.n <= small_n_max)
                .map(|r| r.norm_gj)
                .fold(0.0, f64::max);
            CommutatorSummary {
                t,
                max_all,
                max_small_n,
                ratio: max_all / max_small_n,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn quad() -> ExpandingPolynomial {
        ExpandingPolynomial::quadratic(3.0).unwrap()
    }

    /// 2×2 orthogonalization done by hand: nodes `λ_±`, weights `w_±`,
    /// `a_0 = Σwλ`, `b_1 = √(w_- w_+) (λ_+ - λ_-)`, `a_1 = w_+ λ_- + w_- λ_+`.
    fn two_by_two(x: f64, t: f64) -> (f64, f64, f64) {
        let f = quad();
        let o = backward_orbit(&f, 1, x).unwrap();
        let (l0, l1) = (o.nodes()[0], o.nodes()[1]);
        let (u0, u1) = (o.tprime(0).abs().powf(-t), o.tprime(1).abs().powf(-t));
        let (w0, w1) = (u0 / (u0 + u1), u1 / (u0 + u1));
        (w0 * l0 + w1 * l1, (w0 * w1).sqrt() * (l1 - l0), w1 * l0 + w0 * l1)
    }

    #[test]
    fn d_is_strictly_lower_triangular() {
        let ops = build_flow_ops(&quad(), 3, 0.7, 0.5).unwrap();
        for k in 0..ops.dim() {
            for m in k..ops.dim() {
                assert!(ops.d[(k, m)].abs() < 1e-10, "D[{k},{m}] = {}", ops.d[(k, m)]);
            }
            assert_eq!(ops.g[(k, k)], 0.0);
        }
    }

    #[test]
    fn symbolic_two_by_two() {
        let (x, t, h) = (0.5, 0.0, 1e-6);
        let ops = build_flow_ops(&quad(), 1, t, x).unwrap();
        let (a0, b1, a1) = two_by_two(x, t);
        assert_abs_diff_eq!(ops.jacobi.a()[0], a0, epsilon = 1e-14);
        assert_abs_diff_eq!(ops.jacobi.b()[0], b1, epsilon = 1e-14);
        assert_abs_diff_eq!(ops.jacobi.a()[1], a1, epsilon = 1e-14);
        let (pa0, pb1, pa1) = two_by_two(x + h, t);
        let (ma0, mb1, ma1) = two_by_two(x - h, t);
        let jdot = ops.j_dot();
        assert_abs_diff_eq!(jdot[(0, 0)], (pa0 - ma0) / (2.0 * h), epsilon = 1e-7);
        assert_abs_diff_eq!(jdot[(0, 1)], (pb1 - mb1) / (2.0 * h), epsilon = 1e-7);
        assert_abs_diff_eq!(jdot[(1, 1)], (pa1 - ma1) / (2.0 * h), epsilon = 1e-7);
        let rep = verify_d_identity(&ops);
        assert!(rep.max_residual() < 1e-13, "{rep:?}");
        assert!(verify_r_closed_form(&ops).max_residual() < 1e-13);
    }

    #[test]
    fn structure_at_moderate_size() {
        for t in [0.0, 1.0, 2.0] {
            let ops = build_flow_ops(&quad(), 6, t, 0.3).unwrap();
            assert!(ops.orthogonality_defect() < 1e-9);
            let g = &ops.g;
            assert_eq!(max_abs(&(g + g.transpose())), 0.0);
            let gj = ops.g_commutator();
            assert!(max_abs(&(&gj - gj.transpose())) < 1e-12);
            for i in 0..ops.dim() {
                for j in (i + 1)..ops.dim() {
                    assert_eq!(g[(i, j)], ops.h[(i, j)]);
                }
            }
            let f_norm = opnorm(&ops.f_of_j);
            let expect = (0..ops.dim()).map(|i| ops.orbit.inv_tprime(i).abs()).fold(0.0, f64::max);
            assert!((f_norm - expect).abs() < 1e-12 * expect.max(1e-300) + 1e-15);
            let rep = verify_d_identity(&ops);
            assert!(rep.max_residual() < 1e-6, "{rep:?}");
            let r = verify_r_closed_form(&ops);
            assert!(r.max_residual() < 1e-6, "{r:?}");
        }
    }

    #[test]
    fn h0_vanishes_at_t_one() {
        let ops = build_flow_ops(&quad(), 4, 1.0, 0.3).unwrap();
        // With t = 1 the diagonal of the Hilbert-type matrix ℙᵀHℙ is zero.
        let conj = ops.ppmat.transpose() * &ops.h * &ops.ppmat;
        for i in 0..ops.dim() {
            assert!(conj[(i, i)].abs() < 1e-10, "{}", conj[(i, i)]);
        }
    }

    #[test]
    fn flow_equation_residual_is_second_order() {
        let r3 = flow_residual(&quad(), 4, 1.0, 0.3, 1e-3).unwrap();
        let r4 = flow_residual(&quad(), 4, 1.0, 0.3, 1e-4).unwrap();
        assert!(r4 <= 1e-4);
        let ratio = r3 / r4;
        assert!((30.0..=300.0).contains(&ratio), "ratio {ratio}");
    }
}
