//! Nodes and weights to recurrence coefficients.

use num_traits::Float;
use twofloat::TwoFloat;

use super::{JacobiMatrix, Precision, Reduction};
use crate::ddmath;
use crate::measures::WeightedDiscreteMeasure;
use crate::{Error, Result};

/// Float types the reduction runs in. `TwoFloat` division and `hypot` are
/// only `f64`-accurate, so the rotation is computed through this trait.
trait Scalar: Float {
    fn quot(self, rhs: Self) -> Self {
        self / rhs
    }

    fn is_exact_zero(self) -> bool {
        self == Self::zero()
    }

    /// `(r, c, s)` with `r = sqrt(x^2 + y^2)`, `c = x/r`, `s = y/r`.
    fn givens(x: Self, y: Self) -> (Self, Self, Self) {
        let r2 = x * x + y * y;
        let r = if r2.is_normal() && r2 < Self::max_value() {
            r2.sqrt()
        } else {
            // Rescale near under- or overflow.
            let m = x.abs().max(y.abs());
            let (u, v) = (x.quot(m), y.quot(m));
            m * (u * u + v * v).sqrt()
        };
        let inv = Self::one().quot(r);
        (r, x * inv, y * inv)
    }
}

impl Scalar for f64 {}

impl Scalar for TwoFloat {
    fn quot(self, rhs: Self) -> Self {
        ddmath::div(self, rhs)
    }

    // `PartialEq` on `TwoFloat` is an out-of-line call; a normalized value
    // is zero iff its high word is.
    fn is_exact_zero(self) -> bool {
        self.hi() == 0.0
    }

    fn givens(x: Self, y: Self) -> (Self, Self, Self) {
        let r2 = x * x + y * y;
        if !(r2.hi().is_normal() && r2.hi() < 1e300) {
            let m = x.abs().max(y.abs());
            let (u, v) = (ddmath::div(x, m), ddmath::div(y, m));
            let r = m * (u * u + v * v).sqrt();
            let inv = ddmath::recip(r);
            return (r, x * inv, y * inv);
        }
        let r = r2.sqrt();
        let inv = ddmath::recip(r);
        (r, x * inv, y * inv)
    }
}

/// Reduces the bordered matrix `[[0, qᵀ], [q, diag(λ)]]` to tridiagonal form
/// by Givens rotations that fix `e_0`. Nodes are inserted one at a time next
/// to the border and the resulting bulge is chased to the bottom, so the cost
/// is `O(d^2)`.
///
/// Returns the diagonal and the (signed) off-diagonal of the trailing block.
fn rotation_reduce<F: Scalar>(nodes: &[F], sqrt_weights: &[F]) -> (Vec<F>, Vec<F>) {
    let d = nodes.len();
    // Index 0 is the border; diag[0] stays zero.
    let mut diag = vec![F::zero(); d + 1];
    // off[i] couples i - 1 and i.
    let mut off = vec![F::zero(); d + 2];
    for k in 0..d {
        let size = k + 2;
        // Shift rows 1..=k to 2..=k+1 and put the new node at row 1.
        for i in (2..size).rev() {
            diag[i] = diag[i - 1];
        }
        for i in (3..size).rev() {
            off[i] = off[i - 1];
        }
        let mut bulge = off[1];
        diag[1] = nodes[k];
        off[1] = sqrt_weights[k];
        off[2] = F::zero();
        let mut p = 1;
        while p + 1 < size {
            if bulge.is_exact_zero() {
                break;
            }
            let (r, c, s) = F::givens(off[p], bulge);
            off[p] = r;
            let (dp, dq, e) = (diag[p], diag[p + 1], off[p + 1]);
            // Uses c^2 + s^2 = 1 to save products; the trace is preserved.
            let (ss, cs, gap) = (s * s, c * s, dq - dp);
            let cse = cs * e;
            let top = dp + ss * gap + (cse + cse);
            diag[p] = top;
            diag[p + 1] = (dp + dq) - top;
            off[p + 1] = cs * gap + (e - (ss + ss) * e);
            if p + 2 < size {
                bulge = s * off[p + 2];
                off[p + 2] = c * off[p + 2];
            } else {
                bulge = F::zero();
            }
            p += 1;
        }
    }
    (diag[1..].to_vec(), off[2..=d].to_vec())
}

/// Lanczos on `diag(λ)` started from `√w`, with two rounds of full
/// reorthogonalization per step.
fn lanczos_reduce(nodes: &[f64], sqrt_weights: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let d = nodes.len();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d);
    let mut a = Vec::with_capacity(d);
    let mut b = Vec::with_capacity(d.saturating_sub(1));
    let norm = sqrt_weights.iter().map(|q| q * q).sum::<f64>().sqrt();
    let mut v: Vec<f64> = sqrt_weights.iter().map(|q| q / norm).collect();
    for k in 0..d {
        let mut w: Vec<f64> = v.iter().zip(nodes).map(|(x, l)| x * l).collect();
        let alpha: f64 = w.iter().zip(&v).map(|(x, y)| x * y).sum();
        a.push(alpha);
        basis.push(v.clone());
        if k + 1 == d {
            break;
        }
        for _ in 0..2 {
            for q in &basis {
                let proj: f64 = w.iter().zip(q).map(|(x, y)| x * y).sum();
                for (x, y) in w.iter_mut().zip(q) {
                    *x -= proj * y;
                }
            }
        }
        let beta = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        b.push(beta);
        v = w.iter().map(|x| x / beta).collect();
    }
    (a, b)
}

pub(super) fn reduce(
    mu: &WeightedDiscreteMeasure,
    precision: Precision,
    method: Reduction,
) -> Result<JacobiMatrix> {
    let nodes = mu.nodes();
    for i in 1..nodes.len() {
        if nodes[i] <= nodes[i - 1] {
            return Err(Error::DuplicateNodes {
                index: i,
                value: nodes[i],
            });
        }
    }
    let sqrt_w: Vec<f64> = mu.log_weights().iter().map(|l| (0.5 * l).exp()).collect();
    if let Some(i) = sqrt_w.iter().position(|q| !(*q > 0.0)) {
        return Err(Error::WeightUnderflow {
            min_log_weight: mu.log_weights()[i],
        });
    }
    let (a, b) = match (method, precision) {
        (Reduction::Lanczos, _) => lanczos_reduce(nodes, &sqrt_w),
        (Reduction::Rotation, Precision::Double) => rotation_reduce(nodes, &sqrt_w),
        (Reduction::Rotation, Precision::Extended) => {
            let n2: Vec<TwoFloat> = nodes.iter().map(|&x| TwoFloat::from(x)).collect();
            // Square roots of the weights carried to double-double accuracy.
            let q2: Vec<TwoFloat> = mu
                .log_weights()
                .iter()
                .zip(&sqrt_w)
                .map(|(l, &q)| {
                    let q = TwoFloat::from(q);
                    let w = TwoFloat::from(l.exp());
                    // One Newton step for sqrt(w) from the f64 estimate.
                    (q + ddmath::div(w, q)) / 2.0
                })
                .collect();
            let (a, b) = rotation_reduce(&n2, &q2);
            (
                a.into_iter().map(f64::from).collect(),
                b.into_iter().map(f64::from).collect(),
            )
        }
    };
    let b: Vec<f64> = b.into_iter().map(f64::abs).collect();
    if let Some(i) = b.iter().position(|x| !(*x > 0.0)) {
        return Err(Error::WeightUnderflow {
            min_log_weight: mu.log_weights()[i.min(mu.len() - 1)],
        });
    }
    JacobiMatrix::new(a, b)
}

/// Rotation reduction from double-double nodes and square-root weights.
pub(super) fn reduce_extended(nodes: &[TwoFloat], sqrt_weights: &[TwoFloat]) -> Result<JacobiMatrix> {
    for i in 1..nodes.len() {
        if !(nodes[i] > nodes[i - 1]) {
            return Err(Error::DuplicateNodes {
                index: i,
                value: f64::from(nodes[i]),
            });
        }
    }
    let (a, b) = rotation_reduce(nodes, sqrt_weights);
    let b: Vec<f64> = b.into_iter().map(|x| f64::from(x).abs()).collect();
    if let Some(i) = b.iter().position(|x| !(*x > 0.0)) {
        let q = f64::from(sqrt_weights[i.min(sqrt_weights.len() - 1)]);
        return Err(Error::WeightUnderflow {
            min_log_weight: 2.0 * q.ln(),
        });
    }
    JacobiMatrix::new(a.into_iter().map(f64::from).collect(), b)
}
