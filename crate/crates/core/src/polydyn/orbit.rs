use twofloat::TwoFloat;

use super::{ExpandingPolynomial, Limits};
use crate::{Error, Result};

/// All `d = N^n` preimages of a base point under `T = f^n`, with the
/// derivative data of `T` at each node.
///
/// `|T'|` grows like `Q^n` and overflows quickly, so only `log|T'|` and the
/// sign are stored. `T''/T'` is accumulated through the chain rule.
#[derive(Debug, Clone, PartialEq)]
pub struct BackwardOrbit {
    base_point: f64,
    level: usize,
    degree: usize,
    nodes: Vec<f64>,
    log_abs_tprime: Vec<f64>,
    tprime_sign: Vec<i8>,
    tsecond_over_tprime: Vec<f64>,
}

impl BackwardOrbit {
    pub fn base_point(&self) -> f64 {
        self.base_point
    }

    /// The iteration depth `n`.
    pub fn level(&self) -> usize {
        self.level
    }

    /// Degree `N` of the underlying polynomial.
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of nodes `d`.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn log_abs_tprime(&self) -> &[f64] {
        &self.log_abs_tprime
    }

    pub fn tprime_sign(&self) -> &[i8] {
        &self.tprime_sign
    }

    pub fn tsecond_over_tprime(&self) -> &[f64] {
        &self.tsecond_over_tprime
    }

    /// `T'(λ_k)` including sign.
    pub fn tprime(&self, k: usize) -> f64 {
        self.tprime_sign[k] as f64 * self.log_abs_tprime[k].exp()
    }

    /// `1 / T'(λ_k)` including sign.
    pub fn inv_tprime(&self, k: usize) -> f64 {
        self.tprime_sign[k] as f64 * (-self.log_abs_tprime[k]).exp()
    }

    /// Smallest node separation.
    pub fn min_spacing(&self) -> f64 {
        self.nodes
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }
}

impl BackwardOrbit {
    /// Nodes and `|T'|` to double-double accuracy: each node gets two Newton
    /// steps on `T(λ) = x` with `T` evaluated in double-double.
    pub(crate) fn refine_extended(&self, p: &ExpandingPolynomial) -> (Vec<TwoFloat>, Vec<TwoFloat>) {
        let target = TwoFloat::from(self.base_point);
        let eval = |lam: TwoFloat| {
            let (mut z, mut d) = (lam, TwoFloat::from(1.0));
            for _ in 0..self.level {
                let (mut f, mut f1) = (TwoFloat::from(0.0), TwoFloat::from(0.0));
                for &c in p.coefficients().iter().rev() {
                    f1 = f1 * z + f;
                    f = f * z + c;
                }
                d *= f1;
                z = f;
            }
            (z, d)
        };
        self.nodes
            .iter()
            .map(|&l| {
                let mut lam = TwoFloat::from(l);
                for _ in 0..2 {
                    let (v, d) = eval(lam);
                    lam -= (v - target) / d;
                }
                (lam, eval(lam).1.abs())
            })
            .unzip()
    }
}

/// Backward orbit of `x` at depth `n` with default limits.
pub fn backward_orbit(p: &ExpandingPolynomial, n: usize, x: f64) -> Result<BackwardOrbit> {
    backward_orbit_with(p, n, x, &Limits::default())
}

pub fn backward_orbit_with(
    p: &ExpandingPolynomial,
    n: usize,
    x: f64,
    limits: &Limits,
) -> Result<BackwardOrbit> {
    let mut levels = backward_levels(p, n, x, limits)?;
    Ok(levels.pop().expect("at least one level"))
}

/// Backward orbits of `x` at every depth `1..=n`, expanding the preimage
/// tree one level at a time.
pub fn backward_levels(
    p: &ExpandingPolynomial,
    n: usize,
    x: f64,
    limits: &Limits,
) -> Result<Vec<BackwardOrbit>> {
    if n == 0 {
        return Err(Error::InvalidParameter("backward orbit needs n >= 1".into()));
    }
    if !(x.abs() <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "base point must lie in [-1, 1], got {x}"
        )));
    }
    limits.check_nodes(p.degree(), n)?;

    let mut out = Vec::with_capacity(n);
    let mut parent = BackwardOrbit {
        base_point: x,
        level: 0,
        degree: p.degree(),
        nodes: vec![x],
        log_abs_tprime: vec![0.0],
        tprime_sign: vec![1],
        tsecond_over_tprime: vec![0.0],
    };
    for level in 1..=n {
        let size = parent.len() * p.degree();
        let mut rows: Vec<(f64, f64, i8, f64)> = Vec::with_capacity(size);
        for k in 0..parent.len() {
            let y = parent.nodes[k].clamp(-1.0, 1.0);
            for lambda in p.preimages(y, limits.root_tol)? {
                let (_, f1, f2) = p.eval_all(lambda);
                let sign = if f1 < 0.0 { -1 } else { 1 } * parent.tprime_sign[k];
                // (S∘f)''/(S∘f)' = (S''/S')(f λ)·f'(λ) + f''(λ)/f'(λ)
                let ratio = parent.tsecond_over_tprime[k] * f1 + f2 / f1;
                rows.push((
                    lambda,
                    parent.log_abs_tprime[k] + f1.abs().ln(),
                    sign,
                    ratio,
                ));
            }
        }
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (i, w) in rows.windows(2).enumerate() {
            if !(w[1].0 > w[0].0) {
                return Err(Error::DuplicateNodes {
                    index: i + 1,
                    value: w[1].0,
                });
            }
        }
        let orbit = BackwardOrbit {
            base_point: x,
            level,
            degree: p.degree(),
            nodes: rows.iter().map(|r| r.0).collect(),
            log_abs_tprime: rows.iter().map(|r| r.1).collect(),
            tprime_sign: rows.iter().map(|r| r.2).collect(),
            tsecond_over_tprime: rows.iter().map(|r| r.3).collect(),
        };
        out.push(orbit.clone());
        parent = orbit;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Ascending coefficients of `f^n` by repeated composition.
    fn composed_coefficients(p: &ExpandingPolynomial, n: usize) -> Vec<f64> {
        let f = p.coefficients();
        let mut acc = vec![0.0, 1.0];
        for _ in 0..n {
            // f(acc) via Horner on polynomials.
            let mut out = vec![*f.last().unwrap()];
            for &c in f.iter().rev().skip(1) {
                let mut next = vec![0.0; out.len() + acc.len() - 1];
                for (i, a) in out.iter().enumerate() {
                    for (j, b) in acc.iter().enumerate() {
                        next[i + j] += a * b;
                    }
                }
                next[0] += c;
                out = next;
            }
            acc = out;
        }
        acc
    }

    #[test]
    fn level_one_is_one_step_preimages() {
        let p = ExpandingPolynomial::quadratic(3.0).unwrap();
        let orbit = backward_orbit(&p, 1, 0.4).unwrap();
        assert_eq!(orbit.nodes(), p.preimages(0.4, 1e-14).unwrap().as_slice());
    }

    #[test]
    fn quadratic_level_two_of_one() {
        let p = ExpandingPolynomial::quadratic(3.0).unwrap();
        let orbit = backward_orbit(&p, 2, 1.0).unwrap();
        assert_eq!(orbit.len(), 4);
        assert_abs_diff_eq!(orbit.nodes()[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(orbit.nodes()[3], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn nodes_map_to_base_point() {
        let p = ExpandingPolynomial::scaled_cheb3(4.0).unwrap();
        let tol = 1e-14;
        let orbit = backward_orbit(&p, 5, 0.37).unwrap();
        for k in 0..orbit.len() {
            let t = p.iterate(orbit.nodes()[k], 5);
            let bound = 10.0 * tol * (1.0 + orbit.log_abs_tprime()[k].exp());
            assert!((t - 0.37).abs() <= bound, "k={k}");
        }
    }

    #[test]
    fn chain_rule_matches_expanded_coefficients() {
        let p = ExpandingPolynomial::quadratic(3.0).unwrap();
        for n in 1..=4 {
            let coeffs = composed_coefficients(&p, n);
            let orbit = backward_orbit(&p, n, 0.21).unwrap();
            for k in 0..orbit.len() {
                let (_, t1, t2) = crate::polydyn::eval_with_derivatives(&coeffs, orbit.nodes()[k]);
                let rel = (orbit.log_abs_tprime()[k] - t1.abs().ln()).abs()
                    / t1.abs().ln().abs().max(1.0);
                assert!(rel < 1e-9, "n={n} k={k}");
                assert_eq!(orbit.tprime_sign()[k] as f64, t1.signum());
                let r = t2 / t1;
                assert!((orbit.tsecond_over_tprime()[k] - r).abs() < 1e-8 * r.abs().max(1.0));
            }
        }
    }

    #[test]
    fn extended_nodes_agree_with_double() {
        let p = ExpandingPolynomial::scaled_cheb3(4.0).unwrap();
        let orbit = backward_orbit(&p, 4, -0.62).unwrap();
        let (nodes, tp) = orbit.refine_extended(&p);
        for k in 0..orbit.len() {
            assert!((f64::from(nodes[k]) - orbit.nodes()[k]).abs() <= 4.0 * f64::EPSILON);
            assert!((f64::from(tp[k]).ln() - orbit.log_abs_tprime()[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn cap_is_enforced() {
        let p = ExpandingPolynomial::quadratic(3.0).unwrap();
        let err = backward_orbit_with(&p, 6, 0.0, &Limits::with_max_nodes(32)).unwrap_err();
        assert_eq!(err, Error::CapExceeded { requested: 64, cap: 32 });
    }

    #[test]
    fn green_bound_constant_is_stable() {
        // max 1/|T'| ≤ C/d with C fitted at n = 2.
        let p = ExpandingPolynomial::quadratic(3.0).unwrap();
        let ratio = |n: usize| {
            let o = backward_orbit(&p, n, 0.5).unwrap();
            let min_log = o.log_abs_tprime().iter().cloned().fold(f64::INFINITY, f64::min);
            (-min_log).exp() * o.len() as f64
        };
        let c = ratio(2);
        for n in 3..=8 {
            assert!(ratio(n) <= 1.5 * c, "n={n}: {} vs {c}", ratio(n));
        }
    }
}
