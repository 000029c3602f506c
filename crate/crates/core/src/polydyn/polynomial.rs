use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Which construction produced a polynomial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// `z^2 - a` conjugated by its fixed point `β`, i.e. `βz^2 - a/β`.
    QuadraticA { a: f64 },
    /// `c (4z^3 - 3z)`.
    #[serde(rename = "scaled_cheb3")]
    ScaledCheb3 { c: f64 },
    /// User-supplied ascending coefficients (before normalization).
    Custom { coefficients: Vec<f64> },
}

/// A real polynomial with real Julia set, normalized so that all real
/// solutions of `f(z) = ±1` lie in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpandingPolynomial {
    coefficients: Vec<f64>,
    critical_points: Vec<f64>,
    critical_values: Vec<f64>,
    family: Family,
}

/// Evaluates `(f(z), f'(z), f''(z))` for ascending coefficients by Horner's rule.
pub fn eval_with_derivatives(coefficients: &[f64], z: f64) -> (f64, f64, f64) {
    let mut f = 0.0;
    let mut f1 = 0.0;
    let mut f2 = 0.0;
    for &c in coefficients.iter().rev() {
        f2 = f2 * z + 2.0 * f1;
        f1 = f1 * z + f;
        f = f * z + c;
    }
    (f, f1, f2)
}

impl ExpandingPolynomial {
    /// The quadratic family `z^2 - a`, rescaled by `β = (1 + sqrt(1 + 4a)) / 2`.
    pub fn quadratic(a: f64) -> Result<Self> {
        if !(a.is_finite() && a > 2.0) {
            return Err(Error::InvalidParameter(format!(
                "quadratic family needs a > 2 for a real hyperbolic Julia set, got {a}"
            )));
        }
        let beta = 0.5 * (1.0 + (1.0 + 4.0 * a).sqrt());
        let coefficients = vec![-a / beta, 0.0, beta];
        let p = ExpandingPolynomial {
            critical_values: vec![-a / beta],
            critical_points: vec![0.0],
            coefficients,
            family: Family::QuadraticA { a },
        };
        p.validate()?;
        Ok(p)
    }

    /// The scaled Chebyshev cubic `c (4z^3 - 3z)`.
    pub fn scaled_cheb3(c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 1.0) {
            return Err(Error::InvalidParameter(format!(
                "scaled Chebyshev family needs c > 1, got {c}"
            )));
        }
        let p = ExpandingPolynomial {
            coefficients: vec![0.0, -3.0 * c, 0.0, 4.0 * c],
            critical_points: vec![-0.5, 0.5],
            critical_values: vec![c, -c],
            family: Family::ScaledCheb3 { c },
        };
        p.validate()?;
        Ok(p)
    }

    /// A user-supplied polynomial. If it is not already normalized it is
    /// affinely conjugated so that the convex hull of its Julia set is `[-1, 1]`.
    pub fn custom(coefficients: &[f64]) -> Result<Self> {
        let mut coeffs = coefficients.to_vec();
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        if coeffs.len() < 3 || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(
                "custom polynomial needs finite coefficients and degree >= 2".into(),
            ));
        }
        let family = Family::Custom {
            coefficients: coefficients.to_vec(),
        };
        let raw = Self::from_parts_unchecked(coeffs.clone(), family.clone())?;
        if raw.validate().is_ok() {
            return Ok(raw);
        }
        let (lo, hi) = raw.julia_hull()?;
        let conjugated = conjugate_affine(&coeffs, lo, hi);
        let p = Self::from_parts_unchecked(conjugated, family)?;
        p.validate()?;
        Ok(p)
    }

    /// Builds the polynomial and its critical data without checking the
    /// normalization or hyperbolicity invariants. Intended for diagnostics
    /// such as running the hyperbolicity certificate on a rejected map.
    pub fn from_parts_unchecked(coefficients: Vec<f64>, family: Family) -> Result<Self> {
        let critical_points = real_critical_points(&coefficients)?;
        let critical_values = critical_points
            .iter()
            .map(|&c| eval_with_derivatives(&coefficients, c).0)
            .collect();
        Ok(ExpandingPolynomial {
            coefficients,
            critical_points,
            critical_values,
            family,
        })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn critical_points(&self) -> &[f64] {
        &self.critical_points
    }

    pub fn critical_values(&self) -> &[f64] {
        &self.critical_values
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn eval(&self, z: f64) -> f64 {
        eval_with_derivatives(&self.coefficients, z).0
    }

    pub fn derivative(&self, z: f64) -> f64 {
        eval_with_derivatives(&self.coefficients, z).1
    }

    /// `(f, f', f'')` at `z`.
    pub fn eval_all(&self, z: f64) -> (f64, f64, f64) {
        eval_with_derivatives(&self.coefficients, z)
    }

    /// `f^n(z)` by forward iteration.
    pub fn iterate(&self, z: f64, n: usize) -> f64 {
        (0..n).fold(z, |acc, _| self.eval(acc))
    }

    /// Complex evaluation `(f(z), f'(z))`.
    pub fn eval_complex(
        &self,
        z: num_complex::Complex64,
    ) -> (num_complex::Complex64, num_complex::Complex64) {
        let mut f = num_complex::Complex64::new(0.0, 0.0);
        let mut f1 = num_complex::Complex64::new(0.0, 0.0);
        for &c in self.coefficients.iter().rev() {
            f1 = f1 * z + f;
            f = f * z + c;
        }
        (f, f1)
    }

    /// `(T(z), T'(z))` for `T = f^n` at a complex point, by the chain rule.
    pub fn iterate_complex(
        &self,
        z: num_complex::Complex64,
        n: usize,
    ) -> (num_complex::Complex64, num_complex::Complex64) {
        let mut w = z;
        let mut dw = num_complex::Complex64::new(1.0, 0.0);
        for _ in 0..n {
            let (f, f1) = self.eval_complex(w);
            dw *= f1;
            w = f;
        }
        (w, dw)
    }

    /// Bound on the modulus of every root of `f(z) = y` with `|y| <= 1`.
    fn root_bound(&self, y: f64) -> f64 {
        let lead = self.coefficients[self.degree()].abs();
        let mut m = (self.coefficients[0] - y).abs();
        for &c in &self.coefficients[1..self.degree()] {
            m = m.max(c.abs());
        }
        1.0 + m / lead
    }

    /// Endpoints of the monotone branches: `-B, c_1, ..., c_{N-1}, B`.
    fn branch_edges(&self, y: f64) -> Vec<f64> {
        let b = self.root_bound(y);
        let mut edges = Vec::with_capacity(self.degree() + 1);
        edges.push(-b);
        edges.extend_from_slice(&self.critical_points);
        edges.push(b);
        edges
    }

    /// All `N` real roots of `f(λ) = y`, sorted increasingly.
    ///
    /// Each root is bracketed on a monotone branch and refined by Newton
    /// steps safeguarded by bisection.
    pub fn preimages(&self, y: f64, tol: f64) -> Result<Vec<f64>> {
        if !(y.abs() <= 1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "preimages need |y| <= 1, got {y}"
            )));
        }
        let edges = self.branch_edges(y);
        let mut roots = Vec::with_capacity(self.degree());
        for branch in 0..self.degree() {
            let root = self
                .solve_on_branch(y, edges[branch], edges[branch + 1], tol)
                .ok_or(Error::BracketFailure { branch, target: y })?;
            let (fx, f1, _) = self.eval_all(root);
            let residual = (fx - y).abs();
            let scale = self.coefficients.iter().map(|c| c.abs()).sum::<f64>();
            if residual > 10.0 * tol * (1.0 + f1.abs()) + 8.0 * f64::EPSILON * scale {
                return Err(Error::RootTolerance {
                    node: root,
                    residual,
                });
            }
            roots.push(root);
        }
        Ok(roots)
    }

    /// Real roots of `f(λ) = y` for arbitrary `y`, skipping branches whose
    /// range misses `y`.
    pub(crate) fn real_preimages_any(&self, y: f64, tol: f64) -> Vec<f64> {
        let lead = self.coefficients[self.degree()].abs();
        let m = self.coefficients[..self.degree()]
            .iter()
            .enumerate()
            .map(|(i, c)| if i == 0 { (c - y).abs() } else { c.abs() })
            .fold(0.0_f64, f64::max);
        let b = 1.0 + m / lead;
        let mut edges = vec![-b];
        edges.extend_from_slice(&self.critical_points);
        edges.push(b);
        (0..self.degree())
            .filter_map(|k| self.solve_on_branch(y, edges[k], edges[k + 1], tol))
            .collect()
    }

    /// Safeguarded Newton iteration for `f(λ) = y` on a monotone bracket.
    fn solve_on_branch(&self, y: f64, lo: f64, hi: f64, tol: f64) -> Option<f64> {
        let g = |x: f64| self.eval(x) - y;
        let (mut lo, mut hi) = (lo, hi);
        let g_lo = g(lo);
        let g_hi = g(hi);
        if g_lo == 0.0 {
            return Some(lo);
        }
        if g_hi == 0.0 {
            return Some(hi);
        }
        if g_lo.signum() == g_hi.signum() || !g_lo.is_finite() || !g_hi.is_finite() {
            return None;
        }
        let lo_sign = g_lo.signum();
        let mut x = 0.5 * (lo + hi);
        for _ in 0..400 {
            let (fx, f1, _) = self.eval_all(x);
            let gx = fx - y;
            if gx == 0.0 {
                return Some(x);
            }
            if gx.signum() == lo_sign {
                lo = x;
            } else {
                hi = x;
            }
            let newton = x - gx / f1;
            let width = hi - lo;
            if newton.is_finite() && newton > lo && newton < hi {
                let step = newton - x;
                x = newton;
                if step.abs() <= tol * x.abs().max(f64::MIN_POSITIVE) {
                    // One more step lands on the rounding floor.
                    let (fx, f1, _) = self.eval_all(x);
                    let polished = x - (fx - y) / f1;
                    if polished.is_finite() && polished >= lo && polished <= hi {
                        x = polished;
                    }
                    return Some(x);
                }
            } else {
                x = 0.5 * (lo + hi);
            }
            if width <= 2.0 * f64::EPSILON * x.abs().max(f64::MIN_POSITIVE) {
                return Some(x);
            }
        }
        Some(x)
    }

    /// Checks the invariants of the normalized representation.
    pub fn validate(&self) -> Result<()> {
        let n = self.degree();
        if self.critical_points.len() != n - 1 {
            return Err(Error::NotNormalized(format!(
                "expected {} real critical points, found {}",
                n - 1,
                self.critical_points.len()
            )));
        }
        for (i, t) in self.critical_values.iter().enumerate() {
            if !(t.abs() > 1.0) {
                return Err(Error::NotNormalized(format!(
                    "critical value t_{i} = {t} lies in [-1, 1]"
                )));
            }
        }
        for w in self.critical_values.windows(2) {
            if w[0].signum() == w[1].signum() {
                return Err(Error::NotNormalized(
                    "consecutive critical values do not alternate in sign".into(),
                ));
            }
        }
        for y in [-1.0, 1.0] {
            let roots = self.preimages(y, crate::polydyn::DEFAULT_ROOT_TOL)?;
            if let Some(r) = roots.iter().find(|r| r.abs() > 1.0 + 1e-12) {
                return Err(Error::NotNormalized(format!(
                    "solution {r} of f = {y} lies outside [-1, 1]"
                )));
            }
        }
        Ok(())
    }

    /// Convex hull of the (real) Julia set by iterating real preimages of
    /// an escaping interval.
    fn julia_hull(&self) -> Result<(f64, f64)> {
        let n = self.degree();
        let lead = self.coefficients[n].abs();
        let rest: f64 = self.coefficients[..n].iter().map(|c| c.abs()).sum();
        let b = ((rest + 2.0) / lead).max(1.0);
        let (mut lo, mut hi) = (-b, b);
        for _ in 0..2000 {
            let mut pre = self.real_preimages_any(lo, 1e-15);
            pre.extend(self.real_preimages_any(hi, 1e-15));
            if pre.is_empty() {
                return Err(Error::NotNormalized(
                    "real preimages of the escape interval are empty".into(),
                ));
            }
            let new_lo = pre.iter().cloned().fold(f64::INFINITY, f64::min);
            let new_hi = pre.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let done = (new_lo - lo).abs() <= 4.0 * f64::EPSILON * b
                && (new_hi - hi).abs() <= 4.0 * f64::EPSILON * b;
            lo = new_lo;
            hi = new_hi;
            if done {
                break;
            }
        }
        if !(hi > lo) {
            return Err(Error::NotNormalized("degenerate Julia hull".into()));
        }
        Ok((lo, hi))
    }
}

/// Coefficients of `h ∘ f ∘ h^{-1}` where `h` maps `[lo, hi]` onto `[-1, 1]`.
fn conjugate_affine(coeffs: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let alpha = 2.0 / (hi - lo);
    let gamma = -(hi + lo) / (hi - lo);
    // h^{-1}(w) = s*w + k
    let s = 1.0 / alpha;
    let k = -gamma / alpha;
    let mut acc = vec![*coeffs.last().unwrap()];
    for &c in coeffs.iter().rev().skip(1) {
        let mut next = vec![0.0; acc.len() + 1];
        for (i, &a) in acc.iter().enumerate() {
            next[i] += a * k;
            next[i + 1] += a * s;
        }
        next[0] += c;
        acc = next;
    }
    let mut out: Vec<f64> = acc.into_iter().map(|a| alpha * a).collect();
    out[0] += gamma;
    out
}

/// Sorted real roots of `f'`; errors if any root is visibly complex.
fn real_critical_points(coeffs: &[f64]) -> Result<Vec<f64>> {
    let n = coeffs.len() - 1;
    let deriv: Vec<f64> = (1..=n).map(|i| i as f64 * coeffs[i]).collect();
    let m = deriv.len() - 1;
    if m == 0 {
        return Ok(vec![]);
    }
    if m == 1 {
        return Ok(vec![-deriv[0] / deriv[1]]);
    }
    let lead = deriv[m];
    let mut companion = DMatrix::<f64>::zeros(m, m);
    for i in 1..m {
        companion[(i, i - 1)] = 1.0;
    }
    for i in 0..m {
        companion[(i, m - 1)] = -deriv[i] / lead;
    }
    let eig = companion.complex_eigenvalues();
    let mut roots = Vec::with_capacity(m);
    for z in eig.iter() {
        if z.im.abs() > 1e-7 * (1.0 + z.re.abs()) {
            return Err(Error::NotNormalized(format!(
                "critical point {}{:+}i is not real",
                z.re, z.im
            )));
        }
        // Newton polish on f'.
        let mut x = z.re;
        for _ in 0..8 {
            let (_, f1, f2) = eval_with_derivatives(coeffs, x);
            if f2 == 0.0 {
                break;
            }
            let step = f1 / f2;
            x -= step;
            if step.abs() <= f64::EPSILON * x.abs().max(1.0) {
                break;
            }
        }
        roots.push(x);
    }
    roots.sort_by(|a, b| a.total_cmp(b));
    Ok(roots)
}
