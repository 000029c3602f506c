//! The renormalization map `J̃ ↦ J(0, J̃; T)` on finite one-sided Jacobi
//! matrices, its contraction, and the limit-periodic fixed point.
//!
//! The spectral measure of `J̃` at `e_0` is pulled back under `T = f^n` with
//! mass `1/d` per branch. By the partial-fraction identity
//! `T'(z)/(d (T(z) - w)) = (1/d) Σ_{T(λ) = w} 1/(z - λ)` the output satisfies
//! `⟨(z - J)^{-1} e_0, e_0⟩ = (T'(z)/d) ⟨(T(z) - J̃)^{-1} e_0, e_0⟩`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::jacobi::{
    balanced_jacobi, jacobi_from_measure, resolvent_00, spectral_measure, JacobiMatrix, Precision,
};
use crate::measures::{pfr_pullback_with, WeightedDiscreteMeasure};
use crate::polydyn::{backward_orbit_with, sample_cover_pairs, ExpandingPolynomial, Limits};
use crate::stats::{linear_fit, LinearFit};
use crate::{Error, Result};

/// Sample points for the resolvent identity.
pub const RE_SAMPLES: [(f64, f64); 3] = [(0.0, 2.0), (3.0, 1.0), (-1.7, 0.5)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReResidual {
    pub z: (f64, f64),
    /// Relative error of the `(0, 0)` entry.
    pub relative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenormResult {
    pub j_out: JacobiMatrix,
    pub re_residuals: Vec<ReResidual>,
}

impl RenormResult {
    pub fn max_re_residual(&self) -> f64 {
        self.re_residuals.iter().map(|r| r.relative).fold(0.0, f64::max)
    }
}

/// `J(0, J̃; f^n)` with output size `N^n · dim(J̃)`.
pub fn renorm_map(p: &ExpandingPolynomial, n: usize, jt: &JacobiMatrix) -> Result<RenormResult> {
    renorm_map_with(p, n, jt, &Limits::default())
}

pub fn renorm_map_with(
    p: &ExpandingPolynomial,
    n: usize,
    jt: &JacobiMatrix,
    limits: &Limits,
) -> Result<RenormResult> {
    let j_out = renorm_only(p, n, jt, limits)?;
    let re_residuals = RE_SAMPLES
        .iter()
        .map(|&(re, im)| {
            let z = Complex64::new(re, im);
            let lhs = resolvent_00(&j_out, z)?;
            let rhs = re_rhs(p, n, jt, z)?;
            Ok(ReResidual {
                z: (re, im),
                relative: (lhs - rhs).norm() / lhs.norm(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(RenormResult { j_out, re_residuals })
}

/// `(T'(z)/d) ⟨(T(z) - J̃)^{-1} e_0, e_0⟩`.
pub fn re_rhs(p: &ExpandingPolynomial, n: usize, jt: &JacobiMatrix, z: Complex64) -> Result<Complex64> {
    let (tz, dtz) = p.iterate_complex(z, n);
    let d = (p.degree() as f64).powi(n as i32);
    Ok(dtz / d * resolvent_00(jt, tz)?)
}

fn renorm_only(p: &ExpandingPolynomial, n: usize, jt: &JacobiMatrix, limits: &Limits) -> Result<JacobiMatrix> {
    let size = limits.check_nodes(p.degree(), n)?.saturating_mul(jt.dim());
    if size > limits.max_nodes {
        return Err(Error::CapExceeded {
            requested: size,
            cap: limits.max_nodes,
        });
    }
    let mu = spectral_measure(jt)?;
    if let Some(&bad) = mu.nodes().iter().find(|x| x.abs() > 1.0 + 1e-10) {
        return Err(Error::SpectrumOutside { value: bad });
    }
    let nodes: Vec<f64> = mu.nodes().iter().map(|x| x.clamp(-1.0, 1.0)).collect();
    let mut current = WeightedDiscreteMeasure::from_log_weights(&nodes, mu.log_weights())?;
    for _ in 0..n {
        let pulled = pfr_pullback_with(p, &current, 0.0, limits)?;
        if pulled.merged > 0 {
            return Err(Error::DuplicateNodes {
                index: 0,
                value: f64::NAN,
            });
        }
        current = pulled.measure;
    }
    jacobi_from_measure(&current)
}

/// Largest relative deviation between `⟨(z - J)^{-1} e_{dk}, e_{dm}⟩` and
/// `(T'(z)/d) ⟨(T(z) - J̃)^{-1} e_k, e_m⟩` over `k, m < dim(J̃)`. Reported
/// only: the finite construction is exact for the `(0, 0)` entry alone.
pub fn decimated_re_residual(
    p: &ExpandingPolynomial,
    n: usize,
    jt: &JacobiMatrix,
    j_out: &JacobiMatrix,
    z: Complex64,
) -> Result<f64> {
    let m = jt.dim();
    let d = j_out.dim() / m;
    let complex = |j: &JacobiMatrix, w: Complex64| {
        let k = j.dim();
        DMatrix::<Complex64>::identity(k, k) * w - j.to_dense().map(|v| Complex64::new(v, 0.0))
    };
    let (tz, dtz) = p.iterate_complex(z, n);
    let big = complex(j_out, z).lu();
    let small = complex(jt, tz).lu();
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for k in 0..m {
        let mut e = DVector::<Complex64>::zeros(j_out.dim());
        e[d * k] = Complex64::new(1.0, 0.0);
        let col = big.solve(&e).ok_or(Error::ResolventPole { re: z.re, im: z.im })?;
        let mut es = DVector::<Complex64>::zeros(m);
        es[k] = Complex64::new(1.0, 0.0);
        let cols = small.solve(&es).ok_or(Error::ResolventPole { re: tz.re, im: tz.im })?;
        for mm in 0..m {
            let lhs = col[d * mm];
            let rhs = cols[mm] * dtz / d as f64;
            worst = worst.max((lhs - rhs).norm());
            scale = scale.max(lhs.norm());
        }
    }
    Ok(worst / scale)
}

/// Seeded random Jacobi matrix of size `m` with spectrum in `[-1, 1]`.
pub fn random_jacobi(m: usize, rng: &mut ChaCha8Rng) -> Result<JacobiMatrix> {
    loop {
        let mut nodes: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        nodes.sort_by(f64::total_cmp);
        if nodes.windows(2).any(|w| w[1] - w[0] < 1e-3) {
            continue;
        }
        let weights: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..1.0)).collect();
        return jacobi_from_measure(&WeightedDiscreteMeasure::from_weights(&nodes, &weights)?);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionSample {
    pub pair: usize,
    pub out_distance: f64,
    pub in_distance: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionEstimate {
    pub c_hat: f64,
    pub samples: Vec<ContractionSample>,
    pub seed: u64,
}

/// Ratios `‖ΔJ_out‖_coeff / ‖ΔJ̃‖_coeff` for seeded random pairs of size `m`.
/// The output window drops the last `d` rows.
pub fn contraction_estimate(
    p: &ExpandingPolynomial,
    n: usize,
    m: usize,
    num_pairs: usize,
    seed: u64,
) -> Result<ContractionEstimate> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(num_pairs);
    while pairs.len() < num_pairs {
        let a = random_jacobi(m, &mut rng)?;
        let b = random_jacobi(m, &mut rng)?;
        if a.coeff_distance(&b, m) >= 1e-12 {
            pairs.push((a, b));
        }
    }
    let limits = Limits::default();
    let samples: Vec<ContractionSample> = pairs
        .par_iter()
        .enumerate()
        .map(|(pair, (a, b))| {
            let oa = renorm_only(p, n, a, &limits)?;
            let ob = renorm_only(p, n, b, &limits)?;
            let d = oa.dim() / m;
            let out_distance = oa.coeff_distance(&ob, oa.dim() - d);
            let in_distance = a.coeff_distance(b, m);
            Ok(ContractionSample {
                pair,
                out_distance,
                in_distance,
                ratio: out_distance / in_distance,
            })
        })
        .collect::<Result<_>>()?;
    let c_hat = samples.iter().map(|s| s.ratio).fold(0.0, f64::max);
    Ok(ContractionEstimate { c_hat, samples, seed })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefectRow {
    pub l: usize,
    pub period: usize,
    pub defect_a: f64,
    pub defect_b: f64,
}

impl DefectRow {
    pub fn defect(&self) -> f64 {
        self.defect_a.max(self.defect_b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitPeriodicResult {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub steps: usize,
    /// Trailing rows excluded from every comparison.
    pub trailing: usize,
    pub defects: Vec<DefectRow>,
}

impl LimitPeriodicResult {
    /// Defect ratios `defect(l+1)/defect(l)`.
    pub fn defect_ratios(&self) -> Vec<f64> {
        self.defects
            .windows(2)
            .map(|w| w[1].defect() / w[0].defect())
            .collect()
    }

    pub fn interior_len(&self) -> usize {
        self.a.len().saturating_sub(self.trailing)
    }

    pub fn to_jacobi(&self) -> Result<JacobiMatrix> {
        JacobiMatrix::new(self.a.clone(), self.b.clone())
    }
}

/// `steps` applications of the renormalization map with `T = f`, starting
/// from `jt0`. Defects use periods `N^l` for `l = 1..=max_l`.
pub fn iterate_fixed_point(
    p: &ExpandingPolynomial,
    jt0: &JacobiMatrix,
    steps: usize,
    max_l: usize,
    limits: &Limits,
) -> Result<LimitPeriodicResult> {
    let mut j = jt0.clone();
    for _ in 0..steps {
        j = renorm_only(p, 1, &j, limits)?;
    }
    let trailing = p.degree() * steps;
    let len = j.dim();
    let interior = len.saturating_sub(trailing);
    let mut defects = Vec::with_capacity(max_l);
    for l in 1..=max_l {
        let period = p.degree().pow(l as u32);
        let (mut da, mut db) = (0.0_f64, 0.0_f64);
        for k in 0..interior.saturating_sub(period) {
            da = da.max((j.a()[k + period] - j.a()[k]).abs());
            if k + period + 1 < interior {
                db = db.max((j.b()[k + period] - j.b()[k]).abs());
            }
        }
        defects.push(DefectRow {
            l,
            period,
            defect_a: da,
            defect_b: db,
        });
    }
    Ok(LimitPeriodicResult {
        a: j.a().to_vec(),
        b: j.b().to_vec(),
        steps,
        trailing,
        defects,
    })
}

/// `max |Δa|, |Δb|` over the common interior of two fixed-point runs.
pub fn start_independence(x: &LimitPeriodicResult, y: &LimitPeriodicResult) -> f64 {
    let w = x.interior_len().min(y.interior_len());
    let mut worst: f64 = 0.0;
    for k in 0..w {
        worst = worst.max((x.a[k] - y.a[k]).abs());
        if k + 1 < w {
            worst = worst.max((x.b[k] - y.b[k]).abs());
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzRow {
    pub n: usize,
    pub dim: usize,
    /// `max ‖J(x_1) - J(x_2)‖ / |x_1 - x_2|` over the pairs.
    pub l_n: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarContraction {
    pub t: f64,
    pub rows: Vec<LipschitzRow>,
    /// `exp` of the slope of `log L_n` against `n`.
    pub c_hat: f64,
    pub fit: LinearFit,
}

impl ScalarContraction {
    /// `max_n L_n / max(L_2, L_3)` when both are present, else over the
    /// first two rows.
    pub fn growth_ratio(&self) -> f64 {
        let base = self.rows.iter().take(2).map(|r| r.l_n).fold(0.0, f64::max);
        self.rows.iter().map(|r| r.l_n).fold(0.0, f64::max) / base
    }
}

/// Settings for [`scalar_contraction_experiment`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzSettings {
    pub pairs: usize,
    pub seed: u64,
    /// Level of the cover the points are drawn from.
    pub cover_level: usize,
    pub precision: Precision,
    /// Switch to double-double when `d` exceeds this size. The inverse
    /// problem amplifies node rounding by up to ~1e9 at `d = 729`, which
    /// swamps `L_n` in `f64`. `t = 2, n ≥ 8` is always extended.
    pub extended_above: usize,
    pub max_nodes: usize,
}

impl Default for LipschitzSettings {
    fn default() -> Self {
        LipschitzSettings {
            pairs: 20,
            seed: 1,
            cover_level: 2,
            precision: Precision::Double,
            extended_above: 64,
            max_nodes: 8192,
        }
    }
}

/// `L_n` for `n` in `n_range`, and the fitted rate `ĉ` of `L_n ≈ C ĉ^n`.
pub fn scalar_contraction_experiment(
    p: &ExpandingPolynomial,
    t: f64,
    n_range: (usize, usize),
    settings: &LipschitzSettings,
) -> Result<ScalarContraction> {
    let pairs = sample_cover_pairs(p, settings.cover_level, settings.pairs, settings.seed)?;
    scalar_contraction_on(p, t, n_range, &pairs, settings)
}

/// [`scalar_contraction_experiment`] over caller-supplied pairs; the
/// sampling fields of `settings` are ignored.
pub fn scalar_contraction_on(
    p: &ExpandingPolynomial,
    t: f64,
    n_range: (usize, usize),
    pairs: &[(f64, f64)],
    settings: &LipschitzSettings,
) -> Result<ScalarContraction> {
    let limits = Limits::with_max_nodes(settings.max_nodes);
    let mut rows = Vec::new();
    for n in n_range.0..=n_range.1 {
        let size = limits.check_nodes(p.degree(), n)?;
        let precision = if size > settings.extended_above || (t == 2.0 && n >= 8) {
            Precision::Extended
        } else {
            settings.precision
        };
        let ratios: Vec<f64> = pairs
            .par_iter()
            .map(|&(x1, x2)| {
                let j = |x: f64| balanced_jacobi(p, &backward_orbit_with(p, n, x, &limits)?, t, precision);
                Ok(j(x1)?.distance(&j(x2)?)? / (x1 - x2).abs())
            })
            .collect::<Result<_>>()?;
        rows.push(LipschitzRow {
            n,
            dim: size,
            l_n: ratios.into_iter().fold(0.0, f64::max),
        });
    }
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let logs: Vec<f64> = rows.iter().map(|r| r.l_n.ln()).collect();
    let fit = linear_fit(&ns, &logs);
    Ok(ScalarContraction {
        t,
        rows,
        c_hat: fit.slope.exp(),
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{balanced_measure, pfr_pullback_iter};
    use crate::polydyn::backward_orbit;

    fn quad(a: f64) -> ExpandingPolynomial {
        ExpandingPolynomial::quadratic(a).unwrap()
    }

    #[test]
    fn scalar_input_gives_balanced_jacobi_matrix() {
        let f = quad(3.0);
        let out = renorm_map(&f, 3, &JacobiMatrix::scalar(0.4)).unwrap();
        let direct = jacobi_from_measure(&balanced_measure(&backward_orbit(&f, 3, 0.4).unwrap(), 0.0).unwrap()).unwrap();
        assert!(out.j_out.distance(&direct).unwrap() < 1e-13);
        assert!(out.max_re_residual() < 1e-8);
    }

    #[test]
    fn swap_matrix_spectral_mapping() {
        let f = quad(12.0);
        let jt = JacobiMatrix::new(vec![0.0, 0.0], vec![1.0]).unwrap();
        let out = renorm_map(&f, 1, &jt).unwrap();
        assert_eq!(out.j_out.dim(), 4);
        let mut expect = f.preimages(-1.0, 1e-14).unwrap();
        expect.extend(f.preimages(1.0, 1e-14).unwrap());
        expect.sort_by(f64::total_cmp);
        for (l, e) in out.j_out.eigenvalues().unwrap().iter().zip(&expect) {
            assert!((l - e).abs() < 1e-9);
        }
        assert!(out.max_re_residual() < 1e-8, "{:?}", out.re_residuals);
    }

    #[test]
    fn size_law_and_determinism() {
        let f = quad(5.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let jt = random_jacobi(5, &mut rng).unwrap();
        let a = renorm_map(&f, 2, &jt).unwrap();
        let b = renorm_map(&f, 2, &jt).unwrap();
        assert_eq!(a.j_out.dim(), 20);
        assert_eq!(a, b);
        assert!(a.max_re_residual() < 1e-8);
        let dec = decimated_re_residual(&f, 2, &jt, &a.j_out, Complex64::new(3.0, 1.0)).unwrap();
        assert!(dec.is_finite());
    }

    #[test]
    fn rejects_spectrum_outside() {
        let jt = JacobiMatrix::scalar(1.5);
        assert!(matches!(
            renorm_map(&quad(3.0), 1, &jt),
            Err(Error::SpectrumOutside { .. })
        ));
    }

    #[test]
    fn fixed_point_matches_invariant_measure() {
        let f = quad(12.0);
        let limits = Limits::default();
        let r = iterate_fixed_point(&f, &JacobiMatrix::scalar(0.0), 8, 3, &limits).unwrap();
        let mu = spectral_measure(&r.to_jacobi().unwrap()).unwrap();
        let reference = pfr_pullback_iter(&f, &WeightedDiscreteMeasure::point_mass(0.7), 0.0, 10).unwrap();
        assert!(mu.transport_distance(&reference.measure) < 1e-6);
    }

    #[test]
    fn identical_pairs_have_zero_lipschitz_quotient() {
        let f = quad(5.0);
        let a = jacobi_from_measure(&balanced_measure(&backward_orbit(&f, 4, 0.3).unwrap(), 0.0).unwrap()).unwrap();
        let b = jacobi_from_measure(&balanced_measure(&backward_orbit(&f, 4, 0.3).unwrap(), 0.0).unwrap()).unwrap();
        assert_eq!(a.distance(&b).unwrap(), 0.0);
    }
}
