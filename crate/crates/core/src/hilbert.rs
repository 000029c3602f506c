//! The matrix `ℍ_t` unitarily equivalent to `H = DF + ½φ'(J)F`, and the
//! two-weight testing machinery for the kernel `1/(x - y)`: step weights
//! `u, v` on the level-`n` intervals, box averages and Poisson averages.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::opnorm;
use crate::polydyn::{
    backward_orbit, dyadic_hierarchy, BackwardOrbit, ExpandingPolynomial, Interval, IntervalSystem,
    Limits,
};
use crate::stats::linear_fit;
use crate::{Error, Result};

/// Node separation below which `build_ht` reports a collision.
pub const MIN_NODE_SPACING: f64 = 1e-13;

/// `ℍ_t(i, j) = |T'_i|^{-(1 - t/2)} K_ij |T'_j|^{-t/2}` with
/// `K_ij = 1/(λ_i - λ_j)` off the diagonal and
/// `K_ii = ((1 - t)/2) T''(λ_i)/T'(λ_i)`.
#[derive(Debug, Clone)]
pub struct HtMatrix {
    pub t: f64,
    pub matrix: DMatrix<f64>,
}

impl HtMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `𝔹`: the off-diagonal part.
    pub fn off_diagonal(&self) -> DMatrix<f64> {
        let mut m = self.matrix.clone();
        m.fill_diagonal(0.0);
        m
    }

    /// `ℍ⁰`: the diagonal part.
    pub fn diagonal(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().cloned().collect()
    }

    pub fn norm(&self) -> f64 {
        opnorm(&self.matrix)
    }

    /// `ℍ⁰ - 𝔹`, the matrix of `H = DF + ½φ'(J)F` in the eigenbasis of `J`
    /// up to a diagonal sign change. Its norm equals `‖H‖`.
    pub fn flow_equivalent(&self) -> DMatrix<f64> {
        let mut m = -self.matrix.clone();
        for i in 0..self.dim() {
            m[(i, i)] = self.matrix[(i, i)];
        }
        m
    }

    pub fn diagonal_norm(&self) -> f64 {
        self.diagonal().iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

pub fn build_ht(orbit: &BackwardOrbit, t: f64) -> Result<HtMatrix> {
    let nodes = orbit.nodes();
    for (i, w) in nodes.windows(2).enumerate() {
        if w[1] - w[0] < MIN_NODE_SPACING {
            return Err(Error::NodeCollision {
                index: i + 1,
                spacing: w[1] - w[0],
            });
        }
    }
    let logs = orbit.log_abs_tprime();
    let d = orbit.len();
    let left: Vec<f64> = logs.iter().map(|l| (-(1.0 - 0.5 * t) * l).exp()).collect();
    let right: Vec<f64> = logs.iter().map(|l| (-0.5 * t * l).exp()).collect();
    let matrix = DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            // |T'|^{-1} without splitting the exponent, to keep it exact.
            0.5 * (1.0 - t) * orbit.tsecond_over_tprime()[i] * (-logs[i]).exp()
        } else {
            left[i] * right[j] / (nodes[i] - nodes[j])
        }
    });
    Ok(HtMatrix { t, matrix })
}

/// `‖𝔹‖`, the discrete two-weight Hilbert transform norm.
pub fn discrete_two_weight_norm(orbit: &BackwardOrbit, t: f64) -> Result<f64> {
    if orbit.len() < 2 {
        return Err(Error::InvalidParameter("two-weight norm needs d >= 2".into()));
    }
    Ok(opnorm(&build_ht(orbit, t)?.off_diagonal()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HtRow {
    pub n: usize,
    pub t: f64,
    pub x: f64,
    pub dim: usize,
    pub ht_norm: f64,
    pub b_norm: f64,
    pub diag_norm: f64,
    /// `‖ℍ⁰ - 𝔹‖ = ‖H‖`.
    pub flow_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HtSummary {
    pub t: f64,
    pub max_all: f64,
    pub max_small_n: f64,
    pub ratio: f64,
}

/// `‖ℍ_t‖`, `‖𝔹‖` and `max|ℍ⁰|` over the grid; rows ordered by `t`, `n`, `x`.
pub fn ht_norm_scan(
    p: &ExpandingPolynomial,
    t_grid: &[f64],
    n_range: (usize, usize),
    x_grid: &[f64],
) -> Result<Vec<HtRow>> {
    let mut orbits = Vec::new();
    for n in n_range.0..=n_range.1 {
        for &x in x_grid {
            orbits.push(backward_orbit(p, n, x)?);
        }
    }
    let mut points = Vec::new();
    for &t in t_grid {
        for o in &orbits {
            points.push((t, o));
        }
    }
    points
        .par_iter()
        .map(|&(t, o)| {
            let h = build_ht(o, t)?;
            Ok(HtRow {
                n: o.level(),
                t,
                x: o.base_point(),
                dim: o.len(),
                ht_norm: h.norm(),
                b_norm: opnorm(&h.off_diagonal()),
                diag_norm: h.diagonal_norm(),
                flow_norm: opnorm(&h.flow_equivalent()),
            })
        })
        .collect()
}

pub fn summarize_ht(rows: &[HtRow], small_n_max: usize) -> Vec<HtSummary> {
    let mut ts: Vec<f64> = Vec::new();
    for r in rows {
        if !ts.contains(&r.t) {
            ts.push(r.t);
        }
    }
    ts.iter()
        .map(|&t| {
            let sel = rows.iter().filter(|r| r.t == t);
            let max_all = sel.clone().map(|r| r.ht_norm).fold(0.0, f64::max);
            let max_small_n = sel
                .filter(|r| r.n <= small_n_max)
                .map(|r| r.ht_norm)
                .fold(0.0, f64::max);
            HtSummary {
                t,
                max_all,
                max_small_n,
                ratio: max_all / max_small_n,
            }
        })
        .collect()
}

/// How the constant value of `|T'|` on a level-`n` interval is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Representative {
    /// `|T'|` at the backward-orbit node of the given base point inside the
    /// interval.
    Node { x: f64 },
    /// `(1/|I_i|) ∫_{I_i} |T'|^{s} dy` by 8-point Gauss–Legendre, for the
    /// relevant exponent `s`.
    BranchMean,
}

impl Default for Representative {
    fn default() -> Self {
        Representative::Node { x: 0.0 }
    }
}

/// Step weights `u = |T'|^{t-1}` and `v = |T'|^{1-t}` on the components of
/// `T^{-1}([-1, 1])`, zero on the gaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoWeightSystem {
    pub intervals: Vec<Interval>,
    pub u_levels: Vec<f64>,
    pub v_levels: Vec<f64>,
    pub t: f64,
    pub eps_hat: f64,
}

const GAUSS8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_48),
    (-0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_48),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
];

fn log_abs_tprime_at(p: &ExpandingPolynomial, n: usize, y: f64) -> f64 {
    let mut z = y;
    let mut acc = 0.0;
    for _ in 0..n {
        acc += p.derivative(z).abs().ln();
        z = p.eval(z);
    }
    acc
}

fn branch_mean(p: &ExpandingPolynomial, n: usize, iv: &Interval, s: f64) -> f64 {
    let (c, r) = (iv.center(), 0.5 * iv.len());
    GAUSS8
        .iter()
        .map(|(node, w)| 0.5 * w * (s * log_abs_tprime_at(p, n, c + r * node)).exp())
        .sum()
}

pub fn step_weights(
    p: &ExpandingPolynomial,
    n: usize,
    t: f64,
    eps_hat: f64,
    rep: Representative,
) -> Result<TwoWeightSystem> {
    let sys = crate::polydyn::dyadic_intervals(p, n)?;
    step_weights_on(p, &sys, t, eps_hat, rep)
}

pub fn step_weights_on(
    p: &ExpandingPolynomial,
    sys: &IntervalSystem,
    t: f64,
    eps_hat: f64,
    rep: Representative,
) -> Result<TwoWeightSystem> {
    let n = sys.level();
    let intervals = sys.dyadic().to_vec();
    let (u_levels, v_levels) = match rep {
        Representative::Node { x } => {
            let orbit = backward_orbit(p, n.max(1), x)?;
            if n == 0 {
                (vec![1.0], vec![1.0])
            } else {
                let logs = orbit.log_abs_tprime();
                debug_assert!(orbit
                    .nodes()
                    .iter()
                    .zip(&intervals)
                    .all(|(l, iv)| iv.contains(*l)));
                (
                    logs.iter().map(|l| ((t - 1.0) * l).exp()).collect(),
                    logs.iter().map(|l| ((1.0 - t) * l).exp()).collect(),
                )
            }
        }
        Representative::BranchMean => intervals
            .iter()
            .map(|iv| (branch_mean(p, n, iv, t - 1.0), branch_mean(p, n, iv, 1.0 - t)))
            .unzip(),
    };
    Ok(TwoWeightSystem {
        intervals,
        u_levels,
        v_levels,
        t,
        eps_hat,
    })
}

/// `(1/π) Σ_i c_i [atan((b_i - c)/h) - atan((a_i - c)/h)]`: the Poisson
/// extension of `Σ c_i χ_{[a_i, b_i]}` at `center(I) + i|I|`.
pub fn poisson_average(intervals: &[Interval], levels: &[f64], range: &Interval) -> Result<f64> {
    let h = range.len();
    if !(h > 0.0) {
        return Err(Error::InvalidParameter("Poisson average needs |I| > 0".into()));
    }
    let c = range.center();
    let terms: Vec<f64> = intervals
        .iter()
        .zip(levels)
        .map(|(iv, lv)| lv * (((iv.hi - c) / h).atan() - ((iv.lo - c) / h).atan()))
        .collect();
    Ok(crate::stats::pairwise_sum(&terms) / std::f64::consts::PI)
}

/// `⟨Σ c_i χ_{I_i}⟩_I`.
pub fn box_average(intervals: &[Interval], levels: &[f64], range: &Interval) -> Result<f64> {
    let h = range.len();
    if !(h > 0.0) {
        return Err(Error::InvalidParameter("box average needs |I| > 0".into()));
    }
    let lo = intervals.partition_point(|iv| iv.hi < range.lo);
    let mut total = 0.0;
    for (iv, lv) in intervals[lo..].iter().zip(&levels[lo..]) {
        if iv.lo > range.hi {
            break;
        }
        if let Some(cut) = iv.intersection(range) {
            total += lv * cut.len();
        }
    }
    Ok(total / h)
}

impl TwoWeightSystem {
    fn powered(&self, levels: &[f64]) -> Vec<f64> {
        levels.iter().map(|l| l.powf(1.0 + self.eps_hat)).collect()
    }

    pub fn u_powered(&self) -> Vec<f64> {
        self.powered(&self.u_levels)
    }

    pub fn v_powered(&self) -> Vec<f64> {
        self.powered(&self.v_levels)
    }

    /// `⟨u^{1+ε}⟩_I ⟨v^{1+ε}⟩_I`.
    pub fn box_test(&self, range: &Interval) -> Result<f64> {
        Ok(box_average(&self.intervals, &self.u_powered(), range)?
            * box_average(&self.intervals, &self.v_powered(), range)?)
    }

    /// `P_I u^{1+ε} · P_I v^{1+ε}`.
    pub fn poisson_test(&self, range: &Interval) -> Result<f64> {
        Ok(poisson_average(&self.intervals, &self.u_powered(), range)?
            * poisson_average(&self.intervals, &self.v_powered(), range)?)
    }

    /// `∫_I u^{1+ε} dx`.
    pub fn u_integral(&self, range: &Interval) -> f64 {
        box_average(&self.intervals, &self.u_powered(), range).unwrap_or(0.0) * range.len()
    }
}

/// Per-level suprema over the intervals of `D_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelProfile {
    pub k: usize,
    pub count: usize,
    pub sup_poisson: f64,
    pub sup_box: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonReport {
    pub t: f64,
    pub eps_hat: f64,
    pub n: usize,
    pub profile: Vec<LevelProfile>,
    /// `γ̂` with `sup_{D_k} P_I u P_I v ≍ N^{-γ̂ (n-k)}`.
    pub poisson_exponent: f64,
    pub poisson_fit_r2: f64,
    /// The same exponent for the box product.
    pub box_exponent: f64,
    /// Profile strictly decreasing in `n - k`.
    pub monotone: bool,
    /// `min ∫_{I_m} u^{1+ε} / ∫_{I_{m+1}} u^{1+ε} - 1` per level `m`.
    pub doubling_delta: Vec<f64>,
    pub sup_dyadic: f64,
    pub sup_random: f64,
    pub sup_adversarial: f64,
    /// Range of `P_I w / ⟨w⟩_I` over dyadic `I` and `w ∈ {u^{1+ε}, v^{1+ε}}`.
    pub localization: (f64, f64),
    pub seed: u64,
    pub random_count: usize,
}

impl PoissonReport {
    pub fn delta_hat(&self) -> f64 {
        self.doubling_delta.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// `sup_random / sup_dyadic`.
    pub fn random_ratio(&self) -> f64 {
        self.sup_random.max(self.sup_adversarial) / self.sup_dyadic
    }
}

/// Seeded random subintervals of `[-1, 1]`.
pub fn random_intervals(count: usize, seed: u64) -> Vec<Interval> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let a: f64 = rng.random_range(-1.0..1.0);
        let b: f64 = rng.random_range(-1.0..1.0);
        if (a - b).abs() > 1e-12 {
            out.push(Interval::new(a.min(b), a.max(b)));
        }
    }
    out
}

/// Intervals straddling each gap: the gap widened by a fraction of its
/// length on both sides, clipped to `[-1, 1]`.
pub fn gap_straddling_intervals(hierarchy: &[IntervalSystem]) -> Vec<Interval> {
    let mut out = Vec::new();
    for sys in hierarchy {
        for g in sys.gaps() {
            for s in [0.05, 0.5, 2.0] {
                let pad = s * g.len();
                out.push(Interval::new((g.lo - pad).max(-1.0), (g.hi + pad).min(1.0)));
            }
        }
    }
    out
}

/// Dyadic profile, doubling and random-interval comparison for the
/// product `P_I u^{1+ε} P_I v^{1+ε}`. `hierarchy` lists `D_0..D_n` and
/// `sys` lives on `D_n`.
pub fn poisson_test_scan(
    sys: &TwoWeightSystem,
    hierarchy: &[IntervalSystem],
    random_count: usize,
    seed: u64,
) -> Result<PoissonReport> {
    let n = hierarchy.len() - 1;
    let up = sys.u_powered();
    let vp = sys.v_powered();
    let mut profile = Vec::with_capacity(n + 1);
    let mut sup_dyadic: f64 = 0.0;
    let mut loc = (f64::INFINITY, 0.0_f64);
    for (k, level) in hierarchy.iter().enumerate() {
        let rows: Vec<(f64, f64, f64, f64)> = level
            .dyadic()
            .par_iter()
            .map(|iv| {
                let pu = poisson_average(&sys.intervals, &up, iv)?;
                let pv = poisson_average(&sys.intervals, &vp, iv)?;
                let bu = box_average(&sys.intervals, &up, iv)?;
                let bv = box_average(&sys.intervals, &vp, iv)?;
                Ok((pu * pv, bu * bv, pu / bu, pv / bv))
            })
            .collect::<Result<_>>()?;
        let sup_poisson = rows.iter().map(|r| r.0).fold(0.0, f64::max);
        let sup_box = rows.iter().map(|r| r.1).fold(0.0, f64::max);
        for r in &rows {
            loc.0 = loc.0.min(r.2).min(r.3);
            loc.1 = loc.1.max(r.2).max(r.3);
        }
        sup_dyadic = sup_dyadic.max(sup_poisson);
        profile.push(LevelProfile {
            k,
            count: rows.len(),
            sup_poisson,
            sup_box,
        });
    }
    let degree = if n >= 1 {
        (hierarchy[1].dyadic().len()) as f64
    } else {
        2.0
    };
    let depth: Vec<f64> = profile.iter().map(|r| (n - r.k) as f64).collect();
    let log_p: Vec<f64> = profile.iter().map(|r| r.sup_poisson.ln() / degree.ln()).collect();
    let log_b: Vec<f64> = profile.iter().map(|r| r.sup_box.ln() / degree.ln()).collect();
    let (poisson_exponent, poisson_fit_r2, box_exponent) = if profile.len() >= 2 {
        let fp = linear_fit(&depth, &log_p);
        let fb = linear_fit(&depth, &log_b);
        (-fp.slope, fp.r_squared, -fb.slope)
    } else {
        (f64::NAN, f64::NAN, f64::NAN)
    };
    // k = n first in depth order: profile must grow with k.
    let monotone = profile.windows(2).all(|w| w[1].sup_poisson > w[0].sup_poisson);

    let mut doubling_delta = Vec::with_capacity(n);
    for m in 0..n {
        let parents = hierarchy[m].dyadic();
        let mut worst = f64::INFINITY;
        for child in hierarchy[m + 1].dyadic() {
            let parent = parents
                .iter()
                .find(|p| p.contains_interval(child))
                .ok_or(Error::OverlappingIntervals {
                    level: m + 1,
                    at: child.lo,
                })?;
            let ratio = sys.u_integral(parent) / sys.u_integral(child);
            worst = worst.min(ratio - 1.0);
        }
        doubling_delta.push(worst);
    }

    let sup_over = |ivs: &[Interval]| -> Result<f64> {
        let vals: Vec<f64> = ivs
            .par_iter()
            .map(|iv| sys.poisson_test(iv))
            .collect::<Result<_>>()?;
        Ok(vals.into_iter().fold(0.0, f64::max))
    };
    let sup_random = sup_over(&random_intervals(random_count, seed))?;
    let sup_adversarial = sup_over(&gap_straddling_intervals(hierarchy))?;

    Ok(PoissonReport {
        t: sys.t,
        eps_hat: sys.eps_hat,
        n,
        profile,
        poisson_exponent,
        poisson_fit_r2,
        box_exponent,
        monotone,
        doubling_delta,
        sup_dyadic,
        sup_random,
        sup_adversarial,
        localization: loc,
        seed,
        random_count,
    })
}

/// Builds `D_0..D_n` and the step weights, then runs [`poisson_test_scan`].
pub fn testing_conditions(
    p: &ExpandingPolynomial,
    n: usize,
    t: f64,
    eps_hat: f64,
    random_count: usize,
    seed: u64,
) -> Result<PoissonReport> {
    let hierarchy = dyadic_hierarchy(p, n, &Limits::default())?;
    let sys = step_weights_on(p, &hierarchy[n], t, eps_hat, Representative::default())?;
    poisson_test_scan(&sys, &hierarchy, random_count, seed)
}
