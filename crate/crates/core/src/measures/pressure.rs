use serde::{Deserialize, Serialize};

use crate::polydyn::{backward_levels, ExpandingPolynomial, Limits};
use crate::stats::{linear_fit, log_sum_exp, LinearFit};
use crate::{Error, Result};

/// `log|T'|` at every depth of one backward tree, so that partition sums
/// `Z_n(t) = Σ_k |T'(λ_k)|^{-t}` for many `t` reuse one orbit computation.
#[derive(Debug, Clone)]
pub struct PartitionSums {
    degree: usize,
    base_point: f64,
    /// `levels[n - 1]` holds `log|T'|` at depth `n`.
    levels: Vec<Vec<f64>>,
}

impl PartitionSums {
    pub fn new(p: &ExpandingPolynomial, n_max: usize, x: f64, limits: &Limits) -> Result<Self> {
        let levels = backward_levels(p, n_max, x, limits)?
            .into_iter()
            .map(|o| o.log_abs_tprime().to_vec())
            .collect();
        Ok(PartitionSums {
            degree: p.degree(),
            base_point: x,
            levels,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn base_point(&self) -> f64 {
        self.base_point
    }

    pub fn max_level(&self) -> usize {
        self.levels.len()
    }

    /// `log_N Z_n(t)`.
    pub fn log_sum(&self, n: usize, t: f64) -> f64 {
        let logs = &self.levels[n - 1];
        let ln = if t == 0.0 {
            (logs.len() as f64).ln()
        } else {
            let terms: Vec<f64> = logs.iter().map(|l| -t * l).collect();
            log_sum_exp(&terms)
        };
        ln / (self.degree as f64).ln()
    }

    /// Least squares slope of `n ↦ log_N Z_n(t)` over `n_range` (inclusive).
    pub fn pressure(&self, t: f64, n_range: (usize, usize)) -> Result<PressureEstimate> {
        let (lo, hi) = n_range;
        if lo < 1 || hi <= lo || hi > self.max_level() {
            return Err(Error::InvalidParameter(format!(
                "n_range ({lo}, {hi}) needs 1 <= lo < hi <= {}",
                self.max_level()
            )));
        }
        let ns: Vec<f64> = (lo..=hi).map(|n| n as f64).collect();
        let sums: Vec<f64> = (lo..=hi).map(|n| self.log_sum(n, t)).collect();
        let fit = linear_fit(&ns, &sums);
        let mut warnings = Vec::new();
        // Increments should all share the sign of the slope.
        let tol = 1e-9 + 0.5 * fit.slope.abs();
        for (k, w) in sums.windows(2).enumerate() {
            let step = w[1] - w[0];
            if (step - fit.slope).abs() > tol.max(0.5) {
                warnings.push(format!(
                    "partial sum increment {step:.4} at n={} far from slope {:.4}; hyperbolicity marginal",
                    lo + k + 1,
                    fit.slope
                ));
            }
        }
        Ok(PressureEstimate {
            t,
            value: fit.slope,
            n_range,
            log_sums: sums,
            fit,
            warnings,
        })
    }

    /// Spread of the ratios `Z_{n+1}/Z_n · N^{P}` over `n_range`: the
    /// smallest `C` with every ratio in `[1/C, C]`.
    pub fn ratio_spread(&self, t: f64, n_range: (usize, usize), pressure: f64) -> f64 {
        let (lo, hi) = n_range;
        let mut c: f64 = 1.0;
        for n in lo..hi {
            let log_ratio = self.log_sum(n + 1, t) - self.log_sum(n, t) - pressure;
            c = c.max((log_ratio.abs() * (self.degree as f64).ln()).exp());
        }
        c
    }
}

/// One regression estimate of `P(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressureEstimate {
    pub t: f64,
    pub value: f64,
    pub n_range: (usize, usize),
    /// `log_N Z_n(t)` for `n` in `n_range`.
    pub log_sums: Vec<f64>,
    pub fit: LinearFit,
    pub warnings: Vec<String>,
}

/// Default regression window: `n` from 2 up to the deepest level with at
/// most 2048 nodes.
pub fn default_n_range(degree: usize) -> (usize, usize) {
    let mut hi = 1;
    while degree.pow(hi as u32 + 1) <= 2048 {
        hi += 1;
    }
    (2, hi.max(3))
}

/// `P(t)`: base-`N` exponential growth rate of `Σ_k |T'(λ_k)|^{-t}`.
pub fn pressure_estimate(
    p: &ExpandingPolynomial,
    t: f64,
    n_range: (usize, usize),
    x: f64,
) -> Result<PressureEstimate> {
    let sums = PartitionSums::new(p, n_range.1, x, &Limits::with_max_nodes(usize::MAX >> 1))?;
    sums.pressure(t, n_range)
}

/// Pressure sampled on a grid of `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressureCurve {
    pub t_grid: Vec<f64>,
    pub p_values: Vec<f64>,
    pub n_range: (usize, usize),
    /// Largest absolute regression residual at each `t`.
    pub residuals: Vec<f64>,
}

impl PressureCurve {
    pub fn is_strictly_decreasing(&self) -> bool {
        self.p_values.windows(2).all(|w| w[1] < w[0])
    }

    /// `P(t_k) ≤ (P(t_{k-1}) + P(t_{k+1}))/2 + tol` on a uniform grid.
    pub fn is_midpoint_convex(&self, tol: f64) -> bool {
        self.p_values
            .windows(3)
            .all(|w| w[1] <= 0.5 * (w[0] + w[2]) + tol)
    }

    /// CSV `t,P,residual`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,P,residual\n");
        for i in 0..self.t_grid.len() {
            out.push_str(&format!(
                "{},{},{}\n",
                self.t_grid[i], self.p_values[i], self.residuals[i]
            ));
        }
        out
    }
}

pub fn pressure_curve(sums: &PartitionSums, t_grid: &[f64], n_range: (usize, usize)) -> Result<PressureCurve> {
    let mut p_values = Vec::with_capacity(t_grid.len());
    let mut residuals = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let est = sums.pressure(t, n_range)?;
        p_values.push(est.value);
        residuals.push(est.fit.max_abs_residual());
    }
    Ok(PressureCurve {
        t_grid: t_grid.to_vec(),
        p_values,
        n_range,
        residuals,
    })
}

/// Root `δ` of `P` in `(0, 1]` by bisection.
pub fn pressure_root(sums: &PartitionSums, n_range: (usize, usize)) -> Result<f64> {
    let (mut lo, mut hi) = (0.0, 1.0);
    if sums.pressure(hi, n_range)?.value >= 0.0 {
        return Err(Error::NoPressureRoot);
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if sums.pressure(mid, n_range)?.value > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let delta = 0.5 * (lo + hi);
    debug_assert!(sums.pressure(delta, n_range)?.value.abs() <= 1e-3);
    if delta >= 1.0 {
        return Err(Error::NoPressureRoot);
    }
    Ok(delta)
}

/// `P(t) + P(2 - t)` over `t ∈ [-ε̂, 2 + ε̂]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoSidedCheck {
    pub t: Vec<f64>,
    pub value: Vec<f64>,
    pub max: f64,
    pub passes: bool,
}

/// The grid is built from `half_points` points on `[-ε̂, 1]` and their
/// mirrors `2 - t`, so the table is exactly symmetric.
pub fn two_sided_pressure_check(
    sums: &PartitionSums,
    n_range: (usize, usize),
    eps_hat: f64,
    half_points: usize,
) -> Result<TwoSidedCheck> {
    let half_points = half_points.max(2);
    let step = (1.0 + eps_hat) / (half_points - 1) as f64;
    let left: Vec<f64> = (0..half_points).map(|k| -eps_hat + k as f64 * step).collect();
    let left_values: Vec<f64> = left
        .iter()
        .map(|&t| Ok(sums.pressure(t, n_range)?.value + sums.pressure(2.0 - t, n_range)?.value))
        .collect::<Result<_>>()?;
    let mut t = left.clone();
    let mut value = left_values.clone();
    for k in (0..half_points - 1).rev() {
        t.push(2.0 - left[k]);
        value.push(left_values[k]);
    }
    let max = value.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(TwoSidedCheck {
        t,
        value,
        max,
        passes: max < 0.0,
    })
}

/// Fit of `log_N (d · Σ_k |T'(λ_k)|^{-2})` against `n`. The exponent
/// `τ̂ = -slope = -(1 + P(2))` is positive for hyperbolic maps.
pub fn pressure2_exponent(sums: &PartitionSums, n_range: (usize, usize)) -> Result<(f64, LinearFit)> {
    let est = sums.pressure(2.0, n_range)?;
    let ns: Vec<f64> = (n_range.0..=n_range.1).map(|n| n as f64).collect();
    let ys: Vec<f64> = ns.iter().zip(&est.log_sums).map(|(n, l)| n + l).collect();
    let fit = linear_fit(&ns, &ys);
    Ok((-fit.slope, fit))
}
