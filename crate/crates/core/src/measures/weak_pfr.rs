use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::balanced_measure;
use crate::polydyn::{backward_orbit_with, sample_cover_pairs, ExpandingPolynomial, Limits};
use crate::stats::{linear_fit, LinearFit};
use crate::Result;

/// Hölder test function `ψ(λ) = |λ - center|^alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderProbe {
    pub center: f64,
    pub alpha: f64,
}

impl Default for HolderProbe {
    fn default() -> Self {
        HolderProbe {
            center: 0.3,
            alpha: 0.5,
        }
    }
}

impl HolderProbe {
    pub fn eval(&self, x: f64) -> f64 {
        (x - self.center).abs().powf(self.alpha)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakPfrRow {
    pub n: usize,
    /// `max |∫ψ dμ_{x_1} - ∫ψ dμ_{x_2}| / |x_1 - x_2|^γ`.
    pub e_n: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakPfr {
    pub t: f64,
    pub gamma: f64,
    pub rows: Vec<WeakPfrRow>,
    /// `exp` of the slope of `log E_n` against `n`.
    pub q_hat: f64,
    pub fit: LinearFit,
}

/// Decay in `n` of differences of `∫ψ dμ_x` between seeded pairs of points.
#[allow(clippy::too_many_arguments)]
pub fn weak_pfr_experiment(
    p: &ExpandingPolynomial,
    t: f64,
    n_range: (usize, usize),
    probe: HolderProbe,
    gamma: f64,
    pairs: usize,
    seed: u64,
    limits: &Limits,
) -> Result<WeakPfr> {
    let xs = sample_cover_pairs(p, 2, pairs, seed)?;
    weak_pfr_on(p, t, n_range, probe, gamma, &xs, limits)
}

/// [`weak_pfr_experiment`] over caller-supplied pairs.
pub fn weak_pfr_on(
    p: &ExpandingPolynomial,
    t: f64,
    n_range: (usize, usize),
    probe: HolderProbe,
    gamma: f64,
    xs: &[(f64, f64)],
    limits: &Limits,
) -> Result<WeakPfr> {
    let mut rows = Vec::new();
    for n in n_range.0..=n_range.1 {
        let values: Vec<f64> = xs
            .par_iter()
            .map(|&(x1, x2)| {
                let integral = |x: f64| -> Result<f64> {
                    Ok(balanced_measure(&backward_orbit_with(p, n, x, limits)?, t)?
                        .integrate(|l| probe.eval(l)))
                };
                Ok((integral(x1)? - integral(x2)?).abs() / (x1 - x2).abs().powf(gamma))
            })
            .collect::<Result<_>>()?;
        rows.push(WeakPfrRow {
            n,
            e_n: values.into_iter().fold(0.0, f64::max),
        });
    }
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let logs: Vec<f64> = rows.iter().map(|r| r.e_n.ln()).collect();
    let fit = linear_fit(&ns, &logs);
    Ok(WeakPfr {
        t,
        gamma,
        rows,
        q_hat: fit.slope.exp(),
        fit,
    })
}
