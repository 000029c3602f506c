//! Discrete probability measures on the real line: balanced measures of a
//! backward orbit, pullbacks by the adjoint transfer operator, and the
//! pressure function.

mod pressure;
mod weak_pfr;

pub use pressure::{
    default_n_range, pressure2_exponent, pressure_curve, pressure_estimate, pressure_root,
    two_sided_pressure_check, PartitionSums, PressureCurve, PressureEstimate, TwoSidedCheck,
};
pub use weak_pfr::{weak_pfr_experiment, weak_pfr_on, HolderProbe, WeakPfr, WeakPfrRow};

use serde::{Deserialize, Serialize};

use crate::polydyn::{BackwardOrbit, ExpandingPolynomial, Limits};
use crate::stats::log_sum_exp;
use crate::{Error, Result};

/// Smallest normalized weight that the double precision pipeline accepts.
pub const MIN_WEIGHT: f64 = 1e-280;

/// Nodes with weights kept as natural logarithms, normalized to total mass 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedDiscreteMeasure {
    nodes: Vec<f64>,
    log_weights: Vec<f64>,
}

impl WeightedDiscreteMeasure {
    /// Sorts the nodes, normalizes the weights and rejects repeated nodes.
    pub fn from_log_weights(nodes: &[f64], log_weights: &[f64]) -> Result<Self> {
        if nodes.len() != log_weights.len() || nodes.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "measure needs equally many nodes and weights, got {} and {}",
                nodes.len(),
                log_weights.len()
            )));
        }
        if let Some(i) = nodes.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(format!("node {i} is not finite")));
        }
        if log_weights.iter().any(|w| w.is_nan() || *w == f64::INFINITY) {
            return Err(Error::InvalidParameter("log-weights must be finite".into()));
        }
        let mut order: Vec<usize> = (0..nodes.len()).collect();
        order.sort_by(|&a, &b| nodes[a].total_cmp(&nodes[b]));
        let sorted: Vec<f64> = order.iter().map(|&i| nodes[i]).collect();
        for i in 1..sorted.len() {
            if sorted[i] <= sorted[i - 1] {
                return Err(Error::DuplicateNodes {
                    index: i,
                    value: sorted[i],
                });
            }
        }
        let raw: Vec<f64> = order.iter().map(|&i| log_weights[i]).collect();
        let total = log_sum_exp(&raw);
        if !total.is_finite() {
            return Err(Error::InvalidParameter("weights sum to zero".into()));
        }
        let log_weights: Vec<f64> = raw.iter().map(|w| w - total).collect();
        if let Some(min) = log_weights.iter().cloned().reduce(f64::min) {
            if min < MIN_WEIGHT.ln() {
                return Err(Error::WeightUnderflow { min_log_weight: min });
            }
        }
        Ok(WeightedDiscreteMeasure {
            nodes: sorted,
            log_weights,
        })
    }

    /// Same as [`from_log_weights`](Self::from_log_weights) with linear weights.
    pub fn from_weights(nodes: &[f64], weights: &[f64]) -> Result<Self> {
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidParameter("weights must be positive".into()));
        }
        let logs: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
        Self::from_log_weights(nodes, &logs)
    }

    pub fn point_mass(x: f64) -> Self {
        WeightedDiscreteMeasure {
            nodes: vec![x],
            log_weights: vec![0.0],
        }
    }

    /// Trusted constructor for already sorted, normalized data.
    pub(crate) fn from_parts(nodes: Vec<f64>, log_weights: Vec<f64>) -> Self {
        debug_assert_eq!(nodes.len(), log_weights.len());
        WeightedDiscreteMeasure { nodes, log_weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|w| w.exp()).collect()
    }

    /// `∫ ψ dμ`.
    pub fn integrate(&self, psi: impl Fn(f64) -> f64) -> f64 {
        let terms: Vec<f64> = self
            .nodes
            .iter()
            .zip(&self.log_weights)
            .map(|(x, w)| w.exp() * psi(*x))
            .collect();
        crate::stats::pairwise_sum(&terms)
    }

    /// Wasserstein-1 distance `∫ |F_μ - F_ν| dx` through the distribution
    /// functions.
    pub fn transport_distance(&self, other: &WeightedDiscreteMeasure) -> f64 {
        let (a, b) = (self.weights(), other.weights());
        let (mut i, mut j) = (0, 0);
        let (mut fa, mut fb) = (0.0_f64, 0.0_f64);
        let mut last: Option<f64> = None;
        let mut total = 0.0;
        while i < self.len() || j < other.len() {
            let x = match (self.nodes.get(i), other.nodes.get(j)) {
                (Some(&u), Some(&v)) => u.min(v),
                (Some(&u), None) => u,
                (None, Some(&v)) => v,
                (None, None) => unreachable!(),
            };
            if let Some(prev) = last {
                total += (fa - fb).abs() * (x - prev);
            }
            while i < self.len() && self.nodes[i] == x {
                fa += a[i];
                i += 1;
            }
            while j < other.len() && other.nodes[j] == x {
                fb += b[j];
                j += 1;
            }
            last = Some(x);
        }
        total
    }

    /// CSV with header `node,log_weight`; values use shortest round-trip text.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("node,log_weight\n");
        for (x, w) in self.nodes.iter().zip(&self.log_weights) {
            out.push_str(&format!("{x},{w}\n"));
        }
        out
    }
}

/// `μ_x ∝ Σ_k |T'(λ_k)|^{-t} δ_{λ_k}` over the nodes of `orbit`.
pub fn balanced_measure(orbit: &BackwardOrbit, t: f64) -> Result<WeightedDiscreteMeasure> {
    if !t.is_finite() {
        return Err(Error::InvalidParameter(format!("t must be finite, got {t}")));
    }
    let raw: Vec<f64> = if t == 0.0 {
        vec![0.0; orbit.len()]
    } else {
        orbit.log_abs_tprime().iter().map(|l| -t * l).collect()
    };
    let total = log_sum_exp(&raw);
    let log_weights: Vec<f64> = raw.iter().map(|w| w - total).collect();
    let min = log_weights.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < MIN_WEIGHT.ln() {
        return Err(Error::WeightUnderflow { min_log_weight: min });
    }
    Ok(WeightedDiscreteMeasure::from_parts(
        orbit.nodes().to_vec(),
        log_weights,
    ))
}

/// Result of one application of the normalized adjoint transfer operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Pullback {
    pub measure: WeightedDiscreteMeasure,
    /// Number of preimages merged because two parents shared them. Nonzero
    /// values signal numerical trouble: hyperbolic maps have no collisions.
    pub merged: usize,
}

/// `G_φ μ = L*_φ μ / ⟨1, L*_φ μ⟩` with `φ = -t log|f'|`.
pub fn pfr_pullback(p: &ExpandingPolynomial, mu: &WeightedDiscreteMeasure, t: f64) -> Result<Pullback> {
    pfr_pullback_with(p, mu, t, &Limits::default())
}

pub fn pfr_pullback_with(
    p: &ExpandingPolynomial,
    mu: &WeightedDiscreteMeasure,
    t: f64,
    limits: &Limits,
) -> Result<Pullback> {
    let size = mu.len() * p.degree();
    if size > limits.max_nodes {
        return Err(Error::CapExceeded {
            requested: size,
            cap: limits.max_nodes,
        });
    }
    let mut rows: Vec<(f64, f64)> = Vec::with_capacity(size);
    for (y, w) in mu.nodes.iter().zip(&mu.log_weights) {
        if y.abs() > 1.0 + 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "pullback needs nodes in [-1, 1], got {y}"
            )));
        }
        for lambda in p.preimages(y.clamp(-1.0, 1.0), limits.root_tol)? {
            let raw = if t == 0.0 {
                *w
            } else {
                w - t * p.derivative(lambda).abs().ln()
            };
            rows.push((lambda, raw));
        }
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut nodes: Vec<f64> = Vec::with_capacity(rows.len());
    let mut raw: Vec<f64> = Vec::with_capacity(rows.len());
    let mut merged = 0;
    for (x, w) in rows {
        if let Some(&last) = nodes.last() {
            if x - last <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
                let prev = raw.last_mut().expect("paired with nodes");
                *prev = log_sum_exp(&[*prev, w]);
                merged += 1;
                continue;
            }
        }
        nodes.push(x);
        raw.push(w);
    }
    let total = log_sum_exp(&raw);
    let log_weights: Vec<f64> = raw.iter().map(|w| w - total).collect();
    let min = log_weights.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < MIN_WEIGHT.ln() {
        return Err(Error::WeightUnderflow { min_log_weight: min });
    }
    Ok(Pullback {
        measure: WeightedDiscreteMeasure::from_parts(nodes, log_weights),
        merged,
    })
}

/// `n` successive pullbacks of `μ`.
pub fn pfr_pullback_iter(
    p: &ExpandingPolynomial,
    mu: &WeightedDiscreteMeasure,
    t: f64,
    n: usize,
) -> Result<Pullback> {
    let mut current = Pullback {
        measure: mu.clone(),
        merged: 0,
    };
    for _ in 0..n {
        let next = pfr_pullback(p, &current.measure, t)?;
        current = Pullback {
            measure: next.measure,
            merged: current.merged + next.merged,
        };
    }
    Ok(current)
}
