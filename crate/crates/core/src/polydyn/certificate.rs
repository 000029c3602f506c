use serde::{Deserialize, Serialize};

use super::{backward_orbit_with, intervals::dyadic_intervals_with, ExpandingPolynomial, Limits};
use crate::Result;

/// Distance of every critical value from the Julia set above which a map is
/// treated as "sufficiently hyperbolic" (critical values at least 10 in
/// modulus, Julia set inside `[-1, 1]`).
pub const SUFFICIENT_HYPERBOLICITY: f64 = 9.0;

/// Numerical evidence that `|(f^n)'| ≥ c Q^n` on the Julia set and that the
/// critical orbit stays away from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicityCertificate {
    pub is_hyperbolic: bool,
    /// `min |(f^n)'(λ)|^{1/n}` over sampled points of `J_n(f)` at the deepest level.
    pub expansion_q: f64,
    /// `min_m min_λ |(f^m)'(λ)| / Q^m` over the checked levels.
    pub expansion_c: f64,
    /// `min_i dist(f(c_i), J_n(f))` at the deepest level.
    pub sufficiency_a: f64,
    pub levels_checked: usize,
    /// Whether `sufficiency_a` reaches the requested threshold.
    pub threshold_met: bool,
}

/// Checks hyperbolicity on the level-`max_level` cover of the Julia set.
///
/// The sampled points are the endpoints of the intervals of `D_m`, i.e. the
/// `f^m`-preimages of `±1`.
pub fn verify_hyperbolic(
    p: &ExpandingPolynomial,
    max_level: usize,
    a_threshold: f64,
) -> Result<HyperbolicityCertificate> {
    let limits = Limits {
        max_nodes: usize::MAX,
        ..Limits::default()
    };
    let not_hyperbolic = |level: usize| HyperbolicityCertificate {
        is_hyperbolic: false,
        expansion_q: f64::NAN,
        expansion_c: f64::NAN,
        sufficiency_a: 0.0,
        levels_checked: level,
        threshold_met: false,
    };

    if p.critical_values().iter().any(|t| t.abs() <= 1.0) || max_level == 0 {
        return Ok(not_hyperbolic(0));
    }

    // Per-level minima of log|(f^m)'| over interval endpoints.
    let mut min_logs = Vec::with_capacity(max_level);
    let mut cover = None;
    for m in 1..=max_level {
        let sys = match dyadic_intervals_with(p, m, &limits) {
            Ok(sys) => sys,
            Err(_) => return Ok(not_hyperbolic(m)),
        };
        let mut min_log = f64::INFINITY;
        for end in [-1.0, 1.0] {
            let orbit = match backward_orbit_with(p, m, end, &limits) {
                Ok(o) => o,
                Err(_) => return Ok(not_hyperbolic(m)),
            };
            min_log = orbit
                .log_abs_tprime()
                .iter()
                .cloned()
                .fold(min_log, f64::min);
        }
        min_logs.push(min_log);
        cover = Some(sys);
    }
    let cover = cover.expect("max_level >= 1");

    let q = (min_logs[max_level - 1] / max_level as f64).exp();
    let c = min_logs
        .iter()
        .enumerate()
        .map(|(i, &l)| (l - (i + 1) as f64 * q.ln()).exp())
        .fold(f64::INFINITY, f64::min);
    let critical_point_inside = p
        .critical_points()
        .iter()
        .any(|&cp| cover.distance_to_cover(cp) == 0.0);
    let sufficiency_a = p
        .critical_values()
        .iter()
        .map(|&t| cover.distance_to_cover(t))
        .fold(f64::INFINITY, f64::min);
    let is_hyperbolic = !critical_point_inside && sufficiency_a > 0.0 && q > 1.0;
    Ok(HyperbolicityCertificate {
        is_hyperbolic,
        expansion_q: q,
        expansion_c: c,
        sufficiency_a,
        levels_checked: max_level,
        threshold_met: is_hyperbolic && sufficiency_a >= a_threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polydyn::Family;

    #[test]
    fn quadratic_three_is_hyperbolic() {
        let p = ExpandingPolynomial::quadratic(3.0).unwrap();
        let cert = verify_hyperbolic(&p, 8, SUFFICIENT_HYPERBOLICITY).unwrap();
        assert!(cert.is_hyperbolic);
        assert!(cert.expansion_q > 1.0);
        assert!(!cert.threshold_met);
    }

    #[test]
    fn cheb3_ten_is_sufficiently_hyperbolic() {
        let p = ExpandingPolynomial::scaled_cheb3(10.0).unwrap();
        let cert = verify_hyperbolic(&p, 6, SUFFICIENT_HYPERBOLICITY).unwrap();
        assert!(cert.is_hyperbolic);
        assert!(cert.sufficiency_a >= 9.0);
        assert!(cert.threshold_met);
    }

    #[test]
    fn cheb3_small_scale_reports_small_margin() {
        let p = ExpandingPolynomial::scaled_cheb3(1.5).unwrap();
        let cert = verify_hyperbolic(&p, 6, SUFFICIENT_HYPERBOLICITY).unwrap();
        assert!(cert.is_hyperbolic);
        assert!(cert.sufficiency_a < 1.0);
    }

    #[test]
    fn raw_chebyshev_is_not_hyperbolic() {
        let p = ExpandingPolynomial::from_parts_unchecked(
            vec![0.0, -3.0, 0.0, 4.0],
            Family::ScaledCheb3 { c: 1.0 },
        )
        .unwrap();
        let cert = verify_hyperbolic(&p, 4, SUFFICIENT_HYPERBOLICITY).unwrap();
        assert!(!cert.is_hyperbolic);
    }
}
