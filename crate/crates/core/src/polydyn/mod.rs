//! Expanding real polynomials, their inverse branches, backward orbits and
//! the nested interval systems `D_m = components of (f^m)^{-1}([-1, 1])`.
//!
//! Every polynomial is stored in normalized form: all real solutions of
//! `f(z) = ±1` lie in `[-1, 1]`, so `f^{-1}([-1, 1]) ⊂ [-1, 1]` and the Julia
//! set is a Cantor set inside `[-1, 1]`.

mod certificate;
mod intervals;
mod orbit;
mod polynomial;

pub use certificate::{verify_hyperbolic, HyperbolicityCertificate, SUFFICIENT_HYPERBOLICITY};
pub use intervals::{
    dyadic_hierarchy, dyadic_intervals, smallest_dyadic_containing, DyadicMatch, Interval,
    IntervalSystem,
};
pub use orbit::{backward_levels, backward_orbit, backward_orbit_with, BackwardOrbit};
pub use polynomial::{eval_with_derivatives, ExpandingPolynomial, Family};

use serde::{Deserialize, Serialize};

/// Default cap on the number of backward-orbit nodes `d = N^n`.
pub const DEFAULT_MAX_NODES: usize = 4096;

/// Default relative tolerance for inverse-branch root refinement.
pub const DEFAULT_ROOT_TOL: f64 = 1e-14;

/// Resource and accuracy limits shared by the orbit builders.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    pub max_nodes: usize,
    pub root_tol: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_nodes: DEFAULT_MAX_NODES,
            root_tol: DEFAULT_ROOT_TOL,
        }
    }
}

impl Limits {
    pub fn with_max_nodes(max_nodes: usize) -> Self {
        Limits {
            max_nodes,
            ..Limits::default()
        }
    }

    pub(crate) fn check_nodes(&self, degree: usize, level: usize) -> crate::Result<usize> {
        let requested = (degree as u128).checked_pow(level as u32).unwrap_or(u128::MAX);
        if requested > self.max_nodes as u128 {
            return Err(crate::Error::CapExceeded {
                requested: requested.min(usize::MAX as u128) as usize,
                cap: self.max_nodes,
            });
        }
        Ok(requested as usize)
    }
}

/// Convenience wrapper: all `N` real roots of `f(λ) = y` for `|y| ≤ 1`.
pub fn preimages_one_step(p: &ExpandingPolynomial, y: f64, tol: f64) -> crate::Result<Vec<f64>> {
    p.preimages(y, tol)
}

/// Seeded pairs of distinct points drawn uniformly from the level-`level`
/// cover `(f^level)^{-1}([-1, 1])`: a uniformly chosen component, then a
/// uniform point inside it.
pub fn sample_cover_pairs(
    p: &ExpandingPolynomial,
    level: usize,
    count: usize,
    seed: u64,
) -> crate::Result<Vec<(f64, f64)>> {
    use rand::{Rng, SeedableRng};
    let sys = dyadic_intervals(p, level)?;
    let ivs = sys.dyadic();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
        let iv = ivs[rng.random_range(0..ivs.len())];
        iv.lo + rng.random::<f64>() * iv.len()
    };
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let (a, b) = (draw(&mut rng), draw(&mut rng));
        if (a - b).abs() > 1e-9 {
            out.push((a, b));
        }
    }
    Ok(out)
}
