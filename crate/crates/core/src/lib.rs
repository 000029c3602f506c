//! Numerical laboratory for Jacobi matrices built from balanced measures of
//! hyperbolic real polynomials.
//!
//! The pipeline is
//!
//! 1. [`polydyn`]: an expanding polynomial `f` of degree `N` with real Julia
//!    set, and the `d = N^n` preimages `λ_k` of a point `x` under `T = f^n`;
//! 2. [`measures`]: the measure `μ_x ∝ Σ |T'(λ_k)|^{-t} δ_{λ_k}` and the
//!    pressure `P(t)`;
//! 3. [`jacobi`]: the `d × d` Jacobi matrix `J(x)` of `μ_x`;
//! 4. [`flow`], [`hilbert`], [`renorm`]: the x-derivative of `J(x)`, the
//!    two-weight Hilbert matrix controlling it, and the renormalization map
//!    whose iterates are limit-periodic.
//!
//! ```
//! use ncpfr::polydyn::{backward_orbit, ExpandingPolynomial};
//! use ncpfr::measures::balanced_measure;
//! use ncpfr::jacobi::jacobi_from_measure;
//!
//! let f = ExpandingPolynomial::quadratic(3.0)?;
//! let orbit = backward_orbit(&f, 4, 0.5)?;
//! let mu = balanced_measure(&orbit, 1.0)?;
//! let j = jacobi_from_measure(&mu)?;
//! assert_eq!(j.dim(), 16);
//! # Ok::<(), ncpfr::Error>(())
//! ```

mod ddmath;
pub mod error;
pub mod flow;
pub mod hilbert;
pub mod jacobi;
pub mod linalg;
pub mod measures;
pub mod polydyn;
pub mod renorm;
pub mod stats;

pub use error::{Error, Result};
