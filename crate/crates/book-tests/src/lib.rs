//! The guide's chapters as doc modules, so `cargo test` runs every sample.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/polynomials.md")]
pub mod polynomials {}

#[doc = include_str!("../../../book/src/measures.md")]
pub mod measures {}

#[doc = include_str!("../../../book/src/jacobi.md")]
pub mod jacobi {}

#[doc = include_str!("../../../book/src/flow.md")]
pub mod flow {}

#[doc = include_str!("../../../book/src/hilbert.md")]
pub mod hilbert {}

#[doc = include_str!("../../../book/src/renorm.md")]
pub mod renorm {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
