//! Numerics for ℝ-complex Finsler spaces carrying the infinite-series
//! (α, β)-metric `F = β²/(β − α)`.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is a pure
//! function of its inputs, so callers are free to fan point sweeps out
//! across threads.
//!
//! Layout, bottom-up:
//!
//! - [`linalg`]: complex-symmetric matrices, LU with partial pivoting.
//! - [`expr`]: the coefficient-field expression language.
//! - [`metric`]: α, β, angular covectors, contraction scalars, fixtures.
//! - [`family`]: second-order jets of `L(α, β)` and finite-difference jets.
//! - [`invariants`]: ρ/μ invariants and both σ variants.
//! - [`tensor`]: fundamental tensors and the Wirtinger Hessian oracle.
//! - [`rank1`]: rank-one determinant and inverse updates, and the three-step inversion.
//! - [`audit`]: literal-vs-derived-vs-oracle findings.
//! - [`sampling`]: deterministic point generation.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod audit;
pub mod error;
pub mod expr;
pub mod family;
pub mod invariants;
pub mod linalg;
pub mod metric;
pub mod rank1;
pub mod sampling;
pub mod tensor;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector, C64};

/// Relative difference `|a − b| / max(|b|, floor)`.
pub fn rel_diff(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / b.abs().max(floor)
}
