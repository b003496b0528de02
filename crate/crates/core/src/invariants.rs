//! ρ/μ invariants of an (α, β)-metric and the σ coefficients of the
//! equivalent tensor form `g = ρ₀[a − σ₁ l⊗l + σ₂ b⊗b + σ₃ η_low⊗η_low]`.
//!
//! The σ values come in two variants. `Derived` follows from matching
//! coefficients against the ρ-form and is what the rest of the crate uses.
//! `Literal` reproduces the printed closed forms for auditing.



#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::family::{jet_infinite_series, Jet2};

/// Guard half-width around `β = 2α` (where `ρ₁ = 0`), relative to
/// `max(1, α, |β|)`.
pub const SIGMA_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Invariants {
    pub rho0: f64,
    pub rho1: f64,
    pub rho_m2: f64,
    pub rho_m1: f64,
    pub mu0: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaVariant {
    Literal,
    Derived,
}

impl SigmaVariant {
    pub fn name(self) -> &'static str {
        match self {
            SigmaVariant::Literal => "literal",
            SigmaVariant::Derived => "derived",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaInvariants {
    pub sigma1: f64,
    pub sigma2: f64,
    pub sigma3: f64,
    pub variant: SigmaVariant,
}

/// The five invariants through their defining relations:
/// `ρ₀ = L_α/(2α)`, `ρ₁ = L_β/2`, `ρ₋₂ = (αL_αα − L_α)/(4α³)`,
/// `ρ₋₁ = L_αβ/(4α)`, `μ₀ = L_ββ/4`.
pub fn rho_invariants(jet: &Jet2, alpha: f64) -> Invariants {
    Invariants {
        rho0: jet.l_alpha / (2.0 * alpha),
        rho1: jet.l_beta / 2.0,
        rho_m2: (alpha * jet.l_alpha_alpha - jet.l_alpha) / (4.0 * alpha * alpha * alpha),
        rho_m1: jet.l_alpha_beta / (4.0 * alpha),
        mu0: jet.l_beta_beta / 4.0,
    }
}

/// Closed forms of the infinite-series invariants.
pub fn rho_infinite_series_closed(alpha: f64, beta: f64) -> Invariants {
    let (a, b) = (alpha, beta);
    let d = b - a;
    Invariants {
        rho0: b.powi(4) / (a * d.powi(3)),
        rho1: b.powi(3) * (b - 2.0 * a) / d.powi(3),
        rho_m2: b.powi(4) * (4.0 * a - b) / (2.0 * a.powi(3) * d.powi(4)),
        rho_m1: b.powi(3) * (b - 4.0 * a) / (2.0 * a * d.powi(4)),
        mu0: b * b * (b * b - 4.0 * a * b + 6.0 * a * a) / (2.0 * d.powi(4)),
    }
}

/// σ invariants from arbitrary ρ-values (any family).
pub fn sigma_from_rho(inv: &Invariants) -> Option<SigmaInvariants> {
    if inv.rho0 == 0.0 || inv.rho1 == 0.0 {
        return None;
    }
    let sigma3 = inv.rho_m1 / (inv.rho0 * inv.rho0 * inv.rho1);
    let sigma1 = sigma3 * inv.rho0 * inv.rho0 - inv.rho_m2 / inv.rho0;
    let sigma2 = inv.mu0 / inv.rho0 - sigma3 * inv.rho1 * inv.rho1;
    let s = SigmaInvariants {
        sigma1,
        sigma2,
        sigma3,
        variant: SigmaVariant::Derived,
    };
    (s.sigma1.is_finite() && s.sigma2.is_finite() && s.sigma3.is_finite()).then_some(s)
}

/// The three printed σ formulas, verbatim.
pub fn sigma_literal(alpha: f64, beta: f64) -> SigmaInvariants {
    let (a, b) = (alpha, beta);
    let d = b - a;
    SigmaInvariants {
        sigma1: d.powi(5) * (b - 4.0 * a) / (2.0 * a * a * (b - 2.0 * a)),
        sigma2: -a.powi(3) / (b * b * d),
        sigma3: a * d.powi(5) * (b - 4.0 * a) / (2.0 * b.powi(8) * (b - 2.0 * a)),
        variant: SigmaVariant::Literal,
    }
}

/// σ invariants of the infinite-series metric at `(α, β)`.
pub fn sigma_invariants(alpha: f64, beta: f64, variant: SigmaVariant) -> Result<SigmaInvariants> {
    let scale = 1.0f64.max(alpha.abs()).max(beta.abs());
    let jet = jet_infinite_series(alpha, beta)?;
    let undefined = Error::SigmaUndefined { alpha, beta };
    match variant {
        SigmaVariant::Literal => {
            if beta == 0.0 || (beta - 2.0 * alpha) == 0.0 {
                return Err(undefined);
            }
            Ok(sigma_literal(alpha, beta))
        }
        SigmaVariant::Derived => {
            if (beta - 2.0 * alpha).abs() <= SIGMA_GUARD * scale || beta.abs() <= SIGMA_GUARD * scale {
                return Err(undefined);
            }
            sigma_from_rho(&rho_invariants(&jet, alpha)).ok_or(undefined)
        }
    }
}
