//! Second-order jets of `L(α, β) = F(α, β)²` for the infinite-series metric
//! and a few comparator (α, β)-families.

use alloc::sync::Arc;
use core::fmt;



#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Half-width of the pole guard around `α = β`, relative to `max(1, α, |β|)`.
pub const POLE_GUARD: f64 = 1e-9;
/// Base step of the finite-difference jet, relative to `max(1, α, |β|)`.
pub const FD_JET_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet2 {
    pub l: f64,
    pub l_alpha: f64,
    pub l_beta: f64,
    pub l_alpha_alpha: f64,
    pub l_alpha_beta: f64,
    pub l_beta_beta: f64,
}

impl Jet2 {
    pub fn as_array(&self) -> [f64; 6] {
        [
            self.l,
            self.l_alpha,
            self.l_beta,
            self.l_alpha_alpha,
            self.l_alpha_beta,
            self.l_beta_beta,
        ]
    }

    /// Entrywise relative difference, each entry measured against the
    /// largest magnitude among `other`'s entries of the same order
    /// (value, gradient, Hessian).
    pub fn rel_diff_by_order(&self, other: &Jet2) -> [f64; 6] {
        let a = self.as_array();
        let b = other.as_array();
        let scale = |idx: &[usize]| idx.iter().map(|&i| b[i].abs()).fold(f64::MIN_POSITIVE, f64::max);
        let s0 = scale(&[0]);
        let s1 = scale(&[1, 2]);
        let s2 = scale(&[3, 4, 5]);
        let order_scale = [s0, s1, s1, s2, s2, s2];
        let mut out = [0.0; 6];
        for i in 0..6 {
            out[i] = (a[i] - b[i]).abs() / order_scale[i];
        }
        out
    }
}

pub type CustomLagrangian = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum FamilyKind {
    /// `F = β²/(β − α)`.
    InfiniteSeries,
    /// `F = α + β`.
    Randers,
    /// `F = α²/β`.
    Kropina,
    /// `F = α²/(α − β)`.
    Matsumoto,
    /// Black-box `L(α, β)`; jets come from finite differences only.
    Custom(CustomLagrangian),
}

impl fmt::Debug for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl PartialEq for FamilyKind {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (FamilyKind::Custom(a), FamilyKind::Custom(b)) => Arc::ptr_eq(a, b),
            _ => core::mem::discriminant(self) == core::mem::discriminant(other),
        }
    }
}

impl FamilyKind {
    pub fn name(&self) -> &'static str {
        match self {
            FamilyKind::InfiniteSeries => "infinite-series",
            FamilyKind::Randers => "randers",
            FamilyKind::Kropina => "kropina",
            FamilyKind::Matsumoto => "matsumoto",
            FamilyKind::Custom(_) => "custom",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "infinite-series" => FamilyKind::InfiniteSeries,
            "randers" => FamilyKind::Randers,
            "kropina" => FamilyKind::Kropina,
            "matsumoto" => FamilyKind::Matsumoto,
            _ => return None,
        })
    }

    pub fn custom(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        FamilyKind::Custom(Arc::new(f))
    }

    /// `L(α, β)`.
    pub fn lagrangian(&self, alpha: f64, beta: f64) -> f64 {
        match self {
            FamilyKind::InfiniteSeries => {
                let f = beta * beta / (beta - alpha);
                f * f
            }
            FamilyKind::Randers => (alpha + beta).powi(2),
            FamilyKind::Kropina => (alpha * alpha / beta).powi(2),
            FamilyKind::Matsumoto => (alpha * alpha / (alpha - beta)).powi(2),
            FamilyKind::Custom(f) => f(alpha, beta),
        }
    }

    /// Distance of `(α, β)` from the declared singular locus, if any.
    pub fn singular_distance(&self, alpha: f64, beta: f64) -> Option<f64> {
        match self {
            FamilyKind::InfiniteSeries | FamilyKind::Matsumoto => Some((beta - alpha).abs()),
            FamilyKind::Kropina => Some(beta.abs()),
            FamilyKind::Randers | FamilyKind::Custom(_) => None,
        }
    }

    /// Closed-form jet when the family has one.
    pub fn analytic_jet(&self, alpha: f64, beta: f64) -> Option<Result<Jet2>> {
        Some(match self {
            FamilyKind::InfiniteSeries => jet_infinite_series(alpha, beta),
            FamilyKind::Randers => Ok(jet_randers(alpha, beta)),
            FamilyKind::Kropina => jet_kropina(alpha, beta),
            FamilyKind::Matsumoto => jet_matsumoto(alpha, beta),
            FamilyKind::Custom(_) => return None,
        })
    }

    /// Analytic jet if available, finite differences otherwise.
    pub fn jet(&self, alpha: f64, beta: f64) -> Result<Jet2> {
        match self.analytic_jet(alpha, beta) {
            Some(j) => j,
            None => jet_fd(self, alpha, beta),
        }
    }
}

fn scale(alpha: f64, beta: f64) -> f64 {
    1.0f64.max(alpha.abs()).max(beta.abs())
}

fn pole_check(alpha: f64, beta: f64) -> Result<f64> {
    let d = beta - alpha;
    if d.abs() <= POLE_GUARD * scale(alpha, beta) {
        return Err(Error::PoleAtAlphaEqualsBeta { alpha, beta });
    }
    Ok(d)
}

/// Closed-form jet of `L = β⁴/(β − α)²`.
pub fn jet_infinite_series(alpha: f64, beta: f64) -> Result<Jet2> {
    let d = pole_check(alpha, beta)?;
    let (a, b) = (alpha, beta);
    let b2 = b * b;
    let b3 = b2 * b;
    let b4 = b2 * b2;
    let d2 = d * d;
    let d3 = d2 * d;
    let d4 = d2 * d2;
    Ok(Jet2 {
        l: b4 / d2,
        l_alpha: 2.0 * b4 / d3,
        l_beta: 2.0 * b3 * (b - 2.0 * a) / d3,
        l_alpha_alpha: 6.0 * b4 / d4,
        l_alpha_beta: 2.0 * b3 * (b - 4.0 * a) / d4,
        l_beta_beta: 2.0 * b2 * (b2 - 4.0 * a * b + 6.0 * a * a) / d4,
    })
}

/// `L = (α + β)²`.
pub fn jet_randers(alpha: f64, beta: f64) -> Jet2 {
    let s = alpha + beta;
    Jet2 {
        l: s * s,
        l_alpha: 2.0 * s,
        l_beta: 2.0 * s,
        l_alpha_alpha: 2.0,
        l_alpha_beta: 2.0,
        l_beta_beta: 2.0,
    }
}

/// `L = α⁴/β²`.
pub fn jet_kropina(alpha: f64, beta: f64) -> Result<Jet2> {
    if beta.abs() <= POLE_GUARD * scale(alpha, beta) {
        return Err(Error::TooCloseToSingularLocus {
            distance: beta.abs(),
            required: POLE_GUARD * scale(alpha, beta),
        });
    }
    let (a, b) = (alpha, beta);
    let a2 = a * a;
    let b2 = b * b;
    Ok(Jet2 {
        l: a2 * a2 / b2,
        l_alpha: 4.0 * a2 * a / b2,
        l_beta: -2.0 * a2 * a2 / (b2 * b),
        l_alpha_alpha: 12.0 * a2 / b2,
        l_alpha_beta: -8.0 * a2 * a / (b2 * b),
        l_beta_beta: 6.0 * a2 * a2 / (b2 * b2),
    })
}

/// `L = α⁴/(α − β)²`.
pub fn jet_matsumoto(alpha: f64, beta: f64) -> Result<Jet2> {
    let d = -pole_check(alpha, beta)?;
    let (a, b) = (alpha, beta);
    let a2 = a * a;
    let a3 = a2 * a;
    let a4 = a2 * a2;
    let d2 = d * d;
    let d3 = d2 * d;
    let d4 = d2 * d2;
    Ok(Jet2 {
        l: a4 / d2,
        l_alpha: 2.0 * a3 * (a - 2.0 * b) / d3,
        l_beta: 2.0 * a4 / d3,
        l_alpha_alpha: 2.0 * a2 * (a2 - 4.0 * a * b + 6.0 * b * b) / d4,
        l_alpha_beta: 2.0 * a3 * (a - 4.0 * b) / d4,
        l_beta_beta: 6.0 * a4 / d4,
    })
}

/// One pass of the 3×3 stencil at step `h`.
fn stencil(f: &dyn Fn(f64, f64) -> f64, a: f64, b: f64, h: f64) -> Jet2 {
    let f00 = f(a, b);
    let fp0 = f(a + h, b);
    let fm0 = f(a - h, b);
    let f0p = f(a, b + h);
    let f0m = f(a, b - h);
    let fpp = f(a + h, b + h);
    let fpm = f(a + h, b - h);
    let fmp = f(a - h, b + h);
    let fmm = f(a - h, b - h);
    let h2 = h * h;
    Jet2 {
        l: f00,
        l_alpha: (fp0 - fm0) / (2.0 * h),
        l_beta: (f0p - f0m) / (2.0 * h),
        l_alpha_alpha: (fp0 - 2.0 * f00 + fm0) / h2,
        l_alpha_beta: (fpp - fpm - fmp + fmm) / (4.0 * h2),
        l_beta_beta: (f0p - 2.0 * f00 + f0m) / h2,
    }
}

/// Central-difference jet of any family.
///
/// Uses the 9-point stencil at steps `h` and `h/2` with one Richardson
/// step, `h = FD_JET_STEP · max(1, α, |β|)`.
pub fn jet_fd(kind: &FamilyKind, alpha: f64, beta: f64) -> Result<Jet2> {
    let h = FD_JET_STEP * scale(alpha, beta);
    if let Some(dist) = kind.singular_distance(alpha, beta) {
        if dist <= 10.0 * h {
            return Err(Error::TooCloseToSingularLocus {
                distance: dist,
                required: 10.0 * h,
            });
        }
    }
    let f = |a: f64, b: f64| kind.lagrangian(a, b);
    let coarse = stencil(&f, alpha, beta, h).as_array();
    let fine = stencil(&f, alpha, beta, h / 2.0).as_array();
    let mut r = [0.0; 6];
    for i in 0..6 {
        r[i] = (4.0 * fine[i] - coarse[i]) / 3.0;
    }
    Ok(Jet2 {
        l: fine[0],
        l_alpha: r[1],
        l_beta: r[2],
        l_alpha_alpha: r[3],
        l_alpha_beta: r[4],
        l_beta_beta: r[5],
    })
}

/// Residuals of the four Euler relations for a 2-homogeneous `L`,
/// each normalized by `max(1, |2L|)`:
///
/// 1. `αL_α + βL_β − 2L`
/// 2. `αL_αα + βL_αβ − L_α`
/// 3. `αL_αβ + βL_ββ − L_β`
/// 4. `α²L_αα + 2αβL_αβ + β²L_ββ − 2L`
pub fn euler_residuals(jet: &Jet2, alpha: f64, beta: f64) -> [f64; 4] {
    let norm = 1.0f64.max((2.0 * jet.l).abs());
    let (a, b) = (alpha, beta);
    [
        (a * jet.l_alpha + b * jet.l_beta - 2.0 * jet.l).abs() / norm,
        (a * jet.l_alpha_alpha + b * jet.l_alpha_beta - jet.l_alpha).abs() / norm,
        (a * jet.l_alpha_beta + b * jet.l_beta_beta - jet.l_beta).abs() / norm,
        (a * a * jet.l_alpha_alpha + 2.0 * a * b * jet.l_alpha_beta + b * b * jet.l_beta_beta - 2.0 * jet.l).abs()
            / norm,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spot_values_at_one_two() {
        let j = jet_infinite_series(1.0, 2.0).unwrap();
        assert_eq!(j.as_array(), [16.0, 32.0, 0.0, 96.0, -32.0, 16.0]);
        let fd = jet_fd(&FamilyKind::InfiniteSeries, 1.0, 2.0).unwrap();
        for r in fd.rel_diff_by_order(&j) {
            assert!(r < 1e-6, "{r}");
        }
    }

    #[test]
    fn one_three_and_euler() {
        let j = jet_infinite_series(1.0, 3.0).unwrap();
        assert_eq!(j.l, 20.25);
        assert_eq!(j.l_alpha, 20.25);
        assert_eq!(j.l_beta, 6.75);
        assert_eq!(1.0 * j.l_alpha + 3.0 * j.l_beta, 2.0 * j.l);
    }

    #[test]
    fn beta_zero_vanishes() {
        let j = jet_infinite_series(1.0, 0.0).unwrap();
        assert!(j.as_array().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn pole_is_rejected() {
        assert!(matches!(
            jet_infinite_series(1.0, 1.0),
            Err(Error::PoleAtAlphaEqualsBeta { .. })
        ));
        assert!(matches!(
            jet_fd(&FamilyKind::InfiniteSeries, 1.0, 1.0 + 1e-5),
            Err(Error::TooCloseToSingularLocus { .. })
        ));
    }

    #[test]
    fn randers_fd_matches_analytic() {
        let fd = jet_fd(&FamilyKind::Randers, 1.0, 2.0).unwrap();
        assert!((fd.l - 9.0).abs() < 1e-12);
        assert!((fd.l_alpha - 6.0).abs() < 1e-8);
        for r in fd.rel_diff_by_order(&jet_randers(1.0, 2.0)) {
            assert!(r < 1e-6, "{r}");
        }
    }

    #[test]
    fn custom_beta_independent() {
        let k = FamilyKind::custom(|a, _| a * a);
        let fd = jet_fd(&k, 2.0, 5.0).unwrap();
        assert!(fd.l_beta.abs() < 1e-9);
        assert!(fd.l_beta_beta.abs() < 1e-6);
        assert!((fd.l_alpha_alpha - 2.0).abs() < 1e-6);
    }

    #[test]
    fn comparator_jets_match_fd() {
        for kind in [FamilyKind::Kropina, FamilyKind::Matsumoto] {
            for &(a, b) in &[(1.0, 0.4), (2.0, 0.7), (0.8, 3.0)] {
                let exact = kind.analytic_jet(a, b).unwrap().unwrap();
                let fd = jet_fd(&kind, a, b).unwrap();
                for r in fd.rel_diff_by_order(&exact) {
                    assert!(r < 1e-6, "{:?} {r}", kind);
                }
                for r in euler_residuals(&exact, a, b) {
                    assert!(r < 1e-12);
                }
            }
        }
    }

    #[test]
    fn euler_residuals_detect_faults() {
        let j = jet_infinite_series(1.0, 2.0).unwrap();
        assert!(euler_residuals(&j, 1.0, 2.0).iter().all(|&r| r <= 1e-12));
        let mut bad = j;
        bad.l_beta += 1.0;
        let r = euler_residuals(&bad, 1.0, 2.0);
        // β·ΔL_β = 2 against |2L| = 32; the third relation sees ΔL_β = 1
        assert_eq!(r[0], 2.0 / 32.0);
        assert_eq!(r[2], 1.0 / 32.0);
        let fd = jet_fd(&FamilyKind::InfiniteSeries, 1.5, 4.0).unwrap();
        assert!(euler_residuals(&fd, 1.5, 4.0).iter().all(|&r| r <= 1e-5));
    }

    #[test]
    fn two_homogeneity() {
        let base = jet_infinite_series(0.7, 1.9).unwrap().l;
        for lambda in [0.5, 2.0, 7.0] {
            let scaled = jet_infinite_series(0.7 * lambda, 1.9 * lambda).unwrap().l;
            assert!((scaled - lambda * lambda * base).abs() <= 1e-12 * scaled.abs());
        }
    }
}
