//! Ground data of the (α, β)-metric at a point `(z, η)`.
//!
//! `α² = Re{a_ij η^i η^j + a_ij̄ η^i η̄^j}` and `β = Re{b_i η^i}`. The angular
//! covector is the derivative-consistent `l_i = a_ij η^j + a_ij̄ η̄^j`, so
//! that `∂α/∂η^i = l_i / (2α)`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;


use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::expr::{parse, Expr, FieldTable, FieldValues};
use crate::linalg::{c, contract, lu_invert, re, CMatrix, CVector, C64};

/// `α² ≤ DEGENERATE_ALPHA · ‖η‖²` is rejected.
pub const DEGENERATE_ALPHA: f64 = 1e-14;

/// Names accepted on the command line.
pub const FIXTURE_NAMES: [&str; 3] = ["flat-real", "c3-example", "random-seeded"];

/// A metric definition: coefficient fields plus a display name.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricData {
    pub name: String,
    pub fields: FieldTable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationPoint {
    pub z: CVector,
    pub eta: CVector,
}

impl EvaluationPoint {
    pub fn new(z: CVector, eta: CVector) -> Self {
        EvaluationPoint { z, eta }
    }

    /// Same base point, fibre scaled by a real factor.
    pub fn scaled(&self, lambda: f64) -> Self {
        EvaluationPoint {
            z: self.z.clone(),
            eta: self.eta.scale_real(lambda),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundValues {
    pub alpha: f64,
    pub alpha_sq: f64,
    pub beta: f64,
    /// `a_ij(z)`.
    pub a: CMatrix,
    /// `a_ij̄(z)`, Hermitian.
    pub a_mixed: CMatrix,
    pub b: CVector,
    pub eta: CVector,
    pub l: CVector,
    pub l_bar: CVector,
}

impl GroundValues {
    pub fn n(&self) -> usize {
        self.eta.len()
    }

    /// `β > α > 0`, where the infinite-series metric is positive.
    pub fn is_valid_region(&self) -> bool {
        self.beta > self.alpha && self.alpha > 0.0
    }

    pub fn is_non_hermitian(&self) -> bool {
        self.a_mixed.max_abs() <= 1e-14 * self.a.max_abs().max(1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionScalars {
    /// `γ = l_k η^k`.
    pub gamma: C64,
    /// `ε = b_j η^j`.
    pub epsilon: C64,
    /// `ω = b_j b^j`.
    pub omega: C64,
    /// `δ = l_k b^k`.
    pub delta: C64,
    /// `b^k = a^{jk} b_j`.
    pub b_up: CVector,
    /// `a^{ji} l_i`, equal to `η^j` when `a_ij̄ = 0`.
    pub eta_up_check: CVector,
    pub a_inv: CMatrix,
    pub det_a: C64,
}

impl MetricData {
    pub fn new(name: impl Into<String>, fields: FieldTable) -> Self {
        MetricData {
            name: name.into(),
            fields,
        }
    }

    pub fn dim(&self) -> usize {
        self.fields.dim()
    }

    pub fn fields_at(&self, z: &[C64]) -> Result<FieldValues> {
        self.fields.eval(z)
    }

    pub fn ground_values(&self, p: &EvaluationPoint) -> Result<GroundValues> {
        let n = self.dim();
        for len in [p.z.len(), p.eta.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, found: len });
            }
        }
        let fv = self.fields_at(&p.z)?;
        ground_from_fields(&fv, &p.eta)
    }
}

/// α, β and the angular covectors from already-evaluated fields.
pub fn ground_from_fields(fv: &FieldValues, eta: &CVector) -> Result<GroundValues> {
    let n = eta.len();
    if fv.b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: fv.b.len(),
            found: n,
        });
    }
    if eta.is_zero() {
        return Err(Error::ZeroSection);
    }
    let eta_bar = eta.conj();
    let a_eta = fv.a.mul_vec(eta);
    let m_eta_bar = fv.a_mixed.mul_vec(&eta_bar);
    let quad = contract(eta, &a_eta)? + contract(eta, &m_eta_bar)?;
    let alpha_sq = quad.re;
    if alpha_sq <= DEGENERATE_ALPHA * eta.norm_sqr() {
        return Err(Error::DegenerateAlpha { alpha_sq });
    }
    let beta = contract(&fv.b, eta)?.re;
    let l = a_eta.add(&m_eta_bar);
    let l_bar = fv.a.conj().mul_vec(&eta_bar).add(&fv.a_mixed.transpose().mul_vec(eta));
    Ok(GroundValues {
        alpha: alpha_sq.sqrt(),
        alpha_sq,
        beta,
        a: fv.a.clone(),
        a_mixed: fv.a_mixed.clone(),
        b: fv.b.clone(),
        eta: eta.clone(),
        l,
        l_bar,
    })
}

pub fn contraction_scalars(g: &GroundValues) -> Result<ContractionScalars> {
    let lu = lu_invert(&g.a).map_err(|_| Error::SingularBaseMetric)?;
    let b_up = lu.inverse.mul_vec(&g.b);
    let eta_up_check = lu.inverse.mul_vec(&g.l);
    Ok(ContractionScalars {
        gamma: contract(&g.l, &g.eta)?,
        epsilon: contract(&g.b, &g.eta)?,
        omega: contract(&g.b, &b_up)?,
        delta: contract(&g.l, &b_up)?,
        b_up,
        eta_up_check,
        a_inv: lu.inverse,
        det_a: lu.determinant,
    })
}

fn lit(v: C64) -> Option<Expr> {
    Some(Expr::Lit(v))
}

fn parsed(s: &str) -> Option<Expr> {
    // fixture sources are static and known to parse
    Some(parse(s).expect("fixture expression"))
}

/// `a_ij = δ_ij`, `a_ij̄ = 0`, constant real `b`.
pub fn flat_real(b: &[f64]) -> Result<MetricData> {
    let n = b.len();
    let a_sym: Vec<Vec<Option<Expr>>> = (0..n)
        .map(|i| (0..n).map(|j| lit(re(if i == j { 1.0 } else { 0.0 }))).collect())
        .collect();
    let b: Vec<Option<Expr>> = b.iter().map(|&x| lit(re(x))).collect();
    Ok(MetricData::new("flat-real", FieldTable::new(n, &a_sym, &[], &b)?))
}

/// The ℂ³ example: purely Hermitian α² with exponential weights and
/// `β = Re{e^{z²} η²}`.
pub fn c3_example() -> MetricData {
    let none = || vec![None, None, None];
    let a_mixed = vec![
        vec![parsed("exp(z1 + conj(z1))"), None, None],
        vec![None, parsed("exp(z2 + conj(z2))"), None],
        vec![None, None, parsed("exp(z1 + z2 + z3 + conj(z3))")],
    ];
    let b = vec![None, parsed("exp(z2)"), None];
    let fields = FieldTable::new(3, &[none(), none(), none()], &a_mixed, &b).expect("c3 fixture");
    MetricData::new("c3-example", fields)
}

/// Reproducible constant metric on ℂ³: `a = I + 0.2·S` with `S` random
/// complex symmetric, `a_ij̄ = 0`, and a random complex 1-form.
pub fn random_seeded(seed: u64) -> MetricData {
    let n = 3;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = || rng.random_range(-1.0..1.0);
    let mut a = vec![vec![None; n]; n];
    for i in 0..n {
        for j in i..n {
            let base = if i == j { 1.0 } else { 0.0 };
            a[i][j] = lit(c(base + 0.2 * u(), 0.2 * u()));
        }
    }
    let b: Vec<Option<Expr>> = (0..n).map(|_| lit(c(3.0 * u(), 3.0 * u()))).collect();
    let fields = FieldTable::new(n, &a, &[], &b).expect("random fixture");
    MetricData::new(format!("random-seeded:{}", seed), fields)
}

/// Fixture by command-line name. `b` overrides the flat-real 1-form.
pub fn fixture(name: &str, seed: u64, b: Option<&[f64]>) -> Result<MetricData> {
    match name {
        "flat-real" => flat_real(b.unwrap_or(&[2.0, 0.0])),
        "c3-example" => Ok(c3_example()),
        "random-seeded" => Ok(random_seeded(seed)),
        other => Err(Error::InvalidInput(format!("unknown fixture '{}'", other))),
    }
}
