//! Fundamental tensors `g_ij = ∂²L/∂η^i∂η^j` and `g_ij̄ = ∂²L/∂η^i∂η̄^j`.
//!
//! [`assemble_tensors`] evaluates the ρ-form closed expressions.
//! [`oracle_hessians`] differentiates the scalar field `L(z, η)` numerically
//! in real coordinates `η^k = u^k + i v^k` and recovers the Wirtinger
//! blocks:
//!
//! ```text
//! g_ij  = ¼ (L_{u_i u_j} − L_{v_i v_j} − i (L_{u_i v_j} + L_{v_i u_j}))
//! g_ij̄  = ¼ (L_{u_i u_j} + L_{v_i v_j} + i (L_{u_i v_j} − L_{v_i u_j}))
//! ```

use alloc::vec;
use alloc::vec::Vec;



#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::expr::FieldValues;
use crate::family::FamilyKind;
use crate::invariants::{Invariants, SigmaInvariants};
use crate::linalg::{c, CMatrix, CVector, C64};
use crate::metric::{contraction_scalars, ground_from_fields, EvaluationPoint, GroundValues, MetricData};

/// Base step of the Hessian oracle, relative to `max(1, ‖η‖)`.
pub const ORACLE_STEP: f64 = 1e-4;
/// The oracle refuses to report when its step-halving estimate exceeds
/// this fraction of `‖g‖`.
pub const UNSTABLE_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct MetricTensors {
    /// `g_ij`, exactly symmetric.
    pub g: CMatrix,
    /// `g_ij̄`.
    pub g_mixed: CMatrix,
    /// `g_īj̄ = conj(g_ij)`.
    pub g_barbar: CMatrix,
    /// `η_i = ∂L/∂η^i`.
    pub eta_lower: CVector,
}

impl MetricTensors {
    fn from_blocks(g: CMatrix, g_mixed: CMatrix, eta_lower: CVector) -> Self {
        let g = CMatrix::symmetrized(&g);
        let g_barbar = g.conj();
        MetricTensors {
            g,
            g_mixed,
            g_barbar,
            eta_lower,
        }
    }

    /// Largest entry modulus over both blocks.
    pub fn scale(&self) -> f64 {
        self.g.max_abs().max(self.g_mixed.max_abs())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleTensors {
    pub tensors: MetricTensors,
    pub stencil_step: f64,
    /// Max entrywise difference between the step-h and step-h/2 Hessians.
    pub error_estimate: f64,
    pub lagrangian: f64,
}

/// `η_i = ρ₀ l_i + ρ₁ b_i`.
pub fn lowered_eta(gv: &GroundValues, inv: &Invariants) -> CVector {
    gv.l.scale_real(inv.rho0).add(&gv.b.scale_real(inv.rho1))
}

/// ρ-form tensors with coefficient `ρ₋₂` on both `l_i l_j` and `l_i l_j̄`.
pub fn assemble_tensors(gv: &GroundValues, inv: &Invariants) -> MetricTensors {
    assemble_with_mixed_coeff(gv, inv, inv.rho_m2)
}

fn assemble_with_mixed_coeff(gv: &GroundValues, inv: &Invariants, mixed_ll: f64) -> MetricTensors {
    let n = gv.n();
    let (l, lb, b) = (&gv.l, &gv.l_bar, &gv.b);
    let bb: Vec<C64> = b.iter().map(|x| x.conj()).collect();
    let g = CMatrix::from_fn(n, |i, j| {
        gv.a[(i, j)] * inv.rho0
            + l[i] * l[j] * inv.rho_m2
            + b[i] * b[j] * inv.mu0
            + (b[j] * l[i] + b[i] * l[j]) * inv.rho_m1
    });
    let g_mixed = CMatrix::from_fn(n, |i, j| {
        gv.a_mixed[(i, j)] * inv.rho0
            + l[i] * lb[j] * mixed_ll
            + b[i] * bb[j] * inv.mu0
            + (bb[j] * l[i] + b[i] * lb[j]) * inv.rho_m1
    });
    MetricTensors::from_blocks(g, g_mixed, lowered_eta(gv, inv))
}

/// Mixed block with the printed `l_i l_j̄` coefficient
/// `β(4β − α) / (2(α − β)⁴)` in place of `ρ₋₂`.
pub fn mixed_literal(gv: &GroundValues, inv: &Invariants) -> CMatrix {
    let (a, b) = (gv.alpha, gv.beta);
    let coeff = b * (4.0 * b - a) / (2.0 * (a - b).powi(4));
    assemble_with_mixed_coeff(gv, inv, coeff).g_mixed
}

/// `ρ₀[a − σ₁ l⊗l + σ₂ b⊗b + σ₃ η_low⊗η_low]` and its mixed analogue.
pub fn assemble_sigma_form(gv: &GroundValues, inv: &Invariants, sig: &SigmaInvariants) -> MetricTensors {
    let n = gv.n();
    let e = lowered_eta(gv, inv);
    let eb: Vec<C64> = e.iter().map(|x| x.conj()).collect();
    let (l, lb, b) = (&gv.l, &gv.l_bar, &gv.b);
    let bb: Vec<C64> = b.iter().map(|x| x.conj()).collect();
    let g = CMatrix::from_fn(n, |i, j| {
        (gv.a[(i, j)] - l[i] * l[j] * sig.sigma1 + b[i] * b[j] * sig.sigma2 + e[i] * e[j] * sig.sigma3) * inv.rho0
    });
    let g_mixed = CMatrix::from_fn(n, |i, j| {
        (gv.a_mixed[(i, j)] - l[i] * lb[j] * sig.sigma1 + b[i] * bb[j] * sig.sigma2 + e[i] * eb[j] * sig.sigma3)
            * inv.rho0
    });
    MetricTensors::from_blocks(g, g_mixed, e)
}

/// `L(z, η)` with the base point frozen.
pub struct LocalLagrangian<'a> {
    pub fields: &'a FieldValues,
    pub kind: &'a FamilyKind,
}

impl LocalLagrangian<'_> {
    pub fn alpha_beta(&self, eta: &[C64]) -> (f64, f64) {
        let eta_bar: Vec<C64> = eta.iter().map(|x| x.conj()).collect();
        let q: C64 = contract_slices(eta, &self.fields.a.mul_vec(eta))
            + contract_slices(eta, &self.fields.a_mixed.mul_vec(&eta_bar));
        let beta = contract_slices(&self.fields.b, eta).re;
        (q.re.sqrt(), beta)
    }

    pub fn value(&self, eta: &[C64]) -> f64 {
        let (a, b) = self.alpha_beta(eta);
        self.kind.lagrangian(a, b)
    }

    /// Value at real coordinates `x = (u, v)`.
    fn value_real(&self, x: &[f64], buf: &mut [C64]) -> f64 {
        let n = buf.len();
        for k in 0..n {
            buf[k] = c(x[k], x[n + k]);
        }
        self.value(buf)
    }
}

fn contract_slices(v: &[C64], w: &[C64]) -> C64 {
    v.iter().zip(w).map(|(a, b)| a * b).sum()
}

struct RealDerivs {
    grad: Vec<f64>,
    hess: Vec<f64>,
}

fn real_derivatives(f: &LocalLagrangian<'_>, x0: &[f64], h: f64) -> RealDerivs {
    let m = x0.len();
    let mut buf = vec![C64::new(0.0, 0.0); m / 2];
    let mut x = x0.to_vec();
    let mut eval = |x: &[f64]| f.value_real(x, &mut buf);
    let f0 = eval(&x);
    let mut grad = vec![0.0; m];
    let mut hess = vec![0.0; m * m];
    let mut fp = vec![0.0; m];
    let mut fm = vec![0.0; m];
    for p in 0..m {
        x[p] = x0[p] + h;
        fp[p] = eval(&x);
        x[p] = x0[p] - h;
        fm[p] = eval(&x);
        x[p] = x0[p];
        grad[p] = (fp[p] - fm[p]) / (2.0 * h);
        hess[p * m + p] = (fp[p] - 2.0 * f0 + fm[p]) / (h * h);
    }
    for p in 0..m {
        for q in p + 1..m {
            let mut corner = |sp: f64, sq: f64| {
                x[p] = x0[p] + sp * h;
                x[q] = x0[q] + sq * h;
                let v = eval(&x);
                x[p] = x0[p];
                x[q] = x0[q];
                v
            };
            let v = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0)) / (4.0 * h * h);
            hess[p * m + q] = v;
            hess[q * m + p] = v;
        }
    }
    RealDerivs { grad, hess }
}

fn wirtinger_blocks(d: &RealDerivs, n: usize) -> (CMatrix, CMatrix, CVector) {
    let m = 2 * n;
    let r = |p: usize, q: usize| d.hess[p * m + q];
    let g = CMatrix::from_fn(n, |i, j| {
        let (ui, vi, uj, vj) = (i, n + i, j, n + j);
        c(r(ui, uj) - r(vi, vj), -(r(ui, vj) + r(vi, uj))) * 0.25
    });
    let g_mixed = CMatrix::from_fn(n, |i, j| {
        let (ui, vi, uj, vj) = (i, n + i, j, n + j);
        c(r(ui, uj) + r(vi, vj), r(ui, vj) - r(vi, uj)) * 0.25
    });
    let eta_lower = CVector((0..n).map(|k| c(d.grad[k], -d.grad[n + k]) * 0.5).collect());
    (g, g_mixed, eta_lower)
}

/// Linearized distances to the loci `α = β`, `β = 0` and `α = 0`.
fn locus_distance(gv: &GroundValues, kind: &FamilyKind) -> f64 {
    let mut dist = gv.alpha_sq / (2.0 * gv.l.norm()).max(f64::MIN_POSITIVE);
    match kind {
        FamilyKind::InfiniteSeries | FamilyKind::Matsumoto => {
            let grad = gv.b.sub(&gv.l.scale_real(1.0 / gv.alpha)).norm();
            dist = dist.min((gv.beta - gv.alpha).abs() / grad.max(f64::MIN_POSITIVE));
        }
        FamilyKind::Kropina => {
            dist = dist.min(gv.beta.abs() / gv.b.norm().max(f64::MIN_POSITIVE));
        }
        FamilyKind::Randers | FamilyKind::Custom(_) => {}
    }
    dist
}

/// Wirtinger Hessian of `L(z, ·)` by central differences with step
/// halving and one Richardson step.
pub fn oracle_hessians(m: &MetricData, p: &EvaluationPoint, kind: &FamilyKind) -> Result<OracleTensors> {
    let fv = m.fields_at(&p.z)?;
    oracle_from_fields(&fv, &p.eta, kind)
}

pub fn oracle_from_fields(fv: &FieldValues, eta: &CVector, kind: &FamilyKind) -> Result<OracleTensors> {
    let gv = ground_from_fields(fv, eta)?;
    let n = eta.len();
    let h = ORACLE_STEP * 1.0f64.max(eta.norm());
    let dist = locus_distance(&gv, kind);
    if dist <= 10.0 * h {
        return Err(Error::TooCloseToSingularLocus {
            distance: dist,
            required: 10.0 * h,
        });
    }
    let f = LocalLagrangian { fields: fv, kind };
    let mut x0 = vec![0.0; 2 * n];
    for k in 0..n {
        x0[k] = eta[k].re;
        x0[n + k] = eta[k].im;
    }
    let coarse = wirtinger_blocks(&real_derivatives(&f, &x0, h), n);
    let fine = wirtinger_blocks(&real_derivatives(&f, &x0, h / 2.0), n);
    let error_estimate = coarse.0.sub(&fine.0).max_abs().max(coarse.1.sub(&fine.1).max_abs());
    let rich_m = |a: &CMatrix, b: &CMatrix| b.scale(c(4.0 / 3.0, 0.0)).sub(&a.scale(c(1.0 / 3.0, 0.0)));
    let g = rich_m(&coarse.0, &fine.0);
    let g_mixed = CMatrix::hermitianized(&rich_m(&coarse.1, &fine.1));
    let eta_lower = fine.2.scale_real(4.0 / 3.0).sub(&coarse.2.scale_real(1.0 / 3.0));
    let tensors = MetricTensors::from_blocks(g, g_mixed, eta_lower);
    let scale = tensors.g.norm_inf().max(tensors.g_mixed.norm_inf());
    if error_estimate > UNSTABLE_FRACTION * scale {
        return Err(Error::UnstableStencil {
            estimate: error_estimate,
            scale,
        });
    }
    Ok(OracleTensors {
        tensors,
        stencil_step: h,
        error_estimate,
        lagrangian: f.value(eta),
    })
}

/// Wirtinger gradient `∂α²/∂η^i` by central differences; equals `l_i`.
pub fn oracle_alpha_sq_gradient(fv: &FieldValues, eta: &CVector) -> CVector {
    let n = eta.len();
    let h = 1e-5 * 1.0f64.max(eta.norm());
    let q = |e: &[C64]| -> f64 {
        let eb: Vec<C64> = e.iter().map(|x| x.conj()).collect();
        (contract_slices(e, &fv.a.mul_vec(e)) + contract_slices(e, &fv.a_mixed.mul_vec(&eb))).re
    };
    let mut e = eta.0.clone();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let base = e[k];
        let mut d = [0.0; 2];
        for (slot, dir) in [c(1.0, 0.0), c(0.0, 1.0)].into_iter().enumerate() {
            e[k] = base + dir * h;
            let plus = q(&e);
            e[k] = base - dir * h;
            let minus = q(&e);
            e[k] = base;
            d[slot] = (plus - minus) / (2.0 * h);
        }
        out.push(c(d[0], -d[1]) * 0.5);
    }
    CVector(out)
}

/// Residuals of the homogeneity identities at one point, each divided by
/// `max(1, |2L|)` unless stated otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityReport {
    /// `g_ij η^i η^j + g_īj̄ η̄^i η̄^j + 2 g_ij̄ η^i η̄^j − 2L`.
    pub reconstruction: f64,
    /// `max_j |g_ij η^i + g_jī η̄^i − η_j|`, the index placement that
    /// follows from differentiating the Euler relation.
    pub lowering: f64,
    /// `η_i η^i + η_ī η̄^i − 2L`.
    pub euler: f64,
    /// `[γ + γ̄ − 2α², ε + ε̄ − 2β, δ − ε]`, relative to `2α²`,
    /// `max(2|β|, ‖b‖‖η‖)` and `‖b‖‖η‖`. Present when `a_ij̄ = 0` and
    /// `a_ij` is invertible.
    pub contraction: Option<[f64; 3]>,
}

impl IdentityReport {
    pub fn max_homogeneity(&self) -> f64 {
        self.reconstruction.max(self.lowering).max(self.euler)
    }
}

/// Lowering residual with the printed index order `g_j̄i η̄^i`.
pub fn lowering_literal_residual(t: &MetricTensors, eta: &CVector) -> CVector {
    let n = eta.len();
    let ge = t.g.transpose().mul_vec(eta);
    let eb = eta.conj();
    CVector(
        (0..n)
            .map(|j| ge[j] + (0..n).map(|i| t.g_mixed[(i, j)] * eb[i]).sum::<C64>() - t.eta_lower[j])
            .collect(),
    )
}

/// Lowering residual `g_ij η^i + g_jī η̄^i − η_j`.
pub fn lowering_residual(t: &MetricTensors, eta: &CVector) -> CVector {
    let n = eta.len();
    let ge = t.g.transpose().mul_vec(eta);
    let gm = t.g_mixed.mul_vec(&eta.conj());
    CVector((0..n).map(|j| ge[j] + gm[j] - t.eta_lower[j]).collect())
}

pub fn identity_suite(t: &MetricTensors, gv: &GroundValues, l: f64) -> IdentityReport {
    let eta = &gv.eta;
    let eb = eta.conj();
    let norm = 1.0f64.max((2.0 * l).abs());
    let quad = |m: &CMatrix, x: &[C64], y: &[C64]| contract_slices(x, &m.mul_vec(y));
    let rec = quad(&t.g, eta, eta) + quad(&t.g_barbar, &eb, &eb) + quad(&t.g_mixed, eta, &eb) * 2.0;
    let reconstruction = (rec - c(2.0 * l, 0.0)).norm() / norm;
    let lowering = lowering_residual(t, eta).max_abs() / norm;
    let e = contract_slices(&t.eta_lower, eta);
    let euler = (e + e.conj() - c(2.0 * l, 0.0)).norm() / norm;
    let contraction = if gv.is_non_hermitian() {
        contraction_scalars(gv).ok().map(|s| {
            let scale_b = gv.b.norm() * eta.norm();
            [
                (s.gamma + s.gamma.conj() - c(2.0 * gv.alpha_sq, 0.0)).norm() / (2.0 * gv.alpha_sq),
                (s.epsilon + s.epsilon.conj() - c(2.0 * gv.beta, 0.0)).norm()
                    / (2.0 * gv.beta.abs()).max(scale_b).max(f64::MIN_POSITIVE),
                (s.delta - s.epsilon).norm() / scale_b.max(f64::MIN_POSITIVE),
            ]
        })
    } else {
        None
    };
    IdentityReport {
        reconstruction,
        lowering,
        euler,
        contraction,
    }
}

/// Real Hessian of `L` in `(u, v)` coordinates, row-major `2n × 2n`,
/// rebuilt from the Wirtinger blocks.
pub fn real_hessian(t: &MetricTensors) -> Vec<f64> {
    let n = t.g.dim();
    let m = 2 * n;
    let mut out = vec![0.0; m * m];
    for i in 0..n {
        for j in 0..n {
            let g = t.g[(i, j)];
            let h = t.g_mixed[(i, j)];
            out[i * m + j] = 2.0 * (g.re + h.re);
            out[(n + i) * m + (n + j)] = 2.0 * (h.re - g.re);
            let uv = 2.0 * (h.im - g.im);
            out[i * m + (n + j)] = uv;
            out[(n + j) * m + i] = uv;
        }
    }
    out
}

/// Ground values, closed-form tensors and `L` in one call.
pub fn closed_form_at(
    m: &MetricData,
    p: &EvaluationPoint,
    kind: &FamilyKind,
) -> Result<(GroundValues, crate::family::Jet2, Invariants, MetricTensors)> {
    let gv = m.ground_values(p)?;
    let jet = kind.jet(gv.alpha, gv.beta)?;
    let inv = crate::invariants::rho_invariants(&jet, gv.alpha);
    let t = assemble_tensors(&gv, &inv);
    Ok((gv, jet, inv, t))
}
