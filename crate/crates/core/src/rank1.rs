//! Rank-one updates `H = Q ± C⊗C` of complex-symmetric matrices and the
//! three-step inversion of `g = ρ₀[a − σ₁ l⊗l + σ₂ b⊗b + σ₃ η_low⊗η_low]`.



#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::family::jet_matsumoto;
use crate::invariants::{rho_invariants, Invariants, SigmaInvariants, SigmaVariant};
use crate::linalg::{c, contract, crel, inner, lu_invert, CMatrix, CVector, C64};
use crate::metric::{contraction_scalars, GroundValues};
use crate::tensor::MetricTensors;

/// Lower bound on `|1 ± C²|`.
pub const UPDATE_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Rank1Step {
    pub q_inv: CMatrix,
    pub det_q: C64,
    pub c_lower: CVector,
    /// `Q⁻¹ C`.
    pub c_upper: CVector,
    /// `C^i C_i`.
    pub c2: C64,
    /// `+1` or `−1`.
    pub sign: f64,
}

impl Rank1Step {
    pub fn new(q_inv: CMatrix, det_q: C64, c_lower: CVector, sign: f64) -> Result<Self> {
        let c_upper = q_inv.mul_vec(&c_lower);
        let c2 = contract(&c_upper, &c_lower)?;
        Ok(Rank1Step {
            q_inv,
            det_q,
            c_lower,
            c_upper,
            c2,
            sign: if sign < 0.0 { -1.0 } else { 1.0 },
        })
    }

    /// Step for `Q + s v⊗v` with real `s`: `C = √|s|·v`, sign of `s`.
    pub fn signed(q_inv: CMatrix, det_q: C64, v: &CVector, s: f64) -> Result<Self> {
        Self::new(q_inv, det_q, v.scale_real(s.abs().sqrt()), s)
    }

    /// `1 ± C²`.
    pub fn factor(&self) -> C64 {
        c(1.0, 0.0) + self.c2 * self.sign
    }
}

/// `det H = (1 ± C²) det Q`, `H⁻¹ = Q⁻¹ ∓ C^i C^j / (1 ± C²)`.
pub fn rank1_update(s: &Rank1Step) -> Result<(CMatrix, C64)> {
    let f = s.factor();
    if f.norm() <= UPDATE_GUARD {
        return Err(Error::UpdateSingular { modulus: f.norm() });
    }
    let corr = CMatrix::outer(&s.c_upper, &s.c_upper).scale(c(s.sign, 0.0) / f);
    let h_inv = CMatrix::symmetrized(&s.q_inv.sub(&corr));
    Ok((h_inv, f * s.det_q))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineResult {
    pub g_inv: CMatrix,
    pub det_g: C64,
    /// `det(g/ρ₀)`.
    pub det_h: C64,
    pub per_step: [Rank1Step; 3],
    /// `1 + σ₂ b·H₁⁻¹b`.
    pub tau: C64,
    /// Coefficients of `H₂⁻¹ η_low = Ω η + Γ b^♯`.
    pub omega_coeff: C64,
    pub gamma_coeff: C64,
    /// Max-norm residual of that expansion, relative to `‖H₂⁻¹ η_low‖`.
    pub expansion_residual: f64,
}

/// Least-squares coefficients of `u` in the basis `{x, y}`. Falls back
/// to `{x}` alone when the basis is degenerate.
pub fn expand_in_pair(u: &CVector, x: &CVector, y: &CVector) -> (C64, C64, f64) {
    let (gxx, gxy, gyy) = (inner(x, x), inner(x, y), inner(y, y));
    let (rx, ry) = (inner(x, u), inner(y, u));
    let det = gxx * gyy - gxy * gxy.conj();
    let scale = gxx.norm() * gyy.norm();
    let (p, q) = if det.norm() > 1e-10 * scale && scale > 0.0 {
        ((rx * gyy - gxy * ry) / det, (gxx * ry - gxy.conj() * rx) / det)
    } else if gxx.norm() > 0.0 {
        (rx / gxx, c(0.0, 0.0))
    } else {
        (c(0.0, 0.0), c(0.0, 0.0))
    };
    let resid = u.sub(&x.scale(p).add(&y.scale(q))).max_abs() / u.max_abs().max(f64::MIN_POSITIVE);
    (p, q, resid)
}

fn step(k: u8, s: Result<Rank1Step>) -> Result<(Rank1Step, CMatrix, C64)> {
    let s = s?;
    let (h_inv, det) = rank1_update(&s).map_err(|_| Error::StepSingular { step: k })?;
    Ok((s, h_inv, det))
}

/// Inverse and determinant of `g` by three rank-one updates of `a`.
pub fn invert_pipeline(
    gv: &GroundValues,
    inv: &Invariants,
    sig: &SigmaInvariants,
    t: &MetricTensors,
) -> Result<PipelineResult> {
    if !gv.is_non_hermitian() {
        return Err(Error::NotNonHermitian);
    }
    if sig.variant != SigmaVariant::Derived {
        return Err(Error::WrongSigmaVariant);
    }
    if inv.rho0 == 0.0 || !inv.rho0.is_finite() {
        return Err(Error::StepSingular { step: 1 });
    }
    for s in [sig.sigma1, sig.sigma2, sig.sigma3] {
        if !s.is_finite() {
            return Err(Error::SigmaUndefined {
                alpha: gv.alpha,
                beta: gv.beta,
            });
        }
    }
    let base = lu_invert(&gv.a).map_err(|_| Error::SingularBaseMetric)?;
    let (s1, h1_inv, d1) = step(1, Rank1Step::signed(base.inverse, base.determinant, &gv.l, -sig.sigma1))?;
    let (s2, h2_inv, d2) = step(2, Rank1Step::signed(h1_inv, d1, &gv.b, sig.sigma2))?;
    let u = h2_inv.mul_vec(&t.eta_lower);
    let (s3, h3_inv, d3) = step(3, Rank1Step::signed(h2_inv, d2, &t.eta_lower, sig.sigma3))?;

    let b_up = s1.q_inv.mul_vec(&gv.b);
    let (omega_coeff, gamma_coeff, expansion_residual) = expand_in_pair(&u, &gv.eta, &b_up);
    let n = gv.n() as i32;
    Ok(PipelineResult {
        g_inv: h3_inv.scale(c(1.0 / inv.rho0, 0.0)),
        det_g: d3 * inv.rho0.powi(n),
        det_h: d3,
        tau: s2.factor(),
        omega_coeff,
        gamma_coeff,
        expansion_residual,
        per_step: [s1, s2, s3],
    })
}

/// `det g` evaluated several ways at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct DeterminantAudit {
    pub lu: Option<C64>,
    pub pipeline: Option<C64>,
    /// `ρ₀ⁿ (1 ± C₃²) [1 + ω + σ₁ε²/(1 − σ₁γ)] (1 − σ₁γ) det a`.
    pub theorem_text: Option<C64>,
    /// Same with `τ` in place of the bracket.
    pub proof_step: Option<C64>,
    /// `(α²(α − 2β)/(α − β)³)ⁿ det H`.
    pub trailing_line: Option<C64>,
    /// `(α²(α − 2β)/(α − β)³)ⁿ`.
    pub trailing_prefactor: f64,
    /// `ρ₀ⁿ` of the Matsumoto metric at the same `(α, β)`.
    pub matsumoto_rho0_pow: Option<f64>,
    /// `theorem_text` and `proof_step` agree to 1e-12 here.
    pub variants_indistinguishable: bool,
    pub failure: Option<Error>,
}

fn rel(a: Option<C64>, b: Option<C64>) -> Option<f64> {
    Some(crel(a?, b?))
}

impl DeterminantAudit {
    pub fn pipeline_vs_lu(&self) -> Option<f64> {
        rel(self.pipeline, self.lu)
    }
    pub fn theorem_text_vs_lu(&self) -> Option<f64> {
        rel(self.theorem_text, self.lu)
    }
    pub fn proof_step_vs_lu(&self) -> Option<f64> {
        rel(self.proof_step, self.lu)
    }
    pub fn trailing_vs_lu(&self) -> Option<f64> {
        rel(self.trailing_line, self.lu)
    }
    pub fn theorem_text_vs_proof_step(&self) -> Option<f64> {
        rel(self.theorem_text, self.proof_step)
    }
}

pub fn determinant_audit(
    gv: &GroundValues,
    inv: &Invariants,
    sig: &SigmaInvariants,
    t: &MetricTensors,
) -> DeterminantAudit {
    let n = gv.n() as i32;
    let (a, b) = (gv.alpha, gv.beta);
    let trailing_prefactor = (a * a * (a - 2.0 * b) / (a - b).powi(3)).powi(n);
    let matsumoto_rho0_pow = jet_matsumoto(a, b).ok().map(|j| rho_invariants(&j, a).rho0.powi(n));
    let mut out = DeterminantAudit {
        lu: lu_invert(&t.g).ok().map(|r| r.determinant),
        pipeline: None,
        theorem_text: None,
        proof_step: None,
        trailing_line: None,
        trailing_prefactor,
        matsumoto_rho0_pow,
        variants_indistinguishable: false,
        failure: None,
    };
    let p = match invert_pipeline(gv, inv, sig, t) {
        Ok(p) => p,
        Err(e) => {
            out.failure = Some(e);
            return out;
        }
    };
    let s = match contraction_scalars(gv) {
        Ok(s) => s,
        Err(e) => {
            out.failure = Some(e);
            return out;
        }
    };
    let one = c(1.0, 0.0);
    let step1 = one - s.gamma * sig.sigma1;
    let bracket = one + s.omega + s.epsilon * s.epsilon * sig.sigma1 / step1;
    let tau = one + (s.omega + s.epsilon * s.epsilon * sig.sigma1 / step1) * sig.sigma2;
    let common = p.per_step[2].factor() * step1 * s.det_a * inv.rho0.powi(n);
    let theorem = common * bracket;
    let proof = common * tau;
    out.variants_indistinguishable = crel(theorem, proof) <= 1e-12;
    out.theorem_text = Some(theorem);
    out.proof_step = Some(proof);
    out.trailing_line = Some(p.det_h * trailing_prefactor);
    out.pipeline = Some(p.det_g);
    out
}

/// Closed-form `τ` from the contraction scalars.
pub fn tau_closed_form(gamma: C64, epsilon: C64, omega: C64, sig: &SigmaInvariants) -> C64 {
    let one = c(1.0, 0.0);
    one + (omega + epsilon * epsilon * sig.sigma1 / (one - gamma * sig.sigma1)) * sig.sigma2
}

/// Printed and derived closed forms of the step-3 expansion coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepThreeForms {
    /// Expansion of `H₂⁻¹ l` derived from the step-2 inverse.
    pub omega_l: C64,
    pub gamma_l: C64,
    /// Expansion of `H₂⁻¹ η_low = ρ₀ H₂⁻¹ l + ρ₁ H₂⁻¹ b`.
    pub omega_eta: C64,
    pub gamma_eta: C64,
    pub omega_printed: C64,
    pub gamma_printed: C64,
    pub p_printed: C64,
    pub q_printed: C64,
}

pub fn step_three_forms(gamma: C64, epsilon: C64, omega: C64, delta: C64, inv: &Invariants, sig: &SigmaInvariants) -> StepThreeForms {
    let one = c(1.0, 0.0);
    let (s1, s2) = (sig.sigma1, sig.sigma2);
    let w = one - gamma * s1;
    let tau = tau_closed_form(gamma, epsilon, omega, sig);
    let big_a = one * s1 / w - epsilon * epsilon * (s1 * s1 * s2) / (tau * w * w);
    let big_b = -epsilon * (s1 * s2) / (tau * w);
    let omega_l = one + big_a * gamma + big_b * delta;
    let gamma_l = big_b * gamma - delta * s2 / tau;
    // H₂⁻¹ b = (b^♯ + k η)/τ with k = σ₁ε/(1 − σ₁γ).
    let k = epsilon * s1 / w;
    let omega_eta = omega_l * inv.rho0 + k * inv.rho1 / tau;
    let gamma_eta = gamma_l * inv.rho0 + one * inv.rho1 / tau;
    let omega_printed = one + big_a * gamma - epsilon * epsilon * (s1 * s2) / (tau * w);
    let gamma_printed = -epsilon * s2 / tau + epsilon * gamma * (s1 * s2) / (tau * w);
    let p_printed = (one + big_a) * gamma - epsilon * (s1 * s2) / (tau * w * w * w);
    let q_printed = -epsilon * s2 / tau - epsilon * gamma * (s1 * s2) / (tau * w);
    StepThreeForms {
        omega_l,
        gamma_l,
        omega_eta,
        gamma_eta,
        omega_printed,
        gamma_printed,
        p_printed,
        q_printed,
    }
}

/// Numeric expansion of `H₂⁻¹ l` in `{η, b^♯}` from a finished pipeline.
pub fn numeric_l_expansion(gv: &GroundValues, p: &PipelineResult) -> (C64, C64) {
    let h2_inv = &p.per_step[2].q_inv;
    let b_up = p.per_step[0].q_inv.mul_vec(&gv.b);
    let u = h2_inv.mul_vec(&gv.l);
    let (om, ga, _) = expand_in_pair(&u, &gv.eta, &b_up);
    (om, ga)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::FamilyKind;
    use crate::invariants::sigma_invariants;
    use crate::linalg::re;
    use crate::metric::{flat_real, EvaluationPoint, MetricData};
    use crate::tensor::closed_form_at;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
        let raw = CMatrix::from_fn(n, |i, j| {
            let d = if i == j { 2.0 } else { 0.0 };
            c(d + rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        CMatrix::symmetrized(&raw)
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> CVector {
        CVector((0..n).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect())
    }

    #[test]
    fn diagonal_update() {
        let s = Rank1Step::new(CMatrix::identity(2), re(1.0), CVector::from_real(&[1.0, 0.0]), 1.0).unwrap();
        let (h_inv, det) = rank1_update(&s).unwrap();
        assert_eq!(det, re(2.0));
        assert_eq!(h_inv[(0, 0)], re(0.5));
        assert_eq!(h_inv[(1, 1)], re(1.0));
        let s = Rank1Step::new(CMatrix::identity(2), re(1.0), CVector::from_real(&[1.0, 0.0]), -1.0).unwrap();
        assert!(matches!(rank1_update(&s), Err(Error::UpdateSingular { .. })));
    }

    #[test]
    fn update_matches_lu() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..1000 {
            let n = 1 + trial % 8;
            let q = random_symmetric(&mut rng, n);
            let cv = random_vec(&mut rng, n);
            let sign = if trial % 2 == 0 { 1.0 } else { -1.0 };
            let Ok(lq) = lu_invert(&q) else { continue };
            let h = q.add(&CMatrix::outer(&cv, &cv).scale(re(sign)));
            let Ok(lh) = lu_invert(&h) else { continue };
            if lh.condition_estimate > 1e6 || lq.condition_estimate > 1e6 {
                continue;
            }
            let s = Rank1Step::new(lq.inverse, lq.determinant, cv, sign).unwrap();
            let Ok((h_inv, det)) = rank1_update(&s) else { continue };
            assert!(crel(det, lh.determinant) <= 1e-10, "trial {trial}");
            assert!(h.mul(&h_inv).identity_residual(&CMatrix::identity(n)) <= 1e-9 * lh.condition_estimate.max(1.0));
        }
    }

    fn pipeline_at(m: &MetricData, p: &EvaluationPoint) -> (GroundValues, Invariants, SigmaInvariants, MetricTensors) {
        let (gv, _, inv, t) = closed_form_at(m, p, &FamilyKind::InfiniteSeries).unwrap();
        let sig = sigma_invariants(gv.alpha, gv.beta, SigmaVariant::Derived).unwrap();
        (gv, inv, sig, t)
    }

    #[test]
    fn flat_real_b3() {
        let m = flat_real(&[3.0, 0.0]).unwrap();
        let p = EvaluationPoint::new(CVector::zeros(2), CVector::from_real(&[1.0, 0.0]));
        let (gv, inv, sig, t) = pipeline_at(&m, &p);
        let r = invert_pipeline(&gv, &inv, &sig, &t).unwrap();
        assert!(crel(r.tau, re(5.0 / 3.0)) <= 1e-12);
        assert!(t.g.mul(&r.g_inv).identity_residual(&CMatrix::identity(2)) <= 1e-9);
        let lu = lu_invert(&t.g).unwrap();
        assert!(crel(r.det_g, lu.determinant) <= 1e-10);
        let d = determinant_audit(&gv, &inv, &sig, &t);
        assert!(d.pipeline_vs_lu().unwrap() <= 1e-10);
        assert!(d.proof_step_vs_lu().unwrap() <= 1e-10);
        assert!(d.theorem_text_vs_lu().unwrap() > 1e-3);
        assert!(!d.variants_indistinguishable);
    }

    #[test]
    fn zero_one_form_reports_step() {
        let m = flat_real(&[0.0, 0.0]).unwrap();
        let p = EvaluationPoint::new(CVector::zeros(2), CVector::from_real(&[1.0, 0.0]));
        let (gv, _, inv, t) = closed_form_at(&m, &p, &FamilyKind::InfiniteSeries).unwrap();
        let sig = SigmaInvariants {
            sigma1: 0.0,
            sigma2: 0.0,
            sigma3: 0.0,
            variant: SigmaVariant::Derived,
        };
        assert_eq!(invert_pipeline(&gv, &inv, &sig, &t), Err(Error::StepSingular { step: 1 }));
    }

    #[test]
    fn one_dimensional_case() {
        let m = flat_real(&[2.0]).unwrap();
        let p = EvaluationPoint::new(CVector::zeros(1), CVector::from_real(&[1.0]));
        let (gv, _, inv, t) = closed_form_at(&m, &p, &FamilyKind::InfiniteSeries).unwrap();
        // β = 2α: derived σ undefined, so perturb η off the locus.
        assert!(sigma_invariants(gv.alpha, gv.beta, SigmaVariant::Derived).is_err());
        let _ = (inv, t);
        let m = flat_real(&[2.5]).unwrap();
        let (gv, inv, sig, t) = pipeline_at(&m, &p);
        let r = invert_pipeline(&gv, &inv, &sig, &t).unwrap();
        assert!(crel(r.det_g, t.g[(0, 0)]) <= 1e-11);
        assert!(crel(r.g_inv[(0, 0)] * t.g[(0, 0)], re(1.0)) <= 1e-11);
    }

    #[test]
    fn coincidence_locus() {
        // ω + σ₁ε²/(1 − σ₁γ) = 0 for a = I, b = (1.5, 0), η = (1, y), α = (4 + √7)/3.
        let alpha = (4.0 + 7.0f64.sqrt()) / 3.0;
        let m = flat_real(&[1.5, 0.0]).unwrap();
        let p = EvaluationPoint::new(CVector::zeros(2), CVector::from_real(&[1.0, (alpha * alpha - 1.0).sqrt()]));
        let (gv, inv, sig, t) = pipeline_at(&m, &p);
        let d = determinant_audit(&gv, &inv, &sig, &t);
        assert!(d.variants_indistinguishable, "{:?}", d.theorem_text_vs_proof_step());
        assert!(d.proof_step_vs_lu().unwrap() <= 1e-9);
    }

    #[test]
    fn hermitian_mixed_rejected() {
        let m = crate::metric::c3_example();
        let p = EvaluationPoint::new(CVector::zeros(3), CVector::from_real(&[1.0, 1.0, 1.0]));
        let gv = m.ground_values(&p).unwrap();
        let inv = Invariants {
            rho0: 1.0,
            ..Default::default()
        };
        let sig = SigmaInvariants {
            sigma1: 0.1,
            sigma2: 0.1,
            sigma3: 0.1,
            variant: SigmaVariant::Derived,
        };
        let t = crate::tensor::assemble_tensors(&gv, &inv);
        assert_eq!(invert_pipeline(&gv, &inv, &sig, &t), Err(Error::NotNonHermitian));
        let lit = SigmaInvariants {
            variant: SigmaVariant::Literal,
            ..sig
        };
        let flat = flat_real(&[3.0, 0.0]).unwrap();
        let fp = EvaluationPoint::new(CVector::zeros(2), CVector::from_real(&[1.0, 0.0]));
        let (gv, inv, _, t) = pipeline_at(&flat, &fp);
        assert_eq!(invert_pipeline(&gv, &inv, &lit, &t), Err(Error::WrongSigmaVariant));
    }

    #[test]
    fn step_three_closed_forms_match_numeric() {
        let m = crate::metric::random_seeded(3);
        let p = EvaluationPoint::new(
            CVector::zeros(3),
            CVector(alloc::vec![c(0.3, 0.1), c(0.2, -0.1), c(0.1, 0.2)]),
        );
        let Ok((gv, _, inv, t)) = closed_form_at(&m, &p, &FamilyKind::InfiniteSeries) else { return };
        let Ok(sig) = sigma_invariants(gv.alpha, gv.beta, SigmaVariant::Derived) else { return };
        let r = invert_pipeline(&gv, &inv, &sig, &t).unwrap();
        let s = contraction_scalars(&gv).unwrap();
        let f = step_three_forms(s.gamma, s.epsilon, s.omega, s.delta, &inv, &sig);
        assert!(crel(r.omega_coeff, f.omega_eta) <= 1e-8);
        assert!(crel(r.gamma_coeff, f.gamma_eta) <= 1e-8);
        let (ol, gl) = numeric_l_expansion(&gv, &r);
        assert!(crel(ol, f.omega_l) <= 1e-8);
        assert!(crel(gl, f.gamma_l) <= 1e-8);
        assert!(crel(f.omega_printed, f.omega_l) <= 1e-10);
        assert!(crel(f.q_printed, f.gamma_l) <= 1e-10);
        assert!(r.expansion_residual <= 1e-10);
    }
}
