//! Literal-vs-derived-vs-oracle findings.
//!
//! Each registered formula is evaluated at every sampled point as a
//! relative difference between its literal form and a reference (the
//! Hessian oracle, LU, a numeric expansion or a finite-difference
//! gradient). The derivation-consistent form is measured against the same
//! reference so the two can be read side by side.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;



#[allow(unused_imports)]
use num_traits::Float;

use crate::error::Error;
use crate::family::FamilyKind;
use crate::invariants::{rho_invariants, sigma_invariants, SigmaInvariants, SigmaVariant};
use crate::linalg::{c, CMatrix, CVector, C64};
use crate::metric::{contraction_scalars, EvaluationPoint, GroundValues, MetricData};
use crate::rank1::{determinant_audit, invert_pipeline, numeric_l_expansion, step_three_forms};
use crate::sampling::{Margins, SampledPoint, Sampler};
use crate::tensor::{
    assemble_sigma_form, assemble_tensors, lowering_literal_residual, lowering_residual, mixed_literal,
    oracle_alpha_sq_gradient, oracle_hessians, MetricTensors,
};

pub const CONSISTENT_TOL: f64 = 1e-5;
pub const DISCREPANT_TOL: f64 = 1e-3;
pub const MIN_DISCREPANT_POINTS: usize = 10;
/// Raw draws allowed per requested sample.
pub const ATTEMPTS_PER_SAMPLE: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Consistent,
    Discrepant,
    Indeterminate,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Consistent => "consistent",
            Status::Discrepant => "discrepant",
            Status::Indeterminate => "indeterminate",
        }
    }

    /// Classifies a batch of relative differences.
    pub fn classify(diffs: &[f64]) -> Status {
        if diffs.is_empty() {
            return Status::Indeterminate;
        }
        let max = diffs.iter().copied().fold(0.0, f64::max);
        if max <= CONSISTENT_TOL {
            Status::Consistent
        } else if diffs.iter().filter(|&&d| d > DISCREPANT_TOL).count() >= MIN_DISCREPANT_POINTS {
            Status::Discrepant
        } else {
            Status::Indeterminate
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    /// Evaluated for any family.
    General,
    /// Specific to `L = β⁴/(β − α)²`.
    InfiniteSeries,
    /// Specific to `L = β⁴/(β − α)²` with `a_ij̄ = 0`.
    InfiniteSeriesNonHermitian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegistryEntry {
    pub id: &'static str,
    pub quote: &'static str,
    pub scope: Scope,
    /// What the literal form is compared against.
    pub reference: &'static str,
}

pub const REGISTRY: [RegistryEntry; 14] = [
    RegistryEntry {
        id: "sigma1",
        quote: "σ₁ = (β − α)⁵(β − 4α)/(2α²(β − 2α))",
        scope: Scope::InfiniteSeries,
        reference: "Hessian oracle, σ-form with this σ swapped in",
    },
    RegistryEntry {
        id: "sigma2",
        quote: "σ₂ = −α³/(β²(β − α))",
        scope: Scope::InfiniteSeries,
        reference: "Hessian oracle, σ-form with this σ swapped in",
    },
    RegistryEntry {
        id: "sigma3",
        quote: "σ₃ = α(β − α)⁵(β − 4α)/(2β⁸(β − 2α))",
        scope: Scope::InfiniteSeries,
        reference: "Hessian oracle, σ-form with this σ swapped in",
    },
    RegistryEntry {
        id: "g_mixed_coeff",
        quote: "g_ij̄ = … + β(4β − α)/(2(α − β)⁴) l_i l_j̄ + …",
        scope: Scope::InfiniteSeries,
        reference: "Hessian oracle, mixed block",
    },
    RegistryEntry {
        id: "det_theorem_text",
        quote: "det(g_ij) = (ρ₀)ⁿ[1 + (Ωγ + Γε)√σ₃][1 + ω + σ₁ε²/(1 − σ₁γ)](1 − σ₁γ)det(a_ij)",
        scope: Scope::InfiniteSeriesNonHermitian,
        reference: "LU determinant of g",
    },
    RegistryEntry {
        id: "det_proof_step",
        quote: "det(H_ij) = [1 + σ₂(ω + σ₁ε²/(1 − σ₁γ))](1 − σ₁γ)det(a_ij)",
        scope: Scope::InfiniteSeriesNonHermitian,
        reference: "LU determinant of g",
    },
    RegistryEntry {
        id: "omega_gamma_closed_form",
        quote: "Ω = 1 + (σ₁/(1 − γσ₁) − ε²σ₁²σ₂/(τ(1 − γσ₁)²))γ − [σ₁σ₂/(τ(1 − γσ₁))]ε², \
                Γ = −(σ₂/τ)ε + [σ₁σ₂ε/(τ(1 − γσ₁))]γ",
        scope: Scope::InfiniteSeriesNonHermitian,
        reference: "numeric expansion of H₂⁻¹l in {η, b♯}",
    },
    RegistryEntry {
        id: "p_q_proof_form",
        quote: "P = [1 + (σ₁/(1 − σ₁γ) − σ₁²σ₂ε²/(τ(1 − σ₁γ)²))]γ − σ₁σ₂ε/(τ(1 − σ₁γ)³), \
                Q = −σ₂ε/τ − σ₁σ₂εγ/(τ(1 − σ₁γ))",
        scope: Scope::InfiniteSeriesNonHermitian,
        reference: "numeric expansion of H₂⁻¹l in {η, b♯}",
    },
    RegistryEntry {
        id: "trailing_det_line",
        quote: "det(g_ij) = (α²(α − 2β)/(α − β)³)ⁿ det(H_ij)",
        scope: Scope::InfiniteSeriesNonHermitian,
        reference: "LU determinant of g",
    },
    RegistryEntry {
        id: "l_i_restatement",
        quote: "l_i = a_īj̄ η̄^j + a_ij̄ η^j",
        scope: Scope::General,
        reference: "finite-difference gradient ∂α²/∂η^i",
    },
    RegistryEntry {
        id: "eq22_indices",
        quote: "g_ij η^i + g_j̄i η̄^i = ∂L/∂η^j",
        scope: Scope::General,
        reference: "η_j from the closed-form jet",
    },
    RegistryEntry {
        id: "example_validity_region",
        quote: "Consider M = ℂ³ … β = ½(e^{z²}η² + e^{z̄²}η̄²)",
        scope: Scope::General,
        reference: "sampled validity region β > α > 0",
    },
    RegistryEntry {
        id: "rho0_closed_form",
        quote: "ρ₀ = ½α⁻¹L_α = β⁴/(α(β − α)³)",
        scope: Scope::InfiniteSeries,
        reference: "ρ₀ from the finite-difference jet",
    },
    RegistryEntry {
        id: "g_sym_closed_form",
        quote: "g_ij = ρ₀a_ij + ρ₋₂l_il_j + μ₀b_ib_j + ρ₋₁(b_jl_i + b_il_j)",
        scope: Scope::General,
        reference: "Hessian oracle, symmetric block",
    },
];

pub fn registry_entry(id: &str) -> Option<&'static RegistryEntry> {
    REGISTRY.iter().find(|e| e.id == id)
}

/// One formula at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub literal_diff: f64,
    pub derived_diff: Option<f64>,
    /// Literal, derived and reference values at the worst entry.
    pub values: Vec<(&'static str, C64)>,
    /// Secondary statistics, reported as maxima over points.
    pub extras: Vec<(&'static str, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Compared(Comparison),
    NotApplicable(&'static str),
    Failed(Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointEvaluation {
    pub index: usize,
    pub point: EvaluationPoint,
    /// Parallel to the registry, without `example_validity_region`.
    pub outcomes: Vec<(&'static str, Outcome)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Finding {
    pub formula_id: &'static str,
    pub status: Status,
    pub max_rel_diff: f64,
    pub derived_max_rel_diff: Option<f64>,
    pub sample_count: usize,
    pub exceed_count: usize,
    pub witness: Option<EvaluationPoint>,
    pub witness_index: Option<usize>,
    pub quote: &'static str,
    pub reference: &'static str,
    pub note: String,
    pub values: Vec<(&'static str, C64)>,
    pub extras: Vec<(&'static str, f64)>,
}

/// Over every raw draw: how many land in `β > α > 0`, and the draw
/// closest to it.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidityStats {
    pub attempts: usize,
    pub evaluated: usize,
    pub valid: usize,
    /// Smallest `max(0, (α − β)/α)`.
    pub min_violation: f64,
    pub closest: Option<(usize, EvaluationPoint)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditPlan {
    pub metric_name: String,
    pub family: &'static str,
    pub seed: u64,
    pub samples: usize,
    pub points: Vec<SampledPoint>,
    pub validity: ValidityStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub metric_name: String,
    pub family: &'static str,
    pub seed: u64,
    pub samples_requested: usize,
    pub points_used: usize,
    pub attempts: usize,
    pub findings: Vec<Finding>,
}

impl AuditReport {
    pub fn finding(&self, id: &str) -> Option<&Finding> {
        self.findings.iter().find(|f| f.formula_id == id)
    }

    /// `NoValidPoints` when the sample budget produced nothing to audit.
    pub fn error(&self) -> Option<Error> {
        (self.points_used == 0).then_some(Error::NoValidPoints { attempts: self.attempts })
    }
}

fn accepts(kind: &FamilyKind, gv: &GroundValues) -> bool {
    match kind {
        FamilyKind::InfiniteSeries => Margins::SIGMA.accepts(gv),
        _ => {
            let s = gv.eta.norm();
            gv.alpha > Margins::ORACLE.alpha * s
                && kind.singular_distance(gv.alpha, gv.beta).is_none_or(|d| d > Margins::ORACLE.gap * s)
        }
    }
}

/// Draws the audit sample deterministically from `seed`.
pub fn plan_audit(m: &MetricData, kind: &FamilyKind, samples: usize, seed: u64) -> AuditPlan {
    let n = m.dim();
    let mut sampler = Sampler::new(seed);
    let budget = samples.max(1) * ATTEMPTS_PER_SAMPLE;
    let mut points = Vec::new();
    let mut validity = ValidityStats {
        attempts: 0,
        evaluated: 0,
        valid: 0,
        min_violation: f64::INFINITY,
        closest: None,
    };
    while validity.attempts < budget && points.len() < samples {
        let index = validity.attempts;
        validity.attempts += 1;
        let p = sampler.point(n);
        let Ok(gv) = m.ground_values(&p) else { continue };
        validity.evaluated += 1;
        let violation = ((gv.alpha - gv.beta) / gv.alpha).max(0.0);
        if gv.is_valid_region() {
            validity.valid += 1;
        }
        if violation < validity.min_violation {
            validity.min_violation = violation;
            validity.closest = Some((index, p.clone()));
        }
        if accepts(kind, &gv) {
            points.push(SampledPoint { index, point: p, ground: gv });
        }
    }
    AuditPlan {
        metric_name: m.name.clone(),
        family: kind.name(),
        seed,
        samples,
        points,
        validity,
    }
}

fn rel_to(diff: f64, scale: f64) -> f64 {
    diff / scale.max(f64::MIN_POSITIVE)
}

/// `(max |A − R| / scale, literal, reference)` at the worst entry.
fn worst_entry(a: &CMatrix, r: &CMatrix, scale: f64) -> (f64, C64, C64) {
    let mut best = (0.0, c(0.0, 0.0), c(0.0, 0.0));
    for (x, y) in a.entries().iter().zip(r.entries()) {
        let d = (x - y).norm();
        if d >= best.0 {
            best = (d, *x, *y);
        }
    }
    (rel_to(best.0, scale), best.1, best.2)
}

fn tensor_diff(a: &MetricTensors, r: &MetricTensors) -> (f64, C64, C64) {
    let scale = r.scale();
    let g = worst_entry(&a.g, &r.g, scale);
    let m = worst_entry(&a.g_mixed, &r.g_mixed, scale);
    if g.0 >= m.0 {
        g
    } else {
        m
    }
}

fn vec_worst(a: &CVector, r: &CVector) -> (f64, C64, C64) {
    let scale = r.max_abs();
    let mut best = (0.0, c(0.0, 0.0), c(0.0, 0.0));
    for (x, y) in a.iter().zip(r.iter()) {
        let d = (x - y).norm();
        if d >= best.0 {
            best = (d, *x, *y);
        }
    }
    (rel_to(best.0, scale), best.1, best.2)
}

fn compared(literal: (f64, C64, C64), derived: Option<(f64, C64, C64)>) -> Comparison {
    let mut values = alloc::vec![("literal", literal.1), ("reference", literal.2)];
    if let Some(d) = derived {
        values.insert(1, ("derived", d.1));
    }
    Comparison {
        literal_diff: literal.0,
        derived_diff: derived.map(|d| d.0),
        values,
        extras: Vec::new(),
    }
}

fn pair_diff(p: (C64, C64), r: (C64, C64)) -> f64 {
    let scale = r.0.norm().max(r.1.norm());
    rel_to((p.0 - r.0).norm().max((p.1 - r.1).norm()), scale)
}

fn crel_opt(a: Option<C64>, r: Option<C64>) -> Option<(f64, C64, C64)> {
    let (a, r) = (a?, r?);
    Some((rel_to((a - r).norm(), r.norm()), a, r))
}

/// Every registered formula (except the validity region) at one point.
pub fn evaluate_point(m: &MetricData, kind: &FamilyKind, sp: &SampledPoint) -> PointEvaluation {
    let mut outcomes: Vec<(&'static str, Outcome)> = Vec::new();
    let gv = &sp.ground;
    let p = &sp.point;
    let is_series = matches!(kind, FamilyKind::InfiniteSeries);

    let fields = m.fields_at(&p.z);
    let jet = kind.jet(gv.alpha, gv.beta);
    let oracle = oracle_hessians(m, p, kind);
    let closed = jet.clone().map(|j| {
        let inv = rho_invariants(&j, gv.alpha);
        (inv, assemble_tensors(gv, &inv))
    });
    let sig_derived = sigma_invariants(gv.alpha, gv.beta, SigmaVariant::Derived);
    let sig_literal = sigma_invariants(gv.alpha, gv.beta, SigmaVariant::Literal);

    for entry in REGISTRY.iter() {
        if entry.id == "example_validity_region" {
            continue;
        }
        let applicable = match entry.scope {
            Scope::General => Ok(()),
            Scope::InfiniteSeries if !is_series => Err("not applicable to this family"),
            Scope::InfiniteSeriesNonHermitian if !is_series => Err("not applicable to this family"),
            Scope::InfiniteSeriesNonHermitian if !gv.is_non_hermitian() => Err("not applicable: a_ij̄ ≠ 0"),
            _ => Ok(()),
        };
        if let Err(why) = applicable {
            outcomes.push((entry.id, Outcome::NotApplicable(why)));
            continue;
        }
        let out = (|| -> Result<Comparison, Error> {
            match entry.id {
                "sigma1" | "sigma2" | "sigma3" => {
                    let o = oracle.clone()?;
                    let (inv, _) = closed.clone()?;
                    let d = sig_derived.clone()?;
                    let l = sig_literal.clone()?;
                    let swapped = match entry.id {
                        "sigma1" => SigmaInvariants { sigma1: l.sigma1, ..d },
                        "sigma2" => SigmaInvariants { sigma2: l.sigma2, ..d },
                        _ => SigmaInvariants { sigma3: l.sigma3, ..d },
                    };
                    let lit = tensor_diff(&assemble_sigma_form(gv, &inv, &swapped), &o.tensors);
                    let der = tensor_diff(&assemble_sigma_form(gv, &inv, &d), &o.tensors);
                    let mut cmp = compared(lit, Some(der));
                    let (lv, dv) = match entry.id {
                        "sigma1" => (l.sigma1, d.sigma1),
                        "sigma2" => (l.sigma2, d.sigma2),
                        _ => (l.sigma3, d.sigma3),
                    };
                    cmp.values.push(("sigma_literal", c(lv, 0.0)));
                    cmp.values.push(("sigma_derived", c(dv, 0.0)));
                    cmp.extras.push(("oracle_error_estimate", o.error_estimate / o.tensors.scale()));
                    Ok(cmp)
                }
                "g_mixed_coeff" => {
                    let o = oracle.clone()?;
                    let (inv, t) = closed.clone()?;
                    let scale = o.tensors.scale();
                    let lit = worst_entry(&mixed_literal(gv, &inv), &o.tensors.g_mixed, scale);
                    let der = worst_entry(&t.g_mixed, &o.tensors.g_mixed, scale);
                    let mut cmp = compared(lit, Some(der));
                    let (a, b) = (gv.alpha, gv.beta);
                    cmp.values.push(("coeff_literal", c(b * (4.0 * b - a) / (2.0 * (a - b).powi(4)), 0.0)));
                    cmp.values.push(("coeff_derived", c(inv.rho_m2, 0.0)));
                    Ok(cmp)
                }
                "g_sym_closed_form" => {
                    let o = oracle.clone()?;
                    let (_, t) = closed.clone()?;
                    let lit = worst_entry(&t.g, &o.tensors.g, o.tensors.scale());
                    let mut cmp = compared(lit, None);
                    cmp.extras.push(("oracle_error_estimate", o.error_estimate / o.tensors.scale()));
                    Ok(cmp)
                }
                "rho0_closed_form" => {
                    let fd = crate::family::jet_fd(kind, gv.alpha, gv.beta)?;
                    let rho_fd = rho_invariants(&fd, gv.alpha).rho0;
                    let lit = gv.beta.powi(4) / (gv.alpha * (gv.beta - gv.alpha).powi(3));
                    Ok(compared((rel_to((lit - rho_fd).abs(), rho_fd.abs()), c(lit, 0.0), c(rho_fd, 0.0)), None))
                }
                "det_theorem_text" | "det_proof_step" | "trailing_det_line" => {
                    let (inv, t) = closed.clone()?;
                    let d = sig_derived.clone()?;
                    let da = determinant_audit(gv, &inv, &d, &t);
                    if let Some(e) = da.failure.clone() {
                        return Err(e);
                    }
                    let lit_value = match entry.id {
                        "det_theorem_text" => da.theorem_text,
                        "det_proof_step" => da.proof_step,
                        _ => da.trailing_line,
                    };
                    let der_value = match entry.id {
                        "det_theorem_text" => da.proof_step,
                        _ => da.pipeline,
                    };
                    let lit = crel_opt(lit_value, da.lu).ok_or(Error::SingularMatrix { pivot: 0.0, threshold: 0.0 })?;
                    let mut cmp = compared(lit, crel_opt(der_value, da.lu));
                    if entry.id == "det_theorem_text" {
                        cmp.extras
                            .push(("indistinguishable_points", if da.variants_indistinguishable { 1.0 } else { 0.0 }));
                    }
                    if entry.id == "trailing_det_line" {
                        if let Some(mr) = da.matsumoto_rho0_pow {
                            cmp.extras
                                .push(("prefactor_vs_matsumoto_rho0_pow", rel_to((da.trailing_prefactor - mr).abs(), mr.abs())));
                        }
                        let own = inv.rho0.powi(gv.n() as i32);
                        cmp.extras
                            .push(("prefactor_vs_rho0_pow", rel_to((da.trailing_prefactor - own).abs(), own.abs())));
                    }
                    Ok(cmp)
                }
                "omega_gamma_closed_form" | "p_q_proof_form" => {
                    let (inv, t) = closed.clone()?;
                    let d = sig_derived.clone()?;
                    let pr = invert_pipeline(gv, &inv, &d, &t)?;
                    let s = contraction_scalars(gv)?;
                    let f = step_three_forms(s.gamma, s.epsilon, s.omega, s.delta, &inv, &d);
                    let numeric = numeric_l_expansion(gv, &pr);
                    let printed = if entry.id == "omega_gamma_closed_form" {
                        (f.omega_printed, f.gamma_printed)
                    } else {
                        (f.p_printed, f.q_printed)
                    };
                    let lit = pair_diff(printed, numeric);
                    let der = pair_diff((f.omega_l, f.gamma_l), numeric);
                    let scale = numeric.0.norm().max(numeric.1.norm());
                    let mut cmp = Comparison {
                        literal_diff: lit,
                        derived_diff: Some(der),
                        values: alloc::vec![
                            ("first_literal", printed.0),
                            ("second_literal", printed.1),
                            ("first_derived", f.omega_l),
                            ("second_derived", f.gamma_l),
                            ("first_numeric", numeric.0),
                            ("second_numeric", numeric.1),
                            ("omega_runtime", pr.omega_coeff),
                            ("gamma_runtime", pr.gamma_coeff),
                        ],
                        extras: Vec::new(),
                    };
                    cmp.extras.push(("first_only", rel_to((printed.0 - numeric.0).norm(), scale)));
                    cmp.extras.push(("second_only", rel_to((printed.1 - numeric.1).norm(), scale)));
                    cmp.extras.push((
                        "runtime_vs_eta_closed_form",
                        pair_diff((f.omega_eta, f.gamma_eta), (pr.omega_coeff, pr.gamma_coeff)),
                    ));
                    Ok(cmp)
                }
                "l_i_restatement" => {
                    let fv = fields.clone()?;
                    let fd = oracle_alpha_sq_gradient(&fv, &gv.eta);
                    let restated = gv.a.conj().mul_vec(&gv.eta.conj()).add(&gv.a_mixed.mul_vec(&gv.eta));
                    Ok(compared(vec_worst(&restated, &fd), Some(vec_worst(&gv.l, &fd))))
                }
                "eq22_indices" => {
                    let (_, t) = closed.clone()?;
                    let scale = t.eta_lower.max_abs();
                    let lit_r = lowering_literal_residual(&t, &gv.eta);
                    let der_r = lowering_residual(&t, &gv.eta);
                    let lit = (rel_to(lit_r.max_abs(), scale), c(lit_r.max_abs(), 0.0), c(scale, 0.0));
                    let der = (rel_to(der_r.max_abs(), scale), c(der_r.max_abs(), 0.0), c(scale, 0.0));
                    let mut cmp = compared(lit, Some(der));
                    cmp.values = alloc::vec![("literal_residual", lit.1), ("derived_residual", der.1), ("eta_lower_scale", lit.2)];
                    Ok(cmp)
                }
                _ => Err(Error::InvalidInput(format!("unregistered formula {}", entry.id))),
            }
        })();
        outcomes.push((
            entry.id,
            match out {
                Ok(cmp) => Outcome::Compared(cmp),
                Err(e) => Outcome::Failed(e),
            },
        ));
    }
    PointEvaluation {
        index: sp.index,
        point: p.clone(),
        outcomes,
    }
}

fn validity_finding(plan: &AuditPlan, entry: &'static RegistryEntry) -> Finding {
    let v = &plan.validity;
    let (status, note) = if v.valid > 0 {
        (
            Status::Consistent,
            format!("{} of {} evaluated draws lie in β > α > 0", v.valid, v.evaluated),
        )
    } else if v.evaluated >= MIN_DISCREPANT_POINTS && v.min_violation > DISCREPANT_TOL {
        (
            Status::Discrepant,
            format!(
                "no draw out of {} evaluated lies in β > α > 0; closest has (α − β)/α = {:.6e}",
                v.evaluated, v.min_violation
            ),
        )
    } else {
        (
            Status::Indeterminate,
            format!("no valid draw among {} evaluated, but the closest is within tolerance", v.evaluated),
        )
    };
    let max = if v.valid > 0 { 0.0 } else { v.min_violation };
    Finding {
        formula_id: entry.id,
        status,
        max_rel_diff: if max.is_finite() { max } else { 0.0 },
        derived_max_rel_diff: None,
        sample_count: v.evaluated,
        exceed_count: if v.valid > 0 { 0 } else { v.evaluated },
        witness: v.closest.as_ref().map(|c| c.1.clone()),
        witness_index: v.closest.as_ref().map(|c| c.0),
        quote: entry.quote,
        reference: entry.reference,
        note,
        values: alloc::vec![("valid_count", c(v.valid as f64, 0.0)), ("attempts", c(v.attempts as f64, 0.0))],
        extras: Vec::new(),
    }
}

/// Folds point evaluations into findings. Points are processed in
/// sampler order regardless of the order they were produced in.
pub fn assemble_report(plan: &AuditPlan, mut evals: Vec<PointEvaluation>) -> AuditReport {
    evals.sort_by_key(|e| e.index);
    let mut findings = Vec::with_capacity(REGISTRY.len());
    for entry in REGISTRY.iter() {
        if entry.id == "example_validity_region" {
            findings.push(validity_finding(plan, entry));
            continue;
        }
        let mut diffs = Vec::new();
        let mut derived_max: Option<f64> = None;
        let mut best: Option<(f64, &PointEvaluation, &Comparison)> = None;
        let mut extras: Vec<(&'static str, f64)> = Vec::new();
        let mut not_applicable: Option<&'static str> = None;
        let mut failures: Vec<&'static str> = Vec::new();
        for e in &evals {
            let Some((_, outcome)) = e.outcomes.iter().find(|(id, _)| *id == entry.id) else { continue };
            match outcome {
                Outcome::Compared(cmp) => {
                    let d = if cmp.literal_diff.is_nan() { f64::INFINITY } else { cmp.literal_diff };
                    diffs.push(d);
                    if let Some(dd) = cmp.derived_diff {
                        derived_max = Some(derived_max.map_or(dd, |m: f64| m.max(dd)));
                    }
                    for (k, v) in &cmp.extras {
                        match extras.iter_mut().find(|(kk, _)| kk == k) {
                            Some(slot) => slot.1 = slot.1.max(*v),
                            None => extras.push((k, *v)),
                        }
                    }
                    if best.as_ref().is_none_or(|b| d > b.0) {
                        best = Some((d, e, cmp));
                    }
                }
                Outcome::NotApplicable(why) => not_applicable = Some(why),
                Outcome::Failed(err) => {
                    let name = err.name();
                    if !failures.contains(&name) {
                        failures.push(name);
                    }
                }
            }
        }
        let status = Status::classify(&diffs);
        let exceed_count = diffs.iter().filter(|&&d| d > DISCREPANT_TOL).count();
        let mut note = String::new();
        if diffs.is_empty() {
            note = String::from(not_applicable.unwrap_or("no comparable points"));
        }
        if !failures.is_empty() {
            if !note.is_empty() {
                note.push_str("; ");
            }
            note.push_str(&format!("skipped points: {}", failures.join(", ")));
        }
        findings.push(Finding {
            formula_id: entry.id,
            status,
            max_rel_diff: best.as_ref().map_or(0.0, |b| b.0),
            derived_max_rel_diff: derived_max,
            sample_count: diffs.len(),
            exceed_count,
            witness: best.as_ref().map(|b| b.1.point.clone()),
            witness_index: best.as_ref().map(|b| b.1.index),
            quote: entry.quote,
            reference: entry.reference,
            note,
            values: best.as_ref().map(|b| b.2.values.clone()).unwrap_or_default(),
            extras,
        });
    }
    AuditReport {
        metric_name: plan.metric_name.clone(),
        family: plan.family,
        seed: plan.seed,
        samples_requested: plan.samples,
        points_used: plan.points.len(),
        attempts: plan.validity.attempts,
        findings,
    }
}

/// Sequential audit. Callers with threads can split the work through
/// [`plan_audit`], [`evaluate_point`] and [`assemble_report`].
pub fn run_audit(m: &MetricData, kind: &FamilyKind, samples: usize, seed: u64) -> AuditReport {
    let plan = plan_audit(m, kind, samples, seed);
    let evals = plan.points.iter().map(|sp| evaluate_point(m, kind, sp)).collect();
    assemble_report(&plan, evals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{c3_example, flat_real};

    #[test]
    fn classify_rules() {
        assert_eq!(Status::classify(&[]), Status::Indeterminate);
        assert_eq!(Status::classify(&[1e-6; 20]), Status::Consistent);
        assert_eq!(Status::classify(&[1e-2; 9]), Status::Indeterminate);
        assert_eq!(Status::classify(&[1e-2; 10]), Status::Discrepant);
        assert_eq!(Status::classify(&[1e-4; 50]), Status::Indeterminate);
    }

    #[test]
    fn flat_real_audit() {
        let m = flat_real(&[2.0, 0.0]).unwrap();
        let r = run_audit(&m, &FamilyKind::InfiniteSeries, 100, 42);
        assert_eq!(r.points_used, 100);
        let st = |id: &str| r.finding(id).unwrap().status;
        assert_eq!(st("sigma3"), Status::Consistent, "{:?}", r.finding("sigma3"));
        assert_eq!(st("sigma1"), Status::Discrepant);
        assert_eq!(st("sigma2"), Status::Discrepant);
        assert_eq!(st("g_mixed_coeff"), Status::Discrepant);
        assert_eq!(st("det_theorem_text"), Status::Discrepant);
        assert_eq!(st("det_proof_step"), Status::Consistent);
        assert_eq!(st("example_validity_region"), Status::Consistent);
        assert_eq!(r.findings.len(), REGISTRY.len());
    }

    #[test]
    fn c3_has_no_valid_points() {
        let r = run_audit(&c3_example(), &FamilyKind::InfiniteSeries, 20, 42);
        assert_eq!(r.points_used, 0);
        assert!(matches!(r.error(), Some(Error::NoValidPoints { .. })));
        assert_eq!(r.finding("example_validity_region").unwrap().status, Status::Discrepant);
    }

    #[test]
    fn other_family_marks_series_findings() {
        let m = flat_real(&[2.0, 0.0]).unwrap();
        let r = run_audit(&m, &FamilyKind::Randers, 20, 1);
        let f = r.finding("sigma1").unwrap();
        assert_eq!(f.status, Status::Indeterminate);
        assert!(f.note.contains("not applicable"));
        assert_eq!(r.finding("l_i_restatement").unwrap().sample_count, 20);
    }

    #[test]
    fn deterministic() {
        let m = flat_real(&[2.0, 0.0]).unwrap();
        let a = run_audit(&m, &FamilyKind::InfiniteSeries, 15, 9);
        let b = run_audit(&m, &FamilyKind::InfiniteSeries, 15, 9);
        assert_eq!(a, b);
    }
}
