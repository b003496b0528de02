//! Serializable report types. Complex numbers are `[re, im]` pairs and
//! non-finite reals become `null`.

use std::collections::BTreeMap;

use rcf_core::family::Jet2;
use rcf_core::invariants::{Invariants, SigmaInvariants};
use rcf_core::metric::EvaluationPoint;
use rcf_core::{CMatrix, CVector, Error, C64};
use serde::{Deserialize, Serialize};

use crate::commands::Tolerances;
use crate::definition::MetricDefinition;

pub type Cx = [f64; 2];

pub fn cx(z: C64) -> Cx {
    [z.re, z.im]
}

pub fn from_cx(p: &Cx) -> C64 {
    C64::new(p[0], p[1])
}

pub fn cvec(v: &[C64]) -> Vec<Cx> {
    v.iter().map(|&z| cx(z)).collect()
}

pub fn cmat(m: &CMatrix) -> Vec<Vec<Cx>> {
    (0..m.dim()).map(|i| cvec(m.row(i))).collect()
}

pub fn fin(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSpec {
    pub z: Vec<Cx>,
    pub eta: Vec<Cx>,
}

impl PointSpec {
    pub fn from_point(p: &EvaluationPoint) -> Self {
        PointSpec {
            z: cvec(&p.z),
            eta: cvec(&p.eta),
        }
    }

    pub fn to_point(&self) -> EvaluationPoint {
        let v = |xs: &[Cx]| CVector(xs.iter().map(from_cx).collect());
        EvaluationPoint::new(v(&self.z), v(&self.eta))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorInfo {
    pub name: String,
    pub message: String,
}

impl From<&Error> for ErrorInfo {
    fn from(e: &Error) -> Self {
        ErrorInfo {
            name: e.name().into(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub command: String,
    pub metric: MetricDefinition,
    pub family: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JetOut {
    pub l: Option<f64>,
    pub l_alpha: Option<f64>,
    pub l_beta: Option<f64>,
    pub l_alpha_alpha: Option<f64>,
    pub l_alpha_beta: Option<f64>,
    pub l_beta_beta: Option<f64>,
}

impl From<&Jet2> for JetOut {
    fn from(j: &Jet2) -> Self {
        JetOut {
            l: fin(j.l),
            l_alpha: fin(j.l_alpha),
            l_beta: fin(j.l_beta),
            l_alpha_alpha: fin(j.l_alpha_alpha),
            l_alpha_beta: fin(j.l_alpha_beta),
            l_beta_beta: fin(j.l_beta_beta),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantsOut {
    pub rho0: Option<f64>,
    pub rho1: Option<f64>,
    pub rho_m2: Option<f64>,
    pub rho_m1: Option<f64>,
    pub mu0: Option<f64>,
}

impl From<&Invariants> for InvariantsOut {
    fn from(i: &Invariants) -> Self {
        InvariantsOut {
            rho0: fin(i.rho0),
            rho1: fin(i.rho1),
            rho_m2: fin(i.rho_m2),
            rho_m1: fin(i.rho_m1),
            mu0: fin(i.mu0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaOut {
    pub variant: String,
    pub sigma1: Option<f64>,
    pub sigma2: Option<f64>,
    pub sigma3: Option<f64>,
    pub error: Option<ErrorInfo>,
}

impl SigmaOut {
    pub fn new(variant: &str, s: &Result<SigmaInvariants, Error>) -> Self {
        match s {
            Ok(s) => SigmaOut {
                variant: variant.into(),
                sigma1: fin(s.sigma1),
                sigma2: fin(s.sigma2),
                sigma3: fin(s.sigma3),
                error: None,
            },
            Err(e) => SigmaOut {
                variant: variant.into(),
                sigma1: None,
                sigma2: None,
                sigma3: None,
                error: Some(e.into()),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub index: usize,
    pub point: PointSpec,
    pub error: Option<ErrorInfo>,
    pub alpha: Option<f64>,
    pub alpha_sq: Option<f64>,
    pub beta: Option<f64>,
    pub valid: Option<bool>,
    pub jet: Option<JetOut>,
    pub invariants: Option<InvariantsOut>,
    pub sigma: Vec<SigmaOut>,
    pub g: Option<Vec<Vec<Cx>>>,
    pub g_mixed: Option<Vec<Vec<Cx>>>,
    pub eta_lower: Option<Vec<Cx>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub max: Option<f64>,
    pub tolerance: f64,
    pub evaluated: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub name: String,
    pub max: Option<f64>,
    pub evaluated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyPoint {
    pub index: usize,
    pub point: PointSpec,
    pub error: Option<ErrorInfo>,
    pub jet_euler: Option<f64>,
    pub reconstruction: Option<f64>,
    pub lowering: Option<f64>,
    pub euler: Option<f64>,
    /// `max|g_closed − g_oracle| / max(tol·‖g‖, k·error_estimate)`.
    pub oracle_ratio: Option<f64>,
    pub oracle_rel_diff: Option<f64>,
    pub oracle_error_estimate: Option<f64>,
    pub oracle_error: Option<ErrorInfo>,
    pub contraction: Option<[f64; 3]>,
    /// Worst of `|L(λη) − λ²L(η)|/|λ²L|` and `‖g(λη) − g(η)‖/‖g‖` over the
    /// sweep's scale factors.
    pub homogeneity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvertPoint {
    pub index: usize,
    pub point: PointSpec,
    pub error: Option<ErrorInfo>,
    pub det_lu: Option<Cx>,
    pub det_pipeline: Option<Cx>,
    pub det_theorem_text: Option<Cx>,
    pub det_proof_step: Option<Cx>,
    pub det_trailing_line: Option<Cx>,
    pub trailing_prefactor: Option<f64>,
    pub matsumoto_rho0_pow: Option<f64>,
    pub variants_indistinguishable: Option<bool>,
    pub pipeline_vs_lu: Option<f64>,
    pub proof_step_vs_lu: Option<f64>,
    pub theorem_text_vs_lu: Option<f64>,
    pub trailing_vs_lu: Option<f64>,
    pub identity_residual: Option<f64>,
    pub tau: Option<Cx>,
    pub omega: Option<Cx>,
    pub gamma: Option<Cx>,
    pub step_factors: Vec<Cx>,
    pub g_inv: Option<Vec<Vec<Cx>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FindingOut {
    pub formula_id: String,
    pub status: String,
    pub max_rel_diff: Option<f64>,
    pub derived_max_rel_diff: Option<f64>,
    pub sample_count: usize,
    pub exceed_count: usize,
    pub witness: Option<PointSpec>,
    pub witness_index: Option<usize>,
    pub paper_quote: String,
    pub reference: String,
    pub note: String,
    pub values: BTreeMap<String, Cx>,
    pub extras: BTreeMap<String, Option<f64>>,
}

impl From<&rcf_core::audit::Finding> for FindingOut {
    fn from(f: &rcf_core::audit::Finding) -> Self {
        FindingOut {
            formula_id: f.formula_id.into(),
            status: f.status.name().into(),
            max_rel_diff: fin(f.max_rel_diff),
            derived_max_rel_diff: f.derived_max_rel_diff.and_then(fin),
            sample_count: f.sample_count,
            exceed_count: f.exceed_count,
            witness: f.witness.as_ref().map(PointSpec::from_point),
            witness_index: f.witness_index,
            paper_quote: f.quote.into(),
            reference: f.reference.into(),
            note: f.note.clone(),
            values: f.values.iter().map(|(k, v)| (k.to_string(), cx(*v))).collect(),
            extras: f.extras.iter().map(|(k, v)| (k.to_string(), fin(*v))).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub index: usize,
    pub z: String,
    pub eta: String,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub valid: bool,
    pub det_g_re: Option<f64>,
    pub det_g_im: Option<f64>,
    pub min_eigen_modulus: Option<f64>,
    /// `valid` or `invalid`; guard failures are `invalid` with `error` set.
    pub status: String,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalBody {
    pub points: Vec<EvalPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyBody {
    pub tolerances: Tolerances,
    pub points: Vec<VerifyPoint>,
    pub checks: Vec<CheckResult>,
    pub skipped: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvertBody {
    pub tolerances: Tolerances,
    pub points: Vec<InvertPoint>,
    pub checks: Vec<CheckResult>,
    /// Aggregates printed for comparison only; they do not affect `pass`.
    pub reported: Vec<Spread>,
    pub skipped: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditBody {
    pub samples_requested: usize,
    pub points_used: usize,
    pub attempts: usize,
    pub error: Option<ErrorInfo>,
    pub findings: Vec<FindingOut>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBody {
    pub grid: Option<usize>,
    pub total: usize,
    pub valid_count: usize,
    pub valid_fraction: f64,
    pub rows: Vec<SampleRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Body {
    Eval(EvalBody),
    Verify(VerifyBody),
    Invert(InvertBody),
    Audit(AuditBody),
    Sample(SampleBody),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    #[serde(flatten)]
    pub header: Header,
    #[serde(flatten)]
    pub body: Body,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Parses any report, dispatching on its `command` field.
    pub fn from_json(text: &str) -> anyhow::Result<Report> {
        let v: serde_json::Value = serde_json::from_str(text)?;
        let header: Header = serde_json::from_value(v.clone())?;
        let body = match header.command.as_str() {
            "eval" => Body::Eval(serde_json::from_value(v)?),
            "verify" => Body::Verify(serde_json::from_value(v)?),
            "invert" => Body::Invert(serde_json::from_value(v)?),
            "audit" => Body::Audit(serde_json::from_value(v)?),
            "sample" => Body::Sample(serde_json::from_value(v)?),
            other => anyhow::bail!("unknown report command '{other}'"),
        };
        Ok(Report { header, body })
    }

    /// Every point this report was computed at with its original index.
    pub fn points(&self) -> anyhow::Result<Vec<(usize, EvaluationPoint)>> {
        Ok(match &self.body {
            Body::Eval(b) => b.points.iter().map(|p| (p.index, p.point.to_point())).collect(),
            Body::Verify(b) => b.points.iter().map(|p| (p.index, p.point.to_point())).collect(),
            Body::Invert(b) => b.points.iter().map(|p| (p.index, p.point.to_point())).collect(),
            Body::Audit(b) => b
                .findings
                .iter()
                .filter_map(|f| Some((f.witness_index?, f.witness.as_ref()?.to_point())))
                .collect(),
            Body::Sample(b) => b
                .rows
                .iter()
                .map(|r| {
                    let z = crate::points::parse_cvector(&r.z)?;
                    let eta = crate::points::parse_cvector(&r.eta)?;
                    Ok((r.index, EvaluationPoint::new(z, eta)))
                })
                .collect::<anyhow::Result<_>>()?,
        })
    }
}
