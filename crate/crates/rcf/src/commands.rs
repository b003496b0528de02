//! The five subcommands over a resolved [`RunConfig`].

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use log::{debug, info};
use rcf_core::audit::{assemble_report, evaluate_point, plan_audit, Outcome, Status, ATTEMPTS_PER_SAMPLE};
use rcf_core::family::{euler_residuals, FamilyKind};
use rcf_core::invariants::{
    rho_invariants, sigma_from_rho, sigma_invariants, Invariants, SigmaInvariants, SigmaVariant,
};
use rcf_core::linalg::{lu_invert, mat_rel_diff};
use rcf_core::metric::{EvaluationPoint, GroundValues, MetricData};
use rcf_core::rank1::{determinant_audit, invert_pipeline};
use rcf_core::sampling::{grid_points, sample_points, Margins, SampledPoint, Sampler, DEFAULT_SEED};
use rcf_core::tensor::{assemble_tensors, closed_form_at, identity_suite, oracle_hessians, real_hessian};
use rcf_core::{CVector, Error};
use serde::{Deserialize, Serialize};

use crate::definition::{MetricDefinition, MetricSource};
use crate::parallel::par_map;
use crate::points::format_cvector;
use crate::report::*;

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAIL: u8 = 1;
pub const EXIT_DOMAIN: u8 = 2;

/// Default number of random points for sweeps without `--samples`.
pub const DEFAULT_SAMPLES: usize = 100;

/// Scale factors of the homogeneity check.
pub const HOMOGENEITY_SCALES: [f64; 3] = [0.5, 2.0, 7.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Eval,
    Verify,
    Invert,
    Audit,
    Sample,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Eval => "eval",
            Command::Verify => "verify",
            Command::Invert => "invert",
            Command::Audit => "audit",
            Command::Sample => "sample",
        }
    }
}

impl FromStr for Command {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "eval" => Command::Eval,
            "verify" => Command::Verify,
            "invert" => Command::Invert,
            "audit" => Command::Audit,
            "sample" => Command::Sample,
            _ => bail!("unknown command '{s}'"),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Pretty,
}

impl FromStr for Format {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "json" => Format::Json,
            "csv" => Format::Csv,
            "pretty" => Format::Pretty,
            _ => bail!("unknown format '{s}' (json, csv, pretty)"),
        })
    }
}

/// Pass thresholds of `verify` and `invert`, overridable by name.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub jet_euler: f64,
    pub reconstruction: f64,
    pub lowering: f64,
    pub euler: f64,
    /// Oracle agreement: `diff ≤ max(oracle_rel·‖g‖, oracle_error_factor·err)`.
    pub oracle_rel: f64,
    pub oracle_error_factor: f64,
    pub contraction: f64,
    pub homogeneity: f64,
    pub identity: f64,
    pub determinant: f64,
    pub proof_step: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            jet_euler: 1e-10,
            reconstruction: 1e-9,
            lowering: 1e-9,
            euler: 1e-9,
            oracle_rel: 1e-5,
            oracle_error_factor: 10.0,
            contraction: 1e-12,
            homogeneity: 1e-11,
            identity: 1e-9,
            determinant: 1e-9,
            proof_step: 1e-9,
        }
    }
}

impl Tolerances {
    pub const KEYS: [&'static str; 11] = [
        "jet_euler",
        "reconstruction",
        "lowering",
        "euler",
        "oracle_rel",
        "oracle_error_factor",
        "contraction",
        "homogeneity",
        "identity",
        "determinant",
        "proof_step",
    ];

    fn slot(&mut self, key: &str) -> Option<&mut f64> {
        Some(match key {
            "jet_euler" => &mut self.jet_euler,
            "reconstruction" => &mut self.reconstruction,
            "lowering" => &mut self.lowering,
            "euler" => &mut self.euler,
            "oracle_rel" => &mut self.oracle_rel,
            "oracle_error_factor" => &mut self.oracle_error_factor,
            "contraction" => &mut self.contraction,
            "homogeneity" => &mut self.homogeneity,
            "identity" => &mut self.identity,
            "determinant" => &mut self.determinant,
            "proof_step" => &mut self.proof_step,
            _ => return None,
        })
    }

    /// Applies one `NAME=VALUE` override.
    pub fn apply(&mut self, spec: &str) -> Result<()> {
        let Some((k, v)) = spec.split_once('=') else {
            bail!("tolerance override '{spec}' is not NAME=VALUE");
        };
        let value: f64 = v.trim().parse().with_context(|| format!("tolerance value '{v}'"))?;
        if !(value.is_finite() && value >= 0.0) {
            bail!("tolerance '{k}' must be finite and non-negative");
        }
        let key = k.trim();
        match self.slot(key) {
            Some(s) => *s = value,
            None => bail!("unknown tolerance '{key}' (known: {})", Self::KEYS.join(", ")),
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source: MetricSource,
    pub family: FamilyKind,
    pub z: Option<CVector>,
    pub eta: Option<CVector>,
    /// Points to use verbatim, with their indices. Takes precedence over
    /// every other point specification.
    pub explicit: Option<Vec<(usize, EvaluationPoint)>>,
    pub samples: Option<usize>,
    pub seed: u64,
    pub grid: Option<usize>,
    pub z_box: f64,
    pub eta_box: f64,
    pub jobs: usize,
    pub tolerances: Tolerances,
}

impl RunConfig {
    pub fn new(source: MetricSource) -> Self {
        RunConfig {
            source,
            family: FamilyKind::InfiniteSeries,
            z: None,
            eta: None,
            explicit: None,
            samples: None,
            seed: DEFAULT_SEED,
            grid: None,
            z_box: 0.5,
            eta_box: 2.0,
            jobs: 1,
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: Report,
    pub exit: u8,
}

/// Runs one command. `Err` means a configuration error (exit 2); domain
/// errors at points are recorded in the report.
pub fn run(cmd: Command, cfg: &RunConfig) -> Result<RunOutput> {
    let m = cfg.source.resolve(cfg.seed)?;
    if matches!(cfg.family, FamilyKind::Custom(_)) && cmd == Command::Audit {
        bail!("audit needs a named family");
    }
    let header = Header {
        command: cmd.name().into(),
        metric: MetricDefinition::from_metric(&m),
        family: cfg.family.name().into(),
        seed: cfg.seed,
    };
    info!("{} on '{}' (n = {}, family {}, seed {})", cmd.name(), m.name, m.dim(), cfg.family.name(), cfg.seed);
    let (body, exit) = match cmd {
        Command::Eval => eval(&m, cfg)?,
        Command::Verify => verify(&m, cfg)?,
        Command::Invert => invert(&m, cfg)?,
        Command::Audit => audit(&m, cfg)?,
        Command::Sample => sample(&m, cfg)?,
    };
    Ok(RunOutput {
        report: Report { header, body },
        exit,
    })
}

/// Keeps points that are clear of `α = 0` and the family's singular locus,
/// plus `|β − 2α|` for σ-based work on the infinite-series metric.
fn sweep_accepts(kind: &FamilyKind, gv: &GroundValues, sigma: bool) -> bool {
    match kind {
        FamilyKind::InfiniteSeries => if sigma { Margins::SIGMA } else { Margins::ORACLE }.accepts(gv),
        _ => {
            let s = gv.eta.norm();
            let m = Margins::ORACLE;
            gv.alpha > m.alpha * s && kind.singular_distance(gv.alpha, gv.beta).is_none_or(|d| d > m.gap * s)
        }
    }
}

fn select_points(cmd: Command, m: &MetricData, cfg: &RunConfig) -> Result<Vec<(usize, EvaluationPoint)>> {
    let n = m.dim();
    if let Some(pts) = &cfg.explicit {
        return Ok(pts.clone());
    }
    let z = match &cfg.z {
        Some(z) if z.len() != n => bail!("--z has {} entries, the metric has dimension {n}", z.len()),
        Some(z) => z.clone(),
        None => CVector::zeros(n),
    };
    if let Some(eta) = &cfg.eta {
        if eta.len() != n {
            bail!("--eta has {} entries, the metric has dimension {n}", eta.len());
        }
        if cfg.grid.is_some() || cfg.samples.is_some() {
            bail!("--eta conflicts with --grid and --samples");
        }
        return Ok(vec![(0, EvaluationPoint::new(z, eta.clone()))]);
    }
    if let Some(k) = cfg.grid {
        if cfg.samples.is_some() {
            bail!("--grid conflicts with --samples");
        }
        if k == 0 || (k as f64).powi(n as i32) > 1e7 {
            bail!("--grid {k} gives an unreasonable number of points in dimension {n}");
        }
        return Ok(grid_points(&z, k, cfg.eta_box).into_iter().enumerate().collect());
    }
    let count = cfg.samples.unwrap_or(DEFAULT_SAMPLES);
    let mut sampler = Sampler::with_boxes(cfg.seed, cfg.z_box, cfg.eta_box);
    Ok(match cmd {
        Command::Verify | Command::Invert => {
            let sigma = cmd == Command::Invert;
            let set = sample_points(m, &mut sampler, count, count.max(1) * ATTEMPTS_PER_SAMPLE, |gv| {
                sweep_accepts(&cfg.family, gv, sigma)
            });
            info!("accepted {} of {} draws", set.points.len(), set.attempts);
            set.points.into_iter().map(|sp| (sp.index, sp.point)).collect()
        }
        _ => (0..count).map(|i| (i, sampler.point(n))).collect(),
    })
}

fn derived_sigma(kind: &FamilyKind, gv: &GroundValues, inv: &Invariants) -> Result<SigmaInvariants, Error> {
    let undefined = Error::SigmaUndefined {
        alpha: gv.alpha,
        beta: gv.beta,
    };
    match kind {
        FamilyKind::InfiniteSeries => sigma_invariants(gv.alpha, gv.beta, SigmaVariant::Derived),
        _ => sigma_from_rho(inv).ok_or(undefined),
    }
}

fn opt_cx(z: Option<rcf_core::C64>) -> Option<Cx> {
    z.map(cx)
}

fn log_error(index: usize, e: &Error) -> Option<ErrorInfo> {
    debug!("point {index}: {e}");
    Some(e.into())
}

// eval

pub fn eval_point(m: &MetricData, kind: &FamilyKind, index: usize, p: &EvaluationPoint) -> EvalPoint {
    let mut out = EvalPoint {
        index,
        point: PointSpec::from_point(p),
        error: None,
        alpha: None,
        alpha_sq: None,
        beta: None,
        valid: None,
        jet: None,
        invariants: None,
        sigma: Vec::new(),
        g: None,
        g_mixed: None,
        eta_lower: None,
    };
    let gv = match m.ground_values(p) {
        Ok(gv) => gv,
        Err(e) => {
            out.error = log_error(index, &e);
            return out;
        }
    };
    out.alpha = fin(gv.alpha);
    out.alpha_sq = fin(gv.alpha_sq);
    out.beta = fin(gv.beta);
    out.valid = Some(gv.is_valid_region());
    let jet = match kind.jet(gv.alpha, gv.beta) {
        Ok(j) => j,
        Err(e) => {
            out.error = log_error(index, &e);
            return out;
        }
    };
    let inv = rho_invariants(&jet, gv.alpha);
    out.jet = Some((&jet).into());
    out.invariants = Some((&inv).into());
    out.sigma.push(SigmaOut::new("derived", &derived_sigma(kind, &gv, &inv)));
    if matches!(kind, FamilyKind::InfiniteSeries) {
        out.sigma.push(SigmaOut::new(
            "literal",
            &sigma_invariants(gv.alpha, gv.beta, SigmaVariant::Literal),
        ));
    }
    let t = assemble_tensors(&gv, &inv);
    out.g = Some(cmat(&t.g));
    out.g_mixed = Some(cmat(&t.g_mixed));
    out.eta_lower = Some(cvec(&t.eta_lower));
    out
}

fn eval(m: &MetricData, cfg: &RunConfig) -> Result<(Body, u8)> {
    let pts = select_points(Command::Eval, m, cfg)?;
    let points = par_map(&pts, cfg.jobs, |(i, p)| eval_point(m, &cfg.family, *i, p));
    let exit = if points.iter().any(|p| p.error.is_some()) { EXIT_DOMAIN } else { EXIT_OK };
    Ok((Body::Eval(EvalBody { points }), exit))
}

// verify

fn homogeneity_at(m: &MetricData, kind: &FamilyKind, p: &EvaluationPoint) -> Option<f64> {
    let (_, jet, _, t) = closed_form_at(m, p, kind).ok()?;
    let mut worst = 0.0f64;
    for lambda in HOMOGENEITY_SCALES {
        let (_, jl, _, tl) = closed_form_at(m, &p.scaled(lambda), kind).ok()?;
        let target = lambda * lambda * jet.l;
        worst = worst
            .max((jl.l - target).abs() / target.abs().max(f64::MIN_POSITIVE))
            .max(mat_rel_diff(&tl.g, &t.g))
            .max(mat_rel_diff(&tl.g_mixed, &t.g_mixed));
    }
    Some(worst)
}

pub fn verify_point(m: &MetricData, kind: &FamilyKind, tol: &Tolerances, index: usize, p: &EvaluationPoint) -> VerifyPoint {
    let mut out = VerifyPoint {
        index,
        point: PointSpec::from_point(p),
        error: None,
        jet_euler: None,
        reconstruction: None,
        lowering: None,
        euler: None,
        oracle_ratio: None,
        oracle_rel_diff: None,
        oracle_error_estimate: None,
        oracle_error: None,
        contraction: None,
        homogeneity: None,
    };
    let (gv, jet, _, t) = match closed_form_at(m, p, kind) {
        Ok(x) => x,
        Err(e) => {
            out.error = log_error(index, &e);
            return out;
        }
    };
    out.jet_euler = Some(euler_residuals(&jet, gv.alpha, gv.beta).into_iter().fold(0.0, f64::max));
    let r = identity_suite(&t, &gv, jet.l);
    out.reconstruction = Some(r.reconstruction);
    out.lowering = Some(r.lowering);
    out.euler = Some(r.euler);
    out.contraction = r.contraction;
    match oracle_hessians(m, p, kind) {
        Ok(o) => {
            let diff = t
                .g
                .sub(&o.tensors.g)
                .max_abs()
                .max(t.g_mixed.sub(&o.tensors.g_mixed).max_abs());
            let scale = o.tensors.scale().max(f64::MIN_POSITIVE);
            let allowed = (tol.oracle_rel * scale).max(tol.oracle_error_factor * o.error_estimate);
            out.oracle_ratio = Some(diff / allowed.max(f64::MIN_POSITIVE));
            out.oracle_rel_diff = Some(diff / scale);
            out.oracle_error_estimate = Some(o.error_estimate);
        }
        Err(e) => out.oracle_error = log_error(index, &e),
    }
    out.homogeneity = homogeneity_at(m, kind, p);
    out
}

fn check(name: &str, values: impl Iterator<Item = Option<f64>>, tolerance: f64) -> CheckResult {
    let mut evaluated = 0;
    let mut max: Option<f64> = None;
    let mut pass = true;
    for v in values.flatten() {
        evaluated += 1;
        // NaN fails the check and poisons the maximum.
        if !(v <= tolerance) {
            pass = false;
        }
        max = Some(match max {
            Some(m) if !(v > m) && !v.is_nan() => m,
            _ => v,
        });
    }
    CheckResult {
        name: name.into(),
        max: max.and_then(fin),
        tolerance,
        evaluated,
        pass,
    }
}

fn spread(name: &str, values: impl Iterator<Item = Option<f64>>) -> Spread {
    let vals: Vec<f64> = values.flatten().collect();
    Spread {
        name: name.into(),
        max: vals.iter().copied().reduce(f64::max).and_then(fin),
        evaluated: vals.len(),
    }
}

fn verify(m: &MetricData, cfg: &RunConfig) -> Result<(Body, u8)> {
    let tol = cfg.tolerances;
    let pts = select_points(Command::Verify, m, cfg)?;
    let points = par_map(&pts, cfg.jobs, |(i, p)| verify_point(m, &cfg.family, &tol, *i, p));
    let ok = || points.iter().filter(|p| p.error.is_none());
    let checks = vec![
        check("jet_euler", ok().map(|p| p.jet_euler), tol.jet_euler),
        check("reconstruction", ok().map(|p| p.reconstruction), tol.reconstruction),
        check("lowering", ok().map(|p| p.lowering), tol.lowering),
        check("euler", ok().map(|p| p.euler), tol.euler),
        check("oracle_ratio", ok().map(|p| p.oracle_ratio), 1.0),
        check(
            "contraction",
            ok().map(|p| p.contraction.map(|x| x.into_iter().fold(0.0, f64::max))),
            tol.contraction,
        ),
        check("homogeneity", ok().map(|p| p.homogeneity), tol.homogeneity),
    ];
    let skipped = points.len() - ok().count();
    let evaluated = ok().count();
    let pass = evaluated > 0 && checks.iter().all(|c| c.pass);
    let exit = if evaluated == 0 {
        EXIT_DOMAIN
    } else if pass {
        EXIT_OK
    } else {
        EXIT_FAIL
    };
    Ok((
        Body::Verify(VerifyBody {
            tolerances: tol,
            points,
            checks,
            skipped,
            pass,
        }),
        exit,
    ))
}

// invert

pub fn invert_point(m: &MetricData, kind: &FamilyKind, index: usize, p: &EvaluationPoint) -> InvertPoint {
    let mut out = InvertPoint {
        index,
        point: PointSpec::from_point(p),
        error: None,
        det_lu: None,
        det_pipeline: None,
        det_theorem_text: None,
        det_proof_step: None,
        det_trailing_line: None,
        trailing_prefactor: None,
        matsumoto_rho0_pow: None,
        variants_indistinguishable: None,
        pipeline_vs_lu: None,
        proof_step_vs_lu: None,
        theorem_text_vs_lu: None,
        trailing_vs_lu: None,
        identity_residual: None,
        tau: None,
        omega: None,
        gamma: None,
        step_factors: Vec::new(),
        g_inv: None,
    };
    let result = closed_form_at(m, p, kind).and_then(|(gv, _, inv, t)| {
        let sig = derived_sigma(kind, &gv, &inv)?;
        let pipe = invert_pipeline(&gv, &inv, &sig, &t)?;
        Ok((gv, inv, sig, t, pipe))
    });
    let (gv, inv, sig, t, pipe) = match result {
        Ok(x) => x,
        Err(e) => {
            out.error = log_error(index, &e);
            return out;
        }
    };
    let da = determinant_audit(&gv, &inv, &sig, &t);
    out.det_lu = opt_cx(da.lu);
    out.det_pipeline = opt_cx(da.pipeline);
    out.det_theorem_text = opt_cx(da.theorem_text);
    out.det_proof_step = opt_cx(da.proof_step);
    out.det_trailing_line = opt_cx(da.trailing_line);
    out.trailing_prefactor = fin(da.trailing_prefactor);
    out.matsumoto_rho0_pow = da.matsumoto_rho0_pow.and_then(fin);
    out.variants_indistinguishable = Some(da.variants_indistinguishable);
    out.pipeline_vs_lu = da.pipeline_vs_lu();
    out.proof_step_vs_lu = da.proof_step_vs_lu();
    out.theorem_text_vs_lu = da.theorem_text_vs_lu();
    out.trailing_vs_lu = da.trailing_vs_lu();
    out.identity_residual = Some(t.g.identity_residual(&pipe.g_inv));
    out.tau = Some(cx(pipe.tau));
    out.omega = Some(cx(pipe.omega_coeff));
    out.gamma = Some(cx(pipe.gamma_coeff));
    out.step_factors = pipe.per_step.iter().map(|s| cx(s.factor())).collect();
    out.g_inv = Some(cmat(&pipe.g_inv));
    if let Some(e) = da.failure {
        out.error = log_error(index, &e);
    }
    out
}

fn invert(m: &MetricData, cfg: &RunConfig) -> Result<(Body, u8)> {
    if !m.fields.mixed_is_zero() {
        bail!("{}", Error::NotNonHermitian);
    }
    let tol = cfg.tolerances;
    let pts = select_points(Command::Invert, m, cfg)?;
    let points = par_map(&pts, cfg.jobs, |(i, p)| invert_point(m, &cfg.family, *i, p));
    let ok = || points.iter().filter(|p| p.error.is_none());
    let checks = vec![
        check("identity_residual", ok().map(|p| p.identity_residual), tol.identity),
        check("pipeline_vs_lu", ok().map(|p| p.pipeline_vs_lu), tol.determinant),
        check("proof_step_vs_lu", ok().map(|p| p.proof_step_vs_lu), tol.proof_step),
    ];
    let reported = vec![
        spread("theorem_text_vs_lu", ok().map(|p| p.theorem_text_vs_lu)),
        spread("trailing_vs_lu", ok().map(|p| p.trailing_vs_lu)),
    ];
    let evaluated = ok().count();
    let skipped = points.len() - evaluated;
    let pass = evaluated > 0 && checks.iter().all(|c| c.pass);
    let exit = if evaluated == 0 {
        EXIT_DOMAIN
    } else if pass {
        EXIT_OK
    } else {
        EXIT_FAIL
    };
    Ok((
        Body::Invert(InvertBody {
            tolerances: tol,
            points,
            checks,
            reported,
            skipped,
            pass,
        }),
        exit,
    ))
}

// audit

fn audit(m: &MetricData, cfg: &RunConfig) -> Result<(Body, u8)> {
    if cfg.eta.is_some() || cfg.grid.is_some() || cfg.explicit.is_some() {
        bail!("audit draws its own points; use --samples and --seed");
    }
    let samples = cfg.samples.unwrap_or(DEFAULT_SAMPLES);
    if samples < 10 {
        bail!("audit needs at least 10 samples");
    }
    let plan = plan_audit(m, &cfg.family, samples, cfg.seed);
    info!("audit plan: {} points from {} draws", plan.points.len(), plan.validity.attempts);
    let evals = par_map(&plan.points, cfg.jobs, |sp| evaluate_point(m, &cfg.family, sp));
    let rep = assemble_report(&plan, evals);
    let error = rep.error();
    let exit = if error.is_some() { EXIT_DOMAIN } else { EXIT_OK };
    Ok((
        Body::Audit(AuditBody {
            samples_requested: rep.samples_requested,
            points_used: rep.points_used,
            attempts: rep.attempts,
            error: error.as_ref().map(ErrorInfo::from),
            findings: rep.findings.iter().map(FindingOut::from).collect(),
        }),
        exit,
    ))
}

// sample

pub fn min_eigen_modulus(hessian: &[f64], dim: usize) -> Option<f64> {
    if hessian.iter().any(|x| !x.is_finite()) {
        return None;
    }
    let h = nalgebra::DMatrix::from_row_slice(dim, dim, hessian);
    h.symmetric_eigen().eigenvalues.iter().map(|x| x.abs()).reduce(f64::min)
}

pub fn sample_row(m: &MetricData, kind: &FamilyKind, index: usize, p: &EvaluationPoint) -> SampleRow {
    let mut row = SampleRow {
        index,
        z: format_cvector(&p.z),
        eta: format_cvector(&p.eta),
        alpha: None,
        beta: None,
        valid: false,
        det_g_re: None,
        det_g_im: None,
        min_eigen_modulus: None,
        status: "invalid".into(),
        error: None,
    };
    let gv = match m.ground_values(p) {
        Ok(gv) => gv,
        Err(e) => {
            row.error = Some(e.name().into());
            return row;
        }
    };
    row.alpha = fin(gv.alpha);
    row.beta = fin(gv.beta);
    match kind.jet(gv.alpha, gv.beta) {
        Ok(jet) => {
            let t = assemble_tensors(&gv, &rho_invariants(&jet, gv.alpha));
            if let Ok(lu) = lu_invert(&t.g) {
                row.det_g_re = fin(lu.determinant.re);
                row.det_g_im = fin(lu.determinant.im);
            }
            row.min_eigen_modulus = min_eigen_modulus(&real_hessian(&t), 2 * gv.n()).and_then(fin);
            row.valid = gv.is_valid_region();
        }
        Err(e) => row.error = Some(e.name().into()),
    }
    if row.valid {
        row.status = "valid".into();
    }
    row
}

fn sample(m: &MetricData, cfg: &RunConfig) -> Result<(Body, u8)> {
    let pts = select_points(Command::Sample, m, cfg)?;
    let rows = par_map(&pts, cfg.jobs, |(i, p)| sample_row(m, &cfg.family, *i, p));
    let valid_count = rows.iter().filter(|r| r.valid).count();
    let total = rows.len();
    Ok((
        Body::Sample(SampleBody {
            grid: cfg.grid,
            total,
            valid_count,
            valid_fraction: if total == 0 { 0.0 } else { valid_count as f64 / total as f64 },
            rows,
        }),
        EXIT_OK,
    ))
}

// replay

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplayOutcome {
    pub command: String,
    pub checked: usize,
    pub mismatches: Vec<String>,
}

impl ReplayOutcome {
    pub fn pass(&self) -> bool {
        self.mismatches.is_empty()
    }
}

fn family_of(name: &str) -> Result<FamilyKind> {
    FamilyKind::from_name(name).with_context(|| format!("family '{name}' cannot be replayed"))
}

/// Re-runs a saved report at its own points (for an audit, at each
/// finding's witness) and lists every value that no longer matches.
pub fn replay(path: &Path, jobs: usize) -> Result<ReplayOutcome> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let saved = Report::from_json(&text).with_context(|| format!("parsing report {}", path.display()))?;
    let cmd: Command = saved.header.command.parse()?;
    let mut cfg = RunConfig::new(MetricSource::Inline(saved.header.metric.clone()));
    cfg.family = family_of(&saved.header.family)?;
    cfg.seed = saved.header.seed;
    cfg.jobs = jobs;
    cfg.explicit = Some(saved.points()?);
    match &saved.body {
        Body::Verify(b) => cfg.tolerances = b.tolerances,
        Body::Invert(b) => cfg.tolerances = b.tolerances,
        Body::Sample(b) => cfg.grid = b.grid,
        _ => {}
    }
    let mut out = ReplayOutcome {
        command: cmd.name().into(),
        checked: 0,
        mismatches: Vec::new(),
    };
    if let Body::Audit(b) = &saved.body {
        let m = cfg.source.resolve(cfg.seed)?;
        for f in &b.findings {
            if let Some(msg) = replay_finding(&m, &cfg.family, f)? {
                out.mismatches.push(msg);
            }
            out.checked += 1;
        }
        return Ok(out);
    }
    let fresh = run(cmd, &cfg)?.report;
    let saved_pts = point_values(&saved.body)?;
    let fresh_pts = point_values(&fresh.body)?;
    if saved_pts.len() != fresh_pts.len() {
        out.mismatches.push(format!("{} points saved, {} recomputed", saved_pts.len(), fresh_pts.len()));
    }
    for ((idx, a), (_, b)) in saved_pts.iter().zip(&fresh_pts) {
        out.checked += 1;
        if a != b {
            out.mismatches.push(format!("point {idx} differs"));
        }
    }
    Ok(out)
}

fn point_values(body: &Body) -> Result<Vec<(usize, serde_json::Value)>> {
    fn each<T: Serialize>(xs: &[T], idx: impl Fn(&T) -> usize) -> Result<Vec<(usize, serde_json::Value)>> {
        xs.iter().map(|x| Ok((idx(x), serde_json::to_value(x)?))).collect()
    }
    match body {
        Body::Eval(b) => each(&b.points, |p| p.index),
        Body::Verify(b) => each(&b.points, |p| p.index),
        Body::Invert(b) => each(&b.points, |p| p.index),
        Body::Sample(b) => each(&b.rows, |r| r.index),
        Body::Audit(_) => Ok(Vec::new()),
    }
}

fn same_diff(recomputed: f64, saved: Option<f64>) -> bool {
    match saved {
        Some(s) => (recomputed - s).abs() <= 1e-12 * s.abs().max(1e-300) || recomputed == s,
        None => !recomputed.is_finite(),
    }
}

fn replay_finding(m: &MetricData, kind: &FamilyKind, f: &FindingOut) -> Result<Option<String>> {
    let (Some(w), Some(index)) = (&f.witness, f.witness_index) else {
        return Ok(None);
    };
    let point = w.to_point();
    let id = &f.formula_id;
    let ground = match m.ground_values(&point) {
        Ok(g) => g,
        Err(e) => return Ok(Some(format!("{id}: witness no longer evaluates ({})", e.name()))),
    };
    if id == "example_validity_region" {
        if f.status != Status::Discrepant.name() {
            return Ok(None);
        }
        let violation = ((ground.alpha - ground.beta) / ground.alpha).max(0.0);
        return Ok((!same_diff(violation, f.max_rel_diff))
            .then(|| format!("{id}: violation {violation:e} at witness, report says {:?}", f.max_rel_diff)));
    }
    let ev = evaluate_point(m, kind, &SampledPoint { index, point, ground });
    let outcome = ev.outcomes.iter().find(|(k, _)| k == id).map(|(_, o)| o);
    Ok(match outcome {
        Some(Outcome::Compared(c)) if same_diff(c.literal_diff, f.max_rel_diff) => None,
        Some(Outcome::Compared(c)) => Some(format!(
            "{id}: {:e} at witness, report says {:?}",
            c.literal_diff, f.max_rel_diff
        )),
        _ => Some(format!("{id}: no comparison at witness")),
    })
}

// rendering

pub fn render(report: &Report, format: Format) -> Result<String> {
    match format {
        Format::Json => Ok(report.to_json() + "\n"),
        Format::Csv => render_csv(report),
        Format::Pretty => Ok(render_pretty(report)),
    }
}

fn o<T: std::fmt::Display>(x: Option<T>) -> String {
    x.map_or(String::new(), |v| v.to_string())
}

fn err_name(e: &Option<ErrorInfo>) -> String {
    e.as_ref().map_or(String::new(), |e| e.name.clone())
}

fn spec_strings(p: &PointSpec) -> (String, String) {
    let pt = p.to_point();
    (format_cvector(&pt.z), format_cvector(&pt.eta))
}

fn render_csv(report: &Report) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    match &report.body {
        Body::Sample(b) => {
            for r in &b.rows {
                w.serialize(r)?;
            }
            if b.rows.is_empty() {
                w.write_record(["index", "z", "eta", "alpha", "beta", "valid", "det_g_re", "det_g_im", "min_eigen_modulus", "status", "error"])?;
            }
        }
        Body::Eval(b) => {
            w.write_record(["index", "z", "eta", "error", "alpha", "alpha_sq", "beta", "valid", "L", "rho0", "rho1", "rho_m2", "rho_m1", "mu0"])?;
            for p in &b.points {
                let (z, eta) = spec_strings(&p.point);
                let j = p.jet.as_ref();
                let i = p.invariants.as_ref();
                w.write_record([
                    p.index.to_string(),
                    z,
                    eta,
                    err_name(&p.error),
                    o(p.alpha),
                    o(p.alpha_sq),
                    o(p.beta),
                    o(p.valid),
                    o(j.and_then(|j| j.l)),
                    o(i.and_then(|i| i.rho0)),
                    o(i.and_then(|i| i.rho1)),
                    o(i.and_then(|i| i.rho_m2)),
                    o(i.and_then(|i| i.rho_m1)),
                    o(i.and_then(|i| i.mu0)),
                ])?;
            }
        }
        Body::Verify(b) => {
            w.write_record(["index", "z", "eta", "error", "jet_euler", "reconstruction", "lowering", "euler", "oracle_ratio", "oracle_rel_diff", "oracle_error", "contraction", "homogeneity"])?;
            for p in &b.points {
                let (z, eta) = spec_strings(&p.point);
                w.write_record([
                    p.index.to_string(),
                    z,
                    eta,
                    err_name(&p.error),
                    o(p.jet_euler),
                    o(p.reconstruction),
                    o(p.lowering),
                    o(p.euler),
                    o(p.oracle_ratio),
                    o(p.oracle_rel_diff),
                    err_name(&p.oracle_error),
                    o(p.contraction.map(|x| x.into_iter().fold(0.0, f64::max))),
                    o(p.homogeneity),
                ])?;
            }
        }
        Body::Invert(b) => {
            w.write_record(["index", "z", "eta", "error", "det_lu_re", "det_lu_im", "pipeline_vs_lu", "proof_step_vs_lu", "theorem_text_vs_lu", "trailing_vs_lu", "identity_residual"])?;
            for p in &b.points {
                let (z, eta) = spec_strings(&p.point);
                w.write_record([
                    p.index.to_string(),
                    z,
                    eta,
                    err_name(&p.error),
                    o(p.det_lu.map(|d| d[0])),
                    o(p.det_lu.map(|d| d[1])),
                    o(p.pipeline_vs_lu),
                    o(p.proof_step_vs_lu),
                    o(p.theorem_text_vs_lu),
                    o(p.trailing_vs_lu),
                    o(p.identity_residual),
                ])?;
            }
        }
        Body::Audit(b) => {
            w.write_record(["formula_id", "status", "max_rel_diff", "derived_max_rel_diff", "sample_count", "exceed_count", "witness_index", "witness_z", "witness_eta"])?;
            for f in &b.findings {
                let (z, eta) = f.witness.as_ref().map(spec_strings).unwrap_or_default();
                w.write_record([
                    f.formula_id.clone(),
                    f.status.clone(),
                    o(f.max_rel_diff),
                    o(f.derived_max_rel_diff),
                    f.sample_count.to_string(),
                    f.exceed_count.to_string(),
                    o(f.witness_index),
                    z,
                    eta,
                ])?;
            }
        }
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn fmt_f(x: Option<f64>) -> String {
    x.map_or("-".into(), |v| format!("{v:.6e}"))
}

fn fmt_cx(z: &Cx) -> String {
    if z[1] == 0.0 {
        format!("{}", z[0])
    } else {
        format!("{}{:+}i", z[0], z[1])
    }
}

fn fmt_cmat(m: &[Vec<Cx>]) -> String {
    m.iter()
        .map(|row| row.iter().map(fmt_cx).collect::<Vec<_>>().join("  "))
        .collect::<Vec<_>>()
        .join("\n      ")
}

fn render_checks(s: &mut String, checks: &[CheckResult]) {
    for c in checks {
        let _ = writeln!(
            s,
            "  {:<20} max {:>13}  tol {:.1e}  n {:>5}  {}",
            c.name,
            fmt_f(c.max),
            c.tolerance,
            c.evaluated,
            if c.pass { "PASS" } else { "FAIL" }
        );
    }
}

fn render_pretty(report: &Report) -> String {
    let h = &report.header;
    let mut s = format!("{}  metric {}  family {}  seed {}\n", h.command, h.metric.name, h.family, h.seed);
    match &report.body {
        Body::Eval(b) => {
            for p in &b.points {
                let (z, eta) = spec_strings(&p.point);
                let _ = writeln!(s, "[{}] z = {z}  eta = {eta}", p.index);
                if let (Some(a), Some(bt)) = (p.alpha, p.beta) {
                    let _ = writeln!(s, "  alpha {a}  alpha^2 {}  beta {bt}  valid {}", o(p.alpha_sq), o(p.valid));
                }
                if let Some(e) = &p.error {
                    let _ = writeln!(s, "  error {}: {}", e.name, e.message);
                }
                if let Some(j) = &p.jet {
                    let _ = writeln!(
                        s,
                        "  L {}  L_a {}  L_b {}  L_aa {}  L_ab {}  L_bb {}",
                        o(j.l), o(j.l_alpha), o(j.l_beta), o(j.l_alpha_alpha), o(j.l_alpha_beta), o(j.l_beta_beta)
                    );
                }
                if let Some(i) = &p.invariants {
                    let _ = writeln!(
                        s,
                        "  rho0 {}  rho1 {}  rho_-2 {}  rho_-1 {}  mu0 {}",
                        o(i.rho0), o(i.rho1), o(i.rho_m2), o(i.rho_m1), o(i.mu0)
                    );
                }
                for sg in &p.sigma {
                    match &sg.error {
                        Some(e) => {
                            let _ = writeln!(s, "  sigma[{}] {}", sg.variant, e.name);
                        }
                        None => {
                            let _ = writeln!(s, "  sigma[{}] {} {} {}", sg.variant, o(sg.sigma1), o(sg.sigma2), o(sg.sigma3));
                        }
                    }
                }
                if let (Some(g), Some(gm), Some(el)) = (&p.g, &p.g_mixed, &p.eta_lower) {
                    let _ = writeln!(s, "  g     {}", fmt_cmat(g));
                    let _ = writeln!(s, "  g_mix {}", fmt_cmat(gm));
                    let _ = writeln!(s, "  eta_i {}", el.iter().map(fmt_cx).collect::<Vec<_>>().join("  "));
                }
            }
        }
        Body::Verify(b) => {
            let _ = writeln!(s, "  {} points, {} skipped", b.points.len(), b.skipped);
            render_checks(&mut s, &b.checks);
            let _ = writeln!(s, "{}", if b.pass { "PASS" } else { "FAIL" });
        }
        Body::Invert(b) => {
            let _ = writeln!(s, "  {} points, {} skipped", b.points.len(), b.skipped);
            render_checks(&mut s, &b.checks);
            for r in &b.reported {
                let _ = writeln!(s, "  {:<20} max {:>13}  (reported)", r.name, fmt_f(r.max));
            }
            let _ = writeln!(s, "{}", if b.pass { "PASS" } else { "FAIL" });
        }
        Body::Audit(b) => {
            let _ = writeln!(s, "  {} points from {} draws ({} requested)", b.points_used, b.attempts, b.samples_requested);
            if let Some(e) = &b.error {
                let _ = writeln!(s, "  error {}: {}", e.name, e.message);
            }
            for f in &b.findings {
                let _ = writeln!(
                    s,
                    "  {:<26} {:<13} max {:>13}  n {:>4}  >1e-3 {:>4}",
                    f.formula_id, f.status, fmt_f(f.max_rel_diff), f.sample_count, f.exceed_count
                );
            }
        }
        Body::Sample(b) => {
            let _ = writeln!(
                s,
                "  {} of {} points valid ({:.2}%)",
                b.valid_count,
                b.total,
                100.0 * b.valid_fraction
            );
        }
    }
    s
}
