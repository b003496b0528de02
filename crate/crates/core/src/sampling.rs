//! Deterministic point generation.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{c, CVector};
use crate::metric::{EvaluationPoint, GroundValues, MetricData};

pub const DEFAULT_SEED: u64 = 42;

/// Uniform box sampler: `Re z, Im z ∈ [−z_box, z_box]`,
/// `Re η, Im η ∈ [−eta_box, eta_box]`.
#[derive(Debug, Clone)]
pub struct Sampler {
    rng: ChaCha8Rng,
    pub z_box: f64,
    pub eta_box: f64,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Sampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            z_box: 0.5,
            eta_box: 2.0,
        }
    }

    pub fn with_boxes(seed: u64, z_box: f64, eta_box: f64) -> Self {
        Sampler {
            z_box,
            eta_box,
            ..Self::new(seed)
        }
    }

    fn cvec(&mut self, n: usize, half: f64) -> CVector {
        CVector(
            (0..n)
                .map(|_| c(self.rng.random_range(-half..=half), self.rng.random_range(-half..=half)))
                .collect(),
        )
    }

    pub fn point(&mut self, n: usize) -> EvaluationPoint {
        let z = self.cvec(n, self.z_box);
        let eta = self.cvec(n, self.eta_box);
        EvaluationPoint::new(z, eta)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.random_range(lo..hi)
    }
}

/// Homogeneous acceptance margins, all relative to `‖η‖`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Margins {
    /// `α > alpha·‖η‖`.
    pub alpha: f64,
    /// `β − α > gap·‖η‖`.
    pub gap: f64,
    /// `|β − 2α| > sigma·‖η‖` when set.
    pub sigma: Option<f64>,
}

impl Margins {
    /// Validity region only.
    pub const NONE: Margins = Margins {
        alpha: 0.0,
        gap: 0.0,
        sigma: None,
    };

    /// Keeps points far enough from `α = β` and `α = 0` for the Hessian
    /// oracle to resolve relative errors well below 1e-5.
    pub const ORACLE: Margins = Margins {
        alpha: 0.05,
        gap: 0.05,
        sigma: None,
    };

    pub const SIGMA: Margins = Margins {
        alpha: 0.05,
        gap: 0.05,
        sigma: Some(0.1),
    };

    pub fn accepts(&self, gv: &GroundValues) -> bool {
        let s = gv.eta.norm();
        gv.is_valid_region()
            && gv.alpha > self.alpha * s
            && gv.beta - gv.alpha > self.gap * s
            && self.sigma.is_none_or(|m| (gv.beta - 2.0 * gv.alpha).abs() > m * s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledPoint {
    /// Position in the raw sampler stream.
    pub index: usize,
    pub point: EvaluationPoint,
    pub ground: GroundValues,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub points: Vec<SampledPoint>,
    pub attempts: usize,
}

/// Draws raw points until `count` pass `accept` or `max_attempts` is hit.
pub fn sample_points(
    m: &MetricData,
    sampler: &mut Sampler,
    count: usize,
    max_attempts: usize,
    accept: impl Fn(&GroundValues) -> bool,
) -> SampleSet {
    let n = m.dim();
    let mut points = Vec::with_capacity(count);
    let mut attempts = 0;
    while points.len() < count && attempts < max_attempts {
        let index = attempts;
        attempts += 1;
        let p = sampler.point(n);
        if let Ok(gv) = m.ground_values(&p) {
            if accept(&gv) {
                points.push(SampledPoint { index, point: p, ground: gv });
            }
        }
    }
    SampleSet { points, attempts }
}

/// `k` evenly spaced values on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    match k {
        0 => Vec::new(),
        1 => alloc::vec![0.5 * (lo + hi)],
        _ => (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect(),
    }
}

/// The `kⁿ` grid `Re η^i ∈ linspace(−half, half, k)`, `Im η = 0`, at fixed `z`,
/// in row-major order (last coordinate fastest).
pub fn grid_points(z: &CVector, k: usize, half: f64) -> Vec<EvaluationPoint> {
    let n = z.len();
    let axis = linspace(-half, half, k);
    let total = k.pow(n as u32);
    (0..total)
        .map(|mut flat| {
            let mut eta = alloc::vec![c(0.0, 0.0); n];
            for slot in eta.iter_mut().rev() {
                *slot = c(axis[flat % k], 0.0);
                flat /= k;
            }
            EvaluationPoint::new(z.clone(), CVector(eta))
        })
        .collect()
}
