//! Synthetic designs, noise families and the replication harness.

mod study;

pub(crate) use study::fmt_num;
pub use study::{
    calibrate_delta, calibrate_lambda_cv, run_study, run_study_with_threads, Calibration, LengthBox, MethodSummary,
    StudyReport,
};

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, SkewNormal, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{Method, TargetKind};
use crate::lasso::{DesignMatrix, ResponseVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DesignScheme {
    Independent,
    /// Each block has one non-null column x₀; the others are ρx₀ + √(1−ρ²)ε.
    BlockEquicorr { rho: f64, blocks: usize },
    /// Rows ~ N(0, Σ) with Σ_ij = ρ^|i−j|.
    Toeplitz { rho: f64 },
}

impl DesignScheme {
    pub fn validate(&self, p: usize) -> Result<()> {
        match *self {
            Self::Independent => Ok(()),
            Self::BlockEquicorr { rho, blocks } => {
                if !(0.0..1.0).contains(&rho) {
                    return Err(Error::Input(format!("design.rho must lie in [0, 1), got {rho}")));
                }
                if blocks == 0 || p % blocks != 0 {
                    return Err(Error::Input(format!("design.blocks ({blocks}) must divide p ({p})")));
                }
                Ok(())
            }
            Self::Toeplitz { rho } => {
                if !(0.0..1.0).contains(&rho) {
                    return Err(Error::Input(format!("design.rho must lie in [0, 1), got {rho}")));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseKind {
    Normal,
    StudentT { dof: f64 },
    SkewNormal { shape: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseScheme {
    #[serde(flatten)]
    pub kind: NoiseKind,
    pub sigma: f64,
}

impl NoiseScheme {
    pub fn normal(sigma: f64) -> Self {
        Self {
            kind: NoiseKind::Normal,
            sigma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::Input(format!("noise.sigma must be >= 0, got {}", self.sigma)));
        }
        match self.kind {
            NoiseKind::StudentT { dof } if !(dof > 2.0) => {
                Err(Error::Input(format!("noise.dof must exceed 2 for finite variance, got {dof}")))
            }
            NoiseKind::SkewNormal { shape } if !shape.is_finite() => Err(Error::Input("noise.shape must be finite".into())),
            _ => Ok(()),
        }
    }

    /// Zero-mean, unit-variance draws scaled by σ.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<DVector<f64>> {
        self.validate()?;
        let unit: Vec<f64> = match self.kind {
            NoiseKind::Normal => (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
            NoiseKind::StudentT { dof } => {
                let d = StudentT::new(dof).map_err(|e| Error::Input(e.to_string()))?;
                let scale = (dof / (dof - 2.0)).sqrt();
                (0..n).map(|_| d.sample(rng) / scale).collect()
            }
            NoiseKind::SkewNormal { shape } => {
                let d = SkewNormal::new(0.0, 1.0, shape).map_err(|e| Error::Input(e.to_string()))?;
                let delta = shape / (1.0 + shape * shape).sqrt();
                let mean = delta * (2.0 / std::f64::consts::PI).sqrt();
                let sd = (1.0 - 2.0 * delta * delta / std::f64::consts::PI).sqrt();
                (0..n).map(|_| (d.sample(rng) - mean) / sd).collect()
            }
        };
        Ok(DVector::from_vec(unit) * self.sigma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalLevel {
    Null,
    Low,
    High,
    Explicit(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaRule {
    Universal,
    CvMedian,
    /// Per-observation scale.
    Explicit(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SigmaMode {
    /// Use the generating noise level.
    #[default]
    Known,
    Reid,
}

fn default_delta_reps() -> usize {
    1000
}
fn default_cv_reps() -> usize {
    100
}
fn default_failure_budget() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub n: usize,
    pub p: usize,
    pub k_signals: usize,
    pub signal_level: SignalLevel,
    pub design: DesignScheme,
    pub noise: NoiseScheme,
    pub lambda_rule: LambdaRule,
    pub methods: Vec<Method>,
    pub target_kind: TargetKind,
    pub alpha: f64,
    pub replications: usize,
    pub seed: u64,
    #[serde(default)]
    pub sigma_mode: SigmaMode,
    /// Per-observation λ_high for stable-ℓ1; defaults follow the λ rule.
    #[serde(default)]
    pub lambda_high: Option<f64>,
    /// Stable-t threshold; defaults to Φ⁻¹(1 − α/2p).
    #[serde(default)]
    pub cutoff: Option<f64>,
    #[serde(default = "default_delta_reps")]
    pub delta_reps: usize,
    #[serde(default = "default_cv_reps")]
    pub cv_reps: usize,
    #[serde(default = "default_failure_budget")]
    pub failure_budget: f64,
}

impl StudyConfig {
    /// Every violated constraint, so that a CLI can list them together.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.n < 2 {
            out.push(format!("n must be at least 2, got {}", self.n));
        }
        if self.p == 0 {
            out.push("p must be at least 1".into());
        }
        if self.k_signals > self.p {
            out.push(format!("k_signals ({}) exceeds p ({})", self.k_signals, self.p));
        }
        if let DesignScheme::BlockEquicorr { blocks, .. } = self.design {
            if self.k_signals > blocks && !matches!(self.signal_level, SignalLevel::Null) {
                out.push(format!("k_signals ({}) exceeds the number of blocks ({blocks})", self.k_signals));
            }
        }
        if let Err(e) = self.design.validate(self.p) {
            out.push(e.to_string());
        }
        if let Err(e) = self.noise.validate() {
            out.push(e.to_string());
        }
        if self.methods.is_empty() {
            out.push("methods must not be empty".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            out.push(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.replications == 0 {
            out.push("replications must be at least 1".into());
        }
        if let LambdaRule::Explicit(v) = self.lambda_rule {
            if !(v >= 0.0) {
                out.push(format!("explicit lambda must be >= 0, got {v}"));
            }
        }
        if let SignalLevel::Explicit(v) = self.signal_level {
            if !v.is_finite() {
                out.push("explicit signal level must be finite".into());
            }
        }
        if self.delta_reps < 100 {
            out.push(format!("delta_reps must be at least 100, got {}", self.delta_reps));
        }
        if self.cv_reps < 10 && matches!(self.lambda_rule, LambdaRule::CvMedian) {
            out.push(format!("cv_reps must be at least 10, got {}", self.cv_reps));
        }
        if !(0.0..=1.0).contains(&self.failure_budget) {
            out.push(format!("failure_budget must lie in [0, 1], got {}", self.failure_budget));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Input(problems.join("; ")))
        }
    }
}

/// Stream seed for replication `rep` of a study seeded with `seed`.
pub fn derive_seed(seed: u64, rep: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = seed ^ rep.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn normal_matrix<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> DMatrix<f64> {
    // column-major fill, one column at a time
    DMatrix::from_fn(n, p, |_, _| rng.sample(StandardNormal))
}

pub fn gen_design(n: usize, p: usize, scheme: &DesignScheme, seed: u64) -> Result<DesignMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gen_design_rng(n, p, scheme, &mut rng)
}

pub(crate) fn gen_design_rng<R: Rng + ?Sized>(n: usize, p: usize, scheme: &DesignScheme, rng: &mut R) -> Result<DesignMatrix> {
    scheme.validate(p)?;
    let values = match *scheme {
        DesignScheme::Independent => normal_matrix(n, p, rng),
        DesignScheme::BlockEquicorr { rho, blocks } => {
            let mut x = normal_matrix(n, p, rng);
            let width = p / blocks;
            let mix = (1.0 - rho * rho).sqrt();
            for b in 0..blocks {
                let lead = x.column(b * width).clone_owned();
                for j in b * width + 1..(b + 1) * width {
                    let mut col = x.column_mut(j);
                    col *= mix;
                    col.axpy(rho, &lead, 1.0);
                }
            }
            x
        }
        DesignScheme::Toeplitz { rho } => {
            let sigma = DMatrix::from_fn(p, p, |i, j| rho.powi((i as i32 - j as i32).abs()));
            let chol = sigma
                .cholesky()
                .ok_or_else(|| Error::Input(format!("Toeplitz covariance with rho = {rho} is not positive definite")))?;
            normal_matrix(n, p, rng) * chol.l().transpose()
        }
    };
    DesignMatrix::new(values, None)
}

/// Columns carrying signal: the leading columns for the independent design,
/// the lead column of each block, or a random subset for Toeplitz.
pub fn signal_positions<R: Rng + ?Sized>(p: usize, k: usize, scheme: &DesignScheme, rng: &mut R) -> Vec<usize> {
    match *scheme {
        DesignScheme::Independent => (0..k.min(p)).collect(),
        DesignScheme::BlockEquicorr { blocks, .. } => (0..k.min(blocks)).map(|b| b * (p / blocks)).collect(),
        DesignScheme::Toeplitz { .. } => {
            let mut v = sample(rng, p, k.min(p)).into_vec();
            v.sort_unstable();
            v
        }
    }
}

pub fn gen_response(x: &DesignMatrix, beta: &DVector<f64>, noise: &NoiseScheme, seed: u64) -> Result<ResponseVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gen_response_rng(x, beta, noise, &mut rng)
}

pub(crate) fn gen_response_rng<R: Rng + ?Sized>(
    x: &DesignMatrix,
    beta: &DVector<f64>,
    noise: &NoiseScheme,
    rng: &mut R,
) -> Result<ResponseVector> {
    if beta.len() != x.p() {
        return Err(Error::Dimension(format!("beta has length {}, design has {} columns", beta.len(), x.p())));
    }
    let eps = noise.sample(x.n(), rng)?;
    ResponseVector::new(x.matrix() * beta + eps)
}
