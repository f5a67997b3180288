//! End-to-end pipeline: fit, form targets, condition, invert.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cv::{cv_lambda, CvOptions};
use crate::error::{Error, Result};
use crate::geometry::{
    full_target_truncation_with, line_partition_with, model_sign_truncation, model_truncation, stable_l1_from_partitions,
    stable_t_truncation_with, variable_truncation, GeometryOptions, LineDecomposition, LinePartition, PathContext,
    TruncationSet,
};
use crate::geometry::truncation_set::extended;
use crate::lasso::{center_columns, DesignMatrix, LassoFit, LassoOptions, LassoSolver};
use crate::linalg;
use crate::normal;
use crate::tgauss::{self, Alternative, IntervalEstimate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetKind {
    Full,
    Partial,
    StableT,
    StableL1,
}

impl TargetKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::Partial => "partial",
            Self::StableT => "stable-t",
            Self::StableL1 => "stable-l1",
        }
    }
}

impl fmt::Display for TargetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TargetKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "full" => Ok(Self::Full),
            "partial" => Ok(Self::Partial),
            "stable-t" => Ok(Self::StableT),
            "stable-l1" => Ok(Self::StableL1),
            other => Err(Error::Input(format!("unknown target kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Naive,
    Bonferroni,
    TzV,
    TzM,
    TzMs,
    TzStabT,
    TzStabL1,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Self::Naive,
        Self::Bonferroni,
        Self::TzV,
        Self::TzM,
        Self::TzMs,
        Self::TzStabT,
        Self::TzStabL1,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Naive => "naive",
            Self::Bonferroni => "bonferroni",
            Self::TzV => "tz-v",
            Self::TzM => "tz-m",
            Self::TzMs => "tz-ms",
            Self::TzStabT => "tz-stab-t",
            Self::TzStabL1 => "tz-stab-l1",
        }
    }

    /// Methods that condition on a selection event.
    pub fn is_selective(&self) -> bool {
        !matches!(self, Self::Naive | Self::Bonferroni)
    }

    /// The stabilized methods only make sense for their own target.
    pub fn forced_target(&self) -> Option<TargetKind> {
        match self {
            Self::TzStabT => Some(TargetKind::StableT),
            Self::TzStabL1 => Some(TargetKind::StableL1),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        Self::ALL
            .iter()
            .copied()
            .find(|m| m.as_str() == key)
            .ok_or_else(|| Error::Input(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SigmaSpec {
    Known { value: f64 },
    OlsFull,
    Reid,
}

impl FromStr for SigmaSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if let Some(v) = s.strip_prefix("known:") {
            let value: f64 = v.parse().map_err(|_| Error::Input(format!("bad sigma value {v:?}")))?;
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::Input(format!("known sigma must be positive, got {value}")));
            }
            return Ok(Self::Known { value });
        }
        match s.as_str() {
            "ols" | "ols-full" | "ols_full" => Ok(Self::OlsFull),
            "reid" => Ok(Self::Reid),
            other => Err(Error::Input(format!("unknown sigma spec {other:?}"))),
        }
    }
}

/// Which linear functional ηᵀμ is being inferred.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub kind: TargetKind,
    pub variable: usize,
    /// Columns of the regression defining the coefficient.
    pub context: Vec<usize>,
    #[serde(skip)]
    pub eta: Vec<f64>,
}

impl TargetSpec {
    /// ηᵀμ for a mean vector μ.
    pub fn value(&self, mu: &DVector<f64>) -> f64 {
        self.eta.iter().zip(mu.iter()).map(|(a, b)| a * b).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceResult {
    pub variable: usize,
    pub name: String,
    pub method: Method,
    pub target: TargetSpec,
    /// Membership in the high-value set, for stabilized targets.
    pub high_value: Option<bool>,
    #[serde(with = "extended")]
    pub z_obs: f64,
    #[serde(with = "extended")]
    pub sigma_eta: f64,
    pub truncation: Option<TruncationSet>,
    #[serde(with = "extended")]
    pub point_estimate: f64,
    pub mle_unbounded: bool,
    pub interval: IntervalEstimate,
    #[serde(with = "extended")]
    pub p_value: f64,
    pub flags: Vec<String>,
    pub error: Option<String>,
}

impl InferenceResult {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub alpha: f64,
    /// t-statistic threshold for the stable-t screen; Φ⁻¹(1 − α/2p) if absent.
    pub cutoff: Option<f64>,
    /// Sum-scale penalty of the stable-ℓ1 screen.
    pub lambda_high: Option<f64>,
    pub include_intercept: bool,
    /// Seeds the cross-validation folds of the Reid estimator.
    pub seed: u64,
    pub alternative: Alternative,
    /// Hypothesized target value for the p-values.
    pub null_value: f64,
    pub geometry: GeometryOptions,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            cutoff: None,
            lambda_high: None,
            include_intercept: false,
            seed: 0,
            alternative: Alternative::TwoSided,
            null_value: 0.0,
            geometry: GeometryOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub fit: LassoFit,
    /// Sum-scale penalty.
    pub lambda: f64,
    pub sigma: f64,
    pub cutoff: Option<f64>,
    pub lambda_high: Option<f64>,
    /// Ĥ from the t screen, when a stable-t target was requested.
    pub high_value_t: Option<Vec<usize>>,
    /// Ĥ from the λ_high lasso, when a stable-ℓ1 target was requested.
    pub high_value_l1: Option<Vec<usize>>,
    pub results: Vec<InferenceResult>,
}

/// Universal threshold √(2 log p / n) on the per-observation scale.
pub fn universal_lambda(n: usize, p: usize) -> f64 {
    (2.0 * (p as f64).ln() / n as f64).sqrt()
}

/// Φ⁻¹(1 − α/2p).
pub fn bonferroni_cutoff(alpha: f64, p: usize) -> f64 {
    normal::quantile(1.0 - alpha / (2.0 * p as f64))
}

/// λ_high default: the universal threshold when λ sits below it (e.g. from
/// CV), otherwise 1.25·λ. Sum scale.
pub fn default_lambda_high(lambda: f64, n: usize, p: usize) -> f64 {
    let univ = n as f64 * universal_lambda(n, p);
    if univ > lambda * (1.0 + 1e-9) {
        univ
    } else {
        1.25 * lambda
    }
}

/// H = {j ∈ M : |t_j| > cutoff} with t_j the OLS t-statistic on X_M.
pub fn select_high_value_t(x: &DesignMatrix, y: &DVector<f64>, model: &[usize], sigma: f64, cutoff: f64) -> Result<Vec<usize>> {
    if model.len() >= x.n() {
        return Err(Error::RankDeficient(format!("{} active variables with n = {}", model.len(), x.n())));
    }
    let mut m = model.to_vec();
    m.sort_unstable();
    let t = crate::geometry::active_t_statistics(x, y, &m, sigma)?;
    Ok(m.into_iter().zip(t).filter(|(_, t)| t.abs() > cutoff).map(|(j, _)| j).collect())
}

/// σ̂² = RSS(λ̂)/(n − |M̂_λ̂|) with λ̂ from 10-fold cross-validation.
pub fn estimate_sigma_reid(x: &DesignMatrix, y: &DVector<f64>, seed: u64) -> Result<f64> {
    reid_with_offset(x.matrix(), y, seed, 0)
}

fn reid_with_offset(x: &DMatrix<f64>, y: &DVector<f64>, seed: u64, extra_df: usize) -> Result<f64> {
    let n = x.nrows();
    let cv = cv_lambda(x, y, &CvOptions { seed, ..CvOptions::default() })?;
    let opts = LassoOptions::with_penalty(cv.lambda * n as f64);
    let fit = LassoSolver::new(x).solve(y, &opts, None)?;
    let df = fit.active_set.len() + extra_df;
    if df >= n {
        return Err(Error::RankDeficient(format!("cross-validated model has {df} parameters with n = {n}")));
    }
    let beta = DVector::from_column_slice(&fit.coefficients);
    let rss = (y - x * beta).norm_squared();
    Ok((rss / (n - df) as f64).sqrt())
}

fn sigma_ols_full(x: &DMatrix<f64>, y: &DVector<f64>, extra_df: usize) -> Result<f64> {
    let (n, p) = x.shape();
    if n <= p + extra_df {
        return Err(Error::RankDeficient(format!("OLS variance needs n > p (n = {n}, p = {p})")));
    }
    let chol = x
        .tr_mul(x)
        .cholesky()
        .ok_or_else(|| Error::RankDeficient("XᵀX is singular".into()))?;
    let beta = chol.solve(&x.tr_mul(y));
    let rss = (y - x * beta).norm_squared();
    Ok((rss / (n - p - extra_df) as f64).sqrt())
}

pub fn naive_interval(z_obs: f64, sigma_eta: f64, alpha: f64) -> IntervalEstimate {
    let q = normal::quantile(1.0 - alpha / 2.0);
    IntervalEstimate::finite(z_obs - q * sigma_eta, z_obs + q * sigma_eta, 1.0 - alpha)
}

pub fn bonferroni_interval(z_obs: f64, sigma_eta: f64, alpha: f64, p: usize) -> IntervalEstimate {
    let q = bonferroni_cutoff(alpha, p);
    IntervalEstimate::finite(z_obs - q * sigma_eta, z_obs + q * sigma_eta, 1.0 - alpha)
}

fn naive_pvalue(z: f64, null: f64, sigma_eta: f64, alt: Alternative) -> f64 {
    let t = (z - null) / sigma_eta;
    match alt {
        Alternative::Greater => normal::sf(t),
        Alternative::Less => normal::cdf(t),
        Alternative::TwoSided => (2.0 * normal::sf(t.abs())).min(1.0),
    }
}

/// Run the whole pipeline. `lambda` is on the sum scale; `target_kind`
/// applies to every method except the stabilized ones, which always use
/// their own target.
pub fn analyze(
    x: &DesignMatrix,
    y: &DVector<f64>,
    lambda: f64,
    methods: &[Method],
    target_kind: TargetKind,
    sigma: SigmaSpec,
    opts: &AnalysisOptions,
) -> Result<Analysis> {
    let (n, p) = (x.n(), x.p());
    if y.len() != n {
        return Err(Error::Dimension(format!("design has {n} rows, response has {}", y.len())));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("response has non-finite entries".into()));
    }
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(Error::Input(format!("alpha must lie in (0, 1), got {}", opts.alpha)));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Input(format!("penalty must be >= 0, got {lambda}")));
    }

    // intercept: work on centered data throughout
    let (xw, yw, icpt) = if opts.include_intercept {
        let (xc, _) = center_columns(x.matrix());
        let names = x.column_names().map(|c| c.to_vec());
        let ybar = y.mean();
        (DesignMatrix::new(xc, names)?, y.add_scalar(-ybar), 1)
    } else {
        (x.clone(), y.clone(), 0)
    };

    let mut lasso = opts.geometry.lasso;
    lasso.penalty = lambda;
    lasso.include_intercept = false;
    let mut fit = LassoSolver::new(xw.matrix()).solve(&yw, &lasso, None)?;
    if opts.include_intercept {
        let means: Vec<f64> = x.matrix().column_iter().map(|c| c.mean()).collect();
        let shift: f64 = means.iter().zip(&fit.coefficients).map(|(m, b)| m * b).sum();
        fit.intercept = Some(y.mean() - shift);
    }

    let sigma = match sigma {
        SigmaSpec::Known { value } => {
            if !(value > 0.0) {
                return Err(Error::Input(format!("known sigma must be positive, got {value}")));
            }
            value
        }
        SigmaSpec::OlsFull => sigma_ols_full(xw.matrix(), &yw, icpt)?,
        SigmaSpec::Reid => reid_with_offset(xw.matrix(), &yw, opts.seed, icpt)?,
    };

    let needs_t = methods.iter().any(|m| m.forced_target().unwrap_or(target_kind) == TargetKind::StableT);
    let needs_l1 = methods.iter().any(|m| m.forced_target().unwrap_or(target_kind) == TargetKind::StableL1);
    let cutoff = needs_t.then(|| opts.cutoff.unwrap_or_else(|| bonferroni_cutoff(opts.alpha, p)));
    let lambda_high = needs_l1.then(|| opts.lambda_high.unwrap_or_else(|| default_lambda_high(lambda, n, p)));

    let mut analysis = Analysis {
        fit,
        lambda,
        sigma,
        cutoff,
        lambda_high,
        high_value_t: None,
        high_value_l1: None,
        results: Vec::new(),
    };
    if analysis.fit.active_set.is_empty() {
        return Ok(analysis);
    }
    if let Some(c) = cutoff {
        analysis.high_value_t = Some(select_high_value_t(&xw, &yw, &analysis.fit.active_set, sigma, c)?);
    }
    if let Some(lh) = lambda_high {
        if !(lh > lambda) {
            return Err(Error::Input(format!("lambda_high ({lh}) must exceed lambda ({lambda})")));
        }
        let mut o = lasso;
        o.penalty = lh;
        analysis.high_value_l1 = Some(LassoSolver::new(xw.matrix()).solve(&yw, &o, None)?.active_set);
    }

    let mut engine = Engine {
        x: &xw,
        y: &yw,
        ctx: PathContext::new(&xw),
        analysis: &analysis,
        opts,
        partitions: HashMap::new(),
    };
    let mut results = Vec::new();
    for &j in &analysis.fit.active_set {
        for &method in methods {
            let kind = method.forced_target().unwrap_or(target_kind);
            results.push(engine.infer(j, method, kind, x));
        }
    }
    analysis.results = results;
    Ok(analysis)
}

struct Engine<'e> {
    x: &'e DesignMatrix,
    y: &'e DVector<f64>,
    ctx: PathContext<'e>,
    analysis: &'e Analysis,
    opts: &'e AnalysisOptions,
    partitions: HashMap<(TargetKind, usize, u64), std::result::Result<LinePartition, Error>>,
}

impl Engine<'_> {
    fn high_set(&self, kind: TargetKind) -> Option<&Vec<usize>> {
        match kind {
            TargetKind::StableT => self.analysis.high_value_t.as_ref(),
            TargetKind::StableL1 => self.analysis.high_value_l1.as_ref(),
            _ => None,
        }
    }

    fn target(&self, kind: TargetKind, j: usize) -> Result<TargetSpec> {
        let context: Vec<usize> = match kind {
            TargetKind::Full => (0..self.x.p()).collect(),
            TargetKind::Partial => self.analysis.fit.active_set.clone(),
            TargetKind::StableT | TargetKind::StableL1 => {
                let h = self
                    .high_set(kind)
                    .ok_or_else(|| Error::Input(format!("{kind} target needs its screen")))?;
                let mut c = h.clone();
                if !c.contains(&j) {
                    c.push(j);
                    c.sort_unstable();
                }
                c
            }
        };
        let k = context
            .binary_search(&j)
            .map_err(|_| Error::Input(format!("variable {j} not in its own target context")))?;
        let eta = linalg::ols_contrast(self.x.matrix(), &context, k)?;
        Ok(TargetSpec {
            kind,
            variable: j,
            context,
            eta: eta.iter().copied().collect(),
        })
    }

    fn partition(&mut self, kind: TargetKind, j: usize, line: &LineDecomposition, penalty: f64) -> Result<&LinePartition> {
        let key = (kind, j, penalty.to_bits());
        if !self.partitions.contains_key(&key) {
            let half = self.opts.geometry.range_sd * self.analysis.sigma * line.eta_norm();
            let range = (line.z_obs - half, line.z_obs + half);
            let part = line_partition_with(&self.ctx, line, penalty, range, &self.opts.geometry);
            self.partitions.insert(key, part);
        }
        self.partitions[&key].as_ref().map_err(|e| e.clone())
    }

    fn truncation(&mut self, method: Method, target: &TargetSpec, line: &LineDecomposition) -> Result<TruncationSet> {
        let j = target.variable;
        let kind = target.kind;
        let lambda = self.analysis.lambda;
        let fit = self.analysis.fit.clone();
        match method {
            Method::Naive | Method::Bonferroni => Ok(TruncationSet::real_line()),
            Method::TzV if kind == TargetKind::Full => {
                let mut lasso = self.opts.geometry.lasso;
                lasso.include_intercept = false;
                let yv = crate::lasso::ResponseVector::new(self.y.clone())?;
                let (a, b) = full_target_truncation_with(self.x, &yv, j, lambda, &lasso)?;
                Ok(TruncationSet::two_rays(a, b))
            }
            Method::TzV => variable_truncation(self.partition(kind, j, line, lambda)?, j),
            Method::TzM => model_truncation(self.partition(kind, j, line, lambda)?, &fit.active_set),
            Method::TzMs => model_sign_truncation(self.partition(kind, j, line, lambda)?, &fit.active_set, &fit.signs),
            Method::TzStabT => {
                let h = self.analysis.high_value_t.clone().unwrap_or_default();
                let cutoff = self.analysis.cutoff.unwrap_or(f64::INFINITY);
                let sigma = self.analysis.sigma;
                let ray_tol = self.opts.geometry.ray_tol;
                let part = self.partition(kind, j, line, lambda)?.clone();
                stable_t_truncation_with(&self.ctx, &part, line, j, &h, cutoff, sigma, ray_tol)
            }
            Method::TzStabL1 => {
                let h = self.analysis.high_value_l1.clone().unwrap_or_default();
                let lh = self.analysis.lambda_high.unwrap_or(f64::INFINITY);
                let low = self.partition(kind, j, line, lambda)?.clone();
                let high = self.partition(kind, j, line, lh)?;
                stable_l1_from_partitions(&low, high, j, &h)
            }
        }
    }

    fn infer(&mut self, j: usize, method: Method, kind: TargetKind, original: &DesignMatrix) -> InferenceResult {
        let name = original.column_name(j);
        let high_value = self.high_set(kind).map(|h| h.contains(&j));
        let mut res = InferenceResult {
            variable: j,
            name,
            method,
            target: TargetSpec {
                kind,
                variable: j,
                context: Vec::new(),
                eta: Vec::new(),
            },
            high_value,
            z_obs: f64::NAN,
            sigma_eta: f64::NAN,
            truncation: None,
            point_estimate: f64::NAN,
            mle_unbounded: false,
            interval: IntervalEstimate {
                lower: f64::NAN,
                upper: f64::NAN,
                level: 1.0 - self.opts.alpha,
                lower_infinite: false,
                upper_infinite: false,
            },
            p_value: f64::NAN,
            flags: Vec::new(),
            error: None,
        };
        if self.analysis.fit.degenerate {
            res.flags.push("fit_degenerate".into());
        }
        if let Err(e) = self.fill(&mut res, method) {
            res.flags.push("failed".into());
            res.error = Some(e.to_string());
        }
        res
    }

    fn fill(&mut self, res: &mut InferenceResult, method: Method) -> Result<()> {
        let alpha = self.opts.alpha;
        let target = self.target(res.target.kind, res.variable)?;
        let line = LineDecomposition::new(DVector::from_vec(target.eta.clone()), self.y)?;
        let sigma_eta = self.analysis.sigma * line.eta_norm();
        res.target = target.clone();
        res.z_obs = line.z_obs;
        res.sigma_eta = sigma_eta;
        let null = self.opts.null_value;
        match method {
            Method::Naive | Method::Bonferroni => {
                let iv = if method == Method::Naive {
                    naive_interval(line.z_obs, sigma_eta, alpha)
                } else {
                    bonferroni_interval(line.z_obs, sigma_eta, alpha, self.x.p())
                };
                let pv = naive_pvalue(line.z_obs, null, sigma_eta, self.opts.alternative);
                res.interval = iv;
                res.point_estimate = line.z_obs;
                res.p_value = if method == Method::Naive { pv } else { (pv * self.x.p() as f64).min(1.0) };
                Ok(())
            }
            _ => {
                let set = self.truncation(method, &target, &line)?;
                let variance = sigma_eta * sigma_eta;
                let (z, clamped) = tgauss::clamp_to_support(line.z_obs, &set, sigma_eta)?;
                if clamped {
                    res.flags.push("z_clamped_to_support".into());
                }
                let mle = tgauss::tg_mle(z, variance, &set)?;
                let iv = tgauss::tg_interval(z, variance, &set, alpha)?;
                let pv = tgauss::tg_pvalue(z, null, variance, &set, self.opts.alternative)?;
                if mle.unbounded {
                    res.flags.push("mle_unbounded".into());
                }
                if iv.lower_infinite {
                    res.flags.push("lower_infinite".into());
                }
                if iv.upper_infinite {
                    res.flags.push("upper_infinite".into());
                }
                res.truncation = Some(set);
                res.point_estimate = mle.value;
                res.mle_unbounded = mle.unbounded;
                res.interval = iv;
                res.p_value = pv;
                Ok(())
            }
        }
    }
}
