//! Gaussian law restricted to a union of intervals: CDF, pivot, p-values,
//! interval inversion and MLE. Everything is done with standardized
//! log-masses so that supports far in a tail keep their precision.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::truncation_set::{extended, TruncationSet};
use crate::normal;

/// Bracket half-width, in standard deviations, for the inversions.
pub const BRACKET_SD: f64 = 30.0;
/// z may sit this far (in standard deviations) outside its support before
/// it counts as a conditioning violation.
pub const BOUNDARY_TOL_SD: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedGaussian {
    pub mean: f64,
    pub variance: f64,
    pub support: TruncationSet,
}

impl TruncatedGaussian {
    pub fn new(mean: f64, variance: f64, support: TruncationSet) -> Result<Self> {
        if !(variance > 0.0) || !variance.is_finite() {
            return Err(Error::Input(format!("variance must be positive, got {variance}")));
        }
        if !mean.is_finite() {
            return Err(Error::Input(format!("mean must be finite, got {mean}")));
        }
        if support.is_empty() {
            return Err(Error::DegenerateSupport("empty support".into()));
        }
        let d = Self { mean, variance, support };
        if d.log_total() == f64::NEG_INFINITY {
            return Err(Error::DegenerateSupport(format!("support carries no mass under mean {mean}")));
        }
        Ok(d)
    }

    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }

    fn standardize(&self, v: f64) -> f64 {
        (v - self.mean) / self.sd()
    }

    fn log_total(&self) -> f64 {
        let logs: Vec<f64> = self
            .support
            .intervals()
            .iter()
            .map(|iv| normal::log_mass(self.standardize(iv.lo), self.standardize(iv.hi)))
            .collect();
        normal::log_sum_exp(&logs)
    }

    /// (log mass below x, log mass above x) within the support.
    fn log_split(&self, x: f64) -> (f64, f64) {
        let t = self.standardize(x);
        let mut below = Vec::new();
        let mut above = Vec::new();
        for iv in self.support.intervals() {
            let (a, b) = (self.standardize(iv.lo), self.standardize(iv.hi));
            if b <= t {
                below.push(normal::log_mass(a, b));
            } else if a >= t {
                above.push(normal::log_mass(a, b));
            } else {
                below.push(normal::log_mass(a, t));
                above.push(normal::log_mass(t, b));
            }
        }
        (normal::log_sum_exp(&below), normal::log_sum_exp(&above))
    }

    /// (F(x), 1 − F(x)), each computed directly so that neither loses
    /// precision when the other is close to 1.
    pub fn cdf_sf(&self, x: f64) -> Result<(f64, f64)> {
        let (lb, la) = self.log_split(x);
        let total = normal::log_sum_exp(&[lb, la]);
        if total == f64::NEG_INFINITY {
            return Err(Error::DegenerateSupport(format!(
                "support mass underflows under mean {}",
                self.mean
            )));
        }
        Ok(((lb - total).exp(), (la - total).exp()))
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        self.cdf_sf(x).map(|(f, _)| f)
    }

    /// E[Z] under the truncated law.
    pub fn expectation(&self) -> Result<f64> {
        let lt = self.log_total();
        if lt == f64::NEG_INFINITY {
            return Err(Error::DegenerateSupport("support mass underflows".into()));
        }
        let mut shift = 0.0;
        for iv in self.support.intervals() {
            let (a, b) = (self.standardize(iv.lo), self.standardize(iv.hi));
            let pa = if a.is_finite() { (normal::log_pdf(a) - lt).exp() } else { 0.0 };
            let pb = if b.is_finite() { (normal::log_pdf(b) - lt).exp() } else { 0.0 };
            shift += pa - pb;
        }
        Ok(self.mean + self.sd() * shift)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalEstimate {
    #[serde(with = "extended")]
    pub lower: f64,
    #[serde(with = "extended")]
    pub upper: f64,
    pub level: f64,
    pub lower_infinite: bool,
    pub upper_infinite: bool,
}

impl IntervalEstimate {
    pub fn finite(lower: f64, upper: f64, level: f64) -> Self {
        Self {
            lower,
            upper,
            level,
            lower_infinite: false,
            upper_infinite: false,
        }
    }

    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn is_infinite(&self) -> bool {
        self.lower_infinite || self.upper_infinite
    }

    pub fn covers(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    TwoSided,
    Greater,
    Less,
}

/// Place z inside the support: unchanged when inside, moved to the nearest
/// support point (flagged) when within tolerance, an error otherwise.
pub fn clamp_to_support(z: f64, support: &TruncationSet, sd: f64) -> Result<(f64, bool)> {
    let distance = support.distance(z);
    if distance == 0.0 {
        return Ok((z, false));
    }
    if distance <= BOUNDARY_TOL_SD * sd {
        return Ok((support.nearest(z).unwrap_or(z), true));
    }
    Err(Error::ConditioningViolation { z, distance })
}

pub fn tg_cdf(x: f64, d: &TruncatedGaussian) -> Result<f64> {
    d.cdf(x)
}

/// F_μ(z_obs) for the law with mean `mean` truncated to `support`.
pub fn tg_pivot(z_obs: f64, mean: f64, variance: f64, support: &TruncationSet) -> Result<f64> {
    let sd = variance.sqrt();
    let (z, _) = clamp_to_support(z_obs, support, sd)?;
    TruncatedGaussian::new(mean, variance, support.clone())?.cdf(z)
}

pub fn tg_pvalue(
    z_obs: f64,
    mean0: f64,
    variance: f64,
    support: &TruncationSet,
    alternative: Alternative,
) -> Result<f64> {
    let (z, _) = clamp_to_support(z_obs, support, variance.sqrt())?;
    let (f, s) = TruncatedGaussian::new(mean0, variance, support.clone())?.cdf_sf(z)?;
    Ok(match alternative {
        Alternative::Greater => s,
        Alternative::Less => f,
        Alternative::TwoSided => (2.0 * f.min(s)).clamp(0.0, 1.0),
    })
}

/// (cdf, sf) at z as a function of the mean; a support without mass is
/// reported as a point mass at its nearest end.
fn pivot_pair(z: f64, mean: f64, variance: f64, support: &TruncationSet) -> (f64, f64) {
    match TruncatedGaussian::new(mean, variance, support.clone()).and_then(|d| d.cdf_sf(z)) {
        Ok(v) => v,
        // all mass lies on the side of the support far from `mean`
        Err(_) => {
            if mean < support.inf() {
                (0.0, 1.0)
            } else {
                (1.0, 0.0)
            }
        }
    }
}

/// Confidence interval for the mean at level 1 − α by inverting the pivot.
/// A side whose target pivot value is not reached inside the ±30 sd
/// bracket is reported as ±∞ with its flag set.
pub fn tg_interval(z_obs: f64, variance: f64, support: &TruncationSet, alpha: f64) -> Result<IntervalEstimate> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Input(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let sd = variance.sqrt();
    let (z, _) = clamp_to_support(z_obs, support, sd)?;
    let lo = z - BRACKET_SD * sd;
    let hi = z + BRACKET_SD * sd;
    let tol = 1e-6 * sd;
    let half = alpha / 2.0;

    // F_μ(z) decreases in μ. Lower bound: F = 1 − α/2 (i.e. sf = α/2);
    // upper bound: F = α/2.
    let above_lower = |mu: f64| pivot_pair(z, mu, variance, support).1 > half; // sf too large → μ too large
    let below_upper = |mu: f64| pivot_pair(z, mu, variance, support).0 > half; // cdf too large → μ too small

    let lower = if above_lower(lo) {
        None
    } else if !above_lower(hi) {
        Some(hi)
    } else {
        Some(bisect(lo, hi, tol, |mu| !above_lower(mu)))
    };
    let upper = if below_upper(hi) {
        None
    } else if !below_upper(lo) {
        Some(lo)
    } else {
        Some(bisect(lo, hi, tol, below_upper))
    };
    Ok(IntervalEstimate {
        lower: lower.unwrap_or(f64::NEG_INFINITY),
        upper: upper.unwrap_or(f64::INFINITY),
        level: 1.0 - alpha,
        lower_infinite: lower.is_none(),
        upper_infinite: upper.is_none(),
    })
}

/// Boundary of a predicate that is true on [lo, t) and false on [t, hi].
fn bisect<F: Fn(f64) -> bool>(mut lo: f64, mut hi: f64, tol: f64, left: F) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if left(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleEstimate {
    pub value: f64,
    /// The likelihood kept increasing up to the edge of the search bracket.
    pub unbounded: bool,
}

/// Maximum-likelihood mean. The truncated family is a one-parameter
/// exponential family, so the score z − E_μ[Z] is decreasing in μ and its
/// root is found by bisection.
pub fn tg_mle(z_obs: f64, variance: f64, support: &TruncationSet) -> Result<MleEstimate> {
    let sd = variance.sqrt();
    let (z, _) = clamp_to_support(z_obs, support, sd)?;
    let lo = z - BRACKET_SD * sd;
    let hi = z + BRACKET_SD * sd;
    let score = |mu: f64| -> f64 {
        match TruncatedGaussian::new(mu, variance, support.clone()).and_then(|d| d.expectation()) {
            Ok(e) => z - e,
            Err(_) => {
                if mu < support.inf() {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    };
    if score(lo) <= 0.0 {
        return Ok(MleEstimate { value: lo, unbounded: true });
    }
    if score(hi) >= 0.0 {
        return Ok(MleEstimate { value: hi, unbounded: true });
    }
    let value = bisect(lo, hi, 1e-10 * sd.max(f64::MIN_POSITIVE), |mu| score(mu) > 0.0);
    Ok(MleEstimate { value, unbounded: false })
}
