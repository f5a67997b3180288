//! Standard normal helpers that stay accurate deep in the tails.

use libm::{erf, erfc};
use statrs::function::erf::erfc_inv;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;
/// ln(sqrt(2 pi))
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Below this point `log_cdf` switches to the asymptotic Mills-ratio series.
const ASYMPTOTIC_CUTOFF: f64 = -20.0;

pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

pub fn log_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail 1 - Φ(x).
pub fn sf(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

/// ln Φ(x), finite for every finite x.
pub fn log_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        return 0.0;
    }
    if x == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if x > 5.0 {
        return (-sf(x)).ln_1p();
    }
    if x > ASYMPTOTIC_CUTOFF {
        return cdf(x).ln();
    }
    // Φ(x) = φ(x)/|x| * (1 - 1/x² + 3/x⁴ - 15/x⁶ + ...)
    let x2 = x * x;
    let mut term = 1.0;
    let mut series = 1.0;
    for k in 1..12 {
        term *= -((2 * k - 1) as f64) / x2;
        series += term;
    }
    log_pdf(x) - (-x).ln() + series.ln()
}

/// ln(1 - Φ(x)).
pub fn log_sf(x: f64) -> f64 {
    log_cdf(-x)
}

/// Φ⁻¹(p) for p in (0, 1).
pub fn quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let q = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    // one Newton step against the accurate tail on the short side
    let resid = if p <= 0.5 { cdf(q) - p } else { (1.0 - p) - sf(q) };
    q - resid / pdf(q)
}

/// ln(1 - e^x) for x <= 0.
pub fn log1m_exp(x: f64) -> f64 {
    if x >= 0.0 {
        return f64::NEG_INFINITY;
    }
    if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// ln P(a <= Z <= b) for a standard normal Z, avoiding cancellation in
/// either tail and near the origin.
pub fn log_mass(a: f64, b: f64) -> f64 {
    if !(a < b) {
        return f64::NEG_INFINITY;
    }
    if a >= 0.0 {
        let la = log_sf(a);
        let lb = log_sf(b);
        la + log1m_exp(lb - la)
    } else if b <= 0.0 {
        let la = log_cdf(a);
        let lb = log_cdf(b);
        lb + log1m_exp(la - lb)
    } else {
        // straddles zero: (Φ(b) - 1/2) + (1/2 - Φ(a))
        let right = if b.is_infinite() { 0.5 } else { 0.5 * erf(b * FRAC_1_SQRT_2) };
        let left = if a.is_infinite() { 0.5 } else { 0.5 * erf(-a * FRAC_1_SQRT_2) };
        (right + left).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_cdf_is_continuous_across_branches() {
        for &x in &[ASYMPTOTIC_CUTOFF, 5.0] {
            let lo = log_cdf(x - 1e-9);
            let hi = log_cdf(x + 1e-9);
            assert!((lo - hi).abs() < 1e-8 * lo.abs().max(1e-6), "x={x}: {lo} vs {hi}");
        }
    }

    #[test]
    fn log_cdf_far_tail_matches_mills_ratio() {
        // For x = -40 the leading term dominates to ~1e-3 relative.
        let x = -40.0;
        let leading = log_pdf(x) - (-x).ln();
        assert!((log_cdf(x) - leading).abs() < 1e-3);
        assert!(log_cdf(-1e5).is_finite());
    }

    #[test]
    fn quantile_round_trips() {
        for &p in &[1e-10, 0.025, 0.5, 0.95, 1.0 - 1e-9] {
            assert!((cdf(quantile(p)) - p).abs() < 1e-12 * p.max(1e-3));
        }
        assert!((quantile(0.95) - 1.644_853_626_951_472_2).abs() < 1e-12);
    }

    #[test]
    fn log_mass_agrees_with_direct_difference_in_the_bulk() {
        let pairs = [(-1.0, 1.0), (0.5, 2.0), (-3.0, -0.1), (-0.2, 0.3)];
        for (a, b) in pairs {
            let direct = (cdf(b) - cdf(a)).ln();
            assert!((log_mass(a, b) - direct).abs() < 1e-12, "{a} {b}");
        }
        assert_eq!(log_mass(f64::NEG_INFINITY, f64::INFINITY), 0.0);
    }

    #[test]
    fn log_mass_far_tail_is_finite() {
        let lm = log_mass(30.0, 31.0);
        assert!(lm.is_finite());
        assert!((lm - log_sf(30.0)).abs() < 1e-10);
    }
}
