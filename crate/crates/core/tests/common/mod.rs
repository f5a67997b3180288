#![allow(dead_code)]
//! Independent oracles shared by the integration tests. Nothing here calls
//! into the geometry or truncated-Gaussian code under test.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use selinf::lasso::DesignMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_matrix(n: usize, p: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| rng.sample(StandardNormal))
}

pub fn normal_vector(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

pub fn design(n: usize, p: usize, rng: &mut ChaCha8Rng) -> DesignMatrix {
    DesignMatrix::new(normal_matrix(n, p, rng), None).unwrap()
}

/// Lasso by enumeration of all 3^p sign patterns (sum-scale objective).
/// Returns the coefficients of the subgradient-feasible pattern.
pub fn sign_pattern_lasso(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Option<Vec<f64>> {
    let p = x.ncols();
    assert!(p <= 10);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for code in 0..3usize.pow(p as u32) {
        let mut c = code;
        let mut m = Vec::new();
        let mut s = Vec::new();
        for j in 0..p {
            match c % 3 {
                1 => {
                    m.push(j);
                    s.push(1.0)
                }
                2 => {
                    m.push(j);
                    s.push(-1.0)
                }
                _ => {}
            }
            c /= 3;
        }
        let mut beta = vec![0.0; p];
        if !m.is_empty() {
            let xm = DMatrix::from_fn(x.nrows(), m.len(), |i, k| x[(i, m[k])]);
            let g = xm.tr_mul(&xm);
            let Some(chol) = g.cholesky() else { continue };
            let rhs = xm.tr_mul(y) - DVector::from_vec(s.clone()) * lambda;
            let b = chol.solve(&rhs);
            if (0..m.len()).any(|k| b[k] * s[k] <= 0.0) {
                continue;
            }
            for k in 0..m.len() {
                beta[m[k]] = b[k];
            }
        }
        let r = y - x * DVector::from_column_slice(&beta);
        let score = x.tr_mul(&r);
        let feasible = (0..p).all(|j| beta[j] != 0.0 || score[j].abs() <= lambda * (1.0 + 1e-12));
        if feasible {
            let obj = 0.5 * r.norm_squared() + lambda * beta.iter().map(|b| b.abs()).sum::<f64>();
            if best.as_ref().map_or(true, |(o, _)| obj < *o) {
                best = Some((obj, beta));
            }
        }
    }
    best.map(|b| b.1)
}

/// Extremes of z over {z : A(ν + cz) ≤ b} by scanning every constraint's
/// crossing point and keeping the feasible ones; unboundedness is probed
/// far beyond the last crossing.
pub fn vertex_scan(a: &DMatrix<f64>, b: &DVector<f64>, nu: &DVector<f64>, c: &DVector<f64>) -> Option<(f64, f64)> {
    let anu = a * nu;
    let ac = a * c;
    let feasible = |z: f64| (0..b.len()).all(|k| anu[k] + ac[k] * z <= b[k] + 1e-9 * (1.0 + b[k].abs()));
    let cands: Vec<f64> = (0..b.len())
        .filter(|&k| ac[k] != 0.0)
        .map(|k| (b[k] - anu[k]) / ac[k])
        .collect();
    let span = cands.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let far = 1e6 * span;
    let mut lo = if feasible(-far) { f64::NEG_INFINITY } else { f64::INFINITY };
    let mut hi = if feasible(far) { f64::INFINITY } else { f64::NEG_INFINITY };
    for &z in &cands {
        if feasible(z) {
            lo = lo.min(z);
            hi = hi.max(z);
        }
    }
    (lo <= hi).then_some((lo, hi))
}

/// Gauss–Legendre nodes and weights on [−1, 1] (Newton on P_n).
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (1..=n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let k = k as f64;
                    (p0, p1) = (p1, ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k);
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// Composite 20-point Gauss–Legendre on [a, b] with panels no wider than `h`.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, h: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    thread_local!(static RULE: Vec<(f64, f64)> = gauss_legendre(20));
    let panels = ((b - a) / h).ceil().max(1.0) as usize;
    let w = (b - a) / panels as f64;
    RULE.with(|rule| {
        (0..panels)
            .map(|k| {
                let mid = a + w * (k as f64 + 0.5);
                rule.iter().map(|&(x, wt)| wt * f(mid + 0.5 * w * x)).sum::<f64>() * 0.5 * w
            })
            .sum()
    })
}

/// CDF at x of N(mean, sd²) restricted to a union of intervals, by
/// quadrature of the density rescaled so that its peak on the support is 1.
pub fn quadrature_cdf(x: f64, mean: f64, sd: f64, support: &[(f64, f64)]) -> f64 {
    let nearest = support
        .iter()
        .map(|&(lo, hi)| if mean < lo { lo - mean } else if mean > hi { mean - hi } else { 0.0 })
        .fold(f64::INFINITY, f64::min)
        / sd;
    let dens = |z: f64| {
        let u = (z - mean) / sd;
        (-(u * u - nearest * nearest) / 2.0).exp()
    };
    let clip = |lo: f64, hi: f64| {
        let reach = (nearest + 40.0) * sd;
        (lo.max(mean - reach), hi.min(mean + reach))
    };
    let mut below = 0.0;
    let mut total = 0.0;
    for &(lo, hi) in support {
        let (a, b) = clip(lo, hi);
        let whole = integrate(&dens, a, b, 0.25 * sd);
        total += whole;
        below += if x >= b {
            whole
        } else if x > a {
            integrate(&dens, a, x, 0.25 * sd)
        } else {
            0.0
        };
    }
    below / total
}

/// Two-sided one-sample KS test against U(0,1); returns (D, p-value).
pub fn ks_uniform(sample: &[f64]) -> (f64, f64) {
    let mut v = sample.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &u) in v.iter().enumerate() {
        d = d.max((i as f64 + 1.0) / n - u).max(u - i as f64 / n);
    }
    let t = d * (n.sqrt() + 0.12 + 0.11 / n.sqrt());
    let mut p = 0.0;
    for k in 1..200 {
        let k = k as f64;
        p += 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * t * t).exp();
    }
    (d, p.clamp(0.0, 1.0))
}

/// Union of sorted intervals as (lo, hi) pairs.
pub fn pairs(set: &selinf::geometry::TruncationSet) -> Vec<(f64, f64)> {
    set.intervals().iter().map(|i| (i.lo, i.hi)).collect()
}

/// Largest endpoint discrepancy between two interval lists of equal length
/// (infinite endpoints must match exactly).
pub fn endpoint_gap(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let d = |u: f64, v: f64| if u == v { 0.0 } else { (u - v).abs() };
    a.iter().zip(b).map(|(x, y)| d(x.0, y.0).max(d(x.1, y.1))).fold(0.0, f64::max)
}
