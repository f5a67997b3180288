//! Truncation sets for the stabilized targets: the t-statistic screen and
//! the higher-penalty lasso screen.

use std::collections::HashMap;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::geometry::partition::{line_partition_with, variable_truncation, GeometryOptions, LinePartition, PathContext};
use crate::geometry::polyhedron::LineDecomposition;
use crate::geometry::truncation_set::{Interval, TruncationSet};
use crate::lasso::DesignMatrix;
use crate::linalg;

fn sorted(h: &[usize]) -> Vec<usize> {
    let mut v = h.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

/// {z : j ∈ M̂(z), Ĥ(z) = H} where Ĥ keeps the active variables whose OLS
/// t-statistic on the active set exceeds `cutoff` in magnitude.
pub fn stable_t_truncation(
    part: &LinePartition,
    x: &DesignMatrix,
    line: &LineDecomposition,
    j: usize,
    h: &[usize],
    cutoff: f64,
    sigma: f64,
) -> Result<TruncationSet> {
    let ctx = PathContext::new(x);
    stable_t_truncation_with(&ctx, part, line, j, h, cutoff, sigma, 1e-12)
}

#[allow(clippy::too_many_arguments)]
pub fn stable_t_truncation_with(
    ctx: &PathContext<'_>,
    part: &LinePartition,
    line: &LineDecomposition,
    j: usize,
    h: &[usize],
    cutoff: f64,
    sigma: f64,
    ray_tol: f64,
) -> Result<TruncationSet> {
    if !(cutoff > 0.0) || !(sigma > 0.0) {
        return Err(Error::Input(format!("cutoff ({cutoff}) and sigma ({sigma}) must be positive")));
    }
    let h = sorted(h);
    let x = ctx.x.matrix();
    let xt_nu = x.tr_mul(&line.nu);
    let xt_c = x.tr_mul(&line.c);
    let c_norm = line.c.norm();
    let thresh = cutoff * sigma;
    let mut cache: HashMap<Vec<usize>, Vec<(f64, f64, f64)>> = HashMap::new();
    let mut pieces: Vec<Interval> = Vec::new();

    for (i, seg) in part.segments.iter().enumerate() {
        if !seg.contains_variable(j) || !h.iter().all(|k| seg.contains_variable(*k)) {
            continue;
        }
        // per-coordinate (νᵀx̃_k, cᵀx̃_k, ‖c‖ scale) for this active set
        let coords = match cache.get(&seg.active) {
            Some(v) => v,
            None => {
                let m = &seg.active;
                let ginv = linalg::spd_inverse(&linalg::select_submatrix(&ctx.gram, m, m))?;
                let a = &ginv * linalg::select_entries(&xt_nu, m);
                let g = &ginv * linalg::select_entries(&xt_c, m);
                let v: Vec<(f64, f64, f64)> = (0..m.len())
                    .map(|k| {
                        let sd = ginv[(k, k)].sqrt();
                        (a[k] / sd, g[k] / sd, c_norm)
                    })
                    .collect();
                cache.entry(m.clone()).or_insert(v)
            }
        };
        let mut set = TruncationSet::new([part.extended_interval(i)], 0.0);
        for (k, &var) in seg.active.iter().enumerate() {
            let (alpha, beta, scale) = coords[k];
            let high = h.binary_search(&var).is_ok();
            // |α + zβ| ≤ ξσ  ⟺  z ∈ [c_k, d_k]
            let inner = if beta.abs() <= ray_tol * scale {
                if alpha.abs() <= thresh {
                    TruncationSet::real_line()
                } else {
                    TruncationSet::empty()
                }
            } else {
                let sgn = beta.signum();
                let ck = (-sgn * alpha - thresh) / beta.abs();
                let dk = (-sgn * alpha + thresh) / beta.abs();
                TruncationSet::single(ck, dk)
            };
            let constraint = if high { complement(&inner) } else { inner };
            set = set.intersect(&constraint);
            if set.is_empty() {
                break;
            }
        }
        pieces.extend_from_slice(set.intervals());
    }
    let out = TruncationSet::new(pieces, part.merge_tol);
    if out.is_empty() {
        return Err(Error::EmptyEvent(format!("(j = {j}, H = {h:?}) never occurs on the line")));
    }
    Ok(out)
}

/// Complement of a set with at most one interval, closed up.
fn complement(set: &TruncationSet) -> TruncationSet {
    match set.intervals() {
        [] => TruncationSet::real_line(),
        [iv] => {
            let mut parts = Vec::new();
            if iv.lo > f64::NEG_INFINITY {
                parts.push(Interval::new(f64::NEG_INFINITY, iv.lo));
            }
            if iv.hi < f64::INFINITY {
                parts.push(Interval::new(iv.hi, f64::INFINITY));
            }
            TruncationSet::new(parts, 0.0)
        }
        _ => unreachable!("complement is only taken of a single interval"),
    }
}

/// {z : j ∈ M̂_λ(z)} ∩ {z : M̂_λhigh(z) = H}, signs at λ_high unioned out.
pub fn stable_l1_truncation(
    x: &DesignMatrix,
    line: &LineDecomposition,
    j: usize,
    lambda: f64,
    lambda_high: f64,
    h: &[usize],
    z_range: (f64, f64),
) -> Result<TruncationSet> {
    let ctx = PathContext::new(x);
    let opts = GeometryOptions::default();
    let lo = line_partition_with(&ctx, line, lambda, z_range, &opts)?;
    let hi = line_partition_with(&ctx, line, lambda_high, z_range, &opts)?;
    stable_l1_from_partitions(&lo, &hi, j, h)
}

/// Same set from precomputed partitions at λ and λ_high.
pub fn stable_l1_from_partitions(
    part_lambda: &LinePartition,
    part_high: &LinePartition,
    j: usize,
    h: &[usize],
) -> Result<TruncationSet> {
    if !(part_high.penalty > part_lambda.penalty) {
        return Err(Error::Input(format!(
            "lambda_high ({}) must exceed lambda ({})",
            part_high.penalty, part_lambda.penalty
        )));
    }
    let h = sorted(h);
    let selected = variable_truncation(part_lambda, j)?;
    let stable = part_high.union_where(|s| s.active == h);
    let out = selected.intersect(&stable);
    if out.is_empty() {
        return Err(Error::EmptyEvent(format!("(j = {j}, H = {h:?}) never occurs on the line")));
    }
    Ok(TruncationSet::new(out.intervals().iter().copied(), part_lambda.merge_tol))
}

/// OLS t-statistics of the active coefficients, (X_MᵀX_M)⁻¹X_Mᵀy / (σ√diag).
pub fn active_t_statistics(x: &DesignMatrix, y: &DVector<f64>, model: &[usize], sigma: f64) -> Result<Vec<f64>> {
    if model.is_empty() {
        return Ok(Vec::new());
    }
    let xm = linalg::select_columns(x.matrix(), model);
    let ginv = linalg::spd_inverse(&xm.tr_mul(&xm))?;
    let beta = &ginv * xm.tr_mul(y);
    Ok((0..model.len()).map(|k| beta[k] / (sigma * ginv[(k, k)].sqrt())).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::partition::line_partition;
    use nalgebra::DMatrix;

    #[test]
    fn single_variable_t_screen_is_two_rays() {
        let x = DesignMatrix::new(DMatrix::identity(3, 3), None).unwrap();
        let y = DVector::from_column_slice(&[4.0, 0.2, -0.3]);
        let line = LineDecomposition::new(DVector::from_column_slice(&[1.0, 0.0, 0.0]), &y).unwrap();
        let part = line_partition(&x, &line, 1.0, (-16.0, 24.0)).unwrap();
        let set = stable_t_truncation(&part, &x, &line, 0, &[0], 2.5, 1.0).unwrap();
        assert_eq!(set, TruncationSet::two_rays(-2.5, 2.5));
    }

    #[test]
    fn vacuous_high_penalty_screen() {
        let x = DesignMatrix::new(DMatrix::identity(3, 3), None).unwrap();
        let y = DVector::from_column_slice(&[4.0, 0.2, -0.3]);
        let line = LineDecomposition::new(DVector::from_column_slice(&[1.0, 0.0, 0.0]), &y).unwrap();
        let set = stable_l1_truncation(&x, &line, 0, 1.0, 1e4, &[], (-16.0, 24.0)).unwrap();
        assert_eq!(set, TruncationSet::two_rays(-1.0, 1.0));
        let set = stable_l1_truncation(&x, &line, 0, 1.0, 2.0, &[0], (-16.0, 24.0)).unwrap();
        assert_eq!(set, TruncationSet::two_rays(-2.0, 2.0));
    }
}
