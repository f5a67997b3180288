use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::geometry::truncation_set::TruncationSet;
use crate::lasso::{DesignMatrix, LassoOptions, LassoSolver, ResponseVector};
use crate::linalg;

/// Closed-form support of ηⱼᵀy given {j ∈ M̂} for the full-model contrast
/// ηⱼ = X(XᵀX)⁻¹eⱼ: the two rays [−∞, aⱼ] ∪ [bⱼ, ∞].
///
/// Because X₋ⱼᵀηⱼ = 0, moving y along ηⱼ leaves the lasso fit of the other
/// coordinates (with βⱼ pinned at zero) unchanged, so the exclusion event is
/// a single interval [aⱼ, bⱼ] found from one auxiliary lasso solve.
pub fn full_target_truncation(x: &DesignMatrix, y: &ResponseVector, j: usize, lambda: f64) -> Result<TruncationSet> {
    full_target_truncation_with(x, y, j, lambda, &LassoOptions::default()).map(|(a, b)| TruncationSet::two_rays(a, b))
}

/// The endpoints (aⱼ, bⱼ) themselves.
pub fn full_target_truncation_with(
    x: &DesignMatrix,
    y: &ResponseVector,
    j: usize,
    lambda: f64,
    lasso: &LassoOptions,
) -> Result<(f64, f64)> {
    let (n, p) = (x.n(), x.p());
    if y.len() != n {
        return Err(Error::Dimension(format!("design has {n} rows, response has {}", y.len())));
    }
    if j >= p {
        return Err(Error::Input(format!("variable {j} out of range for {p} columns")));
    }
    if n <= p {
        return Err(Error::RankDeficient(format!("full target needs n > p (n = {n}, p = {p})")));
    }
    let all: Vec<usize> = (0..p).collect();
    let eta = linalg::ols_contrast(x.matrix(), &all, j)?;
    let eta_sq = eta.norm_squared();
    let yv = y.values();
    let z = eta.dot(yv);
    let nu: DVector<f64> = yv - &eta * (z / eta_sq);

    let others: Vec<usize> = (0..p).filter(|&k| k != j).collect();
    let x_rest = linalg::select_columns(x.matrix(), &others);
    let xj = x.matrix().column(j);
    let r = if others.is_empty() {
        -nu
    } else {
        let mut opts = *lasso;
        opts.penalty = lambda;
        let fit = LassoSolver::new(&x_rest).solve(&nu, &opts, None)?;
        let beta = DVector::from_vec(fit.coefficients);
        &x_rest * beta - nu
    };
    let xr = xj.dot(&r);
    let a = eta_sq * (xr - lambda);
    let b = eta_sq * (xr + lambda);
    Ok((a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn orthonormal_design_gives_plus_minus_lambda() {
        let x = DesignMatrix::new(DMatrix::identity(4, 3), None).unwrap();
        let y = ResponseVector::from_slice(&[0.3, -2.0, 5.0, 1.0]).unwrap();
        for j in 0..3 {
            let (a, b) = full_target_truncation_with(&x, &y, j, 1.5, &LassoOptions::default()).unwrap();
            assert!((a + 1.5).abs() < 1e-12 && (b - 1.5).abs() < 1e-12);
        }
    }

    #[test]
    fn requires_more_rows_than_columns() {
        let x = DesignMatrix::new(DMatrix::identity(2, 2), None).unwrap();
        let y = ResponseVector::from_slice(&[1.0, 1.0]).unwrap();
        assert!(matches!(full_target_truncation(&x, &y, 0, 1.0), Err(Error::RankDeficient(_))));
    }
}
