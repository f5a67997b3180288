//! Polyhedral description of the lasso selection event and the
//! one-dimensional slice of it along a contrast direction.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lasso::DesignMatrix;
use crate::linalg;

/// {y : A y ≤ b}.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyhedron {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl Polyhedron {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::Dimension(format!("A has {} rows, b has {}", a.nrows(), b.len())));
        }
        if a.nrows() == 0 {
            return Err(Error::Input("polyhedron needs at least one constraint".into()));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Input("polyhedron has non-finite entries".into()));
        }
        Ok(Self { a, b })
    }

    pub fn contains(&self, y: &DVector<f64>, tol: f64) -> bool {
        let ay = &self.a * y;
        ay.iter().zip(self.b.iter()).all(|(l, r)| *l <= r + tol)
    }
}

/// y = ν + c·z with z = ηᵀy and c = η/‖η‖².
#[derive(Debug, Clone, PartialEq)]
pub struct LineDecomposition {
    pub eta: DVector<f64>,
    pub c: DVector<f64>,
    pub nu: DVector<f64>,
    pub z_obs: f64,
}

impl LineDecomposition {
    pub fn new(eta: DVector<f64>, y: &DVector<f64>) -> Result<Self> {
        if eta.len() != y.len() {
            return Err(Error::Dimension(format!("eta has length {}, y has {}", eta.len(), y.len())));
        }
        let norm_sq = eta.norm_squared();
        if !(norm_sq > 0.0) || !norm_sq.is_finite() {
            return Err(Error::Input("contrast direction must be non-zero and finite".into()));
        }
        let c = &eta / norm_sq;
        let z_obs = eta.dot(y);
        let nu = y - &c * z_obs;
        Ok(Self { eta, c, nu, z_obs })
    }

    pub fn eta_norm(&self) -> f64 {
        self.eta.norm()
    }

    /// Point of the line at parameter z.
    pub fn point(&self, z: f64) -> DVector<f64> {
        &self.nu + &self.c * z
    }
}

/// Constraints {A y ≤ b} equivalent to {M̂ = M, ŝ = s} at penalty λ.
///
/// Rows 0..|M| encode sign consistency of the active coefficients, the
/// remaining 2(p − |M|) rows bound the inactive scores by ±λ.
pub fn polyhedron_for_model_signs(x: &DesignMatrix, model: &[usize], signs: &[i8], lambda: f64) -> Result<Polyhedron> {
    if model.len() != signs.len() {
        return Err(Error::Dimension(format!("{} signs for {} active variables", signs.len(), model.len())));
    }
    let xm_full = x.matrix();
    let (n, p) = xm_full.shape();
    let mut sorted = model.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != model.len() || sorted.last().is_some_and(|&j| j >= p) {
        return Err(Error::Input(format!("invalid active set {model:?}")));
    }
    let inactive: Vec<usize> = (0..p).filter(|j| !model.contains(j)).collect();
    let m = model.len();
    let rows = m + 2 * inactive.len();
    if rows == 0 {
        return Err(Error::Input("polyhedron would be unconstrained".into()));
    }
    let mut a = DMatrix::zeros(rows, n);
    let mut b = DVector::zeros(rows);
    let s = DVector::from_iterator(m, signs.iter().map(|&v| v as f64));

    // projection residual operator applied to each inactive column
    let (pinv_t, proj_s) = if m > 0 {
        let xm = linalg::select_columns(xm_full, model);
        let ginv = linalg::spd_inverse(&xm.tr_mul(&xm)).map_err(|_| {
            Error::RankDeficient(format!("active columns {model:?} are linearly dependent"))
        })?;
        // (X_Mᵀ X_M)⁻¹ X_Mᵀ, m × n
        let pinv_t = &ginv * xm.transpose();
        let ginv_s = &ginv * &s;
        for k in 0..m {
            // −s_k e_kᵀ G⁻¹ X_Mᵀ y ≤ −λ s_k (G⁻¹ s)_k
            let sk = s[k];
            for i in 0..n {
                a[(k, i)] = -sk * pinv_t[(k, i)];
            }
            b[k] = -lambda * sk * ginv_s[k];
        }
        (Some((xm, pinv_t)), Some(ginv_s))
    } else {
        (None, None)
    };

    for (r, &j) in inactive.iter().enumerate() {
        let xj = xm_full.column(j).clone_owned();
        // (I − P_M) x_j and x_jᵀ X_M G⁻¹ s
        let (resid_col, drift) = match (&pinv_t, &proj_s) {
            (Some((xm, pt)), Some(gs)) => {
                let coef = pt * &xj;
                let resid = &xj - xm * coef;
                let drift = xm.tr_mul(&xj).dot(gs);
                (resid, drift)
            }
            _ => (xj, 0.0),
        };
        let up = m + 2 * r;
        let down = up + 1;
        for i in 0..n {
            a[(up, i)] = resid_col[i];
            a[(down, i)] = -resid_col[i];
        }
        b[up] = lambda * (1.0 - drift);
        b[down] = lambda * (1.0 + drift);
    }
    Polyhedron::new(a, b)
}

/// Slice of the polyhedron along the line: (V⁻, V⁺, V⁰).
///
/// Rows whose slope |(Ac)_j| is below `ray_tol`·‖A_j‖‖c‖ count as flat.
pub fn truncation_interval(poly: &Polyhedron, line: &LineDecomposition) -> Result<(f64, f64, f64)> {
    truncation_interval_tol(poly, line, 1e-12)
}

pub fn truncation_interval_tol(poly: &Polyhedron, line: &LineDecomposition, ray_tol: f64) -> Result<(f64, f64, f64)> {
    if poly.a.ncols() != line.c.len() {
        return Err(Error::Dimension(format!(
            "polyhedron lives in R^{}, line in R^{}",
            poly.a.ncols(),
            line.c.len()
        )));
    }
    let ac = &poly.a * &line.c;
    let anu = &poly.a * &line.nu;
    let c_norm = line.c.norm();
    let mut v_minus = f64::NEG_INFINITY;
    let mut v_plus = f64::INFINITY;
    let mut v_zero = f64::INFINITY;
    for j in 0..poly.b.len() {
        let slack = poly.b[j] - anu[j];
        let slope = ac[j];
        let row_scale = poly.a.row(j).norm() * c_norm;
        if slope.abs() <= ray_tol * row_scale {
            v_zero = v_zero.min(slack);
        } else if slope > 0.0 {
            v_plus = v_plus.min(slack / slope);
        } else {
            v_minus = v_minus.max(slack / slope);
        }
    }
    if v_minus > v_plus {
        return Err(Error::EmptySlice { v_minus, v_plus });
    }
    if v_zero < 0.0 {
        return Err(Error::IncompatibleNu { v_zero });
    }
    Ok((v_minus, v_plus, v_zero))
}
