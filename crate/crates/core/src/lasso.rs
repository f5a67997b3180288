//! ℓ1-penalized least squares in sum form,
//!
//! ```text
//! minimize_β  ½‖y − β₀ − Xβ‖² + λ‖β‖₁
//! ```
//!
//! solved by cyclic coordinate descent. Once the coordinate sweeps have
//! settled, the active set and signs are frozen and the stationarity system
//! `X_Mᵀ X_M β_M = X_Mᵀ y − λ s` is solved exactly; the result is kept only if
//! it passes a full KKT check. This makes the reported active set reliable
//! enough to build selection geometry on.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// n × p design with optional column labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    values: DMatrix<f64>,
    column_names: Option<Vec<String>>,
}

impl DesignMatrix {
    pub fn new(values: DMatrix<f64>, column_names: Option<Vec<String>>) -> Result<Self> {
        let (n, p) = values.shape();
        if n == 0 || p == 0 {
            return Err(Error::Input(format!("design must be non-empty, got {n}x{p}")));
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!(
                "non-finite design entry at row {}, column {}",
                idx % n,
                idx / n
            )));
        }
        for j in 0..p {
            if values.column(j).iter().all(|&v| v == 0.0) {
                return Err(Error::Input(format!("column {j} is identically zero")));
            }
        }
        if let Some(names) = &column_names {
            if names.len() != p {
                return Err(Error::Dimension(format!(
                    "{} column names for {p} columns",
                    names.len()
                )));
            }
        }
        Ok(Self {
            values,
            column_names,
        })
    }

    pub fn from_row_slice(n: usize, p: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * p {
            return Err(Error::Dimension(format!(
                "{} values for a {n}x{p} design",
                data.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(n, p, data), None)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn column_names(&self) -> Option<&[String]> {
        self.column_names.as_deref()
    }

    pub fn column_name(&self, j: usize) -> String {
        match &self.column_names {
            Some(names) => names[j].clone(),
            None => format!("x{}", j + 1),
        }
    }

    /// Gram matrix XᵀX.
    pub fn gram(&self) -> DMatrix<f64> {
        self.values.tr_mul(&self.values)
    }
}

/// Response vector paired with a [`DesignMatrix`].
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseVector(DVector<f64>);

impl ResponseVector {
    pub fn new(values: DVector<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Input("empty response".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!("non-finite response at row {i}")));
        }
        Ok(Self(values))
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(values))
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LassoOptions {
    /// λ on the sum scale.
    pub penalty: f64,
    pub include_intercept: bool,
    /// Bound on the maximum KKT violation at exit.
    pub convergence_tol: f64,
    /// Maximum number of full coordinate sweeps.
    pub max_iterations: usize,
    /// Coefficients at or below this magnitude are zeroed.
    pub active_tol: f64,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self {
            penalty: 0.0,
            include_intercept: false,
            convergence_tol: 1e-8,
            max_iterations: 100_000,
            active_tol: 1e-9,
        }
    }
}

impl LassoOptions {
    pub fn with_penalty(penalty: f64) -> Self {
        Self {
            penalty,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.penalty >= 0.0) || !self.penalty.is_finite() {
            return Err(Error::Input(format!("penalty must be >= 0, got {}", self.penalty)));
        }
        if !(self.convergence_tol > 0.0) {
            return Err(Error::Input("convergence_tol must be positive".into()));
        }
        if !(self.active_tol > 0.0) {
            return Err(Error::Input("active_tol must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Input("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoFit {
    pub coefficients: Vec<f64>,
    pub intercept: Option<f64>,
    pub active_set: Vec<usize>,
    pub signs: Vec<i8>,
    pub kkt_violation: f64,
    pub penalty: f64,
    /// An inactive score sits within `active_tol` of ±λ.
    pub degenerate: bool,
    pub sweeps: usize,
}

impl LassoFit {
    pub fn p(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_active(&self, j: usize) -> bool {
        self.active_set.binary_search(&j).is_ok()
    }
}

/// Per-coordinate stationarity report for an arbitrary coefficient vector.
#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    /// x_jᵀ(Xβ − y) for every j.
    pub gradient: Vec<f64>,
    /// Active j: |g_j + λ sign(β_j)|. Inactive j: |g_j| − λ (≤ 0 when feasible).
    pub gaps: Vec<f64>,
    pub max_violation: f64,
}

pub fn kkt_report(x: &DesignMatrix, y: &ResponseVector, beta: &[f64], lambda: f64) -> Result<KktReport> {
    check_dims(x, y)?;
    if beta.len() != x.p() {
        return Err(Error::Dimension(format!(
            "{} coefficients for {} columns",
            beta.len(),
            x.p()
        )));
    }
    let b = DVector::from_column_slice(beta);
    let resid = x.matrix() * &b - y.values();
    let gradient: Vec<f64> = x.matrix().tr_mul(&resid).iter().copied().collect();
    let gaps: Vec<f64> = gradient
        .iter()
        .zip(beta)
        .map(|(&g, &bj)| {
            if bj != 0.0 {
                (g + lambda * bj.signum()).abs()
            } else {
                g.abs() - lambda
            }
        })
        .collect();
    let max_violation = gaps.iter().fold(0.0_f64, |m, &g| m.max(g));
    Ok(KktReport {
        gradient,
        gaps,
        max_violation,
    })
}

pub fn fit_lasso(x: &DesignMatrix, y: &ResponseVector, opts: &LassoOptions) -> Result<LassoFit> {
    fit_from(x, y, opts, None)
}

/// Same fixed point as [`fit_lasso`]; the warm start only changes the path taken.
pub fn fit_lasso_warm(
    x: &DesignMatrix,
    y: &ResponseVector,
    opts: &LassoOptions,
    warm_start: &LassoFit,
) -> Result<LassoFit> {
    if warm_start.p() != x.p() {
        return Err(Error::Dimension(format!(
            "warm start has {} coefficients, design has {} columns",
            warm_start.p(),
            x.p()
        )));
    }
    fit_from(x, y, opts, Some(&warm_start.coefficients))
}

fn check_dims(x: &DesignMatrix, y: &ResponseVector) -> Result<()> {
    if x.n() != y.len() {
        return Err(Error::Dimension(format!(
            "design has {} rows, response has {}",
            x.n(),
            y.len()
        )));
    }
    Ok(())
}

fn fit_from(
    x: &DesignMatrix,
    y: &ResponseVector,
    opts: &LassoOptions,
    warm: Option<&[f64]>,
) -> Result<LassoFit> {
    check_dims(x, y)?;
    opts.validate()?;
    if opts.include_intercept {
        let (xc, means) = center_columns(x.matrix());
        let ybar = y.values().mean();
        let yc = y.values().add_scalar(-ybar);
        let mut fit = LassoSolver::new(&xc).solve(&yc, opts, warm)?;
        let shift: f64 = means.iter().zip(&fit.coefficients).map(|(m, b)| m * b).sum();
        fit.intercept = Some(ybar - shift);
        Ok(fit)
    } else {
        LassoSolver::new(x.matrix()).solve(y.values(), opts, warm)
    }
}

pub fn center_columns(x: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let mut xc = x.clone();
    let mut means = Vec::with_capacity(x.ncols());
    for mut col in xc.column_iter_mut() {
        let m = col.mean();
        col.add_scalar_mut(-m);
        means.push(m);
    }
    (xc, means)
}

/// Reusable coordinate-descent solver over a fixed design (no intercept).
///
/// Caches the squared column norms so repeated solves along a line or a
/// penalty grid only pay for the sweeps.
pub struct LassoSolver<'a> {
    x: &'a DMatrix<f64>,
    col_sq: Vec<f64>,
}

impl<'a> LassoSolver<'a> {
    pub fn new(x: &'a DMatrix<f64>) -> Self {
        let col_sq = x.column_iter().map(|c| c.norm_squared()).collect();
        Self { x, col_sq }
    }

    pub fn solve(&self, y: &DVector<f64>, opts: &LassoOptions, warm: Option<&[f64]>) -> Result<LassoFit> {
        opts.validate()?;
        let x = self.x;
        let (n, p) = x.shape();
        if y.len() != n {
            return Err(Error::Dimension(format!("design has {n} rows, response has {}", y.len())));
        }
        let lambda = opts.penalty;
        let mut beta = match warm {
            Some(w) => DVector::from_column_slice(w),
            None => DVector::zeros(p),
        };
        for j in 0..p {
            if self.col_sq[j] == 0.0 {
                beta[j] = 0.0;
            }
        }
        let mut resid = y - x * &beta;
        let scale = y.norm().max(1.0);
        // Coordinate changes are measured in fitted-value units.
        let mut sweep_tol = 1e-7 * scale;
        let mut sweeps = 0usize;
        let mut last_viol = f64::INFINITY;

        while sweeps < opts.max_iterations {
            // full sweep
            let mut max_change = self.sweep(&mut beta, &mut resid, lambda, 0..p);
            sweeps += 1;
            // iterate on the current support until it settles
            while max_change > sweep_tol && sweeps < opts.max_iterations {
                let support: Vec<usize> = (0..p).filter(|&j| beta[j] != 0.0).collect();
                max_change = self.sweep(&mut beta, &mut resid, lambda, support.into_iter());
                sweeps += 1;
            }
            if let Some(fit) = self.polish(y, &beta, opts, sweeps) {
                return Ok(fit);
            }
            let viol = self.max_violation(&beta, &resid, lambda);
            last_viol = viol;
            if viol <= opts.convergence_tol {
                return Ok(self.finish(y, beta, opts, sweeps));
            }
            sweep_tol = (sweep_tol * 0.1).max(1e-15 * scale);
        }
        Err(Error::NonConvergence {
            iterations: sweeps,
            kkt_violation: last_viol,
        })
    }

    fn sweep<I: Iterator<Item = usize>>(
        &self,
        beta: &mut DVector<f64>,
        resid: &mut DVector<f64>,
        lambda: f64,
        coords: I,
    ) -> f64 {
        let mut max_change = 0.0_f64;
        for j in coords {
            let sq = self.col_sq[j];
            if sq == 0.0 {
                continue;
            }
            let col = self.x.column(j);
            let old = beta[j];
            let rho = col.dot(resid) + sq * old;
            let new = soft_threshold(rho, lambda) / sq;
            if new != old {
                let delta = new - old;
                resid.axpy(-delta, &col, 1.0);
                beta[j] = new;
                max_change = max_change.max(delta.abs() * sq.sqrt());
            }
        }
        max_change
    }

    fn max_violation(&self, beta: &DVector<f64>, resid: &DVector<f64>, lambda: f64) -> f64 {
        let mut worst = 0.0_f64;
        for j in 0..beta.len() {
            let g = -self.x.column(j).dot(resid);
            let gap = if beta[j] != 0.0 {
                (g + lambda * beta[j].signum()).abs()
            } else {
                (g.abs() - lambda).max(0.0)
            };
            worst = worst.max(gap);
        }
        worst
    }

    /// Freeze the support and signs, solve the stationarity system exactly,
    /// keep the answer only if it is KKT-feasible.
    fn polish(&self, y: &DVector<f64>, beta: &DVector<f64>, opts: &LassoOptions, sweeps: usize) -> Option<LassoFit> {
        let lambda = opts.penalty;
        let support: Vec<usize> = (0..beta.len())
            .filter(|&j| beta[j].abs() > opts.active_tol)
            .collect();
        let mut exact = DVector::zeros(beta.len());
        if !support.is_empty() {
            if support.len() > self.x.nrows() {
                return None;
            }
            let xm = linalg::select_columns(self.x, &support);
            let gram = xm.tr_mul(&xm);
            let chol = gram.cholesky()?;
            let mut rhs = xm.tr_mul(y);
            for (k, &j) in support.iter().enumerate() {
                rhs[k] -= lambda * beta[j].signum();
            }
            let sol = chol.solve(&rhs);
            for (k, &j) in support.iter().enumerate() {
                if sol[k].signum() != beta[j].signum() || sol[k].abs() <= opts.active_tol {
                    return None;
                }
                exact[j] = sol[k];
            }
        }
        let resid = y - self.x * &exact;
        if self.max_violation(&exact, &resid, lambda) > opts.convergence_tol {
            return None;
        }
        Some(self.finish(y, exact, opts, sweeps))
    }

    fn finish(&self, y: &DVector<f64>, mut beta: DVector<f64>, opts: &LassoOptions, sweeps: usize) -> LassoFit {
        let lambda = opts.penalty;
        for b in beta.iter_mut() {
            if b.abs() <= opts.active_tol {
                *b = 0.0;
            }
        }
        let resid = y - self.x * &beta;
        let kkt_violation = self.max_violation(&beta, &resid, lambda);
        let mut active_set = Vec::new();
        let mut signs = Vec::new();
        let mut degenerate = false;
        for j in 0..beta.len() {
            if beta[j] != 0.0 {
                active_set.push(j);
                signs.push(if beta[j] > 0.0 { 1 } else { -1 });
            } else if self.col_sq[j] > 0.0 {
                let score = self.x.column(j).dot(&resid).abs();
                if (score - lambda).abs() <= opts.active_tol.max(1e-12 * lambda) {
                    degenerate = true;
                }
            }
        }
        LassoFit {
            coefficients: beta.iter().copied().collect(),
            intercept: None,
            active_set,
            signs,
            kkt_violation,
            penalty: lambda,
            degenerate,
            sweeps,
        }
    }
}

/// Knot of the piecewise-linear solution path in the penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct PathKnot {
    pub penalty: f64,
    pub beta: DVector<f64>,
}

/// Exact lasso path (no intercept) from ‖Xᵀy‖∞ down to `penalty_min`, by
/// homotopy with the drop rule. Stops early, at the last knot reached, when
/// the active set can no longer grow with a nonsingular Gram block.
pub fn lasso_path(x: &DMatrix<f64>, y: &DVector<f64>, penalty_min: f64) -> Result<Vec<PathKnot>> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::Dimension(format!("design has {n} rows, response has {}", y.len())));
    }
    if !(penalty_min >= 0.0) {
        return Err(Error::Input(format!("penalty_min must be >= 0, got {penalty_min}")));
    }
    let c0 = x.tr_mul(y);
    let top = c0.amax();
    let mut knots = vec![PathKnot {
        penalty: top,
        beta: DVector::zeros(p),
    }];
    if top <= penalty_min || top == 0.0 {
        return Ok(knots);
    }
    let first = c0.iamax();
    let mut active = vec![first];
    let mut signs = vec![c0[first].signum()];
    let mut lambda = top;
    let mut fresh = Some(first);
    let tiny = 1e-13 * top;

    for _ in 0..8 * (n + p) {
        let xm = linalg::select_columns(x, &active);
        let Some(chol) = xm.tr_mul(&xm).cholesky() else { break };
        let s = DVector::from_column_slice(&signs);
        let d = chol.solve(&s);
        let mut rhs = xm.tr_mul(y);
        rhs.axpy(-lambda, &s, 1.0);
        let bm = chol.solve(&rhs);
        let corr = x.tr_mul(&(y - &xm * &bm));
        let slope = x.tr_mul(&(&xm * &d));

        let mut step = lambda - penalty_min;
        let mut event: Option<(usize, bool, f64)> = None; // (index, joins, sign)
        for j in 0..p {
            if active.contains(&j) || fresh == Some(j) {
                continue;
            }
            let (c, a) = (corr[j], slope[j]);
            if a < 1.0 {
                let g = (lambda - c) / (1.0 - a);
                if g > tiny && g < step {
                    step = g;
                    event = Some((j, true, 1.0));
                }
            }
            if a > -1.0 {
                let g = (lambda + c) / (1.0 + a);
                if g > tiny && g < step {
                    step = g;
                    event = Some((j, true, -1.0));
                }
            }
        }
        for (k, &j) in active.iter().enumerate() {
            if fresh == Some(j) || d[k] == 0.0 {
                continue;
            }
            let g = -bm[k] / d[k];
            if g > tiny && g < step {
                step = g;
                event = Some((j, false, 0.0));
            }
        }
        lambda -= step;
        let mut beta = DVector::zeros(p);
        for (k, &j) in active.iter().enumerate() {
            beta[j] = bm[k] + step * d[k];
        }
        match event {
            None => {
                knots.push(PathKnot { penalty: penalty_min, beta });
                return Ok(knots);
            }
            Some((j, true, sign)) => {
                knots.push(PathKnot { penalty: lambda, beta });
                if active.len() >= n {
                    break;
                }
                let at = active.partition_point(|&i| i < j);
                active.insert(at, j);
                signs.insert(at, sign);
                fresh = Some(j);
            }
            Some((j, false, _)) => {
                beta[j] = 0.0;
                knots.push(PathKnot { penalty: lambda, beta });
                let at = active.iter().position(|&i| i == j).unwrap();
                active.remove(at);
                signs.remove(at);
                fresh = Some(j);
            }
        }
        if active.is_empty() {
            break;
        }
    }
    Ok(knots)
}

/// Linear interpolation of the path at `penalty`; `None` below the last knot.
pub fn path_at(knots: &[PathKnot], penalty: f64) -> Option<DVector<f64>> {
    let first = knots.first()?;
    if penalty >= first.penalty {
        return Some(DVector::zeros(first.beta.len()));
    }
    for w in knots.windows(2) {
        let (hi, lo) = (&w[0], &w[1]);
        if penalty >= lo.penalty {
            let t = (hi.penalty - penalty) / (hi.penalty - lo.penalty);
            return Some(&hi.beta + (&lo.beta - &hi.beta) * t);
        }
    }
    None
}

pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// ½‖y − Xβ‖² + λ‖β‖₁ (no intercept).
pub fn objective(x: &DMatrix<f64>, y: &DVector<f64>, beta: &[f64], lambda: f64) -> f64 {
    let b = DVector::from_column_slice(beta);
    let r = y - x * b;
    0.5 * r.norm_squared() + lambda * beta.iter().map(|v| v.abs()).sum::<f64>()
}

/// ‖Xᵀy‖_∞ on the sum scale, the smallest penalty giving the empty model.
pub fn null_threshold(x: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
    x.tr_mul(y).amax()
}
