//! Segmentation of a line {ν + c·z} into maximal pieces of constant lasso
//! active set and signs.
//!
//! Inside a piece with active set M and signs s the solution is affine in z,
//! β_M(z) = G_MM⁻¹(X_Mᵀν + z X_Mᵀc − λs), and so are the inactive scores.
//! The piece ends at the first z where an active coefficient reaches zero or
//! an inactive score reaches ±λ (the slice of the {Ay ≤ b} region). The next
//! piece is obtained by dropping/adding that variable; if the prediction is
//! not KKT-feasible just past the boundary, the lasso is re-solved there from
//! a warm start.

use std::borrow::Cow;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::polyhedron::LineDecomposition;
use crate::geometry::truncation_set::{Interval, TruncationSet};
use crate::lasso::{DesignMatrix, LassoOptions, LassoSolver};
use crate::linalg::GramInverse;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryOptions {
    /// Relative slope below which a constraint is treated as flat along the line.
    pub ray_tol: f64,
    /// Boundary step ε = step_rel · (1 + |boundary|).
    pub step_rel: f64,
    pub max_segments: usize,
    pub max_nudges: usize,
    /// Gaps below merge_tol_rel · (σ‖η‖) are merged.
    pub merge_tol_rel: f64,
    /// Working range half-width in units of σ‖η‖.
    pub range_sd: f64,
    pub lasso: LassoOptions,
}

impl Default for GeometryOptions {
    fn default() -> Self {
        Self {
            ray_tol: 1e-12,
            step_rel: 1e-7,
            max_segments: 10_000,
            max_nudges: 3,
            merge_tol_rel: 1e-10,
            range_sd: 20.0,
            lasso: LassoOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub z_lo: f64,
    pub z_hi: f64,
    pub active: Vec<usize>,
    pub signs: Vec<i8>,
}

impl Segment {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.z_lo + self.z_hi)
    }

    pub fn contains_variable(&self, j: usize) -> bool {
        self.active.binary_search(&j).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinePartition {
    pub segments: Vec<Segment>,
    pub z_min: f64,
    pub z_max: f64,
    /// The first segment continues below z_min.
    pub lower_truncated: bool,
    /// The last segment continues above z_max.
    pub upper_truncated: bool,
    pub penalty: f64,
    pub merge_tol: f64,
}

impl LinePartition {
    /// Union of the segments satisfying `keep`, with terminal rays extended
    /// to ±∞ when the range cut them.
    pub fn union_where<F: Fn(&Segment) -> bool>(&self, keep: F) -> TruncationSet {
        let pieces = (0..self.segments.len())
            .filter(|&i| keep(&self.segments[i]))
            .map(|i| self.extended_interval(i));
        TruncationSet::new(pieces, self.merge_tol)
    }

    /// Extent of segment `i`, with a terminal segment running off to ±∞ when
    /// the working range cut it.
    pub fn extended_interval(&self, i: usize) -> Interval {
        let s = &self.segments[i];
        let lo = if i == 0 && self.lower_truncated { f64::NEG_INFINITY } else { s.z_lo };
        let hi = if i + 1 == self.segments.len() && self.upper_truncated { f64::INFINITY } else { s.z_hi };
        Interval::new(lo, hi)
    }

    pub fn segment_at(&self, z: f64) -> Option<&Segment> {
        self.segments.iter().find(|s| s.z_lo <= z && z <= s.z_hi)
    }
}

/// Design plus its Gram matrix, shared by repeated line sweeps.
#[derive(Debug, Clone)]
pub struct PathContext<'a> {
    pub x: &'a DesignMatrix,
    pub gram: Cow<'a, DMatrix<f64>>,
    pub col_norm: Vec<f64>,
}

impl<'a> PathContext<'a> {
    pub fn new(x: &'a DesignMatrix) -> Self {
        Self::with_gram(x, Cow::Owned(x.gram()))
    }

    pub fn with_gram(x: &'a DesignMatrix, gram: Cow<'a, DMatrix<f64>>) -> Self {
        let col_norm = (0..x.p()).map(|j| gram[(j, j)].sqrt()).collect();
        Self { x, gram, col_norm }
    }
}

/// Where the current piece ends.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Boundary {
    Drop(usize),
    Enter(usize, i8),
}

#[derive(Debug, Clone)]
struct PieceState {
    gi: GramInverse,
    signs: Vec<i8>,
}

struct PieceBounds {
    lo: f64,
    hi: f64,
    next: Option<Boundary>,
}

struct Sweep<'c, 'a> {
    ctx: &'c PathContext<'a>,
    line: &'c LineDecomposition,
    xt_nu: DVector<f64>,
    xt_c: DVector<f64>,
    c_norm: f64,
    lambda: f64,
    opts: &'c GeometryOptions,
}

impl<'c, 'a> Sweep<'c, 'a> {
    fn new(ctx: &'c PathContext<'a>, line: &'c LineDecomposition, lambda: f64, opts: &'c GeometryOptions) -> Self {
        let x = ctx.x.matrix();
        Self {
            ctx,
            line,
            xt_nu: x.tr_mul(&line.nu),
            xt_c: x.tr_mul(&line.c),
            c_norm: line.c.norm(),
            lambda,
            opts,
        }
    }

    /// Feasible z-range of a piece, plus the constraint that closes it on the right.
    fn bounds(&self, st: &PieceState) -> PieceBounds {
        let lam = self.lambda;
        let idx = &st.gi.index;
        let m = idx.len();
        let g = &self.ctx.gram;
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        let mut next = None;

        let (u, v) = if m > 0 {
            let rhs_u = DVector::from_iterator(m, (0..m).map(|k| self.xt_nu[idx[k]] - lam * st.signs[k] as f64));
            let rhs_v = DVector::from_iterator(m, idx.iter().map(|&j| self.xt_c[j]));
            (st.gi.solve(&rhs_u), st.gi.solve(&rhs_v))
        } else {
            (DVector::zeros(0), DVector::zeros(0))
        };

        // active: −s_k β_k(z) ≤ 0
        for k in 0..m {
            let s = st.signs[k] as f64;
            let slope = -s * v[k];
            let slack = s * u[k];
            let scale = st.gi.inv[(k, k)].abs().sqrt() * self.c_norm;
            if slope.abs() <= self.opts.ray_tol * scale {
                continue;
            }
            let r = slack / slope;
            if slope > 0.0 {
                if r < hi {
                    hi = r;
                    next = Some(Boundary::Drop(idx[k]));
                }
            } else if r > lo {
                lo = r;
            }
        }

        // inactive: |e_j + z f_j| ≤ λ
        let mut e_all = self.xt_nu.clone();
        let mut f_all = self.xt_c.clone();
        for k in 0..m {
            let col = g.column(idx[k]);
            e_all.axpy(-u[k], &col, 1.0);
            f_all.axpy(-v[k], &col, 1.0);
        }
        let mut pos = 0;
        for j in 0..self.ctx.x.p() {
            if pos < m && idx[pos] == j {
                pos += 1;
                continue;
            }
            let (e, f) = (e_all[j], f_all[j]);
            let scale = self.ctx.col_norm[j] * self.c_norm;
            if f.abs() <= self.opts.ray_tol * scale {
                continue;
            }
            let (r_up, r_down) = ((lam - e) / f, (-lam - e) / f);
            // f > 0: score rises to +λ at r_up, was −λ at r_down
            let (upper, lower, sign) = if f > 0.0 { (r_up, r_down, 1) } else { (r_down, r_up, -1) };
            if upper < hi {
                hi = upper;
                next = Some(Boundary::Enter(j, sign));
            }
            if lower > lo {
                lo = lower;
            }
        }
        PieceBounds { lo, hi, next }
    }

    fn state_from_fit(&self, active: &[usize], signs: &[i8]) -> Result<PieceState> {
        let gi = GramInverse::new(&self.ctx.gram, active)?;
        Ok(PieceState {
            gi,
            signs: signs.to_vec(),
        })
    }

    fn predict(&self, st: &PieceState, boundary: Boundary) -> Option<PieceState> {
        let mut next = st.clone();
        match boundary {
            Boundary::Drop(j) => {
                let pos = next.gi.index.binary_search(&j).ok()?;
                next.gi.remove(j);
                next.signs.remove(pos);
            }
            Boundary::Enter(j, s) => {
                next.gi.add(&self.ctx.gram, j).ok()?;
                let pos = next.gi.index.binary_search(&j).ok()?;
                next.signs.insert(pos, s);
            }
        }
        if next.gi.updates() >= 64 {
            next.gi = GramInverse::new(&self.ctx.gram, &next.gi.index).ok()?;
        }
        Some(next)
    }

    fn solve_at(&self, z: f64, warm: Option<&[f64]>) -> Result<(Vec<usize>, Vec<i8>, Vec<f64>)> {
        let y = self.line.point(z);
        let mut lasso = self.opts.lasso;
        lasso.penalty = self.lambda;
        lasso.include_intercept = false;
        let fit = LassoSolver::new(self.ctx.x.matrix()).solve(&y, &lasso, warm)?;
        Ok((fit.active_set, fit.signs, fit.coefficients))
    }

    fn coefficients_at(&self, st: &PieceState, z: f64) -> Vec<f64> {
        let mut beta = vec![0.0; self.ctx.x.p()];
        let m = st.gi.len();
        if m > 0 {
            let rhs = DVector::from_iterator(
                m,
                (0..m).map(|k| self.xt_nu[st.gi.index[k]] + z * self.xt_c[st.gi.index[k]] - self.lambda * st.signs[k] as f64),
            );
            let sol = st.gi.solve(&rhs);
            for k in 0..m {
                beta[st.gi.index[k]] = sol[k];
            }
        }
        beta
    }

    fn run(&self, z_min: f64, z_max: f64) -> Result<LinePartition> {
        let (active, signs, _) = self.solve_at(z_min, None)?;
        let mut state = self.state_from_fit(&active, &signs)?;
        let mut segments: Vec<Segment> = Vec::new();
        let mut z_cur = z_min;
        let mut lower_truncated = true;
        let upper_truncated;

        loop {
            let b = self.bounds(&state);
            if segments.is_empty() {
                lower_truncated = b.lo < z_min;
            }
            let z_hi = b.hi.min(z_max);
            segments.push(Segment {
                z_lo: z_cur,
                z_hi,
                active: state.gi.index.clone(),
                signs: state.signs.clone(),
            });
            if b.hi >= z_max {
                upper_truncated = b.hi > z_max;
                break;
            }
            if segments.len() >= self.opts.max_segments {
                return Err(Error::Partition(format!(
                    "more than {} segments on [{z_min}, {z_max}]",
                    self.opts.max_segments
                )));
            }
            let boundary = b.hi;
            let tiny = 1e-12 * (1.0 + boundary.abs());
            let predicted = b.next.and_then(|nb| self.predict(&state, nb)).filter(|cand| {
                let nb = self.bounds(cand);
                nb.lo <= boundary + 1e-9 * (1.0 + boundary.abs()) && nb.hi > boundary + tiny
            });
            let next = match predicted {
                Some(cand) => cand,
                None => self.resolve_past(&state, boundary)?,
            };
            state = next;
            z_cur = boundary;
        }
        Ok(LinePartition {
            segments,
            z_min,
            z_max,
            lower_truncated,
            upper_truncated,
            penalty: self.lambda,
            merge_tol: 0.0,
        })
    }

    /// Re-solve just past `boundary`, nudging further out when the solve
    /// lands back on the same piece.
    fn resolve_past(&self, state: &PieceState, boundary: f64) -> Result<PieceState> {
        let warm = self.coefficients_at(state, boundary);
        let mut eps = self.opts.step_rel * (1.0 + boundary.abs());
        for _ in 0..=self.opts.max_nudges {
            let z = boundary + eps;
            let (active, signs, _) = self.solve_at(z, Some(&warm))?;
            if active != state.gi.index || signs != state.signs {
                let cand = self.state_from_fit(&active, &signs)?;
                if self.bounds(&cand).hi > boundary {
                    return Ok(cand);
                }
            }
            eps *= 10.0;
        }
        Err(Error::Partition(format!(
            "could not step past the boundary at z = {boundary} (active set {:?})",
            state.gi.index
        )))
    }
}

/// Partition [z_min, z_max] of the line into constant-(M, s) segments.
pub fn line_partition(
    x: &DesignMatrix,
    line: &LineDecomposition,
    lambda: f64,
    z_range: (f64, f64),
) -> Result<LinePartition> {
    let ctx = PathContext::new(x);
    line_partition_with(&ctx, line, lambda, z_range, &GeometryOptions::default())
}

pub fn line_partition_with(
    ctx: &PathContext<'_>,
    line: &LineDecomposition,
    lambda: f64,
    z_range: (f64, f64),
    opts: &GeometryOptions,
) -> Result<LinePartition> {
    let (z_min, z_max) = z_range;
    if !(z_min.is_finite() && z_max.is_finite() && z_min < z_max) {
        return Err(Error::Input(format!("bad working range [{z_min}, {z_max}]")));
    }
    if line.nu.len() != ctx.x.n() {
        return Err(Error::Dimension(format!("line in R^{}, design has {} rows", line.nu.len(), ctx.x.n())));
    }
    if !(lambda >= 0.0) {
        return Err(Error::Input(format!("penalty must be >= 0, got {lambda}")));
    }
    let mut part = Sweep::new(ctx, line, lambda, opts).run(z_min, z_max)?;
    // merge tolerance is relative to the line's own scale ‖η‖
    part.merge_tol = opts.merge_tol_rel * line.eta_norm();
    Ok(part)
}

/// Segments whose active set is exactly `model` (TZ_M support).
pub fn model_truncation(part: &LinePartition, model: &[usize]) -> Result<TruncationSet> {
    let mut m = model.to_vec();
    m.sort_unstable();
    let set = part.union_where(|s| s.active == m);
    if set.is_empty() {
        return Err(Error::EmptyEvent(format!("active set {m:?} never occurs on the line")));
    }
    Ok(set)
}

/// Segments with active set `model` and matching signs (TZ_Ms support).
pub fn model_sign_truncation(part: &LinePartition, model: &[usize], signs: &[i8]) -> Result<TruncationSet> {
    if model.len() != signs.len() {
        return Err(Error::Dimension(format!("{} signs for {} variables", signs.len(), model.len())));
    }
    let mut pairs: Vec<(usize, i8)> = model.iter().copied().zip(signs.iter().copied()).collect();
    pairs.sort_unstable();
    let m: Vec<usize> = pairs.iter().map(|p| p.0).collect();
    let s: Vec<i8> = pairs.iter().map(|p| p.1).collect();
    let set = part.union_where(|seg| seg.active == m && seg.signs == s);
    if set.is_empty() {
        return Err(Error::EmptyEvent(format!("(M, s) = ({m:?}, {s:?}) never occurs on the line")));
    }
    Ok(set)
}

/// Segments whose active set contains `j` (TZ_V support).
pub fn variable_truncation(part: &LinePartition, j: usize) -> Result<TruncationSet> {
    let set = part.union_where(|s| s.contains_variable(j));
    if set.is_empty() {
        return Err(Error::EmptyEvent(format!("variable {j} is never selected on the line")));
    }
    Ok(set)
}
