use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::geometry::polyhedron::LineDecomposition;
use crate::geometry::truncation_set::{Interval, TruncationSet};

/// Generic route for any selection rule: evaluate the event along a grid of
/// z values, then bisect every transition down to `refine_tol`.
///
/// Approximate by construction — an excursion narrower than the grid
/// spacing can be missed entirely.
pub fn grid_truncation<F>(mut selector: F, line: &LineDecomposition, grid: &[f64], refine_tol: f64) -> Result<TruncationSet>
where
    F: FnMut(&DVector<f64>) -> Result<bool>,
{
    if grid.is_empty() || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Input("grid must be non-empty and strictly increasing".into()));
    }
    if !(refine_tol > 0.0) {
        return Err(Error::Input(format!("refine_tol must be positive, got {refine_tol}")));
    }
    let mut eval = |z: f64| {
        selector(&line.point(z)).map_err(|e| Error::Selector {
            z,
            message: e.to_string(),
        })
    };
    let flags: Vec<bool> = grid.iter().map(|&z| eval(z)).collect::<Result<_>>()?;

    // boundary between grid[i] (state s) and grid[i+1] (state !s)
    let mut refine = |lo: f64, hi: f64, state_lo: bool| -> Result<f64> {
        let (mut a, mut b) = (lo, hi);
        while b - a > refine_tol {
            let mid = 0.5 * (a + b);
            if eval(mid)? == state_lo {
                a = mid;
            } else {
                b = mid;
            }
        }
        Ok(0.5 * (a + b))
    };

    let mut pieces = Vec::new();
    let mut start = if flags[0] { Some(grid[0]) } else { None };
    for i in 0..grid.len() - 1 {
        if flags[i] == flags[i + 1] {
            continue;
        }
        let edge = refine(grid[i], grid[i + 1], flags[i])?;
        if flags[i] {
            pieces.push(Interval::new(start.take().unwrap_or(edge), edge));
        } else {
            start = Some(edge);
        }
    }
    if let Some(s) = start {
        pieces.push(Interval::new(s, *grid.last().unwrap()));
    }
    Ok(TruncationSet::new(pieces, 0.0))
}

/// Evenly spaced grid covering [lo, hi] with the given spacing.
pub fn uniform_grid(lo: f64, hi: f64, spacing: f64) -> Vec<f64> {
    let steps = ((hi - lo) / spacing).ceil().max(1.0) as usize;
    (0..=steps).map(|i| lo + (hi - lo) * i as f64 / steps as f64).collect()
}
