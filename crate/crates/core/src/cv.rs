//! K-fold cross-validation of the lasso penalty over a log-spaced grid.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::lasso::{lasso_path, path_at};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvOptions {
    pub folds: usize,
    pub grid_size: usize,
    /// Smallest grid value as a fraction of ‖Xᵀy‖∞/n.
    pub min_ratio: f64,
    pub seed: u64,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self {
            folds: 10,
            grid_size: 50,
            min_ratio: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    /// Per-observation penalties, decreasing.
    pub grid: Vec<f64>,
    /// Mean held-out squared error per grid value (∞ where some fold stopped early).
    pub error: Vec<f64>,
    /// Minimizer on the per-observation scale.
    pub lambda: f64,
}

/// Cross-validated per-observation penalty. Each fold follows the exact
/// solution path down the grid and stops once the fit saturates (|M| ≥ n_train − 1);
/// grid values not reached by every fold are not eligible.
pub fn cv_lambda(x: &DMatrix<f64>, y: &DVector<f64>, opts: &CvOptions) -> Result<CvResult> {
    let (n, p) = x.shape();
    if y.len() != n {
        return Err(Error::Dimension(format!("design has {n} rows, response has {}", y.len())));
    }
    if opts.folds < 2 || opts.folds > n {
        return Err(Error::Input(format!("need 2 <= folds <= n, got {}", opts.folds)));
    }
    if opts.grid_size < 2 || !(opts.min_ratio > 0.0 && opts.min_ratio < 1.0) {
        return Err(Error::Input("grid needs >= 2 points and 0 < min_ratio < 1".into()));
    }
    let top = x.tr_mul(y).amax() / n as f64;
    if !(top > 0.0) {
        return Err(Error::Input("response is orthogonal to every column".into()));
    }
    let grid: Vec<f64> = (0..opts.grid_size)
        .map(|i| top * opts.min_ratio.powf(i as f64 / (opts.grid_size - 1) as f64))
        .collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(opts.seed));
    let mut fold_of = vec![0usize; n];
    for (pos, &i) in order.iter().enumerate() {
        fold_of[i] = pos % opts.folds;
    }

    let mut sse = vec![0.0; grid.len()];
    let mut reached = vec![true; grid.len()];
    for f in 0..opts.folds {
        let train: Vec<usize> = (0..n).filter(|&i| fold_of[i] != f).collect();
        let test: Vec<usize> = (0..n).filter(|&i| fold_of[i] == f).collect();
        let xt = DMatrix::from_fn(train.len(), p, |a, j| x[(train[a], j)]);
        let yt = DVector::from_iterator(train.len(), train.iter().map(|&i| y[i]));
        let xv = DMatrix::from_fn(test.len(), p, |a, j| x[(test[a], j)]);
        let yv = DVector::from_iterator(test.len(), test.iter().map(|&i| y[i]));
        let nt = train.len() as f64;
        let path = lasso_path(&xt, &yt, grid[grid.len() - 1] * nt)?;
        for (g, &lam) in grid.iter().enumerate() {
            let Some(beta) = path_at(&path, lam * nt) else {
                for r in reached.iter_mut().skip(g) {
                    *r = false;
                }
                break;
            };
            sse[g] += (&yv - &xv * &beta).norm_squared();
            let size = beta.iter().filter(|&&b| b != 0.0).count();
            if size + 1 >= train.len() {
                for r in reached.iter_mut().skip(g + 1) {
                    *r = false;
                }
                break;
            }
        }
    }
    let error: Vec<f64> = sse
        .iter()
        .zip(&reached)
        .map(|(&s, &ok)| if ok { s / n as f64 } else { f64::INFINITY })
        .collect();
    let best = error
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    Ok(CvResult {
        lambda: grid[best],
        grid,
        error,
    })
}
