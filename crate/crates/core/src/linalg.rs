//! Small dense helpers shared by the geometry and inference code.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub fn select_columns(x: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), cols.len(), |i, k| x[(i, cols[k])])
}

pub fn select_submatrix(g: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |a, b| g[(rows[a], cols[b])])
}

pub fn select_entries(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]))
}

/// Inverse of a symmetric positive-definite matrix via Cholesky.
pub fn spd_inverse(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if g.nrows() == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    g.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::RankDeficient(format!("{}x{} Gram matrix is not positive definite", g.nrows(), g.ncols())))
}

/// Contrast vector X_S (X_Sᵀ X_S)⁻¹ e_k for the k-th member of `cols`.
pub fn ols_contrast(x: &DMatrix<f64>, cols: &[usize], k: usize) -> Result<DVector<f64>> {
    if cols.len() > x.nrows() {
        return Err(Error::RankDeficient(format!(
            "{} columns exceed {} rows",
            cols.len(),
            x.nrows()
        )));
    }
    let xs = select_columns(x, cols);
    let chol = xs
        .tr_mul(&xs)
        .cholesky()
        .ok_or_else(|| Error::RankDeficient(format!("columns {cols:?} are linearly dependent")))?;
    let mut e = DVector::zeros(cols.len());
    e[k] = 1.0;
    Ok(&xs * chol.solve(&e))
}

/// Explicit inverse of a principal Gram submatrix G[S, S], kept in step with
/// the index set by bordering (add) and Schur downdates (remove).
#[derive(Debug, Clone)]
pub struct GramInverse {
    pub index: Vec<usize>,
    pub inv: DMatrix<f64>,
    updates: usize,
}

impl GramInverse {
    pub fn new(gram: &DMatrix<f64>, index: &[usize]) -> Result<Self> {
        let sub = select_submatrix(gram, index, index);
        Ok(Self {
            index: index.to_vec(),
            inv: spd_inverse(&sub)?,
            updates: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// Number of incremental updates since the last full factorization.
    pub fn updates(&self) -> usize {
        self.updates
    }

    pub fn add(&mut self, gram: &DMatrix<f64>, j: usize) -> Result<()> {
        let m = self.index.len();
        let b = DVector::from_iterator(m, self.index.iter().map(|&i| gram[(i, j)]));
        let w = &self.inv * &b;
        let schur = gram[(j, j)] - b.dot(&w);
        if !(schur > 1e-12 * gram[(j, j)].abs().max(1e-300)) {
            return Err(Error::RankDeficient(format!("adding column {j} makes the active Gram singular")));
        }
        let mut inv = DMatrix::zeros(m + 1, m + 1);
        inv.view_mut((0, 0), (m, m)).copy_from(&self.inv);
        inv.view_mut((0, 0), (m, m)).ger(1.0 / schur, &w, &w, 1.0);
        for a in 0..m {
            inv[(a, m)] = -w[a] / schur;
            inv[(m, a)] = -w[a] / schur;
        }
        inv[(m, m)] = 1.0 / schur;
        // keep index sorted: move the new row/column into position
        let pos = self.index.partition_point(|&i| i < j);
        self.index.insert(pos, j);
        self.inv = permute_last_to(inv, pos);
        self.updates += 1;
        Ok(())
    }

    pub fn remove(&mut self, j: usize) {
        let Ok(pos) = self.index.binary_search(&j) else {
            return;
        };
        let m = self.index.len();
        let d = self.inv[(pos, pos)];
        let col = self.inv.column(pos).clone_owned();
        let mut inv = self.inv.clone();
        inv.ger(-1.0 / d, &col, &col, 1.0);
        let keep: Vec<usize> = (0..m).filter(|&a| a != pos).collect();
        self.inv = select_submatrix(&inv, &keep, &keep);
        self.index.remove(pos);
        self.updates += 1;
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        &self.inv * rhs
    }
}

fn permute_last_to(m: DMatrix<f64>, pos: usize) -> DMatrix<f64> {
    let size = m.nrows();
    if pos + 1 == size {
        return m;
    }
    let order: Vec<usize> = (0..size)
        .map(|a| match a.cmp(&pos) {
            std::cmp::Ordering::Less => a,
            std::cmp::Ordering::Equal => size - 1,
            std::cmp::Ordering::Greater => a - 1,
        })
        .collect();
    select_submatrix(&m, &order, &order)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(p: usize) -> DMatrix<f64> {
        let a = DMatrix::from_fn(p + 3, p, |i, j| ((i * 7 + j * 13) % 11) as f64 - 5.0 + if i == j { 3.0 } else { 0.0 });
        a.tr_mul(&a)
    }

    #[test]
    fn bordered_updates_match_direct_inverse() {
        let g = spd(6);
        let mut gi = GramInverse::new(&g, &[1, 4]).unwrap();
        gi.add(&g, 2).unwrap();
        gi.add(&g, 0).unwrap();
        gi.add(&g, 5).unwrap();
        gi.remove(4);
        assert_eq!(gi.index, vec![0, 1, 2, 5]);
        let direct = spd_inverse(&select_submatrix(&g, &gi.index, &gi.index)).unwrap();
        assert!((gi.inv - direct).amax() < 1e-9);
    }

    #[test]
    fn ols_contrast_reproduces_unit_coordinate() {
        let x = DMatrix::from_fn(8, 3, |i, j| ((i + 1) as f64).powi(j as i32 + 1).sin());
        let eta = ols_contrast(&x, &[0, 2], 1).unwrap();
        let back = select_columns(&x, &[0, 2]).tr_mul(&eta);
        assert!((back[0]).abs() < 1e-10 && (back[1] - 1.0).abs() < 1e-10);
    }
}
