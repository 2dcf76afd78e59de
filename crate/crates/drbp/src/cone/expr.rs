//! Affine expressions over the flat variable vector of a cone program.

use nalgebra::{DMatrix, DVector};

/// Scalar affine expression `Σ coefᵢ·x[idxᵢ] + constant`.
#[derive(Debug, Clone, Default)]
pub struct LinExpr {
    pub(crate) terms: Vec<(usize, f64)>,
    pub(crate) constant: f64,
}

impl LinExpr {
    pub fn constant(c: f64) -> Self {
        LinExpr { terms: Vec::new(), constant: c }
    }

    pub fn variable(idx: usize) -> Self {
        LinExpr { terms: vec![(idx, 1.0)], constant: 0.0 }
    }

    pub fn term(idx: usize, coef: f64) -> Self {
        LinExpr { terms: vec![(idx, coef)], constant: 0.0 }
    }

    pub fn add(&self, other: &LinExpr) -> LinExpr {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        LinExpr { terms, constant: self.constant + other.constant }
    }

    pub fn sub(&self, other: &LinExpr) -> LinExpr {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, k: f64) -> LinExpr {
        LinExpr {
            terms: self.terms.iter().map(|&(i, c)| (i, c * k)).collect(),
            constant: self.constant * k,
        }
    }

    pub fn add_const(&self, c: f64) -> LinExpr {
        LinExpr { terms: self.terms.clone(), constant: self.constant + c }
    }

    pub fn add_assign(&mut self, other: &LinExpr) {
        self.terms.extend_from_slice(&other.terms);
        self.constant += other.constant;
    }

    /// Merge duplicate variable indices and drop zero coefficients.
    pub fn normalized(&self) -> LinExpr {
        let mut terms = self.terms.clone();
        terms.sort_by_key(|&(i, _)| i);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
        for (i, c) in terms {
            match merged.last_mut() {
                Some(&mut (j, ref mut acc)) if j == i => *acc += c,
                _ => merged.push((i, c)),
            }
        }
        merged.retain(|&(_, c)| c != 0.0);
        LinExpr { terms: merged, constant: self.constant }
    }

    /// Evaluate at a point.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>() + self.constant
    }
}

/// Dense matrix of affine expressions, row-major. Column vectors are `n×1`.
#[derive(Debug, Clone)]
pub struct AffMat {
    pub rows: usize,
    pub cols: usize,
    entries: Vec<LinExpr>,
}

impl AffMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        AffMat { rows, cols, entries: vec![LinExpr::default(); rows * cols] }
    }

    pub fn from_entries(rows: usize, cols: usize, entries: Vec<LinExpr>) -> Self {
        assert_eq!(entries.len(), rows * cols);
        AffMat { rows, cols, entries }
    }

    pub fn from_const(m: &DMatrix<f64>) -> Self {
        let entries = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| (i, j)))
            .map(|(i, j)| LinExpr::constant(m[(i, j)]))
            .collect();
        AffMat { rows: m.nrows(), cols: m.ncols(), entries }
    }

    pub fn from_const_vec(v: &DVector<f64>) -> Self {
        AffMat {
            rows: v.len(),
            cols: 1,
            entries: v.iter().map(|&c| LinExpr::constant(c)).collect(),
        }
    }

    /// Matrix with entries `c[i,j] · e` for a shared scalar expression.
    pub fn scaled_const(c: &DMatrix<f64>, e: &LinExpr) -> Self {
        let entries = (0..c.nrows())
            .flat_map(|i| (0..c.ncols()).map(move |j| (i, j)))
            .map(|(i, j)| e.scale(c[(i, j)]))
            .collect();
        AffMat { rows: c.nrows(), cols: c.ncols(), entries }
    }

    /// Column vector with entries `v[i] · e` for a shared scalar expression.
    pub fn scaled_const_vec(v: &DVector<f64>, e: &LinExpr) -> Self {
        AffMat {
            rows: v.len(),
            cols: 1,
            entries: v.iter().map(|&c| e.scale(c)).collect(),
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> &LinExpr {
        &self.entries[i * self.cols + j]
    }

    pub fn entry_mut(&mut self, i: usize, j: usize) -> &mut LinExpr {
        &mut self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, e: LinExpr) {
        self.entries[i * self.cols + j] = e;
    }

    pub fn add(&self, other: &AffMat) -> AffMat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.add(b))
            .collect();
        AffMat { rows: self.rows, cols: self.cols, entries }
    }

    pub fn sub(&self, other: &AffMat) -> AffMat {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, k: f64) -> AffMat {
        AffMat {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|e| e.scale(k)).collect(),
        }
    }

    pub fn transpose(&self) -> AffMat {
        let mut out = AffMat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.entry(i, j).clone());
            }
        }
        out
    }

    /// Symmetric part `(X + Xᵀ)/2`; requires a square matrix.
    pub fn symmetrized(&self) -> AffMat {
        assert_eq!(self.rows, self.cols);
        self.add(&self.transpose()).scale(0.5)
    }

    /// Left-multiply by a constant matrix: `C · X`.
    pub fn lmul(&self, c: &DMatrix<f64>) -> AffMat {
        assert_eq!(c.ncols(), self.rows);
        let mut out = AffMat::zeros(c.nrows(), self.cols);
        for i in 0..c.nrows() {
            for j in 0..self.cols {
                let mut e = LinExpr::default();
                for t in 0..self.rows {
                    let coef = c[(i, t)];
                    if coef != 0.0 {
                        e.add_assign(&self.entry(t, j).scale(coef));
                    }
                }
                out.set(i, j, e);
            }
        }
        out
    }

    /// Right-multiply by a constant matrix: `X · C`.
    pub fn rmul(&self, c: &DMatrix<f64>) -> AffMat {
        assert_eq!(self.cols, c.nrows());
        let mut out = AffMat::zeros(self.rows, c.ncols());
        for i in 0..self.rows {
            for j in 0..c.ncols() {
                let mut e = LinExpr::default();
                for t in 0..self.cols {
                    let coef = c[(t, j)];
                    if coef != 0.0 {
                        e.add_assign(&self.entry(i, t).scale(coef));
                    }
                }
                out.set(i, j, e);
            }
        }
        out
    }

    /// `tr(C · X)` as a scalar expression (`C` constant, `X` affine).
    pub fn trace_lmul(&self, c: &DMatrix<f64>) -> LinExpr {
        assert_eq!(c.ncols(), self.rows);
        assert_eq!(c.nrows(), self.cols);
        let mut e = LinExpr::default();
        for i in 0..c.nrows() {
            for t in 0..self.rows {
                let coef = c[(i, t)];
                if coef != 0.0 {
                    e.add_assign(&self.entry(t, i).scale(coef));
                }
            }
        }
        e
    }

    /// `cᵀ · v` for a constant vector and an affine column vector.
    pub fn dot(&self, c: &DVector<f64>) -> LinExpr {
        assert_eq!(self.cols, 1);
        assert_eq!(self.rows, c.len());
        let mut e = LinExpr::default();
        for i in 0..self.rows {
            if c[i] != 0.0 {
                e.add_assign(&self.entry(i, 0).scale(c[i]));
            }
        }
        e
    }

    /// Flatten in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = &LinExpr> {
        self.entries.iter()
    }

    /// Stack two matrices with equal column counts vertically.
    pub fn vstack(&self, other: &AffMat) -> AffMat {
        assert_eq!(self.cols, other.cols);
        let mut entries = self.entries.clone();
        entries.extend(other.entries.iter().cloned());
        AffMat { rows: self.rows + other.rows, cols: self.cols, entries }
    }

    pub fn into_scalar(mut self) -> LinExpr {
        assert_eq!(self.rows * self.cols, 1);
        self.entries.pop().unwrap()
    }
}
