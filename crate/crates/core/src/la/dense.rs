//! Column-major dense matrices and the symmetric kernels built on them.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_column_major(nrows: usize, ncols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != nrows * ncols {
            return Err(Error::Dimension(format!(
                "{} values for a {nrows}x{ncols} matrix",
                data.len()
            )));
        }
        Ok(Self { nrows, ncols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut m = Self::zeros(nrows, ncols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != ncols {
                return Err(Error::Dimension("ragged rows".into()));
            }
            for (j, &v) in r.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        Ok(m)
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.ncols, self.nrows);
        for j in 0..self.ncols {
            for i in 0..self.nrows {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// Keeps the first `k` columns.
    pub fn truncate_cols(&mut self, k: usize) {
        let k = k.min(self.ncols);
        self.data.truncate(k * self.nrows);
        self.ncols = k;
    }

    pub fn select_cols(&self, cols: &[usize]) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.nrows, cols.len());
        for (k, &c) in cols.iter().enumerate() {
            out.col_mut(k).copy_from_slice(self.col(c));
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![0.0; self.nrows];
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                for (yi, aij) in y.iter_mut().zip(self.col(j)) {
                    *yi += aij * xj;
                }
            }
        }
        y
    }

    /// `A^T x`.
    pub fn tr_matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        (0..self.ncols)
            .map(|j| self.col(j).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `self * other`.
    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        gemm(self, false, other, false)
    }

    /// `self^T * other`.
    pub fn tr_matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        gemm(self, true, other, false)
    }

    pub fn symmetrize(&mut self) {
        assert_eq!(self.nrows, self.ncols);
        for j in 0..self.ncols {
            for i in (j + 1)..self.nrows {
                let v = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = v;
                self[(j, i)] = v;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Frobenius norm.
    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[j * self.nrows + i]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[j * self.nrows + i]
    }
}

fn gemm(a: &DenseMatrix, ta: bool, b: &DenseMatrix, tb: bool) -> DenseMatrix {
    let (m, k) = if ta { (a.ncols, a.nrows) } else { (a.nrows, a.ncols) };
    let (k2, n) = if tb { (b.ncols, b.nrows) } else { (b.nrows, b.ncols) };
    assert_eq!(k, k2, "inner dimensions differ");
    let mut c = DenseMatrix::zeros(m, n);
    if m == 0 || n == 0 || k == 0 {
        return c;
    }
    // column-major (i, j) lives at i + j * nrows: row stride 1, column stride nrows
    let (rsa, csa) = if ta { (a.nrows as isize, 1) } else { (1, a.nrows as isize) };
    let (rsb, csb) = if tb { (b.nrows as isize, 1) } else { (1, b.nrows as isize) };
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            0.0,
            c.data.as_mut_ptr(),
            1,
            m as isize,
        );
    }
    c
}

/// Dense Cholesky factor `A = L L^T`, lower triangle stored.
#[derive(Debug, Clone)]
pub struct DenseCholesky {
    l: DenseMatrix,
}

impl DenseCholesky {
    pub fn factor(a: &DenseMatrix, rel_pivot: f64) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension("Cholesky of a non-square matrix".into()));
        }
        let scale = (0..n).fold(0.0f64, |m, i| m.max(a[(i, i)].abs()));
        let mut l = a.clone();
        for j in 0..n {
            let mut d = l[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > rel_pivot * scale) || !d.is_finite() {
                return Err(Error::NotSpd { index: j, value: d });
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for k in 0..j {
                let ljk = l[(j, k)];
                if ljk != 0.0 {
                    for i in (j + 1)..n {
                        let lik = l[(i, k)];
                        l[(i, j)] -= lik * ljk;
                    }
                }
            }
            for i in (j + 1)..n {
                l[(i, j)] /= d;
            }
        }
        for j in 0..n {
            for i in 0..j {
                l[(i, j)] = 0.0;
            }
        }
        Ok(Self { l })
    }

    pub fn l(&self) -> &DenseMatrix {
        &self.l
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    /// Overwrites `b` with `L^{-1} b`.
    pub fn forward(&self, b: &mut [f64]) {
        let n = self.dim();
        for j in 0..n {
            b[j] /= self.l[(j, j)];
            let bj = b[j];
            if bj != 0.0 {
                let col = self.l.col(j);
                for i in (j + 1)..n {
                    b[i] -= col[i] * bj;
                }
            }
        }
    }

    /// Overwrites `b` with `L^{-T} b`.
    pub fn backward(&self, b: &mut [f64]) {
        let n = self.dim();
        for j in (0..n).rev() {
            let col = self.l.col(j);
            let mut s = b[j];
            for i in (j + 1)..n {
                s -= col[i] * b[i];
            }
            b[j] = s / col[j];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.forward(&mut x);
        self.backward(&mut x);
        x
    }
}

/// Result of a diagonally pivoted Cholesky factorization of a positive
/// semidefinite matrix, truncated once the remaining pivots fall under
/// `rel_tol` times the original diagonal entry of their column.
#[derive(Debug, Clone)]
pub struct PivotedCholesky {
    /// Columns kept, in pivot order.
    pub kept: Vec<usize>,
    /// Columns dropped as numerically dependent.
    pub dropped: Vec<usize>,
    /// Cholesky factor of the kept principal submatrix (in `kept` order).
    pub factor: DenseCholesky,
}

impl PivotedCholesky {
    pub fn factor(a: &DenseMatrix, rel_tol: f64) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension("pivoted Cholesky of a non-square matrix".into()));
        }
        // pivots are compared with each column's own diagonal, so the drop
        // test does not depend on how the columns are scaled
        let scale: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
        let mut w = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut rank = 0;
        for j in 0..n {
            let mut best = j;
            let mut best_val = f64::NEG_INFINITY;
            for i in j..n {
                let s = scale[perm[i]];
                let v = if s > 0.0 { w[(i, i)] / s } else { f64::NEG_INFINITY };
                if v > best_val {
                    best_val = v;
                    best = i;
                }
            }
            if !(best_val > rel_tol) {
                break;
            }
            swap_sym(&mut w, j, best);
            perm.swap(j, best);
            let d = w[(j, j)].sqrt();
            w[(j, j)] = d;
            for i in (j + 1)..n {
                w[(i, j)] /= d;
            }
            for k in (j + 1)..n {
                let lkj = w[(k, j)];
                for i in k..n {
                    let v = w[(i, j)] * lkj;
                    w[(i, k)] -= v;
                }
                // keep the strictly upper part consistent for later swaps
                for i in k..n {
                    w[(k, i)] = w[(i, k)];
                }
            }
            rank += 1;
        }
        let kept: Vec<usize> = perm[..rank].to_vec();
        let mut dropped: Vec<usize> = perm[rank..].to_vec();
        dropped.sort_unstable();
        let sub = principal_submatrix(a, &kept);
        let factor = DenseCholesky::factor(&sub, 0.0)?;
        Ok(Self {
            kept,
            dropped,
            factor,
        })
    }
}

fn swap_sym(w: &mut DenseMatrix, a: usize, b: usize) {
    if a == b {
        return;
    }
    let n = w.nrows();
    for k in 0..n {
        let t = w[(a, k)];
        w[(a, k)] = w[(b, k)];
        w[(b, k)] = t;
    }
    for k in 0..n {
        let t = w[(k, a)];
        w[(k, a)] = w[(k, b)];
        w[(k, b)] = t;
    }
}

pub fn principal_submatrix(a: &DenseMatrix, idx: &[usize]) -> DenseMatrix {
    let mut s = DenseMatrix::zeros(idx.len(), idx.len());
    for (q, &j) in idx.iter().enumerate() {
        for (p, &i) in idx.iter().enumerate() {
            s[(p, q)] = a[(i, j)];
        }
    }
    s
}

/// Full eigendecomposition of a symmetric matrix: Householder
/// tridiagonalization followed by the implicit QL iteration. Eigenvalues are
/// returned in ascending order with orthonormal eigenvectors as columns.
pub fn sym_eig(a: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension("eigendecomposition of a non-square matrix".into()));
    }
    if n == 0 {
        return Ok((Vec::new(), DenseMatrix::zeros(0, 0)));
    }
    let mut v = a.clone();
    v.symmetrize();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(&mut v, &mut d, &mut e);
    implicit_ql(&mut v, &mut d, &mut e)?;
    Ok((d, v))
}

fn tridiagonalize(v: &mut DenseMatrix, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
                v[(j, i)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[(j, i)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in (j + 1)..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                let col = v.col_mut(j);
                for k in j..i {
                    col[k] -= f * e[k] + g * d[k];
                }
                d[j] = col[i - 1];
                col[i] = 0.0;
            }
        }
        d[i] = h;
    }
    // accumulate the orthogonal transformation
    for i in 0..(n - 1) {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                let col = v.col_mut(j);
                for k in 0..=i {
                    col[k] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = 0.0;
    }
    v[(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

fn implicit_ql(v: &mut DenseMatrix, d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m == n {
            m = n - 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 60 {
                    return Err(Error::Dimension(
                        "implicit QL iteration did not converge".into(),
                    ));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let nr = v.nrows();
                    let data = v.as_mut_slice();
                    let (lo, hi) = data.split_at_mut((i + 1) * nr);
                    let ci = &mut lo[i * nr..];
                    let ci1 = &mut hi[..nr];
                    for k in 0..nr {
                        let hk = ci1[k];
                        ci1[k] = s * ci[k] + c * hk;
                        ci[k] = c * ci[k] - s * hk;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    // selection sort keeps the pairing with eigenvector columns
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        let mut p = d[i];
        for (j, &dj) in d.iter().enumerate().skip(i + 1) {
            if dj < p {
                k = j;
                p = dj;
            }
        }
        if k != i {
            d.swap(i, k);
            let nr = v.nrows();
            let data = v.as_mut_slice();
            for r in 0..nr {
                data.swap(i * nr + r, k * nr + r);
            }
        }
    }
    Ok(())
}

/// Eigenpairs of the symmetric-definite pencil `B x = lambda S x`.
#[derive(Debug, Clone)]
pub struct GenEigen {
    /// Descending.
    pub values: Vec<f64>,
    /// `S`-orthonormal eigenvectors as columns, matching `values`.
    pub vectors: DenseMatrix,
}

/// The `k` largest eigenpairs of `B x = lambda S x` with `S` symmetric
/// positive definite. `S = L L^T` reduces the pencil to the standard problem
/// for `L^{-1} B L^{-T}`, which is solved in full.
pub fn gen_sym_eig(b: &DenseMatrix, s: &DenseMatrix, k: usize) -> Result<GenEigen> {
    let n = b.nrows();
    if b.ncols() != n || s.nrows() != n || s.ncols() != n {
        return Err(Error::Dimension(format!(
            "pencil sizes {}x{} and {}x{}",
            b.nrows(),
            b.ncols(),
            s.nrows(),
            s.ncols()
        )));
    }
    let k = if k > n {
        log::warn!("requested {k} eigenpairs of a pencil of dimension {n}; clamping");
        n
    } else {
        k
    };
    let chol = DenseCholesky::factor(s, 0.0)?;
    // W = L^{-1} B, then C = L^{-1} W^T = L^{-1} B L^{-T}
    let mut w = b.clone();
    for j in 0..n {
        chol.forward(w.col_mut(j));
    }
    let mut c = w.transpose();
    for j in 0..n {
        chol.forward(c.col_mut(j));
    }
    c.symmetrize();
    let (vals, vecs) = sym_eig(&c)?;
    let mut values = Vec::with_capacity(k);
    let mut vectors = DenseMatrix::zeros(n, k);
    for (out, idx) in (0..n).rev().take(k).enumerate() {
        values.push(vals[idx]);
        let col = vectors.col_mut(out);
        col.copy_from_slice(vecs.col(idx));
        chol.backward(col);
    }
    Ok(GenEigen { values, vectors })
}
