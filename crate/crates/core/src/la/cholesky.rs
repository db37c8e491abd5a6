//! Up-looking sparse Cholesky factorization `P A P^T = L L^T`.
//!
//! The symbolic phase walks the elimination tree once to size every column
//! of `L`; the numeric phase computes one row of `L` per step with a sparse
//! triangular solve whose pattern comes from the same tree.

use crate::error::{Error, Result};
use crate::la::ordering::{FillOrdering, Graph};
use crate::la::sparse::CsrMatrix;

const NONE: usize = usize::MAX;

#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    n: usize,
    /// `perm[new] = old`.
    perm: Vec<usize>,
    /// Column pointers of `L` (CSC), diagonal stored first in each column.
    lp: Vec<usize>,
    li: Vec<u32>,
    lx: Vec<f64>,
}

impl CholeskyFactor {
    /// Factors a symmetric positive definite matrix. `rel_pivot` is the
    /// fraction of the largest diagonal entry a pivot has to exceed.
    pub fn factor(a: &CsrMatrix, ordering: &dyn FillOrdering, rel_pivot: f64) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension("Cholesky of a non-square matrix".into()));
        }
        let perm = ordering.order(&Graph::from_matrix(a));
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        // lower part of the permuted matrix, by row: C(k, j) with j <= k
        let mut cp = vec![0usize; n + 1];
        for (old, &k) in inv.iter().enumerate() {
            cp[k + 1] = a.row(old).filter(|&(j, _)| inv[j] <= k).count();
        }
        for k in 0..n {
            cp[k + 1] += cp[k];
        }
        let mut ci = vec![0usize; cp[n]];
        let mut cx = vec![0.0; cp[n]];
        for (old, &k) in inv.iter().enumerate() {
            let mut p = cp[k];
            for (j, v) in a.row(old) {
                let jn = inv[j];
                if jn <= k {
                    ci[p] = jn;
                    cx[p] = v;
                    p += 1;
                }
            }
        }
        let scale = a.diagonal().iter().fold(0.0f64, |m, d| m.max(d.abs()));

        let parent = etree(n, &cp, &ci);
        let mut mark = vec![NONE; n];
        let mut stack = vec![0usize; n];
        let mut path = vec![0usize; n];

        let mut counts = vec![1usize; n];
        for k in 0..n {
            let top = ereach(k, &cp, &ci, &parent, &mut mark, &mut stack, &mut path);
            for &j in &stack[top..] {
                counts[j] += 1;
            }
        }
        let mut lp = vec![0usize; n + 1];
        for j in 0..n {
            lp[j + 1] = lp[j] + counts[j];
        }
        let nnz = lp[n];
        let mut li = vec![0u32; nnz];
        let mut lx = vec![0.0; nnz];
        let mut next: Vec<usize> = lp[..n].to_vec();
        mark.iter_mut().for_each(|m| *m = NONE);
        let mut x = vec![0.0; n];
        for k in 0..n {
            let top = ereach(k, &cp, &ci, &parent, &mut mark, &mut stack, &mut path);
            for p in cp[k]..cp[k + 1] {
                x[ci[p]] += cx[p];
            }
            let mut d = x[k];
            x[k] = 0.0;
            for &j in &stack[top..] {
                let lkj = x[j] / lx[lp[j]];
                x[j] = 0.0;
                for p in (lp[j] + 1)..next[j] {
                    x[li[p] as usize] -= lx[p] * lkj;
                }
                d -= lkj * lkj;
                li[next[j]] = k as u32;
                lx[next[j]] = lkj;
                next[j] += 1;
            }
            if !(d > rel_pivot * scale) || !d.is_finite() {
                return Err(Error::NotSpd {
                    index: perm[k],
                    value: d,
                });
            }
            li[next[k]] = k as u32;
            lx[next[k]] = d.sqrt();
            next[k] += 1;
        }
        Ok(Self { n, perm, lp, li, lx })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.lx.len()
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n, "right-hand side length");
        let mut y: Vec<f64> = self.perm.iter().map(|&o| b[o]).collect();
        for j in 0..self.n {
            let (s, e) = (self.lp[j], self.lp[j + 1]);
            y[j] /= self.lx[s];
            let yj = y[j];
            if yj != 0.0 {
                for p in (s + 1)..e {
                    y[self.li[p] as usize] -= self.lx[p] * yj;
                }
            }
        }
        for j in (0..self.n).rev() {
            let (s, e) = (self.lp[j], self.lp[j + 1]);
            let mut t = y[j];
            for p in (s + 1)..e {
                t -= self.lx[p] * y[self.li[p] as usize];
            }
            y[j] = t / self.lx[s];
        }
        for (new, &old) in self.perm.iter().enumerate() {
            b[old] = y[new];
        }
    }

    /// Solves for several right-hand sides at once. `rhs` holds `nrhs`
    /// contiguous vectors of length `dim()`; the factor is streamed once per
    /// block of columns rather than once per column.
    pub fn solve_many(&self, rhs: &mut [f64], nrhs: usize) {
        const BLOCK: usize = 16;
        let n = self.n;
        assert_eq!(rhs.len(), n * nrhs, "right-hand side block size");
        let mut y = vec![0.0; n * BLOCK];
        let mut c0 = 0;
        while c0 < nrhs {
            let nb = BLOCK.min(nrhs - c0);
            // interleave: y[i * nb + r]
            for r in 0..nb {
                let col = &rhs[(c0 + r) * n..(c0 + r + 1) * n];
                for (new, &old) in self.perm.iter().enumerate() {
                    y[new * nb + r] = col[old];
                }
            }
            let mut yj = [0.0; BLOCK];
            for j in 0..n {
                let (s, e) = (self.lp[j], self.lp[j + 1]);
                let d = self.lx[s];
                for r in 0..nb {
                    y[j * nb + r] /= d;
                    yj[r] = y[j * nb + r];
                }
                for p in (s + 1)..e {
                    let i = self.li[p] as usize;
                    let l = self.lx[p];
                    let row = &mut y[i * nb..i * nb + nb];
                    for r in 0..nb {
                        row[r] -= l * yj[r];
                    }
                }
            }
            for j in (0..n).rev() {
                let (s, e) = (self.lp[j], self.lp[j + 1]);
                let mut t = [0.0; BLOCK];
                t[..nb].copy_from_slice(&y[j * nb..j * nb + nb]);
                for p in (s + 1)..e {
                    let i = self.li[p] as usize;
                    let l = self.lx[p];
                    let row = &y[i * nb..i * nb + nb];
                    for r in 0..nb {
                        t[r] -= l * row[r];
                    }
                }
                let d = self.lx[s];
                for r in 0..nb {
                    y[j * nb + r] = t[r] / d;
                }
            }
            for r in 0..nb {
                let col = &mut rhs[(c0 + r) * n..(c0 + r + 1) * n];
                for (new, &old) in self.perm.iter().enumerate() {
                    col[old] = y[new * nb + r];
                }
            }
            c0 += nb;
        }
    }
}

/// Elimination tree from the row-wise lower pattern (`j < k` entries of row
/// `k`), with path compression through `ancestor`.
fn etree(n: usize, cp: &[usize], ci: &[usize]) -> Vec<usize> {
    let mut parent = vec![NONE; n];
    let mut ancestor = vec![NONE; n];
    for k in 0..n {
        for &j0 in &ci[cp[k]..cp[k + 1]] {
            let mut j = j0;
            while j != NONE && j < k {
                let next = ancestor[j];
                ancestor[j] = k;
                if next == NONE {
                    parent[j] = k;
                }
                j = next;
            }
        }
    }
    parent
}

/// Nonzero pattern of row `k` of `L` (excluding the diagonal), written to
/// `stack[top..]` in an order valid for the sparse triangular solve.
fn ereach(
    k: usize,
    cp: &[usize],
    ci: &[usize],
    parent: &[usize],
    mark: &mut [usize],
    stack: &mut [usize],
    path: &mut [usize],
) -> usize {
    let n = stack.len();
    let mut top = n;
    mark[k] = k;
    for &j0 in &ci[cp[k]..cp[k + 1]] {
        if j0 >= k {
            continue;
        }
        let mut len = 0;
        let mut j = j0;
        while mark[j] != k {
            path[len] = j;
            len += 1;
            mark[j] = k;
            j = parent[j];
        }
        while len > 0 {
            len -= 1;
            top -= 1;
            stack[top] = path[len];
        }
    }
    top
}
