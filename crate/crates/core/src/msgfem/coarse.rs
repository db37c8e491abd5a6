//! Global coarse space assembled from the local eigenvectors.

use crate::error::Result;
use crate::la::dense::{DenseMatrix, PivotedCholesky};
use crate::la::sparse::CsrMatrix;
use crate::msgfem::local::LocalReduction;

/// How many eigenvectors each subdomain contributes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoarsePolicy {
    /// `n_i = min(n, available)`.
    Fixed(usize),
    /// Smallest `n_i` with `sqrt(lambda_{n_i+1}) <= tol`, capped by the
    /// number of stored eigenvectors.
    Tolerance(f64),
}

impl CoarsePolicy {
    pub fn select(&self, red: &LocalReduction) -> usize {
        let avail = red.n_vectors();
        match *self {
            CoarsePolicy::Fixed(n) => n.min(avail),
            CoarsePolicy::Tolerance(tol) => (0..=avail)
                .find(|&n| red.lambda_after(n).sqrt() <= tol)
                .unwrap_or(avail),
        }
    }
}

#[derive(Debug, Clone)]
struct Block {
    dofs: Vec<usize>,
    basis: DenseMatrix,
    offset: usize,
}

/// `R_H^T` as per-subdomain dense blocks, with `A_H = R_H A R_H^T` and its
/// pivoted factorization.
#[derive(Debug, Clone)]
pub struct CoarseSpace {
    blocks: Vec<Block>,
    /// Selected count per subdomain.
    pub n_selected: Vec<usize>,
    /// `lambda_{n_i+1}` per subdomain.
    pub next_lambda: Vec<f64>,
    pub a_h: DenseMatrix,
    factor: Option<PivotedCholesky>,
    n_fine: usize,
}

impl CoarseSpace {
    pub fn build(
        a: &CsrMatrix,
        reductions: &[LocalReduction],
        policy: CoarsePolicy,
        drop_tol: f64,
    ) -> Result<CoarseSpace> {
        let n_fine = a.nrows();
        let mut blocks = Vec::with_capacity(reductions.len());
        let mut n_selected = Vec::with_capacity(reductions.len());
        let mut next_lambda = Vec::with_capacity(reductions.len());
        let mut offset = 0;
        for red in reductions {
            let n = policy.select(red);
            n_selected.push(n);
            next_lambda.push(red.lambda_after(n));
            let mut basis = red.pou_basis.clone();
            basis.truncate_cols(n);
            blocks.push(Block {
                dofs: red.basis_dofs.clone(),
                basis,
                offset,
            });
            offset += n;
        }
        let dim = offset;
        let a_h = assemble_coarse(a, &blocks, dim);
        let factor = if dim > 0 {
            let f = PivotedCholesky::factor(&a_h, drop_tol)?;
            if !f.dropped.is_empty() {
                log::warn!(
                    "coarse matrix is rank deficient: dropped {} of {dim} basis vectors",
                    f.dropped.len()
                );
            }
            Some(f)
        } else {
            None
        };
        Ok(CoarseSpace {
            blocks,
            n_selected,
            next_lambda,
            a_h,
            factor,
            n_fine,
        })
    }

    pub fn dim(&self) -> usize {
        self.a_h.nrows()
    }

    /// Number of basis vectors dropped as linearly dependent.
    pub fn n_dropped(&self) -> usize {
        self.factor.as_ref().map_or(0, |f| f.dropped.len())
    }

    /// `R_H v`.
    pub fn restrict(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for b in &self.blocks {
            let local: Vec<f64> = b.dofs.iter().map(|&d| v[d]).collect();
            for q in 0..b.basis.ncols() {
                out[b.offset + q] = b.basis.col(q).iter().zip(&local).map(|(x, y)| x * y).sum();
            }
        }
        out
    }

    /// `R_H^T c`.
    pub fn prolong(&self, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_fine];
        for b in &self.blocks {
            for q in 0..b.basis.ncols() {
                let cq = c[b.offset + q];
                if cq == 0.0 {
                    continue;
                }
                for (&d, &x) in b.dofs.iter().zip(b.basis.col(q)) {
                    out[d] += cq * x;
                }
            }
        }
        out
    }

    /// `A_H^{-1} c` on the retained columns; dropped coefficients are zero.
    pub fn solve(&self, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        if let Some(f) = &self.factor {
            let rhs: Vec<f64> = f.kept.iter().map(|&k| c[k]).collect();
            let x = f.factor.solve(&rhs);
            for (&k, v) in f.kept.iter().zip(x) {
                out[k] = v;
            }
        }
        out
    }

    /// `R_H^T A_H^{-1} R_H r`.
    pub fn correction(&self, r: &[f64]) -> Vec<f64> {
        if self.dim() == 0 {
            return vec![0.0; self.n_fine];
        }
        self.prolong(&self.solve(&self.restrict(r)))
    }

    /// Global coarse basis vector `col`, for inspection.
    pub fn basis_vector(&self, col: usize) -> Vec<f64> {
        let mut c = vec![0.0; self.dim()];
        c[col] = 1.0;
        self.prolong(&c)
    }
}

fn assemble_coarse(a: &CsrMatrix, blocks: &[Block], dim: usize) -> DenseMatrix {
    let n = a.nrows();
    let mut a_h = DenseMatrix::zeros(dim, dim);
    let mut pos = vec![usize::MAX; n];
    for bi in blocks {
        let ni = bi.basis.ncols();
        if ni == 0 {
            continue;
        }
        // Y = A Phi_i on the rows reachable from the block support
        let mut rows: Vec<usize> = Vec::new();
        for &d in &bi.dofs {
            for (c, _) in a.row(d) {
                if pos[c] == usize::MAX {
                    pos[c] = 0;
                    rows.push(c);
                }
            }
        }
        rows.sort_unstable();
        for (k, &r) in rows.iter().enumerate() {
            pos[r] = k;
        }
        let mut y = DenseMatrix::zeros(rows.len(), ni);
        for q in 0..ni {
            let col = bi.basis.col(q);
            let yq = y.col_mut(q);
            // A symmetric: column d of A is row d
            for (&d, &x) in bi.dofs.iter().zip(col) {
                if x == 0.0 {
                    continue;
                }
                for (c, v) in a.row(d) {
                    yq[pos[c]] += v * x;
                }
            }
        }
        for bj in blocks {
            let nj = bj.basis.ncols();
            if nj == 0 {
                continue;
            }
            let common: Vec<(usize, usize)> = bj
                .dofs
                .iter()
                .enumerate()
                .filter(|(_, &d)| pos[d] != usize::MAX)
                .map(|(k, &d)| (k, pos[d]))
                .collect();
            if common.is_empty() {
                continue;
            }
            let mut pj = DenseMatrix::zeros(common.len(), nj);
            let mut yi = DenseMatrix::zeros(common.len(), ni);
            for (r, &(kj, ky)) in common.iter().enumerate() {
                for q in 0..nj {
                    pj[(r, q)] = bj.basis[(kj, q)];
                }
                for q in 0..ni {
                    yi[(r, q)] = y[(ky, q)];
                }
            }
            let blk = pj.tr_matmul(&yi);
            for q in 0..ni {
                for p in 0..nj {
                    a_h[(bj.offset + p, bi.offset + q)] = blk[(p, q)];
                }
            }
        }
        for &r in &rows {
            pos[r] = usize::MAX;
        }
    }
    a_h.symmetrize();
    a_h
}
