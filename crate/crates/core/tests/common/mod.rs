//! Independent dense oracles shared by the integration tests.

#![allow(dead_code)]

use msgfem::assembly::AssembledSystem;
use msgfem::la::{CsrMatrix, DenseMatrix};
use msgfem::msgfem::{CoarseSpace, LocalStage};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type Dense = Vec<Vec<f64>>;

/// Cyclic Jacobi eigensolver for a symmetric matrix. Eigenvalues ascending,
/// eigenvectors as the columns of the returned matrix.
pub fn jacobi_eig(a: &Dense) -> (Vec<f64>, Dense) {
    let n = a.len();
    let mut a = a.clone();
    let mut v: Dense = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        let diag: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum();
        if off <= 1e-30 * diag.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| a[i][i].total_cmp(&a[j][j]));
    let vals = idx.iter().map(|&i| a[i][i]).collect();
    let vecs = (0..n).map(|r| idx.iter().map(|&i| v[r][i]).collect()).collect();
    (vals, vecs)
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let (n, k, m) = (a.len(), b.len(), b.first().map_or(0, |r| r.len()));
    let mut c = vec![vec![0.0; m]; n];
    for i in 0..n {
        for l in 0..k {
            let x = a[i][l];
            if x != 0.0 {
                for j in 0..m {
                    c[i][j] += x * b[l][j];
                }
            }
        }
    }
    c
}

pub fn transpose(a: &Dense) -> Dense {
    let m = a.first().map_or(0, |r| r.len());
    (0..m).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

/// Eigenvalues of `B x = lambda S x`, descending, through `S^{-1/2}`.
pub fn brute_gen_eig(b: &Dense, s: &Dense) -> Vec<f64> {
    let (d, v) = jacobi_eig(s);
    let n = d.len();
    let w: Dense = (0..n).map(|i| (0..n).map(|j| v[i][j] / d[j].sqrt()).collect()).collect();
    let half = matmul(&w, &transpose(&v));
    let mut c = matmul(&matmul(&half, b), &half);
    for i in 0..n {
        for j in 0..i {
            let m = 0.5 * (c[i][j] + c[j][i]);
            c[i][j] = m;
            c[j][i] = m;
        }
    }
    let mut vals = jacobi_eig(&c).0;
    vals.reverse();
    vals
}

pub fn to_dense_matrix(a: &Dense) -> DenseMatrix {
    DenseMatrix::from_rows(a).unwrap()
}

/// `Q diag(d) Q^T` with `Q` from Gram-Schmidt on a random matrix.
pub fn random_sym(rng: &mut ChaCha8Rng, d: &[f64]) -> Dense {
    let n = d.len();
    let mut q: Dense = Vec::with_capacity(n);
    while q.len() < n {
        let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for _ in 0..2 {
            for p in &q {
                let c: f64 = p.iter().zip(&x).map(|(a, b)| a * b).sum();
                x.iter_mut().zip(p).for_each(|(a, b)| *a -= c * b);
            }
        }
        let nrm = x.iter().map(|a| a * a).sum::<f64>().sqrt();
        if nrm > 1e-8 {
            q.push(x.iter().map(|a| a / nrm).collect());
        }
    }
    let mut out = vec![vec![0.0; n]; n];
    for (k, p) in q.iter().enumerate() {
        for i in 0..n {
            for j in 0..n {
                out[i][j] += d[k] * p[i] * p[j];
            }
        }
    }
    out
}

pub fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Dense Cholesky solve of an SPD matrix, column by column.
pub fn dense_inverse(a: &Dense) -> Dense {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for j in 0..n {
        let mut d = a[j][j];
        for k in 0..j {
            d -= l[j][k] * l[j][k];
        }
        assert!(d > 0.0, "matrix is not positive definite at column {j}");
        let d = d.sqrt();
        l[j][j] = d;
        for i in (j + 1)..n {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            l[i][j] = s / d;
        }
    }
    let mut inv = vec![vec![0.0; n]; n];
    for c in 0..n {
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = if i == c { 1.0 } else { 0.0 };
            for k in 0..i {
                s -= l[i][k] * y[k];
            }
            y[i] = s / l[i][i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= l[k][i] * y[k];
            }
            y[i] = s / l[i][i];
        }
        for i in 0..n {
            inv[i][c] = y[i];
        }
    }
    inv
}

/// Dense two-level RAS operator assembled from first principles:
/// `B1 = sum_j R_j^T Xi_j A~_j^{-1} R~_j` and, when a coarse space is
/// given, `B = B1 + P A_H^{-1} P^T (I - A B1)` with `P` the coarse basis.
pub fn dense_preconditioner(sys: &AssembledSystem, stage: &LocalStage, coarse: Option<&CoarseSpace>) -> Dense {
    let a = &sys.matrix;
    let n = a.nrows();
    let ad = a.to_dense();
    let mut b1 = vec![vec![0.0; n]; n];
    for sub in &stage.decomposition.subdomains {
        let int = &sub.star_interior;
        let local: Dense = int.iter().map(|&r| int.iter().map(|&c| ad[r][c]).collect()).collect();
        let inv = dense_inverse(&local);
        for (k, &d) in sub.omega_dofs.iter().enumerate() {
            let w = sub.pou_scale[k];
            if w == 0.0 {
                continue;
            }
            let p = sub.omega_in_star[k];
            assert!(p < int.len(), "weighted DOF outside the oversampling interior");
            for (q, &c) in int.iter().enumerate() {
                b1[d][c] += w * inv[p][q];
            }
        }
    }
    let Some(coarse) = coarse else { return b1 };
    let dim = coarse.dim();
    if dim == 0 {
        return b1;
    }
    let mut p = vec![vec![0.0; dim]; n];
    let mut col = 0;
    for (red, &ns) in stage.reductions.iter().zip(&coarse.n_selected) {
        for q in 0..ns {
            for (r, &d) in red.basis_dofs.iter().enumerate() {
                p[d][col] = red.pou_basis[(r, q)];
            }
            col += 1;
        }
    }
    assert_eq!(col, dim);
    let ap = matmul(&ad, &p);
    let a_h = matmul(&transpose(&p), &ap);
    let a_h_inv = dense_inverse(&a_h);
    // I - A B1
    let mut res = matmul(&ad, &b1);
    for (i, row) in res.iter_mut().enumerate() {
        row.iter_mut().for_each(|x| *x = -*x);
        row[i] += 1.0;
    }
    let corr = matmul(&matmul(&p, &a_h_inv), &matmul(&transpose(&p), &res));
    for i in 0..n {
        for j in 0..n {
            b1[i][j] += corr[i][j];
        }
    }
    b1
}

pub fn max_abs(a: &Dense) -> f64 {
    a.iter().flatten().fold(0.0, |m, &x| m.max(x.abs()))
}

pub fn csr_dense(a: &CsrMatrix) -> Dense {
    a.to_dense()
}
