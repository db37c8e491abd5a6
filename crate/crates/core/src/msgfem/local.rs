//! Per-subdomain stage: the oversampled Dirichlet solver, the harmonic
//! Schur complement and the local spectral problem.

use crate::assembly::AssembledSystem;
use crate::decomp::{Decomposition, Subdomain};
use crate::error::{Error, Result};
use crate::la::dense::{gen_sym_eig, DenseMatrix};
use crate::la::ordering::FillOrdering;
use crate::la::sparse::CsrMatrix;
use crate::la::CholeskyFactor;
use crate::mesh::Mesh;
use crate::tolerances::Tolerances;

const NONE: usize = usize::MAX;

/// Factorized `A~_i` on the interior DOFs of `omega_i*`, plus the map from
/// its unknowns to the partition-of-unity weighted DOFs of `omega_i`.
#[derive(Debug, Clone)]
pub struct LocalSolver {
    pub subdomain: usize,
    pub factor: CholeskyFactor,
    /// `(global DOF, position in star_interior, weight)` for every DOF of
    /// `omega_i` with a nonzero partition-of-unity weight.
    pub pou_rows: Vec<(usize, usize, f64)>,
}

impl LocalSolver {
    pub fn build(
        system: &AssembledSystem,
        dec: &Decomposition,
        i: usize,
        ordering: &dyn FillOrdering,
        tol: &Tolerances,
    ) -> Result<LocalSolver> {
        let s = &dec.subdomains[i];
        let a = system.matrix.submatrix(&s.star_interior, &s.star_interior);
        let factor = CholeskyFactor::factor(&a, ordering, tol.cholesky_pivot)?;
        let n_int = s.star_interior.len();
        let mut pou_rows = Vec::new();
        for (k, &d) in s.omega_dofs.iter().enumerate() {
            let w = s.pou_scale[k];
            if w == 0.0 {
                continue;
            }
            let p = s.omega_in_star[k];
            if p == NONE || p >= n_int {
                return Err(Error::Decomposition(format!(
                    "DOF {d} of subdomain {i} carries weight {w} but is not interior to the oversampling domain"
                )));
            }
            pou_rows.push((d, p, w));
        }
        Ok(LocalSolver {
            subdomain: i,
            factor,
            pou_rows,
        })
    }

    /// `phi = A~_i^{-1} R~_i f`, on the interior DOFs of `omega_i*`.
    pub fn solve_star(&self, sub: &Subdomain, f: &[f64]) -> Vec<f64> {
        let mut x: Vec<f64> = sub.star_interior.iter().map(|&d| f[d]).collect();
        self.factor.solve_in_place(&mut x);
        x
    }

    /// Local particular function `u_i^p = phi|omega_i`, on `omega_dofs`.
    pub fn particular(&self, sub: &Subdomain, f: &[f64]) -> Vec<f64> {
        let phi = self.solve_star(sub, f);
        let n_int = sub.star_interior.len();
        sub.omega_in_star
            .iter()
            .map(|&p| if p < n_int { phi[p] } else { 0.0 })
            .collect()
    }
}

/// Local bilinear form `a_{omega*}` on the DOFs of `omega_i*`, ordered as
/// `star_interior ++ star_interface`, assembled from the element matrices of
/// the triangles in `omega_i*` only.
pub fn star_matrix(mesh: &Mesh, system: &AssembledSystem, sub: &Subdomain) -> Result<CsrMatrix> {
    local_matrix(mesh, system, &sub.star_elements, &star_positions(system, sub), sub.n_star())
}

fn star_positions(system: &AssembledSystem, sub: &Subdomain) -> Vec<usize> {
    let mut pos = vec![NONE; system.dofs.n_free()];
    for (k, &d) in sub.star_interior.iter().chain(&sub.star_interface).enumerate() {
        pos[d] = k;
    }
    pos
}

fn local_matrix(
    mesh: &Mesh,
    system: &AssembledSystem,
    elements: &[usize],
    pos: &[usize],
    n: usize,
) -> Result<CsrMatrix> {
    let mut t = Vec::with_capacity(9 * elements.len());
    for &k in elements {
        let te = mesh.triangle_edges()[k];
        let em = &system.elements[k];
        let loc = te.map(|(e, _)| system.dofs.dof(e).map_or(NONE, |d| pos[d]));
        for a in 0..3 {
            if loc[a] == NONE {
                continue;
            }
            for b in 0..3 {
                if loc[b] != NONE {
                    t.push((loc[a], loc[b], em[a][b]));
                }
            }
        }
    }
    CsrMatrix::from_triplets(n, n, t)
}

/// Harmonic extension operator and Schur complement of `omega_i*`.
#[derive(Debug, Clone)]
pub struct HarmonicSchur {
    /// `A_{Gamma I}` of the local form.
    pub a_gi: CsrMatrix,
    /// Schur complement on the interface.
    pub schur: DenseMatrix,
    /// `-A_II^{-1} A_{I Gamma}`: interior values of the extension of each
    /// interface unit vector.
    pub extension: DenseMatrix,
}

impl HarmonicSchur {
    pub fn build(mesh: &Mesh, system: &AssembledSystem, sub: &Subdomain, local: &LocalSolver) -> Result<Self> {
        let n_i = sub.star_interior.len();
        let n_g = sub.star_interface.len();
        let k = star_matrix(mesh, system, sub)?;
        let int: Vec<usize> = (0..n_i).collect();
        let gam: Vec<usize> = (n_i..n_i + n_g).collect();
        let a_gi = k.submatrix(&gam, &int);
        let a_gg = k.submatrix(&gam, &gam);
        // X = A_II^{-1} A_IG, column by column (A_IG = A_GI^T)
        let mut x = vec![0.0; n_i * n_g];
        for g in 0..n_g {
            for (c, v) in a_gi.row(g) {
                x[g * n_i + c] = v;
            }
        }
        local.factor.solve_many(&mut x, n_g);
        let mut schur = DenseMatrix::zeros(n_g, n_g);
        for g in 0..n_g {
            for (c, v) in a_gg.row(g) {
                schur[(g, c)] += v;
            }
        }
        for q in 0..n_g {
            let col = &x[q * n_i..(q + 1) * n_i];
            for g in 0..n_g {
                let s: f64 = a_gi.row(g).map(|(c, v)| v * col[c]).sum();
                schur[(g, q)] -= s;
            }
        }
        schur.symmetrize();
        x.iter_mut().for_each(|v| *v = -*v);
        let extension = DenseMatrix::from_column_major(n_i, n_g, x)?;
        Ok(Self { a_gi, schur, extension })
    }

    /// `E g` on `star_interior ++ star_interface`.
    pub fn extend(&self, g: &[f64]) -> Vec<f64> {
        let mut v = self.extension.matvec(g);
        v.extend_from_slice(g);
        v
    }
}

/// Eigenpairs of the local spectral problem of one subdomain.
#[derive(Debug, Clone)]
pub struct LocalReduction {
    pub subdomain: usize,
    /// All eigenvalues of the pencil, descending.
    pub eigenvalues: Vec<f64>,
    /// Interface values `g_j` of the leading eigenvectors, Schur-orthonormal.
    pub interface_vectors: DenseMatrix,
    /// Global DOFs carrying the weighted basis (rows of `pou_basis`).
    pub basis_dofs: Vec<usize>,
    /// `Xi_i (E g_j)|omega_i` on `basis_dofs`, one column per retained
    /// eigenvector.
    pub pou_basis: DenseMatrix,
}

impl LocalReduction {
    /// Solves `B g = lambda S g` with `S` the Schur complement of
    /// `a_{omega*}` and `B` the weighted energy on `omega_i`, keeping
    /// `n_keep` eigenvectors.
    pub fn build(
        mesh: &Mesh,
        system: &AssembledSystem,
        sub: &Subdomain,
        local: &LocalSolver,
        n_keep: usize,
    ) -> Result<Self> {
        let n_g = sub.star_interface.len();
        let basis_dofs: Vec<usize> = local.pou_rows.iter().map(|r| r.0).collect();
        if n_g == 0 {
            log::info!("subdomain {}: oversampling domain has no interface; skipping eigenproblem", sub.index);
            return Ok(Self {
                subdomain: sub.index,
                eigenvalues: Vec::new(),
                interface_vectors: DenseMatrix::zeros(0, 0),
                pou_basis: DenseMatrix::zeros(basis_dofs.len(), 0),
                basis_dofs,
            });
        }
        let hs = HarmonicSchur::build(mesh, system, sub, local)?;
        // M = Xi R_omega E: rows on the weighted DOFs of omega_i
        let nr = local.pou_rows.len();
        let mut m = DenseMatrix::zeros(nr, n_g);
        for (r, &(_, p, w)) in local.pou_rows.iter().enumerate() {
            for q in 0..n_g {
                m[(r, q)] = w * hs.extension[(p, q)];
            }
        }
        drop(hs.extension);
        let a_omega = system.matrix.submatrix(&basis_dofs, &basis_dofs);
        let mut am = DenseMatrix::zeros(nr, n_g);
        for q in 0..n_g {
            let y = a_omega.matvec(m.col(q));
            am.col_mut(q).copy_from_slice(&y);
        }
        let mut b = m.tr_matmul(&am);
        b.symmetrize();
        let eig = gen_sym_eig(&b, &hs.schur, n_g)?;
        let keep = n_keep.min(n_g);
        let mut vectors = eig.vectors;
        vectors.truncate_cols(keep);
        let pou_basis = m.matmul(&vectors);
        Ok(Self {
            subdomain: sub.index,
            eigenvalues: eig.values,
            interface_vectors: vectors,
            basis_dofs,
            pou_basis,
        })
    }

    /// `lambda_{n+1}` (zero past the end of the spectrum, clamped at zero
    /// against roundoff).
    pub fn lambda_after(&self, n: usize) -> f64 {
        self.eigenvalues.get(n).copied().unwrap_or(0.0).max(0.0)
    }

    pub fn n_vectors(&self) -> usize {
        self.pou_basis.ncols()
    }
}
