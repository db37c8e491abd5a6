//! Multiscale spectral generalized finite element method: local particular
//! solves, local spectral bases, the coarse space they span, and the
//! one-shot approximation with its computable error bound.

pub mod coarse;
pub mod local;
pub mod topology;

pub use coarse::{CoarsePolicy, CoarseSpace};
pub use local::{star_matrix, HarmonicSchur, LocalReduction, LocalSolver};
pub use topology::{detach_from_boundary, enclosed_holes, flat_prefix, harmonic_forms_dim, TopologyReport};

use rayon::prelude::*;

use crate::assembly::AssembledSystem;
use crate::decomp::Decomposition;
use crate::error::{Error, Result};
use crate::la::ordering::FillOrdering;
use crate::la::sparse::CsrMatrix;
use crate::mesh::Mesh;
use crate::tolerances::Tolerances;

/// Runs `f(i)` for every index on a pool of `workers` threads and returns
/// the results in index order.
pub fn run_indexed<T: Send>(
    workers: usize,
    n: usize,
    f: impl Fn(usize) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    if workers <= 1 {
        return (0..n).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Decomposition(format!("thread pool: {e}")))?;
    pool.install(|| (0..n).into_par_iter().map(f).collect())
}

/// Local solvers and (optionally) spectral reductions of every subdomain.
#[derive(Debug, Clone)]
pub struct LocalStage {
    pub decomposition: Decomposition,
    pub solvers: Vec<LocalSolver>,
    /// Empty when the stage was built without eigenproblems.
    pub reductions: Vec<LocalReduction>,
}

#[derive(Clone, Copy)]
pub struct StageOptions<'a> {
    /// Eigenvectors to keep per subdomain; `None` skips the eigenproblems.
    pub n_keep: Option<usize>,
    pub workers: usize,
    pub ordering: &'a dyn FillOrdering,
    pub tol: Tolerances,
}

impl LocalStage {
    pub fn build(
        mesh: &Mesh,
        system: &AssembledSystem,
        decomposition: Decomposition,
        opts: StageOptions<'_>,
    ) -> Result<LocalStage> {
        let dec = &decomposition;
        let pairs = run_indexed(opts.workers, dec.len(), |i| {
            let solver = LocalSolver::build(system, dec, i, opts.ordering, &opts.tol)?;
            let red = match opts.n_keep {
                Some(k) => Some(LocalReduction::build(mesh, system, &dec.subdomains[i], &solver, k)?),
                None => None,
            };
            log::debug!("subdomain {i}: local stage done");
            Ok((solver, red))
        })?;
        let mut solvers = Vec::with_capacity(pairs.len());
        let mut reductions = Vec::new();
        for (s, r) in pairs {
            solvers.push(s);
            if let Some(r) = r {
                reductions.push(r);
            }
        }
        Ok(LocalStage {
            decomposition,
            solvers,
            reductions,
        })
    }

    /// One-level restricted additive Schwarz:
    /// `sum_j R_j^T Xi_j A~_j^{-1} R~_j r`.
    pub fn one_level(&self, r: &[f64], workers: usize) -> Result<Vec<f64>> {
        let dec = &self.decomposition;
        if r.len() != dec.n_dofs() {
            return Err(Error::Dimension(format!(
                "residual of length {} for {} DOFs",
                r.len(),
                dec.n_dofs()
            )));
        }
        let parts = run_indexed(workers, self.solvers.len(), |j| {
            let sub = &dec.subdomains[j];
            let phi = self.solvers[j].solve_star(sub, r);
            Ok(self.solvers[j].pou_rows.iter().map(|&(_, p, w)| w * phi[p]).collect::<Vec<f64>>())
        })?;
        let mut z = vec![0.0; r.len()];
        for (s, part) in self.solvers.iter().zip(parts) {
            for (&(d, _, _), v) in s.pou_rows.iter().zip(part) {
                z[d] += v;
            }
        }
        Ok(z)
    }

    /// Global particular function `u^p = sum_i R_i^T Xi_i u_i^p`.
    pub fn particular(&self, f: &[f64], workers: usize) -> Result<Vec<f64>> {
        self.one_level(f, workers)
    }

    /// `Lambda = sqrt(k0 k0* max_i lambda^i_{n_i+1})`.
    pub fn lambda_bound(&self, coarse: &CoarseSpace) -> f64 {
        lambda_bound(&coarse.next_lambda, self.decomposition.k0, self.decomposition.k0_star)
    }
}

pub fn lambda_bound(next_lambda: &[f64], k0: usize, k0_star: usize) -> f64 {
    let m = next_lambda.iter().fold(0.0f64, |m, &l| m.max(l.max(0.0)));
    ((k0 * k0_star) as f64 * m).sqrt()
}

/// One-shot MS-GFEM: `u^G = u^p + u^s` with `u^s` the Galerkin
/// approximation of `u_h - u^p` in the coarse space.
pub fn approximate(
    a: &CsrMatrix,
    stage: &LocalStage,
    coarse: &CoarseSpace,
    f: &[f64],
    workers: usize,
) -> Result<Vec<f64>> {
    let up = stage.particular(f, workers)?;
    let aup = a.matvec(&up);
    let res: Vec<f64> = f.iter().zip(&aup).map(|(x, y)| x - y).collect();
    let us = coarse.correction(&res);
    Ok(up.iter().zip(&us).map(|(a, b)| a + b).collect())
}

/// Least-squares slope of `ln sqrt(lambda_k)` against `k` over
/// `k in [k_lo, k_hi]` (1-based, clipped to the positive eigenvalues
/// available). `None` with fewer than two points.
pub fn decay_slope(eigenvalues: &[f64], k_lo: usize, k_hi: usize) -> Option<f64> {
    let pts: Vec<(f64, f64)> = (k_lo.max(1)..=k_hi)
        .filter_map(|k| eigenvalues.get(k - 1).filter(|&&l| l > 0.0).map(|&l| (k as f64, 0.5 * l.ln())))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproximationReport {
    pub error: f64,
    pub reference_norm: f64,
    pub relative_error: f64,
    pub lambda: f64,
}

impl ApproximationReport {
    pub fn new(a: &CsrMatrix, u_h: &[f64], u_g: &[f64], lambda: f64) -> Self {
        let diff: Vec<f64> = u_h.iter().zip(u_g).map(|(x, y)| x - y).collect();
        let error = a.bilinear(&diff, &diff).max(0.0).sqrt();
        let reference_norm = a.bilinear(u_h, u_h).max(0.0).sqrt();
        let relative_error = if reference_norm > 0.0 { error / reference_norm } else { error };
        Self {
            error,
            reference_norm,
            relative_error,
            lambda,
        }
    }

    pub fn bound_holds(&self) -> bool {
        self.relative_error <= self.lambda + Tolerances::DEFAULT.bound_roundoff
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decay_slope_of_geometric_sequence() {
        // sqrt(lambda_k) = 2^{-k}
        let ev: Vec<f64> = (1..=50).map(|k| 4f64.powi(-k)).collect();
        let s = decay_slope(&ev, 5, 40).unwrap();
        assert!((s + 2f64.ln()).abs() < 1e-12);
        assert_eq!(decay_slope(&[1.0], 1, 40), None);
    }
}
