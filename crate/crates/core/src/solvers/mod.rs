//! Fine-scale solvers: sparse direct, one-shot MS-GFEM, Richardson and
//! GMRES with the MS-GFEM preconditioner.

pub mod iterative;
pub mod precond;

pub use iterative::{
    energy_distance, gmres, inner_product_registry, richardson, Energy, InnerProduct, IterOptions, IterationLog,
    IterationRecord, SolveOutcome, Termination, L2,
};
pub use precond::{Identity, LinearOperator, Preconditioner};

use std::time::Instant;

use crate::error::{Error, Result};
use crate::la::ordering::FillOrdering;
use crate::la::sparse::{norm2, CsrMatrix};
use crate::la::CholeskyFactor;
use crate::registry::{Named, Registry};

/// `u_h = A^{-1} f` by sparse Cholesky.
pub fn direct_solve(a: &CsrMatrix, f: &[f64], ordering: &dyn FillOrdering, pivot_tol: f64) -> Result<Vec<f64>> {
    if f.len() != a.nrows() {
        return Err(Error::Dimension(format!("right side of length {} for order {}", f.len(), a.nrows())));
    }
    let factor = CholeskyFactor::factor(a, ordering, pivot_tol)?;
    Ok(factor.solve(f))
}

/// Everything a fine solver may need; iterative solvers require `precond`.
pub struct SolveContext<'a> {
    pub a: &'a CsrMatrix,
    pub f: &'a [f64],
    pub u0: Option<&'a [f64]>,
    pub precond: Option<Preconditioner<'a>>,
    pub options: IterOptions<'a>,
    pub ordering: &'a dyn FillOrdering,
}

impl SolveContext<'_> {
    fn initial(&self) -> Vec<f64> {
        self.u0.map_or_else(|| vec![0.0; self.a.nrows()], <[f64]>::to_vec)
    }

    fn preconditioner(&self, who: &str) -> Result<&dyn LinearOperator> {
        self.precond
            .as_ref()
            .map(|p| p as &dyn LinearOperator)
            .ok_or_else(|| Error::config("solver", format!("`{who}` needs a preconditioner")))
    }
}

pub trait FineSolver: Named + Send + Sync {
    fn solve(&self, ctx: &SolveContext<'_>) -> Result<SolveOutcome>;
}

pub struct Direct;
pub struct OneShot;
pub struct Richardson;
pub struct Gmres;

impl Named for Direct {
    fn name(&self) -> &'static str {
        "direct"
    }
}

impl FineSolver for Direct {
    fn solve(&self, ctx: &SolveContext<'_>) -> Result<SolveOutcome> {
        let start = Instant::now();
        let u = direct_solve(ctx.a, ctx.f, ctx.ordering, ctx.options.tolerances.cholesky_pivot)?;
        let au = ctx.a.matvec(&u);
        let r: Vec<f64> = ctx.f.iter().zip(&au).map(|(x, y)| x - y).collect();
        let log = IterationLog {
            records: vec![IterationRecord {
                iteration: 0,
                residual: norm2(&r),
                energy_error: ctx.options.reference.map(|uh| energy_distance(ctx.a, &u, uh)),
                seconds: start.elapsed().as_secs_f64(),
            }],
        };
        Ok(SolveOutcome {
            u,
            log,
            status: Termination::Converged,
        })
    }
}

impl Named for OneShot {
    fn name(&self) -> &'static str {
        "msgfem"
    }
}

/// One-shot MS-GFEM: a single Richardson step from the initial guess, which
/// from zero is `u^p + R_H^T A_H^{-1} R_H (f - A u^p)`.
impl FineSolver for OneShot {
    fn solve(&self, ctx: &SolveContext<'_>) -> Result<SolveOutcome> {
        let mut opts = ctx.options;
        opts.max_iter = 1;
        opts.tol = 0.0;
        let out = richardson(ctx.a, ctx.preconditioner(self.name())?, ctx.f, &ctx.initial(), opts)?;
        Ok(SolveOutcome {
            status: Termination::Converged,
            ..out
        })
    }
}

impl Named for Richardson {
    fn name(&self) -> &'static str {
        "richardson"
    }
}

impl FineSolver for Richardson {
    fn solve(&self, ctx: &SolveContext<'_>) -> Result<SolveOutcome> {
        richardson(ctx.a, ctx.preconditioner(self.name())?, ctx.f, &ctx.initial(), ctx.options)
    }
}

impl Named for Gmres {
    fn name(&self) -> &'static str {
        "gmres"
    }
}

impl FineSolver for Gmres {
    fn solve(&self, ctx: &SolveContext<'_>) -> Result<SolveOutcome> {
        gmres(ctx.a, ctx.preconditioner(self.name())?, ctx.f, &ctx.initial(), ctx.options)
    }
}

pub fn default_registry() -> Registry<dyn FineSolver> {
    let mut r: Registry<dyn FineSolver> = Registry::new("solver");
    r.register(Box::new(Direct));
    r.register(Box::new(OneShot));
    r.register(Box::new(Richardson));
    r.register(Box::new(Gmres));
    r
}
