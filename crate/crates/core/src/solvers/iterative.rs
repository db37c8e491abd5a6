//! Richardson iteration and full GMRES on the preconditioned system
//! `B A u = B f`.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::la::sparse::{dot, CsrMatrix};
use crate::registry::{Named, Registry};
use crate::solvers::precond::LinearOperator;
use crate::tolerances::Tolerances;

/// Inner product `<v, w> = (M v) . w` used for residual norms and Arnoldi
/// orthogonalization.
pub trait InnerProduct: Named + Send + Sync {
    /// `M v`.
    fn metric(&self, a: &CsrMatrix, v: &[f64]) -> Vec<f64>;

    fn norm(&self, a: &CsrMatrix, v: &[f64]) -> f64 {
        dot(&self.metric(a, v), v).max(0.0).sqrt()
    }
}

pub struct L2;
pub struct Energy;

impl Named for L2 {
    fn name(&self) -> &'static str {
        "l2"
    }
}

impl InnerProduct for L2 {
    fn metric(&self, _a: &CsrMatrix, v: &[f64]) -> Vec<f64> {
        v.to_vec()
    }
}

impl Named for Energy {
    fn name(&self) -> &'static str {
        "energy"
    }
}

impl InnerProduct for Energy {
    fn metric(&self, a: &CsrMatrix, v: &[f64]) -> Vec<f64> {
        a.matvec(v)
    }
}

pub fn inner_product_registry() -> Registry<dyn InnerProduct> {
    let mut r: Registry<dyn InnerProduct> = Registry::new("inner product");
    r.register(Box::new(Energy));
    r.register(Box::new(L2));
    r
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Norm of the preconditioned residual `B (f - A u^j)`.
    pub residual: f64,
    /// `||u^j - u_h||_a` when a reference solution was supplied.
    pub energy_error: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationLog {
    pub records: Vec<IterationRecord>,
}

impl IterationLog {
    /// Iterations performed; the log holds one more record than this.
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn residuals(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.residual).collect()
    }

    pub fn energy_errors(&self) -> Vec<Option<f64>> {
        self.records.iter().map(|r| r.energy_error).collect()
    }

    pub fn write_csv(&self, path: &Path, provenance: &str) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let mut f = std::fs::File::create(path)?;
        writeln!(f, "{provenance}")?;
        let mut w = csv::Writer::from_writer(f);
        w.write_record(["iteration", "residual_norm", "energy_error", "seconds"])?;
        for r in &self.records {
            w.write_record([
                r.iteration.to_string(),
                format!("{:e}", r.residual),
                r.energy_error.map(|e| format!("{e:e}")).unwrap_or_default(),
                format!("{:.6}", r.seconds),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    fn push(&mut self, a: &CsrMatrix, residual: f64, u: Option<&[f64]>, reference: Option<&[f64]>, start: Instant) {
        let energy_error = match (u, reference) {
            (Some(u), Some(uh)) => Some(energy_distance(a, u, uh)),
            _ => None,
        };
        self.records.push(IterationRecord {
            iteration: self.records.len(),
            residual,
            energy_error,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
}

pub fn energy_distance(a: &CsrMatrix, u: &[f64], v: &[f64]) -> f64 {
    let d: Vec<f64> = u.iter().zip(v).map(|(x, y)| x - y).collect();
    a.bilinear(&d, &d).max(0.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    /// Krylov space became invariant; the iterate is exact up to roundoff.
    Breakdown,
    MaxIter,
    Diverged,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub u: Vec<f64>,
    pub log: IterationLog,
    pub status: Termination,
}

impl SolveOutcome {
    pub fn converged(&self) -> bool {
        matches!(self.status, Termination::Converged | Termination::Breakdown)
    }

    pub fn iterations(&self) -> usize {
        self.log.iterations()
    }

    /// Maps divergence to an error, keeping everything else.
    pub fn into_result(self) -> Result<SolveOutcome> {
        if self.status == Termination::Diverged {
            let last = self.log.records.last().map(|r| r.residual).unwrap_or(f64::NAN);
            return Err(Error::Divergence(format!(
                "stopped after {} iterations, last residual {last:e}",
                self.log.iterations()
            )));
        }
        Ok(self)
    }
}

#[derive(Clone, Copy)]
pub struct IterOptions<'a> {
    pub tol: f64,
    pub max_iter: usize,
    pub inner: &'a dyn InnerProduct,
    pub reference: Option<&'a [f64]>,
    /// Global error bound, for the warning when it gives no guarantee.
    pub lambda: Option<f64>,
    pub tolerances: Tolerances,
}

impl<'a> IterOptions<'a> {
    pub fn new(inner: &'a dyn InnerProduct) -> Self {
        Self {
            tol: Tolerances::DEFAULT.krylov_rel,
            max_iter: 200,
            inner,
            reference: None,
            lambda: None,
            tolerances: Tolerances::DEFAULT,
        }
    }
}

fn check_sizes(
    a: &CsrMatrix,
    b: &dyn LinearOperator,
    f: &[f64],
    u0: &[f64],
    reference: Option<&[f64]>,
) -> Result<()> {
    let n = a.nrows();
    if b.dim() != n || f.len() != n || u0.len() != n || reference.is_some_and(|r| r.len() != n) {
        return Err(Error::Dimension(format!(
            "system of size {n} with right side {} and initial guess {}",
            f.len(),
            u0.len()
        )));
    }
    Ok(())
}

fn preconditioned_residual(a: &CsrMatrix, b: &dyn LinearOperator, f: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    let au = a.matvec(u);
    let r: Vec<f64> = f.iter().zip(&au).map(|(x, y)| x - y).collect();
    b.apply(&r)
}

/// `u^{j+1} = u^j + B (f - A u^j)` until the preconditioned residual has
/// dropped by `tol`. The run is stopped as diverged once the error measure
/// (energy error if a reference is given, residual otherwise) has grown for
/// `divergence_window` consecutive steps.
pub fn richardson(
    a: &CsrMatrix,
    b: &dyn LinearOperator,
    f: &[f64],
    u0: &[f64],
    opts: IterOptions<'_>,
) -> Result<SolveOutcome> {
    check_sizes(a, b, f, u0, opts.reference)?;
    if let Some(l) = opts.lambda {
        if l >= 1.0 {
            log::warn!("Lambda = {l:.3e} >= 1: Richardson iteration is not guaranteed to converge");
        }
    }
    let start = Instant::now();
    let mut u = u0.to_vec();
    let mut log = IterationLog::default();
    let mut z = preconditioned_residual(a, b, f, &u)?;
    let r0 = opts.inner.norm(a, &z);
    log.push(a, r0, Some(&u), opts.reference, start);
    if r0 == 0.0 {
        return Ok(SolveOutcome {
            u,
            log,
            status: Termination::Converged,
        });
    }
    let measure = |log: &IterationLog| {
        let r = log.records.last().unwrap();
        r.energy_error.unwrap_or(r.residual)
    };
    let mut growth = 0;
    let mut prev = measure(&log);
    for _ in 0..opts.max_iter {
        u.iter_mut().zip(&z).for_each(|(x, y)| *x += y);
        z = preconditioned_residual(a, b, f, &u)?;
        let r = opts.inner.norm(a, &z);
        log.push(a, r, Some(&u), opts.reference, start);
        let cur = measure(&log);
        growth = if cur > prev { growth + 1 } else { 0 };
        prev = cur;
        if r <= opts.tol * r0 {
            return Ok(SolveOutcome {
                u,
                log,
                status: Termination::Converged,
            });
        }
        if growth >= opts.tolerances.divergence_window || !r.is_finite() {
            log::error!("Richardson iteration diverged after {} steps", log.iterations());
            return Ok(SolveOutcome {
                u,
                log,
                status: Termination::Diverged,
            });
        }
    }
    log::warn!("Richardson iteration stopped at max_iter = {}", opts.max_iter);
    Ok(SolveOutcome {
        u,
        log,
        status: Termination::MaxIter,
    })
}

/// Full left-preconditioned GMRES on `B A u = B f`, modified Gram-Schmidt
/// with one reorthogonalization pass. The logged residuals are the Givens
/// estimates of `||B (f - A u^j)||` in the chosen inner product.
pub fn gmres(
    a: &CsrMatrix,
    b: &dyn LinearOperator,
    f: &[f64],
    u0: &[f64],
    opts: IterOptions<'_>,
) -> Result<SolveOutcome> {
    check_sizes(a, b, f, u0, opts.reference)?;
    let start = Instant::now();
    let inner = opts.inner;
    let mut log = IterationLog::default();
    let r0 = preconditioned_residual(a, b, f, u0)?;
    let mr0 = inner.metric(a, &r0);
    let beta = dot(&r0, &mr0).max(0.0).sqrt();
    log.push(a, beta, Some(u0), opts.reference, start);
    if beta == 0.0 {
        return Ok(SolveOutcome {
            u: u0.to_vec(),
            log,
            status: Termination::Converged,
        });
    }
    let mut v: Vec<Vec<f64>> = vec![r0.iter().map(|x| x / beta).collect()];
    let mut mv: Vec<Vec<f64>> = vec![mr0.iter().map(|x| x / beta).collect()];
    // columns of the rotated Hessenberg matrix (upper triangular part)
    let mut r_cols: Vec<Vec<f64>> = Vec::new();
    let mut cs: Vec<f64> = Vec::new();
    let mut sn: Vec<f64> = Vec::new();
    let mut g = vec![beta];
    let mut u = u0.to_vec();

    for j in 0..opts.max_iter {
        let mut w = b.apply(&a.matvec(&v[j]))?;
        let mut h = vec![0.0; j + 2];
        for _pass in 0..2 {
            for i in 0..=j {
                let c = dot(&mv[i], &w);
                h[i] += c;
                w.iter_mut().zip(&v[i]).for_each(|(x, y)| *x -= c * y);
            }
        }
        let mw = inner.metric(a, &w);
        let hn = dot(&w, &mw).max(0.0).sqrt();
        h[j + 1] = hn;
        for i in 0..j {
            let t = cs[i] * h[i] + sn[i] * h[i + 1];
            h[i + 1] = -sn[i] * h[i] + cs[i] * h[i + 1];
            h[i] = t;
        }
        let d = h[j].hypot(h[j + 1]);
        let (c, s) = if d == 0.0 { (1.0, 0.0) } else { (h[j] / d, h[j + 1] / d) };
        cs.push(c);
        sn.push(s);
        h[j] = d;
        h.truncate(j + 1);
        r_cols.push(h);
        g.push(-s * g[j]);
        g[j] *= c;
        let res = g[j + 1].abs();

        let breakdown = hn <= opts.tolerances.arnoldi_breakdown * beta;
        let converged = res <= opts.tol * beta;
        let last = j + 1 == opts.max_iter;
        if opts.reference.is_some() || converged || breakdown || last {
            u = krylov_iterate(u0, &v, &r_cols, &g);
        }
        log.push(a, res, opts.reference.map(|_| u.as_slice()), opts.reference, start);
        if converged {
            return Ok(SolveOutcome {
                u,
                log,
                status: Termination::Converged,
            });
        }
        if breakdown {
            log::debug!("GMRES happy breakdown at iteration {}", j + 1);
            return Ok(SolveOutcome {
                u,
                log,
                status: Termination::Breakdown,
            });
        }
        if !last {
            v.push(w.iter().map(|x| x / hn).collect());
            mv.push(mw.iter().map(|x| x / hn).collect());
        }
    }
    log::warn!(
        "GMRES reached max_iter = {} with relative residual {:e}",
        opts.max_iter,
        log.records.last().map_or(f64::NAN, |r| r.residual / beta)
    );
    Ok(SolveOutcome {
        u,
        log,
        status: Termination::MaxIter,
    })
}

/// `u0 + V y` with `R y = g` solved by back substitution.
fn krylov_iterate(u0: &[f64], v: &[Vec<f64>], r_cols: &[Vec<f64>], g: &[f64]) -> Vec<f64> {
    let k = r_cols.len();
    let mut y = g[..k].to_vec();
    for i in (0..k).rev() {
        y[i] /= r_cols[i][i];
        let yi = y[i];
        for (yl, rl) in y.iter_mut().zip(&r_cols[i]).take(i) {
            *yl -= rl * yi;
        }
    }
    let mut u = u0.to_vec();
    for (vi, yi) in v.iter().zip(&y) {
        u.iter_mut().zip(vi).for_each(|(x, z)| *x += yi * z);
    }
    u
}
