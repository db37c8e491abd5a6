//! Numerical thresholds shared across the crate.
//!
//! Every threshold that changes a control-flow decision lives here so that
//! tests and the experiment driver agree on what "converged", "dependent" or
//! "out of range" mean.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// A Cholesky pivot is rejected when it is not larger than this fraction
    /// of the largest diagonal entry of the input.
    pub cholesky_pivot: f64,
    /// Relative pivot threshold below which coarse basis columns are dropped.
    pub coarse_drop: f64,
    /// Slack allowed on partition-of-unity values outside `[0, 1]`.
    pub pou_range: f64,
    /// Default relative reduction of the preconditioned residual.
    pub krylov_rel: f64,
    /// Arnoldi breakdown threshold, relative to the initial residual.
    pub arnoldi_breakdown: f64,
    /// Consecutive error-growth steps that count as divergence.
    pub divergence_window: usize,
    /// Roundoff allowed on top of the error bound, which is zero when every
    /// local eigenvector is kept.
    pub bound_roundoff: f64,
}

impl Tolerances {
    pub const DEFAULT: Tolerances = Tolerances {
        cholesky_pivot: 1e-14,
        coarse_drop: 1e-12,
        pou_range: 1e-12,
        krylov_rel: 1e-6,
        arnoldi_breakdown: 1e-14,
        divergence_window: 5,
        bound_roundoff: 1e-10,
    };
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::DEFAULT
    }
}
