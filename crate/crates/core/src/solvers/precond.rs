//! Restricted additive Schwarz and its adapted-deflation two-level variant.

use crate::error::{Error, Result};
use crate::la::sparse::CsrMatrix;
use crate::msgfem::{CoarseSpace, LocalStage};

/// A linear map applied to residuals, `r -> B r`.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, r: &[f64]) -> Result<Vec<f64>>;
}

/// Identity, for unpreconditioned iterations.
pub struct Identity(pub usize);

impl LinearOperator for Identity {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        if r.len() != self.0 {
            return Err(Error::Dimension(format!("identity of size {} on length {}", self.0, r.len())));
        }
        Ok(r.to_vec())
    }
}

/// `B r`: one-level RAS `z1 = sum_j R_j^T Xi_j A~_j^{-1} R~_j r`, and in
/// two-level mode `z1 + R_H^T A_H^{-1} R_H (r - A z1)`.
#[derive(Clone, Copy)]
pub struct Preconditioner<'a> {
    pub a: &'a CsrMatrix,
    pub stage: &'a LocalStage,
    pub coarse: Option<&'a CoarseSpace>,
    pub workers: usize,
}

impl<'a> Preconditioner<'a> {
    pub fn one_level(a: &'a CsrMatrix, stage: &'a LocalStage, workers: usize) -> Self {
        Self {
            a,
            stage,
            coarse: None,
            workers,
        }
    }

    pub fn two_level(a: &'a CsrMatrix, stage: &'a LocalStage, coarse: &'a CoarseSpace, workers: usize) -> Self {
        Self {
            a,
            stage,
            coarse: Some(coarse),
            workers,
        }
    }
}

impl LinearOperator for Preconditioner<'_> {
    fn dim(&self) -> usize {
        self.a.nrows()
    }

    fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        if r.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "preconditioner of size {} applied to a vector of length {}",
                self.dim(),
                r.len()
            )));
        }
        let mut z = self.stage.one_level(r, self.workers)?;
        if let Some(c) = self.coarse {
            if c.dim() > 0 {
                let az = self.a.matvec(&z);
                let res: Vec<f64> = r.iter().zip(&az).map(|(x, y)| x - y).collect();
                let zc = c.correction(&res);
                z.iter_mut().zip(zc).for_each(|(x, y)| *x += y);
            }
        }
        Ok(z)
    }
}
