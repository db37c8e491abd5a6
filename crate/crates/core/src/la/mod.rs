//! Linear algebra kernels: CSR storage, sparse Cholesky with fill-reducing
//! orderings, dense symmetric eigensolvers and exact integer rank.

pub mod cholesky;
pub mod dense;
pub mod ordering;
pub mod rank;
pub mod sparse;

pub use cholesky::CholeskyFactor;
pub use dense::{gen_sym_eig, sym_eig, DenseCholesky, DenseMatrix, GenEigen, PivotedCholesky};
pub use ordering::{FillOrdering, Graph};
pub use rank::{integer_rank, integer_rank_sparse};
pub use sparse::{axpy, dot, norm2, CsrMatrix};
