pub mod assembly;
pub mod cli;
pub mod decomp;
pub mod error;
pub mod la;
pub mod mesh;
pub mod msgfem;
pub mod problems;
pub mod registry;
pub mod solvers;
pub mod tolerances;

pub use error::{Error, Result};
pub use tolerances::Tolerances;
