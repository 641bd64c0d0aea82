//! Dense tensor kernels and solvers for orthogonal low-rank decomposition.

pub mod alm;
pub mod cp_als;
pub mod error;
pub mod generate;
pub mod io;
pub mod kruskal;
pub mod lbfgs;
pub mod matrix;
pub mod orthogonalize;
pub mod rank_tools;
pub mod tensor;

pub use error::{Error, Result};
pub use kruskal::KruskalTensor;
pub use matrix::Matrix;
pub use orthogonalize::OrthonormalRankOneList;
pub use tensor::DenseTensor;
