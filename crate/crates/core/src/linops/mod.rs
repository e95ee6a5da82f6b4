//! Dense real linear algebra: the matrix type, symmetric eigendecomposition,
//! SVD, PSD square root, polar decomposition and an independent Cholesky
//! routine used as ground truth.

mod decomp;
mod io;
mod mat;

pub use decomp::{
    cholesky_upper, default_rank_tol, polar, polar_adjoint, singular_values, sqrt_from_eig, sqrt_psd, svd,
    sym_eig, EigenPair, PolarParts, SvdParts,
};
pub use io::{format_matrix, parse_matrix, read_matrix, write_matrix};
pub use mat::Mat;
