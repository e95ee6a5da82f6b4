use faer::Side;

use super::Mat;
use crate::error::{Error, Result};

/// Eigenvalues in descending order with orthonormal eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct EigenPair {
    pub values: Vec<f64>,
    pub vectors: Mat,
}

/// Thin SVD `a = u diag(s) vᵀ`, singular values descending.
#[derive(Clone, Debug)]
pub struct SvdParts {
    pub u: Mat,
    pub s: Vec<f64>,
    pub v: Mat,
}

/// Polar decomposition `a = phi · modulus` with `modulus = (aᵀa)^{1/2}`.
///
/// `phi` is the partial isometry built from the singular triplets above
/// `tol`; `rank` counts those triplets.
#[derive(Clone, Debug)]
pub struct PolarParts {
    pub phi: Mat,
    pub modulus: Mat,
    pub rank: usize,
    pub tol: f64,
}

/// Default numerical-rank cutoff `max(rows, cols) · eps · σ_max`.
pub fn default_rank_tol(rows: usize, cols: usize, sigma_max: f64) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * sigma_max
}

pub fn sym_eig(a: &Mat) -> Result<EigenPair> {
    if !a.is_square() {
        return Err(Error::NonSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    let defect = a.symmetry_defect();
    if defect > 1e-10 * a.norm_max() {
        return Err(Error::AsymmetricInput { defect });
    }
    let n = a.rows();
    if n == 0 {
        return Ok(EigenPair {
            values: vec![],
            vectors: Mat::zeros(0, 0),
        });
    }
    let eig = a
        .symmetrize()
        .to_faer()
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::ConvergenceFailure("symmetric eigensolver"))?;
    // faer sorts ascending
    let s = eig.S().column_vector();
    let u = eig.U();
    let values = (0..n).map(|j| s[n - 1 - j]).collect();
    let vectors = Mat::from_fn(n, n, |i, j| u[(i, n - 1 - j)]);
    Ok(EigenPair { values, vectors })
}

pub fn svd(a: &Mat) -> Result<SvdParts> {
    let (m, n) = a.shape();
    let k = m.min(n);
    if k == 0 {
        return Ok(SvdParts {
            u: Mat::zeros(m, 0),
            s: vec![],
            v: Mat::zeros(n, 0),
        });
    }
    let dec = a
        .to_faer()
        .thin_svd()
        .map_err(|_| Error::ConvergenceFailure("singular value decomposition"))?;
    let s = dec.S().column_vector();
    Ok(SvdParts {
        u: Mat::from_faer(dec.U()),
        s: (0..k).map(|j| s[j]).collect(),
        v: Mat::from_faer(dec.V()),
    })
}

/// Singular values only, descending.
pub fn singular_values(a: &Mat) -> Result<Vec<f64>> {
    if a.rows().min(a.cols()) == 0 {
        return Ok(vec![]);
    }
    a.to_faer()
        .singular_values()
        .map_err(|_| Error::ConvergenceFailure("singular values"))
}

/// Symmetric PSD square root through the eigendecomposition.
///
/// Eigenvalues in `[-1e-10 λ_max, 0)` are treated as zero.
pub fn sqrt_psd(c: &Mat) -> Result<Mat> {
    let eig = sym_eig(c)?;
    let lmax = eig.values.first().copied().unwrap_or(0.0).max(0.0);
    if let Some(&lmin) = eig.values.last() {
        if lmin < -1e-10 * lmax || (lmax == 0.0 && lmin < 0.0) {
            return Err(Error::NotPsd {
                min_eigenvalue: lmin,
            });
        }
    }
    Ok(sqrt_from_eig(&eig))
}

/// `Q Λ^{1/2} Qᵀ` from an eigendecomposition, negative eigenvalues read as zero.
pub fn sqrt_from_eig(eig: &EigenPair) -> Mat {
    let roots: Vec<f64> = eig.values.iter().map(|&l| l.max(0.0).sqrt()).collect();
    spectral_function(&eig.vectors, &roots)
}

/// `Q diag(f) Qᵀ`, symmetric by construction.
fn spectral_function(q: &Mat, f: &[f64]) -> Mat {
    let scaled = Mat::from_fn(q.rows(), f.len(), |i, j| q[(i, j)] * f[j]);
    let k = f.len();
    let qt = q.columns(0, k).transpose();
    scaled.matmul(&qt).symmetrize()
}

/// Polar decomposition of `a` (`a = phi · |a|`).
///
/// `tol = 0` selects [`default_rank_tol`].
pub fn polar(a: &Mat, tol: f64) -> Result<PolarParts> {
    let parts = svd(a)?;
    let smax = parts.s.first().copied().unwrap_or(0.0);
    let tol = if tol > 0.0 {
        tol
    } else {
        default_rank_tol(a.rows(), a.cols(), smax)
    };
    let rank = parts.s.iter().take_while(|&&s| s > tol).count();
    if rank == 0 {
        return Err(Error::ZeroOperator);
    }
    let phi = parts.u.columns(0, rank).matmul(&parts.v.columns(0, rank).transpose());
    let modulus = spectral_function(&parts.v, &parts.s);
    Ok(PolarParts {
        phi,
        modulus,
        rank,
        tol,
    })
}

/// Polar decomposition of the adjoint: `dᵀ = Φ* |D*|` with `|D*| = (d dᵀ)^{1/2}`.
pub fn polar_adjoint(d: &Mat, tol: f64) -> Result<PolarParts> {
    polar(&d.transpose(), tol)
}

/// Upper-triangular `R` with positive diagonal and `RᵀR = c`.
pub fn cholesky_upper(c: &Mat) -> Result<Mat> {
    if !c.is_square() {
        return Err(Error::NonSquare {
            rows: c.rows(),
            cols: c.cols(),
        });
    }
    let defect = c.symmetry_defect();
    if defect > 1e-10 * c.norm_max() {
        return Err(Error::AsymmetricInput { defect });
    }
    let n = c.rows();
    let mut r = Mat::zeros(n, n);
    for i in 0..n {
        let mut pivot = c[(i, i)];
        for k in 0..i {
            pivot -= r[(k, i)] * r[(k, i)];
        }
        if !(pivot > 0.0) {
            return Err(Error::NotPositiveDefinite { pivot, index: i });
        }
        let rii = pivot.sqrt();
        r[(i, i)] = rii;
        for j in i + 1..n {
            let mut s = c[(i, j)];
            for k in 0..i {
                s -= r[(k, i)] * r[(k, j)];
            }
            r[(i, j)] = s / rii;
        }
    }
    Ok(r)
}
