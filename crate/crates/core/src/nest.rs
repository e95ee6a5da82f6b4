//! Nests of subspaces on a parameter grid, their projection families, image
//! nests under an operator, and a grid-level continuity diagnosis.
//!
//! A nest is stored as one orthonormal basis whose leading `ranks[k]` columns
//! span the subspace at grid point `params[k]`. Nesting is therefore exact by
//! construction; constructors that accept arbitrary per-step bases check it.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linops::{default_rank_tol, svd, sym_eig, Mat};

const NEST_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// Step `k` spans the first `k` coordinates.
    Forward,
    /// Step `k` spans the last `k` coordinates.
    Delayed,
}

#[derive(Clone, Debug)]
pub struct Nest {
    ambient_dim: usize,
    params: Vec<f64>,
    basis: Mat,
    ranks: Vec<usize>,
    source_ranks: Option<Vec<usize>>,
}

impl Nest {
    /// Coordinate nest on the grid `s_k = k/n`, `k = 0..=n`.
    pub fn coordinate(n: usize, orientation: Orientation) -> Result<Nest> {
        Self::coordinate_on(n, orientation, 1.0)
    }

    /// Coordinate nest on the grid `s_k = k·horizon/n`.
    pub fn coordinate_on(n: usize, orientation: Orientation, horizon: f64) -> Result<Nest> {
        if n == 0 {
            return Err(Error::ZeroDimension);
        }
        let basis = match orientation {
            Orientation::Forward => Mat::identity(n),
            Orientation::Delayed => Mat::from_fn(n, n, |i, j| (i + j + 1 == n) as u8 as f64),
        };
        Ok(Nest {
            ambient_dim: n,
            params: (0..=n).map(|k| k as f64 * horizon / n as f64).collect(),
            basis,
            ranks: (0..=n).collect(),
            source_ranks: None,
        })
    }

    /// Builds a nest from one orthonormal basis per grid point.
    ///
    /// Fails unless params increase strictly, every basis is orthonormal and
    /// each step lies in the span of the next within `1e-10`.
    pub fn from_steps(ambient_dim: usize, params: Vec<f64>, bases: &[Mat]) -> Result<Nest> {
        if params.len() != bases.len() || params.is_empty() {
            return Err(Error::InvalidNest(format!(
                "{} params for {} bases",
                params.len(),
                bases.len()
            )));
        }
        if params.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidNest("params must increase strictly".into()));
        }
        let mut cols: Vec<Vec<f64>> = Vec::new();
        let mut ranks = Vec::with_capacity(bases.len());
        let mut prev_cols = 0;
        for (k, b) in bases.iter().enumerate() {
            if b.rows() != ambient_dim {
                return Err(Error::DimensionMismatch {
                    context: "nest basis rows",
                    expected: ambient_dim,
                    found: b.rows(),
                });
            }
            let gram = b.tmatmul(b);
            if (&gram - &Mat::identity(b.cols())).norm_max() > NEST_TOL {
                return Err(Error::InvalidNest(format!("basis at step {k} is not orthonormal")));
            }
            if b.cols() < prev_cols {
                return Err(Error::InvalidNest(format!("rank decreases at step {k}")));
            }
            let q = columns_to_mat(ambient_dim, &cols);
            if k > 0 {
                // previous step must lie inside this one
                let prev = q.columns(0, prev_cols);
                let back = b.matmul(&b.tmatmul(&prev));
                if (&back - &prev).norm_max() > NEST_TOL {
                    return Err(Error::InvalidNest(format!("step {} not contained in step {k}", k - 1)));
                }
            }
            let fresh = b.cols() - prev_cols;
            if fresh > 0 {
                let resid = project_out(&q, b);
                let parts = svd(&resid)?;
                let picked = project_out(&q, &parts.u.columns(0, fresh));
                cols.extend(gram_schmidt(&picked, &cols));
            }
            prev_cols = b.cols();
            ranks.push(b.cols());
        }
        Ok(Nest {
            ambient_dim,
            params,
            basis: columns_to_mat(ambient_dim, &cols),
            ranks,
            source_ranks: None,
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    /// Ranks of the source nest when this nest is an image nest.
    pub fn source_ranks(&self) -> Option<&[usize]> {
        self.source_ranks.as_deref()
    }

    /// Nested orthonormal basis; the leading `ranks()[k]` columns span step `k`.
    pub fn basis(&self) -> &Mat {
        &self.basis
    }

    pub fn is_bordered(&self) -> bool {
        self.ranks.first() == Some(&0) && self.ranks.last() == Some(&self.ambient_dim)
    }

    /// Orthonormal basis of step `k`.
    pub fn step_basis(&self, k: usize) -> Mat {
        self.basis.columns(0, self.ranks[k])
    }

    /// Basis of the increment between grid points `a < b` (columns added after `a` up to `b`).
    pub fn increment(&self, a: usize, b: usize) -> Mat {
        self.basis.columns(self.ranks[a], self.ranks[b])
    }

    /// Orthogonal projection onto step `k`.
    pub fn projection(&self, k: usize) -> Mat {
        let b = self.step_basis(k);
        b.matmul(&b.transpose())
    }

    pub fn projection_nest(&self) -> ProjectionNest {
        ProjectionNest {
            params: self.params.clone(),
            projections: (0..self.len()).map(|k| self.projection(k)).collect(),
            source_ranks: self.source_ranks.clone(),
        }
    }

    /// Grid index for parameter `s`, rounding down to the nearest grid point.
    pub fn index_at(&self, s: f64) -> usize {
        let slack = 1e-12 * self.params.last().copied().unwrap_or(1.0).abs().max(1.0);
        self.params
            .iter()
            .rposition(|&p| p <= s + slack)
            .unwrap_or(0)
    }

    pub fn to_fixture(&self) -> NestFixture {
        NestFixture {
            ambient_dim: self.ambient_dim,
            params: self.params.clone(),
            bases: (0..self.len())
                .map(|k| {
                    let b = self.step_basis(k);
                    BasisFixture {
                        cols: b.cols(),
                        data: b.data().to_vec(),
                    }
                })
                .collect(),
        }
    }

    pub fn from_fixture(fx: &NestFixture) -> Result<Nest> {
        let bases = fx
            .bases
            .iter()
            .map(|b| Mat::new(fx.ambient_dim, b.cols, b.data.clone()))
            .collect::<Result<Vec<_>>>()?;
        Nest::from_steps(fx.ambient_dim, fx.params.clone(), &bases)
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Nest> {
        let fx: NestFixture = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Nest::from_fixture(&fx)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(&self.to_fixture())?)?;
        Ok(())
    }
}

/// JSON form of a nest: per-step bases stored row-major (`ambient_dim × cols`).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NestFixture {
    pub ambient_dim: usize,
    pub params: Vec<f64>,
    pub bases: Vec<BasisFixture>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BasisFixture {
    pub cols: usize,
    pub data: Vec<f64>,
}

fn columns_to_mat(rows: usize, cols: &[Vec<f64>]) -> Mat {
    Mat::from_fn(rows, cols.len(), |i, j| cols[j][i])
}

/// `y - Q Qᵀ y`, applied twice for stability.
fn project_out(q: &Mat, y: &Mat) -> Mat {
    if q.cols() == 0 {
        return y.clone();
    }
    let mut r = y.clone();
    for _ in 0..2 {
        let coef = q.tmatmul(&r);
        r = &r - &q.matmul(&coef);
    }
    r
}

/// Orthonormalizes the columns of `y` against `prior` and each other.
fn gram_schmidt(y: &Mat, prior: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut out: Vec<Vec<f64>> = Vec::new();
    for j in 0..y.cols() {
        let mut v = y.col(j);
        for _ in 0..2 {
            for q in prior.iter().chain(out.iter()) {
                let c = dot(q, &v);
                v.iter_mut().zip(q).for_each(|(x, qi)| *x -= c * qi);
            }
        }
        let nrm = dot(&v, &v).sqrt();
        v.iter_mut().for_each(|x| *x /= nrm);
        out.push(v);
    }
    out
}

/// Image nest `H_s = span(W F_s)`, built step by step.
///
/// At each grid point the new source directions are mapped by `w`, projected
/// off the image so far, and kept where their singular values exceed `tol`
/// (`tol = 0` selects `max(rows, cols)·eps·‖w‖`).
pub fn image_nest(w: &Mat, f: &Nest, tol: f64) -> Result<Nest> {
    if w.cols() != f.ambient_dim() {
        return Err(Error::DimensionMismatch {
            context: "image nest operator columns",
            expected: f.ambient_dim(),
            found: w.cols(),
        });
    }
    let cutoff = if tol > 0.0 {
        tol
    } else {
        default_rank_tol(w.rows(), w.cols(), w.norm_spectral())
    };
    let rows = w.rows();
    let wb = w.matmul(f.basis());
    let mut q = Mat::zeros(rows, 0);
    let mut ranks = Vec::with_capacity(f.len());
    let mut prev = 0;
    for &rk in f.ranks() {
        if rk > prev {
            let resid = project_out(&q, &wb.columns(prev, rk));
            let fresh = orthonormal_range(&resid, cutoff)?;
            if fresh.cols() > 0 {
                q = q.hcat(&fresh);
            }
        }
        prev = rk;
        ranks.push(q.cols());
    }
    Ok(Nest {
        ambient_dim: rows,
        params: f.params().to_vec(),
        basis: q,
        ranks,
        source_ranks: Some(f.ranks().to_vec()),
    })
}

fn orthonormal_range(y: &Mat, cutoff: f64) -> Result<Mat> {
    if y.cols() == 1 {
        let v = y.col(0);
        let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        return Ok(if nrm > cutoff {
            Mat::column(&v.iter().map(|x| x / nrm).collect::<Vec<_>>())
        } else {
            Mat::zeros(y.rows(), 0)
        });
    }
    let parts = svd(y)?;
    let r = parts.s.iter().take_while(|&&s| s > cutoff).count();
    Ok(parts.u.columns(0, r))
}

/// Explicit projection matrices `X_s` of a nest.
#[derive(Clone, Debug)]
pub struct ProjectionNest {
    pub params: Vec<f64>,
    pub projections: Vec<Mat>,
    /// Ranks of the pre-image nest, when the projections come from an image nest.
    pub source_ranks: Option<Vec<usize>>,
}

impl ProjectionNest {
    pub fn ranks(&self) -> Vec<usize> {
        self.projections
            .iter()
            .map(|p| p.diag().iter().sum::<f64>().round().max(0.0) as usize)
            .collect()
    }

    /// Largest `‖X_i X_j − X_i‖_max` over `i ≤ j`.
    pub fn monotonicity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.projections.len() {
            for j in i..self.projections.len() {
                let xi = &self.projections[i];
                worst = worst.max((&xi.matmul(&self.projections[j]) - xi).norm_max());
            }
        }
        worst
    }
}

/// Grid-level continuity diagnosis of a projection nest.
#[derive(Clone, Debug)]
pub struct BreakReport {
    pub params: Vec<f64>,
    pub rank_increments: Vec<usize>,
    /// `‖X_{s_k} − X_{s_{k−1}}‖` (zero at the first point).
    pub left_jump: Vec<f64>,
    /// `‖X_{s_{k+1}} − X_{s_k}‖` (zero at the last point).
    pub right_jump: Vec<f64>,
    /// Points carrying an isolated image jump while the source grew steadily.
    pub right_breaks: Vec<f64>,
    /// Points where the image gained more dimensions than the source supplied.
    pub left_breaks: Vec<f64>,
    /// First right-break.
    pub detected_sigma: Option<f64>,
}

/// Scans rank increments and jump sizes between consecutive grid points.
///
/// With pre-image ranks available, an image increment at `s_k` that is
/// isolated (no image growth at the neighbouring steps) although the source
/// grew at `s_k` is reported as a right-break at `s_{k−1}`: the image stays
/// flat up to `s_{k−1}` and jumps immediately after it. A jump at the first
/// step therefore reports `s_0`. Left and right discontinuity at the same
/// point cannot be told apart below the grid spacing.
pub fn continuity_scan(p: &ProjectionNest) -> BreakReport {
    let m = p.projections.len();
    let ranks = p.ranks();
    let inc: Vec<usize> = (0..m)
        .map(|k| if k == 0 { ranks[0] } else { ranks[k].saturating_sub(ranks[k - 1]) })
        .collect();
    let jumps: Vec<f64> = (1..m)
        .map(|k| sym_spectral(&(&p.projections[k] - &p.projections[k - 1])))
        .collect();
    let left_jump = (0..m).map(|k| if k == 0 { 0.0 } else { jumps[k - 1] }).collect();
    let right_jump = (0..m).map(|k| if k + 1 < m { jumps[k] } else { 0.0 }).collect();

    let mut right_breaks = Vec::new();
    let mut left_breaks = Vec::new();
    if let Some(src) = &p.source_ranks {
        let src_inc = |k: usize| src[k].saturating_sub(src[k - 1]);
        for k in 1..m {
            let flat_before = k == 1 || inc[k - 1] == 0;
            let flat_after = k + 1 == m || inc[k + 1] == 0;
            let source_grew_around = (k == 1 || src_inc(k - 1) > 0) && src_inc(k) > 0;
            if inc[k] >= 1 && flat_before && flat_after && source_grew_around && m > 2 {
                right_breaks.push(p.params[k - 1]);
            }
            if inc[k] > src_inc(k) {
                left_breaks.push(p.params[k]);
            }
        }
    }
    BreakReport {
        params: p.params.clone(),
        rank_increments: inc,
        left_jump,
        right_jump,
        detected_sigma: right_breaks.first().copied(),
        right_breaks,
        left_breaks,
    }
}

fn sym_spectral(a: &Mat) -> f64 {
    match sym_eig(&a.symmetrize()) {
        Ok(e) => e.values.iter().fold(0.0, |m, x| m.max(x.abs())),
        Err(_) => a.norm_fro(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn span_equal(a: &Mat, b: &Mat) -> bool {
        a.cols() == b.cols()
            && (&a.matmul(&a.transpose()) - &b.matmul(&b.transpose())).norm_max() < 1e-10
    }

    #[test]
    fn coordinate_examples() {
        let f = Nest::coordinate(3, Orientation::Forward).unwrap();
        assert_eq!(f.ranks(), &[0, 1, 2, 3]);
        assert_eq!(f.step_basis(1).col(0), vec![1.0, 0.0, 0.0]);
        assert!(f.is_bordered());
        let d = Nest::coordinate(3, Orientation::Delayed).unwrap();
        assert_eq!(d.step_basis(1).col(0), vec![0.0, 0.0, 1.0]);
        let one = Nest::coordinate(1, Orientation::Forward).unwrap();
        assert_eq!(one.ranks(), &[0, 1]);
        assert!(matches!(
            Nest::coordinate(0, Orientation::Forward),
            Err(Error::ZeroDimension)
        ));
    }

    #[test]
    fn index_rounds_down() {
        let f = Nest::coordinate(4, Orientation::Forward).unwrap();
        assert_eq!(f.index_at(0.3), 1);
        assert_eq!(f.index_at(0.5), 2);
        assert_eq!(f.index_at(1.0), 4);
    }

    #[test]
    fn image_of_identity_and_reversal() {
        let f = Nest::coordinate(4, Orientation::Forward).unwrap();
        let h = image_nest(&Mat::identity(4), &f, 0.0).unwrap();
        for k in 0..f.len() {
            assert!(span_equal(&h.step_basis(k), &f.step_basis(k)));
        }
        let j = Mat::from_fn(4, 4, |i, c| (i + c == 3) as u8 as f64);
        let h = image_nest(&j, &f, 0.0).unwrap();
        for k in 1..=4 {
            let expect = Mat::from_fn(4, k, |i, c| (i == 3 - c) as u8 as f64);
            assert!(span_equal(&h.step_basis(k), &expect));
        }
    }

    #[test]
    fn image_of_rank_one_is_rank_one() {
        let n = 6;
        let phi: Vec<f64> = (0..n).map(|i| (i as f64 + 1.0).sin()).collect();
        let psi: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let w = Mat::outer(&psi, &phi);
        let h = image_nest(&w, &Nest::coordinate(n, Orientation::Forward).unwrap(), 0.0).unwrap();
        assert!(h.ranks().iter().all(|&r| r <= 1));
        assert_eq!(*h.ranks().last().unwrap(), 1);
    }

    #[test]
    fn image_dimension_mismatch() {
        let f = Nest::coordinate(3, Orientation::Forward).unwrap();
        assert!(matches!(
            image_nest(&Mat::identity(4), &f, 0.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn from_steps_checks_nesting() {
        let e = |i: usize| Mat::from_fn(2, 1, |r, _| (r == i) as u8 as f64);
        let ok = Nest::from_steps(2, vec![0.0, 0.5, 1.0], &[Mat::zeros(2, 0), e(0), Mat::identity(2)]);
        assert!(ok.unwrap().is_bordered());
        let bad = Nest::from_steps(
            3,
            vec![0.0, 0.5, 1.0],
            &[Mat::from_fn(3, 1, |r, _| (r == 0) as u8 as f64), Mat::from_fn(3, 1, |r, _| (r == 1) as u8 as f64), Mat::identity(3)],
        );
        assert!(matches!(bad, Err(Error::InvalidNest(_))));
        let not_orth = Nest::from_steps(2, vec![0.0], &[Mat::from_fn(2, 1, |_, _| 1.0)]);
        assert!(not_orth.is_err());
    }

    #[test]
    fn fixture_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = Mat::from_fn(5, 5, |_, _| rng.gen_range(-1.0..1.0));
        let f = Nest::coordinate(5, Orientation::Delayed).unwrap();
        let h = image_nest(&w, &f, 0.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nest.json");
        h.write_json(&path).unwrap();
        let back = Nest::read_json(&path).unwrap();
        assert_eq!(back.ranks(), h.ranks());
        for k in 0..h.len() {
            let (a, b) = (back.step_basis(k), h.step_basis(k));
            assert!(span_equal(&a, &b), "{k} {:?}\n{:?}", a, b);
        }
    }

    #[test]
    fn scan_of_coordinate_nest_is_uniform() {
        let p = Nest::coordinate(8, Orientation::Forward).unwrap().projection_nest();
        let r = continuity_scan(&p);
        assert!(r.rank_increments[1..].iter().all(|&d| d == 1));
        assert!(r.detected_sigma.is_none() && r.left_breaks.is_empty());
        assert!(r.left_jump[1..].iter().all(|&j| (j - 1.0).abs() < 1e-12));
    }

    #[test]
    fn scan_detects_rank_one_break() {
        let n = 40;
        let f = Nest::coordinate(n, Orientation::Forward).unwrap();
        // φ supported on coordinates whose grid cell lies after σ = 0.5
        let phi: Vec<f64> = (0..n).map(|i| if i >= n / 2 { 1.0 + i as f64 / n as f64 } else { 0.0 }).collect();
        let psi: Vec<f64> = (0..n).map(|i| ((i + 1) as f64).sqrt()).collect();
        let h = image_nest(&Mat::outer(&psi, &phi), &f, 0.0).unwrap();
        let r = continuity_scan(&h.projection_nest());
        assert_eq!(r.detected_sigma, Some(0.5));
        assert_eq!(r.right_breaks.len(), 1);
        assert!(r.left_breaks.is_empty());
    }

    #[test]
    fn break_at_origin_is_reported_at_zero() {
        let n = 10;
        let f = Nest::coordinate(n, Orientation::Forward).unwrap();
        let phi: Vec<f64> = (0..n).map(|i| 1.0 / (i + 1) as f64).collect();
        let h = image_nest(&Mat::outer(&[1.0, 2.0], &phi), &f, 0.0).unwrap();
        let r = continuity_scan(&h.projection_nest());
        assert_eq!(r.detected_sigma, Some(0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn image_nests_are_monotone_and_injective_images_keep_rank(
            n in 2usize..9, extra in 0usize..3, seed in 0u64..500, delayed in any::<bool>()
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = Mat::from_fn(n + extra, n, |_, _| rng.gen_range(-1.0..1.0));
            let orient = if delayed { Orientation::Delayed } else { Orientation::Forward };
            let f = Nest::coordinate(n, orient).unwrap();
            let h = image_nest(&w, &f, 0.0).unwrap();
            prop_assert!(h.projection_nest().monotonicity_defect() <= 1e-9);
            prop_assert_eq!(h.ranks(), f.ranks());
            let scan = continuity_scan(&h.projection_nest());
            prop_assert!(scan.left_breaks.is_empty());
            prop_assert!(scan.detected_sigma.is_none());
        }
    }
}
