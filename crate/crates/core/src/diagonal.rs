//! Two-nest diagonals `D^Ξ_W = Σ ΔP_k W ΔX_k`, refinement sweeps, the weight
//! operator and orthogonalizer, and intertwining diagnostics.
//!
//! Sums are assembled in nest coordinates: with `Q_f`, `Q_h` the nested bases
//! of source and image, `D = Q_h B Q_fᵀ` where `B` is block diagonal with
//! blocks `E_hᵀ W E_f` over the partition steps.

use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linops::{default_rank_tol, polar, polar_adjoint, singular_values, svd, Mat};
use crate::nest::{image_nest, Nest, ProjectionNest};

/// A subset `0 = s_0 < … < s_m = T` of a nest's grid, stored as grid indices.
#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    indices: Vec<usize>,
    points: Vec<f64>,
}

impl Partition {
    /// Every grid point of `nest`.
    pub fn full(nest: &Nest) -> Partition {
        Partition::from_indices(nest, (0..nest.len()).collect()).expect("full grid is valid")
    }

    /// About `m` equal steps, snapped to the grid.
    pub fn uniform(nest: &Nest, m: usize) -> Result<Partition> {
        let last = nest.len() - 1;
        if m == 0 || m > last {
            return Err(Error::InvalidPartition(format!(
                "cannot split a grid of {last} steps into {m}"
            )));
        }
        let mut idx: Vec<usize> = (0..=m)
            .map(|k| ((k * last) as f64 / m as f64).round() as usize)
            .collect();
        idx.dedup();
        Partition::from_indices(nest, idx)
    }

    /// Partition from parameter values, each of which must be a grid point.
    pub fn on_grid(nest: &Nest, points: &[f64]) -> Result<Partition> {
        let params = nest.params();
        let scale = params.last().map_or(1.0, |t| t.abs().max(1.0));
        let indices = points
            .iter()
            .map(|&p| {
                params
                    .iter()
                    .position(|&g| (g - p).abs() <= 1e-12 * scale)
                    .ok_or(Error::PartitionNotOnGrid { point: p })
            })
            .collect::<Result<Vec<_>>>()?;
        Partition::from_indices(nest, indices)
    }

    pub fn from_indices(nest: &Nest, indices: Vec<usize>) -> Result<Partition> {
        let last = nest.len() - 1;
        if indices.first() != Some(&0) || indices.last() != Some(&last) {
            return Err(Error::InvalidPartition(
                "partition must start and end at the grid endpoints".into(),
            ));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidPartition("points must increase strictly".into()));
        }
        let points = indices.iter().map(|&i| nest.params()[i]).collect();
        Ok(Partition { indices, points })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Number of steps.
    pub fn steps(&self) -> usize {
        self.indices.len() - 1
    }

    /// Largest step `r^Ξ`.
    pub fn range(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct DiagonalResult {
    pub d: Mat,
    pub partition: Partition,
    /// Max over partition points of `‖P_s D − D X_s‖_F`, an upper bound of the spectral defect.
    pub intertwine_defect: f64,
    /// `‖D‖` (spectral).
    pub norm: f64,
    /// `‖W‖` (spectral).
    pub norm_w: f64,
    /// `‖D‖/‖W‖`, zero when `W = 0`.
    pub norm_ratio: f64,
    /// `D Dᵀ = I` and `DᵀD` idempotent, both within `1e-8`.
    pub isometric_adjoint: bool,
    pub source: Nest,
    pub image: Nest,
}

/// `D_W` over every grid point, with the image nest of `w`.
pub fn finite_diagonal(w: &Mat, f: &Nest) -> Result<DiagonalResult> {
    let h = image_nest(w, f, 0.0)?;
    partition_diagonal(w, f, &h, &Partition::full(f))
}

/// `D^Ξ = Σ_k ΔP_{s_k} W ΔX_{s_k}` for source nest `f`, image-side nest `h`.
pub fn partition_diagonal(w: &Mat, f: &Nest, h: &Nest, xi: &Partition) -> Result<DiagonalResult> {
    let norm_w = w.norm_spectral();
    assemble(w, f, h, xi, norm_w)
}

fn check_shapes(w: &Mat, f: &Nest, h: &Nest, xi: &Partition) -> Result<()> {
    if w.cols() != f.ambient_dim() {
        return Err(Error::DimensionMismatch {
            context: "diagonal source dimension",
            expected: f.ambient_dim(),
            found: w.cols(),
        });
    }
    if w.rows() != h.ambient_dim() {
        return Err(Error::DimensionMismatch {
            context: "diagonal image dimension",
            expected: h.ambient_dim(),
            found: w.rows(),
        });
    }
    if f.len() != h.len() {
        return Err(Error::DimensionMismatch {
            context: "nest grid length",
            expected: f.len(),
            found: h.len(),
        });
    }
    for (&i, &p) in xi.indices().iter().zip(xi.points()) {
        let ok = i < f.len()
            && (f.params()[i] - p).abs() <= 1e-12 * p.abs().max(1.0)
            && (h.params()[i] - p).abs() <= 1e-12 * p.abs().max(1.0);
        if !ok {
            return Err(Error::PartitionNotOnGrid { point: p });
        }
    }
    if *xi.indices().last().unwrap() != f.len() - 1 {
        return Err(Error::PartitionNotOnGrid {
            point: *xi.points().last().unwrap(),
        });
    }
    Ok(())
}

fn assemble(w: &Mat, f: &Nest, h: &Nest, xi: &Partition, norm_w: f64) -> Result<DiagonalResult> {
    check_shapes(w, f, h, xi)?;
    let (qf, qh) = (f.basis(), h.basis());
    let wq = w.matmul(qf);
    let mut b = Mat::zeros(qh.cols(), qf.cols());
    for pair in xi.indices().windows(2) {
        let (a, z) = (pair[0], pair[1]);
        let (r0, r1) = (f.ranks()[a], f.ranks()[z]);
        let (p0, p1) = (h.ranks()[a], h.ranks()[z]);
        if r1 == r0 || p1 == p0 {
            continue;
        }
        let block = qh.columns(p0, p1).tmatmul(&wq.columns(r0, r1));
        for i in 0..p1 - p0 {
            for j in 0..r1 - r0 {
                b[(p0 + i, r0 + j)] = block[(i, j)];
            }
        }
    }
    let d = qh.matmul(&b).matmul(&qf.transpose());
    let intertwine_defect = coordinate_intertwine_defect(&d, f, h, xi);
    let norm = d.norm_spectral();
    let isometric_adjoint = is_isometric_adjoint(&d);
    Ok(DiagonalResult {
        d,
        partition: xi.clone(),
        intertwine_defect,
        norm,
        norm_w,
        norm_ratio: if norm_w > 0.0 { norm / norm_w } else { 0.0 },
        isometric_adjoint,
        source: f.clone(),
        image: h.clone(),
    })
}

/// Frobenius form of `max_s ‖P_s D − D X_s‖` over partition points.
///
/// `P_s D − D X_s = P_s D (I − X_s) − (I − P_s) D X_s`, and the two terms are
/// orthogonal, so both squared norms are read off `M = Q_hᵀ D Q_f` with
/// suffix sums plus the parts of `D` outside the two nested bases.
fn coordinate_intertwine_defect(d: &Mat, f: &Nest, h: &Nest, xi: &Partition) -> f64 {
    let (qf, qh) = (f.basis(), h.basis());
    let g = d.matmul(qf);
    let m = qh.tmatmul(&g);
    let (rh, rf) = (m.rows(), m.cols());
    // column residuals of D Q_f outside span(Q_h)
    let outside_h = &g - &qh.matmul(&m);
    let perp_col: Vec<f64> = (0..rf)
        .map(|j| (0..outside_h.rows()).map(|i| outside_h[(i, j)].powi(2)).sum())
        .collect();
    // row norms of Q_hᵀ D restricted to the complement of span(Q_f)
    let perp_row: Vec<f64> = if rf < f.ambient_dim() {
        let qhd = qh.tmatmul(d);
        let e = &qhd - &m.matmul(&qf.transpose());
        (0..rh).map(|i| e.row(i).iter().map(|x| x * x).sum()).collect()
    } else {
        vec![0.0; rh]
    };
    // suffix sums of M² along each row and each column; differences of 2D
    // prefix sums would cancel and leave sqrt(eps)-sized noise after the root
    let mut row_suffix = vec![0.0; rh * (rf + 1)];
    for i in 0..rh {
        for j in (0..rf).rev() {
            row_suffix[i * (rf + 1) + j] = m[(i, j)].powi(2) + row_suffix[i * (rf + 1) + j + 1];
        }
    }
    let mut col_suffix = vec![0.0; rf * (rh + 1)];
    for j in 0..rf {
        for i in (0..rh).rev() {
            col_suffix[j * (rh + 1) + i] = m[(i, j)].powi(2) + col_suffix[j * (rh + 1) + i + 1];
        }
    }
    let mut worst: f64 = 0.0;
    for &k in xi.indices() {
        let (rho, r) = (h.ranks()[k], f.ranks()[k]);
        let upper: f64 = (0..rho).map(|i| row_suffix[i * (rf + 1) + r] + perp_row[i]).sum();
        let lower: f64 = (0..r).map(|j| col_suffix[j * (rh + 1) + rho] + perp_col[j]).sum();
        worst = worst.max((upper + lower).sqrt());
    }
    worst
}

fn is_isometric_adjoint(d: &Mat) -> bool {
    let ddt = d.matmul(&d.transpose());
    if (&ddt - &Mat::identity(d.rows())).norm_max() > 1e-8 {
        return false;
    }
    let dtd = d.tmatmul(d);
    (&dtd.matmul(&dtd) - &dtd).norm_max() <= 1e-8
}

/// `max_k ‖ΔX_k φ‖²` over the steps of `xi`.
pub fn rank_one_delta(f: &Nest, xi: &Partition, phi: &[f64]) -> f64 {
    let coords = f.basis().tmatvec(phi);
    xi.indices()
        .windows(2)
        .map(|p| {
            coords[f.ranks()[p[0]]..f.ranks()[p[1]]]
                .iter()
                .map(|c| c * c)
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

/// Diagonals along a refinement schedule.
#[derive(Clone, Debug)]
pub struct Sweep {
    pub results: Vec<DiagonalResult>,
    /// `max |D_k − D_{k−1}|` entrywise for `k ≥ 1`.
    pub diffs: Vec<f64>,
}

impl Sweep {
    /// CSV with columns `range,norm_D,intertwine_defect,diff_to_previous`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = std::fs::File::create(path)?;
        writeln!(out, "range,norm_D,intertwine_defect,diff_to_previous")?;
        for (k, r) in self.results.iter().enumerate() {
            let diff = if k == 0 { String::new() } else { format!("{:.10e}", self.diffs[k - 1]) };
            writeln!(
                out,
                "{:.10e},{:.10e},{:.10e},{}",
                r.partition.range(),
                r.norm,
                r.intertwine_defect,
                diff
            )?;
        }
        Ok(())
    }
}

/// One diagonal per partition of `schedule`, which must have non-increasing range.
///
/// The image nest is computed once; partitions are evaluated in parallel and
/// returned in schedule order.
pub fn refinement_sweep(w: &Mat, f: &Nest, schedule: &[Partition]) -> Result<Sweep> {
    if schedule.windows(2).any(|p| p[1].range() > p[0].range() * (1.0 + 1e-12)) {
        return Err(Error::UnorderedSchedule);
    }
    let h = image_nest(w, f, 0.0)?;
    let norm_w = w.norm_spectral();
    let results = schedule
        .par_iter()
        .map(|xi| assemble(w, f, &h, xi, norm_w))
        .collect::<Result<Vec<_>>>()?;
    let diffs = results
        .windows(2)
        .map(|p| (&p[1].d - &p[0].d).norm_max())
        .collect();
    Ok(Sweep { results, diffs })
}

#[derive(Clone, Debug)]
pub struct Orthogonalizer {
    /// `Ψ = N D`.
    pub psi: Mat,
    /// `N = |D*|⁻¹` on the range of `D`.
    pub weight: Mat,
    /// Per partition step: `ν_k` when the image increment is one-dimensional.
    pub nu: Vec<Option<f64>>,
    pub rank: usize,
}

/// Weight operator and orthogonalizer of a diagonal.
///
/// `D D ᵀ` is block diagonal along the image increments, so `N` is assembled
/// block by block from the small matrices `E_hᵀ D E_f`; on one-dimensional
/// image increments it reduces to `ν_k ΔP_k` with `ν_k = ‖ΔP_k D ΔX_k‖⁻¹`.
/// `tol = 0` selects `max(dims)·eps·‖D‖` as the cutoff.
pub fn orthogonalizer(dres: &DiagonalResult, tol: f64) -> Result<Orthogonalizer> {
    let (f, h, d) = (&dres.source, &dres.image, &dres.d);
    let cutoff = if tol > 0.0 {
        tol
    } else {
        default_rank_tol(d.rows(), d.cols(), dres.norm)
    };
    let mut weight = Mat::zeros(d.rows(), d.rows());
    let mut nu = Vec::new();
    let mut rank = 0;
    for pair in dres.partition.indices().windows(2) {
        let (a, z) = (pair[0], pair[1]);
        let eh = h.increment(a, z);
        let ef = f.increment(a, z);
        if eh.cols() == 0 || ef.cols() == 0 {
            nu.push(None);
            continue;
        }
        let block = eh.tmatmul(&d.matmul(&ef));
        let parts = svd(&block)?;
        let r = parts.s.iter().take_while(|&&s| s > cutoff).count();
        rank += r;
        let inv = Mat::from_fn(eh.cols(), eh.cols(), |i, j| {
            (0..r).map(|k| parts.u[(i, k)] * parts.u[(j, k)] / parts.s[k]).sum()
        });
        let local = eh.matmul(&inv).matmul(&eh.transpose());
        weight.axpy(1.0, &local);
        nu.push((eh.cols() == 1 && r == 1).then(|| 1.0 / parts.s[0]));
    }
    if rank == 0 {
        return Err(Error::ZeroOperator);
    }
    let psi = weight.matmul(d);
    Ok(Orthogonalizer {
        psi,
        weight,
        nu,
        rank,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct IntertwiningReport {
    /// `max_s ‖P_s D − D X_s‖`.
    pub defect: f64,
    /// Max over `s` of the defects of `X_s|D| = |D|X_s`, `P_s|D*| = |D*|P_s`
    /// and `X_s Φ* = Φ* P_s`.
    pub commutation_defect: f64,
}

/// Spectral-norm intertwining check against explicit projection families.
pub fn intertwining_check(
    d: &Mat,
    f_proj: &ProjectionNest,
    h_proj: &ProjectionNest,
) -> Result<IntertwiningReport> {
    if f_proj.projections.len() != h_proj.projections.len() {
        return Err(Error::DimensionMismatch {
            context: "projection nest lengths",
            expected: f_proj.projections.len(),
            found: h_proj.projections.len(),
        });
    }
    for (x, p) in f_proj.projections.iter().zip(&h_proj.projections) {
        if x.rows() != d.cols() || p.rows() != d.rows() {
            return Err(Error::DimensionMismatch {
                context: "projection size",
                expected: d.cols(),
                found: x.rows(),
            });
        }
    }
    let spec = |a: &Mat| singular_values(a).map(|s| s.first().copied().unwrap_or(0.0));
    let moduli = match (polar(d, 0.0), polar_adjoint(d, 0.0)) {
        (Ok(pd), Ok(pa)) => Some((pd.modulus, pa.modulus, pa.phi)),
        (Err(Error::ZeroOperator), _) | (_, Err(Error::ZeroOperator)) => None,
        (Err(e), _) | (_, Err(e)) => return Err(e),
    };
    let mut defect: f64 = 0.0;
    let mut comm: f64 = 0.0;
    for (x, p) in f_proj.projections.iter().zip(&h_proj.projections) {
        defect = defect.max(spec(&(&p.matmul(d) - &d.matmul(x)))?);
        if let Some((md, mda, phi)) = &moduli {
            comm = comm.max(spec(&(&x.matmul(md) - &md.matmul(x)))?);
            comm = comm.max(spec(&(&p.matmul(mda) - &mda.matmul(p)))?);
            comm = comm.max(spec(&(&x.matmul(phi) - &phi.matmul(p)))?);
        }
    }
    Ok(IntertwiningReport {
        defect,
        commutation_defect: comm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::polar_adjoint;
    use crate::nest::Orientation;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fwd(n: usize) -> Nest {
        Nest::coordinate(n, Orientation::Forward).unwrap()
    }

    fn reversal(n: usize) -> Mat {
        Mat::from_fn(n, n, |i, j| (i + j + 1 == n) as u8 as f64)
    }

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Mat {
        Mat::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn identity_diagonal() {
        let r = finite_diagonal(&Mat::identity(5), &fwd(5)).unwrap();
        assert!((&r.d - &Mat::identity(5)).norm_max() < 1e-15);
        assert!(r.isometric_adjoint);
    }

    #[test]
    fn reversal_diagonal_is_reversal() {
        // ΔX_k = e_k e_kᵀ and W e_k = e_{n-1-k} spans ΔP_k, so each term is e_{n-1-k} e_kᵀ
        let j = reversal(4);
        let r = finite_diagonal(&j, &fwd(4)).unwrap();
        assert!((&r.d - &j).norm_max() < 1e-15);
        assert!(r.intertwine_defect < 1e-14);
    }

    #[test]
    fn two_step_rank_one() {
        // W = (·, (e1+e2)/√2) e1: step 1 maps e1 to e1/√2, step 2 adds nothing new to the image
        let s = 0.5f64.sqrt();
        let w = Mat::outer(&[1.0, 0.0], &[s, s]);
        let r = finite_diagonal(&w, &fwd(2)).unwrap();
        let expect = Mat::from_rows(&[vec![s, 0.0], vec![0.0, 0.0]]).unwrap();
        assert!((&r.d - &expect).norm_max() < 1e-15);
    }

    #[test]
    fn full_partition_matches_finite() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = random(6, 6, &mut rng);
        let f = fwd(6);
        let h = image_nest(&w, &f, 0.0).unwrap();
        let a = finite_diagonal(&w, &f).unwrap();
        let b = partition_diagonal(&w, &f, &h, &Partition::full(&f)).unwrap();
        assert_eq!(a.d, b.d);
    }

    #[test]
    fn partition_validation() {
        let f = fwd(4);
        assert!(matches!(
            Partition::on_grid(&f, &[0.0, 0.3, 1.0]),
            Err(Error::PartitionNotOnGrid { .. })
        ));
        assert!(Partition::on_grid(&f, &[0.0, 0.5]).is_err());
        let p = Partition::on_grid(&f, &[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(p.indices(), &[0, 2, 4]);
        assert_eq!(p.range(), 0.5);
        assert_eq!(Partition::uniform(&f, 2).unwrap(), p);
    }

    #[test]
    fn dimension_mismatch() {
        let f = fwd(3);
        assert!(matches!(
            finite_diagonal(&Mat::identity(4), &f),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn compact_surrogate_decays_under_halving() {
        let n = 64;
        let f = fwd(n);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let w = {
            let a = random(n, 3, &mut rng);
            let t: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
            let b = Mat::from_fn(n, 3, |i, k| ((k + 1) as f64 * t[i]).sin());
            a.matmul(&b.transpose())
        };
        let schedule: Vec<Partition> = [2, 4, 8, 16, 32]
            .iter()
            .map(|&m| Partition::uniform(&f, m).unwrap())
            .collect();
        let sweep = refinement_sweep(&w, &f, &schedule).unwrap();
        let norms: Vec<f64> = sweep.results.iter().map(|r| r.norm).collect();
        assert!(norms.windows(2).all(|p| p[1] < p[0]), "{norms:?}");
        assert!(norms[4] < 0.3 * norms[0]);
    }

    #[test]
    fn sweep_of_identity_is_constant() {
        let f = fwd(16);
        let schedule: Vec<Partition> = [2, 4, 8].iter().map(|&m| Partition::uniform(&f, m).unwrap()).collect();
        let sweep = refinement_sweep(&Mat::identity(16), &f, &schedule).unwrap();
        assert!(sweep.diffs.iter().all(|&d| d < 1e-14));
        let reversed: Vec<Partition> = schedule.into_iter().rev().collect();
        assert!(matches!(
            refinement_sweep(&Mat::identity(16), &f, &reversed),
            Err(Error::UnorderedSchedule)
        ));
    }

    #[test]
    fn orthogonalizer_examples() {
        let o = orthogonalizer(&finite_diagonal(&Mat::identity(3), &fwd(3)).unwrap(), 0.0).unwrap();
        assert!((&o.psi - &Mat::identity(3)).norm_max() < 1e-15);
        let r = finite_diagonal(&Mat::from_diag(&[2.0, 3.0]), &fwd(2)).unwrap();
        let o = orthogonalizer(&r, 0.0).unwrap();
        assert!((&o.weight - &Mat::from_diag(&[0.5, 1.0 / 3.0])).norm_max() < 1e-15);
        assert!((&o.psi - &Mat::identity(2)).norm_max() < 1e-15);
        assert_eq!(o.nu, vec![Some(0.5), Some(1.0 / 3.0)]);
    }

    #[test]
    fn orthogonalizer_matches_polar_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = random(10, 10, &mut rng);
        let r = finite_diagonal(&w, &fwd(10)).unwrap();
        let o = orthogonalizer(&r, 0.0).unwrap();
        let phi_star = polar_adjoint(&r.d, 0.0).unwrap().phi;
        assert!((&o.psi.transpose() - &phi_star).norm_spectral() <= 1e-8);
        assert!((&o.psi.tmatmul(&o.psi) - &Mat::identity(10)).norm_spectral() <= 1e-8);
    }

    #[test]
    fn nu_does_not_depend_on_increment_sign() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let w = random(6, 6, &mut rng);
        let f = fwd(6);
        let r = finite_diagonal(&w, &f).unwrap();
        let o = orthogonalizer(&r, 0.0).unwrap();
        for k in 1..f.len() {
            let fk = f.increment(k - 1, k).col(0);
            let neg: Vec<f64> = fk.iter().map(|x| -x).collect();
            let p = r.image.increment(k - 1, k);
            let proj = p.matmul(&p.transpose());
            let via = |v: &[f64]| 1.0 / proj.matmul(&w).matvec(v).iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((via(&fk) - via(&neg)).abs() < 1e-14);
            assert!((via(&fk) - o.nu[k - 1].unwrap()).abs() < 1e-12 * via(&fk));
        }
    }

    #[test]
    fn orthogonalizer_ignores_basis_rotation_inside_steps() {
        // rank-2 steps given by rotated bases must give the same Ψ
        let n = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let w = random(n, n, &mut rng);
        let th: f64 = 0.7;
        let (c, s) = (th.cos(), th.sin());
        let e = |i: usize, j: usize| (i == j) as u8 as f64;
        let step1 = Mat::from_fn(n, 2, |i, j| match j {
            0 => c * e(i, 0) + s * e(i, 1),
            _ => -s * e(i, 0) + c * e(i, 1),
        });
        let plain = Nest::from_steps(n, vec![0.0, 0.5, 1.0], &[Mat::zeros(n, 0), Mat::identity(n).columns(0, 2), Mat::identity(n)]).unwrap();
        let rotated = Nest::from_steps(n, vec![0.0, 0.5, 1.0], &[Mat::zeros(n, 0), step1, Mat::identity(n)]).unwrap();
        let a = orthogonalizer(&finite_diagonal(&w, &plain).unwrap(), 0.0).unwrap();
        let b = orthogonalizer(&finite_diagonal(&w, &rotated).unwrap(), 0.0).unwrap();
        assert!((&a.psi - &b.psi).norm_max() < 1e-12);
        assert!(a.nu.iter().all(Option::is_none));
    }

    #[test]
    fn intertwining_check_examples() {
        let f = fwd(5);
        let p = f.projection_nest();
        let rep = intertwining_check(&Mat::identity(5), &p, &p).unwrap();
        assert_eq!(rep.defect, 0.0);

        let r = finite_diagonal(&reversal(5), &f).unwrap();
        let rep = intertwining_check(&r.d, &p, &r.image.projection_nest()).unwrap();
        assert!(rep.defect <= 1e-10 && rep.commutation_defect <= 1e-10);

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let noisy = &r.d + &random(5, 5, &mut rng).scale(1e-3);
        let rep = intertwining_check(&noisy, &p, &r.image.projection_nest()).unwrap();
        assert!(rep.defect > 1e-4 && rep.defect < 1e-2, "{}", rep.defect);
    }

    #[test]
    fn coordinate_defect_sees_perturbations() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let w = random(6, 6, &mut rng);
        let f = fwd(6);
        let mut r = finite_diagonal(&w, &f).unwrap();
        assert!(r.intertwine_defect < 1e-13);
        r.d[(0, 5)] += 1e-3;
        let again = coordinate_intertwine_defect(&r.d, &f, &r.image, &r.partition);
        let direct = intertwining_check(&r.d, &f.projection_nest(), &r.image.projection_nest())
            .unwrap()
            .defect;
        assert!(again >= direct * (1.0 - 1e-9) && again < 1e-2, "{again} {direct}");
    }

    #[test]
    fn defect_estimate_has_no_cancellation_noise() {
        let n = 128;
        let h = 1.0 / n as f64;
        let w = &Mat::identity(n) + &Mat::from_fn(n, n, |i, j| h * (3.0 * (i as f64 - j as f64) * h).cos());
        let f = fwd(n);
        let himg = image_nest(&w, &f, 0.0).unwrap();
        for m in [8, 32] {
            let r = partition_diagonal(&w, &f, &himg, &Partition::uniform(&f, m).unwrap()).unwrap();
            assert!(r.intertwine_defect < 1e-12, "{m}: {}", r.intertwine_defect);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn norm_bound(n in 2usize..12, extra in 0usize..3, m in 1usize..6, seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = random(n + extra, n, &mut rng);
            let f = fwd(n);
            let h = image_nest(&w, &f, 0.0).unwrap();
            let xi = Partition::uniform(&f, m.min(n)).unwrap();
            let r = partition_diagonal(&w, &f, &h, &xi).unwrap();
            prop_assert!(r.norm <= r.norm_w + 1e-9);
        }

        #[test]
        fn rank_one_bound(n in 2usize..24, m in 1usize..8, seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let phi: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let psi: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let w = Mat::outer(&psi, &phi);
            let f = fwd(n);
            let h = image_nest(&w, &f, 0.0).unwrap();
            let xi = Partition::uniform(&f, m.min(n)).unwrap();
            let r = partition_diagonal(&w, &f, &h, &xi).unwrap();
            let npsi = psi.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!(r.norm <= rank_one_delta(&f, &xi, &phi).sqrt() * npsi + 1e-12);
        }

        #[test]
        fn finite_diagonals_intertwine(n in 2usize..10, seed in 0u64..10_000, delayed in any::<bool>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w = random(n, n, &mut rng);
            let f = Nest::coordinate(n, if delayed { Orientation::Delayed } else { Orientation::Forward }).unwrap();
            let r = finite_diagonal(&w, &f).unwrap();
            prop_assert!(r.intertwine_defect <= 1e-9);
            let rep = intertwining_check(&r.d, &f.projection_nest(), &r.image.projection_nest()).unwrap();
            prop_assert!(rep.defect <= 1e-9);
            prop_assert!(rep.commutation_defect <= 1e-8);
        }
    }
}
