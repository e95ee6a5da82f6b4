use serde::Serialize;

use super::WaveSystem;
use crate::error::{Error, Result};
use crate::factor::{factor_finite, FactorizationResult};
use crate::linops::{polar, Mat};
use crate::nest::{Nest, Orientation};

/// Relative amplitude below which `g` is not divided by.
pub const DEFAULT_FLOOR: f64 = 0.05;
/// Test controls that must agree at a point before it enters the mask.
pub const DEFAULT_MIN_CONTRIBUTORS: usize = 3;

/// `exp(−1/(1 − z²))`, `z = (t − center)/half_width`: smooth, flat at the
/// ends of its support.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BumpControl {
    pub center: f64,
    pub half_width: f64,
}

impl BumpControl {
    fn z(&self, t: f64) -> Option<f64> {
        let z = (t - self.center) / self.half_width;
        (z.abs() < 1.0).then_some(z)
    }

    pub fn value(&self, t: f64) -> f64 {
        self.z(t).map_or(0.0, |z| (-1.0 / (1.0 - z * z)).exp())
    }

    /// Second time derivative, analytic.
    pub fn second(&self, t: f64) -> f64 {
        self.z(t).map_or(0.0, |z| {
            let s = 1.0 - z * z;
            let b = (-1.0 / s).exp();
            b * (4.0 * z * z / s.powi(4) - 2.0 / (s * s) - 8.0 * z * z / s.powi(3)) / self.half_width.powi(2)
        })
    }
}

/// Half-width `T/2`, centers at `T·{0.5, 0.6, 0.7, 0.8, 0.9}`.
pub fn default_control_bank(t_end: f64) -> Vec<BumpControl> {
    (5..=9)
        .map(|k| BumpControl {
            center: t_end * k as f64 / 10.0,
            half_width: t_end / 2.0,
        })
        .collect()
}

/// A point `(Vf, −Vf̈)` of the model graph.
#[derive(Clone, Debug)]
pub struct ModelPair {
    pub control: BumpControl,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ModelOperator {
    /// Control times `t_1 … t_nt`, also the coordinates of `V`'s range.
    pub t: Vec<f64>,
    pub tau: f64,
    pub t_end: f64,
    pub factor: FactorizationResult,
    pub pairs: Vec<ModelPair>,
}

/// Factors `c` along the delayed nest and applies the factor to the bank.
pub fn model_from_factorization(c: &Mat, sys: &WaveSystem, bank: &[BumpControl]) -> Result<ModelOperator> {
    if c.rows() != sys.nt {
        return Err(Error::DimensionMismatch {
            context: "connecting operator",
            expected: sys.nt,
            found: c.rows(),
        });
    }
    let nest = Nest::coordinate_on(sys.nt, Orientation::Delayed, sys.t_end)?;
    let factor = factor_finite(c, &nest)?;
    let t = sys.control_times();
    let pairs = bank
        .iter()
        .map(|&ctl| {
            let f: Vec<f64> = t.iter().map(|&s| ctl.value(s)).collect();
            let fdd: Vec<f64> = t.iter().map(|&s| -ctl.second(s)).collect();
            ModelPair {
                control: ctl,
                g: factor.v.matvec(&f),
                h: factor.v.matvec(&fdd),
            }
        })
        .collect();
    Ok(ModelOperator {
        t,
        tau: sys.tau(),
        t_end: sys.t_end,
        factor,
        pairs,
    })
}

/// `q̃` on the control times. Masked-out points carry `q = 0`.
#[derive(Clone, Debug)]
pub struct RecoveredPotential {
    pub t: Vec<f64>,
    pub t_end: f64,
    pub q: Vec<f64>,
    pub mask: Vec<bool>,
    pub contributors: Vec<usize>,
}

impl RecoveredPotential {
    /// Travel-time coordinate `x = T − t` of each sample.
    pub fn x(&self) -> Vec<f64> {
        self.t.iter().map(|&t| self.t_end - t).collect()
    }
}

/// `q̃ = (h + g̈)/g` per pair where `|g| ≥ floor·max|g|`, endpoints excluded,
/// aggregated by the median over pairs. A point is kept when at least
/// `min_contributors` pairs pass there.
pub fn extract_potential(m: &ModelOperator, floor: f64, min_contributors: usize) -> Result<RecoveredPotential> {
    let n = m.t.len();
    let mut samples: Vec<Vec<f64>> = vec![Vec::new(); n];
    let tau2 = m.tau * m.tau;
    for p in &m.pairs {
        let gmax = p.g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if gmax == 0.0 {
            continue;
        }
        #[allow(clippy::needless_range_loop)]
        for k in 1..n.saturating_sub(1) {
            let g = p.g[k];
            if g.abs() < floor * gmax {
                continue;
            }
            let gdd = (p.g[k + 1] - 2.0 * g + p.g[k - 1]) / tau2;
            samples[k].push((p.h[k] + gdd) / g);
        }
    }
    let contributors: Vec<usize> = samples.iter().map(Vec::len).collect();
    let mask: Vec<bool> = contributors.iter().map(|&c| c > 0 && c >= min_contributors).collect();
    if !mask.iter().any(|&b| b) {
        return Err(Error::EmptyMask);
    }
    let q = samples
        .iter_mut()
        .zip(&mask)
        .map(|(s, &keep)| if keep { median(s) } else { 0.0 })
        .collect();
    Ok(RecoveredPotential {
        t: m.t.clone(),
        t_end: m.t_end,
        q,
        mask,
        contributors,
    })
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Recovered against true potential at `x = T − t`, on the mask.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RecoveryStats {
    /// `‖q̃ − q‖/‖q‖`, or the absolute `‖q̃ − q‖` when `q` vanishes on the mask.
    pub rel_l2: f64,
    pub max_abs: f64,
    /// Largest `|q̃|` on the mask.
    pub max_recovered: f64,
    pub true_norm: f64,
    pub points: usize,
}

pub fn recovery_stats(rec: &RecoveredPotential, sys: &WaveSystem) -> RecoveryStats {
    let (mut err2, mut true2, mut max_abs, mut max_rec, mut points) = (0.0, 0.0, 0.0f64, 0.0f64, 0);
    for (k, &t) in rec.t.iter().enumerate() {
        if !rec.mask[k] {
            continue;
        }
        let q = sys.potential.eval(rec.t_end - t);
        let e = rec.q[k] - q;
        err2 += e * e;
        true2 += q * q;
        max_abs = max_abs.max(e.abs());
        max_rec = max_rec.max(rec.q[k].abs());
        points += 1;
    }
    // L² with the grid weight
    let w = sys.tau();
    let (err, true_norm) = ((err2 * w).sqrt(), (true2 * w).sqrt());
    RecoveryStats {
        rel_l2: if true_norm > 0.0 { err / true_norm } else { err },
        max_abs,
        max_recovered: max_rec,
        true_norm,
        points,
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct UnitaryReport {
    /// `‖W − UV‖/‖W‖`
    pub defect: f64,
    /// `‖UᵀU − I‖`
    pub unitarity: f64,
}

/// `U = Φ_W Φ_Vᵀ` from the polar decompositions of `w` and `v`.
pub fn unitary_equivalence_check(w: &Mat, v: &Mat) -> Result<UnitaryReport> {
    if w.cols() != v.cols() {
        return Err(Error::DimensionMismatch {
            context: "unitary equivalence",
            expected: w.cols(),
            found: v.cols(),
        });
    }
    let k = w.cols();
    let pw = polar(w, 0.0)?;
    let pv = polar(v, 0.0)?;
    for p in [&pw, &pv] {
        if p.rank < k {
            return Err(Error::RankDeficient { rank: p.rank, dim: k });
        }
    }
    let u = pw.phi.matmul(&pv.phi.transpose());
    let nw = w.norm_spectral();
    let defect = (w - &u.matmul(v)).norm_spectral() / nw;
    let unitarity = (&u.tmatmul(&u) - &Mat::identity(k)).norm_spectral();
    Ok(UnitaryReport { defect, unitarity })
}
