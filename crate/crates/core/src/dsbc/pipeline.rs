use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use super::model::{
    default_control_bank, extract_potential, model_from_factorization, recovery_stats, unitary_equivalence_check,
    RecoveredPotential, RecoveryStats, UnitaryReport, DEFAULT_FLOOR, DEFAULT_MIN_CONTRIBUTORS,
};
use super::response::{connecting_from_response, hat_controls};
use super::solver::{connecting_direct, control_operator, response_operator, Trace};
use super::{ConnectingPath, Scenario, WaveSystem};
use crate::error::{Error, Result};
use crate::linops::{singular_values, sym_eig, Mat};
use crate::report::Check;

/// Forward run: operators of the system and their diagnostics.
#[derive(Clone, Debug, Serialize)]
pub struct ForwardReport {
    pub nx: usize,
    pub nt: usize,
    pub cfl: f64,
    pub t_end: f64,
    pub horizon_steps: usize,
    /// Smallest eigenvalue of `C` relative to `‖C‖`.
    pub connecting_min_eig: f64,
    pub connecting_norm: f64,
    /// Smallest singular value of `W`.
    pub w_min_singular: f64,
    /// `‖C_response − C_direct‖/‖C_direct‖` when the record covers `2T`.
    pub response_path_defect: Option<f64>,
    #[serde(skip)]
    pub w: Mat,
    #[serde(skip)]
    pub c: Mat,
    /// Second-order Neumann response of the hat at `t_1`, `t_0 … t_horizon`.
    #[serde(skip)]
    pub base_response: Vec<f64>,
}

impl ForwardReport {
    pub fn checks(&self) -> Vec<Check> {
        let mut v = vec![Check::at_least("connecting_min_eig", self.connecting_min_eig, -1e-8)];
        if let Some(d) = self.response_path_defect {
            v.push(Check::at_most("response_path_defect", d, 0.05));
        }
        v
    }

    /// `t,response` for the hat at `t_1`.
    pub fn write_response_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let tau = self.t_end / self.nt as f64;
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "t,response")?;
        for (m, r) in self.base_response.iter().enumerate() {
            writeln!(out, "{:.16e},{:.16e}", m as f64 * tau, r)?;
        }
        Ok(())
    }
}

pub fn run_forward(sc: &Scenario) -> Result<ForwardReport> {
    let sys = sc.system()?;
    let steps = sc.horizon_steps();
    let w = control_operator(&sys)?;
    let c = connecting_direct(&w);
    let eig = sym_eig(&c)?;
    let norm = eig.values[0];
    let w_min = singular_values(&w)?.last().copied().unwrap_or(0.0);
    let response = response_operator(&sys, steps, Trace::SecondOrder)?;
    let response_path_defect = if steps >= 2 * sys.nt {
        let cr = connecting_via_response(&sys, steps)?;
        Some((&cr - &c).norm_spectral() / c.norm_spectral())
    } else {
        None
    };
    Ok(ForwardReport {
        nx: sys.nx,
        nt: sys.nt,
        cfl: sys.cfl(),
        t_end: sys.t_end,
        horizon_steps: steps,
        connecting_min_eig: eig.values[sys.nt - 1] / norm,
        connecting_norm: norm,
        w_min_singular: w_min,
        response_path_defect,
        w,
        c,
        base_response: response.col(0),
    })
}

fn connecting_via_response(sys: &WaveSystem, steps: usize) -> Result<Mat> {
    let rho = response_operator(sys, steps, Trace::FirstOrder)?;
    connecting_from_response(sys, &hat_controls(sys.nt, steps), &rho)
}

/// Recovered potential on the horizon-truncated system compared with the full one.
#[derive(Clone, Debug, Serialize)]
pub struct LocalityReport {
    pub t_short: f64,
    /// Masked samples common to both runs.
    pub overlap: usize,
    /// `‖q̃_T − q̃_T′‖/‖q̃_T‖` over the common samples.
    pub difference: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct InversionReport {
    pub nx: usize,
    pub nt: usize,
    pub t_end: f64,
    pub connecting: ConnectingPath,
    pub factor_residual: f64,
    pub tri_defect: f64,
    pub recovery: RecoveryStats,
    pub recovery_tol: f64,
    pub unitary: UnitaryReport,
    pub locality: Option<LocalityReport>,
    #[serde(skip)]
    pub recovered: RecoveredPotential,
    #[serde(skip)]
    pub system: Option<WaveSystem>,
}

impl InversionReport {
    pub fn checks(&self) -> Vec<Check> {
        let mut v = vec![
            Check::at_most("factor_residual", self.factor_residual, 1e-8),
            Check::at_most("tri_defect", self.tri_defect, 1e-6),
            Check::at_most("recovery_error", self.recovery.rel_l2, self.recovery_tol),
            Check::at_most("unitary_defect", self.unitary.defect, 1e-4),
            Check::at_most("unitarity", self.unitary.unitarity, 1e-6),
        ];
        if let Some(l) = &self.locality {
            v.push(Check::at_most("locality_difference", l.difference, l.bound));
        }
        v
    }

    /// `t,x,q_true_mapped,q_recovered,mask`
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let rec = &self.recovered;
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "t,x,q_true_mapped,q_recovered,mask")?;
        for (k, (&t, x)) in rec.t.iter().zip(rec.x()).enumerate() {
            let q = self.system.as_ref().map_or(f64::NAN, |s| s.potential.eval(x));
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{}",
                t,
                x,
                q,
                rec.q[k],
                u8::from(rec.mask[k])
            )?;
        }
        Ok(())
    }
}

fn recover(sys: &WaveSystem, path: ConnectingPath, steps: usize) -> Result<(Mat, RecoveredPotential, InversionParts)> {
    let w = control_operator(sys)?;
    let c = match path {
        ConnectingPath::Direct => connecting_direct(&w),
        ConnectingPath::Response => {
            if steps < 2 * sys.nt {
                return Err(Error::HorizonTooShort {
                    needed: 2 * sys.nt + 1,
                    available: steps + 1,
                });
            }
            connecting_via_response(sys, steps)?
        }
    };
    let model = model_from_factorization(&c, sys, &default_control_bank(sys.t_end))?;
    let rec = extract_potential(&model, DEFAULT_FLOOR, DEFAULT_MIN_CONTRIBUTORS)?;
    let parts = InversionParts {
        residual: model.factor.residual,
        tri_defect: model.factor.tri_defect,
        v: model.factor.v,
    };
    Ok((w, rec, parts))
}

struct InversionParts {
    residual: f64,
    tri_defect: f64,
    v: Mat,
}

/// Full inverse pipeline: connecting operator, factor along the delayed
/// nest, model graph, recovered potential.
pub fn run_inversion(sc: &Scenario) -> Result<InversionReport> {
    let sys = sc.system()?;
    let (w, rec, parts) = recover(&sys, sc.connecting, sc.horizon_steps())?;
    let recovery = recovery_stats(&rec, &sys);
    let unitary = unitary_equivalence_check(&w, &parts.v)?;
    let locality = match sc.locality_fraction {
        Some(frac) => Some(compare_truncated(&sys, &rec, frac, sc.recovery_tol)?),
        None => None,
    };
    Ok(InversionReport {
        nx: sys.nx,
        nt: sys.nt,
        t_end: sys.t_end,
        connecting: sc.connecting,
        factor_residual: parts.residual,
        tri_defect: parts.tri_defect,
        recovery,
        recovery_tol: sc.recovery_tol,
        unitary,
        locality,
        recovered: rec,
        system: Some(sys),
    })
}

/// Reruns on `[0, fraction·T]` with the same grid spacing and compares the
/// recovered potentials where both masks cover the same `x`.
pub fn locality_check(sc: &Scenario, fraction: f64) -> Result<LocalityReport> {
    let sys = sc.system()?;
    let (_, rec, _) = recover(&sys, ConnectingPath::Direct, 0)?;
    compare_truncated(&sys, &rec, fraction, sc.recovery_tol)
}

fn compare_truncated(sys: &WaveSystem, full: &RecoveredPotential, fraction: f64, tol: f64) -> Result<LocalityReport> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!("locality fraction must lie in (0, 1), got {fraction}")));
    }
    let short_sys = sys.truncated(fraction * sys.t_end)?;
    let (_, short, _) = recover(&short_sys, ConnectingPath::Direct, 0)?;
    let tau = sys.tau();
    let keyed = |r: &RecoveredPotential| -> BTreeMap<i64, f64> {
        r.x()
            .iter()
            .zip(&r.q)
            .zip(&r.mask)
            .filter(|(_, &m)| m)
            .map(|((&x, &q), _)| ((x / tau).round() as i64, q))
            .collect()
    };
    let (a, b) = (keyed(full), keyed(&short));
    let (mut diff2, mut norm2, mut overlap) = (0.0, 0.0, 0);
    for (k, qa) in &a {
        if let Some(qb) = b.get(k) {
            diff2 += (qa - qb).powi(2);
            norm2 += qa * qa;
            overlap += 1;
        }
    }
    if overlap == 0 {
        return Err(Error::EmptyMask);
    }
    let difference = if norm2 > 0.0 {
        (diff2 / norm2).sqrt()
    } else {
        (diff2 * tau).sqrt()
    };
    Ok(LocalityReport {
        t_short: short_sys.t_end,
        overlap,
        difference,
        bound: 2.0 * tol,
    })
}
