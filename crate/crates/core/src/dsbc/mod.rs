//! Boundary control of the 1D wave equation `u_tt = u_xx − q(x) u` on the
//! half line, with the Dirichlet trace `u(0, t) = f(t)` as control and zero
//! initial data.
//!
//! The connecting operator `C = WᵀW` of the system is factored along the
//! delayed-control nest. The canonical factor `V` is a model of the control
//! operator `W` (they differ by a unitary), and the graph pairs
//! `(Vf, −Vf̈)` of the model reveal the potential at travel-time
//! coordinates `x = T − t`.
//!
//! Grids: space step `h = T/nx`, time step `τ = T/nt`, `cfl = τ/h ≤ 1`.
//! Controls are grid hats at `t_1 … t_nt`; their coefficient vectors are the
//! control samples.

mod model;
mod pipeline;
mod response;
mod solver;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use model::{
    default_control_bank, extract_potential, model_from_factorization, recovery_stats, unitary_equivalence_check,
    BumpControl, ModelOperator, ModelPair, RecoveredPotential, RecoveryStats, UnitaryReport, DEFAULT_FLOOR,
    DEFAULT_MIN_CONTRIBUTORS,
};
pub use pipeline::{locality_check, run_forward, run_inversion, ForwardReport, InversionReport, LocalityReport};
pub use response::{connecting_from_response, hat_controls};
pub use solver::{connecting_direct, control_operator, response_operator, solve_wave, Trace, WaveField};

/// Potential `q(x)` on `x ≥ 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Potential {
    Zero,
    Const {
        value: f64,
    },
    /// `height · exp(1 − 1/(1 − z²))` with `z = (x − center)/width`, zero for `|z| ≥ 1`.
    Bump {
        #[serde(default = "default_bump_center")]
        center: f64,
        #[serde(default = "default_bump_width")]
        width: f64,
        #[serde(default = "default_bump_height")]
        height: f64,
    },
    /// Piecewise linear through the samples, constant beyond the ends.
    Table {
        x: Vec<f64>,
        q: Vec<f64>,
    },
}

fn default_bump_center() -> f64 {
    0.4
}

fn default_bump_width() -> f64 {
    0.15
}

fn default_bump_height() -> f64 {
    1.0
}

impl Potential {
    pub fn bump() -> Potential {
        Potential::Bump {
            center: default_bump_center(),
            width: default_bump_width(),
            height: default_bump_height(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Potential::Zero => Ok(()),
            Potential::Const { value } => finite(&[*value]),
            Potential::Bump { center, width, height } => {
                finite(&[*center, *width, *height])?;
                if *width <= 0.0 {
                    return Err(Error::Config(format!("bump width must be positive, got {width}")));
                }
                Ok(())
            }
            Potential::Table { x, q } => {
                if x.is_empty() || x.len() != q.len() {
                    return Err(Error::Config(format!(
                        "potential table needs matching non-empty x and q (got {} and {})",
                        x.len(),
                        q.len()
                    )));
                }
                finite(x)?;
                finite(q)?;
                if x.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Config("potential table x must increase strictly".into()));
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::Const { value } => *value,
            Potential::Bump { center, width, height } => {
                let z = (x - center) / width;
                if z.abs() >= 1.0 {
                    0.0
                } else {
                    height * (1.0 - 1.0 / (1.0 - z * z)).exp()
                }
            }
            Potential::Table { x: xs, q } => {
                let k = xs.partition_point(|&v| v <= x);
                if k == 0 {
                    q[0]
                } else if k == xs.len() {
                    q[k - 1]
                } else {
                    let s = (x - xs[k - 1]) / (xs[k] - xs[k - 1]);
                    q[k - 1] + s * (q[k] - q[k - 1])
                }
            }
        }
    }
}

fn finite(v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

/// Grid and potential of one boundary-control system.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveSystem {
    /// Control horizon `T`.
    pub t_end: f64,
    pub nx: usize,
    pub nt: usize,
    pub potential: Potential,
}

impl WaveSystem {
    pub fn new(t_end: f64, nx: usize, nt: usize, potential: Potential) -> Result<WaveSystem> {
        if !(t_end.is_finite() && t_end > 0.0) {
            return Err(Error::GridMismatch(format!("horizon must be positive, got {t_end}")));
        }
        if nx < 2 || nt < 2 {
            return Err(Error::GridMismatch(format!("need at least 2 cells per axis, got nx={nx}, nt={nt}")));
        }
        if nx > nt {
            return Err(Error::CflViolation {
                cfl: nx as f64 / nt as f64,
            });
        }
        potential.validate()?;
        Ok(WaveSystem {
            t_end,
            nx,
            nt,
            potential,
        })
    }

    /// `cfl = 1` system with `n` cells per axis.
    pub fn matched(t_end: f64, n: usize, potential: Potential) -> Result<WaveSystem> {
        WaveSystem::new(t_end, n, n, potential)
    }

    pub fn h(&self) -> f64 {
        self.t_end / self.nx as f64
    }

    pub fn tau(&self) -> f64 {
        self.t_end / self.nt as f64
    }

    pub fn cfl(&self) -> f64 {
        self.nx as f64 / self.nt as f64
    }

    /// Times `t_1 … t_nt` of the control hats.
    pub fn control_times(&self) -> Vec<f64> {
        (1..=self.nt).map(|k| k as f64 * self.tau()).collect()
    }

    /// Same spacing, shorter horizon. `t_end` is rounded to the grid.
    pub fn truncated(&self, t_end: f64) -> Result<WaveSystem> {
        let nx = (t_end / self.h()).round() as usize;
        let nt = (t_end / self.tau()).round() as usize;
        WaveSystem::new(nx as f64 * self.h(), nx, nt, self.potential.clone())
    }
}

/// Which operator the connecting matrix comes from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConnectingPath {
    /// `WᵀW` from interior states.
    #[default]
    Direct,
    /// Boundary data only.
    Response,
}

/// Scenario file for the forward and inverse runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(rename = "T")]
    pub t_end: f64,
    pub nx: usize,
    pub nt: usize,
    /// Checked against `nx/nt` when present.
    #[serde(default)]
    pub cfl: Option<f64>,
    pub potential: Potential,
    /// Length of the recorded response, default `2T`.
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default = "default_recovery_tol")]
    pub recovery_tol: f64,
    #[serde(default)]
    pub connecting: ConnectingPath,
    /// Truncated horizon for the locality rerun, as a fraction of `T`.
    #[serde(default)]
    pub locality_fraction: Option<f64>,
}

fn default_recovery_tol() -> f64 {
    0.1
}

impl Scenario {
    pub fn new(t_end: f64, n: usize, potential: Potential) -> Scenario {
        Scenario {
            t_end,
            nx: n,
            nt: n,
            cfl: None,
            potential,
            horizon: None,
            recovery_tol: default_recovery_tol(),
            connecting: ConnectingPath::Direct,
            locality_fraction: None,
        }
    }

    pub fn system(&self) -> Result<WaveSystem> {
        let sys = WaveSystem::new(self.t_end, self.nx, self.nt, self.potential.clone())?;
        if let Some(cfl) = self.cfl {
            if cfl > 1.0 {
                return Err(Error::CflViolation { cfl });
            }
            if (cfl - sys.cfl()).abs() > 1e-12 {
                return Err(Error::GridMismatch(format!(
                    "cfl {cfl} does not match nx/nt = {}",
                    sys.cfl()
                )));
            }
        }
        if !(self.recovery_tol > 0.0) {
            return Err(Error::Config(format!("recovery_tol must be positive, got {}", self.recovery_tol)));
        }
        if let Some(frac) = self.locality_fraction {
            if !(frac > 0.0 && frac < 1.0) {
                return Err(Error::Config(format!("locality_fraction must lie in (0, 1), got {frac}")));
            }
        }
        Ok(sys)
    }

    /// Response length in time steps.
    pub fn horizon_steps(&self) -> usize {
        let tau = self.t_end / self.nt as f64;
        match self.horizon {
            Some(h) => (h / tau).round() as usize,
            None => 2 * self.nt,
        }
    }

    pub fn read_json(path: impl AsRef<std::path::Path>) -> Result<Scenario> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_shape() {
        let p = Potential::bump();
        assert!((p.eval(0.4) - 1.0).abs() < 1e-15);
        assert_eq!(p.eval(0.25), 0.0);
        assert_eq!(p.eval(0.56), 0.0);
        assert!(p.eval(0.45) > 0.0 && p.eval(0.45) < 1.0);
    }

    #[test]
    fn table_interpolates() {
        let p = Potential::Table {
            x: vec![0.0, 1.0],
            q: vec![2.0, 4.0],
        };
        assert_eq!(p.eval(0.25), 2.5);
        assert_eq!(p.eval(-1.0), 2.0);
        assert_eq!(p.eval(3.0), 4.0);
        let bad = Potential::Table {
            x: vec![1.0, 0.0],
            q: vec![0.0, 0.0],
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn scenario_json() {
        let s: Scenario = serde_json::from_str(
            r#"{"T": 1.0, "nx": 200, "nt": 200, "cfl": 1.0, "potential": {"kind": "bump", "height": 2.0}}"#,
        )
        .unwrap();
        assert_eq!(s.recovery_tol, 0.1);
        assert_eq!(s.horizon_steps(), 400);
        assert_eq!(
            s.potential,
            Potential::Bump {
                center: 0.4,
                width: 0.15,
                height: 2.0
            }
        );
        s.system().unwrap();
        let unknown = serde_json::from_str::<Scenario>(r#"{"T": 1, "nx": 4, "nt": 4, "potential": {"kind": "zero"}, "x": 1}"#);
        assert!(unknown.is_err());
    }

    #[test]
    fn grid_checks() {
        assert!(matches!(
            WaveSystem::new(1.0, 20, 10, Potential::Zero),
            Err(Error::CflViolation { .. })
        ));
        let mut s = Scenario::new(1.0, 10, Potential::Zero);
        s.cfl = Some(0.5);
        assert!(matches!(s.system(), Err(Error::GridMismatch(_))));
        let sys = WaveSystem::new(1.0, 10, 20, Potential::Zero).unwrap();
        assert_eq!(sys.cfl(), 0.5);
        let short = sys.truncated(0.6).unwrap();
        assert_eq!((short.nx, short.nt), (6, 12));
        assert!((short.h() - sys.h()).abs() < 1e-15);
    }
}
