use super::WaveSystem;
use crate::error::{Error, Result};
use crate::linops::Mat;

/// One-sided difference used for `u_x(0, t)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Trace {
    /// `(u_1 − u_0)/h`
    FirstOrder,
    /// `(−3u_0 + 4u_1 − u_2)/(2h)`
    SecondOrder,
}

/// Leapfrog solution, one row per time step `m = 0 … steps`.
#[derive(Clone, Debug)]
pub struct WaveField {
    pub h: f64,
    pub tau: f64,
    /// Samples of `q` on the spatial grid of `u`.
    pub q: Vec<f64>,
    pub u: Mat,
}

impl WaveField {
    pub fn steps(&self) -> usize {
        self.u.rows() - 1
    }

    pub fn state(&self, m: usize) -> &[f64] {
        self.u.row(m)
    }

    pub fn neumann_trace(&self, trace: Trace) -> Vec<f64> {
        (0..self.u.rows())
            .map(|m| {
                let u = self.u.row(m);
                match trace {
                    Trace::FirstOrder => (u[1] - u[0]) / self.h,
                    Trace::SecondOrder => (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * self.h),
                }
            })
            .collect()
    }
}

/// Solves with Dirichlet data `f` given at `t_m = mτ`, `m = 0 … steps`.
///
/// The spatial domain gets one cell per time step plus a margin, so the far
/// boundary is never reached and the solution is that of the half line.
pub fn solve_wave(sys: &WaveSystem, f: &[f64]) -> Result<WaveField> {
    if f.len() < 2 {
        return Err(Error::GridMismatch(format!("control needs at least 2 samples, got {}", f.len())));
    }
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    if f[0] != 0.0 {
        return Err(Error::IncompatibleControl);
    }
    let steps = f.len() - 1;
    let (h, tau) = (sys.h(), sys.tau());
    let lam2 = sys.cfl().powi(2);
    let tau2 = tau * tau;
    let cells = steps.max(sys.nx) + 2;
    let q: Vec<f64> = (0..=cells).map(|i| sys.potential.eval(i as f64 * h)).collect();

    let mut u = Mat::zeros(steps + 1, cells + 1);
    u[(1, 0)] = f[1];
    let mut next = vec![0.0; cells + 1];
    for m in 1..steps {
        {
            let (prev, cur) = (u.row(m - 1), u.row(m));
            // the wave front advances one cell per step
            let reach = (m + 1).min(cells - 1);
            next[0] = f[m + 1];
            for i in 1..=reach {
                next[i] = 2.0 * cur[i] - prev[i] + lam2 * (cur[i + 1] - 2.0 * cur[i] + cur[i - 1])
                    - tau2 * q[i] * cur[i];
            }
        }
        let reach = (m + 1).min(cells - 1);
        for i in 0..=reach {
            u[(m + 1, i)] = next[i];
        }
    }
    Ok(WaveField { h, tau, q, u })
}

/// Field of the hat at `t_1`. Every other hat is a time shift of it.
fn base_field(sys: &WaveSystem, steps: usize) -> Result<WaveField> {
    let mut f = vec![0.0; steps + 1];
    f[1] = 1.0;
    solve_wave(sys, &f)
}

/// `W`: column `c` is the state at `T` driven by the hat at `t_{c+1}`, on
/// `x_0 … x_{nx−1}`, scaled by `sqrt(h/τ)` so that `C = WᵀW`.
pub fn control_operator(sys: &WaveSystem) -> Result<Mat> {
    let nt = sys.nt;
    let field = base_field(sys, nt)?;
    let scale = (sys.h() / sys.tau()).sqrt();
    Ok(Mat::from_fn(sys.nx, nt, |i, c| scale * field.u[(nt - c, i)]))
}

/// Response matrix: row `m` is the Neumann trace at `t_m`, `m = 0 … steps`,
/// column `c` the hat at `t_{c+1}`. Toeplitz by time invariance.
pub fn response_operator(sys: &WaveSystem, steps: usize, trace: Trace) -> Result<Mat> {
    let field = base_field(sys, steps.max(2))?;
    let r = field.neumann_trace(trace);
    Ok(Mat::from_fn(steps + 1, sys.nt, |m, c| if m >= c { r[m - c] } else { 0.0 }))
}

/// `C = WᵀW`, symmetrized.
pub fn connecting_direct(w: &Mat) -> Mat {
    w.tmatmul(w).symmetrize()
}
