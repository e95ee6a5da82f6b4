//! The connecting operator from boundary data alone.
//!
//! For two controls `f, g` put `w(m, j) = h Σ_i u^f_i(t_m) u^g_i(t_j)`. The
//! leapfrog update applied in `m` and in `j` cancels the potential and the
//! interior, leaving the discrete 1+1 wave equation
//!
//! `w(m+1, j) + w(m−1, j) − w(m, j+1) − w(m, j−1) = S(m, j)`
//!
//! with a source built from the boundary values `f, g` and the first-order
//! Neumann traces `ρ^f, ρ^g`:
//!
//! `S = h[(f_{m+1} + f_{m−1}) g_j − f_m (g_{j+1} + g_{j−1}) + cfl²·h (f_m ρ^g_j − ρ^f_m g_j)]`.
//!
//! Zero initial data make `w(0, ·) = 0`, so `w(nt, nt)` is a sum of the
//! source against the fundamental solution over the backward characteristic
//! cone of `(nt, nt)`, which reaches `j = 2nt`. At `cfl = 1` the identity is
//! exact and reproduces `WᵀW`; below it the direct path truncates the
//! dispersive tail beyond `x = T`.

use super::WaveSystem;
use crate::error::{Error, Result};
use crate::linops::Mat;

/// Sample matrix of the hat controls: row `m` is `t_m`, column `c` the hat at `t_{c+1}`.
pub fn hat_controls(nt: usize, steps: usize) -> Mat {
    Mat::from_fn(steps + 1, nt, |m, c| if m == c + 1 { 1.0 } else { 0.0 })
}

/// Fundamental solution of the discrete wave equation `k` steps after a unit
/// source, at offset `d`.
fn fundamental(k: usize, d: usize) -> f64 {
    if k >= 1 && d < k && (k - 1 - d).is_multiple_of(2) {
        1.0
    } else {
        0.0
    }
}

/// `C[a, b] = w_{ab}(nt, nt)/τ` for controls given by their samples
/// (`controls`, rows `t_0 … t_M`) and first-order Neumann traces (`rho`).
///
/// Needs `M ≥ 2·nt`.
pub fn connecting_from_response(sys: &WaveSystem, controls: &Mat, rho: &Mat) -> Result<Mat> {
    let n = sys.nt;
    let needed = 2 * n + 1;
    let available = controls.rows().min(rho.rows());
    if available < needed {
        return Err(Error::HorizonTooShort { needed, available });
    }
    if controls.cols() != rho.cols() {
        return Err(Error::DimensionMismatch {
            context: "response columns",
            expected: controls.cols(),
            found: rho.cols(),
        });
    }
    let k = controls.cols();
    let at = |a: &Mat, m: isize, c: usize| {
        if m < 0 || m as usize >= needed {
            0.0
        } else {
            a[(m as usize, c)]
        }
    };
    // kernel over sources m < n, j ≤ 2n
    let kern = Mat::from_fn(n, needed, |m, j| fundamental(n - m, n.abs_diff(j)));
    let f_sum = Mat::from_fn(n, k, |m, c| at(controls, m as isize + 1, c) + at(controls, m as isize - 1, c));
    let f_now = controls.row_block(0, n);
    let r_now = rho.row_block(0, n);
    let g = controls.row_block(0, needed);
    let g_sum = Mat::from_fn(needed, k, |j, c| at(controls, j as isize + 1, c) + at(controls, j as isize - 1, c));
    let r = rho.row_block(0, needed);

    let (kg, kgs, kr) = (kern.matmul(&g), kern.matmul(&g_sum), kern.matmul(&r));
    let flux = sys.cfl().powi(2) * sys.h();
    let mut c = &f_sum.tmatmul(&kg) - &f_now.tmatmul(&kgs);
    c.axpy(flux, &f_now.tmatmul(&kr));
    c.axpy(-flux, &r_now.tmatmul(&kg));
    Ok(c.scale(sys.h() / sys.tau()).symmetrize())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsbc::{connecting_direct, control_operator, response_operator, solve_wave, Potential, Trace};

    fn from_system(sys: &WaveSystem) -> Mat {
        let steps = 2 * sys.nt;
        let rho = response_operator(sys, steps, Trace::FirstOrder).unwrap();
        connecting_from_response(sys, &hat_controls(sys.nt, steps), &rho).unwrap()
    }

    fn rel(a: &Mat, b: &Mat) -> f64 {
        (a - b).norm_spectral() / b.norm_spectral()
    }

    #[test]
    fn fundamental_solution_matches_recursion() {
        // unit source at step 0, position 10
        let (len, steps) = (21, 9);
        let mut prev = vec![0.0; len];
        let mut cur = vec![0.0; len];
        cur[10] = 1.0;
        for k in 1..=steps {
            for d in 0..=10 {
                assert_eq!(cur[10 + d], fundamental(k, d), "k={k} d={d}");
                assert_eq!(cur[10 - d], fundamental(k, d));
            }
            let mut next = vec![0.0; len];
            for i in 1..len - 1 {
                next[i] = cur[i + 1] + cur[i - 1] - prev[i];
            }
            prev = cur;
            cur = next;
        }
    }

    #[test]
    fn free_system_gives_identity() {
        let sys = WaveSystem::matched(1.0, 40, Potential::Zero).unwrap();
        assert!(rel(&from_system(&sys), &Mat::identity(40)) < 1e-12);
    }

    #[test]
    fn matches_direct_path_at_unit_cfl() {
        for p in [Potential::bump(), Potential::Const { value: 2.0 }] {
            let sys = WaveSystem::matched(1.0, 60, p).unwrap();
            let direct = connecting_direct(&control_operator(&sys).unwrap());
            assert!(rel(&from_system(&sys), &direct) < 1e-10);
        }
    }

    #[test]
    fn smooth_controls_below_unit_cfl() {
        // the hats are rough, so compare on smooth controls where the truncated tail is small
        let sys = WaveSystem::new(1.0, 80, 160, Potential::bump()).unwrap();
        let c = from_system(&sys);
        let direct = connecting_direct(&control_operator(&sys).unwrap());
        let f: Vec<f64> = sys
            .control_times()
            .iter()
            .map(|&t| {
                let z = (t - 0.6) / 0.3;
                if z.abs() < 1.0 {
                    (-1.0 / (1.0 - z * z)).exp()
                } else {
                    0.0
                }
            })
            .collect();
        let quad = |m: &Mat| m.matvec(&f).iter().zip(&f).map(|(a, b)| a * b).sum::<f64>();
        assert!((quad(&c) - quad(&direct)).abs() <= 1e-3 * quad(&direct));
    }

    #[test]
    fn pair_from_two_solves() {
        let sys = WaveSystem::matched(1.0, 30, Potential::bump()).unwrap();
        let steps = 60;
        let f: Vec<f64> = (0..=steps).map(|m| if (1..=30).contains(&m) { (m as f64 * 0.37).sin() } else { 0.0 }).collect();
        let g: Vec<f64> = (0..=steps).map(|m| if (1..=30).contains(&m) { (m as f64 * 0.11).cos() } else { 0.0 }).collect();
        let (uf, ug) = (solve_wave(&sys, &f).unwrap(), solve_wave(&sys, &g).unwrap());
        let controls = Mat::from_fn(steps + 1, 2, |m, c| if c == 0 { f[m] } else { g[m] });
        let (rf, rg) = (uf.neumann_trace(Trace::FirstOrder), ug.neumann_trace(Trace::FirstOrder));
        let rho = Mat::from_fn(steps + 1, 2, |m, c| if c == 0 { rf[m] } else { rg[m] });
        let c = connecting_from_response(&sys, &controls, &rho).unwrap();
        let direct: f64 = (0..=steps).map(|i| uf.u[(30, i)] * ug.u[(30, i)]).sum::<f64>() * sys.h() / sys.tau();
        assert!((c[(0, 1)] - direct).abs() < 1e-11 * (1.0 + direct.abs()));
    }

    #[test]
    fn short_record_is_rejected() {
        let sys = WaveSystem::matched(1.0, 10, Potential::Zero).unwrap();
        let rho = response_operator(&sys, 15, Trace::FirstOrder).unwrap();
        assert!(matches!(
            connecting_from_response(&sys, &hat_controls(10, 15), &rho),
            Err(Error::HorizonTooShort { needed: 21, available: 16 })
        ));
    }
}
