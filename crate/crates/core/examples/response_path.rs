//! The connecting operator from boundary measurements only, compared with
//! `WᵀW` from interior states.
//!
//! `cargo run --example response_path -- 200`

use nestfact::dsbc::{
    connecting_direct, connecting_from_response, control_operator, hat_controls, response_operator, Potential,
    Trace, WaveSystem,
};

fn main() -> nestfact::Result<()> {
    let n: usize = std::env::args().nth(1).map_or(200, |s| s.parse().expect("n"));
    for (nx, nt) in [(n, n), (n / 2, n)] {
        let sys = WaveSystem::new(1.0, nx, nt, Potential::bump())?;
        let direct = connecting_direct(&control_operator(&sys)?);
        let rho = response_operator(&sys, 2 * nt, Trace::FirstOrder)?;
        let from_data = connecting_from_response(&sys, &hat_controls(nt, 2 * nt), &rho)?;
        let rel = (&from_data - &direct).norm_spectral() / direct.norm_spectral();
        println!("cfl {:.2}: relative difference {rel:.3e}", sys.cfl());
    }
    Ok(())
}
