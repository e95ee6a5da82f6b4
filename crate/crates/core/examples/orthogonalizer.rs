//! Weight operator and orthogonalizer of a diagonal, with the identities
//! `ΨᵀΨ = I`, `ΨΨᵀ = P_T` and `Ψᵀ = Φ*`.
//!
//! `cargo run --example orthogonalizer -- 12`

use nestfact::diagonal::{finite_diagonal, orthogonalizer};
use nestfact::linops::polar_adjoint;
use nestfact::nest::{Nest, Orientation};
use nestfact::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> nestfact::Result<()> {
    let n: usize = std::env::args().nth(1).map_or(12, |s| s.parse().expect("n"));
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    // tall operator: the image nest lives in a bigger space
    let w = Mat::from_fn(n + 3, n, |_, _| rng.gen_range(-1.0..1.0));
    let d = finite_diagonal(&w, &Nest::coordinate(n, Orientation::Forward)?)?;
    let o = orthogonalizer(&d, 0.0)?;

    let top = d.image.projection(d.image.len() - 1);
    let phi_star = polar_adjoint(&d.d, 0.0)?.phi;
    println!("rank {}", o.rank);
    println!("‖ΨᵀΨ − I‖   = {:.2e}", (&o.psi.tmatmul(&o.psi) - &Mat::identity(n)).norm_spectral());
    println!("‖ΨΨᵀ − P_T‖ = {:.2e}", (&o.psi.matmul(&o.psi.transpose()) - &top).norm_spectral());
    println!("‖Ψᵀ − Φ*‖   = {:.2e}", (&o.psi.transpose() - &phi_star).norm_spectral());
    let nu: Vec<String> = o.nu.iter().map(|v| v.map_or("-".into(), |x| format!("{x:.3}"))).collect();
    println!("ν per step: {}", nu.join(" "));
    Ok(())
}
