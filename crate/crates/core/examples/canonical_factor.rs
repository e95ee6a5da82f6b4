//! Canonical factor of a random SPD matrix along the forward and the delayed
//! coordinate nests, checked against Cholesky.
//!
//! `cargo run --example canonical_factor -- 40 7`

use nestfact::factor::factor_finite;
use nestfact::linops::cholesky_upper;
use nestfact::nest::{Nest, Orientation};
use nestfact::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> nestfact::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(40, |s| s.parse().expect("n"));
    let seed: u64 = args.next().map_or(7, |s| s.parse().expect("seed"));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = Mat::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let c = &a.matmul(&a.transpose()) + &Mat::identity(n).scale(0.1 * n as f64);

    for orient in [Orientation::Forward, Orientation::Delayed] {
        let r = factor_finite(&c, &Nest::coordinate(n, orient)?)?;
        println!(
            "{orient:?}: residual {:.2e}, tri_defect {:.2e}, rank {}",
            r.residual, r.tri_defect, r.rank
        );
        if orient == Orientation::Forward {
            let chol = cholesky_upper(&c)?;
            println!("  max |V - R| against Cholesky: {:.2e}", (&r.v - &chol).norm_max());
        }
    }
    Ok(())
}
