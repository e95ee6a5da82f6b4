//! Partition diagonals under mesh halving.
//!
//! An operator with a sizeable identity part keeps a diagonal of fixed size,
//! a smooth (compact) kernel loses it like the square root of the mesh.
//!
//! `cargo run --example diagonal_refinement -- 128`

use nestfact::diagonal::{refinement_sweep, Partition};
use nestfact::nest::{Nest, Orientation};
use nestfact::Mat;

fn main() -> nestfact::Result<()> {
    let n: usize = std::env::args().nth(1).map_or(128, |s| s.parse().expect("n"));
    let h = 1.0 / n as f64;
    let kernel = Mat::from_fn(n, n, |i, j| {
        let (s, t) = ((i as f64 + 0.5) * h, (j as f64 + 0.5) * h);
        h * (s * t + (3.0 * (s - t)).cos())
    });
    let plus_identity = &Mat::identity(n) + &kernel;
    let f = Nest::coordinate(n, Orientation::Forward)?;

    let mut schedule = Vec::new();
    let mut m = 2;
    while m <= n {
        schedule.push(Partition::uniform(&f, m)?);
        m *= 2;
    }

    for (name, w) in [("smooth kernel", &kernel), ("identity + kernel", &plus_identity)] {
        let sweep = refinement_sweep(w, &f, &schedule)?;
        println!("{name}: ‖W‖ = {:.4}", sweep.results[0].norm_w);
        println!("{:>6} {:>12} {:>12}", "steps", "‖D‖", "defect");
        for r in &sweep.results {
            println!("{:>6} {:>12.4e} {:>12.2e}", r.partition.steps(), r.norm, r.intertwine_defect);
        }
    }
    Ok(())
}
