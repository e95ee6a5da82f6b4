//! Continuity scan of image nests.
//!
//! A rank-one operator whose functional only sees the second half of the
//! interval maps the continuous coordinate nest onto a nest with a jump.
//!
//! `cargo run --example nest_breaks`

use nestfact::nest::{continuity_scan, image_nest, Nest, Orientation};
use nestfact::Mat;

fn main() -> nestfact::Result<()> {
    let n = 40;
    let f = Nest::coordinate(n, Orientation::Forward)?;
    let phi: Vec<f64> = (0..n).map(|i| if i >= n / 2 { 1.0 } else { 0.0 }).collect();
    let psi: Vec<f64> = (0..n).map(|i| (i as f64 + 1.0).ln()).collect();
    let rank_one = Mat::outer(&psi, &phi);

    let h = 1.0 / n as f64;
    let smooth = Mat::from_fn(n, n, |i, j| (i == j) as u8 as f64 + h * (-((i as f64 - j as f64) * h).powi(2)).exp());

    for (name, w) in [("rank one", &rank_one), ("identity + smooth", &smooth)] {
        let scan = continuity_scan(&image_nest(w, &f, 0.0)?.projection_nest());
        println!("{name}:");
        println!("  image ranks per step: {:?}", scan.rank_increments);
        println!("  right breaks at {:?}, left breaks at {:?}", scan.right_breaks, scan.left_breaks);
        println!("  detected sigma: {:?}", scan.detected_sigma);
    }
    Ok(())
}
