//! Corrected factorization of the min-kernel against the exact Volterra factor.
//!
//! `cargo run --example volterra -- 200`

use nestfact::factor::volterra_demo;

fn main() -> nestfact::Result<()> {
    let n = std::env::args()
        .nth(1)
        .map(|s| s.parse().expect("n must be an integer"))
        .unwrap_or(200);
    let report = volterra_demo(n)?;
    println!("{:>6} {:>14} {:>14} {:>14}", "n", "kernel_error", "residual", "tri_defect");
    for r in &report.rows {
        println!(
            "{:>6} {:>14.6e} {:>14.6e} {:>14.6e}",
            r.n, r.kernel_error, r.residual, r.tri_defect
        );
    }
    println!("monotone: {}", report.is_monotone());
    Ok(())
}
