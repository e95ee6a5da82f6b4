//! Forward boundary-control operators for a bump potential.
//!
//! `cargo run --example wave_forward -- 200`

use nestfact::dsbc::{run_forward, Potential, Scenario};

fn main() -> nestfact::Result<()> {
    let n: usize = std::env::args().nth(1).map_or(200, |s| s.parse().expect("n"));
    for p in [Potential::Zero, Potential::bump()] {
        let rep = run_forward(&Scenario::new(1.0, n, p.clone()))?;
        println!("{p:?}");
        println!("  λ_min(C)/‖C‖ = {:.4}, ‖C‖ = {:.4}", rep.connecting_min_eig, rep.connecting_norm);
        println!("  σ_min(W) = {:.4}", rep.w_min_singular);
        if let Some(d) = rep.response_path_defect {
            println!("  connecting operator from boundary data: relative difference {d:.2e}");
        }
        let k = rep.base_response.len();
        let tail: Vec<String> = rep.base_response[k - 5..].iter().map(|r| format!("{r:.3e}")).collect();
        println!("  last response samples: {}", tail.join(" "));
    }
    Ok(())
}
