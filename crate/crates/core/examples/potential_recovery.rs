//! Full inversion: connecting operator, canonical factor along the delayed
//! nest, model graph and recovered potential.
//!
//! `cargo run --example potential_recovery -- 400`

use nestfact::dsbc::{run_inversion, Potential, Scenario};

fn main() -> nestfact::Result<()> {
    let n: usize = std::env::args().nth(1).map_or(400, |s| s.parse().expect("n"));
    let mut sc = Scenario::new(1.0, n, Potential::bump());
    sc.locality_fraction = Some(0.6);
    let rep = run_inversion(&sc)?;
    for c in rep.checks() {
        println!("{}", c.line());
    }
    let rec = &rep.recovered;
    let sys = rep.system.as_ref().expect("system is kept");
    println!("{:>8} {:>10} {:>10}", "x", "q", "recovered");
    for (k, x) in rec.x().iter().enumerate().step_by(n / 25) {
        if rec.mask[k] {
            println!("{x:>8.3} {:>10.4} {:>10.4}", sys.potential.eval(*x), rec.q[k]);
        }
    }
    Ok(())
}
