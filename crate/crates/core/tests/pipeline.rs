//! End-to-end runs of the library pipelines on the shipped scenario files.

use nestfact::dsbc::{locality_check, run_forward, run_inversion, ConnectingPath, Potential, Scenario};
use nestfact::factor::{factor_finite, volterra_demo};
use nestfact::linops::{read_matrix, write_matrix};
use nestfact::nest::{Nest, Orientation};
use nestfact::report::all_passed;
use nestfact::Mat;

fn scenario(name: &str) -> Scenario {
    Scenario::read_json(format!("{}/scenarios/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

#[test]
fn shipped_scenarios_parse() {
    for name in ["zero.json", "bump.json", "bump_response.json", "const.json"] {
        scenario(name).system().unwrap();
    }
}

#[test]
fn zero_potential_inversion() {
    let rep = run_inversion(&scenario("zero.json")).unwrap();
    assert!(all_passed(&rep.checks()), "{:?}", rep.checks());
    assert!(rep.recovery.max_recovered <= 0.05);
}

#[test]
fn constant_potential_inversion() {
    let rep = run_inversion(&scenario("const.json")).unwrap();
    assert!(rep.recovery.rel_l2 <= 0.1, "{:?}", rep.recovery);
}

#[test]
fn response_path_agrees_with_direct_path() {
    let sc = scenario("bump_response.json");
    assert_eq!(sc.connecting, ConnectingPath::Response);
    let from_data = run_inversion(&sc).unwrap();
    let mut direct = sc.clone();
    direct.connecting = ConnectingPath::Direct;
    let direct = run_inversion(&direct).unwrap();
    let diff = from_data
        .recovered
        .q
        .iter()
        .zip(&direct.recovered.q)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(diff < 1e-6, "{diff}");
    assert_eq!(from_data.recovered.mask, direct.recovered.mask);
}

#[test]
fn forward_report_checks() {
    let rep = run_forward(&Scenario::new(1.0, 100, Potential::bump())).unwrap();
    assert!(all_passed(&rep.checks()));
    assert!(rep.connecting_min_eig > 0.5);
    assert!(rep.response_path_defect.unwrap() < 1e-10);
}

#[test]
fn locality_on_coarse_grid() {
    let rep = locality_check(&Scenario::new(1.0, 200, Potential::bump()), 0.7).unwrap();
    assert!(rep.difference <= rep.bound, "{rep:?}");
    assert!((rep.t_short - 0.7).abs() < 1e-12);
}

#[test]
fn factor_survives_matrix_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.txt");
    let n = 30;
    let c = Mat::from_fn(n, n, |i, j| 1.0 / (1.0 + i.abs_diff(j) as f64) + if i == j { 1.0 } else { 0.0 });
    write_matrix(&path, &c).unwrap();
    let back = read_matrix(&path).unwrap();
    assert_eq!(back, c);
    let r = factor_finite(&back, &Nest::coordinate(n, Orientation::Forward).unwrap()).unwrap();
    assert!(r.residual < 1e-12);
}

#[test]
fn volterra_trend() {
    let rep = volterra_demo(64).unwrap();
    assert_eq!(rep.rows.iter().map(|r| r.n).collect::<Vec<_>>(), vec![16, 32, 64]);
    assert!(rep.is_monotone());
}
