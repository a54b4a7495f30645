use deflect_noc::canonical::{
    deflected_rate, expected_deflections, solve_canonical, wait_class, CanonicalInput,
    CanonicalResult,
};
use deflect_noc::sim::{run, SimConfig, SimStats};
use deflect_noc::topology::{DeflectConfig, NocTopology, TrafficMatrix, Workload};
use deflect_noc::traffic::{stream_rng, GGeoParams};
use proptest::prelude::*;
use rand::Rng;

/// One source feeding one sink over a two-node loop: the simulated
/// counterpart of the single-class system.
fn simulate_single(rate: f64, p_d: f64, seed: u64) -> SimStats {
    let topo = NocTopology::unidirectional_ring(2);
    let mut m = TrafficMatrix::zeros(2);
    m.set(1, 0, rate);
    let w = Workload { matrix: m, source_scv: vec![1.0 - rate; 2] };
    let mut cfg = SimConfig::new(topo, w, DeflectConfig::uniform(2, p_d), seed)
        .with_window(20_000, 400_000);
    cfg.max_deflections = 64;
    run(&cfg).unwrap()
}

fn solve(rate: f64, p_d: f64) -> CanonicalResult {
    solve_canonical(&CanonicalInput::unit(GGeoParams::geometric(rate).unwrap(), p_d)).unwrap()
}

#[test]
fn deflection_count_matches_monte_carlo() {
    let mut rng = stream_rng(2024, 0);
    for &p in &[0.1, 0.2, 0.3, 0.5] {
        let n = 1_000_000;
        let mut total = 0u64;
        for _ in 0..n {
            while rng.gen::<f64>() < p {
                total += 1;
            }
        }
        let mc = total as f64 / n as f64;
        let exact = expected_deflections(p).unwrap();
        assert!((mc - exact).abs() / exact < 0.01, "p {p}: {mc} vs {exact}");
    }
}

#[test]
fn deflected_rate_matches_simulation() {
    for &(rate, p_d) in &[(0.33, 0.3), (0.2, 0.3), (0.3, 0.2)] {
        let sim = simulate_single(rate, p_d, 1).loops[0].deflection_rate;
        let model = deflected_rate(rate, p_d).unwrap();
        assert!((sim - model).abs() / model < 0.02, "{rate}/{p_d}: {sim} vs {model}");
        let solved = solve(rate, p_d).deflected_rate;
        assert!((solved - model).abs() < 1e-12);
    }
}

#[test]
fn class_wait_matches_simulation() {
    for &(rate, p_d) in &[(0.2, 0.3), (0.3, 0.2), (0.33, 0.3)] {
        let s = simulate_single(rate, p_d, 2);
        let sim = s.classes[0].source_wait.mean;
        let model = solve(rate, p_d).wait_class;
        assert!((model - sim).abs() / sim < 0.15, "{rate}/{p_d}: {model} vs {sim}");
    }
}

#[test]
fn deflected_wait_stays_small() {
    // In-flight packets outrank injection on every link, so the simulator
    // never queues a deflected packet. The model keeps a small residual wait.
    for &(rate, p_d) in &[(0.2, 0.3), (0.3, 0.2), (0.33, 0.3)] {
        let s = simulate_single(rate, p_d, 3);
        assert_eq!(s.idle_with_backlog, 0);
        let model = solve(rate, p_d).wait_defl;
        assert!((0.0..0.15).contains(&model), "{rate}/{p_d}: {model}");
    }
}

#[test]
fn empty_probability_matches_simulation() {
    for &(rate, p_d) in &[(0.2, 0.3), (0.3, 0.2), (0.33, 0.3)] {
        let s = simulate_single(rate, p_d, 4);
        let q = s.queues.iter().find(|q| q.granted > 0).unwrap();
        let model = solve(rate, p_d).empty_prob;
        assert!((model - q.empty_fraction).abs() < 0.035, "{rate}/{p_d}: {model} vs {}", q.empty_fraction);
    }
}

#[test]
fn no_deflection_reduces_to_priority_formula() {
    for &(rate, scv) in &[(0.1, 0.9), (0.3, 2.0), (0.6, 0.4), (0.45, 5.0)] {
        let a = GGeoParams::new(rate, scv).unwrap();
        let r = solve_canonical(&CanonicalInput::unit(a, 0.0)).unwrap();
        let direct = wait_class(0.0, 1.0, 0.0, rate, 1.0, scv, rate).unwrap().value;
        assert!((r.wait_class - direct).abs() <= 1e-12);
        assert_eq!(r.wait_defl, 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn wait_increases_with_rate(rate in 0.02f64..0.3, dr in 0.005f64..0.05, p_d in 0.0f64..0.4) {
        let lo = solve(rate, p_d);
        let hi = solve(rate + dr, p_d);
        prop_assert!(hi.wait_class > lo.wait_class);
    }

    #[test]
    fn wait_increases_with_deflection(rate in 0.02f64..0.3, p_d in 0.0f64..0.4, dp in 0.01f64..0.1) {
        let lo = solve(rate, p_d);
        let hi = solve(rate, p_d + dp);
        prop_assert!(hi.wait_class > lo.wait_class);
        prop_assert!(hi.deflected_rate > lo.deflected_rate);
    }

    #[test]
    fn wait_increases_with_burstiness(rate in 0.02f64..0.3, p_d in 0.0f64..0.4, extra in 0.0f64..4.0, d in 0.05f64..1.0) {
        let base = 1.0 - rate + extra;
        let lo = solve_canonical(&CanonicalInput::unit(GGeoParams::new(rate, base).unwrap(), p_d)).unwrap();
        let hi = solve_canonical(&CanonicalInput::unit(GGeoParams::new(rate, base + d).unwrap(), p_d)).unwrap();
        prop_assert!(hi.wait_class > lo.wait_class);
    }

    #[test]
    fn stable_inputs_converge(rate in 0.01f64..0.45, p_d in 0.0f64..0.5) {
        let r = solve(rate, p_d);
        prop_assert!(r.converged);
        prop_assert!(r.iterations <= 1000);
        prop_assert!(r.wait_class >= 0.0 && r.wait_defl >= 0.0);
    }
}
