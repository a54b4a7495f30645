use deflect_noc::sim::{measure_deflections, replay_check, run, SimConfig};
use deflect_noc::topology::{DeflectConfig, NocTopology, Orientation, TrafficMatrix, Workload};
use deflect_noc::traffic::{ggeo_from_burstiness, BurstProfile};
use proptest::prelude::*;

fn mesh_config(rate: f64, burst: f64, p_d: f64, seed: u64) -> SimConfig {
    let g = ggeo_from_burstiness(BurstProfile { rate, burst_prob: burst }).unwrap();
    SimConfig::new(
        NocTopology::mesh(4, 4),
        Workload::uniform(16, g),
        DeflectConfig::uniform(16, p_d),
        seed,
    )
    .with_window(2_000, 20_000)
}

#[test]
fn runs_replay_exactly() {
    let mut cfg = mesh_config(0.15, 0.4, 0.3, 9);
    cfg.trace = true;
    assert!(replay_check(&cfg).unwrap());
    let a = run(&cfg).unwrap();
    assert!(!a.trace.is_empty());
    cfg.seed = 10;
    assert_ne!(run(&cfg).unwrap().trace, a.trace);
}

#[test]
fn packets_are_conserved() {
    let s = run(&mesh_config(0.2, 0.6, 0.3, 1)).unwrap();
    assert!(s.conserved());
    assert!(s.delivered > 0);
    assert_eq!(s.idle_with_backlog, 0);
}

#[test]
fn light_load_without_deflection_is_static() {
    let topo = NocTopology::mesh(6, 6);
    let cfg = SimConfig::new(topo, Workload::uniform_geometric(36, 0.002), DeflectConfig::uniform(36, 0.0), 4);
    let s = run(&cfg).unwrap();
    let (mut packets, mut excess) = (0.0, 0.0);
    for c in s.classes.iter().filter(|c| c.latency.count > 0) {
        assert!(c.latency.mean >= c.static_latency as f64);
        packets += c.latency.count as f64;
        excess += c.latency.count as f64 * (c.latency.mean - c.static_latency as f64);
    }
    assert!(excess / packets < 0.02, "mean excess {}", excess / packets);
    assert!(s.loops.iter().all(|l| l.deflections == 0));
    assert_eq!(s.deflection_hist.total(), s.latency.count);
}

#[test]
fn latency_never_below_static() {
    let s = run(&mesh_config(0.25, 0.2, 0.2, 3)).unwrap();
    for c in &s.classes {
        if c.latency.count > 0 {
            assert!(c.latency.mean >= c.static_latency as f64);
        }
    }
}

#[test]
fn deflections_are_bounded() {
    let mut cfg = mesh_config(0.1, 0.0, 0.9, 5);
    cfg.max_deflections = 3;
    let s = run(&cfg).unwrap();
    let over: u64 = s.deflection_hist.0.iter().skip(4).sum();
    assert_eq!(over, 0);
    assert!(s.conserved());
}

#[test]
fn symmetric_rows_see_similar_deflections() {
    let s = run(&mesh_config(0.2, 0.0, 0.3, 6).with_window(5_000, 100_000)).unwrap();
    let rows: Vec<f64> = measure_deflections(&s)
        .iter()
        .filter(|l| l.ring.orientation == Orientation::Row)
        .map(|l| l.deflection_rate)
        .collect();
    assert_eq!(rows.len(), 4);
    let mean = rows.iter().sum::<f64>() / 4.0;
    assert!(rows.iter().all(|r| (r - mean).abs() / mean < 0.05), "{rows:?}");
}

#[test]
fn tandem_source_rate_is_measured() {
    let topo = NocTopology::unidirectional_ring(3);
    let mut m = TrafficMatrix::zeros(3);
    m.set(1, 0, 0.2);
    m.set(2, 0, 0.1);
    let w = Workload { matrix: m, source_scv: vec![0.8, 0.8, 0.9] };
    let s = run(&SimConfig::new(topo, w, DeflectConfig::uniform(3, 0.2), 8)).unwrap();
    let rate = |n: usize| s.sources.iter().find(|x| x.node == n).map(|x| x.rate);
    assert!((rate(1).unwrap() - 0.2).abs() < 0.01);
    assert!((rate(2).unwrap() - 0.1).abs() < 0.01);
    assert_eq!(rate(0), None);
}

#[test]
fn invalid_window_is_rejected() {
    let cfg = mesh_config(0.1, 0.0, 0.1, 1).with_window(500, 400);
    assert!(run(&cfg).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn conservation_holds(rate in 0.01f64..0.3, burst in 0.0f64..0.7, p_d in 0.0f64..0.6, seed in 0u64..1000) {
        let s = run(&mesh_config(rate, burst, p_d, seed).with_window(500, 4_000)).unwrap();
        prop_assert!(s.conserved());
        prop_assert_eq!(s.idle_with_backlog, 0);
    }
}
