use deflect_noc::traffic::{
    ggeo_from_burstiness, moments_of_sequence, sample_arrivals, stream_rng, BurstProfile,
    GGeoParams, GGeoSource,
};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Geometric};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Draws gaps straight from the gap law: zero with probability `p`,
/// otherwise geometric on {1, 2, ...} with success probability `rate (1 - p)`.
fn reference_gap_scv(rate: f64, p: f64, gaps: usize, seed: u64) -> (f64, f64) {
    let mut rng = stream_rng(seed, 99);
    let geo = Geometric::new(rate * (1.0 - p)).unwrap();
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..gaps {
        let g = if rng.gen::<f64>() < p { 0.0 } else { 1.0 + geo.sample(&mut rng) as f64 };
        sum += g;
        sum_sq += g * g;
    }
    let mean = sum / gaps as f64;
    let var = sum_sq / gaps as f64 - mean * mean;
    (1.0 / mean, var / (mean * mean))
}

#[test]
fn closed_form_scv_matches_reference_sampler() {
    let g = ggeo_from_burstiness(BurstProfile { rate: 0.1, burst_prob: 0.6 }).unwrap();
    assert!((g.scv_arrival - 3.9).abs() < 1e-12);
    let (rate, scv) = reference_gap_scv(0.1, 0.6, 10_000_000, 11);
    assert!((rate - 0.1).abs() / 0.1 < 0.005, "rate {rate}");
    assert!((scv - 3.9).abs() / 3.9 < 0.005, "scv {scv}");
}

#[test]
fn generator_hits_requested_rate() {
    let p = ggeo_from_burstiness(BurstProfile { rate: 0.2, burst_prob: 0.4 }).unwrap();
    let seq = sample_arrivals(p, 5, 1_000_000).unwrap();
    let (rate, _) = moments_of_sequence(&seq).unwrap();
    assert!((rate - 0.2).abs() < 0.005, "rate {rate}");
}

#[test]
fn generator_round_trips_moments() {
    for &(rate, burst) in &[(0.05, 0.0), (0.1, 0.6), (0.3, 0.2), (0.3, 0.6)] {
        let p = ggeo_from_burstiness(BurstProfile { rate, burst_prob: burst }).unwrap();
        let seq = sample_arrivals(p, 17, 4_000_000).unwrap();
        let (r, scv) = moments_of_sequence(&seq).unwrap();
        assert!((r - rate).abs() / rate < 0.01, "rate {r} for {rate}/{burst}");
        assert!(
            (scv - p.scv_arrival).abs() / p.scv_arrival < 0.03,
            "scv {scv} vs {} for {rate}/{burst}",
            p.scv_arrival
        );
    }
}

#[test]
fn geometric_gaps_pass_chi_square() {
    let rate = 0.2;
    let p = GGeoParams::geometric(rate).unwrap();
    let seq = sample_arrivals(p, 3, 500_000).unwrap();
    let slots: Vec<usize> = seq
        .0
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(t, _)| t)
        .collect();
    const BINS: usize = 20;
    let mut observed = [0f64; BINS + 1];
    for w in slots.windows(2) {
        let gap = w[1] - w[0];
        observed[(gap - 1).min(BINS)] += 1.0;
    }
    let n: f64 = observed.iter().sum();
    let mut stat = 0.0;
    for (k, &o) in observed.iter().enumerate() {
        let prob = if k < BINS {
            rate * (1.0 - rate).powi(k as i32)
        } else {
            (1.0 - rate).powi(BINS as i32)
        };
        let e = n * prob;
        stat += (o - e).powi(2) / e;
    }
    let critical = ChiSquared::new(BINS as f64).unwrap().inverse_cdf(0.99);
    assert!(stat < critical, "chi-square {stat} >= {critical}");
}

#[test]
fn independent_streams_differ() {
    let p = GGeoParams::geometric(0.3).unwrap();
    let mut a = GGeoSource::new(p, stream_rng(1, 0)).unwrap();
    let mut b = GGeoSource::new(p, stream_rng(1, 1)).unwrap();
    let sa: Vec<u32> = (0..2000).map(|t| a.arrivals_at(t)).collect();
    let sb: Vec<u32> = (0..2000).map(|t| b.arrivals_at(t)).collect();
    assert_ne!(sa, sb);
}

proptest! {
    #[test]
    fn scv_increases_with_burst_prob(rate in 0.01f64..0.5, p in 0.0f64..0.8, dp in 0.001f64..0.15) {
        let lo = ggeo_from_burstiness(BurstProfile { rate, burst_prob: p }).unwrap();
        let hi = ggeo_from_burstiness(BurstProfile { rate, burst_prob: p + dp }).unwrap();
        prop_assert!(hi.scv_arrival > lo.scv_arrival);
    }

    #[test]
    fn burst_prob_inverse_holds(rate in 0.01f64..0.9, p in 0.0f64..0.9) {
        let g = ggeo_from_burstiness(BurstProfile { rate, burst_prob: p }).unwrap();
        prop_assert!((g.burst_prob() - p).abs() < 1e-9);
        prop_assert!(g.validate().is_ok());
    }

    #[test]
    fn thinning_stays_above_bound(rate in 0.01f64..0.9, extra in 0.0f64..5.0, q in 0.0f64..1.0) {
        let g = GGeoParams::new(rate, 1.0 - rate + extra).unwrap();
        let t = g.thin(q);
        prop_assert!(t.scv_arrival >= 1.0 - t.rate - 1e-12);
    }
}
