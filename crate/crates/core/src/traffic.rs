//! Generalized geometric (GGeo) arrival processes in slotted time.
//!
//! Inter-arrival gaps follow a mixed law: a zero gap (another packet in the
//! same slot) with probability `p_br`, otherwise a geometric gap on
//! `{1, 2, ...}` with success probability `beta`. Choosing
//! `beta = rate * (1 - p_br)` pins the mean gap to `1 / rate`, which gives
//!
//! ```text
//! scv = (1 + p_br) / (1 - p_br) - rate
//! ```
//!
//! and the inverse `p_br = (scv + rate - 1) / (scv + rate + 1)`. With
//! `p_br = 0` the process is Bernoulli per slot and `scv = 1 - rate`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two-moment description of an arrival stream: rate (packets/cycle) and the
/// squared coefficient of variation of the inter-arrival time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GGeoParams {
    pub rate: f64,
    pub scv_arrival: f64,
}

/// Slack used when comparing an SCV against its geometric lower bound.
const SCV_SLACK: f64 = 1e-12;

impl GGeoParams {
    pub fn new(rate: f64, scv_arrival: f64) -> Result<Self> {
        let p = GGeoParams { rate, scv_arrival };
        p.validate()?;
        Ok(p)
    }

    /// Bernoulli-per-slot arrivals (geometric gaps).
    pub fn geometric(rate: f64) -> Result<Self> {
        Self::new(rate, 1.0 - rate)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0 && self.rate < 1.0) {
            return Err(Error::invalid(format!(
                "arrival rate must lie in (0, 1), got {}",
                self.rate
            )));
        }
        if !self.scv_arrival.is_finite() || self.scv_arrival < 1.0 - self.rate - SCV_SLACK {
            return Err(Error::invalid(format!(
                "arrival SCV {} is below the geometric bound {}",
                self.scv_arrival,
                1.0 - self.rate
            )));
        }
        Ok(())
    }

    /// Zero-gap probability of the gap law with these moments.
    pub fn burst_prob(&self) -> f64 {
        let s = self.scv_arrival + self.rate;
        ((s - 1.0) / (s + 1.0)).max(0.0)
    }

    /// Success probability of the geometric part of the gap law.
    pub fn beta(&self) -> f64 {
        self.rate * (1.0 - self.burst_prob())
    }

    /// Keeps each arrival independently with probability `fraction`.
    ///
    /// Random splitting of a renewal stream gives `1 + q (c^2 - 1)`.
    pub fn thin(&self, fraction: f64) -> GGeoParams {
        let q = fraction.clamp(0.0, 1.0);
        GGeoParams {
            rate: self.rate * q,
            scv_arrival: 1.0 + q * (self.scv_arrival - 1.0),
        }
    }
}

/// Injection rate plus probability of burstiness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BurstProfile {
    pub rate: f64,
    pub burst_prob: f64,
}

impl BurstProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0 && self.rate < 1.0) {
            return Err(Error::invalid(format!("rate must lie in (0, 1), got {}", self.rate)));
        }
        if !(0.0..1.0).contains(&self.burst_prob) {
            return Err(Error::invalid(format!(
                "burst probability must lie in [0, 1), got {}",
                self.burst_prob
            )));
        }
        Ok(())
    }
}

/// Converts `(rate, p_br)` into two-moment form.
pub fn ggeo_from_burstiness(profile: BurstProfile) -> Result<GGeoParams> {
    profile.validate()?;
    let p = profile.burst_prob;
    let beta = profile.rate * (1.0 - p);
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::invalid(format!(
            "implied geometric parameter {beta} outside (0, 1]"
        )));
    }
    Ok(GGeoParams {
        rate: profile.rate,
        scv_arrival: (1.0 + p) / (1.0 - p) - profile.rate,
    })
}

/// Per-slot arrival counts over a fixed horizon.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrivalSequence(pub Vec<u32>);

impl ArrivalSequence {
    pub fn horizon(&self) -> usize {
        self.0.len()
    }

    pub fn total(&self) -> u64 {
        self.0.iter().map(|&c| c as u64).sum()
    }
}

/// Deterministic RNG stream for `(seed, stream)`.
///
/// ChaCha8 with an explicit stream id: the output is specified bit-for-bit
/// and independent of platform and thread scheduling.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stateful slot-level GGeo generator.
#[derive(Debug, Clone)]
pub struct GGeoSource {
    burst_prob: f64,
    /// `ln(1 - beta)`; zero when `beta == 1`.
    log_fail: f64,
    next_slot: u64,
    rng: ChaCha8Rng,
}

impl GGeoSource {
    pub fn new(params: GGeoParams, rng: ChaCha8Rng) -> Result<Self> {
        params.validate()?;
        let beta = params.beta();
        let log_fail = if beta >= 1.0 { 0.0 } else { (1.0 - beta).ln() };
        let mut src = GGeoSource {
            burst_prob: params.burst_prob(),
            log_fail,
            next_slot: 0,
            rng,
        };
        src.next_slot = src.geometric_gap() - 1;
        Ok(src)
    }

    fn geometric_gap(&mut self) -> u64 {
        if self.log_fail == 0.0 {
            return 1;
        }
        // Inverse transform on (0, 1].
        let u: f64 = 1.0 - self.rng.gen::<f64>();
        1 + (u.ln() / self.log_fail).floor() as u64
    }

    fn draw_gap(&mut self) -> u64 {
        if self.burst_prob > 0.0 && self.rng.gen::<f64>() < self.burst_prob {
            0
        } else {
            self.geometric_gap()
        }
    }

    /// Number of arrivals in `slot`. Slots must be queried in increasing order.
    pub fn arrivals_at(&mut self, slot: u64) -> u32 {
        let mut count = 0;
        while self.next_slot == slot {
            count += 1;
            self.next_slot += self.draw_gap();
        }
        debug_assert!(self.next_slot > slot, "slots queried out of order");
        count
    }
}

/// Generates a slot-level arrival sequence on RNG stream 0 of `seed`.
pub fn sample_arrivals(params: GGeoParams, seed: u64, horizon: usize) -> Result<ArrivalSequence> {
    sample_arrivals_on_stream(params, seed, 0, horizon)
}

pub fn sample_arrivals_on_stream(
    params: GGeoParams,
    seed: u64,
    stream: u64,
    horizon: usize,
) -> Result<ArrivalSequence> {
    if horizon == 0 {
        return Err(Error::invalid("horizon must be at least one slot"));
    }
    let mut src = GGeoSource::new(params, stream_rng(seed, stream))?;
    Ok(ArrivalSequence(
        (0..horizon as u64).map(|t| src.arrivals_at(t)).collect(),
    ))
}

/// Sample rate and inter-arrival SCV of a sequence. Packets sharing a slot
/// contribute zero gaps.
pub fn moments_of_sequence(seq: &ArrivalSequence) -> Result<(f64, f64)> {
    let total = seq.total();
    if total < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least two arrivals, found {total}"
        )));
    }
    let mut last: Option<u64> = None;
    let (mut n, mut sum, mut sum_sq) = (0u64, 0f64, 0f64);
    for (slot, &count) in seq.0.iter().enumerate() {
        let slot = slot as u64;
        for _ in 0..count {
            if let Some(prev) = last {
                let gap = (slot - prev) as f64;
                n += 1;
                sum += gap;
                sum_sq += gap * gap;
            }
            last = Some(slot);
        }
    }
    let mean = sum / n as f64;
    let var = (sum_sq / n as f64 - mean * mean).max(0.0);
    let scv = if mean > 0.0 { var / (mean * mean) } else { 0.0 };
    Ok((total as f64 / seq.horizon() as f64, scv))
}
