use serde::{Deserialize, Serialize};

use crate::topology::{LaneId, NodeId, RingId};

/// Running mean and variance (Welford).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let d = other.mean - self.mean;
        self.mean += d * other.count as f64 / n;
        self.m2 += other.m2 + d * d * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }
}

/// Integer-valued histogram that grows on demand.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Histogram(pub Vec<u64>);

impl Histogram {
    pub fn push(&mut self, value: u64) {
        let v = value as usize;
        if v >= self.0.len() {
            self.0.resize(v + 1, 0);
        }
        self.0[v] += 1;
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    /// Smallest value whose cumulative share reaches `q`.
    pub fn quantile(&self, q: f64) -> Option<u64> {
        let total = self.total();
        if total == 0 {
            return None;
        }
        let target = (q.clamp(0.0, 1.0) * total as f64).ceil().max(1.0) as u64;
        let mut acc = 0;
        for (v, &c) in self.0.iter().enumerate() {
            acc += c;
            if acc >= target {
                return Some(v as u64);
            }
        }
        Some(self.0.len() as u64 - 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub class: usize,
    pub source: NodeId,
    pub destination: NodeId,
    pub static_latency: u32,
    pub latency: Moments,
    pub latency_hist: Histogram,
    /// Wait in the source egress queue.
    pub source_wait: Moments,
    /// Wait in the junction's row egress queue (turning classes only).
    pub junction_wait: Moments,
    pub deflections: Moments,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueStats {
    pub node: NodeId,
    pub lane: LaneId,
    /// Time-average number of packets waiting or being granted the link.
    pub mean_occupancy: f64,
    /// Fraction of slots with nothing queued and nothing granted.
    pub empty_fraction: f64,
    pub wait: Moments,
    /// Slots from reaching the head of the queue to winning the link,
    /// inclusive: one plus the slots lost to through traffic.
    pub service: Moments,
    pub granted: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopStats {
    pub ring: RingId,
    /// Deflection events inside the measurement window.
    pub deflections: u64,
    /// Deflection events per cycle.
    pub deflection_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceStats {
    pub node: NodeId,
    pub rate: f64,
    pub scv_arrival: f64,
}

/// One delivered packet, for trace export.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub class: u32,
    pub injected: u64,
    pub delivered: u64,
    pub deflections: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStats {
    pub seed: u64,
    pub warmup: u64,
    pub horizon: u64,
    pub classes: Vec<ClassStats>,
    pub queues: Vec<QueueStats>,
    pub loops: Vec<LoopStats>,
    pub sources: Vec<SourceStats>,
    /// Link occupancy per lane position, averaged over the window.
    pub link_utilization: Vec<(LaneId, usize, f64)>,
    /// Per-packet total deflection counts of measured deliveries.
    pub deflection_hist: Histogram,
    pub latency: Moments,
    pub latency_hist: Histogram,
    pub injected: u64,
    pub delivered: u64,
    pub in_flight: u64,
    /// Link-cycles left idle while the egress queue feeding the link held a
    /// packet. Arbitration is work conserving, so this stays zero.
    pub idle_with_backlog: u64,
    pub trace: Vec<TraceRecord>,
}

impl SimStats {
    /// Packet-weighted mean latency over measured deliveries.
    pub fn mean_latency(&self) -> f64 {
        self.latency.mean
    }

    pub fn window(&self) -> u64 {
        self.horizon - self.warmup
    }

    /// Every injected packet is either delivered or still in the network.
    pub fn conserved(&self) -> bool {
        self.injected == self.delivered + self.in_flight
    }
}
