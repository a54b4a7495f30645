//! Slot-synchronous cycle-accurate simulator.
//!
//! Every cycle each source draws its GGeo arrivals into the egress queue of
//! its first route segment, packets on the links advance, and each output
//! link is granted to the packet already travelling on that lane (regular
//! or deflected) before the local egress queue. A packet reaching its
//! junction or destination is consumed with probability `1 - p_d` and
//! otherwise keeps circulating in its lane. After `max_deflections`
//! deflections a packet holds a reserved ingress slot and is consumed on
//! its next arrival.
//!
//! Since routing is dimension ordered and turns go through the junction's
//! egress queue, every output link has at most one in-flight contender per
//! cycle: packets on a lane never wait.

mod stats;

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use stats::{
    ClassStats, Histogram, LoopStats, Moments, QueueStats, SimStats, SourceStats, TraceRecord,
};

use crate::error::{Error, Result};
use crate::topology::{
    enumerate_classes, DeflectConfig, LaneId, NocTopology, Segment, Workload,
};
use crate::traffic::{stream_rng, GGeoSource};

pub const DEFAULT_MAX_DEFLECTIONS: u32 = 16;
pub const DEFAULT_HORIZON: u64 = 200_000;
pub const DEFAULT_WARMUP: u64 = 20_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub topology: NocTopology,
    pub workload: Workload,
    pub deflect: DeflectConfig,
    pub max_deflections: u32,
    pub horizon: u64,
    pub warmup: u64,
    pub seed: u64,
    /// Keep one record per measured delivery.
    #[serde(default)]
    pub trace: bool,
}

impl SimConfig {
    pub fn new(topology: NocTopology, workload: Workload, deflect: DeflectConfig, seed: u64) -> Self {
        SimConfig {
            topology,
            workload,
            deflect,
            max_deflections: DEFAULT_MAX_DEFLECTIONS,
            horizon: DEFAULT_HORIZON,
            warmup: DEFAULT_WARMUP,
            seed,
            trace: false,
        }
    }

    pub fn with_window(mut self, warmup: u64, horizon: u64) -> Self {
        self.warmup = warmup;
        self.horizon = horizon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        self.workload.validate()?;
        if self.workload.nodes() != self.topology.num_nodes() {
            return Err(Error::invalid("workload and topology sizes differ"));
        }
        self.deflect.validate(self.topology.num_nodes())?;
        if self.warmup >= self.horizon {
            return Err(Error::invalid(format!(
                "warmup {} must be shorter than horizon {}",
                self.warmup, self.horizon
            )));
        }
        if self.max_deflections == 0 {
            return Err(Error::invalid("max_deflections must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Packet {
    class: u32,
    injected: u64,
    enqueued: u64,
    deflections: u32,
    /// Index of the current route segment (0 or 1).
    stage: u8,
    reserved: bool,
}

/// Where a segment ends and what happens there.
#[derive(Debug, Clone, Copy)]
struct StagePlan {
    lane: usize,
    start: usize,
    end: usize,
    /// Deflection probability at the end node.
    p_d: f64,
}

#[derive(Debug, Clone)]
struct ClassPlan {
    stages: [Option<StagePlan>; 2],
}

struct Source {
    gen: GGeoSource,
    dest_rng: ChaCha8Rng,
    /// Cumulative destination weights and the class for each.
    cumulative: Vec<f64>,
    classes: Vec<u32>,
    last_arrival: Option<u64>,
    gaps: Moments,
    arrivals: u64,
}

impl Source {
    fn pick_class(&mut self) -> u32 {
        let total = *self.cumulative.last().expect("source with classes");
        let u = self.dest_rng.gen::<f64>() * total;
        let i = self.cumulative.partition_point(|&c| c <= u).min(self.classes.len() - 1);
        self.classes[i]
    }
}

struct Lane {
    id: LaneId,
    len: usize,
    /// Queue index base: queue for position p is `queue_base + p`.
    queue_base: usize,
    /// Link out of position p, pipelined over `per_hop` slots.
    links: Vec<Option<Packet>>,
}

struct Engine<'a> {
    cfg: &'a SimConfig,
    plans: Vec<ClassPlan>,
    lanes: Vec<Lane>,
    queues: Vec<VecDeque<Packet>>,
    sources: Vec<Option<Source>>,
    ingress_rng: Vec<ChaCha8Rng>,
    hop: usize,
    // accumulators
    class_stats: Vec<ClassStats>,
    queue_occ: Vec<u64>,
    queue_empty: Vec<u64>,
    queue_wait: Vec<Moments>,
    queue_service: Vec<Moments>,
    /// Slot of the most recent grant from each queue.
    last_grant: Vec<Option<u64>>,
    queue_granted: Vec<u64>,
    lane_busy: Vec<Vec<u64>>,
    ring_deflections: Vec<u64>,
    deflection_hist: Histogram,
    latency: Moments,
    latency_hist: Histogram,
    injected: u64,
    delivered: u64,
    idle_with_backlog: u64,
    trace: Vec<TraceRecord>,
}

fn lane_index(lanes: &[Lane], id: LaneId) -> usize {
    lanes.iter().position(|l| l.id == id).expect("lane exists")
}

impl<'a> Engine<'a> {
    fn new(cfg: &'a SimConfig) -> Result<Self> {
        let topo = &cfg.topology;
        let classes = enumerate_classes(topo, &cfg.workload.matrix)?;
        let hop = topo.per_hop_latency as usize;

        let mut lanes = Vec::new();
        let mut queue_base = 0;
        for id in topo.lanes() {
            let len = topo.ring_len(id.ring);
            lanes.push(Lane {
                id,
                len,
                queue_base,
                links: vec![None; len * hop],
            });
            queue_base += len;
        }
        let n_queues = queue_base;

        let stage_of = |seg: Segment, p_d: f64| StagePlan {
            lane: lane_index(&lanes, seg.lane),
            start: seg.start,
            end: topo.advance(seg.lane, seg.start, seg.hops),
            p_d,
        };
        let plans = classes
            .iter()
            .map(|c| {
                let mut stages = [None, None];
                match (c.column, c.row) {
                    (Some(col), Some(row)) => {
                        stages[0] = Some(stage_of(col, cfg.deflect.junction[c.junction]));
                        stages[1] = Some(stage_of(row, cfg.deflect.sink[c.destination]));
                    }
                    (Some(seg), None) | (None, Some(seg)) => {
                        stages[0] = Some(stage_of(seg, cfg.deflect.sink[c.destination]));
                    }
                    (None, None) => unreachable!("source differs from destination"),
                }
                ClassPlan { stages }
            })
            .collect();

        let n = topo.num_nodes();
        let mut sources = Vec::with_capacity(n);
        for s in 0..n {
            let src = match cfg.workload.source_params(s) {
                Some(params) => {
                    let mut cumulative = Vec::new();
                    let mut ids = Vec::new();
                    let mut acc = 0.0;
                    for c in classes.iter().filter(|c| c.source == s) {
                        acc += cfg.workload.matrix.get(s, c.destination);
                        cumulative.push(acc);
                        ids.push(c.id as u32);
                    }
                    Some(Source {
                        gen: GGeoSource::new(params, stream_rng(cfg.seed, 3 * s as u64))?,
                        dest_rng: stream_rng(cfg.seed, 3 * s as u64 + 1),
                        cumulative,
                        classes: ids,
                        last_arrival: None,
                        gaps: Moments::default(),
                        arrivals: 0,
                    })
                }
                None => None,
            };
            sources.push(src);
        }
        let ingress_rng = (0..n)
            .map(|s| stream_rng(cfg.seed, 3 * s as u64 + 2))
            .collect();

        let class_stats = classes
            .iter()
            .map(|c| ClassStats {
                class: c.id,
                source: c.source,
                destination: c.destination,
                static_latency: c.static_latency,
                latency: Moments::default(),
                latency_hist: Histogram::default(),
                source_wait: Moments::default(),
                junction_wait: Moments::default(),
                deflections: Moments::default(),
            })
            .collect();
        let lane_busy = lanes.iter().map(|l| vec![0; l.len]).collect();

        Ok(Engine {
            cfg,
            plans,
            queues: vec![VecDeque::new(); n_queues],
            sources,
            ingress_rng,
            hop,
            class_stats,
            queue_occ: vec![0; n_queues],
            queue_empty: vec![0; n_queues],
            queue_wait: vec![Moments::default(); n_queues],
            queue_service: vec![Moments::default(); n_queues],
            last_grant: vec![None; n_queues],
            queue_granted: vec![0; n_queues],
            lane_busy,
            ring_deflections: vec![0; topo.rings().len()],
            deflection_hist: Histogram::default(),
            latency: Moments::default(),
            latency_hist: Histogram::default(),
            injected: 0,
            delivered: 0,
            idle_with_backlog: 0,
            trace: Vec::new(),
            lanes,
        })
    }

    fn ring_index(&self, lane: usize) -> usize {
        let ring = self.lanes[lane].id.ring;
        self.cfg
            .topology
            .rings()
            .iter()
            .position(|r| *r == ring)
            .expect("ring exists")
    }

    fn step(&mut self, t: u64) {
        let measuring = t >= self.cfg.warmup;

        // (a) new arrivals join the egress queue of their first segment.
        for s in 0..self.sources.len() {
            let Some(src) = self.sources[s].as_mut() else { continue };
            let k = src.gen.arrivals_at(t);
            for _ in 0..k {
                let class = src.pick_class();
                if measuring {
                    if let Some(prev) = src.last_arrival {
                        src.gaps.push((t - prev) as f64);
                    }
                    src.last_arrival = Some(t);
                    src.arrivals += 1;
                }
                let stage = self.plans[class as usize].stages[0].expect("first stage");
                let q = self.lanes[stage.lane].queue_base + stage.start;
                self.queues[q].push_back(Packet {
                    class,
                    injected: t,
                    enqueued: t,
                    deflections: 0,
                    stage: 0,
                    reserved: false,
                });
                self.injected += 1;
            }
        }

        // (b) packets leaving links arrive at routers; junction hand-offs
        // are queued before this cycle's grants.
        let slot = (t as usize) % self.hop;
        let mut continuing: Vec<Vec<Option<Packet>>> = Vec::with_capacity(self.lanes.len());
        let mut handoffs: Vec<(usize, Packet)> = Vec::new();
        for li in 0..self.lanes.len() {
            let len = self.lanes[li].len;
            let mut cont = vec![None; len];
            for pos in 0..len {
                let prev = match self.lanes[li].id.dir {
                    crate::topology::Direction::Forward => (pos + len - 1) % len,
                    crate::topology::Direction::Backward => (pos + 1) % len,
                };
                let Some(mut pkt) = self.lanes[li].links[prev * self.hop + slot].take() else {
                    continue;
                };
                let plan = self.plans[pkt.class as usize].stages[pkt.stage as usize]
                    .expect("active stage");
                debug_assert_eq!(plan.lane, li);
                if pos != plan.end {
                    cont[pos] = Some(pkt);
                    continue;
                }
                let deflect = !pkt.reserved
                    && plan.p_d > 0.0
                    && self.ingress_rng[self.lanes[li].id_node(&self.cfg.topology, pos)].gen::<f64>()
                        < plan.p_d;
                if deflect {
                    pkt.deflections += 1;
                    if pkt.deflections >= self.cfg.max_deflections {
                        pkt.reserved = true;
                    }
                    if measuring {
                        let r = self.ring_index(li);
                        self.ring_deflections[r] += 1;
                    }
                    cont[pos] = Some(pkt);
                } else if pkt.stage == 0 && self.plans[pkt.class as usize].stages[1].is_some() {
                    let next = self.plans[pkt.class as usize].stages[1].unwrap();
                    pkt.stage = 1;
                    pkt.enqueued = t;
                    handoffs.push((self.lanes[next.lane].queue_base + next.start, pkt));
                } else {
                    self.deliver(pkt, t);
                }
            }
            continuing.push(cont);
        }
        for (q, pkt) in handoffs {
            self.queues[q].push_back(pkt);
        }

        // (c) one packet per output link: in-flight first, then local queue.
        for li in 0..self.lanes.len() {
            let len = self.lanes[li].len;
            for pos in 0..len {
                let q = self.lanes[li].queue_base + pos;
                let mut local = false;
                let granted = if let Some(pkt) = continuing[li][pos].take() {
                    Some(pkt)
                } else if let Some(pkt) = self.queues[q].pop_front() {
                    local = true;
                    if pkt.injected >= self.cfg.warmup {
                        let wait = (t - pkt.enqueued) as f64;
                        self.queue_wait[q].push(wait);
                        let head = self.last_grant[q].map_or(pkt.enqueued, |g| pkt.enqueued.max(g + 1));
                        self.queue_service[q].push((t - head + 1) as f64);
                        let cs = &mut self.class_stats[pkt.class as usize];
                        if pkt.stage == 0 {
                            cs.source_wait.push(wait);
                        } else {
                            cs.junction_wait.push(wait);
                        }
                    }
                    self.last_grant[q] = Some(t);
                    Some(pkt)
                } else {
                    None
                };
                if measuring {
                    let waiting = self.queues[q].len() as u64;
                    // Occupancy counts the packet being granted as in service.
                    self.queue_occ[q] += waiting + u64::from(local);
                    if local {
                        self.queue_granted[q] += 1;
                    } else if waiting == 0 {
                        self.queue_empty[q] += 1;
                    }
                    if granted.is_some() {
                        self.lane_busy[li][pos] += 1;
                    }
                }
                if granted.is_none() && !self.queues[q].is_empty() {
                    self.idle_with_backlog += 1;
                }
                self.lanes[li].links[pos * self.hop + slot] = granted;
            }
        }
    }

    fn deliver(&mut self, pkt: Packet, t: u64) {
        self.delivered += 1;
        if pkt.injected < self.cfg.warmup {
            return;
        }
        let lat = t - pkt.injected;
        let cs = &mut self.class_stats[pkt.class as usize];
        cs.latency.push(lat as f64);
        cs.latency_hist.push(lat);
        cs.deflections.push(pkt.deflections as f64);
        self.latency.push(lat as f64);
        self.latency_hist.push(lat);
        self.deflection_hist.push(pkt.deflections as u64);
        if self.cfg.trace {
            self.trace.push(TraceRecord {
                class: pkt.class,
                injected: pkt.injected,
                delivered: t,
                deflections: pkt.deflections,
            });
        }
    }

    fn finish(self) -> SimStats {
        let cfg = self.cfg;
        let topo = &cfg.topology;
        let window = (cfg.horizon - cfg.warmup) as f64;
        let in_links: u64 = self
            .lanes
            .iter()
            .map(|l| l.links.iter().filter(|p| p.is_some()).count() as u64)
            .sum();
        let in_queues: u64 = self.queues.iter().map(|q| q.len() as u64).sum();

        let mut queues = Vec::new();
        let mut link_utilization = Vec::new();
        for (li, lane) in self.lanes.iter().enumerate() {
            for pos in 0..lane.len {
                let q = lane.queue_base + pos;
                queues.push(QueueStats {
                    node: topo.ring_node(lane.id.ring, pos),
                    lane: lane.id,
                    mean_occupancy: self.queue_occ[q] as f64 / window,
                    empty_fraction: self.queue_empty[q] as f64 / window,
                    wait: self.queue_wait[q],
                    service: self.queue_service[q],
                    granted: self.queue_granted[q],
                });
                link_utilization.push((lane.id, pos, self.lane_busy[li][pos] as f64 / window));
            }
        }
        let loops = topo
            .rings()
            .into_iter()
            .zip(&self.ring_deflections)
            .map(|(ring, &d)| LoopStats {
                ring,
                deflections: d,
                deflection_rate: d as f64 / window,
            })
            .collect();
        let sources = self
            .sources
            .iter()
            .enumerate()
            .filter_map(|(node, s)| {
                s.as_ref().map(|s| SourceStats {
                    node,
                    rate: s.arrivals as f64 / window,
                    scv_arrival: if s.gaps.mean > 0.0 {
                        s.gaps.variance() / (s.gaps.mean * s.gaps.mean)
                    } else {
                        0.0
                    },
                })
            })
            .collect();

        SimStats {
            seed: cfg.seed,
            warmup: cfg.warmup,
            horizon: cfg.horizon,
            classes: self.class_stats,
            queues,
            loops,
            sources,
            link_utilization,
            deflection_hist: self.deflection_hist,
            latency: self.latency,
            latency_hist: self.latency_hist,
            injected: self.injected,
            delivered: self.delivered,
            in_flight: in_links + in_queues,
            idle_with_backlog: self.idle_with_backlog,
            trace: self.trace,
        }
    }
}

impl Lane {
    fn id_node(&self, topo: &NocTopology, pos: usize) -> usize {
        topo.ring_node(self.id.ring, pos)
    }
}

/// Runs one simulation to the horizon.
pub fn run(cfg: &SimConfig) -> Result<SimStats> {
    cfg.validate()?;
    let mut engine = Engine::new(cfg)?;
    for t in 0..cfg.horizon {
        engine.step(t);
    }
    Ok(engine.finish())
}

/// Per-loop deflection rates (events per cycle) within the measurement window.
pub fn measure_deflections(stats: &SimStats) -> Vec<LoopStats> {
    stats.loops.clone()
}

/// True when two runs of `cfg` produce identical statistics.
pub fn replay_check(cfg: &SimConfig) -> Result<bool> {
    Ok(run(cfg)? == run(cfg)?)
}
