//! Multi-class superposition model and end-to-end latency of a whole NoC.
//!
//! Each traffic class is first solved in isolation with its deflection loop
//! to get the moments of the deflected stream it generates. The streams of
//! all classes consumed on a lane are superposed into one deflected
//! aggregate, which has the highest priority on every link of that lane.
//!
//! Every directed link is then a priority server: the deflected aggregate
//! first, then packets already travelling on the lane ranked by how far they
//! have come, and the local egress queue last. Classes that share an egress
//! queue are merged into one FIFO flow. The wait of the egress queue follows
//! from the priority waiting-time recursion.
//!
//! Packets pay their source-queue wait, a junction-queue wait for turning
//! classes, the static route latency, and one full loop per deflection.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::canonical::{
    departure_scv, expected_deflections, merge_scv, solve_canonical_with, split_scv,
    wait_deflected, CanonicalInput, ClampEvents, Clamped, ServiceProcess, SolverOptions,
};
use crate::error::{Error, Result};
use crate::par::{map_collect, Execution};
use crate::topology::{
    enumerate_classes, route_yx, DeflectConfig, Direction, LaneId, NodeId, NocTopology,
    Orientation, RingId, Segment, TrafficClassSpec, Workload,
};
use crate::traffic::GGeoParams;

/// One priority level of a multi-class server.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorityClass {
    pub rate: f64,
    pub scv_arrival: f64,
    pub service: ServiceProcess,
}

impl PriorityClass {
    pub fn unit(rate: f64, scv_arrival: f64) -> Self {
        PriorityClass {
            rate,
            scv_arrival,
            service: ServiceProcess::UNIT,
        }
    }

    fn rho(&self) -> f64 {
        self.rate * self.service.mean
    }
}

/// Superposed stream of deflected packets sharing a loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeflectedAggregate {
    pub rate: f64,
    pub scv: f64,
    /// `(rate, scv)` of each class's deflected stream.
    pub contributions: Vec<(f64, f64)>,
    /// Service time of a deflected packet at the shared server.
    pub service: f64,
    pub wait: f64,
    pub wait_clamped: bool,
}

impl DeflectedAggregate {
    pub fn empty(service: f64) -> Self {
        DeflectedAggregate {
            rate: 0.0,
            scv: 1.0,
            contributions: Vec::new(),
            service,
            wait: 0.0,
            wait_clamped: false,
        }
    }

    fn rho(&self) -> f64 {
        self.rate * self.service
    }
}

/// Classes in decreasing priority behind one deflected aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiClassSystem {
    pub classes: Vec<PriorityClass>,
    pub deflected: DeflectedAggregate,
}

/// Deflected stream `(rate, scv)` generated by one class on its own with the
/// loop, plus the full single-class solution.
pub fn per_class_deflection(
    arrivals: GGeoParams,
    p_d: f64,
    opts: &SolverOptions,
) -> Result<(f64, f64, Option<crate::canonical::CanonicalResult>)> {
    if arrivals.rate == 0.0 || p_d == 0.0 {
        return Ok((0.0, 1.0, None));
    }
    let res = solve_canonical_with(&CanonicalInput::unit(arrivals, p_d), opts)?;
    Ok((res.deflected_rate, res.deflected_scv, Some(res)))
}

/// Adds deflected streams; the SCV is their rate-weighted mean.
pub fn superpose(contributions: Vec<(f64, f64)>, service: f64) -> Result<DeflectedAggregate> {
    let rate: f64 = contributions.iter().map(|c| c.0).sum();
    if rate <= 0.0 {
        let mut agg = DeflectedAggregate::empty(service);
        agg.contributions = contributions;
        return Ok(agg);
    }
    let scv = contributions.iter().map(|c| c.0 * c.1).sum::<f64>() / rate;
    let wait = wait_deflected(rate * service, service, 0.0, 1.0, scv, rate)?;
    Ok(DeflectedAggregate {
        rate,
        scv,
        contributions,
        service,
        wait: wait.value,
        wait_clamped: wait.clamped,
    })
}

/// Waits of every class of `system`, highest priority first.
///
/// Class `i` waits for the residual work of the deflected stream and of all
/// higher classes, plus the work that arrives in those queues while it
/// waits.
pub fn priority_waits(system: &MultiClassSystem) -> Result<Vec<Clamped>> {
    let d = &system.deflected;
    let rho_d = d.rho();
    let mut higher = rho_d * (d.service + 1.0) + 2.0 * rho_d * d.wait;
    let mut load = rho_d;
    let mut out = Vec::with_capacity(system.classes.len());
    for (i, c) in system.classes.iter().enumerate() {
        load += c.rho();
        if load >= 1.0 {
            return Err(Error::Unstable {
                server: format!("priority level {}", i + 1),
                utilization: load,
            });
        }
        let t = c.service.mean;
        let own = c.rho() * (t - 1.0) + t * (c.scv_arrival + c.rate - 1.0);
        let w = if c.rate > 0.0 {
            Clamped::floor_zero((higher + own) / (2.0 * (1.0 - load)))
        } else {
            // A vanishing class only sees the residual of the others.
            Clamped::floor_zero((higher + t * (c.scv_arrival - 1.0)) / (2.0 * (1.0 - load)))
        };
        higher += c.rho() * (t + 1.0) + 2.0 * c.rho() * w.value;
        out.push(w);
    }
    Ok(out)
}

/// Wait of class `i` (0-based, 0 is the highest priority).
pub fn wait_multiclass(system: &MultiClassSystem, i: usize) -> Result<Clamped> {
    if i >= system.classes.len() {
        return Err(Error::invalid(format!(
            "class {i} out of range for {} classes",
            system.classes.len()
        )));
    }
    let mut reduced = system.clone();
    reduced.classes.truncate(i + 1);
    Ok(priority_waits(&reduced)?[i])
}

/// Wait of a FIFO queue shared by `members`, served below `higher`.
///
/// The members are merged into one flow and every member gets that flow's
/// wait.
pub fn shared_queue_waits(higher: &MultiClassSystem, members: &[(f64, f64)]) -> Result<Vec<Clamped>> {
    let (rate, scv) = merged(members);
    let mut sys = higher.clone();
    sys.classes.push(PriorityClass::unit(rate, scv));
    let w = *priority_waits(&sys)?.last().expect("merged class present");
    Ok(vec![w; members.len()])
}

fn merged(members: &[(f64, f64)]) -> (f64, f64) {
    members
        .iter()
        .fold((0.0, 1.0), |(r, s), &(ri, si)| (r + ri, merge_scv(r, s, ri, si)))
}

/// Result of solving a multi-class server with one deflection loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiClassSolution {
    pub deflected: DeflectedAggregate,
    pub waits: Vec<f64>,
    pub clamps: ClampEvents,
    pub iterations: usize,
    pub converged: bool,
}

/// Solves `N` priority classes consumed at one sink that deflects with
/// probability `p_d`. `arrivals` is in decreasing priority.
pub fn solve_multiclass(
    arrivals: &[GGeoParams],
    p_d: f64,
    opts: &SolverOptions,
) -> Result<MultiClassSolution> {
    let mut clamps = ClampEvents::default();
    let mut iterations = 0;
    let mut converged = true;
    let mut contributions = Vec::with_capacity(arrivals.len());
    for a in arrivals {
        let (rate, scv, res) = per_class_deflection(*a, p_d, opts)?;
        if let Some(res) = res {
            clamps.absorb(res.clamps);
            iterations = iterations.max(res.iterations);
            converged &= res.converged;
        } else {
            iterations = iterations.max(1);
        }
        contributions.push((rate, scv));
    }
    let deflected = superpose(contributions, 1.0)?;
    let system = MultiClassSystem {
        classes: arrivals
            .iter()
            .map(|a| PriorityClass::unit(a.rate, a.scv_arrival))
            .collect(),
        deflected,
    };
    let waits = priority_waits(&system)?;
    clamps.wait += waits.iter().filter(|w| w.clamped).count() as u32;
    clamps.wait += u32::from(system.deflected.wait_clamped);
    Ok(MultiClassSolution {
        waits: waits.iter().map(|w| w.value).collect(),
        deflected: system.deflected,
        clamps,
        iterations,
        converged,
    })
}

/// Knobs of the network model.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ModelOptions {
    pub solver: SolverOptions,
    pub execution: Execution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassLatency {
    pub class: usize,
    pub source: NodeId,
    pub destination: NodeId,
    pub rate: f64,
    pub static_latency: u32,
    pub source_wait: f64,
    pub junction_wait: f64,
    /// Expected cycles spent circulating after deflections.
    pub deflection_delay: f64,
    pub latency: f64,
}

impl ClassLatency {
    pub fn wait(&self) -> f64 {
        self.source_wait + self.junction_wait
    }
}

/// Deflected traffic circulating in one row or column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopEstimate {
    pub ring: RingId,
    /// Deflection events per cycle.
    pub deflected_rate: f64,
    pub scv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkEstimate {
    pub lane: LaneId,
    pub position: usize,
    pub node: NodeId,
    pub utilization: f64,
    /// Arrival rate of the egress queue feeding this link.
    pub queue_rate: f64,
    pub queue_scv: f64,
    pub queue_wait: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub classes: Vec<ClassLatency>,
    /// Rate-weighted mean latency over all classes.
    pub average: f64,
    pub loops: Vec<LoopEstimate>,
    pub links: Vec<LinkEstimate>,
    pub clamps: ClampEvents,
    pub iterations: usize,
    pub converged: bool,
    /// Classes whose deflection fixed point hit the iteration cap.
    pub unconverged: Vec<usize>,
}

impl LatencyReport {
    pub fn class(&self, source: NodeId, destination: NodeId) -> Option<&ClassLatency> {
        self.classes
            .iter()
            .find(|c| c.source == source && c.destination == destination)
    }

    pub fn loop_rate(&self, ring: RingId) -> Option<f64> {
        self.loops.iter().find(|l| l.ring == ring).map(|l| l.deflected_rate)
    }
}

/// A class riding one lane: which queue it enters, how far it goes and how
/// often it is refused at the end.
#[derive(Debug, Clone, Copy)]
struct Stage {
    seg: Segment,
    rate: f64,
    p_d: f64,
}

/// Per-lane state of the link model.
struct LaneModel {
    id: LaneId,
    len: usize,
    stages: Vec<Stage>,
    deflected: DeflectedAggregate,
}

#[derive(Debug, Clone, Copy, Default)]
struct QueueModel {
    rate: f64,
    scv: f64,
    /// Through traffic (deflected plus in-flight) on the link it feeds.
    through: f64,
    wait: f64,
    depart_scv: f64,
}

fn lane_label(topo: &NocTopology, lane: LaneId, pos: usize) -> String {
    let node = topo.ring_node(lane.ring, pos);
    let o = match lane.ring.orientation {
        Orientation::Row => "row",
        Orientation::Column => "column",
    };
    let d = match lane.dir {
        Direction::Forward => "forward",
        Direction::Backward => "backward",
    };
    format!("{o} {} {d} link out of node {node}", lane.ring.index)
}

fn deflection_loop_label(lane: LaneId) -> String {
    let o = match lane.ring.orientation {
        Orientation::Row => "row",
        Orientation::Column => "column",
    };
    let d = match lane.dir {
        Direction::Forward => "forward",
        Direction::Backward => "backward",
    };
    format!("deflection loop of {o} {} ({d})", lane.ring.index)
}

/// Distance travelled along `lane` from `from` to `to`.
fn distance(lane: LaneId, len: usize, from: usize, to: usize) -> usize {
    match lane.dir {
        Direction::Forward => (to + len - from) % len,
        Direction::Backward => (from + len - to) % len,
    }
}

struct Solved {
    contributions: Vec<(f64, f64)>,
    clamps: ClampEvents,
    iterations: usize,
    /// Input indices whose fixed point hit the iteration cap.
    unconverged: Vec<usize>,
}

/// Names the saturated server of an instability error.
fn at_server(e: Error, name: impl FnOnce() -> String) -> Error {
    match e {
        Error::Unstable { utilization, .. } => Error::Unstable {
            server: name(),
            utilization,
        },
        other => other,
    }
}

/// Solves each class with its loop; a failure carries the input index.
fn solve_contributions(
    inputs: &[(GGeoParams, f64)],
    opts: &ModelOptions,
) -> std::result::Result<Solved, (usize, Error)> {
    let results = map_collect(opts.execution, inputs, |(a, p)| {
        per_class_deflection(*a, *p, &opts.solver)
    });
    let mut out = Solved {
        contributions: Vec::with_capacity(inputs.len()),
        clamps: ClampEvents::default(),
        iterations: 1,
        unconverged: Vec::new(),
    };
    for (k, r) in results.into_iter().enumerate() {
        let (rate, scv, res) = r.map_err(|e| (k, e))?;
        if let Some(res) = res {
            out.clamps.absorb(res.clamps);
            out.iterations = out.iterations.max(res.iterations);
            if !res.converged {
                out.unconverged.push(k);
            }
        }
        out.contributions.push((rate, scv));
    }
    Ok(out)
}

/// Stream a class was split from before it reached an egress queue: its
/// source's arrival process, or the departures of the queue it turned from.
#[derive(Debug, Clone, Copy)]
struct Parent {
    key: (usize, usize),
    rate: f64,
    scv: f64,
}

/// Rate and SCV of a queue fed by sub-streams of several parents.
///
/// Sub-streams of one parent are a single random split of it, so they are
/// recombined before merging with the (independent) other parents.
fn merge_members(members: &[(Parent, f64)]) -> (f64, f64) {
    let mut groups: BTreeMap<(usize, usize), (Parent, f64)> = BTreeMap::new();
    for &(parent, rate) in members {
        groups.entry(parent.key).or_insert((parent, 0.0)).1 += rate;
    }
    let parts: Vec<(f64, f64)> = groups
        .values()
        .map(|&(p, r)| (r, split_scv(p.scv, (r / p.rate).min(1.0))))
        .collect();
    merged(&parts)
}

impl LaneModel {
    /// Solves every link of the lane. `parents[k]` is the stream that
    /// `stages[k]` was split from.
    fn solve(
        &self,
        topo: &NocTopology,
        parents: &[Parent],
    ) -> Result<(Vec<QueueModel>, Vec<LinkEstimate>, u32)> {
        let len = self.len;
        let mut members: Vec<Vec<(Parent, f64)>> = vec![Vec::new(); len];
        // covered[o][d]: rate from queue o still on the lane after d hops.
        let mut covered = vec![vec![0.0; len + 1]; len];
        for (k, s) in self.stages.iter().enumerate() {
            members[s.seg.start].push((parents[k], s.rate));
            for d in 0..s.seg.hops.min(len) {
                covered[s.seg.start][d] += s.rate;
            }
        }
        let mut queues = vec![QueueModel::default(); len];
        for pos in 0..len {
            let (rate, scv) = merge_members(&members[pos]);
            let through: f64 = self.deflected.rho()
                + (0..len)
                    .filter(|&o| o != pos)
                    .map(|o| covered[o][distance(self.id, len, o, pos)])
                    .sum::<f64>();
            let util = through + rate;
            if util >= 1.0 {
                return Err(Error::Unstable {
                    server: lane_label(topo, self.id, pos),
                    utilization: util,
                });
            }
            // Each slot the link is taken by through traffic with
            // probability `through`, so the egress service is geometric.
            let rho_eff = rate / (1.0 - through);
            queues[pos] = QueueModel {
                rate,
                scv,
                through,
                wait: 0.0,
                depart_scv: departure_scv(rho_eff, scv, through),
            };
        }

        let mut links = Vec::with_capacity(len);
        let mut clamped = 0;
        for pos in 0..len {
            // Upstream flows, the one that has come furthest first.
            let mut upstream: Vec<(usize, usize)> = (0..len)
                .filter(|&o| o != pos)
                .map(|o| (distance(self.id, len, o, pos), o))
                .filter(|&(d, o)| covered[o][d] > 0.0)
                .collect();
            upstream.sort_by(|a, b| b.cmp(a));
            let mut classes: Vec<PriorityClass> = upstream
                .iter()
                .map(|&(d, o)| {
                    let q = &queues[o];
                    let r = covered[o][d];
                    PriorityClass::unit(r, split_scv(q.depart_scv, r / q.rate))
                })
                .collect();
            let q = queues[pos];
            classes.push(PriorityClass::unit(q.rate, q.scv));
            let sys = MultiClassSystem {
                classes,
                deflected: self.deflected.clone(),
            };
            let waits = priority_waits(&sys)?;
            let w = *waits.last().expect("local queue present");
            clamped += waits.iter().filter(|w| w.clamped).count() as u32;
            queues[pos].wait = if q.rate > 0.0 { w.value } else { 0.0 };
            links.push(LinkEstimate {
                lane: self.id,
                position: pos,
                node: topo.ring_node(self.id.ring, pos),
                utilization: q.through + q.rate,
                queue_rate: q.rate,
                queue_scv: q.scv,
                queue_wait: queues[pos].wait,
            });
        }
        Ok((queues, links, clamped))
    }
}

/// End-to-end latency of every class of `workload` on `topo`.
pub fn end_to_end_latency(
    topo: &NocTopology,
    workload: &Workload,
    deflect: &DeflectConfig,
    opts: &ModelOptions,
) -> Result<LatencyReport> {
    topo.validate()?;
    workload.validate()?;
    deflect.validate(topo.num_nodes())?;
    if workload.nodes() != topo.num_nodes() {
        return Err(Error::invalid("workload and topology sizes differ"));
    }
    let classes = enumerate_classes(topo, &workload.matrix)?;
    if classes.is_empty() {
        return idle_report(topo, deflect);
    }

    let lane_ids = topo.lanes();
    let lane_index: HashMap<LaneId, usize> =
        lane_ids.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let mut lanes: Vec<LaneModel> = lane_ids
        .iter()
        .map(|&id| LaneModel {
            id,
            len: topo.ring_len(id.ring),
            stages: Vec::new(),
            deflected: DeflectedAggregate::empty(1.0),
        })
        .collect();

    // First and second stages of every class.
    let mut first: Vec<Stage> = Vec::with_capacity(classes.len());
    let mut second: Vec<Option<Stage>> = Vec::with_capacity(classes.len());
    for c in &classes {
        let rate = workload.matrix.get(c.source, c.destination);
        let mut segs = c.segments();
        let s1 = segs.next().expect("class has a segment");
        let p1 = if c.turns() {
            deflect.junction[c.junction]
        } else {
            deflect.sink[c.destination]
        };
        first.push(Stage { seg: s1, rate, p_d: p1 });
        second.push(segs.next().map(|s2| Stage {
            seg: s2,
            rate,
            p_d: deflect.sink[c.destination],
        }));
    }

    let mut clamps = ClampEvents::default();
    let mut iterations = 1;
    let mut unconverged = Vec::new();

    // Columns first: they carry only first stages and feed the junctions.
    let mut queue_of: HashMap<(usize, usize), QueueModel> = HashMap::new();
    let mut links = Vec::new();
    let mut wait_clamps = 0;
    for pass in [Orientation::Column, Orientation::Row] {
        let mut inputs = Vec::new();
        let mut placed = Vec::new();
        for (k, c) in classes.iter().enumerate() {
            let stages = [Some(first[k]), second[k]];
            for (si, st) in stages.iter().enumerate() {
                let Some(st) = st else { continue };
                if st.seg.lane.ring.orientation != pass {
                    continue;
                }
                let parent = if si == 0 {
                    let src = workload
                        .source_params(c.source)
                        .expect("class source injects");
                    Parent {
                        key: (usize::MAX, c.source),
                        rate: src.rate,
                        scv: src.scv_arrival,
                    }
                } else {
                    // Column-stage output of this class, split from its
                    // source queue departures.
                    let key = (lane_index[&first[k].seg.lane], first[k].seg.start);
                    let q = queue_of[&key];
                    Parent {
                        key,
                        rate: q.rate,
                        scv: q.depart_scv,
                    }
                };
                // Departures can be smoother than any GGeo stream of the
                // same rate; such classes are treated as geometric.
                let arrivals = GGeoParams {
                    rate: st.rate,
                    scv_arrival: split_scv(parent.scv, st.rate / parent.rate).max(1.0 - st.rate),
                };
                inputs.push((arrivals, st.p_d));
                placed.push((lane_index[&st.seg.lane], *st, parent, k));
            }
        }
        if inputs.is_empty() {
            continue;
        }
        let solved = solve_contributions(&inputs, opts).map_err(|(i, e)| {
            let c = &classes[placed[i].3];
            at_server(e, || {
                format!("deflection loop of class {} -> {} in isolation", c.source, c.destination)
            })
        })?;
        clamps.absorb(solved.clamps);
        iterations = iterations.max(solved.iterations);
        unconverged.extend(solved.unconverged.iter().map(|&i| classes[placed[i].3].id));
        let mut per_lane: Vec<Vec<(f64, f64)>> = vec![Vec::new(); lanes.len()];
        let mut per_lane_parents: Vec<Vec<Parent>> = vec![Vec::new(); lanes.len()];
        for ((l, st, parent, _), contrib) in placed.into_iter().zip(solved.contributions) {
            per_lane[l].push(contrib);
            lanes[l].stages.push(st);
            per_lane_parents[l].push(parent);
        }
        let active: Vec<usize> = (0..lanes.len())
            .filter(|&l| lanes[l].id.ring.orientation == pass && !lanes[l].stages.is_empty())
            .collect();
        for &l in &active {
            lanes[l].deflected = superpose(std::mem::take(&mut per_lane[l]), 1.0)
                .map_err(|e| at_server(e, || deflection_loop_label(lanes[l].id)))?;
            wait_clamps += u32::from(lanes[l].deflected.wait_clamped);
        }
        let results = map_collect(opts.execution, &active, |&l| {
            lanes[l].solve(topo, &per_lane_parents[l])
        });
        for (&l, r) in active.iter().zip(results) {
            let (queues, lane_links, c) = r?;
            wait_clamps += c;
            for (pos, q) in queues.into_iter().enumerate() {
                queue_of.insert((l, pos), q);
            }
            links.extend(lane_links);
        }
    }
    clamps.wait += wait_clamps;

    let mut out = Vec::with_capacity(classes.len());
    let (mut num, mut den) = (0.0, 0.0);
    for (k, c) in classes.iter().enumerate() {
        let wait_at = |st: &Stage| {
            queue_of
                .get(&(lane_index[&st.seg.lane], st.seg.start))
                .map_or(0.0, |q| q.wait)
        };
        let delay = |st: &Stage| -> Result<f64> {
            Ok(expected_deflections(st.p_d)? * topo.loop_time(st.seg.lane.ring) as f64)
        };
        let source_wait = wait_at(&first[k]);
        let mut deflection_delay = delay(&first[k])?;
        let mut junction_wait = 0.0;
        if let Some(s2) = &second[k] {
            junction_wait = wait_at(s2);
            deflection_delay += delay(s2)?;
        }
        let latency = c.static_latency as f64 + source_wait + junction_wait + deflection_delay;
        let rate = first[k].rate;
        num += rate * latency;
        den += rate;
        out.push(ClassLatency {
            class: c.id,
            source: c.source,
            destination: c.destination,
            rate,
            static_latency: c.static_latency,
            source_wait,
            junction_wait,
            deflection_delay,
            latency,
        });
    }

    Ok(LatencyReport {
        classes: out,
        average: num / den,
        loops: loop_estimates(topo, &lanes),
        links,
        clamps,
        iterations,
        converged: unconverged.is_empty(),
        unconverged,
    })
}

fn loop_estimates(topo: &NocTopology, lanes: &[LaneModel]) -> Vec<LoopEstimate> {
    topo.rings()
        .into_iter()
        .map(|ring| {
            let (rate, scv) = merged(
                &lanes
                    .iter()
                    .filter(|l| l.id.ring == ring)
                    .map(|l| (l.deflected.rate, l.deflected.scv))
                    .collect::<Vec<_>>(),
            );
            LoopEstimate {
                ring,
                deflected_rate: rate,
                scv,
            }
        })
        .collect()
}

/// Report for an idle network: every route at its zero-load latency.
fn idle_report(topo: &NocTopology, deflect: &DeflectConfig) -> Result<LatencyReport> {
    let n = topo.num_nodes();
    let mut classes = Vec::new();
    for s in 0..n {
        for d in (0..n).filter(|&d| d != s) {
            let c: TrafficClassSpec = route_yx(topo, s, d)?;
            let mut deflection_delay = 0.0;
            for (i, seg) in c.segments().enumerate() {
                let p = if i == 0 && c.turns() {
                    deflect.junction[c.junction]
                } else {
                    deflect.sink[d]
                };
                deflection_delay += expected_deflections(p)? * topo.loop_time(seg.lane.ring) as f64;
            }
            classes.push(ClassLatency {
                class: classes.len(),
                source: s,
                destination: d,
                rate: 0.0,
                static_latency: c.static_latency,
                source_wait: 0.0,
                junction_wait: 0.0,
                deflection_delay,
                latency: c.static_latency as f64 + deflection_delay,
            });
        }
    }
    let average = if classes.is_empty() {
        0.0
    } else {
        classes.iter().map(|c| c.latency).sum::<f64>() / classes.len() as f64
    };
    Ok(LatencyReport {
        classes,
        average,
        loops: topo
            .rings()
            .into_iter()
            .map(|ring| LoopEstimate { ring, deflected_rate: 0.0, scv: 1.0 })
            .collect(),
        links: Vec::new(),
        clamps: ClampEvents::default(),
        iterations: 1,
        converged: true,
        unconverged: Vec::new(),
    })
}
