//! Experiment runner: sweeps the model and the simulator over a config and
//! compares them.
//!
//! Sweep points and seeds run concurrently; outputs are always ordered by
//! sweep coordinates and then seed, so files are identical whatever the
//! worker count.

pub mod config;
pub mod presets;
pub mod report;

use std::time::Instant;

use statrs::distribution::{ContinuousCDF, StudentsT};

pub use config::{ExperimentConfig, Scenario, SweepPoint, SCHEMA_VERSION};
pub use presets::AppProfile;
pub use report::{
    AggregateRow, BenchRow, ClassRow, ComparisonRow, LoopAccuracy, SimRow, Status, SummaryRow,
};

use crate::error::{Error, Result};
use crate::network::{end_to_end_latency, LatencyReport, ModelOptions};
use crate::par::{map_collect, Execution};
use crate::sim::{run, SimConfig, SimStats};
use crate::topology::{enumerate_classes, DeflectConfig, NocTopology, Orientation, Workload};

fn model_options(cfg: &ExperimentConfig, exec: Execution) -> ModelOptions {
    ModelOptions {
        solver: cfg.solver,
        execution: exec,
    }
}

/// Runs the analytical model at one point. A report whose fixed point did
/// not converge is turned into a non-convergence error naming the class.
pub fn analyze_point(cfg: &ExperimentConfig, point: SweepPoint, exec: Execution) -> Result<LatencyReport> {
    let sc = cfg.scenario(point)?;
    end_to_end_latency(&sc.topology, &sc.workload, &sc.deflect, &model_options(cfg, exec))
}

/// Converts an unconverged report into the matching error.
pub fn require_converged(report: &LatencyReport) -> Result<()> {
    match report.unconverged.first() {
        None => Ok(()),
        Some(&class) => {
            let c = &report.classes[class];
            Err(Error::NonConvergence {
                class: format!("{} -> {}", c.source, c.destination),
                iterations: report.iterations,
            })
        }
    }
}

pub fn sim_config(cfg: &ExperimentConfig, sc: &Scenario, seed: u64) -> SimConfig {
    let mut sim = SimConfig::new(sc.topology, sc.workload.clone(), sc.deflect.clone(), seed)
        .with_window(cfg.sim.warmup, cfg.sim.horizon);
    sim.max_deflections = cfg.sim.max_deflections;
    sim
}

pub fn simulate_point(cfg: &ExperimentConfig, point: SweepPoint, seed: u64) -> Result<SimStats> {
    let sc = cfg.scenario(point)?;
    run(&sim_config(cfg, &sc, seed))
}

/// Model results for every sweep point, in sweep order.
pub fn analyze(cfg: &ExperimentConfig, exec: Execution) -> Vec<(SweepPoint, Result<LatencyReport>)> {
    let points = cfg.points();
    let reports = map_collect(exec, &points, |&p| analyze_point(cfg, p, exec));
    points.into_iter().zip(reports).collect()
}

/// Simulations of every point and seed, ordered by point then seed.
pub fn simulate(cfg: &ExperimentConfig, exec: Execution) -> Vec<(SweepPoint, u64, Result<SimStats>)> {
    let jobs: Vec<(SweepPoint, u64)> = cfg
        .points()
        .into_iter()
        .flat_map(|p| cfg.sim.seeds.iter().map(move |&s| (p, s)))
        .collect();
    let stats = map_collect(exec, &jobs, |&(p, s)| simulate_point(cfg, p, s));
    jobs.into_iter().zip(stats).map(|((p, s), r)| (p, s, r)).collect()
}

pub fn class_rows(point: SweepPoint, report: &LatencyReport) -> Vec<ClassRow> {
    report
        .classes
        .iter()
        .map(|c| ClassRow {
            rate: point.rate,
            burst_prob: point.burst_prob,
            deflect_prob: point.deflect_prob,
            class: c.class,
            source: c.source,
            destination: c.destination,
            class_rate: c.rate,
            static_latency: c.static_latency,
            source_wait: c.source_wait,
            junction_wait: c.junction_wait,
            deflection_delay: c.deflection_delay,
            latency: c.latency,
        })
        .collect()
}

pub fn aggregate_row(point: SweepPoint, outcome: &Result<LatencyReport>) -> AggregateRow {
    let mut row = AggregateRow {
        rate: point.rate,
        burst_prob: point.burst_prob,
        deflect_prob: point.deflect_prob,
        status: Status::Ok,
        average_latency: None,
        deflected_rate: None,
        clamp_events: 0,
        iterations: 0,
        converged: false,
        note: String::new(),
    };
    match outcome {
        Ok(r) => {
            row.average_latency = Some(r.average);
            row.deflected_rate = Some(r.loops.iter().map(|l| l.deflected_rate).sum());
            row.clamp_events = r.clamps.total();
            row.iterations = r.iterations;
            row.converged = r.converged;
            if let Err(e) = require_converged(r) {
                row.status = Status::NotConverged;
                row.note = e.to_string();
            }
        }
        Err(e) => {
            row.status = Status::of_error(e);
            row.note = e.to_string();
        }
    }
    row
}

pub fn sim_row(point: SweepPoint, stats: &SimStats) -> SimRow {
    let window = stats.window() as f64;
    SimRow {
        rate: point.rate,
        burst_prob: point.burst_prob,
        deflect_prob: point.deflect_prob,
        seed: stats.seed,
        mean_latency: stats.latency.mean,
        p50_latency: stats.latency_hist.quantile(0.5).unwrap_or(0),
        p99_latency: stats.latency_hist.quantile(0.99).unwrap_or(0),
        measured: stats.latency.count,
        injected: stats.injected,
        delivered: stats.delivered,
        in_flight: stats.in_flight,
        deflected_rate: stats.loops.iter().map(|l| l.deflections).sum::<u64>() as f64 / window,
    }
}

/// Mean and 95% confidence half-width of per-seed values.
pub fn mean_ci95(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    (mean, t * (var / n as f64).sqrt())
}

/// Model against simulation at every sweep point. Points the model finds
/// unstable are reported as such and not simulated.
pub fn validate(cfg: &ExperimentConfig, exec: Execution) -> Vec<ComparisonRow> {
    let analyzed = analyze(cfg, exec);
    let jobs: Vec<(usize, u64)> = analyzed
        .iter()
        .enumerate()
        .filter(|(_, (_, r))| r.is_ok())
        .flat_map(|(i, _)| cfg.sim.seeds.iter().map(move |&s| (i, s)))
        .collect();
    let sims = map_collect(exec, &jobs, |&(i, s)| simulate_point(cfg, analyzed[i].0, s));

    let mut rows = Vec::with_capacity(analyzed.len());
    for (i, (point, outcome)) in analyzed.iter().enumerate() {
        let agg = aggregate_row(*point, outcome);
        let mut row = ComparisonRow {
            rate: point.rate,
            burst_prob: point.burst_prob,
            deflect_prob: point.deflect_prob,
            status: agg.status,
            model_latency: agg.average_latency,
            sim_latency: None,
            sim_ci95: None,
            seeds: 0,
            error_pct: None,
            signed_error_pct: None,
            clamp_events: agg.clamp_events,
            iterations: agg.iterations,
            converged: agg.converged,
            note: agg.note,
        };
        if outcome.is_ok() {
            let mut latencies = Vec::new();
            for (job, res) in jobs.iter().zip(&sims) {
                if job.0 != i {
                    continue;
                }
                match res {
                    Ok(s) if s.latency.count > 0 => latencies.push(s.latency.mean),
                    Ok(_) => {
                        row.note = format!("seed {}: no measured packets", job.1);
                    }
                    Err(e) => {
                        row.status = Status::Failed;
                        row.note = format!("seed {}: {e}", job.1);
                    }
                }
            }
            if !latencies.is_empty() {
                let (mean, ci) = mean_ci95(&latencies);
                row.sim_latency = Some(mean);
                row.sim_ci95 = Some(ci);
                row.seeds = latencies.len();
                if let Some(m) = row.model_latency {
                    let signed = (m - mean) / mean * 100.0;
                    row.signed_error_pct = Some(signed);
                    row.error_pct = Some(signed.abs());
                }
            }
        }
        rows.push(row);
    }
    rows
}

/// Error statistics over the rows that have both a model and a simulated
/// value; everything else counts as skipped.
pub fn summarize(rows: &[ComparisonRow]) -> SummaryRow {
    let used: Vec<&ComparisonRow> = rows
        .iter()
        .filter(|r| r.status == Status::Ok && r.error_pct.is_some())
        .collect();
    let mut errs: Vec<f64> = used.iter().filter_map(|r| r.error_pct).collect();
    errs.sort_by(f64::total_cmp);
    let n = errs.len();
    let median = match n {
        0 => None,
        _ if n % 2 == 1 => Some(errs[n / 2]),
        _ => Some((errs[n / 2 - 1] + errs[n / 2]) / 2.0),
    };
    let mean_of = |v: Vec<f64>| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    SummaryRow {
        points: n,
        skipped: rows.len() - n,
        mean_error_pct: mean_of(errs.clone()),
        median_error_pct: median,
        max_error_pct: errs.last().copied(),
        signed_mean_error_pct: mean_of(used.iter().filter_map(|r| r.signed_error_pct).collect()),
    }
}

/// Wall-clock time of the analytical model on uniform all-to-all traffic
/// for each mesh size.
pub fn bench(
    sizes: &[(usize, usize)],
    rate: f64,
    p_d: f64,
    exec: Execution,
) -> Result<Vec<BenchRow>> {
    if sizes.is_empty() {
        return Err(Error::invalid("no mesh sizes to benchmark"));
    }
    let mut out = Vec::with_capacity(sizes.len());
    for &(rows, cols) in sizes {
        let topo = NocTopology::mesh(rows, cols);
        let nodes = topo.num_nodes();
        if nodes < 2 {
            return Err(Error::invalid(format!("{rows}x{cols} mesh has no traffic")));
        }
        let workload = Workload::uniform_geometric(nodes, rate);
        let deflect = DeflectConfig::uniform(nodes, p_d);
        let classes = enumerate_classes(&topo, &workload.matrix)?.len();
        let opts = ModelOptions {
            execution: exec,
            ..ModelOptions::default()
        };
        let start = Instant::now();
        end_to_end_latency(&topo, &workload, &deflect, &opts)?;
        out.push(BenchRow {
            rows,
            cols,
            nodes,
            classes,
            mode: if exec.is_parallel() { "parallel" } else { "sequential" }.into(),
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(out)
}

/// Per-loop deflected rate of the model against the simulator, averaged over
/// seeds, for every sweep point the model can solve.
pub fn deflection_check(cfg: &ExperimentConfig, exec: Execution) -> Result<Vec<LoopAccuracy>> {
    let analyzed = analyze(cfg, exec);
    let mut jobs = Vec::new();
    for (i, (_, r)) in analyzed.iter().enumerate() {
        if let Err(e) = r {
            return Err(Error::invalid(format!("model failed at point {}: {e}", i + 1)));
        }
        jobs.extend(cfg.sim.seeds.iter().map(|&s| (i, s)));
    }
    let sims = map_collect(exec, &jobs, |&(i, s)| simulate_point(cfg, analyzed[i].0, s));
    let sims: Vec<SimStats> = sims.into_iter().collect::<Result<_>>()?;

    let mut out = Vec::new();
    for (i, (point, report)) in analyzed.iter().enumerate() {
        let report = report.as_ref().expect("checked above");
        let runs: Vec<&SimStats> = jobs
            .iter()
            .zip(&sims)
            .filter(|(j, _)| j.0 == i)
            .map(|(_, s)| s)
            .collect();
        for est in &report.loops {
            let sim_rate = runs
                .iter()
                .map(|s| {
                    s.loops
                        .iter()
                        .find(|l| l.ring == est.ring)
                        .map_or(0.0, |l| l.deflection_rate)
                })
                .sum::<f64>()
                / runs.len() as f64;
            let degenerate = est.deflected_rate == 0.0 && sim_rate == 0.0;
            let accuracy_pct = if degenerate {
                100.0
            } else if sim_rate == 0.0 {
                0.0
            } else {
                (100.0 * (1.0 - (est.deflected_rate - sim_rate).abs() / sim_rate)).max(0.0)
            };
            out.push(LoopAccuracy {
                rate: point.rate,
                burst_prob: point.burst_prob,
                deflect_prob: point.deflect_prob,
                orientation: match est.ring.orientation {
                    Orientation::Row => "row".into(),
                    Orientation::Column => "column".into(),
                },
                index: est.ring.index,
                model_rate: est.deflected_rate,
                sim_rate,
                accuracy_pct,
                degenerate,
            });
        }
    }
    Ok(out)
}
