//! JSON experiment description.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "topology": { "kind": "mesh", "rows": 6, "cols": 6 },
//!   "traffic": { "kind": "uniform" },
//!   "sweep": { "rates": [0.1, 0.2], "burst_probs": [0.0], "deflect_probs": [0.1, 0.3] },
//!   "sim": { "horizon": 200000, "warmup": 20000, "seeds": [1, 2, 3, 4, 5] }
//! }
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::presets::AppProfile;
use crate::canonical::SolverOptions;
use crate::error::{Error, Result};
use crate::sim::{DEFAULT_HORIZON, DEFAULT_MAX_DEFLECTIONS, DEFAULT_WARMUP};
use crate::topology::{DeflectConfig, NocTopology, TopologyKind, TrafficMatrix, Workload};
use crate::traffic::{ggeo_from_burstiness, BurstProfile};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub topology: TopologySpec,
    pub traffic: TrafficSpec,
    pub sweep: SweepSpec,
    #[serde(default)]
    pub deflection: DeflectionSpec,
    #[serde(default)]
    pub sim: SimSettings,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

fn one() -> u32 {
    1
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TopologySpec {
    Mesh {
        rows: usize,
        cols: usize,
        #[serde(default = "one")]
        hop_latency: u32,
    },
    Ring {
        nodes: usize,
        #[serde(default = "yes")]
        bidirectional: bool,
        #[serde(default = "one")]
        hop_latency: u32,
    },
}

impl TopologySpec {
    pub fn build(&self) -> NocTopology {
        let (kind, hop) = match *self {
            TopologySpec::Mesh { rows, cols, hop_latency } => {
                (TopologyKind::Mesh { rows, cols }, hop_latency)
            }
            TopologySpec::Ring { nodes, bidirectional, hop_latency } => {
                (TopologyKind::Ring { n: nodes, bidirectional }, hop_latency)
            }
        };
        NocTopology { kind, per_hop_latency: hop }
    }
}

/// Who sends to whom. The per-source rate and burstiness come from the
/// sweep, except for application profiles which fix both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TrafficSpec {
    /// Every source sends to every other node with equal weight.
    Uniform {},
    /// Row `s` gives the relative destination weights of source `s`.
    Matrix { weights: Vec<Vec<f64>> },
    /// Uniform traffic with a named application preset.
    App { profile: String },
    /// Every other node sends only to `sink`.
    Tandem { sink: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub rates: Vec<f64>,
    #[serde(default)]
    pub burst_probs: Vec<f64>,
    pub deflect_probs: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeflectionSpec {
    /// Fixed probability at junctions; defaults to the swept value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub junction: Option<f64>,
    /// Per-node sink probabilities that replace the swept value.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub sink_overrides: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSettings {
    pub horizon: u64,
    pub warmup: u64,
    pub seeds: Vec<u64>,
    pub max_deflections: u32,
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings {
            horizon: DEFAULT_HORIZON,
            warmup: DEFAULT_WARMUP,
            seeds: (1..=5).collect(),
            max_deflections: DEFAULT_MAX_DEFLECTIONS,
        }
    }
}

/// Coordinates of one sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub rate: f64,
    pub burst_prob: f64,
    pub deflect_prob: f64,
}

/// Everything needed to evaluate one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub topology: NocTopology,
    pub workload: Workload,
    pub deflect: DeflectConfig,
}

fn field_err(field: &str, message: impl Into<String>) -> Error {
    Error::config(field, message)
}

impl ExperimentConfig {
    /// Parses and validates a config; syntax errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| {
            Error::config(format!("line {} column {}", e.line(), e.column()), e.to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(field_err(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        let topo = self.topology.build();
        topo.validate().map_err(|e| field_err("topology", e.to_string()))?;
        let n = topo.num_nodes();
        if n < 2 {
            return Err(field_err("topology", "need at least two nodes"));
        }

        match &self.traffic {
            TrafficSpec::App { profile } => {
                if AppProfile::by_name(profile).is_none() {
                    return Err(field_err(
                        "traffic.profile",
                        format!(
                            "unknown profile {profile:?}; known: {}",
                            AppProfile::presets().iter().map(|p| p.name).collect::<Vec<_>>().join(", ")
                        ),
                    ));
                }
                if !self.sweep.rates.is_empty() || !self.sweep.burst_probs.is_empty() {
                    return Err(field_err(
                        "sweep",
                        "an application profile fixes the rate and burst probability",
                    ));
                }
            }
            other => {
                if self.sweep.rates.is_empty() {
                    return Err(field_err("sweep.rates", "sweep axis is empty"));
                }
                if let TrafficSpec::Matrix { weights } = other {
                    if weights.len() != n || weights.iter().any(|r| r.len() != n) {
                        return Err(field_err(
                            "traffic.weights",
                            format!("expected a {n}x{n} matrix"),
                        ));
                    }
                    for (s, row) in weights.iter().enumerate() {
                        if row.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) || row[s] != 0.0 {
                            return Err(field_err(
                                "traffic.weights",
                                format!("row {s} needs finite non-negative weights and a zero diagonal"),
                            ));
                        }
                    }
                }
                if let TrafficSpec::Tandem { sink } = other {
                    if *sink >= n {
                        return Err(field_err("traffic.sink", format!("node {sink} outside topology")));
                    }
                }
            }
        }
        for &r in &self.sweep.rates {
            if !(r > 0.0 && r < 1.0) {
                return Err(field_err("sweep.rates", format!("rate {r} outside (0, 1)")));
            }
        }
        for &b in &self.sweep.burst_probs {
            if !(0.0..1.0).contains(&b) {
                return Err(field_err("sweep.burst_probs", format!("{b} outside [0, 1)")));
            }
        }
        if self.sweep.deflect_probs.is_empty() {
            return Err(field_err("sweep.deflect_probs", "sweep axis is empty"));
        }
        let probs = self
            .sweep
            .deflect_probs
            .iter()
            .chain(self.deflection.junction.iter())
            .chain(self.deflection.sink_overrides.values());
        for &p in probs {
            if !(0.0..1.0).contains(&p) {
                return Err(field_err("deflection", format!("probability {p} outside [0, 1)")));
            }
        }
        if let Some((&node, _)) = self.deflection.sink_overrides.iter().find(|(&k, _)| k >= n) {
            return Err(field_err(
                "deflection.sink_overrides",
                format!("node {node} outside topology"),
            ));
        }
        let sim = &self.sim;
        if sim.warmup >= sim.horizon {
            return Err(field_err("sim.warmup", "warmup must be shorter than horizon"));
        }
        if sim.seeds.is_empty() {
            return Err(field_err("sim.seeds", "need at least one seed"));
        }
        if sim.max_deflections == 0 {
            return Err(field_err("sim.max_deflections", "must be at least 1"));
        }
        if !(self.solver.damping > 0.0 && self.solver.damping <= 1.0) {
            return Err(field_err("solver.damping", "must lie in (0, 1]"));
        }
        if !(self.solver.tolerance > 0.0) || self.solver.max_iterations == 0 {
            return Err(field_err("solver", "tolerance and max_iterations must be positive"));
        }
        Ok(())
    }

    /// All sweep points, sorted by `(rate, burst_prob, deflect_prob)`.
    pub fn points(&self) -> Vec<SweepPoint> {
        let (rates, bursts) = match &self.traffic {
            TrafficSpec::App { profile } => {
                let p = AppProfile::by_name(profile).expect("validated profile");
                (vec![p.rate], vec![p.burst_prob])
            }
            _ => {
                let bursts = if self.sweep.burst_probs.is_empty() {
                    vec![0.0]
                } else {
                    self.sweep.burst_probs.clone()
                };
                (self.sweep.rates.clone(), bursts)
            }
        };
        let mut out = Vec::new();
        for &rate in &rates {
            for &burst_prob in &bursts {
                for &deflect_prob in &self.sweep.deflect_probs {
                    out.push(SweepPoint { rate, burst_prob, deflect_prob });
                }
            }
        }
        out.sort_by(|a, b| {
            a.rate
                .total_cmp(&b.rate)
                .then(a.burst_prob.total_cmp(&b.burst_prob))
                .then(a.deflect_prob.total_cmp(&b.deflect_prob))
        });
        out.dedup();
        out
    }

    pub fn scenario(&self, point: SweepPoint) -> Result<Scenario> {
        let topology = self.topology.build();
        let n = topology.num_nodes();
        let source = ggeo_from_burstiness(BurstProfile {
            rate: point.rate,
            burst_prob: point.burst_prob,
        })?;
        let mut matrix = TrafficMatrix::zeros(n);
        match &self.traffic {
            TrafficSpec::Uniform {} | TrafficSpec::App { .. } => {
                matrix = TrafficMatrix::uniform(n, point.rate);
            }
            TrafficSpec::Matrix { weights } => {
                for (s, row) in weights.iter().enumerate() {
                    let total: f64 = row.iter().sum();
                    if total > 0.0 {
                        for (d, &w) in row.iter().enumerate() {
                            matrix.set(s, d, point.rate * w / total);
                        }
                    }
                }
            }
            TrafficSpec::Tandem { sink } => {
                for s in (0..n).filter(|s| s != sink) {
                    matrix.set(s, *sink, point.rate);
                }
            }
        }
        let workload = Workload {
            matrix,
            source_scv: vec![source.scv_arrival; n],
        };
        let mut deflect = DeflectConfig::uniform(n, point.deflect_prob);
        if let Some(j) = self.deflection.junction {
            deflect.junction = vec![j; n];
        }
        for (&node, &p) in &self.deflection.sink_overrides {
            deflect.sink[node] = p;
        }
        Ok(Scenario { topology, workload, deflect })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "schema_version": 1,
        "topology": { "kind": "ring", "nodes": 6 },
        "traffic": { "kind": "uniform" },
        "sweep": { "rates": [0.1], "deflect_probs": [0.2] }
    }"#;

    #[test]
    fn minimal_config_defaults() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.sim.seeds, vec![1, 2, 3, 4, 5]);
        assert_eq!(cfg.sim.horizon, 200_000);
        assert_eq!(
            cfg.points(),
            vec![SweepPoint { rate: 0.1, burst_prob: 0.0, deflect_prob: 0.2 }]
        );
    }

    #[test]
    fn round_trips_through_json() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn syntax_error_names_line() {
        let err = ExperimentConfig::from_json("{\n  \"schema_version\": 1,\n  oops\n}").unwrap_err();
        match err {
            Error::Config { field, .. } => assert!(field.starts_with("line 3"), "{field}"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn empty_axis_is_rejected() {
        let text = MINIMAL.replace("\"rates\": [0.1]", "\"rates\": []");
        match ExperimentConfig::from_json(&text).unwrap_err() {
            Error::Config { field, .. } => assert_eq!(field, "sweep.rates"),
            e => panic!("unexpected {e}"),
        }
        let text = MINIMAL.replace("\"deflect_probs\": [0.2]", "\"deflect_probs\": []");
        assert!(ExperimentConfig::from_json(&text).is_err());
    }

    #[test]
    fn wrong_schema_version_is_rejected() {
        let text = MINIMAL.replace("\"schema_version\": 1", "\"schema_version\": 7");
        assert!(matches!(
            ExperimentConfig::from_json(&text),
            Err(Error::Config { field, .. }) if field == "schema_version"
        ));
    }

    #[test]
    fn unknown_field_is_rejected() {
        let text = MINIMAL.replace("\"kind\": \"uniform\"", "\"kind\": \"uniform\", \"foo\": 1");
        assert!(ExperimentConfig::from_json(&text).is_err());
    }

    #[test]
    fn points_are_sorted_and_complete() {
        let text = MINIMAL.replace(
            "\"sweep\": { \"rates\": [0.1], \"deflect_probs\": [0.2] }",
            "\"sweep\": { \"rates\": [0.3, 0.1], \"burst_probs\": [0.6, 0.2], \"deflect_probs\": [0.3, 0.1] }",
        );
        let pts = ExperimentConfig::from_json(&text).unwrap().points();
        assert_eq!(pts.len(), 8);
        assert_eq!(pts[0], SweepPoint { rate: 0.1, burst_prob: 0.2, deflect_prob: 0.1 });
        assert_eq!(pts[7], SweepPoint { rate: 0.3, burst_prob: 0.6, deflect_prob: 0.3 });
    }

    #[test]
    fn app_profile_fixes_rate() {
        let text = r#"{
            "schema_version": 1,
            "topology": { "kind": "mesh", "rows": 4, "cols": 4 },
            "traffic": { "kind": "app", "profile": "web-frontend" },
            "sweep": { "deflect_probs": [0.1] }
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        let p = AppProfile::by_name("web-frontend").unwrap();
        assert_eq!(cfg.points()[0].rate, p.rate);
        let bad = text.replace("\"sweep\": {", "\"sweep\": { \"rates\": [0.1],");
        assert!(ExperimentConfig::from_json(&bad).is_err());
    }

    #[test]
    fn tandem_scenario_targets_sink() {
        let text = r#"{
            "schema_version": 1,
            "topology": { "kind": "ring", "nodes": 6, "bidirectional": false },
            "traffic": { "kind": "tandem", "sink": 0 },
            "sweep": { "rates": [0.05], "deflect_probs": [0.3] },
            "deflection": { "sink_overrides": { "3": 0.0 } }
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        let sc = cfg.scenario(cfg.points()[0]).unwrap();
        assert_eq!(sc.workload.matrix.get(4, 0), 0.05);
        assert_eq!(sc.workload.matrix.get(4, 1), 0.0);
        assert_eq!(sc.deflect.sink[3], 0.0);
        assert_eq!(sc.deflect.sink[0], 0.3);
    }
}
