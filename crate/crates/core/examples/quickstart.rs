//! Model and simulator side by side on a 6x6 mesh with bursty traffic.

use deflect_noc::network::{end_to_end_latency, ModelOptions};
use deflect_noc::sim::{run, SimConfig};
use deflect_noc::topology::{DeflectConfig, NocTopology, Workload};
use deflect_noc::traffic::{ggeo_from_burstiness, BurstProfile};

fn main() -> deflect_noc::Result<()> {
    let topo = NocTopology::mesh(6, 6);
    let source = ggeo_from_burstiness(BurstProfile { rate: 0.1, burst_prob: 0.6 })?;
    let workload = Workload::uniform(36, source);
    let deflect = DeflectConfig::uniform(36, 0.3);

    let model = end_to_end_latency(&topo, &workload, &deflect, &ModelOptions::default())?;
    let sim = run(&SimConfig::new(topo, workload, deflect, 1))?;
    println!("model {:.3} cycles, simulator {:.3} cycles", model.average, sim.mean_latency());
    Ok(())
}
