//! Cooperative multicast on a random disk deployment.

use mwnc::simulator::{build_topology, run, DiskSpec, Load, Protocol, SimConfig, TopologySpec};

fn main() -> mwnc::Result<()> {
    let topo = build_topology(&TopologySpec::Disk(DiskSpec::standard(20, 3, 11)))?;
    for protocol in [Protocol::Mwncast, Protocol::CoopRlnc, Protocol::Mwnc] {
        let m = run(&SimConfig {
            load: Load::Rho(0.9),
            window: 20,
            block: 20,
            slots: 20_000,
            ..SimConfig::new(topo.clone(), protocol)
        })?;
        println!(
            "{:9} C*={:.3} throughput min/mean {:.3}/{:.3} delay {:.1} loss {:.1e}",
            protocol.name(),
            m.capacity,
            m.throughput_min,
            m.throughput_mean,
            m.delay_mean,
            m.loss
        );
    }
    Ok(())
}
