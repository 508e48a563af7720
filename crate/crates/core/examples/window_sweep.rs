//! Parallel sweep over window sizes, printed as CSV.

use mwnc::coopsched::Topology;
use mwnc::simulator::{run_many, Load, Protocol, SimConfig, CSV_HEADER};

fn main() -> mwnc::Result<()> {
    let link = Topology::new(vec![vec![0.0, 0.8], vec![0.8, 0.0]], 1)?;
    let configs: Vec<SimConfig> = [4, 8, 12, 16, 20]
        .iter()
        .map(|&w| SimConfig {
            window: w,
            load: Load::Rho(0.9),
            slots: 200_000,
            ..SimConfig::new(link.clone(), Protocol::Mwnc)
        })
        .collect();
    println!("{CSV_HEADER}");
    for m in run_many(&configs) {
        println!("{}", m?.csv_row());
    }
    Ok(())
}
