//! Relay selection on a source, two relays and one far receiver.

use mwnc::coopsched::{draw_slot, equivalent_capacity, select_relays, Topology};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> mwnc::Result<()> {
    let prp = vec![
        vec![0.0, 0.7, 0.9, 0.4],
        vec![0.7, 0.0, 0.0, 0.9],
        vec![0.9, 0.0, 0.0, 0.8],
        vec![0.4, 0.9, 0.8, 0.0],
    ];
    let topo = Topology::new(prp, 2)?;
    let (capacity, plan) = select_relays(&topo, 1e-3)?;
    println!("C* = {capacity:.4}");
    for round in &plan.rounds {
        println!("relays {:?} share {:.4}", round.relays, round.phi);
    }
    println!("equivalent capacities {:.4?}", equivalent_capacity(&plan, &topo));

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let slots: Vec<_> = (0..12).map(|_| draw_slot(&plan, &mut rng)).collect();
    println!("first slots (None = source only) {slots:?}");
    Ok(())
}
