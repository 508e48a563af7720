//! Monte Carlo checks of the random-walk formulas.

use mwnc::analysis::{
    absorption_probs, mc_point_process, mc_single_barrier, mc_two_barrier, point_process, single_barrier_moments,
    UpperRule, WalkModel,
};

fn main() -> mwnc::Result<()> {
    let model = WalkModel::new(0.8, 0.6)?;

    let (p_a, p_b) = absorption_probs(2.4, 0.6, &model)?;
    let mc = mc_two_barrier(2.4, 0.6, &model, UpperRule::AtLeast, 200_000, 1)?;
    println!("P_A {p_a:.4} vs {:.4}, P_B {p_b:.4} vs {:.4}", mc.p_upper, mc.p_lower);

    let delay = single_barrier_moments(&model)?;
    let mc = mc_single_barrier(&model, 200_000, 2)?;
    println!("E[N] {:.3} vs {:.3} ± {:.3}", delay.e_n, mc.e_n, mc.e_n_se);

    let ppm = point_process(6, &model)?;
    let mc = mc_point_process(6, &model, 200_000, 3)?;
    println!(
        "W=6 P_DD {:.3} vs {:.3}, P_LL {:.3} vs {:.3}",
        ppm.p_dd, mc.p_dd(), ppm.p_ll, mc.p_ll()
    );
    Ok(())
}
