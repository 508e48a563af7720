//! Closed-form predictions for one operating point.

fn main() -> mwnc::Result<()> {
    for w in [8, 12, 16, 20] {
        let r = mwnc::analysis::report(0.8, 0.72, w)?;
        println!(
            "W={w:2} rho={:.2} p_loss={:.3e} delay={:.2} ops bound={:.1}",
            r.rho, r.p_loss, r.delay.d_bar, r.complexity_bound
        );
    }
    let r = mwnc::analysis::report(0.8, 0.6, 20)?;
    println!("{}", serde_json::to_string_pretty(&r).expect("report serializes"));
    Ok(())
}
