//! Deterministic greedy belief path: phases, entry times, and the stationary tail.

use token_screen::prelude::*;

fn main() -> Result<()> {
    let entropy = EntropyModel::quadratic_binary(2.0);
    let prior = Belief::binary(0.6)?;
    let sk = build_skeleton(&entropy, &prior, 0.125, &SkeletonOptions::default())?;

    for phase in sk.phases() {
        println!(
            "phase {} on [{:.4}, {:.4}] active {:?} ({} nodes)",
            phase.index,
            phase.start,
            phase.end,
            phase.active,
            phase.nodes.len()
        );
    }
    let st = sk.stationary();
    println!(
        "stationary from t = {:.6}: belief {:?}, rates {:?}, hazard {:.6}",
        st.start,
        st.belief.probs(),
        st.rates,
        st.hazard
    );

    // phase 1 follows (1 − μ_t)² = 0.16 + t/4 until both states tie
    for t in [0.0, 0.1, 0.2, 0.3] {
        let mu = sk.belief_at(t).probs()[1];
        println!(
            "t = {t:.1}: mu = {mu:.8}, (1-mu)^2 = {:.8}",
            (1.0 - mu).powi(2)
        );
    }
    let (drift, budget) = sk.invariant_residuals();
    println!("martingale residual {drift:.2e}, information budget residual {budget:.2e}");
    Ok(())
}
