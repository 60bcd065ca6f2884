//! Monte Carlo paths of the greedy process compared with the analytic law.

use token_screen::prelude::*;

fn main() -> Result<()> {
    let entropy = EntropyModel::quadratic_binary(2.0);
    let prior = Belief::binary(0.5)?;
    let sk = build_skeleton(&entropy, &prior, 0.125, &SkeletonOptions::default())?;
    let law = stopping_law(&sk, sk.default_horizon())?;

    let n = 100_000;
    let sim = simulate_paths(&sk, n, 42, law.horizon(), &[1.0, 5.0, 10.0])?;
    println!(
        "KS distance {:.5} (1% critical value {:.5})",
        sim.ks_distance(&law),
        1.63 / (n as f64).sqrt()
    );
    println!("state frequencies {:?}", sim.state_frequencies(2));
    for (t, m) in sim.checkpoints.iter().zip(&sim.mean_belief) {
        println!("E[mu_{t}] = {:?}", m);
    }
    for t in [1.0, 2.0, 4.0] {
        println!(
            "F_0({t}) analytic {:.5} empirical {:.5}",
            law.cdf_state(0, t),
            sim.empirical_cdf_state(0, t)
        );
    }
    Ok(())
}
