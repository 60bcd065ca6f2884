//! Stopping-time law of the greedy process, its capacity audit, and expected payoffs.

use token_screen::prelude::*;

fn main() -> Result<()> {
    let entropy = EntropyModel::shannon();
    let prior = Belief::new(vec![0.5, 0.3, 0.2])?;
    let chi = 0.2;
    let sk = build_skeleton(&entropy, &prior, chi, &SkeletonOptions::default())?;
    let law = stopping_law(&sk, sk.default_horizon())?;

    println!("entry times {:?}", sk.breakpoints());
    for t in [1.0, 2.0, 5.0, 10.0, 20.0] {
        println!(
            "F({t:>4}) = {:?}  f = {:.5}",
            law.cdf_vec(t),
            law.density(t)
        );
    }
    let audit = capacity_audit(&law, &entropy, &prior, chi)?;
    println!("capacity: max |slack| = {:.2e}", audit.max_abs_slack());

    for rate in [0.5, 1.0, 2.0] {
        let v = expected_payoff(&law, &Payoff::discount(rate));
        println!("E[exp(-{rate} tau)] = {v:.6}");
    }

    // a law that learns too fast breaks the constraint
    let quad = EntropyModel::quadratic_binary(2.0);
    let binary = Belief::binary(0.5)?;
    for delay in [1.0, 2.0] {
        let cd = StoppingLaw::constant_delay(&binary, delay);
        let a = capacity_audit(&cd, &quad, &binary, 0.125)?;
        println!("constant delay {delay}: min slack {:.4}", a.min_slack().1);
    }

    let capped = truncate_law(&law, 3.0);
    println!("mass learned by t = 3: {:.5}", capped.learned_mass());
    Ok(())
}
