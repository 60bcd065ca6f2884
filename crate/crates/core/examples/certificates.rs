//! Optimality and incentive certificates: FOC multipliers, the LP upper bound,
//! and the global IC/IR audit.

use token_screen::prelude::*;
use token_screen::verify::oracle_grid;

fn main() -> Result<()> {
    let entropy = EntropyModel::quadratic_binary(2.0);
    let prior = Belief::binary(0.6)?;
    let chi = 0.125;
    let sk = build_skeleton(&entropy, &prior, chi, &SkeletonOptions::default())?;
    let horizon = sk.default_horizon();
    let law = stopping_law(&sk, horizon)?;
    let rho = Payoff::discount(1.0);

    let mp = foc_multiplier(&sk, &rho, horizon)?;
    let foc = foc_check(&sk, &law, &mp, &rho)?;
    println!(
        "FOC: max excess {:.2e}, active gap {:.2e}, min lambda {:.3e}, passes {}",
        foc.max_excess,
        foc.max_active_gap,
        foc.min_lambda,
        foc.passes(1e-7)
    );

    let value = expected_payoff(&law, &rho);
    let grid = oracle_grid(horizon, 200, 6.0, &sk.breakpoints());
    let bound = oracle_upper_bound(&rho, &entropy, &prior, chi, &grid)?;
    println!(
        "greedy {value:.6} <= bound {:.6} (gap {:.3}%, {} cut rounds)",
        bound.value,
        100.0 * (bound.value / value - 1.0),
        bound.iterations
    );

    let types = TypeModel::uniform(1.0, 2.0)?;
    let menu = build_menu(&types, &law, chi, 201)?;
    let ic = ic_audit(&menu, &types);
    println!(
        "IC: max misreport gain {:.2e} at {:?}, min IR slack {:.2e}",
        ic.max_gain, ic.argmax, ic.min_ir_slack
    );
    Ok(())
}
