//! Menus when the value of a correct answer varies with the discount rate.

use token_screen::prelude::*;

fn main() -> Result<()> {
    let entropy = EntropyModel::quadratic_binary(2.0);
    let prior = Belief::binary(0.5)?;
    let chi = 0.125;
    let sk = build_skeleton(&entropy, &prior, chi, &SkeletonOptions::default())?;
    let law = stopping_law(&sk, sk.default_horizon())?;
    let types = TypeModel::uniform(1.0, 2.0)?;

    for spec in ["1", "exp(-r)", "r^2", "exp(10*r)"] {
        let v: ValuationProfile = spec.parse()?;
        let scd = scd_check(&types, &v, 201);
        print!(
            "q(r) = {:<10} single crossing {} (margin {:+.3})",
            v.label(),
            scd.holds,
            scd.margin
        );
        match extended_menu(&types, &v, &law, chi, 201) {
            Ok(menu) => println!(
                ", T(1.5) = {:.4}, revenue {:.6}",
                valuation_cutoff(&types, &v, 1.5)?,
                menu_revenue(&menu, &types)
            ),
            Err(e) => println!(", no menu: {e}"),
        }
    }
    Ok(())
}
