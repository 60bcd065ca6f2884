//! Optimal token-cap menu for discount-rate types and its revenue.

use token_screen::prelude::*;
use token_screen::screening::virtual_surplus_revenue;

fn main() -> Result<()> {
    let entropy = EntropyModel::quadratic_binary(2.0);
    let prior = Belief::binary(0.5)?;
    let chi = 0.125;
    let sk = build_skeleton(&entropy, &prior, chi, &SkeletonOptions::default())?;
    let law = stopping_law(&sk, sk.default_horizon())?;
    let types = TypeModel::uniform(1.0, 2.0)?;
    let menu = build_menu(&types, &law, chi, 401)?;

    println!(
        "{:>6} {:>10} {:>10} {:>10} {:>10}",
        "r", "T", "tokens", "price", "net"
    );
    for e in menu.entries.iter().step_by(50) {
        println!(
            "{:>6.3} {:>10.4} {:>10.4} {:>10.6} {:>10.6}",
            e.r, e.cutoff, e.cap_tokens, e.price, e.net_utility
        );
    }
    println!("P(1.5) = {:.8}", price(&types, &law, 1.5)?);
    println!("revenue           {:.8}", menu_revenue(&menu, &types));
    println!(
        "virtual surplus   {:.8}",
        virtual_surplus_revenue(&menu, &types)
    );
    Ok(())
}
