//! Constant-delay and diffusion mechanisms against the greedy menu.

use token_screen::prelude::*;

fn main() -> Result<()> {
    let entropy = EntropyModel::quadratic_binary(2.0);
    let prior = Belief::binary(0.5)?;
    let chi = 0.125;
    let types = TypeModel::uniform(1.0, 2.0)?;

    let cd = constant_delay_solution(&types, &entropy, &prior, chi, 201)?;
    println!(
        "constant delay: t_min = {}, price = {:.6}, cutoff = {:?}, revenue = {:.7}",
        cd.t_min,
        cd.screen.prices[0],
        cd.screen.participation_cutoff(),
        cd.screen.revenue
    );
    let df = diffusion_solution(&types, chi, 201)?;
    println!(
        "diffusion: sigma = {:?}, revenue = {:.7}",
        df.screen.allocation[0], df.screen.revenue
    );

    let sk = build_skeleton(&entropy, &prior, chi, &SkeletonOptions::default())?;
    let law = stopping_law(&sk, sk.default_horizon())?;
    let greedy = menu_revenue(&build_menu(&types, &law, chi, 401)?, &types);
    println!("greedy menu revenue {greedy:.6}");
    println!("ratio to constant delay {:.3}", greedy / cd.screen.revenue);
    println!("ratio to diffusion      {:.3}", greedy / df.screen.revenue);
    Ok(())
}
