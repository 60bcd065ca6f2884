//! Entropy values, Bregman divergences to the vertices, and the regularity
//! diagnostics for the two built-in entropy families.

use token_screen::prelude::*;

fn main() -> Result<()> {
    let shannon = EntropyModel::shannon();
    let mu = Belief::new(vec![0.5, 0.3, 0.2])?;
    println!("Shannon ({}) at {:?}", shannon.units(), mu.probs());
    println!("  gradient            {:?}", shannon.gradient(&mu)?);
    println!(
        "  vertex divergences  {:?}",
        shannon.vertex_divergences(&mu)?
    );
    let nu = Belief::uniform(3)?;
    println!(
        "  D(uniform | mu)     {:.6}",
        shannon.bregman(&nu, &mu)?.value()
    );

    let quad = EntropyModel::quadratic_binary(2.0);
    for p in [0.5, 0.6, 0.9] {
        let mu = Belief::binary(p)?;
        let d = quad.vertex_divergences(&mu)?;
        println!(
            "quadratic, P(1) = {p}: D(e_0|mu) = {:.4}, D(e_1|mu) = {:.4}",
            d[0], d[1]
        );
    }

    for (name, model, n) in [("shannon", &shannon, 3), ("quadratic", &quad, 2)] {
        let rep = model.assumption1_report(n, 40)?;
        println!(
            "{name}: bounded {} separated {} monotone {} (max cross-curvature {:.3e})",
            rep.bounded, rep.separated, rep.monotone, rep.max_cross_curvature
        );
    }
    Ok(())
}
