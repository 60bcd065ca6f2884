//! Endogenous reasoning quality: κ boundaries per type and the figure data set.

use token_screen::extensions::{figure_curves, kappa_plateau, FIGURE_TYPES};
use token_screen::prelude::*;

fn main() -> Result<()> {
    let types = TypeModel::uniform(1.0, 2.0)?;
    let (alpha, chi) = (2.0, 0.125);

    let curve = quality_curve(&types, 1.5, alpha, chi, 11)?;
    println!("r = 1.5, cutoff T = {}", curve.cutoff);
    for j in 0..curve.t.len() {
        println!(
            "t = {:.3}: kappa = {:.6} band [{:.4}, {:.4}]",
            curve.t[j], curve.kappa[j], curve.lower[j], curve.upper[j]
        );
    }

    for c in figure_curves(&types, &FIGURE_TYPES, alpha, chi, 101)? {
        println!(
            "r = {:.4}: kappa(0) = {:.5}, plateau {:.5}",
            c.r,
            c.kappa[0],
            kappa_plateau(c.r, alpha, chi)
        );
    }
    println!("1F1(3, 4, 10) = {:.10e}", kummer_1f1(3.0, 4.0, 10.0)?);
    Ok(())
}
