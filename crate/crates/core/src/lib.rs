//! Numerical laboratory for token-capped screening of generative models.
//!
//! The crate builds the greedy exploration belief process for a generalized
//! entropy, derives its stopping-time law, prices the optimal token-cap menu,
//! and certifies the result (first-order conditions, a cutting-plane upper
//! bound, and a global incentive-compatibility audit).
//!
//! Module map:
//!
//! - [`entropy`]: entropy models, Bregman divergences, regularity diagnostics
//! - [`greedy`]: the deterministic skeleton (phases, rates, drift path)
//! - [`stopping`]: stopping laws, the capacity functional, Monte Carlo paths
//! - [`screening`]: type distributions and the token price menu
//! - [`baselines`]: constant-delay and diffusion mechanism families
//! - [`verify`]: multiplier certificates, LP upper bound, IC/IR audit
//! - [`extensions`]: heterogeneous valuations and endogenous reasoning quality
//! - [`cli`]: run configuration and the `token-screen` command surface
//!
//! ```no_run
//! use token_screen::prelude::*;
//!
//! let entropy = EntropyModel::quadratic_binary(2.0);
//! let prior = Belief::binary(0.5).unwrap();
//! let skeleton = build_skeleton(&entropy, &prior, 0.125, &SkeletonOptions::default()).unwrap();
//! let law = stopping_law(&skeleton, skeleton.default_horizon()).unwrap();
//! let types = TypeModel::uniform(1.0, 2.0).unwrap();
//! let menu = build_menu(&types, &law, 0.125, 401).unwrap();
//! println!("revenue = {}", menu_revenue(&menu, &types));
//! ```

pub mod baselines;
pub mod cli;
pub mod entropy;
mod error;
pub mod extensions;
pub mod greedy;
pub mod lp;
pub mod payoff;
pub mod quad;
pub mod scenarios;
pub mod screening;
pub mod stopping;
pub mod verify;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::baselines::{constant_delay_solution, diffusion_solution, screen_1d};
    pub use crate::entropy::{Belief, EntropyModel, MassVector};
    pub use crate::extensions::{
        extended_menu, kummer_1f1, quality_curve, scd_check, valuation_cutoff, ValuationProfile,
    };
    pub use crate::greedy::{build_skeleton, GreedySkeleton, SkeletonOptions};
    pub use crate::payoff::Payoff;
    pub use crate::screening::{build_menu, menu_revenue, price, TypeModel};
    pub use crate::stopping::{
        capacity_audit, expected_payoff, simulate_paths, stopping_law, truncate_law, StoppingLaw,
    };
    pub use crate::verify::{foc_check, foc_multiplier, ic_audit, oracle_upper_bound};
    pub use crate::{Error, Result};
}
