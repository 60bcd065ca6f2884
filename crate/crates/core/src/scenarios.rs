//! Named model configurations used by the examples, tests, and CLI.

use crate::entropy::{Belief, EntropyModel};
use crate::greedy::{build_skeleton, GreedySkeleton, SkeletonOptions};
use crate::screening::TypeModel;
use crate::Result;

#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: &'static str,
    pub entropy: EntropyModel,
    pub prior: Belief,
    pub chi: f64,
}

impl Scenario {
    pub fn skeleton(&self) -> Result<GreedySkeleton> {
        build_skeleton(
            &self.entropy,
            &self.prior,
            self.chi,
            &SkeletonOptions::default(),
        )
    }
}

/// Quadratic-variation entropy, uniform binary prior, `χ = 1/8`.
pub fn leading() -> Scenario {
    Scenario {
        name: "leading",
        entropy: EntropyModel::quadratic_binary(2.0),
        prior: Belief::binary(0.5).unwrap(),
        chi: 0.125,
    }
}

/// Leading entropy and rate with prior `P(θ=1) = 0.6`.
pub fn asymmetric() -> Scenario {
    Scenario {
        name: "asymmetric",
        entropy: EntropyModel::quadratic_binary(2.0),
        prior: Belief::binary(0.6).unwrap(),
        chi: 0.125,
    }
}

pub fn shannon_uniform3() -> Scenario {
    Scenario {
        name: "shannon-uniform3",
        entropy: EntropyModel::shannon(),
        prior: Belief::uniform(3).unwrap(),
        chi: 0.2,
    }
}

/// Three states entering one at a time.
pub fn shannon_skewed() -> Scenario {
    Scenario {
        name: "shannon-skewed",
        entropy: EntropyModel::shannon(),
        prior: Belief::new(vec![0.5, 0.3, 0.2]).unwrap(),
        chi: 0.2,
    }
}

pub fn all() -> Vec<Scenario> {
    vec![
        leading(),
        asymmetric(),
        shannon_uniform3(),
        shannon_skewed(),
    ]
}

/// Discount rates uniform on `[1, 2]`.
pub fn leading_types() -> TypeModel {
    TypeModel::uniform(1.0, 2.0).unwrap()
}
