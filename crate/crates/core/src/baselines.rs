//! Parametric mechanism families solved as one-dimensional screening problems.

use crate::entropy::{Belief, EntropyModel};
use crate::screening::TypeDistribution;
use crate::stopping::StoppingLaw;
use crate::{Error, Result};

/// A one-parameter product line: a discrete allocation grid and the buyer's utility.
pub struct Family<U, D> {
    pub allocations: Vec<f64>,
    /// `U(a|r)`.
    pub utility: U,
    /// `∂U(a|r)/∂r`.
    pub utility_dr: D,
}

/// Range of types receiving one allocation, sold at one price.
#[derive(Clone, Debug, PartialEq)]
pub struct Piece {
    pub lo: f64,
    pub hi: f64,
    /// `None` is the null item.
    pub allocation: Option<f64>,
    pub price: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScreenSolution {
    pub types: Vec<f64>,
    pub allocation: Vec<Option<f64>>,
    pub prices: Vec<f64>,
    pub pieces: Vec<Piece>,
    pub revenue: f64,
}

impl ScreenSolution {
    /// Largest type that still buys, if any.
    pub fn participation_cutoff(&self) -> Option<f64> {
        self.pieces
            .iter()
            .filter(|p| p.allocation.is_some())
            .map(|p| p.hi)
            .fold(None, |m, x| Some(m.map_or(x, |m: f64| m.max(x))))
    }
}

/// `G/g`, zero where the inverse hazard is infinite.
fn rent_weight(tm: &dyn TypeDistribution, r: f64) -> f64 {
    let t = tm.inverse_hazard(r);
    if t.is_infinite() {
        0.0
    } else {
        1.0 / t
    }
}

fn best_allocation<U, D>(family: &Family<U, D>, tm: &dyn TypeDistribution, r: f64) -> Option<usize>
where
    U: Fn(f64, f64) -> f64,
    D: Fn(f64, f64) -> f64,
{
    let w = rent_weight(tm, r);
    let mut best: Option<(usize, f64)> = None;
    for (k, &a) in family.allocations.iter().enumerate() {
        let v = (family.utility)(a, r) + w * (family.utility_dr)(a, r);
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((k, v));
        }
    }
    best.filter(|&(_, v)| v >= 0.0).map(|(k, _)| k)
}

/// Pointwise virtual-value maximization with envelope prices; no ironing.
pub fn screen_1d<U, D>(
    family: &Family<U, D>,
    tm: &dyn TypeDistribution,
    type_points: usize,
) -> Result<ScreenSolution>
where
    U: Fn(f64, f64) -> f64,
    D: Fn(f64, f64) -> f64,
{
    if family.allocations.is_empty() {
        return Err(Error::DegenerateInput("empty allocation grid".into()));
    }
    let (a, b) = (tm.lower(), tm.upper());
    if a == b {
        // single type: monopoly price extracts the whole utility
        let k = (0..family.allocations.len())
            .max_by(|&i, &j| {
                (family.utility)(family.allocations[i], a)
                    .total_cmp(&(family.utility)(family.allocations[j], a))
            })
            .unwrap();
        let alloc = family.allocations[k];
        let p = (family.utility)(alloc, a).max(0.0);
        return Ok(ScreenSolution {
            types: vec![a],
            allocation: vec![Some(alloc)],
            prices: vec![p],
            pieces: vec![Piece {
                lo: a,
                hi: a,
                allocation: Some(alloc),
                price: p,
            }],
            revenue: p,
        });
    }
    let m = type_points.max(2);
    let types: Vec<f64> = (0..m)
        .map(|j| {
            if j == m - 1 {
                b
            } else {
                a + (b - a) * j as f64 / (m - 1) as f64
            }
        })
        .collect();
    let choice: Vec<Option<usize>> = types
        .iter()
        .map(|&r| best_allocation(family, tm, r))
        .collect();

    // pieces with switch points refined by bisection
    let mut bounds = vec![(a, choice[0])];
    for j in 1..m {
        if choice[j] != choice[j - 1] {
            let (mut lo, mut hi) = (types[j - 1], types[j]);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if best_allocation(family, tm, mid) == choice[j - 1] {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            bounds.push((0.5 * (lo + hi), choice[j]));
        }
    }

    // higher types must get weakly less valuable items
    let r_ref = 0.5 * (a + b);
    let value_of =
        |c: Option<usize>| c.map_or(0.0, |k| (family.utility)(family.allocations[k], r_ref));
    for w in bounds.windows(2) {
        if value_of(w[1].1) > value_of(w[0].1) + 1e-12 {
            return Err(Error::Regularity(format!(
                "allocation becomes more valuable past r = {}; ironing is not supported",
                w[1].0
            )));
        }
    }

    // envelope prices, integrating V' = ∂U/∂r downward from the top
    let mut pieces: Vec<Piece> = Vec::with_capacity(bounds.len());
    let mut v_hi = 0.0;
    for idx in (0..bounds.len()).rev() {
        let lo = bounds[idx].0;
        let hi = if idx + 1 < bounds.len() {
            bounds[idx + 1].0
        } else {
            b
        };
        let alloc = bounds[idx].1.map(|k| family.allocations[k]);
        let (price, v_lo) = match alloc {
            None => (0.0, v_hi),
            Some(x) => {
                let u_hi = (family.utility)(x, hi);
                let u_lo = (family.utility)(x, lo);
                (u_hi - v_hi, v_hi + u_lo - u_hi)
            }
        };
        pieces.push(Piece {
            lo,
            hi,
            allocation: alloc,
            price,
        });
        v_hi = v_lo;
    }
    pieces.reverse();

    let piece_of = |r: f64| {
        pieces
            .iter()
            .rposition(|p| p.lo <= r)
            .map_or(&pieces[0], |i| &pieces[i])
    };
    let allocation = types.iter().map(|&r| piece_of(r).allocation).collect();
    let prices = types.iter().map(|&r| piece_of(r).price).collect();
    let revenue = pieces
        .iter()
        .map(|p| p.price * (tm.cdf(p.hi) - tm.cdf(p.lo)))
        .sum();
    Ok(ScreenSolution {
        types,
        allocation,
        prices,
        pieces,
        revenue,
    })
}

#[inline]
pub fn sech(x: f64) -> f64 {
    let x = x.abs();
    if x > 700.0 {
        0.0
    } else {
        2.0 / (x.exp() + (-x).exp())
    }
}

/// Number of candidate allocations per family.
pub const ALLOCATION_POINTS: usize = 401;
/// Delays considered by the constant-delay family extend this far past the minimum.
pub const DELAY_SPAN: f64 = 20.0;

#[derive(Clone, Debug)]
pub struct ConstantDelaySolution {
    pub t_min: f64,
    pub screen: ScreenSolution,
    /// Law of the cheapest feasible constant-delay model.
    pub law: StoppingLaw,
}

/// Shortest delay meeting the capacity constraint: `(Σ μ_0(i)H(e_i) − H(μ_0))/χ`.
pub fn minimal_delay(entropy: &EntropyModel, prior: &Belief, chi: f64) -> Result<f64> {
    if !(chi > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "rate must be positive, got {chi}"
        )));
    }
    let n = prior.dim();
    entropy.check_dim(n)?;
    let vertex: f64 = prior
        .probs()
        .iter()
        .enumerate()
        .map(|(i, p)| p * entropy.vertex_value(n, i))
        .sum();
    Ok((vertex - entropy.value_raw(prior.probs())) / chi)
}

pub fn constant_delay_solution(
    tm: &dyn TypeDistribution,
    entropy: &EntropyModel,
    prior: &Belief,
    chi: f64,
    type_points: usize,
) -> Result<ConstantDelaySolution> {
    let t_min = minimal_delay(entropy, prior, chi)?;
    let step = DELAY_SPAN / (ALLOCATION_POINTS - 1) as f64;
    let family = Family {
        allocations: (0..ALLOCATION_POINTS)
            .map(|k| t_min + k as f64 * step)
            .collect(),
        utility: |t: f64, r: f64| (-r * t).exp(),
        utility_dr: |t: f64, r: f64| -t * (-r * t).exp(),
    };
    Ok(ConstantDelaySolution {
        t_min,
        screen: screen_1d(&family, tm, type_points)?,
        law: StoppingLaw::constant_delay(prior, t_min),
    })
}

/// `U(σ|r) = sech(√(r/2)/σ)`.
pub fn diffusion_utility(sigma: f64, r: f64) -> f64 {
    sech((r / 2.0).sqrt() / sigma)
}

#[derive(Clone, Debug)]
pub struct DiffusionSolution {
    pub sigma_max: f64,
    pub screen: ScreenSolution,
}

/// Diffusion family with flow volatility `σ ≤ √χ_qv`.
pub fn diffusion_solution(
    tm: &dyn TypeDistribution,
    chi_qv: f64,
    type_points: usize,
) -> Result<DiffusionSolution> {
    if !(chi_qv > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "rate must be positive, got {chi_qv}"
        )));
    }
    let sigma_max = chi_qv.sqrt();
    let family = Family {
        allocations: (1..=ALLOCATION_POINTS)
            .map(|k| sigma_max * k as f64 / ALLOCATION_POINTS as f64)
            .collect(),
        utility: diffusion_utility,
        utility_dr: |s: f64, r: f64| {
            let x = (r / 2.0).sqrt() / s;
            -sech(x) * x.tanh() / (2.0 * s * (2.0 * r).sqrt())
        },
    };
    Ok(DiffusionSolution {
        sigma_max,
        screen: screen_1d(&family, tm, type_points)?,
    })
}

/// Type distribution concentrated on one rate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointMass(pub f64);

impl TypeDistribution for PointMass {
    fn lower(&self) -> f64 {
        self.0
    }
    fn upper(&self) -> f64 {
        self.0
    }
    fn cdf(&self, r: f64) -> f64 {
        if r >= self.0 {
            1.0
        } else {
            0.0
        }
    }
    fn pdf(&self, _r: f64) -> f64 {
        f64::INFINITY
    }
    fn inverse_hazard(&self, _r: f64) -> f64 {
        f64::INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::screening::TypeModel;

    #[test]
    fn constant_delay_leading() {
        let tm = TypeModel::uniform(1.0, 2.0).unwrap();
        let s = constant_delay_solution(
            &tm,
            &EntropyModel::quadratic_binary(2.0),
            &Belief::binary(0.5).unwrap(),
            0.125,
            401,
        )
        .unwrap();
        assert!((s.t_min - 2.0).abs() < 1e-15);
        assert!((s.screen.revenue - 0.5 * (-3.0f64).exp()).abs() < 1e-12);
        assert!((s.screen.participation_cutoff().unwrap() - 1.5).abs() < 1e-12);
        assert!((s.screen.prices[0] - (-3.0f64).exp()).abs() < 1e-12);
        assert_eq!(s.screen.allocation[0], Some(s.t_min));
        assert_eq!(*s.screen.allocation.last().unwrap(), None);
    }

    #[test]
    fn shannon_minimal_delay() {
        let t = minimal_delay(
            &EntropyModel::shannon(),
            &Belief::binary(0.5).unwrap(),
            std::f64::consts::LN_2 / 2.0,
        )
        .unwrap();
        assert!((t - 2.0).abs() < 1e-14);
    }

    #[test]
    fn diffusion_leading() {
        let tm = TypeModel::uniform(1.0, 2.0).unwrap();
        let s = diffusion_solution(&tm, 0.125, 401).unwrap();
        let target = sech(2.0 * 2f64.sqrt());
        assert!((s.screen.revenue - target).abs() < 1e-12);
        assert!(s.screen.allocation.iter().all(|a| *a == Some(s.sigma_max)));
    }

    #[test]
    fn point_mass_monopoly() {
        let family = Family {
            allocations: vec![2.0, 3.0],
            utility: |t: f64, r: f64| (-r * t).exp(),
            utility_dr: |t: f64, r: f64| -t * (-r * t).exp(),
        };
        let s = screen_1d(&family, &PointMass(1.2), 11).unwrap();
        assert_eq!(s.revenue, (-2.4f64).exp());
    }

    #[test]
    fn sech_guard() {
        assert_eq!(sech(1e4), 0.0);
        assert_eq!(sech(0.0), 1.0);
    }
}
