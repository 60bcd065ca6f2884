//! Type distributions, virtual time preferences, and the token price menu.

use rayon::prelude::*;

use crate::extensions::ValuationProfile;
use crate::payoff::Payoff;
use crate::quad::adaptive_simpson;
use crate::stopping::{payoff_until, StoppingLaw};
use crate::{Error, Result};

/// Absolute tolerance for time-integral quadrature in pricing.
pub const QUAD_TOL: f64 = 1e-9;

const DENSITY_FLOOR: f64 = 1e-12;

/// Distribution of the discount rate `r` on `[lower, upper]`.
pub trait TypeDistribution: Send + Sync {
    fn lower(&self) -> f64;
    fn upper(&self) -> f64;
    fn cdf(&self, r: f64) -> f64;
    fn pdf(&self, r: f64) -> f64;

    /// `g(r)/G(r)`, infinite where `G` vanishes.
    fn inverse_hazard(&self, r: f64) -> f64 {
        let big_g = self.cdf(r);
        if big_g <= 0.0 {
            f64::INFINITY
        } else {
            self.pdf(r) / big_g
        }
    }

    /// Whether `g/G` is differentiable at `r`.
    fn smooth_at(&self, _r: f64) -> bool {
        true
    }

    fn contains(&self, r: f64) -> bool {
        r >= self.lower() && r <= self.upper()
    }

    fn check(&self, r: f64) -> Result<()> {
        if self.contains(r) {
            Ok(())
        } else {
            Err(Error::TypeOutOfSupport {
                r,
                low: self.lower(),
                high: self.upper(),
            })
        }
    }
}

/// Monotone cubic (Fritsch–Carlson) interpolant of a tabulated CDF.
#[derive(Clone, Debug, PartialEq)]
pub struct TabulatedCdf {
    knots: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
    floored: bool,
}

impl TabulatedCdf {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let m = knots.len();
        if m < 2 || values.len() != m {
            return Err(Error::DegenerateInput(
                "tabulated distribution needs at least two matching knots".into(),
            ));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) || knots[0] <= 0.0 {
            return Err(Error::DegenerateInput(
                "knots must be positive and strictly increasing".into(),
            ));
        }
        if values[0] != 0.0 || (values[m - 1] - 1.0).abs() > 1e-8 {
            return Err(Error::DegenerateInput("CDF must run from 0 to 1".into()));
        }
        if values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::DegenerateInput(
                "CDF values must be nondecreasing".into(),
            ));
        }
        let delta: Vec<f64> = (0..m - 1)
            .map(|k| (values[k + 1] - values[k]) / (knots[k + 1] - knots[k]))
            .collect();
        let mut slopes = vec![0.0; m];
        slopes[0] = delta[0];
        slopes[m - 1] = delta[m - 2];
        for k in 1..m - 1 {
            slopes[k] = if delta[k - 1] * delta[k] <= 0.0 {
                0.0
            } else {
                0.5 * (delta[k - 1] + delta[k])
            };
        }
        for k in 0..m - 1 {
            if delta[k] == 0.0 {
                slopes[k] = 0.0;
                slopes[k + 1] = 0.0;
                continue;
            }
            let a = slopes[k] / delta[k];
            let b = slopes[k + 1] / delta[k];
            let s = a * a + b * b;
            if s > 9.0 {
                let tau = 3.0 / s.sqrt();
                slopes[k] = tau * a * delta[k];
                slopes[k + 1] = tau * b * delta[k];
            }
        }
        let floored = slopes.iter().any(|&d| d < DENSITY_FLOOR);
        Ok(Self {
            knots,
            values,
            slopes,
            floored,
        })
    }

    /// True when the derived density touched the floor somewhere.
    pub fn density_floored(&self) -> bool {
        self.floored
    }

    fn locate(&self, r: f64) -> (usize, f64, f64) {
        let k = self
            .knots
            .partition_point(|&x| x <= r)
            .saturating_sub(1)
            .min(self.knots.len() - 2);
        let h = self.knots[k + 1] - self.knots[k];
        (k, h, (r - self.knots[k]) / h)
    }

    fn cdf(&self, r: f64) -> f64 {
        if r <= self.knots[0] {
            return 0.0;
        }
        if r >= *self.knots.last().unwrap() {
            return 1.0;
        }
        let (k, h, s) = self.locate(r);
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.values[k]
            + h10 * h * self.slopes[k]
            + h01 * self.values[k + 1]
            + h11 * h * self.slopes[k + 1]
    }

    fn pdf(&self, r: f64) -> f64 {
        let (k, h, s) = self.locate(r.clamp(self.knots[0], *self.knots.last().unwrap()));
        let s2 = s * s;
        let d00 = (6.0 * s2 - 6.0 * s) / h;
        let d10 = 3.0 * s2 - 4.0 * s + 1.0;
        let d01 = (-6.0 * s2 + 6.0 * s) / h;
        let d11 = 3.0 * s2 - 2.0 * s;
        let g = d00 * self.values[k]
            + d10 * self.slopes[k]
            + d01 * self.values[k + 1]
            + d11 * self.slopes[k + 1];
        g.max(DENSITY_FLOOR)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TypeModel {
    Uniform { low: f64, high: f64 },
    Tabulated(TabulatedCdf),
}

impl TypeModel {
    pub fn uniform(low: f64, high: f64) -> Result<Self> {
        if !(low > 0.0 && high > low && high.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "uniform support needs 0 < low < high, got [{low}, {high}]"
            )));
        }
        Ok(Self::Uniform { low, high })
    }

    pub fn tabulated(knots: Vec<f64>, cdf: Vec<f64>) -> Result<Self> {
        TabulatedCdf::new(knots, cdf).map(Self::Tabulated)
    }

    /// `m` equally spaced types covering the support.
    pub fn grid(&self, m: usize) -> Vec<f64> {
        let (a, b) = (self.lower(), self.upper());
        if m < 2 {
            return vec![a];
        }
        (0..m)
            .map(|j| {
                if j == m - 1 {
                    b
                } else {
                    a + (b - a) * j as f64 / (m - 1) as f64
                }
            })
            .collect()
    }
}

impl TypeDistribution for TypeModel {
    fn lower(&self) -> f64 {
        match self {
            Self::Uniform { low, .. } => *low,
            Self::Tabulated(t) => t.knots[0],
        }
    }

    fn upper(&self) -> f64 {
        match self {
            Self::Uniform { high, .. } => *high,
            Self::Tabulated(t) => *t.knots.last().unwrap(),
        }
    }

    fn cdf(&self, r: f64) -> f64 {
        match self {
            Self::Uniform { low, high } => ((r - low) / (high - low)).clamp(0.0, 1.0),
            Self::Tabulated(t) => t.cdf(r),
        }
    }

    fn pdf(&self, r: f64) -> f64 {
        match self {
            Self::Uniform { low, high } => 1.0 / (high - low),
            Self::Tabulated(t) => t.pdf(r),
        }
    }

    fn inverse_hazard(&self, r: f64) -> f64 {
        match self {
            // exact form avoids (1/w)/((r-a)/w) rounding
            Self::Uniform { low, .. } => {
                if r <= *low {
                    f64::INFINITY
                } else {
                    1.0 / (r - low)
                }
            }
            Self::Tabulated(_) => {
                let big_g = self.cdf(r);
                if big_g <= 0.0 {
                    f64::INFINITY
                } else {
                    self.pdf(r) / big_g
                }
            }
        }
    }

    fn smooth_at(&self, r: f64) -> bool {
        match self {
            Self::Uniform { .. } => true,
            Self::Tabulated(t) => {
                let n = t.knots.len();
                !t.knots[1..n - 1]
                    .iter()
                    .any(|&k| (k - r).abs() <= 1e-12 * k)
            }
        }
    }
}

/// `ρ_r(t) = e^{−rt}(1 − t·G(r)/g(r))` with its root `T(r)`.
#[derive(Clone, Debug)]
pub struct VirtualPreference {
    pub r: f64,
    pub cutoff: f64,
    pub payoff: Payoff,
    pub truncated: Payoff,
}

pub fn virtual_preference(tm: &dyn TypeDistribution, r: f64) -> Result<VirtualPreference> {
    tm.check(r)?;
    let cutoff = tm.inverse_hazard(r);
    let slope = if cutoff.is_infinite() {
        0.0
    } else {
        -1.0 / cutoff
    };
    let payoff = Payoff::exp_linear(r, 1.0, slope);
    Ok(VirtualPreference {
        r,
        cutoff,
        truncated: payoff.clone().positive_part(),
        payoff,
    })
}

/// `χ·T(r)` tokens (`+inf` for the unlimited tier).
pub fn token_cap(tm: &dyn TypeDistribution, chi: f64, r: f64) -> Result<f64> {
    tm.check(r)?;
    Ok(chi * tm.inverse_hazard(r))
}

/// `E[e^{−zτ}; τ ≤ cap]`.
pub(crate) fn discounted_mass(law: &StoppingLaw, z: f64, cap: f64) -> f64 {
    if cap <= 0.0 {
        return 0.0;
    }
    payoff_until(law, &Payoff::discount(z), cap)
}

/// `E[τe^{−zτ}; τ ≤ cap]`.
pub(crate) fn discounted_time(law: &StoppingLaw, z: f64, cap: f64) -> f64 {
    if cap <= 0.0 {
        return 0.0;
    }
    payoff_until(law, &Payoff::time_weighted_discount(z), cap)
}

/// `U(reported|r)`: discounted learning probability under the reported cap.
pub fn user_utility(
    law: &StoppingLaw,
    r: f64,
    reported: f64,
    tm: &dyn TypeDistribution,
) -> Result<f64> {
    tm.check(r)?;
    tm.check(reported)?;
    Ok(discounted_mass(law, r, tm.inverse_hazard(reported)))
}

/// Menu price of type `r` from the envelope formula with IR binding at the top type.
pub fn price(tm: &dyn TypeDistribution, law: &StoppingLaw, r: f64) -> Result<f64> {
    tm.check(r)?;
    let own = discounted_mass(law, r, tm.inverse_hazard(r));
    let rent = adaptive_simpson(
        |z| discounted_time(law, z, tm.inverse_hazard(z)),
        r,
        tm.upper(),
        0.1 * QUAD_TOL,
    );
    Ok(own - rent)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarginalPrice {
    /// Utility per token.
    pub value: f64,
    /// Set when `T` is not differentiable at `r` and a secant was used.
    pub secant: bool,
}

/// `e^{−rT(r)} f(T(r)) / χ`, the price of one more token at type `r`.
pub fn marginal_price(
    tm: &dyn TypeDistribution,
    law: &StoppingLaw,
    chi: f64,
    r: f64,
) -> Result<MarginalPrice> {
    tm.check(r)?;
    let t = tm.inverse_hazard(r);
    if t.is_infinite() {
        return Ok(MarginalPrice {
            value: 0.0,
            secant: false,
        });
    }
    if tm.smooth_at(r) {
        return Ok(MarginalPrice {
            value: (-r * t).exp() * law.density(t) / chi,
            secant: false,
        });
    }
    let d = 1e-4 * (tm.upper() - tm.lower());
    let (lo, hi) = ((r - d).max(tm.lower()), (r + d).min(tm.upper()));
    let dp = price(tm, law, lo)? - price(tm, law, hi)?;
    let dt = tm.inverse_hazard(lo) - tm.inverse_hazard(hi);
    Ok(MarginalPrice {
        value: dp / (chi * dt),
        secant: true,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MenuEntry {
    pub r: f64,
    /// Stopping cutoff `T(r)` in time units (`+inf` for the unlimited tier).
    pub cutoff: f64,
    pub cap_tokens: f64,
    pub price: f64,
    pub marginal_price: f64,
    pub marginal_secant: bool,
    /// `U(r|r)` including the valuation scale.
    pub utility: f64,
    pub net_utility: f64,
    pub excluded: bool,
}

#[derive(Clone, Debug)]
pub struct TokenMenu {
    pub entries: Vec<MenuEntry>,
    pub chi: f64,
    pub law: StoppingLaw,
    pub valuation: ValuationProfile,
    /// Absolute quadrature budget for rents and revenue.
    pub quad_tol: f64,
}

impl TokenMenu {
    pub fn types(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.r).collect()
    }

    /// Cutoff assigned to type `r` (off-grid types use the same formula).
    pub fn cutoff_at(&self, tm: &dyn TypeDistribution, r: f64) -> f64 {
        tm.inverse_hazard(r) + self.valuation.log_derivative(r)
    }

    /// `U(reported|r)` with valuation scaling; excluded reports give zero.
    pub fn utility(&self, tm: &dyn TypeDistribution, r: f64, reported: f64) -> f64 {
        let t = self.cutoff_at(tm, reported);
        if t <= 0.0 {
            return 0.0;
        }
        self.valuation.value(r) * discounted_mass(&self.law, r, t)
    }
}

fn check_cutoffs(types: &[f64], cutoffs: &[f64]) -> Result<()> {
    for j in 1..types.len() {
        let (a, b) = (cutoffs[j - 1], cutoffs[j]);
        if b > a + 1e-12 * a.abs().max(1.0) {
            return Err(Error::Regularity(format!(
                "cutoff increases between r={} (T={a}) and r={} (T={b}); ironing is not supported",
                types[j - 1],
                types[j]
            )));
        }
    }
    Ok(())
}

/// Integrand of the information rent: `q(z)B(z) − q'(z)A(z)`.
fn rent_density(tm: &dyn TypeDistribution, law: &StoppingLaw, v: &ValuationProfile, z: f64) -> f64 {
    let t = tm.inverse_hazard(z) + v.log_derivative(z);
    if t <= 0.0 {
        return 0.0;
    }
    let b = discounted_time(law, z, t);
    let dq = v.derivative(z);
    if dq == 0.0 {
        v.value(z) * b
    } else {
        v.value(z) * b - dq * discounted_mass(law, z, t)
    }
}

/// Shared menu builder; a unit valuation gives the baseline menu.
pub(crate) fn build_menu_with(
    tm: &dyn TypeDistribution,
    law: &StoppingLaw,
    chi: f64,
    m: usize,
    v: &ValuationProfile,
    quad_tol: f64,
) -> Result<TokenMenu> {
    if !(quad_tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "quadrature tolerance must be positive, got {quad_tol}"
        )));
    }
    if m < 2 {
        return Err(Error::InvalidParameter(
            "type grid needs at least 2 points".into(),
        ));
    }
    if !(chi > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "rate must be positive, got {chi}"
        )));
    }
    let (a, b) = (tm.lower(), tm.upper());
    let types: Vec<f64> = (0..m)
        .map(|j| {
            if j == m - 1 {
                b
            } else {
                a + (b - a) * j as f64 / (m - 1) as f64
            }
        })
        .collect();
    let cutoffs: Vec<f64> = types
        .iter()
        .map(|&r| tm.inverse_hazard(r) + v.log_derivative(r))
        .collect();
    check_cutoffs(&types, &cutoffs)?;

    let per = quad_tol / (m - 1) as f64;
    let pieces: Vec<f64> = (0..m - 1)
        .into_par_iter()
        .map(|j| adaptive_simpson(|z| rent_density(tm, law, v, z), types[j], types[j + 1], per))
        .collect();
    let mut rent = vec![0.0; m];
    for j in (0..m - 1).rev() {
        rent[j] = rent[j + 1] + pieces[j];
    }

    let entries: Vec<MenuEntry> = (0..m)
        .into_par_iter()
        .map(|j| -> Result<MenuEntry> {
            let (r, t) = (types[j], cutoffs[j]);
            let excluded = t <= 0.0;
            let own = if excluded {
                0.0
            } else {
                v.value(r) * discounted_mass(law, r, t)
            };
            let price = if excluded { 0.0 } else { own - rent[j] };
            let mp = if excluded || t.is_infinite() {
                MarginalPrice {
                    value: 0.0,
                    secant: false,
                }
            } else if tm.smooth_at(r) {
                MarginalPrice {
                    value: v.value(r) * (-r * t).exp() * law.density(t) / chi,
                    secant: false,
                }
            } else {
                let (lo, hi) = (types[j.saturating_sub(1)], types[(j + 1).min(m - 1)]);
                let num = v.value(lo) * discounted_mass(law, lo, cutoffs[j.saturating_sub(1)])
                    - rent[j.saturating_sub(1)]
                    - (v.value(hi) * discounted_mass(law, hi, cutoffs[(j + 1).min(m - 1)])
                        - rent[(j + 1).min(m - 1)]);
                let den = chi * (cutoffs[j.saturating_sub(1)] - cutoffs[(j + 1).min(m - 1)]);
                MarginalPrice {
                    value: num / den,
                    secant: true,
                }
            };
            Ok(MenuEntry {
                r,
                cutoff: t,
                cap_tokens: if excluded { 0.0 } else { chi * t },
                price,
                marginal_price: mp.value,
                marginal_secant: mp.secant,
                utility: own,
                net_utility: own - price,
                excluded,
            })
        })
        .collect::<Result<_>>()?;

    Ok(TokenMenu {
        entries,
        chi,
        law: law.clone(),
        valuation: v.clone(),
        quad_tol,
    })
}

/// Optimal cap-and-price menu on `m` evenly spaced types.
pub fn build_menu(
    tm: &dyn TypeDistribution,
    law: &StoppingLaw,
    chi: f64,
    m: usize,
) -> Result<TokenMenu> {
    build_menu_with(tm, law, chi, m, &ValuationProfile::unit(), QUAD_TOL)
}

/// [`build_menu`] with an explicit quadrature budget.
pub fn build_menu_tol(
    tm: &dyn TypeDistribution,
    law: &StoppingLaw,
    chi: f64,
    m: usize,
    quad_tol: f64,
) -> Result<TokenMenu> {
    build_menu_with(tm, law, chi, m, &ValuationProfile::unit(), quad_tol)
}

/// Price at an arbitrary type, reusing the menu's cumulative rent at the next grid point.
fn price_between(menu: &TokenMenu, tm: &dyn TypeDistribution, r: f64, j: usize) -> f64 {
    let v = &menu.valuation;
    let t = menu.cutoff_at(tm, r);
    if t <= 0.0 {
        return 0.0;
    }
    let next = &menu.entries[j + 1];
    let rent_next = next.utility - next.price;
    let rent = rent_next
        + adaptive_simpson(
            |z| rent_density(tm, &menu.law, v, z),
            r,
            next.r,
            1e-3 * menu.quad_tol,
        );
    v.value(r) * discounted_mass(&menu.law, r, t) - rent
}

/// `∫ P(r) g(r) dr` over the support.
pub fn menu_revenue(menu: &TokenMenu, tm: &dyn TypeDistribution) -> f64 {
    let e = &menu.entries;
    let per = menu.quad_tol / e.len() as f64;
    (0..e.len() - 1)
        .into_par_iter()
        .map(|j| {
            adaptive_simpson(
                |r| {
                    if r >= e[j + 1].r {
                        e[j + 1].price * tm.pdf(r)
                    } else {
                        price_between(menu, tm, r, j) * tm.pdf(r)
                    }
                },
                e[j].r,
                e[j + 1].r,
                per,
            )
        })
        .collect::<Vec<f64>>()
        .into_iter()
        .sum()
}

/// Revenue through the virtual surplus `∫ [qAg + (q'A − qB)G] dr`.
pub fn virtual_surplus_revenue(menu: &TokenMenu, tm: &dyn TypeDistribution) -> f64 {
    let v = &menu.valuation;
    let law = &menu.law;
    let breaks = menu.types();
    let per = menu.quad_tol / breaks.len() as f64;
    breaks
        .par_windows(2)
        .map(|w| {
            adaptive_simpson(
                |r| {
                    let t = menu.cutoff_at(tm, r);
                    if t <= 0.0 {
                        return 0.0;
                    }
                    let a = discounted_mass(law, r, t);
                    let b = discounted_time(law, r, t);
                    v.value(r) * a * tm.pdf(r) + (v.derivative(r) * a - v.value(r) * b) * tm.cdf(r)
                },
                w[0],
                w[1],
                per,
            )
        })
        .collect::<Vec<f64>>()
        .into_iter()
        .sum()
}
