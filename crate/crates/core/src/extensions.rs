//! Heterogeneous valuations and endogenous reasoning quality.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use statrs::function::gamma::ln_gamma;

use crate::screening::{build_menu_with, TokenMenu, TypeDistribution, QUAD_TOL};
use crate::stopping::StoppingLaw;
use crate::{Error, Result};

type Scalar = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Utility scale `q(r)` multiplying the discounted learning payoff.
#[derive(Clone)]
pub struct ValuationProfile {
    kind: Valuation,
    label: String,
}

#[derive(Clone)]
enum Valuation {
    Constant(f64),
    /// `e^{c·r}`
    Exp(f64),
    /// `r^p`
    Power(f64),
    Custom {
        q: Scalar,
        dq: Scalar,
    },
}

impl fmt::Debug for ValuationProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ValuationProfile({})", self.label)
    }
}

impl ValuationProfile {
    /// `q ≡ 1`, the baseline model.
    pub fn unit() -> Self {
        Self {
            kind: Valuation::Constant(1.0),
            label: "1".into(),
        }
    }

    pub fn constant(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "valuation must be positive, got {c}"
            )));
        }
        Ok(Self {
            kind: Valuation::Constant(c),
            label: format!("{c}"),
        })
    }

    /// `q(r) = e^{c r}`.
    pub fn exponential(c: f64) -> Self {
        Self {
            kind: Valuation::Exp(c),
            label: format!("exp({c}*r)"),
        }
    }

    /// `q(r) = r^p`.
    pub fn power(p: f64) -> Self {
        Self {
            kind: Valuation::Power(p),
            label: format!("r^{p}"),
        }
    }

    pub fn custom(
        label: impl Into<String>,
        q: impl Fn(f64) -> f64 + Send + Sync + 'static,
        dq: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            kind: Valuation::Custom {
                q: Arc::new(q),
                dq: Arc::new(dq),
            },
            label: label.into(),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn value(&self, r: f64) -> f64 {
        match &self.kind {
            Valuation::Constant(c) => *c,
            Valuation::Exp(c) => (c * r).exp(),
            Valuation::Power(p) => r.powf(*p),
            Valuation::Custom { q, .. } => q(r),
        }
    }

    pub fn derivative(&self, r: f64) -> f64 {
        match &self.kind {
            Valuation::Constant(_) => 0.0,
            Valuation::Exp(c) => c * (c * r).exp(),
            Valuation::Power(p) => p * r.powf(p - 1.0),
            Valuation::Custom { dq, .. } => dq(r),
        }
    }

    /// `q'(r)/q(r)`.
    pub fn log_derivative(&self, r: f64) -> f64 {
        match &self.kind {
            Valuation::Constant(_) => 0.0,
            Valuation::Exp(c) => *c,
            Valuation::Power(p) => p / r,
            Valuation::Custom { q, dq } => dq(r) / q(r),
        }
    }

    /// Largest relative gap between `q'` and a central difference of `q` on `points` types.
    pub fn derivative_mismatch(&self, low: f64, high: f64, points: usize) -> f64 {
        let points = points.max(2);
        (0..points)
            .map(|j| {
                let r = low + (high - low) * j as f64 / (points - 1) as f64;
                let h = 1e-6 * r.abs().max(1.0);
                let fd = (self.value(r + h) - self.value(r - h)) / (2.0 * h);
                (fd - self.derivative(r)).abs() / self.derivative(r).abs().max(self.value(r).abs())
            })
            .fold(0.0, f64::max)
    }
}

impl FromStr for ValuationProfile {
    type Err = Error;

    /// Accepts `1`, other positive constants, `exp(-r)`, `exp(c*r)`, `r^p`, `pow(r,p)`.
    fn from_str(s: &str) -> Result<Self> {
        let e: String = s
            .chars()
            .filter(|c| !c.is_whitespace())
            .collect::<String>()
            .to_lowercase();
        let bad = || Error::InvalidParameter(format!("cannot parse valuation profile {s:?}"));
        if let Ok(c) = e.parse::<f64>() {
            return Self::constant(c);
        }
        if let Some(inner) = e.strip_prefix("exp(").and_then(|x| x.strip_suffix(')')) {
            let coef = inner.strip_suffix('r').ok_or_else(bad)?;
            let coef = coef.strip_suffix('*').unwrap_or(coef);
            let c = match coef {
                "" | "+" => 1.0,
                "-" => -1.0,
                num => num.parse::<f64>().map_err(|_| bad())?,
            };
            let mut v = Self::exponential(c);
            v.label = s.trim().to_string();
            return Ok(v);
        }
        let power = if e == "r" {
            Some(1.0)
        } else if let Some(p) = e.strip_prefix("r^") {
            Some(p.parse::<f64>().map_err(|_| bad())?)
        } else if let Some(p) = e.strip_prefix("pow(r,").and_then(|x| x.strip_suffix(')')) {
            Some(p.parse::<f64>().map_err(|_| bad())?)
        } else {
            None
        };
        match power {
            Some(p) => {
                let mut v = Self::power(p);
                v.label = s.trim().to_string();
                Ok(v)
            }
            None => Err(bad()),
        }
    }
}

/// Adjusted cutoff `T(r) = g/G + q'/q`; nonpositive values mean exclusion.
pub fn valuation_cutoff(tm: &dyn TypeDistribution, v: &ValuationProfile, r: f64) -> Result<f64> {
    tm.check(r)?;
    Ok(tm.inverse_hazard(r) + v.log_derivative(r))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScdReport {
    pub holds: bool,
    /// `T(r̄) − max_r q'/q` with the adjusted cutoff.
    pub margin: f64,
    /// Same margin against the unadjusted `g/G` at the top type.
    pub baseline_margin: f64,
    pub max_log_derivative: f64,
    pub argmax: f64,
    /// Smallest sign factor `−T'(r')(T(r')q(r) − q'(r))/q(r)` over a type grid pair.
    pub min_mixed: f64,
}

/// Single-crossing check `max_r q'(r)/q(r) < T(r̄)` on `points` types.
pub fn scd_check(tm: &dyn TypeDistribution, v: &ValuationProfile, points: usize) -> ScdReport {
    let points = points.max(3);
    let (a, b) = (tm.lower(), tm.upper());
    let grid: Vec<f64> = (0..points)
        .map(|j| a + (b - a) * j as f64 / (points - 1) as f64)
        .collect();
    let (argmax, max_log_derivative) = grid
        .iter()
        .map(|&r| (r, v.log_derivative(r)))
        .fold((a, f64::NEG_INFINITY), |m, x| if x.1 > m.1 { x } else { m });
    let cutoff = |r: f64| tm.inverse_hazard(r) + v.log_derivative(r);
    let top = cutoff(b);
    let margin = top - max_log_derivative;

    // sign audit of ∂²U/∂r∂r' ∝ T'(r')(q'(r) − T(r')q(r)) on the finite-cutoff part of the grid
    let h = 1e-5 * (b - a);
    let mut min_mixed = f64::INFINITY;
    for &rp in grid.iter().filter(|&&x| x - h > a && x + h <= b) {
        let t = cutoff(rp);
        if t <= 0.0 || !t.is_finite() {
            continue;
        }
        let dt = (cutoff(rp + h.min(b - rp)) - cutoff(rp - h)) / (h.min(b - rp) + h);
        for &r in &grid {
            let s = dt * (v.log_derivative(r) - t);
            min_mixed = min_mixed.min(s);
        }
    }
    ScdReport {
        holds: margin > 0.0,
        margin,
        baseline_margin: tm.inverse_hazard(b) - max_log_derivative,
        max_log_derivative,
        argmax,
        min_mixed,
    }
}

/// Menu under heterogeneous valuations; excluded types get the null item.
pub fn extended_menu(
    tm: &dyn TypeDistribution,
    v: &ValuationProfile,
    law: &StoppingLaw,
    chi: f64,
    m: usize,
) -> Result<TokenMenu> {
    let scd = scd_check(tm, v, m);
    if !scd.holds {
        return Err(Error::Regularity(format!(
            "single crossing fails: max q'/q = {} at r = {} is not below T(r̄) = {}",
            scd.max_log_derivative,
            scd.argmax,
            scd.max_log_derivative + scd.margin
        )));
    }
    build_menu_with(tm, law, chi, m, v, QUAD_TOL)
}

const ASYMPTOTIC_SWITCH: f64 = 50.0;

fn check_kummer(b: f64, z: f64) -> Result<()> {
    if b <= 0.0 && b == b.round() {
        return Err(Error::InvalidParameter(format!(
            "1F1 undefined for nonpositive integer b = {b}"
        )));
    }
    if !(z >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "1F1 argument must be >= 0, got {z}"
        )));
    }
    Ok(())
}

fn kummer_series(a: f64, b: f64, z: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 0..100_000 {
        let kf = k as f64;
        term *= (a + kf) / (b + kf) * z / (kf + 1.0);
        sum += term;
        if term == 0.0 || (term.abs() <= 1e-14 * sum.abs() && kf + 1.0 > z) {
            break;
        }
    }
    sum
}

/// `ln Γ(b)/Γ(a) + (a−b) ln z` and the asymptotic correction series.
fn kummer_asymptotic_parts(a: f64, b: f64, z: f64) -> (f64, f64) {
    let mut sum = 1.0f64;
    let mut term = 1.0f64;
    let mut k = 0.0;
    loop {
        let next = term * (b - a + k) * (1.0 - a + k) / ((k + 1.0) * z);
        if next == 0.0 || next.abs() >= term.abs() || next.abs() < 1e-17 * sum.abs() {
            if next.abs() < term.abs() {
                sum += next;
            }
            break;
        }
        sum += next;
        term = next;
        k += 1.0;
    }
    (ln_gamma(b) - ln_gamma(a) + (a - b) * z.ln(), sum)
}

fn use_asymptotic(a: f64, b: f64, z: f64) -> bool {
    z > ASYMPTOTIC_SWITCH && a > 0.0 && b > 0.0
}

/// Confluent hypergeometric `₁F₁(a; b; z)` for `z ≥ 0`.
pub fn kummer_1f1(a: f64, b: f64, z: f64) -> Result<f64> {
    check_kummer(b, z)?;
    if use_asymptotic(a, b, z) {
        let (log_scale, s) = kummer_asymptotic_parts(a, b, z);
        Ok((log_scale + z).exp() * s)
    } else {
        Ok(kummer_series(a, b, z))
    }
}

/// `e^{−z} ₁F₁(a; b; z)`, finite for arguments where `₁F₁` overflows.
pub fn kummer_1f1_scaled(a: f64, b: f64, z: f64) -> Result<f64> {
    check_kummer(b, z)?;
    if use_asymptotic(a, b, z) {
        let (log_scale, s) = kummer_asymptotic_parts(a, b, z);
        Ok(log_scale.exp() * s)
    } else {
        Ok((-z).exp() * kummer_series(a, b, z))
    }
}

/// Stopping-boundary distance `κ` at remaining time `u = T(r) − t`.
pub fn kappa(u: f64, r: f64, alpha: f64, chi: f64) -> Result<f64> {
    if !(alpha > 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must exceed 1, got {alpha}"
        )));
    }
    if u <= 0.0 {
        return Ok(0.0);
    }
    if u.is_infinite() {
        return Ok(kappa_plateau(r, alpha, chi));
    }
    let z = alpha * r * u;
    let inner = alpha * chi / ((alpha - 1.0) * (alpha + 1.0))
        * u
        * kummer_1f1_scaled(alpha + 1.0, alpha + 2.0, z)?;
    Ok(inner.max(0.0).powf(1.0 / alpha))
}

/// `lim_{u→∞} κ = (χ/((α−1)r))^{1/α}`.
pub fn kappa_plateau(r: f64, alpha: f64, chi: f64) -> f64 {
    (chi / ((alpha - 1.0) * r)).powf(1.0 / alpha)
}

#[derive(Clone, Debug, PartialEq)]
pub struct QualityCurve {
    pub r: f64,
    /// `T(r)`; infinite for the unlimited tier.
    pub cutoff: f64,
    pub t: Vec<f64>,
    pub kappa: Vec<f64>,
    pub upper: Vec<f64>,
    pub lower: Vec<f64>,
}

/// Time span sampled for the unlimited tier, where `κ` is flat.
pub const UNBOUNDED_SPAN: f64 = 10.0;

/// `κ(t)` on a uniform grid of `[0, T(r)]` with boundaries `0.5 ± κ`.
pub fn quality_curve(
    tm: &dyn TypeDistribution,
    r: f64,
    alpha: f64,
    chi: f64,
    points: usize,
) -> Result<QualityCurve> {
    tm.check(r)?;
    let cutoff = tm.inverse_hazard(r);
    if cutoff <= 0.0 {
        return Err(Error::ExcludedType { r, cutoff });
    }
    let points = points.max(2);
    let span = if cutoff.is_finite() {
        cutoff
    } else {
        UNBOUNDED_SPAN
    };
    let t: Vec<f64> = (0..points)
        .map(|j| {
            if j == points - 1 {
                span
            } else {
                span * j as f64 / (points - 1) as f64
            }
        })
        .collect();
    let kappa = t
        .iter()
        .map(|&s| kappa(cutoff - s, r, alpha, chi))
        .collect::<Result<Vec<f64>>>()?;
    Ok(QualityCurve {
        r,
        cutoff,
        upper: kappa.iter().map(|k| (0.5 + k).min(1.0)).collect(),
        lower: kappa.iter().map(|k| (0.5 - k).max(0.0)).collect(),
        t,
        kappa,
    })
}

/// Types plotted in the reasoning-quality figure of the leading example.
pub const FIGURE_TYPES: [f64; 6] = [1.0, 1.1, 9.0 / 8.0, 7.0 / 6.0, 1.25, 1.5];

/// Boundary curves for each of `rs`.
pub fn figure_curves(
    tm: &dyn TypeDistribution,
    rs: &[f64],
    alpha: f64,
    chi: f64,
    points: usize,
) -> Result<Vec<QualityCurve>> {
    rs.iter()
        .map(|&r| quality_curve(tm, r, alpha, chi, points))
        .collect()
}
