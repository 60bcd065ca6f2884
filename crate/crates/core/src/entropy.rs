//! Generalized entropies on the probability simplex.
//!
//! Every model is evaluated through its degree-1 homogeneous extension to the
//! nonnegative orthant, so gradients satisfy `∇H(μ)·μ = H(μ)` and Hessians
//! satisfy `Hess H(μ)·μ = 0`. The Bregman divergence to a vertex then reduces
//! to `D(e_θ|μ) = H(e_θ) − ∂_θ H(μ)`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::{Error, Result};

/// Minimum component a base belief must have for divergences and Hessians.
pub const BOUNDARY_MIN: f64 = 1e-10;

/// Interiority floor callers clip to before evaluating at near-boundary points.
pub const INTERIOR_FLOOR: f64 = 1e-9;

const SUM_TOL: f64 = 1e-12;

/// A point on the probability simplex over `n ≥ 2` states.
#[derive(Clone, Debug, PartialEq)]
pub struct Belief(Vec<f64>);

impl Belief {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::InvalidBelief(format!(
                "need at least 2 states, got {}",
                probs.len()
            )));
        }
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(Error::InvalidBelief(format!("component {i} is {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidBelief(format!(
                "components sum to {total}, not 1"
            )));
        }
        Ok(Self(probs))
    }

    /// Binary belief `(1 − p, p)` where `p = P(θ = 1)`.
    pub fn binary(p: f64) -> Result<Self> {
        Self::new(vec![1.0 - p, p])
    }

    pub fn uniform(n: usize) -> Result<Self> {
        // 1/n summed n times can miss 1 by more than SUM_TOL only for huge n
        Self::new(vec![1.0 / n as f64; n])
            .map_err(|_| Error::InvalidBelief(format!("cannot build uniform belief on {n} states")))
    }

    pub fn vertex(n: usize, state: usize) -> Self {
        let mut v = vec![0.0; n];
        v[state] = 1.0;
        Self(v)
    }

    /// Renormalizes a nonnegative vector; used for numerically integrated paths.
    pub(crate) fn normalized(mut v: Vec<f64>) -> Self {
        let s: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= s);
        Self(v)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn min_component(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_interior(&self) -> bool {
        self.min_component() >= BOUNDARY_MIN
    }

    /// Clips every component to at least `floor` and renormalizes.
    pub fn clipped(&self, floor: f64) -> Self {
        Self::normalized(self.0.iter().map(|p| p.max(floor)).collect())
    }

    fn require_interior(&self) -> Result<()> {
        let min = self.min_component();
        if min < BOUNDARY_MIN {
            return Err(Error::BoundaryBelief {
                min,
                floor: BOUNDARY_MIN,
            });
        }
        Ok(())
    }
}

impl AsRef<[f64]> for Belief {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Unnormalized nonnegative probability mass.
#[derive(Clone, Debug, PartialEq)]
pub struct MassVector(Vec<f64>);

impl MassVector {
    pub fn new(masses: Vec<f64>) -> Result<Self> {
        if let Some((i, m)) = masses
            .iter()
            .enumerate()
            .find(|(_, m)| !m.is_finite() || **m < 0.0)
        {
            return Err(Error::DegenerateInput(format!("mass {i} is {m}")));
        }
        Ok(Self(masses))
    }

    pub fn masses(&self) -> &[f64] {
        &self.0
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

impl From<&Belief> for MassVector {
    fn from(b: &Belief) -> Self {
        Self(b.0.clone())
    }
}

/// Bregman divergence value.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Divergence(pub f64);

impl Divergence {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// User-supplied entropy: value on the orthant (degree-1 homogeneous),
/// normalized gradient and Hessian on interior beliefs.
pub trait EntropyFunction: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, mu: &[f64]) -> Vec<f64>;
    fn hessian(&self, mu: &[f64]) -> DMatrix<f64>;
    fn units(&self) -> &str;
    /// Number of states the model is defined on, if restricted.
    fn dim(&self) -> Option<usize> {
        None
    }
}

#[derive(Clone)]
pub enum EntropyModel {
    /// `H(μ) = Σ μ_i ln μ_i` (nats).
    Shannon,
    /// Binary model `H(μ) = |μ − 1/2|^α` in the parametrization `μ = P(θ = 1)`.
    QuadraticBinary {
        alpha: f64,
    },
    Custom(Arc<dyn EntropyFunction>),
}

impl fmt::Debug for EntropyModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Shannon => write!(f, "Shannon"),
            Self::QuadraticBinary { alpha } => write!(f, "QuadraticBinary {{ alpha: {alpha} }}"),
            Self::Custom(c) => write!(f, "Custom({})", c.units()),
        }
    }
}

impl EntropyModel {
    pub fn shannon() -> Self {
        Self::Shannon
    }

    pub fn quadratic_binary(alpha: f64) -> Self {
        Self::QuadraticBinary { alpha }
    }

    pub fn custom(f: impl EntropyFunction + 'static) -> Self {
        Self::Custom(Arc::new(f))
    }

    pub fn units(&self) -> &str {
        match self {
            Self::Shannon => "nats",
            Self::QuadraticBinary { .. } => "squared belief",
            Self::Custom(c) => c.units(),
        }
    }

    /// Restricted state count, if any.
    pub fn fixed_dim(&self) -> Option<usize> {
        match self {
            Self::Shannon => None,
            Self::QuadraticBinary { .. } => Some(2),
            Self::Custom(c) => c.dim(),
        }
    }

    pub fn check_dim(&self, n: usize) -> Result<()> {
        match self.fixed_dim() {
            Some(d) if d != n => Err(Error::DimensionMismatch {
                expected: d,
                found: n,
            }),
            _ => Ok(()),
        }
    }

    /// Homogeneous extension `H(x)` for a nonzero mass vector.
    pub fn entropy_value(&self, x: &MassVector) -> Result<f64> {
        self.check_dim(x.0.len())?;
        if x.total() <= 0.0 {
            return Err(Error::DegenerateInput("all-zero mass vector".into()));
        }
        Ok(self.value_raw(&x.0))
    }

    /// Homogeneous extension without validation; the zero vector maps to 0.
    pub(crate) fn value_raw(&self, x: &[f64]) -> f64 {
        let total: f64 = x.iter().sum();
        if total <= 0.0 {
            return 0.0;
        }
        match self {
            Self::Shannon => x
                .iter()
                .filter(|&&xi| xi > 0.0)
                .map(|&xi| xi * (xi / total).ln())
                .sum(),
            Self::QuadraticBinary { alpha } => {
                let p = x[1] / total;
                total * (p - 0.5).abs().powf(*alpha)
            }
            Self::Custom(c) => c.value(x),
        }
    }

    /// `H(e_θ)`.
    pub fn vertex_value(&self, n: usize, state: usize) -> f64 {
        self.value_raw(Belief::vertex(n, state).probs())
    }

    /// Normalized gradient at an interior belief.
    pub fn gradient(&self, mu: &Belief) -> Result<Vec<f64>> {
        self.check_dim(mu.dim())?;
        mu.require_interior()?;
        Ok(self.gradient_raw(mu.probs()))
    }

    pub(crate) fn gradient_raw(&self, mu: &[f64]) -> Vec<f64> {
        match self {
            Self::Shannon => mu.iter().map(|p| p.ln()).collect(),
            Self::QuadraticBinary { alpha } => {
                let p = mu[1];
                let (h, dh, _) = binary_power(p, *alpha);
                vec![h - p * dh, h + (1.0 - p) * dh]
            }
            Self::Custom(c) => c.gradient(mu),
        }
    }

    /// Normalized Hessian at an interior belief.
    pub fn hessian(&self, mu: &Belief) -> Result<DMatrix<f64>> {
        self.check_dim(mu.dim())?;
        mu.require_interior()?;
        Ok(self.hessian_raw(mu.probs()))
    }

    pub(crate) fn hessian_raw(&self, mu: &[f64]) -> DMatrix<f64> {
        let n = mu.len();
        match self {
            Self::Shannon => {
                DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 / mu[i] - 1.0 } else { -1.0 })
            }
            Self::QuadraticBinary { alpha } => {
                let p = mu[1];
                let (_, _, d2h) = binary_power(p, *alpha);
                let q = 1.0 - p;
                DMatrix::from_row_slice(
                    2,
                    2,
                    &[p * p * d2h, -p * q * d2h, -p * q * d2h, q * q * d2h],
                )
            }
            Self::Custom(c) => c.hessian(mu),
        }
    }

    /// `D(target | base) = H(target) − H(base) − ∇H(base)·(target − base)`.
    pub fn bregman(&self, target: &Belief, base: &Belief) -> Result<Divergence> {
        self.check_dim(base.dim())?;
        if target.dim() != base.dim() {
            return Err(Error::DimensionMismatch {
                expected: base.dim(),
                found: target.dim(),
            });
        }
        base.require_interior()?;
        let grad = self.gradient_raw(base.probs());
        let linear: f64 = grad
            .iter()
            .zip(target.probs().iter().zip(base.probs()))
            .map(|(g, (t, b))| g * (t - b))
            .sum();
        let d = self.value_raw(target.probs()) - self.value_raw(base.probs()) - linear;
        Ok(Divergence(d.max(0.0)))
    }

    /// `D(e_θ | μ)` for every state, without interiority checks.
    pub(crate) fn vertex_divergences_raw(&self, mu: &[f64]) -> Vec<f64> {
        let n = mu.len();
        let h_mu = self.value_raw(mu);
        let grad = self.gradient_raw(mu);
        let g_dot_mu: f64 = grad.iter().zip(mu).map(|(g, m)| g * m).sum();
        (0..n)
            .map(|s| self.vertex_value(n, s) - h_mu - (grad[s] - g_dot_mu))
            .collect()
    }

    /// `D(e_θ | μ)` for every state θ.
    pub fn vertex_divergences(&self, mu: &Belief) -> Result<Vec<f64>> {
        self.check_dim(mu.dim())?;
        mu.require_interior()?;
        Ok(self.vertex_divergences_raw(mu.probs()))
    }

    /// Principal submatrix of the Hessian on the `active` states.
    pub fn hessian_submatrix(&self, mu: &Belief, active: &[usize]) -> Result<DMatrix<f64>> {
        let full = self.hessian(mu)?;
        if let Some(&bad) = active.iter().find(|&&s| s >= mu.dim()) {
            return Err(Error::InvalidParameter(format!("state {bad} out of range")));
        }
        Ok(principal_submatrix(&full, active))
    }

    /// Evaluates the three regularity conditions on an interior simplex grid.
    pub fn assumption1_report(&self, n: usize, grid_density: usize) -> Result<Assumption1Report> {
        if grid_density < 10 {
            return Err(Error::InvalidParameter(format!(
                "grid density {grid_density} < 10"
            )));
        }
        self.check_dim(n)?;
        let points = interior_grid(n, grid_density);
        let mut sup_min = f64::NEG_INFINITY;
        let mut closest_floor = f64::INFINITY;
        let mut max_cross = f64::NEG_INFINITY;
        for mu in &points {
            let d = self.vertex_divergences_raw(mu);
            let dmin = d.iter().copied().fold(f64::INFINITY, f64::min);
            sup_min = sup_min.max(dmin);
            let tie = 1e-12 * (1.0 + dmin.abs());
            for (s, &ds) in d.iter().enumerate() {
                if ds - dmin <= tie {
                    closest_floor = closest_floor.min(mu[s]);
                }
            }
            let hess = self.hessian_raw(mu);
            for a in 0..n {
                for b in 0..n {
                    if a == b {
                        continue;
                    }
                    // (e_a − μ)ᵀ Hess (e_b − μ)
                    let mut acc = 0.0;
                    for i in 0..n {
                        let u = if i == a { 1.0 } else { 0.0 } - mu[i];
                        for j in 0..n {
                            let v = if j == b { 1.0 } else { 0.0 } - mu[j];
                            acc += u * hess[(i, j)] * v;
                        }
                    }
                    max_cross = max_cross.max(acc);
                }
            }
        }
        let grid_floor = 1.0 / grid_density as f64;
        Ok(Assumption1Report {
            grid_points: points.len(),
            sup_min_divergence: sup_min,
            bounded: sup_min.is_finite(),
            closest_state_floor: closest_floor,
            grid_floor,
            separated: closest_floor > grid_floor,
            max_cross_curvature: max_cross,
            monotone: max_cross <= CROSS_TOL,
        })
    }
}

const CROSS_TOL: f64 = 1e-9;

/// Outcome of the regularity diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct Assumption1Report {
    pub grid_points: usize,
    /// Part 1: `sup_μ min_θ D(e_θ|μ)` over the grid.
    pub sup_min_divergence: f64,
    pub bounded: bool,
    /// Part 2: smallest probability a closest state carries anywhere on the grid.
    pub closest_state_floor: f64,
    /// Smallest coordinate present on the grid.
    pub grid_floor: f64,
    pub separated: bool,
    /// Part 3: `max (e_θ − μ)ᵀ Hess H(μ) (e_θ' − μ)` over θ ≠ θ'.
    pub max_cross_curvature: f64,
    pub monotone: bool,
}

impl Assumption1Report {
    pub fn passes(&self) -> bool {
        self.bounded && self.separated && self.monotone
    }
}

pub(crate) fn principal_submatrix(full: &DMatrix<f64>, active: &[usize]) -> DMatrix<f64> {
    let k = active.len();
    DMatrix::from_fn(k, k, |i, j| full[(active[i], active[j])])
}

/// `(h, h', h'')` for `h(p) = |p − 1/2|^α`.
fn binary_power(p: f64, alpha: f64) -> (f64, f64, f64) {
    let u = p - 0.5;
    let a = u.abs();
    let h = a.powf(alpha);
    let dh = alpha * a.powf(alpha - 1.0) * u.signum();
    let d2h = if alpha == 2.0 {
        2.0
    } else {
        alpha * (alpha - 1.0) * a.powf(alpha - 2.0)
    };
    (h, if a == 0.0 { 0.0 } else { dh }, d2h)
}

/// All interior points `k/m` with positive integer `k` summing to `m`.
fn interior_grid(n: usize, m: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let mut parts = vec![0usize; n];
    fn rec(idx: usize, left: usize, parts: &mut [usize], m: usize, out: &mut Vec<Vec<f64>>) {
        let n = parts.len();
        if idx == n - 1 {
            if left >= 1 {
                parts[idx] = left;
                out.push(parts.iter().map(|&k| k as f64 / m as f64).collect());
            }
            return;
        }
        let remaining_slots = n - idx - 1;
        if left < remaining_slots + 1 {
            return;
        }
        for k in 1..=(left - remaining_slots) {
            parts[idx] = k;
            rec(idx + 1, left - k, parts, m, out);
        }
    }
    rec(0, m, &mut parts, m, &mut out);
    out
}
