//! Deterministic skeleton of the greedy exploration process.
//!
//! In each phase the states tied for the smallest divergence `D(e_θ|μ̂_t)`
//! receive Poisson jump rates `β_t = χ Σ⁻¹1 / (dᵀ Σ⁻¹1)`, where `Σ` is the
//! Hessian restricted to the active set and `d` their common divergences.
//! Absent a jump the belief drifts by `dμ̂/dt = −Σ_θ β_t(θ)(e_θ − μ̂_t)` until
//! another state ties; once every state is active the belief is stationary.

use nalgebra::DVector;

use crate::entropy::{principal_submatrix, Belief, EntropyModel, BOUNDARY_MIN, INTERIOR_FLOOR};
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct SkeletonOptions {
    /// Upper bound on the RK4 step.
    pub max_step: f64,
    /// Step is also capped at `step_fraction · ζ(0) / χ`.
    pub step_fraction: f64,
    /// Tolerance on divergence ties and the binding information constraint.
    pub iso_tol: f64,
    /// Time tolerance for locating a new state's entry.
    pub event_tol: f64,
    pub interior_floor: f64,
    /// Run the regularity diagnostics before building.
    pub check_assumption1: bool,
}

impl Default for SkeletonOptions {
    fn default() -> Self {
        Self {
            max_step: 1e-3,
            step_fraction: 0.01,
            iso_tol: 1e-7,
            event_tol: 1e-10,
            interior_floor: INTERIOR_FLOOR,
            check_assumption1: true,
        }
    }
}

/// One stored integration node.
#[derive(Clone, Debug)]
pub struct PathNode {
    pub t: f64,
    pub belief: Vec<f64>,
    /// Full-length rate vector (zero off the active set).
    pub rates: Vec<f64>,
    pub drift: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Phase {
    pub index: usize,
    pub start: f64,
    pub end: f64,
    pub active: Vec<usize>,
    pub nodes: Vec<PathNode>,
}

/// Terminal phase: every state active, belief constant.
#[derive(Clone, Debug)]
pub struct Stationary {
    pub start: f64,
    pub belief: Belief,
    pub rates: Vec<f64>,
    /// Total jump hazard `Σ_θ β(θ)`.
    pub hazard: f64,
}

#[derive(Clone, Debug)]
pub struct GreedySkeleton {
    entropy: EntropyModel,
    prior: Belief,
    chi: f64,
    phases: Vec<Phase>,
    stationary: Stationary,
    step: f64,
}

/// Greedy rates on `active` at belief `mu`.
///
/// With every state active this returns the stationary rates `c·μ` that keep
/// the information constraint binding.
pub fn greedy_rates(
    entropy: &EntropyModel,
    mu: &[f64],
    active: &[usize],
    chi: f64,
) -> Result<Vec<f64>> {
    let n = mu.len();
    let d = entropy.vertex_divergences_raw(mu);
    let mut rates = vec![0.0; n];
    if active.len() == n {
        let flow: f64 = mu.iter().zip(&d).map(|(m, di)| m * di).sum();
        let c = chi / flow;
        for s in 0..n {
            rates[s] = c * mu[s];
        }
        return Ok(rates);
    }
    let sigma = principal_submatrix(&entropy.hessian_raw(mu), active);
    let ones = DVector::from_element(active.len(), 1.0);
    let v = sigma
        .clone()
        .cholesky()
        .map(|c| c.solve(&ones))
        .or_else(|| sigma.lu().solve(&ones))
        .ok_or_else(|| Error::Regularity("singular active Hessian block".into()))?;
    let dv: f64 = active.iter().zip(v.iter()).map(|(&s, vi)| d[s] * vi).sum();
    for (k, &s) in active.iter().enumerate() {
        rates[s] = chi * v[k] / dv;
    }
    Ok(rates)
}

fn drift_of(mu: &[f64], rates: &[f64]) -> Vec<f64> {
    let total: f64 = rates.iter().sum();
    mu.iter().zip(rates).map(|(m, b)| -b + total * m).collect()
}

struct PhaseField<'a> {
    entropy: &'a EntropyModel,
    active: &'a [usize],
    chi: f64,
}

impl PhaseField<'_> {
    fn rates(&self, mu: &[f64], t: f64) -> Result<Vec<f64>> {
        let r = greedy_rates(self.entropy, mu, self.active, self.chi)?;
        for &s in self.active {
            if !(r[s] > 0.0) {
                return Err(Error::NonPositiveRate {
                    state: s,
                    time: t,
                    value: r[s],
                });
            }
        }
        Ok(r)
    }

    fn deriv(&self, mu: &[f64], t: f64) -> Result<Vec<f64>> {
        Ok(drift_of(mu, &self.rates(mu, t)?))
    }

    fn rk4(&self, mu: &[f64], t: f64, h: f64) -> Result<Vec<f64>> {
        let axpy = |a: &[f64], k: &[f64], s: f64| -> Vec<f64> {
            a.iter().zip(k).map(|(x, y)| x + s * y).collect()
        };
        let k1 = self.deriv(mu, t)?;
        let k2 = self.deriv(&axpy(mu, &k1, 0.5 * h), t + 0.5 * h)?;
        let k3 = self.deriv(&axpy(mu, &k2, 0.5 * h), t + 0.5 * h)?;
        let k4 = self.deriv(&axpy(mu, &k3, h), t + h)?;
        let mut out: Vec<f64> = (0..mu.len())
            .map(|i| mu[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect();
        let s: f64 = out.iter().sum();
        out.iter_mut().for_each(|x| *x /= s);
        Ok(out)
    }

    /// `g_θ = D(e_θ|μ) − min_{active} D` for every state.
    fn gaps(&self, mu: &[f64]) -> Vec<f64> {
        let d = self.entropy.vertex_divergences_raw(mu);
        let dmin = self
            .active
            .iter()
            .map(|&s| d[s])
            .fold(f64::INFINITY, f64::min);
        d.iter().map(|x| x - dmin).collect()
    }

    fn node(&self, mu: Vec<f64>, t: f64) -> Result<PathNode> {
        let rates = self.rates(&mu, t)?;
        let drift = drift_of(&mu, &rates);
        Ok(PathNode {
            t,
            belief: mu,
            rates,
            drift,
        })
    }
}

fn argmin_set(d: &[f64], tol: f64) -> Vec<usize> {
    let dmin = d.iter().copied().fold(f64::INFINITY, f64::min);
    (0..d.len()).filter(|&s| d[s] - dmin <= tol).collect()
}

fn default_report_density(n: usize) -> usize {
    match n {
        2 => 200,
        3 => 60,
        4 => 24,
        _ => 12,
    }
}

/// Builds the full skeleton from `prior` at information rate `chi`.
pub fn build_skeleton(
    entropy: &EntropyModel,
    prior: &Belief,
    chi: f64,
    opts: &SkeletonOptions,
) -> Result<GreedySkeleton> {
    let n = prior.dim();
    entropy.check_dim(n)?;
    if prior.min_component() < BOUNDARY_MIN {
        return Err(Error::BoundaryBelief {
            min: prior.min_component(),
            floor: BOUNDARY_MIN,
        });
    }
    if !(chi > 0.0) || !chi.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "information rate {chi} must be positive"
        )));
    }
    if opts.check_assumption1 {
        let report = entropy.assumption1_report(n, default_report_density(n))?;
        if !report.passes() {
            return Err(Error::Precondition(format!(
                "entropy fails the divergence regularity diagnostics: {report:?}"
            )));
        }
    }

    let d0 = entropy.vertex_divergences_raw(prior.probs());
    let zeta0 = d0.iter().copied().fold(f64::INFINITY, f64::min);
    let step = opts.max_step.min(opts.step_fraction * zeta0 / chi);

    let mut active = argmin_set(&d0, 1e-12 * (1.0 + zeta0.abs()));
    let mut mu = prior.probs().to_vec();
    let mut t = 0.0;
    let mut phases = Vec::new();

    while active.len() < n {
        if phases.len() >= n {
            return Err(Error::PhaseLimit { limit: n });
        }
        let field = PhaseField {
            entropy,
            active: &active,
            chi,
        };
        let start = t;
        let mut nodes = vec![field.node(mu.clone(), t)?];
        let entering: Vec<usize>;
        loop {
            let next = field.rk4(&mu, t, step)?;
            let crossed = |m: &[f64]| {
                field
                    .gaps(m)
                    .iter()
                    .enumerate()
                    .any(|(s, g)| !active.contains(&s) && *g <= 0.0)
            };
            if crossed(&next) {
                let (mut lo, mut hi) = (0.0, step);
                while hi - lo > opts.event_tol {
                    let mid = 0.5 * (lo + hi);
                    if crossed(&field.rk4(&mu, t, mid)?) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                let end = field.rk4(&mu, t, hi)?;
                let g = field.gaps(&end);
                t += hi;
                entering = (0..n)
                    .filter(|s| !active.contains(s) && g[*s] <= opts.iso_tol)
                    .collect();
                mu = end;
                nodes.push(field.node(mu.clone(), t)?);
                break;
            }
            t += step;
            if let Some((s, &v)) = next
                .iter()
                .enumerate()
                .find(|(_, v)| **v < opts.interior_floor)
            {
                return Err(Error::InteriorityLost {
                    state: s,
                    time: t,
                    value: v,
                });
            }
            mu = next;
            nodes.push(field.node(mu.clone(), t)?);
            if nodes.len() > 50_000_000 {
                return Err(Error::Regularity("phase did not terminate".into()));
            }
        }
        phases.push(Phase {
            index: phases.len() + 1,
            start,
            end: t,
            active: active.clone(),
            nodes,
        });
        active.extend(entering);
        active.sort_unstable();
    }

    let rates = greedy_rates(entropy, &mu, &active, chi)?;
    let hazard = rates.iter().sum();
    Ok(GreedySkeleton {
        entropy: entropy.clone(),
        prior: prior.clone(),
        chi,
        phases,
        stationary: Stationary {
            start: t,
            belief: Belief::normalized(mu),
            rates,
            hazard,
        },
        step,
    })
}

fn hermite(t0: f64, t1: f64, y0: f64, y1: f64, d0: f64, d1: f64, t: f64) -> f64 {
    let h = t1 - t0;
    if h <= 0.0 {
        return y0;
    }
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * h * d0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * h * d1
}

impl GreedySkeleton {
    pub fn entropy(&self) -> &EntropyModel {
        &self.entropy
    }

    pub fn prior(&self) -> &Belief {
        &self.prior
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }

    pub fn dim(&self) -> usize {
        self.prior.dim()
    }

    pub fn phases(&self) -> &[Phase] {
        &self.phases
    }

    pub fn stationary(&self) -> &Stationary {
        &self.stationary
    }

    /// Integration step used for the transient phases.
    pub fn step(&self) -> f64 {
        self.step
    }

    /// `t̂^K`, the start of the stationary phase.
    pub fn stationary_start(&self) -> f64 {
        self.stationary.start
    }

    /// Phase start times followed by `t̂^K`.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.phases.iter().map(|p| p.start).collect();
        b.push(self.stationary.start);
        b
    }

    /// `t̂^K + 20 / h_K`.
    pub fn default_horizon(&self) -> f64 {
        self.stationary.start + 20.0 / self.stationary.hazard
    }

    fn phase_at(&self, t: f64) -> Option<&Phase> {
        if t >= self.stationary.start {
            return None;
        }
        let idx = self.phases.partition_point(|p| p.start <= t);
        self.phases.get(idx.saturating_sub(1))
    }

    /// Active set in force at time `t`.
    pub fn active_at(&self, t: f64) -> Vec<usize> {
        match self.phase_at(t) {
            Some(p) => p.active.clone(),
            None => (0..self.dim()).collect(),
        }
    }

    pub fn belief_at(&self, t: f64) -> Belief {
        Belief::normalized(self.belief_raw(t))
    }

    pub(crate) fn belief_raw(&self, t: f64) -> Vec<f64> {
        let Some(phase) = self.phase_at(t.max(0.0)) else {
            return self.stationary.belief.probs().to_vec();
        };
        let nodes = &phase.nodes;
        let j = nodes
            .partition_point(|nd| nd.t <= t)
            .clamp(1, nodes.len() - 1);
        let (a, b) = (&nodes[j - 1], &nodes[j]);
        let mut out: Vec<f64> = (0..a.belief.len())
            .map(|i| {
                hermite(
                    a.t,
                    b.t,
                    a.belief[i],
                    b.belief[i],
                    a.drift[i],
                    b.drift[i],
                    t,
                )
            })
            .collect();
        let s: f64 = out.iter().sum();
        out.iter_mut().for_each(|x| *x /= s);
        out
    }

    /// `β_t` over all states (zero for inactive ones).
    pub fn rates_at(&self, t: f64) -> Vec<f64> {
        match self.phase_at(t.max(0.0)) {
            None => self.stationary.rates.clone(),
            Some(p) => {
                let mu = self.belief_raw(t);
                greedy_rates(&self.entropy, &mu, &p.active, self.chi)
                    .expect("rates were positive when the phase was built")
            }
        }
    }

    pub fn hazard_at(&self, t: f64) -> f64 {
        self.rates_at(t).iter().sum()
    }

    /// `ζ(t) = min_θ D(e_θ | μ̂_t)`.
    pub fn zeta_at(&self, t: f64) -> f64 {
        let d = self.entropy.vertex_divergences_raw(&self.belief_raw(t));
        d.into_iter().fold(f64::INFINITY, f64::min)
    }

    /// `ζ` at every stored node followed by its stationary value.
    pub fn iso_divergence_profile(&self) -> IsoDivergenceProfile {
        let mut times = Vec::new();
        let mut values = Vec::new();
        for p in &self.phases {
            for nd in &p.nodes {
                let d = self.entropy.vertex_divergences_raw(&nd.belief);
                times.push(nd.t);
                values.push(p.active.iter().map(|&s| d[s]).fold(f64::INFINITY, f64::min));
            }
        }
        let d = self
            .entropy
            .vertex_divergences_raw(self.stationary.belief.probs());
        IsoDivergenceProfile {
            times,
            values,
            stationary_start: self.stationary.start,
            stationary_value: d.into_iter().fold(f64::INFINITY, f64::min),
        }
    }

    /// Largest spread of divergences within the active set and largest
    /// deviation of the information flow from `χ`, over stored nodes.
    pub fn invariant_residuals(&self) -> (f64, f64) {
        let mut iso = 0.0f64;
        let mut info = 0.0f64;
        let mut visit = |mu: &[f64], rates: &[f64], active: &[usize]| {
            let d = self.entropy.vertex_divergences_raw(mu);
            let lo = active.iter().map(|&s| d[s]).fold(f64::INFINITY, f64::min);
            let hi = active
                .iter()
                .map(|&s| d[s])
                .fold(f64::NEG_INFINITY, f64::max);
            iso = iso.max(hi - lo);
            let flow: f64 = active.iter().map(|&s| rates[s] * d[s]).sum();
            info = info.max((flow - self.chi).abs());
        };
        for p in &self.phases {
            for nd in &p.nodes {
                visit(&nd.belief, &nd.rates, &p.active);
            }
        }
        let all: Vec<usize> = (0..self.dim()).collect();
        visit(self.stationary.belief.probs(), &self.stationary.rates, &all);
        (iso, info)
    }
}

/// `ζ` sampled at the skeleton's nodes; constant on the stationary phase.
#[derive(Clone, Debug)]
pub struct IsoDivergenceProfile {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub stationary_start: f64,
    pub stationary_value: f64,
}

impl IsoDivergenceProfile {
    pub fn eval(&self, t: f64) -> f64 {
        if t >= self.stationary_start || self.times.is_empty() {
            return self.stationary_value;
        }
        let j = self
            .times
            .partition_point(|&x| x <= t)
            .clamp(1, self.times.len() - 1);
        let (t0, t1) = (self.times[j - 1], self.times[j]);
        let w = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
        self.values[j - 1] + w * (self.values[j] - self.values[j - 1])
    }
}
