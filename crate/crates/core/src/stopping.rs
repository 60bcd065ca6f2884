//! Stopping-time laws, the capacity functional, and Monte Carlo simulation.
//!
//! A [`StoppingLaw`] holds per-state sub-distributions `F^i` with total mass
//! `F^i(∞) = μ_0(i)`. The absolutely continuous part lives on a node grid with
//! a quadratic density per segment (endpoint and midpoint samples), point
//! masses are kept as explicit atoms, and the stationary phase of a greedy
//! skeleton contributes an analytic exponential tail.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::entropy::{Belief, EntropyModel};
use crate::greedy::GreedySkeleton;
use crate::payoff::Payoff;
use crate::quad::{adaptive_simpson, exp_linear_integral, simpson, SegmentQuadratic};
use crate::{Error, Result};

/// Default feasibility tolerance of the capacity audit (entropy units).
pub const CAPACITY_TOL: f64 = 1e-7;

const MASS_TOL: f64 = 1e-8;
const SAMPLE_STEP: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub time: f64,
    pub mass: Vec<f64>,
}

/// Exponential tail attached at `start`: state `i` gains `weights[i]·(1 − e^{−h(t−start)})`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpTail {
    pub start: f64,
    pub hazard: f64,
    pub weights: Vec<f64>,
}

impl ExpTail {
    fn total(&self) -> f64 {
        self.weights.iter().sum()
    }
}

#[derive(Clone, Debug)]
pub struct StoppingLaw {
    prior: Vec<f64>,
    nodes: Vec<f64>,
    /// `F^i` at nodes, continuous part only: `[node][state]`.
    cdf: Vec<Vec<f64>>,
    /// Per-segment density samples `[segment][state]` at left, mid, right.
    dens_left: Vec<Vec<f64>>,
    dens_mid: Vec<Vec<f64>>,
    dens_right: Vec<Vec<f64>>,
    /// Prefix `∫_0^{t_j} F_cont(s) ds` summed over states.
    cdf_integral: Vec<f64>,
    atoms: Vec<Atom>,
    tail: Option<ExpTail>,
    cap: f64,
    horizon: f64,
}

impl StoppingLaw {
    fn assemble(
        prior: Vec<f64>,
        nodes: Vec<f64>,
        cdf: Vec<Vec<f64>>,
        dens: [Vec<Vec<f64>>; 3],
        mut atoms: Vec<Atom>,
        tail: Option<ExpTail>,
        horizon: f64,
    ) -> Self {
        let [dens_left, dens_mid, dens_right] = dens;
        let mut cdf_integral = vec![0.0; nodes.len()];
        for j in 0..nodes.len().saturating_sub(1) {
            let h = nodes[j + 1] - nodes[j];
            let mut acc = 0.0;
            for i in 0..prior.len() {
                let q =
                    SegmentQuadratic::through(dens_left[j][i], dens_mid[j][i], dens_right[j][i], h);
                acc += cdf[j][i] * h + q.double_integral(h);
            }
            cdf_integral[j + 1] = cdf_integral[j] + acc;
        }
        atoms.sort_by(|a, b| a.time.total_cmp(&b.time));
        Self {
            prior,
            nodes,
            cdf,
            dens_left,
            dens_mid,
            dens_right,
            cdf_integral,
            atoms,
            tail,
            cap: f64::INFINITY,
            horizon,
        }
    }

    /// Every state stops deterministically at `delay` (constant-delay model).
    pub fn constant_delay(prior: &Belief, delay: f64) -> Self {
        let n = prior.dim();
        Self::assemble(
            prior.probs().to_vec(),
            vec![0.0],
            vec![vec![0.0; n]],
            [vec![], vec![], vec![]],
            vec![Atom {
                time: delay,
                mass: prior.probs().to_vec(),
            }],
            None,
            delay,
        )
    }

    /// Piecewise-linear law from tabulated sub-CDFs (e.g. a CSV round trip).
    pub fn from_table(prior: &Belief, times: &[f64], cdf: &[Vec<f64>]) -> Result<Self> {
        let n = prior.dim();
        if times.is_empty() || times.len() != cdf.len() {
            return Err(Error::DegenerateInput(
                "table needs matching nonempty rows".into(),
            ));
        }
        if times[0] != 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::DegenerateInput(
                "table times must start at 0 and increase strictly".into(),
            ));
        }
        if let Some(row) = cdf.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: row.len(),
            });
        }
        let mut atoms = Vec::new();
        if cdf[0].iter().any(|&x| x > 0.0) {
            atoms.push(Atom {
                time: 0.0,
                mass: cdf[0].clone(),
            });
        }
        let base = cdf[0].clone();
        let cont: Vec<Vec<f64>> = cdf
            .iter()
            .map(|r| r.iter().zip(&base).map(|(a, b)| a - b).collect())
            .collect();
        let slopes: Vec<Vec<f64>> = (0..times.len() - 1)
            .map(|j| {
                let h = times[j + 1] - times[j];
                (0..n).map(|i| (cont[j + 1][i] - cont[j][i]) / h).collect()
            })
            .collect();
        Ok(Self::assemble(
            prior.probs().to_vec(),
            times.to_vec(),
            cont,
            [slopes.clone(), slopes.clone(), slopes],
            atoms,
            None,
            *times.last().unwrap(),
        ))
    }

    pub fn dim(&self) -> usize {
        self.prior.len()
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn tail(&self) -> Option<&ExpTail> {
        self.tail.as_ref()
    }

    /// Truncation time (`+inf` when uncapped).
    pub fn cap(&self) -> f64 {
        self.cap
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    fn last_node(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    fn segment(&self, t: f64) -> usize {
        self.nodes
            .partition_point(|&x| x <= t)
            .saturating_sub(1)
            .min(self.nodes.len().saturating_sub(2))
    }

    fn quad(&self, j: usize, i: usize) -> SegmentQuadratic {
        let h = self.nodes[j + 1] - self.nodes[j];
        SegmentQuadratic::through(
            self.dens_left[j][i],
            self.dens_mid[j][i],
            self.dens_right[j][i],
            h,
        )
    }

    /// Continuous-part `F^i(t)` ignoring the cap.
    fn cont_cdf(&self, i: usize, t: f64) -> f64 {
        if self.nodes.len() < 2 || t <= 0.0 {
            return if t >= self.last_node() {
                self.cdf[self.nodes.len() - 1][i]
            } else {
                0.0
            };
        }
        if t >= self.last_node() {
            return self.cdf[self.nodes.len() - 1][i];
        }
        let j = self.segment(t);
        self.cdf[j][i] + self.quad(j, i).integral(t - self.nodes[j])
    }

    fn uncapped_cdf(&self, i: usize, t: f64) -> f64 {
        let mut v = self.cont_cdf(i, t);
        for a in &self.atoms {
            if a.time <= t {
                v += a.mass[i];
            }
        }
        if let Some(tail) = &self.tail {
            if t > tail.start {
                v += tail.weights[i] * (-(-tail.hazard * (t - tail.start)).exp_m1());
            }
        }
        v
    }

    /// `F^i(t)`, frozen after the cap.
    pub fn cdf_state(&self, i: usize, t: f64) -> f64 {
        self.uncapped_cdf(i, t.min(self.cap))
    }

    pub fn cdf_vec(&self, t: f64) -> Vec<f64> {
        (0..self.dim()).map(|i| self.cdf_state(i, t)).collect()
    }

    /// `F(t) = Σ_i F^i(t)`.
    pub fn cdf(&self, t: f64) -> f64 {
        (0..self.dim()).map(|i| self.cdf_state(i, t)).sum()
    }

    /// Density of the absolutely continuous part (zero past the cap).
    pub fn density(&self, t: f64) -> f64 {
        if t > self.cap || t < 0.0 {
            return 0.0;
        }
        let n = self.dim();
        let mut f = 0.0;
        if self.nodes.len() >= 2 && t <= self.last_node() {
            let j = self.segment(t);
            let x = t - self.nodes[j];
            f += (0..n).map(|i| self.quad(j, i).eval(x)).sum::<f64>();
        }
        if let Some(tail) = &self.tail {
            if t >= tail.start {
                f += tail.hazard * tail.total() * (-tail.hazard * (t - tail.start)).exp();
            }
        }
        f
    }

    /// Per-state `F^i(∞)` of the law before any truncation.
    pub fn total_masses(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                let mut v = self.cdf[self.nodes.len() - 1][i];
                v += self.atoms.iter().map(|a| a.mass[i]).sum::<f64>();
                if let Some(tail) = &self.tail {
                    v += tail.weights[i];
                }
                v
            })
            .collect()
    }

    /// Mass that has learned the state by the cap (all mass when uncapped).
    pub fn learned_mass(&self) -> f64 {
        if self.cap.is_infinite() {
            self.total_masses().iter().sum()
        } else {
            self.cdf(self.cap)
        }
    }

    /// Mass still uninformed when the cap binds.
    pub fn never_learn_mass(&self) -> f64 {
        (self.prior.iter().sum::<f64>() - self.learned_mass()).max(0.0)
    }

    fn uncapped_cdf_integral(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let n = self.dim();
        let mut acc;
        let last = self.last_node();
        if self.nodes.len() < 2 {
            acc = 0.0;
        } else if t >= last {
            acc = self.cdf_integral[self.nodes.len() - 1];
        } else {
            let j = self.segment(t);
            let x = t - self.nodes[j];
            acc = self.cdf_integral[j]
                + (0..n)
                    .map(|i| self.cdf[j][i] * x + self.quad(j, i).double_integral(x))
                    .sum::<f64>();
        }
        if t > last {
            let end: f64 = (0..n).map(|i| self.cdf[self.nodes.len() - 1][i]).sum();
            acc += end * (t - last);
        }
        for a in &self.atoms {
            if a.time < t {
                acc += a.mass.iter().sum::<f64>() * (t - a.time);
            }
        }
        if let Some(tail) = &self.tail {
            if t > tail.start {
                let u = t - tail.start;
                let h = tail.hazard;
                acc += tail.total() * (u + (-h * u).exp_m1() / h);
            }
        }
        acc
    }

    /// `∫_0^t (1 − F(s)) ds`.
    pub fn survival_integral(&self, t: f64) -> f64 {
        let integral_f = if t <= self.cap {
            self.uncapped_cdf_integral(t)
        } else {
            self.uncapped_cdf_integral(self.cap) + self.cdf(self.cap) * (t - self.cap)
        };
        t - integral_f
    }

    /// Times the audit and CSV exports sample: nodes, atoms, the cap, and a
    /// uniform grid over the tail up to the horizon.
    pub fn sample_times(&self) -> Vec<f64> {
        let mut ts = self.nodes.clone();
        for a in &self.atoms {
            ts.push(a.time);
        }
        if self.cap.is_finite() {
            ts.push(self.cap);
        }
        let last = self.last_node();
        let end = self.horizon.max(last);
        let m = ((end - last) / SAMPLE_STEP).ceil() as usize;
        for k in 1..=m {
            ts.push((last + k as f64 * SAMPLE_STEP).min(end));
        }
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        ts
    }
}

/// Stopping law of the greedy process described by `sk`.
pub fn stopping_law(sk: &GreedySkeleton, horizon: f64) -> Result<StoppingLaw> {
    let t_k = sk.stationary_start();
    if horizon < t_k {
        return Err(Error::HorizonTooShort {
            horizon,
            breakpoint: t_k,
        });
    }
    let n = sk.dim();
    let mut nodes = vec![0.0];
    let mut cdf = vec![vec![0.0; n]];
    let (mut dl, mut dm, mut dr) = (Vec::new(), Vec::new(), Vec::new());
    let mut cum_hazard = 0.0f64;
    for phase in sk.phases() {
        for w in phase.nodes.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let h = b.t - a.t;
            if h <= 0.0 {
                continue;
            }
            let mid_t = a.t + 0.5 * h;
            let mid_rates = sk.rates_at(mid_t);
            let (ha, hm, hb) = (
                a.rates.iter().sum::<f64>(),
                mid_rates.iter().sum::<f64>(),
                b.rates.iter().sum::<f64>(),
            );
            let hq = SegmentQuadratic::through(ha, hm, hb, h);
            let s_a = (-cum_hazard).exp();
            let s_m = (-(cum_hazard + hq.integral(0.5 * h))).exp();
            cum_hazard += simpson(h, ha, hm, hb);
            let s_b = (-cum_hazard).exp();
            let fl: Vec<f64> = a.rates.iter().map(|r| r * s_a).collect();
            let fm: Vec<f64> = mid_rates.iter().map(|r| r * s_m).collect();
            let fr: Vec<f64> = b.rates.iter().map(|r| r * s_b).collect();
            let prev = cdf.last().unwrap();
            let next: Vec<f64> = (0..n)
                .map(|i| prev[i] + simpson(h, fl[i], fm[i], fr[i]))
                .collect();
            nodes.push(b.t);
            cdf.push(next);
            dl.push(fl);
            dm.push(fm);
            dr.push(fr);
        }
    }
    let st = sk.stationary();
    let s_k = (-cum_hazard).exp();
    let tail = ExpTail {
        start: *nodes.last().unwrap(),
        hazard: st.hazard,
        weights: st.belief.probs().iter().map(|m| s_k * m).collect(),
    };
    Ok(StoppingLaw::assemble(
        sk.prior().probs().to_vec(),
        nodes,
        cdf,
        [dl, dm, dr],
        vec![],
        Some(tail),
        horizon,
    ))
}

/// The law stopped at `cap`: mass that has not learned by then never does.
pub fn truncate_law(law: &StoppingLaw, cap: f64) -> StoppingLaw {
    let mut out = law.clone();
    out.cap = law.cap.min(cap.max(0.0));
    out
}

/// `E[ρ(τ)]` where unlearned mass contributes zero.
pub fn expected_payoff(law: &StoppingLaw, rho: &Payoff) -> f64 {
    payoff_until(law, rho, f64::INFINITY)
}

/// `E[ρ(τ); τ ≤ cap]` without materializing a truncated copy of the law.
pub(crate) fn payoff_until(law: &StoppingLaw, rho: &Payoff, cap: f64) -> f64 {
    let cap = law.cap.min(cap);
    let end = cap.min(rho.support_end());
    let n = law.dim();
    let mut total = 0.0;

    // continuous part on the node grid
    if law.nodes.len() >= 2 {
        let stop = end.min(law.last_node());
        for j in 0..law.nodes.len() - 1 {
            let t0 = law.nodes[j];
            if t0 >= stop {
                break;
            }
            let t1 = law.nodes[j + 1].min(stop);
            let x = t1 - t0;
            let (f0, fm, f1) = if t1 == law.nodes[j + 1] {
                (
                    law.dens_left[j].iter().sum::<f64>(),
                    law.dens_mid[j].iter().sum::<f64>(),
                    law.dens_right[j].iter().sum::<f64>(),
                )
            } else {
                let mut acc = (0.0, 0.0, 0.0);
                for i in 0..n {
                    let q = law.quad(j, i);
                    acc.0 += q.eval(0.0);
                    acc.1 += q.eval(0.5 * x);
                    acc.2 += q.eval(x);
                }
                acc
            };
            total += simpson(
                x,
                rho.value(t0) * f0,
                rho.value(t0 + 0.5 * x) * fm,
                rho.value(t1) * f1,
            );
        }
    }

    for a in &law.atoms {
        if a.time <= cap {
            total += rho.value(a.time) * a.mass.iter().sum::<f64>();
        }
    }

    if let Some(tail) = &law.tail {
        let w = tail.total();
        let (s0, h) = (tail.start, tail.hazard);
        if end > s0 && w > 0.0 {
            total += match rho.exp_linear_form() {
                Some(e) => {
                    w * h
                        * (h * s0).exp()
                        * exp_linear_integral(e.constant, e.slope, e.rate + h, s0, end)
                }
                None => {
                    let stop = end.min(s0 + 50.0 / h);
                    adaptive_simpson(
                        |t| rho.value(t) * w * h * (-h * (t - s0)).exp(),
                        s0,
                        stop,
                        1e-11,
                    )
                }
            };
        }
    }
    total
}

/// Capacity functional evaluated on a time grid.
#[derive(Clone, Debug)]
pub struct CapacityAudit {
    pub times: Vec<f64>,
    /// Entropy produced by time `t`.
    pub lhs: Vec<f64>,
    /// `χ ∫_0^t (1 − F)`.
    pub rhs: Vec<f64>,
    pub slack: Vec<f64>,
}

impl CapacityAudit {
    /// `(t, slack)` at the most violated time.
    pub fn min_slack(&self) -> (f64, f64) {
        self.times
            .iter()
            .zip(&self.slack)
            .fold((f64::NAN, f64::INFINITY), |acc, (&t, &s)| {
                if s < acc.1 {
                    (t, s)
                } else {
                    acc
                }
            })
    }

    pub fn max_abs_slack(&self) -> f64 {
        self.slack.iter().fold(0.0f64, |m, s| m.max(s.abs()))
    }

    pub fn feasible(&self, tol: f64) -> bool {
        self.min_slack().1 >= -tol
    }
}

/// Evaluates `Σ_i F^i(t)H(e_i) + H(Σ_i (F^i(∞)−F^i(t)) e_i) − H(μ_0) ≤ χ∫_0^t(1−F)`.
pub fn capacity_audit(
    law: &StoppingLaw,
    entropy: &EntropyModel,
    prior: &Belief,
    chi: f64,
) -> Result<CapacityAudit> {
    let n = prior.dim();
    if law.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: law.dim(),
        });
    }
    entropy.check_dim(n)?;
    let totals = law.total_masses();
    for i in 0..n {
        if (totals[i] - prior.probs()[i]).abs() > MASS_TOL {
            return Err(Error::MassIncomplete {
                state: i,
                got: totals[i],
                expected: prior.probs()[i],
            });
        }
    }
    let h_vertex: Vec<f64> = (0..n).map(|i| entropy.vertex_value(n, i)).collect();
    let h_prior = entropy.value_raw(prior.probs());
    let times = law.sample_times();
    let mut lhs = Vec::with_capacity(times.len());
    let mut rhs = Vec::with_capacity(times.len());
    let mut slack = Vec::with_capacity(times.len());
    for &t in &times {
        let f = law.cdf_vec(t);
        let remaining: Vec<f64> = (0..n).map(|i| (prior.probs()[i] - f[i]).max(0.0)).collect();
        let l = f.iter().zip(&h_vertex).map(|(a, b)| a * b).sum::<f64>()
            + entropy.value_raw(&remaining)
            - h_prior;
        let r = chi * law.survival_integral(t);
        lhs.push(l);
        rhs.push(r);
        slack.push(r - l);
    }
    Ok(CapacityAudit {
        times,
        lhs,
        rhs,
        slack,
    })
}

/// Monte Carlo sample of the greedy jump process.
#[derive(Clone, Debug)]
pub struct Simulation {
    /// Stopping time per path (`+inf` if censored at the horizon).
    pub stop_times: Vec<f64>,
    pub stop_states: Vec<Option<usize>>,
    pub checkpoints: Vec<f64>,
    /// Empirical `E[μ_t]` at each checkpoint.
    pub mean_belief: Vec<Vec<f64>>,
    pub horizon: f64,
    /// Times the thinning bound was exceeded (should be zero).
    pub bound_violations: usize,
}

impl Simulation {
    pub fn n_paths(&self) -> usize {
        self.stop_times.len()
    }

    /// Empirical `F^i(t)`.
    pub fn empirical_cdf_state(&self, state: usize, t: f64) -> f64 {
        let hits = self
            .stop_times
            .iter()
            .zip(&self.stop_states)
            .filter(|(&s, &k)| k == Some(state) && s <= t)
            .count();
        hits as f64 / self.n_paths() as f64
    }

    /// Fraction of paths stopping in each state.
    pub fn state_frequencies(&self, n: usize) -> Vec<f64> {
        let mut c = vec![0usize; n];
        for s in self.stop_states.iter().flatten() {
            c[*s] += 1;
        }
        c.into_iter()
            .map(|k| k as f64 / self.n_paths() as f64)
            .collect()
    }

    /// Kolmogorov–Smirnov distance between empirical and analytic `F`.
    pub fn ks_distance(&self, law: &StoppingLaw) -> f64 {
        let mut ts: Vec<f64> = self
            .stop_times
            .iter()
            .copied()
            .filter(|t| t.is_finite())
            .collect();
        ts.sort_by(f64::total_cmp);
        let m = self.n_paths() as f64;
        let mut d = 0.0f64;
        for (k, &t) in ts.iter().enumerate() {
            let f = law.cdf(t);
            d = d
                .max((f - k as f64 / m).abs())
                .max(((k + 1) as f64 / m - f).abs());
        }
        d.max((law.cdf(self.horizon) - ts.len() as f64 / m).abs())
    }
}

/// Independent per-path generator keyed by `(seed, path)`.
fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

/// Simulates `n_paths` conversations by thinning against the skeleton rates.
pub fn simulate_paths(
    sk: &GreedySkeleton,
    n_paths: usize,
    seed: u64,
    horizon: f64,
    checkpoints: &[f64],
) -> Result<Simulation> {
    if n_paths == 0 {
        return Err(Error::InvalidParameter("need at least one path".into()));
    }
    let node_max = sk
        .phases()
        .iter()
        .flat_map(|p| p.nodes.iter())
        .map(|nd| nd.rates.iter().sum::<f64>())
        .fold(sk.stationary().hazard, f64::max);
    let bound = if sk.phases().is_empty() {
        sk.stationary().hazard
    } else {
        1.05 * node_max
    };
    let results: Vec<(f64, Option<usize>, bool)> = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let mut rng = path_rng(seed, p);
            let mut t = 0.0;
            loop {
                let u: f64 = rng.random();
                t += -(1.0 - u).ln() / bound;
                if t > horizon {
                    return (f64::INFINITY, None, false);
                }
                let rates = sk.rates_at(t);
                let total: f64 = rates.iter().sum();
                let v = rng.random::<f64>() * bound;
                if v < total {
                    let mut acc = 0.0;
                    let mut state = rates.len() - 1;
                    for (s, r) in rates.iter().enumerate() {
                        acc += r;
                        if v < acc {
                            state = s;
                            break;
                        }
                    }
                    return (t, Some(state), total > bound);
                }
            }
        })
        .collect();
    let n = sk.dim();
    let mean_belief = checkpoints
        .iter()
        .map(|&c| {
            let hat = sk.belief_raw(c);
            let mut acc = vec![0.0; n];
            for (t, s, _) in &results {
                match s {
                    Some(k) if *t <= c => acc[*k] += 1.0,
                    _ => acc.iter_mut().zip(&hat).for_each(|(a, h)| *a += h),
                }
            }
            acc.into_iter().map(|a| a / n_paths as f64).collect()
        })
        .collect();
    Ok(Simulation {
        bound_violations: results.iter().filter(|r| r.2).count(),
        stop_times: results.iter().map(|r| r.0).collect(),
        stop_states: results.iter().map(|r| r.1).collect(),
        checkpoints: checkpoints.to_vec(),
        mean_belief,
        horizon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greedy::build_skeleton;

    fn symmetric() -> (GreedySkeleton, StoppingLaw) {
        let sk = build_skeleton(
            &EntropyModel::quadratic_binary(2.0),
            &Belief::binary(0.5).unwrap(),
            0.125,
            &Default::default(),
        )
        .unwrap();
        let law = stopping_law(&sk, 40.0).unwrap();
        (sk, law)
    }

    #[test]
    fn symmetric_law_is_exponential() {
        let (_, law) = symmetric();
        for &t in &[0.0, 0.3, 2.0, 7.5] {
            assert!((law.density(t) - 0.5 * (-0.5 * t).exp()).abs() < 1e-15);
            assert!((law.cdf_state(0, t) - 0.5 * (1.0 - (-0.5 * t).exp())).abs() < 1e-15);
        }
        assert_eq!(law.total_masses(), vec![0.5, 0.5]);
    }

    #[test]
    fn payoff_examples() {
        let (_, law) = symmetric();
        assert!((expected_payoff(&law, &Payoff::discount(1.0)) - 1.0 / 3.0).abs() < 1e-15);
        assert!((expected_payoff(&law, &Payoff::constant(1.0)) - 1.0).abs() < 1e-15);
        let capped = truncate_law(&law, 1.0);
        let v = expected_payoff(&capped, &Payoff::discount(2.0));
        assert!((v - 0.2 * (1.0 - (-2.5f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn truncation_examples() {
        let (_, law) = symmetric();
        let same = truncate_law(&law, f64::INFINITY);
        assert_eq!(same.cap(), f64::INFINITY);
        let two = truncate_law(&law, 2.0);
        assert!((two.learned_mass() - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        let zero = truncate_law(&law, 0.0);
        assert_eq!(zero.learned_mass(), 0.0);
        assert!((zero.never_learn_mass() - 1.0).abs() < 1e-15);
        assert_eq!(expected_payoff(&zero, &Payoff::constant(1.0)), 0.0);
    }

    #[test]
    fn constant_delay_audit() {
        let prior = Belief::binary(0.5).unwrap();
        let q = EntropyModel::quadratic_binary(2.0);
        let ok =
            capacity_audit(&StoppingLaw::constant_delay(&prior, 2.0), &q, &prior, 0.125).unwrap();
        let (t, s) = ok.min_slack();
        assert!(ok.feasible(CAPACITY_TOL));
        let at_two = ok.times.iter().position(|&x| x == 2.0).unwrap();
        assert!(
            ok.slack[at_two].abs() < 1e-15,
            "slack at 2 = {}",
            ok.slack[at_two]
        );
        assert!(s >= -1e-15, "min slack {s} at {t}");
        let bad =
            capacity_audit(&StoppingLaw::constant_delay(&prior, 1.0), &q, &prior, 0.125).unwrap();
        let (t, s) = bad.min_slack();
        assert!(!bad.feasible(CAPACITY_TOL));
        assert_eq!(t, 1.0);
        assert!((s - (0.125 - 0.25)).abs() < 1e-15);
    }

    #[test]
    fn greedy_law_binds() {
        let (_, law) = symmetric();
        let prior = Belief::binary(0.5).unwrap();
        let audit =
            capacity_audit(&law, &EntropyModel::quadratic_binary(2.0), &prior, 0.125).unwrap();
        assert!(audit.max_abs_slack() < 1e-12);
    }

    #[test]
    fn mass_incomplete_rejected() {
        let prior = Belief::binary(0.5).unwrap();
        let law = StoppingLaw::constant_delay(&Belief::binary(0.4).unwrap(), 2.0);
        let e = capacity_audit(&law, &EntropyModel::quadratic_binary(2.0), &prior, 0.125);
        assert!(matches!(e, Err(Error::MassIncomplete { .. })));
    }

    #[test]
    fn horizon_below_breakpoint_rejected() {
        let sk = build_skeleton(
            &EntropyModel::quadratic_binary(2.0),
            &Belief::binary(0.6).unwrap(),
            0.125,
            &Default::default(),
        )
        .unwrap();
        assert!(matches!(
            stopping_law(&sk, 0.1),
            Err(Error::HorizonTooShort { .. })
        ));
    }

    #[test]
    fn simulation_is_reproducible() {
        let (sk, _) = symmetric();
        let a = simulate_paths(&sk, 500, 11, 40.0, &[1.0]).unwrap();
        let b = simulate_paths(&sk, 500, 11, 40.0, &[1.0]).unwrap();
        assert_eq!(a.stop_times, b.stop_times);
        let c = simulate_paths(&sk, 500, 12, 40.0, &[1.0]).unwrap();
        assert_ne!(a.stop_times, c.stop_times);
    }
}
