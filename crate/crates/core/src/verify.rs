//! Optimality certificates for the greedy law and incentive audits of menus.
//!
//! The multiplier `Λ` solves `ζΛ' = ρ' + χΛ` backward from `Λ(∞) = 0`, with
//! `λ = −Λ'`. The first-order function `l(θ, t)` then has slope
//! `ρ' + χΛ + λD(e_θ|μ̂_t) = λ(D(e_θ|μ̂_t) − ζ)`, which vanishes while `θ` is
//! active and is positive before it enters.

use rayon::prelude::*;

use crate::entropy::{Belief, EntropyModel};
use crate::greedy::{build_skeleton, GreedySkeleton, SkeletonOptions};
use crate::lp::{LinearProgram, Sense};
use crate::payoff::Payoff;
use crate::screening::{TokenMenu, TypeDistribution};
use crate::stopping::{stopping_law, StoppingLaw, CAPACITY_TOL};
use crate::{Error, Result};

/// Grid points used on the stationary phase.
const STATIONARY_POINTS: usize = 4000;

#[derive(Clone, Debug)]
pub struct MultiplierPath {
    pub times: Vec<f64>,
    pub zeta: Vec<f64>,
    /// `Λ(t)`.
    pub big_lambda: Vec<f64>,
    /// `λ(t) = −Λ'(t)`.
    pub lambda: Vec<f64>,
    pub rho_prime: Vec<f64>,
    /// `D(e_θ|μ̂_t)` as `[t][θ]`.
    pub divergences: Vec<Vec<f64>>,
    /// Whether `θ` is active at `t`, as `[t][θ]`.
    pub active: Vec<Vec<bool>>,
    /// `l(θ, t)` as `[θ][t]`.
    pub l: Vec<Vec<f64>>,
    /// `a_θ = l(θ, t̂^K)`.
    pub a: Vec<f64>,
    pub chi: f64,
    pub horizon: f64,
    pub stationary_start: f64,
}

impl MultiplierPath {
    /// Largest `|ζΛ' − ρ' − χΛ|` using a five-point stencil where the grid is locally uniform.
    pub fn ode_residual(&self) -> f64 {
        let t = &self.times;
        let mut worst = 0.0f64;
        for j in 2..t.len().saturating_sub(2) {
            let h = t[j + 1] - t[j];
            let uniform = (j - 2..j + 2).all(|k| ((t[k + 1] - t[k]) - h).abs() <= 1e-9 * h);
            if !uniform {
                continue;
            }
            let lam = &self.big_lambda;
            let d = (lam[j - 2] - 8.0 * lam[j - 1] + 8.0 * lam[j + 1] - lam[j + 2]) / (12.0 * h);
            let r = self.zeta[j] * d - self.rho_prime[j] - self.chi * lam[j];
            worst = worst.max(r.abs());
        }
        worst
    }

    pub fn min_lambda(&self) -> f64 {
        self.lambda.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Time grid: skeleton nodes through `t̂^K`, then uniform to the horizon.
fn certificate_grid(sk: &GreedySkeleton, horizon: f64) -> (Vec<f64>, Vec<Vec<bool>>) {
    let n = sk.dim();
    let mut times: Vec<f64> = Vec::new();
    let mut active: Vec<Vec<bool>> = Vec::new();
    for p in sk.phases() {
        let mask: Vec<bool> = (0..n).map(|s| p.active.contains(&s)).collect();
        for nd in &p.nodes {
            if times.last() == Some(&nd.t) {
                // boundary node belongs to the later phase
                *active.last_mut().unwrap() = mask.clone();
                continue;
            }
            times.push(nd.t);
            active.push(mask.clone());
        }
    }
    let t_k = sk.stationary_start();
    let all = vec![true; n];
    if times.last() == Some(&t_k) {
        *active.last_mut().unwrap() = all.clone();
    } else {
        times.push(t_k);
        active.push(all.clone());
    }
    let span = horizon - t_k;
    for k in 1..=STATIONARY_POINTS {
        times.push(if k == STATIONARY_POINTS {
            horizon
        } else {
            t_k + span * k as f64 / STATIONARY_POINTS as f64
        });
        active.push(all.clone());
    }
    (times, active)
}

/// Multiplier path certifying the greedy law for payoff `rho`.
pub fn foc_multiplier(sk: &GreedySkeleton, rho: &Payoff, horizon: f64) -> Result<MultiplierPath> {
    let t_k = sk.stationary_start();
    if !(horizon > t_k) {
        return Err(Error::HorizonTooShort {
            horizon,
            breakpoint: t_k,
        });
    }
    let (times, active) = certificate_grid(sk, horizon);
    let m = times.len();
    let chi = sk.chi();
    let rho_prime: Vec<f64> = times.iter().map(|&t| rho.derivative(t)).collect();
    if let Some(j) = rho_prime.iter().position(|&d| !(d < 0.0)) {
        return Err(Error::Precondition(format!(
            "payoff must be strictly decreasing; ρ'({}) = {}",
            times[j], rho_prime[j]
        )));
    }
    for j in 1..m - 1 {
        let (h0, h1) = (times[j] - times[j - 1], times[j + 1] - times[j]);
        let second = ((rho.value(times[j + 1]) - rho.value(times[j])) / h1
            - (rho.value(times[j]) - rho.value(times[j - 1])) / h0)
            / (0.5 * (h0 + h1));
        if second < -1e-9 {
            return Err(Error::Precondition(format!(
                "payoff must be convex; second difference {second:e} at t = {}",
                times[j]
            )));
        }
    }
    let zeta: Vec<f64> = times.iter().map(|&t| sk.zeta_at(t)).collect();
    let divergences: Vec<Vec<f64>> = times
        .iter()
        .map(|&t| sk.entropy().vertex_divergences_raw(&sk.belief_raw(t)))
        .collect();

    let zeta_k = sk.iso_divergence_profile().stationary_value;
    let k = chi / zeta_k;
    let first_stationary = times.partition_point(|&t| t < t_k);
    let mut big_lambda = vec![0.0; m];
    match rho
        .exp_linear_form()
        .filter(|e| e.support_end.is_infinite())
    {
        Some(e) => {
            // −ρ'(s) = e^{−rs}(c0 + c1 s)
            let (r, c0, c1) = (e.rate, e.rate * e.constant - e.slope, e.rate * e.slope);
            let kr = k + r;
            for j in first_stationary..m {
                let t = times[j];
                big_lambda[j] = (-r * t).exp() / zeta_k * ((c0 + c1 * t) / kr + c1 / (kr * kr));
            }
        }
        None => {
            let f = |t: f64, lam: f64| (rho.derivative(t) + chi * lam) / zeta_k;
            big_lambda[m - 1] = 0.0;
            for j in (first_stationary..m - 1).rev() {
                big_lambda[j] = rk4_back(&f, times[j + 1], times[j], big_lambda[j + 1]);
            }
        }
    }
    for j in (0..first_stationary).rev() {
        let f = |t: f64, lam: f64| (rho.derivative(t) + chi * lam) / sk.zeta_at(t);
        big_lambda[j] = rk4_back(&f, times[j + 1], times[j], big_lambda[j + 1]);
    }
    let lambda: Vec<f64> = (0..m)
        .map(|j| -(rho_prime[j] + chi * big_lambda[j]) / zeta[j])
        .collect();

    let n = sk.dim();
    let mut l = vec![vec![0.0; m]; n];
    for (s, ls) in l.iter_mut().enumerate() {
        ls[0] = rho.value(0.0) - big_lambda[0] * sk.entropy().vertex_value(n, s);
        for j in 1..m {
            let slope = |i: usize| lambda[i] * (divergences[i][s] - zeta[i]);
            ls[j] = ls[j - 1] + 0.5 * (times[j] - times[j - 1]) * (slope(j - 1) + slope(j));
        }
    }
    let a = l.iter().map(|ls| ls[first_stationary]).collect();
    Ok(MultiplierPath {
        times,
        zeta,
        big_lambda,
        lambda,
        rho_prime,
        divergences,
        active,
        l,
        a,
        chi,
        horizon,
        stationary_start: t_k,
    })
}

fn rk4_back(f: &impl Fn(f64, f64) -> f64, t1: f64, t0: f64, y1: f64) -> f64 {
    let h = t0 - t1;
    let k1 = f(t1, y1);
    let k2 = f(t1 + 0.5 * h, y1 + 0.5 * h * k1);
    let k3 = f(t1 + 0.5 * h, y1 + 0.5 * h * k2);
    let k4 = f(t0, y1 + h * k3);
    y1 + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FocReport {
    /// `max_{θ,t} l(θ,t) − a_θ`.
    pub max_excess: f64,
    /// `max |l − a_θ|` over active `(θ, t)`.
    pub max_active_gap: f64,
    pub min_lambda: f64,
    /// Per state: smallest `dl/dt` before the state is active (`+inf` if never inactive).
    pub min_inactive_slope: Vec<f64>,
    /// Per state: largest `|dl/dt|` while active.
    pub max_active_slope: Vec<f64>,
    /// `Σ_θ ∫ (a_θ − l(θ,t)) dF^θ(t)`, zero when the law sits where `l = a`.
    pub slackness: f64,
}

impl FocReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.min_lambda > 0.0 && self.max_excess <= tol && self.max_active_gap <= tol
    }
}

/// Evaluates the first-order conditions of the multiplier path against the law.
pub fn foc_check(
    sk: &GreedySkeleton,
    law: &StoppingLaw,
    mp: &MultiplierPath,
    _rho: &Payoff,
) -> Result<FocReport> {
    let n = sk.dim();
    if law.dim() != n || mp.a.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: law.dim(),
        });
    }
    let m = mp.times.len();
    let mut max_excess = f64::NEG_INFINITY;
    let mut max_active_gap = 0.0f64;
    let mut min_inactive_slope = vec![f64::INFINITY; n];
    let mut max_active_slope = vec![0.0f64; n];
    let mut slackness = 0.0;
    for s in 0..n {
        let a = mp.a[s];
        let mut prev_f = law.cdf_state(s, 0.0);
        for j in 0..m {
            let l = mp.l[s][j];
            max_excess = max_excess.max(l - a);
            let slope = mp.lambda[j] * (mp.divergences[j][s] - mp.zeta[j]);
            if mp.active[j][s] {
                max_active_gap = max_active_gap.max((l - a).abs());
                max_active_slope[s] = max_active_slope[s].max(slope.abs());
            } else {
                min_inactive_slope[s] = min_inactive_slope[s].min(slope);
            }
            if j > 0 {
                let f = law.cdf_state(s, mp.times[j]);
                slackness += (a - 0.5 * (l + mp.l[s][j - 1])) * (f - prev_f);
                prev_f = f;
            }
        }
    }
    Ok(FocReport {
        max_excess,
        max_active_gap,
        min_lambda: mp.min_lambda(),
        min_inactive_slope,
        max_active_slope,
        slackness,
    })
}

/// Oracle time grid on `[0, horizon]`, dense near zero, with `extra` times inserted.
pub fn oracle_grid(horizon: f64, points: usize, stretch: f64, extra: &[f64]) -> Vec<f64> {
    let points = points.max(2);
    let mut g: Vec<f64> = (0..points)
        .map(|k| {
            let x = k as f64 / (points - 1) as f64;
            if stretch == 0.0 {
                horizon * x
            } else {
                horizon * (stretch * x).exp_m1() / stretch.exp_m1()
            }
        })
        .collect();
    *g.last_mut().unwrap() = horizon;
    g.extend(extra.iter().copied().filter(|&t| t > 0.0 && t < horizon));
    g.sort_by(f64::total_cmp);
    g.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    g
}

#[derive(Clone, Debug)]
pub struct OracleBound {
    /// Certified bound: the optimum under nonnegatively perturbed costs.
    pub value: f64,
    /// `Σ ρ m` at the final LP vertex under the unperturbed costs.
    pub lp_value: f64,
    pub iterations: usize,
    /// Largest capacity violation of the final LP solution at grid times.
    pub max_violation: f64,
    pub cuts: usize,
    pub grid_points: usize,
}

const ORACLE_MAX_ITER: usize = 50;
const PRUNE_SLACK: f64 = 1e-6;
/// Relative cost perturbation; it loosens the bound by at most this fraction.
pub const ORACLE_PERTURBATION: f64 = 1e-6;

/// Upper bound on `sup E[ρ(τ)]` over feasible stopping laws, by a discretized
/// linear relaxation with supporting-hyperplane cuts on the entropy term.
///
/// Each bucket `(t_l, t_{l+1}]` carries per-state masses at both ends; a
/// mean-preserving split of any mass inside the bucket keeps `∫(1−F)` exact at
/// grid times and, for convex decreasing `ρ`, can only raise the objective.
pub fn oracle_upper_bound(
    rho: &Payoff,
    entropy: &EntropyModel,
    prior: &Belief,
    chi: f64,
    grid: &[f64],
) -> Result<OracleBound> {
    let n = prior.dim();
    entropy.check_dim(n)?;
    if grid.len() < 2 || grid[0] != 0.0 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::DegenerateInput(
            "oracle grid must start at 0 and increase strictly".into(),
        ));
    }
    let mu0 = prior.probs();
    let buckets = grid.len() - 1;
    let va = |i: usize, l: usize| i * buckets + l;
    let vb = |i: usize, l: usize| n * buckets + i * buckets + l;
    let vc = |i: usize| 2 * n * buckets + i;
    let n_vars = 2 * n * buckets + n;
    let mut objective = vec![0.0; n_vars];
    for i in 0..n {
        for l in 0..buckets {
            objective[va(i, l)] = rho.value(grid[l]);
            objective[vb(i, l)] = rho.value(grid[l + 1]);
        }
        objective[vc(i)] = rho.value(grid[buckets]);
    }
    let h_vertex: Vec<f64> = (0..n).map(|i| entropy.vertex_value(n, i)).collect();
    let h_prior = entropy.value_raw(mu0);

    let cut_row = |k: usize, g: &[f64]| -> (Vec<(usize, f64)>, f64) {
        let t = grid[k];
        let mut coeffs = Vec::with_capacity(2 * n * k);
        for i in 0..n {
            let base = h_vertex[i] - g[i];
            for l in 0..k {
                coeffs.push((va(i, l), base + chi * (t - grid[l])));
                coeffs.push((vb(i, l), base + chi * (t - grid[l + 1])));
            }
        }
        let gm: f64 = g.iter().zip(mu0).map(|(a, b)| a * b).sum();
        (coeffs, chi * t + h_prior - gm)
    };
    let gradient_at = |remaining: &[f64]| -> Option<Vec<f64>> {
        let total: f64 = remaining.iter().sum();
        if total <= 1e-13 {
            return None;
        }
        let dir = Belief::normalized(remaining.iter().map(|x| x.max(0.0)).collect())
            .clipped(crate::entropy::INTERIOR_FLOOR);
        Some(entropy.gradient_raw(dir.probs()))
    };

    // warm start at the greedy law's remaining mass
    let greedy = build_skeleton(entropy, prior, chi, &SkeletonOptions::default())
        .and_then(|sk| stopping_law(&sk, sk.default_horizon().max(grid[buckets])))
        .ok();
    let scale = objective
        .iter()
        .fold(0.0f64, |a, c| a.max(c.abs()))
        .max(f64::MIN_POSITIVE);
    let mut lp = LinearProgram::new(objective).perturbed(ORACLE_PERTURBATION * scale);
    for i in 0..n {
        let mut coeffs: Vec<(usize, f64)> = (0..buckets)
            .flat_map(|l| [(va(i, l), 1.0), (vb(i, l), 1.0)])
            .collect();
        coeffs.push((vc(i), 1.0));
        lp.add(coeffs, Sense::Eq, mu0[i]);
    }
    let prior_grad = entropy.gradient_raw(prior.clipped(crate::entropy::INTERIOR_FLOOR).probs());
    let mut cuts = 0;
    // supporting points already used at each grid time
    let mut cut_points: Vec<Vec<Vec<f64>>> = vec![Vec::new(); buckets + 1];
    for k in 1..=buckets {
        let g = greedy
            .as_ref()
            .and_then(|law| {
                let f = law.cdf_vec(grid[k]);
                let rem: Vec<f64> = (0..n).map(|i| mu0[i] - f[i]).collect();
                gradient_at(&rem)
            })
            .unwrap_or_else(|| prior_grad.clone());
        let (coeffs, rhs) = cut_row(k, &g);
        lp.add(coeffs, Sense::Le, rhs);
        cuts += 1;
        cut_points[k].push(g);
    }
    let mut session = lp.start()?;
    // (grid index, supporting point) of every appended cut, indexed by tag
    let mut appended: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut sol = session.solution();
    let mut iterations = 1;
    let mut max_violation;
    loop {
        let mut stopped = vec![0.0; n];
        let mut spent = 0.0;
        let mut candidates = Vec::new();
        max_violation = f64::NEG_INFINITY;
        for k in 1..=buckets {
            let l = k - 1;
            for i in 0..n {
                stopped[i] += sol.x[va(i, l)] + sol.x[vb(i, l)];
            }
            // ∫_0^{t_k}(1 − F) = Σ_l Δ_l (1 − F(t_l^+)), with bucket-l "a" mass stopped at t_l^+
            let at_left: f64 = (0..n).map(|i| stopped[i] - sol.x[vb(i, l)]).sum();
            spent += (grid[k] - grid[l]) * (1.0 - at_left);
            let remaining: Vec<f64> = (0..n).map(|i| (mu0[i] - stopped[i]).max(0.0)).collect();
            let lhs = stopped
                .iter()
                .zip(&h_vertex)
                .map(|(f, h)| f * h)
                .sum::<f64>()
                + entropy.value_raw(&remaining)
                - h_prior;
            let v = lhs - chi * spent;
            max_violation = max_violation.max(v);
            if v > CAPACITY_TOL {
                if let Some(g) = gradient_at(&remaining) {
                    let seen = cut_points[k]
                        .iter()
                        .any(|p| p.iter().zip(&g).all(|(a, b)| (a - b).abs() < 1e-10));
                    if !seen {
                        candidates.push((k, g));
                    }
                }
            }
        }
        if candidates.is_empty() || iterations >= ORACLE_MAX_ITER {
            break;
        }
        // slack cuts only slow the simplex down; a pruned point may be cut again later
        for tag in session.prune(PRUNE_SLACK) {
            let (k, g) = &appended[tag];
            cut_points[*k].retain(|p| p != g);
        }
        let new_rows: Vec<_> = candidates
            .into_iter()
            .map(|(k, g)| {
                let row = cut_row(k, &g);
                cut_points[k].push(g.clone());
                appended.push((k, g));
                row
            })
            .collect();
        cuts += new_rows.len();
        sol = session.add_rows(new_rows)?;
        iterations += 1;
    }
    Ok(OracleBound {
        value: sol.perturbed_value,
        lp_value: sol.value,
        iterations,
        max_violation,
        cuts,
        grid_points: grid.len(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct IcReport {
    /// Largest `U(r'|r) − P(r') − [U(r|r) − P(r)]` over grid pairs.
    pub max_gain: f64,
    /// `(r, r')` attaining it.
    pub argmax: (f64, f64),
    /// Smallest `U(r|r) − P(r)`.
    pub min_ir_slack: f64,
    /// `U(r̄|r̄) − P(r̄)`.
    pub ir_top: f64,
}

impl IcReport {
    pub fn passes(&self, ic_tol: f64, ir_tol: f64) -> bool {
        self.max_gain <= ic_tol && self.min_ir_slack >= -ir_tol && self.ir_top.abs() <= ir_tol
    }
}

/// Utility matrix `U[i][j] = U(r_j | r_i)` on the menu grid.
fn utility_matrix(menu: &TokenMenu, tm: &dyn TypeDistribution) -> Vec<Vec<f64>> {
    let types = menu.types();
    types
        .par_iter()
        .map(|&r| types.iter().map(|&rp| menu.utility(tm, r, rp)).collect())
        .collect()
}

/// Misreport gains and participation slack over every pair of grid types.
pub fn ic_audit(menu: &TokenMenu, tm: &dyn TypeDistribution) -> IcReport {
    let u = utility_matrix(menu, tm);
    let e = &menu.entries;
    let mut max_gain = f64::NEG_INFINITY;
    let mut argmax = (e[0].r, e[0].r);
    let mut min_ir_slack = f64::INFINITY;
    for i in 0..e.len() {
        let own = u[i][i] - e[i].price;
        min_ir_slack = min_ir_slack.min(own);
        for j in 0..e.len() {
            let gain = u[i][j] - e[j].price - own;
            if gain > max_gain {
                max_gain = gain;
                argmax = (e[i].r, e[j].r);
            }
        }
    }
    let last = e.len() - 1;
    IcReport {
        max_gain,
        argmax,
        min_ir_slack,
        ir_top: u[last][last] - e[last].price,
    }
}

/// Smallest mixed difference `U(r'_{j+1}|r_{i+1}) − U(r'_j|r_{i+1}) − U(r'_{j+1}|r_i) + U(r'_j|r_i)`.
pub fn supermodularity_audit(menu: &TokenMenu, tm: &dyn TypeDistribution) -> f64 {
    let u = utility_matrix(menu, tm);
    let m = u.len();
    (0..m - 1)
        .into_par_iter()
        .map(|i| {
            (0..m - 1)
                .map(|j| u[i + 1][j + 1] - u[i + 1][j] - u[i][j + 1] + u[i][j])
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn skeleton(p: f64) -> GreedySkeleton {
        build_skeleton(
            &EntropyModel::quadratic_binary(2.0),
            &Belief::binary(p).unwrap(),
            0.125,
            &Default::default(),
        )
        .unwrap()
    }

    #[test]
    fn symmetric_multiplier_closed_form() {
        let sk = skeleton(0.5);
        let r = 1.0;
        let mp = foc_multiplier(&sk, &Payoff::discount(r), sk.default_horizon()).unwrap();
        for (j, &t) in mp.times.iter().enumerate() {
            let exact = 4.0 * r * (-r * t).exp() / (r + 0.5);
            assert!((mp.big_lambda[j] - exact).abs() < 1e-12);
        }
        assert!(mp.min_lambda() > 0.0);
        assert!(mp.ode_residual() < 1e-8);
    }

    #[test]
    fn constant_payoff_rejected() {
        let sk = skeleton(0.5);
        let e = foc_multiplier(&sk, &Payoff::constant(1.0), 40.0);
        assert!(matches!(e, Err(Error::Precondition(_))));
    }

    #[test]
    fn asymmetric_slopes() {
        let sk = skeleton(0.6);
        let law = stopping_law(&sk, sk.default_horizon()).unwrap();
        let rho = Payoff::discount(1.0);
        let mp = foc_multiplier(&sk, &rho, sk.default_horizon()).unwrap();
        let rep = foc_check(&sk, &law, &mp, &rho).unwrap();
        assert!(rep.passes(1e-7), "{rep:?}");
        assert!(rep.min_inactive_slope[0] > 0.0);
        assert!(rep.min_inactive_slope[1].is_infinite());
    }

    #[test]
    fn oracle_total_mass() {
        let g = oracle_grid(40.0, 60, 4.0, &[]);
        let b = oracle_upper_bound(
            &Payoff::constant(1.0),
            &EntropyModel::quadratic_binary(2.0),
            &Belief::binary(0.5).unwrap(),
            0.125,
            &g,
        )
        .unwrap();
        assert!((b.lp_value - 1.0).abs() < 1e-9, "{b:?}");
        assert!(
            b.value >= b.lp_value && b.value <= 1.0 + ORACLE_PERTURBATION,
            "{b:?}"
        );
    }
}
