//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits nonzero
//! if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use token_screen::baselines::sech;
use token_screen::extensions::{kappa, kappa_plateau};
use token_screen::prelude::*;
use token_screen::quad::exp_integral_e1;
use token_screen::scenarios;
use token_screen::screening::virtual_preference;
use token_screen::stopping::CAPACITY_TOL;
use token_screen::verify::{oracle_grid, supermodularity_audit};

/// Sub-check log for one criterion.
#[derive(Default)]
struct Checks {
    lines: Vec<(bool, String)>,
}

impl Checks {
    fn close(&mut self, label: &str, value: f64, target: f64, tol: f64) {
        let err = (value - target).abs();
        self.lines.push((
            err <= tol,
            format!("{label}: {value:.10e} vs {target:.10e} (|err| {err:.2e}, tol {tol:.0e})"),
        ));
    }

    fn at_most(&mut self, label: &str, value: f64, bound: f64) {
        self.lines.push((
            value <= bound,
            format!("{label}: {value:.4e} <= {bound:.4e}"),
        ));
    }

    fn at_least(&mut self, label: &str, value: f64, bound: f64) {
        self.lines.push((
            value >= bound,
            format!("{label}: {value:.4e} >= {bound:.4e}"),
        ));
    }

    fn holds(&mut self, label: &str, ok: bool) {
        self.lines.push((ok, label.to_string()));
    }

    fn within(&mut self, label: &str, elapsed: Duration, limit: Duration) {
        self.lines.push((
            elapsed <= limit,
            format!(
                "{label}: {:.3} s (limit {} s)",
                elapsed.as_secs_f64(),
                limit.as_secs()
            ),
        ));
    }
}

fn criterion(id: u32, title: &str, body: impl FnOnce(&mut Checks) -> Result<()>) -> bool {
    let mut c = Checks::default();
    let started = Instant::now();
    let outcome = body(&mut c);
    let ok = outcome.is_ok() && c.lines.iter().all(|(p, _)| *p);
    println!(
        "{} criterion {id:>2}: {title} ({:.2} s)",
        if ok { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64()
    );
    for (p, line) in &c.lines {
        println!("      [{}] {line}", if *p { "ok" } else { "!!" });
    }
    if let Err(e) = outcome {
        println!("      [!!] error: {e}");
    }
    ok
}

fn leading_law() -> Result<(GreedySkeleton, StoppingLaw)> {
    let sk = scenarios::leading().skeleton()?;
    let law = stopping_law(&sk, sk.default_horizon())?;
    Ok((sk, law))
}

fn leading_revenue_target() -> f64 {
    0.2 * (1.0 - (-2.5f64).exp()) + 0.5 * (-1.0f64).exp() * exp_integral_e1(1.5)
}

fn c1(c: &mut Checks) -> Result<()> {
    let start = Instant::now();
    let (_, law) = leading_law()?;
    let tm = scenarios::leading_types();
    let menu = build_menu(&tm, &law, 0.125, 401)?;
    let revenue = menu_revenue(&menu, &tm);
    c.close("menu revenue", revenue, leading_revenue_target(), 1e-3);
    c.within("runtime", start.elapsed(), Duration::from_secs(5));
    Ok(())
}

fn c2(c: &mut Checks) -> Result<()> {
    let s = scenarios::leading();
    let tm = scenarios::leading_types();
    let cd = constant_delay_solution(&tm, &s.entropy, &s.prior, s.chi, 401)?;
    let df = diffusion_solution(&tm, s.chi, 401)?;
    c.close(
        "constant-delay revenue",
        cd.screen.revenue,
        0.5 * (-3.0f64).exp(),
        1e-6,
    );
    c.close(
        "diffusion revenue",
        df.screen.revenue,
        sech(2.0 * 2f64.sqrt()),
        1e-6,
    );
    let (_, law) = leading_law()?;
    let greedy = menu_revenue(&build_menu(&tm, &law, s.chi, 401)?, &tm);
    let r_cd = greedy / cd.screen.revenue;
    let r_df = greedy / df.screen.revenue;
    c.close("greedy / constant-delay ratio", r_cd, 8.0, 0.05 * 8.0);
    c.close("greedy / diffusion ratio", r_df, 2.0, 0.05 * 2.0);
    Ok(())
}

fn c3(c: &mut Checks) -> Result<()> {
    let (_, law) = leading_law()?;
    let tm = scenarios::leading_types();
    for k in 1..=10 {
        let r = 1.0 + 0.1 * k as f64;
        let closed = (3.0 + 2.0 * (-2.5f64).exp() - 5.0 * (-(r + 0.5) / (r - 1.0)).exp()) / 15.0;
        c.close(&format!("P({r:.1})"), price(&tm, &law, r)?, closed, 1e-6);
    }
    Ok(())
}

fn c4(c: &mut Checks) -> Result<()> {
    let sk = scenarios::asymmetric().skeleton()?;
    let phase = sk
        .phases()
        .first()
        .ok_or_else(|| Error::DegenerateInput("no transient phase".into()))?;
    let worst = phase
        .nodes
        .iter()
        .map(|nd| ((1.0 - nd.belief[1]).powi(2) - (0.16 + 0.25 * nd.t)).abs())
        .fold(0.0f64, f64::max);
    c.at_most(
        "max |(1-mu)^2 - (0.16+0.25t)| over phase-1 nodes",
        worst,
        1e-6,
    );
    for t in [0.05, 0.123, 0.2, 0.3471] {
        let mu = sk.belief_at(t).probs()[1];
        c.close(
            &format!("(1-mu)^2 at t={t}"),
            (1.0 - mu).powi(2),
            0.16 + 0.25 * t,
            1e-6,
        );
    }
    c.close("breakpoint", sk.stationary_start(), 0.36, 1e-4);
    Ok(())
}

fn c5(c: &mut Checks) -> Result<()> {
    for s in scenarios::all() {
        let sk = s.skeleton()?;
        let law = stopping_law(&sk, sk.default_horizon())?;
        let audit = capacity_audit(&law, &s.entropy, &s.prior, s.chi)?;
        c.at_most(
            &format!("{}: max |slack|", s.name),
            audit.max_abs_slack(),
            1e-7,
        );
    }
    let s = scenarios::leading();
    let at_two = capacity_audit(
        &StoppingLaw::constant_delay(&s.prior, 2.0),
        &s.entropy,
        &s.prior,
        s.chi,
    )?;
    let slack_at_two = at_two
        .times
        .iter()
        .zip(&at_two.slack)
        .filter(|(&t, _)| (t - 2.0).abs() < 1e-12)
        .map(|(_, &v)| v)
        .next()
        .unwrap_or(f64::NAN);
    c.close("constant delay 2: slack at t=2", slack_at_two, 0.0, 1e-7);
    c.holds(
        "constant delay 2 is feasible",
        at_two.feasible(CAPACITY_TOL),
    );
    let at_one = capacity_audit(
        &StoppingLaw::constant_delay(&s.prior, 1.0),
        &s.entropy,
        &s.prior,
        s.chi,
    )?;
    let (t_bad, worst) = at_one.min_slack();
    c.holds(
        &format!("constant delay 1 is infeasible (min slack {worst:.4e} at t={t_bad})"),
        !at_one.feasible(CAPACITY_TOL),
    );
    Ok(())
}

fn c6(c: &mut Checks) -> Result<()> {
    let start = Instant::now();
    let (sk, law) = leading_law()?;
    let n = 100_000;
    let checkpoints = [1.0, 5.0, 10.0];
    let sim = simulate_paths(&sk, n, 20_240_601, law.horizon(), &checkpoints)?;
    c.at_most(
        "KS distance",
        sim.ks_distance(&law),
        1.63 / (n as f64).sqrt(),
    );
    let sigma = 0.5 / (n as f64).sqrt();
    for (t, m) in sim.checkpoints.iter().zip(&sim.mean_belief) {
        for (i, (&got, &want)) in m.iter().zip(sk.prior().probs()).enumerate() {
            c.close(&format!("E[mu_{t}]({i})"), got, want, 3.0 * sigma);
        }
    }
    c.within("runtime", start.elapsed(), Duration::from_secs(30));
    Ok(())
}

fn c7(c: &mut Checks) -> Result<()> {
    let (sk, law) = leading_law()?;
    for r in [0.5, 1.0, 2.0] {
        let rho = Payoff::discount(r);
        let mp = foc_multiplier(&sk, &rho, sk.default_horizon())?;
        let rep = foc_check(&sk, &law, &mp, &rho)?;
        c.at_least(
            &format!("r={r}: min lambda"),
            rep.min_lambda,
            f64::MIN_POSITIVE,
        );
        c.at_most(&format!("r={r}: max l - a"), rep.max_excess, 1e-7);
        c.at_most(
            &format!("r={r}: max |l - a| on active set"),
            rep.max_active_gap,
            1e-7,
        );
        let worst = mp
            .times
            .iter()
            .zip(&mp.big_lambda)
            .map(|(&t, &lam)| (lam - 4.0 * r * (-r * t).exp() / (r + 0.5)).abs())
            .fold(0.0f64, f64::max);
        c.at_most(&format!("r={r}: max |Lambda - closed form|"), worst, 1e-6);
    }
    Ok(())
}

fn c8(c: &mut Checks) -> Result<()> {
    let start = Instant::now();
    let s = scenarios::leading();
    let (sk, law) = leading_law()?;
    let rho = Payoff::discount(1.0);
    let greedy = expected_payoff(&law, &rho);
    c.close("greedy value for e^-t", greedy, 1.0 / 3.0, 1e-9);
    let mut sandwich = |label: &str, value: f64, bound: f64| {
        let gap = bound / value - 1.0;
        c.holds(
            &format!(
                "{label}: greedy {value:.8} <= bound {bound:.8} (gap {:.3}%)",
                100.0 * gap
            ),
            (-1e-9..=0.02).contains(&gap),
        );
    };
    let grid = oracle_grid(sk.default_horizon(), 200, 6.0, &[]);
    let b = oracle_upper_bound(&rho, &s.entropy, &s.prior, s.chi, &grid)?;
    sandwich("e^-t, leading", greedy, b.value);

    let tm = scenarios::leading_types();
    for r in [1.25, 1.5, 1.75] {
        let vp = virtual_preference(&tm, r)?;
        let value = expected_payoff(&law, &vp.truncated);
        let grid = oracle_grid(40.0, 200, 6.0, &[vp.cutoff]);
        let b = oracle_upper_bound(&vp.truncated, &s.entropy, &s.prior, s.chi, &grid)?;
        sandwich(
            &format!("truncated virtual preference r={r}"),
            value,
            b.value,
        );
    }

    for s in scenarios::all().into_iter().skip(1) {
        let sk = s.skeleton()?;
        let law = stopping_law(&sk, sk.default_horizon())?;
        let value = expected_payoff(&law, &rho);
        let grid = oracle_grid(sk.default_horizon(), 200, 6.0, &sk.breakpoints());
        let b = oracle_upper_bound(&rho, &s.entropy, &s.prior, s.chi, &grid)?;
        sandwich(&format!("e^-t, {}", s.name), value, b.value);
    }
    c.within("runtime", start.elapsed(), Duration::from_secs(60));
    Ok(())
}

fn c9(c: &mut Checks) -> Result<()> {
    let (_, law) = leading_law()?;
    let tm = scenarios::leading_types();
    let menu = build_menu(&tm, &law, 0.125, 401)?;
    let ic = ic_audit(&menu, &tm);
    c.at_most(
        &format!("max misreport gain at {:?}", ic.argmax),
        ic.max_gain,
        1e-6,
    );
    c.at_most("|IR slack at top type|", ic.ir_top.abs(), 1e-8);
    c.at_least("min IR slack", ic.min_ir_slack, -1e-8);
    c.at_least(
        "min mixed difference (401x401)",
        supermodularity_audit(&menu, &tm),
        -1e-9,
    );
    Ok(())
}

/// Plain partial sums of the defining series.
fn kummer_terms(a: f64, b: f64, z: f64, terms: usize) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 0..terms {
        let n = n as f64;
        term *= (a + n) / (b + n) * z / (n + 1.0);
        sum += term;
    }
    sum
}

fn c10(c: &mut Checks) -> Result<()> {
    let tm = scenarios::leading_types();
    let (chi, alpha) = (0.125, 2.0);
    for r in [1.25, 1.5, 1.75] {
        let curve = quality_curve(&tm, r, alpha, chi, 101)?;
        let k = *curve.kappa.last().unwrap();
        let end = *curve.t.last().unwrap();
        c.holds(
            &format!("kappa(T({r})) == 0 at t = {end} (got {k:e})"),
            k == 0.0 && end == curve.cutoff,
        );
    }
    for r in [1.0, 1.25, 1.5] {
        let target = (chi / r).sqrt();
        c.close(
            &format!("plateau limit r={r}"),
            kappa_plateau(r, alpha, chi),
            target,
            1e-12,
        );
        c.close(
            &format!("kappa at T-t=50, r={r}"),
            kappa(50.0, r, alpha, chi)?,
            target,
            1e-4,
        );
    }
    let mut worst = 0.0f64;
    for a in [0.5, 1.0, 2.0, 3.0, 4.5] {
        for b in [1.5, 2.0, 3.0, 5.5] {
            for z in [0.0, 0.5, 2.0, 8.0, 20.0] {
                let want = kummer_terms(a, b, z, 200);
                let got = kummer_1f1(a, b, z)?;
                worst = worst.max((got - want).abs() / want.abs().max(1.0));
            }
        }
    }
    c.at_most("1F1 vs 200-term sum, 100 points (relative)", worst, 1e-10);
    let (_, law) = leading_law()?;
    let base = build_menu(&tm, &law, chi, 401)?;
    let ext = extended_menu(&tm, &ValuationProfile::unit(), &law, chi, 401)?;
    let identical = base.entries.len() == ext.entries.len()
        && base.entries.iter().zip(&ext.entries).all(|(x, y)| {
            x.r.to_bits() == y.r.to_bits()
                && x.cutoff.to_bits() == y.cutoff.to_bits()
                && x.cap_tokens.to_bits() == y.cap_tokens.to_bits()
                && x.price.to_bits() == y.price.to_bits()
                && x.utility.to_bits() == y.utility.to_bits()
        });
    c.holds(
        "extended menu with q = 1 is bit-identical to the base menu",
        identical,
    );
    Ok(())
}

fn main() -> ExitCode {
    let results = [
        criterion(1, "leading-example revenue", c1),
        criterion(2, "baseline revenues and ratios", c2),
        criterion(3, "closed-form prices", c3),
        criterion(4, "greedy skeleton of the asymmetric prior", c4),
        criterion(5, "capacity audits", c5),
        criterion(6, "stopping law against simulation", c6),
        criterion(7, "first-order certificate", c7),
        criterion(8, "oracle sandwich", c8),
        criterion(9, "incentive compatibility and participation", c9),
        criterion(10, "extensions", c10),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
