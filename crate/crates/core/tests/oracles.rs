//! Library outputs against closed forms and independent numerical oracles
//! written out in the test code.

use token_screen::baselines::minimal_delay;
use token_screen::extensions::{kappa, kummer_1f1, kummer_1f1_scaled};
use token_screen::prelude::*;
use token_screen::quad::exp_integral_e1;
use token_screen::scenarios;
use token_screen::screening::{token_cap, virtual_preference};

/// Composite Simpson with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(a + k as f64 * h);
    }
    s * h / 3.0
}

fn leading_law() -> (GreedySkeleton, StoppingLaw) {
    let sk = scenarios::leading().skeleton().unwrap();
    let law = stopping_law(&sk, sk.default_horizon()).unwrap();
    (sk, law)
}

#[test]
fn shannon_divergence_is_kl() {
    let h = EntropyModel::shannon();
    let p = Belief::new(vec![0.2, 0.5, 0.3]).unwrap();
    let q = Belief::new(vec![0.6, 0.1, 0.3]).unwrap();
    let kl: f64 = p
        .probs()
        .iter()
        .zip(q.probs())
        .map(|(a, b)| a * (a / b).ln())
        .sum();
    assert!((h.bregman(&p, &q).unwrap().value() - kl).abs() < 1e-14);
    let to_vertices = h.vertex_divergences(&q).unwrap();
    for (d, m) in to_vertices.iter().zip(q.probs()) {
        assert!((d + m.ln()).abs() < 1e-14);
    }
}

#[test]
fn quadratic_divergence_to_vertices() {
    // H(μ) = (μ − 1/2)², so D(e|μ) = (e − μ)².
    let h = EntropyModel::quadratic_binary(2.0);
    let mu = Belief::binary(0.7).unwrap();
    let d = h.vertex_divergences(&mu).unwrap();
    assert!((d[0] - 0.49).abs() < 1e-14, "{d:?}");
    assert!((d[1] - 0.09).abs() < 1e-14, "{d:?}");
}

#[test]
fn e1_against_substituted_integral() {
    for x in [0.05, 0.5, 1.5, 4.0, 12.0] {
        // E1(x) = ∫_0^1 e^{−x/s}/s ds
        let want = simpson(
            |s| if s == 0.0 { 0.0 } else { (-x / s).exp() / s },
            0.0,
            1.0,
            400_000,
        );
        let got = exp_integral_e1(x);
        assert!(
            (got - want).abs() < 1e-9 * want.max(1.0),
            "x={x}: {got} vs {want}"
        );
    }
}

#[test]
fn symmetric_law_is_exponential() {
    let (sk, law) = leading_law();
    assert!((sk.stationary().hazard - 0.5).abs() < 1e-12);
    for t in [0.0f64, 0.3, 1.0, 4.0, 15.0, 60.0] {
        let want = 1.0 - (-0.5 * t).exp();
        assert!((law.cdf(t) - want).abs() < 1e-10, "t={t}");
        assert!((law.cdf_state(0, t) - 0.5 * want).abs() < 1e-10);
        assert!((law.density(t) - 0.5 * (-0.5 * t).exp()).abs() < 1e-10);
    }
}

#[test]
fn discounted_payoff_closed_form() {
    let (_, law) = leading_law();
    for r in [0.1, 1.0, 3.0] {
        let got = expected_payoff(&law, &Payoff::discount(r));
        assert!((got - 0.5 / (r + 0.5)).abs() < 1e-10, "r={r}");
    }
    // E[τ e^{−τ}] = λ/(1+λ)² with λ = 1/2
    let got = expected_payoff(&law, &Payoff::time_weighted_discount(1.0));
    assert!((got - 0.5 / 2.25).abs() < 1e-10);
}

#[test]
fn asymmetric_law_against_quadrature_of_the_skeleton() {
    // F(t) = ∫_0^t h(s) e^{−∫_0^s h} ds with the skeleton hazard.
    let sk = scenarios::asymmetric().skeleton().unwrap();
    let law = stopping_law(&sk, sk.default_horizon()).unwrap();
    for t in [0.1, 0.36, 1.0, 3.0] {
        let survival = |s: f64| (-simpson(|u| sk.hazard_at(u), 0.0, s, 2000)).exp();
        let want = 1.0 - survival(t);
        assert!(
            (law.cdf(t) - want).abs() < 1e-7,
            "t={t}: {} vs {want}",
            law.cdf(t)
        );
    }
}

#[test]
fn minimal_constant_delay() {
    let s = scenarios::leading();
    let t = minimal_delay(&s.entropy, &s.prior, s.chi).unwrap();
    // H(e) − H(μ0) = 1/4 spent at rate 1/8
    assert!((t - 2.0).abs() < 1e-12);
}

#[test]
fn uniform_cutoffs_and_caps() {
    let tm = TypeModel::uniform(1.0, 2.0).unwrap();
    for r in [1.1, 1.5, 2.0] {
        let vp = virtual_preference(&tm, r).unwrap();
        assert!((vp.cutoff - 1.0 / (r - 1.0)).abs() < 1e-12);
        assert!((vp.payoff.value(0.0) - 1.0).abs() < 1e-15);
        assert!(vp.payoff.value(vp.cutoff).abs() < 1e-14);
        let cap = token_cap(&tm, 0.125, r).unwrap();
        assert!((cap - 0.125 / (r - 1.0)).abs() < 1e-12);
    }
    assert!(virtual_preference(&tm, 1.0).unwrap().cutoff.is_infinite());
    assert!(matches!(
        virtual_preference(&tm, 2.5),
        Err(Error::TypeOutOfSupport { .. })
    ));
}

#[test]
fn revenue_closed_form() {
    let (_, law) = leading_law();
    let tm = TypeModel::uniform(1.0, 2.0).unwrap();
    let menu = build_menu(&tm, &law, 0.125, 401).unwrap();
    let want = 0.2 * (1.0 - (-2.5f64).exp()) + 0.5 * (-1.0f64).exp() * exp_integral_e1(1.5);
    assert!((menu_revenue(&menu, &tm) - want).abs() < 1e-8);
}

#[test]
fn price_against_direct_rent_integral() {
    // P(r) = U(r|r) − ∫_r^r̄ −∂_s U(s|s') ds with U(s|r') = E[e^{−sτ}; τ ≤ T(r')].
    let (_, law) = leading_law();
    let tm = TypeModel::uniform(1.0, 2.0).unwrap();
    let u = |s: f64, cut: f64| {
        // λ/(s+λ)·(1 − e^{−(s+λ)T}) with λ = 1/2
        0.5 / (s + 0.5) * (1.0 - (-(s + 0.5) * cut).exp())
    };
    let du_ds = |s: f64, cut: f64| {
        let k = s + 0.5;
        -0.5 / (k * k) * (1.0 - (-k * cut).exp()) + 0.5 / k * cut * (-k * cut).exp()
    };
    for r in [1.2, 1.5, 1.8] {
        let rent = simpson(|s| -du_ds(s, 1.0 / (s - 1.0)), r, 2.0, 20_000);
        let want = u(r, 1.0 / (r - 1.0)) - rent;
        let got = price(&tm, &law, r).unwrap();
        assert!((got - want).abs() < 1e-9, "r={r}: {got} vs {want}");
    }
}

#[test]
fn baseline_closed_forms() {
    let s = scenarios::leading();
    let tm = TypeModel::uniform(1.0, 2.0).unwrap();
    let cd = constant_delay_solution(&tm, &s.entropy, &s.prior, s.chi, 201).unwrap();
    assert!((cd.t_min - 2.0).abs() < 1e-12);
    assert!((cd.screen.revenue - 0.5 * (-3.0f64).exp()).abs() < 1e-9);
    let df = diffusion_solution(&tm, s.chi, 201).unwrap();
    let cosh = 0.5 * ((2.0 * 2f64.sqrt()).exp() + (-2.0 * 2f64.sqrt()).exp());
    assert!((df.screen.revenue - 1.0 / cosh).abs() < 1e-9);
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

#[test]
fn kummer_series_region() {
    for a in [0.3, 1.0, 2.5, 3.0] {
        for b in [0.5, 1.0, 4.0] {
            for z in [0.0, 0.1, 3.0, 15.0, 35.0] {
                let want = kummer_terms(a, b, z, 400);
                let got = kummer_1f1(a, b, z).unwrap();
                assert!(
                    (got - want).abs() <= 1e-11 * want.abs().max(1.0),
                    "({a},{b},{z})"
                );
            }
        }
    }
}

#[test]
fn kummer_asymptotic_region_against_integral() {
    // e^{−z}·₁F₁(a; a+1; z) = a ∫_0^1 t^{a−1} e^{−z(1−t)} dt
    for a in [2.0, 3.0, 4.5] {
        for z in [40.0, 60.0, 100.0, 400.0] {
            let want = a * simpson(
                |t| t.powf(a - 1.0) * (-z * (1.0 - t)).exp(),
                0.0,
                1.0,
                200_000,
            );
            let got = kummer_1f1_scaled(a, a + 1.0, z).unwrap();
            assert!(
                (got - want).abs() < 1e-10 * want,
                "a={a} z={z}: {got} vs {want}"
            );
        }
    }
    // ₁F₁(1; 2; z) = (e^z − 1)/z
    let z: f64 = 120.0;
    let got = kummer_1f1(1.0, 2.0, z).unwrap();
    assert!((got / (z.exp_m1() / z) - 1.0).abs() < 1e-12);
}

#[test]
fn kappa_against_integral_form() {
    // κ^α = αχ/((α−1)(α+1)) · u · (α+1) ∫_0^1 t^α e^{−αru(1−t)} dt
    let (chi, alpha) = (0.125, 2.0);
    for (u, r) in [(0.5, 1.5), (4.0, 1.25), (50.0, 1.0)] {
        let integral = simpson(
            |t| t.powf(alpha) * (-alpha * r * u * (1.0 - t)).exp(),
            0.0,
            1.0,
            100_000,
        );
        let want = (alpha * chi / (alpha - 1.0) * u * integral).powf(1.0 / alpha);
        let got = kappa(u, r, alpha, chi).unwrap();
        assert!((got - want).abs() < 1e-9, "u={u} r={r}: {got} vs {want}");
    }
}

#[test]
fn simulated_first_phase_matches_law() {
    let sk = scenarios::asymmetric().skeleton().unwrap();
    let law = stopping_law(&sk, sk.default_horizon()).unwrap();
    let n = 40_000;
    let sim = simulate_paths(&sk, n, 7, law.horizon(), &[]).unwrap();
    assert!(sim.ks_distance(&law) < 1.63 / (n as f64).sqrt());
    for i in 0..2 {
        let f = law.cdf_state(i, 0.36);
        let sd = (f * (1.0 - f) / n as f64).sqrt();
        assert!((sim.empirical_cdf_state(i, 0.36) - f).abs() < 4.0 * sd + 1e-12);
    }
}
