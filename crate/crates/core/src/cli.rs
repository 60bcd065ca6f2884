//! Command-line front end: configuration, orchestration, and artifact writers.
//!
//! Exit codes: 0 success, 1 validation failure, 2 numerical-certificate
//! failure, 3 configuration error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::baselines::{constant_delay_solution, diffusion_solution};
use crate::entropy::{Belief, EntropyModel};
use crate::extensions::{
    extended_menu, figure_curves, quality_curve, QualityCurve, ValuationProfile, FIGURE_TYPES,
};
use crate::greedy::{build_skeleton, GreedySkeleton, SkeletonOptions};
use crate::payoff::Payoff;
use crate::quad::exp_integral_e1;
use crate::screening::{
    build_menu_tol, menu_revenue, price, virtual_preference, virtual_surplus_revenue, TokenMenu,
    TypeModel, QUAD_TOL,
};
use crate::stopping::{capacity_audit, expected_payoff, simulate_paths, stopping_law, StoppingLaw};
use crate::verify::{
    foc_check, foc_multiplier, ic_audit, oracle_grid, oracle_upper_bound, supermodularity_audit,
};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_CERTIFICATE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EntropySpec {
    Shannon,
    QuadraticBinary {
        #[serde(default = "default_alpha")]
        alpha: f64,
    },
}

fn default_alpha() -> f64 {
    2.0
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TypeSpec {
    Uniform { low: f64, high: f64 },
    Tabulated { knots: Vec<f64>, cdf: Vec<f64> },
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Grids {
    /// Upper bound on the skeleton step.
    pub max_step: f64,
    pub type_points: usize,
    /// Fixed horizon; `null` uses `t̂^K + 20/h_K`.
    pub horizon: Option<f64>,
    pub oracle_points: usize,
    pub oracle_stretch: f64,
}

impl Default for Grids {
    fn default() -> Self {
        Self {
            max_step: 1e-3,
            type_points: 401,
            horizon: None,
            oracle_points: 200,
            oracle_stretch: 6.0,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub iso: f64,
    pub cap: f64,
    pub event: f64,
    pub foc: f64,
    pub ic: f64,
    pub oracle_gap: f64,
    /// Absolute budget of the rent and revenue quadratures.
    pub quadrature: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            iso: 1e-7,
            cap: 1e-7,
            event: 1e-10,
            foc: 1e-7,
            ic: 1e-6,
            oracle_gap: 0.02,
            quadrature: QUAD_TOL,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub entropy: EntropySpec,
    pub prior: Vec<f64>,
    pub chi: f64,
    pub types: TypeSpec,
    #[serde(default)]
    pub grids: Grids,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: u64,
    /// Directory for artifacts whose `--out` is relative; defaults to the working directory.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    /// Configuration of the leading example.
    pub fn leading() -> Self {
        Self {
            version: SCHEMA_VERSION,
            entropy: EntropySpec::QuadraticBinary { alpha: 2.0 },
            prior: vec![0.5, 0.5],
            chi: 0.125,
            types: TypeSpec::Uniform {
                low: 1.0,
                high: 2.0,
            },
            grids: Grids::default(),
            tolerances: Tolerances::default(),
            seed: 0,
            output_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let inner = e.inner();
            Error::Config(format!(
                "at `{}` (line {}, column {}): {inner}",
                e.path(),
                inner.line(),
                inner.column()
            ))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let field = |name: &str, msg: String| Err(Error::Config(format!("at `{name}`: {msg}")));
        if self.version != SCHEMA_VERSION {
            return field(
                "version",
                format!(
                    "unsupported schema version {}, expected {SCHEMA_VERSION}",
                    self.version
                ),
            );
        }
        if !(self.chi > 0.0 && self.chi.is_finite()) {
            return field("chi", format!("must be positive, got {}", self.chi));
        }
        if let Err(e) = Belief::new(self.prior.clone()) {
            return field("prior", e.to_string());
        }
        if let EntropySpec::QuadraticBinary { alpha } = self.entropy {
            if !(alpha > 1.0) {
                return field("entropy.alpha", format!("must exceed 1, got {alpha}"));
            }
        }
        if let Err(e) = self.type_model() {
            return field("types", e.to_string());
        }
        if !(self.grids.max_step > 0.0) {
            return field("grids.max_step", "must be positive".into());
        }
        if self.grids.type_points < 2 {
            return field("grids.type_points", "must be at least 2".into());
        }
        if self.grids.oracle_points < 2 {
            return field("grids.oracle_points", "must be at least 2".into());
        }
        if let Some(h) = self.grids.horizon {
            if !(h > 0.0) {
                return field("grids.horizon", format!("must be positive, got {h}"));
            }
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("tolerances.iso", t.iso),
            ("tolerances.cap", t.cap),
            ("tolerances.event", t.event),
            ("tolerances.foc", t.foc),
            ("tolerances.ic", t.ic),
            ("tolerances.oracle_gap", t.oracle_gap),
            ("tolerances.quadrature", t.quadrature),
        ] {
            if !(v > 0.0) {
                return field(name, format!("must be positive, got {v}"));
            }
        }
        Ok(())
    }

    pub fn entropy_model(&self) -> EntropyModel {
        match self.entropy {
            EntropySpec::Shannon => EntropyModel::shannon(),
            EntropySpec::QuadraticBinary { alpha } => EntropyModel::quadratic_binary(alpha),
        }
    }

    pub fn belief(&self) -> Result<Belief> {
        Belief::new(self.prior.clone())
    }

    pub fn type_model(&self) -> Result<TypeModel> {
        match &self.types {
            TypeSpec::Uniform { low, high } => TypeModel::uniform(*low, *high),
            TypeSpec::Tabulated { knots, cdf } => TypeModel::tabulated(knots.clone(), cdf.clone()),
        }
    }

    pub fn skeleton_options(&self) -> SkeletonOptions {
        SkeletonOptions {
            max_step: self.grids.max_step,
            iso_tol: self.tolerances.iso,
            event_tol: self.tolerances.event,
            ..SkeletonOptions::default()
        }
    }

    pub fn skeleton(&self) -> Result<GreedySkeleton> {
        build_skeleton(
            &self.entropy_model(),
            &self.belief()?,
            self.chi,
            &self.skeleton_options(),
        )
    }

    pub fn horizon(&self, sk: &GreedySkeleton) -> f64 {
        self.grids.horizon.unwrap_or_else(|| sk.default_horizon())
    }

    fn resolve(&self, out: &Path) -> PathBuf {
        match &self.output_dir {
            Some(dir) if out.is_relative() => dir.join(out),
            _ => out.to_path_buf(),
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "token-screen",
    version,
    about = "Greedy exploration laws and token price menus"
)]
pub struct Cli {
    /// Worker threads for parallel stages (output is identical for any count).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct ConfigArg {
    /// Run configuration (JSON); the leading example when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Greedy skeleton. CSV columns: t, k, mu_<i>..., beta_<i>..., zeta.
    Skeleton {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Stopping law with capacity slack. CSV columns: t, F_<i>..., f, slack.
    Law {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo paths. CSV columns: path, state, time (state -1 and time inf if censored).
    Simulate {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        /// Overrides the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Token menu. CSV columns: r, T, cap_tokens, price, marginal_price, utility, net_utility.
    Menu {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Revenue report (JSON on stdout).
    Revenue {
        #[command(flatten)]
        cfg: ConfigArg,
    },
    /// Constant-delay and diffusion benchmarks (JSON on stdout).
    Baselines {
        #[command(flatten)]
        cfg: ConfigArg,
    },
    /// Optimality and incentive certificates (JSON).
    Verify {
        #[command(flatten)]
        cfg: ConfigArg,
        /// Discount rate of the certified payoff `e^{-rt}`.
        #[arg(long, default_value_t = 1.0)]
        rate: f64,
        /// Audit this law CSV (columns t, F_<i>...) for capacity instead of the greedy law.
        #[arg(long)]
        law: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reasoning-quality boundaries. CSV columns: t, kappa, upper, lower (prefixed by r with --figure).
    Quality {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long, default_value_t = 2.0)]
        alpha: f64,
        #[arg(long, default_value_t = 201)]
        points: usize,
        /// All types of the figure in long format.
        #[arg(long)]
        figure: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Menu under a valuation profile such as "1", "exp(-r)", "r^2". Same columns as `menu`.
    ExtendedMenu {
        #[command(flatten)]
        cfg: ConfigArg,
        #[arg(long)]
        valuation: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recomputes the reference numbers of a worked example with pass/fail checks.
    Reproduce {
        #[arg(long, default_value = "leading")]
        example: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Outcome of one invocation.
#[derive(Debug)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Self {
            code: EXIT_OK,
            stdout,
        }
    }
}

/// Formats with 17 significant digits; infinities as `inf`/`-inf`.
pub fn num(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}

fn json_num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(num(x))
    }
}

fn load_config(arg: &ConfigArg) -> Result<RunConfig> {
    match &arg.config {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::leading()),
    }
}

fn write_csv(
    path: &Path,
    header: &[String],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::File::create(path)?;
    writeln!(
        f,
        "{}",
        serde_json::to_string_pretty(v).expect("json values serialize")
    )?;
    Ok(())
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json values serialize") + "\n"
}

fn indexed(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}_{i}")).collect()
}

/// Node rows of every transient phase, then the stationary belief at its start and at `horizon`.
fn skeleton_rows(sk: &GreedySkeleton, horizon: f64) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    let entropy = sk.entropy();
    let zeta_of = |mu: &[f64]| {
        entropy
            .vertex_divergences_raw(mu)
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    };
    for p in sk.phases() {
        for nd in &p.nodes {
            let mut row = vec![num(nd.t), p.index.to_string()];
            row.extend(nd.belief.iter().map(|&x| num(x)));
            row.extend(nd.rates.iter().map(|&x| num(x)));
            row.push(num(zeta_of(&nd.belief)));
            rows.push(row);
        }
    }
    let st = sk.stationary();
    let k = (sk.phases().len() + 1).to_string();
    for t in [st.start, horizon] {
        let mut row = vec![num(t), k.clone()];
        row.extend(st.belief.probs().iter().map(|&x| num(x)));
        row.extend(st.rates.iter().map(|&x| num(x)));
        row.push(num(zeta_of(st.belief.probs())));
        rows.push(row);
    }
    rows
}

fn menu_rows(menu: &TokenMenu) -> Vec<Vec<String>> {
    menu.entries
        .iter()
        .map(|e| {
            vec![
                num(e.r),
                num(e.cutoff),
                num(e.cap_tokens),
                num(e.price),
                num(e.marginal_price),
                num(e.utility),
                num(e.net_utility),
            ]
        })
        .collect()
}

const MENU_HEADER: [&str; 7] = [
    "r",
    "T",
    "cap_tokens",
    "price",
    "marginal_price",
    "utility",
    "net_utility",
];

fn greedy_law(cfg: &RunConfig) -> Result<(GreedySkeleton, StoppingLaw)> {
    let sk = cfg.skeleton()?;
    let law = stopping_law(&sk, cfg.horizon(&sk))?;
    Ok((sk, law))
}

fn read_law_csv(path: &Path, prior: &Belief) -> Result<StoppingLaw> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let n = prior.dim();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::DegenerateInput(format!("law CSV lacks column {name}")))
    };
    let t_col = col("t")?;
    let f_cols = (0..n)
        .map(|i| col(&format!("F_{i}")))
        .collect::<Result<Vec<_>>>()?;
    let parse = |s: &str| -> Result<f64> {
        match s.trim() {
            "inf" => Ok(f64::INFINITY),
            "-inf" => Ok(f64::NEG_INFINITY),
            v => v
                .parse::<f64>()
                .map_err(|_| Error::DegenerateInput(format!("not a number in law CSV: {v:?}"))),
        }
    };
    let mut times = Vec::new();
    let mut cdf = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        times.push(parse(&rec[t_col])?);
        cdf.push(
            f_cols
                .iter()
                .map(|&c| parse(&rec[c]))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    StoppingLaw::from_table(prior, &times, &cdf)
}

fn revenue_report(cfg: &RunConfig) -> Result<Value> {
    let tm = cfg.type_model()?;
    let (_, law) = greedy_law(cfg)?;
    let menu = build_menu_tol(
        &tm,
        &law,
        cfg.chi,
        cfg.grids.type_points,
        cfg.tolerances.quadrature,
    )?;
    let revenue = menu_revenue(&menu, &tm);
    let surplus = virtual_surplus_revenue(&menu, &tm);
    let base = baselines_report(cfg)?;
    let cd = base["constant_delay"]["revenue"].as_f64();
    let df = base["diffusion"]["revenue"].as_f64();
    Ok(json!({
        "revenue": revenue,
        "revenue_virtual_surplus": surplus,
        "baseline_constant_delay": cd,
        "baseline_diffusion": df,
        "ratios": {
            "constant_delay": cd.map(|c| revenue / c),
            "diffusion": df.map(|d| revenue / d),
        }
    }))
}

fn baselines_report(cfg: &RunConfig) -> Result<Value> {
    let tm = cfg.type_model()?;
    let prior = cfg.belief()?;
    let cd = constant_delay_solution(
        &tm,
        &cfg.entropy_model(),
        &prior,
        cfg.chi,
        cfg.grids.type_points,
    )?;
    let cd_json = json!({
        "t_min": cd.t_min,
        "price": cd.screen.prices.first().copied(),
        "cutoff": cd.screen.participation_cutoff(),
        "revenue": cd.screen.revenue,
    });
    // the diffusion family is defined for a binary state under the quadratic-variation budget
    let quadratic = matches!(cfg.entropy, EntropySpec::QuadraticBinary { alpha } if alpha == 2.0);
    let df_json = if quadratic && prior.dim() == 2 {
        let df = diffusion_solution(&tm, cfg.chi, cfg.grids.type_points)?;
        json!({
            "sigma": df.screen.allocation.first().copied().flatten(),
            "sigma_max": df.sigma_max,
            "price": df.screen.prices.first().copied(),
            "revenue": df.screen.revenue,
        })
    } else {
        Value::Null
    };
    Ok(json!({ "constant_delay": cd_json, "diffusion": df_json }))
}

fn verify_report(cfg: &RunConfig, rate: f64) -> Result<(Value, bool)> {
    let tm = cfg.type_model()?;
    let prior = cfg.belief()?;
    let entropy = cfg.entropy_model();
    let (sk, law) = greedy_law(cfg)?;
    let tol = &cfg.tolerances;
    let rho = Payoff::discount(rate);
    let horizon = cfg.horizon(&sk);
    let mp = foc_multiplier(&sk, &rho, horizon)?;
    let foc = foc_check(&sk, &law, &mp, &rho)?;
    let greedy_value = expected_payoff(&law, &rho);
    let grid = oracle_grid(
        horizon,
        cfg.grids.oracle_points,
        cfg.grids.oracle_stretch,
        &[],
    );
    let oracle = oracle_upper_bound(&rho, &entropy, &prior, cfg.chi, &grid)?;
    let gap = oracle.value / greedy_value - 1.0;
    let audit = capacity_audit(&law, &entropy, &prior, cfg.chi)?;
    let menu = build_menu_tol(
        &tm,
        &law,
        cfg.chi,
        cfg.grids.type_points,
        cfg.tolerances.quadrature,
    )?;
    let ic = ic_audit(&menu, &tm);
    let supermod = supermodularity_audit(&menu, &tm);
    let foc_ok = foc.passes(tol.foc);
    let oracle_ok = gap >= -1e-9 && gap <= tol.oracle_gap;
    let ic_ok = ic.passes(tol.ic, 1e-8);
    let cap_ok = audit.max_abs_slack() <= tol.cap;
    let all = foc_ok && oracle_ok && ic_ok && cap_ok && supermod >= -1e-9;
    let v = json!({
        "foc": {
            "max_excess": foc.max_excess,
            "max_active_gap": foc.max_active_gap,
            "min_lambda": foc.min_lambda,
            "slackness": foc.slackness,
            "ode_residual": mp.ode_residual(),
            "passes": foc_ok,
        },
        "oracle": {
            "bound": oracle.value,
            "greedy": greedy_value,
            "iterations": oracle.iterations,
            "cuts": oracle.cuts,
            "max_violation": oracle.max_violation,
            "passes": oracle_ok,
        },
        "oracle_gap": gap,
        "capacity_max_abs_slack": audit.max_abs_slack(),
        "ic_max_gain": ic.max_gain,
        "ic_argmax": [ic.argmax.0, ic.argmax.1],
        "ir_min_slack": ic.min_ir_slack,
        "ir_top": ic.ir_top,
        "supermodularity_min": supermod,
        "passes": all,
    });
    Ok((v, all))
}

#[derive(Serialize)]
struct Check {
    name: String,
    value: f64,
    target: f64,
    tolerance: f64,
    pass: bool,
}

fn check(name: impl Into<String>, value: f64, target: f64, tolerance: f64) -> Check {
    Check {
        name: name.into(),
        value,
        target,
        tolerance,
        pass: (value - target).abs() <= tolerance,
    }
}

fn reproduce_leading() -> Result<(Value, bool)> {
    let cfg = RunConfig::leading();
    let tm = cfg.type_model()?;
    let prior = cfg.belief()?;
    let entropy = cfg.entropy_model();
    let (sk, law) = greedy_law(&cfg)?;
    let mut checks = Vec::new();

    let cd = constant_delay_solution(&tm, &entropy, &prior, cfg.chi, cfg.grids.type_points)?;
    checks.push(check("constant_delay.t_min", cd.t_min, 2.0, 1e-12));
    checks.push(check(
        "constant_delay.price",
        cd.screen.prices[0],
        (-3.0f64).exp(),
        1e-12,
    ));
    checks.push(check(
        "constant_delay.revenue",
        cd.screen.revenue,
        0.5 * (-3.0f64).exp(),
        1e-6,
    ));
    let df = diffusion_solution(&tm, cfg.chi, cfg.grids.type_points)?;
    let sigma = df.screen.allocation[0].unwrap_or(f64::NAN);
    checks.push(check(
        "diffusion.sigma",
        sigma,
        1.0 / (2.0 * 2f64.sqrt()),
        1e-12,
    ));
    checks.push(check(
        "diffusion.revenue",
        df.screen.revenue,
        crate::baselines::sech(2.0 * 2f64.sqrt()),
        1e-6,
    ));
    checks.push(check("greedy.hazard", sk.stationary().hazard, 0.5, 1e-12));
    for &r in &[1.25, 1.5, 2.0] {
        let t = virtual_preference(&tm, r)?.cutoff;
        checks.push(check(format!("cutoff.T({r})"), t, 1.0 / (r - 1.0), 1e-12));
    }
    for k in 1..=10 {
        let r = 1.0 + 0.1 * k as f64;
        let closed = (3.0 + 2.0 * (-2.5f64).exp() - 5.0 * (-(r + 0.5) / (r - 1.0)).exp()) / 15.0;
        checks.push(check(
            format!("price.P({r:.1})"),
            price(&tm, &law, r)?,
            closed,
            1e-6,
        ));
    }
    let menu = build_menu_tol(
        &tm,
        &law,
        cfg.chi,
        cfg.grids.type_points,
        cfg.tolerances.quadrature,
    )?;
    let revenue = menu_revenue(&menu, &tm);
    let target = 0.2 * (1.0 - (-2.5f64).exp()) + 0.5 * (-1.0f64).exp() * exp_integral_e1(1.5);
    checks.push(check("greedy.revenue", revenue, target, 1e-3));
    let rho = Payoff::discount(1.0);
    let mp = foc_multiplier(&sk, &rho, sk.default_horizon())?;
    let foc = foc_check(&sk, &law, &mp, &rho)?;
    checks.push(Check {
        name: "certificate.foc".into(),
        value: foc.max_excess.max(foc.max_active_gap),
        target: 0.0,
        tolerance: cfg.tolerances.foc,
        pass: foc.passes(cfg.tolerances.foc),
    });
    let ic = ic_audit(&menu, &tm);
    checks.push(Check {
        name: "certificate.ic".into(),
        value: ic.max_gain,
        target: 0.0,
        tolerance: cfg.tolerances.ic,
        pass: ic.passes(cfg.tolerances.ic, 1e-8),
    });
    let all = checks.iter().all(|c| c.pass);
    let v = json!({
        "example": "leading",
        "checks": checks,
        "informational": {
            "revenue_ratio_constant_delay": revenue / cd.screen.revenue,
            "revenue_ratio_diffusion": revenue / df.screen.revenue,
        },
        "passes": all,
    });
    Ok((v, all))
}

fn quality_rows(curve: &QualityCurve, with_r: bool) -> Vec<Vec<String>> {
    (0..curve.t.len())
        .map(|j| {
            let mut row = Vec::with_capacity(5);
            if with_r {
                row.push(num(curve.r));
            }
            row.extend([
                num(curve.t[j]),
                num(curve.kappa[j]),
                num(curve.upper[j]),
                num(curve.lower[j]),
            ]);
            row
        })
        .collect()
}

fn execute(cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::Skeleton { cfg, out } => {
            let cfg = load_config(&cfg)?;
            let sk = cfg.skeleton()?;
            let n = sk.dim();
            let mut header = vec!["t".to_string(), "k".to_string()];
            header.extend(indexed("mu", n));
            header.extend(indexed("beta", n));
            header.push("zeta".into());
            write_csv(
                &cfg.resolve(&out),
                &header,
                skeleton_rows(&sk, cfg.horizon(&sk)),
            )?;
            Ok(Outcome::ok(String::new()))
        }
        Command::Law { cfg, out } => {
            let cfg = load_config(&cfg)?;
            let (_, law) = greedy_law(&cfg)?;
            let audit = capacity_audit(&law, &cfg.entropy_model(), &cfg.belief()?, cfg.chi)?;
            let n = law.dim();
            let mut header = vec!["t".to_string()];
            header.extend(indexed("F", n));
            header.extend(["f".to_string(), "slack".to_string()]);
            let rows = audit.times.iter().zip(&audit.slack).map(|(&t, &s)| {
                let mut row = vec![num(t)];
                row.extend(law.cdf_vec(t).into_iter().map(num));
                row.push(num(law.density(t)));
                row.push(num(s));
                row
            });
            write_csv(&cfg.resolve(&out), &header, rows)?;
            Ok(Outcome::ok(String::new()))
        }
        Command::Simulate {
            cfg,
            paths,
            seed,
            out,
        } => {
            let cfg = load_config(&cfg)?;
            let (sk, law) = greedy_law(&cfg)?;
            let seed = seed.unwrap_or(cfg.seed);
            let sim = simulate_paths(&sk, paths, seed, law.horizon(), &[1.0, 5.0, 10.0])?;
            let rows = (0..sim.n_paths()).map(|p| {
                vec![
                    p.to_string(),
                    sim.stop_states[p].map_or("-1".to_string(), |s| s.to_string()),
                    num(sim.stop_times[p]),
                ]
            });
            write_csv(
                &cfg.resolve(&out),
                &["path".into(), "state".into(), "time".into()],
                rows,
            )?;
            let summary = json!({
                "paths": sim.n_paths(),
                "seed": seed,
                "ks_distance": sim.ks_distance(&law),
                "ks_threshold_1pct": 1.63 / (sim.n_paths() as f64).sqrt(),
                "state_frequencies": sim.state_frequencies(sk.dim()),
                "checkpoints": sim.checkpoints,
                "mean_belief": sim.mean_belief,
                "bound_violations": sim.bound_violations,
            });
            Ok(Outcome::ok(pretty(&summary)))
        }
        Command::Menu { cfg, out } => {
            let cfg = load_config(&cfg)?;
            let tm = cfg.type_model()?;
            let (_, law) = greedy_law(&cfg)?;
            let menu = build_menu_tol(
                &tm,
                &law,
                cfg.chi,
                cfg.grids.type_points,
                cfg.tolerances.quadrature,
            )?;
            let header: Vec<String> = MENU_HEADER.iter().map(|s| s.to_string()).collect();
            write_csv(&cfg.resolve(&out), &header, menu_rows(&menu))?;
            Ok(Outcome::ok(String::new()))
        }
        Command::Revenue { cfg } => {
            let cfg = load_config(&cfg)?;
            Ok(Outcome::ok(pretty(&revenue_report(&cfg)?)))
        }
        Command::Baselines { cfg } => {
            let cfg = load_config(&cfg)?;
            Ok(Outcome::ok(pretty(&baselines_report(&cfg)?)))
        }
        Command::Verify {
            cfg,
            rate,
            law,
            out,
        } => {
            let cfg = load_config(&cfg)?;
            if let Some(path) = law {
                let prior = cfg.belief()?;
                let law = read_law_csv(&path, &prior)?;
                let audit = capacity_audit(&law, &cfg.entropy_model(), &prior, cfg.chi)?;
                let (t, s) = audit.min_slack();
                let feasible = audit.feasible(cfg.tolerances.cap);
                let first = audit
                    .times
                    .iter()
                    .zip(&audit.slack)
                    .find(|(_, &sl)| sl < -cfg.tolerances.cap)
                    .map(|(&t, _)| t);
                let v = json!({
                    "capacity": {
                        "feasible": feasible,
                        "min_slack": s,
                        "min_slack_at": json_num(t),
                        "first_violation_at": first.map_or(Value::Null, json_num),
                    }
                });
                if let Some(o) = out {
                    write_json(&cfg.resolve(&o), &v)?;
                }
                let mut stdout = pretty(&v);
                if !feasible {
                    stdout.push_str(&format!(
                        "capacity constraint violated from t = {} (worst slack {} at t = {})\n",
                        num(first.unwrap_or(t)),
                        num(s),
                        num(t)
                    ));
                }
                return Ok(Outcome {
                    code: if feasible { EXIT_OK } else { EXIT_CERTIFICATE },
                    stdout,
                });
            }
            let (v, ok) = verify_report(&cfg, rate)?;
            if let Some(o) = out {
                write_json(&cfg.resolve(&o), &v)?;
            }
            Ok(Outcome {
                code: if ok { EXIT_OK } else { EXIT_CERTIFICATE },
                stdout: pretty(&v),
            })
        }
        Command::Quality {
            cfg,
            r,
            alpha,
            points,
            figure,
            out,
        } => {
            let cfg = load_config(&cfg)?;
            let tm = cfg.type_model()?;
            if figure {
                let curves = figure_curves(&tm, &FIGURE_TYPES, alpha, cfg.chi, points)?;
                let header: Vec<String> = ["r", "t", "kappa", "upper", "lower"]
                    .iter()
                    .map(|s| s.to_string())
                    .collect();
                let rows = curves.iter().flat_map(|c| quality_rows(c, true));
                write_csv(&cfg.resolve(&out), &header, rows)?;
            } else {
                let r = r.ok_or_else(|| Error::Config("quality needs --r or --figure".into()))?;
                let curve = quality_curve(&tm, r, alpha, cfg.chi, points)?;
                let header: Vec<String> = ["t", "kappa", "upper", "lower"]
                    .iter()
                    .map(|s| s.to_string())
                    .collect();
                write_csv(&cfg.resolve(&out), &header, quality_rows(&curve, false))?;
            }
            Ok(Outcome::ok(String::new()))
        }
        Command::ExtendedMenu {
            cfg,
            valuation,
            out,
        } => {
            let cfg = load_config(&cfg)?;
            let tm = cfg.type_model()?;
            let v: ValuationProfile = valuation
                .parse()
                .map_err(|e| Error::Config(format!("--valuation: {e}")))?;
            let (_, law) = greedy_law(&cfg)?;
            let menu = extended_menu(&tm, &v, &law, cfg.chi, cfg.grids.type_points)?;
            let header: Vec<String> = MENU_HEADER.iter().map(|s| s.to_string()).collect();
            write_csv(&cfg.resolve(&out), &header, menu_rows(&menu))?;
            Ok(Outcome::ok(String::new()))
        }
        Command::Reproduce { example, out } => {
            if example != "leading" {
                return Err(Error::Config(format!(
                    "unknown example {example:?}; available: leading"
                )));
            }
            let (v, ok) = reproduce_leading()?;
            if let Some(o) = out {
                write_json(&o, &v)?;
            }
            Ok(Outcome {
                code: if ok { EXIT_OK } else { EXIT_CERTIFICATE },
                stdout: pretty(&v),
            })
        }
    }
}

/// Maps library errors onto exit codes.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        _ => EXIT_VALIDATION,
    }
}

/// Parses arguments, runs the command, and returns `(exit code, stdout, stderr)`.
pub fn run_with<I, T>(args: I) -> (i32, String, String)
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            return (code, String::new(), e.render().to_string());
        }
    };
    let threads = cli.threads;
    let job = move || execute(cli.command);
    let result = match threads {
        Some(n) => match rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
        {
            Ok(pool) => pool.install(job),
            Err(e) => Err(Error::Config(format!("cannot start {n} threads: {e}"))),
        },
        None => job(),
    };
    match result {
        Ok(o) => (o.code, o.stdout, String::new()),
        Err(e) => (exit_code(&e), String::new(), format!("error: {e}\n")),
    }
}

/// Entry point used by the binary.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let (code, out, err) = run_with(args);
    print!("{out}");
    eprint!("{err}");
    code
}
