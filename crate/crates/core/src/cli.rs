//! Command-line front end: argument parsing, orchestration and CSV output.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::commitment::{self, exit_profile_with, CommitmentSolution, SolveOptions};
use crate::config::{self, load_config_with, Overrides, PricingSpec, RunConfig};
use crate::equilibrium::{self, EquilibriumOutcome};
use crate::error::{Error, Result};
use crate::fixtures;
use crate::model::{validate, Environment};
use crate::numerics::{DEFAULT_GRID_NODES, DEFAULT_TOL_F};
use crate::simulator::{self, Acceptance, CutoffStrategyProfile, Pricing};

#[derive(Debug, Parser)]
#[command(name = "waitmarket", version, about = "Commitment, equilibrium and simulation for posted-price markets with Poisson buyers")]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub grid_nodes: Option<usize>,
    /// Root-finding time tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Monte Carlo runs.
    #[arg(long, global = true)]
    pub runs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the environment's maintained assumptions.
    Validate,
    /// Exit profile, price paths and commitment value.
    SolveCommitment,
    /// Opaque-market equilibrium price, exit times and deviation thresholds.
    SolveEquilibrium,
    /// Monte Carlo runs of the configured cutoff profile.
    Simulate,
    /// Commitment value, equilibrium price and value gap over a parameter range.
    Sweep,
    /// Regenerate a bundled example's tables.
    Reproduce {
        #[arg(value_enum)]
        fixture: Fixture,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Fixture {
    Figure1,
    Figure2,
    AppendixD2,
    AppendixD3,
    EnvA0,
}

/// Process exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Argument(_) | Error::Parse { .. } | Error::Config(_) | Error::InvalidEnvironment(_) => 2,
        _ => 1,
    }
}

/// Machine-readable error record.
pub fn error_record(err: &Error) -> String {
    let mut rec = serde_json::json!({ "error": err.kind(), "message": err.to_string() });
    match err {
        Error::Parse { line, column, .. } => {
            rec["line"] = (*line).into();
            rec["column"] = (*column).into();
        }
        Error::InvalidEnvironment(report) => {
            rec["failed_checks"] = serde_json::json!(report.failed());
            rec["report"] = serde_json::to_value(report.as_ref()).unwrap_or_default();
        }
        _ => {}
    }
    rec.to_string()
}

/// Parses arguments, runs the command, reports errors on stderr; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("{}", error_record(&err));
            exit_code(&err)
        }
    }
}

fn overrides(cli: &Cli) -> Overrides {
    Overrides {
        grid_nodes: cli.grid_nodes,
        tolerance: cli.tol,
        seed: cli.seed,
        runs: cli.runs,
        output_dir: cli.out.clone(),
    }
}

fn load(cli: &Cli, require_valid: bool) -> Result<RunConfig> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config("--config is required for this command".into()))?;
    let ov = overrides(cli);
    if !require_valid {
        // validation is reported, not enforced
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut raw: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Error::Parse { message: e.to_string(), line: e.line(), column: e.column() })?;
        if let Some(obj) = raw.as_object_mut() {
            obj.insert("require_valid".into(), false.into());
        }
        let base = path.parent().unwrap_or(Path::new("."));
        return config::parse_config(&raw.to_string(), base, &ov);
    }
    load_config_with(path, &ov)
}

fn solve_options(cfg: &RunConfig) -> SolveOptions {
    SolveOptions { tol_t: cfg.tolerance, tol_f: DEFAULT_TOL_F }
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Validate => {
            let cfg = load(cli, false)?;
            let report = validate(&cfg.environment)?;
            print!("{report}");
            if !report.passed() {
                return Err(Error::InvalidEnvironment(Box::new(report)));
            }
            Ok(())
        }
        Command::SolveCommitment => {
            let cfg = load(cli, true)?;
            let sol = exit_profile_with(&cfg.environment, solve_options(&cfg))?;
            write_commitment(&cfg.environment, &sol, &cfg.output_dir)
        }
        Command::SolveEquilibrium => {
            let cfg = load(cli, true)?;
            let opts = equilibrium::EquilibriumOptions { search: solve_options(&cfg), ..Default::default() };
            let eq = equilibrium::solve_with(&cfg.environment, opts)?;
            write_equilibrium(&cfg.environment, &eq, &cfg.output_dir)
        }
        Command::Simulate => {
            let cfg = load(cli, true)?;
            simulate_command(&cfg)
        }
        Command::Sweep => {
            let cfg = load(cli, true)?;
            sweep_command(&cfg)
        }
        Command::Reproduce { fixture } => {
            let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            let nodes = cli.grid_nodes.unwrap_or(DEFAULT_GRID_NODES);
            reproduce(*fixture, nodes, cli.seed.unwrap_or(0), cli.runs.unwrap_or(100_000), &out)
        }
    }
}

/// Float formatting: 17 significant digits, '.' separator, locale-independent.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

/// CSV builder with LF line endings.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Self { text }
    }
    pub fn row<S: AsRef<str>>(&mut self, cells: &[S]) {
        let cells: Vec<&str> = cells.iter().map(|c| c.as_ref()).collect();
        let _ = writeln!(self.text, "{}", cells.join(","));
    }
    pub fn floats(&mut self, xs: &[f64]) {
        self.row(&xs.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>());
    }
    pub fn as_str(&self) -> &str {
        &self.text
    }
}

/// Atomic write: temp file in the same directory, then rename.
pub fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Config(format!("cannot create {}: {e}", dir.display())))?;
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let io = |e: std::io::Error| Error::Config(format!("cannot write {}: {e}", target.display()));
    let mut f = std::fs::File::create(&tmp).map_err(io)?;
    f.write_all(contents.as_bytes()).map_err(io)?;
    f.sync_all().map_err(io)?;
    std::fs::rename(&tmp, &target).map_err(io)
}

/// Evenly spaced times on [0, end).
fn time_grid(end: f64, n: usize) -> Vec<f64> {
    if !(end > 0.0) {
        return vec![];
    }
    (0..n).map(|k| end * k as f64 / n as f64).collect()
}

fn write_commitment(env: &Environment, sol: &CommitmentSolution, out: &Path) -> Result<()> {
    let mut exits = Csv::new(&["y", "s_bar"]);
    for (y, s) in sol.grid().nodes().iter().zip(sol.exit_times()) {
        exits.floats(&[*y, *s]);
    }
    write_atomic(out, "exit_profile.csv", exits.as_str())?;
    let y_low = sol.grid().nodes()[0];
    let mut prices = Csv::new(&["t", "p_bar", "p_hat"]);
    for t in time_grid(sol.sup_exit(), 200) {
        let p_bar = commitment::price_revealed(env, t, y_low)?;
        let p_hat = commitment::price_pooled(env, sol, t)?;
        prices.floats(&[t, p_bar, p_hat]);
    }
    write_atomic(out, "prices.csv", prices.as_str())?;
    write_atomic(out, "value.txt", &format!("{}\n", fmt_f64(sol.value())))
}

fn write_equilibrium(env: &Environment, eq: &EquilibriumOutcome, out: &Path) -> Result<()> {
    let mut summary = Csv::new(&["regime", "p_star", "residual"]);
    let mut exits = Csv::new(&["y", "s_star"]);
    let mut thresholds = Csv::new(&["x", "threshold"]);
    match eq {
        EquilibriumOutcome::Interior(sol) => {
            summary.row(&["interior".to_string(), fmt_f64(sol.price), fmt_f64(sol.fixed_point_residual)]);
            for (y, s) in env.grid().nodes().iter().zip(&sol.exit_times) {
                exits.floats(&[*y, *s]);
            }
            for (x, th) in env.signals().values().iter().zip(&sol.deviation_thresholds) {
                thresholds.floats(&[*x, *th]);
            }
        }
        EquilibriumOutcome::AdInfinitum { price } => {
            summary.row(&["ad-infinitum".to_string(), fmt_f64(*price), fmt_f64(0.0)]);
            for y in env.grid().nodes() {
                exits.floats(&[*y, f64::INFINITY]);
            }
        }
    }
    write_atomic(out, "equilibrium_summary.csv", summary.as_str())?;
    write_atomic(out, "equilibrium.csv", exits.as_str())?;
    write_atomic(out, "thresholds.csv", thresholds.as_str())
}

fn simulate_command(cfg: &RunConfig) -> Result<()> {
    let env = &cfg.environment;
    let spec = &cfg.simulation;
    let mut eq_price = None;
    let exits = match spec.exit {
        config::ExitSpec::Optimal => exit_profile_with(env, solve_options(cfg))?.exit_times().to_vec(),
        config::ExitSpec::Equilibrium => match equilibrium::solve(env)? {
            EquilibriumOutcome::Interior(s) => {
                eq_price = Some(s.price);
                s.exit_times
            }
            EquilibriumOutcome::AdInfinitum { .. } => {
                return Err(Error::Precondition("equilibrium exit times are infinite".into()));
            }
        },
        config::ExitSpec::Uniform(e) => vec![e; env.grid().len()],
    };
    let pricing = match &spec.pricing {
        PricingSpec::Revealed => Pricing::Revealed,
        PricingSpec::Pooled => Pricing::Pooled,
        PricingSpec::Constant(p) => Pricing::Constant(*p),
        PricingSpec::Equilibrium => {
            let p = match eq_price {
                Some(p) => p,
                None => equilibrium::solve(env)?.price(),
            };
            Pricing::Constant(p)
        }
    };
    let acceptance = match &spec.acceptance {
        config::AcceptanceSpec::OnlyTop => Acceptance::OnlyTop,
        config::AcceptanceSpec::PosteriorThreshold => Acceptance::PosteriorThreshold,
        config::AcceptanceSpec::All => Acceptance::Set((0..env.n_signals()).collect()),
        config::AcceptanceSpec::Set(s) => Acceptance::Set(s.clone()),
    };
    let profile = CutoffStrategyProfile::new(exits, pricing, acceptance)?;
    let stats = simulator::simulate(env, &profile, cfg.runs, cfg.seed)?;
    let analytic = simulator::profile_value(env, &profile, spec.discount_rate)?;

    let mut runs = Csv::new(&["run", "state", "type", "traded", "trade_time", "price", "surplus", "profit", "rent", "offers"]);
    let opt = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
    for (i, r) in stats.records.iter().enumerate() {
        runs.row(&[
            i.to_string(),
            r.state.to_string(),
            fmt_f64(r.type_value),
            (r.traded as u8).to_string(),
            opt(r.trade_time),
            opt(r.price),
            fmt_f64(r.surplus),
            fmt_f64(r.profit),
            fmt_f64(r.rent),
            r.offers.to_string(),
        ]);
    }
    write_atomic(&cfg.output_dir, "runs.csv", runs.as_str())?;

    let mut summary = Csv::new(&["metric", "mean", "std_error", "n", "analytic"]);
    let s = &stats.summary;
    let mut line = |name: String, e: &simulator::Estimate, a: f64| {
        summary.row(&[name, fmt_f64(e.mean), fmt_f64(e.std_error), e.n.to_string(), fmt_f64(a)]);
    };
    line("trade_frequency".into(), &s.trade_frequency, analytic.trade_probability);
    for (w, e) in s.trade_frequency_by_state.iter().enumerate() {
        line(format!("trade_frequency_state_{w}"), e, analytic.trade_probability_by_state[w]);
    }
    let undiscounted = if spec.discount_rate == 0.0 { 1.0 } else { f64::NAN };
    line("surplus".into(), &s.surplus, analytic.surplus * undiscounted);
    line("profit".into(), &s.profit, analytic.profit * undiscounted);
    line("rent".into(), &s.rent, analytic.rent * undiscounted);
    line("offers".into(), &s.offers, f64::NAN);
    line("trade_time".into(), &s.trade_time, f64::NAN);
    write_atomic(&cfg.output_dir, "summary.csv", summary.as_str())
}

fn sweep_command(cfg: &RunConfig) -> Result<()> {
    let sweep = cfg.sweep.as_ref().ok_or_else(|| Error::Config("sweep command needs a `sweep` section".into()))?;
    let values = sweep.values()?;
    let opts = solve_options(cfg);
    let rows: Vec<Result<[f64; 4]>> = values
        .par_iter()
        .map(|v| {
            let spec = config::with_parameter(&cfg.environment_spec, &sweep.parameter, *v)?;
            let env = spec.build(cfg.grid_nodes).map_err(|e| match e {
                Error::Argument(m) => Error::Config(m),
                other => other,
            })?;
            let com = exit_profile_with(&env, opts)?;
            let (p_star, gap) = match equilibrium::solve_with(&env, equilibrium::EquilibriumOptions { search: opts, ..Default::default() }) {
                Ok(EquilibriumOutcome::Interior(eq)) => {
                    (eq.price, com.value() - equilibrium::equilibrium_seller_utility(&env, &eq)?)
                }
                Ok(EquilibriumOutcome::AdInfinitum { price }) => (price, f64::NAN),
                Err(Error::Precondition(_)) => (f64::NAN, f64::NAN),
                Err(e) => return Err(e),
            };
            Ok([*v, com.value(), p_star, gap])
        })
        .collect();
    let mut csv = Csv::new(&["value", "v_bar", "p_star", "value_gap"]);
    for r in rows {
        csv.floats(&r?);
    }
    write_atomic(&cfg.output_dir, "sweep.csv", csv.as_str())
}

fn key_values(pairs: &[(&str, f64)]) -> String {
    let mut csv = Csv::new(&["key", "value"]);
    for (k, v) in pairs {
        csv.row(&[k.to_string(), fmt_f64(*v)]);
    }
    csv.text
}

/// Regenerates the tables behind a bundled example.
pub fn reproduce(fixture: Fixture, grid_nodes: usize, seed: u64, runs: usize, out: &Path) -> Result<()> {
    match fixture {
        Fixture::Figure1 => {
            let priors = [0.5, 0.2, 0.3];
            let sols = priors
                .iter()
                .map(|mu| exit_profile_with(&fixtures::figure1(*mu, grid_nodes)?, SolveOptions::default()))
                .collect::<Result<Vec<_>>>()?;
            let mut csv = Csv::new(&["y", "s_bar_prior_0.5", "s_bar_prior_0.2", "s_bar_prior_0.3"]);
            for (i, y) in sols[0].grid().nodes().iter().enumerate() {
                csv.floats(&[*y, sols[0].exit_times()[i], sols[1].exit_times()[i], sols[2].exit_times()[i]]);
            }
            write_atomic(out, "figure1.csv", csv.as_str())
        }
        Fixture::Figure2 => {
            let mut exits = Csv::new(&["b", "y", "s_bar"]);
            let mut prices = Csv::new(&["b", "t", "p_hat", "hazard_ratio"]);
            for b in [2.0, 1.0, 0.5] {
                let env = fixtures::env_k(b, grid_nodes)?;
                let sol = commitment::exit_profile(&env)?;
                for (y, s) in sol.grid().nodes().iter().zip(sol.exit_times()) {
                    exits.floats(&[b, *y, *s]);
                }
                for t in time_grid(sol.sup_exit(), 400) {
                    let y = if t > sol.lower_exit() { commitment::marginal_type(&env, &sol, t)? } else { sol.grid().nodes()[0] };
                    let hr = crate::model::hazard_ratio(&env, y).unwrap_or(f64::NAN);
                    prices.floats(&[b, t, commitment::price_pooled(&env, &sol, t)?, hr]);
                }
            }
            write_atomic(out, "figure2_exit.csv", exits.as_str())?;
            write_atomic(out, "figure2_prices.csv", prices.as_str())
        }
        Fixture::AppendixD2 => {
            let env = fixtures::appendix_d2(grid_nodes);
            let top = env.top_signal();
            let middle = env.signals().index_of(0.0).ok_or_else(|| Error::Config("signal 0 missing".into()))?;
            let c = simulator::matched_signal_comparison(&env, middle, top)?;
            write_atomic(
                out,
                "appendix_d2.csv",
                &key_values(&[
                    ("signal_0_exit", c.first_exit),
                    ("signal_0_conditional_surplus", c.first_conditional_surplus),
                    ("top_signal_exit", c.second_exit),
                    ("top_signal_conditional_surplus", c.second_conditional_surplus),
                    ("trade_probability", c.trade_probability),
                ]),
            )
        }
        Fixture::AppendixD3 => {
            let env = fixtures::env_c(grid_nodes);
            let sol = commitment::exit_profile(&env)?;
            let t = 13.0;
            let survivors = commitment::surviving_intervals(&env, &sol, t)?;
            let upper = survivors.last().map(|iv| iv.1).unwrap_or(f64::NAN);
            write_atomic(
                out,
                "appendix_d3.csv",
                &key_values(&[
                    ("t", t),
                    ("posterior_signal_0", commitment::buyer_posterior_pooled(&env, &sol, 0, t)?),
                    ("posterior_top_signal", commitment::buyer_posterior_pooled(&env, &sol, env.top_signal(), t)?),
                    ("p_hat", commitment::price_pooled(&env, &sol, t)?),
                    ("highest_surviving_type", upper),
                    ("surviving_intervals", survivors.len() as f64),
                ]),
            )
        }
        Fixture::EnvA0 => {
            let env = fixtures::env_a0(grid_nodes);
            let sol = commitment::exit_profile(&env)?;
            let eq = equilibrium::solve(&env)?;
            let eq = eq.interior().ok_or_else(|| Error::Precondition("expected an interior equilibrium".into()))?;
            let profile = CutoffStrategyProfile::optimal(&sol);
            let stats = simulator::simulate(&env, &profile, runs, seed)?;
            let by_state = &stats.summary.trade_frequency_by_state;
            write_atomic(
                out,
                "env_a0.csv",
                &key_values(&[
                    ("s_bar", sol.exit_times()[0]),
                    ("v_bar", sol.value()),
                    ("p_star", eq.price),
                    ("s_star", eq.exit_times[0]),
                    ("seller_utility", equilibrium::equilibrium_seller_utility(&env, eq)?),
                    ("simulated_trade_frequency_low", by_state[0].mean),
                    ("simulated_trade_frequency_high", by_state[1].mean),
                    ("simulated_surplus", stats.summary.surplus.mean),
                ]),
            )
        }
    }
}

/// Sizes the global worker pool from WAITMARKET_THREADS.
pub fn init_threads() {
    if let Some(n) = std::env::var("WAITMARKET_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}
