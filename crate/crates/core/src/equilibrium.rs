//! No-commitment opaque-market equilibrium: pooled price, exit times, deviation thresholds.

use rayon::prelude::*;
use serde::Serialize;

use crate::commitment::{crossing_with_cap_policy, CommitmentSolution, SolveOptions};
use crate::error::{Error, Result};
use crate::model::{dot, Environment};
use crate::numerics::{bisect_monotone_fixed_point, pairwise_sum, DEFAULT_FIXED_POINT_TOL};

/// Equilibrium price and exit times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumSolution {
    pub price: f64,
    pub exit_times: Vec<f64>,
    pub fixed_point_residual: f64,
    /// Highest acceptable price per signal index.
    pub deviation_thresholds: Vec<f64>,
}

/// Solver result: an interior equilibrium, or the regime where the seller never leaves.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum EquilibriumOutcome {
    Interior(EquilibriumSolution),
    /// Prior buyer value reaches the top reservation value; the seller posts it forever.
    AdInfinitum { price: f64 },
}

impl EquilibriumOutcome {
    pub fn interior(&self) -> Option<&EquilibriumSolution> {
        match self {
            EquilibriumOutcome::Interior(s) => Some(s),
            EquilibriumOutcome::AdInfinitum { .. } => None,
        }
    }
    pub fn price(&self) -> f64 {
        match self {
            EquilibriumOutcome::Interior(s) => s.price,
            EquilibriumOutcome::AdInfinitum { price } => *price,
        }
    }
}

fn max_seller_value(env: &Environment) -> f64 {
    env.v_seller().iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

/// Structural clauses of the equilibrium existence condition (all but the value ordering).
fn check_structure(env: &Environment) -> Result<()> {
    if !env.is_conditionally_independent() {
        return Err(Error::Precondition("condition 1 clause 1: signals must be conditionally independent of the type".into()));
    }
    if env.v_seller().windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Precondition("condition 1 clause 2: v_seller must be strictly decreasing".into()));
    }
    let bounded = env
        .types()
        .density_table()
        .iter()
        .flatten()
        .all(|g| g.is_finite() && *g > 0.0);
    if !bounded {
        return Err(Error::Precondition(
            "condition 1 clause 4: type densities must be positive and finite on the grid".into(),
        ));
    }
    Ok(())
}

/// Every clause of the existence condition.
pub fn check_condition_one(env: &Environment) -> Result<()> {
    check_structure(env)?;
    if !(env.expected_buyer_value() < max_seller_value(env)) {
        return Err(Error::Precondition("condition 1 clause 3: E[v_B] must be below max v_S".into()));
    }
    Ok(())
}

fn seller_value_unchecked(env: &Environment, t: f64, y: f64) -> f64 {
    match env.arrival_posterior(t, y, |s| env.top_prob(y, s)) {
        Some(w) => dot(&w, env.v_seller()),
        None => f64::NAN,
    }
}

/// E[v_S | top arrival at t, type y].
pub fn seller_posterior_value(env: &Environment, t: f64, y: f64) -> Result<f64> {
    check_condition_one(env)?;
    env.check_type(y)?;
    if !(t >= 0.0) {
        return Err(Error::Argument(format!("time {t} must be nonnegative")));
    }
    Ok(seller_value_unchecked(env, t, y))
}

fn stop_time_unchecked(env: &Environment, p: f64, y: f64, opts: SolveOptions) -> Result<f64> {
    crossing_with_cap_policy(|t| p - seller_value_unchecked(env, t, y), opts).map(|(t, _)| t)
}

/// Smallest t with p <= E[v_S | top arrival at t, type y].
pub fn stop_time_given_price(env: &Environment, p: f64, y: f64) -> Result<f64> {
    check_condition_one(env)?;
    env.check_type(y)?;
    if !(p < max_seller_value(env)) {
        return Err(Error::Unbounded(format!("price {p} is not below max v_S")));
    }
    stop_time_unchecked(env, p, y, SolveOptions::default())
}

/// E[v_B | top arrival before the type's exit time].
pub fn implied_price(env: &Environment, s_profile: &[f64]) -> Result<f64> {
    let nodes = env.grid().nodes();
    if s_profile.len() != nodes.len() {
        return Err(Error::Argument("exit profile length does not match the grid".into()));
    }
    if s_profile.iter().any(|s| !(*s >= 0.0)) {
        return Err(Error::Argument("exit times must be nonnegative".into()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for s in 0..env.n_states() {
        let p = trade_mass(env, s_profile, s);
        num += env.state_weights()[s] * env.v_buyer()[s] * p;
        den += env.state_weights()[s] * p;
    }
    if !(den > 0.0) {
        return Err(Error::UndefinedConditional("no type ever trades".into()));
    }
    Ok(num / den)
}

/// P(top arrival before exit | state).
fn trade_mass(env: &Environment, exits: &[f64], s: usize) -> f64 {
    let lambda = env.arrival_rate();
    let terms: Vec<f64> = env
        .grid()
        .nodes()
        .iter()
        .zip(exits)
        .zip(env.types().mass(s))
        .map(|((y, e), m)| m * -(-lambda * env.top_prob(*y, s) * e).exp_m1())
        .collect();
    pairwise_sum(&terms)
}

fn stop_profile(env: &Environment, p: f64, opts: SolveOptions) -> Result<Vec<f64>> {
    env.grid().nodes().par_iter().map(|y| stop_time_unchecked(env, p, *y, opts)).collect()
}

/// Solver tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumOptions {
    pub search: SolveOptions,
    pub fixed_point_tol: f64,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        Self { search: SolveOptions::default(), fixed_point_tol: DEFAULT_FIXED_POINT_TOL }
    }
}

pub fn solve(env: &Environment) -> Result<EquilibriumOutcome> {
    solve_with(env, EquilibriumOptions::default())
}

/// Fixed point p = implied_price(stop profile at p) on the open bracket
/// (E[v_S | t = 0, top type], max v_S).
pub fn solve_with(env: &Environment, opts: EquilibriumOptions) -> Result<EquilibriumOutcome> {
    check_structure(env)?;
    let top_value = max_seller_value(env);
    let prior_value = env.expected_buyer_value();
    if prior_value >= top_value {
        return Ok(EquilibriumOutcome::AdInfinitum { price: prior_value });
    }
    let nodes = env.grid().nodes();
    let floor = seller_value_unchecked(env, 0.0, nodes[nodes.len() - 1]);
    let eps = 1e-9 * (top_value - floor);
    let map = |p: f64| implied_price(env, &stop_profile(env, p, opts.search)?);
    let price = match bisect_monotone_fixed_point(map, floor + eps, top_value - eps, opts.fixed_point_tol) {
        Ok(p) => p,
        Err(Error::NoBracket(msg)) => {
            return Err(Error::NoBracket(format!("equilibrium bracket failed: {msg}")));
        }
        Err(e) => return Err(e),
    };
    let exit_times = stop_profile(env, price, opts.search)?;
    let residual = (implied_price(env, &exit_times)? - price).abs();
    let mut sol = EquilibriumSolution { price, exit_times, fixed_point_residual: residual, deviation_thresholds: vec![] };
    sol.deviation_thresholds = (0..env.n_signals()).map(|x| deviation_threshold(env, &sol, x)).collect::<Result<_>>()?;
    Ok(EquilibriumOutcome::Interior(sol))
}

/// Highest price a buyer with signal index `x` accepts after an unexpected offer.
pub fn deviation_threshold(env: &Environment, sol: &EquilibriumSolution, x: usize) -> Result<f64> {
    if x >= env.n_signals() {
        return Err(Error::Argument(format!("signal index {x} out of range")));
    }
    let nodes = env.grid().nodes();
    if sol.exit_times.len() != nodes.len() {
        return Err(Error::Argument("solution does not match the grid".into()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for s in 0..env.n_states() {
        let y0 = nodes[0];
        let ratio = env.signals().prob(x, y0, s) / env.top_prob(y0, s);
        let w = env.state_weights()[s] * ratio * trade_mass(env, &sol.exit_times, s);
        num += w * env.v_buyer()[s];
        den += w;
    }
    if !(den > 0.0) {
        return Err(Error::UndefinedConditional("no type offers in equilibrium".into()));
    }
    Ok(num / den)
}

/// Two-state closed form of the equilibrium exit time at price `p_star`.
pub fn binary_sstar_closed_form(env: &Environment, p_star: f64, y: f64) -> Result<f64> {
    if env.n_states() != 2 {
        return Err(Error::Precondition("closed form needs two states".into()));
    }
    env.check_type(y)?;
    let vs = env.v_seller();
    if !(p_star > vs[1] && p_star < vs[0]) {
        return Err(Error::Domain(format!("price {p_star} outside ({}, {})", vs[1], vs[0])));
    }
    let w = env.state_weights();
    let (fl, fh) = (env.top_prob(y, 0), env.top_prob(y, 1));
    let (gl, gh) = (env.types().density(y, 0), env.types().density(y, 1));
    let num = (w[1] * fh * gh / (w[0] * fl * gl)).ln() + ((p_star - vs[1]) / (vs[0] - p_star)).ln();
    Ok((num / (env.arrival_rate() * (fh - fl))).max(0.0))
}

/// E[(p* - v_S) 1(top arrival before s*)].
pub fn equilibrium_seller_utility(env: &Environment, sol: &EquilibriumSolution) -> Result<f64> {
    Ok((0..env.n_states())
        .map(|s| env.state_weights()[s] * (sol.price - env.v_seller()[s]) * trade_mass(env, &sol.exit_times, s))
        .sum())
}

/// E[(v_B - p*) 1(top arrival before s*)].
pub fn equilibrium_buyer_surplus(env: &Environment, sol: &EquilibriumSolution) -> Result<f64> {
    Ok((0..env.n_states())
        .map(|s| env.state_weights()[s] * (env.v_buyer()[s] - sol.price) * trade_mass(env, &sol.exit_times, s))
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeComparison {
    pub y: f64,
    pub s_bar: f64,
    pub s_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub nodes: Vec<NodeComparison>,
    /// s* >= s_bar at every node.
    pub weakly_later: bool,
    /// s* > s_bar + 1e-6 wherever s_bar > 1e-9.
    pub strictly_later_where_positive: bool,
    pub commitment_value: f64,
    pub seller_utility: f64,
    pub value_gap: f64,
}

/// Node-wise exit-time comparison and the commitment value gap.
pub fn compare_vs_commitment(env: &Environment, eq: &EquilibriumSolution, com: &CommitmentSolution) -> Result<ComparisonReport> {
    if eq.exit_times.len() != com.exit_times().len() {
        return Err(Error::Argument("solutions are on different grids".into()));
    }
    let nodes: Vec<NodeComparison> = com
        .grid()
        .nodes()
        .iter()
        .zip(com.exit_times())
        .zip(&eq.exit_times)
        .map(|((y, b), s)| NodeComparison { y: *y, s_bar: *b, s_star: *s })
        .collect();
    let weakly_later = nodes.iter().all(|n| n.s_star >= n.s_bar);
    let strictly_later_where_positive = nodes.iter().all(|n| n.s_bar <= 1e-9 || n.s_star > n.s_bar + 1e-6);
    let seller_utility = equilibrium_seller_utility(env, eq)?;
    Ok(ComparisonReport {
        nodes,
        weakly_later,
        strictly_later_where_positive,
        commitment_value: com.value(),
        seller_utility,
        value_gap: com.value() - seller_utility,
    })
}
