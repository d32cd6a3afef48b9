//! Optimal commitment: exit times, value, price paths, and related diagnostics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{dot, hazard_rate_of, Environment, TypeModel};
use crate::numerics::{
    bisect_root, first_crossing_time, pairwise_sum, quantile_from_cdf, TypeGrid, DEFAULT_TOL_F,
    DEFAULT_TOL_T,
};
use crate::simulator::{profile_value, CutoffStrategyProfile};

pub const T_CAP_START: f64 = 64.0;
pub const T_CAP_MAX: f64 = 1_048_576.0;
const EQUAL_TOL: f64 = 1e-9;

/// Root-finding tolerances for exit-time searches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tol_t: f64,
    pub tol_f: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol_t: DEFAULT_TOL_T, tol_f: DEFAULT_TOL_F }
    }
}

/// Location of the lowest type that enters the market.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ThresholdType {
    /// Every grid type has positive surplus at time zero.
    BelowGrid,
    /// No grid type enters.
    AboveGrid,
    At(f64),
}

/// Tabulated optimal commitment policy.
#[derive(Debug, Clone, PartialEq)]
pub struct CommitmentSolution {
    grid: TypeGrid,
    exit_times: Vec<f64>,
    threshold_type: ThresholdType,
    value: f64,
    t_cap: f64,
    lower_exit: f64,
    monotone: bool,
    pooled_exact: bool,
}

impl CommitmentSolution {
    pub fn grid(&self) -> &TypeGrid {
        &self.grid
    }
    pub fn exit_times(&self) -> &[f64] {
        &self.exit_times
    }
    pub fn threshold_type(&self) -> ThresholdType {
        self.threshold_type
    }
    pub fn value(&self) -> f64 {
        self.value
    }
    /// Search cap that contained every crossing.
    pub fn t_cap(&self) -> f64 {
        self.t_cap
    }
    /// Exit profile is nondecreasing in type.
    pub fn is_monotone(&self) -> bool {
        self.monotone
    }
    /// Largest exit time on the grid.
    pub fn sup_exit(&self) -> f64 {
        self.exit_times.iter().cloned().fold(0.0, f64::max)
    }
    /// Smallest exit time on the grid.
    pub fn inf_exit(&self) -> f64 {
        self.exit_times.iter().cloned().fold(f64::INFINITY, f64::min)
    }
    /// Exit time in the limit of the lowest type of the support (monotone profiles),
    /// otherwise the grid minimum.
    pub fn lower_exit(&self) -> f64 {
        self.lower_exit
    }
}

/// Unnormalized posterior surplus after a top-signal arrival at `t` to type `y`.
pub fn posterior_surplus(env: &Environment, t: f64, y: f64) -> f64 {
    let v = env.surplus_vector();
    (0..env.n_states())
        .map(|s| {
            let f = env.top_prob(y, s);
            v[s] * env.state_weights()[s] * env.types().density(y, s) * f * (-env.arrival_rate() * f * t).exp()
        })
        .sum()
}

/// E[v | top arrival at t, type y]; NaN if the type has no density.
pub(crate) fn conditional_surplus(env: &Environment, v: &[f64], t: f64, y: f64) -> f64 {
    match env.arrival_posterior(t, y, |s| env.top_prob(y, s)) {
        Some(w) => dot(&w, v),
        None => f64::NAN,
    }
}

/// Runs a first-crossing search with the expanding cap policy; returns (time, cap used).
pub(crate) fn crossing_with_cap_policy<F>(f: F, opts: SolveOptions) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    let mut cap = T_CAP_START;
    loop {
        match first_crossing_time(&f, cap, opts.tol_t, opts.tol_f) {
            Ok(t) => return Ok((t, cap)),
            Err(Error::CapExceeded { .. }) if cap < T_CAP_MAX => cap *= 2.0,
            Err(e) => return Err(e),
        }
    }
}

/// Optimal exit time of type `y`.
pub fn exit_time(env: &Environment, y: f64) -> Result<f64> {
    exit_time_with(env, y, SolveOptions::default()).map(|(t, _)| t)
}

/// Exit time and the search cap used.
pub fn exit_time_with(env: &Environment, y: f64, opts: SolveOptions) -> Result<(f64, f64)> {
    env.check_type(y)?;
    let v = env.surplus_vector();
    crossing_with_cap_policy(|t| conditional_surplus(env, &v, t, y), opts)
}

/// Exit times at every grid node plus threshold type and value.
pub fn exit_profile(env: &Environment) -> Result<CommitmentSolution> {
    exit_profile_with(env, SolveOptions::default())
}

pub fn exit_profile_with(env: &Environment, opts: SolveOptions) -> Result<CommitmentSolution> {
    let grid = env.grid().clone();
    let solved: Vec<(f64, f64)> = grid
        .nodes()
        .par_iter()
        .map(|y| exit_time_with(env, *y, opts))
        .collect::<Result<_>>()?;
    let exit_times: Vec<f64> = solved.iter().map(|p| p.0).collect();
    let t_cap = solved.iter().map(|p| p.1).fold(T_CAP_START, f64::max);
    let threshold_type = locate_threshold(env)?;
    let monotone = exit_times.windows(2).all(|w| w[1] >= w[0]);
    let pooled_exact = monotone && env.is_conditionally_independent();
    let mut lower_exit = exit_times.iter().cloned().fold(f64::INFINITY, f64::min);
    if pooled_exact {
        let y = grid.lo() + 1e-9 * (grid.hi() - grid.lo());
        if let Ok((t, _)) = exit_time_with(env, y, opts) {
            if t.is_finite() {
                lower_exit = lower_exit.min(t);
            }
        }
    }
    let mut sol = CommitmentSolution {
        grid,
        exit_times,
        threshold_type,
        value: 0.0,
        t_cap,
        lower_exit,
        monotone,
        pooled_exact,
    };
    sol.value = commitment_value(env, &sol)?;
    Ok(sol)
}

fn locate_threshold(env: &Environment) -> Result<ThresholdType> {
    let v = env.surplus_vector();
    let nodes = env.grid().nodes();
    let phi = |y: f64| conditional_surplus(env, &v, 0.0, y);
    let positive: Vec<bool> = nodes.iter().map(|y| phi(*y) > 0.0).collect();
    if positive.iter().all(|p| *p) {
        return Ok(ThresholdType::BelowGrid);
    }
    let Some(last_off) = positive.iter().rposition(|p| !*p) else {
        return Ok(ThresholdType::BelowGrid);
    };
    if last_off + 1 == nodes.len() {
        return Ok(ThresholdType::AboveGrid);
    }
    let y0 = bisect_root(phi, nodes[last_off], nodes[last_off + 1], 1e-14 * (nodes[1] - nodes[0]).abs())?;
    Ok(ThresholdType::At(y0))
}

/// Probability that a top-signal buyer arrives before `s`.
pub fn trade_probability(env: &Environment, s: f64, y: f64, state: usize) -> Result<f64> {
    env.check_type(y)?;
    if !(s >= 0.0) {
        return Err(Error::Argument(format!("exit time {s} must be nonnegative")));
    }
    Ok(-(-env.arrival_rate() * env.top_prob(y, state) * s).exp_m1())
}

/// V = E[v(w) 1(top arrival before exit)] for per-node exit times.
pub fn value_of_exit_times(env: &Environment, exits: &[f64]) -> Result<f64> {
    let nodes = env.grid().nodes();
    if exits.len() != nodes.len() {
        return Err(Error::Argument("exit profile length does not match the grid".into()));
    }
    let v = env.surplus_vector();
    let mut total = 0.0;
    for s in 0..env.n_states() {
        let mass = env.types().mass(s);
        let terms: Vec<f64> = nodes
            .iter()
            .zip(exits)
            .zip(mass)
            .map(|((y, e), m)| m * -(-env.arrival_rate() * env.top_prob(*y, s) * e).exp_m1())
            .collect();
        total += env.state_weights()[s] * v[s] * pairwise_sum(&terms);
    }
    if !total.is_finite() {
        return Err(Error::Numeric("profile value is not finite".into()));
    }
    Ok(total)
}

/// Commitment value of a solved profile.
pub fn commitment_value(env: &Environment, sol: &CommitmentSolution) -> Result<f64> {
    value_of_exit_times(env, &sol.exit_times)
}

/// Two-state closed form of the optimal exit time.
pub fn binary_sbar_closed_form(env: &Environment, y: f64) -> Result<f64> {
    if env.n_states() != 2 {
        return Err(Error::Precondition("closed form needs two states".into()));
    }
    env.check_type(y)?;
    let v = env.surplus_vector();
    if !(v[1] > 0.0 && v[0] < 0.0) {
        return Err(Error::Precondition("closed form needs v(low) < 0 < v(high)".into()));
    }
    let w = env.state_weights();
    let (fl, fh) = (env.top_prob(y, 0), env.top_prob(y, 1));
    let (gl, gh) = (env.types().density(y, 0), env.types().density(y, 1));
    let num = (w[1] * fh * gh / (w[0] * fl * gl)).ln() + (v[1] / -v[0]).ln();
    Ok((num / (env.arrival_rate() * (fh - fl))).max(0.0))
}

/// p(t, y) = E[v_B | top arrival at t, type y].
pub fn price_revealed(env: &Environment, t: f64, y: f64) -> Result<f64> {
    revealed_mean(env, env.v_buyer(), env.top_signal(), t, y)
}

/// Buyer posterior value with signal index `x` given revealed (t, y).
pub fn buyer_posterior_revealed(env: &Environment, x: usize, t: f64, y: f64) -> Result<f64> {
    if x >= env.n_signals() {
        return Err(Error::Argument(format!("signal index {x} out of range")));
    }
    revealed_mean(env, env.v_buyer(), x, t, y)
}

fn revealed_mean(env: &Environment, values: &[f64], x: usize, t: f64, y: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Argument(format!("time {t} must be nonnegative")));
    }
    env.check_type(y)?;
    let w = env
        .arrival_posterior(t, y, |s| env.signals().prob(x, y, s))
        .ok_or_else(|| Error::UndefinedConditional(format!("no density at type {y}")))?;
    Ok(dot(&w, values))
}

fn check_pool_time(sol: &CommitmentSolution, t: f64) -> Result<()> {
    let sup = sol.sup_exit();
    if !(t >= 0.0 && t < sup) {
        return Err(Error::Domain(format!("pooled time {t} outside [0, {sup})")));
    }
    Ok(())
}

/// State posterior after an arrival of signal `x` at `t`, pooled over types still in the market.
fn pooled_posterior(env: &Environment, sol: &CommitmentSolution, x: usize, t: f64) -> Result<Vec<f64>> {
    check_pool_time(sol, t)?;
    let lambda = env.arrival_rate();
    let k = env.n_states();
    if sol.pooled_exact {
        let y = marginal_type(env, sol, t)?;
        let logs: Vec<f64> = (0..k)
            .map(|s| {
                let base = env.state_weights()[s] * env.signals().prob(x, y, s) * env.types().survival(y, s);
                if base > 0.0 {
                    base.ln() - lambda * env.top_prob(y, s) * t
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        return crate::model::normalize_logs(&logs)
            .ok_or_else(|| Error::UndefinedConditional(format!("no surviving mass at t = {t}")));
    }
    let nodes = sol.grid.nodes();
    let f_min = nodes
        .iter()
        .flat_map(|y| (0..k).map(move |s| (y, s)))
        .map(|(y, s)| env.top_prob(*y, s))
        .fold(f64::INFINITY, f64::min);
    let mut w = vec![0.0; k];
    for (s, ws) in w.iter_mut().enumerate() {
        let mass = env.types().mass(s);
        let terms: Vec<f64> = (0..nodes.len())
            .filter(|i| sol.exit_times[*i] >= t)
            .map(|i| {
                let y = nodes[i];
                mass[i] * env.signals().prob(x, y, s) * (-lambda * (env.top_prob(y, s) - f_min) * t).exp()
            })
            .collect();
        *ws = env.state_weights()[s] * pairwise_sum(&terms);
    }
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return Err(Error::UndefinedConditional(format!("no surviving mass at t = {t}")));
    }
    Ok(w.into_iter().map(|x| x / total).collect())
}

/// p_hat(t) = E[v_B | top arrival at t, type still in the market].
pub fn price_pooled(env: &Environment, sol: &CommitmentSolution, t: f64) -> Result<f64> {
    Ok(dot(&pooled_posterior(env, sol, env.top_signal(), t)?, env.v_buyer()))
}

/// Buyer posterior value with signal index `x` under pooled calendar-time messages.
pub fn buyer_posterior_pooled(env: &Environment, sol: &CommitmentSolution, x: usize, t: f64) -> Result<f64> {
    if x >= env.n_signals() {
        return Err(Error::Argument(format!("signal index {x} out of range")));
    }
    Ok(dot(&pooled_posterior(env, sol, x, t)?, env.v_buyer()))
}

/// Lowest type still in the market at `t` for monotone profiles, located by the sign of
/// the posterior surplus in y (not the grid interpolant).
pub fn marginal_type(env: &Environment, sol: &CommitmentSolution, t: f64) -> Result<f64> {
    if !sol.monotone {
        return Err(Error::Precondition("exit profile is not monotone".into()));
    }
    check_pool_time(sol, t)?;
    let (lo, hi) = (sol.grid.lo(), sol.grid.hi());
    if t <= sol.lower_exit {
        return Ok(lo);
    }
    let v = env.surplus_vector();
    let phi = |y: f64| conditional_surplus(env, &v, t, y);
    let nodes = sol.grid.nodes();
    let bottom = lo + 1e-9 * (hi - lo);
    let mut k = sol.exit_times.partition_point(|e| *e < t);
    while k < nodes.len() && !(phi(nodes[k]) >= 0.0) {
        k += 1;
    }
    if k == nodes.len() {
        return Err(Error::Domain(format!("no surviving type at t = {t}")));
    }
    let mut j = k;
    let below = loop {
        if j == 0 {
            if phi(bottom) >= 0.0 {
                return Ok(lo);
            }
            break bottom;
        }
        j -= 1;
        if phi(nodes[j]) < 0.0 {
            break nodes[j];
        }
    };
    bisect_root(phi, below, nodes[k], 1e-15 * (hi - lo))
}

/// Type intervals still in the market at `t` (grid indicator, boundaries refined by bisection).
pub fn surviving_intervals(env: &Environment, sol: &CommitmentSolution, t: f64) -> Result<Vec<(f64, f64)>> {
    check_pool_time(sol, t)?;
    let v = env.surplus_vector();
    let phi = |y: f64| conditional_surplus(env, &v, t, y);
    let nodes = sol.grid.nodes();
    let alive: Vec<bool> = sol.exit_times.iter().map(|e| *e >= t).collect();
    let boundary = |i: usize| -> f64 {
        bisect_root(phi, nodes[i], nodes[i + 1], 1e-14).unwrap_or(0.5 * (nodes[i] + nodes[i + 1]))
    };
    let mut out = Vec::new();
    let mut start: Option<f64> = None;
    for i in 0..nodes.len() {
        match (alive[i], start) {
            (true, None) => start = Some(if i == 0 { sol.grid.lo() } else { boundary(i - 1) }),
            (false, Some(a)) => {
                out.push((a, boundary(i - 1)));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(a) = start {
        out.push((a, sol.grid.hi()));
    }
    Ok(out)
}

/// s_bar^{-1}(t) = inf{y : s_bar(y) >= t} by piecewise-linear inversion of the grid profile.
pub fn sbar_inverse(sol: &CommitmentSolution, t: f64) -> Result<f64> {
    if !sol.monotone {
        return Err(Error::Precondition("exit profile is not monotone".into()));
    }
    let e = &sol.exit_times;
    let nodes = sol.grid.nodes();
    let (inf, sup) = (e[0], e[e.len() - 1]);
    if !(t >= inf && t <= sup) {
        return Err(Error::Domain(format!("time {t} outside [{inf}, {sup}]")));
    }
    if t == inf {
        return Ok(match sol.threshold_type {
            ThresholdType::At(y0) if inf == 0.0 => y0,
            _ => nodes[0],
        });
    }
    let k = e.partition_point(|x| *x < t);
    let (e0, e1) = (e[k - 1], e[k]);
    let w = if e1 > e0 { (t - e0) / (e1 - e0) } else { 1.0 };
    Ok(nodes[k - 1] + w * (nodes[k] - nodes[k - 1]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Trend {
    StrictlyDecreasing,
    StrictlyIncreasing,
    Constant,
    Mixed,
    Empty,
}

impl Trend {
    /// Classifies consecutive differences, treating |d| <= 1e-9 as zero.
    pub fn of(values: &[f64]) -> Trend {
        if values.len() < 2 {
            return Trend::Empty;
        }
        let signs: Vec<i8> = values
            .windows(2)
            .map(|w| {
                let d = w[1] - w[0];
                if d > EQUAL_TOL {
                    1
                } else if d < -EQUAL_TOL {
                    -1
                } else {
                    0
                }
            })
            .collect();
        if signs.iter().all(|s| *s == -1) {
            Trend::StrictlyDecreasing
        } else if signs.iter().all(|s| *s == 1) {
            Trend::StrictlyIncreasing
        } else if signs.iter().all(|s| *s == 0) {
            Trend::Constant
        } else {
            Trend::Mixed
        }
    }
}

/// Sign pattern of the pooled price and the hazard-ratio ordering test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceDynamicsReport {
    pub inf_exit: f64,
    pub sup_exit: f64,
    /// Trend of p_hat on [0, inf_exit].
    pub before_inf: Trend,
    /// Trend of p_hat on (inf_exit, sup_exit).
    pub after_inf: Trend,
    /// Largest |p_hat(t) - p_hat(t')| over (inf_exit, sup_exit) samples.
    pub after_inf_spread: f64,
    /// Trend of the hazard ratio over grid nodes (grid-level check of the hypothesis).
    pub hazard_ratio_trend: Trend,
    pub pairs: usize,
    pub violations: usize,
}

impl PriceDynamicsReport {
    pub fn equivalence_holds(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsOptions {
    pub samples: usize,
    pub pairs: usize,
    pub seed: u64,
}

impl Default for DynamicsOptions {
    fn default() -> Self {
        Self { samples: 400, pairs: 1000, seed: 20_240_601 }
    }
}

/// Pooled-price dynamics for two-state, conditionally independent environments.
pub fn classify_price_dynamics(env: &Environment, sol: &CommitmentSolution) -> Result<PriceDynamicsReport> {
    classify_price_dynamics_with(env, sol, DynamicsOptions::default())
}

pub fn classify_price_dynamics_with(
    env: &Environment,
    sol: &CommitmentSolution,
    opts: DynamicsOptions,
) -> Result<PriceDynamicsReport> {
    if env.n_states() != 2 {
        return Err(Error::Precondition("price dynamics need two states".into()));
    }
    if !env.is_conditionally_independent() {
        return Err(Error::Precondition("price dynamics need conditionally independent signals".into()));
    }
    if !sol.monotone {
        return Err(Error::Precondition("exit profile is not monotone".into()));
    }
    let (inf, sup) = (sol.lower_exit, sol.sup_exit());
    let n = opts.samples.max(2);
    let early: Vec<f64> = if inf > 0.0 {
        (0..=n)
            .map(|k| price_pooled(env, sol, inf * k as f64 / n as f64))
            .collect::<Result<_>>()?
    } else {
        vec![]
    };
    let late: Vec<f64> = (1..=n)
        .map(|k| price_pooled(env, sol, inf + (sup - inf) * k as f64 / (n + 1) as f64))
        .collect::<Result<_>>()?;
    let spread = late.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - late.iter().cloned().fold(f64::INFINITY, f64::min);
    let ratio = |y: f64| -> Result<f64> {
        Ok(hazard_rate_of(env.types(), y, 1)? / hazard_rate_of(env.types(), y, 0)?)
    };
    let grid_ratio: Vec<f64> = sol
        .grid
        .nodes()
        .iter()
        .filter_map(|y| ratio(*y).ok())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut violations = 0;
    let point = |t: f64| -> Result<(f64, f64)> {
        let p = price_pooled(env, sol, t)?;
        let r = ratio(marginal_type(env, sol, t)?)?;
        Ok((p, r))
    };
    for _ in 0..opts.pairs {
        let t1 = inf + (sup - inf) * rng.random_range(1e-9..1.0);
        let t2 = inf + (sup - inf) * rng.random_range(1e-9..1.0);
        let ((p1, r1), (p2, r2)) = (point(t1)?, point(t2)?);
        let forward = (p1 - p2 >= -EQUAL_TOL) == (r1 - r2 <= EQUAL_TOL);
        let backward = (p2 - p1 >= -EQUAL_TOL) == (r2 - r1 <= EQUAL_TOL);
        if !(forward && backward) {
            violations += 1;
        }
    }
    Ok(PriceDynamicsReport {
        inf_exit: inf,
        sup_exit: sup,
        before_inf: Trend::of(&early),
        after_inf: Trend::of(&late),
        after_inf_spread: spread,
        hazard_ratio_trend: Trend::of(&grid_ratio),
        pairs: opts.pairs,
        violations,
    })
}

/// Outcome of the quantile-map informativeness test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LehmannVerdict {
    pub more_informative: bool,
    /// First (y, lower state, upper state) where the quantile map decreases.
    pub witness: Option<(f64, usize, usize)>,
}

/// Whether `t2` is at least as informative as `t1`: the map y -> G2^{-1}(G1(y|w)|w)
/// is nondecreasing in w at every sampled y.
pub fn lehmann_more_informative(t2: &TypeModel, t1: &TypeModel, ys: &[f64]) -> Result<LehmannVerdict> {
    let k = t1.n_states();
    if t2.n_states() != k {
        return Err(Error::Argument("type models cover different state counts".into()));
    }
    for y in ys {
        let mut prev: Option<f64> = None;
        for s in 0..k {
            let q = t1.cdf(*y, s);
            let z = quantile_from_cdf(|u| t2.cdf(u, s), t2.lo(), t2.hi(), q, 1e-10)?;
            if let Some(p) = prev {
                if z < p - 1e-9 {
                    return Ok(LehmannVerdict { more_informative: false, witness: Some((*y, s - 1, s)) });
                }
            }
            prev = Some(z);
        }
    }
    Ok(LehmannVerdict { more_informative: true, witness: None })
}

/// Piecewise-constant acceptance probabilities per signal over time.
#[derive(Debug, Clone, PartialEq)]
pub struct AcceptanceSchedule {
    /// `(end_time, alpha per signal)`; segments start where the previous one ends (first at 0),
    /// and the last one extends indefinitely.
    pub segments: Vec<(f64, Vec<f64>)>,
}

impl AcceptanceSchedule {
    pub fn constant(alpha: Vec<f64>) -> Self {
        Self { segments: vec![(f64::INFINITY, alpha)] }
    }
    pub fn only_top(n_signals: usize) -> Self {
        let mut a = vec![0.0; n_signals];
        a[n_signals - 1] = 1.0;
        Self::constant(a)
    }
    pub fn accept_all(n_signals: usize) -> Self {
        Self::constant(vec![1.0; n_signals])
    }
}

/// xi(w) = integral over [0, t] of sum_x f(x|w) / f(xbar|w) * alpha(x, s) ds.
pub fn experiment_xi(env: &Environment, schedule: &AcceptanceSchedule, t: f64) -> Result<Vec<f64>> {
    if !env.types().is_uninformative() {
        return Err(Error::Precondition("experiment comparison needs an uninformed seller".into()));
    }
    if !env.is_conditionally_independent() {
        return Err(Error::Precondition("experiment comparison needs conditionally independent signals".into()));
    }
    if !(t >= 0.0) {
        return Err(Error::Argument(format!("horizon {t} must be nonnegative")));
    }
    let nx = env.n_signals();
    let y = env.grid().nodes()[0];
    let mut xi = vec![0.0; env.n_states()];
    let mut start = 0.0;
    for (k, (end, alpha)) in schedule.segments.iter().enumerate() {
        if alpha.len() != nx || alpha.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::Argument(format!("segment {k} needs {nx} probabilities in [0, 1]")));
        }
        let end = if k + 1 == schedule.segments.len() { f64::INFINITY } else { *end };
        let len = (end.min(t) - start).max(0.0);
        for (s, out) in xi.iter_mut().enumerate() {
            let top = env.top_prob(y, s);
            let rate: f64 = (0..nx).map(|x| env.signals().prob(x, y, s) / top * alpha[x]).sum();
            *out += len * rate;
        }
        start = end;
        if start >= t {
            break;
        }
    }
    Ok(xi)
}

/// Expected surplus of a cutoff profile with continuous discount rate `delta`.
pub fn discounted_profile_value(env: &Environment, profile: &CutoffStrategyProfile, delta: f64) -> Result<f64> {
    if !(delta >= 0.0) {
        return Err(Error::Argument(format!("discount rate {delta} must be nonnegative")));
    }
    Ok(profile_value(env, profile, delta)?.surplus)
}
