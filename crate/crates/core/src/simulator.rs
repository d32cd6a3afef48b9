//! Cutoff strategy profiles: analytic values, Monte Carlo runs, and the perturbation suite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::Serialize;

use crate::commitment::{buyer_posterior_revealed, price_revealed, CommitmentSolution};
use crate::error::{Error, Result};
use crate::model::{dot, Environment};
use crate::numerics::{bisect_root, pairwise_sum, PanelRule};

/// How the seller prices while in the market.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Pricing {
    /// p(t, y): posterior buyer value given a top-signal arrival at t to type y.
    Revealed,
    /// Posterior buyer value pooled over the types still offering at t.
    Pooled,
    Constant(f64),
}

/// Which buyers accept an offer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Acceptance {
    OnlyTop,
    /// Signal indices that accept.
    Set(Vec<usize>),
    /// Accept iff the posterior value under the pricing's information structure covers the price.
    PosteriorThreshold,
}

/// Deterministic cutoff profile on the environment's type grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CutoffStrategyProfile {
    pub exit_times: Vec<f64>,
    pub pricing: Pricing,
    pub acceptance: Acceptance,
}

impl CutoffStrategyProfile {
    pub fn new(exit_times: Vec<f64>, pricing: Pricing, acceptance: Acceptance) -> Result<Self> {
        if let Some(e) = exit_times.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
            return Err(Error::Argument(format!("exit time {e} must be finite and nonnegative")));
        }
        if let Pricing::Constant(p) = pricing {
            if !p.is_finite() {
                return Err(Error::Argument("constant price must be finite".into()));
            }
        }
        Ok(Self { exit_times, pricing, acceptance })
    }

    /// Commitment optimum: exit at s_bar, revealed prices, top-signal buyers only.
    pub fn optimal(sol: &CommitmentSolution) -> Self {
        Self { exit_times: sol.exit_times().to_vec(), pricing: Pricing::Revealed, acceptance: Acceptance::OnlyTop }
    }

    /// Same exit time for every type.
    pub fn uniform_exit(env: &Environment, exit: f64, pricing: Pricing, acceptance: Acceptance) -> Result<Self> {
        Self::new(vec![exit; env.grid().len()], pricing, acceptance)
    }

    fn check(&self, env: &Environment) -> Result<()> {
        if self.exit_times.len() != env.grid().len() {
            return Err(Error::Argument(format!(
                "profile has {} exit times for {} grid nodes",
                self.exit_times.len(),
                env.grid().len()
            )));
        }
        if let Acceptance::Set(set) = &self.acceptance {
            if let Some(x) = set.iter().find(|x| **x >= env.n_signals()) {
                return Err(Error::Argument(format!("acceptance signal index {x} out of range")));
            }
        }
        Ok(())
    }
}

/// Price and acceptance evaluation for one profile.
struct Market<'a> {
    env: &'a Environment,
    profile: &'a CutoffStrategyProfile,
    f_min: f64,
}

impl<'a> Market<'a> {
    fn new(env: &'a Environment, profile: &'a CutoffStrategyProfile) -> Result<Self> {
        profile.check(env)?;
        let f_min = env
            .grid()
            .nodes()
            .iter()
            .flat_map(|y| (0..env.n_states()).map(move |s| env.top_prob(*y, s)))
            .fold(f64::INFINITY, f64::min);
        Ok(Self { env, profile, f_min })
    }

    /// Buyer value posterior pooled over types offering at `t` under the profile's exits.
    fn pooled_mean(&self, x: usize, t: f64) -> f64 {
        let env = self.env;
        let nodes = env.grid().nodes();
        let lambda = env.arrival_rate();
        let mut w = vec![0.0; env.n_states()];
        for (s, ws) in w.iter_mut().enumerate() {
            let mass = env.types().mass(s);
            let mut acc = 0.0;
            for (i, y) in nodes.iter().enumerate() {
                if self.profile.exit_times[i] >= t {
                    acc += mass[i] * env.signals().prob(x, *y, s) * (-lambda * (env.top_prob(*y, s) - self.f_min) * t).exp();
                }
            }
            *ws = env.state_weights()[s] * acc;
        }
        let total: f64 = w.iter().sum();
        if total > 0.0 {
            dot(&w, env.v_buyer()) / total
        } else {
            f64::NAN
        }
    }

    fn price(&self, t: f64, y: f64) -> f64 {
        match self.profile.pricing {
            Pricing::Revealed => price_revealed(self.env, t, y).unwrap_or(f64::NAN),
            Pricing::Pooled => self.pooled_mean(self.env.top_signal(), t),
            Pricing::Constant(p) => p,
        }
    }

    fn posterior(&self, x: usize, t: f64, y: f64) -> f64 {
        match self.profile.pricing {
            Pricing::Revealed => buyer_posterior_revealed(self.env, x, t, y).unwrap_or(f64::NAN),
            _ => self.pooled_mean(x, t),
        }
    }

    fn accepts(&self, x: usize, t: f64, y: f64) -> bool {
        match &self.profile.acceptance {
            Acceptance::OnlyTop => x == self.env.top_signal(),
            Acceptance::Set(set) => set.contains(&x),
            Acceptance::PosteriorThreshold => self.posterior(x, t, y) >= self.price(t, y) - 1e-12,
        }
    }

    fn acceptance_vector(&self, t: f64, y: f64) -> Vec<bool> {
        (0..self.env.n_signals()).map(|x| self.accepts(x, t, y)).collect()
    }

    /// Maximal intervals of [0, exit] with a constant acceptance set.
    fn pieces(&self, exit: f64, y: f64) -> Vec<(f64, f64, Vec<bool>)> {
        if !(exit > 0.0) {
            return vec![];
        }
        if !matches!(self.profile.acceptance, Acceptance::PosteriorThreshold) {
            return vec![(0.0, exit, self.acceptance_vector(0.0, y))];
        }
        const SCAN: usize = 64;
        let times: Vec<f64> = (0..=SCAN).map(|k| exit * k as f64 / SCAN as f64).collect();
        let sets: Vec<Vec<bool>> = times.iter().map(|t| self.acceptance_vector(*t, y)).collect();
        let mut breaks = vec![0.0];
        for k in 1..times.len() {
            for x in 0..self.env.n_signals() {
                if sets[k][x] != sets[k - 1][x] {
                    let gap = |t: f64| self.posterior(x, t, y) - self.price(t, y) + 1e-12;
                    let t = bisect_root(gap, times[k - 1], times[k], 1e-12).unwrap_or(times[k]);
                    breaks.push(t);
                }
            }
        }
        breaks.push(exit);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        breaks
            .windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| (w[0], w[1], self.acceptance_vector(0.5 * (w[0] + w[1]), y)))
            .collect()
    }
}

/// Expected outcomes of a cutoff profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileValue {
    pub surplus: f64,
    pub profit: f64,
    pub rent: f64,
    /// Undiscounted probability of trade.
    pub trade_probability: f64,
    pub trade_probability_by_state: Vec<f64>,
}

/// Undiscounted expected surplus, seller profit and buyer rent of a cutoff profile.
pub fn analytic_profile_value(env: &Environment, profile: &CutoffStrategyProfile) -> Result<ProfileValue> {
    profile_value(env, profile, 0.0)
}

/// Profile value with continuous discounting at rate `delta`: surplus in closed form per
/// constant-acceptance piece; profit and rent by Gauss-Legendre panels in time.
pub fn profile_value(env: &Environment, profile: &CutoffStrategyProfile, delta: f64) -> Result<ProfileValue> {
    let market = Market::new(env, profile)?;
    let k = env.n_states();
    let lambda = env.arrival_rate();
    let rule = PanelRule::gauss_legendre(16);
    let nodes = env.grid().nodes();

    // per node: [surplus-probability, undiscounted probability, profit, rent] per state
    let per_node: Vec<Vec<[f64; 4]>> = nodes
        .par_iter()
        .enumerate()
        .map(|(i, y)| {
            let y = *y;
            let mut out = vec![[0.0; 4]; k];
            let mut hazard_acc = vec![0.0_f64; k];
            for (a, b, set) in market.pieces(profile.exit_times[i], y) {
                let q: Vec<f64> = (0..k)
                    .map(|s| {
                        lambda * (0..env.n_signals()).filter(|x| set[*x]).map(|x| env.signals().prob(x, y, s)).sum::<f64>()
                    })
                    .collect();
                let len = b - a;
                for s in 0..k {
                    let alive = (-hazard_acc[s]).exp();
                    let r = q[s] + delta;
                    let disc = if r > 0.0 {
                        alive * (-delta * a).exp() * q[s] / r * -(-r * len).exp_m1()
                    } else {
                        0.0
                    };
                    out[s][0] += disc;
                    out[s][1] += alive * -(-q[s] * len).exp_m1();
                }
                let window = if delta * len > 60.0 { 60.0 / delta } else { len };
                let panels = ((window * (lambda + delta) / 2.0).ceil() as usize).clamp(1, 100_000);
                for (t, wt) in rule.composite(a, a + window, panels) {
                    let p = market.price(t, y);
                    for s in 0..k {
                        let dens = wt * q[s] * (-hazard_acc[s] - q[s] * (t - a) - delta * t).exp();
                        out[s][2] += dens * (p - env.v_seller()[s]);
                        out[s][3] += dens * (env.v_buyer()[s] - p);
                    }
                }
                for s in 0..k {
                    hazard_acc[s] += q[s] * len;
                }
            }
            out
        })
        .collect();

    let v = env.surplus_vector();
    let mut value = ProfileValue {
        surplus: 0.0,
        profit: 0.0,
        rent: 0.0,
        trade_probability: 0.0,
        trade_probability_by_state: vec![0.0; k],
    };
    for s in 0..k {
        let mass = env.types().mass(s);
        let col = |j: usize| pairwise_sum(&per_node.iter().zip(mass).map(|(c, m)| m * c[s][j]).collect::<Vec<_>>());
        let mu = env.state_weights()[s];
        let p_trade = col(1);
        value.surplus += mu * v[s] * col(0);
        value.trade_probability_by_state[s] = p_trade;
        value.trade_probability += mu * p_trade;
        value.profit += mu * col(2);
        value.rent += mu * col(3);
    }
    if ![value.surplus, value.profit, value.rent].iter().all(|x| x.is_finite()) {
        return Err(Error::Numeric("profile value is not finite (price undefined on the offer window?)".into()));
    }
    Ok(value)
}

/// One simulated market.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    pub state: usize,
    pub type_value: f64,
    pub traded: bool,
    pub trade_time: Option<f64>,
    pub price: Option<f64>,
    pub surplus: f64,
    pub profit: f64,
    pub rent: f64,
    /// Buyer arrivals before trade or exit.
    pub offers: u32,
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

impl Estimate {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self { mean: f64::NAN, std_error: f64::NAN, n };
        }
        let mean = pairwise_sum(xs) / n as f64;
        let var = if n > 1 {
            pairwise_sum(&xs.iter().map(|x| (x - mean) * (x - mean)).collect::<Vec<_>>()) / (n - 1) as f64
        } else {
            0.0
        };
        Self { mean, std_error: (var / n as f64).sqrt(), n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub trade_frequency: Estimate,
    pub trade_frequency_by_state: Vec<Estimate>,
    pub surplus: Estimate,
    pub profit: Estimate,
    pub rent: Estimate,
    pub offers: Estimate,
    pub trade_time: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationStats {
    pub n_runs: usize,
    pub seed: u64,
    pub records: Vec<RunRecord>,
    pub summary: SimulationSummary,
}

/// Monte Carlo runs of a cutoff profile; run `r` uses ChaCha8 seeded by `seed`, stream `r`.
pub fn simulate(env: &Environment, profile: &CutoffStrategyProfile, n_runs: usize, seed: u64) -> Result<SimulationStats> {
    if n_runs == 0 {
        return Err(Error::Argument("n_runs must be at least 1".into()));
    }
    let market = Market::new(env, profile)?;
    let k = env.n_states();
    let edges = env.grid().edges();
    let cumulative: Vec<Vec<f64>> = (0..k)
        .map(|s| {
            let mut c = vec![0.0];
            for m in env.types().mass(s) {
                c.push(c[c.len() - 1] + m);
            }
            c
        })
        .collect();
    let gaps = Exp::new(env.arrival_rate()).map_err(|e| Error::Argument(e.to_string()))?;

    let records: Vec<RunRecord> = (0..n_runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(run as u64);
            let state = draw_index(env.state_weights(), rng.random::<f64>());
            let (cell, y) = draw_type(&cumulative[state], &edges, rng.random::<f64>());
            let exit = profile.exit_times[cell];
            let mut t = 0.0;
            let mut offers = 0;
            let mut record = RunRecord {
                state,
                type_value: y,
                traded: false,
                trade_time: None,
                price: None,
                surplus: 0.0,
                profit: 0.0,
                rent: 0.0,
                offers: 0,
            };
            loop {
                t += gaps.sample(&mut rng);
                if t > exit {
                    break;
                }
                offers += 1;
                let probs: Vec<f64> = (0..env.n_signals()).map(|x| env.signals().prob(x, y, state)).collect();
                let x = draw_index(&probs, rng.random::<f64>());
                if market.accepts(x, t, y) {
                    let p = market.price(t, y);
                    let profit = p - env.v_seller()[state];
                    let rent = env.v_buyer()[state] - p;
                    record.traded = true;
                    record.trade_time = Some(t);
                    record.price = Some(p);
                    record.profit = profit;
                    record.rent = rent;
                    record.surplus = profit + rent;
                    break;
                }
            }
            record.offers = offers;
            record
        })
        .collect();

    let column = |f: &dyn Fn(&RunRecord) -> f64| records.iter().map(f).collect::<Vec<f64>>();
    let traded = column(&|r| if r.traded { 1.0 } else { 0.0 });
    let by_state = (0..k)
        .map(|s| {
            Estimate::of(
                &records.iter().filter(|r| r.state == s).map(|r| if r.traded { 1.0 } else { 0.0 }).collect::<Vec<_>>(),
            )
        })
        .collect();
    let summary = SimulationSummary {
        trade_frequency: Estimate::of(&traded),
        trade_frequency_by_state: by_state,
        surplus: Estimate::of(&column(&|r| r.surplus)),
        profit: Estimate::of(&column(&|r| r.profit)),
        rent: Estimate::of(&column(&|r| r.rent)),
        offers: Estimate::of(&column(&|r| r.offers as f64)),
        trade_time: Estimate::of(&records.iter().filter_map(|r| r.trade_time).collect::<Vec<_>>()),
    };
    Ok(SimulationStats { n_runs, seed, records, summary })
}

fn draw_index(probs: &[f64], u: f64) -> usize {
    let total: f64 = probs.iter().sum();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p / total;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Inverse of the piecewise-linear CDF through the cell edges; returns (cell, type).
fn draw_type(cumulative: &[f64], edges: &[f64], u: f64) -> (usize, f64) {
    let n = edges.len() - 1;
    let u = u * cumulative[n];
    let cell = (cumulative.partition_point(|c| *c <= u).max(1) - 1).min(n - 1);
    let m = cumulative[cell + 1] - cumulative[cell];
    let frac = if m > 0.0 { ((u - cumulative[cell]) / m).clamp(0.0, 1.0) } else { 0.5 };
    (cell, edges[cell] + frac * (edges[cell + 1] - edges[cell]))
}

/// One perturbed profile and its verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationOutcome {
    pub index: usize,
    pub exit_scale: f64,
    pub accepted_signals: Vec<usize>,
    pub value: f64,
    /// Deviates from the optimum on a set of positive probability.
    pub deviates: bool,
    pub shortfall: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationReport {
    pub commitment_value: f64,
    pub outcomes: Vec<PerturbationOutcome>,
    /// Serialized offending profiles.
    pub failures: Vec<String>,
}

impl PerturbationReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Random cutoff profiles around the optimum: each must not beat the commitment value,
/// and each that deviates on a positive-probability set must fall short by more than 1e-6.
pub fn perturbation_suite(env: &Environment, com: &CommitmentSolution, n_profiles: usize, seed: u64) -> Result<PerturbationReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let top = env.top_signal();
    let nx = env.n_signals();
    let entering: f64 = (0..env.n_states())
        .map(|s| {
            env.state_weights()[s]
                * env.types().mass(s).iter().zip(com.exit_times()).filter(|(_, e)| **e > 0.0).map(|(m, _)| m).sum::<f64>()
        })
        .sum();
    let (log_lo, log_hi) = (0.25_f64.ln(), 4.0_f64.ln());
    let mut specs = Vec::with_capacity(n_profiles);
    for index in 0..n_profiles {
        if index == 0 {
            specs.push((1.0, vec![top]));
            continue;
        }
        let scale = loop {
            let s = rng.random_range(log_lo..log_hi).exp();
            if !(0.8..1.25).contains(&s) {
                break s;
            }
        };
        let set: Vec<usize> = (0..nx).filter(|_| rng.random_bool(0.5)).collect();
        specs.push((scale, set));
    }
    let mut outcomes = Vec::with_capacity(n_profiles);
    let mut failures = Vec::new();
    for (index, (scale, set)) in specs.into_iter().enumerate() {
        let exits: Vec<f64> = com.exit_times().iter().map(|e| e * scale).collect();
        let profile = CutoffStrategyProfile::new(exits, Pricing::Revealed, Acceptance::Set(set.clone()))?;
        let value = analytic_profile_value(env, &profile)?.surplus;
        let deviates = entering > 1e-12 && (scale != 1.0 || set != vec![top]);
        let shortfall = com.value() - value;
        let ok = value <= com.value() + 1e-9 && (!deviates || shortfall > 1e-6);
        if !ok {
            failures.push(
                serde_json::json!({
                    "index": index,
                    "exit_scale": scale,
                    "accepted_signals": set,
                    "value": value,
                    "commitment_value": com.value(),
                })
                .to_string(),
            );
        }
        outcomes.push(PerturbationOutcome { index, exit_scale: scale, accepted_signals: set, value, deviates, shortfall, ok });
    }
    Ok(PerturbationReport { commitment_value: com.value(), outcomes, failures })
}

/// Two single-signal trading rules with matched ex-ante trade probability.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchedSignalComparison {
    pub first_signal: usize,
    /// Surplus-maximizing common exit time when only `first_signal` buyers trade.
    pub first_exit: f64,
    pub first_conditional_surplus: f64,
    pub second_signal: usize,
    /// Exit time giving `second_signal` trading the same trade probability.
    pub second_exit: f64,
    pub second_conditional_surplus: f64,
    pub trade_probability: f64,
}

fn single_signal_value(env: &Environment, x: usize, exit: f64) -> Result<ProfileValue> {
    let profile = CutoffStrategyProfile::uniform_exit(env, exit, Pricing::Constant(0.0), Acceptance::Set(vec![x]))?;
    analytic_profile_value(env, &profile)
}

/// Trade only with `first` buyers up to the surplus-maximizing common exit time, versus
/// trade only with `second` buyers up to the exit time matching its trade probability.
pub fn matched_signal_comparison(env: &Environment, first: usize, second: usize) -> Result<MatchedSignalComparison> {
    let n = env.n_signals();
    if first >= n || second >= n {
        return Err(Error::Argument("signal index out of range".into()));
    }
    let v = env.surplus_vector();
    let lambda = env.arrival_rate();
    let nodes = env.grid().nodes();
    // marginal surplus of extending the common exit time
    let marginal = |s: f64| -> f64 {
        (0..env.n_states())
            .map(|w| {
                let terms: Vec<f64> = nodes
                    .iter()
                    .zip(env.types().mass(w))
                    .map(|(y, m)| {
                        let f = env.signals().prob(first, *y, w);
                        m * f * (-lambda * f * s).exp()
                    })
                    .collect();
                env.state_weights()[w] * v[w] * pairwise_sum(&terms)
            })
            .sum()
    };
    let first_exit = crate::commitment::crossing_with_cap_policy(marginal, crate::commitment::SolveOptions::default())?.0;
    let a = single_signal_value(env, first, first_exit)?;
    if !(a.trade_probability > 0.0) {
        return Err(Error::UndefinedConditional("first rule never trades".into()));
    }
    let target = a.trade_probability;
    let prob = |t: f64| single_signal_value(env, second, t).map(|p| p.trade_probability - target).unwrap_or(f64::NAN);
    let mut hi = first_exit.max(1.0);
    while prob(hi) < 0.0 {
        hi *= 2.0;
        if hi > 1e9 {
            return Err(Error::Convergence("cannot match trade probability".into()));
        }
    }
    let second_exit = bisect_root(prob, 0.0, hi, 1e-12)?;
    let b = single_signal_value(env, second, second_exit)?;
    Ok(MatchedSignalComparison {
        first_signal: first,
        first_exit,
        first_conditional_surplus: a.surplus / a.trade_probability,
        second_signal: second,
        second_exit,
        second_conditional_surplus: b.surplus / b.trade_probability,
        trade_probability: target,
    })
}
