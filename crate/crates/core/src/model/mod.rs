//! Market primitives, their validation, and the basic probability objects.

mod signals;
mod types;
mod validate;

pub use signals::{Affine, SignalKind, SignalModel};
pub use types::{Noise, Ratio, TypeFamily, TypeModel};
pub use validate::{validate, Check, ValidationReport, Violation};

use crate::error::{Error, Result};
use crate::numerics::TypeGrid;

/// Complete market primitives.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    states: Vec<f64>,
    prior: Vec<f64>,
    v_buyer: Vec<f64>,
    v_seller: Vec<f64>,
    signals: SignalModel,
    types: TypeModel,
    arrival_rate: f64,
    weights: Vec<f64>,
}

impl Environment {
    /// Builds an environment after structural checks; economic assumptions are left to [`validate`].
    pub fn new(
        states: Vec<f64>,
        prior: Vec<f64>,
        v_buyer: Vec<f64>,
        v_seller: Vec<f64>,
        signals: SignalModel,
        types: TypeModel,
        arrival_rate: f64,
    ) -> Result<Self> {
        let k = states.len();
        if k < 2 {
            return Err(Error::Argument("need at least two states".into()));
        }
        if states.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Argument("states must be strictly increasing".into()));
        }
        for (name, v) in [("prior", &prior), ("v_buyer", &v_buyer), ("v_seller", &v_seller)] {
            if v.len() != k {
                return Err(Error::Argument(format!("{name} has {} entries for {k} states", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Argument(format!("{name} has non-finite entries")));
            }
        }
        if prior.iter().any(|p| *p < 0.0) || prior.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Argument("prior must be nonnegative with positive mass".into()));
        }
        if signals.n_states() != k {
            return Err(Error::Argument(format!(
                "signal parameters cover {} states, expected {k}",
                signals.n_states()
            )));
        }
        if types.n_states() != k {
            return Err(Error::Argument("type model state count mismatch".into()));
        }
        if !(arrival_rate.is_finite() && arrival_rate > 0.0) {
            return Err(Error::Argument("arrival_rate must be > 0".into()));
        }
        let raw: Vec<f64> = prior.iter().zip(types.state_mass()).map(|(p, c)| p * c).collect();
        let total: f64 = raw.iter().sum();
        let weights = raw.iter().map(|w| w / total).collect();
        Ok(Self { states, prior, v_buyer, v_seller, signals, types, arrival_rate, weights })
    }

    fn rebuild(&self, prior: Vec<f64>, v_buyer: Vec<f64>, v_seller: Vec<f64>) -> Result<Self> {
        Self::new(
            self.states.clone(),
            prior,
            v_buyer,
            v_seller,
            self.signals.clone(),
            self.types.clone(),
            self.arrival_rate,
        )
    }

    pub fn with_prior(&self, prior: Vec<f64>) -> Result<Self> {
        self.rebuild(prior, self.v_buyer.clone(), self.v_seller.clone())
    }

    pub fn with_values(&self, v_buyer: Vec<f64>, v_seller: Vec<f64>) -> Result<Self> {
        self.rebuild(self.prior.clone(), v_buyer, v_seller)
    }

    pub fn with_signals(&self, signals: SignalModel) -> Result<Self> {
        Self::new(
            self.states.clone(),
            self.prior.clone(),
            self.v_buyer.clone(),
            self.v_seller.clone(),
            signals,
            self.types.clone(),
            self.arrival_rate,
        )
    }

    pub fn with_types(&self, types: TypeModel) -> Result<Self> {
        Self::new(
            self.states.clone(),
            self.prior.clone(),
            self.v_buyer.clone(),
            self.v_seller.clone(),
            self.signals.clone(),
            types,
            self.arrival_rate,
        )
    }

    pub fn with_arrival_rate(&self, rate: f64) -> Result<Self> {
        Self::new(
            self.states.clone(),
            self.prior.clone(),
            self.v_buyer.clone(),
            self.v_seller.clone(),
            self.signals.clone(),
            self.types.clone(),
            rate,
        )
    }

    pub fn with_grid_nodes(&self, n: usize) -> Result<Self> {
        self.with_types(self.types.with_grid_nodes(n)?)
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }
    /// Prior as specified.
    pub fn prior(&self) -> &[f64] {
        &self.prior
    }
    /// State weights entering every joint (state, type) integral: the prior times the
    /// state mass of the type specification, normalized.
    pub fn state_weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn v_buyer(&self) -> &[f64] {
        &self.v_buyer
    }
    pub fn v_seller(&self) -> &[f64] {
        &self.v_seller
    }
    pub fn signals(&self) -> &SignalModel {
        &self.signals
    }
    pub fn types(&self) -> &TypeModel {
        &self.types
    }
    pub fn grid(&self) -> &TypeGrid {
        self.types.grid()
    }
    pub fn arrival_rate(&self) -> f64 {
        self.arrival_rate
    }
    pub fn n_states(&self) -> usize {
        self.states.len()
    }
    pub fn n_signals(&self) -> usize {
        self.signals.len()
    }
    pub fn top_signal(&self) -> usize {
        self.signals.top()
    }

    pub fn is_conditionally_independent(&self) -> bool {
        self.signals.is_conditionally_independent()
    }

    /// v_B(w) - v_S(w) for every state.
    pub fn surplus_vector(&self) -> Vec<f64> {
        self.v_buyer.iter().zip(&self.v_seller).map(|(b, s)| b - s).collect()
    }

    /// Prior mean of the buyer value.
    pub fn expected_buyer_value(&self) -> f64 {
        self.weights.iter().zip(&self.v_buyer).map(|(w, v)| w * v).sum()
    }

    pub(crate) fn top_prob(&self, y: f64, state: usize) -> f64 {
        self.signals.top_prob(y, state)
    }

    pub(crate) fn check_type(&self, y: f64) -> Result<()> {
        if !(y >= self.types.lo() && y <= self.types.hi()) {
            return Err(Error::Domain(format!(
                "type {y} outside [{}, {}]",
                self.types.lo(),
                self.types.hi()
            )));
        }
        Ok(())
    }

    /// Normalized posterior over states given type `y` and an event with likelihood
    /// `lik(w) * exp(-lambda f(xbar|y,w) t)`; `None` when every weight vanishes.
    pub(crate) fn arrival_posterior<L>(&self, t: f64, y: f64, lik: L) -> Option<Vec<f64>>
    where
        L: Fn(usize) -> f64,
    {
        let logs: Vec<f64> = (0..self.n_states())
            .map(|s| {
                let base = self.weights[s] * self.types.density(y, s) * lik(s);
                if base > 0.0 {
                    base.ln() - self.arrival_rate * self.top_prob(y, s) * t
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        normalize_logs(&logs)
    }
}

/// Softmax of log-weights; `None` if all are -inf or any is NaN.
pub(crate) fn normalize_logs(logs: &[f64]) -> Option<Vec<f64>> {
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() || logs.iter().any(|l| l.is_nan()) {
        return None;
    }
    let e: Vec<f64> = logs.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = e.iter().sum();
    Some(e.into_iter().map(|x| x / s).collect())
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_state(env: &Environment, state: usize) -> Result<()> {
    if state >= env.n_states() {
        return Err(Error::Argument(format!(
            "state index {state} out of range for {} states",
            env.n_states()
        )));
    }
    Ok(())
}

/// Gains from trade v(w) = v_B(w) - v_S(w).
pub fn surplus(env: &Environment, state: usize) -> Result<f64> {
    check_state(env, state)?;
    Ok(env.v_buyer[state] - env.v_seller[state])
}

/// Adjacent state indices bracketing the sign change of v, and whether v hits zero on the grid.
pub fn crossing_state(env: &Environment) -> Result<(usize, usize, bool)> {
    let v = env.surplus_vector();
    if let Some(i) = v.iter().position(|x| x.abs() <= 1e-12) {
        return Ok((i, i, true));
    }
    match v.iter().position(|x| *x > 0.0) {
        Some(j) if j > 0 && v[..j].iter().all(|x| *x < 0.0) => Ok((j - 1, j, false)),
        _ => Err(Error::InvalidEnvironment(Box::new(validate(env)?))),
    }
}

/// Probability of the top buyer signal.
pub fn f_bar(env: &Environment, y: f64, state: usize) -> Result<f64> {
    check_state(env, state)?;
    env.check_type(y)?;
    Ok(env.top_prob(y, state))
}

/// Hazard rate g(y|w) / (1 - G(y|w)) of the seller type.
pub fn hazard_rate(env: &Environment, y: f64, state: usize) -> Result<f64> {
    check_state(env, state)?;
    env.check_type(y)?;
    hazard_rate_of(env.types(), y, state)
}

pub(crate) fn hazard_rate_of(types: &TypeModel, y: f64, state: usize) -> Result<f64> {
    let tail = types.survival(y, state);
    if !(tail > 1e-12) {
        return Err(Error::Singularity(format!("G({y}|state {state}) is within 1e-12 of 1")));
    }
    Ok(types.density(y, state) / tail)
}

/// Cross-state hazard ratio r_G(y|high) / r_G(y|low) for two-state environments.
pub fn hazard_ratio(env: &Environment, y: f64) -> Result<f64> {
    if env.n_states() != 2 {
        return Err(Error::Precondition("hazard ratio needs exactly two states".into()));
    }
    Ok(hazard_rate(env, y, 1)? / hazard_rate(env, y, 0)?)
}

/// Posterior over states held by seller type `y`.
pub fn posterior_type_belief(env: &Environment, y: f64) -> Result<Vec<f64>> {
    env.check_type(y)?;
    env.arrival_posterior(0.0, y, |_| 1.0)
        .ok_or_else(|| Error::UndefinedConditional(format!("type {y} has zero density in every state")))
}
