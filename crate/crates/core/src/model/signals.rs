use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Affine {
    pub intercept: f64,
    pub slope: f64,
}

impl Affine {
    pub fn new(intercept: f64, slope: f64) -> Self {
        Self { intercept, slope }
    }
    pub fn at(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// How buyer-signal probabilities depend on the seller type and the state.
#[derive(Debug, Clone, PartialEq)]
pub enum SignalKind {
    /// Conditionally independent table `probs[x][state]`.
    Table { probs: Vec<Vec<f64>> },
    /// Binary test, top probability `1 - (1 - psi_type(y)) (1 - psi_state[w])`.
    Or { psi_type: Affine, psi_state: Vec<f64> },
    /// Binary test, top probability `psi_type(y) * psi_state[w]^state_exponent`.
    And { psi_type: Affine, psi_state: Vec<f64>, state_exponent: f64 },
    /// Binary test, top probability `1 / (1 + exp(-slopes[w] * y))`.
    Logistic { slopes: Vec<f64> },
    /// Table on type nodes `probs[x][state][node]`, linear in y between nodes.
    TypeTable { nodes: Vec<f64>, probs: Vec<Vec<Vec<f64>>> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalModel {
    values: Vec<f64>,
    kind: SignalKind,
}

impl SignalModel {
    pub fn new(values: Vec<f64>, kind: SignalKind) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Argument("need at least two signal values".into()));
        }
        if values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Argument("signal values must be strictly increasing".into()));
        }
        let n = values.len();
        match &kind {
            SignalKind::Table { probs } => {
                if probs.len() != n {
                    return Err(Error::Argument(format!(
                        "signal table has {} rows for {n} signals",
                        probs.len()
                    )));
                }
            }
            SignalKind::Or { .. } | SignalKind::And { .. } | SignalKind::Logistic { .. } => {
                if n != 2 {
                    return Err(Error::Argument("binary signal tests need exactly two signals".into()));
                }
            }
            SignalKind::TypeTable { nodes, probs } => {
                if probs.len() != n {
                    return Err(Error::Argument("type table needs one row per signal".into()));
                }
                if nodes.len() < 2 || nodes.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::Argument("type table nodes must be increasing".into()));
                }
                if probs.iter().flatten().any(|r| r.len() != nodes.len()) {
                    return Err(Error::Argument("type table rows must match node count".into()));
                }
            }
        }
        Ok(Self { values, kind })
    }

    /// Conditionally independent two-signal table from the top-signal probability per state.
    pub fn binary_table(top: &[f64]) -> Result<Self> {
        Self::new(
            vec![0.0, 1.0],
            SignalKind::Table { probs: vec![top.iter().map(|p| 1.0 - p).collect(), top.to_vec()] },
        )
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn kind(&self) -> &SignalKind {
        &self.kind
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
    pub fn top(&self) -> usize {
        self.values.len() - 1
    }

    /// Number of states the parameters are written for.
    pub fn n_states(&self) -> usize {
        match &self.kind {
            SignalKind::Table { probs } => probs[0].len(),
            SignalKind::Or { psi_state, .. } | SignalKind::And { psi_state, .. } => psi_state.len(),
            SignalKind::Logistic { slopes } => slopes.len(),
            SignalKind::TypeTable { probs, .. } => probs[0].len(),
        }
    }

    pub fn index_of(&self, x: f64) -> Option<usize> {
        self.values.iter().position(|v| *v == x)
    }

    /// Signal probabilities do not vary with the seller type.
    pub fn is_conditionally_independent(&self) -> bool {
        match &self.kind {
            SignalKind::Table { .. } => true,
            SignalKind::Or { psi_type, .. } | SignalKind::And { psi_type, .. } => psi_type.slope == 0.0,
            SignalKind::Logistic { slopes } => slopes.iter().all(|c| *c == 0.0),
            SignalKind::TypeTable { probs, .. } => probs
                .iter()
                .flatten()
                .all(|row| row.iter().all(|p| *p == row[0])),
        }
    }

    /// Probability of the top signal.
    pub fn top_prob(&self, y: f64, state: usize) -> f64 {
        self.prob(self.top(), y, state)
    }

    /// f(x | y, w) for signal index `x`.
    pub fn prob(&self, x: usize, y: f64, state: usize) -> f64 {
        let binary = |top: f64| if x == 1 { top } else { 1.0 - top };
        match &self.kind {
            SignalKind::Table { probs } => probs[x][state],
            SignalKind::Or { psi_type, psi_state } => {
                binary(1.0 - (1.0 - psi_type.at(y)) * (1.0 - psi_state[state]))
            }
            SignalKind::And { psi_type, psi_state, state_exponent } => {
                binary(psi_type.at(y) * psi_state[state].powf(*state_exponent))
            }
            SignalKind::Logistic { slopes } => binary(1.0 / (1.0 + (-slopes[state] * y).exp())),
            SignalKind::TypeTable { nodes, probs } => interpolate(nodes, &probs[x][state], y),
        }
    }
}

/// Piecewise-linear interpolation, clamped at the ends.
pub(crate) fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return ys[0];
    }
    let n = xs.len();
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let k = xs.partition_point(|v| *v <= x).clamp(1, n - 1);
    let (x0, x1) = (xs[k - 1], xs[k]);
    let w = (x - x0) / (x1 - x0);
    ys[k - 1] + w * (ys[k] - ys[k - 1])
}
