use std::fmt;

use serde::Serialize;

use super::Environment;
use crate::error::Result;

const LSM_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub location: String,
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub worst: Option<Violation>,
}

/// Pass/fail for each maintained assumption, in a fixed order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failed(&self) -> Vec<&'static str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect()
    }

    pub fn summary(&self) -> String {
        if self.passed() {
            "all checks passed".into()
        } else {
            let parts: Vec<String> = self
                .checks
                .iter()
                .filter(|c| !c.passed)
                .map(|c| match &c.worst {
                    Some(v) => format!("{} at {} ({:e})", c.name, v.location, v.magnitude),
                    None => c.name.to_string(),
                })
                .collect();
            format!("failed: {}", parts.join("; "))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            write!(f, "{:<32} {}", c.name, if c.passed { "pass" } else { "FAIL" })?;
            if let Some(v) = &c.worst {
                write!(f, "  worst: {} ({:e})", v.location, v.magnitude)?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Tracks the most severe violation of a check.
struct Tracker {
    name: &'static str,
    worst: Option<Violation>,
}

impl Tracker {
    fn new(name: &'static str) -> Self {
        Self { name, worst: None }
    }
    /// Records a violation of size `magnitude` (larger is worse).
    fn fail(&mut self, location: impl FnOnce() -> String, magnitude: f64) {
        let worse = match &self.worst {
            None => true,
            Some(w) => magnitude > w.magnitude || magnitude.is_nan(),
        };
        if worse {
            self.worst = Some(Violation { location: location(), magnitude });
        }
    }
    fn finish(self) -> Check {
        Check { name: self.name, passed: self.worst.is_none(), worst: self.worst }
    }
}

/// Checks every maintained assumption on the environment's grid.
pub fn validate(env: &Environment) -> Result<ValidationReport> {
    let k = env.n_states();
    let nx = env.n_signals();
    let nodes = env.grid().nodes();
    let dens = env.types().density_table();

    let mut a = Tracker::new("a:buyer-value-increasing");
    for s in 1..k {
        let gap = env.v_buyer()[s] - env.v_buyer()[s - 1];
        if !(gap > 0.0) {
            a.fail(|| format!("states ({}, {})", s - 1, s), -gap);
        }
    }

    let mut b = Tracker::new("b:surplus-single-crossing");
    let v = env.surplus_vector();
    let first_pos = v.iter().position(|x| *x > 0.0);
    let has_neg = v.iter().any(|x| *x < 0.0);
    match first_pos {
        None => b.fail(|| "no state with positive surplus".into(), 0.0),
        Some(_) if !has_neg => b.fail(|| "no state with negative surplus".into(), 0.0),
        Some(j) => {
            for s in j..k {
                if !(v[s] > 0.0) {
                    b.fail(|| format!("state {s} after first positive state {j}"), -v[s]);
                }
            }
            for s in 0..j {
                if v[s] > 0.0 {
                    b.fail(|| format!("state {s}"), v[s]);
                }
            }
            let zeros = v[..j].iter().filter(|x| **x == 0.0).count();
            let zero_not_last = v[..j].iter().position(|x| *x == 0.0).is_some_and(|i| i + 1 != j);
            if zeros > 1 || zero_not_last {
                b.fail(|| "zero surplus away from the crossing".into(), 0.0);
            }
        }
    }

    let mut c = Tracker::new("c:signal-full-support");
    for (i, y) in nodes.iter().enumerate() {
        for s in 0..k {
            let mut total = 0.0;
            for x in 0..nx {
                let p = env.signals().prob(x, *y, s);
                total += p;
                if !(p > 0.0) {
                    c.fail(|| format!("signal {x}, state {s}, node {i} (y = {y})"), -p);
                }
            }
            if !((total - 1.0).abs() <= 1e-12) {
                c.fail(|| format!("state {s}, node {i}: probabilities sum to {total}"), (total - 1.0).abs());
            }
        }
    }

    let mut d = Tracker::new("d:log-supermodularity");
    let lf = |x: usize, i: usize, s: usize| env.signals().prob(x, nodes[i], s).ln();
    let lg = |i: usize, s: usize| dens[s][i].ln();
    for s in 1..k {
        for i in 0..nodes.len() {
            for x in 1..nx {
                // strict in (signal, state)
                let cross = lf(x, i, s) + lf(x - 1, i, s - 1) - lf(x, i, s - 1) - lf(x - 1, i, s);
                if !(cross > LSM_MARGIN) {
                    d.fail(|| format!("(signal, state) cell x = {x}, state = {s}, y = {}", nodes[i]), -cross);
                }
            }
            if i + 1 < nodes.len() {
                for x in 0..nx {
                    let up = lg(i + 1, s) + lf(x, i + 1, s) + lg(i, s - 1) + lf(x, i, s - 1);
                    let down = lg(i + 1, s - 1) + lf(x, i + 1, s - 1) + lg(i, s) + lf(x, i, s);
                    let cross = up - down;
                    if !(cross >= -LSM_MARGIN) {
                        d.fail(
                            || format!("(type, state) cell y = {}, state = {s}, signal {x}", nodes[i]),
                            -cross,
                        );
                    }
                }
            }
        }
    }
    for s in 0..k {
        for i in 1..nodes.len() {
            for x in 1..nx {
                let cross = lf(x, i, s) + lf(x - 1, i - 1, s) - lf(x, i - 1, s) - lf(x - 1, i, s);
                if !(cross >= -LSM_MARGIN) {
                    d.fail(|| format!("(signal, type) cell x = {x}, y = {}, state {s}", nodes[i]), -cross);
                }
            }
        }
    }

    let mut e = Tracker::new("e:top-signal-increasing");
    for (i, y) in nodes.iter().enumerate() {
        for s in 1..k {
            let gap = env.top_prob(*y, s) - env.top_prob(*y, s - 1);
            if !(gap > 0.0) {
                e.fail(|| format!("states ({}, {s}) at node {i} (y = {y})", s - 1), -gap);
            }
        }
    }

    let mut f = Tracker::new("f:feasibility");
    let y_top = nodes[nodes.len() - 1];
    let top_surplus: f64 = (0..k)
        .map(|s| env.state_weights()[s] * v[s] * dens[s][nodes.len() - 1] * env.top_prob(y_top, s))
        .sum();
    if !(top_surplus > 0.0) {
        f.fail(|| format!("largest grid type y = {y_top}"), -top_surplus);
    }

    let mut g = Tracker::new("g:normalization");
    let prior_sum: f64 = env.prior().iter().sum();
    if !((prior_sum - 1.0).abs() <= 1e-12) {
        g.fail(|| format!("prior sums to {prior_sum}"), (prior_sum - 1.0).abs());
    }
    for (s, p) in env.prior().iter().enumerate() {
        if !(*p > 0.0) {
            g.fail(|| format!("prior of state {s}"), -p);
        }
    }
    for s in 0..k {
        let m: f64 = env.types().mass(s).iter().sum();
        if !((m - 1.0).abs() <= 1e-9) {
            g.fail(|| format!("type mass of state {s} is {m}"), (m - 1.0).abs());
        }
        if let Some(i) = dens[s].iter().position(|x| !(x.is_finite() && *x > 0.0)) {
            g.fail(|| format!("type density of state {s} at node {i}"), dens[s][i]);
        }
    }

    Ok(ValidationReport {
        checks: vec![a.finish(), b.finish(), c.finish(), d.finish(), e.finish(), f.finish(), g.finish()],
    })
}
