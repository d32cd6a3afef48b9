use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::signals::{interpolate, Affine};
use crate::error::{Error, Result};
use crate::numerics::TypeGrid;

/// Ratio g(y|low)/g(y|high) for two-state likelihood-ratio families.
#[derive(Debug, Clone, PartialEq)]
pub enum Ratio {
    Affine(Affine),
    Tabulated { nodes: Vec<f64>, values: Vec<f64> },
}

impl Ratio {
    fn at(&self, y: f64) -> f64 {
        match self {
            Ratio::Affine(a) => a.at(y),
            Ratio::Tabulated { nodes, values } => interpolate(nodes, values, y),
        }
    }

    /// Integral of the ratio from `lo` to `y`.
    fn integral(&self, lo: f64, y: f64) -> f64 {
        match self {
            Ratio::Affine(a) => a.intercept * (y - lo) + 0.5 * a.slope * (y * y - lo * lo),
            Ratio::Tabulated { nodes, values } => piecewise_linear_integral(nodes, values, lo, y),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Noise {
    Normal,
    Logistic,
}

impl Noise {
    fn cdf(self, z: f64) -> f64 {
        match self {
            Noise::Normal => 0.5 * erfc(-z / std::f64::consts::SQRT_2),
            Noise::Logistic => 1.0 / (1.0 + (-z).exp()),
        }
    }
    fn upper(self, z: f64) -> f64 {
        self.cdf(-z)
    }
    fn pdf(self, z: f64) -> f64 {
        match self {
            Noise::Normal => (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            Noise::Logistic => {
                let e = (-z.abs()).exp();
                e / ((1.0 + e) * (1.0 + e))
            }
        }
    }
}

/// Seller-type distribution families.
#[derive(Debug, Clone, PartialEq)]
pub enum TypeFamily {
    /// Same uniform density in every state.
    Uninformed,
    /// Two states; the high state is uniform and the low state has density `ratio(y)` times it.
    LikelihoodRatio { ratio: Ratio },
    /// `G(y|w) = (1 - (1 - y)^a[w])^b` on [0, 1].
    Kumaraswamy { a: Vec<f64>, b: f64 },
    /// `y = w + scale * noise`, truncated to the type interval.
    Location { noise: Noise, scale: f64 },
    /// Per-state densities on nodes, linear in between, renormalized.
    Tabulated { nodes: Vec<f64>, density: Vec<Vec<f64>> },
}

/// Type distribution per state plus its tabulation on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeModel {
    family: TypeFamily,
    states: Vec<f64>,
    lo: f64,
    hi: f64,
    norm: Vec<f64>,
    state_mass: Vec<f64>,
    grid: TypeGrid,
    density: Vec<Vec<f64>>,
    cdf: Vec<Vec<f64>>,
    mass: Vec<Vec<f64>>,
}

impl TypeModel {
    pub fn new(family: TypeFamily, lo: f64, hi: f64, states: &[f64], grid_nodes: usize) -> Result<Self> {
        let k = states.len();
        match &family {
            TypeFamily::LikelihoodRatio { ratio } => {
                if k != 2 {
                    return Err(Error::Argument("likelihood-ratio types need two states".into()));
                }
                if let Ratio::Tabulated { nodes, values } = ratio {
                    check_table(nodes, std::slice::from_ref(values), lo, hi, "ratio")?;
                }
            }
            TypeFamily::Kumaraswamy { a, b } => {
                if a.len() != k {
                    return Err(Error::Argument("kumaraswamy needs one `a` per state".into()));
                }
                if a.iter().chain([b]).any(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(Error::Argument("kumaraswamy parameters must be positive".into()));
                }
                if lo != 0.0 || hi != 1.0 {
                    return Err(Error::Argument("kumaraswamy types live on [0, 1]".into()));
                }
            }
            TypeFamily::Location { scale, .. } => {
                if !(scale.is_finite() && *scale > 0.0) {
                    return Err(Error::Argument("location scale must be positive".into()));
                }
            }
            TypeFamily::Tabulated { nodes, density } => {
                if density.len() != k {
                    return Err(Error::Argument("tabulated types need one density row per state".into()));
                }
                check_table(nodes, density, lo, hi, "density")?;
            }
            TypeFamily::Uninformed => {}
        }
        let grid = TypeGrid::midpoint(lo, hi, grid_nodes)?;
        let mut model = Self {
            family,
            states: states.to_vec(),
            lo,
            hi,
            norm: vec![1.0; k],
            state_mass: vec![1.0; k],
            grid,
            density: vec![],
            cdf: vec![],
            mass: vec![],
        };
        for s in 0..k {
            model.norm[s] = model.raw_integral(s, hi);
            if !(model.norm[s].is_finite() && model.norm[s] > 0.0) {
                return Err(Error::Argument(format!("type density of state {s} has no mass")));
            }
        }
        if let TypeFamily::LikelihoodRatio { .. } = model.family {
            model.state_mass = vec![model.norm[0] / (hi - lo), 1.0];
        }
        let edges = model.grid.edges();
        for s in 0..k {
            let d: Vec<f64> = model.grid.nodes().iter().map(|y| model.density(*y, s)).collect();
            let c: Vec<f64> = model.grid.nodes().iter().map(|y| model.cdf(*y, s)).collect();
            let ce: Vec<f64> = edges.iter().map(|y| model.cdf(*y, s)).collect();
            model.density.push(d);
            model.cdf.push(c);
            model.mass.push(ce.windows(2).map(|w| w[1] - w[0]).collect());
        }
        Ok(model)
    }

    /// Same family and interval on a grid with `n` nodes.
    pub fn with_grid_nodes(&self, n: usize) -> Result<Self> {
        Self::new(self.family.clone(), self.lo, self.hi, &self.states, n)
    }

    pub fn family(&self) -> &TypeFamily {
        &self.family
    }
    pub fn lo(&self) -> f64 {
        self.lo
    }
    pub fn hi(&self) -> f64 {
        self.hi
    }
    pub fn grid(&self) -> &TypeGrid {
        &self.grid
    }
    pub fn n_states(&self) -> usize {
        self.states.len()
    }
    /// Density per state at the grid nodes.
    pub fn density_table(&self) -> &[Vec<f64>] {
        &self.density
    }
    /// CDF per state at the grid nodes.
    pub fn cdf_table(&self) -> &[Vec<f64>] {
        &self.cdf
    }
    /// Exact probability of each grid cell per state.
    pub fn mass(&self, state: usize) -> &[f64] {
        &self.mass[state]
    }
    /// Relative state weight carried by unnormalized likelihood-ratio specifications.
    pub fn state_mass(&self) -> &[f64] {
        &self.state_mass
    }

    /// Identical density in every state.
    pub fn is_uninformative(&self) -> bool {
        match &self.family {
            TypeFamily::Uninformed => true,
            _ => self.density.windows(2).all(|w| w[0] == w[1]),
        }
    }

    fn raw_density(&self, s: usize, y: f64) -> f64 {
        match &self.family {
            TypeFamily::Uninformed => 1.0,
            TypeFamily::LikelihoodRatio { ratio } => {
                if s == 0 {
                    ratio.at(y)
                } else {
                    1.0
                }
            }
            TypeFamily::Kumaraswamy { a, b } => {
                let (a, b) = (a[s], *b);
                let u = -(a * (-y).ln_1p()).exp_m1();
                b * u.powf(b - 1.0) * a * (1.0 - y).powf(a - 1.0)
            }
            TypeFamily::Location { noise, scale } => noise.pdf((y - self.states[s]) / scale) / scale,
            TypeFamily::Tabulated { nodes, density } => interpolate(nodes, &density[s], y),
        }
    }

    fn raw_integral(&self, s: usize, y: f64) -> f64 {
        let lo = self.lo;
        match &self.family {
            TypeFamily::Uninformed => y - lo,
            TypeFamily::LikelihoodRatio { ratio } => {
                if s == 0 {
                    ratio.integral(lo, y)
                } else {
                    y - lo
                }
            }
            TypeFamily::Kumaraswamy { a, b } => {
                let u = -(a[s] * (-y).ln_1p()).exp_m1();
                u.powf(*b)
            }
            TypeFamily::Location { noise, scale } => {
                let w = self.states[s];
                noise.cdf((y - w) / scale) - noise.cdf((lo - w) / scale)
            }
            TypeFamily::Tabulated { nodes, density } => piecewise_linear_integral(nodes, &density[s], lo, y),
        }
    }

    /// Density g(y|w), zero outside the interval.
    pub fn density(&self, y: f64, state: usize) -> f64 {
        if y < self.lo || y > self.hi {
            return 0.0;
        }
        self.raw_density(state, y) / self.norm[state]
    }

    /// CDF G(y|w), clamped to [0, 1].
    pub fn cdf(&self, y: f64, state: usize) -> f64 {
        if y <= self.lo {
            return 0.0;
        }
        if y >= self.hi {
            return 1.0;
        }
        (self.raw_integral(state, y) / self.norm[state]).clamp(0.0, 1.0)
    }

    /// 1 - G(y|w), computed without cancellation where the family allows.
    pub fn survival(&self, y: f64, state: usize) -> f64 {
        if y <= self.lo {
            return 1.0;
        }
        if y >= self.hi {
            return 0.0;
        }
        match &self.family {
            TypeFamily::Kumaraswamy { a, b } => {
                let tail = (a[state] * (-y).ln_1p()).exp();
                -(b * (-tail).ln_1p()).exp_m1()
            }
            TypeFamily::Location { noise, scale } => {
                let w = self.states[state];
                (noise.upper((y - w) / scale) - noise.upper((self.hi - w) / scale)) / self.norm[state]
            }
            _ => 1.0 - self.cdf(y, state),
        }
    }
}

fn check_table(nodes: &[f64], rows: &[Vec<f64>], lo: f64, hi: f64, what: &str) -> Result<()> {
    if nodes.len() < 2 || nodes.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Argument(format!("{what} nodes must be strictly increasing")));
    }
    if nodes[0] > lo || nodes[nodes.len() - 1] < hi {
        return Err(Error::Argument(format!("{what} nodes must cover [{lo}, {hi}]")));
    }
    if rows.iter().any(|r| r.len() != nodes.len()) {
        return Err(Error::Argument(format!("{what} rows must match the node count")));
    }
    if rows.iter().flatten().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Argument(format!("{what} values must be finite and nonnegative")));
    }
    Ok(())
}

/// Exact integral of the piecewise-linear interpolant from `a` to `b` (a <= b).
fn piecewise_linear_integral(xs: &[f64], ys: &[f64], a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut total = 0.0;
    for k in 1..xs.len() {
        let (l, r) = (xs[k - 1].max(a), xs[k].min(b));
        if r > l {
            total += 0.5 * (r - l) * (interpolate(xs, ys, l) + interpolate(xs, ys, r));
        }
    }
    total
}
