//! Deterministic numerical primitives shared by the solvers.

use crate::error::{Error, Result};

pub const DEFAULT_TOL_T: f64 = 1e-9;
pub const DEFAULT_TOL_F: f64 = 1e-12;
pub const DEFAULT_FIXED_POINT_TOL: f64 = 1e-9;
pub const DEFAULT_GRID_NODES: usize = 401;

const MAX_BISECTIONS: usize = 400;

/// Quadrature nodes and weights over a type interval.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeGrid {
    lo: f64,
    hi: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl TypeGrid {
    /// Cell-centred grid: `n` equal cells, one node at each centre, weight = cell width.
    pub fn midpoint(lo: f64, hi: f64, n: usize) -> Result<Self> {
        check_interval(lo, hi)?;
        if n == 0 {
            return Err(Error::Argument("grid needs at least one node".into()));
        }
        let h = (hi - lo) / n as f64;
        let nodes = (0..n).map(|i| lo + (i as f64 + 0.5) * h).collect();
        Ok(Self { lo, hi, nodes, weights: vec![h; n] })
    }

    /// Composite trapezoid grid including both endpoints.
    pub fn trapezoid(lo: f64, hi: f64, n: usize) -> Result<Self> {
        check_interval(lo, hi)?;
        if n < 2 {
            return Err(Error::Argument("trapezoid grid needs at least two nodes".into()));
        }
        let h = (hi - lo) / (n - 1) as f64;
        let nodes = (0..n)
            .map(|i| if i == n - 1 { hi } else { lo + i as f64 * h })
            .collect();
        let mut weights = vec![h; n];
        weights[0] = h / 2.0;
        weights[n - 1] = h / 2.0;
        Ok(Self { lo, hi, nodes, weights })
    }

    /// Arbitrary nodes and weights; nodes must be strictly increasing inside [lo, hi].
    pub fn from_parts(lo: f64, hi: f64, nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        check_interval(lo, hi)?;
        if nodes.is_empty() || nodes.len() != weights.len() {
            return Err(Error::Argument(format!(
                "nodes ({}) and weights ({}) must be nonempty and equal length",
                nodes.len(),
                weights.len()
            )));
        }
        if nodes.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Argument("grid nodes must be strictly increasing".into()));
        }
        if nodes[0] < lo || nodes[nodes.len() - 1] > hi {
            return Err(Error::Argument("grid nodes must lie inside [lo, hi]".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::Argument("grid weights must be positive and finite".into()));
        }
        Ok(Self { lo, hi, nodes, weights })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }
    pub fn hi(&self) -> f64 {
        self.hi
    }
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Cell boundaries: interval ends plus midpoints between adjacent nodes.
    pub fn edges(&self) -> Vec<f64> {
        let mut e = Vec::with_capacity(self.nodes.len() + 1);
        e.push(self.lo);
        e.extend(self.nodes.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        e.push(self.hi);
        e
    }

    /// Index of the cell containing `y` (clamped to the span).
    pub fn cell_of(&self, y: f64) -> usize {
        let edges = self.edges();
        let k = edges[1..edges.len() - 1].partition_point(|e| *e <= y);
        k.min(self.nodes.len() - 1)
    }

    /// Largest spacing between consecutive nodes.
    pub fn max_spacing(&self) -> f64 {
        self.nodes.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }
}

fn check_interval(lo: f64, hi: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::Argument(format!("invalid interval [{lo}, {hi}]")));
    }
    Ok(())
}

/// Weighted sum of `values` against the grid weights.
pub fn integrate_on_grid(grid: &TypeGrid, values: &[f64]) -> Result<f64> {
    if values.len() != grid.len() {
        return Err(Error::Argument(format!(
            "expected {} values, got {}",
            grid.len(),
            values.len()
        )));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("value {i} is {}", values[i])));
    }
    Ok(pairwise_sum(
        &grid.weights.iter().zip(values).map(|(w, v)| w * v).collect::<Vec<_>>(),
    ))
}

/// Order-fixed pairwise summation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

fn finite(v: f64, what: &str, at: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numeric(format!("{what} evaluated to {v} at {at}")))
    }
}

/// Smallest `t >= 0` with `f(t) <= 0` for `f` single-crossing zero from above.
///
/// Doubles a bracket from `t = 1` up to `t_cap`, then bisects on the sign.
pub fn first_crossing_time<F>(f: F, t_cap: f64, tol_t: f64, tol_f: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(t_cap > 0.0 && tol_t > 0.0 && tol_f >= 0.0) {
        return Err(Error::Argument("t_cap and tol_t must be positive".into()));
    }
    let f0 = finite(f(0.0), "function", 0.0)?;
    if f0 <= tol_f {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = 1.0_f64.min(t_cap);
    loop {
        let fh = finite(f(hi), "function", hi)?;
        if fh <= 0.0 {
            break;
        }
        if hi >= t_cap {
            if fh > tol_f {
                return Err(Error::CapExceeded { cap: t_cap });
            }
            return Ok(t_cap);
        }
        lo = hi;
        hi = (2.0 * hi).min(t_cap);
    }
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= tol_t {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if finite(f(mid), "function", mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Root of `f` on `[lo, hi]` given a sign change, by bisection to absolute width `tol`.
pub fn bisect_root<F>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let flo = finite(f(lo), "function", lo)?;
    let fhi = finite(f(hi), "function", hi)?;
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::NoBracket(format!("no sign change on [{lo}, {hi}]")));
    }
    let lo_positive = flo > 0.0;
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol || mid <= lo || mid >= hi {
            break;
        }
        let fm = finite(f(mid), "function", mid)?;
        if (fm > 0.0) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Solves `p = map(p)` on `[lo, hi]` given `map(lo) > lo` and `map(hi) < hi`.
pub fn bisect_monotone_fixed_point<F>(map: F, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(lo < hi) || !(tol > 0.0) {
        return Err(Error::Argument(format!("bad bracket [{lo}, {hi}] or tolerance {tol}")));
    }
    let gap = |p: f64| -> Result<f64> { Ok(finite(map(p)?, "map", p)? - p) };
    let (glo, ghi) = (gap(lo)?, gap(hi)?);
    if glo.abs() <= tol {
        return Ok(lo);
    }
    if ghi.abs() <= tol {
        return Ok(hi);
    }
    if !(glo > 0.0 && ghi < 0.0) {
        return Err(Error::NoBracket(format!(
            "map(lo) - lo = {glo}, map(hi) - hi = {ghi}"
        )));
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (a + b);
        let g = gap(mid)?;
        if g.abs() <= tol {
            return Ok(mid);
        }
        if mid <= a || mid >= b {
            break;
        }
        if g > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Err(Error::Convergence(format!(
        "fixed point bracket collapsed to [{a}, {b}] without |map(p) - p| <= {tol}"
    )))
}

/// Inverse of an increasing CDF on `[lo, hi]`.
pub fn quantile_from_cdf<F>(cdf: F, lo: f64, hi: f64, q: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let (clo, chi) = (finite(cdf(lo), "cdf", lo)?, finite(cdf(hi), "cdf", hi)?);
    if !(q >= clo - tol && q <= chi + tol) {
        return Err(Error::Domain(format!("quantile {q} outside [{clo}, {chi}]")));
    }
    if (q - clo).abs() <= tol && q <= clo {
        return Ok(lo);
    }
    if q >= chi {
        return Ok(hi);
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let c = finite(cdf(mid), "cdf", mid)?;
        if c < q {
            a = mid;
        } else {
            b = mid;
        }
        if (b - a) <= f64::EPSILON * (1.0 + mid.abs()) * 4.0 {
            break;
        }
    }
    let y = 0.5 * (a + b);
    if (cdf(y) - q).abs() > tol {
        // flat or discontinuous CDF region
        return Err(Error::Precondition(format!(
            "cdf not invertible near q = {q} (cdf(y) = {})",
            cdf(y)
        )));
    }
    Ok(y)
}

/// Panel rule for time integrals: `order`-point Gauss-Legendre on [-1, 1].
pub struct PanelRule {
    pairs: Vec<(f64, f64)>,
}

impl PanelRule {
    pub fn gauss_legendre(order: usize) -> Self {
        let order = std::num::NonZeroUsize::new(order.max(1)).expect("nonzero");
        let rule = gauss_quad::GaussLegendre::new(order);
        Self { pairs: rule.as_node_weight_pairs().to_vec() }
    }

    /// Nodes and weights of the composite rule on `[a, b]` with `panels` equal panels.
    pub fn composite(&self, a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(panels * self.pairs.len());
        if !(b > a) || panels == 0 {
            return out;
        }
        let h = (b - a) / panels as f64;
        for k in 0..panels {
            let l = a + k as f64 * h;
            let r = if k + 1 == panels { b } else { l + h };
            let (c, half) = (0.5 * (l + r), 0.5 * (r - l));
            out.extend(self.pairs.iter().map(|(x, w)| (c + half * x, half * w)));
        }
        out
    }
}
