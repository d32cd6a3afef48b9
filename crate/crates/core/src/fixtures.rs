//! Bundled example environments.

use crate::config::{parse_environment, with_parameter, EnvironmentSpec};
use crate::error::{Error, Result};
use crate::model::Environment;

/// Name and JSON text of every bundled environment.
pub const BUNDLED: &[(&str, &str)] = &[
    ("env-a", include_str!("../fixtures/env-a.json")),
    ("env-a0", include_str!("../fixtures/env-a0.json")),
    ("env-c", include_str!("../fixtures/env-c.json")),
    ("env-k-2", include_str!("../fixtures/env-k-2.json")),
    ("env-k-1", include_str!("../fixtures/env-k-1.json")),
    ("env-k-half", include_str!("../fixtures/env-k-half.json")),
    ("figure1", include_str!("../fixtures/figure1.json")),
    ("appendix-d2", include_str!("../fixtures/appendix-d2.json")),
    ("location", include_str!("../fixtures/location.json")),
];

pub fn json(name: &str) -> Result<&'static str> {
    BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, j)| *j)
        .ok_or_else(|| Error::Argument(format!("no bundled environment named `{name}`")))
}

pub fn spec(name: &str) -> Result<EnvironmentSpec> {
    serde_json::from_str(json(name)?).map_err(|e| Error::Config(e.to_string()))
}

pub fn environment(name: &str, grid_nodes: usize) -> Result<Environment> {
    parse_environment(json(name)?, grid_nodes)
}

/// Bundled environment with one parameter replaced (see [`with_parameter`]).
pub fn environment_with(name: &str, parameter: &str, value: f64, grid_nodes: usize) -> Result<Environment> {
    with_parameter(&spec(name)?, parameter, value)?.build(grid_nodes)
}

pub fn env_a(grid_nodes: usize) -> Environment {
    environment("env-a", grid_nodes).expect("bundled env-a")
}

pub fn env_a0(grid_nodes: usize) -> Environment {
    environment("env-a0", grid_nodes).expect("bundled env-a0")
}

pub fn env_c(grid_nodes: usize) -> Environment {
    environment("env-c", grid_nodes).expect("bundled env-c")
}

/// Flipped Kumaraswamy types with shape `b` in {2, 1, 1/2}.
pub fn env_k(b: f64, grid_nodes: usize) -> Result<Environment> {
    let name = if b == 2.0 {
        "env-k-2"
    } else if b == 1.0 {
        "env-k-1"
    } else if b == 0.5 {
        "env-k-half"
    } else {
        return environment_with("env-k-2", "/types/b", b, grid_nodes);
    };
    environment(name, grid_nodes)
}

/// Example-2 environment behind the exit-time shape figure, at the given high-state prior.
pub fn figure1(prior_high: f64, grid_nodes: usize) -> Result<Environment> {
    environment_with("figure1", "prior_high", prior_high, grid_nodes)
}

pub fn appendix_d2(grid_nodes: usize) -> Environment {
    environment("appendix-d2", grid_nodes).expect("bundled appendix-d2")
}

/// Location-family types with noise scale `scale`.
pub fn location(scale: f64, grid_nodes: usize) -> Result<Environment> {
    environment_with("location", "/types/scale", scale, grid_nodes)
}
