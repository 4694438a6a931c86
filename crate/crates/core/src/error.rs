use thiserror::Error;

use crate::geometry::Vec2;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("failed to read scenario file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scenario: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Validation(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SocialError {
    #[error("persons {a} and {b} share the same position")]
    CoincidentPersons { a: u32, b: u32 },
    #[error("query point ({:.3}, {:.3}) lies within r_min of person {person}", point.x, point.y)]
    Singularity { point: Vec2, person: u32 },
    #[error("query point ({:.3}, {:.3}) lies within r_min of the dipole center", point.x, point.y)]
    NearCenter { point: Vec2 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OopError {
    #[error("group is empty")]
    EmptyGroup,
    #[error("no observation position converged: best residual {residual:.3e} at ({:.3}, {:.3})", best.x, best.y)]
    NoConvergence { best: Vec2, residual: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TspError {
    #[error("visit sequence requested for {0} targets; exact solver supports at most {max}", max = crate::cruise::MAX_EXACT_TSP)]
    TooManyTargets(usize),
    #[error("visit sequence requested with no targets")]
    Empty,
}
