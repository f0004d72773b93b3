use num_complex::Complex64;
use thiserror::Error;

/// Crate-wide error type.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("modular parameter must satisfy Im tau > 0, got Im tau = {0}")]
    BadModularParam(f64),

    #[error("argument {arg} is within {dist:e} of the lattice point {m} + {n}*tau")]
    Pole {
        arg: Complex64,
        m: i64,
        n: i64,
        dist: f64,
    },

    #[error("pole encountered in R-matrix term (i={i}, j={j}, a=({a1},{a2})): {source}")]
    RTermPole {
        i: usize,
        j: usize,
        a1: i64,
        a2: i64,
        #[source]
        source: Box<Error>,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("lattice orders differ: {0} vs {1}")]
    LatticeMismatch(i64, i64),

    #[error("face (a,b,c,d) is not admissible: {0}")]
    Inadmissible(String),

    #[error("resource guard exceeded: {0}")]
    Resource(String),

    #[error("numerical extraction failed to converge: {0}")]
    Numeric(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
