use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuinError {
    #[error("argument {value} outside the domain of {what}")]
    Domain { what: &'static str, value: f64 },

    #[error("quadrature did not converge: value {value}, achieved error {achieved}")]
    Quadrature { achieved: f64, value: f64 },

    #[error("conditional interval ({lo}, {hi}] is degenerate (ln mass {ln_mass})")]
    DegenerateInterval { lo: f64, hi: f64, ln_mass: f64 },

    #[error("cutoffs not increasing at distance {distance}: {cutoffs:?}")]
    InconsistentCutoffs { distance: f64, cutoffs: Vec<f64> },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parameter search failed: {0}")]
    Selection(String),

    #[error("{0} is not available for this model")]
    NotApplicable(&'static str),

    #[error("residual density negative ({value}) at x = {x}, distance {distance}")]
    NegativeResidual { x: f64, distance: f64, value: f64 },

    #[error("need at least {needed} accepted paths, have {have}")]
    InsufficientSample { needed: usize, have: usize },
}

pub type Result<T> = std::result::Result<T, RuinError>;
