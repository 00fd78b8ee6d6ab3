use std::fmt;

use thiserror::Error;

use super::graph::ProsumerId;

/// A single invariant violation found while validating session inputs.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("session has no orders")]
    NoOrders,
    #[error("duplicate order for {owner} at hour {hour}")]
    DuplicateOrder { owner: ProsumerId, hour: u8 },
    #[error("order of {owner} at hour {hour} has zero quantity")]
    ZeroQuantity { owner: ProsumerId, hour: u8 },
    #[error("order of {owner} has hour {hour} outside 0..=23")]
    InvalidHour { owner: ProsumerId, hour: u8 },
    #[error("relation between {a} and {b} is not symmetric")]
    AsymmetricRelation { a: ProsumerId, b: ProsumerId },
    #[error("relation of {0} with itself")]
    SelfRelation(ProsumerId),
    #[error("no relation declared between {a} and {b}")]
    MissingRelation { a: ProsumerId, b: ProsumerId },
    #[error("prosumer {0} is not declared")]
    UnknownProsumer(ProsumerId),
}

/// Every violation found by [`validate_session`](super::validate_session).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ValidationErrors(pub Vec<ValidationError>);

impl ValidationErrors {
    pub fn contains(&self, e: &ValidationError) -> bool {
        self.0.contains(e)
    }
}

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} validation error(s)", self.0.len())?;
        for e in &self.0 {
            write!(f, "; {e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("pop_size must be at least 2 (got {0})")]
    PopSize(usize),
    #[error("tournament_k must be at least 2 and at most pop_size (got {0})")]
    TournamentSize(usize),
    #[error("iterations must be at least 1")]
    Iterations,
    #[error("distance parameter m must be >= 1 (got {0})")]
    DistanceParameter(f64),
    #[error("penalty coefficients must be finite and non-negative")]
    Penalty,
}
