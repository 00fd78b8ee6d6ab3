use std::fmt;
use std::str::FromStr;

use super::error::ConfigError;
use super::units::Kwh;

/// How coalition weights are assigned inside the fitness function.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum WeightScheme {
    /// Every coalition weighs `1/n`.
    #[default]
    Uniform,
    /// Coalitions with positive relation score share 0.6 of the mass, neutral
    /// and negative ones 0.2 each.
    RelationPromoted,
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WeightScheme::Uniform => "uniform",
            WeightScheme::RelationPromoted => "promoted",
        })
    }
}

impl FromStr for WeightScheme {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform" => Ok(WeightScheme::Uniform),
            "promoted" => Ok(WeightScheme::RelationPromoted),
            other => Err(format!("unknown weight scheme `{other}` (uniform|promoted)")),
        }
    }
}

/// Parameters of one coalition-formation run.
#[derive(Clone, Debug, PartialEq)]
pub struct GaConfig {
    /// Orders strictly above this quantity seed their own coalition.
    pub gamma: Kwh,
    pub pop_size: usize,
    pub iterations: usize,
    pub tournament_k: usize,
    /// Exponent of the weighted ideal-point distance.
    pub m: f64,
    pub weight_scheme: WeightScheme,
    pub lambda_dup: f64,
    pub lambda_miss: f64,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            gamma: Kwh::from_whole(10),
            pop_size: 30,
            iterations: 200,
            tournament_k: 3,
            m: 1.0,
            weight_scheme: WeightScheme::Uniform,
            lambda_dup: 1.0,
            lambda_miss: 1.0,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.pop_size < 2 {
            return Err(ConfigError::PopSize(self.pop_size));
        }
        if self.tournament_k < 2 || self.tournament_k > self.pop_size {
            return Err(ConfigError::TournamentSize(self.tournament_k));
        }
        if self.iterations < 1 {
            return Err(ConfigError::Iterations);
        }
        if !(self.m >= 1.0 && self.m.is_finite()) {
            return Err(ConfigError::DistanceParameter(self.m));
        }
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if !ok(self.lambda_dup) || !ok(self.lambda_miss) {
            return Err(ConfigError::Penalty);
        }
        Ok(())
    }
}
