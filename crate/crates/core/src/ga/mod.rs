//! Genetic search for hedonic coalitions.
//!
//! One run draws every random number from a single ChaCha8 stream seeded with
//! `GaConfig::seed`, in program order:
//!
//! 1. initial population: per individual, one shuffle of the non-seed
//!    sellers, then one of the non-seed buyers;
//! 2. per iteration: two tournaments (`k` distinct positions each), the
//!    crossover point for sellers then buyers, and for each of the two
//!    offspring the mutation picks (sellers then buyers, one member from each
//!    of the two selected coalitions).

mod diversity;
mod operators;
mod population;

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::domain::{ConfigError, GaConfig, HourBook, Individual, Side};
use crate::scoring::{individual_fitness, ScoringError};

pub use diversity::{diversity_contribution, individual_distance, jaccard, DiversityError};
pub use operators::{
    compute_coalition_number, crossover, enemy_dominated, mutate, random_individual, repair, seed_orders,
    tournament_select,
};
pub use population::{update_population, Population, Replacement};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GaError {
    #[error("no {0} orders in this hour")]
    EmptySide(Side),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
}

/// `pop_size` random individuals with their fitness.
pub fn generate_initial_population(
    book: &HourBook,
    cfg: &GaConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Population, GaError> {
    let individuals =
        (0..cfg.pop_size).map(|_| random_individual(book, cfg.gamma, rng)).collect::<Result<Vec<_>, _>>()?;
    Ok(Population::new(individuals, book, cfg)?)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Best fitness seen so far (never decreases).
    pub best_fitness: f64,
    pub mean_fitness: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunTrace {
    pub records: Vec<IterationRecord>,
    /// Best individual found, repaired so every order appears exactly once.
    pub best: Individual,
    /// Fitness of `best` after repair.
    pub best_fitness: f64,
    /// Fitness of the best individual before repair.
    pub search_best_fitness: f64,
    pub initial_best_fitness: f64,
    pub coalition_counts: (usize, usize),
    pub iterations: usize,
    pub seed: u64,
}

impl RunTrace {
    pub const CSV_HEADER: &'static str = "iteration,best_fitness,mean_fitness";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let _ = writeln!(out, "{},{},{}", r.iteration, r.best_fitness, r.mean_fitness);
        }
        out
    }
}

/// Runs the coalition search on one hour's orders.
pub fn run(book: &HourBook, cfg: &GaConfig) -> Result<RunTrace, GaError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let coalition_counts = compute_coalition_number(book, cfg.gamma);
    let mut pop = generate_initial_population(book, cfg, &mut rng)?;

    let first = pop.best();
    let mut best = pop.individuals()[first].clone();
    let mut best_fitness = pop.fitness()[first];
    let initial_best_fitness = best_fitness;
    let mut records = Vec::with_capacity(cfg.iterations);

    for iteration in 1..=cfg.iterations {
        let a = tournament_select(pop.fitness(), cfg.tournament_k, &mut rng);
        let b = tournament_select(pop.fitness(), cfg.tournament_k, &mut rng);
        let (o1, o2) = crossover(&pop.individuals()[a], &pop.individuals()[b], book, &mut rng);
        for child in [o1, o2] {
            let child = mutate(&child, book, &mut rng);
            let f = individual_fitness(&child, book, cfg)?;
            update_population(&mut pop, child, f);
        }
        let i = pop.best();
        if pop.fitness()[i] > best_fitness {
            best_fitness = pop.fitness()[i];
            best = pop.individuals()[i].clone();
        }
        records.push(IterationRecord { iteration, best_fitness, mean_fitness: pop.mean_fitness() });
    }

    let repaired = repair(&best, book);
    let repaired_fitness = individual_fitness(&repaired, book, cfg)?;
    Ok(RunTrace {
        records,
        best: repaired,
        best_fitness: repaired_fitness,
        search_best_fitness: best_fitness,
        initial_best_fitness,
        coalition_counts,
        iterations: cfg.iterations,
        seed: cfg.seed,
    })
}
