//! Population with cached fitness and pairwise distances, and the
//! diversity-aware replacement step.

use std::cmp::Ordering;

use crate::domain::{GaConfig, HourBook, Individual};
use crate::scoring::{individual_fitness, ScoringError};

use super::diversity::individual_distance;

#[derive(Clone, Debug)]
pub struct Population {
    individuals: Vec<Individual>,
    fitness: Vec<f64>,
    // Symmetric, zero diagonal.
    distance: Vec<Vec<f64>>,
}

/// What [`update_population`] did with an offspring.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Replacement {
    /// Took the place of the least diverse among the less fit members.
    LeastDiverse(usize),
    /// Took the place of the least fit member.
    Worst(usize),
    Rejected,
}

impl Population {
    pub fn new(individuals: Vec<Individual>, book: &HourBook, cfg: &GaConfig) -> Result<Self, ScoringError> {
        let fitness = individuals.iter().map(|i| individual_fitness(i, book, cfg)).collect::<Result<Vec<_>, _>>()?;
        Ok(Self::with_fitness(individuals, fitness))
    }

    pub fn with_fitness(individuals: Vec<Individual>, fitness: Vec<f64>) -> Self {
        assert_eq!(individuals.len(), fitness.len());
        let n = individuals.len();
        let mut distance = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = individual_distance(&individuals[i], &individuals[j]);
                distance[i][j] = d;
                distance[j][i] = d;
            }
        }
        Population { individuals, fitness, distance }
    }

    pub fn len(&self) -> usize {
        self.individuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.individuals.is_empty()
    }

    pub fn individuals(&self) -> &[Individual] {
        &self.individuals
    }

    pub fn fitness(&self) -> &[f64] {
        &self.fitness
    }

    /// Position of the fittest member, lowest position on ties.
    pub fn best(&self) -> usize {
        argmin_by(&self.fitness, |a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal))
    }

    /// Position of the least fit member, lowest position on ties.
    pub fn worst(&self) -> usize {
        argmin_by(&self.fitness, |a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal))
    }

    pub fn mean_fitness(&self) -> f64 {
        self.fitness.iter().sum::<f64>() / self.fitness.len() as f64
    }

    /// Distance from member `i` to its nearest other member.
    pub fn diversity(&self, i: usize) -> f64 {
        self.distance[i].iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &d)| d).fold(f64::INFINITY, f64::min)
    }

    fn replace(&mut self, i: usize, ind: Individual, fitness: f64, dists: &[f64]) {
        self.individuals[i] = ind;
        self.fitness[i] = fitness;
        for (j, &d) in dists.iter().enumerate() {
            let d = if j == i { 0.0 } else { d };
            self.distance[i][j] = d;
            self.distance[j][i] = d;
        }
    }
}

fn argmin_by(xs: &[f64], cmp: impl Fn(&f64, &f64) -> Ordering) -> usize {
    let mut best = 0;
    for i in 1..xs.len() {
        if cmp(&xs[i], &xs[best]) == Ordering::Less {
            best = i;
        }
    }
    best
}

/// Offers `offspring` to the population.
///
/// Among members strictly less fit than the offspring, the one with the
/// smallest diversity contribution is replaced if the offspring would be
/// more diverse than it (measured without that member). Failing that, the
/// least fit member is replaced if the offspring is strictly fitter. Exact
/// duplicates of a member are never inserted.
pub fn update_population(pop: &mut Population, offspring: Individual, fitness: f64) -> Replacement {
    if pop.individuals.iter().any(|p| p.same_partition(&offspring)) {
        return Replacement::Rejected;
    }
    let dists: Vec<f64> = pop.individuals.iter().map(|p| individual_distance(&offspring, p)).collect();
    let mut c_min: Option<(usize, f64)> = None;
    for i in 0..pop.len() {
        if pop.fitness[i] < fitness {
            let cd = pop.diversity(i);
            if c_min.is_none_or(|(_, best)| cd < best) {
                c_min = Some((i, cd));
            }
        }
    }
    if let Some((i, cd_min)) = c_min {
        let cd_offspring =
            dists.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &d)| d).fold(f64::INFINITY, f64::min);
        if cd_offspring > cd_min {
            pop.replace(i, offspring, fitness, &dists);
            return Replacement::LeastDiverse(i);
        }
    }
    let worst = pop.worst();
    if fitness > pop.fitness[worst] {
        pop.replace(worst, offspring, fitness, &dists);
        return Replacement::Worst(worst);
    }
    Replacement::Rejected
}
