//! Hedonic valuation of coalitions and the fitness of an individual.
//!
//! A coalition's preference score is the sum of its pairwise relation values
//! plus every member's price preference against the coalition average. The
//! fitness of an individual is the negated weighted L_m distance between the
//! coalition scores and their ideal values, minus penalties for duplicated
//! and missing orders. Larger is better.

use std::cmp::Ordering;

use thiserror::Error;

use crate::domain::{
    AvgPrice, Coalition, GaConfig, Gwei, HourBook, Individual, OrderIdx, Relation, Side, WeightScheme,
};

/// Allowed deviation of a weight vector's sum from 1.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// Mass shared by coalitions with positive, zero and negative relation score
/// under [`WeightScheme::RelationPromoted`].
pub const PROMOTED_MASS: [f64; 3] = [0.6, 0.2, 0.2];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoringError {
    #[error("coalition member {0} is not an order of this book")]
    MemberNotInGraph(OrderIdx),
    #[error("weights sum to {0}, expected 1")]
    WeightsDoNotSumToOne(f64),
    #[error("expected {expected} weights, got {got}")]
    WeightCount { expected: usize, got: usize },
    #[error("weights must be finite and non-negative")]
    NegativeWeight,
    #[error("individual has no coalitions")]
    NoCoalitions,
}

/// Hedonic evaluation of a single coalition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CoalitionScore {
    pub v_rel: i64,
    pub v_price: i64,
    pub f_pref: i64,
    pub ideal: i64,
    pub shortfall: i64,
}

impl CoalitionScore {
    pub fn from_parts(v_rel: i64, v_price: i64, size: usize) -> Self {
        let pairs = (size * size.saturating_sub(1) / 2) as i64;
        let ideal = pairs + size as i64;
        let f_pref = v_rel + v_price;
        CoalitionScore { v_rel, v_price, f_pref, ideal, shortfall: ideal - f_pref }
    }
}

pub fn relation_value(r: Relation) -> i64 {
    match r {
        Relation::Friendship => 1,
        Relation::Neutral => 0,
        Relation::Enemy => -1,
    }
}

fn check_members(c: &Coalition, book: &HourBook) -> Result<(), ScoringError> {
    match c.members().iter().find(|m| m.get() >= book.len()) {
        Some(&m) => Err(ScoringError::MemberNotInGraph(m)),
        None => Ok(()),
    }
}

/// Sum of relation values over unordered member pairs, each pair once.
pub fn coalition_relation_score(c: &Coalition, book: &HourBook) -> Result<i64, ScoringError> {
    check_members(c, book)?;
    let m = c.members();
    let mut total = 0;
    for (i, &a) in m.iter().enumerate() {
        for &b in &m[i + 1..] {
            total += relation_value(book.relation(a, b));
        }
    }
    Ok(total)
}

/// Seller's view of a coalition average: +1 above its offer, 0 within the
/// tolerance band below it, -1 otherwise.
pub fn seller_price_pref(offer_price: Gwei, delta: Gwei, coalition_avg: AvgPrice) -> i64 {
    let offer = offer_price.0 as i64;
    if coalition_avg.cmp_int(offer) == Ordering::Greater {
        1
    } else if coalition_avg.cmp_int(offer - delta.0 as i64) == Ordering::Greater {
        0
    } else {
        -1
    }
}

/// Buyer's view: +1 below its bid, 0 within the tolerance band above it,
/// -1 otherwise.
pub fn buyer_price_pref(bid_price: Gwei, delta: Gwei, coalition_avg: AvgPrice) -> i64 {
    let bid = bid_price.0 as i64;
    if coalition_avg.cmp_int(bid) == Ordering::Less {
        1
    } else if coalition_avg.cmp_int(bid + delta.0 as i64) == Ordering::Less {
        0
    } else {
        -1
    }
}

/// Unweighted mean of the members' limit prices.
pub fn coalition_avg_price(c: &Coalition, book: &HourBook) -> AvgPrice {
    AvgPrice::of(c.members().iter().map(|&m| book.order(m).limit_price))
}

pub fn coalition_price_score(c: &Coalition, book: &HourBook) -> Result<i64, ScoringError> {
    check_members(c, book)?;
    let avg = coalition_avg_price(c, book);
    let pref = match c.side() {
        Side::Seller => seller_price_pref,
        Side::Buyer => buyer_price_pref,
    };
    Ok(c.members()
        .iter()
        .map(|&m| {
            let o = book.order(m);
            pref(o.limit_price, o.delta_price, avg)
        })
        .sum())
}

pub fn coalition_pref_score(c: &Coalition, book: &HourBook) -> Result<CoalitionScore, ScoringError> {
    let v_rel = coalition_relation_score(c, book)?;
    let v_price = coalition_price_score(c, book)?;
    Ok(CoalitionScore::from_parts(v_rel, v_price, c.len()))
}

/// Scores of every coalition, sellers first.
pub fn individual_scores(ind: &Individual, book: &HourBook) -> Result<Vec<CoalitionScore>, ScoringError> {
    ind.coalitions().map(|c| coalition_pref_score(c, book)).collect()
}

fn weights_from_scores(scores: &[CoalitionScore], scheme: WeightScheme) -> Vec<f64> {
    let n = scores.len();
    match scheme {
        WeightScheme::Uniform => vec![1.0 / n as f64; n],
        WeightScheme::RelationPromoted => {
            let group = |s: &CoalitionScore| match s.v_rel.cmp(&0) {
                Ordering::Greater => 0,
                Ordering::Equal => 1,
                Ordering::Less => 2,
            };
            let mut sizes = [0usize; 3];
            for s in scores {
                sizes[group(s)] += 1;
            }
            let live_mass: f64 = (0..3).filter(|&g| sizes[g] > 0).map(|g| PROMOTED_MASS[g]).sum();
            scores
                .iter()
                .map(|s| {
                    let g = group(s);
                    PROMOTED_MASS[g] / live_mass / sizes[g] as f64
                })
                .collect()
        }
    }
}

/// Coalition weights in seller-then-buyer order. Empty groups of the promoted
/// scheme hand their mass to the remaining groups proportionally.
pub fn coalition_weights(ind: &Individual, book: &HourBook, scheme: WeightScheme) -> Result<Vec<f64>, ScoringError> {
    let scores = individual_scores(ind, book)?;
    if scores.is_empty() {
        return Err(ScoringError::NoCoalitions);
    }
    Ok(weights_from_scores(&scores, scheme))
}

/// `(Σ wᵢ·shortfallᵢ^m)^(1/m)`.
pub fn ideal_point_distance(scores: &[CoalitionScore], weights: &[f64], m: f64) -> Result<f64, ScoringError> {
    if scores.is_empty() {
        return Err(ScoringError::NoCoalitions);
    }
    if weights.len() != scores.len() {
        return Err(ScoringError::WeightCount { expected: scores.len(), got: weights.len() });
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(ScoringError::NegativeWeight);
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(ScoringError::WeightsDoNotSumToOne(sum));
    }
    let acc: f64 = scores.iter().zip(weights).map(|(s, w)| w * (s.shortfall as f64).powf(m)).sum();
    Ok(if m == 1.0 { acc } else { acc.powf(1.0 / m) })
}

/// Fitness under explicit weights (validated to sum to 1).
pub fn individual_fitness_with_weights(
    ind: &Individual,
    book: &HourBook,
    cfg: &GaConfig,
    weights: &[f64],
) -> Result<f64, ScoringError> {
    let scores = individual_scores(ind, book)?;
    let distance = ideal_point_distance(&scores, weights, cfg.m)?;
    let d = ind.defects(book);
    Ok(-distance - cfg.lambda_dup * d.duplicated as f64 - cfg.lambda_miss * d.missing as f64)
}

/// Fitness of an individual; 0 is the unreachable optimum, larger is better.
pub fn individual_fitness(ind: &Individual, book: &HourBook, cfg: &GaConfig) -> Result<f64, ScoringError> {
    let scores = individual_scores(ind, book)?;
    if scores.is_empty() {
        return Err(ScoringError::NoCoalitions);
    }
    let weights = weights_from_scores(&scores, cfg.weight_scheme);
    let distance = ideal_point_distance(&scores, &weights, cfg.m)?;
    let d = ind.defects(book);
    Ok(-distance - cfg.lambda_dup * d.duplicated as f64 - cfg.lambda_miss * d.missing as f64)
}
