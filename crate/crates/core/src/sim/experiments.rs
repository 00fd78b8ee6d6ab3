//! Replicated parameter studies over seeded scenarios.
//!
//! Each study is a set of arms (labelled scenario template plus search
//! configuration) run on the same seeds. For seed `s` the scenario seed and
//! the search seed are both `s`, so arms that differ only in configuration
//! see byte-identical scenarios. Seeds run in parallel; rows come back in
//! (arm, seed, hour) order regardless of completion order.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::domain::{GaConfig, Kwh, WeightScheme};
use crate::ga::compute_coalition_number;
use crate::ledger::Ledger;

use super::scenario::{generate_scenario, RelationMix, ScenarioSpec};
use super::session::{run_baseline, run_session, RunOptions, SessionError, SessionMetrics};

#[derive(Clone, Debug)]
pub struct Arm {
    pub label: String,
    pub spec: ScenarioSpec,
    pub cfg: GaConfig,
    /// Runs the coalition-free comparator instead of the search.
    pub baseline: bool,
}

impl Arm {
    pub fn new(label: impl Into<String>, spec: ScenarioSpec, cfg: GaConfig) -> Self {
        Arm { label: label.into(), spec, cfg, baseline: false }
    }

    pub fn baseline(label: impl Into<String>, spec: ScenarioSpec) -> Self {
        Arm { label: label.into(), spec, cfg: GaConfig::default(), baseline: true }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentRow {
    pub arm: String,
    pub metrics: SessionMetrics,
}

pub const ROW_CSV_HEADER_PREFIX: &str = "arm,";

pub fn rows_csv(rows: &[ExperimentRow]) -> String {
    let mut out = format!("{ROW_CSV_HEADER_PREFIX}{}\n", SessionMetrics::CSV_HEADER);
    for r in rows {
        let _ = writeln!(out, "{},{}", r.arm, r.metrics.csv_row());
    }
    out
}

fn run_arm(arm: &Arm, seed: u64) -> Result<Vec<SessionMetrics>, SessionError> {
    let doc = generate_scenario(&arm.spec.with_seed(seed))?;
    let session = doc.validate().map_err(|e| SessionError::Scenario(e.to_string()))?;
    let outcome = if arm.baseline {
        run_baseline(&session)
    } else {
        let cfg = GaConfig { seed, ..arm.cfg.clone() };
        run_session(&session, &cfg, &RunOptions::default(), &mut Ledger::in_memory())?
    };
    Ok(outcome.metrics().map(|m| SessionMetrics { seed, ..m.clone() }).collect())
}

/// Runs every arm on every seed.
pub fn run_arms(arms: &[Arm], seeds: &[u64]) -> Result<Vec<ExperimentRow>, SessionError> {
    let per_seed: Vec<Vec<Vec<SessionMetrics>>> = seeds
        .par_iter()
        .map(|&seed| arms.iter().map(|a| run_arm(a, seed)).collect::<Result<Vec<_>, _>>())
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    for (a, arm) in arms.iter().enumerate() {
        for runs in &per_seed {
            rows.extend(runs[a].iter().map(|m| ExperimentRow { arm: arm.label.clone(), metrics: m.clone() }));
        }
    }
    Ok(rows)
}

pub fn seeds(replications: usize, first: u64) -> Vec<u64> {
    (0..replications as u64).map(|i| first + i).collect()
}

/// One arm per threshold.
pub fn gamma_sweep(
    spec: &ScenarioSpec,
    gammas: &[Kwh],
    cfg: &GaConfig,
    seeds: &[u64],
) -> Result<Vec<ExperimentRow>, SessionError> {
    let arms: Vec<Arm> = gammas
        .iter()
        .map(|&g| Arm::new(format!("gamma={g}"), spec.clone(), GaConfig { gamma: g, ..cfg.clone() }))
        .collect();
    run_arms(&arms, seeds)
}

/// One arm per relation mix, on identical orders.
pub fn relation_sweep(
    spec: &ScenarioSpec,
    mixes: &[RelationMix],
    cfg: &GaConfig,
    seeds: &[u64],
) -> Result<Vec<ExperimentRow>, SessionError> {
    let arms: Vec<Arm> = mixes.iter().map(|&m| Arm::new(format!("mix={m}"), spec.with_mix(m), cfg.clone())).collect();
    run_arms(&arms, seeds)
}

/// Uniform against relation-promoted coalition weights on identical scenarios.
pub fn weight_promotion(
    spec: &ScenarioSpec,
    cfg: &GaConfig,
    seeds: &[u64],
) -> Result<Vec<ExperimentRow>, SessionError> {
    let arms: Vec<Arm> = [WeightScheme::Uniform, WeightScheme::RelationPromoted]
        .into_iter()
        .map(|w| Arm::new(format!("weights={w}"), spec.clone(), GaConfig { weight_scheme: w, ..cfg.clone() }))
        .collect();
    run_arms(&arms, seeds)
}

/// Search against the coalition-free comparator on identical scenarios.
pub fn baseline_comparison(
    spec: &ScenarioSpec,
    cfg: &GaConfig,
    seeds: &[u64],
) -> Result<Vec<ExperimentRow>, SessionError> {
    run_arms(&[Arm::new("hedonic", spec.clone(), cfg.clone()), Arm::baseline("baseline", spec.clone())], seeds)
}

/// Per-seed totals of one arm, summed over hours: `(seed, energy, mean price)`.
fn per_seed(rows: &[ExperimentRow], arm: &str) -> Vec<(u64, f64, Option<f64>)> {
    let mut out: Vec<(u64, f64, f64, usize)> = Vec::new();
    for r in rows.iter().filter(|r| r.arm == arm) {
        let m = &r.metrics;
        let price_sum = m.mean_price.map_or(0.0, |p| p * m.transactions as f64);
        match out.last_mut() {
            Some(last) if last.0 == m.seed => {
                last.1 += m.energy.as_f64();
                last.2 += price_sum;
                last.3 += m.transactions;
            }
            _ => out.push((m.seed, m.energy.as_f64(), price_sum, m.transactions)),
        }
    }
    out.into_iter().map(|(s, e, p, n)| (s, e, if n == 0 { None } else { Some(p / n as f64) })).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArmSummary {
    pub arm: String,
    pub runs: usize,
    pub mean_energy: f64,
    pub mean_sell_coalitions: f64,
    pub mean_buy_coalitions: f64,
    pub mean_price: Option<f64>,
    pub mean_price_std: Option<f64>,
    pub mean_social_index: f64,
}

impl ArmSummary {
    pub const CSV_HEADER: &'static str =
        "arm,runs,mean_energy_kwh,mean_sell_coalitions,mean_buy_coalitions,mean_price,mean_price_std,mean_social_index";

    pub fn csv_row(&self) -> String {
        let opt = |x: Option<f64>| x.map(|v| format!("{v:.4}")).unwrap_or_default();
        format!(
            "{},{},{:.3},{:.2},{:.2},{},{},{:.2}",
            self.arm,
            self.runs,
            self.mean_energy,
            self.mean_sell_coalitions,
            self.mean_buy_coalitions,
            opt(self.mean_price),
            opt(self.mean_price_std),
            self.mean_social_index
        )
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// One summary per arm, in first-appearance order. Energy is the per-seed
/// total over hours, averaged over seeds; the other figures are averaged
/// over (seed, hour) rows.
pub fn summarize(rows: &[ExperimentRow]) -> Vec<ArmSummary> {
    let mut arms: Vec<&str> = Vec::new();
    for r in rows {
        if !arms.contains(&r.arm.as_str()) {
            arms.push(&r.arm);
        }
    }
    arms.into_iter()
        .map(|arm| {
            let mine: Vec<&SessionMetrics> = rows.iter().filter(|r| r.arm == arm).map(|r| &r.metrics).collect();
            let seeds = per_seed(rows, arm);
            ArmSummary {
                arm: arm.to_owned(),
                runs: seeds.len(),
                mean_energy: mean(seeds.iter().map(|s| s.1)).unwrap_or(0.0),
                mean_sell_coalitions: mean(mine.iter().map(|m| m.sell_coalitions as f64)).unwrap_or(0.0),
                mean_buy_coalitions: mean(mine.iter().map(|m| m.buy_coalitions as f64)).unwrap_or(0.0),
                mean_price: mean(mine.iter().filter_map(|m| m.mean_price)),
                mean_price_std: mean(mine.iter().filter_map(|m| m.price_std)),
                mean_social_index: mean(mine.iter().map(|m| m.social_index as f64)).unwrap_or(0.0),
            }
        })
        .collect()
}

pub fn summary_csv(summaries: &[ArmSummary]) -> String {
    let mut out = format!("{}\n", ArmSummary::CSV_HEADER);
    for s in summaries {
        let _ = writeln!(out, "{}", s.csv_row());
    }
    out
}

/// Seed-paired comparison of total energy between two arms.
#[derive(Clone, Debug, PartialEq)]
pub struct Paired {
    pub pairs: usize,
    /// Seeds where `a` transacted strictly more than `b`.
    pub a_wins: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    /// Mean of `(a - b) / b` over seeds where `b` transacted anything.
    pub mean_relative_change: f64,
    /// Mean price of `a` relative to `b`, over seeds where both traded.
    pub mean_price_change: Option<f64>,
}

impl Paired {
    pub fn win_rate(&self) -> f64 {
        if self.pairs == 0 {
            0.0
        } else {
            self.a_wins as f64 / self.pairs as f64
        }
    }

    /// `(mean_a - mean_b) / mean_b`.
    pub fn relative_mean_change(&self) -> f64 {
        (self.mean_a - self.mean_b) / self.mean_b
    }
}

pub fn paired(rows: &[ExperimentRow], a: &str, b: &str) -> Paired {
    let xa = per_seed(rows, a);
    let xb = per_seed(rows, b);
    let pairs: Vec<_> = xa.iter().filter_map(|x| xb.iter().find(|y| y.0 == x.0).map(|y| (x, y))).collect();
    let rel: Vec<f64> = pairs.iter().filter(|(_, y)| y.1 > 0.0).map(|(x, y)| (x.1 - y.1) / y.1).collect();
    let price: Vec<f64> = pairs.iter().filter_map(|(x, y)| Some((x.2?, y.2?))).map(|(pa, pb)| (pa - pb) / pb).collect();
    Paired {
        pairs: pairs.len(),
        a_wins: pairs.iter().filter(|(x, y)| x.1 > y.1).count(),
        mean_a: mean(pairs.iter().map(|(x, _)| x.1)).unwrap_or(0.0),
        mean_b: mean(pairs.iter().map(|(_, y)| y.1)).unwrap_or(0.0),
        mean_relative_change: mean(rel.into_iter()).unwrap_or(0.0),
        mean_price_change: mean(price.into_iter()),
    }
}

/// Mean initial coalition count (sellers plus buyers) per seed for a
/// threshold, summed over hours and averaged over seeds.
pub fn mean_coalition_count(spec: &ScenarioSpec, gamma: Kwh, seeds: &[u64]) -> Result<f64, SessionError> {
    let mut total = 0usize;
    for &seed in seeds {
        let session =
            generate_scenario(&spec.with_seed(seed))?.validate().map_err(|e| SessionError::Scenario(e.to_string()))?;
        for hour in session.hours() {
            let (s, b) = compute_coalition_number(&session.book(hour), gamma);
            total += s + b;
        }
    }
    Ok(total as f64 / seeds.len().max(1) as f64)
}

/// Threshold, on a 0.25 kWh grid, whose mean coalition count is closest to
/// `target`; the smallest such threshold on ties.
pub fn calibrate_gamma(spec: &ScenarioSpec, target: f64, seeds: &[u64]) -> Result<Kwh, SessionError> {
    let top = spec.profiles.iter().map(|p| p.max).max().unwrap_or(Kwh::ZERO);
    let mut best: Option<(f64, Kwh)> = None;
    let mut g = Kwh::ZERO;
    while g <= top {
        let err = (mean_coalition_count(spec, g, seeds)? - target).abs();
        if best.is_none_or(|(e, _)| err < e) {
            best = Some((err, g));
        }
        g += Kwh::from_milli(250);
    }
    Ok(best.map_or(Kwh::ZERO, |b| b.1))
}
