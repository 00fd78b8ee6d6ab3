//! End-to-end market sessions: coalition search, matching, settlement,
//! metrics and ledger records.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::canon::{self, Record};
use crate::domain::scenario_file::ScenarioDoc;
use crate::domain::{
    Coalition, GaConfig, Gwei, HourBook, Individual, Kwh, OrderIdx, ProsumerId, Relation, RelationGraph, Session,
    SettlementRecord, Side,
};
use crate::ga::{self, GaError, RunTrace};
use crate::ledger::{Ledger, LedgerBlock, LedgerError, PayloadKind};
use crate::matching::{self, MatchReport, SettlementError};
use crate::scoring::relation_value;

const NOISE_STREAM: u64 = 3;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunOptions {
    /// When set, each seller delivers its commitment scaled by
    /// `1 - u * noise` with `u` uniform in `[0, 1)`.
    pub delivery_noise: Option<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error(transparent)]
    Ga(#[from] GaError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Settlement(#[from] SettlementError),
    #[error(transparent)]
    Spec(#[from] super::SpecError),
    #[error("invalid scenario: {0}")]
    Scenario(String),
}

/// Per-hour outcome figures.
#[derive(Clone, Debug, PartialEq)]
pub struct SessionMetrics {
    pub hour: u8,
    pub seed: u64,
    pub sell_coalitions: usize,
    pub buy_coalitions: usize,
    pub transactions: usize,
    pub energy: Kwh,
    pub supply: Kwh,
    pub demand: Kwh,
    pub imbalance: Kwh,
    pub mean_price: Option<f64>,
    pub min_price: Option<Gwei>,
    pub max_price: Option<Gwei>,
    /// Population standard deviation of the transaction prices.
    pub price_std: Option<f64>,
    /// Sum of pairwise relation values over the final coalitions.
    pub social_index: i64,
    /// Fitness of the final coalitions, when a search ran.
    pub best_fitness: Option<f64>,
}

impl SessionMetrics {
    pub const CSV_HEADER: &'static str = "hour,seed,sell_coalitions,buy_coalitions,transactions,energy_kwh,supply_kwh,\
demand_kwh,imbalance_kwh,mean_price,min_price,max_price,price_std,social_index,best_fitness";

    pub fn csv_row(&self) -> String {
        fn opt<T: std::fmt::Display>(x: Option<T>) -> String {
            x.map(|v| v.to_string()).unwrap_or_default()
        }
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.hour,
            self.seed,
            self.sell_coalitions,
            self.buy_coalitions,
            self.transactions,
            self.energy,
            self.supply,
            self.demand,
            self.imbalance,
            opt(self.mean_price),
            opt(self.min_price),
            opt(self.max_price),
            opt(self.price_std),
            self.social_index,
            opt(self.best_fitness),
        )
    }
}

/// Relation counts among the members of one final coalition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuditRow {
    pub hour: u8,
    pub side: Side,
    pub members: Vec<ProsumerId>,
    pub friend: usize,
    pub neutral: usize,
    pub enemy: usize,
}

impl AuditRow {
    pub const CSV_HEADER: &'static str = "hour,side,members,friendship,neutral,enemy";

    pub fn csv_row(&self) -> String {
        let members: Vec<String> = self.members.iter().map(|m| m.index.to_string()).collect();
        format!("{},{},<{}>,{},{},{}", self.hour, self.side, members.join(" "), self.friend, self.neutral, self.enemy)
    }
}

pub fn audit_coalition(book: &HourBook, c: &Coalition) -> AuditRow {
    let (mut friend, mut neutral, mut enemy) = (0, 0, 0);
    let m = c.members();
    for (i, &a) in m.iter().enumerate() {
        for &b in &m[i + 1..] {
            match book.relation(a, b) {
                Relation::Friendship => friend += 1,
                Relation::Neutral => neutral += 1,
                Relation::Enemy => enemy += 1,
            }
        }
    }
    AuditRow {
        hour: book.hour(),
        side: c.side(),
        members: m.iter().map(|&i| book.order(i).owner).collect(),
        friend,
        neutral,
        enemy,
    }
}

#[derive(Clone, Debug)]
pub struct HourOutcome {
    pub book: HourBook,
    pub coalitions: Individual,
    pub trace: Option<RunTrace>,
    pub report: MatchReport,
    pub settlement: Vec<SettlementRecord>,
    pub metrics: SessionMetrics,
    pub audit: Vec<AuditRow>,
}

#[derive(Clone, Debug, Default)]
pub struct SessionOutcome {
    pub hours: Vec<HourOutcome>,
}

impl SessionOutcome {
    pub fn metrics(&self) -> impl Iterator<Item = &SessionMetrics> {
        self.hours.iter().map(|h| &h.metrics)
    }

    pub fn audit(&self) -> impl Iterator<Item = &AuditRow> {
        self.hours.iter().flat_map(|h| &h.audit)
    }

    pub fn total_energy(&self) -> Kwh {
        self.metrics().map(|m| m.energy).sum()
    }

    pub fn metrics_csv(&self) -> String {
        let mut out = format!("{}\n", SessionMetrics::CSV_HEADER);
        for m in self.metrics() {
            let _ = writeln!(out, "{}", m.csv_row());
        }
        out
    }

    pub fn audit_csv(&self) -> String {
        let mut out = format!("{}\n", AuditRow::CSV_HEADER);
        for a in self.audit() {
            let _ = writeln!(out, "{}", a.csv_row());
        }
        out
    }
}

fn metrics_for(
    book: &HourBook,
    coalitions: &Individual,
    report: &MatchReport,
    best_fitness: Option<f64>,
    seed: u64,
) -> SessionMetrics {
    let prices: Vec<f64> = report.transactions.iter().map(|t| t.unit_price.0 as f64).collect();
    let (mean_price, price_std) = if prices.is_empty() {
        (None, None)
    } else {
        let n = prices.len() as f64;
        let mean = prices.iter().sum::<f64>() / n;
        let var = prices.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / n;
        (Some(mean), Some(var.sqrt()))
    };
    let social_index = coalitions
        .coalitions()
        .map(|c| crate::scoring::coalition_relation_score(c, book).expect("coalition from this book"))
        .sum();
    SessionMetrics {
        hour: book.hour(),
        seed,
        sell_coalitions: coalitions.side(Side::Seller).len(),
        buy_coalitions: coalitions.side(Side::Buyer).len(),
        transactions: report.transactions.len(),
        energy: report.total_matched,
        supply: report.total_supply,
        demand: report.total_demand,
        imbalance: report.imbalance,
        mean_price,
        min_price: report.transactions.iter().map(|t| t.unit_price).min(),
        max_price: report.transactions.iter().map(|t| t.unit_price).max(),
        price_std,
        social_index,
        best_fitness,
    }
}

fn delivery(report: &MatchReport, noise: Option<f64>, rng: &mut ChaCha8Rng) -> BTreeMap<OrderIdx, Kwh> {
    let mut d = matching::full_delivery(report);
    if let Some(noise) = noise {
        for q in d.values_mut() {
            let keep = 1.0 - rng.gen::<f64>() * noise.clamp(0.0, 1.0);
            *q = Kwh::from_milli((q.milli() as f64 * keep).floor() as u64);
        }
    }
    d
}

/// Scenario digest recorded when a session opens.
pub fn scenario_digest(session: &Session) -> String {
    hex::encode(Sha256::digest(ScenarioDoc::from_session(session).to_text().as_bytes()))
}

fn session_open_payload(session: &Session, cfg: &GaConfig) -> Vec<u8> {
    let hours: Vec<String> = session.hours().iter().map(|h| h.to_string()).collect();
    let r = Record::new("session")
        .with("gamma", cfg.gamma)
        .with("hours", hours.join(","))
        .with("iterations", cfg.iterations)
        .with("lambda_dup", cfg.lambda_dup)
        .with("lambda_miss", cfg.lambda_miss)
        .with("m", cfg.m)
        .with("orders", session.orders().len())
        .with("pop_size", cfg.pop_size)
        .with("prosumers", session.graph().n_prosumers())
        .with("scenario_sha256", scenario_digest(session))
        .with("seed", cfg.seed)
        .with("tournament_k", cfg.tournament_k)
        .with("weights", cfg.weight_scheme);
    canon::to_text(&[r]).into_bytes()
}

fn orders_payload(book: &HourBook) -> Vec<u8> {
    let records: Vec<Record> = book
        .orders()
        .iter()
        .map(|o| {
            Record::new("order")
                .with("delta", o.delta_price)
                .with("hour", o.hour)
                .with("kwh", o.quantity)
                .with("owner", o.owner)
                .with("price", o.limit_price)
        })
        .collect();
    canon::to_text(&records).into_bytes()
}

fn owners(members: &[ProsumerId]) -> String {
    members.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(",")
}

fn coalitions_payload(audit: &[AuditRow]) -> Vec<u8> {
    let records: Vec<Record> = audit
        .iter()
        .map(|a| {
            Record::new("coalition")
                .with("enemy", a.enemy)
                .with("friend", a.friend)
                .with("hour", a.hour)
                .with("members", owners(&a.members))
                .with("neutral", a.neutral)
                .with("side", a.side)
        })
        .collect();
    canon::to_text(&records).into_bytes()
}

fn transactions_payload(report: &MatchReport, book: &HourBook) -> Vec<u8> {
    let mut records = vec![Record::new("match")
        .with("demand", report.total_demand)
        .with("hour", report.hour)
        .with("imbalance", report.imbalance)
        .with("matched", report.total_matched)
        .with("residual_demand", report.residual_demand)
        .with("residual_supply", report.residual_supply)
        .with("supply", report.total_supply)];
    records.extend(report.to_records(book));
    canon::to_text(&records).into_bytes()
}

fn settlement_payload(settlement: &[SettlementRecord], book: &HourBook) -> Vec<u8> {
    let mut records = Vec::new();
    for s in settlement {
        for m in &s.members {
            records.push(
                Record::new("settle")
                    .with("committed", m.committed)
                    .with("delivered", m.delivered)
                    .with("hour", book.hour())
                    .with("owner", book.order(m.order).owner)
                    .with("price", s.unit_price)
                    .with("tokens", m.tokens)
                    .with("tx", s.transaction)
                    .with("under", u8::from(m.under_delivered)),
            );
        }
    }
    canon::to_text(&records).into_bytes()
}

/// Final coalitions for one hour: the repaired search result, or one
/// coalition per non-empty side when only one side is present.
fn form_coalitions(book: &HourBook, cfg: &GaConfig) -> Result<(Individual, Option<RunTrace>), GaError> {
    let both = Side::BOTH.iter().all(|&s| !book.side_orders(s).is_empty());
    if !both {
        return Ok((ga::repair(&Individual::new(vec![], vec![]), book), None));
    }
    let trace = ga::run(book, cfg)?;
    Ok((trace.best.clone(), Some(trace)))
}

/// Runs every hour of the session: coalition search, aggregation, matching,
/// settlement and metrics. Appends a `SessionOpen` block, then per hour one
/// block each of `Orders`, `Coalitions`, `Transactions` and `Settlement`.
pub fn run_session<W: Write>(
    session: &Session,
    cfg: &GaConfig,
    opts: &RunOptions,
    ledger: &mut Ledger<W>,
) -> Result<SessionOutcome, SessionError> {
    cfg.validate().map_err(GaError::from)?;
    ledger.append(PayloadKind::SessionOpen, session_open_payload(session, cfg))?;
    let mut noise_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    noise_rng.set_stream(NOISE_STREAM);
    let mut hours = Vec::new();
    for hour in session.hours() {
        let book = session.book(hour);
        let (coalitions, trace) = form_coalitions(&book, cfg)?;
        let (sell, buy) = matching::aggregate_individual(&coalitions, &book);
        let report = matching::match_coalitions(hour, sell, buy);
        let settlement = matching::settle(&report, &delivery(&report, opts.delivery_noise, &mut noise_rng))?;
        let best_fitness = trace.as_ref().map(|t| t.best_fitness);
        let metrics = metrics_for(&book, &coalitions, &report, best_fitness, cfg.seed);
        let audit: Vec<AuditRow> = coalitions.coalitions().map(|c| audit_coalition(&book, c)).collect();

        ledger.append(PayloadKind::Orders, orders_payload(&book))?;
        ledger.append(PayloadKind::Coalitions, coalitions_payload(&audit))?;
        ledger.append(PayloadKind::Transactions, transactions_payload(&report, &book))?;
        ledger.append(PayloadKind::Settlement, settlement_payload(&settlement, &book))?;

        hours.push(HourOutcome { book, coalitions, trace, report, settlement, metrics, audit });
    }
    Ok(SessionOutcome { hours })
}

/// Coalition-free comparator: every order trades on its own through the
/// same greedy matcher, which sorts bids by descending and offers by
/// ascending limit price and trades at the midpoint.
pub fn run_baseline(session: &Session) -> SessionOutcome {
    let hours = session
        .hours()
        .into_iter()
        .map(|hour| {
            let book = session.book(hour);
            let coalitions = Individual::new(
                book.side_orders(Side::Seller).iter().map(|&i| Coalition::new(Side::Seller, [i]).unwrap()).collect(),
                book.side_orders(Side::Buyer).iter().map(|&i| Coalition::new(Side::Buyer, [i]).unwrap()).collect(),
            );
            let (sell, buy) = matching::singleton_orders(&book);
            let report = matching::match_coalitions(hour, sell, buy);
            let settlement =
                matching::settle(&report, &matching::full_delivery(&report)).expect("full delivery is known");
            let metrics = metrics_for(&book, &coalitions, &report, None, 0);
            let audit = coalitions.coalitions().map(|c| audit_coalition(&book, c)).collect();
            HourOutcome { book, coalitions, trace: None, report, settlement, metrics, audit }
        })
        .collect();
    SessionOutcome { hours }
}

/// Social index per hour, recomputed from the `Coalitions` blocks of a
/// ledger against a relation graph.
pub fn social_index_from_ledger(blocks: &[LedgerBlock], graph: &RelationGraph) -> Result<BTreeMap<u8, i64>, String> {
    let mut out = BTreeMap::new();
    for b in blocks.iter().filter(|b| b.kind == PayloadKind::Coalitions) {
        let text = std::str::from_utf8(&b.payload).map_err(|e| e.to_string())?;
        for r in canon::parse(text).map_err(|e| e.to_string())? {
            let hour: u8 = r.get("hour").ok_or("coalition without hour")?.parse().map_err(|e| format!("{e}"))?;
            let members: Vec<ProsumerId> = r
                .get("members")
                .ok_or("coalition without members")?
                .split(',')
                .map(str::parse)
                .collect::<Result<_, String>>()?;
            let mut v = 0;
            for (i, &a) in members.iter().enumerate() {
                for &c in &members[i + 1..] {
                    v += relation_value(graph.relation(a, c).map_err(|e| e.to_string())?);
                }
            }
            *out.entry(hour).or_insert(0) += v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{validate_session, Order};
    use crate::ledger::{parse_ledger, verify_bytes};

    fn session(orders: &[(ProsumerId, u64, u64)]) -> Session {
        let prosumers: Vec<ProsumerId> = orders.iter().map(|o| o.0).collect();
        let orders: Vec<Order> = orders
            .iter()
            .map(|&(owner, q, p)| Order {
                owner,
                hour: 12,
                quantity: Kwh::from_whole(q),
                limit_price: Gwei(p),
                delta_price: Gwei(1),
            })
            .collect();
        let mut rels = Vec::new();
        for (i, &a) in prosumers.iter().enumerate() {
            for &b in &prosumers[i + 1..] {
                rels.push((a, b, Relation::Friendship));
            }
        }
        validate_session(&prosumers, &orders, &rels).unwrap()
    }

    fn small_cfg() -> GaConfig {
        GaConfig { pop_size: 6, iterations: 20, ..GaConfig::default() }
    }

    #[test]
    fn incompatible_prices_leave_the_whole_imbalance() {
        let s =
            session(&[(ProsumerId::seller(1), 7, 15), (ProsumerId::seller(2), 3, 18), (ProsumerId::buyer(1), 4, 5)]);
        let out = run_session(&s, &small_cfg(), &RunOptions::default(), &mut Ledger::in_memory()).unwrap();
        let m = &out.hours[0].metrics;
        assert_eq!(m.transactions, 0);
        assert_eq!(m.imbalance, m.supply.abs_diff(m.demand));
        assert_eq!(m.imbalance, Kwh::from_whole(6));
    }

    #[test]
    fn single_compatible_pair_trades_the_smaller_quantity() {
        let s = session(&[(ProsumerId::seller(1), 7, 5), (ProsumerId::buyer(1), 4, 9)]);
        let out = run_session(&s, &small_cfg(), &RunOptions::default(), &mut Ledger::in_memory()).unwrap();
        assert_eq!(out.hours[0].metrics.transactions, 1);
        assert_eq!(out.hours[0].metrics.energy, Kwh::from_whole(4));
        let base = run_baseline(&s);
        assert_eq!(base.hours[0].report.transactions, out.hours[0].report.transactions);
    }

    #[test]
    fn one_sided_hour_skips_the_search() {
        let s = session(&[(ProsumerId::seller(1), 7, 5), (ProsumerId::seller(2), 2, 5)]);
        let out = run_session(&s, &small_cfg(), &RunOptions::default(), &mut Ledger::in_memory()).unwrap();
        assert!(out.hours[0].trace.is_none());
        assert_eq!(out.hours[0].metrics.sell_coalitions, 1);
        assert_eq!(out.hours[0].metrics.energy, Kwh::ZERO);
    }

    #[test]
    fn ledger_holds_every_kind_in_order() {
        let s = session(&[(ProsumerId::seller(1), 7, 5), (ProsumerId::seller(2), 2, 6), (ProsumerId::buyer(1), 4, 9)]);
        let mut ledger = Ledger::in_memory();
        let out = run_session(&s, &small_cfg(), &RunOptions::default(), &mut ledger).unwrap();
        let blocks = parse_ledger(ledger.bytes()).unwrap();
        let kinds: Vec<PayloadKind> = blocks.iter().map(|b| b.kind).collect();
        assert_eq!(kinds, PayloadKind::ALL.to_vec());
        assert!(verify_bytes(ledger.bytes()).is_pass());
        let social = social_index_from_ledger(&blocks, s.graph()).unwrap();
        assert_eq!(social[&12], out.hours[0].metrics.social_index);
    }

    #[test]
    fn delivery_noise_reduces_tokens() {
        let s = session(&[(ProsumerId::seller(1), 7, 5), (ProsumerId::buyer(1), 7, 9)]);
        let clean = run_session(&s, &small_cfg(), &RunOptions::default(), &mut Ledger::in_memory()).unwrap();
        let noisy =
            run_session(&s, &small_cfg(), &RunOptions { delivery_noise: Some(0.5) }, &mut Ledger::in_memory()).unwrap();
        assert_eq!(clean.hours[0].settlement[0].token_amount, 7 * 7);
        assert!(noisy.hours[0].settlement[0].token_amount < 7 * 7);
        assert_eq!(noisy.hours[0].settlement[0].under_delivering().count(), 1);
    }
}
