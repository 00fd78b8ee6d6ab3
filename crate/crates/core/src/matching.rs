//! Coalition order aggregation, coalition-to-coalition matching, pro-rata
//! member allocation and settlement against delivered energy.

use std::collections::BTreeMap;

use crate::canon::Record;
use crate::domain::{
    price_times_energy, AvgPrice, Coalition, CoalitionOrder, Gwei, HourBook, Individual, Kwh, MemberSettlement,
    OrderIdx, SettlementRecord, Side, Transaction,
};

/// Sums the member quantities and averages the member limit prices.
pub fn aggregate_coalition_order(c: &Coalition, book: &HourBook) -> CoalitionOrder {
    let member_breakdown: Vec<(OrderIdx, Kwh)> = c.members().iter().map(|&m| (m, book.order(m).quantity)).collect();
    CoalitionOrder {
        side: c.side(),
        total_quantity: member_breakdown.iter().map(|&(_, q)| q).sum(),
        avg_price: AvgPrice::of(c.members().iter().map(|&m| book.order(m).limit_price)),
        member_breakdown,
    }
}

/// Aggregates every coalition of an individual: `(sell, buy)`.
pub fn aggregate_individual(ind: &Individual, book: &HourBook) -> (Vec<CoalitionOrder>, Vec<CoalitionOrder>) {
    let agg = |side| ind.side(side).iter().map(|c| aggregate_coalition_order(c, book)).collect();
    (agg(Side::Seller), agg(Side::Buyer))
}

/// Every order of the book as its own coalition order: `(sell, buy)`.
pub fn singleton_orders(book: &HourBook) -> (Vec<CoalitionOrder>, Vec<CoalitionOrder>) {
    let agg = |side| {
        book.side_orders(side)
            .iter()
            .map(|&i| aggregate_coalition_order(&Coalition::new(side, [i]).expect("one member"), book))
            .collect()
    };
    (agg(Side::Seller), agg(Side::Buyer))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatchReport {
    pub hour: u8,
    pub sell: Vec<CoalitionOrder>,
    pub buy: Vec<CoalitionOrder>,
    pub transactions: Vec<Transaction>,
    pub total_supply: Kwh,
    pub total_demand: Kwh,
    pub total_matched: Kwh,
    pub residual_supply: Kwh,
    pub residual_demand: Kwh,
    pub imbalance: Kwh,
}

/// True when some integer price lies between the two averages, so that a
/// transaction price can satisfy `buy ≥ price ≥ sell`.
pub fn compatible(sell: AvgPrice, buy: AvgPrice) -> bool {
    buy.floor() >= sell.ceil()
}

/// Midpoint of the two averages rounded half-up to an integer.
pub fn midpoint_price(sell: AvgPrice, buy: AvgPrice) -> Gwei {
    let (ss, sc) = (sell.sum() as u128, sell.count() as u128);
    let (bs, bc) = (buy.sum() as u128, buy.count() as u128);
    let num = ss * bc + bs * sc;
    let den = 2 * sc * bc;
    Gwei(((2 * num + den) / (2 * den)) as u64)
}

/// Splits `quantity` across members in proportion to their weights, with
/// largest-remainder rounding at 0.001 kWh. Leftover units go to the largest
/// remainders, lowest position first on ties. Members with zero weight are
/// left out.
pub fn allocate_to_members(quantity: Kwh, weights: &[(OrderIdx, Kwh)]) -> Vec<(OrderIdx, Kwh)> {
    let members: Vec<(OrderIdx, u64)> =
        weights.iter().filter(|(_, w)| !w.is_zero()).map(|&(m, w)| (m, w.milli())).collect();
    let total: u128 = members.iter().map(|&(_, w)| w as u128).sum();
    assert!(quantity.milli() as u128 <= total, "allocation of {quantity} exceeds member total");
    if members.is_empty() {
        return Vec::new();
    }
    let q = quantity.milli() as u128;
    let mut shares: Vec<u64> = Vec::with_capacity(members.len());
    let mut remainders: Vec<(u128, usize)> = Vec::with_capacity(members.len());
    for (i, &(_, w)) in members.iter().enumerate() {
        let exact = q * w as u128;
        shares.push((exact / total) as u64);
        remainders.push((exact % total, i));
    }
    let leftover = quantity.milli() - shares.iter().sum::<u64>();
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in remainders.iter().take(leftover as usize) {
        shares[i] += 1;
    }
    members.iter().zip(shares).map(|(&(m, _), s)| (m, Kwh::from_milli(s))).collect()
}

/// Greedy price-priority matching of seller coalitions against buyer
/// coalitions.
///
/// Buyers are visited by descending average price and sellers by ascending
/// average price, ties by position. The current best pair trades
/// `min(remaining)` at [`midpoint_price`] while the pair is [`compatible`].
pub fn match_coalitions(hour: u8, sell: Vec<CoalitionOrder>, buy: Vec<CoalitionOrder>) -> MatchReport {
    assert!(sell.iter().all(|o| o.side == Side::Seller), "seller list holds a buyer coalition");
    assert!(buy.iter().all(|o| o.side == Side::Buyer), "buyer list holds a seller coalition");
    let mut sell_order: Vec<usize> = (0..sell.len()).collect();
    sell_order.sort_by(|&a, &b| sell[a].avg_price.cmp(&sell[b].avg_price).then(a.cmp(&b)));
    let mut buy_order: Vec<usize> = (0..buy.len()).collect();
    buy_order.sort_by(|&a, &b| buy[b].avg_price.cmp(&buy[a].avg_price).then(a.cmp(&b)));

    // Remaining quantity per member, used as the allocation weights.
    let mut sell_left: Vec<Vec<(OrderIdx, Kwh)>> = sell.iter().map(|o| o.member_breakdown.clone()).collect();
    let mut buy_left: Vec<Vec<(OrderIdx, Kwh)>> = buy.iter().map(|o| o.member_breakdown.clone()).collect();
    let mut sell_rem: Vec<Kwh> = sell.iter().map(|o| o.total_quantity).collect();
    let mut buy_rem: Vec<Kwh> = buy.iter().map(|o| o.total_quantity).collect();

    let mut transactions = Vec::new();
    let (mut si, mut bi) = (0, 0);
    while si < sell_order.len() && bi < buy_order.len() {
        let (s, b) = (sell_order[si], buy_order[bi]);
        if !compatible(sell[s].avg_price, buy[b].avg_price) {
            break;
        }
        let quantity = sell_rem[s].min(buy_rem[b]);
        if !quantity.is_zero() {
            let seller_allocations = allocate_to_members(quantity, &sell_left[s]);
            let buyer_allocations = allocate_to_members(quantity, &buy_left[b]);
            take(&mut sell_left[s], &seller_allocations);
            take(&mut buy_left[b], &buyer_allocations);
            sell_rem[s] -= quantity;
            buy_rem[b] -= quantity;
            transactions.push(Transaction {
                hour,
                sell_coalition: s,
                buy_coalition: b,
                quantity,
                unit_price: midpoint_price(sell[s].avg_price, buy[b].avg_price),
                seller_allocations,
                buyer_allocations,
            });
        }
        if sell_rem[s].is_zero() {
            si += 1;
        }
        if buy_rem[b].is_zero() {
            bi += 1;
        }
    }

    let total_supply: Kwh = sell.iter().map(|o| o.total_quantity).sum();
    let total_demand: Kwh = buy.iter().map(|o| o.total_quantity).sum();
    let total_matched: Kwh = transactions.iter().map(|t| t.quantity).sum();
    let residual_supply = total_supply - total_matched;
    let residual_demand = total_demand - total_matched;
    MatchReport {
        hour,
        sell,
        buy,
        transactions,
        total_supply,
        total_demand,
        total_matched,
        residual_supply,
        residual_demand,
        imbalance: residual_supply.abs_diff(residual_demand),
    }
}

fn take(left: &mut [(OrderIdx, Kwh)], alloc: &[(OrderIdx, Kwh)]) {
    for &(m, q) in alloc {
        let slot = left.iter_mut().find(|(x, _)| *x == m).expect("allocated member belongs to the coalition");
        slot.1 -= q;
    }
}

impl MatchReport {
    /// Members of the seller coalitions, with their total committed energy.
    pub fn seller_commitments(&self) -> BTreeMap<OrderIdx, Kwh> {
        let mut out: BTreeMap<OrderIdx, Kwh> =
            self.sell.iter().flat_map(|o| o.member_breakdown.iter().map(|&(m, _)| (m, Kwh::ZERO))).collect();
        for t in &self.transactions {
            for &(m, q) in &t.seller_allocations {
                *out.get_mut(&m).expect("seller member") += q;
            }
        }
        out
    }

    /// One record per transaction with the owners of both coalitions.
    pub fn to_records(&self, book: &HourBook) -> Vec<Record> {
        let owners = |o: &CoalitionOrder| {
            o.member_breakdown.iter().map(|&(m, _)| book.order(m).owner.to_string()).collect::<Vec<_>>().join(",")
        };
        self.transactions
            .iter()
            .map(|t| {
                Record::new("tx")
                    .with("hour", self.hour)
                    .with("sell", owners(&self.sell[t.sell_coalition]))
                    .with("buy", owners(&self.buy[t.buy_coalition]))
                    .with("kwh", t.quantity)
                    .with("price", t.unit_price)
            })
            .collect()
    }

    pub fn to_text(&self, book: &HourBook) -> String {
        crate::canon::to_text(&self.to_records(book))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SettlementError {
    #[error("delivery reported for {0}, which is not a seller in this match")]
    UnknownOrderInDelivery(OrderIdx),
}

/// Pays each seller member for `min(allocated, delivered left)` per
/// transaction, consuming its delivered energy across its transactions in
/// order. A seller absent from `delivered` is treated as delivering nothing.
pub fn settle(
    report: &MatchReport,
    delivered: &BTreeMap<OrderIdx, Kwh>,
) -> Result<Vec<SettlementRecord>, SettlementError> {
    let commitments = report.seller_commitments();
    if let Some(&unknown) = delivered.keys().find(|k| !commitments.contains_key(k)) {
        return Err(SettlementError::UnknownOrderInDelivery(unknown));
    }
    let mut left: BTreeMap<OrderIdx, Kwh> =
        commitments.keys().map(|&m| (m, delivered.get(&m).copied().unwrap_or(Kwh::ZERO))).collect();
    Ok(report
        .transactions
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let members: Vec<MemberSettlement> = t
                .seller_allocations
                .iter()
                .map(|&(order, committed)| {
                    let avail = left.get_mut(&order).expect("seller member");
                    let delivered = committed.min(*avail);
                    *avail -= delivered;
                    MemberSettlement {
                        order,
                        committed,
                        delivered,
                        tokens: price_times_energy(t.unit_price, delivered),
                        under_delivered: delivered < committed,
                    }
                })
                .collect();
            SettlementRecord {
                transaction: i,
                unit_price: t.unit_price,
                committed_kwh: t.quantity,
                token_amount: members.iter().map(|m| m.tokens).sum(),
                members,
            }
        })
        .collect())
}

/// Delivery map in which every seller delivers exactly what it committed.
pub fn full_delivery(report: &MatchReport) -> BTreeMap<OrderIdx, Kwh> {
    report.seller_commitments()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kwh(x: u64) -> Kwh {
        Kwh::from_whole(x)
    }

    fn co(side: Side, first: u32, members: &[(u64, u64)]) -> CoalitionOrder {
        let member_breakdown: Vec<_> =
            members.iter().enumerate().map(|(i, &(q, _))| (OrderIdx(first + i as u32), kwh(q))).collect();
        CoalitionOrder {
            side,
            total_quantity: member_breakdown.iter().map(|&(_, q)| q).sum(),
            avg_price: AvgPrice::of(members.iter().map(|&(_, p)| Gwei(p))),
            member_breakdown,
        }
    }

    fn sell(first: u32, members: &[(u64, u64)]) -> CoalitionOrder {
        co(Side::Seller, first, members)
    }

    fn buy(first: u32, members: &[(u64, u64)]) -> CoalitionOrder {
        co(Side::Buyer, first, members)
    }

    #[test]
    fn aggregation_examples() {
        let single = sell(0, &[(10, 7)]);
        assert_eq!((single.total_quantity, single.avg_price), (kwh(10), AvgPrice::new(7, 1)));
        let pair = sell(0, &[(5, 3), (3, 5)]);
        assert_eq!((pair.total_quantity, pair.avg_price), (kwh(8), AvgPrice::new(4, 1)));
        let bids = buy(0, &[(2, 10), (2, 10), (2, 10)]);
        assert_eq!((bids.total_quantity, bids.avg_price), (kwh(6), AvgPrice::new(10, 1)));
    }

    #[test]
    fn single_pair_trades_at_midpoint() {
        let r = match_coalitions(10, vec![sell(0, &[(10, 5)])], vec![buy(1, &[(10, 9)])]);
        assert_eq!(r.transactions.len(), 1);
        assert_eq!((r.transactions[0].quantity, r.transactions[0].unit_price), (kwh(10), Gwei(7)));
        assert_eq!(r.imbalance, Kwh::ZERO);
    }

    #[test]
    fn incompatible_prices_do_not_trade() {
        let r = match_coalitions(10, vec![sell(0, &[(10, 9)])], vec![buy(1, &[(10, 5)])]);
        assert!(r.transactions.is_empty());
        assert_eq!((r.residual_supply, r.residual_demand, r.imbalance), (kwh(10), kwh(10), Kwh::ZERO));
    }

    #[test]
    fn greedy_partial_fills() {
        let r = match_coalitions(10, vec![sell(0, &[(10, 4)])], vec![buy(1, &[(6, 8)]), buy(2, &[(6, 6)])]);
        let got: Vec<_> = r.transactions.iter().map(|t| (t.quantity, t.unit_price)).collect();
        assert_eq!(got, vec![(kwh(6), Gwei(6)), (kwh(4), Gwei(5))]);
        assert_eq!(r.residual_demand, kwh(2));
        assert_eq!(r.residual_supply, Kwh::ZERO);
    }

    #[test]
    fn fractional_averages_need_an_integer_price_between() {
        // 11/2 against 26/5: no integer in [5.2, 5.5].
        let s = AvgPrice::new(26, 5);
        let b = AvgPrice::new(11, 2);
        assert!(!compatible(s, b));
        assert!(compatible(AvgPrice::new(5, 1), AvgPrice::new(11, 2)));
        assert_eq!(midpoint_price(AvgPrice::new(5, 1), AvgPrice::new(11, 2)), Gwei(5));
        assert_eq!(midpoint_price(AvgPrice::new(5, 1), AvgPrice::new(6, 1)), Gwei(6));
    }

    #[test]
    fn allocation_examples() {
        let a = allocate_to_members(kwh(6), &[(OrderIdx(0), kwh(4)), (OrderIdx(1), kwh(8))]);
        assert_eq!(a, vec![(OrderIdx(0), kwh(2)), (OrderIdx(1), kwh(4))]);
        assert_eq!(allocate_to_members(kwh(3), &[(OrderIdx(5), kwh(7))]), vec![(OrderIdx(5), kwh(3))]);
        let thirds =
            allocate_to_members(kwh(1), &[(OrderIdx(0), kwh(1)), (OrderIdx(1), kwh(1)), (OrderIdx(2), kwh(1))]);
        let milli: Vec<u64> = thirds.iter().map(|(_, q)| q.milli()).collect();
        assert_eq!(milli, vec![334, 333, 333]);
    }

    fn one_tx_report(members: &[(u64, u64)]) -> MatchReport {
        let total: u64 = members.iter().map(|m| m.0).sum();
        match_coalitions(10, vec![sell(0, members)], vec![buy(10, &[(total, 20)])])
    }

    #[test]
    fn full_delivery_pays_price_times_quantity() {
        let r = one_tx_report(&[(4, 7), (8, 7)]);
        let s = settle(&r, &full_delivery(&r)).unwrap();
        assert_eq!(s.len(), 1);
        let price = r.transactions[0].unit_price.0;
        assert_eq!(s[0].token_amount, price * 12);
        assert_eq!(s[0].under_delivering().count(), 0);
    }

    #[test]
    fn zero_delivery_is_flagged() {
        let r = one_tx_report(&[(4, 7), (8, 7)]);
        let mut d = full_delivery(&r);
        d.insert(OrderIdx(0), Kwh::ZERO);
        let s = settle(&r, &d).unwrap();
        assert_eq!(s[0].members[0].tokens, 0);
        assert_eq!(s[0].under_delivering().collect::<Vec<_>>(), vec![OrderIdx(0)]);
        // A missing entry means nothing was delivered.
        d.remove(&OrderIdx(0));
        assert_eq!(settle(&r, &d).unwrap(), s);
    }

    #[test]
    fn partial_delivery_pays_the_minimum() {
        // One seller, 4 kWh allocated, price 7, 3 kWh delivered.
        let r = match_coalitions(10, vec![sell(0, &[(4, 7)])], vec![buy(1, &[(4, 7)])]);
        assert_eq!(r.transactions[0].unit_price, Gwei(7));
        let s = settle(&r, &BTreeMap::from([(OrderIdx(0), kwh(3))])).unwrap();
        assert_eq!(s[0].token_amount, 21);
        assert!(s[0].members[0].under_delivered);
    }

    #[test]
    fn unknown_delivery_key_is_an_error() {
        let r = one_tx_report(&[(4, 7)]);
        let d = BTreeMap::from([(OrderIdx(10), kwh(1))]);
        assert_eq!(settle(&r, &d), Err(SettlementError::UnknownOrderInDelivery(OrderIdx(10))));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_side(side: Side, first: u32) -> impl Strategy<Value = Vec<CoalitionOrder>> {
            proptest::collection::vec(proptest::collection::vec((1u64..20_000, 1u64..20), 1..4), 0..5).prop_map(
                move |cs| {
                    let mut next = first;
                    cs.into_iter()
                        .map(|ms| {
                            let member_breakdown: Vec<_> = ms
                                .iter()
                                .map(|&(q, _)| {
                                    next += 1;
                                    (OrderIdx(next), Kwh::from_milli(q))
                                })
                                .collect();
                            CoalitionOrder {
                                side,
                                total_quantity: member_breakdown.iter().map(|&(_, q)| q).sum(),
                                avg_price: AvgPrice::of(ms.iter().map(|&(_, p)| Gwei(p))),
                                member_breakdown,
                            }
                        })
                        .collect()
                },
            )
        }

        proptest! {
            #[test]
            fn accounting_prices_and_allocations(s in arb_side(Side::Seller, 0), b in arb_side(Side::Buyer, 1000)) {
                let r = match_coalitions(3, s.clone(), b.clone());
                prop_assert_eq!(r.total_supply, r.total_matched + r.residual_supply);
                prop_assert_eq!(r.total_demand, r.total_matched + r.residual_demand);
                prop_assert!(r.total_matched <= r.total_supply.min(r.total_demand));
                prop_assert_eq!(r.imbalance, r.residual_supply.abs_diff(r.residual_demand));
                for t in &r.transactions {
                    prop_assert!(r.buy[t.buy_coalition].avg_price.cmp_int(t.unit_price.0 as i64).is_ge());
                    prop_assert!(r.sell[t.sell_coalition].avg_price.cmp_int(t.unit_price.0 as i64).is_le());
                    prop_assert_eq!(t.seller_allocations.iter().map(|a| a.1).sum::<Kwh>(), t.quantity);
                    prop_assert_eq!(t.buyer_allocations.iter().map(|a| a.1).sum::<Kwh>(), t.quantity);
                }
                // No member is allocated more than it offered.
                for (m, q) in r.seller_commitments() {
                    let offered = r.sell.iter().flat_map(|o| &o.member_breakdown).find(|x| x.0 == m).unwrap().1;
                    prop_assert!(q <= offered);
                }
                prop_assert_eq!(match_coalitions(3, s, b), r);
            }

            #[test]
            fn allocation_sums_exactly(ws in proptest::collection::vec(0u64..5_000, 1..8), frac in 0.0f64..=1.0) {
                let weights: Vec<_> = ws.iter().enumerate().map(|(i, &w)| (OrderIdx(i as u32), Kwh::from_milli(w))).collect();
                let total: u64 = ws.iter().sum();
                let q = Kwh::from_milli((total as f64 * frac).floor() as u64);
                let a = allocate_to_members(q, &weights);
                prop_assert_eq!(a.iter().map(|x| x.1).sum::<Kwh>(), q);
                for (m, share) in a {
                    prop_assert!(share.milli() <= ws[m.get()]);
                }
            }
        }
    }
}
