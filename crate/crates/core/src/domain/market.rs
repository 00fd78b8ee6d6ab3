//! Aggregated coalition orders, transactions and settlement records.

use super::graph::Side;
use super::individual::OrderIdx;
use super::units::{AvgPrice, Gwei, Kwh};

/// A coalition acting as a single market order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoalitionOrder {
    pub side: Side,
    pub total_quantity: Kwh,
    pub avg_price: AvgPrice,
    /// Each member order with the quantity it contributes.
    pub member_breakdown: Vec<(OrderIdx, Kwh)>,
}

/// Energy committed from one seller coalition to one buyer coalition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transaction {
    pub hour: u8,
    /// Index into the seller coalition orders that were matched.
    pub sell_coalition: usize,
    /// Index into the buyer coalition orders that were matched.
    pub buy_coalition: usize,
    pub quantity: Kwh,
    pub unit_price: Gwei,
    pub seller_allocations: Vec<(OrderIdx, Kwh)>,
    pub buyer_allocations: Vec<(OrderIdx, Kwh)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MemberSettlement {
    pub order: OrderIdx,
    pub committed: Kwh,
    pub delivered: Kwh,
    pub tokens: u64,
    pub under_delivered: bool,
}

/// Post-delivery settlement of one transaction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SettlementRecord {
    /// Index of the transaction in its match report.
    pub transaction: usize,
    pub unit_price: Gwei,
    pub committed_kwh: Kwh,
    pub members: Vec<MemberSettlement>,
    /// Sum of the per-member token amounts, in Gwei.
    pub token_amount: u64,
}

impl SettlementRecord {
    pub fn delivered_kwh(&self) -> Kwh {
        self.members.iter().map(|m| m.delivered).sum()
    }

    pub fn under_delivering(&self) -> impl Iterator<Item = OrderIdx> + '_ {
        self.members.iter().filter(|m| m.under_delivered).map(|m| m.order)
    }
}
