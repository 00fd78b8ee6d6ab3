//! Orders, validated sessions and the per-hour order book.

use std::collections::{BTreeSet, HashSet};

use super::error::{ValidationError, ValidationErrors};
use super::graph::{ProsumerId, Relation, RelationGraph, Side};
use super::individual::{Coalition, OrderIdx};
use super::units::{Gwei, Kwh};

/// A day-ahead offer (seller owner) or bid (buyer owner) for one hour.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Order {
    pub owner: ProsumerId,
    pub hour: u8,
    pub quantity: Kwh,
    pub limit_price: Gwei,
    pub delta_price: Gwei,
}

impl Order {
    pub fn side(&self) -> Side {
        self.owner.side
    }

    pub fn is_offer(&self) -> bool {
        self.owner.side == Side::Seller
    }
}

/// Orders and relations that passed every intake check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Session {
    graph: RelationGraph,
    orders: Vec<Order>,
}

/// Validates raw session inputs, collecting every violation.
pub fn validate_session(
    prosumers: &[ProsumerId],
    orders: &[Order],
    relations: &[(ProsumerId, ProsumerId, Relation)],
) -> Result<Session, ValidationErrors> {
    let mut errors = Vec::new();
    if orders.is_empty() {
        errors.push(ValidationError::NoOrders);
    }
    let graph = match RelationGraph::from_entries(prosumers.iter().copied(), relations, None) {
        Ok(g) => Some(g),
        Err(mut e) => {
            errors.append(&mut e);
            None
        }
    };
    let declared: HashSet<ProsumerId> = prosumers.iter().copied().collect();
    let mut seen = HashSet::new();
    for o in orders {
        if !declared.contains(&o.owner) {
            errors.push(ValidationError::UnknownProsumer(o.owner));
        }
        if o.hour > 23 {
            errors.push(ValidationError::InvalidHour { owner: o.owner, hour: o.hour });
        }
        if o.quantity.is_zero() {
            errors.push(ValidationError::ZeroQuantity { owner: o.owner, hour: o.hour });
        }
        if !seen.insert((o.owner, o.hour)) {
            errors.push(ValidationError::DuplicateOrder { owner: o.owner, hour: o.hour });
        }
    }
    match graph {
        Some(graph) if errors.is_empty() => Ok(Session { graph, orders: orders.to_vec() }),
        _ => Err(ValidationErrors(errors)),
    }
}

impl Session {
    pub fn graph(&self) -> &RelationGraph {
        &self.graph
    }

    pub fn orders(&self) -> &[Order] {
        &self.orders
    }

    pub fn hours(&self) -> Vec<u8> {
        self.orders.iter().map(|o| o.hour).collect::<BTreeSet<_>>().into_iter().collect()
    }

    /// The order book for one hour. Orders keep their session order.
    pub fn book(&self, hour: u8) -> HourBook {
        let orders: Vec<Order> = self.orders.iter().filter(|o| o.hour == hour).copied().collect();
        HourBook::new(hour, orders, &self.graph).expect("validated session yields a valid book")
    }
}

/// One hour of a session: its orders plus the relation values between their
/// owners, indexed by [`OrderIdx`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HourBook {
    hour: u8,
    orders: Vec<Order>,
    relations: Vec<Relation>,
    sellers: Vec<OrderIdx>,
    buyers: Vec<OrderIdx>,
}

impl HourBook {
    pub fn new(hour: u8, orders: Vec<Order>, graph: &RelationGraph) -> Result<Self, ValidationErrors> {
        let mut errors = Vec::new();
        let mut owners = HashSet::new();
        for o in &orders {
            if !graph.contains(o.owner) {
                errors.push(ValidationError::UnknownProsumer(o.owner));
            }
            if !owners.insert(o.owner) {
                errors.push(ValidationError::DuplicateOrder { owner: o.owner, hour });
            }
            if o.quantity.is_zero() {
                errors.push(ValidationError::ZeroQuantity { owner: o.owner, hour });
            }
        }
        if !errors.is_empty() {
            return Err(ValidationErrors(errors));
        }
        let n = orders.len();
        let mut relations = vec![Relation::Neutral; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let r = graph.relation(orders[i].owner, orders[j].owner).expect("owners checked");
                relations[i * n + j] = r;
                relations[j * n + i] = r;
            }
        }
        let idx = |side| {
            orders
                .iter()
                .enumerate()
                .filter(|(_, o)| o.side() == side)
                .map(|(i, _)| OrderIdx(i as u32))
                .collect::<Vec<_>>()
        };
        let sellers = idx(Side::Seller);
        let buyers = idx(Side::Buyer);
        Ok(HourBook { hour, orders, relations, sellers, buyers })
    }

    pub fn hour(&self) -> u8 {
        self.hour
    }

    pub fn orders(&self) -> &[Order] {
        &self.orders
    }

    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }

    pub fn get(&self, idx: OrderIdx) -> Option<&Order> {
        self.orders.get(idx.0 as usize)
    }

    pub fn order(&self, idx: OrderIdx) -> &Order {
        &self.orders[idx.0 as usize]
    }

    pub fn side_orders(&self, side: Side) -> &[OrderIdx] {
        match side {
            Side::Seller => &self.sellers,
            Side::Buyer => &self.buyers,
        }
    }

    /// Relation between the owners of two distinct orders.
    pub fn relation(&self, a: OrderIdx, b: OrderIdx) -> Relation {
        debug_assert_ne!(a, b);
        self.relations[a.0 as usize * self.orders.len() + b.0 as usize]
    }

    pub fn total(&self, side: Side) -> Kwh {
        self.side_orders(side).iter().map(|&i| self.order(i).quantity).sum()
    }

    /// Checks that a coalition only references orders of its own side.
    pub fn is_homogeneous(&self, c: &Coalition) -> bool {
        c.members().iter().all(|&m| self.get(m).is_some_and(|o| o.side() == c.side()))
    }
}
