//! Coalitions and individuals (candidate partitions of one hour's orders).

use std::fmt;

use thiserror::Error;

use super::graph::Side;
use super::session::HourBook;

/// Position of an order inside its [`HourBook`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OrderIdx(pub u32);

impl OrderIdx {
    pub fn get(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for OrderIdx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("a coalition must have at least one member")]
pub struct EmptyCoalition;

/// A non-empty group of same-side orders. Members are kept sorted and free
/// of repeats.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Coalition {
    side: Side,
    members: Vec<OrderIdx>,
}

impl Coalition {
    pub fn new(side: Side, members: impl IntoIterator<Item = OrderIdx>) -> Result<Self, EmptyCoalition> {
        let mut members: Vec<OrderIdx> = members.into_iter().collect();
        members.sort_unstable();
        members.dedup();
        if members.is_empty() {
            return Err(EmptyCoalition);
        }
        Ok(Coalition { side, members })
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn members(&self) -> &[OrderIdx] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, m: OrderIdx) -> bool {
        self.members.binary_search(&m).is_ok()
    }

    /// Number of unordered member pairs.
    pub fn pairs(&self) -> usize {
        let n = self.members.len();
        n * n.saturating_sub(1) / 2
    }

    /// Size of the intersection with another coalition.
    pub fn overlap(&self, other: &Coalition) -> usize {
        let (mut i, mut j, mut shared) = (0, 0, 0);
        let (a, b) = (&self.members, &other.members);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    shared += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        shared
    }
}

/// Duplicate and missing order counts of an individual relative to its book.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Defects {
    pub duplicated: usize,
    pub missing: usize,
}

impl Defects {
    pub fn is_clean(self) -> bool {
        self.duplicated == 0 && self.missing == 0
    }
}

/// One candidate partition of an hour's offers and bids into coalitions.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Individual {
    sell: Vec<Coalition>,
    buy: Vec<Coalition>,
}

impl Individual {
    pub fn new(sell: Vec<Coalition>, buy: Vec<Coalition>) -> Self {
        debug_assert!(sell.iter().all(|c| c.side() == Side::Seller));
        debug_assert!(buy.iter().all(|c| c.side() == Side::Buyer));
        Individual { sell, buy }
    }

    pub fn side(&self, side: Side) -> &[Coalition] {
        match side {
            Side::Seller => &self.sell,
            Side::Buyer => &self.buy,
        }
    }

    pub fn side_mut(&mut self, side: Side) -> &mut Vec<Coalition> {
        match side {
            Side::Seller => &mut self.sell,
            Side::Buyer => &mut self.buy,
        }
    }

    /// Seller coalitions followed by buyer coalitions.
    pub fn coalitions(&self) -> impl Iterator<Item = &Coalition> {
        self.sell.iter().chain(self.buy.iter())
    }

    pub fn n_coalitions(&self) -> usize {
        self.sell.len() + self.buy.len()
    }

    pub fn defects(&self, book: &HourBook) -> Defects {
        let mut counts = vec![0usize; book.len()];
        for c in self.coalitions() {
            for &m in c.members() {
                counts[m.get()] += 1;
            }
        }
        let mut d = Defects::default();
        for side in Side::BOTH {
            for &i in book.side_orders(side) {
                match counts[i.get()] {
                    0 => d.missing += 1,
                    k => d.duplicated += k - 1,
                }
            }
        }
        d
    }

    /// Every order of the book appears exactly once, on its own side.
    pub fn is_well_formed(&self, book: &HourBook) -> bool {
        self.coalitions().all(|c| book.is_homogeneous(c)) && self.defects(book).is_clean()
    }

    /// Set equality of the coalitions on each side, ignoring coalition order.
    pub fn same_partition(&self, other: &Individual) -> bool {
        Side::BOTH.iter().all(|&side| {
            let (a, b) = (self.side(side), other.side(side));
            if a.len() != b.len() {
                return false;
            }
            let mut a: Vec<&Coalition> = a.iter().collect();
            let mut b: Vec<&Coalition> = b.iter().collect();
            a.sort_unstable();
            b.sort_unstable();
            a == b
        })
    }
}
