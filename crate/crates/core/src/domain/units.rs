//! Fixed-point energy and integer price units.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Sub, SubAssign};
use std::str::FromStr;

use thiserror::Error;

/// Energy quantity in kWh, stored as an integer count of Wh (3 decimal places).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Kwh(u64);

impl Kwh {
    pub const ZERO: Kwh = Kwh(0);

    pub const fn from_milli(milli: u64) -> Self {
        Kwh(milli)
    }

    pub const fn from_whole(kwh: u64) -> Self {
        Kwh(kwh * 1000)
    }

    pub const fn milli(self) -> u64 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn abs_diff(self, other: Kwh) -> Kwh {
        Kwh(self.0.abs_diff(other.0))
    }

    pub fn saturating_sub(self, other: Kwh) -> Kwh {
        Kwh(self.0.saturating_sub(other.0))
    }
}

impl fmt::Display for Kwh {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:03}", self.0 / 1000, self.0 % 1000)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid kWh literal `{0}` (expected digits with exactly 3 decimals, e.g. 4.250)")]
pub struct ParseKwhError(pub String);

impl FromStr for Kwh {
    type Err = ParseKwhError;

    /// Accepts only the canonical `<int>.<ddd>` form so that parsing and
    /// printing are inverse to each other.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseKwhError(s.to_string());
        let (whole, frac) = s.split_once('.').ok_or_else(err)?;
        let canonical_whole =
            !whole.is_empty() && whole.bytes().all(|b| b.is_ascii_digit()) && (whole == "0" || !whole.starts_with('0'));
        if !canonical_whole || frac.len() != 3 || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let whole: u64 = whole.parse().map_err(|_| err())?;
        let frac: u64 = frac.parse().map_err(|_| err())?;
        whole.checked_mul(1000).and_then(|w| w.checked_add(frac)).map(Kwh).ok_or_else(err)
    }
}

impl Add for Kwh {
    type Output = Kwh;
    fn add(self, rhs: Kwh) -> Kwh {
        Kwh(self.0 + rhs.0)
    }
}

impl AddAssign for Kwh {
    fn add_assign(&mut self, rhs: Kwh) {
        self.0 += rhs.0;
    }
}

impl Sub for Kwh {
    type Output = Kwh;
    fn sub(self, rhs: Kwh) -> Kwh {
        Kwh(self.0.checked_sub(rhs.0).expect("kWh subtraction underflow"))
    }
}

impl SubAssign for Kwh {
    fn sub_assign(&mut self, rhs: Kwh) {
        *self = *self - rhs;
    }
}

impl Sum for Kwh {
    fn sum<I: Iterator<Item = Kwh>>(iter: I) -> Kwh {
        iter.fold(Kwh::ZERO, Add::add)
    }
}

impl<'a> Sum<&'a Kwh> for Kwh {
    fn sum<I: Iterator<Item = &'a Kwh>>(iter: I) -> Kwh {
        iter.copied().sum()
    }
}

/// Price in Gwei per kWh.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Gwei(pub u64);

impl Gwei {
    pub const fn value(self) -> u64 {
        self.0
    }
}

impl fmt::Display for Gwei {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Exact arithmetic mean of a set of integer prices, kept as `sum / count`.
#[derive(Clone, Copy, Debug)]
pub struct AvgPrice {
    sum: u64,
    count: u64,
}

impl AvgPrice {
    pub fn new(sum: u64, count: u64) -> Self {
        assert!(count > 0, "average over an empty set");
        AvgPrice { sum, count }
    }

    pub fn of<I: IntoIterator<Item = Gwei>>(prices: I) -> Self {
        let (sum, count) = prices.into_iter().fold((0u64, 0u64), |(s, c), p| (s + p.0, c + 1));
        AvgPrice::new(sum, count)
    }

    pub fn sum(self) -> u64 {
        self.sum
    }

    pub fn count(self) -> u64 {
        self.count
    }

    pub fn as_f64(self) -> f64 {
        self.sum as f64 / self.count as f64
    }

    /// Compares the average with a (possibly negative) integer price.
    pub fn cmp_int(self, price: i64) -> Ordering {
        (self.sum as i128).cmp(&(price as i128 * self.count as i128))
    }

    /// Smallest integer not below the average.
    pub fn ceil(self) -> u64 {
        self.sum.div_ceil(self.count)
    }

    /// Largest integer not above the average.
    pub fn floor(self) -> u64 {
        self.sum / self.count
    }
}

impl PartialEq for AvgPrice {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for AvgPrice {}

impl PartialOrd for AvgPrice {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for AvgPrice {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.sum as u128 * other.count as u128).cmp(&(other.sum as u128 * self.count as u128))
    }
}

impl fmt::Display for AvgPrice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.sum.is_multiple_of(self.count) {
            write!(f, "{}", self.sum / self.count)
        } else {
            write!(f, "{}/{}", self.sum, self.count)
        }
    }
}

/// `price × energy` in Gwei, rounded half-up to an integer.
pub fn price_times_energy(price: Gwei, energy: Kwh) -> u64 {
    let raw = price.0 as u128 * energy.milli() as u128;
    ((raw + 500) / 1000) as u64
}
