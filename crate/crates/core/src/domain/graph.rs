//! Prosumer identities and the symmetric social relation graph.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use super::error::ValidationError;

/// Market role of a prosumer within a session.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    Buyer,
    Seller,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Seller, Side::Buyer];

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Buyer => "buyer",
            Side::Seller => "seller",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Side {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "buyer" => Ok(Side::Buyer),
            "seller" => Ok(Side::Seller),
            other => Err(format!("unknown side `{other}`")),
        }
    }
}

/// Buyer and seller indices live in separate namespaces: `buyer:4` and
/// `seller:4` are different prosumers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProsumerId {
    pub side: Side,
    pub index: u32,
}

impl ProsumerId {
    pub const fn buyer(index: u32) -> Self {
        ProsumerId { side: Side::Buyer, index }
    }

    pub const fn seller(index: u32) -> Self {
        ProsumerId { side: Side::Seller, index }
    }
}

impl fmt::Display for ProsumerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.side, self.index)
    }
}

impl FromStr for ProsumerId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (side, index) = s.split_once(':').ok_or_else(|| format!("expected <side>:<index>, got `{s}`"))?;
        let index_ok =
            !index.is_empty() && index.bytes().all(|b| b.is_ascii_digit()) && (index == "0" || !index.starts_with('0'));
        if !index_ok {
            return Err(format!("bad prosumer index in `{s}`"));
        }
        Ok(ProsumerId {
            side: side.parse()?,
            index: index.parse().map_err(|e| format!("bad prosumer index in `{s}`: {e}"))?,
        })
    }
}

/// Pairwise social relation. Ordered `Friendship > Neutral > Enemy`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Relation {
    Enemy,
    Neutral,
    Friendship,
}

impl Relation {
    pub fn as_str(self) -> &'static str {
        match self {
            Relation::Friendship => "friend",
            Relation::Neutral => "neutral",
            Relation::Enemy => "enemy",
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Relation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "friend" => Ok(Relation::Friendship),
            "neutral" => Ok(Relation::Neutral),
            "enemy" => Ok(Relation::Enemy),
            other => Err(format!("unknown relation `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphQueryError {
    #[error("relation of {0} with itself is undefined")]
    SelfRelation(ProsumerId),
    #[error("prosumer {0} is not part of the relation graph")]
    UnknownProsumer(ProsumerId),
}

/// Symmetric relation over a fixed set of prosumers; every unordered pair of
/// distinct prosumers carries exactly one [`Relation`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationGraph {
    prosumers: Vec<ProsumerId>,
    position: HashMap<ProsumerId, usize>,
    // Dense n×n matrix, symmetric; diagonal entries are never read.
    matrix: Vec<Relation>,
}

impl RelationGraph {
    /// Builds a graph from directed entries. Both directions of a pair may be
    /// listed as long as they agree; pairs with no entry take `fill` or are
    /// reported as missing.
    pub fn from_entries(
        prosumers: impl IntoIterator<Item = ProsumerId>,
        entries: &[(ProsumerId, ProsumerId, Relation)],
        fill: Option<Relation>,
    ) -> Result<Self, Vec<ValidationError>> {
        let prosumers: Vec<ProsumerId> = prosumers.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let position: HashMap<_, _> = prosumers.iter().enumerate().map(|(i, p)| (*p, i)).collect();
        let mut errors = Vec::new();
        let mut seen: BTreeMap<(ProsumerId, ProsumerId), Relation> = BTreeMap::new();
        for &(a, b, rel) in entries {
            if a == b {
                errors.push(ValidationError::SelfRelation(a));
                continue;
            }
            let mut unknown = false;
            for p in [a, b] {
                if !position.contains_key(&p) {
                    errors.push(ValidationError::UnknownProsumer(p));
                    unknown = true;
                }
            }
            if unknown {
                continue;
            }
            let key = if a < b { (a, b) } else { (b, a) };
            match seen.get(&key) {
                Some(&prev) if prev != rel => errors.push(ValidationError::AsymmetricRelation { a: key.0, b: key.1 }),
                Some(_) => {}
                None => {
                    seen.insert(key, rel);
                }
            }
        }
        let n = prosumers.len();
        let mut matrix = vec![Relation::Neutral; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let key = (prosumers[i], prosumers[j]);
                let rel = match (seen.get(&key), fill) {
                    (Some(&r), _) => r,
                    (None, Some(r)) => r,
                    (None, None) => {
                        errors.push(ValidationError::MissingRelation { a: key.0, b: key.1 });
                        continue;
                    }
                };
                matrix[i * n + j] = rel;
                matrix[j * n + i] = rel;
            }
        }
        if errors.is_empty() {
            Ok(RelationGraph { prosumers, position, matrix })
        } else {
            Err(errors)
        }
    }

    /// Graph where every pair shares the same relation.
    pub fn uniform(prosumers: impl IntoIterator<Item = ProsumerId>, rel: Relation) -> Self {
        Self::from_entries(prosumers, &[], Some(rel)).expect("uniform graph is always valid")
    }

    pub fn n_prosumers(&self) -> usize {
        self.prosumers.len()
    }

    pub fn prosumers(&self) -> &[ProsumerId] {
        &self.prosumers
    }

    pub fn contains(&self, p: ProsumerId) -> bool {
        self.position.contains_key(&p)
    }

    pub fn relation(&self, a: ProsumerId, b: ProsumerId) -> Result<Relation, GraphQueryError> {
        if a == b {
            return Err(GraphQueryError::SelfRelation(a));
        }
        let i = *self.position.get(&a).ok_or(GraphQueryError::UnknownProsumer(a))?;
        let j = *self.position.get(&b).ok_or(GraphQueryError::UnknownProsumer(b))?;
        Ok(self.matrix[i * self.prosumers.len() + j])
    }

    /// All unordered pairs `(a, b)` with `a < b`, in canonical order.
    pub fn pairs(&self) -> impl Iterator<Item = (ProsumerId, ProsumerId, Relation)> + '_ {
        let n = self.prosumers.len();
        (0..n).flat_map(move |i| {
            ((i + 1)..n).map(move |j| (self.prosumers[i], self.prosumers[j], self.matrix[i * n + j]))
        })
    }
}
