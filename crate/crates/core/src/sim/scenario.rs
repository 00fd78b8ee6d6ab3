//! Random scenario generation from energy profiles and a relation mix.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::scenario_file::ScenarioDoc;
use crate::domain::{Gwei, Kwh, Order, ProsumerId, Relation};

/// Probability tolerance for a relation mix.
pub const MIX_TOLERANCE: f64 = 1e-9;

// Independent ChaCha streams under one seed, so that changing the relation
// mix leaves the orders untouched and vice versa.
const RELATION_STREAM: u64 = 1;
const ORDER_STREAM: u64 = 2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelationMix {
    pub friend: f64,
    pub neutral: f64,
    pub enemy: f64,
}

impl RelationMix {
    pub const fn new(friend: f64, neutral: f64, enemy: f64) -> Self {
        RelationMix { friend, neutral, enemy }
    }

    pub const FRIENDSHIP_DOMINANT: RelationMix = RelationMix::new(0.6, 0.3, 0.1);
    pub const NEUTRAL_DOMINANT: RelationMix = RelationMix::new(0.1, 0.8, 0.1);
    pub const ENEMY_DOMINANT: RelationMix = RelationMix::new(0.1, 0.2, 0.7);

    fn validate(&self) -> Result<(), SpecError> {
        let p = [self.friend, self.neutral, self.enemy];
        if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(SpecError::InvalidSpec(format!("relation probabilities must be non-negative: {self}")));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > MIX_TOLERANCE {
            return Err(SpecError::InvalidSpec(format!("relation probabilities sum to {sum}, not 1")));
        }
        Ok(())
    }

    fn draw(&self, u: f64) -> Relation {
        if u < self.friend {
            Relation::Friendship
        } else if u < self.friend + self.neutral {
            Relation::Neutral
        } else {
            Relation::Enemy
        }
    }
}

impl std::fmt::Display for RelationMix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}/{}", self.friend, self.neutral, self.enemy)
    }
}

impl std::str::FromStr for RelationMix {
    type Err = String;

    /// `friend/neutral/enemy`, e.g. `0.6/0.3/0.1`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<f64> = s
            .split('/')
            .map(|p| p.trim().parse::<f64>().map_err(|e| format!("bad probability {p:?}: {e}")))
            .collect::<Result<_, _>>()?;
        match parts[..] {
            [f, n, e] => Ok(RelationMix::new(f, n, e)),
            _ => Err(format!("expected friend/neutral/enemy, got {s:?}")),
        }
    }
}

/// Hourly quantity interval of one prosumer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Profile {
    pub id: ProsumerId,
    pub min: Kwh,
    pub max: Kwh,
}

impl Profile {
    pub const fn whole(id: ProsumerId, min: u64, max: u64) -> Self {
        Profile { id, min: Kwh::from_whole(min), max: Kwh::from_whole(max) }
    }
}

const NEIGHBORHOOD_BUYERS: [(u32, u64, u64); 4] = [(1, 1, 14), (2, 1, 4), (3, 1, 20), (4, 2, 15)];
const NEIGHBORHOOD_SELLERS: [(u32, u64, u64); 10] = [
    (4, 0, 9),
    (5, 0, 11),
    (6, 0, 11),
    (7, 0, 12),
    (8, 0, 14),
    (9, 0, 16),
    (10, 0, 17),
    (11, 1, 23),
    (12, 1, 19),
    (13, 1, 20),
];

/// The 14-prosumer reference community: buyers 1 to 4, sellers 4 to 13.
pub fn neighborhood_profiles() -> Vec<Profile> {
    let buyers = NEIGHBORHOOD_BUYERS.iter().map(|&(i, lo, hi)| Profile::whole(ProsumerId::buyer(i), lo, hi));
    let sellers = NEIGHBORHOOD_SELLERS.iter().map(|&(i, lo, hi)| Profile::whole(ProsumerId::seller(i), lo, hi));
    buyers.chain(sellers).collect()
}

/// A larger community that cycles through the reference intervals: buyers
/// `1..=n_buyers` and sellers `1..=n_sellers`.
pub fn community_profiles(n_buyers: u32, n_sellers: u32) -> Vec<Profile> {
    let buyers = (0..n_buyers).map(|i| {
        let (_, lo, hi) = NEIGHBORHOOD_BUYERS[i as usize % NEIGHBORHOOD_BUYERS.len()];
        Profile::whole(ProsumerId::buyer(i + 1), lo, hi)
    });
    let sellers = (0..n_sellers).map(|i| {
        let (_, lo, hi) = NEIGHBORHOOD_SELLERS[i as usize % NEIGHBORHOOD_SELLERS.len()];
        Profile::whole(ProsumerId::seller(i + 1), lo, hi)
    });
    buyers.chain(sellers).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSpec {
    pub profiles: Vec<Profile>,
    pub relation_mix: RelationMix,
    /// Inclusive limit price range.
    pub price_range: (Gwei, Gwei),
    /// Inclusive price tolerance range.
    pub delta_range: (Gwei, Gwei),
    pub hours: Vec<u8>,
    pub seed: u64,
}

pub const DEFAULT_PRICE_RANGE: (Gwei, Gwei) = (Gwei(1), Gwei(20));
pub const DEFAULT_DELTA_RANGE: (Gwei, Gwei) = (Gwei(0), Gwei(2));

impl ScenarioSpec {
    pub fn new(profiles: Vec<Profile>, relation_mix: RelationMix, hours: Vec<u8>, seed: u64) -> Self {
        ScenarioSpec {
            profiles,
            relation_mix,
            price_range: DEFAULT_PRICE_RANGE,
            delta_range: DEFAULT_DELTA_RANGE,
            hours,
            seed,
        }
    }

    /// Reference community for hours 10 to 12.
    pub fn neighborhood(relation_mix: RelationMix, seed: u64) -> Self {
        ScenarioSpec::new(neighborhood_profiles(), relation_mix, vec![10, 11, 12], seed)
    }

    /// 24 buyers and 24 sellers trading in a single hour.
    pub fn community48(relation_mix: RelationMix, seed: u64) -> Self {
        ScenarioSpec::new(community_profiles(24, 24), relation_mix, vec![12], seed)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        ScenarioSpec { seed, ..self.clone() }
    }

    pub fn with_mix(&self, relation_mix: RelationMix) -> Self {
        ScenarioSpec { relation_mix, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        let bad = |m: String| Err(SpecError::InvalidSpec(m));
        if self.profiles.is_empty() {
            return bad("no prosumer profiles".into());
        }
        let mut ids: Vec<ProsumerId> = self.profiles.iter().map(|p| p.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return bad("duplicate prosumer in profiles".into());
        }
        if let Some(p) = self.profiles.iter().find(|p| p.min > p.max) {
            return bad(format!("{}: min {} above max {}", p.id, p.min, p.max));
        }
        self.relation_mix.validate()?;
        if self.price_range.0 > self.price_range.1 {
            return bad("price range min above max".into());
        }
        if self.delta_range.0 > self.delta_range.1 {
            return bad("delta range min above max".into());
        }
        if self.hours.is_empty() {
            return bad("no hours".into());
        }
        if let Some(h) = self.hours.iter().find(|&&h| h > 23) {
            return bad(format!("hour {h} out of range"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpecError {
    #[error("invalid scenario spec: {0}")]
    InvalidSpec(String),
}

/// Draws relations and orders for a spec.
///
/// Relations: one uniform draw per unordered pair, pairs in sorted prosumer
/// order. Orders: for each hour, for each profile in order, a quantity
/// (uniform in milli-kWh over `[min, max]`), a limit price and a tolerance.
/// A zero quantity means the prosumer does not trade that hour.
pub fn generate_scenario(spec: &ScenarioSpec) -> Result<ScenarioDoc, SpecError> {
    spec.validate()?;
    let mut prosumers: Vec<ProsumerId> = spec.profiles.iter().map(|p| p.id).collect();
    prosumers.sort_unstable();

    let mut rel_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rel_rng.set_stream(RELATION_STREAM);
    let mut relations = Vec::with_capacity(prosumers.len() * prosumers.len().saturating_sub(1) / 2);
    for (i, &a) in prosumers.iter().enumerate() {
        for &b in &prosumers[i + 1..] {
            relations.push((a, b, spec.relation_mix.draw(rel_rng.gen::<f64>())));
        }
    }

    let mut ord_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    ord_rng.set_stream(ORDER_STREAM);
    let mut orders = Vec::new();
    for &hour in &spec.hours {
        for p in &spec.profiles {
            let quantity = Kwh::from_milli(ord_rng.gen_range(p.min.milli()..=p.max.milli()));
            let limit_price = Gwei(ord_rng.gen_range(spec.price_range.0 .0..=spec.price_range.1 .0));
            let delta_price = Gwei(ord_rng.gen_range(spec.delta_range.0 .0..=spec.delta_range.1 .0));
            if !quantity.is_zero() {
                orders.push(Order { owner: p.id, hour, quantity, limit_price, delta_price });
            }
        }
    }
    Ok(ScenarioDoc { prosumers, relations, orders })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Side;

    #[test]
    fn neighborhood_community_shape() {
        let doc = generate_scenario(&ScenarioSpec::neighborhood(RelationMix::FRIENDSHIP_DOMINANT, 7)).unwrap();
        assert_eq!(doc.prosumers.len(), 14);
        assert_eq!(doc.prosumers.iter().filter(|p| p.side == Side::Buyer).count(), 4);
        assert_eq!(doc.relations.len(), 14 * 13 / 2);
        assert!(doc.validate().is_ok());
    }

    #[test]
    fn buyer_2_stays_in_its_interval() {
        for seed in 0..50 {
            let doc = generate_scenario(&ScenarioSpec::neighborhood(RelationMix::NEUTRAL_DOMINANT, seed)).unwrap();
            for o in doc.orders.iter().filter(|o| o.owner == ProsumerId::buyer(2)) {
                assert!(o.quantity >= Kwh::from_whole(1) && o.quantity <= Kwh::from_whole(4), "{}", o.quantity);
            }
        }
    }

    #[test]
    fn degenerate_mix_is_all_friends() {
        let doc = generate_scenario(&ScenarioSpec::neighborhood(RelationMix::new(1.0, 0.0, 0.0), 3)).unwrap();
        assert!(doc.relations.iter().all(|r| r.2 == Relation::Friendship));
    }

    #[test]
    fn same_seed_same_bytes_and_mix_leaves_orders_alone() {
        let spec = ScenarioSpec::community48(RelationMix::FRIENDSHIP_DOMINANT, 11);
        let a = generate_scenario(&spec).unwrap();
        assert_eq!(a.to_text(), generate_scenario(&spec).unwrap().to_text());
        let b = generate_scenario(&spec.with_mix(RelationMix::ENEMY_DOMINANT)).unwrap();
        assert_eq!(a.orders, b.orders);
        assert_ne!(a.relations, b.relations);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let ok = ScenarioSpec::neighborhood(RelationMix::FRIENDSHIP_DOMINANT, 0);
        let mut s = ok.clone();
        s.relation_mix = RelationMix::new(0.5, 0.5, 0.1);
        assert!(generate_scenario(&s).is_err());
        let mut s = ok.clone();
        s.relation_mix = RelationMix::new(1.2, -0.2, 0.0);
        assert!(generate_scenario(&s).is_err());
        let mut s = ok.clone();
        s.price_range = (Gwei(5), Gwei(4));
        assert!(generate_scenario(&s).is_err());
        let mut s = ok.clone();
        s.profiles[0].min = Kwh::from_whole(99);
        assert!(generate_scenario(&s).is_err());
        let mut s = ok;
        s.hours = vec![24];
        assert!(generate_scenario(&s).is_err());
    }

    #[test]
    fn mix_text() {
        assert_eq!("0.6/0.3/0.1".parse::<RelationMix>().unwrap(), RelationMix::FRIENDSHIP_DOMINANT);
        assert!("0.6/0.4".parse::<RelationMix>().is_err());
    }
}
