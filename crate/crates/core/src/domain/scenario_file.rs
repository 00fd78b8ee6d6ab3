//! Line-oriented scenario documents.
//!
//! ```text
//! # hedonic-p2p scenario v1
//! prosumer buyer:1
//! prosumer seller:4
//! relation buyer:1 seller:4 friend
//! order seller:4 hour=10 kwh=3.250 price=7 delta=1
//! ```
//!
//! * `prosumer <side>:<index>` declares a participant.
//! * `relation <a> <b> <friend|neutral|enemy>` is an unordered pair entry.
//! * `order <owner> hour=<0-23> kwh=<int>.<ddd> price=<gwei> delta=<gwei>`;
//!   the key order is fixed.
//!
//! Blank lines and lines starting with `#` are ignored. Records are written
//! back in the order they were read, so `parse` and `to_text` are inverse on
//! canonical documents.

use thiserror::Error;

use super::error::ValidationErrors;
use super::graph::{ProsumerId, Relation};
use super::session::{validate_session, Order, Session};
use super::units::{Gwei, Kwh};

pub const HEADER: &str = "# hedonic-p2p scenario v1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("scenario line {line}: {message}")]
pub struct ScenarioParseError {
    pub line: usize,
    pub message: String,
}

/// Raw (unvalidated) scenario contents.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ScenarioDoc {
    pub prosumers: Vec<ProsumerId>,
    pub relations: Vec<(ProsumerId, ProsumerId, Relation)>,
    pub orders: Vec<Order>,
}

impl ScenarioDoc {
    pub fn from_session(session: &Session) -> Self {
        ScenarioDoc {
            prosumers: session.graph().prosumers().to_vec(),
            relations: session.graph().pairs().collect(),
            orders: session.orders().to_vec(),
        }
    }

    pub fn validate(&self) -> Result<Session, ValidationErrors> {
        validate_session(&self.prosumers, &self.orders, &self.relations)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(64 * (self.relations.len() + self.orders.len()));
        out.push_str(HEADER);
        out.push('\n');
        for p in &self.prosumers {
            out.push_str(&format!("prosumer {p}\n"));
        }
        for (a, b, r) in &self.relations {
            out.push_str(&format!("relation {a} {b} {r}\n"));
        }
        for o in &self.orders {
            out.push_str(&format!(
                "order {} hour={} kwh={} price={} delta={}\n",
                o.owner, o.hour, o.quantity, o.limit_price, o.delta_price
            ));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, ScenarioParseError> {
        let mut doc = ScenarioDoc::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |message: String| ScenarioParseError { line, message };
            if raw.trim().is_empty() || raw.starts_with('#') {
                continue;
            }
            let tokens: Vec<&str> = raw.split(' ').collect();
            match tokens.as_slice() {
                ["prosumer", id] => doc.prosumers.push(id.parse().map_err(err)?),
                ["relation", a, b, r] => {
                    doc.relations.push((a.parse().map_err(err)?, b.parse().map_err(err)?, r.parse().map_err(err)?))
                }
                ["order", owner, hour, kwh, price, delta] => {
                    let owner: ProsumerId = owner.parse().map_err(err)?;
                    let hour = keyed(hour, "hour").and_then(|v| int::<u8>(v, "hour")).map_err(err)?;
                    let quantity: Kwh = keyed(kwh, "kwh")
                        .and_then(|v| v.parse().map_err(|e: super::units::ParseKwhError| e.to_string()))
                        .map_err(err)?;
                    let limit_price = keyed(price, "price").and_then(|v| int::<u64>(v, "price")).map_err(err)?;
                    let delta_price = keyed(delta, "delta").and_then(|v| int::<u64>(v, "delta")).map_err(err)?;
                    doc.orders.push(Order {
                        owner,
                        hour,
                        quantity,
                        limit_price: Gwei(limit_price),
                        delta_price: Gwei(delta_price),
                    });
                }
                _ => return Err(err(format!("unrecognised record `{raw}`"))),
            }
        }
        Ok(doc)
    }
}

fn keyed<'a>(token: &'a str, key: &str) -> Result<&'a str, String> {
    token
        .strip_prefix(key)
        .and_then(|rest| rest.strip_prefix('='))
        .ok_or_else(|| format!("expected `{key}=<value>`, got `{token}`"))
}

fn int<T: std::str::FromStr>(v: &str, key: &str) -> Result<T, String> {
    let canonical = !v.is_empty() && v.bytes().all(|b| b.is_ascii_digit()) && (v == "0" || !v.starts_with('0'));
    if !canonical {
        return Err(format!("`{key}` must be a canonical non-negative integer, got `{v}`"));
    }
    v.parse().map_err(|_| format!("`{key}` out of range: `{v}`"))
}
