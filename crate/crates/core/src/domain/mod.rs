//! Shared domain types and their invariants.

mod config;
mod error;
mod graph;
mod individual;
mod market;
mod session;
mod units;

pub mod scenario_file;

pub use config::{GaConfig, WeightScheme};
pub use error::{ConfigError, ValidationError, ValidationErrors};
pub use graph::{GraphQueryError, ProsumerId, Relation, RelationGraph, Side};
pub use individual::{Coalition, Defects, EmptyCoalition, Individual, OrderIdx};
pub use market::{CoalitionOrder, MemberSettlement, SettlementRecord, Transaction};
pub use session::{validate_session, HourBook, Order, Session};
pub use units::{price_times_energy, AvgPrice, Gwei, Kwh, ParseKwhError};
