//! Hedonic coalition formation for peer-to-peer energy trading.
//!
//! Prosumers submit hourly offers and bids. A genetic search groups same-side
//! orders into coalitions that respect social relations and price
//! preferences; coalitions are then matched into transactions, settled
//! against delivered energy and recorded in a hash-chained ledger.

pub mod canon;
pub mod domain;
pub mod ga;
pub mod ledger;
pub mod matching;
pub mod scoring;
pub mod sim;
