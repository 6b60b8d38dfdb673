//! Upper bounds on mismatched-decoding capacity and reliability, membership
//! oracles for the metric/channel sets they rely on, and an exact/Monte Carlo
//! simulator for genie-aided decoders.

#![allow(clippy::needless_range_loop)]

pub mod bounds;
pub mod channel;
pub mod error;
pub mod ext;
pub mod fixtures;
pub mod genie;
pub mod lp;
pub mod membership;
pub mod metric;
pub mod optim;
pub mod par;
pub mod prob;

pub use error::{Error, Result};
pub use par::Exec;
