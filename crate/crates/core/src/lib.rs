//! Real-time dynamics of Ising chains whose spins each couple to a harmonic bath.
//!
//! Each spin's bath-dressed propagators are computed with the inchworm equation
//! and the chain is reassembled spin by spin with the distributive law.

pub mod algebra;
pub mod bath;
pub mod config;
pub mod contour;
pub mod counters;
pub mod error;
pub mod inchworm;
pub mod multiset;
pub mod oracle;
pub mod pairings;
pub mod resummation;

pub use algebra::{SpinClass, SpinOperator, C64};
pub use config::{load_config, ChainConfig};
pub use error::{Error, Result};
