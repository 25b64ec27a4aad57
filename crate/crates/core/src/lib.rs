//! Cross-layer control of a single-hop uplink with private and open traffic.
//!
//! The crate is organised bottom-up:
//!
//! * [`channel`] samples iid block-fading power gains and noisy cross-gain estimates.
//! * [`rates`] turns gains into rates, wiretap privacy rates and outage margins.
//! * [`single_user`] computes the single-user (private, open) rate regions.
//! * [`pos`] implements private opportunistic scheduling and its sum-rate bounds.
//! * [`control`] holds the drift-plus-penalty flow controller, the max-weight
//!   scheduler, the queue recursion and the drift audit.
//! * [`sim`] runs the whole loop block by block and sweeps parameters.
//!
//! All rates are in bits per channel use (log base 2).

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod channel;
pub mod control;
pub mod error;
pub mod export;
pub mod pos;
pub mod rates;
pub mod rng;
pub mod sim;
pub mod single_user;
pub mod special;

pub use channel::{ChannelBlock, ChannelConfig, Interval};
pub use control::{Decision, Mode, NodeQueues, UtilitySpec};
pub use error::{Error, Result};
pub use pos::PosProfile;
pub use rates::RateView;
pub use sim::{CsiMode, RunConfig, RunMetrics};
pub use single_user::{RegionPoint, ThresholdPolicy, TieRule};
