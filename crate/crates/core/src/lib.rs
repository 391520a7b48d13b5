//! Covert secret key generation over a binary-input, state-dependent discrete
//! memoryless channel watched by an active warden.
//!
//! The crate is layered: [`probcore`] holds distributions and divergences,
//! [`channel`] the channel model, [`rates`] the asymptotic rate formulas,
//! [`concentration`] the tail bounds, [`oneshot`] the one-shot code and its
//! bounds, [`estimator`] the state-fraction estimator and code sizing, and
//! [`protocol`] the full key-generation protocol.

pub mod channel;
pub mod concentration;
pub mod error;
pub mod estimator;
pub mod oneshot;
pub mod probcore;
pub mod protocol;
pub mod rates;
pub mod report;
pub mod seeds;

pub use channel::StateDmc;
pub use error::{Error, Result};
pub use probcore::{CondPmf, JointPmf, Pmf};
