//! Agent-based crypto market simulator: learning agents trading through a
//! double-auction order book, plus stylized-facts analysis and calibration.

pub mod agent;
pub mod calib;
pub mod cli;
pub mod error;
pub mod fundamentals;
pub mod market;
pub mod par;
pub mod rng;
pub mod sim;
pub mod stats;

pub use cli::cli_dispatch;
pub use error::{Error, Result};
