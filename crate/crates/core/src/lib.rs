//! Value-at-risk forecasting and backtesting for a single equity index.

pub mod error;
pub(crate) mod numeric;

pub mod dbn;
pub mod distributions;
pub mod evaluation;
pub mod market_data;
pub mod risk;
pub mod runner;
pub mod volatility;

pub use error::{Error, Result};
