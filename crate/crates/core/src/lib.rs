//! Deterministic backtesting engine around a deep-Q-learning portfolio
//! weight allocator: CSV market-data pipeline, episodic market
//! environment, multi-head Q-network with replay training, classical
//! baseline allocators, and a risk-adjusted metrics suite.

pub mod agent;
pub mod analytics;
pub mod config;
pub mod environment;
pub mod error;
pub mod market_data;
pub mod qnet;
pub mod trainer;

pub use config::{Benchmark, Config, DateRange, Regime};
pub use error::{Error, Result};
