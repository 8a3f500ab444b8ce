//! Outage probability, average effective rate and throughput of uplink rate
//! adaptation driven by delayed, noisy CSI, for perfect CSI, half-duplex
//! probing, full-duplex CSI acquisition and full-duplex data transmission.

pub mod channel;
pub mod error;
pub mod metrics;
pub mod montecarlo;
pub mod quadrature;
pub mod scenario;
pub mod schemes;
pub mod specfun;

pub use error::{Error, Result};

/// `10^(x/10)`.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}
