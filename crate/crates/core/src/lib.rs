//! Coverage analysis and simulation for LoRa gateways equipped with a
//! fluid antenna system (FAS).

pub mod analytic;
pub mod channel;
pub mod error;
pub mod evtapprox;
pub mod network;
pub mod phy;
pub mod quadrature;
pub mod sim;
pub mod specfun;
pub mod stats;

pub use error::{Error, Result};
