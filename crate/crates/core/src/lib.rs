//! Two-party private transformer-block inference.
//!
//! Party A (client) holds the input activations and party B (server) holds
//! the weights. Linear layers run under rotation-free SIMD homomorphic
//! encryption; non-linear layers mix encryption with additive sharing over
//! `Z_{2^k}` and `Z_p`. Sub-protocols imported from prior work (comparison,
//! bit injection, exponential, inverse square root) come from a pluggable
//! gadget provider.

pub mod approx;
pub mod channel;
pub mod config;
pub mod error;
pub mod fixedpoint;
pub mod model;
pub mod party;
pub mod protocols;
pub mod sharing;

use serde::{Deserialize, Serialize};

pub use channel::{CostReport, NetworkProfile, Session};
pub use config::Config;
pub use error::{Error, Result};
pub use fixedpoint::{Domain, FixedPointConfig};
pub use party::Party;
pub use sharing::Share;

/// The two protocol participants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    /// Client; holds the input.
    A,
    /// Server; holds the weights.
    B,
}

impl Role {
    pub fn index(self) -> usize {
        match self {
            Role::A => 0,
            Role::B => 1,
        }
    }

    pub fn peer(self) -> Role {
        match self {
            Role::A => Role::B,
            Role::B => Role::A,
        }
    }
}

impl std::str::FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" | "client" => Ok(Role::A),
            "b" | "server" => Ok(Role::B),
            other => Err(Error::Config(format!("unknown role {other:?}"))),
        }
    }
}

/// Piecewise polynomial over `f64`.
pub type PiecewisePoly = approx::PiecewisePoly<f64>;
/// Least-squares fit settings over `f64`.
pub type FitSpec = approx::FitSpec<f64>;
/// Block weights over `f64`.
pub type BlockWeights = model::BlockWeights<f64>;
