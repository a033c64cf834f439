//! A voting-based cross-chain oracle, end to end and in process.
//!
//! Oracle nodes register with an emulated registry contract, run a
//! distributed key generation to obtain shares of a BLS key, answer
//! transaction-inclusion queries about a simulated source chain, and have a
//! rotating aggregator recover a single threshold signature that the
//! emulated oracle contract verifies with one pairing check. A deterministic
//! discrete-event simulator drives the whole protocol under configurable
//! adversarial behaviors, and a calibrated gas model compares the scheme's
//! cost against on-chain voting, ECDSA multi-signatures, and a block-header
//! relay.
//!
//! The guide in `book/` walks through each layer with runnable examples;
//! start with [`group`] for the curve arithmetic and [`simulator`] for the
//! harness.

pub mod cli;
pub mod contracts;
pub mod costmodel;
pub mod dkg;
pub mod group;
pub mod nodes;
pub mod scenario;
pub mod sharing;
pub mod simulator;
pub mod sourcechain;
pub mod tbls;

use serde::{Deserialize, Serialize};
use std::fmt;

/// Identity of an oracle node, unique across a simulation run. Protocol
/// ordering never depends on the name itself; the registry assigns each
/// node a registration ordinal that fixes its position in rotation and DKG
/// indexing.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub String);

impl NodeId {
    pub fn new(name: impl Into<String>) -> Self {
        NodeId(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(name: &str) -> Self {
        NodeId(name.to_owned())
    }
}
