//! mdbook cannot run example code against this workspace's crates, so the
//! guide's chapters are included here as module documentation: `cargo test`
//! then compiles and runs every Rust block in the book, keeping the text
//! and the library in lockstep. One module per chapter keeps doc-test
//! failures attributable.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/pairings.md")]
pub mod pairings {}

#[doc = include_str!("../../../book/src/secret-sharing.md")]
pub mod secret_sharing {}

#[doc = include_str!("../../../book/src/dkg.md")]
pub mod dkg {}

#[doc = include_str!("../../../book/src/threshold-signing.md")]
pub mod threshold_signing {}

#[doc = include_str!("../../../book/src/contracts.md")]
pub mod contracts {}

#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}

#[doc = include_str!("../../../book/src/adversaries.md")]
pub mod adversaries {}

#[doc = include_str!("../../../book/src/cost-model.md")]
pub mod cost_model {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
