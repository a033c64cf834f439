//! Threshold BLS signing on top of DKG key shares.
//!
//! Node `i` signs a message by multiplying the hashed point with its secret
//! share: `σ_i = x_i·H(m)`. Each share is checkable in isolation against the
//! node's public verification key, and any `t` valid shares with distinct
//! indices interpolate — Lagrange in the exponent — to the unique group
//! signature `σ = x·H(m)`, which verifies under the shared public key via
//! `e(σ, G) = e(H(m), PK)`.
//!
//! The aggregator filters shares with [`verify_share`] before calling
//! [`recover`]; recovery itself assumes clean input and stays a pure fold.

use crate::dkg::KeyShare;
use crate::group::{hash_to_g1, pairing_check, PointG1, PointG2, G1_BYTES};
use crate::sharing::{lagrange_coefficients_at_zero, SharingError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TblsError {
    #[error("need at least {needed} signature shares, got {got}")]
    NotEnoughShares { needed: usize, got: usize },
    #[error("duplicate signer index {0}")]
    DuplicateIndex(u32),
    #[error("message must be non-empty")]
    EmptyMessage,
}

/// One node's contribution: `x_i·H(m)` tagged with its share index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignatureShare {
    pub signer_index: u32,
    pub point: PointG1,
}

/// A recovered group signature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    pub point: PointG1,
}

impl Signature {
    /// Canonical 64-byte encoding; doubles as the lottery entropy source.
    pub fn to_bytes(&self) -> [u8; G1_BYTES] {
        self.point.to_bytes()
    }

    pub fn from_bytes(bytes: &[u8; G1_BYTES]) -> Result<Signature, crate::group::GroupError> {
        Ok(Signature {
            point: PointG1::from_bytes(bytes)?,
        })
    }
}

/// Deterministically sign `message` with a key share.
pub fn sign_share(key_share: &KeyShare, message: &[u8]) -> Result<SignatureShare, TblsError> {
    let h = hash_to_g1(message).map_err(|_| TblsError::EmptyMessage)?;
    Ok(SignatureShare {
        signer_index: key_share.owner_index,
        point: h * key_share.secret_share,
    })
}

/// Check a share against the signer's public verification key:
/// `e(σ_i, G) = e(H(m), vk_i)`.
pub fn verify_share(share: &SignatureShare, message: &[u8], verification_key: &PointG2) -> bool {
    match hash_to_g1(message) {
        Ok(h) => pairing_check(&[(share.point, -PointG2::generator()), (h, *verification_key)]),
        Err(_) => false,
    }
}

/// Interpolate the group signature from at least `t` pre-verified shares
/// with distinct indices. Shares are sorted by index and the lowest `t`
/// used, so every valid `t`-subset of honest shares produces bit-identical
/// output.
pub fn recover(shares: &[SignatureShare], t: usize) -> Result<Signature, TblsError> {
    if t == 0 || shares.len() < t {
        return Err(TblsError::NotEnoughShares {
            needed: t.max(1),
            got: shares.len(),
        });
    }
    let mut seen = BTreeSet::new();
    for share in shares {
        if !seen.insert(share.signer_index) {
            return Err(TblsError::DuplicateIndex(share.signer_index));
        }
    }
    let mut sorted: Vec<SignatureShare> = shares.to_vec();
    sorted.sort_by_key(|s| s.signer_index);
    let chosen = &sorted[..t];
    let indices: Vec<u32> = chosen.iter().map(|s| s.signer_index).collect();
    let lambdas = lagrange_coefficients_at_zero(&indices).map_err(|e| match e {
        SharingError::DuplicateIndex(i) => TblsError::DuplicateIndex(i),
        _ => TblsError::NotEnoughShares {
            needed: t,
            got: shares.len(),
        },
    })?;
    let mut point = PointG1::identity();
    for (share, lambda) in chosen.iter().zip(&lambdas) {
        point += share.point * *lambda;
    }
    Ok(Signature { point })
}

/// The pairing identity `e(σ, G) = e(H(m), PK)`, evaluated as a product of
/// two pairings.
pub fn verify(signature: &Signature, message: &[u8], public_key: &PointG2) -> bool {
    match hash_to_g1(message) {
        Ok(h) => pairing_check(&[(signature.point, -PointG2::generator()), (h, *public_key)]),
        Err(_) => false,
    }
}
