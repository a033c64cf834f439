//! Shamir secret sharing with Lagrange recovery, plus Feldman and Pedersen
//! verifiable-secret-sharing commitments.
//!
//! A dealer samples a degree `t-1` polynomial `f` with `f(0)` equal to the
//! secret and hands party `i` the evaluation `f(i)`. Any `t` shares
//! interpolate back to the secret; fewer reveal nothing. Feldman commitments
//! publish `a_k·G` per coefficient so each party can check its share against
//! public data; Pedersen commitments blind each coefficient with a second
//! generator so the commitment itself leaks nothing about the secret.
//!
//! Commitments live in G2 so that DKG verification keys line up with the
//! public-key side of the signature pairing check.

use crate::group::{PointG2, Scalar};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::sync::OnceLock;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SharingError {
    #[error("invalid threshold: t={t}, n={n} (need 1 <= t <= n)")]
    InvalidThreshold { t: usize, n: usize },
    #[error("need at least {needed} shares, got {got}")]
    NotEnoughShares { needed: usize, got: usize },
    #[error("duplicate share index {0}")]
    DuplicateIndex(u32),
    #[error("share index 0 is reserved for the secret")]
    ZeroIndex,
    #[error("polynomial length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

/// Dealer-side polynomial `f(x) = a_0 + a_1 x + … + a_{t-1} x^{t-1}`.
/// `a_0` is the secret; the vector length is exactly the threshold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Polynomial {
    coefficients: Vec<Scalar>,
}

impl Polynomial {
    /// Random polynomial of threshold `t` with the given constant term.
    pub fn random(secret: Scalar, t: usize, rng: &mut impl RngCore) -> Polynomial {
        assert!(t >= 1, "threshold must be at least 1");
        let mut coefficients = Vec::with_capacity(t);
        coefficients.push(secret);
        for _ in 1..t {
            coefficients.push(Scalar::random(rng));
        }
        Polynomial { coefficients }
    }

    pub fn from_coefficients(coefficients: Vec<Scalar>) -> Polynomial {
        assert!(!coefficients.is_empty());
        Polynomial { coefficients }
    }

    pub fn threshold(&self) -> usize {
        self.coefficients.len()
    }

    pub fn secret(&self) -> Scalar {
        self.coefficients[0]
    }

    pub fn coefficients(&self) -> &[Scalar] {
        &self.coefficients
    }

    /// Horner evaluation at `x`.
    pub fn evaluate(&self, x: Scalar) -> Scalar {
        let mut acc = Scalar::zero();
        for c in self.coefficients.iter().rev() {
            acc = acc * x + *c;
        }
        acc
    }
}

/// One party's share: the polynomial evaluated at its (nonzero) index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Share {
    pub index: u32,
    pub value: Scalar,
}

/// Feldman commitment `A_k = a_k·G`, one point per coefficient.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeldmanCommitment {
    pub points: Vec<PointG2>,
}

impl FeldmanCommitment {
    pub fn threshold(&self) -> usize {
        self.points.len()
    }

    /// The committed public value `a_0·G`.
    pub fn public_point(&self) -> PointG2 {
        self.points[0]
    }

    /// Evaluate the commitment polynomial in the exponent:
    /// `Σ_k A_k · index^k`. This is the public image of `f(index)`.
    pub fn evaluate(&self, index: u32) -> PointG2 {
        let x = Scalar::from_u64(index as u64);
        let mut x_pow = Scalar::one();
        let mut acc = PointG2::identity();
        for point in &self.points {
            acc += *point * x_pow;
            x_pow = x_pow * x;
        }
        acc
    }
}

/// Pedersen commitment `C_k = a_k·G + b_k·H` for a blinding polynomial `b`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PedersenCommitment {
    pub points: Vec<PointG2>,
}

impl PedersenCommitment {
    pub fn evaluate(&self, index: u32) -> PointG2 {
        FeldmanCommitment {
            points: self.points.clone(),
        }
        .evaluate(index)
    }
}

/// Second generator for Pedersen commitments: `H = h·G` with
/// `h = SHA-256("pedersen-H") mod r`. Fixed once per process.
pub fn pedersen_blinding_base() -> PointG2 {
    static BASE: OnceLock<PointG2> = OnceLock::new();
    *BASE.get_or_init(|| PointG2::generator() * Scalar::hash_from_bytes(b"pedersen-H"))
}

/// Split `secret` into `n` shares with threshold `t`. Share `i` is `f(i)`
/// for `i = 1..n`; the dealer keeps the polynomial for committing.
pub fn deal(
    secret: Scalar,
    t: usize,
    n: usize,
    rng: &mut impl RngCore,
) -> Result<(Polynomial, Vec<Share>), SharingError> {
    if t == 0 || t > n {
        return Err(SharingError::InvalidThreshold { t, n });
    }
    let poly = Polynomial::random(secret, t, rng);
    let shares = (1..=n as u32)
        .map(|index| Share {
            index,
            value: poly.evaluate(Scalar::from_u64(index as u64)),
        })
        .collect();
    Ok((poly, shares))
}

/// Lagrange coefficients at `x = 0` for the given (distinct, nonzero)
/// evaluation points: `λ_i = ∏_{j≠i} x_j / (x_j - x_i)`.
pub fn lagrange_coefficients_at_zero(indices: &[u32]) -> Result<Vec<Scalar>, SharingError> {
    let mut seen = BTreeSet::new();
    for &index in indices {
        if index == 0 {
            return Err(SharingError::ZeroIndex);
        }
        if !seen.insert(index) {
            return Err(SharingError::DuplicateIndex(index));
        }
    }
    let xs: Vec<Scalar> = indices
        .iter()
        .map(|&i| Scalar::from_u64(i as u64))
        .collect();
    let mut coefficients = Vec::with_capacity(xs.len());
    for (i, &x_i) in xs.iter().enumerate() {
        let mut numerator = Scalar::one();
        let mut denominator = Scalar::one();
        for (j, &x_j) in xs.iter().enumerate() {
            if i != j {
                numerator = numerator * x_j;
                denominator = denominator * (x_j - x_i);
            }
        }
        // distinct indices guarantee a nonzero denominator
        coefficients.push(numerator * denominator.inverse().expect("distinct indices"));
    }
    Ok(coefficients)
}

/// Interpolate the secret from at least `t` shares. Shares are sorted by
/// index and the lowest-index `t` are used, so the result is deterministic
/// when more than `t` are supplied.
pub fn recover_secret(shares: &[Share], t: usize) -> Result<Scalar, SharingError> {
    if t == 0 {
        return Err(SharingError::InvalidThreshold { t, n: shares.len() });
    }
    if shares.len() < t {
        return Err(SharingError::NotEnoughShares {
            needed: t,
            got: shares.len(),
        });
    }
    let mut sorted: Vec<Share> = shares.to_vec();
    sorted.sort_by_key(|s| s.index);
    for window in sorted.windows(2) {
        if window[0].index == window[1].index {
            return Err(SharingError::DuplicateIndex(window[0].index));
        }
    }
    let chosen = &sorted[..t];
    let indices: Vec<u32> = chosen.iter().map(|s| s.index).collect();
    let lambdas = lagrange_coefficients_at_zero(&indices)?;
    let mut secret = Scalar::zero();
    for (share, lambda) in chosen.iter().zip(&lambdas) {
        secret += share.value * *lambda;
    }
    Ok(secret)
}

/// Commit to every coefficient of `poly`: `A_k = a_k·G`.
pub fn feldman_commit(poly: &Polynomial) -> FeldmanCommitment {
    FeldmanCommitment {
        points: poly
            .coefficients()
            .iter()
            .map(|c| PointG2::generator() * *c)
            .collect(),
    }
}

/// Check `value·G = Σ_k A_k · index^k`.
pub fn feldman_verify(share: &Share, commitment: &FeldmanCommitment) -> bool {
    if share.index == 0 || commitment.points.is_empty() {
        return false;
    }
    PointG2::generator() * share.value == commitment.evaluate(share.index)
}

/// Commit to `poly` blinded by `blinding`: `C_k = a_k·G + b_k·H`.
pub fn pedersen_commit(
    poly: &Polynomial,
    blinding: &Polynomial,
) -> Result<PedersenCommitment, SharingError> {
    if poly.threshold() != blinding.threshold() {
        return Err(SharingError::LengthMismatch(
            poly.threshold(),
            blinding.threshold(),
        ));
    }
    let h = pedersen_blinding_base();
    Ok(PedersenCommitment {
        points: poly
            .coefficients()
            .iter()
            .zip(blinding.coefficients())
            .map(|(a, b)| PointG2::generator() * *a + h * *b)
            .collect(),
    })
}

/// Check `value·G + blind_value·H = Σ_k C_k · index^k`.
pub fn pedersen_verify(
    share: &Share,
    blind_share: &Share,
    commitment: &PedersenCommitment,
) -> bool {
    if share.index == 0 || share.index != blind_share.index || commitment.points.is_empty() {
        return false;
    }
    let lhs = PointG2::generator() * share.value + pedersen_blinding_base() * blind_share.value;
    lhs == commitment.evaluate(share.index)
}
