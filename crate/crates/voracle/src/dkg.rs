//! Pedersen-style distributed key generation.
//!
//! Every participant acts as a dealer in one of `n` parallel Feldman VSS
//! executions: it commits to a fresh random polynomial on the broadcast
//! channel and sends each peer its signed private share. Receivers check
//! shares against the published commitments and broadcast a complaint —
//! carrying the offending signed share as evidence — when verification
//! fails. Dealers hit by a valid complaint are dropped from the qualified
//! set; everyone else's contributions are summed into the final key shares.
//! No party ever holds the group secret: node `i` ends up with
//! `x_i = Σ_{j∈Q} f_j(i)` and the shared public key is `Σ_{j∈Q} A_{j,0}`.
//!
//! There is no dealer-rebuttal round: one valid complaint disqualifies.
//! Complaints that fail their own validity check (the share actually
//! verifies, or the signature is not the dealer's) are discarded and
//! penalize nobody, so a forged complaint cannot frame an honest dealer.
//!
//! Transcript authenticity rides on each node's long-lived identity key,
//! the BLS key registered with the registry contract.

use crate::group::{hash_to_g1, pairing_check, PointG1, PointG2, Scalar};
use crate::sharing::{self, FeldmanCommitment, Share};
use crate::NodeId;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DkgError {
    #[error("node {0} is not a session participant")]
    NotParticipant(NodeId),
    #[error("invalid session config: {0}")]
    InvalidConfig(String),
    #[error("dealer {0} already contributed a deal this session")]
    DuplicateDealer(NodeId),
    #[error("commitment signature does not verify for dealer {0}")]
    BadCommitmentSignature(NodeId),
    #[error("qualified set has {qualified} dealers, below the required {needed}")]
    BelowQualifiedThreshold { qualified: usize, needed: usize },
    #[error("no share received from qualified dealer {0}")]
    MissingShare(NodeId),
}

/// Parameters of one DKG session, fixed by the key contract's generation
/// event: the ordered participant list (registration order), the signature
/// threshold, and the minimum number of qualified dealers for the session
/// to count as successful.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DkgConfig {
    pub session_id: u64,
    pub participants: Vec<NodeId>,
    pub threshold: usize,
    pub min_qualified: usize,
}

impl DkgConfig {
    pub fn new(session_id: u64, participants: Vec<NodeId>, threshold: usize) -> DkgConfig {
        let min_qualified = threshold;
        DkgConfig {
            session_id,
            participants,
            threshold,
            min_qualified,
        }
    }

    pub fn validate(&self) -> Result<(), DkgError> {
        let n = self.participants.len();
        if self.threshold == 0 || self.threshold > n {
            return Err(DkgError::InvalidConfig(format!(
                "threshold {} out of range for {} participants",
                self.threshold, n
            )));
        }
        if self.min_qualified < self.threshold {
            return Err(DkgError::InvalidConfig(
                "min_qualified below signature threshold".into(),
            ));
        }
        let unique: BTreeSet<&NodeId> = self.participants.iter().collect();
        if unique.len() != n {
            return Err(DkgError::InvalidConfig("duplicate participant ids".into()));
        }
        Ok(())
    }

    /// 1-based share index of a participant (its position in registration
    /// order), or None for strangers.
    pub fn index_of(&self, id: &NodeId) -> Option<u32> {
        self.participants
            .iter()
            .position(|p| p == id)
            .map(|i| i as u32 + 1)
    }
}

// ---------------------------------------------------------------------------
// Identity keys
// ---------------------------------------------------------------------------

/// A node's long-lived BLS identity: the public half is registered with the
/// registry contract, the secret half signs DKG transcript messages.
#[derive(Debug, Clone)]
pub struct IdentityKey {
    secret: Scalar,
    public: PointG2,
}

impl IdentityKey {
    pub fn generate(rng: &mut impl RngCore) -> IdentityKey {
        let secret = Scalar::random(rng);
        IdentityKey::from_secret(secret)
    }

    pub fn from_secret(secret: Scalar) -> IdentityKey {
        IdentityKey {
            secret,
            public: PointG2::generator() * secret,
        }
    }

    pub fn public(&self) -> PointG2 {
        self.public
    }

    /// Plain BLS signature `sk·H(m)`.
    pub fn sign(&self, message: &[u8]) -> PointG1 {
        let h = hash_to_g1(message).expect("identity messages are never empty");
        h * self.secret
    }
}

/// Verify a plain BLS identity signature.
pub fn verify_identity_signature(public: &PointG2, message: &[u8], signature: &PointG1) -> bool {
    match hash_to_g1(message) {
        Ok(h) => pairing_check(&[(*signature, -PointG2::generator()), (h, *public)]),
        Err(_) => false,
    }
}

// ---------------------------------------------------------------------------
// Wire objects
// ---------------------------------------------------------------------------

/// A private share together with the dealer's signature binding it to
/// (session, dealer, recipient). The signature is what makes complaints
/// verifiable by third parties.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedShare {
    pub share: Share,
    pub signature: PointG1,
}

/// One dealer's full contribution: the broadcast commitment and the
/// per-recipient private shares. On the wire the commitment travels on the
/// broadcast channel and each share on a point-to-point channel; the
/// combined struct is the in-process view.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Deal {
    pub session_id: u64,
    pub dealer: NodeId,
    pub commitment: FeldmanCommitment,
    pub commitment_signature: PointG1,
    pub shares: BTreeMap<NodeId, SignedShare>,
}

/// Accusation against a dealer. Valid only if the embedded signed share is
/// authentically the dealer's and fails Feldman verification against the
/// dealer's broadcast commitment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Complaint {
    pub session_id: u64,
    pub complainer: NodeId,
    pub dealer: NodeId,
    pub evidence: Option<SignedShare>,
}

/// A node's output from a successful session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyShare {
    pub owner_index: u32,
    pub secret_share: Scalar,
    pub public_key: PointG2,
    /// Per-index public verification keys: `vk_i = Σ_{j∈Q} Σ_k A_{j,k}·i^k`.
    pub verification_keys: BTreeMap<u32, PointG2>,
}

impl KeyShare {
    pub fn verification_key(&self, index: u32) -> Option<&PointG2> {
        self.verification_keys.get(&index)
    }
}

fn commitment_message(session_id: u64, dealer: &NodeId, commitment: &FeldmanCommitment) -> Vec<u8> {
    let mut msg = b"dkg-commitment\x00".to_vec();
    msg.extend_from_slice(&session_id.to_be_bytes());
    msg.extend_from_slice(&(dealer.0.len() as u32).to_be_bytes());
    msg.extend_from_slice(dealer.0.as_bytes());
    for point in &commitment.points {
        msg.extend_from_slice(&point.to_bytes());
    }
    msg
}

fn share_message(session_id: u64, dealer: &NodeId, recipient: &NodeId, share: &Share) -> Vec<u8> {
    let mut msg = b"dkg-share\x00".to_vec();
    msg.extend_from_slice(&session_id.to_be_bytes());
    msg.extend_from_slice(&(dealer.0.len() as u32).to_be_bytes());
    msg.extend_from_slice(dealer.0.as_bytes());
    msg.extend_from_slice(&(recipient.0.len() as u32).to_be_bytes());
    msg.extend_from_slice(recipient.0.as_bytes());
    msg.extend_from_slice(&share.index.to_be_bytes());
    msg.extend_from_slice(&share.value.to_bytes());
    msg
}

/// The exact bytes a dealer signs per addressed share. Public so that
/// harnesses can forge dealer-authentic evidence when scripting misbehavior.
pub fn share_message_bytes(
    session_id: u64,
    dealer: &NodeId,
    recipient: &NodeId,
    share: &Share,
) -> Vec<u8> {
    share_message(session_id, dealer, recipient, share)
}

// ---------------------------------------------------------------------------
// Protocol steps as free functions
// ---------------------------------------------------------------------------

/// Produce the dealer's contribution: a fresh random secret shared at the
/// session threshold, committed and signed.
pub fn create_deal(
    config: &DkgConfig,
    dealer: &NodeId,
    identity: &IdentityKey,
    rng: &mut impl RngCore,
) -> Result<Deal, DkgError> {
    config.validate()?;
    if config.index_of(dealer).is_none() {
        return Err(DkgError::NotParticipant(dealer.clone()));
    }
    let secret = Scalar::random(rng);
    let (poly, shares) = sharing::deal(secret, config.threshold, config.participants.len(), rng)
        .map_err(|e| DkgError::InvalidConfig(e.to_string()))?;
    let commitment = sharing::feldman_commit(&poly);
    let commitment_signature =
        identity.sign(&commitment_message(config.session_id, dealer, &commitment));
    let shares = config
        .participants
        .iter()
        .zip(shares)
        .map(|(recipient, share)| {
            let signature =
                identity.sign(&share_message(config.session_id, dealer, recipient, &share));
            (recipient.clone(), SignedShare { share, signature })
        })
        .collect();
    Ok(Deal {
        session_id: config.session_id,
        dealer: dealer.clone(),
        commitment,
        commitment_signature,
        shares,
    })
}

/// Receiver-side check of one deal. Returns `None` when the receiver's
/// share verifies against the broadcast commitment, otherwise the complaint
/// to broadcast. A malformed commitment or a missing share also draws a
/// complaint; the latter carries no evidence and will not disqualify the
/// dealer on its own.
pub fn process_deal(config: &DkgConfig, receiver: &NodeId, deal: &Deal) -> Option<Complaint> {
    let complaint = |evidence| {
        Some(Complaint {
            session_id: deal.session_id,
            complainer: receiver.clone(),
            dealer: deal.dealer.clone(),
            evidence,
        })
    };
    let Some(signed) = deal.shares.get(receiver) else {
        return complaint(None);
    };
    if deal.commitment.threshold() != config.threshold
        || !sharing::feldman_verify(&signed.share, &deal.commitment)
    {
        return complaint(Some(signed.clone()));
    }
    None
}

/// The complaint validity rule. `commitment` is the dealer's broadcast
/// commitment, `dealer_identity` its registered identity key.
pub fn complaint_is_valid(
    config: &DkgConfig,
    complaint: &Complaint,
    commitment: &FeldmanCommitment,
    dealer_identity: &PointG2,
) -> bool {
    if complaint.session_id != config.session_id {
        return false;
    }
    let Some(evidence) = &complaint.evidence else {
        // No evidence, nothing a third party can check.
        return false;
    };
    let message = share_message(
        complaint.session_id,
        &complaint.dealer,
        &complaint.complainer,
        &evidence.share,
    );
    if !verify_identity_signature(dealer_identity, &message, &evidence.signature) {
        return false;
    }
    // The dealer provably sent this share; the complaint stands iff the
    // share does not match the dealer's own commitment.
    commitment.threshold() != config.threshold
        || !sharing::feldman_verify(&evidence.share, commitment)
}

/// Dealers that shared correctly: contributed exactly one deal and drew no
/// valid complaint. Invalid complaints are discarded and penalize nobody.
pub fn qualified_set(
    config: &DkgConfig,
    deals: &[Deal],
    complaints: &[Complaint],
    identities: &BTreeMap<NodeId, PointG2>,
) -> BTreeSet<NodeId> {
    let mut commitments: BTreeMap<NodeId, &FeldmanCommitment> = BTreeMap::new();
    for deal in deals {
        if deal.session_id != config.session_id || config.index_of(&deal.dealer).is_none() {
            continue;
        }
        // duplicate dealer: the transcript keeps the first deal
        commitments
            .entry(deal.dealer.clone())
            .or_insert(&deal.commitment);
    }
    let mut qualified: BTreeSet<NodeId> = commitments.keys().cloned().collect();
    for complaint in complaints {
        if !qualified.contains(&complaint.dealer) {
            continue;
        }
        let (Some(commitment), Some(identity)) = (
            commitments.get(&complaint.dealer),
            identities.get(&complaint.dealer),
        ) else {
            continue;
        };
        if complaint_is_valid(config, complaint, commitment, identity) {
            qualified.remove(&complaint.dealer);
        }
    }
    qualified
}

/// Sum the qualified dealers' contributions into this node's key share.
/// `deals` may contain non-qualified entries; they are ignored.
pub fn finalize(
    config: &DkgConfig,
    me: &NodeId,
    deals: &[Deal],
    qualified: &BTreeSet<NodeId>,
) -> Result<KeyShare, DkgError> {
    let owner_index = config
        .index_of(me)
        .ok_or_else(|| DkgError::NotParticipant(me.clone()))?;
    if qualified.len() < config.min_qualified {
        return Err(DkgError::BelowQualifiedThreshold {
            qualified: qualified.len(),
            needed: config.min_qualified,
        });
    }
    // first deal per dealer, in dealer order, restricted to Q
    let mut by_dealer: BTreeMap<&NodeId, &Deal> = BTreeMap::new();
    for deal in deals {
        if qualified.contains(&deal.dealer) {
            by_dealer.entry(&deal.dealer).or_insert(deal);
        }
    }
    for dealer in qualified {
        if !by_dealer.contains_key(dealer) {
            return Err(DkgError::MissingShare(dealer.clone()));
        }
    }

    let mut secret_share = Scalar::zero();
    let mut public_key = PointG2::identity();
    let mut verification_keys: BTreeMap<u32, PointG2> = config
        .participants
        .iter()
        .map(|p| (config.index_of(p).unwrap(), PointG2::identity()))
        .collect();
    for (dealer, deal) in &by_dealer {
        let signed = deal
            .shares
            .get(me)
            .ok_or_else(|| DkgError::MissingShare((*dealer).clone()))?;
        secret_share += signed.share.value;
        public_key += deal.commitment.public_point();
        for (index, vk) in verification_keys.iter_mut() {
            *vk += deal.commitment.evaluate(*index);
        }
    }
    Ok(KeyShare {
        owner_index,
        secret_share,
        public_key,
        verification_keys,
    })
}

// ---------------------------------------------------------------------------
// Message-driven participant
// ---------------------------------------------------------------------------

/// One node's view of a running session: commitments seen on broadcast,
/// shares received point-to-point, complaints observed. Feed it messages in
/// arrival order; it sorts internally so that identical transcripts yield
/// identical results on every node.
#[derive(Debug, Clone)]
pub struct DkgParticipant {
    config: DkgConfig,
    me: NodeId,
    identities: BTreeMap<NodeId, PointG2>,
    commitments: BTreeMap<NodeId, FeldmanCommitment>,
    received_shares: BTreeMap<NodeId, SignedShare>,
    complaints: Vec<Complaint>,
    my_deal: Option<Deal>,
}

impl DkgParticipant {
    /// `identities` maps every participant to its registered identity key.
    pub fn new(
        config: DkgConfig,
        me: NodeId,
        identities: BTreeMap<NodeId, PointG2>,
    ) -> Result<DkgParticipant, DkgError> {
        config.validate()?;
        if config.index_of(&me).is_none() {
            return Err(DkgError::NotParticipant(me));
        }
        Ok(DkgParticipant {
            config,
            me,
            identities,
            commitments: BTreeMap::new(),
            received_shares: BTreeMap::new(),
            complaints: Vec::new(),
            my_deal: None,
        })
    }

    pub fn config(&self) -> &DkgConfig {
        &self.config
    }

    pub fn my_index(&self) -> u32 {
        self.config.index_of(&self.me).unwrap()
    }

    /// Create (once) this node's own deal. The caller broadcasts the
    /// commitment and routes the private shares.
    pub fn deal(
        &mut self,
        identity: &IdentityKey,
        rng: &mut impl RngCore,
    ) -> Result<Deal, DkgError> {
        if self.my_deal.is_some() {
            return Err(DkgError::DuplicateDealer(self.me.clone()));
        }
        let deal = create_deal(&self.config, &self.me, identity, rng)?;
        self.my_deal = Some(deal.clone());
        Ok(deal)
    }

    /// Ingest a commitment from the broadcast channel. Rejects duplicate
    /// dealers (first broadcast wins) and forged signatures.
    pub fn observe_commitment(
        &mut self,
        dealer: &NodeId,
        commitment: FeldmanCommitment,
        signature: &PointG1,
    ) -> Result<(), DkgError> {
        if self.config.index_of(dealer).is_none() {
            return Err(DkgError::NotParticipant(dealer.clone()));
        }
        if self.commitments.contains_key(dealer) {
            return Err(DkgError::DuplicateDealer(dealer.clone()));
        }
        let identity = self
            .identities
            .get(dealer)
            .ok_or_else(|| DkgError::NotParticipant(dealer.clone()))?;
        let message = commitment_message(self.config.session_id, dealer, &commitment);
        if !verify_identity_signature(identity, &message, signature) {
            return Err(DkgError::BadCommitmentSignature(dealer.clone()));
        }
        self.commitments.insert(dealer.clone(), commitment);
        Ok(())
    }

    /// Ingest this node's private share from a dealer.
    pub fn receive_share(&mut self, dealer: &NodeId, signed: SignedShare) {
        self.received_shares.entry(dealer.clone()).or_insert(signed);
    }

    /// After the dealing phase: check every received share against its
    /// broadcast commitment and return the complaints this node raises.
    /// Dealers that broadcast a commitment but sent us nothing draw an
    /// evidence-free complaint.
    pub fn evaluate_deals(&mut self) -> Vec<Complaint> {
        let mut complaints = Vec::new();
        for (dealer, commitment) in &self.commitments {
            let complaint = match self.received_shares.get(dealer) {
                None => Some(None),
                Some(signed) => {
                    if commitment.threshold() != self.config.threshold
                        || !sharing::feldman_verify(&signed.share, commitment)
                    {
                        Some(Some(signed.clone()))
                    } else {
                        None
                    }
                }
            };
            if let Some(evidence) = complaint {
                complaints.push(Complaint {
                    session_id: self.config.session_id,
                    complainer: self.me.clone(),
                    dealer: dealer.clone(),
                    evidence,
                });
            }
        }
        self.complaints.extend(complaints.clone());
        complaints
    }

    /// Ingest a complaint from the broadcast channel (including our own).
    pub fn observe_complaint(&mut self, complaint: Complaint) {
        if complaint.session_id == self.config.session_id && !self.complaints.contains(&complaint) {
            self.complaints.push(complaint);
        }
    }

    /// The qualified set as this node computes it from its transcript view.
    pub fn qualified(&self) -> BTreeSet<NodeId> {
        let mut qualified: BTreeSet<NodeId> = self.commitments.keys().cloned().collect();
        for complaint in &self.complaints {
            if !qualified.contains(&complaint.dealer) {
                continue;
            }
            let (Some(commitment), Some(identity)) = (
                self.commitments.get(&complaint.dealer),
                self.identities.get(&complaint.dealer),
            ) else {
                continue;
            };
            if complaint_is_valid(&self.config, complaint, commitment, identity) {
                qualified.remove(&complaint.dealer);
            }
        }
        qualified
    }

    /// Finish the session: sum qualified contributions into this node's key
    /// share and derive the shared public key and verification keys.
    pub fn finalize(&self) -> Result<KeyShare, DkgError> {
        let qualified = self.qualified();
        if qualified.len() < self.config.min_qualified {
            return Err(DkgError::BelowQualifiedThreshold {
                qualified: qualified.len(),
                needed: self.config.min_qualified,
            });
        }
        let owner_index = self.my_index();
        let mut secret_share = Scalar::zero();
        let mut public_key = PointG2::identity();
        let mut verification_keys: BTreeMap<u32, PointG2> = self
            .config
            .participants
            .iter()
            .map(|p| (self.config.index_of(p).unwrap(), PointG2::identity()))
            .collect();
        for dealer in &qualified {
            let signed = self
                .received_shares
                .get(dealer)
                .ok_or_else(|| DkgError::MissingShare(dealer.clone()))?;
            let commitment = &self.commitments[dealer];
            secret_share += signed.share.value;
            public_key += commitment.public_point();
            for (index, vk) in verification_keys.iter_mut() {
                *vk += commitment.evaluate(*index);
            }
        }
        Ok(KeyShare {
            owner_index,
            secret_share,
            public_key,
            verification_keys,
        })
    }
}

// ---------------------------------------------------------------------------
// Transcript records
// ---------------------------------------------------------------------------

/// Post-mortem transcript line. The simulator dumps one JSON object per
/// line: every deal commitment, every complaint, and the final key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DkgRecord {
    Deal {
        session: u64,
        dealer: NodeId,
        commitment: Vec<PointG2>,
        signature: PointG1,
    },
    Complaint {
        session: u64,
        complainer: NodeId,
        dealer: NodeId,
        evidence_share_index: Option<u32>,
    },
    Final {
        session: u64,
        qualified: Vec<NodeId>,
        public_key: PointG2,
    },
}

impl DkgRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("transcript records serialize")
    }
}
