//! In-memory emulation of the target chain's three contracts.
//!
//! One [`Ledger`] holds the block clock, the append-only event log, token
//! balances, and the storage of the registry, key, and oracle contracts.
//! Mutations enter through an ordered transaction queue and are applied at
//! block boundaries, so every run is a deterministic function of the
//! submitted transactions.
//!
//! * The **registry** keeps the node table with stakes and registration
//!   ordinals, counts registrations toward the next key generation, selects
//!   the round-robin aggregator, and handles deregistration and majority
//!   kicks.
//! * The **key contract** announces generation sessions, takes a single
//!   pending public-key submission at a time, lets nodes dispute it during
//!   a window, and locks in the signature and validator thresholds on
//!   activation.
//! * The **oracle contract** escrows request fees, verifies one pairing
//!   equation per submitted result, pays the aggregator, and runs the
//!   signature-derived validation-reward lottery.
//!
//! Requests are event-only: the contract stores the escrow and the result,
//! never the query, so an oracle node that missed events must replay the
//! log. Gas is not metered here — operating costs live in [`crate::costmodel`].

use crate::dkg::Complaint;
use crate::group::PointG2;
use crate::sharing::FeldmanCommitment;
use crate::sourcechain::VerificationAnswer;
use crate::tbls::{self, Signature};
use crate::NodeId;
use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet};

/// Byte length of the canonical result payload.
pub const RESULT_PAYLOAD_BYTES: usize = 50;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ContractError {
    #[error("stake {offered} below the required minimum {minimum}")]
    InsufficientStake { offered: u64, minimum: u64 },
    #[error("account {0} cannot cover {1} token units")]
    InsufficientBalance(Account, u64),
    #[error("node id {0} already registered")]
    DuplicateNode(NodeId),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("node {0} is not active")]
    InactiveNode(NodeId),
    #[error(
        "kick needs a strict majority of the other active nodes ({votes} of {electorate} voted)"
    )]
    KickWithoutMajority { votes: usize, electorate: usize },
    #[error("no key generation session awaiting a submission")]
    NoSessionPending,
    #[error("a public-key submission is already pending")]
    SubmissionPending,
    #[error("no public-key submission to dispute")]
    NothingToDispute,
    #[error("dispute window closed at height {closed_at}")]
    DisputeWindowClosed { closed_at: u64 },
    #[error("node {0} already disputed this submission")]
    AlreadyDisputed(NodeId),
    #[error("payment does not cover the advertised fees")]
    Underpayment,
    #[error("unknown request id {0}")]
    UnknownRequest(u64),
    #[error("request {0} already has a stored result")]
    DuplicateResult(u64),
    #[error("sender {sender} is not the scheduled aggregator {scheduled}")]
    WrongAggregator { sender: NodeId, scheduled: NodeId },
    #[error("no active public key")]
    NoActiveKey,
    #[error("payload does not embed request id {0}")]
    PayloadMismatch(u64),
    #[error("signature does not verify under the active public key")]
    InvalidSignature,
    #[error("no active nodes")]
    NoActiveNodes,
}

/// A token-holding account: client names and node ids share one namespace.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Account(pub String);

impl Account {
    pub fn new(name: impl Into<String>) -> Account {
        Account(name.into())
    }
}

impl From<&NodeId> for Account {
    fn from(id: &NodeId) -> Account {
        Account(id.0.clone())
    }
}

impl std::fmt::Display for Account {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

/// Protocol constants of the contract suite.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolParams {
    /// Blocks per aggregator before round-robin rotation.
    pub rotation_period: u64,
    /// Registrations between triggered key generations.
    pub dkg_trigger_registrations: u32,
    /// Blocks a submitted public key stays disputable.
    pub dispute_window: u64,
    /// Blocks nodes wait after a generation event before dealing.
    pub dkg_wait_blocks: u64,
    /// Optional floor for the validator threshold; the effective value is
    /// `max(signature_threshold, override)`.
    pub validator_threshold_override: Option<usize>,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        ProtocolParams {
            rotation_period: 6,
            dkg_trigger_registrations: 3,
            dispute_window: 12,
            dkg_wait_blocks: 2,
            validator_threshold_override: None,
        }
    }
}

/// Token economics: stake floor, fee prices, slashing, and the lottery rate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EconomicsParams {
    pub min_stake: u64,
    /// Reimbursement for the submission transaction; by default tied to the
    /// modeled BLS submission gas cost.
    pub tx_compensation: u64,
    pub aggregation_reward: u64,
    pub validation_contribution: u64,
    /// Stake fraction slashed on a rejected key submission, in ppm.
    pub slash_fraction_ppm: u32,
    /// Lottery base rate α in ppm: win probability is `α·(stake/total)²`.
    pub alpha_ppm: u64,
}

impl Default for EconomicsParams {
    fn default() -> Self {
        EconomicsParams {
            min_stake: 100,
            tx_compensation: crate::costmodel::BLS_SUBMIT_MEAN_GAS,
            aggregation_reward: 10,
            validation_contribution: 5,
            slash_fraction_ppm: 500_000,
            alpha_ppm: 500_000,
        }
    }
}

// ---------------------------------------------------------------------------
// Storage rows
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeStatus {
    Active,
    Exiting,
    Kicked,
}

/// Registry row for one oracle node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: NodeId,
    pub host: String,
    pub identity_key: PointG2,
    pub stake: u64,
    pub status: NodeStatus,
    /// Registration ordinal; never reused, fixes rotation and DKG order.
    pub ordinal: u32,
}

#[derive(Debug, Clone, Default)]
pub struct RegistryState {
    records: Vec<NodeRecord>,
    registrations_since_dkg: u32,
}

impl RegistryState {
    pub fn get(&self, id: &NodeId) -> Option<&NodeRecord> {
        self.records.iter().find(|r| &r.id == id)
    }

    fn get_mut(&mut self, id: &NodeId) -> Option<&mut NodeRecord> {
        self.records.iter_mut().find(|r| &r.id == id)
    }

    /// Active nodes in registration order.
    pub fn active_nodes(&self) -> Vec<&NodeRecord> {
        self.records
            .iter()
            .filter(|r| r.status == NodeStatus::Active)
            .collect()
    }

    pub fn active_count(&self) -> usize {
        self.active_nodes().len()
    }

    pub fn total_active_stake(&self) -> u64 {
        self.active_nodes().iter().map(|r| r.stake).sum()
    }

    pub fn records(&self) -> &[NodeRecord] {
        &self.records
    }
}

/// Key-contract storage.
#[derive(Debug, Clone, Default)]
pub struct KeyState {
    pub active_public_key: Option<PointG2>,
    pub signature_threshold: usize,
    pub validator_threshold: usize,
    pub pending: Option<PendingKey>,
    /// Most recent announced generation session.
    pub announced: Option<AnnouncedSession>,
    /// Session id of the active key (0 when none yet).
    pub activated_session: u64,
    /// Height at which the active key was activated.
    pub activated_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnouncedSession {
    pub session_id: u64,
    pub participants: Vec<NodeId>,
    pub threshold: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingKey {
    pub session_id: u64,
    pub public_key: PointG2,
    pub submitter: NodeId,
    pub submitted_at: u64,
    pub threshold: usize,
    pub disputes: BTreeSet<NodeId>,
}

/// A client's verification query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub source_chain_id: u64,
    pub tx_id: String,
    pub min_confirmations: u64,
}

/// Fee escrow attached to a request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeeBreakdown {
    pub tx_compensation: u64,
    pub aggregation_reward: u64,
    pub validation_contribution: u64,
}

impl FeeBreakdown {
    pub fn total(&self) -> u64 {
        self.tx_compensation + self.aggregation_reward + self.validation_contribution
    }
}

/// An open request; dropped from storage once a result lands.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Request {
    pub request_id: u64,
    pub client: Account,
    pub query: Query,
    pub fees: FeeBreakdown,
    pub requested_at: u64,
}

/// A stored, verified result.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub request_id: u64,
    #[serde(with = "hex::serde")]
    pub payload: Vec<u8>,
    pub signature: Signature,
    pub aggregator: NodeId,
    pub height: u64,
    pub lottery_win: bool,
    pub lottery_payout: u64,
}

#[derive(Debug, Clone, Default)]
pub struct OracleState {
    next_request_id: u64,
    pub open_requests: BTreeMap<u64, Request>,
    pub results: BTreeMap<u64, ResultRecord>,
    pub validation_pot: u64,
}

// ---------------------------------------------------------------------------
// Transactions and events
// ---------------------------------------------------------------------------

/// Everything that can enter the ledger's transaction queue.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transaction {
    Register {
        node: NodeId,
        host: String,
        identity_key: PointG2,
        stake: u64,
    },
    Deregister {
        node: NodeId,
    },
    Kick {
        target: NodeId,
        votes: BTreeSet<NodeId>,
    },
    SubmitPublicKey {
        node: NodeId,
        session_id: u64,
        public_key: PointG2,
    },
    DisputeKey {
        node: NodeId,
        session_id: u64,
    },
    RequestVerification {
        client: Account,
        query: Query,
        fees: FeeBreakdown,
    },
    SubmitResult {
        node: NodeId,
        request_id: u64,
        #[serde(with = "hex::serde")]
        payload: Vec<u8>,
        signature: Signature,
    },
    /// DKG broadcast: the ledger event log doubles as the broadcast channel,
    /// carrying commitments and complaints (never private shares).
    PostDealCommitment {
        session_id: u64,
        dealer: NodeId,
        commitment: FeldmanCommitment,
        signature: crate::group::PointG1,
    },
    PostComplaint {
        complaint: Complaint,
    },
}

impl Transaction {
    /// The node that signed/sent this transaction, when it is node-originated.
    pub fn sender_node(&self) -> Option<&NodeId> {
        match self {
            Transaction::Register { node, .. }
            | Transaction::Deregister { node }
            | Transaction::SubmitPublicKey { node, .. }
            | Transaction::DisputeKey { node, .. }
            | Transaction::SubmitResult { node, .. } => Some(node),
            Transaction::Kick { .. } => None,
            Transaction::RequestVerification { .. } => None,
            Transaction::PostDealCommitment { dealer, .. } => Some(dealer),
            Transaction::PostComplaint { complaint } => Some(&complaint.complainer),
        }
    }
}

/// Log entries; the event log is the only broadcast medium nodes can read.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    NodeRegistered {
        node: NodeId,
        ordinal: u32,
        stake: u64,
    },
    NodeDeregistered {
        node: NodeId,
        stake_returned: u64,
    },
    NodeKicked {
        node: NodeId,
        stake_burned: u64,
    },
    /// The key contract's generation event: run a DKG with these
    /// participants at this threshold.
    KeyGenerationRequested {
        session_id: u64,
        participants: Vec<NodeId>,
        threshold: usize,
    },
    PublicKeySubmitted {
        session_id: u64,
        submitter: NodeId,
        public_key: PointG2,
    },
    KeyDisputed {
        session_id: u64,
        disputer: NodeId,
        disputes: usize,
    },
    PublicKeyRejected {
        session_id: u64,
        submitter: NodeId,
        slashed: u64,
    },
    PublicKeyActivated {
        session_id: u64,
        public_key: PointG2,
        signature_threshold: usize,
        validator_threshold: usize,
    },
    /// Request broadcast; the query lives only here, never in storage.
    VerificationRequested {
        request_id: u64,
        client: Account,
        query: Query,
        fees: FeeBreakdown,
    },
    ResultAvailable {
        request_id: u64,
        aggregator: NodeId,
    },
    LotteryWon {
        request_id: u64,
        node: NodeId,
        payout: u64,
    },
    LotteryLost {
        request_id: u64,
        node: NodeId,
        pot: u64,
    },
    DealCommitmentPosted {
        session_id: u64,
        dealer: NodeId,
        commitment: FeldmanCommitment,
        signature: crate::group::PointG1,
    },
    ComplaintPosted {
        complaint: Complaint,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordedEvent {
    pub height: u64,
    pub event: Event,
}

/// Outcome of one applied transaction, kept for metrics and transcripts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxReceipt {
    pub height: u64,
    pub accepted: bool,
    pub error: Option<String>,
    pub tx: Transaction,
}

// ---------------------------------------------------------------------------
// Payload encoding
// ---------------------------------------------------------------------------

/// Canonical result payload — the exact bytes that get hashed to the curve
/// and signed: `request_id (8 BE) ‖ included (1) ‖ block_number (8 BE) ‖
/// block_hash (32) ‖ confirmed (1)`. Binding the request id makes replay
/// across requests impossible; byte-exact grouping by the aggregator makes
/// "identical results" syntactic.
pub fn encode_result_payload(request_id: u64, answer: &VerificationAnswer) -> Vec<u8> {
    let mut payload = Vec::with_capacity(RESULT_PAYLOAD_BYTES);
    payload.extend_from_slice(&request_id.to_be_bytes());
    payload.push(answer.included as u8);
    if answer.included {
        payload.extend_from_slice(&answer.block_number.to_be_bytes());
        payload.extend_from_slice(&answer.block_hash);
    } else {
        payload.extend_from_slice(&[0u8; 40]);
    }
    payload.push(answer.confirmed as u8);
    payload
}

/// Inverse of [`encode_result_payload`].
pub fn decode_result_payload(payload: &[u8]) -> Option<(u64, VerificationAnswer)> {
    if payload.len() != RESULT_PAYLOAD_BYTES {
        return None;
    }
    let request_id = u64::from_be_bytes(payload[0..8].try_into().unwrap());
    let included = match payload[8] {
        0 => false,
        1 => true,
        _ => return None,
    };
    let confirmed = match payload[49] {
        0 => false,
        1 => true,
        _ => return None,
    };
    Some((
        request_id,
        VerificationAnswer {
            included,
            block_number: u64::from_be_bytes(payload[9..17].try_into().unwrap()),
            block_hash: payload[17..49].try_into().unwrap(),
            confirmed,
        },
    ))
}

// ---------------------------------------------------------------------------
// Lottery
// ---------------------------------------------------------------------------

/// Win threshold scaled to 2^256: the draw wins iff the uniform value
/// `SHA-256(signature)` read as a big-endian integer is below
/// `2^256 · α · (stake/total)²`. Exact integer arithmetic, no floats.
pub fn lottery_threshold(stake: u64, total_stake: u64, alpha_ppm: u64) -> BigUint {
    if total_stake == 0 {
        return BigUint::from(0u8);
    }
    let numerator = BigUint::from(alpha_ppm)
        * BigUint::from(stake)
        * BigUint::from(stake)
        * (BigUint::from(1u8) << 256);
    let denominator =
        BigUint::from(1_000_000u64) * BigUint::from(total_stake) * BigUint::from(total_stake);
    let threshold: BigUint = numerator / denominator;
    let one = BigUint::from(1u8) << 256;
    threshold.min(one)
}

/// Deterministic draw: a pure function of the signature bytes and the stake
/// table, independent of any simulator randomness.
pub fn lottery_draw(signature: &Signature, stake: u64, total_stake: u64, alpha_ppm: u64) -> bool {
    let digest = Sha256::digest(signature.to_bytes());
    let u = BigUint::from_bytes_be(&digest);
    u < lottery_threshold(stake, total_stake, alpha_ppm)
}

// ---------------------------------------------------------------------------
// The ledger
// ---------------------------------------------------------------------------

/// The emulated target chain: block clock, balances, event log, and the
/// three contract states. Single-owner; all mutation flows through
/// [`Ledger::submit`] + [`Ledger::advance_block`].
#[derive(Debug, Clone)]
pub struct Ledger {
    protocol: ProtocolParams,
    economics: EconomicsParams,
    height: u64,
    balances: BTreeMap<Account, u64>,
    burned: u64,
    minted: u64,
    registry: RegistryState,
    key: KeyState,
    oracle: OracleState,
    events: Vec<RecordedEvent>,
    receipts: Vec<TxReceipt>,
    queue: Vec<Transaction>,
    next_session_id: u64,
}

impl Ledger {
    pub fn new(protocol: ProtocolParams, economics: EconomicsParams) -> Ledger {
        Ledger {
            protocol,
            economics,
            height: 0,
            balances: BTreeMap::new(),
            burned: 0,
            minted: 0,
            registry: RegistryState::default(),
            key: KeyState::default(),
            oracle: OracleState {
                next_request_id: 1,
                ..OracleState::default()
            },
            events: Vec::new(),
            receipts: Vec::new(),
            queue: Vec::new(),
            next_session_id: 0,
        }
    }

    pub fn protocol(&self) -> &ProtocolParams {
        &self.protocol
    }

    pub fn economics(&self) -> &EconomicsParams {
        &self.economics
    }

    pub fn height(&self) -> u64 {
        self.height
    }

    pub fn registry(&self) -> &RegistryState {
        &self.registry
    }

    pub fn key_state(&self) -> &KeyState {
        &self.key
    }

    pub fn oracle_state(&self) -> &OracleState {
        &self.oracle
    }

    pub fn events(&self) -> &[RecordedEvent] {
        &self.events
    }

    pub fn receipts(&self) -> &[TxReceipt] {
        &self.receipts
    }

    pub fn balance(&self, account: &Account) -> u64 {
        self.balances.get(account).copied().unwrap_or(0)
    }

    pub fn burned(&self) -> u64 {
        self.burned
    }

    /// Genesis funding; counts toward the conservation total.
    pub fn credit(&mut self, account: Account, amount: u64) {
        *self.balances.entry(account).or_insert(0) += amount;
        self.minted += amount;
    }

    /// Enqueue a transaction for the next block.
    pub fn submit(&mut self, tx: Transaction) {
        self.queue.push(tx);
    }

    /// Form the next block: apply queued transactions in order, then run
    /// end-of-block housekeeping (pending-key activation). Returns the
    /// events recorded in this block.
    pub fn advance_block(&mut self) -> Vec<RecordedEvent> {
        self.height += 1;
        let first_event = self.events.len();
        let queue = std::mem::take(&mut self.queue);
        for tx in queue {
            let result = self.apply(&tx);
            let (accepted, error) = match result {
                Ok(events) => {
                    for event in events {
                        self.events.push(RecordedEvent {
                            height: self.height,
                            event,
                        });
                    }
                    (true, None)
                }
                Err(e) => (false, Some(e.to_string())),
            };
            self.receipts.push(TxReceipt {
                height: self.height,
                accepted,
                error,
                tx,
            });
        }
        self.maybe_activate_pending_key();
        self.events[first_event..].to_vec()
    }

    /// Round-robin aggregator at `height`: the active node at ordinal
    /// position `floor(height / rotation_period) mod active_count`.
    pub fn current_aggregator(&self, height: u64) -> Result<NodeId, ContractError> {
        let actives = self.registry.active_nodes();
        if actives.is_empty() {
            return Err(ContractError::NoActiveNodes);
        }
        let slot = (height / self.protocol.rotation_period) as usize % actives.len();
        Ok(actives[slot].id.clone())
    }

    pub fn get_result(&self, request_id: u64) -> Option<&ResultRecord> {
        self.oracle.results.get(&request_id)
    }

    /// Token conservation: balances + stakes + escrow + pot + burned must
    /// always equal everything ever minted.
    pub fn conservation_holds(&self) -> bool {
        let balances: u64 = self.balances.values().sum();
        let staked: u64 = self.registry.records.iter().map(|r| r.stake).sum();
        let escrow: u64 = self
            .oracle
            .open_requests
            .values()
            .map(|r| r.fees.total())
            .sum();
        balances + staked + escrow + self.oracle.validation_pot + self.burned == self.minted
    }

    // -- transaction application ------------------------------------------

    fn apply(&mut self, tx: &Transaction) -> Result<Vec<Event>, ContractError> {
        match tx {
            Transaction::Register {
                node,
                host,
                identity_key,
                stake,
            } => self.apply_register(node, host, identity_key, *stake),
            Transaction::Deregister { node } => self.apply_deregister(node),
            Transaction::Kick { target, votes } => self.apply_kick(target, votes),
            Transaction::SubmitPublicKey {
                node,
                session_id,
                public_key,
            } => self.apply_submit_public_key(node, *session_id, public_key),
            Transaction::DisputeKey { node, session_id } => {
                self.apply_dispute_key(node, *session_id)
            }
            Transaction::RequestVerification {
                client,
                query,
                fees,
            } => self.apply_request_verification(client, query, fees),
            Transaction::SubmitResult {
                node,
                request_id,
                payload,
                signature,
            } => self.apply_submit_result(node, *request_id, payload, signature),
            Transaction::PostDealCommitment {
                session_id,
                dealer,
                commitment,
                signature,
            } => {
                self.require_active(dealer)?;
                Ok(vec![Event::DealCommitmentPosted {
                    session_id: *session_id,
                    dealer: dealer.clone(),
                    commitment: commitment.clone(),
                    signature: *signature,
                }])
            }
            Transaction::PostComplaint { complaint } => {
                self.require_active(&complaint.complainer)?;
                Ok(vec![Event::ComplaintPosted {
                    complaint: complaint.clone(),
                }])
            }
        }
    }

    fn require_active(&self, node: &NodeId) -> Result<(), ContractError> {
        let record = self
            .registry
            .get(node)
            .ok_or_else(|| ContractError::UnknownNode(node.clone()))?;
        if record.status != NodeStatus::Active {
            return Err(ContractError::InactiveNode(node.clone()));
        }
        Ok(())
    }

    fn debit(&mut self, account: &Account, amount: u64) -> Result<(), ContractError> {
        let balance = self.balances.entry(account.clone()).or_insert(0);
        if *balance < amount {
            return Err(ContractError::InsufficientBalance(account.clone(), amount));
        }
        *balance -= amount;
        Ok(())
    }

    fn pay(&mut self, account: &Account, amount: u64) {
        *self.balances.entry(account.clone()).or_insert(0) += amount;
    }

    fn apply_register(
        &mut self,
        node: &NodeId,
        host: &str,
        identity_key: &PointG2,
        stake: u64,
    ) -> Result<Vec<Event>, ContractError> {
        if stake < self.economics.min_stake {
            return Err(ContractError::InsufficientStake {
                offered: stake,
                minimum: self.economics.min_stake,
            });
        }
        if self.registry.get(node).is_some() {
            return Err(ContractError::DuplicateNode(node.clone()));
        }
        self.debit(&Account::from(node), stake)?;
        let ordinal = self.registry.records.len() as u32;
        self.registry.records.push(NodeRecord {
            id: node.clone(),
            host: host.to_string(),
            identity_key: *identity_key,
            stake,
            status: NodeStatus::Active,
            ordinal,
        });
        self.registry.registrations_since_dkg += 1;
        let mut events = vec![Event::NodeRegistered {
            node: node.clone(),
            ordinal,
            stake,
        }];
        if self.registry.registrations_since_dkg >= self.protocol.dkg_trigger_registrations {
            self.registry.registrations_since_dkg = 0;
            events.push(self.announce_key_generation());
        }
        Ok(events)
    }

    /// The registry calls into the key contract: announce a new generation
    /// session over the currently active nodes with a majority threshold.
    fn announce_key_generation(&mut self) -> Event {
        self.next_session_id += 1;
        let participants: Vec<NodeId> = self
            .registry
            .active_nodes()
            .iter()
            .map(|r| r.id.clone())
            .collect();
        let threshold = participants.len() / 2 + 1;
        let session = AnnouncedSession {
            session_id: self.next_session_id,
            participants: participants.clone(),
            threshold,
        };
        self.key.announced = Some(session);
        // a superseded pending submission dies with its session
        self.key.pending = None;
        Event::KeyGenerationRequested {
            session_id: self.next_session_id,
            participants,
            threshold,
        }
    }

    /// Trigger a regeneration if the validator pool shrank below the locked
    /// validator threshold.
    fn maybe_regenerate_after_shrink(&mut self, events: &mut Vec<Event>) {
        let active = self.registry.active_count();
        if self.key.activated_session > 0 && active > 0 && active < self.key.validator_threshold {
            events.push(self.announce_key_generation());
        }
    }

    fn apply_deregister(&mut self, node: &NodeId) -> Result<Vec<Event>, ContractError> {
        self.require_active(node)?;
        let record = self.registry.get_mut(node).unwrap();
        let stake = record.stake;
        record.stake = 0;
        record.status = NodeStatus::Exiting;
        self.pay(&Account::from(node), stake);
        let mut events = vec![Event::NodeDeregistered {
            node: node.clone(),
            stake_returned: stake,
        }];
        self.maybe_regenerate_after_shrink(&mut events);
        Ok(events)
    }

    fn apply_kick(
        &mut self,
        target: &NodeId,
        votes: &BTreeSet<NodeId>,
    ) -> Result<Vec<Event>, ContractError> {
        self.require_active(target)?;
        let electorate = self.registry.active_count() - 1;
        let valid_votes = votes
            .iter()
            .filter(|v| {
                *v != target
                    && self
                        .registry
                        .get(v)
                        .is_some_and(|r| r.status == NodeStatus::Active)
            })
            .count();
        if valid_votes * 2 <= electorate {
            return Err(ContractError::KickWithoutMajority {
                votes: valid_votes,
                electorate,
            });
        }
        let record = self.registry.get_mut(target).unwrap();
        let stake = record.stake;
        record.stake = 0;
        record.status = NodeStatus::Kicked;
        self.burned += stake;
        let mut events = vec![Event::NodeKicked {
            node: target.clone(),
            stake_burned: stake,
        }];
        self.maybe_regenerate_after_shrink(&mut events);
        Ok(events)
    }

    fn apply_submit_public_key(
        &mut self,
        node: &NodeId,
        session_id: u64,
        public_key: &PointG2,
    ) -> Result<Vec<Event>, ContractError> {
        self.require_active(node)?;
        let announced = self
            .key
            .announced
            .as_ref()
            .ok_or(ContractError::NoSessionPending)?;
        if announced.session_id <= self.key.activated_session || announced.session_id != session_id
        {
            return Err(ContractError::NoSessionPending);
        }
        if self.key.pending.is_some() {
            return Err(ContractError::SubmissionPending);
        }
        self.key.pending = Some(PendingKey {
            session_id,
            public_key: *public_key,
            submitter: node.clone(),
            submitted_at: self.height,
            threshold: announced.threshold,
            disputes: BTreeSet::new(),
        });
        Ok(vec![Event::PublicKeySubmitted {
            session_id,
            submitter: node.clone(),
            public_key: *public_key,
        }])
    }

    fn apply_dispute_key(
        &mut self,
        node: &NodeId,
        session_id: u64,
    ) -> Result<Vec<Event>, ContractError> {
        self.require_active(node)?;
        let window = self.protocol.dispute_window;
        let active_count = self.registry.active_count();
        let pending = self
            .key
            .pending
            .as_mut()
            .ok_or(ContractError::NothingToDispute)?;
        if pending.session_id != session_id {
            return Err(ContractError::NothingToDispute);
        }
        let closes_at = pending.submitted_at + window;
        if self.height >= closes_at {
            return Err(ContractError::DisputeWindowClosed {
                closed_at: closes_at,
            });
        }
        if !pending.disputes.insert(node.clone()) {
            return Err(ContractError::AlreadyDisputed(node.clone()));
        }
        let disputes = pending.disputes.len();
        let mut events = vec![Event::KeyDisputed {
            session_id,
            disputer: node.clone(),
            disputes,
        }];
        // strict majority of active nodes voids the submission
        if disputes * 2 > active_count {
            let submitter = pending.submitter.clone();
            self.key.pending = None;
            let slashed = {
                let record = self.registry.get_mut(&submitter).unwrap();
                let cut = (record.stake as u128 * self.economics.slash_fraction_ppm as u128
                    / 1_000_000) as u64;
                record.stake -= cut;
                cut
            };
            self.burned += slashed;
            events.push(Event::PublicKeyRejected {
                session_id,
                submitter,
                slashed,
            });
        }
        Ok(events)
    }

    fn maybe_activate_pending_key(&mut self) {
        let Some(pending) = &self.key.pending else {
            return;
        };
        if self.height < pending.submitted_at + self.protocol.dispute_window {
            return;
        }
        let pending = self.key.pending.take().unwrap();
        let validator_threshold = self
            .protocol
            .validator_threshold_override
            .unwrap_or(0)
            .max(pending.threshold);
        self.key.active_public_key = Some(pending.public_key);
        self.key.signature_threshold = pending.threshold;
        self.key.validator_threshold = validator_threshold;
        self.key.activated_session = pending.session_id;
        self.key.activated_at = self.height;
        self.events.push(RecordedEvent {
            height: self.height,
            event: Event::PublicKeyActivated {
                session_id: pending.session_id,
                public_key: pending.public_key,
                signature_threshold: pending.threshold,
                validator_threshold,
            },
        });
    }

    fn apply_request_verification(
        &mut self,
        client: &Account,
        query: &Query,
        fees: &FeeBreakdown,
    ) -> Result<Vec<Event>, ContractError> {
        if fees.tx_compensation < self.economics.tx_compensation
            || fees.aggregation_reward < self.economics.aggregation_reward
            || fees.validation_contribution < self.economics.validation_contribution
        {
            return Err(ContractError::Underpayment);
        }
        self.debit(client, fees.total())?;
        let request_id = self.oracle.next_request_id;
        self.oracle.next_request_id += 1;
        self.oracle.open_requests.insert(
            request_id,
            Request {
                request_id,
                client: client.clone(),
                query: query.clone(),
                fees: *fees,
                requested_at: self.height,
            },
        );
        Ok(vec![Event::VerificationRequested {
            request_id,
            client: client.clone(),
            query: query.clone(),
            fees: *fees,
        }])
    }

    fn apply_submit_result(
        &mut self,
        node: &NodeId,
        request_id: u64,
        payload: &[u8],
        signature: &Signature,
    ) -> Result<Vec<Event>, ContractError> {
        self.require_active(node)?;
        if self.oracle.results.contains_key(&request_id) {
            return Err(ContractError::DuplicateResult(request_id));
        }
        if !self.oracle.open_requests.contains_key(&request_id) {
            return Err(ContractError::UnknownRequest(request_id));
        }
        let scheduled = self.current_aggregator(self.height)?;
        if &scheduled != node {
            return Err(ContractError::WrongAggregator {
                sender: node.clone(),
                scheduled,
            });
        }
        let public_key = self
            .key
            .active_public_key
            .ok_or(ContractError::NoActiveKey)?;
        if payload.len() != RESULT_PAYLOAD_BYTES || payload[0..8] != request_id.to_be_bytes() {
            return Err(ContractError::PayloadMismatch(request_id));
        }
        if !tbls::verify(signature, payload, &public_key) {
            return Err(ContractError::InvalidSignature);
        }

        let request = self.oracle.open_requests.remove(&request_id).unwrap();
        let mut events = vec![Event::ResultAvailable {
            request_id,
            aggregator: node.clone(),
        }];

        // compensation and aggregation reward go straight to the aggregator
        self.pay(
            &Account::from(node),
            request.fees.tx_compensation + request.fees.aggregation_reward,
        );

        // the validation contribution feeds the pot; the signature decides
        // whether the accumulated pot pays out
        self.oracle.validation_pot += request.fees.validation_contribution;
        let stake = self.registry.get(node).map(|r| r.stake).unwrap_or(0);
        let total_stake = self.registry.total_active_stake();
        let win = lottery_draw(signature, stake, total_stake, self.economics.alpha_ppm);
        let payout = if win {
            let pot = self.oracle.validation_pot;
            self.oracle.validation_pot = 0;
            self.pay(&Account::from(node), pot);
            events.push(Event::LotteryWon {
                request_id,
                node: node.clone(),
                payout: pot,
            });
            pot
        } else {
            events.push(Event::LotteryLost {
                request_id,
                node: node.clone(),
                pot: self.oracle.validation_pot,
            });
            0
        };

        self.oracle.results.insert(
            request_id,
            ResultRecord {
                request_id,
                payload: payload.to_vec(),
                signature: *signature,
                aggregator: node.clone(),
                height: self.height,
                lottery_win: win,
                lottery_payout: payout,
            },
        );
        Ok(events)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dkg::{create_deal, finalize, qualified_set, DkgConfig, IdentityKey, KeyShare};
    use crate::tbls::{recover, sign_share};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn node(n: usize) -> NodeId {
        NodeId::new(format!("n{n}"))
    }

    fn default_ledger() -> Ledger {
        Ledger::new(ProtocolParams::default(), EconomicsParams::default())
    }

    /// Fund and register `count` nodes in one block; returns their identity
    /// keys for later DKG use.
    fn register_nodes(ledger: &mut Ledger, count: usize) -> BTreeMap<NodeId, IdentityKey> {
        let mut rng = ChaCha20Rng::seed_from_u64(1000);
        let mut keys = BTreeMap::new();
        for i in 1..=count {
            let id = node(i);
            let key = IdentityKey::generate(&mut rng);
            ledger.credit(Account::from(&id), ledger.economics().min_stake);
            ledger.submit(Transaction::Register {
                node: id.clone(),
                host: format!("host-{i}:9000"),
                identity_key: key.public(),
                stake: ledger.economics().min_stake,
            });
            keys.insert(id, key);
        }
        ledger.advance_block();
        keys
    }

    fn generation_events(events: &[RecordedEvent]) -> Vec<(u64, usize, usize)> {
        events
            .iter()
            .filter_map(|re| match &re.event {
                Event::KeyGenerationRequested {
                    session_id,
                    participants,
                    threshold,
                } => Some((*session_id, participants.len(), *threshold)),
                _ => None,
            })
            .collect()
    }

    /// Run an in-process honest DKG for the latest announced session and
    /// return each participant's key share.
    fn run_session_dkg(
        ledger: &Ledger,
        keys: &BTreeMap<NodeId, IdentityKey>,
        seed: u64,
    ) -> BTreeMap<NodeId, KeyShare> {
        let announced = ledger.key_state().announced.clone().unwrap();
        let config = DkgConfig::new(
            announced.session_id,
            announced.participants.clone(),
            announced.threshold,
        );
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let deals: Vec<_> = config
            .participants
            .iter()
            .map(|p| create_deal(&config, p, &keys[p], &mut rng).unwrap())
            .collect();
        let identities: BTreeMap<NodeId, crate::group::PointG2> =
            keys.iter().map(|(p, k)| (p.clone(), k.public())).collect();
        let qualified = qualified_set(&config, &deals, &[], &identities);
        config
            .participants
            .iter()
            .map(|p| (p.clone(), finalize(&config, p, &deals, &qualified).unwrap()))
            .collect()
    }

    #[test]
    fn three_registrations_trigger_generation_with_majority_threshold() {
        let mut ledger = default_ledger();
        register_nodes(&mut ledger, 3);
        let generations = generation_events(ledger.events());
        assert_eq!(generations, vec![(1, 3, 2)]);
        assert!(ledger.conservation_holds());
    }

    #[test]
    fn seven_registrations_trigger_two_generations() {
        let mut ledger = default_ledger();
        register_nodes(&mut ledger, 7);
        // after the 3rd: n=3, t=2; after the 6th: n=6, t=4
        assert_eq!(
            generation_events(ledger.events()),
            vec![(1, 3, 2), (2, 6, 4)]
        );
    }

    #[test]
    fn understaked_registration_is_rejected_without_state_change() {
        let mut ledger = default_ledger();
        let id = node(1);
        ledger.credit(Account::from(&id), 1_000);
        ledger.submit(Transaction::Register {
            node: id.clone(),
            host: "h".into(),
            identity_key: PointG2::generator(),
            stake: 99,
        });
        ledger.advance_block();
        assert!(!ledger.receipts()[0].accepted);
        assert!(ledger.registry().get(&id).is_none());
        assert_eq!(ledger.balance(&Account::from(&id)), 1_000);
        assert!(ledger.events().is_empty());
    }

    #[test]
    fn duplicate_node_id_is_rejected() {
        let mut ledger = default_ledger();
        register_nodes(&mut ledger, 1);
        let id = node(1);
        ledger.credit(Account::from(&id), 100);
        ledger.submit(Transaction::Register {
            node: id,
            host: "elsewhere".into(),
            identity_key: PointG2::generator(),
            stake: 100,
        });
        ledger.advance_block();
        let receipt = ledger.receipts().last().unwrap();
        assert!(!receipt.accepted);
        assert!(receipt
            .error
            .as_deref()
            .unwrap()
            .contains("already registered"));
    }

    #[test]
    fn kick_requires_strict_majority_of_other_actives() {
        // 6 nodes: the target plus 5 voters
        let mut ledger = default_ledger();
        register_nodes(&mut ledger, 6);
        let target = node(6);
        let two: BTreeSet<NodeId> = [node(1), node(2)].into();
        ledger.submit(Transaction::Kick {
            target: target.clone(),
            votes: two,
        });
        ledger.advance_block();
        assert!(!ledger.receipts().last().unwrap().accepted);
        assert_eq!(
            ledger.registry().get(&target).unwrap().status,
            NodeStatus::Active
        );

        let three: BTreeSet<NodeId> = [node(1), node(2), node(3)].into();
        ledger.submit(Transaction::Kick {
            target: target.clone(),
            votes: three,
        });
        ledger.advance_block();
        assert!(ledger.receipts().last().unwrap().accepted);
        let record = ledger.registry().get(&target).unwrap();
        assert_eq!(record.status, NodeStatus::Kicked);
        assert_eq!(record.stake, 0);
        assert_eq!(ledger.burned(), 100);
        assert!(ledger.conservation_holds());
    }

    #[test]
    fn deregistration_below_validator_threshold_triggers_regeneration() {
        let mut ledger = Ledger::new(
            ProtocolParams {
                validator_threshold_override: Some(3),
                ..ProtocolParams::default()
            },
            EconomicsParams::default(),
        );
        register_nodes(&mut ledger, 3); // block 1, announces session 1 (t=2)
        ledger.submit(Transaction::SubmitPublicKey {
            node: node(1),
            session_id: 1,
            public_key: PointG2::generator(),
        });
        ledger.advance_block(); // block 2: pending
        for _ in 0..12 {
            ledger.advance_block();
        }
        assert!(ledger.key_state().active_public_key.is_some());
        assert_eq!(ledger.key_state().validator_threshold, 3);

        ledger.submit(Transaction::Deregister { node: node(3) });
        let events = ledger.advance_block();
        assert_eq!(ledger.balance(&Account::from(&node(3))), 100);
        let generations: Vec<_> = events
            .iter()
            .filter(|re| matches!(re.event, Event::KeyGenerationRequested { .. }))
            .collect();
        assert_eq!(generations.len(), 1);
        assert!(ledger.conservation_holds());
    }

    #[test]
    fn rotation_schedule_over_five_static_nodes() {
        let mut ledger = default_ledger();
        register_nodes(&mut ledger, 5);
        for height in 0..6 {
            assert_eq!(ledger.current_aggregator(height).unwrap(), node(1));
        }
        for height in 6..12 {
            assert_eq!(ledger.current_aggregator(height).unwrap(), node(2));
        }
        assert_eq!(ledger.current_aggregator(29).unwrap(), node(5));
        assert_eq!(ledger.current_aggregator(30).unwrap(), node(1));
    }

    #[test]
    fn rotation_recomputes_after_kick() {
        let mut ledger = default_ledger();
        register_nodes(&mut ledger, 5);
        let votes: BTreeSet<NodeId> = [node(1), node(3), node(4)].into();
        ledger.submit(Transaction::Kick {
            target: node(2),
            votes,
        });
        ledger.advance_block();
        // actives are now n1, n3, n4, n5; slot 1 of the rotation maps to n3
        for height in 6..12 {
            assert_eq!(ledger.current_aggregator(height).unwrap(), node(3));
        }
    }

    #[test]
    fn single_node_is_always_aggregator_and_empty_registry_errors() {
        let mut ledger = default_ledger();
        assert_eq!(
            ledger.current_aggregator(0),
            Err(ContractError::NoActiveNodes)
        );
        register_nodes(&mut ledger, 1);
        for height in [0, 7, 100, 12345] {
            assert_eq!(ledger.current_aggregator(height).unwrap(), node(1));
        }
    }

    #[test]
    fn key_submission_activates_after_quiet_window() {
        let mut ledger = default_ledger();
        register_nodes(&mut ledger, 3);
        ledger.submit(Transaction::SubmitPublicKey {
            node: node(2),
            session_id: 1,
            public_key: PointG2::generator(),
        });
        ledger.advance_block(); // height 2: submitted
                                // a second submission while one is pending is rejected
        ledger.submit(Transaction::SubmitPublicKey {
            node: node(3),
            session_id: 1,
            public_key: PointG2::generator(),
        });
        ledger.advance_block();
        assert!(!ledger.receipts().last().unwrap().accepted);

        while ledger.height() < 13 {
            ledger.advance_block();
            assert!(ledger.key_state().active_public_key.is_none());
        }
        ledger.advance_block(); // height 14 = 2 + 12: activation
        let key = ledger.key_state();
        assert_eq!(key.active_public_key, Some(PointG2::generator()));
        assert_eq!(key.signature_threshold, 2);
        assert_eq!(key.validator_threshold, 2);
        assert_eq!(key.activated_session, 1);
    }

    #[test]
    fn majority_dispute_voids_submission_and_slashes() {
        let mut ledger = default_ledger();
        register_nodes(&mut ledger, 5);
        // 5 registrations with R=3 announce session 1 after the third
        ledger.submit(Transaction::SubmitPublicKey {
            node: node(1),
            session_id: 1,
            public_key: PointG2::generator(),
        });
        ledger.advance_block();
        for disputer in [node(2), node(3), node(4)] {
            ledger.submit(Transaction::DisputeKey {
                node: disputer,
                session_id: 1,
            });
        }
        ledger.advance_block();
        assert!(ledger.key_state().pending.is_none());
        assert!(ledger.key_state().active_public_key.is_none());
        let submitter = ledger.registry().get(&node(1)).unwrap();
        assert_eq!(submitter.stake, 50); // half of 100 slashed
        assert_eq!(ledger.burned(), 50);
        assert!(ledger
            .events()
            .iter()
            .any(|re| matches!(re.event, Event::PublicKeyRejected { slashed: 50, .. })));
        assert!(ledger.conservation_holds());
    }

    #[test]
    fn dispute_after_window_is_rejected() {
        let mut ledger = default_ledger();
        register_nodes(&mut ledger, 3);
        ledger.submit(Transaction::SubmitPublicKey {
            node: node(1),
            session_id: 1,
            public_key: PointG2::generator(),
        });
        ledger.advance_block(); // submitted at height 2
        for _ in 0..11 {
            ledger.advance_block();
        }
        // height is now 13; the window closes at 14, and a dispute applied
        // in block 14 is already outside it
        ledger.submit(Transaction::DisputeKey {
            node: node(2),
            session_id: 1,
        });
        ledger.advance_block();
        let receipt = ledger.receipts().last().unwrap();
        assert!(!receipt.accepted);
        assert!(receipt.error.as_deref().unwrap().contains("window closed"));
        assert!(ledger.key_state().active_public_key.is_some());
    }

    #[test]
    fn request_ids_increase_and_underpayment_is_rejected() {
        let mut ledger = default_ledger();
        register_nodes(&mut ledger, 3);
        let client = Account::new("client");
        let fees = FeeBreakdown {
            tx_compensation: ledger.economics().tx_compensation,
            aggregation_reward: 10,
            validation_contribution: 5,
        };
        ledger.credit(client.clone(), 10 * fees.total());
        let query = Query {
            source_chain_id: 1,
            tx_id: "tx-a".into(),
            min_confirmations: 2,
        };
        ledger.submit(Transaction::RequestVerification {
            client: client.clone(),
            query: query.clone(),
            fees,
        });
        ledger.submit(Transaction::RequestVerification {
            client: client.clone(),
            query: query.clone(),
            fees,
        });
        let events = ledger.advance_block();
        let ids: Vec<u64> = events
            .iter()
            .filter_map(|re| match &re.event {
                Event::VerificationRequested { request_id, .. } => Some(*request_id),
                _ => None,
            })
            .collect();
        assert_eq!(ids, vec![1, 2]);

        let cheap = FeeBreakdown {
            validation_contribution: 4,
            ..fees
        };
        ledger.submit(Transaction::RequestVerification {
            client,
            query,
            fees: cheap,
        });
        ledger.advance_block();
        let receipt = ledger.receipts().last().unwrap();
        assert!(!receipt.accepted);
        assert!(ledger.conservation_holds());
    }

    #[test]
    fn result_submission_verifies_pays_and_rejects_abuse() {
        let mut ledger = default_ledger();
        let keys = register_nodes(&mut ledger, 3); // announces session 1, t=2
        let shares = run_session_dkg(&ledger, &keys, 77);
        let pk = shares[&node(1)].public_key;
        ledger.submit(Transaction::SubmitPublicKey {
            node: node(1),
            session_id: 1,
            public_key: pk,
        });
        ledger.advance_block();
        for _ in 0..12 {
            ledger.advance_block();
        }
        assert_eq!(ledger.key_state().active_public_key, Some(pk));

        let client = Account::new("client");
        let fees = FeeBreakdown {
            tx_compensation: ledger.economics().tx_compensation,
            aggregation_reward: 10,
            validation_contribution: 5,
        };
        ledger.credit(client.clone(), fees.total());
        ledger.submit(Transaction::RequestVerification {
            client,
            query: Query {
                source_chain_id: 1,
                tx_id: "tx-a".into(),
                min_confirmations: 2,
            },
            fees,
        });
        ledger.advance_block();

        let answer = VerificationAnswer {
            included: true,
            block_number: 7,
            block_hash: [0xAB; 32],
            confirmed: true,
        };
        let payload = encode_result_payload(1, &answer);
        let sig_shares: Vec<_> = [&node(1), &node(2)]
            .iter()
            .map(|n| sign_share(&shares[*n], &payload).unwrap())
            .collect();
        let signature = recover(&sig_shares, 2).unwrap();

        // the scheduled aggregator for the next block
        let scheduled = ledger.current_aggregator(ledger.height() + 1).unwrap();
        let outsider = if scheduled == node(1) {
            node(2)
        } else {
            node(1)
        };

        // wrong sender is rejected
        ledger.submit(Transaction::SubmitResult {
            node: outsider,
            request_id: 1,
            payload: payload.clone(),
            signature,
        });
        // tampered payload under an honest signature is rejected
        let mut flipped = payload.clone();
        flipped[20] ^= 1;
        ledger.submit(Transaction::SubmitResult {
            node: scheduled.clone(),
            request_id: 1,
            payload: flipped,
            signature,
        });
        // the honest submission lands
        ledger.submit(Transaction::SubmitResult {
            node: scheduled.clone(),
            request_id: 1,
            payload: payload.clone(),
            signature,
        });
        // a replay afterwards is rejected
        ledger.submit(Transaction::SubmitResult {
            node: scheduled.clone(),
            request_id: 1,
            payload: payload.clone(),
            signature,
        });
        let balance_before = ledger.balance(&Account::from(&scheduled));
        ledger.advance_block();

        let receipts = &ledger.receipts()[ledger.receipts().len() - 4..];
        assert!(!receipts[0].accepted, "wrong aggregator accepted");
        assert!(!receipts[1].accepted, "tampered payload accepted");
        assert!(receipts[2].accepted, "honest submission rejected");
        assert!(!receipts[3].accepted, "replay accepted");

        let record = ledger.get_result(1).expect("result stored");
        assert_eq!(record.payload, payload);
        assert_eq!(record.aggregator, scheduled);
        assert!(ledger.get_result(2).is_none());

        // compensation + aggregation reward, plus the pot on a lottery win
        let expected_lottery = lottery_draw(&signature, 100, 300, 500_000);
        assert_eq!(record.lottery_win, expected_lottery);
        let expected_gain =
            fees.tx_compensation + fees.aggregation_reward + if expected_lottery { 5 } else { 0 };
        assert_eq!(
            ledger.balance(&Account::from(&scheduled)),
            balance_before + expected_gain
        );
        assert!(ledger.conservation_holds());
    }

    #[test]
    fn lottery_full_stake_at_full_rate_always_wins() {
        let signature = Signature {
            point: crate::group::PointG1::generator(),
        };
        assert!(lottery_draw(&signature, 500, 500, 1_000_000));
    }

    #[test]
    fn lottery_zero_total_stake_never_wins() {
        let signature = Signature {
            point: crate::group::PointG1::generator(),
        };
        assert!(!lottery_draw(&signature, 0, 0, 1_000_000));
    }

    #[test]
    fn one_big_stake_beats_two_half_stakes() {
        // quadratic scaling: α·(0.2)² > 2·α·(0.1)²
        let combined = lottery_threshold(20, 100, 500_000);
        let split = lottery_threshold(10, 100, 500_000) * 2u8;
        assert!(combined > split);
    }

    #[test]
    fn payload_encoding_roundtrip_and_not_included_zeroing() {
        let answer = VerificationAnswer {
            included: true,
            block_number: 99,
            block_hash: [7u8; 32],
            confirmed: false,
        };
        let payload = encode_result_payload(42, &answer);
        assert_eq!(payload.len(), RESULT_PAYLOAD_BYTES);
        assert_eq!(decode_result_payload(&payload), Some((42, answer)));

        let absent = VerificationAnswer {
            included: false,
            block_number: 1234,
            block_hash: [9u8; 32],
            confirmed: false,
        };
        let payload = encode_result_payload(7, &absent);
        // block fields zeroed when not included
        assert_eq!(&payload[9..49], &[0u8; 40][..]);
        let (_, decoded) = decode_result_payload(&payload).unwrap();
        assert_eq!(decoded, VerificationAnswer::not_included());
        assert!(decode_result_payload(&payload[..49]).is_none());
    }
}
