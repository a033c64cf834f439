//! Oracle-node logic: the validator path (fetch → encode → sign share) and
//! the aggregator path (collect → group → filter → recover → submit),
//! parameterized by BAR-model behavior profiles.
//!
//! A node is a sequential state machine fed one tick at a time. Each tick it
//! replays new ledger events (the event log is its only view of requests,
//! DKG broadcasts, and key changes — storage is event-only), drains its
//! point-to-point inbox, advances any running DKG session on a fixed block
//! schedule, answers open requests toward the currently scheduled
//! aggregator, and — when the rotation says it is the aggregator — tries to
//! assemble a threshold signature from the responses it has collected.
//!
//! Behavior profiles bend only the validator path: lazy nodes sign a
//! constant answer without consulting their chain view, byzantine nodes
//! corrupt the share or the payload, withholders stay silent. Aggregation
//! itself is mechanical (group by exact payload bytes, largest group first)
//! and is performed faithfully by every profile that aggregates at all; an
//! offline node does nothing, which is what liveness scenarios exercise.

use crate::contracts::{encode_result_payload, Event, Ledger, Query, Transaction};
use crate::dkg::{Complaint, DkgConfig, DkgParticipant, IdentityKey, KeyShare, SignedShare};
use crate::group::{PointG1, PointG2, Scalar};
use crate::sharing::FeldmanCommitment;
use crate::sourcechain::{SourceChain, VerificationAnswer};
use crate::tbls::{self, SignatureShare};
use crate::NodeId;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// How a byzantine validator corrupts its response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ByzantineMode {
    /// Correct payload, garbage signature share.
    RandomPoint,
    /// Corrupted payload, honestly signed.
    WrongPayload,
    /// No response at all.
    Withhold,
}

/// The constant answer a lazy validator signs without reading its chain
/// view. The all-zero block hash can never collide with a real block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LazyAnswer {
    pub included: bool,
    pub block_number: u64,
    pub confirmed: bool,
}

impl Default for LazyAnswer {
    fn default() -> Self {
        LazyAnswer {
            included: true,
            block_number: 1,
            confirmed: true,
        }
    }
}

impl LazyAnswer {
    /// The full answer a lazy validator encodes and signs.
    pub fn to_verification_answer(self) -> VerificationAnswer {
        VerificationAnswer {
            included: self.included,
            block_number: self.block_number,
            block_hash: [0u8; 32],
            confirmed: self.confirmed,
        }
    }
}

/// BAR-model behavior profile; exactly one per node per scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Behavior {
    /// Follows the protocol unconditionally.
    Altruistic,
    /// Signs a constant payload without querying the source chain.
    Lazy {
        answer: LazyAnswer,
    },
    Byzantine {
        mode: ByzantineMode,
    },
    /// Dead during [from, until): no messages in or out, no ticks.
    Offline {
        from: u64,
        until: u64,
    },
    /// Rational free-loader: never validates, still aggregates for rewards.
    RationalWithholder,
}

impl Behavior {
    pub fn is_offline_at(&self, tick: u64) -> bool {
        matches!(self, Behavior::Offline { from, until } if (*from..*until).contains(&tick))
    }
}

/// A validator's answer to one request, sent to the scheduled aggregator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Response {
    pub request_id: u64,
    #[serde(with = "hex::serde")]
    pub payload: Vec<u8>,
    pub share: SignatureShare,
}

/// Point-to-point traffic between oracle nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    Response {
        from: NodeId,
        response: Response,
    },
    DkgShare {
        session_id: u64,
        dealer: NodeId,
        signed: SignedShare,
    },
}

/// What one node wants done at the end of its tick: transactions for the
/// next block and messages for next-tick delivery.
#[derive(Debug, Default)]
pub struct NodeActions {
    pub txs: Vec<Transaction>,
    pub messages: Vec<(NodeId, Message)>,
}

/// DKG phase offsets relative to the generation event, in blocks:
/// deal at `announced + wait`, evaluate received shares one block later
/// (commitments and shares have landed by then), finalize and submit one
/// block after that (complaints have landed).
const EVALUATE_OFFSET: u64 = 1;
const FINALIZE_OFFSET: u64 = 2;

#[derive(Debug)]
struct RunningDkg {
    config: DkgConfig,
    participant: DkgParticipant,
    announced_at: u64,
    dealt: bool,
    evaluated: bool,
    finalized: bool,
    submitted_seen: bool,
}

#[derive(Debug, Clone)]
struct OpenRequest {
    query: Query,
}

/// One oracle node's complete off-chain state.
#[derive(Debug)]
pub struct OracleNode {
    pub id: NodeId,
    pub behavior: Behavior,
    identity: IdentityKey,
    rng: ChaCha20Rng,
    event_cursor: usize,
    dkg: Option<RunningDkg>,
    /// Key shares finalized per session, waiting for on-chain activation.
    finalized_keys: BTreeMap<u64, KeyShare>,
    /// The key share matching the currently active public key.
    active_share: Option<KeyShare>,
    active_threshold: usize,
    open_requests: BTreeMap<u64, OpenRequest>,
    /// Aggregator-side response buffer: request → responder → response.
    /// Latest response per responder wins, so views refreshed after a fork
    /// heal replace stale answers.
    collected: BTreeMap<u64, BTreeMap<NodeId, Response>>,
    /// Public keys claimed on-chain per session, to dispute mismatches.
    last_submitted_key: BTreeMap<u64, PointG2>,
    disputed_sessions: Vec<u64>,
}

impl OracleNode {
    pub fn new(id: NodeId, behavior: Behavior, rng: ChaCha20Rng) -> OracleNode {
        let mut rng = rng;
        let identity = IdentityKey::generate(&mut rng);
        OracleNode {
            id,
            behavior,
            identity,
            rng,
            event_cursor: 0,
            dkg: None,
            finalized_keys: BTreeMap::new(),
            active_share: None,
            active_threshold: 0,
            open_requests: BTreeMap::new(),
            collected: BTreeMap::new(),
            last_submitted_key: BTreeMap::new(),
            disputed_sessions: Vec::new(),
        }
    }

    pub fn identity_public(&self) -> PointG2 {
        self.identity.public()
    }

    pub fn key_share(&self) -> Option<&KeyShare> {
        self.active_share.as_ref()
    }

    pub fn open_request_ids(&self) -> Vec<u64> {
        self.open_requests.keys().copied().collect()
    }

    /// Advance one tick. `inbox` holds messages delivered this tick; the
    /// ledger and source chain are read-only views.
    pub fn on_tick(
        &mut self,
        tick: u64,
        ledger: &Ledger,
        source: &SourceChain,
        inbox: Vec<Message>,
    ) -> NodeActions {
        let mut actions = NodeActions::default();
        self.replay_events(ledger);
        self.drain_inbox(inbox);
        self.step_dkg(tick, ledger, &mut actions);
        self.respond_to_requests(tick, ledger, source, &mut actions);
        self.aggregate(tick, ledger, &mut actions);
        actions
    }

    /// Catch up on the ledger event log from our cursor. A node that was
    /// offline replays everything it missed here — the log is the only
    /// source of truth for requests and key state.
    fn replay_events(&mut self, ledger: &Ledger) {
        let wait = ledger.protocol().dkg_wait_blocks;
        let events = ledger.events();
        for recorded in &events[self.event_cursor.min(events.len())..] {
            let height = recorded.height;
            match &recorded.event {
                Event::KeyGenerationRequested {
                    session_id,
                    participants,
                    threshold,
                } => self.on_generation_requested(*session_id, participants, *threshold, height),
                Event::DealCommitmentPosted {
                    session_id,
                    dealer,
                    commitment,
                    signature,
                } => self.on_deal_commitment(
                    *session_id,
                    dealer,
                    commitment,
                    signature,
                    height,
                    wait,
                ),
                Event::ComplaintPosted { complaint } => self.on_complaint(complaint, height, wait),
                Event::PublicKeySubmitted {
                    session_id,
                    public_key,
                    ..
                } => self.on_key_submitted(*session_id, public_key),
                Event::PublicKeyActivated {
                    session_id,
                    signature_threshold,
                    ..
                } => {
                    self.active_share = self.finalized_keys.get(session_id).cloned();
                    self.active_threshold = *signature_threshold;
                }
                Event::VerificationRequested {
                    request_id, query, ..
                } => {
                    self.open_requests.insert(
                        *request_id,
                        OpenRequest {
                            query: query.clone(),
                        },
                    );
                }
                Event::ResultAvailable { request_id, .. } => {
                    self.open_requests.remove(request_id);
                    self.collected.remove(request_id);
                }
                _ => {}
            }
        }
        self.event_cursor = events.len();
    }

    fn on_generation_requested(
        &mut self,
        session_id: u64,
        participants: &[NodeId],
        threshold: usize,
        height: u64,
    ) {
        if !participants.contains(&self.id) {
            // a session we are not part of supersedes any running one
            self.dkg = None;
            return;
        }
        let config = DkgConfig::new(session_id, participants.to_vec(), threshold);
        let Ok(participant) = DkgParticipant::new(config.clone(), self.id.clone(), BTreeMap::new())
        else {
            return;
        };
        // the identity map is refreshed from the registry right before
        // dealing; this placeholder participant only exists so late event
        // replays have somewhere to land
        self.dkg = Some(RunningDkg {
            participant,
            config,
            announced_at: height,
            dealt: false,
            evaluated: false,
            finalized: false,
            submitted_seen: false,
        });
    }

    fn on_deal_commitment(
        &mut self,
        session_id: u64,
        dealer: &NodeId,
        commitment: &FeldmanCommitment,
        signature: &PointG1,
        height: u64,
        wait: u64,
    ) {
        if let Some(dkg) = &mut self.dkg {
            // commitments posted after the dealing deadline are ignored by
            // everyone, so a late dealer never enters any qualified set
            let deadline = dkg.announced_at + wait + EVALUATE_OFFSET;
            if dkg.config.session_id == session_id && height <= deadline {
                // duplicate dealers and bad signatures are simply not recorded
                let _ = dkg
                    .participant
                    .observe_commitment(dealer, commitment.clone(), signature);
            }
        }
    }

    fn on_complaint(&mut self, complaint: &Complaint, height: u64, wait: u64) {
        if let Some(dkg) = &mut self.dkg {
            let deadline = dkg.announced_at + wait + FINALIZE_OFFSET;
            if dkg.config.session_id == complaint.session_id && height <= deadline {
                dkg.participant.observe_complaint(complaint.clone());
            }
        }
    }

    fn on_key_submitted(&mut self, session_id: u64, public_key: &PointG2) {
        if let Some(dkg) = &mut self.dkg {
            if dkg.config.session_id == session_id {
                dkg.submitted_seen = true;
            }
        }
        // dispute preparation happens in step_dkg where we can emit txs;
        // here we only remember what was claimed
        self.last_submitted_key.insert(session_id, *public_key);
    }

    fn step_dkg(&mut self, tick: u64, ledger: &Ledger, actions: &mut NodeActions) {
        let wait = ledger.protocol().dkg_wait_blocks;
        let Some(dkg) = &mut self.dkg else {
            return;
        };
        let deal_tick = dkg.announced_at + wait;

        if !dkg.dealt && tick >= deal_tick {
            dkg.dealt = true;
            // past the dealing window the node stays passive; peers ignore
            // late commitments
            if tick == deal_tick {
                let identities: BTreeMap<NodeId, PointG2> = dkg
                    .config
                    .participants
                    .iter()
                    .filter_map(|p| {
                        ledger
                            .registry()
                            .get(p)
                            .map(|record| (p.clone(), record.identity_key))
                    })
                    .collect();
                dkg.participant =
                    DkgParticipant::new(dkg.config.clone(), self.id.clone(), identities)
                        .expect("config already validated");

                if let Ok(deal) = dkg.participant.deal(&self.identity, &mut self.rng) {
                    actions.txs.push(Transaction::PostDealCommitment {
                        session_id: dkg.config.session_id,
                        dealer: self.id.clone(),
                        commitment: deal.commitment.clone(),
                        signature: deal.commitment_signature,
                    });
                    for (recipient, signed) in &deal.shares {
                        if recipient == &self.id {
                            let me = self.id.clone();
                            dkg.participant.receive_share(&me, signed.clone());
                        } else {
                            actions.messages.push((
                                recipient.clone(),
                                Message::DkgShare {
                                    session_id: dkg.config.session_id,
                                    dealer: self.id.clone(),
                                    signed: signed.clone(),
                                },
                            ));
                        }
                    }
                }
            }
            return;
        }

        if dkg.dealt && !dkg.evaluated && tick >= deal_tick + EVALUATE_OFFSET {
            for complaint in dkg.participant.evaluate_deals() {
                actions.txs.push(Transaction::PostComplaint { complaint });
            }
            dkg.evaluated = true;
            return;
        }

        if dkg.evaluated && !dkg.finalized && tick >= deal_tick + FINALIZE_OFFSET {
            if let Ok(key_share) = dkg.participant.finalize() {
                self.finalized_keys.insert(dkg.config.session_id, key_share);
            }
            dkg.finalized = true;
        }

        // staggered key submission: participant k volunteers k blocks after
        // finalization unless a submission was already observed
        if dkg.finalized && !dkg.submitted_seen {
            let my_slot = dkg
                .config
                .participants
                .iter()
                .position(|p| p == &self.id)
                .unwrap_or(0) as u64;
            if tick >= deal_tick + FINALIZE_OFFSET + my_slot {
                if let Some(key_share) = self.finalized_keys.get(&dkg.config.session_id) {
                    actions.txs.push(Transaction::SubmitPublicKey {
                        node: self.id.clone(),
                        session_id: dkg.config.session_id,
                        public_key: key_share.public_key,
                    });
                    dkg.submitted_seen = true;
                }
            }
        }

        // dispute a submitted key that contradicts our own finalization
        let session_id = dkg.config.session_id;
        if let (Some(claimed), Some(mine)) = (
            self.last_submitted_key.get(&session_id),
            self.finalized_keys.get(&session_id),
        ) {
            if claimed != &mine.public_key && !self.disputed_sessions.contains(&session_id) {
                actions.txs.push(Transaction::DisputeKey {
                    node: self.id.clone(),
                    session_id,
                });
                self.disputed_sessions.push(session_id);
            }
        }
    }

    /// The validator path: answer every open request toward the scheduled
    /// aggregator, refreshing the answer every tick so that view changes
    /// (lag catching up, fork healing) propagate.
    fn respond_to_requests(
        &mut self,
        tick: u64,
        ledger: &Ledger,
        source: &SourceChain,
        actions: &mut NodeActions,
    ) {
        let Some(key_share) = self.active_share.clone() else {
            return;
        };
        let Ok(aggregator) = ledger.current_aggregator(tick) else {
            return;
        };
        for (&request_id, open) in &self.open_requests {
            let response = match &self.behavior {
                Behavior::Altruistic => {
                    let answer =
                        source.query(&self.id, &open.query.tx_id, open.query.min_confirmations);
                    self.honest_response(&key_share, request_id, &answer)
                }
                Behavior::Lazy { answer } => {
                    self.honest_response(&key_share, request_id, &answer.to_verification_answer())
                }
                Behavior::Byzantine { mode } => match mode {
                    ByzantineMode::Withhold => None,
                    ByzantineMode::RandomPoint => {
                        let answer =
                            source.query(&self.id, &open.query.tx_id, open.query.min_confirmations);
                        let payload = encode_result_payload(request_id, &answer);
                        Some(Response {
                            request_id,
                            payload,
                            share: SignatureShare {
                                signer_index: key_share.owner_index,
                                point: PointG1::generator() * Scalar::random(&mut self.rng),
                            },
                        })
                    }
                    ByzantineMode::WrongPayload => {
                        let mut answer =
                            source.query(&self.id, &open.query.tx_id, open.query.min_confirmations);
                        // plausible-looking corruption, honestly signed
                        answer.included = true;
                        answer.block_number += 1;
                        answer.block_hash[0] ^= 0xFF;
                        self.honest_response(&key_share, request_id, &answer)
                    }
                },
                Behavior::RationalWithholder => None,
                // the simulator never ticks an offline node; if the interval
                // has passed, the node behaves altruistically again
                Behavior::Offline { .. } => {
                    let answer =
                        source.query(&self.id, &open.query.tx_id, open.query.min_confirmations);
                    self.honest_response(&key_share, request_id, &answer)
                }
            };
            if let Some(response) = response {
                if aggregator == self.id {
                    self.collected
                        .entry(request_id)
                        .or_default()
                        .insert(self.id.clone(), response);
                } else {
                    actions.messages.push((
                        aggregator.clone(),
                        Message::Response {
                            from: self.id.clone(),
                            response,
                        },
                    ));
                }
            }
        }
    }

    fn honest_response(
        &self,
        key_share: &KeyShare,
        request_id: u64,
        answer: &VerificationAnswer,
    ) -> Option<Response> {
        let payload = encode_result_payload(request_id, answer);
        let share = tbls::sign_share(key_share, &payload).ok()?;
        Some(Response {
            request_id,
            payload,
            share,
        })
    }

    fn drain_inbox(&mut self, inbox: Vec<Message>) {
        for message in inbox {
            match message {
                Message::Response { from, response } => {
                    self.collected
                        .entry(response.request_id)
                        .or_default()
                        .insert(from, response);
                }
                Message::DkgShare {
                    session_id,
                    dealer,
                    signed,
                } => {
                    if let Some(dkg) = &mut self.dkg {
                        if dkg.config.session_id == session_id {
                            dkg.participant.receive_share(&dealer, signed);
                        }
                    }
                }
            }
        }
    }

    /// The aggregator path: group collected responses by exact payload
    /// bytes, keep the largest group's verified shares, and submit once the
    /// signature threshold is met. Runs once per tick while we hold the
    /// aggregator slot — that is the retry cadence.
    fn aggregate(&mut self, tick: u64, ledger: &Ledger, actions: &mut NodeActions) {
        let Some(key_share) = &self.active_share else {
            return;
        };
        if self.active_threshold == 0 {
            return;
        }
        // the submission lands in the next block, which must still be ours;
        // at a rotation boundary the successor takes the request
        if ledger.current_aggregator(tick).as_ref() != Ok(&self.id)
            || ledger.current_aggregator(tick + 1).as_ref() != Ok(&self.id)
        {
            return;
        }
        for (&request_id, responses) in &self.collected {
            if !self.open_requests.contains_key(&request_id) {
                continue;
            }
            // group by exact payload bytes
            let mut groups: BTreeMap<&[u8], Vec<&Response>> = BTreeMap::new();
            for response in responses.values() {
                groups
                    .entry(response.payload.as_slice())
                    .or_default()
                    .push(response);
            }
            // largest group first; payload bytes break ties deterministically
            let mut ordered: Vec<(&[u8], Vec<&Response>)> = groups.into_iter().collect();
            ordered.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then(a.0.cmp(b.0)));

            for (payload, group) in ordered {
                let mut valid: Vec<SignatureShare> = group
                    .iter()
                    .filter(|r| {
                        key_share
                            .verification_key(r.share.signer_index)
                            .is_some_and(|vk| tbls::verify_share(&r.share, payload, vk))
                    })
                    .map(|r| r.share)
                    .collect();
                if valid.len() < self.active_threshold {
                    continue;
                }
                valid.sort_by_key(|s| s.signer_index);
                valid.truncate(self.active_threshold);
                if let Ok(signature) = tbls::recover(&valid, self.active_threshold) {
                    actions.txs.push(Transaction::SubmitResult {
                        node: self.id.clone(),
                        request_id,
                        payload: payload.to_vec(),
                        signature,
                    });
                    break;
                }
            }
        }
    }
}
