//! Deterministic discrete-event harness.
//!
//! One logical clock drives both chains: each tick applies the source-chain
//! script, forms one target-chain block from the queued transactions,
//! delivers the previous tick's point-to-point messages, and then lets every
//! node act in registration order. Nodes communicate only through messages,
//! the ledger's event log, and the ledger itself, so a run is a pure
//! function of (scenario, seed): identical inputs produce byte-identical
//! transcripts.
//!
//! Faults are part of the script: nodes with offline behavior are simply not
//! ticked during their window and their inbound messages are dropped, while
//! `drop_tx_from` entries silently discard a node's ledger submissions for
//! one tick (a lost transaction, retried by the protocol's own cadence).

use crate::contracts::{
    Account, Event, FeeBreakdown, Ledger, Query, RecordedEvent, Transaction, TxReceipt,
};
use crate::dkg::{self, Deal, DkgConfig, DkgRecord};
use crate::group::PointG2;
use crate::nodes::{Behavior, Message, OracleNode};
use crate::scenario::{Scenario, SourceOp};
use crate::sourcechain::SourceChain;
use crate::NodeId;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;

#[derive(Debug, thiserror::Error)]
pub enum SimulatorError {
    #[error("source-chain script failed at tick {tick}: {reason}")]
    Script { tick: u64, reason: String },
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// Per-request outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RequestMetrics {
    pub request_id: u64,
    pub requested_at: u64,
    pub fulfilled_at: Option<u64>,
    pub latency_blocks: Option<u64>,
    pub payload_hex: Option<String>,
    /// The canonical-chain answer encoded at the fulfillment tick; lets
    /// reports distinguish a correct result from a wrong-but-verifying one.
    pub canonical_payload_hex: Option<String>,
    pub matches_canonical: Option<bool>,
    pub lottery_win: Option<bool>,
}

/// Per-node accounting at the end of a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeMetrics {
    pub id: NodeId,
    pub behavior: String,
    pub stake_initial: u64,
    pub stake_final: u64,
    pub status: String,
    pub balance: u64,
    pub lottery_wins: u64,
    pub lottery_winnings: u64,
    pub submissions_accepted: u64,
    pub submissions_rejected: u64,
}

/// Cost-model view of the run: what the oracle actually spent (in modeled
/// gas) versus what a header relay would have burned over the same window.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostReport {
    pub oracle_submissions: u64,
    pub gas_per_submission: u64,
    pub oracle_gas_total: u64,
    pub relay_gas_same_window: u64,
}

/// Everything a run reports. Serializes to the stable JSON schema consumed
/// by the CLI and the acceptance tests.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Metrics {
    pub seed: u64,
    pub run_blocks: u64,
    pub requests: Vec<RequestMetrics>,
    pub nodes: Vec<NodeMetrics>,
    pub dkg_sessions_announced: u64,
    pub keys_activated: u64,
    pub active_public_key: Option<PointG2>,
    pub validation_pot: u64,
    pub burned: u64,
    pub conservation_ok: bool,
    /// Node-originated transactions recorded after the last key activation;
    /// zero on an idle run is the "no ongoing costs" property.
    pub oracle_txs_after_key_setup: u64,
    pub costs: CostReport,
    /// SHA-256 of the ledger transcript, the run's reproducibility fingerprint.
    pub transcript_sha256: String,
}

/// A finished run: metrics plus the raw transcripts (JSON lines).
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub metrics: Metrics,
    pub ledger_transcript: String,
    pub dkg_transcript: String,
}

// ---------------------------------------------------------------------------
// The harness
// ---------------------------------------------------------------------------

struct PendingMessage {
    to: NodeId,
    message: Message,
}

fn node_rng(seed: u64, ordinal: u64) -> ChaCha20Rng {
    // distinct, stable stream per node
    ChaCha20Rng::seed_from_u64(seed ^ (ordinal + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Execute a scenario to completion.
pub fn run(scenario: &Scenario) -> Result<RunOutput, SimulatorError> {
    let mut ledger = Ledger::new(scenario.protocol.clone(), scenario.economics.clone());
    let mut source = SourceChain::new();
    source.advance(scenario.initial_source_blocks);

    // nodes in roster order; registration in tick 0 fixes their ordinals
    let mut nodes: Vec<OracleNode> = scenario
        .nodes
        .iter()
        .enumerate()
        .map(|(ordinal, spec)| {
            OracleNode::new(
                spec.id.clone(),
                spec.behavior,
                node_rng(scenario.seed, ordinal as u64),
            )
        })
        .collect();

    for (spec, node) in scenario.nodes.iter().zip(&nodes) {
        ledger.credit(Account::from(&spec.id), spec.stake);
        ledger.submit(Transaction::Register {
            node: spec.id.clone(),
            host: format!("sim://{}", spec.id),
            identity_key: node.identity_public(),
            stake: spec.stake,
        });
    }

    // clients are funded exactly for their scheduled requests
    let fees = FeeBreakdown {
        tx_compensation: scenario.economics.tx_compensation,
        aggregation_reward: scenario.economics.aggregation_reward,
        validation_contribution: scenario.economics.validation_contribution,
    };
    let mut client_funding: BTreeMap<Account, u64> = BTreeMap::new();
    for request in &scenario.requests {
        *client_funding
            .entry(Account::new(request.client.clone()))
            .or_insert(0) += fees.total();
    }
    for (client, amount) in client_funding {
        ledger.credit(client, amount);
    }

    let mut in_flight: Vec<PendingMessage> = Vec::new();
    // canonical answers snapshotted at the tick each result landed
    let mut canonical_at_fulfillment: BTreeMap<u64, Vec<u8>> = BTreeMap::new();
    let mut request_queries: BTreeMap<u64, (String, u64)> = BTreeMap::new();

    for tick in 1..=scenario.run_blocks {
        // 1. source-chain script
        for entry in scenario.script.iter().filter(|e| e.tick == tick) {
            apply_source_op(&mut source, &entry.op, tick)?;
        }

        // 2. scheduled client requests for this height
        for request in scenario.requests.iter().filter(|r| r.height == tick) {
            ledger.submit(Transaction::RequestVerification {
                client: Account::new(request.client.clone()),
                query: Query {
                    source_chain_id: request.chain,
                    tx_id: request.tx.clone(),
                    min_confirmations: request.min_confirmations,
                },
                fees,
            });
        }

        // 3. one target-chain block
        let block_events = ledger.advance_block();
        for recorded in &block_events {
            match &recorded.event {
                Event::VerificationRequested {
                    request_id, query, ..
                } => {
                    request_queries
                        .insert(*request_id, (query.tx_id.clone(), query.min_confirmations));
                }
                Event::ResultAvailable { request_id, .. } => {
                    if let Some((tx_id, min_conf)) = request_queries.get(request_id) {
                        let answer = source.canonical_query(tx_id, *min_conf);
                        canonical_at_fulfillment.insert(
                            *request_id,
                            crate::contracts::encode_result_payload(*request_id, &answer),
                        );
                    }
                }
                _ => {}
            }
        }

        // 4. deliver last tick's messages, dropping those to offline nodes
        let mut inboxes: BTreeMap<NodeId, Vec<Message>> = BTreeMap::new();
        for pending in in_flight.drain(..) {
            let offline = nodes
                .iter()
                .find(|n| n.id == pending.to)
                .is_some_and(|n| n.behavior.is_offline_at(tick));
            if !offline {
                inboxes.entry(pending.to).or_default().push(pending.message);
            }
        }

        // 5. nodes act in registration order
        for node in &mut nodes {
            if node.behavior.is_offline_at(tick) {
                continue;
            }
            let inbox = inboxes.remove(&node.id).unwrap_or_default();
            let actions = node.on_tick(tick, &ledger, &source, inbox);
            let dropped = scenario
                .faults
                .iter()
                .any(|f| f.at_tick == tick && f.drop_tx_from == node.id);
            if !dropped {
                for tx in actions.txs {
                    ledger.submit(tx);
                }
            }
            for (to, message) in actions.messages {
                in_flight.push(PendingMessage { to, message });
            }
        }
    }

    Ok(assemble_output(
        scenario,
        &ledger,
        &source,
        canonical_at_fulfillment,
    ))
}

fn apply_source_op(
    source: &mut SourceChain,
    op: &SourceOp,
    tick: u64,
) -> Result<(), SimulatorError> {
    match op {
        SourceOp::Advance(count) => source.advance(*count),
        SourceOp::AddBlock(txs) => source.add_block(txs.iter().cloned()),
        SourceOp::Fork(fork) => {
            let blocks = fork
                .blocks
                .iter()
                .map(|txs| txs.iter().cloned().collect())
                .collect();
            source
                .inject_fork(&fork.branch, fork.from_block, blocks, &fork.assign)
                .map_err(|e| SimulatorError::Script {
                    tick,
                    reason: e.to_string(),
                })?;
        }
        SourceOp::Heal => source.heal(),
        SourceOp::Lag(lag) => source.set_lag(&lag.node, lag.blocks),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Reporting
// ---------------------------------------------------------------------------

fn behavior_label(behavior: &Behavior) -> String {
    match behavior {
        Behavior::Altruistic => "altruistic".into(),
        Behavior::Lazy { .. } => "lazy".into(),
        Behavior::Byzantine { mode } => format!("byzantine-{mode:?}").to_lowercase(),
        Behavior::Offline { from, until } => format!("offline[{from},{until})"),
        Behavior::RationalWithholder => "withholder".into(),
    }
}

fn assemble_output(
    scenario: &Scenario,
    ledger: &Ledger,
    _source: &SourceChain,
    canonical_at_fulfillment: BTreeMap<u64, Vec<u8>>,
) -> RunOutput {
    let ledger_transcript = render_ledger_transcript(ledger);
    let dkg_transcript = render_dkg_transcript(ledger);
    let transcript_sha256 = hex::encode(Sha256::digest(ledger_transcript.as_bytes()));

    let mut requests: BTreeMap<u64, RequestMetrics> = BTreeMap::new();
    let mut dkg_sessions_announced = 0;
    let mut keys_activated = 0;
    let mut last_activation_height = None;
    let mut lottery: BTreeMap<NodeId, (u64, u64)> = BTreeMap::new();
    for recorded in ledger.events() {
        match &recorded.event {
            Event::VerificationRequested { request_id, .. } => {
                requests.insert(
                    *request_id,
                    RequestMetrics {
                        request_id: *request_id,
                        requested_at: recorded.height,
                        fulfilled_at: None,
                        latency_blocks: None,
                        payload_hex: None,
                        canonical_payload_hex: None,
                        matches_canonical: None,
                        lottery_win: None,
                    },
                );
            }
            Event::ResultAvailable { request_id, .. } => {
                if let Some(metrics) = requests.get_mut(request_id) {
                    metrics.fulfilled_at = Some(recorded.height);
                    metrics.latency_blocks = Some(recorded.height - metrics.requested_at);
                }
            }
            Event::KeyGenerationRequested { .. } => dkg_sessions_announced += 1,
            Event::PublicKeyActivated { .. } => {
                keys_activated += 1;
                last_activation_height = Some(recorded.height);
            }
            Event::LotteryWon { node, payout, .. } => {
                let entry = lottery.entry(node.clone()).or_insert((0, 0));
                entry.0 += 1;
                entry.1 += payout;
            }
            _ => {}
        }
    }
    for (request_id, metrics) in requests.iter_mut() {
        if let Some(record) = ledger.get_result(*request_id) {
            metrics.payload_hex = Some(hex::encode(&record.payload));
            metrics.lottery_win = Some(record.lottery_win);
            if let Some(canonical) = canonical_at_fulfillment.get(request_id) {
                metrics.canonical_payload_hex = Some(hex::encode(canonical));
                metrics.matches_canonical = Some(canonical == &record.payload);
            }
        }
    }

    let mut submissions: BTreeMap<NodeId, (u64, u64)> = BTreeMap::new();
    let mut oracle_txs_after_key_setup = 0;
    for receipt in ledger.receipts() {
        if let Some(sender) = receipt.tx.sender_node() {
            if let Some(activated) = last_activation_height {
                if receipt.height > activated {
                    oracle_txs_after_key_setup += 1;
                }
            }
            if matches!(receipt.tx, Transaction::SubmitResult { .. }) {
                let entry = submissions.entry(sender.clone()).or_insert((0, 0));
                if receipt.accepted {
                    entry.0 += 1;
                } else {
                    entry.1 += 1;
                }
            }
        }
    }

    let nodes = scenario
        .nodes
        .iter()
        .map(|spec| {
            let record = ledger.registry().get(&spec.id);
            let (wins, winnings) = lottery.get(&spec.id).copied().unwrap_or((0, 0));
            let (accepted, rejected) = submissions.get(&spec.id).copied().unwrap_or((0, 0));
            NodeMetrics {
                id: spec.id.clone(),
                behavior: behavior_label(&spec.behavior),
                stake_initial: spec.stake,
                stake_final: record.map(|r| r.stake).unwrap_or(0),
                status: record
                    .map(|r| format!("{:?}", r.status).to_lowercase())
                    .unwrap_or_else(|| "unregistered".into()),
                balance: ledger.balance(&Account::from(&spec.id)),
                lottery_wins: wins,
                lottery_winnings: winnings,
                submissions_accepted: accepted,
                submissions_rejected: rejected,
            }
        })
        .collect();

    let oracle_submissions = ledger
        .receipts()
        .iter()
        .filter(|r| r.accepted && matches!(r.tx, Transaction::SubmitResult { .. }))
        .count() as u64;
    let gas_per_submission = crate::costmodel::BLS_SUBMIT_MEAN_GAS;
    let costs = CostReport {
        oracle_submissions,
        gas_per_submission,
        oracle_gas_total: oracle_submissions * gas_per_submission,
        relay_gas_same_window: scenario.run_blocks * crate::costmodel::RELAY_HEADER_MEAN_GAS,
    };

    let metrics = Metrics {
        seed: scenario.seed,
        run_blocks: scenario.run_blocks,
        requests: requests.into_values().collect(),
        nodes,
        dkg_sessions_announced,
        keys_activated,
        active_public_key: ledger.key_state().active_public_key,
        validation_pot: ledger.oracle_state().validation_pot,
        burned: ledger.burned(),
        conservation_ok: ledger.conservation_holds(),
        oracle_txs_after_key_setup,
        costs,
        transcript_sha256,
    };
    RunOutput {
        metrics,
        ledger_transcript,
        dkg_transcript,
    }
}

/// One JSON line per block: height, receipts, events.
fn render_ledger_transcript(ledger: &Ledger) -> String {
    #[derive(Serialize)]
    struct BlockLine<'a> {
        height: u64,
        receipts: Vec<&'a TxReceipt>,
        events: Vec<&'a RecordedEvent>,
    }
    let max_height = ledger.height();
    let mut out = String::new();
    for height in 1..=max_height {
        let line = BlockLine {
            height,
            receipts: ledger
                .receipts()
                .iter()
                .filter(|r| r.height == height)
                .collect(),
            events: ledger
                .events()
                .iter()
                .filter(|e| e.height == height)
                .collect(),
        };
        out.push_str(&serde_json::to_string(&line).expect("transcript serializes"));
        out.push('\n');
    }
    out
}

/// DKG post-mortem: deal and complaint records straight from the broadcast
/// log, plus a final record per activated session with the qualified set
/// recomputed from the same public data every node used.
fn render_dkg_transcript(ledger: &Ledger) -> String {
    let mut sessions: BTreeMap<u64, (DkgConfig, Vec<Deal>, Vec<crate::dkg::Complaint>)> =
        BTreeMap::new();
    let mut lines = Vec::new();
    for recorded in ledger.events() {
        match &recorded.event {
            Event::KeyGenerationRequested {
                session_id,
                participants,
                threshold,
            } => {
                sessions.insert(
                    *session_id,
                    (
                        DkgConfig::new(*session_id, participants.clone(), *threshold),
                        Vec::new(),
                        Vec::new(),
                    ),
                );
            }
            Event::DealCommitmentPosted {
                session_id,
                dealer,
                commitment,
                signature,
            } => {
                lines.push(
                    DkgRecord::Deal {
                        session: *session_id,
                        dealer: dealer.clone(),
                        commitment: commitment.points.clone(),
                        signature: *signature,
                    }
                    .to_json_line(),
                );
                if let Some((_, deals, _)) = sessions.get_mut(session_id) {
                    deals.push(Deal {
                        session_id: *session_id,
                        dealer: dealer.clone(),
                        commitment: commitment.clone(),
                        commitment_signature: *signature,
                        shares: BTreeMap::new(),
                    });
                }
            }
            Event::ComplaintPosted { complaint } => {
                lines.push(
                    DkgRecord::Complaint {
                        session: complaint.session_id,
                        complainer: complaint.complainer.clone(),
                        dealer: complaint.dealer.clone(),
                        evidence_share_index: complaint.evidence.as_ref().map(|e| e.share.index),
                    }
                    .to_json_line(),
                );
                if let Some((_, _, complaints)) = sessions.get_mut(&complaint.session_id) {
                    complaints.push(complaint.clone());
                }
            }
            Event::PublicKeyActivated {
                session_id,
                public_key,
                ..
            } => {
                if let Some((config, deals, complaints)) = sessions.get(session_id) {
                    let identities: BTreeMap<NodeId, PointG2> = config
                        .participants
                        .iter()
                        .filter_map(|p| {
                            ledger
                                .registry()
                                .get(p)
                                .map(|r| (p.clone(), r.identity_key))
                        })
                        .collect();
                    let qualified = dkg::qualified_set(config, deals, complaints, &identities);
                    lines.push(
                        DkgRecord::Final {
                            session: *session_id,
                            qualified: qualified.into_iter().collect(),
                            public_key: *public_key,
                        }
                        .to_json_line(),
                    );
                }
            }
            _ => {}
        }
    }
    let mut out = lines.join("\n");
    if !out.is_empty() {
        out.push('\n');
    }
    out
}
