//! Declarative scenario files: node roster with behaviors, protocol and
//! economics constants, a source-chain script, a request schedule, and
//! scripted message faults. TOML on disk, one struct in memory, fully
//! deterministic together with the seed.

use crate::contracts::{EconomicsParams, ProtocolParams};
use crate::nodes::{Behavior, ByzantineMode, LazyAnswer};
use crate::NodeId;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse scenario {path}: {source}")]
    Parse {
        path: String,
        source: Box<toml::de::Error>,
    },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

/// One oracle node in the roster.
#[derive(Debug, Clone, Serialize)]
pub struct NodeSpec {
    pub id: NodeId,
    pub stake: u64,
    pub behavior: Behavior,
}

/// One scheduled client request: at `height`, ask whether `tx` is included
/// in the source chain with at least `min_confirmations` blocks on top.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RequestSpec {
    pub height: u64,
    pub client: String,
    pub tx: String,
    #[serde(default = "default_min_confirmations")]
    pub min_confirmations: u64,
    #[serde(default = "default_chain_id")]
    pub chain: u64,
}

fn default_min_confirmations() -> u64 {
    1
}

fn default_chain_id() -> u64 {
    1
}

/// Source-chain script operations, keyed to simulation ticks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForkSpec {
    pub branch: String,
    pub from_block: u64,
    /// Transaction ids per divergent block, oldest first.
    pub blocks: Vec<Vec<String>>,
    /// Nodes whose views get pinned to the branch.
    pub assign: Vec<NodeId>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LagSpec {
    pub node: NodeId,
    pub blocks: u64,
}

#[derive(Debug, Clone, Serialize)]
pub enum SourceOp {
    Advance(u64),
    AddBlock(Vec<String>),
    Fork(ForkSpec),
    Heal,
    Lag(LagSpec),
}

#[derive(Debug, Clone, Serialize)]
pub struct ScriptEntry {
    pub tick: u64,
    pub op: SourceOp,
}

/// Scripted fault: every ledger transaction the node tries to submit at
/// `at_tick` is silently dropped (a lost submission, retried by protocol).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FaultSpec {
    pub at_tick: u64,
    pub drop_tx_from: NodeId,
}

/// A fully validated simulation scenario.
#[derive(Debug, Clone, Serialize)]
pub struct Scenario {
    pub seed: u64,
    pub run_blocks: u64,
    pub protocol: ProtocolParams,
    pub economics: EconomicsParams,
    pub nodes: Vec<NodeSpec>,
    pub requests: Vec<RequestSpec>,
    pub initial_source_blocks: u64,
    pub script: Vec<ScriptEntry>,
    pub faults: Vec<FaultSpec>,
}

// ---------------------------------------------------------------------------
// Raw TOML layer
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    seed: u64,
    run_blocks: u64,
    #[serde(default)]
    protocol: ProtocolParams,
    #[serde(default)]
    economics: EconomicsParams,
    #[serde(default)]
    nodes: Vec<RawNodeSpec>,
    #[serde(default)]
    requests: Vec<RequestSpec>,
    #[serde(default)]
    source_chain: RawSourceChain,
    #[serde(default)]
    faults: Vec<FaultSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNodeSpec {
    id: String,
    stake: Option<u64>,
    #[serde(default = "default_behavior")]
    behavior: String,
    lazy: Option<LazyAnswer>,
    offline: Option<RawOffline>,
}

fn default_behavior() -> String {
    "altruistic".to_string()
}

#[derive(Debug, Deserialize)]
struct RawOffline {
    from: u64,
    until: u64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSourceChain {
    #[serde(default)]
    initial_blocks: u64,
    #[serde(default)]
    script: Vec<RawScriptEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScriptEntry {
    tick: u64,
    advance: Option<u64>,
    add_block: Option<Vec<String>>,
    fork: Option<ForkSpec>,
    heal: Option<bool>,
    lag: Option<LagSpec>,
}

fn behavior_from_raw(raw: &RawNodeSpec) -> Result<Behavior, ScenarioError> {
    let behavior = match raw.behavior.as_str() {
        "altruistic" => Behavior::Altruistic,
        "lazy" => Behavior::Lazy {
            answer: raw.lazy.unwrap_or_default(),
        },
        "byzantine-random-point" => Behavior::Byzantine {
            mode: ByzantineMode::RandomPoint,
        },
        "byzantine-wrong-payload" => Behavior::Byzantine {
            mode: ByzantineMode::WrongPayload,
        },
        "byzantine-withhold" => Behavior::Byzantine {
            mode: ByzantineMode::Withhold,
        },
        "offline" => {
            let window = raw.offline.as_ref().ok_or_else(|| {
                ScenarioError::Invalid(format!(
                    "node {}: offline behavior needs an [nodes.offline] window",
                    raw.id
                ))
            })?;
            if window.until <= window.from {
                return Err(ScenarioError::Invalid(format!(
                    "node {}: offline window must end after it starts",
                    raw.id
                )));
            }
            Behavior::Offline {
                from: window.from,
                until: window.until,
            }
        }
        "withholder" => Behavior::RationalWithholder,
        other => {
            return Err(ScenarioError::Invalid(format!(
                "node {}: unknown behavior {other:?}",
                raw.id
            )))
        }
    };
    Ok(behavior)
}

impl Scenario {
    /// Read and validate a scenario file.
    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Scenario::from_toml_str(&text).map_err(|e| match e {
            ScenarioError::Parse { source, .. } => ScenarioError::Parse {
                path: path.display().to_string(),
                source,
            },
            other => other,
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Scenario, ScenarioError> {
        let raw: RawScenario = toml::from_str(text).map_err(|source| ScenarioError::Parse {
            path: "<inline>".to_string(),
            source: Box::new(source),
        })?;
        let mut nodes = Vec::with_capacity(raw.nodes.len());
        for raw_node in &raw.nodes {
            nodes.push(NodeSpec {
                id: NodeId::new(raw_node.id.clone()),
                stake: raw_node.stake.unwrap_or(raw.economics.min_stake),
                behavior: behavior_from_raw(raw_node)?,
            });
        }
        let mut script = Vec::new();
        for entry in raw.source_chain.script {
            let ops_given = [
                entry.advance.is_some(),
                entry.add_block.is_some(),
                entry.fork.is_some(),
                entry.heal.is_some(),
                entry.lag.is_some(),
            ]
            .iter()
            .filter(|given| **given)
            .count();
            if ops_given != 1 {
                return Err(ScenarioError::Invalid(format!(
                    "script entry at tick {} must carry exactly one operation",
                    entry.tick
                )));
            }
            let op = if let Some(count) = entry.advance {
                SourceOp::Advance(count)
            } else if let Some(txs) = entry.add_block {
                SourceOp::AddBlock(txs)
            } else if let Some(fork) = entry.fork {
                SourceOp::Fork(fork)
            } else if let Some(lag) = entry.lag {
                SourceOp::Lag(lag)
            } else {
                SourceOp::Heal
            };
            script.push(ScriptEntry {
                tick: entry.tick,
                op,
            });
        }
        let scenario = Scenario {
            seed: raw.seed,
            run_blocks: raw.run_blocks,
            protocol: raw.protocol,
            economics: raw.economics,
            nodes,
            requests: raw.requests,
            initial_source_blocks: raw.source_chain.initial_blocks,
            script,
            faults: raw.faults,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        if self.nodes.is_empty() {
            return Err(ScenarioError::Invalid("scenario defines no nodes".into()));
        }
        if self.run_blocks == 0 {
            return Err(ScenarioError::Invalid("run_blocks must be positive".into()));
        }
        let mut ids = BTreeSet::new();
        for node in &self.nodes {
            if !ids.insert(&node.id) {
                return Err(ScenarioError::Invalid(format!(
                    "duplicate node id {}",
                    node.id
                )));
            }
            if node.stake < self.economics.min_stake {
                return Err(ScenarioError::Invalid(format!(
                    "node {} stake {} below minimum {}",
                    node.id, node.stake, self.economics.min_stake
                )));
            }
        }
        let known = |id: &NodeId| ids.contains(id);
        for entry in &self.script {
            match &entry.op {
                SourceOp::Lag(lag) if !known(&lag.node) => {
                    return Err(ScenarioError::Invalid(format!(
                        "script lag references unknown node {}",
                        lag.node
                    )));
                }
                SourceOp::Fork(fork) => {
                    for node in &fork.assign {
                        if !known(node) {
                            return Err(ScenarioError::Invalid(format!(
                                "fork assigns unknown node {node}"
                            )));
                        }
                    }
                }
                _ => {}
            }
        }
        for request in &self.requests {
            if request.height == 0 || request.height > self.run_blocks {
                return Err(ScenarioError::Invalid(format!(
                    "request for tx {} scheduled at height {} outside the run",
                    request.tx, request.height
                )));
            }
            if request.tx.is_empty() {
                return Err(ScenarioError::Invalid("request with empty tx id".into()));
            }
        }
        for fault in &self.faults {
            if !known(&fault.drop_tx_from) {
                return Err(ScenarioError::Invalid(format!(
                    "fault references unknown node {}",
                    fault.drop_tx_from
                )));
            }
        }
        Ok(())
    }
}
