//! Simulated source blockchain: the chain whose transactions the oracle is
//! asked about.
//!
//! The chain is a tree of blocks with synthetic hashes (SHA-256 over parent
//! hash, number, and transaction ids — no proof of work, since validators
//! observe the chain rather than validate headers). Each oracle node owns a
//! view: a prefix of the canonical chain, optionally lagging behind the head
//! or pinned to an injected fork branch. Queries are answered from a view,
//! so different nodes can temporarily disagree; `heal` collapses every view
//! back onto the canonical chain, modeling eventual consistency.

use crate::NodeId;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SourceChainError {
    #[error("fork parent block {0} does not exist")]
    DanglingParent(u64),
    #[error("branch {0} already exists")]
    DuplicateBranch(String),
    #[error("unknown view owner {0}")]
    UnknownView(NodeId),
    #[error("unknown branch {0}")]
    UnknownBranch(String),
}

/// A block of the simulated chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceBlock {
    pub number: u64,
    #[serde(with = "hex::serde")]
    pub hash: [u8; 32],
    #[serde(with = "hex::serde")]
    pub parent: [u8; 32],
    pub txs: BTreeSet<String>,
}

fn block_hash(parent: &[u8; 32], number: u64, txs: &BTreeSet<String>) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(parent);
    hasher.update(number.to_be_bytes());
    for tx in txs {
        hasher.update((tx.len() as u32).to_be_bytes());
        hasher.update(tx.as_bytes());
    }
    hasher.finalize().into()
}

/// What a validator reports for one query. Not-included answers zero the
/// block fields so the canonical payload encoding is unambiguous.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationAnswer {
    pub included: bool,
    pub block_number: u64,
    #[serde(with = "hex::serde")]
    pub block_hash: [u8; 32],
    pub confirmed: bool,
}

impl VerificationAnswer {
    pub fn not_included() -> VerificationAnswer {
        VerificationAnswer {
            included: false,
            block_number: 0,
            block_hash: [0u8; 32],
            confirmed: false,
        }
    }
}

/// A node's (possibly stale or forked) perspective on the chain.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceView {
    /// Blocks behind the head of the followed chain.
    pub lag: u64,
    /// Pinned fork branch, if any; `None` follows the canonical chain.
    pub branch: Option<String>,
}

/// The simulated chain plus all per-node views.
#[derive(Debug, Clone)]
pub struct SourceChain {
    /// Canonical chain, genesis first.
    canonical: Vec<SourceBlock>,
    /// Fork branches: shared prefix length into `canonical`, then the
    /// divergent suffix blocks.
    branches: BTreeMap<String, (usize, Vec<SourceBlock>)>,
    views: BTreeMap<NodeId, SourceView>,
}

impl Default for SourceChain {
    fn default() -> Self {
        SourceChain::new()
    }
}

impl SourceChain {
    /// A fresh chain holding only the genesis block.
    pub fn new() -> SourceChain {
        let genesis = SourceBlock {
            number: 0,
            hash: block_hash(&[0u8; 32], 0, &BTreeSet::new()),
            parent: [0u8; 32],
            txs: BTreeSet::new(),
        };
        SourceChain {
            canonical: vec![genesis],
            branches: BTreeMap::new(),
            views: BTreeMap::new(),
        }
    }

    pub fn head_number(&self) -> u64 {
        self.canonical.last().unwrap().number
    }

    pub fn canonical_block(&self, number: u64) -> Option<&SourceBlock> {
        self.canonical.get(number as usize)
    }

    /// Extend the canonical chain with `k` empty blocks.
    pub fn advance(&mut self, k: u64) {
        for _ in 0..k {
            self.push_canonical(BTreeSet::new());
        }
    }

    /// Extend the canonical chain with one block carrying the given txs.
    pub fn add_block(&mut self, txs: impl IntoIterator<Item = String>) {
        self.push_canonical(txs.into_iter().collect());
    }

    fn push_canonical(&mut self, txs: BTreeSet<String>) {
        let parent = self.canonical.last().unwrap();
        let number = parent.number + 1;
        let hash = block_hash(&parent.hash, number, &txs);
        let parent_hash = parent.hash;
        self.canonical.push(SourceBlock {
            number,
            hash,
            parent: parent_hash,
            txs,
        });
    }

    /// Create a fork branching off canonical block `from_number`, with the
    /// given divergent blocks on top, and pin `assign` nodes' views to it.
    pub fn inject_fork(
        &mut self,
        branch_id: &str,
        from_number: u64,
        blocks: Vec<BTreeSet<String>>,
        assign: &[NodeId],
    ) -> Result<(), SourceChainError> {
        if self.branches.contains_key(branch_id) {
            return Err(SourceChainError::DuplicateBranch(branch_id.to_string()));
        }
        let prefix_len = from_number as usize + 1;
        if prefix_len > self.canonical.len() {
            return Err(SourceChainError::DanglingParent(from_number));
        }
        let mut suffix: Vec<SourceBlock> = Vec::with_capacity(blocks.len());
        let mut parent_hash = self.canonical[prefix_len - 1].hash;
        let mut number = from_number;
        for txs in blocks {
            number += 1;
            let hash = block_hash(&parent_hash, number, &txs);
            suffix.push(SourceBlock {
                number,
                hash,
                parent: parent_hash,
                txs,
            });
            parent_hash = hash;
        }
        self.branches
            .insert(branch_id.to_string(), (prefix_len, suffix));
        for node in assign {
            self.views.entry(node.clone()).or_default().branch = Some(branch_id.to_string());
        }
        Ok(())
    }

    /// Collapse every view back onto the canonical head and drop branches.
    pub fn heal(&mut self) {
        self.branches.clear();
        for view in self.views.values_mut() {
            view.branch = None;
            view.lag = 0;
        }
    }

    pub fn set_lag(&mut self, node: &NodeId, lag: u64) {
        self.views.entry(node.clone()).or_default().lag = lag;
    }

    pub fn view(&self, node: &NodeId) -> SourceView {
        self.views.get(node).cloned().unwrap_or_default()
    }

    /// The chain as visible to `node`: branch or canonical, truncated by lag.
    fn visible_chain(&self, node: &NodeId) -> Vec<&SourceBlock> {
        let view = self.views.get(node).cloned().unwrap_or_default();
        let full: Vec<&SourceBlock> = match view.branch.as_deref() {
            Some(branch_id) => match self.branches.get(branch_id) {
                Some((prefix_len, suffix)) => self.canonical[..*prefix_len]
                    .iter()
                    .chain(suffix.iter())
                    .collect(),
                // branch healed away; fall back to canonical
                None => self.canonical.iter().collect(),
            },
            None => self.canonical.iter().collect(),
        };
        let keep = full.len().saturating_sub(view.lag as usize).max(1);
        full[..keep].to_vec()
    }

    /// Answer "in which block is `tx_id` included, and is it confirmed by at
    /// least `min_confirmations` blocks?" from `node`'s view. Confirmation
    /// counts blocks strictly above the including block.
    pub fn query(&self, node: &NodeId, tx_id: &str, min_confirmations: u64) -> VerificationAnswer {
        let chain = self.visible_chain(node);
        Self::query_chain(&chain, tx_id, min_confirmations)
    }

    /// The same query answered from the canonical chain; the reference for
    /// "is this result actually right?" assertions.
    pub fn canonical_query(&self, tx_id: &str, min_confirmations: u64) -> VerificationAnswer {
        let chain: Vec<&SourceBlock> = self.canonical.iter().collect();
        Self::query_chain(&chain, tx_id, min_confirmations)
    }

    fn query_chain(
        chain: &[&SourceBlock],
        tx_id: &str,
        min_confirmations: u64,
    ) -> VerificationAnswer {
        let head_number = chain.last().unwrap().number;
        for block in chain {
            if block.txs.contains(tx_id) {
                return VerificationAnswer {
                    included: true,
                    block_number: block.number,
                    block_hash: block.hash,
                    confirmed: head_number - block.number >= min_confirmations,
                };
            }
        }
        VerificationAnswer::not_included()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(name: &str) -> NodeId {
        NodeId::new(name)
    }

    #[test]
    fn confirmation_boundary_is_inclusive() {
        let mut chain = SourceChain::new();
        chain.add_block(["tx1".to_string()]);
        chain.advance(3);
        let answer = chain.canonical_query("tx1", 3);
        assert!(answer.included);
        assert_eq!(answer.block_number, 1);
        assert!(answer.confirmed);
        assert!(!chain.canonical_query("tx1", 4).confirmed);
    }

    #[test]
    fn absent_tx_answers_all_zero() {
        let chain = SourceChain::new();
        assert_eq!(
            chain.canonical_query("ghost", 1),
            VerificationAnswer::not_included()
        );
    }

    #[test]
    fn advancing_increases_confirmations() {
        let mut chain = SourceChain::new();
        chain.add_block(["tx1".to_string()]);
        let before = chain.head_number() - chain.canonical_query("tx1", 0).block_number;
        chain.advance(3);
        let after = chain.head_number() - chain.canonical_query("tx1", 0).block_number;
        assert_eq!(after, before + 3);
        assert!(chain.canonical_query("tx1", before + 3).confirmed);
    }

    #[test]
    fn lagging_view_misses_recent_inclusion_until_caught_up() {
        let mut chain = SourceChain::new();
        chain.advance(2);
        chain.add_block(["tx1".to_string()]);
        let laggard = node("n1");
        chain.set_lag(&laggard, 1);
        assert!(!chain.query(&laggard, "tx1", 0).included);
        assert!(chain.canonical_query("tx1", 0).included);
        // converges once the view advances (lag cleared)
        chain.set_lag(&laggard, 0);
        assert_eq!(
            chain.query(&laggard, "tx1", 0),
            chain.canonical_query("tx1", 0)
        );
    }

    #[test]
    fn fork_views_disagree_until_heal() {
        let mut chain = SourceChain::new();
        chain.advance(1);
        chain.add_block(["tx1".to_string()]); // canonical block 2
        chain.advance(2);
        let forked = [node("n4"), node("n5")];
        // branch from block 1: tx1 lands in a different block with a
        // different hash
        chain
            .inject_fork(
                "b1",
                1,
                vec![
                    BTreeSet::new(),
                    [("tx1".to_string())].into_iter().collect(),
                    BTreeSet::new(),
                ],
                &forked,
            )
            .unwrap();
        let canonical_answer = chain.canonical_query("tx1", 1);
        let fork_answer = chain.query(&forked[0], "tx1", 1);
        assert!(fork_answer.included);
        assert_ne!(canonical_answer, fork_answer);
        assert_ne!(canonical_answer.block_hash, fork_answer.block_hash);

        chain.heal();
        for n in &forked {
            assert_eq!(chain.query(n, "tx1", 1), canonical_answer);
        }
    }

    #[test]
    fn fork_from_missing_block_is_rejected() {
        let mut chain = SourceChain::new();
        let err = chain.inject_fork("b1", 9, vec![BTreeSet::new()], &[]);
        assert_eq!(err, Err(SourceChainError::DanglingParent(9)));
    }

    #[test]
    fn confirmed_stays_confirmed_as_chain_grows() {
        let mut chain = SourceChain::new();
        chain.add_block(["tx1".to_string()]);
        chain.advance(2);
        assert!(chain.canonical_query("tx1", 2).confirmed);
        for _ in 0..20 {
            chain.advance(1);
            assert!(chain.canonical_query("tx1", 2).confirmed);
        }
    }
}
