//! World state, transaction validation, block construction, and the
//! committed block store.
//!
//! Validation happens in two layers, mirroring the protocol pipeline:
//! stateless (signature, shape) on submission, stateful (balances)
//! while applying a proposal. Stateful filtering keeps the ordering
//! service's relative order and never reorders.

use crate::codec::Canon;
use crate::crypto::{hash, verify_signature, SignatureScheme};
use crate::quorum::verify_commit;
use crate::types::*;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LedgerFault {
    /// prev_block_hash does not extend the current top of the chain.
    #[error("chain-gap")]
    ChainGap,
    /// Commit proof failed verification or does not match the block.
    #[error("bad-commit")]
    BadCommit,
    /// A committed block's transaction cannot be applied; indicates
    /// state divergence between peers.
    #[error("invalid-block-state")]
    InvalidBlockState,
    #[error("import: {0}")]
    Import(String),
}

/// Account balances plus chain position.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct WorldState {
    pub accounts: BTreeMap<String, u64>,
    pub height: u64,
    pub top_block_hash: Hash,
}

impl WorldState {
    pub fn genesis(accounts: impl IntoIterator<Item = (String, u64)>) -> Self {
        WorldState {
            accounts: accounts.into_iter().collect(),
            height: 0,
            top_block_hash: Hash::ZERO,
        }
    }

    pub fn balance(&self, account: &str) -> Option<u64> {
        self.accounts.get(account).copied()
    }

    /// Applies one transaction if it keeps every balance non-negative.
    /// Returns false (state untouched) otherwise.
    fn try_apply(&mut self, tx: &Transaction) -> bool {
        match &tx.command {
            Command::Transfer { src, dst, amount } => {
                let amount = match u64::try_from(*amount) {
                    Ok(a) => a,
                    Err(_) => return false,
                };
                let Some(src_balance) = self.balance(src) else { return false };
                if self.balance(dst).is_none() || src_balance < amount {
                    return false;
                }
                *self.accounts.get_mut(src).unwrap() -= amount;
                *self.accounts.get_mut(dst).unwrap() += amount;
                true
            }
            Command::CreateAccount { name } => {
                if name.is_empty() || self.accounts.contains_key(name) {
                    return false;
                }
                self.accounts.insert(name.clone(), 0);
                true
            }
        }
    }
}

/// Subset of a proposal's transactions a peer deems valid.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct VerifiedProposal {
    pub proposal_hash: Hash,
    pub valid_transactions: Vec<Transaction>,
}

/// True iff the transaction is well-formed on its own: non-empty
/// identifiers, non-negative amount, id matches content, and the client
/// signature verifies.
pub fn stateless_validate(tx: &Transaction, scheme: &dyn SignatureScheme) -> bool {
    let shape_ok = match &tx.command {
        Command::Transfer { src, dst, amount } => !src.is_empty() && !dst.is_empty() && *amount >= 0,
        Command::CreateAccount { name } => !name.is_empty(),
    };
    if !shape_ok || tx.creator.is_empty() {
        return false;
    }
    if hash(&tx.id_payload()) != tx.id {
        return false;
    }
    let payload = Transaction::signing_payload(&tx.creator, &tx.command);
    verify_signature(scheme, &payload, &tx.client_signature)
}

/// Filters a proposal against a scratch copy of the state. Transactions
/// are applied in proposal order; each included transaction's effects
/// are visible to later ones. The input state is untouched.
pub fn apply_proposal(
    state: &WorldState,
    proposal: &Proposal,
    scheme: &dyn SignatureScheme,
) -> (VerifiedProposal, WorldState) {
    let mut preview = state.clone();
    let mut valid = Vec::new();
    for tx in &proposal.transactions {
        if stateless_validate(tx, scheme) && preview.try_apply(tx) {
            valid.push(tx.clone());
        }
    }
    let vp = VerifiedProposal {
        proposal_hash: hash(&proposal.encode()),
        valid_transactions: valid,
    };
    (vp, preview)
}

/// Deterministic block construction: equal (state, verified proposal)
/// on two peers yields byte-identical blocks.
pub fn build_block(vp: &VerifiedProposal, state: &WorldState) -> Block {
    let payload = Block::hash_payload(
        &vp.proposal_hash,
        &vp.valid_transactions,
        state.height,
        &state.top_block_hash,
    );
    Block {
        proposal_hash: vp.proposal_hash,
        transactions: vp.valid_transactions.clone(),
        height: state.height,
        prev_block_hash: state.top_block_hash,
        block_hash: hash(&payload),
    }
}

/// Append-only chain of blocks with their commit proofs.
#[derive(Clone, Default, Debug)]
pub struct BlockStore {
    blocks: Vec<(Block, CommitMessage)>,
}

impl BlockStore {
    pub fn new() -> Self {
        BlockStore::default()
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn get(&self, height: u64) -> Option<&(Block, CommitMessage)> {
        self.blocks.get(height as usize)
    }

    pub fn iter(&self) -> impl Iterator<Item = &(Block, CommitMessage)> {
        self.blocks.iter()
    }

    /// Newline-delimited hex export: one `block commit` pair per line.
    pub fn export(&self) -> String {
        let mut out = String::new();
        for (block, commit) in &self.blocks {
            out.push_str(&hex::encode(block.encode()));
            out.push(' ');
            out.push_str(&hex::encode(commit.encode()));
            out.push('\n');
        }
        out
    }

    /// Parses an export, re-validating chain linkage and every commit proof.
    pub fn import(
        text: &str,
        peers: &[PeerId],
        scheme: &dyn SignatureScheme,
    ) -> Result<Self, LedgerFault> {
        let mut store = BlockStore::new();
        let mut prev = Hash::ZERO;
        for (lineno, line) in text.lines().enumerate() {
            let err = |m: String| LedgerFault::Import(format!("line {}: {m}", lineno + 1));
            let (bh, ch) = line
                .split_once(' ')
                .ok_or_else(|| err("expected two hex fields".into()))?;
            let block = Block::decode(&hex::decode(bh).map_err(|e| err(e.to_string()))?)
                .map_err(|e| err(e.to_string()))?;
            let commit = CommitMessage::decode(&hex::decode(ch).map_err(|e| err(e.to_string()))?)
                .map_err(|e| err(e.to_string()))?;
            if block.height != lineno as u64 || block.prev_block_hash != prev {
                return Err(LedgerFault::ChainGap);
            }
            let payload = Block::hash_payload(
                &block.proposal_hash,
                &block.transactions,
                block.height,
                &block.prev_block_hash,
            );
            if hash(&payload) != block.block_hash {
                return Err(err("block hash mismatch".into()));
            }
            if commit.block_hash != block.block_hash || !verify_commit(&commit, peers, scheme) {
                return Err(LedgerFault::BadCommit);
            }
            prev = block.block_hash;
            store.blocks.push((block, commit));
        }
        Ok(store)
    }
}

/// Appends a committed block and advances the world state in lockstep.
pub fn commit_block(
    store: &mut BlockStore,
    state: &mut WorldState,
    block: Block,
    commit: CommitMessage,
    peers: &[PeerId],
    scheme: &dyn SignatureScheme,
) -> Result<(), LedgerFault> {
    if block.prev_block_hash != state.top_block_hash || block.height != state.height {
        return Err(LedgerFault::ChainGap);
    }
    if commit.block_hash != block.block_hash
        || commit.round != block.height
        || !verify_commit(&commit, peers, scheme)
    {
        return Err(LedgerFault::BadCommit);
    }
    let mut next = state.clone();
    for tx in &block.transactions {
        if !next.try_apply(tx) {
            return Err(LedgerFault::InvalidBlockState);
        }
    }
    next.height += 1;
    next.top_block_hash = block.block_hash;
    *state = next;
    store.blocks.push((block, commit));
    Ok(())
}

/// Replays a block store from a genesis state; used by the audit path
/// and the fold-equivalence property test.
pub fn replay(
    genesis: &WorldState,
    store: &BlockStore,
) -> Result<WorldState, LedgerFault> {
    let mut state = genesis.clone();
    for (block, _) in store.iter() {
        if block.prev_block_hash != state.top_block_hash {
            return Err(LedgerFault::ChainGap);
        }
        for tx in &block.transactions {
            if !state.try_apply(tx) {
                return Err(LedgerFault::InvalidBlockState);
            }
        }
        state.height += 1;
        state.top_block_hash = block.block_hash;
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::SimScheme;
    use crate::quorum::supermajority_threshold;

    fn scheme_with_clients() -> SimScheme {
        let mut scheme = SimScheme::new();
        for name in ["alice", "bob", "carol"] {
            scheme.generate_from_seed(b"ledger-test", name);
        }
        scheme
    }

    fn transfer(scheme: &mut SimScheme, src: &str, dst: &str, amount: i64) -> Transaction {
        let kp = scheme.generate_from_seed(b"ledger-test", src);
        let command = Command::Transfer { src: src.into(), dst: dst.into(), amount };
        let sig = Signature {
            bytes: scheme.sign(&kp.secret, &Transaction::signing_payload(src, &command)),
            signer: kp.peer,
        };
        let mut tx =
            Transaction { id: Hash::ZERO, creator: src.into(), command, client_signature: sig };
        tx.id = hash(&tx.id_payload());
        tx
    }

    fn world() -> WorldState {
        WorldState::genesis([("alice".into(), 10), ("bob".into(), 0), ("carol".into(), 0)])
    }

    #[test]
    fn stateless_validation_filters_tampering_and_malformation() {
        let mut scheme = scheme_with_clients();
        let good = transfer(&mut scheme, "alice", "bob", 5);
        assert!(stateless_validate(&good, &scheme));

        let mut tampered = good.clone();
        tampered.client_signature.bytes[0] ^= 1;
        assert!(!stateless_validate(&tampered, &scheme));

        let mut wrong_id = good.clone();
        wrong_id.id.0[0] ^= 1;
        assert!(!stateless_validate(&wrong_id, &scheme));

        let mut negative = good;
        negative.command = Command::Transfer { src: "alice".into(), dst: "bob".into(), amount: -5 };
        assert!(!stateless_validate(&negative, &scheme));
    }

    #[test]
    fn apply_proposal_happy_path() {
        let mut scheme = scheme_with_clients();
        let state = world();
        let proposal = Proposal {
            round: 0,
            transactions: vec![transfer(&mut scheme, "alice", "bob", 5)],
            created_at: 0,
        };
        let (vp, preview) = apply_proposal(&state, &proposal, &scheme);
        assert_eq!(vp.valid_transactions.len(), 1);
        assert_eq!(preview.balance("alice"), Some(5));
        assert_eq!(preview.balance("bob"), Some(5));
        assert_eq!(state.balance("alice"), Some(10), "input state untouched");
    }

    #[test]
    fn apply_proposal_excludes_overdraft_second_transfer() {
        // alice holds 10; 7 then 7 would drive her to -4, so only the
        // first transfer survives
        let mut scheme = scheme_with_clients();
        let state = world();
        let proposal = Proposal {
            round: 0,
            transactions: vec![
                transfer(&mut scheme, "alice", "bob", 7),
                transfer(&mut scheme, "alice", "carol", 7),
            ],
            created_at: 0,
        };
        let (vp, preview) = apply_proposal(&state, &proposal, &scheme);
        assert_eq!(vp.valid_transactions.len(), 1);
        assert_eq!(vp.valid_transactions[0].command, proposal.transactions[0].command);
        assert_eq!(preview.balance("alice"), Some(3));
        assert_eq!(preview.balance("carol"), Some(0));
    }

    #[test]
    fn empty_verified_proposal_still_builds_a_block() {
        let mut scheme = scheme_with_clients();
        let state = world();
        let proposal = Proposal {
            round: 0,
            transactions: vec![transfer(&mut scheme, "alice", "bob", 999)],
            created_at: 0,
        };
        let (vp, _) = apply_proposal(&state, &proposal, &scheme);
        assert!(vp.valid_transactions.is_empty());
        let block = build_block(&vp, &state);
        assert_eq!(block.height, 0);
        assert_eq!(block.prev_block_hash, Hash::ZERO);
    }

    #[test]
    fn block_construction_is_deterministic_and_chains() {
        let mut scheme = scheme_with_clients();
        let state = world();
        let proposal = Proposal {
            round: 0,
            transactions: vec![transfer(&mut scheme, "alice", "bob", 5)],
            created_at: 7,
        };
        let (vp, _) = apply_proposal(&state, &proposal, &scheme);
        assert_eq!(build_block(&vp, &state), build_block(&vp, &state));

        let mut other = state.clone();
        other.top_block_hash = Hash([9; 32]);
        assert_ne!(build_block(&vp, &state).block_hash, build_block(&vp, &other).block_hash);
    }

    /// A syntactically valid supermajority commit for the block, signed
    /// by freshly generated validator keys.
    fn commit_for(scheme: &mut SimScheme, block: &Block, n: usize) -> (CommitMessage, Vec<PeerId>) {
        let kps: Vec<_> =
            (0..n).map(|i| scheme.generate_from_seed(b"ledger-val", &format!("v{i}"))).collect();
        let peers: Vec<PeerId> = kps.iter().map(|kp| kp.peer.clone()).collect();
        let votes: Vec<Vote> = kps
            .iter()
            .take(supermajority_threshold(n).unwrap())
            .map(|kp| {
                let payload =
                    Vote::signing_payload(block.height, &block.proposal_hash, &block.block_hash);
                Vote {
                    round: block.height,
                    proposal_hash: block.proposal_hash,
                    block_hash: block.block_hash,
                    signature: Signature {
                        bytes: scheme.sign(&kp.secret, &payload),
                        signer: kp.peer.clone(),
                    },
                }
            })
            .collect();
        (CommitMessage::new(block.height, block.block_hash, votes), peers)
    }

    #[test]
    fn commit_block_appends_and_rejects_faults() {
        let mut scheme = scheme_with_clients();
        let genesis = world();
        let mut state = genesis.clone();
        let mut store = BlockStore::new();
        let proposal = Proposal {
            round: 0,
            transactions: vec![transfer(&mut scheme, "alice", "bob", 5)],
            created_at: 0,
        };
        let (vp, _) = apply_proposal(&state, &proposal, &scheme);
        let block = build_block(&vp, &state);
        let (commit, peers) = commit_for(&mut scheme, &block, 4);

        // 2-of-4 proof is below threshold
        let mut thin = commit.clone();
        thin.votes.pop();
        assert_eq!(
            commit_block(&mut store, &mut state, block.clone(), thin, &peers, &scheme),
            Err(LedgerFault::BadCommit)
        );

        commit_block(&mut store, &mut state, block.clone(), commit.clone(), &peers, &scheme)
            .unwrap();
        assert_eq!(state.height, 1);
        assert_eq!(state.top_block_hash, block.block_hash);
        assert_eq!(state.balance("bob"), Some(5));

        // re-appending the same block now mismatches the chain top
        assert_eq!(
            commit_block(&mut store, &mut state, block, commit, &peers, &scheme),
            Err(LedgerFault::ChainGap)
        );

        // replay from genesis reproduces the final state
        assert_eq!(replay(&genesis, &store).unwrap(), state);

        // export/import round-trips with full re-validation
        let imported = BlockStore::import(&store.export(), &peers, &scheme).unwrap();
        assert_eq!(imported.len(), store.len());
        assert_eq!(replay(&genesis, &imported).unwrap(), state);

        // a tampered export is rejected
        let mut text = store.export();
        text.replace_range(0..2, "ff");
        assert!(BlockStore::import(&text, &peers, &scheme).is_err());
    }
}
