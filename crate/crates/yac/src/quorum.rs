//! Supermajority arithmetic and commit-proof verification.
//!
//! Commit proofs are self-certifying: anyone holding the peer list (and
//! the signature scheme) can validate one with no other local state.

use crate::codec::Canon;
use crate::crypto::{verify_signature, SignatureScheme};
use crate::types::{CommitMessage, PeerId, Vote};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum QuorumError {
    #[error("empty-network")]
    EmptyNetwork,
}

/// Smallest integer strictly greater than two thirds of `n`.
pub fn supermajority_threshold(n: usize) -> Result<usize, QuorumError> {
    if n == 0 {
        return Err(QuorumError::EmptyNetwork);
    }
    Ok(2 * n / 3 + 1)
}

/// Checks that every vote in the commit targets the same
/// (round, proposal hash, block hash), signatures verify, signers are
/// distinct known peers, and the count reaches supermajority.
pub fn verify_commit(
    commit: &CommitMessage,
    peers: &[PeerId],
    scheme: &dyn SignatureScheme,
) -> bool {
    let Ok(threshold) = supermajority_threshold(peers.len()) else {
        return false;
    };
    if commit.votes.len() < threshold {
        return false;
    }
    let known: BTreeSet<&PeerId> = peers.iter().collect();
    let mut signers = BTreeSet::new();
    let proposal_hash = commit.votes[0].proposal_hash;
    for vote in &commit.votes {
        if vote.round != commit.round
            || vote.block_hash != commit.block_hash
            || vote.proposal_hash != proposal_hash
        {
            return false;
        }
        if !known.contains(vote.signer()) || !signers.insert(vote.signer().clone()) {
            return false;
        }
        let payload = Vote::signing_payload(vote.round, &vote.proposal_hash, &vote.block_hash);
        if !verify_signature(scheme, &payload, &vote.signature) {
            return false;
        }
    }
    true
}

/// Checks a reject witness: all signatures valid, signers known, one
/// vote per (signer, hash) pair, and the vote set actually proves that
/// no hash can reach supermajority under any completion.
pub fn verify_reject(
    reject: &crate::types::RejectMessage,
    peers: &[PeerId],
    scheme: &dyn SignatureScheme,
) -> bool {
    let Ok(threshold) = supermajority_threshold(peers.len()) else {
        return false;
    };
    let known: BTreeSet<&PeerId> = peers.iter().collect();
    let mut seen = BTreeSet::new();
    let mut signers = BTreeSet::new();
    let mut buckets: std::collections::BTreeMap<crate::types::Hash, usize> = Default::default();
    for vote in &reject.votes {
        if vote.round != reject.round || !known.contains(vote.signer()) {
            return false;
        }
        if !seen.insert((vote.signer().clone(), vote.block_hash)) {
            return false;
        }
        let payload = Vote::signing_payload(vote.round, &vote.proposal_hash, &vote.block_hash);
        if !verify_signature(scheme, &payload, &vote.signature) {
            return false;
        }
        signers.insert(vote.signer().clone());
        *buckets.entry(vote.block_hash).or_default() += 1;
    }
    let most_frequent = buckets.values().copied().max().unwrap_or(0);
    let missing = peers.len() - signers.len();
    most_frequent + missing < threshold
}

/// Canonical (sorted, deduplicated) peer list used everywhere a peer
/// set must be agreed upon.
pub fn canonical_peer_list(mut peers: Vec<PeerId>) -> Vec<PeerId> {
    peers.sort();
    peers.dedup();
    peers
}

/// Helper shared by tests and diagnostics: hex-dump of a canonical value.
pub fn to_hex<T: Canon>(value: &T) -> String {
    hex::encode(value.encode())
}
