//! Protocol value types shared by every other module.
//!
//! All types are immutable values. Identity-bearing hashes are computed
//! over the canonical encoding (see [`crate::codec`]), never over any
//! in-memory representation.

use std::fmt;

/// Fixed-length 32-byte digest. Equality is byte-wise.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Hash(pub [u8; 32]);

impl Hash {
    pub const ZERO: Hash = Hash([0u8; 32]);

    pub fn short_hex(&self) -> String {
        hex::encode(&self.0[..4])
    }
}

impl fmt::Debug for Hash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Hash({})", self.short_hex())
    }
}

impl fmt::Display for Hash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.short_hex())
    }
}

/// Network participant identity. Total order is byte-wise over the
/// public key; `display_name` is diagnostics only.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PeerId {
    pub public_key: [u8; 32],
    pub display_name: String,
}

impl fmt::Debug for PeerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.display_name)
    }
}

impl fmt::Display for PeerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display_name)
    }
}

/// Opaque signature bytes plus the claimed signer.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Signature {
    pub bytes: Vec<u8>,
    pub signer: PeerId,
}

/// Ledger command carried by a transaction.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Command {
    /// Move `amount` units from `src` to `dst`. Amounts are encoded
    /// signed so that malformed (negative) values are representable and
    /// rejected by stateless validation.
    Transfer { src: String, dst: String, amount: i64 },
    CreateAccount { name: String },
}

/// Client-signed transaction. `id` is the hash of the canonical
/// encoding of every other field.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Transaction {
    pub id: Hash,
    pub creator: String,
    pub command: Command,
    pub client_signature: Signature,
}

/// Ordered transaction batch emitted by the ordering service for one round.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Proposal {
    pub round: u64,
    pub transactions: Vec<Transaction>,
    /// Simulation time of emission, microseconds.
    pub created_at: u64,
}

/// Post-validation block. `block_hash` covers every other field and is
/// deliberately independent of any commit signatures, so peers applying
/// different signature subsets still agree on the chain.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Block {
    pub proposal_hash: Hash,
    pub transactions: Vec<Transaction>,
    pub height: u64,
    pub prev_block_hash: Hash,
    pub block_hash: Hash,
}

/// One peer's signed intention to store a block for one round.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Vote {
    pub round: u64,
    pub proposal_hash: Hash,
    pub block_hash: Hash,
    pub signature: Signature,
}

impl Vote {
    pub fn signer(&self) -> &PeerId {
        &self.signature.signer
    }
}

/// Supermajority vote set for one block hash; a self-certifying commit
/// proof. Votes are kept sorted by signer so the canonical encoding is
/// independent of collection order.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CommitMessage {
    pub round: u64,
    pub block_hash: Hash,
    pub votes: Vec<Vote>,
}

impl CommitMessage {
    pub fn new(round: u64, block_hash: Hash, mut votes: Vec<Vote>) -> Self {
        votes.sort_by(|a, b| a.signer().cmp(b.signer()));
        CommitMessage { round, block_hash, votes }
    }
}

/// Vote set witnessing that no block hash can reach supermajority for
/// the round. Receipt of a valid reject means the BFT environment is
/// broken.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RejectMessage {
    pub round: u64,
    pub votes: Vec<Vote>,
}

impl RejectMessage {
    pub fn new(round: u64, mut votes: Vec<Vote>) -> Self {
        votes.sort_by(|a, b| (a.signer(), a.block_hash).cmp(&(b.signer(), b.block_hash)));
        RejectMessage { round, votes }
    }
}
