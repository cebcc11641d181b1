//! An open-membership-free ("permissioned") BFT consensus protocol in
//! which an ordering service batches transactions into round proposals
//! and validators exchange votes along a hash-seeded peer permutation,
//! plus a deterministic network simulator and fault-injection harness
//! around it.
//!
//! Layering, bottom up:
//!
//! - [`types`] / [`codec`]: protocol values and their canonical
//!   byte encoding (all hashes and signatures are over these bytes)
//! - [`crypto`]: hashing and the pluggable signature scheme
//! - [`quorum`]: supermajority arithmetic, commit/reject verification
//! - [`permutation`]: the hash-seeded vote-routing order
//! - [`ledger`]: world state, validation, blocks, the committed store
//! - [`ordering`]: the batching ordering service
//! - [`consensus`]: one peer's event-driven state machine
//! - [`faults`]: Byzantine behavior strategies (name-keyed registry)
//! - [`scenario`] / [`sim`] / [`sweep`]: experiment configs, the
//!   discrete-event simulator, and parameter sweeps to CSV

pub mod codec;
pub mod consensus;
pub mod crypto;
pub mod faults;
pub mod ledger;
pub mod ordering;
pub mod permutation;
pub mod quorum;
pub mod scenario;
pub mod sim;
pub mod sweep;
pub mod types;
