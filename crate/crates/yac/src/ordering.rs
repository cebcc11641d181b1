//! The ordering service: a single honest process that batches
//! stateless-valid transactions into round proposals.
//!
//! Emission is gated two ways: a proposal goes out once the queue holds
//! `batch_limit` transactions or the batch timeout elapses with a
//! non-empty queue, and never before the previous round's proposal has
//! been committed by at least one peer (one proposal per round, no
//! pipelining).

use crate::crypto::SignatureScheme;
use crate::ledger::stateless_validate;
use crate::types::{Hash, Proposal, Transaction};
use std::collections::{HashSet, VecDeque};

pub struct OrderingState {
    queue: VecDeque<Transaction>,
    /// ids ever accepted (queued or emitted); duplicates are dropped
    seen: HashSet<Hash>,
    next_round: u64,
    batch_limit: usize,
    batch_timeout_us: u64,
    last_emit_time: u64,
    /// round of the last emitted proposal, once one exists
    outstanding_round: Option<u64>,
    pub dropped: u64,
    pub emitted_tx_ids: Vec<Hash>,
}

impl OrderingState {
    pub fn new(batch_limit: usize, batch_timeout_us: u64) -> Self {
        assert!(batch_limit > 0, "batch_limit must be positive");
        OrderingState {
            queue: VecDeque::new(),
            seen: HashSet::new(),
            next_round: 0,
            batch_limit,
            batch_timeout_us,
            last_emit_time: 0,
            outstanding_round: None,
            dropped: 0,
            emitted_tx_ids: Vec::new(),
        }
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    pub fn next_round(&self) -> u64 {
        self.next_round
    }

    pub fn batch_timeout_us(&self) -> u64 {
        self.batch_timeout_us
    }

    /// Accepts a transaction iff it is stateless-valid and its id has
    /// never been seen. Invalid or duplicate submissions are silently
    /// dropped and counted.
    pub fn submit_transaction(&mut self, tx: Transaction, scheme: &dyn SignatureScheme) {
        if !stateless_validate(&tx, scheme) || self.seen.contains(&tx.id) {
            self.dropped += 1;
            return;
        }
        self.seen.insert(tx.id);
        self.queue.push_back(tx);
    }

    /// Back-pressure release: a peer committed the given round.
    pub fn notify_committed(&mut self, round: u64) {
        if self.outstanding_round == Some(round) {
            self.outstanding_round = None;
        }
    }

    fn blocked(&self) -> bool {
        self.outstanding_round.is_some()
    }

    /// Emits the next proposal when a trigger condition holds:
    /// `batch_limit` transactions queued, or the batch timeout elapsed
    /// with a non-empty queue.
    pub fn maybe_emit_proposal(&mut self, now: u64) -> Option<Proposal> {
        if self.blocked() || self.queue.is_empty() {
            return None;
        }
        let count_trigger = self.queue.len() >= self.batch_limit;
        let timeout_trigger = now.saturating_sub(self.last_emit_time) >= self.batch_timeout_us;
        if !count_trigger && !timeout_trigger {
            return None;
        }
        let take = self.queue.len().min(self.batch_limit);
        let transactions: Vec<Transaction> = self.queue.drain(..take).collect();
        self.emitted_tx_ids.extend(transactions.iter().map(|tx| tx.id));
        let proposal = Proposal { round: self.next_round, transactions, created_at: now };
        self.outstanding_round = Some(self.next_round);
        self.next_round += 1;
        self.last_emit_time = now;
        Some(proposal)
    }
}
