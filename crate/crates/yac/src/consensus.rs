//! One peer's consensus state machine.
//!
//! The machine is a pure event handler: every entry point consumes one
//! input (proposal, vote, commit, reject, timer) and returns the list
//! of [`Action`]s that fully determines its externally visible
//! behavior. It performs no I/O and never reads a clock; time arrives
//! only as timer events armed by earlier actions.

use crate::crypto::{hash, verify_signature, SecretKey, SignatureScheme};
use crate::ledger::{apply_proposal, build_block, BlockStore, WorldState};
use crate::permutation::peer_order;
use crate::quorum::{supermajority_threshold, verify_commit, verify_reject};
use crate::types::*;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

/// Wire payload exchanged between peers.
#[derive(Clone, Debug)]
pub enum Message {
    Proposal(Proposal),
    Vote(Vote),
    Commit(CommitCarrier),
    Reject(RejectMessage),
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::Proposal(_) => "proposal",
            Message::Vote(_) => "vote",
            Message::Commit(_) => "commit",
            Message::Reject(_) => "reject",
        }
    }

    /// Number of signatures a receiver has to check; drives the
    /// simulator's processing-cost model.
    pub fn signature_count(&self) -> usize {
        match self {
            Message::Proposal(p) => p.transactions.len(),
            Message::Vote(_) => 1,
            Message::Commit(c) => c.commit.votes.len(),
            Message::Reject(r) => r.votes.len(),
        }
    }
}

/// Commit proof plus an optional block body for receivers that computed
/// a different block than the one that won.
#[derive(Clone, Debug)]
pub struct CommitCarrier {
    pub commit: CommitMessage,
    pub block: Option<Block>,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct TimerToken {
    pub round: u64,
}

#[derive(Clone, Debug)]
pub enum Action {
    Send { to: PeerId, msg: Message },
    Broadcast(Message),
    ArmTimer { delay_us: u64, token: TimerToken },
    /// Append to the local chain; the host applies this to the ledger.
    CommitBlock { block: Block, proof: CommitMessage },
    Alarm { reason: &'static str },
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Phase {
    /// Waiting for the current round's proposal.
    Idle,
    /// Voted, cycling the vote step until a commit or reject arrives.
    Voting,
    /// Saw a valid reject; consensus participation is over for the run.
    Halted,
}

/// Per-round vote bookkeeping: one bucket per block hash, at most one
/// vote per signer per bucket. A signer showing up under two hashes is
/// recorded as an equivocator (and counted in both buckets, matching
/// the adversary model of the safety argument).
#[derive(Default, Clone, Debug)]
pub struct VoteStore {
    buckets: BTreeMap<Hash, BTreeMap<PeerId, Vote>>,
    bucket_proposal: BTreeMap<Hash, Hash>,
    voters: BTreeSet<PeerId>,
    pub equivocators: BTreeSet<PeerId>,
}

#[derive(PartialEq, Eq, Debug)]
pub enum VoteInsert {
    Stored { equivocation: bool },
    Duplicate,
    /// Same block hash under a different proposal hash than the bucket.
    ProposalMismatch,
}

impl VoteStore {
    pub fn insert(&mut self, vote: Vote) -> VoteInsert {
        let bucket_proposal =
            *self.bucket_proposal.entry(vote.block_hash).or_insert(vote.proposal_hash);
        if bucket_proposal != vote.proposal_hash {
            return VoteInsert::ProposalMismatch;
        }
        let bucket = self.buckets.entry(vote.block_hash).or_default();
        if bucket.contains_key(vote.signer()) {
            return VoteInsert::Duplicate;
        }
        let signer = vote.signer().clone();
        let equivocation = self.voters.contains(&signer)
            && !bucket.contains_key(&signer)
            && self.buckets.iter().any(|(h, b)| *h != vote.block_hash && b.contains_key(&signer));
        self.buckets.get_mut(&vote.block_hash).unwrap().insert(signer.clone(), vote);
        self.voters.insert(signer.clone());
        if equivocation {
            self.equivocators.insert(signer);
        }
        VoteInsert::Stored { equivocation }
    }

    pub fn bucket_sizes(&self) -> impl Iterator<Item = (&Hash, usize)> {
        self.buckets.iter().map(|(h, b)| (h, b.len()))
    }

    pub fn max_bucket(&self) -> usize {
        self.buckets.values().map(|b| b.len()).max().unwrap_or(0)
    }

    pub fn distinct_voters(&self) -> usize {
        self.voters.len()
    }

    pub fn bucket_votes(&self, hash: &Hash) -> Vec<Vote> {
        self.buckets.get(hash).map(|b| b.values().cloned().collect()).unwrap_or_default()
    }

    pub fn all_votes(&self) -> Vec<Vote> {
        self.buckets.values().flat_map(|b| b.values().cloned()).collect()
    }

    pub fn clear(&mut self) {
        self.buckets.clear();
        self.bucket_proposal.clear();
        self.voters.clear();
        // equivocator evidence survives round changes
    }
}

/// Reject condition: the most frequent hash plus every still-missing
/// vote cannot reach supermajority.
pub fn detect_reject(store: &VoteStore, n: usize) -> bool {
    let threshold = match supermajority_threshold(n) {
        Ok(t) => t,
        Err(_) => return false,
    };
    let missing = n.saturating_sub(store.distinct_voters());
    store.max_bucket() + missing < threshold
}

#[derive(Default, Clone, Debug)]
pub struct ConsensusMetrics {
    pub bad_vote: u64,
    pub bad_commit: u64,
    pub bad_reject: u64,
    pub duplicate_votes: u64,
    pub equivocations_observed: u64,
    pub dropped_future: u64,
    pub dropped_stale: u64,
    pub commit_forwards_sent: u64,
    pub missing_body: u64,
    pub stale_timers: u64,
    pub buffered: u64,
}

impl ConsensusMetrics {
    pub fn as_pairs(&self) -> Vec<(&'static str, u64)> {
        vec![
            ("bad_vote", self.bad_vote),
            ("bad_commit", self.bad_commit),
            ("bad_reject", self.bad_reject),
            ("duplicate_votes", self.duplicate_votes),
            ("equivocations_observed", self.equivocations_observed),
            ("dropped_future", self.dropped_future),
            ("dropped_stale", self.dropped_stale),
            ("commit_forwards_sent", self.commit_forwards_sent),
            ("missing_body", self.missing_body),
            ("stale_timers", self.stale_timers),
            ("buffered", self.buffered),
        ]
    }
}

pub struct PeerConsensusState {
    me: PeerId,
    secret: SecretKey,
    scheme: Arc<dyn SignatureScheme>,
    /// Canonical (sorted) peer list; shared network-wide.
    peers: Vec<PeerId>,
    threshold: usize,
    pub round: u64,
    pub phase: Phase,
    my_vote: Option<Vote>,
    my_block: Option<Block>,
    order: Option<Vec<PeerId>>,
    next_target_index: usize,
    vote_step_delay_us: u64,
    pub votes: VoteStore,
    pub last_commit: Option<CommitCarrier>,
    /// Supermajority reached and broadcast, but not yet applied locally
    /// (block body still missing).
    pending_commit: Option<CommitCarrier>,
    decided_hash: Option<Hash>,
    /// Messages for round+1, replayed after the round advances.
    buffered: Vec<Message>,
    pub metrics: ConsensusMetrics,
    pub alarms: Vec<&'static str>,
}

impl PeerConsensusState {
    pub fn new(
        me: PeerId,
        secret: SecretKey,
        scheme: Arc<dyn SignatureScheme>,
        peers: Vec<PeerId>,
        vote_step_delay_us: u64,
    ) -> Self {
        let peers = crate::quorum::canonical_peer_list(peers);
        let threshold = supermajority_threshold(peers.len()).expect("non-empty network");
        PeerConsensusState {
            me,
            secret,
            scheme,
            peers,
            threshold,
            round: 0,
            phase: Phase::Idle,
            my_vote: None,
            my_block: None,
            order: None,
            next_target_index: 0,
            vote_step_delay_us,
            votes: VoteStore::default(),
            last_commit: None,
            pending_commit: None,
            decided_hash: None,
            buffered: Vec::new(),
            metrics: ConsensusMetrics::default(),
            alarms: Vec::new(),
        }
    }

    pub fn me(&self) -> &PeerId {
        &self.me
    }

    pub fn peers(&self) -> &[PeerId] {
        &self.peers
    }

    pub fn current_order(&self) -> Option<&[PeerId]> {
        self.order.as_deref()
    }

    pub fn halted(&self) -> bool {
        self.phase == Phase::Halted
    }

    /// Drains buffered messages that are now for the current round.
    /// The host redelivers them through the normal entry points after
    /// applying any pending `CommitBlock` action.
    pub fn take_ready_buffered(&mut self) -> Vec<Message> {
        let (ready, keep): (Vec<_>, Vec<_>) =
            std::mem::take(&mut self.buffered).into_iter().partition(|m| {
                let r = match m {
                    Message::Proposal(p) => p.round,
                    Message::Vote(v) => v.round,
                    Message::Commit(c) => c.commit.round,
                    Message::Reject(r) => r.round,
                };
                r == self.round
            });
        self.buffered = keep;
        ready
    }

    pub fn on_proposal(&mut self, proposal: Proposal, world: &WorldState) -> Vec<Action> {
        if self.phase == Phase::Halted {
            return Vec::new();
        }
        if proposal.round > self.round {
            // future proposals are retained with no horizon (unlike
            // votes and commits): the ordering service emits exactly
            // one per round, and a peer that fell several rounds behind
            // needs them to resume voting — its votes are what trigger
            // the commit forwards that let it catch up at all
            self.metrics.buffered += 1;
            self.buffered.push(Message::Proposal(proposal));
            return Vec::new();
        }
        if proposal.round < self.round || self.phase != Phase::Idle {
            self.metrics.dropped_stale += 1;
            return Vec::new();
        }

        let (vp, _preview) = apply_proposal(world, &proposal, self.scheme.as_ref());
        let block = build_block(&vp, world);
        let payload = Vote::signing_payload(self.round, &vp.proposal_hash, &block.block_hash);
        let vote = Vote {
            round: self.round,
            proposal_hash: vp.proposal_hash,
            block_hash: block.block_hash,
            signature: Signature {
                bytes: self.scheme.sign(&self.secret, &payload),
                signer: self.me.clone(),
            },
        };
        let order = peer_order(&block.block_hash, &self.peers).expect("non-empty network");

        self.my_vote = Some(vote.clone());
        self.my_block = Some(block);
        self.order = Some(order);
        self.phase = Phase::Voting;
        self.next_target_index = 1 % self.peers.len();

        let mut actions = Vec::new();
        let first = self.order.as_ref().unwrap()[0].clone();
        if first == self.me {
            // first in own order: the vote is delivered to self
            self.store_vote(vote, &mut actions);
        } else {
            actions.push(Action::Send { to: first, msg: Message::Vote(vote) });
            // votes routed here before our proposal may already decide
            self.check_decision(&mut actions);
        }
        if self.phase == Phase::Voting {
            actions.push(Action::ArmTimer {
                delay_us: self.vote_step_delay_us,
                token: TimerToken { round: self.round },
            });
        }
        actions
    }

    pub fn on_timer(&mut self, token: TimerToken) -> Vec<Action> {
        if self.phase != Phase::Voting || token.round != self.round {
            self.metrics.stale_timers += 1;
            return Vec::new();
        }
        let order = self.order.as_ref().expect("voting phase has an order");
        let target = order[self.next_target_index].clone();
        self.next_target_index = (self.next_target_index + 1) % order.len();
        let vote = self.my_vote.clone().expect("voting phase has a vote");

        let mut actions = Vec::new();
        if target == self.me {
            self.store_vote(vote, &mut actions);
        } else {
            actions.push(Action::Send { to: target, msg: Message::Vote(vote) });
        }
        if self.phase == Phase::Voting {
            actions.push(Action::ArmTimer {
                delay_us: self.vote_step_delay_us,
                token: TimerToken { round: self.round },
            });
        }
        actions
    }

    pub fn on_vote(&mut self, vote: Vote, store: &BlockStore) -> Vec<Action> {
        if !self.peers.contains(vote.signer()) {
            self.metrics.bad_vote += 1;
            return Vec::new();
        }
        let payload = Vote::signing_payload(vote.round, &vote.proposal_hash, &vote.block_hash);
        if !verify_signature(self.scheme.as_ref(), &payload, &vote.signature) {
            self.metrics.bad_vote += 1;
            return Vec::new();
        }

        if vote.round < self.round {
            // commit forwarding: the voter missed a round that is
            // already decided, regardless of which hash it voted for
            if let Some((block, commit)) = store.get(vote.round) {
                self.metrics.commit_forwards_sent += 1;
                return vec![Action::Send {
                    to: vote.signer().clone(),
                    msg: Message::Commit(CommitCarrier {
                        commit: commit.clone(),
                        block: Some(block.clone()),
                    }),
                }];
            }
            self.metrics.dropped_stale += 1;
            return Vec::new();
        }
        if vote.round == self.round + 1 {
            self.metrics.buffered += 1;
            self.buffered.push(Message::Vote(vote));
            return Vec::new();
        }
        if vote.round > self.round {
            self.metrics.dropped_future += 1;
            return Vec::new();
        }
        if self.phase == Phase::Halted {
            return Vec::new();
        }
        let mut actions = Vec::new();
        self.store_vote(vote, &mut actions);
        actions
    }

    pub fn on_commit(&mut self, mut carrier: CommitCarrier, store: &BlockStore) -> Vec<Action> {
        if !verify_commit(&carrier.commit, &self.peers, self.scheme.as_ref()) {
            self.metrics.bad_commit += 1;
            return Vec::new();
        }
        if let Some(block) = &carrier.block {
            let payload = Block::hash_payload(
                &block.proposal_hash,
                &block.transactions,
                block.height,
                &block.prev_block_hash,
            );
            if block.block_hash != carrier.commit.block_hash || hash(&payload) != block.block_hash {
                // proof is fine, body is not: keep the proof only
                carrier.block = None;
            }
        }

        if carrier.commit.round < self.round || store.get(carrier.commit.round).is_some() {
            self.metrics.dropped_stale += 1;
            return Vec::new();
        }
        if self.phase == Phase::Halted {
            return Vec::new();
        }
        if carrier.commit.round == self.round + 1 {
            self.metrics.buffered += 1;
            self.buffered.push(Message::Commit(carrier));
            return Vec::new();
        }
        if carrier.commit.round > self.round {
            self.metrics.dropped_future += 1;
            return Vec::new();
        }

        let mut actions = Vec::new();
        self.apply_commit(carrier, &mut actions);
        actions
    }

    pub fn on_reject(&mut self, reject: RejectMessage) -> Vec<Action> {
        if self.phase == Phase::Halted {
            return Vec::new(); // single alarm per run
        }
        if reject.round < self.round {
            self.metrics.bad_reject += 1;
            return Vec::new();
        }
        if !verify_reject(&reject, &self.peers, self.scheme.as_ref()) {
            self.metrics.bad_reject += 1;
            return Vec::new();
        }
        self.halt_with_alarm()
    }

    fn halt_with_alarm(&mut self) -> Vec<Action> {
        self.phase = Phase::Halted;
        self.alarms.push("bft-violation");
        vec![Action::Alarm { reason: "bft-violation" }]
    }

    /// Record a current-round vote and run the decision check.
    fn store_vote(&mut self, vote: Vote, actions: &mut Vec<Action>) {
        match self.votes.insert(vote) {
            VoteInsert::Duplicate => {
                self.metrics.duplicate_votes += 1;
                return;
            }
            VoteInsert::ProposalMismatch => {
                self.metrics.bad_vote += 1;
                return;
            }
            VoteInsert::Stored { equivocation } => {
                if equivocation {
                    self.metrics.equivocations_observed += 1;
                }
            }
        }
        self.check_decision(actions);
    }

    /// Commit when some bucket reached supermajority; reject when no
    /// bucket can.
    fn check_decision(&mut self, actions: &mut Vec<Action>) {
        if self.phase == Phase::Halted {
            return;
        }
        if let Some(pending) = self.pending_commit.take() {
            // decided earlier without a body; a proposal may have
            // produced our matching block in the meantime
            self.apply_commit(pending, actions);
            return;
        }
        let winner = self
            .votes
            .bucket_sizes()
            .find(|(_, size)| *size >= self.threshold)
            .map(|(h, _)| *h);
        if let Some(hash) = winner {
            if self.decided_hash == Some(hash) {
                return;
            }
            self.decided_hash = Some(hash);
            let commit = CommitMessage::new(self.round, hash, self.votes.bucket_votes(&hash));
            let body = self
                .my_block
                .clone()
                .filter(|b| b.block_hash == hash);
            let carrier = CommitCarrier { commit, block: body };
            actions.push(Action::Broadcast(Message::Commit(carrier.clone())));
            self.apply_commit(carrier, actions);
            return;
        }
        if detect_reject(&self.votes, self.peers.len()) {
            let reject = RejectMessage::new(self.round, self.votes.all_votes());
            actions.push(Action::Broadcast(Message::Reject(reject)));
            actions.extend(self.halt_with_alarm());
        }
    }

    /// Apply a verified commit for the current round: emit the ledger
    /// append and advance to the next round.
    fn apply_commit(&mut self, carrier: CommitCarrier, actions: &mut Vec<Action>) {
        let block = if let Some(b) = self
            .my_block
            .clone()
            .filter(|b| b.block_hash == carrier.commit.block_hash)
        {
            b
        } else if let Some(b) = carrier.block.clone() {
            b
        } else {
            // nothing to append yet; keep the proof and retry once our
            // own proposal processing produces the block
            self.metrics.missing_body += 1;
            self.decided_hash = Some(carrier.commit.block_hash);
            self.pending_commit = Some(carrier);
            return;
        };

        actions.push(Action::CommitBlock { block: block.clone(), proof: carrier.commit.clone() });
        self.last_commit = Some(CommitCarrier { commit: carrier.commit, block: Some(block) });
        self.round += 1;
        self.phase = Phase::Idle;
        self.my_vote = None;
        self.my_block = None;
        self.order = None;
        self.next_target_index = 0;
        self.votes.clear();
        self.decided_hash = None;
        self.pending_commit = None;
    }
}
