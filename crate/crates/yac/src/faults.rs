//! Byzantine behavior strategies, selected by name at runtime.
//!
//! Each behavior sits behind [`FaultStrategy`] and hooks the simulator
//! at the network boundary: outbound messages of a faulty peer pass
//! through its strategy before delivery scheduling, and inbound
//! delivery can be suppressed. The state machine under test is never
//! modified; faults are injected purely at the edges.
//!
//! Strategies register in [`registry`]; `--behavior NAME[:ARG]` on the
//! CLI and `behavior=` keys in scenario files resolve through
//! [`build`].

use crate::consensus::Message;
use crate::crypto::{hash, SecretKey, SignatureScheme};
use crate::types::{Hash, PeerId, Signature, Vote};

pub struct FaultCtx<'a> {
    pub scheme: &'a dyn SignatureScheme,
    pub secret: &'a SecretKey,
    pub me: &'a PeerId,
    pub vote_step_delay_us: u64,
    pub now: u64,
}

/// One outbound delivery produced by a strategy: target, payload, and
/// extra latency to add on top of the network model.
pub type Outbound = (PeerId, Message, u64);

pub trait FaultStrategy: Send {
    fn name(&self) -> &'static str;

    /// Transform one outbound (target, message) pair. Honest behavior
    /// is the identity.
    fn outbound(&mut self, ctx: &FaultCtx<'_>, to: &PeerId, msg: Message) -> Vec<Outbound>;

    /// True when the peer no longer accepts inbound traffic.
    fn drops_inbound(&self, _now: u64) -> bool {
        false
    }
}

pub struct Honest;

impl FaultStrategy for Honest {
    fn name(&self) -> &'static str {
        "honest"
    }
    fn outbound(&mut self, _ctx: &FaultCtx<'_>, to: &PeerId, msg: Message) -> Vec<Outbound> {
        vec![(to.clone(), msg, 0)]
    }
}

/// Sends nothing at all.
pub struct Silent;

impl FaultStrategy for Silent {
    fn name(&self) -> &'static str {
        "silent"
    }
    fn outbound(&mut self, _ctx: &FaultCtx<'_>, _to: &PeerId, _msg: Message) -> Vec<Outbound> {
        Vec::new()
    }
}

fn resign_vote(ctx: &FaultCtx<'_>, vote: &Vote, block_hash: Hash) -> Vote {
    let payload = Vote::signing_payload(vote.round, &vote.proposal_hash, &block_hash);
    Vote {
        round: vote.round,
        proposal_hash: vote.proposal_hash,
        block_hash,
        signature: Signature {
            bytes: ctx.scheme.sign(ctx.secret, &payload),
            signer: ctx.me.clone(),
        },
    }
}

/// Votes a distinct fabricated block hash to every target (the hash is
/// a deterministic function of the target, so a given target sees a
/// consistent story while any two targets see conflicting votes).
pub struct Equivocator;

impl FaultStrategy for Equivocator {
    fn name(&self) -> &'static str {
        "equivocator"
    }
    fn outbound(&mut self, ctx: &FaultCtx<'_>, to: &PeerId, msg: Message) -> Vec<Outbound> {
        match msg {
            Message::Vote(vote) => {
                let mut payload = vote.block_hash.0.to_vec();
                payload.extend_from_slice(&to.public_key);
                payload.extend_from_slice(&ctx.me.public_key);
                let fabricated = hash(&payload);
                vec![(to.clone(), Message::Vote(resign_vote(ctx, &vote, fabricated)), 0)]
            }
            other => vec![(to.clone(), other, 0)],
        }
    }
}

/// Votes one fabricated hash, the same to every target: an
/// equivocation-free validator that simply disagrees with everyone.
/// Four of these at n=4 drive the network into the reject condition.
pub struct Divergent;

impl FaultStrategy for Divergent {
    fn name(&self) -> &'static str {
        "divergent"
    }
    fn outbound(&mut self, ctx: &FaultCtx<'_>, to: &PeerId, msg: Message) -> Vec<Outbound> {
        match msg {
            Message::Vote(vote) => {
                let mut payload = vote.block_hash.0.to_vec();
                payload.extend_from_slice(&ctx.me.public_key);
                let fabricated = hash(&payload);
                vec![(to.clone(), Message::Vote(resign_vote(ctx, &vote, fabricated)), 0)]
            }
            other => vec![(to.clone(), other, 0)],
        }
    }
}

/// Holds every outbound message for a number of vote-step periods.
pub struct Delayed {
    pub periods: u64,
}

impl FaultStrategy for Delayed {
    fn name(&self) -> &'static str {
        "delayed"
    }
    fn outbound(&mut self, ctx: &FaultCtx<'_>, to: &PeerId, msg: Message) -> Vec<Outbound> {
        vec![(to.clone(), msg, self.periods * ctx.vote_step_delay_us)]
    }
}

/// Fail-stop at a fixed simulation time.
pub struct CrashAt {
    pub at_us: u64,
}

impl FaultStrategy for CrashAt {
    fn name(&self) -> &'static str {
        "crash_at"
    }
    fn outbound(&mut self, ctx: &FaultCtx<'_>, to: &PeerId, msg: Message) -> Vec<Outbound> {
        if ctx.now >= self.at_us {
            Vec::new()
        } else {
            vec![(to.clone(), msg, 0)]
        }
    }
    fn drops_inbound(&self, now: u64) -> bool {
        now >= self.at_us
    }
}

pub struct StrategySpec {
    pub name: &'static str,
    pub help: &'static str,
    pub build: fn(Option<&str>) -> Result<Box<dyn FaultStrategy>, String>,
}

fn no_arg(name: &str, arg: Option<&str>) -> Result<(), String> {
    match arg {
        None => Ok(()),
        Some(a) => Err(format!("behavior '{name}' takes no argument, got '{a}'")),
    }
}

pub fn registry() -> &'static [StrategySpec] {
    &[
        StrategySpec {
            name: "honest",
            help: "follow the protocol",
            build: |arg| {
                no_arg("honest", arg)?;
                Ok(Box::new(Honest))
            },
        },
        StrategySpec {
            name: "silent",
            help: "never send anything",
            build: |arg| {
                no_arg("silent", arg)?;
                Ok(Box::new(Silent))
            },
        },
        StrategySpec {
            name: "equivocator",
            help: "vote distinct fabricated hashes to different targets",
            build: |arg| {
                no_arg("equivocator", arg)?;
                Ok(Box::new(Equivocator))
            },
        },
        StrategySpec {
            name: "divergent",
            help: "vote one fabricated hash, the same to every target",
            build: |arg| {
                no_arg("divergent", arg)?;
                Ok(Box::new(Divergent))
            },
        },
        StrategySpec {
            name: "delayed",
            help: "hold all messages for K vote-step periods (delayed:K, default 3)",
            build: |arg| {
                let periods = match arg {
                    None => 3,
                    Some(a) => a.parse().map_err(|_| format!("delayed: bad period count '{a}'"))?,
                };
                Ok(Box::new(Delayed { periods }))
            },
        },
        StrategySpec {
            name: "crash_at",
            help: "fail-stop at time T microseconds (crash_at:T)",
            build: |arg| {
                let at_us = match arg {
                    None => return Err("crash_at requires a time, e.g. crash_at:2000000".into()),
                    Some(a) => a.parse().map_err(|_| format!("crash_at: bad time '{a}'"))?,
                };
                Ok(Box::new(CrashAt { at_us }))
            },
        },
    ]
}

/// Resolve `NAME` or `NAME:ARG` against the registry.
pub fn build(spec: &str) -> Result<Box<dyn FaultStrategy>, String> {
    let (name, arg) = match spec.split_once(':') {
        Some((n, a)) => (n, Some(a)),
        None => (spec, None),
    };
    for entry in registry() {
        if entry.name == name {
            return (entry.build)(arg);
        }
    }
    let known: Vec<_> = registry().iter().map(|s| s.name).collect();
    Err(format!("unknown behavior '{name}' (known: {})", known.join(", ")))
}
