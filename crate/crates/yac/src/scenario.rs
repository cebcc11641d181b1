//! Experiment description: every knob a simulation run accepts, plus
//! the flat `key=value` file format and the canned scenario library.

use std::collections::BTreeMap;
use std::fmt;

#[derive(Clone, Debug, PartialEq)]
pub struct PartitionSpec {
    /// Peer indices (canonical order) on each side of the cut.
    pub group_a: Vec<usize>,
    pub group_b: Vec<usize>,
    pub start_us: u64,
    pub end_us: u64,
}

impl PartitionSpec {
    pub fn severs(&self, from: usize, to: usize, at_us: u64) -> bool {
        if at_us < self.start_us || at_us >= self.end_us {
            return false;
        }
        (self.group_a.contains(&from) && self.group_b.contains(&to))
            || (self.group_b.contains(&from) && self.group_a.contains(&to))
    }

    /// `A|B@START:END` with comma-separated peer indices per side.
    pub fn parse(s: &str) -> Result<Self, String> {
        let err = || format!("bad partition spec '{s}', expected A|B@START_US:END_US");
        let (groups, window) = s.split_once('@').ok_or_else(err)?;
        let (a, b) = groups.split_once('|').ok_or_else(err)?;
        let parse_group = |g: &str| -> Result<Vec<usize>, String> {
            g.split(',')
                .filter(|p| !p.is_empty())
                .map(|p| p.trim().parse().map_err(|_| err()))
                .collect()
        };
        let (start, end) = window.split_once(':').ok_or_else(err)?;
        let spec = PartitionSpec {
            group_a: parse_group(a)?,
            group_b: parse_group(b)?,
            start_us: start.trim().parse().map_err(|_| err())?,
            end_us: end.trim().parse().map_err(|_| err())?,
        };
        if spec.start_us >= spec.end_us || spec.group_a.is_empty() || spec.group_b.is_empty() {
            return Err(err());
        }
        Ok(spec)
    }
}

impl fmt::Display for PartitionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |g: &[usize]| g.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",");
        write!(
            f,
            "{}|{}@{}:{}",
            join(&self.group_a),
            join(&self.group_b),
            self.start_us,
            self.end_us
        )
    }
}

#[derive(Clone, Debug)]
pub struct ScenarioConfig {
    pub n_peers: usize,
    pub n_byzantine: usize,
    /// Behavior applied to the `n_byzantine` highest peer indices.
    pub behavior: String,
    /// Per-peer behavior overrides by canonical index.
    pub behavior_overrides: BTreeMap<usize, String>,
    pub vote_step_delay_us: u64,
    pub batch_limit: usize,
    pub batch_timeout_us: u64,
    /// Client transactions per simulated second.
    pub tx_rate: f64,
    pub duration_us: u64,
    /// Fraction of the duration during which clients submit; the rest
    /// drains in-flight rounds.
    pub submit_window: f64,
    pub latency_us: u64,
    pub jitter_us: u64,
    /// Per-link spread: each directed link gets a fixed extra base
    /// latency drawn once from [0, spread] at setup (desk-scale stand-in
    /// for geographically scattered peers).
    pub link_spread_us: u64,
    pub drop_rate: f64,
    pub partitions: Vec<PartitionSpec>,
    /// Receiver-side processing cost per message.
    pub proc_base_us: u64,
    /// Additional processing cost per signature carried by a message.
    pub proc_per_sig_us: u64,
    /// The `slow_peer_count` lowest peer indices pay `slow_factor` times
    /// the processing cost (a stand-in for weak hardware in the fleet).
    pub slow_peer_count: usize,
    pub slow_factor: u64,
    pub n_accounts: usize,
    pub initial_balance: u64,
    pub seed: u64,
    pub trials: usize,
    pub record_trace: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            n_peers: 4,
            n_byzantine: 0,
            behavior: "honest".into(),
            behavior_overrides: BTreeMap::new(),
            vote_step_delay_us: 100_000,
            batch_limit: 10,
            batch_timeout_us: 100_000,
            tx_rate: 50.0,
            duration_us: 10_000_000,
            submit_window: 0.6,
            latency_us: 10_000,
            jitter_us: 2_000,
            link_spread_us: 0,
            drop_rate: 0.0,
            partitions: Vec::new(),
            proc_base_us: 5,
            proc_per_sig_us: 25,
            slow_peer_count: 0,
            slow_factor: 1,
            n_accounts: 8,
            initial_balance: 1_000_000,
            seed: 1,
            trials: 1,
            record_trace: false,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.n_peers == 0 {
            return Err("n_peers must be at least 1".into());
        }
        if self.n_byzantine > self.n_peers {
            return Err("n_byzantine may not exceed n_peers".into());
        }
        if !(0.0..1.0).contains(&self.drop_rate) {
            return Err("drop_rate must be in [0, 1)".into());
        }
        if self.batch_limit == 0 {
            return Err("batch_limit must be positive".into());
        }
        if self.trials == 0 {
            return Err("trials must be positive".into());
        }
        if self.slow_peer_count > self.n_peers {
            return Err("slow_peer_count may not exceed n_peers".into());
        }
        if self.slow_factor == 0 {
            return Err("slow_factor must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.submit_window) {
            return Err("submit_window must be in [0, 1]".into());
        }
        if self.tx_rate < 0.0 {
            return Err("tx_rate must be non-negative".into());
        }
        crate::faults::build(&self.behavior).map_err(|e| e.to_string())?;
        for (idx, b) in &self.behavior_overrides {
            if *idx >= self.n_peers {
                return Err(format!("behavior override index {idx} out of range"));
            }
            crate::faults::build(b)?;
        }
        for p in &self.partitions {
            for idx in p.group_a.iter().chain(&p.group_b) {
                if *idx >= self.n_peers {
                    return Err(format!("partition peer index {idx} out of range"));
                }
            }
        }
        Ok(())
    }

    /// Behavior spec string for one peer index.
    pub fn behavior_for(&self, idx: usize) -> &str {
        if let Some(b) = self.behavior_overrides.get(&idx) {
            return b;
        }
        if idx >= self.n_peers - self.n_byzantine {
            &self.behavior
        } else {
            "honest"
        }
    }

    /// Parses the flat key=value scenario file format. Keys mirror the
    /// CLI flags; `#` starts a comment; `partition=` may repeat.
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut cfg = ScenarioConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key=value", lineno + 1))?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |what: &str| format!("line {}: bad {what} '{value}'", lineno + 1);
            match key {
                "peers" => cfg.n_peers = value.parse().map_err(|_| bad("peers"))?,
                "byzantine" => cfg.n_byzantine = value.parse().map_err(|_| bad("byzantine"))?,
                "behavior" => cfg.behavior = value.to_string(),
                "vote_delay_ms" => {
                    cfg.vote_step_delay_us =
                        value.parse::<u64>().map_err(|_| bad("vote_delay_ms"))? * 1000
                }
                "vote_delay_us" => {
                    cfg.vote_step_delay_us = value.parse().map_err(|_| bad("vote_delay_us"))?
                }
                "batch_limit" => cfg.batch_limit = value.parse().map_err(|_| bad("batch_limit"))?,
                "batch_timeout_ms" => {
                    cfg.batch_timeout_us =
                        value.parse::<u64>().map_err(|_| bad("batch_timeout_ms"))? * 1000
                }
                "tx_rate" => cfg.tx_rate = value.parse().map_err(|_| bad("tx_rate"))?,
                "duration_s" => {
                    cfg.duration_us =
                        (value.parse::<f64>().map_err(|_| bad("duration_s"))? * 1e6) as u64
                }
                "submit_window" => {
                    cfg.submit_window = value.parse().map_err(|_| bad("submit_window"))?
                }
                "latency_us" => cfg.latency_us = value.parse().map_err(|_| bad("latency_us"))?,
                "jitter_us" => cfg.jitter_us = value.parse().map_err(|_| bad("jitter_us"))?,
                "link_spread_us" => {
                    cfg.link_spread_us = value.parse().map_err(|_| bad("link_spread_us"))?
                }
                "drop_rate" => cfg.drop_rate = value.parse().map_err(|_| bad("drop_rate"))?,
                "partition" => cfg.partitions.push(PartitionSpec::parse(value)?),
                "proc_base_us" => {
                    cfg.proc_base_us = value.parse().map_err(|_| bad("proc_base_us"))?
                }
                "proc_per_sig_us" => {
                    cfg.proc_per_sig_us = value.parse().map_err(|_| bad("proc_per_sig_us"))?
                }
                "slow_peers" => {
                    cfg.slow_peer_count = value.parse().map_err(|_| bad("slow_peers"))?
                }
                "slow_factor" => {
                    cfg.slow_factor = value.parse().map_err(|_| bad("slow_factor"))?
                }
                "accounts" => cfg.n_accounts = value.parse().map_err(|_| bad("accounts"))?,
                "initial_balance" => {
                    cfg.initial_balance = value.parse().map_err(|_| bad("initial_balance"))?
                }
                "seed" => cfg.seed = value.parse().map_err(|_| bad("seed"))?,
                "trials" => cfg.trials = value.parse().map_err(|_| bad("trials"))?,
                "trace" => cfg.record_trace = value.parse().map_err(|_| bad("trace"))?,
                k if k.starts_with("behavior.") => {
                    let idx: usize =
                        k["behavior.".len()..].parse().map_err(|_| bad("behavior index"))?;
                    cfg.behavior_overrides.insert(idx, value.to_string());
                }
                _ => return Err(format!("line {}: unknown key '{key}'", lineno + 1)),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Canned scenarios demonstrating the protocol's signature situations.
pub fn canned(name: &str) -> Option<ScenarioConfig> {
    match name {
        // one quiet fault-free round after another
        "happy-4" => Some(ScenarioConfig {
            n_peers: 4,
            tx_rate: 20.0,
            duration_us: 3_000_000,
            record_trace: true,
            ..ScenarioConfig::default()
        }),
        // a single round with one peer cut off from everybody else for
        // its whole vote exchange; after the partition heals, the cut
        // peer's next vote step earns it the stored commit (exactly one
        // commit forward) and it catches up
        "bob-partition" => Some(ScenarioConfig {
            n_peers: 4,
            tx_rate: 2.0,
            submit_window: 0.25, // one transaction at t=0, nothing after
            batch_limit: 1,
            batch_timeout_us: 1_000,
            duration_us: 2_000_000,
            latency_us: 10_000,
            jitter_us: 0,
            vote_step_delay_us: 150_000,
            partitions: vec![PartitionSpec {
                group_a: vec![1],
                group_b: vec![0, 2, 3],
                start_us: 1_000,
                end_us: 500_000,
            }],
            record_trace: true,
            ..ScenarioConfig::default()
        }),
        // every validator honestly votes a different hash: the network
        // detects the reject condition and raises the alarm everywhere
        "reject-divergence" => Some(ScenarioConfig {
            n_peers: 4,
            n_byzantine: 4,
            behavior: "divergent".into(),
            tx_rate: 20.0,
            duration_us: 3_000_000,
            record_trace: true,
            ..ScenarioConfig::default()
        }),
        _ => None,
    }
}

pub fn canned_names() -> &'static [&'static str] {
    &["happy-4", "bob-partition", "reject-divergence"]
}
