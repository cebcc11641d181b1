//! Parameter sweeps over (network size, vote-step delay) with trial
//! aggregation into CSV, reproducing the vote-step-delay experiment
//! shape at desk scale.

use crate::scenario::ScenarioConfig;
use crate::sim;
use rayon::prelude::*;
use std::fmt::Write as _;

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub peer_counts: Vec<usize>,
    pub delays_ms: Vec<u64>,
    pub trials: usize,
    pub seed_base: u64,
    /// Template for everything except n_peers, vote_step_delay_us, seed.
    pub base: ScenarioConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            peer_counts: vec![4, 16, 28, 64],
            delays_ms: vec![1, 20, 100, 500],
            trials: 10,
            seed_base: 1000,
            base: ScenarioConfig {
                tx_rate: 40.0,
                duration_us: 20_000_000,
                latency_us: 50_000,
                jitter_us: 10_000,
                link_spread_us: 70_000,
                drop_rate: 0.05,
                batch_limit: 10,
                batch_timeout_us: 100_000,
                proc_base_us: 10,
                proc_per_sig_us: 25,
                slow_factor: 3,
                ..ScenarioConfig::default()
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepCell {
    pub n_peers: usize,
    pub vote_step_delay_ms: u64,
    pub trial_count: usize,
    /// Lower median over trials of committed proposals per second.
    pub median_throughput: f64,
    /// Total over trials of peers finishing >1 block behind the max.
    pub stalled_peers_total: u64,
    pub seed_base: u64,
}

/// Lower median: element at index (len-1)/2 of the sorted values.
pub fn lower_median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(|a, b| a.partial_cmp(b).expect("throughput is finite"));
    values[(values.len() - 1) / 2]
}

fn cell_scenario(cfg: &SweepConfig, n: usize, delay_ms: u64, trial: usize) -> ScenarioConfig {
    ScenarioConfig {
        n_peers: n,
        vote_step_delay_us: delay_ms * 1000,
        // a sixteenth of the fleet runs on weak hardware (rounded down,
        // so the smallest networks are homogeneous)
        slow_peer_count: n / 16,
        seed: cfg.seed_base + trial as u64,
        record_trace: false,
        trials: 1,
        ..cfg.base.clone()
    }
}

/// Runs the full grid; trials run in parallel, aggregation order is
/// fixed, so the output is deterministic for a given config.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepCell>, String> {
    let mut jobs = Vec::new();
    for &n in &cfg.peer_counts {
        for &delay_ms in &cfg.delays_ms {
            for trial in 0..cfg.trials {
                jobs.push((n, delay_ms, trial));
            }
        }
    }
    let results: Vec<Result<(f64, u64), String>> = jobs
        .par_iter()
        .map(|&(n, delay_ms, trial)| {
            let scenario = cell_scenario(cfg, n, delay_ms, trial);
            let run = sim::run(&scenario)?;
            Ok((run.throughput(), run.stalled_peers() as u64))
        })
        .collect();

    let mut cells = Vec::new();
    let mut it = jobs.iter().zip(results);
    for &n in &cfg.peer_counts {
        for &delay_ms in &cfg.delays_ms {
            let mut throughputs = Vec::with_capacity(cfg.trials);
            let mut stalled_total = 0u64;
            for _ in 0..cfg.trials {
                let (_, result) = it.next().expect("one result per job");
                let (tp, stalled) = result?;
                throughputs.push(tp);
                stalled_total += stalled;
            }
            cells.push(SweepCell {
                n_peers: n,
                vote_step_delay_ms: delay_ms,
                trial_count: cfg.trials,
                median_throughput: lower_median(&mut throughputs),
                stalled_peers_total: stalled_total,
                seed_base: cfg.seed_base,
            });
        }
    }
    Ok(cells)
}

/// RFC 4180 CSV with a header row, LF line endings, fixed decimals.
pub fn to_csv(cells: &[SweepCell]) -> String {
    let mut out = String::from(
        "n_peers,vote_step_delay_ms,trial_count,median_throughput,stalled_peers_total,seed_base\n",
    );
    for c in cells {
        let _ = writeln!(
            out,
            "{},{},{},{:.3},{},{}",
            c.n_peers,
            c.vote_step_delay_ms,
            c.trial_count,
            c.median_throughput,
            c.stalled_peers_total,
            c.seed_base
        );
    }
    out
}
