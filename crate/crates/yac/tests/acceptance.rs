//! End-to-end acceptance checks, one test per numbered criterion:
//!
//! 1. randomized safety suite: no divergent commits
//! 2. honest round spread stays within one at quiescent points
//! 3. liveness: healed partitions recover every transaction
//! 4. reject detection matches an exhaustive completion oracle
//! 5. supermajority threshold values
//! 6. bob-partition scenario commits via exactly one forwarded commit
//! 7. vote-step-delay sweep trends
//! 8. permutation uniformity (chi-square), purity, bijection
//! 9. byte-identical traces and CSV for repeated (scenario, seed)
//!
//! Each test prints `criterion N (...): pass` on success; the harness
//! line per test doubles as the pass/fail record.

use std::collections::{BTreeMap, HashMap};
use std::sync::LazyLock;
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use yac::consensus::{detect_reject, VoteStore};
use yac::crypto::SimScheme;
use yac::permutation::peer_order;
use yac::quorum::supermajority_threshold;
use yac::scenario::{canned, PartitionSpec, ScenarioConfig};
use yac::sim;
use yac::sweep::{run_sweep, to_csv, SweepCell, SweepConfig};
use yac::types::{Hash, PeerId, Signature, Vote};

fn random_behavior(rng: &mut ChaCha8Rng) -> String {
    match rng.random_range(0..3u8) {
        0 => "silent".to_string(),
        1 => "equivocator".to_string(),
        _ => format!("delayed:{}", rng.random_range(1..=3u8)),
    }
}

/// Randomized scenario with `f = (n-1)/3` Byzantine peers of mixed
/// behaviors; no drops or partitions.
fn safety_scenario(n: usize, i: u64) -> ScenarioConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5AFE ^ ((n as u64) << 32) ^ i);
    let f = (n - 1) / 3;
    let mut overrides = BTreeMap::new();
    for idx in (n - f)..n {
        overrides.insert(idx, random_behavior(&mut rng));
    }
    ScenarioConfig {
        n_peers: n,
        n_byzantine: f,
        behavior: "silent".into(),
        behavior_overrides: overrides,
        vote_step_delay_us: [1_000, 10_000, 50_000, 100_000][rng.random_range(0..4)],
        tx_rate: 10.0,
        duration_us: 3_000_000,
        submit_window: 0.5,
        latency_us: rng.random_range(5_000..=20_000),
        jitter_us: rng.random_range(0..=5_000),
        link_spread_us: rng.random_range(0..=10_000),
        drop_rate: 0.0,
        seed: i,
        ..ScenarioConfig::default()
    }
}

struct SafetySuite {
    runs: usize,
    divergent: usize,
    spread_violations: usize,
    elapsed_s: f64,
}

/// Criteria 1 and 2 are judged over the same runs, so the suite is
/// computed once and shared.
static SAFETY_SUITE: LazyLock<SafetySuite> = LazyLock::new(|| {
    let start = Instant::now();
    let mut suite =
        SafetySuite { runs: 0, divergent: 0, spread_violations: 0, elapsed_s: 0.0 };
    for &n in &[4usize, 7, 10] {
        for i in 0..1_000u64 {
            let r = sim::run(&safety_scenario(n, i)).expect("valid scenario");
            suite.runs += 1;
            if !r.safety_ok() {
                suite.divergent += 1;
            }
            if r.quiescent_spread_max > 1 {
                suite.spread_violations += 1;
            }
        }
    }
    suite.elapsed_s = start.elapsed().as_secs_f64();
    suite
});

#[test]
fn criterion_1_safety_no_divergent_commits() {
    let s = &*SAFETY_SUITE;
    assert_eq!(s.runs, 3_000);
    assert_eq!(s.divergent, 0, "honest peers committed different hashes for one round");
    assert!(s.elapsed_s < 300.0, "safety suite took {:.1}s, budget 300s", s.elapsed_s);
    println!("criterion 1 (safety, {} runs in {:.1}s): pass", s.runs, s.elapsed_s);
}

#[test]
fn criterion_2_honest_round_spread_within_one() {
    let s = &*SAFETY_SUITE;
    assert_eq!(
        s.spread_violations, 0,
        "honest peers more than one round apart at a quiescent point"
    );
    println!("criterion 2 (round lag, {} runs): pass", s.runs);
}

/// Randomized scenario with at most `f` Byzantine peers and one random
/// partition that heals before the end of the run; no drops otherwise.
fn liveness_scenario(i: u64) -> ScenarioConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(0x11FE ^ i);
    let n = [4usize, 7, 10][rng.random_range(0..3)];
    let f = rng.random_range(0..=(n - 1) / 3);
    let mut overrides = BTreeMap::new();
    for idx in (n - f)..n {
        overrides.insert(idx, random_behavior(&mut rng));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    for j in (1..n).rev() {
        idx.swap(j, rng.random_range(0..=j));
    }
    let cut = rng.random_range(1..n);
    let start_us = rng.random_range(200_000..800_000);
    let end_us = start_us + rng.random_range(400_000..1_200_000);
    ScenarioConfig {
        n_peers: n,
        n_byzantine: f,
        behavior: "silent".into(),
        behavior_overrides: overrides,
        vote_step_delay_us: [5_000, 20_000, 50_000][rng.random_range(0..3)],
        tx_rate: 10.0,
        duration_us: 5_000_000,
        submit_window: 0.4,
        latency_us: rng.random_range(5_000..=15_000),
        jitter_us: rng.random_range(0..=3_000),
        drop_rate: 0.0,
        partitions: vec![PartitionSpec {
            group_a: idx[..cut].to_vec(),
            group_b: idx[cut..].to_vec(),
            start_us,
            end_us,
        }],
        seed: i,
        ..ScenarioConfig::default()
    }
}

#[test]
fn criterion_3_liveness_every_transaction_commits() {
    let start = Instant::now();
    for i in 0..500u64 {
        let r = sim::run(&liveness_scenario(i)).expect("valid scenario");
        for id in &r.submitted_tx_ids {
            assert!(
                r.honest_committed_tx_ids.contains(id),
                "run {i}: submitted transaction missing from every honest chain"
            );
        }
        let heights: Vec<u64> =
            r.peers.iter().filter(|p| p.honest).map(|p| p.height).collect();
        assert!(
            heights.windows(2).all(|w| w[0] == w[1]),
            "run {i}: honest final heights differ: {heights:?}"
        );
        assert!(r.safety_ok(), "run {i}: divergent commits");
    }
    println!(
        "criterion 3 (liveness, 500 runs in {:.1}s): pass",
        start.elapsed().as_secs_f64()
    );
}

/// Tries to extend the current vote counts with `missing` further votes
/// (each for any hash in the universe) so that some bucket reaches the
/// threshold. Fresh hashes outside the universe never help: a new hash
/// collects at most `missing` votes, which any existing bucket also
/// gains, and the universe always has room for every assignment since
/// distinct-used + missing <= n.
fn completion_reaches_threshold(
    counts: &mut [usize],
    missing: usize,
    threshold: usize,
) -> bool {
    if counts.iter().any(|&c| c >= threshold) {
        return true;
    }
    if missing == 0 {
        return false;
    }
    for h in 0..counts.len() {
        counts[h] += 1;
        let hit = completion_reaches_threshold(counts, missing - 1, threshold);
        counts[h] -= 1;
        if hit {
            return true;
        }
    }
    false
}

#[test]
fn criterion_4_reject_matches_exhaustive_oracle() {
    let start = Instant::now();
    let mut checked = 0u64;
    for n in 4usize..=7 {
        let threshold = supermajority_threshold(n).unwrap();
        let peers: Vec<PeerId> = (0..n)
            .map(|i| PeerId { public_key: [i as u8; 32], display_name: format!("v{i}") })
            .collect();
        let hashes: Vec<Hash> = (1..=n).map(|k| Hash([k as u8; 32])).collect();
        // every vote-store configuration: each peer is absent (0) or
        // votes one of n hashes (1..=n)
        let total = (n as u64 + 1).pow(n as u32);
        for config in 0..total {
            let mut store = VoteStore::default();
            let mut counts = vec![0usize; n];
            let mut rem = config;
            for peer in &peers {
                let choice = (rem % (n as u64 + 1)) as usize;
                rem /= n as u64 + 1;
                if choice > 0 {
                    counts[choice - 1] += 1;
                    store.insert(Vote {
                        round: 0,
                        proposal_hash: hashes[choice - 1],
                        block_hash: hashes[choice - 1],
                        signature: Signature { bytes: Vec::new(), signer: peer.clone() },
                    });
                }
            }
            let missing = n - store.distinct_voters();
            let want = !completion_reaches_threshold(&mut counts, missing, threshold);
            let got = detect_reject(&store, n);
            assert_eq!(got, want, "n={n} config={config} counts={counts:?}");
            checked += 1;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "oracle comparison took {elapsed:.1}s, budget 60s");
    println!("criterion 4 (reject oracle, {checked} configurations in {elapsed:.1}s): pass");
}

#[test]
fn criterion_5_supermajority_threshold_values() {
    assert_eq!(supermajority_threshold(4).unwrap(), 3);
    for f in 0usize..=20 {
        assert_eq!(supermajority_threshold(3 * f + 1).unwrap(), 2 * f + 1);
    }
    println!("criterion 5 (threshold values): pass");
}

#[test]
fn criterion_6_bob_partition_single_commit_forward() {
    let cfg = canned("bob-partition").expect("canned scenario exists");
    let r = sim::run(&cfg).expect("scenario runs");
    let height = r.peers[0].height;
    assert!(height >= 1, "no block committed");
    for p in &r.peers {
        assert_eq!(p.height, height, "peer {} ended at a different height", p.name);
    }
    let top: Vec<Hash> =
        r.stores.iter().map(|s| s.iter().last().expect("top block").0.block_hash).collect();
    assert!(top.windows(2).all(|w| w[0] == w[1]), "top block hashes differ");

    // the cut peer (canonical index 1) is rescued by exactly one
    // forwarded commit
    let bob = &r.peers[1].name;
    let trace = r.trace.as_ref().expect("trace recorded");
    let forwards: Vec<&str> =
        trace.lines().filter(|l| l.contains("forward-commit to=")).collect();
    assert_eq!(forwards.len(), 1, "expected exactly one commit forward: {forwards:?}");
    assert!(
        forwards[0].contains(&format!("to={bob}")),
        "forward went to the wrong peer: {}",
        forwards[0]
    );
    println!("criterion 6 (bob-partition): pass");
}

#[test]
fn criterion_7_vote_step_delay_trends() {
    let start = Instant::now();
    let grid = SweepConfig::default();
    let cells = run_sweep(&grid).expect("sweep runs");
    let cell = |cells: &[SweepCell], n: usize, d: u64| -> SweepCell {
        cells
            .iter()
            .find(|c| c.n_peers == n && c.vote_step_delay_ms == d)
            .expect("cell present")
            .clone()
    };

    // (a) small network: the shortest delay is at least as good
    let fast = cell(&cells, 4, 1).median_throughput;
    let slow = cell(&cells, 4, 500).median_throughput;
    assert!(fast >= slow, "n=4 throughput {fast} at 1ms vs {slow} at 500ms");

    // (b) large network: sub-latency delay strands strictly more peers
    let stalled_fast = cell(&cells, 64, 1).stalled_peers_total;
    let stalled_slow = cell(&cells, 64, 500).stalled_peers_total;
    assert!(
        stalled_fast > stalled_slow,
        "n=64 stalled {stalled_fast} at 1ms vs {stalled_slow} at 500ms"
    );

    // (c) fault-free, drop-free: throughput non-increasing in delay
    let clean = SweepConfig {
        trials: 3,
        base: ScenarioConfig {
            jitter_us: 0,
            drop_rate: 0.0,
            proc_base_us: 0,
            proc_per_sig_us: 0,
            slow_factor: 1,
            ..grid.base.clone()
        },
        ..grid.clone()
    };
    let clean_cells = run_sweep(&clean).expect("clean sweep runs");
    let mut delays = clean.delays_ms.clone();
    delays.sort_unstable();
    for &n in &clean.peer_counts {
        let thr: Vec<f64> =
            delays.iter().map(|&d| cell(&clean_cells, n, d).median_throughput).collect();
        for w in thr.windows(2) {
            assert!(w[0] + 1e-9 >= w[1], "n={n}: throughput increased with delay: {thr:?}");
        }
    }

    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 1_800.0, "sweep took {elapsed:.1}s, budget 1800s");
    println!("criterion 7 (delay trends, {elapsed:.1}s): pass");
}

#[test]
fn criterion_8_permutation_uniformity() {
    let mut scheme = SimScheme::new();
    let mut peers: Vec<PeerId> =
        (0..4).map(|i| scheme.generate_from_seed(b"chi", &format!("p{i}")).peer).collect();
    peers.sort();
    let pos: HashMap<&PeerId, usize> = peers.iter().enumerate().map(|(i, p)| (p, i)).collect();

    let mut counts = [0u64; 24];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..10_000 {
        let h = Hash(rng.random());
        let order = peer_order(&h, &peers).unwrap();
        // purity: same input, same output
        assert_eq!(peer_order(&h, &peers).unwrap(), order);
        // bijection: the order is a permutation of the peer set
        let mut sorted = order.clone();
        sorted.sort();
        assert_eq!(sorted, peers);
        // permutation index via the factorial number system
        let mut avail: Vec<usize> = (0..4).collect();
        let mut code = 0usize;
        for (k, p) in order.iter().enumerate() {
            let r = avail.iter().position(|&a| a == pos[p]).unwrap();
            avail.remove(r);
            code = code * (4 - k) + r;
        }
        counts[code] += 1;
    }

    let expected = 10_000.0 / 24.0;
    let chi2: f64 = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum();
    // 0.999 quantile of chi-square with 23 degrees of freedom
    assert!(chi2 < 49.73, "chi-square {chi2:.2} exceeds 49.73");
    println!("criterion 8 (permutation uniformity, chi2={chi2:.2}): pass");
}

#[test]
fn criterion_9_deterministic_trace_and_csv() {
    for name in ["happy-4", "bob-partition", "reject-divergence"] {
        let cfg = canned(name).unwrap();
        let a = sim::run(&cfg).unwrap();
        let b = sim::run(&cfg).unwrap();
        assert!(a.trace.is_some(), "{name}: no trace recorded");
        assert_eq!(a.trace, b.trace, "{name}: traces differ between identical runs");
    }

    let grid = SweepConfig {
        peer_counts: vec![4, 7],
        delays_ms: vec![1, 100],
        trials: 3,
        seed_base: 42,
        base: ScenarioConfig {
            tx_rate: 10.0,
            duration_us: 4_000_000,
            latency_us: 10_000,
            jitter_us: 3_000,
            link_spread_us: 5_000,
            drop_rate: 0.02,
            ..ScenarioConfig::default()
        },
    };
    let a = to_csv(&run_sweep(&grid).unwrap());
    let b = to_csv(&run_sweep(&grid).unwrap());
    assert_eq!(a, b, "CSV differs between identical sweeps");
    println!("criterion 9 (determinism): pass");
}
