use clap::{Args, Parser, Subcommand};
use std::fs;
use std::process::ExitCode;
use yac::scenario::{self, PartitionSpec, ScenarioConfig};
use yac::sim;
use yac::sweep::{self, SweepConfig};

#[derive(Parser)]
#[command(
    name = "yac",
    about = "BFT consensus simulator: run fault-injection scenarios and parameter sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario (possibly several trials) and print a summary
    Run(RunArgs),
    /// Sweep (peers x vote-step delay), aggregate trials, emit CSV
    Sweep(SweepArgs),
    /// List canned scenarios and fault behaviors
    Scenarios,
}

#[derive(Args)]
struct ScenarioFlags {
    /// Canned scenario name or path to a key=value scenario file
    #[arg(long)]
    scenario: Option<String>,
    /// Number of validator peers
    #[arg(long)]
    peers: Option<usize>,
    /// Number of Byzantine peers (highest canonical indices)
    #[arg(long)]
    byzantine: Option<usize>,
    /// Byzantine behavior: NAME or NAME:ARG (see `yac scenarios`)
    #[arg(long)]
    behavior: Option<String>,
    /// Vote-step timer period in milliseconds
    #[arg(long)]
    vote_delay_ms: Option<u64>,
    /// Transactions per proposal before the batch emits
    #[arg(long)]
    batch_limit: Option<usize>,
    /// Batch timeout in milliseconds
    #[arg(long)]
    batch_timeout_ms: Option<u64>,
    /// Client transactions per simulated second
    #[arg(long)]
    tx_rate: Option<f64>,
    /// Simulated duration in seconds
    #[arg(long)]
    duration_s: Option<f64>,
    /// Base one-way link latency in microseconds
    #[arg(long)]
    latency_us: Option<u64>,
    /// Uniform per-message jitter bound in microseconds
    #[arg(long)]
    jitter_us: Option<u64>,
    /// Per-link fixed extra base latency bound in microseconds
    #[arg(long)]
    link_spread_us: Option<u64>,
    /// Independent per-message drop probability in [0, 1)
    #[arg(long)]
    drop_rate: Option<f64>,
    /// Partition spec A|B@START_US:END_US (repeatable)
    #[arg(long)]
    partition: Vec<String>,
    /// Receiver processing cost per message in microseconds
    #[arg(long)]
    proc_base_us: Option<u64>,
    /// Extra processing cost per carried signature in microseconds
    #[arg(long)]
    proc_per_sig_us: Option<u64>,
    /// Number of peers (lowest indices) paying multiplied processing costs
    #[arg(long)]
    slow_peers: Option<usize>,
    /// Processing cost multiplier for the slow peers
    #[arg(long)]
    slow_factor: Option<u64>,
    /// Base RNG seed
    #[arg(long)]
    seed: Option<u64>,
}

impl ScenarioFlags {
    fn resolve(&self) -> Result<ScenarioConfig, String> {
        let mut cfg = match &self.scenario {
            None => ScenarioConfig::default(),
            Some(name) => match scenario::canned(name) {
                Some(cfg) => cfg,
                None => {
                    let text = fs::read_to_string(name).map_err(|e| {
                        format!(
                            "scenario '{name}': not a canned scenario (available: {}) and not a readable file ({e})",
                            scenario::canned_names().join(", ")
                        )
                    })?;
                    ScenarioConfig::parse(&text)?
                }
            },
        };
        if let Some(v) = self.peers {
            cfg.n_peers = v;
        }
        if let Some(v) = self.byzantine {
            cfg.n_byzantine = v;
        }
        if let Some(v) = &self.behavior {
            cfg.behavior = v.clone();
        }
        if let Some(v) = self.vote_delay_ms {
            cfg.vote_step_delay_us = v * 1000;
        }
        if let Some(v) = self.batch_limit {
            cfg.batch_limit = v;
        }
        if let Some(v) = self.batch_timeout_ms {
            cfg.batch_timeout_us = v * 1000;
        }
        if let Some(v) = self.tx_rate {
            cfg.tx_rate = v;
        }
        if let Some(v) = self.duration_s {
            cfg.duration_us = (v * 1e6) as u64;
        }
        if let Some(v) = self.latency_us {
            cfg.latency_us = v;
        }
        if let Some(v) = self.jitter_us {
            cfg.jitter_us = v;
        }
        if let Some(v) = self.link_spread_us {
            cfg.link_spread_us = v;
        }
        if let Some(v) = self.drop_rate {
            cfg.drop_rate = v;
        }
        for p in &self.partition {
            cfg.partitions.push(PartitionSpec::parse(p)?);
        }
        if let Some(v) = self.proc_base_us {
            cfg.proc_base_us = v;
        }
        if let Some(v) = self.proc_per_sig_us {
            cfg.proc_per_sig_us = v;
        }
        if let Some(v) = self.slow_peers {
            cfg.slow_peer_count = v;
        }
        if let Some(v) = self.slow_factor {
            cfg.slow_factor = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    flags: ScenarioFlags,
    /// Number of trials (seeds seed, seed+1, ...)
    #[arg(long)]
    trials: Option<usize>,
    /// Record the event trace and write it to this file
    #[arg(long)]
    trace_out: Option<String>,
    /// Write the first honest peer's committed chain (hex export) here
    #[arg(long)]
    chain_out: Option<String>,
    /// Print per-peer counters
    #[arg(long)]
    verbose: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    flags: ScenarioFlags,
    /// Comma-separated peer counts
    #[arg(long, default_value = "4,16,28,64")]
    peers_list: String,
    /// Comma-separated vote-step delays in milliseconds
    #[arg(long, default_value = "1,20,100,500")]
    delays_ms: String,
    /// Trials per grid cell. The reported median throughput is the
    /// lower median: the sorted value at 0-based index (trials-1)/2,
    /// i.e. index trials/2 - 1 for even counts
    #[arg(long, default_value_t = 10)]
    trials: usize,
    /// Write the CSV here instead of stdout
    #[arg(long)]
    out: Option<String>,
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, String> {
    let items: Result<Vec<T>, _> = s.split(',').map(|p| p.trim().parse::<T>()).collect();
    match items {
        Ok(v) if !v.is_empty() => Ok(v),
        _ => Err(format!("bad {what} list '{s}'")),
    }
}

fn cmd_run(args: &RunArgs) -> Result<ExitCode, String> {
    let mut cfg = args.flags.resolve()?;
    if args.trace_out.is_some() {
        cfg.record_trace = true;
    }
    let trials = args.trials.unwrap_or(cfg.trials);
    let mut violation = false;

    for trial in 0..trials {
        let mut trial_cfg = cfg.clone();
        trial_cfg.seed = cfg.seed + trial as u64;
        let run = sim::run(&trial_cfg)?;

        println!(
            "trial {trial} seed={} peers={} duration={:.1}s{}",
            trial_cfg.seed,
            trial_cfg.n_peers,
            trial_cfg.duration_us as f64 / 1e6,
            if run.timed_out { " (time limit)" } else { "" }
        );
        for p in &run.peers {
            println!(
                "  {:<6} {:<12} height={:<4} round={:<4} alarms={}{}",
                p.name,
                p.behavior,
                p.height,
                p.round,
                p.alarms.len(),
                if p.equivocators_seen > 0 {
                    format!(" equivocators-seen={}", p.equivocators_seen)
                } else {
                    String::new()
                }
            );
        }
        let committed = run.honest_committed_tx_ids.len();
        println!(
            "  throughput={:.3} proposals/s  committed-txs={committed}/{}  stalled={}  safety={}",
            run.throughput(),
            run.submitted_tx_ids.len(),
            run.stalled_peers(),
            if run.safety_ok() { "ok" } else { "VIOLATED" }
        );
        if args.verbose {
            for (k, v) in &run.counters {
                println!("  counter {k}={v}");
            }
            for p in &run.peers {
                let nonzero: Vec<String> = p
                    .metrics
                    .as_pairs()
                    .into_iter()
                    .filter(|(_, v)| *v > 0)
                    .map(|(k, v)| format!("{k}={v}"))
                    .collect();
                if !nonzero.is_empty() {
                    println!("  {:<6} {}", p.name, nonzero.join(" "));
                }
            }
        }

        if !run.safety_ok() || run.peers.iter().any(|p| !p.alarms.is_empty()) {
            violation = true;
        }
        if trial == 0 {
            if let Some(path) = &args.trace_out {
                let trace = run.trace.as_deref().unwrap_or("");
                fs::write(path, trace).map_err(|e| format!("writing {path}: {e}"))?;
                println!("  trace written to {path}");
            }
            if let Some(path) = &args.chain_out {
                let store = run
                    .peers
                    .iter()
                    .position(|p| p.honest)
                    .map(|i| &run.stores[i])
                    .ok_or("no honest peer to export a chain from")?;
                fs::write(path, store.export()).map_err(|e| format!("writing {path}: {e}"))?;
                println!("  chain written to {path}");
            }
        }
    }
    // exit 2: the run itself surfaced a consensus-level violation
    Ok(if violation { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn cmd_sweep(args: &SweepArgs) -> Result<ExitCode, String> {
    let base = args.flags.resolve()?;
    let cfg = SweepConfig {
        peer_counts: parse_list(&args.peers_list, "peers")?,
        delays_ms: parse_list(&args.delays_ms, "delays")?,
        trials: args.trials,
        seed_base: base.seed,
        base,
    };
    let cells = sweep::run_sweep(&cfg)?;
    let csv = sweep::to_csv(&cells);
    match &args.out {
        Some(path) => {
            fs::write(path, &csv).map_err(|e| format!("writing {path}: {e}"))?;
            eprintln!("wrote {} cells to {path}", cells.len());
        }
        None => print!("{csv}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_scenarios() -> ExitCode {
    println!("canned scenarios:");
    for name in scenario::canned_names() {
        println!("  {name}");
    }
    println!("\nfault behaviors (--behavior NAME[:ARG]):");
    for spec in yac::faults::registry() {
        println!("  {:<12} {}", spec.name, spec.help);
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Scenarios => Ok(cmd_scenarios()),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
