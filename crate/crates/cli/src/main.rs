//! `fairsched`: JSON experiment configs in, CSV reports out.
//!
//! Subcommands: `run` one experiment, `replicate` it across derived
//! seeds, `sweep` it across uniform loads, `validate-config` without
//! running, and `acceptance` for the end-to-end criteria.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use fairsched::acceptance;
use fairsched::analysis::check_admissibility;
use fairsched::config::RateConfig;
use fairsched::report;
use fairsched::{
    run_replications, run_with_seed, Experiment, ExperimentConfig, RunOutput, RunSummary,
};

#[derive(Parser)]
#[command(
    name = "fairsched",
    version,
    about = "Discrete-time simulator for constrained queueing networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and optionally export its CSV reports.
    Run(RunArgs),
    /// Run independent replications of one experiment.
    Replicate(ReplicateArgs),
    /// Replay the experiment across a list of uniform loads.
    Sweep(SweepArgs),
    /// Parse and validate a config, reporting derived quantities.
    ValidateConfig {
        /// Path to the experiment config.
        config: PathBuf,
    },
    /// Run the acceptance criteria and print one verdict line each.
    Acceptance(AcceptanceArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to the experiment config.
    config: PathBuf,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Write packets.csv, summary.csv, queues.csv, checkpoints.csv, and
    /// series.csv (when recorded) into this directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ReplicateArgs {
    /// Path to the experiment config.
    config: PathBuf,
    /// Number of replications; seeds derive from the config's seed.
    #[arg(short, long, default_value_t = 10)]
    n: usize,
    /// Override the config's base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Write summaries.csv and queues.csv into this directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Path to the experiment config; its rates must be UNIFORM.
    config: PathBuf,
    /// Comma-separated uniform loads, e.g. 0.5,0.7,0.9.
    #[arg(long, value_delimiter = ',', required = true)]
    loads: Vec<f64>,
    /// Replications per load.
    #[arg(short, long, default_value_t = 1)]
    n: usize,
    /// Write summaries_<load>.csv per load into this directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct AcceptanceArgs {
    /// Run only these criteria (1..=8), comma separated.
    #[arg(long, value_delimiter = ',')]
    only: Vec<usize>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => cmd_run(args),
        Command::Replicate(args) => cmd_replicate(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::ValidateConfig { config } => cmd_validate(&config),
        Command::Acceptance(args) => cmd_acceptance(args),
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    ExperimentConfig::from_json(&text)
        .with_context(|| format!("parsing config {}", path.display()))
}

fn validate(config: ExperimentConfig, path: &Path) -> Result<Experiment> {
    config
        .validate()
        .with_context(|| format!("validating config {}", path.display()))
}

fn write_report<F>(dir: &Path, name: &str, write: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let path = dir.join(name);
    let mut w = BufWriter::new(
        File::create(&path).with_context(|| format!("creating {}", path.display()))?,
    );
    write(&mut w).with_context(|| format!("writing {}", path.display()))?;
    w.flush().with_context(|| format!("flushing {}", path.display()))
}

fn print_summary(s: &RunSummary) {
    println!("seed {} ran {} slots over {} queues and {} output lines", s.seed, s.horizon, s.n_queues, s.n_outputs);
    println!("arrivals {}, departures {}, final backlog {}, live shadow copies {}", s.total_arrivals, s.total_departures, s.final_backlog, s.shadow_live);
    println!("longest shadow busy cycle {}", s.theta);
    println!(
        "latency: {} samples, mean {:.4}, second moment {:.4}, max {}",
        s.latency.count, s.latency.mean, s.latency.second_moment, s.latency.max
    );
    println!(
        "emulation gap: {} samples, mean {:.4}, second moment {:.4}, max {}",
        s.oq_delay.count, s.oq_delay.mean, s.oq_delay.second_moment, s.oq_delay.max
    );
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let exp = validate(load_config(&args.config)?, &args.config)?;
    let seed = args.seed.unwrap_or(exp.seed);
    let out = run_with_seed(&exp, seed).context("running the experiment")?;
    print_summary(&out.summary);
    if let Some(dir) = &args.out_dir {
        export_run(dir, &out)?;
        println!("reports written to {}", dir.display());
    }
    Ok(())
}

fn export_run(dir: &Path, out: &RunOutput) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_report(dir, "packets.csv", |w| report::write_packets_csv(w, &out.ledger))?;
    let summary = std::slice::from_ref(&out.summary);
    write_report(dir, "summary.csv", |w| report::write_summaries_csv(w, summary))?;
    write_report(dir, "queues.csv", |w| report::write_queues_csv(w, summary))?;
    write_report(dir, "checkpoints.csv", |w| {
        report::write_checkpoints_csv(w, &out.summary.checkpoints)
    })?;
    if let Some(series) = &out.series {
        write_report(dir, "series.csv", |w| report::write_series_csv(w, series))?;
    }
    Ok(())
}

fn cmd_replicate(args: ReplicateArgs) -> Result<()> {
    if args.n == 0 {
        bail!("need at least one replication");
    }
    let mut exp = validate(load_config(&args.config)?, &args.config)?;
    if let Some(seed) = args.seed {
        exp.seed = seed;
    }
    let summaries = run_replications(&exp, args.n).context("running replications")?;
    for s in &summaries {
        println!(
            "seed {}: departures {}, backlog {}, theta {}, latency mean {:.4}, second moment {:.4}",
            s.seed, s.total_departures, s.final_backlog, s.theta, s.latency.mean,
            s.latency.second_moment
        );
    }
    if let Some(dir) = &args.out_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        write_report(dir, "summaries.csv", |w| {
            report::write_summaries_csv(w, &summaries)
        })?;
        write_report(dir, "queues.csv", |w| report::write_queues_csv(w, &summaries))?;
        println!("reports written to {}", dir.display());
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    if args.n == 0 {
        bail!("need at least one replication per load");
    }
    let config = load_config(&args.config)?;
    if !matches!(config.rates, RateConfig::Uniform { .. }) {
        bail!("sweep varies the uniform load, so the config's rates must have kind UNIFORM");
    }
    if let Some(dir) = &args.out_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    for &load in &args.loads {
        let mut point = config.clone();
        point.rates = RateConfig::Uniform { load };
        let exp = validate(point, &args.config)
            .with_context(|| format!("load {load} produces an invalid config"))?;
        let summaries = run_replications(&exp, args.n).context("running replications")?;
        let departures: u64 = summaries.iter().map(|s| s.total_departures).sum();
        let slots = exp.horizon as f64 * args.n as f64;
        let mean_latency = pooled_latency_mean(&summaries);
        let mean_theta =
            summaries.iter().map(|s| s.theta as f64).sum::<f64>() / args.n as f64;
        println!(
            "load {load}: throughput {:.4} packets per slot, mean latency {:.4}, mean theta {:.1}",
            departures as f64 / slots,
            mean_latency,
            mean_theta
        );
        if let Some(dir) = &args.out_dir {
            write_report(dir, &format!("summaries_{load}.csv"), |w| {
                report::write_summaries_csv(w, &summaries)
            })?;
        }
    }
    if let Some(dir) = &args.out_dir {
        println!("reports written to {}", dir.display());
    }
    Ok(())
}

fn pooled_latency_mean(summaries: &[RunSummary]) -> f64 {
    let count: u64 = summaries.iter().map(|s| s.latency.count).sum();
    if count == 0 {
        return 0.0;
    }
    let sum: f64 = summaries
        .iter()
        .map(|s| s.latency.mean * s.latency.count as f64)
        .sum();
    sum / count as f64
}

fn cmd_validate(path: &Path) -> Result<()> {
    let exp = validate(load_config(path)?, path)?;
    println!("config is valid");
    println!("queues: {}", exp.n_queues());
    println!("output lines: {}", exp.n_outputs);
    println!("horizon: {} slots, warmup {}", exp.horizon, exp.warmup);
    println!("seed: {}", exp.seed);
    println!("checkpoints: {}", exp.checkpoints().len());
    match check_admissibility(&exp.set, &exp.rates) {
        Ok(adm) => {
            let verdict = if adm.admissible { "admissible" } else { "not admissible" };
            println!("rates {verdict}, margin {:.4}", adm.margin);
        }
        Err(e) => println!("admissibility not evaluated: {e}"),
    }
    Ok(())
}

fn cmd_acceptance(args: AcceptanceArgs) -> Result<()> {
    let results = if args.only.is_empty() {
        acceptance::run_all()
    } else {
        let mut results = Vec::new();
        for &index in &args.only {
            results.push(match index {
                1 => acceptance::criterion_1(),
                2 => acceptance::criterion_2(),
                3 => acceptance::criterion_3(),
                4 => acceptance::criterion_4(),
                5 => acceptance::criterion_5(),
                6 => acceptance::criterion_6(),
                7 => acceptance::criterion_7(),
                8 => acceptance::criterion_8(),
                other => bail!("criterion {other} does not exist, pick from 1..=8"),
            });
        }
        results
    };
    let failed = results.iter().filter(|r| !r.passed).count();
    for r in &results {
        println!("{}", r.line());
    }
    if failed > 0 {
        bail!("{failed} of {} criteria failed", results.len());
    }
    Ok(())
}
