use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use autoserve_core::sim::{run_sim_with_sink, sweep, JsonLinesSink, NullSink, Outcome, SimConfig};
use autoserve_core::wire::dump_fields;

#[derive(Parser)]
#[command(name = "autoserve-sim", version, about = "AutoServe reservation protocol simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation. Exits 0 on PASS, 2 on FAIL.
    Run(RunArgs),
    /// Run consecutive seeds and summarize.
    Sweep(SweepArgs),
    /// Decode a hex-encoded frame and print its fields.
    Dump {
        /// Frame bytes as hex; whitespace is ignored.
        hex: Vec<String>,
    },
    /// Print the effective config as TOML.
    Config {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Overrides {
    /// TOML file with SimConfig fields; missing keys take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    uavs: Option<usize>,
    #[arg(long)]
    lps: Option<usize>,
    /// Simulated seconds.
    #[arg(long)]
    duration: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    overrides: Overrides,
    /// Write a JSON-lines trace here.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the JSON run report here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    /// Write the JSON sweep report here.
    #[arg(long)]
    report: Option<PathBuf>,
}

fn load_config(o: &Overrides) -> Result<SimConfig> {
    let mut cfg = match &o.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            SimConfig::from_toml_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => SimConfig::default(),
    };
    if let Some(seed) = o.seed {
        cfg.seed = seed;
    }
    if let Some(n) = o.uavs {
        cfg.n_uavs = n;
    }
    if let Some(n) = o.lps {
        cfg.n_lps = n;
    }
    if let Some(d) = o.duration {
        cfg.duration_s = d;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let mut out = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

fn run(args: RunArgs) -> Result<Outcome> {
    let cfg = load_config(&args.overrides)?;
    let report = match &args.trace {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            let mut sink = JsonLinesSink::new(BufWriter::new(file));
            let report = run_sim_with_sink(&cfg, &mut sink)?;
            sink.finish().with_context(|| format!("writing {}", path.display()))?;
            report
        }
        None => run_sim_with_sink(&cfg, &mut NullSink)?,
    };
    if let Some(path) = &args.report {
        write_json(path, &report)?;
    }
    println!(
        "{} seed={} uavs={} lps={} duration={}s services={} min_battery={:.2}% failures={}",
        report.outcome,
        cfg.seed,
        cfg.n_uavs,
        cfg.n_lps,
        cfg.duration_s,
        report.total_services(),
        report.min_battery_pct(),
        report.failures.len()
    );
    Ok(report.outcome)
}

fn run_sweep(args: SweepArgs) -> Result<()> {
    let cfg = load_config(&args.overrides)?;
    let report = sweep(&cfg, args.seeds)?;
    for r in &report.runs {
        println!("seed={} {} min_battery={:.2}% services={}", r.seed, r.outcome, r.min_battery_pct, r.services);
    }
    let dist = report.min_battery_distribution();
    println!("pass_rate={}/{} ({:.1}%)", report.passes(), report.runs.len(), 100.0 * report.pass_rate());
    if !dist.is_empty() {
        let q = |p: f64| dist[((dist.len() - 1) as f64 * p).round() as usize];
        println!(
            "min_battery min={:.2} p25={:.2} median={:.2} p75={:.2} max={:.2}",
            q(0.0),
            q(0.25),
            q(0.5),
            q(0.75),
            q(1.0)
        );
    }
    if let Some(path) = &args.report {
        write_json(path, &report)?;
    }
    Ok(())
}

fn dump(hex_parts: &[String]) -> Result<()> {
    let text: String = hex_parts.concat().chars().filter(|c| !c.is_whitespace()).collect();
    let bytes = hex::decode(&text).context("frame is not valid hex")?;
    for (name, value) in dump_fields(&bytes)? {
        println!("{name}={value}");
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args).map(|o| match o {
            Outcome::Pass => ExitCode::SUCCESS,
            Outcome::Fail => ExitCode::from(2),
        }),
        Command::Sweep(args) => run_sweep(args).map(|_| ExitCode::SUCCESS),
        Command::Dump { hex } => dump(&hex).map(|_| ExitCode::SUCCESS),
        Command::Config { config } => {
            let o = Overrides { config, seed: None, uavs: None, lps: None, duration: None };
            load_config(&o).map(|cfg| {
                print!("{}", cfg.to_toml_string());
                ExitCode::SUCCESS
            })
        }
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(1)
    })
}
