//! Command-line experiments: `plan`, `analyze`, `simulate`, `sweep` and
//! `compare`.
//!
//! Every command is a pure function of its flags. All randomness comes from
//! `--seed`, and grid outputs are ordered by grid index.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::analysis;
use crate::coopsched::{self, Topology};
use crate::error::{Error, Result};
use crate::rational::Ratio;
use crate::simulator::{self, DiskSpec, Load, Metrics, Protocol, SimConfig, TopologySpec, CSV_HEADER};

/// Exit status for success.
pub const EXIT_OK: i32 = 0;
/// Exit status for invalid input, unstable models and infeasible plans.
pub const EXIT_USER: i32 = 2;
/// Exit status for numeric failures.
pub const EXIT_NUMERIC: i32 = 3;

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "MWNC_THREADS";

#[derive(Debug, Parser)]
#[command(name = "mwnc", version, about = "Moving window network coding toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Plan relay rounds for a topology file.
    Plan(PlanArgs),
    /// Evaluate the analytical model for one (Ĉ, V, W).
    Analyze(AnalyzeArgs),
    /// Simulate one configuration per listed protocol.
    Simulate(SimArgs),
    /// Simulate a grid over W, ρ and N; CSV out.
    Sweep(SimArgs),
    /// Compare protocols across K on one topology; CSV out plus a summary.
    Compare(SimArgs),
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub topology: PathBuf,
    /// Override the topology's channel count.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = coopsched::DEFAULT_DELTA)]
    pub delta: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Equivalent capacity Ĉ.
    #[arg(long)]
    pub c_hat: f64,
    /// Window speed; alternatively give --rho.
    #[arg(long)]
    pub v: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long, default_value_t = 20)]
    pub w: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct SimArgs {
    /// Topology JSON; without it a disk topology of --nodes nodes is drawn.
    #[arg(long)]
    pub topology: Option<PathBuf>,
    /// Non-source node counts for generated topologies (list).
    #[arg(long, default_value = "10")]
    pub nodes: String,
    /// Channel counts (list).
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long, default_value_t = coopsched::DEFAULT_DELTA)]
    pub delta: f64,
    /// Window sizes (list, `a..b` for inclusive ranges).
    #[arg(long, default_value = "20")]
    pub w: String,
    /// Explicit window speed (fraction or decimal); overrides --rho.
    #[arg(long)]
    pub v: Option<String>,
    /// Loads relative to the planned capacity (list).
    #[arg(long, default_value = "0.9")]
    pub rho: String,
    /// RLNC block size.
    #[arg(long, default_value_t = 20)]
    pub block: u64,
    #[arg(long, default_value_t = 100_000)]
    pub slots: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "mwnc")]
    pub protocols: String,
    /// Payload bytes per packet.
    #[arg(long, default_value_t = 8)]
    pub payload: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Maps an error to the documented exit status.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Numeric(_) | Error::DegenerateDrift(_) => EXIT_NUMERIC,
        _ => EXIT_USER,
    }
}

/// Configures the global thread pool from `MWNC_THREADS`, if set.
pub fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::Domain(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
        if n == 0 {
            return Err(Error::Domain(format!("{THREADS_ENV} must be positive")));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Parses `4,8,12` or `4..24` or a mix.
pub fn parse_u64_list(s: &str) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || Error::Domain(format!("bad integer list entry {part:?}"));
        if let Some((a, b)) = part.split_once("..") {
            let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
            if b < a {
                return Err(bad());
            }
            out.extend(a..=b);
        } else {
            out.push(part.parse().map_err(|_| bad())?);
        }
    }
    if out.is_empty() {
        return Err(Error::Domain(format!("empty grid {s:?}")));
    }
    Ok(out)
}

pub fn parse_f64_list(s: &str) -> Result<Vec<f64>> {
    let out: Vec<f64> = s
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse().map_err(|_| Error::Domain(format!("bad number {p:?}"))))
        .collect::<Result<_>>()?;
    if out.is_empty() {
        return Err(Error::Domain(format!("empty grid {s:?}")));
    }
    Ok(out)
}

/// `"18/25"` or `"0.72"`.
pub fn parse_speed(s: &str) -> Result<Ratio> {
    if let Some((n, d)) = s.split_once('/') {
        let bad = || Error::Domain(format!("bad fraction {s:?}"));
        return Ratio::new(n.trim().parse().map_err(|_| bad())?, d.trim().parse().map_err(|_| bad())?);
    }
    let x: f64 = s.trim().parse().map_err(|_| Error::Domain(format!("bad speed {s:?}")))?;
    Ratio::approximate(x, simulator::SPEED_DENOM)
}

fn write_out(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

pub fn plan(args: &PlanArgs) -> Result<String> {
    let mut topo = Topology::load(&args.topology)?;
    if let Some(k) = args.k {
        topo = topo.with_k(k)?;
    }
    let (_, plan) = coopsched::select_relays(&topo, args.delta)?;
    Ok(plan.to_json() + "\n")
}

pub fn analyze(args: &AnalyzeArgs) -> Result<String> {
    let v = match (args.v, args.rho) {
        (Some(v), _) => v,
        (None, Some(rho)) => rho * args.c_hat,
        (None, None) => return Err(Error::Domain("give --v or --rho".into())),
    };
    let report = analysis::report(args.c_hat, v, args.w)?;
    Ok(serde_json::to_string_pretty(&report)? + "\n")
}

/// One grid point of a sweep or comparison.
#[derive(Clone, Debug, Serialize)]
pub struct GridPoint {
    pub nodes: usize,
    pub k: usize,
    pub window: u64,
    pub rho: f64,
    pub protocol: Protocol,
}

fn topology_for(args: &SimArgs, nodes: usize, k: usize) -> Result<Topology> {
    match &args.topology {
        Some(p) => Topology::load(p)?.with_k(k),
        None => simulator::build_topology(&TopologySpec::Disk(DiskSpec::standard(nodes, k, args.seed))),
    }
}

fn configs(args: &SimArgs) -> Result<Vec<SimConfig>> {
    let protocols = Protocol::parse_list(&args.protocols)?;
    let windows = parse_u64_list(&args.w)?;
    let rhos = parse_f64_list(&args.rho)?;
    let nodes: Vec<usize> = if args.topology.is_some() {
        vec![0]
    } else {
        parse_u64_list(&args.nodes)?.into_iter().map(|n| n as usize).collect()
    };
    let ks: Vec<usize> = match &args.k {
        Some(k) => parse_u64_list(k)?.into_iter().map(|k| k as usize).collect(),
        None => vec![0],
    };
    let speed = args.v.as_deref().map(parse_speed).transpose()?;
    let mut out = Vec::new();
    for &n in &nodes {
        for &k in &ks {
            let base = match (&args.topology, k) {
                (Some(p), 0) => Topology::load(p)?,
                (None, 0) => topology_for(args, n, 1)?,
                _ => topology_for(args, n, k)?,
            };
            for &w in &windows {
                for &rho in &rhos {
                    for &p in &protocols {
                        let mut c = SimConfig::new(base.clone(), p);
                        c.window = w;
                        c.block = args.block;
                        c.load = match speed {
                            Some(v) => Load::Speed(v),
                            None => Load::Rho(rho),
                        };
                        c.slots = args.slots;
                        c.seed = args.seed;
                        c.payload_len = args.payload;
                        c.delta = args.delta;
                        c.validate()?;
                        out.push(c);
                    }
                }
            }
        }
    }
    Ok(out)
}

fn run_all(cfgs: &[SimConfig]) -> Result<Vec<Metrics>> {
    simulator::run_many(cfgs).into_iter().collect()
}

pub fn simulate(args: &SimArgs) -> Result<String> {
    let metrics = run_all(&configs(args)?)?;
    let text = if metrics.len() == 1 {
        metrics[0].to_json()
    } else {
        serde_json::to_string_pretty(&metrics)?
    };
    Ok(text + "\n")
}

fn csv(metrics: &[Metrics]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for m in metrics {
        s.push_str(&m.csv_row());
        s.push('\n');
    }
    s
}

pub fn sweep(args: &SimArgs) -> Result<String> {
    Ok(csv(&run_all(&configs(args)?)?))
}

/// CSV of every run followed by a summary of mean throughput and delay per
/// protocol and K, and the gain of the first protocol over each other one.
pub fn compare(args: &SimArgs) -> Result<(String, String)> {
    let metrics = run_all(&configs(args)?)?;
    let protocols = Protocol::parse_list(&args.protocols)?;
    let mut summary = String::new();
    let mut ks: Vec<usize> = metrics.iter().map(|m| m.k).collect();
    ks.sort_unstable();
    ks.dedup();
    let mut groups: Vec<(usize, Option<usize>)> = Vec::new();
    for m in &metrics {
        let key = (m.n, if m.protocol.is_cooperative() { Some(m.k) } else { None });
        if !groups.contains(&key) {
            groups.push(key);
        }
    }
    for (n, k) in groups {
        let mean = |p: Protocol, f: fn(&Metrics) -> f64| -> Option<f64> {
            let sel: Vec<f64> = metrics
                .iter()
                .filter(|m| m.n == n && m.protocol == p && (!p.is_cooperative() || Some(m.k) == k))
                .map(f)
                .collect();
            (!sel.is_empty()).then(|| sel.iter().sum::<f64>() / sel.len() as f64)
        };
        for &p in &protocols {
            if p.is_cooperative() != k.is_some() {
                continue;
            }
            if let (Some(tp), Some(d)) = (mean(p, |m| m.throughput_mean), mean(p, |m| m.delay_mean)) {
                summary.push_str(&format!(
                    "N={n} K={} {p}: throughput_mean={tp:.4} delay_mean={d:.2}\n",
                    k.unwrap_or(1)
                ));
            }
        }
        let coop: Vec<Protocol> = protocols.iter().copied().filter(|p| p.is_cooperative() == k.is_some()).collect();
        if let Some((&first, rest)) = coop.split_first() {
            for &other in rest {
                if let (Some(a), Some(b)) = (mean(first, |m| m.throughput_mean), mean(other, |m| m.throughput_mean)) {
                    if b > 0.0 {
                        summary.push_str(&format!(
                            "N={n} K={} {first} vs {other}: throughput gain {:+.1}%\n",
                            k.unwrap_or(1),
                            100.0 * (a / b - 1.0)
                        ));
                    }
                }
            }
        }
    }
    Ok((csv(&metrics), summary))
}

/// Runs a parsed command, writing to `--out` or stdout. The comparison
/// summary goes to stderr.
pub fn execute(cli: &Cli) -> Result<()> {
    init_threads()?;
    match &cli.command {
        Command::Plan(a) => write_out(&a.out, &plan(a)?),
        Command::Analyze(a) => write_out(&a.out, &analyze(a)?),
        Command::Simulate(a) => write_out(&a.out, &simulate(a)?),
        Command::Sweep(a) => write_out(&a.out, &sweep(a)?),
        Command::Compare(a) => {
            let (table, summary) = compare(a)?;
            write_out(&a.out, &table)?;
            eprint!("{summary}");
            Ok(())
        }
    }
}

/// Parses arguments, runs, and returns the process exit status.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USER } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("mwnc: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists() {
        assert_eq!(parse_u64_list("4..7,10").unwrap(), vec![4, 5, 6, 7, 10]);
        assert!(parse_u64_list("").is_err());
        assert!(parse_u64_list("7..4").is_err());
        assert!(parse_u64_list("x").is_err());
        assert_eq!(parse_f64_list("0.7, 0.8").unwrap(), vec![0.7, 0.8]);
        assert!(parse_f64_list(" , ").is_err());
    }

    #[test]
    fn speeds() {
        assert_eq!(parse_speed("18/25").unwrap(), Ratio::new(18, 25).unwrap());
        assert_eq!(parse_speed("0.72").unwrap(), Ratio::new(18, 25).unwrap());
        assert!(parse_speed("a/b").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Domain("x".into())), EXIT_USER);
        assert_eq!(exit_code(&Error::Unstable { v: 0.7, c_hat: 0.6 }), EXIT_USER);
        assert_eq!(exit_code(&Error::Numeric("x".into())), EXIT_NUMERIC);
    }
}
