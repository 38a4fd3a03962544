use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use rhowave::par::Parallelism;
use rhowave::scenario::{check_trace, execute, run_sweep, write_csv, Check, Grid, Scenario, ScenarioError};

/// Simulate and verify self-stabilizing wave clocks, layer clocks and local
/// resource allocation on anonymous graphs.
#[derive(Parser)]
#[command(name = "rhowave", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute one scenario, write its trace and print a summary.
    Run(RunArgs),
    /// Re-validate a trace written by `run`.
    Check(CheckArgs),
    /// Run a parameter grid and emit one CSV row per cell.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat `key = value` scenario file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `ring:8`, `grid:3x4`, `random:12:0.3`, `file:g.edges`, ...
    #[arg(long)]
    topo: Option<String>,
    /// `ss_ws`, `ss_dc`, `infimum:<op>`, `lme`, `gme:<groups>`, `rw:<read>[:<write>]`, `broken_lme`.
    #[arg(long, alias = "plugin")]
    proto: Option<String>,
    #[arg(long)]
    rho: Option<String>,
    /// `synchronous`, `central`, `rho_central:<r>`, `distributed:<p>`, `adversarial`.
    #[arg(long)]
    daemon: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// `wu0_uniform`, `random_arbitrary` or `file:<path>`.
    #[arg(long)]
    init: Option<String>,
    #[arg(long)]
    steps: Option<String>,
    #[arg(long)]
    phases: Option<String>,
    /// Comma-separated analyses; default is every applicable one.
    #[arg(long)]
    checks: Option<String>,
    /// Any other scenario key, e.g. `--set k2=40`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Where the JSON-lines trace goes.
    #[arg(long, default_value = "trace.jsonl")]
    trace: PathBuf,
    #[arg(long)]
    no_trace: bool,
    /// Print the summary as JSON instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct CheckArgs {
    trace: PathBuf,
    /// Comma-separated: replay, wavelet, infimum, clock, lra, all.
    #[arg(long, default_value = "all")]
    checks: String,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// Grid file: list keys (`topos`, `ns`, `rhos`, `daemons`, `seeds`,
    /// `protos`) plus any scenario key.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Families (`ring`, `path`, `tree`, `complete`, `grid`, `random[:p]`) or fixed topologies.
    #[arg(long)]
    topos: Option<String>,
    /// List `8,12,16` or half-open range `5..25`.
    #[arg(long)]
    ns: Option<String>,
    #[arg(long)]
    rhos: Option<String>,
    #[arg(long)]
    daemons: Option<String>,
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long, alias = "plugins")]
    protos: Option<String>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// CSV destination; stdout when absent.
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long)]
    sequential: bool,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn split_set(kv: &str) -> Result<(&str, &str)> {
    kv.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .ok_or_else(|| ScenarioError::Config {
            key: kv.into(),
            msg: "expected KEY=VALUE".into(),
        })
        .map_err(Into::into)
}

fn scenario(a: &RunArgs) -> Result<Scenario> {
    let mut s = Scenario::default();
    if let Some(p) = &a.config {
        s.apply_text(&read(p)?)?;
    }
    let flags = [
        ("topo", &a.topo),
        ("proto", &a.proto),
        ("rho", &a.rho),
        ("daemon", &a.daemon),
        ("seed", &a.seed),
        ("init", &a.init),
        ("steps", &a.steps),
        ("phases", &a.phases),
        ("checks", &a.checks),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            s.set(k, v)?;
        }
    }
    for kv in &a.set {
        let (k, v) = split_set(kv)?;
        s.set(k, v)?;
    }
    Ok(s)
}

fn cmd_run(a: RunArgs) -> Result<ExitCode> {
    let s = scenario(&a)?;
    let ex = execute(&s)?;
    if !a.no_trace {
        let f = File::create(&a.trace).with_context(|| format!("cannot create {}", a.trace.display()))?;
        let mut w = BufWriter::new(f);
        ex.write_trace(&mut w)?;
        w.flush()?;
    }
    if a.json {
        println!("{}", serde_json::to_string_pretty(&ex.summary)?);
    } else {
        print!("{}", ex.summary.render());
        if !a.no_trace {
            println!("trace: {}", a.trace.display());
        }
    }
    Ok(verdict(ex.summary.passed()))
}

fn cmd_check(a: CheckArgs) -> Result<ExitCode> {
    let checks = Check::parse_list(&a.checks).map_err(|msg| ScenarioError::Config { key: "checks".into(), msg })?;
    let text = read(&a.trace)?;
    let c = check_trace(&text, Some(&checks))?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&c.summary)?);
    } else {
        print!("{}", c.summary.render());
        match &c.replay {
            Some(Ok(())) => println!("replay: ok"),
            Some(Err(e)) => println!("replay: FAILED ({e})"),
            None => {}
        }
        if c.recorded.is_some() {
            println!("recorded summary: {}", if c.agrees() { "agrees" } else { "DISAGREES" });
        }
    }
    Ok(verdict(c.passed()))
}

fn cmd_sweep(a: SweepArgs) -> Result<ExitCode> {
    let mut g = Grid::default();
    if let Some(p) = &a.config {
        g = Grid::parse(&read(p)?)?;
    }
    let flags = [
        ("topos", &a.topos),
        ("ns", &a.ns),
        ("rhos", &a.rhos),
        ("daemons", &a.daemons),
        ("seeds", &a.seeds),
        ("protos", &a.protos),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            g.set(k, v)?;
        }
    }
    for kv in &a.set {
        let (k, v) = split_set(kv)?;
        g.set(k, v)?;
    }
    let mode = if a.sequential { Parallelism::Sequential } else { Parallelism::Parallel };
    let rows = run_sweep(&g, mode)?;
    match &a.out {
        Some(p) => {
            let f = File::create(p).with_context(|| format!("cannot create {}", p.display()))?;
            write_csv(&rows, BufWriter::new(f))?;
        }
        None => write_csv(&rows, io::stdout().lock())?,
    }
    let mut clean = true;
    for r in &rows {
        match &r.outcome {
            Ok(sum) if sum.passed() => {}
            Ok(sum) => {
                clean = false;
                eprintln!("{} {} rho={} seed={}: {} violations", r.scenario.topo, r.scenario.proto, r.scenario.rho, r.scenario.seed, sum.violations());
            }
            Err(e) => {
                clean = false;
                eprintln!("{} {} rho={} seed={}: {e}", r.scenario.topo, r.scenario.proto, r.scenario.rho, r.scenario.seed);
            }
        }
    }
    Ok(verdict(clean))
}

fn verdict(passed: bool) -> ExitCode {
    if passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

/// The error chain, skipping causes already spelled out by their parent.
fn message(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let m = cause.to_string();
        if !out.contains(&m) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&m);
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = match cli.cmd {
        Cmd::Run(a) => cmd_run(a),
        Cmd::Check(a) => cmd_check(a),
        Cmd::Sweep(a) => cmd_sweep(a),
    };
    match out {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", message(&e));
            match e.downcast_ref::<ScenarioError>() {
                Some(se) if !se.is_config() => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}
