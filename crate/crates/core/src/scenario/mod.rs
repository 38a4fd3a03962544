//! Scenario descriptions, their execution and analysis, trace files and
//! parameter sweeps.
//!
//! A scenario is a flat `key = value` text (`#` comments). Every key has a
//! default; later assignments override earlier ones, which is how command
//! line flags win over a config file.

mod run;
mod sweep;

pub use run::{
    check_trace, execute, ClockVerdict, Execution, InfimumVerdict, LraVerdict, RunTrace, Summary, TraceCheck,
    WaveletVerdict,
};
pub use sweep::{run_sweep, write_csv, Grid, SweepRow, CSV_HEADER};

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::infimum::InfimumKind;
use crate::kernel::{DaemonPolicy, EngineError, ReplayError, TraceError};
use crate::lra::{LraError, LraKind};
use crate::topology::{Generator, Topology, TopologyError};
use crate::unison::SizingError;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("bad value for `{key}`: {msg}")]
    Config { key: String, msg: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("refused: {0}")]
    Sizing(#[from] SizingError),
    #[error("refused: {0}")]
    Lra(#[from] LraError),
    #[error("initial configuration: {0}")]
    Init(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("corrupt trace: {0}")]
    Trace(#[from] TraceError),
    #[error("replay: {0}")]
    Replay(#[from] ReplayError),
}

impl ScenarioError {
    /// Problems with the inputs, as opposed to the run itself.
    pub fn is_config(&self) -> bool {
        !matches!(self, ScenarioError::Engine(_) | ScenarioError::Replay(_))
    }
}

fn bad(key: &str, msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Config {
        key: key.into(),
        msg: msg.into(),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TopoSpec {
    Gen(Generator),
    File(PathBuf),
}

impl TopoSpec {
    /// Generators are seeded with the scenario seed.
    pub fn build(&self, seed: u64) -> Result<Topology, ScenarioError> {
        match self {
            TopoSpec::Gen(g) => Ok(g.build(seed)?),
            TopoSpec::File(p) => match std::fs::read_to_string(p) {
                Ok(text) => Ok(Topology::parse(&text)?),
                Err(source) => Err(ScenarioError::Io { path: p.clone(), source }),
            },
        }
    }
}

impl fmt::Display for TopoSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopoSpec::Gen(g) => g.fmt(f),
            TopoSpec::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl FromStr for TopoSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.strip_prefix("file:") {
            Some(p) => Ok(TopoSpec::File(p.into())),
            None => s.parse().map(TopoSpec::Gen).map_err(|e: TopologyError| e.to_string()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProtoSpec {
    /// The bare wave clock.
    SsWs,
    /// The wave clock computing ball infima of random inputs.
    Infimum(InfimumKind),
    /// The layer clock with no plugin.
    LayerClock,
    Lra(LraKind),
}

impl ProtoSpec {
    pub fn is_layered(&self) -> bool {
        matches!(self, ProtoSpec::LayerClock | ProtoSpec::Lra(_))
    }
}

impl fmt::Display for ProtoSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProtoSpec::SsWs => f.write_str("ss_ws"),
            ProtoSpec::Infimum(k) => write!(f, "infimum:{k}"),
            ProtoSpec::LayerClock => f.write_str("ss_dc"),
            ProtoSpec::Lra(k) => k.fmt(f),
        }
    }
}

impl FromStr for ProtoSpec {
    type Err = String;

    /// `ss_ws`, `infimum[:op]`, `ss_dc`, or a plugin (`lme`, `gme:..`,
    /// `rw:..`, `broken_lme`), optionally written `ss_dc+plugin`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ss_ws" => return Ok(ProtoSpec::SsWs),
            "ss_dc" => return Ok(ProtoSpec::LayerClock),
            "infimum" => return Ok(ProtoSpec::Infimum(InfimumKind::MinInt)),
            _ => {}
        }
        if let Some(op) = s.strip_prefix("infimum:") {
            return op.parse().map(ProtoSpec::Infimum);
        }
        s.strip_prefix("ss_dc+").unwrap_or(s).parse().map(ProtoSpec::Lra)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitMode {
    /// Every clock equal to one uniformly drawn value, payloads initial.
    Wu0Uniform,
    /// Every register drawn from its domain.
    RandomArbitrary,
    /// A JSON array of full states, or one whitespace-separated clock row
    /// per process (`r`, or `r1 r2` for layered protocols).
    File(PathBuf),
}

impl fmt::Display for InitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitMode::Wu0Uniform => f.write_str("wu0_uniform"),
            InitMode::RandomArbitrary => f.write_str("random_arbitrary"),
            InitMode::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl FromStr for InitMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "wu0_uniform" => Ok(InitMode::Wu0Uniform),
            "random_arbitrary" => Ok(InitMode::RandomArbitrary),
            _ => s
                .strip_prefix("file:")
                .or_else(|| s.strip_prefix("adversarial_file:"))
                .map(|p| InitMode::File(p.into()))
                .ok_or_else(|| format!("unknown init mode `{s}`")),
        }
    }
}

/// Trace verifications.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Check {
    /// Re-execute the trace against the protocol's guards and statements.
    Replay,
    /// Level-cut wavelets on the wave clock.
    Wavelet,
    /// Ball infima at every phase end.
    Infimum,
    /// Layer-clock staircase, slave gating and delay agreement.
    Clock,
    /// Safety, liveness, cost metrics and the election.
    Lra,
}

impl Check {
    pub const ALL: [Check; 5] = [Check::Replay, Check::Wavelet, Check::Infimum, Check::Clock, Check::Lra];

    pub fn name(self) -> &'static str {
        match self {
            Check::Replay => "replay",
            Check::Wavelet => "wavelet",
            Check::Infimum => "infimum",
            Check::Clock => "clock",
            Check::Lra => "lra",
        }
    }

    pub fn applies_to(self, proto: &ProtoSpec) -> bool {
        match self {
            Check::Replay => true,
            Check::Wavelet => *proto == ProtoSpec::SsWs,
            Check::Infimum => matches!(proto, ProtoSpec::Infimum(_)),
            Check::Clock => proto.is_layered(),
            Check::Lra => matches!(proto, ProtoSpec::Lra(_)),
        }
    }

    /// Parses a comma-separated list; `all` selects every check.
    pub fn parse_list(s: &str) -> Result<Vec<Check>, String> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
            if part == "all" {
                out.extend(Check::ALL);
                continue;
            }
            let c = match part {
                "safety" | "liveness" | "metrics" | "election" => Check::Lra,
                "staircase" | "delay" => Check::Clock,
                _ => *Check::ALL
                    .iter()
                    .find(|c| c.name() == part)
                    .ok_or_else(|| format!("unknown check `{part}`"))?,
            };
            out.push(c);
        }
        out.sort();
        out.dedup();
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub topo: TopoSpec,
    pub proto: ProtoSpec,
    pub rho: u32,
    /// Clock overrides; `None` is automatic sizing from the graph.
    pub alpha: Option<u32>,
    pub k: Option<u32>,
    pub k2: Option<u32>,
    pub daemon: DaemonPolicy,
    pub seed: u64,
    pub init: InitMode,
    /// Step budget for the whole run.
    pub steps: usize,
    /// After convergence, run until every process decided this many times.
    pub phases: u64,
    /// Empty selects every applicable check except replay.
    pub checks: Vec<Check>,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            topo: TopoSpec::Gen(Generator::Ring { n: 8 }),
            proto: ProtoSpec::SsWs,
            rho: 1,
            alpha: None,
            k: None,
            k2: None,
            daemon: DaemonPolicy::DistributedRandom(0.5),
            seed: 0,
            init: InitMode::RandomArbitrary,
            steps: 200_000,
            phases: 10,
            checks: Vec::new(),
        }
    }
}

const KEYS: [&str; 12] = [
    "topo", "proto", "rho", "alpha", "k", "k2", "daemon", "seed", "init", "steps", "phases", "checks",
];

impl Scenario {
    /// Assigns one key. `auto` resets a clock override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ScenarioError> {
        let v = value.trim();
        let num = |what: &str| -> Result<u64, ScenarioError> { v.parse().map_err(|_| bad(what, format!("`{v}` is not a number"))) };
        let sized = |what: &str| -> Result<Option<u32>, ScenarioError> {
            if v == "auto" {
                return Ok(None);
            }
            let x: u32 = v.parse().map_err(|_| bad(what, format!("`{v}` is neither a number nor auto")))?;
            Ok(Some(x))
        };
        match key {
            "topo" => self.topo = v.parse().map_err(|e| bad(key, e))?,
            "proto" | "plugin" => self.proto = v.parse().map_err(|e| bad(key, e))?,
            "rho" => self.rho = num(key)? as u32,
            "alpha" => self.alpha = sized(key)?,
            "k" => self.k = sized(key)?,
            "k2" => self.k2 = sized(key)?,
            "daemon" => self.daemon = v.parse().map_err(|e| bad(key, e))?,
            "seed" => self.seed = num(key)?,
            "init" => self.init = v.parse().map_err(|e| bad(key, e))?,
            "steps" => self.steps = num(key)? as usize,
            "phases" => self.phases = num(key)?,
            "checks" => self.checks = Check::parse_list(v).map_err(|e| bad(key, e))?,
            _ => return Err(ScenarioError::UnknownKey(key.into())),
        }
        Ok(())
    }

    /// Applies `key = value` lines on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ScenarioError> {
        for raw in text.lines() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(line, "expected `key = value`"))?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let mut s = Scenario::default();
        s.apply_text(text)?;
        Ok(s)
    }

    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        let sized = |x: Option<u32>| x.map_or("auto".to_string(), |v| v.to_string());
        let checks: Vec<&str> = self.checks.iter().map(|c| c.name()).collect();
        KEYS.iter()
            .map(|&k| {
                let v = match k {
                    "topo" => self.topo.to_string(),
                    "proto" => self.proto.to_string(),
                    "rho" => self.rho.to_string(),
                    "alpha" => sized(self.alpha),
                    "k" => sized(self.k),
                    "k2" => sized(self.k2),
                    "daemon" => self.daemon.to_string(),
                    "seed" => self.seed.to_string(),
                    "init" => self.init.to_string(),
                    "steps" => self.steps.to_string(),
                    "phases" => self.phases.to_string(),
                    _ => checks.join(","),
                };
                (k, v)
            })
            .collect()
    }

    /// The checks a run performs.
    pub fn effective_checks(&self, with_replay: bool) -> Vec<Check> {
        let base: Vec<Check> = if self.checks.is_empty() {
            Check::ALL.iter().copied().filter(|&c| c != Check::Replay || with_replay).collect()
        } else {
            self.checks.clone()
        };
        base.into_iter().filter(|c| c.applies_to(&self.proto)).collect()
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.pairs() {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
