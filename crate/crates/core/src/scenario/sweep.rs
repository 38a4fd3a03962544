use std::io::Write;

use super::{execute, ProtoSpec, Scenario, ScenarioError, Summary, TopoSpec};
use crate::kernel::DaemonPolicy;
use crate::par::{self, Parallelism};
use crate::topology::Generator;

pub const CSV_HEADER: [&str; 11] = [
    "topo",
    "n",
    "rho",
    "daemon",
    "seed",
    "plugin",
    "stab_round",
    "violations",
    "fairness_index",
    "service_time",
    "comms_per_phase",
];

/// A parameter grid. Families without a size (`ring`, `path`, `tree`,
/// `complete`, `grid`, `random[:p]`) are instantiated at every `n`; a
/// fully specified topology is used once.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Grid {
    pub families: Vec<String>,
    pub ns: Vec<usize>,
    pub rhos: Vec<u32>,
    pub daemons: Vec<DaemonPolicy>,
    pub seeds: Vec<u64>,
    pub protos: Vec<ProtoSpec>,
    /// Everything else (init, budgets, checks).
    pub base: Scenario,
}

fn list<T>(key: &str, v: &str, f: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, ScenarioError> {
    v.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| {
            f(x).map_err(|msg| ScenarioError::Config {
                key: key.into(),
                msg,
            })
        })
        .collect()
}

/// `a..b` (half-open) or a comma list.
fn numbers<T: TryFrom<u64>>(key: &str, v: &str) -> Result<Vec<T>, ScenarioError> {
    let conv = |x: u64| T::try_from(x).map_err(|_| format!("{x} out of range"));
    if let Some((a, b)) = v.trim().split_once("..") {
        let parse = |s: &str| {
            s.trim().parse::<u64>().map_err(|_| ScenarioError::Config {
                key: key.into(),
                msg: format!("bad range `{v}`"),
            })
        };
        return (parse(a)?..parse(b)?)
            .map(|x| conv(x).map_err(|msg| ScenarioError::Config { key: key.into(), msg }))
            .collect();
    }
    list(key, v, |x| conv(x.parse::<u64>().map_err(|_| format!("`{x}` is not a number"))?))
}

impl Grid {
    /// Grid keys (`topos`, `ns`, `rhos`, `daemons`, `seeds`, `protos`) take
    /// lists; any other key sets the base scenario.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ScenarioError> {
        match key {
            "topos" | "families" => self.families = list(key, value, |x| Ok(x.to_string()))?,
            "ns" => self.ns = numbers(key, value)?,
            "rhos" => self.rhos = numbers(key, value)?,
            "seeds" => self.seeds = numbers(key, value)?,
            "daemons" => self.daemons = list(key, value, |x| x.parse())?,
            "protos" | "plugins" => self.protos = list(key, value, |x| x.parse())?,
            _ => self.base.set(key, value)?,
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let mut g = Grid::default();
        for raw in text.lines() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ScenarioError::Config {
                key: line.into(),
                msg: "expected `key = value`".into(),
            })?;
            g.set(k.trim(), v)?;
        }
        Ok(g)
    }

    fn topologies(&self) -> Result<Vec<TopoSpec>, ScenarioError> {
        let mut out = Vec::new();
        for fam in &self.families {
            let (kind, arg) = match fam.split_once(':') {
                Some((k, a)) => (k, Some(a)),
                None => (fam.as_str(), None),
            };
            let sized = |n: usize| -> Option<Generator> {
                Some(match (kind, arg) {
                    ("ring", None) => Generator::Ring { n },
                    ("path", None) => Generator::Path { n },
                    ("tree", None) => Generator::Tree { n },
                    ("complete", None) => Generator::Complete { n },
                    ("grid", None) => {
                        let rows = (1..=n).take_while(|r| r * r <= n).filter(|r| n.is_multiple_of(*r)).max().unwrap_or(1);
                        Generator::Grid { rows, cols: n / rows }
                    }
                    ("random" | "random_connected", p) => {
                        let p = match p {
                            None => 0.2,
                            Some(x) if !x.contains(':') && x.contains('.') => x.parse().ok()?,
                            Some(_) => return None,
                        };
                        Generator::RandomConnected { n, p }
                    }
                    _ => return None,
                })
            };
            if sized(2).is_some() {
                out.extend(self.ns.iter().filter_map(|&n| sized(n)).map(TopoSpec::Gen));
            } else {
                out.push(fam.parse().map_err(|msg| ScenarioError::Config {
                    key: "topos".into(),
                    msg,
                })?);
            }
        }
        Ok(out)
    }

    /// Every cell, in key order: topology, rho, daemon, seed, protocol.
    pub fn cells(&self) -> Result<Vec<Scenario>, ScenarioError> {
        let mut out = Vec::new();
        for topo in self.topologies()? {
            for &rho in &self.rhos {
                for daemon in &self.daemons {
                    for &seed in &self.seeds {
                        for &proto in &self.protos {
                            out.push(Scenario {
                                topo: topo.clone(),
                                proto,
                                rho,
                                daemon: daemon.clone(),
                                seed,
                                ..self.base.clone()
                            });
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// One CSV row, plus the full summary when the cell ran.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub scenario: Scenario,
    pub outcome: Result<Summary, String>,
}

impl SweepRow {
    pub fn record(&self) -> Vec<String> {
        let s = &self.scenario;
        let opt = |x: Option<u64>| x.map_or(String::new(), |v| v.to_string());
        let (n, stab, violations, fair, service, comms) = match &self.outcome {
            Ok(sum) => {
                let lra = sum.lra.as_ref();
                (
                    sum.n.to_string(),
                    opt(sum.stab_round.map(|r| r as u64)),
                    sum.violations().to_string(),
                    opt(lra.and_then(|l| l.fairness_index)),
                    opt(lra.and_then(|l| l.service_time)),
                    opt(lra.and_then(|l| l.comms_per_phase)),
                )
            }
            Err(e) => (String::new(), String::new(), format!("error: {e}"), String::new(), String::new(), String::new()),
        };
        vec![
            s.topo.to_string(),
            n,
            s.rho.to_string(),
            s.daemon.to_string(),
            s.seed.to_string(),
            s.proto.to_string(),
            stab,
            violations,
            fair,
            service,
            comms,
        ]
    }
}

/// Runs every cell share-nothing. A failing cell becomes an error row; the
/// sweep goes on. Rows come back in cell order whatever the parallelism.
pub fn run_sweep(grid: &Grid, mode: Parallelism) -> Result<Vec<SweepRow>, ScenarioError> {
    let cells = grid.cells()?;
    Ok(par::map(mode, &cells, |s| SweepRow {
        scenario: s.clone(),
        outcome: execute(s).map(|e| e.summary).map_err(|e| e.to_string()),
    }))
}

pub fn write_csv(rows: &[SweepRow], w: impl Write) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for r in rows {
        out.write_record(r.record())?;
    }
    out.flush()?;
    Ok(())
}
