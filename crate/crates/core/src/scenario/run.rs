use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{Check, InitMode, ProtoSpec, Scenario, ScenarioError};
use crate::causality::{build_event_graph, check_wavelet, cut_for_level};
use crate::infimum::{analyze_infimum, make_infimum, InfState, InfimumHooks, InputSource};
use crate::kernel::{revalidate, rounds, rounds_to, Daemon, Engine, Protocol, Stop, StopReason, Trace};
use crate::layerclock::{
    build_ss_dc, check_slave_gating, first_wu_indices, stable_start, verify_delay_agreement, DcParams, DcState,
    LayerPlugin, SsDc, TrivialPlugin,
};
use crate::lra::{
    check_election, cs_records, make_lra_plugin, metrics, monitor_liveness, monitor_safety, Lra, LraPayload,
    SafetyViolation,
};
use crate::topology::Topology;
use crate::unison::{build_ss_ws, is_wu, is_wu0, lift_from, Clock, NoHooks, SsWs, WsParams, WsState};

/// Violations kept verbatim in a summary.
const EXAMPLES: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveletVerdict {
    pub levels: usize,
    pub violations: usize,
    pub first: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfimumVerdict {
    pub op: String,
    pub phases: usize,
    pub mismatches: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClockVerdict {
    pub first_wu1: Option<usize>,
    pub first_wu2: Option<usize>,
    pub first_wu: Option<usize>,
    pub staircase: bool,
    pub gating_violations: usize,
    pub delay_pairs: u64,
    pub delay_disagreements: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LraVerdict {
    pub records: usize,
    pub violations: usize,
    pub examples: Vec<SafetyViolation>,
    pub min_count: u64,
    pub max_abs_pot: i64,
    pub pot_bound: i64,
    pub fairness_index: Option<u64>,
    /// `ceil(D / rho)`.
    pub fairness_bound: Option<u64>,
    pub service_time: Option<u64>,
    /// `ceil(n (n - 1) / rho)`.
    pub service_bound: Option<u64>,
    pub comms_per_phase: Option<u64>,
    /// `2 (rho + 1) |E|`.
    pub comms_expected: u64,
    pub partial: bool,
    pub election_phases: usize,
    pub election_mismatches: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub protocol: String,
    pub topo: String,
    pub n: usize,
    pub edges: usize,
    pub diameter: u32,
    pub rho: u32,
    pub daemon: String,
    pub seed: u64,
    pub steps: usize,
    /// `reached`, `budget` or `quiescent`.
    pub stop: String,
    /// First configuration in unison (both clocks for layered protocols).
    pub stab_index: Option<usize>,
    pub stab_round: Option<usize>,
    pub wavelet: Option<WaveletVerdict>,
    pub infimum: Option<InfimumVerdict>,
    pub clock: Option<ClockVerdict>,
    pub lra: Option<LraVerdict>,
    /// Analyses that could not run.
    pub errors: Vec<String>,
}

impl Summary {
    pub fn violations(&self) -> u64 {
        let mut v = 0;
        if let Some(w) = &self.wavelet {
            v += w.violations as u64;
        }
        if let Some(i) = &self.infimum {
            v += i.mismatches as u64;
        }
        if let Some(c) = &self.clock {
            v += c.gating_violations as u64 + c.delay_disagreements + u64::from(!c.staircase);
        }
        if let Some(l) = &self.lra {
            v += l.violations as u64 + l.election_mismatches as u64;
        }
        v
    }

    /// Converged, every analysis ran, nothing violated.
    pub fn passed(&self) -> bool {
        self.stab_index.is_some() && self.errors.is_empty() && self.violations() == 0
    }

    /// Equal on every verdict both summaries carry.
    pub fn agrees_with(&self, other: &Summary) -> bool {
        fn same<T: PartialEq>(a: &Option<T>, b: &Option<T>) -> bool {
            match (a, b) {
                (Some(x), Some(y)) => x == y,
                _ => true,
            }
        }
        self.stab_index == other.stab_index
            && self.steps == other.steps
            && same(&self.wavelet, &other.wavelet)
            && same(&self.infimum, &other.infimum)
            && same(&self.clock, &other.clock)
            && same(&self.lra, &other.lra)
    }

    /// Human-readable report.
    pub fn render(&self) -> String {
        let mut s = format!(
            "{} on {} (n={}, |E|={}, D={}), rho={}, daemon {}, seed {}\n",
            self.protocol, self.topo, self.n, self.edges, self.diameter, self.rho, self.daemon, self.seed
        );
        s += &format!("steps: {} ({})\n", self.steps, self.stop);
        match (self.stab_index, self.stab_round) {
            (Some(i), Some(r)) => s += &format!("stabilized: configuration {i}, round {r}\n"),
            _ => s += "stabilized: no\n",
        }
        if let Some(w) = &self.wavelet {
            s += &format!("wavelet: {} levels, {} violations\n", w.levels, w.violations);
            if let Some(f) = &w.first {
                s += &format!("  first: {f}\n");
            }
        }
        if let Some(i) = &self.infimum {
            s += &format!("infimum ({}): {} phases, {} mismatches\n", i.op, i.phases, i.mismatches);
        }
        if let Some(c) = &self.clock {
            s += &format!(
                "clock: staircase {} (WU1 {:?}, WU {:?}), gating violations {}, delay disagreements {}/{}\n",
                if c.staircase { "ok" } else { "FAILED" },
                c.first_wu1,
                c.first_wu,
                c.gating_violations,
                c.delay_disagreements,
                c.delay_pairs
            );
        }
        if let Some(l) = &self.lra {
            s += &format!("critical sections: {} (min per process {})\n", l.records, l.min_count);
            s += &format!("safety violations: {}\n", l.violations);
            for v in &l.examples {
                s += &format!(
                    "  {} ({:?}) and {} ({:?}) at distance {}, steps {} / {}\n",
                    v.a.node, v.a.resource, v.b.node, v.b.resource, v.distance, v.a.entry, v.b.entry
                );
            }
            let opt = |x: Option<u64>| x.map_or("-".to_string(), |v| v.to_string());
            s += &format!("fairness index: {} (bound {})\n", opt(l.fairness_index), opt(l.fairness_bound));
            s += &format!("service time: {} (bound {})\n", opt(l.service_time), opt(l.service_bound));
            s += &format!("reads per phase: {} (2(rho+1)|E| = {})\n", opt(l.comms_per_phase), l.comms_expected);
            s += &format!("potential: max |Pot| {} (bound {})\n", l.max_abs_pot, l.pot_bound);
            s += &format!("election: {} phases, {} mismatches\n", l.election_phases, l.election_mismatches);
            if l.partial {
                s += "note: some process entered fewer than twice, fairness is partial\n";
            }
        }
        for e in &self.errors {
            s += &format!("error: {e}\n");
        }
        s += if self.passed() { "verdict: PASS\n" } else { "verdict: FAIL\n" };
        s
    }
}

/// A recorded execution of whichever protocol the scenario named.
#[derive(Clone, Debug)]
pub enum RunTrace {
    Ws(Trace<WsState<()>>),
    Infimum(Trace<WsState<InfState>>),
    Clock(Trace<DcState<()>>),
    Lra(Trace<DcState<LraPayload>>),
}

impl RunTrace {
    pub fn len(&self) -> usize {
        match self {
            RunTrace::Ws(t) => t.len(),
            RunTrace::Infimum(t) => t.len(),
            RunTrace::Clock(t) => t.len(),
            RunTrace::Lra(t) => t.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn write_jsonl(&self, meta: &serde_json::Value, w: impl Write) -> Result<(), ScenarioError> {
        match self {
            RunTrace::Ws(t) => t.write_jsonl(meta, w)?,
            RunTrace::Infimum(t) => t.write_jsonl(meta, w)?,
            RunTrace::Clock(t) => t.write_jsonl(meta, w)?,
            RunTrace::Lra(t) => t.write_jsonl(meta, w)?,
        }
        Ok(())
    }
}

pub struct Execution {
    pub scenario: Scenario,
    pub topo: Topology,
    pub summary: Summary,
    pub trace: RunTrace,
}

impl Execution {
    /// JSON-lines trace whose header carries the scenario and the summary.
    pub fn write_trace(&self, w: impl Write) -> Result<(), ScenarioError> {
        let scenario: serde_json::Map<String, serde_json::Value> = self
            .scenario
            .pairs()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v.into()))
            .collect();
        let meta = serde_json::json!({ "scenario": scenario, "summary": self.summary });
        self.trace.write_jsonl(&meta, w)
    }
}

enum Built {
    Ws(SsWs<NoHooks>),
    Infimum(SsWs<InfimumHooks>),
    Clock(SsDc<TrivialPlugin>),
    Lra(SsDc<Lra>),
}

fn build(s: &Scenario, topo: &Topology) -> Result<Built, ScenarioError> {
    let ws = |phase_len: u32| {
        let mut p = WsParams::auto(topo, s.rho, phase_len);
        p.alpha = s.alpha.unwrap_or(p.alpha);
        p.k = s.k.unwrap_or(p.k);
        p
    };
    let mut dc = DcParams::auto(topo, s.rho);
    if let Some(a) = s.alpha {
        dc.alpha1 = a;
        dc.alpha2 = a;
    }
    dc.k1 = s.k.unwrap_or(dc.k1);
    dc.k2 = s.k2.unwrap_or(dc.k2);
    Ok(match s.proto {
        ProtoSpec::SsWs => Built::Ws(build_ss_ws(topo, ws(s.rho.max(1)), NoHooks)?),
        ProtoSpec::Infimum(kind) => {
            let hooks = InfimumHooks::new(make_infimum(kind), InputSource::Random(s.seed));
            Built::Infimum(build_ss_ws(topo, ws(s.rho + 1), hooks)?)
        }
        ProtoSpec::LayerClock => Built::Clock(build_ss_dc(topo, dc, TrivialPlugin)?),
        ProtoSpec::Lra(kind) => {
            let plugin = make_lra_plugin(topo, s.rho, dc.k2, kind, s.seed, None)?;
            Built::Lra(build_ss_dc(topo, dc, plugin)?)
        }
    })
}

fn initial<P: Protocol>(
    proto: &P,
    n: usize,
    s: &Scenario,
    uniform: &dyn Fn(&mut ChaCha8Rng) -> Vec<Clock>,
    set: &dyn Fn(&mut P::State, &[Clock]),
) -> Result<Vec<P::State>, ScenarioError>
where
    P::State: DeserializeOwned,
{
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    rng.set_stream(1);
    match &s.init {
        InitMode::RandomArbitrary => Ok((0..n).map(|v| proto.arbitrary_state(v, &mut rng)).collect()),
        InitMode::Wu0Uniform => {
            let clocks = uniform(&mut rng);
            Ok((0..n)
                .map(|v| {
                    let mut st = proto.initial_state(v);
                    set(&mut st, &clocks);
                    st
                })
                .collect())
        }
        InitMode::File(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
                path: path.clone(),
                source,
            })?;
            let arity = uniform(&mut rng).len();
            let states = match serde_json::from_str::<Vec<P::State>>(&text) {
                Ok(states) => states,
                Err(_) => {
                    let rows: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).collect();
                    let mut out = Vec::with_capacity(rows.len());
                    for (v, row) in rows.iter().enumerate() {
                        let clocks = row
                            .split_whitespace()
                            .map(|x| x.parse::<Clock>())
                            .collect::<Result<Vec<_>, _>>()
                            .map_err(|_| ScenarioError::Init(format!("row {}: `{row}` is not a clock row", v + 1)))?;
                        if clocks.len() != arity {
                            return Err(ScenarioError::Init(format!("row {}: expected {arity} clock(s)", v + 1)));
                        }
                        let mut st = proto.initial_state(v.min(n.saturating_sub(1)));
                        set(&mut st, &clocks);
                        out.push(st);
                    }
                    out
                }
            };
            if states.len() != n {
                return Err(ScenarioError::Init(format!("{} states for {n} processes", states.len())));
            }
            Ok(states)
        }
    }
}

fn drive<P: Protocol>(
    proto: &P,
    topo: &Topology,
    s: &Scenario,
    init: Vec<P::State>,
    converged: &dyn Fn(&[P::State]) -> bool,
) -> Result<(Trace<P::State>, &'static str), ScenarioError> {
    let n = topo.node_count();
    let mut e = Engine::new(proto, topo, Daemon::new(s.daemon.clone(), s.seed, n), init)?;
    let name = |r: StopReason| match r {
        StopReason::Reached(_) => "reached",
        StopReason::Budget => "budget",
        StopReason::Quiescent => "quiescent",
    };
    let stop = match e.run(&Stop::until(s.steps, converged))? {
        StopReason::Reached(_) => {
            let left = s.steps - e.steps();
            name(e.run_decides(s.phases, left)?)
        }
        other => name(other),
    };
    Ok((e.into_trace(), stop))
}

fn skeleton(s: &Scenario, topo: &Topology, steps: usize, stop: &str) -> Summary {
    Summary {
        protocol: s.proto.to_string(),
        topo: s.topo.to_string(),
        n: topo.node_count(),
        edges: topo.edge_count(),
        diameter: topo.diameter(),
        rho: s.rho,
        daemon: s.daemon.to_string(),
        seed: s.seed,
        steps,
        stop: stop.into(),
        stab_index: None,
        stab_round: None,
        wavelet: None,
        infimum: None,
        clock: None,
        lra: None,
        errors: Vec::new(),
    }
}

fn stabilized<S: Clone>(sum: &mut Summary, trace: &Trace<S>, index: Option<usize>) {
    sum.stab_index = index;
    sum.stab_round = index.map(|i| rounds_to(&rounds(trace), i));
}

fn ws_clocks<T>(c: &[WsState<T>]) -> Vec<Clock> {
    c.iter().map(|s| s.r).collect()
}

fn wavelets(trace: &Trace<WsState<()>>, topo: &Topology, proto: &SsWs<NoHooks>) -> Result<WaveletVerdict, String> {
    let sys = proto.system();
    let rho = proto.params().rho;
    let start = trace
        .first_index(|c| is_wu0(&ws_clocks(c), topo, sys))
        .ok_or("no WU0 configuration")?;
    let lifted = lift_from(trace, start, topo, sys, |s| s.r).map_err(|e| e.to_string())?;
    let g = build_event_graph(trace, topo);
    let d = topo.diameter();
    let mut out = WaveletVerdict {
        levels: 0,
        violations: 0,
        first: None,
    };
    for k in lifted.bottom() + d as i64..=lifted.max_common_level() - rho as i64 {
        let c1 = cut_for_level(&g, &lifted, k, d).map_err(|e| e.to_string())?;
        let c2 = cut_for_level(&g, &lifted, k + rho as i64, d).map_err(|e| e.to_string())?;
        out.levels += 1;
        let verdict = check_wavelet(&g, topo, &c1, &c2, &c2.events(&g), rho);
        let problem = match verdict {
            Ok(None) => None,
            Ok(Some(v)) => Some(format!("level {k}: {v:?}")),
            Err(e) => Some(format!("level {k}: {e}")),
        };
        if let Some(p) = problem {
            out.violations += 1;
            out.first.get_or_insert(p);
        }
    }
    Ok(out)
}

fn clock_verdict<P: LayerPlugin>(
    trace: &Trace<DcState<P::Payload>>,
    topo: &Topology,
    dc: &SsDc<P>,
    sum: &mut Summary,
    check: bool,
) {
    let st = first_wu_indices(trace, topo, dc);
    stabilized(sum, trace, st.first_wu);
    if !check {
        return;
    }
    let (gating, delays) = match stable_start(trace, topo, dc) {
        Ok(start) => (
            check_slave_gating(trace, dc, start).len(),
            verify_delay_agreement(trace, topo, dc, 1).map_err(|e| e.to_string()),
        ),
        Err(e) => (0, Err(e.to_string())),
    };
    let (pairs, disagreements) = match delays {
        Ok(r) => (r.pairs_checked, r.disagreement_count),
        Err(e) => {
            sum.errors.push(format!("clock: {e}"));
            (0, 0)
        }
    };
    sum.clock = Some(ClockVerdict {
        first_wu1: st.first_wu1,
        first_wu2: st.first_wu2,
        first_wu: st.first_wu,
        staircase: st.holds(),
        gating_violations: gating,
        delay_pairs: pairs,
        delay_disagreements: disagreements,
    });
}

fn lra_verdict(trace: &Trace<DcState<LraPayload>>, topo: &Topology, dc: &SsDc<Lra>) -> Result<LraVerdict, String> {
    let rho = dc.params().rho;
    let n = topo.node_count() as u64;
    let (_, recs) = cs_records(trace, topo, dc).map_err(|e| e.to_string())?;
    let violations = monitor_safety(&recs, topo, rho);
    let live = monitor_liveness(trace, topo, dc, &recs).map_err(|e| e.to_string())?;
    let m = metrics(trace, topo, dc, &recs).map_err(|e| e.to_string())?;
    let election = check_election(trace, topo, dc).map_err(|e| e.to_string())?;
    let per_rho = |x: u64| (rho > 0).then(|| x.div_ceil(rho as u64));
    Ok(LraVerdict {
        records: recs.len(),
        violations: violations.len(),
        examples: violations.into_iter().take(EXAMPLES).collect(),
        min_count: live.min_count(),
        max_abs_pot: live.max_abs_pot,
        pot_bound: live.pot_bound,
        fairness_index: m.fairness_index,
        fairness_bound: per_rho(topo.diameter() as u64),
        service_time: m.service_time,
        service_bound: per_rho(n * n.saturating_sub(1)),
        comms_per_phase: m.comms_per_phase,
        comms_expected: 2 * (rho as u64 + 1) * topo.edge_count() as u64,
        partial: m.partial,
        election_phases: election.phases.len(),
        election_mismatches: election.mismatches(),
    })
}

fn analyze(built: &Built, topo: &Topology, trace: &RunTrace, s: &Scenario, stop: &str, checks: &[Check]) -> Summary {
    let mut sum = skeleton(s, topo, trace.len(), stop);
    let on = |c: Check| checks.contains(&c);
    match (built, trace) {
        (Built::Ws(p), RunTrace::Ws(t)) => {
            stabilized(&mut sum, t, t.first_index(|c| is_wu(&ws_clocks(c), topo, p.system())));
            if on(Check::Wavelet) {
                match wavelets(t, topo, p) {
                    Ok(w) => sum.wavelet = Some(w),
                    Err(e) => sum.errors.push(format!("wavelet: {e}")),
                }
            }
        }
        (Built::Infimum(p), RunTrace::Infimum(t)) => {
            stabilized(&mut sum, t, t.first_index(|c| is_wu(&ws_clocks(c), topo, p.system())));
            if on(Check::Infimum) {
                match analyze_infimum(t, topo, p) {
                    Ok(r) => {
                        sum.infimum = Some(InfimumVerdict {
                            op: p.hooks().op().name().to_string(),
                            phases: r.phases.len(),
                            mismatches: r.mismatches(),
                        })
                    }
                    Err(e) => sum.errors.push(format!("infimum: {e}")),
                }
            }
        }
        (Built::Clock(dc), RunTrace::Clock(t)) => clock_verdict(t, topo, dc, &mut sum, on(Check::Clock)),
        (Built::Lra(dc), RunTrace::Lra(t)) => {
            clock_verdict(t, topo, dc, &mut sum, on(Check::Clock));
            if on(Check::Lra) {
                match lra_verdict(t, topo, dc) {
                    Ok(v) => sum.lra = Some(v),
                    Err(e) => sum.errors.push(format!("lra: {e}")),
                }
            }
        }
        _ => unreachable!("trace kind follows the protocol"),
    }
    sum
}

/// Builds, runs and analyses a scenario. Sizing violations are refused
/// before anything runs.
pub fn execute(s: &Scenario) -> Result<Execution, ScenarioError> {
    let topo = s.topo.build(s.seed)?;
    let built = build(s, &topo)?;
    let n = topo.node_count();
    let (trace, stop) = match &built {
        Built::Ws(p) => {
            let period = p.system().period() as Clock;
            let init = initial(p, n, s, &|r| vec![r.random_range(0..period)], &|st, c| st.r = c[0])?;
            let sys = *p.system();
            let (t, stop) = drive(p, &topo, s, init, &|c| is_wu(&ws_clocks(c), &topo, &sys))?;
            (RunTrace::Ws(t), stop)
        }
        Built::Infimum(p) => {
            let period = p.system().period() as Clock;
            let init = initial(p, n, s, &|r| vec![r.random_range(0..period)], &|st, c| st.r = c[0])?;
            let sys = *p.system();
            let (t, stop) = drive(p, &topo, s, init, &|c| is_wu(&ws_clocks(c), &topo, &sys))?;
            (RunTrace::Infimum(t), stop)
        }
        Built::Clock(dc) => {
            let (t, stop) = drive_dc(dc, &topo, s)?;
            (RunTrace::Clock(t), stop)
        }
        Built::Lra(dc) => {
            let (t, stop) = drive_dc(dc, &topo, s)?;
            (RunTrace::Lra(t), stop)
        }
    };
    let summary = analyze(&built, &topo, &trace, s, stop, &s.effective_checks(false));
    Ok(Execution {
        scenario: s.clone(),
        topo,
        summary,
        trace,
    })
}

type DcRun<T> = (Trace<DcState<T>>, &'static str);

fn drive_dc<P: LayerPlugin>(dc: &SsDc<P>, topo: &Topology, s: &Scenario) -> Result<DcRun<P::Payload>, ScenarioError>
where
    P::Payload: DeserializeOwned,
{
    let (p1, p2) = (dc.master().period() as Clock, dc.slave().period() as Clock);
    let init = initial(
        dc,
        topo.node_count(),
        s,
        &|r| vec![r.random_range(0..p1), r.random_range(0..p2)],
        &|st, c| {
            st.r1 = c[0];
            st.r2 = c[1];
        },
    )?;
    let (m, sl) = (*dc.master(), *dc.slave());
    let both = |c: &[DcState<P::Payload>]| {
        is_wu(&c.iter().map(|s| s.r1).collect::<Vec<_>>(), topo, &m)
            && is_wu(&c.iter().map(|s| s.r2).collect::<Vec<_>>(), topo, &sl)
    };
    drive(dc, topo, s, init, &both)
}

/// Outcome of re-checking a trace file.
#[derive(Clone, Debug)]
pub struct TraceCheck {
    pub scenario: Scenario,
    pub summary: Summary,
    /// The summary written at run time, if the header has one.
    pub recorded: Option<Summary>,
    /// `None` when replay was not requested.
    pub replay: Option<Result<(), String>>,
}

impl TraceCheck {
    pub fn agrees(&self) -> bool {
        self.recorded.as_ref().is_none_or(|r| r.agrees_with(&self.summary))
    }

    pub fn passed(&self) -> bool {
        self.summary.passed() && !matches!(self.replay, Some(Err(_))) && self.agrees()
    }
}

fn read<S: Clone + Serialize + DeserializeOwned>(
    actions: &[crate::kernel::ActionSpec],
    text: &str,
) -> Result<Trace<S>, ScenarioError> {
    Ok(Trace::read_jsonl(actions, text.as_bytes())?.1)
}

/// Re-runs the selected analyses on a trace file written by
/// [`Execution::write_trace`]. `checks = None` runs every applicable one,
/// replay included.
pub fn check_trace(text: &str, checks: Option<&[Check]>) -> Result<TraceCheck, ScenarioError> {
    let corrupt = |msg: String| ScenarioError::Trace(crate::kernel::TraceError::Corrupt { line: 1, msg });
    let first = text.lines().next().ok_or_else(|| corrupt("empty trace".into()))?;
    let header: serde_json::Value = serde_json::from_str(first).map_err(|e| corrupt(e.to_string()))?;
    let pairs = header
        .pointer("/meta/scenario")
        .and_then(|v| v.as_object())
        .ok_or_else(|| corrupt("header carries no scenario".into()))?;
    let mut s = Scenario::default();
    for (k, v) in pairs {
        s.set(k, v.as_str().unwrap_or_default())?;
    }
    let recorded = header
        .pointer("/meta/summary")
        .map(|v| serde_json::from_value::<Summary>(v.clone()))
        .transpose()
        .map_err(|e| corrupt(e.to_string()))?;
    let checks: Vec<Check> = match checks {
        Some(c) => c.iter().copied().filter(|c| c.applies_to(&s.proto)).collect(),
        None => Check::ALL.iter().copied().filter(|c| c.applies_to(&s.proto)).collect(),
    };
    let topo = s.topo.build(s.seed)?;
    let built = build(&s, &topo)?;
    let stop = recorded.as_ref().map_or("unknown".to_string(), |r| r.stop.clone());
    let want_replay = checks.contains(&Check::Replay);
    let (trace, replay) = match &built {
        Built::Ws(p) => {
            let t = read(p.actions(), text)?;
            let r = want_replay.then(|| revalidate(p, &topo, &t).map_err(|e| e.to_string()));
            (RunTrace::Ws(t), r)
        }
        Built::Infimum(p) => {
            let t = read(p.actions(), text)?;
            let r = want_replay.then(|| revalidate(p, &topo, &t).map_err(|e| e.to_string()));
            (RunTrace::Infimum(t), r)
        }
        Built::Clock(dc) => {
            let t = read(dc.actions(), text)?;
            let r = want_replay.then(|| revalidate(dc, &topo, &t).map_err(|e| e.to_string()));
            (RunTrace::Clock(t), r)
        }
        Built::Lra(dc) => {
            let t = read(dc.actions(), text)?;
            let r = want_replay.then(|| revalidate(dc, &topo, &t).map_err(|e| e.to_string()));
            (RunTrace::Lra(t), r)
        }
    };
    let summary = analyze(&built, &topo, &trace, &s, &stop, &checks);
    Ok(TraceCheck {
        scenario: s,
        summary,
        recorded,
        replay,
    })
}
