use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{ActionId, ActionSpec};
use crate::topology::NodeId;

/// One atomic step. Vectors indexed in parallel by selection order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition<S> {
    pub selected: Vec<NodeId>,
    pub fired: Vec<ActionId>,
    pub decide: Vec<bool>,
    /// Distinct neighbours read by the fired guard and statement.
    pub reads: Vec<u32>,
    /// Post-step states of the selected processes.
    pub states: Vec<S>,
    /// Enabled before the step, disabled after, without having acted.
    pub neutralized: Vec<NodeId>,
}

impl<S> Transition<S> {
    pub fn total_reads(&self) -> u64 {
        self.reads.iter().map(|&r| r as u64).sum()
    }
}

/// A recorded execution `γ₀ → γ₁ → …`.
///
/// Configurations are not stored; only the changed registers of each step.
/// Use [`Replay`] to walk configurations.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace<S> {
    pub(crate) actions: Vec<ActionSpec>,
    pub(crate) initial: Vec<S>,
    pub(crate) transitions: Vec<Transition<S>>,
    /// `enabled[i]` lists processes enabled in configuration `i`.
    pub(crate) enabled: Vec<Vec<NodeId>>,
}

impl<S: Clone> Trace<S> {
    pub(crate) fn new(actions: Vec<ActionSpec>, initial: Vec<S>, enabled: Vec<NodeId>) -> Self {
        Self {
            actions,
            initial,
            transitions: Vec::new(),
            enabled: vec![enabled],
        }
    }

    pub fn actions(&self) -> &[ActionSpec] {
        &self.actions
    }

    pub fn label(&self, a: ActionId) -> &'static str {
        self.actions[a].label
    }

    pub fn node_count(&self) -> usize {
        self.initial.len()
    }

    pub fn initial(&self) -> &[S] {
        &self.initial
    }

    pub fn transitions(&self) -> &[Transition<S>] {
        &self.transitions
    }

    /// Number of transitions; configurations are indexed `0..=len()`.
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn enabled_at(&self, config: usize) -> &[NodeId] {
        &self.enabled[config]
    }

    pub fn replay(&self) -> Replay<'_, S> {
        Replay {
            trace: self,
            config: self.initial.clone(),
            index: 0,
        }
    }

    /// Final configuration (replays the whole trace).
    pub fn last_config(&self) -> Vec<S> {
        let mut r = self.replay();
        while r.advance() {}
        r.config
    }

    /// First configuration index satisfying `pred`.
    pub fn first_index(&self, pred: impl Fn(&[S]) -> bool) -> Option<usize> {
        let mut r = self.replay();
        loop {
            if pred(r.config()) {
                return Some(r.index());
            }
            if !r.advance() {
                return None;
            }
        }
    }

    pub fn history(&self) -> History<S> {
        let mut writes: Vec<Vec<(usize, S)>> = self.initial.iter().map(|s| vec![(0, s.clone())]).collect();
        for (i, t) in self.transitions.iter().enumerate() {
            for (&p, s) in t.selected.iter().zip(&t.states) {
                writes[p].push((i + 1, s.clone()));
            }
        }
        History { writes }
    }

    /// Number of firings of each action.
    pub fn action_counts(&self) -> Vec<u64> {
        let mut counts = vec![0; self.actions.len()];
        for t in &self.transitions {
            for &a in &t.fired {
                counts[a] += 1;
            }
        }
        counts
    }

    pub(crate) fn push(&mut self, t: Transition<S>, enabled_after: Vec<NodeId>) {
        self.transitions.push(t);
        self.enabled.push(enabled_after);
    }
}

/// Per-process register history, for reading cuts without replaying.
#[derive(Clone, Debug)]
pub struct History<S> {
    writes: Vec<Vec<(usize, S)>>,
}

impl<S> History<S> {
    /// State of `p` in configuration `index`.
    pub fn state_at(&self, p: NodeId, index: usize) -> &S {
        let w = &self.writes[p];
        let i = w.partition_point(|(t, _)| *t <= index);
        &w[i - 1].1
    }

    /// `(configuration index, state)` for every write of `p`, starting with
    /// the initial state at index 0.
    pub fn writes(&self, p: NodeId) -> &[(usize, S)] {
        &self.writes[p]
    }
}

/// Forward iterator over the configurations of a trace.
pub struct Replay<'t, S> {
    trace: &'t Trace<S>,
    config: Vec<S>,
    index: usize,
}

impl<S: Clone> Replay<'_, S> {
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn config(&self) -> &[S] {
        &self.config
    }

    /// The transition leaving the current configuration.
    pub fn next_transition(&self) -> Option<&Transition<S>> {
        self.trace.transitions.get(self.index)
    }

    /// Applies the next transition; false at the end of the trace.
    pub fn advance(&mut self) -> bool {
        let Some(t) = self.trace.transitions.get(self.index) else {
            return false;
        };
        for (&p, s) in t.selected.iter().zip(&t.states) {
            self.config[p] = s.clone();
        }
        self.index += 1;
        true
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("trace i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("trace line {line}: {msg}")]
    Corrupt { line: usize, msg: String },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Record<S> {
    Header {
        meta: serde_json::Value,
        actions: Vec<String>,
        internal: Vec<bool>,
        initial: Vec<S>,
        enabled: Vec<NodeId>,
    },
    Step {
        step: usize,
        selected: Vec<NodeId>,
        fired: Vec<String>,
        decide: Vec<bool>,
        reads: Vec<u32>,
        reads_total: u64,
        neutralized: Vec<NodeId>,
        changed: Vec<S>,
        enabled: Vec<NodeId>,
    },
    End {
        steps: usize,
    },
}

impl<S: Clone + Serialize + DeserializeOwned> Trace<S> {
    /// JSON-lines: a header, one record per transition, and an end marker.
    pub fn write_jsonl(&self, meta: &serde_json::Value, mut w: impl Write) -> Result<(), TraceError> {
        let header: Record<S> = Record::Header {
            meta: meta.clone(),
            actions: self.actions.iter().map(|a| a.label.to_string()).collect(),
            internal: self.actions.iter().map(|a| a.internal).collect(),
            initial: self.initial.clone(),
            enabled: self.enabled[0].clone(),
        };
        writeln!(w, "{}", serde_json::to_string(&header).map_err(std::io::Error::other)?)?;
        for (i, t) in self.transitions.iter().enumerate() {
            let rec: Record<S> = Record::Step {
                step: i,
                selected: t.selected.clone(),
                fired: t.fired.iter().map(|&a| self.actions[a].label.to_string()).collect(),
                decide: t.decide.clone(),
                reads: t.reads.clone(),
                reads_total: t.total_reads(),
                neutralized: t.neutralized.clone(),
                changed: t.states.clone(),
                enabled: self.enabled[i + 1].clone(),
            };
            writeln!(w, "{}", serde_json::to_string(&rec).map_err(std::io::Error::other)?)?;
        }
        let end: Record<S> = Record::End {
            steps: self.transitions.len(),
        };
        writeln!(w, "{}", serde_json::to_string(&end).map_err(std::io::Error::other)?)?;
        Ok(())
    }

    /// Parses a JSON-lines trace. Action labels are resolved against
    /// `actions` (the protocol the trace claims to come from).
    pub fn read_jsonl(
        actions: &[ActionSpec],
        r: impl BufRead,
    ) -> Result<(serde_json::Value, Trace<S>), TraceError> {
        let mut lines = r.lines().enumerate();
        let corrupt = |line: usize, msg: String| TraceError::Corrupt { line: line + 1, msg };
        let (ln, first) = lines.next().ok_or_else(|| corrupt(0, "empty trace".into()))?;
        let first = first?;
        let Record::Header {
            meta,
            actions: labels,
            initial,
            enabled,
            ..
        } = serde_json::from_str::<Record<S>>(&first).map_err(|e| corrupt(ln, e.to_string()))?
        else {
            return Err(corrupt(ln, "missing header".into()));
        };
        let expected: Vec<&str> = actions.iter().map(|a| a.label).collect();
        if labels.iter().map(String::as_str).ne(expected.iter().copied()) {
            return Err(corrupt(ln, format!("action set {labels:?} does not match {expected:?}")));
        }
        let lookup = |ln: usize, l: &str| {
            expected
                .iter()
                .position(|&e| e == l)
                .ok_or_else(|| corrupt(ln, format!("unknown action `{l}`")))
        };
        let n = initial.len();
        let mut trace = Trace::new(actions.to_vec(), initial, enabled);
        for (ln, line) in lines {
            let line = line?;
            match serde_json::from_str::<Record<S>>(&line).map_err(|e| corrupt(ln, e.to_string()))? {
                Record::Step {
                    step,
                    selected,
                    fired,
                    decide,
                    reads,
                    neutralized,
                    changed,
                    enabled,
                    ..
                } => {
                    if step != trace.len() {
                        return Err(corrupt(ln, format!("expected step {}, found {step}", trace.len())));
                    }
                    let k = selected.len();
                    if fired.len() != k || decide.len() != k || reads.len() != k || changed.len() != k {
                        return Err(corrupt(ln, "ragged step record".into()));
                    }
                    if selected.iter().chain(&neutralized).chain(&enabled).any(|&p| p >= n) {
                        return Err(corrupt(ln, "process index out of range".into()));
                    }
                    let fired = fired
                        .iter()
                        .map(|l| lookup(ln, l))
                        .collect::<Result<Vec<_>, _>>()?;
                    trace.push(
                        Transition {
                            selected,
                            fired,
                            decide,
                            reads,
                            states: changed,
                            neutralized,
                        },
                        enabled,
                    );
                }
                Record::End { steps } => {
                    if steps != trace.len() {
                        return Err(corrupt(ln, "end marker disagrees with step count".into()));
                    }
                    return Ok((meta, trace));
                }
                Record::Header { .. } => return Err(corrupt(ln, "second header".into())),
            }
        }
        Err(TraceError::Corrupt {
            line: trace.len() + 2,
            msg: "truncated trace (no end marker)".into(),
        })
    }
}
