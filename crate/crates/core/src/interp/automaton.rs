//! Preferences as stage automata, run over whole traces.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::dsl::ast::*;
use crate::trace::{Binding, Evaluator, Trace};

use super::InterpError;

/// Bindings per preference per trace beyond which enumeration stops.
pub const BINDING_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub enum StageKind {
    Once,
    OnceMeasure(FunctionEval),
    Hold,
    /// Secondary predicates, each of which must fire in order during the hold.
    HoldWhile(Vec<Pred>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub kind: StageKind,
    pub pred: Pred,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceAutomaton {
    pub name: String,
    /// Variables of an enclosing preference-level forall.
    pub external: VariableList,
    pub vars: VariableList,
    /// Empty for at-end preferences.
    pub stages: Vec<Stage>,
    pub at_end: Option<Pred>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Satisfaction {
    pub pref: String,
    /// External variables first, then the preference's own.
    pub binding: Binding,
    pub n_external: usize,
    pub start: usize,
    pub end: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measure: Option<f64>,
}

impl Satisfaction {
    pub fn external(&self) -> &[(String, String)] {
        &self.binding[..self.n_external]
    }

    pub fn values(&self) -> Vec<&str> {
        self.binding.iter().map(|(_, v)| v.as_str()).collect()
    }
}

pub fn compile_preference(def: &PrefDef) -> PreferenceAutomaton {
    let p = def.preference();
    let (stages, at_end) = match &p.body {
        PrefBody::AtEnd(pr) => (Vec::new(), Some(pr.clone())),
        PrefBody::Then(sfs) => (
            sfs.iter()
                .map(|sf| match sf {
                    SeqFunc::Once(pr) => Stage { kind: StageKind::Once, pred: pr.clone() },
                    SeqFunc::OnceMeasure(pr, f) => Stage { kind: StageKind::OnceMeasure(f.clone()), pred: pr.clone() },
                    SeqFunc::Hold(pr) => Stage { kind: StageKind::Hold, pred: pr.clone() },
                    SeqFunc::HoldWhile(pr, sec) => Stage { kind: StageKind::HoldWhile(sec.clone()), pred: pr.clone() },
                })
                .collect(),
            None,
        ),
    };
    PreferenceAutomaton {
        name: p.name.clone(),
        external: def.external_vars().cloned().unwrap_or_default(),
        vars: p.vars.clone(),
        stages,
        at_end,
    }
}

/// The result of running one preference over one trace.
#[derive(Debug, Clone)]
pub struct PrefRun {
    pub name: String,
    pub n_external: usize,
    pub bindings: Vec<Binding>,
    /// Every minimal satisfaction, one per (binding, start) at most. Empty
    /// for at-end preferences.
    pub all: Vec<Satisfaction>,
    /// For at-end preferences: per binding, the states where the body holds.
    pub at_end: Option<Vec<Vec<bool>>>,
}

impl PrefRun {
    /// Satisfactions that have completed by state `upto`, in the overlapping
    /// sense. At-end preferences are checked at `upto` itself.
    pub fn overlapping(&self, upto: usize) -> Vec<Satisfaction> {
        match &self.at_end {
            Some(truth) => self
                .bindings
                .iter()
                .zip(truth)
                .filter(|(_, t)| t.get(upto).copied().unwrap_or(false))
                .map(|(b, _)| Satisfaction {
                    pref: self.name.clone(),
                    binding: b.clone(),
                    n_external: self.n_external,
                    start: upto,
                    end: upto,
                    measure: None,
                })
                .collect(),
            None => self.all.iter().filter(|s| s.end <= upto).cloned().collect(),
        }
    }

    /// External tuples of all enumerated bindings, deduplicated in order.
    pub fn external_tuples(&self) -> Vec<Vec<String>> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for b in &self.bindings {
            let t: Vec<String> = b[..self.n_external].iter().map(|(_, v)| v.clone()).collect();
            if seen.insert(t.clone()) {
                out.push(t);
            }
        }
        out
    }
}

/// Greedy earliest-end selection of pairwise disjoint intervals. Intervals
/// sharing a state overlap.
pub fn non_overlapping(sats: &[Satisfaction]) -> Vec<Satisfaction> {
    let mut v: Vec<&Satisfaction> = sats.iter().collect();
    v.sort_by(|a, b| (a.end, a.start, &a.binding).cmp(&(b.end, b.start, &b.binding)));
    let mut out: Vec<Satisfaction> = Vec::new();
    for s in v {
        if out.last().is_none_or(|l| s.start > l.end) {
            out.push(s.clone());
        }
    }
    out
}

pub fn enumerate_bindings(ev: &Evaluator, name: &str, lists: &[&VariableList]) -> Result<Vec<Binding>, InterpError> {
    let vars: Vec<(&str, &TypeSpec)> = lists.iter().flat_map(|l| flatten_vars(l)).collect();
    let domains: Vec<Vec<String>> = vars.iter().map(|(v, t)| ev.domain(v, t, None)).collect();
    let total = domains.iter().try_fold(1usize, |acc, d| acc.checked_mul(d.len())).unwrap_or(usize::MAX);
    if total > BINDING_CAP {
        return Err(InterpError::BindingCap { pref: name.to_string(), combinations: total });
    }
    let mut out: Vec<Binding> = vec![Vec::new()];
    for ((v, _), d) in vars.iter().zip(&domains) {
        out = out
            .iter()
            .flat_map(|b| {
                d.iter().map(move |x| {
                    let mut b = b.clone();
                    b.push((v.to_string(), x.clone()));
                    b
                })
            })
            .collect();
    }
    Ok(out)
}

fn truth(ev: &Evaluator, p: &Pred, b: &Binding, n: usize) -> Result<Vec<bool>, InterpError> {
    let mut env = b.clone();
    (0..n).map(|t| ev.pred(p, t, &mut env).map_err(InterpError::from)).collect()
}

/// NFA configuration: stage index, secondaries fired, states consumed by
/// the current stage (capped at 1), and the once-measure state if passed.
type Config = (usize, usize, usize, Option<usize>);

struct Tables {
    main: Vec<Vec<bool>>,
    secondary: Vec<Vec<Vec<bool>>>,
}

fn complete(stages: &[Stage], k: usize, j: usize, c: usize) -> bool {
    let edge = k == 0 || k + 1 == stages.len();
    match &stages[k].kind {
        StageKind::Once | StageKind::OnceMeasure(_) => c == 1,
        StageKind::Hold => c >= 1 || !edge,
        StageKind::HoldWhile(sec) => c >= 1 && j == sec.len(),
    }
}

/// Adds every configuration reachable by finishing stages without
/// consuming a state.
fn closure(stages: &[Stage], set: &mut BTreeSet<Config>) {
    let mut stack: Vec<Config> = set.iter().copied().collect();
    while let Some((k, j, c, m)) = stack.pop() {
        if k < stages.len() && complete(stages, k, j, c) {
            let next = (k + 1, 0, 0, m);
            if set.insert(next) {
                stack.push(next);
            }
        }
    }
}

/// Earliest end of a match starting at `start`, and the once-measure state.
fn match_from(stages: &[Stage], tab: &Tables, start: usize, n: usize) -> Option<(usize, Option<usize>)> {
    let m = stages.len();
    let mut cur: BTreeSet<Config> = BTreeSet::from([(0, 0, 0, None)]);
    closure(stages, &mut cur);
    for t in start..n {
        let mut next = BTreeSet::new();
        for &(k, j, c, meas) in &cur {
            if k >= m || !tab.main[k][t] {
                continue;
            }
            match &stages[k].kind {
                StageKind::Once if c == 0 => {
                    next.insert((k, 0, 1, meas));
                }
                StageKind::OnceMeasure(_) if c == 0 => {
                    next.insert((k, 0, 1, Some(t)));
                }
                StageKind::Hold => {
                    next.insert((k, 0, 1, meas));
                }
                StageKind::HoldWhile(sec) => {
                    let fired = j < sec.len() && tab.secondary[k][j][t];
                    next.insert((k, j + fired as usize, 1, meas));
                }
                _ => {}
            }
        }
        if next.is_empty() {
            return None;
        }
        closure(stages, &mut next);
        if let Some(&(_, _, _, meas)) = next.iter().filter(|cfg| cfg.0 == m).min_by_key(|cfg| cfg.3) {
            return Some((t, meas));
        }
        cur = next;
    }
    None
}

pub fn run_preference(auto: &PreferenceAutomaton, trace: &Trace, ev: &Evaluator) -> Result<PrefRun, InterpError> {
    let bindings = enumerate_bindings(ev, &auto.name, &[&auto.external, &auto.vars])?;
    let n_external = flatten_vars(&auto.external).len();
    let n = trace.states.len();
    let mut run = PrefRun { name: auto.name.clone(), n_external, bindings: Vec::new(), all: Vec::new(), at_end: None };
    if let Some(p) = &auto.at_end {
        let mut truths = Vec::with_capacity(bindings.len());
        for b in &bindings {
            truths.push(truth(ev, p, b, n)?);
        }
        run.at_end = Some(truths);
        run.bindings = bindings;
        return Ok(run);
    }
    for b in &bindings {
        let mut tab = Tables { main: Vec::new(), secondary: Vec::new() };
        for st in &auto.stages {
            tab.main.push(truth(ev, &st.pred, b, n)?);
            let mut sec = Vec::new();
            if let StageKind::HoldWhile(ps) = &st.kind {
                for p in ps {
                    sec.push(truth(ev, p, b, n)?);
                }
            }
            tab.secondary.push(sec);
        }
        for start in 0..n {
            if !tab.main[0][start] {
                continue;
            }
            if let Some((end, meas)) = match_from(&auto.stages, &tab, start, n) {
                let measure = match (meas, auto.stages.iter().find_map(measure_fn)) {
                    (Some(t), Some(f)) => {
                        let v = ev.function(f, t, b)?;
                        Some(v)
                    }
                    _ => None,
                };
                run.all.push(Satisfaction { pref: auto.name.clone(), binding: b.clone(), n_external, start, end, measure });
            }
        }
    }
    run.bindings = bindings;
    Ok(run)
}

fn measure_fn(st: &Stage) -> Option<&FunctionEval> {
    match &st.kind {
        StageKind::OnceMeasure(f) => Some(f),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse::parse_pref_def;
    use crate::trace::parse_trace;

    pub(crate) const THROW: &str = "(preference throwAttempt (exists (?b - dodgeball) (then (once (agent_holds ?b)) (hold (and (not (agent_holds ?b)) (in_motion ?b))) (once (not (in_motion ?b))))))";

    fn two_throws() -> Trace {
        let rows = [(true, false), (false, true), (false, true), (false, false), (true, false), (false, false)];
        let mut s = String::from(r#"{"trace":"tt","objects":[{"id":"b","type":"dodgeball"}]}"#);
        s.push('\n');
        for (i, (h, m)) in rows.iter().enumerate() {
            s.push_str(&format!(
                r#"{{"index":{i},"objects":{{"b":{{"position":[{i},0,0],"held":{h},"in_motion":{m}}}}}}}"#
            ));
            s.push('\n');
        }
        parse_trace(&s).unwrap()
    }

    #[test]
    fn compiles_stages() {
        let a = compile_preference(&parse_pref_def(THROW).unwrap());
        let kinds: Vec<_> = a.stages.iter().map(|s| s.kind.clone()).collect();
        assert_eq!(kinds, vec![StageKind::Once, StageKind::Hold, StageKind::Once]);
        let hw = parse_pref_def("(preference pp (exists (?b - ball) (then (once (agent_holds ?b)) (hold-while (in_motion ?b) (agent_crouches) (game_over)) (once (agent_holds ?b)))))").unwrap();
        match &compile_preference(&hw).stages[1].kind {
            StageKind::HoldWhile(q) => assert_eq!(q.len(), 2),
            k => panic!("{k:?}"),
        }
        let ae = compile_preference(&parse_pref_def("(preference pp (at-end (game_over)))").unwrap());
        assert!(ae.stages.is_empty() && ae.at_end.is_some());
    }

    #[test]
    fn two_throws_match() {
        let t = two_throws();
        let ev = Evaluator::new(&t);
        let run = run_preference(&compile_preference(&parse_pref_def(THROW).unwrap()), &t, &ev).unwrap();
        let iv: Vec<_> = non_overlapping(&run.all).iter().map(|s| (s.start, s.end)).collect();
        assert_eq!(iv, vec![(0, 3), (4, 5)]);
    }
}
