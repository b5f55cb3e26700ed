//! The reward machine: runs goal programs over traces and scores them.

mod automaton;
mod count;
mod setup;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::dsl::ast::*;
use crate::dsl::print::pref_eval_text;
use crate::dsl::vocab;
use crate::trace::{EvalError, Evaluator, Thresholds, Trace};

pub use automaton::{
    compile_preference, enumerate_bindings, non_overlapping, run_preference, PrefRun, PreferenceAutomaton,
    Satisfaction, Stage, StageKind, BINDING_CAP,
};
pub use count::{count_mode, PositionThresholds};
pub use setup::{eval_setup, SetupResult};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InterpError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("preference {pref} has {combinations} variable bindings, over the limit")]
    BindingCap { pref: String, combinations: usize },
    #[error("preference {0} is not defined")]
    UnknownPreference(String),
    #[error("count-measure on {0}, which records no measure")]
    NoMeasure(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct InterpConfig {
    pub thresholds: Thresholds,
    pub positions: PositionThresholds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub trace: String,
    /// `None` when the scoring tree could not be evaluated.
    pub total: Option<f64>,
    /// Count expression text → value, at the final evaluation state.
    pub counts: BTreeMap<String, f64>,
    pub terminal_state: Option<usize>,
    pub setup: Option<SetupResult>,
    /// Non-overlapping satisfactions up to the final evaluation state.
    pub satisfactions: BTreeMap<String, Vec<Satisfaction>>,
    pub errors: Vec<String>,
}

/// All preference runs of one game over one trace.
pub struct GameRun<'a> {
    pub trace: &'a Trace,
    pub runs: BTreeMap<String, PrefRun>,
    pub positions: PositionThresholds,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("division by zero")]
pub struct DivByZero;

impl GameRun<'_> {
    /// Value of one count expression at state `upto`, optionally restricted
    /// to one external tuple.
    pub fn count(&self, e: &PrefEval, upto: usize, external: Option<&[String]>) -> Result<f64, InterpError> {
        let run = self.runs.get(&e.pref).ok_or_else(|| InterpError::UnknownPreference(e.pref.clone()))?;
        let all: Vec<Satisfaction> = run
            .overlapping(upto)
            .into_iter()
            .filter(|s| self.qualifies(s, &e.types))
            .filter(|s| match external {
                Some(tuple) if s.n_external == tuple.len() && s.n_external > 0 => {
                    s.external().iter().map(|(_, v)| v).eq(tuple.iter())
                }
                _ => true,
            })
            .collect();
        count_mode(e.mode, &all, self.trace, &self.positions).map_err(|m| match m {
            count::CountError::NoMeasure => InterpError::NoMeasure(e.pref.clone()),
        })
    }

    /// `p:t1:t2` qualifiers apply positionally to the external variables if
    /// the preference has any, otherwise to its own.
    fn qualifies(&self, s: &Satisfaction, types: &[String]) -> bool {
        let vals: Vec<&str> = if s.n_external > 0 {
            s.external().iter().map(|(_, v)| v.as_str()).collect()
        } else {
            s.values()
        };
        types.iter().zip(vals).all(|(ty, v)| {
            v == ty || self.trace.type_of(v).is_some_and(|t| vocab::is_subtype(t, ty))
        })
    }

    fn external_tuples(&self, s: &Scoring) -> Vec<Vec<String>> {
        let mut out: Vec<Vec<String>> = Vec::new();
        s.for_each_eval(&mut |e| {
            if let Some(r) = self.runs.get(&e.pref) {
                for t in r.external_tuples() {
                    if !t.is_empty() && !out.contains(&t) {
                        out.push(t);
                    }
                }
            }
        });
        out
    }

    /// Evaluates a scoring expression at state `upto`. `total_score` is the
    /// value `(total-score)` takes.
    pub fn scoring(
        &self,
        s: &Scoring,
        upto: usize,
        total_score: f64,
        external: Option<&[String]>,
    ) -> Result<Result<f64, DivByZero>, InterpError> {
        let rec = |c: &Scoring| self.scoring(c, upto, total_score, external);
        Ok(Ok(match s {
            Scoring::ExternalMax(c) | Scoring::ExternalMin(c) => {
                let tuples = self.external_tuples(c);
                if tuples.is_empty() {
                    return rec(c);
                }
                let mut vals = Vec::new();
                for t in &tuples {
                    match self.scoring(c, upto, total_score, Some(t))? {
                        Ok(v) => vals.push(v),
                        Err(e) => return Ok(Err(e)),
                    }
                }
                let max = matches!(s, Scoring::ExternalMax(_));
                vals.into_iter().fold(if max { f64::NEG_INFINITY } else { f64::INFINITY }, |a, b| {
                    if max {
                        a.max(b)
                    } else {
                        a.min(b)
                    }
                })
            }
            Scoring::Add(cs) | Scoring::Mul(cs) => {
                let add = matches!(s, Scoring::Add(_));
                let mut acc = if add { 0.0 } else { 1.0 };
                for c in cs {
                    match rec(c)? {
                        Ok(v) => acc = if add { acc + v } else { acc * v },
                        e => return Ok(e),
                    }
                }
                acc
            }
            Scoring::Sub(a, b) | Scoring::Div(a, b) => {
                let (x, y) = match (rec(a)?, rec(b)?) {
                    (Ok(x), Ok(y)) => (x, y),
                    _ => return Ok(Err(DivByZero)),
                };
                if matches!(s, Scoring::Sub(..)) {
                    x - y
                } else if y == 0.0 {
                    return Ok(Err(DivByZero));
                } else {
                    x / y
                }
            }
            Scoring::Neg(c) => match rec(c)? {
                Ok(v) => -v,
                e => return Ok(e),
            },
            Scoring::TotalTime => upto as f64,
            Scoring::TotalScore => total_score,
            Scoring::Compare { op, args } => {
                let mut vals = Vec::new();
                for c in args {
                    match rec(c)? {
                        Ok(v) => vals.push(v),
                        e => return Ok(e),
                    }
                }
                op.apply_chain(&vals) as u8 as f64
            }
            Scoring::Eval(e) => self.count(e, upto, external)?,
            Scoring::Number(n) => n.value(),
        }))
    }

    fn terminal(&self, t: &Terminal, upto: usize, score: f64) -> Result<bool, InterpError> {
        Ok(match t {
            Terminal::And(cs) => {
                for c in cs {
                    if !self.terminal(c, upto, score)? {
                        return Ok(false);
                    }
                }
                true
            }
            Terminal::Or(cs) => {
                for c in cs {
                    if self.terminal(c, upto, score)? {
                        return Ok(true);
                    }
                }
                false
            }
            Terminal::Not(c) => !self.terminal(c, upto, score)?,
            Terminal::Compare { op, lhs, rhs } => match self.scoring(lhs, upto, score, None)? {
                Ok(v) => op.apply(v, rhs.value()),
                Err(_) => false,
            },
        })
    }
}

/// Runs every preference of a game over a trace.
pub fn run_game<'a>(g: &Game, trace: &'a Trace, cfg: &InterpConfig, setup_objects: Option<&BTreeSet<String>>) -> Result<GameRun<'a>, InterpError> {
    let ev = Evaluator { trace, thresholds: cfg.thresholds, setup_objects };
    let mut runs = BTreeMap::new();
    for def in &g.preferences {
        let auto = compile_preference(def);
        runs.insert(auto.name.clone(), run_preference(&auto, trace, &ev)?);
    }
    Ok(GameRun { trace, runs, positions: cfg.positions })
}

pub fn score_game(g: &Game, trace: &Trace) -> Result<ScoreReport, InterpError> {
    score_game_with(g, trace, &InterpConfig::default())
}

pub fn score_game_with(g: &Game, trace: &Trace, cfg: &InterpConfig) -> Result<ScoreReport, InterpError> {
    let setup = match &g.setup {
        Some(s) => Some(eval_setup(s, trace, cfg.thresholds)?),
        None => None,
    };
    let objs = setup.as_ref().map(|s| s.objects.clone());
    let run = run_game(g, trace, cfg, objs.as_ref())?;
    let n = trace.states.len();
    let mut errors = Vec::new();
    let score_at = |t: usize| run.scoring(&g.scoring, t, 0.0, None);
    let mut terminal_state = None;
    if let Some(term) = &g.terminal {
        for t in 0..n {
            let score = score_at(t)?.unwrap_or(f64::NAN);
            if run.terminal(term, t, score)? {
                terminal_state = Some(t);
                break;
            }
        }
    }
    let upto = terminal_state.unwrap_or(n - 1);
    let total = match score_at(upto)? {
        Ok(v) => Some(v),
        Err(e) => {
            errors.push(e.to_string());
            None
        }
    };
    let mut counts = BTreeMap::new();
    for e in g.pref_evals() {
        counts.insert(pref_eval_text(e), run.count(e, upto, None)?);
    }
    let satisfactions = run.runs.iter().map(|(k, r)| (k.clone(), non_overlapping(&r.overlapping(upto)))).collect();
    Ok(ScoreReport { trace: trace.id.clone(), total, counts, terminal_state, setup, satisfactions, errors })
}

/// Component name → ids of traces in which it was satisfied at least once.
/// Components are `setup` (if present) and each preference.
pub fn activating_components(g: &Game, traces: &[Trace], cfg: &InterpConfig) -> Result<BTreeMap<String, BTreeSet<String>>, InterpError> {
    let mut out: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    if g.setup.is_some() {
        out.insert("setup".into(), BTreeSet::new());
    }
    for p in &g.preferences {
        out.insert(p.name().to_string(), BTreeSet::new());
    }
    for t in traces {
        let mut objs = None;
        if let Some(s) = &g.setup {
            let r = eval_setup(s, t, cfg.thresholds)?;
            if r.satisfied_at.is_some() {
                out.get_mut("setup").unwrap().insert(t.id.clone());
            }
            objs = Some(r.objects);
        }
        let run = run_game(g, t, cfg, objs.as_ref())?;
        let last = t.states.len() - 1;
        for (name, r) in &run.runs {
            let hit = match &r.at_end {
                Some(truth) => truth.iter().any(|v| v[last]),
                None => !r.all.is_empty(),
            };
            if hit {
                out.get_mut(name).unwrap().insert(t.id.clone());
            }
        }
    }
    Ok(out)
}

/// Traces activating any component of a game.
pub fn activating_traces(components: &BTreeMap<String, BTreeSet<String>>) -> BTreeSet<String> {
    components.values().flatten().cloned().collect()
}

/// Jaccard similarity of two sets; 1 when both are empty.
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        1.0
    } else {
        a.intersection(b).count() as f64 / union as f64
    }
}

#[cfg(test)]
mod tests;
