//! Setup conditions: when they first hold, and whether conserved ones last.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::dsl::ast::*;
use crate::trace::{Binding, EvalError, Evaluator, Thresholds, Trace};

use super::InterpError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetupResult {
    /// First state at which the setup holds.
    pub satisfied_at: Option<usize>,
    /// Whether conserved conditions also hold at every later state.
    pub conserved_ok: bool,
    /// Objects bound by setup quantifiers in the satisfying assignment.
    pub objects: BTreeSet<String>,
}

struct SetupEval<'a> {
    ev: Evaluator<'a>,
    n: usize,
    /// Require conserved statements from `i` to the end of the trace.
    strict: bool,
}

impl SetupEval<'_> {
    fn holds(&self, s: &Setup, i: usize, env: &mut Binding, used: &mut BTreeSet<String>) -> Result<bool, EvalError> {
        Ok(match s {
            Setup::And(cs) => {
                for c in cs {
                    if !self.holds(c, i, env, used)? {
                        return Ok(false);
                    }
                }
                true
            }
            Setup::Or(cs) => {
                for c in cs {
                    if self.holds(c, i, env, used)? {
                        return Ok(true);
                    }
                }
                false
            }
            Setup::Not(c) => !self.holds(c, i, env, &mut BTreeSet::new())?,
            Setup::Exists(vars, c) | Setup::Forall(vars, c) => {
                let exists = matches!(s, Setup::Exists(..));
                let mut found = BTreeSet::new();
                let r = self.ev.quantify(vars, i, env, exists, &mut |_, env| {
                    let mut inner = BTreeSet::new();
                    let ok = self.holds(c, i, env, &mut inner)?;
                    if ok {
                        let k = flatten_vars(vars).len();
                        found.extend(env[env.len() - k..].iter().map(|(_, v)| v.clone()));
                        found.extend(inner);
                    }
                    Ok(ok)
                })?;
                if r {
                    used.extend(found);
                }
                r
            }
            Setup::Optional(p) => self.ev.pred(p, i, env)?,
            Setup::Conserved(p) => {
                if self.strict {
                    for j in i..self.n {
                        if !self.ev.pred(p, j, env)? {
                            return Ok(false);
                        }
                    }
                    true
                } else {
                    self.ev.pred(p, i, env)?
                }
            }
        })
    }
}

pub fn eval_setup(s: &Setup, trace: &Trace, th: Thresholds) -> Result<SetupResult, InterpError> {
    let n = trace.states.len();
    let mut e = SetupEval { ev: Evaluator { trace, thresholds: th, setup_objects: None }, n, strict: false };
    for i in 0..n {
        let mut objects = BTreeSet::new();
        if e.holds(s, i, &mut Vec::new(), &mut objects)? {
            e.strict = true;
            let conserved_ok = e.holds(s, i, &mut Vec::new(), &mut BTreeSet::new())?;
            return Ok(SetupResult { satisfied_at: Some(i), conserved_ok, objects });
        }
    }
    Ok(SetupResult { satisfied_at: None, conserved_ok: false, objects: BTreeSet::new() })
}
