//! Grounded evaluation of predicates and functions in one world state.

use std::collections::BTreeSet;

use crate::dsl::ast::*;
use crate::dsl::vocab::{self, VarClass};

use super::{Thresholds, Trace, AGENT};

/// Variable assignments, innermost last.
pub type Binding = Vec<(String, String)>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("variable {0} is not bound")]
    Unbound(String),
    #[error("({name} ...) takes {expected} arguments, got {found}")]
    Arity { name: String, expected: String, found: usize },
    #[error("unknown predicate or function `{0}`")]
    Unknown(String),
}

pub struct Evaluator<'a> {
    pub trace: &'a Trace,
    pub thresholds: Thresholds,
    /// Objects used to satisfy the setup, for `is_setup_object`.
    pub setup_objects: Option<&'a BTreeSet<String>>,
}

pub fn eval_predicate(trace: &Trace, state: usize, pred: &Pred, binding: &Binding, th: Thresholds) -> Result<bool, EvalError> {
    let ev = Evaluator { trace, thresholds: th, setup_objects: None };
    ev.pred(pred, state, &mut binding.clone())
}

pub fn eval_function(trace: &Trace, state: usize, f: &FunctionEval, binding: &Binding, th: Thresholds) -> Result<f64, EvalError> {
    let ev = Evaluator { trace, thresholds: th, setup_objects: None };
    ev.function(f, state, binding)
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

impl<'a> Evaluator<'a> {
    pub fn new(trace: &'a Trace) -> Evaluator<'a> {
        Evaluator { trace, thresholds: Thresholds::default(), setup_objects: None }
    }

    pub fn pred(&self, p: &Pred, state: usize, env: &mut Binding) -> Result<bool, EvalError> {
        Ok(match p {
            Pred::And(cs) => {
                for c in cs {
                    if !self.pred(c, state, env)? {
                        return Ok(false);
                    }
                }
                true
            }
            Pred::Or(cs) => {
                for c in cs {
                    if self.pred(c, state, env)? {
                        return Ok(true);
                    }
                }
                false
            }
            Pred::Not(c) => !self.pred(c, state, env)?,
            Pred::Exists(vars, c) => self.quantify(vars, state, env, true, &mut |me, env| me.pred(c, state, env))?,
            Pred::Forall(vars, c) => self.quantify(vars, state, env, false, &mut |me, env| me.pred(c, state, env))?,
            Pred::Compare { op, args } => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(match a {
                        FnArg::Number(n) => n.value(),
                        FnArg::Function(f) => self.function(f, state, env)?,
                    });
                }
                if vals.iter().any(|v| v.is_nan()) {
                    false
                } else if vals.len() == 1 {
                    true
                } else {
                    op.apply_chain(&vals)
                }
            }
            Pred::Atom { name, args } => {
                let sig = vocab::predicate(name).ok_or_else(|| EvalError::Unknown(name.clone()))?;
                if !sig.accepts_arity(args.len()) {
                    return Err(arity(name, &sig.arities(), args.len()));
                }
                let choices = self.resolve_all(args, state, env)?;
                any_product(&choices, &mut |vals| self.ground(name, vals, state))
            }
        })
    }

    /// Runs `body` over assignments of `vars` at `state`: any for exists,
    /// all for forall.
    pub fn quantify(
        &self,
        vars: &VariableList,
        state: usize,
        env: &mut Binding,
        exists: bool,
        body: &mut dyn FnMut(&Self, &mut Binding) -> Result<bool, EvalError>,
    ) -> Result<bool, EvalError> {
        let flat = flatten_vars(vars);
        let domains: Vec<Vec<String>> = flat.iter().map(|(v, t)| self.domain(v, t, Some(state))).collect();
        let base = env.len();
        let mut idx = vec![0usize; flat.len()];
        if domains.iter().any(Vec::is_empty) {
            return Ok(!exists);
        }
        loop {
            env.truncate(base);
            for (k, (v, _)) in flat.iter().enumerate() {
                env.push((v.to_string(), domains[k][idx[k]].clone()));
            }
            let r = body(self, env);
            env.truncate(base);
            let r = r?;
            if r == exists {
                return Ok(exists);
            }
            // advance odometer
            let mut k = flat.len();
            loop {
                if k == 0 {
                    return Ok(!exists);
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < domains[k].len() {
                    break;
                }
                idx[k] = 0;
            }
        }
    }

    /// Values a variable declared with `types` may take.
    pub fn domain(&self, var: &str, types: &TypeSpec, state: Option<usize>) -> Vec<String> {
        let names = types.names();
        match VarClass::of_variable(var).unwrap_or(VarClass::Object) {
            VarClass::Object => self.trace.objects_of(&names, state),
            VarClass::Color => expand(&names, "color", vocab::COLORS),
            VarClass::Orientation => expand(&names, "orientation", vocab::ORIENTATIONS),
            VarClass::Side => expand(&names, "side", vocab::SIDES),
        }
    }

    pub fn function(&self, f: &FunctionEval, state: usize, env: &Binding) -> Result<f64, EvalError> {
        let sig = vocab::function(&f.name).ok_or_else(|| EvalError::Unknown(f.name.clone()))?;
        if !sig.accepts_arity(f.args.len()) {
            return Err(arity(&f.name, &sig.arities(), f.args.len()));
        }
        let choices = self.resolve_all(&f.args, state, env)?;
        // A type name as an argument stands for its first instance.
        let vals: Vec<&str> = match choices.iter().map(|c| c.first().map(String::as_str)).collect::<Option<Vec<_>>>() {
            Some(v) => v,
            None => return Ok(f64::NAN),
        };
        let st = &self.trace.states[state];
        Ok(match f.name.as_str() {
            "distance" => match (self.position(vals[0], state), self.position(vals[1], state)) {
                (Some(a), Some(b)) => dist(a, b),
                _ => f64::NAN,
            },
            "x_position" => self.position(vals[0], state).map_or(f64::NAN, |p| p[0]),
            "building_size" => st.buildings.iter().find(|b| b.id == vals[0]).map_or(0.0, |b| b.members.len() as f64),
            _ => f64::NAN,
        })
    }

    fn resolve_all(&self, args: &[Term], state: usize, env: &Binding) -> Result<Vec<Vec<String>>, EvalError> {
        args.iter().map(|t| self.resolve(t, state, env)).collect()
    }

    /// Candidate values for a term. A variable or object id gives one value;
    /// a type name used as a constant stands for any instance of the type.
    fn resolve(&self, t: &Term, state: usize, env: &Binding) -> Result<Vec<String>, EvalError> {
        match t {
            Term::Var(v) => env
                .iter()
                .rev()
                .find(|(n, _)| n == v)
                .map(|(_, val)| vec![val.clone()])
                .ok_or_else(|| EvalError::Unbound(v.clone())),
            Term::Const(c) => {
                if c == AGENT || self.trace.objects.iter().any(|o| &o.id == c) || !vocab::is_object_type(c) {
                    Ok(vec![c.clone()])
                } else {
                    Ok(self.trace.objects_of(&[c.as_str()], Some(state)))
                }
            }
        }
    }

    pub fn position(&self, id: &str, state: usize) -> Option<[f64; 3]> {
        let st = &self.trace.states[state];
        if id == AGENT {
            return Some(st.agent.position);
        }
        if let Some(o) = st.objects.get(id) {
            return Some(o.position);
        }
        let b = st.buildings.iter().find(|b| b.id == id)?;
        let ps: Vec<[f64; 3]> = b.members.iter().filter_map(|m| st.objects.get(m).map(|o| o.position)).collect();
        let n = ps.len() as f64;
        Some([0, 1, 2].map(|k| ps.iter().map(|p| p[k]).sum::<f64>() / n))
    }

    /// Truth of a predicate over concrete values.
    pub fn ground(&self, name: &str, a: &[&str], state: usize) -> bool {
        let st = &self.trace.states[state];
        let th = &self.thresholds;
        let obj = |id: &str| st.objects.get(id);
        let pair = |set: &BTreeSet<(String, String)>, x: &str, y: &str| set.contains(&(x.to_string(), y.to_string()));
        let d = |x: &str, y: &str| match (self.position(x, state), self.position(y, state)) {
            (Some(p), Some(q)) => Some(dist(p, q)),
            _ => None,
        };
        match name {
            "agent_crouches" => st.agent.crouching,
            "agent_holds" => obj(a[0]).is_some_and(|o| o.held),
            "in_motion" => obj(a[0]).is_some_and(|o| o.in_motion),
            "broken" => obj(a[0]).is_some_and(|o| o.broken),
            "open" => obj(a[0]).is_some_and(|o| o.open),
            "toggled_on" => obj(a[0]).is_some_and(|o| o.toggled_on),
            "game_start" => st.is_first,
            "game_over" => st.is_last,
            "in" => {
                pair(&st.contains, a[0], a[1])
                    || st.buildings.iter().any(|b| b.id == a[0] && b.members.contains(a[1]))
            }
            "on" => pair(&st.supports, a[0], a[1]),
            "above" => above(st, a[0], a[1]),
            "touch" => pair(&st.touches, a[0], a[1]) || pair(&st.touches, a[1], a[0]),
            "adjacent" => a[0] != a[1] && d(a[0], a[1]).is_some_and(|x| x <= th.adjacent),
            "near" => a[0] != a[1] && d(a[0], a[1]).is_some_and(|x| x <= th.near),
            "equal_x_position" | "equal_z_position" => {
                let k = if name == "equal_x_position" { 0 } else { 2 };
                match (self.position(a[0], state), self.position(a[1], state)) {
                    (Some(p), Some(q)) => (p[k] - q[k]).abs() <= th.equal_position,
                    _ => false,
                }
            }
            "object_orientation" => obj(a[0]).and_then(|o| o.orientation.as_deref()) == Some(a[1]),
            "is_setup_object" => self.setup_objects.is_some_and(|s| s.contains(a[0])),
            "same_object" => a[0] == a[1],
            "same_type" => match (self.trace.type_of(a[0]), self.trace.type_of(a[1])) {
                (Some(t), Some(u)) => t == u,
                (Some(t), None) => vocab::is_subtype(t, a[1]),
                _ => false,
            },
            "same_color" => {
                let c0 = self.trace.color_of(a[0]);
                let c1 = if vocab::is_color(a[1]) { Some(a[1]) } else { self.trace.color_of(a[1]) };
                c0.is_some() && c0 == c1
            }
            // between, faces, adjacent_side, opposite, rug_color_under are not
            // grounded; false keeps the interpreter biased to false negatives.
            _ => false,
        }
    }
}

/// Is `top` above `base` through a chain of support relations?
fn above(st: &super::WorldState, top: &str, base: &str) -> bool {
    let mut frontier = vec![base.to_string()];
    let mut seen = BTreeSet::new();
    while let Some(x) = frontier.pop() {
        for (b, t) in &st.supports {
            if *b == x && seen.insert(t.clone()) {
                if t == top {
                    return true;
                }
                frontier.push(t.clone());
            }
        }
    }
    false
}

fn expand(names: &[&str], class_name: &str, all: &[&str]) -> Vec<String> {
    if names.contains(&class_name) {
        all.iter().map(|s| s.to_string()).collect()
    } else {
        names.iter().map(|s| s.to_string()).collect()
    }
}

fn arity(name: &str, arities: &[usize], found: usize) -> EvalError {
    let expected = arities.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(" or ");
    EvalError::Arity { name: name.to_string(), expected, found }
}

fn any_product(choices: &[Vec<String>], f: &mut dyn FnMut(&[&str]) -> bool) -> bool {
    let mut idx = vec![0usize; choices.len()];
    if choices.iter().any(Vec::is_empty) {
        return false;
    }
    loop {
        let vals: Vec<&str> = idx.iter().enumerate().map(|(k, &i)| choices[k][i].as_str()).collect();
        if f(&vals) {
            return true;
        }
        let mut k = choices.len();
        loop {
            if k == 0 {
                return false;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < choices[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse_trace;
    use super::*;
    use crate::dsl::parse::parse_pred;

    fn trace() -> Trace {
        parse_trace(
            r#"{"trace":"t","objects":[{"id":"b","type":"dodgeball"},{"id":"h","type":"hexagonal_bin"},{"id":"d","type":"desk"},{"id":"c","type":"cube_block"}]}
{"index":0,"agent":{"position":[0,0,0]},"objects":{"b":{"position":[3,0,4],"held":true},"h":{"position":[1.5,0,2]},"d":{"position":[0.4000001,0,0]},"c":{"position":[0,0,0.4]}},"in":[["h","b"]]}
"#,
        )
        .unwrap()
    }

    fn holds(text: &str, binding: &[(&str, &str)]) -> bool {
        let b: Binding = binding.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
        eval_predicate(&trace(), 0, &parse_pred(text).unwrap(), &b, Thresholds::default()).unwrap()
    }

    #[test]
    fn predicates() {
        assert!(holds("(agent_holds ?b)", &[("?b", "b")]));
        assert!(holds("(in ?h ?b)", &[("?h", "h"), ("?b", "b")]));
        assert!(!holds("(in ?h ?b)", &[("?h", "b"), ("?b", "h")]));
        assert!(holds("(adjacent ?c agent)", &[("?c", "c")]));
        // just past the threshold
        assert!(!holds("(adjacent ?d agent)", &[("?d", "d")]));
        assert!(holds("(in hexagonal_bin ?b)", &[("?b", "b")]));
        assert!(holds("(exists (?a - ball) (agent_holds ?a))", &[]));
        assert!(!holds("(between ?b ?b ?b)", &[("?b", "b")]));
        assert!(!holds("(same_color ?b ?b)", &[("?b", "h")]));
        let unbound = eval_predicate(&trace(), 0, &parse_pred("(in ?q ?q)").unwrap(), &Vec::new(), Thresholds::default());
        assert_eq!(unbound, Err(EvalError::Unbound("?q".into())));
    }

    #[test]
    fn functions() {
        let t = trace();
        let f = |s: &str, b: &[(&str, &str)]| {
            let p = parse_pred(&format!("(= {s} 0)")).unwrap();
            let Pred::Compare { args, .. } = p else { unreachable!() };
            let FnArg::Function(f) = &args[0] else { unreachable!() };
            let b: Binding = b.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
            eval_function(&t, 0, f, &b, Thresholds::default()).unwrap()
        };
        assert_eq!(f("(distance agent ?b)", &[("?b", "b")]), 5.0);
        assert_eq!(f("(x_position ?h)", &[("?h", "h")]), 1.5);
    }
}
