//! Which predicates held over which coarse argument types, and where.

use std::collections::BTreeMap;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::dsl::ast::*;
use crate::dsl::vocab::{self, VarClass};

use super::eval::Evaluator;
use super::{Thresholds, Trace, WorldState, AGENT, BUILDING_PREFIX};

/// Declared types of the variables in scope, innermost last.
pub type SlotTypes = Vec<(String, Vec<String>)>;

type Key = (String, Vec<String>);

/// Witness sets over global state numbers: state `i` of trace `k` is bit
/// `offsets[k] + i`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredicateDb {
    pub trace_ids: Vec<String>,
    pub offsets: Vec<usize>,
    pub n_states: usize,
    #[serde(with = "table_serde")]
    table: BTreeMap<Key, FixedBitSet>,
}

mod table_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &BTreeMap<Key, FixedBitSet>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<(&Key, Vec<usize>)> = t.iter().map(|(k, v)| (k, v.ones().collect())).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<Key, FixedBitSet>, D::Error> {
        let rows: Vec<(Key, Vec<usize>)> = Vec::deserialize(d)?;
        Ok(rows
            .into_iter()
            .map(|(k, ones)| {
                let n = ones.iter().max().map_or(0, |m| m + 1);
                let mut b = FixedBitSet::with_capacity(n);
                ones.into_iter().for_each(|i| b.insert(i));
                (k, b)
            })
            .collect())
    }
}

/// Coarse types of a value: its type and ancestors, plus `game_object`.
fn coarse(trace: &Trace, id: &str) -> Vec<String> {
    if id == AGENT {
        return vec!["agent".into()];
    }
    if id.starts_with(BUILDING_PREFIX) {
        return vec!["building".into()];
    }
    if vocab::is_orientation(id) {
        return vec![id.to_string(), "orientation".into()];
    }
    let mut out: Vec<String> = match trace.type_of(id) {
        Some(t) => {
            let a = vocab::ancestors(t);
            if a.is_empty() {
                vec![t.to_string()]
            } else {
                a.into_iter().map(String::from).collect()
            }
        }
        None => vec![id.to_string()],
    };
    if !out.iter().any(|t| t == "game_object") {
        out.push("game_object".into());
    }
    out
}

/// True ground facts of the database predicates in one state.
fn facts(ev: &Evaluator, st: &WorldState) -> Vec<(&'static str, Vec<String>)> {
    let mut out: Vec<(&'static str, Vec<String>)> = Vec::new();
    if st.agent.crouching {
        out.push(("agent_crouches", vec![]));
    }
    if st.is_first {
        out.push(("game_start", vec![]));
    }
    if st.is_last {
        out.push(("game_over", vec![]));
    }
    let mut ids: Vec<String> = st.objects.keys().cloned().collect();
    for (id, o) in &st.objects {
        for (flag, name) in [
            (o.held, "agent_holds"),
            (o.in_motion, "in_motion"),
            (o.broken, "broken"),
            (o.open, "open"),
            (o.toggled_on, "toggled_on"),
        ] {
            if flag {
                out.push((name, vec![id.clone()]));
            }
        }
        if let Some(or) = &o.orientation {
            out.push(("object_orientation", vec![id.clone(), or.clone()]));
        }
    }
    ids.push(AGENT.to_string());
    ids.extend(st.buildings.iter().map(|b| b.id.clone()));
    let i = st.index;
    for a in &ids {
        for b in &ids {
            for name in ["in", "on", "above", "touch", "adjacent"] {
                if ev.ground(name, &[a, b], i) {
                    out.push((name, vec![a.clone(), b.clone()]));
                }
            }
        }
    }
    out
}

fn product(slots: &[Vec<String>]) -> Vec<Vec<String>> {
    slots.iter().fold(vec![vec![]], |acc, s| {
        acc.iter().flat_map(|p| s.iter().map(move |x| [p.clone(), vec![x.clone()]].concat())).collect()
    })
}

impl PredicateDb {
    pub fn build(traces: &[Trace], thresholds: Thresholds) -> PredicateDb {
        let mut db = PredicateDb { trace_ids: Vec::new(), offsets: Vec::new(), n_states: 0, table: BTreeMap::new() };
        for t in traces {
            db.offsets.push(db.n_states);
            db.trace_ids.push(t.id.clone());
            db.n_states += t.states.len();
        }
        let n = db.n_states;
        for (k, t) in traces.iter().enumerate() {
            let ev = Evaluator { trace: t, thresholds, setup_objects: None };
            for st in &t.states {
                let bit = db.offsets[k] + st.index;
                for (name, args) in facts(&ev, st) {
                    let slots: Vec<Vec<String>> = args.iter().map(|a| coarse(t, a)).collect();
                    for combo in product(&slots) {
                        db.table
                            .entry((name.to_string(), combo))
                            .or_insert_with(|| FixedBitSet::with_capacity(n))
                            .insert(bit);
                    }
                }
            }
        }
        db
    }

    /// Number of (predicate, coarse types) keys stored.
    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Global states where the predicate held over the given coarse types.
    pub fn witnesses(&self, pred: &str, types: &[&str]) -> FixedBitSet {
        let key = (pred.to_string(), types.iter().map(|s| s.to_string()).collect());
        let mut b = self.table.get(&key).cloned().unwrap_or_default();
        b.grow(self.n_states);
        b
    }

    /// `(trace id, state index)` of a global state number.
    pub fn locate(&self, bit: usize) -> (&str, usize) {
        let k = self.offsets.partition_point(|&o| o <= bit) - 1;
        (&self.trace_ids[k], bit - self.offsets[k])
    }

    fn all(&self) -> FixedBitSet {
        let mut b = FixedBitSet::with_capacity(self.n_states);
        b.insert_range(..);
        b
    }

    fn slot(scope: &SlotTypes, t: &Term) -> Vec<String> {
        match t {
            Term::Var(v) => match scope.iter().rev().find(|(n, _)| n == v) {
                Some((_, ts)) => ts.clone(),
                None => vec![VarClass::of_variable(v).map_or("game_object", |c| match c {
                    VarClass::Object => "game_object",
                    other => other.label(),
                })
                .to_string()],
            },
            Term::Const(c) => vec![c.clone()],
        }
    }

    /// States where the expression could hold under the declared variable
    /// types. Predicates outside the database never rule anything out.
    pub fn feasible_states(&self, p: &Pred, scope: &mut SlotTypes) -> FixedBitSet {
        match p {
            Pred::And(cs) => cs.iter().fold(self.all(), |mut acc, c| {
                acc.intersect_with(&self.feasible_states(c, scope));
                acc
            }),
            Pred::Or(cs) => cs.iter().fold(FixedBitSet::with_capacity(self.n_states), |mut acc, c| {
                acc.union_with(&self.feasible_states(c, scope));
                acc
            }),
            Pred::Not(c) => {
                let mut b = self.feasible_states(c, scope);
                if is_db_atom(c) {
                    b.toggle_range(..);
                    b
                } else {
                    // complement of an over-approximation is not sound
                    self.all()
                }
            }
            Pred::Exists(vars, c) | Pred::Forall(vars, c) => {
                let base = scope.len();
                push_scope(scope, vars);
                let b = self.feasible_states(c, scope);
                scope.truncate(base);
                b
            }
            Pred::Compare { .. } => self.all(),
            Pred::Atom { name, args } => {
                if !vocab::DATABASE_PREDICATES.contains(&name.as_str()) {
                    return self.all();
                }
                let slots: Vec<Vec<String>> = args.iter().map(|t| Self::slot(scope, t)).collect();
                let mut acc = FixedBitSet::with_capacity(self.n_states);
                for combo in product(&slots) {
                    let refs: Vec<&str> = combo.iter().map(String::as_str).collect();
                    acc.union_with(&self.witnesses(name, &refs));
                }
                acc
            }
        }
    }

    pub fn feasible(&self, p: &Pred, scope: &mut SlotTypes) -> bool {
        !self.feasible_states(p, scope).is_clear()
    }
}

fn is_db_atom(p: &Pred) -> bool {
    matches!(p, Pred::Atom { name, .. } if vocab::DATABASE_PREDICATES.contains(&name.as_str()))
}

pub(crate) fn push_scope(scope: &mut SlotTypes, vars: &VariableList) {
    for (v, ts) in flatten_vars(vars) {
        scope.push((v.to_string(), ts.names().into_iter().map(String::from).collect()));
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse_trace;
    use super::*;
    use crate::dsl::parse::parse_pred;

    fn db() -> PredicateDb {
        let t = parse_trace(
            r#"{"trace":"t","objects":[{"id":"b","type":"dodgeball"},{"id":"h","type":"hexagonal_bin"},{"id":"c","type":"chair"}]}
{"index":0,"objects":{"b":{"position":[0,0,0]},"h":{"position":[5,0,0]},"c":{"position":[9,0,0]}}}
{"index":1,"objects":{"b":{"held":true}}}
{"index":2,"objects":{"b":{"held":false}},"in":[["h","b"]]}
"#,
        )
        .unwrap();
        PredicateDb::build(&[t], Thresholds::default())
    }

    fn feasible(db: &PredicateDb, text: &str, scope: &[(&str, &str)]) -> Vec<usize> {
        let mut s: SlotTypes = scope.iter().map(|(v, t)| (v.to_string(), vec![t.to_string()])).collect();
        db.feasible_states(&parse_pred(text).unwrap(), &mut s).ones().collect()
    }

    #[test]
    fn witnesses_by_coarse_type() {
        let db = db();
        assert_eq!(db.witnesses("agent_holds", &["dodgeball"]).ones().collect::<Vec<_>>(), vec![1]);
        assert_eq!(db.witnesses("agent_holds", &["ball"]).ones().collect::<Vec<_>>(), vec![1]);
        assert!(db.witnesses("agent_holds", &["chair"]).is_clear());
        assert_eq!(feasible(&db, "(in ?h ?b)", &[("?h", "hexagonal_bin"), ("?b", "ball")]), vec![2]);
        assert!(feasible(&db, "(in ?h ?b)", &[("?h", "chair"), ("?b", "ball")]).is_empty());
        assert!(feasible(&db, "(and (agent_holds ?b) (in ?h ?b))", &[("?h", "hexagonal_bin"), ("?b", "ball")]).is_empty());
        assert_eq!(feasible(&db, "(not (agent_holds ?b))", &[("?b", "ball")]), vec![0, 2]);
        assert_eq!(feasible(&db, "(between ?b ?b ?b)", &[("?b", "ball")]), vec![0, 1, 2]);
        assert_eq!(db.locate(2), ("t", 2));
    }

    #[test]
    fn serde_roundtrip() {
        let db = db();
        let back: PredicateDb = serde_json::from_str(&serde_json::to_string(&db).unwrap()).unwrap();
        assert_eq!(back.witnesses("in", &["hexagonal_bin", "ball"]), db.witnesses("in", &["hexagonal_bin", "ball"]));
        assert_eq!(back.len(), db.len());
    }
}
