//! Abstract world-state traces: the data model, the line-delimited file
//! format, grounded predicate evaluation and the play-trace database.

pub mod db;
mod eval;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dsl::vocab;

pub use db::{PredicateDb, SlotTypes};
pub use eval::{eval_function, eval_predicate, Binding, EvalError, Evaluator};

/// Geometric thresholds, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub adjacent: f64,
    pub near: f64,
    pub equal_position: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { adjacent: 0.4, near: 1.0, equal_position: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectDecl {
    pub id: String,
    #[serde(rename = "type")]
    pub type_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    pub position: [f64; 3],
    pub orientation: Option<String>,
    pub in_motion: bool,
    pub held: bool,
    pub open: bool,
    pub toggled_on: bool,
    pub broken: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub position: [f64; 3],
    pub crouching: bool,
}

/// A connected stack of at least two blocks. Not a real object: membership
/// is recomputed in every state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Building {
    pub id: String,
    pub members: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub index: usize,
    pub agent: AgentState,
    pub objects: BTreeMap<String, ObjectState>,
    /// `(container, containee)`
    pub contains: BTreeSet<(String, String)>,
    /// `(base, top)`
    pub supports: BTreeSet<(String, String)>,
    pub touches: BTreeSet<(String, String)>,
    pub is_first: bool,
    pub is_last: bool,
    pub buildings: Vec<Building>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub id: String,
    pub objects: Vec<ObjectDecl>,
    pub states: Vec<WorldState>,
}

pub const AGENT: &str = "agent";
pub const BUILDING_PREFIX: &str = "building_";

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TraceError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: unknown object `{id}`")]
    Dangling { line: usize, id: String },
    #[error("line {line}: state index {index} does not follow {prev}")]
    NonMonotone { line: usize, index: usize, prev: String },
    #[error("line {line}: object `{id}` has no position in the first state")]
    Incomplete { line: usize, id: String },
    #[error("line {line}: object `{id}` declared twice")]
    Duplicate { line: usize, id: String },
    #[error("trace has no states")]
    Empty,
    #[error("{0}")]
    Io(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HeaderRecord {
    trace: String,
    objects: Vec<ObjectDecl>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct AgentDelta {
    position: Option<[f64; 3]>,
    crouching: Option<bool>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ObjectDelta {
    position: Option<[f64; 3]>,
    orientation: Option<String>,
    in_motion: Option<bool>,
    held: Option<bool>,
    open: Option<bool>,
    toggled_on: Option<bool>,
    broken: Option<bool>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StateRecord {
    index: usize,
    #[serde(default)]
    agent: Option<AgentDelta>,
    #[serde(default)]
    objects: BTreeMap<String, ObjectDelta>,
    #[serde(rename = "in")]
    contains: Option<Vec<(String, String)>>,
    #[serde(rename = "on")]
    supports: Option<Vec<(String, String)>>,
    touch: Option<Vec<(String, String)>>,
}

pub fn load_trace(path: impl AsRef<Path>) -> Result<Trace, TraceError> {
    let text = std::fs::read_to_string(path.as_ref()).map_err(|e| TraceError::Io(format!("{}: {e}", path.as_ref().display())))?;
    parse_trace(&text)
}

/// Parses the line-delimited trace format. Blank lines are ignored.
pub fn parse_trace(text: &str) -> Result<Trace, TraceError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    let (hline, htext) = lines.next().ok_or(TraceError::Empty)?;
    let header: HeaderRecord =
        serde_json::from_str(htext).map_err(|e| TraceError::Parse { line: hline, msg: e.to_string() })?;
    let mut known = BTreeSet::new();
    for o in &header.objects {
        if o.id == AGENT || !known.insert(o.id.clone()) {
            return Err(TraceError::Duplicate { line: hline, id: o.id.clone() });
        }
    }
    let mut states: Vec<WorldState> = Vec::new();
    for (line, l) in lines {
        let rec: StateRecord = serde_json::from_str(l).map_err(|e| TraceError::Parse { line, msg: e.to_string() })?;
        let expected = states.len();
        if rec.index != expected {
            let prev = states.last().map_or("the start of the trace".to_string(), |s| format!("index {}", s.index));
            return Err(TraceError::NonMonotone { line, index: rec.index, prev });
        }
        let check = |id: &str| {
            if id == AGENT || known.contains(id) {
                Ok(())
            } else {
                Err(TraceError::Dangling { line, id: id.to_string() })
            }
        };
        for id in rec.objects.keys() {
            if id == AGENT {
                return Err(TraceError::Parse { line, msg: "the agent is described by the `agent` field".into() });
            }
            check(id)?;
        }
        for (a, b) in rec.contains.iter().chain(&rec.supports).chain(&rec.touch).flatten() {
            check(a)?;
            check(b)?;
        }
        let mut st = match states.last() {
            Some(prev) => prev.clone(),
            None => WorldState {
                index: 0,
                agent: AgentState { position: [0.0; 3], crouching: false },
                objects: BTreeMap::new(),
                contains: BTreeSet::new(),
                supports: BTreeSet::new(),
                touches: BTreeSet::new(),
                is_first: true,
                is_last: false,
                buildings: Vec::new(),
            },
        };
        st.index = rec.index;
        st.is_first = rec.index == 0;
        if let Some(a) = rec.agent {
            if let Some(p) = a.position {
                st.agent.position = p;
            }
            if let Some(c) = a.crouching {
                st.agent.crouching = c;
            }
        }
        for (id, d) in rec.objects {
            let entry = match st.objects.get_mut(&id) {
                Some(e) => e,
                None => {
                    let position = d.position.ok_or_else(|| TraceError::Incomplete { line, id: id.clone() })?;
                    st.objects.entry(id.clone()).or_insert(ObjectState {
                        position,
                        orientation: None,
                        in_motion: false,
                        held: false,
                        open: false,
                        toggled_on: false,
                        broken: false,
                    })
                }
            };
            if let Some(p) = d.position {
                entry.position = p;
            }
            if d.orientation.is_some() {
                entry.orientation = d.orientation;
            }
            macro_rules! merge {
                ($($f:ident),*) => { $( if let Some(v) = d.$f { entry.$f = v; } )* };
            }
            merge!(in_motion, held, open, toggled_on, broken);
        }
        if rec.index == 0 {
            if let Some(missing) = known.iter().find(|id| !st.objects.contains_key(*id)) {
                return Err(TraceError::Incomplete { line, id: missing.clone() });
            }
        }
        if let Some(v) = rec.contains {
            st.contains = v.into_iter().collect();
        }
        if let Some(v) = rec.supports {
            st.supports = v.into_iter().collect();
        }
        if let Some(v) = rec.touch {
            st.touches = v.into_iter().collect();
        }
        states.push(st);
    }
    if states.is_empty() {
        return Err(TraceError::Empty);
    }
    let mut trace = Trace { id: header.trace, objects: header.objects, states };
    trace.finish();
    Ok(trace)
}

impl Trace {
    /// Builds a trace from complete states, recomputing derived fields.
    pub fn new(id: &str, objects: Vec<ObjectDecl>, states: Vec<WorldState>) -> Trace {
        let mut t = Trace { id: id.to_string(), objects, states };
        t.finish();
        t
    }

    fn finish(&mut self) {
        let n = self.states.len();
        let types: BTreeMap<String, String> = self.objects.iter().map(|o| (o.id.clone(), o.type_name.clone())).collect();
        for (i, s) in self.states.iter_mut().enumerate() {
            s.is_first = i == 0;
            s.is_last = i + 1 == n;
            s.buildings = buildings(s, &types);
        }
    }

    /// Serializes to the line format, writing every state as a full snapshot.
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::json!({ "trace": self.id, "objects": self.objects }).to_string();
        out.push('\n');
        for s in &self.states {
            let objects: BTreeMap<&String, serde_json::Value> = s
                .objects
                .iter()
                .map(|(id, o)| {
                    let mut v = serde_json::json!({
                        "position": o.position,
                        "in_motion": o.in_motion,
                        "held": o.held,
                        "open": o.open,
                        "toggled_on": o.toggled_on,
                        "broken": o.broken,
                    });
                    if let Some(or) = &o.orientation {
                        v["orientation"] = serde_json::json!(or);
                    }
                    (id, v)
                })
                .collect();
            let rec = serde_json::json!({
                "index": s.index,
                "agent": { "position": s.agent.position, "crouching": s.agent.crouching },
                "objects": objects,
                "in": s.contains,
                "on": s.supports,
                "touch": s.touches,
            });
            out.push_str(&rec.to_string());
            out.push('\n');
        }
        out
    }

    pub fn type_of(&self, id: &str) -> Option<&str> {
        if id == AGENT {
            return Some("agent");
        }
        if id.starts_with(BUILDING_PREFIX) {
            return Some("building");
        }
        self.objects.iter().find(|o| o.id == id).map(|o| o.type_name.as_str())
    }

    pub fn color_of(&self, id: &str) -> Option<&str> {
        let decl = self.objects.iter().find(|o| o.id == id)?;
        decl.color.as_deref().or_else(|| vocab::color_of_type(&decl.type_name))
    }

    pub fn is_object(&self, id: &str) -> bool {
        self.type_of(id).is_some()
    }

    /// Ids of all buildings that exist in any state.
    pub fn building_ids(&self) -> BTreeSet<String> {
        self.states.iter().flat_map(|s| s.buildings.iter().map(|b| b.id.clone())).collect()
    }

    /// Objects whose type satisfies one of `types`. Buildings are included
    /// for `building`; `state` restricts them to those present there.
    pub fn objects_of(&self, types: &[&str], state: Option<usize>) -> Vec<String> {
        let mut out: Vec<String> = self
            .objects
            .iter()
            .filter(|o| types.iter().any(|t| vocab::is_subtype(&o.type_name, t)))
            .map(|o| o.id.clone())
            .collect();
        if types.contains(&"agent") {
            out.push(AGENT.to_string());
        }
        if types.contains(&"building") {
            match state {
                Some(i) => out.extend(self.states[i].buildings.iter().map(|b| b.id.clone())),
                None => out.extend(self.building_ids()),
            }
        }
        out
    }
}

fn buildings(s: &WorldState, types: &BTreeMap<String, String>) -> Vec<Building> {
    let is_block = |id: &str| types.get(id).is_some_and(|t| vocab::is_subtype(t, "block"));
    let blocks: Vec<&str> = types.keys().map(String::as_str).filter(|id| is_block(id)).collect();
    let mut parent: BTreeMap<&str, &str> = blocks.iter().map(|b| (*b, *b)).collect();
    fn root<'a>(p: &BTreeMap<&'a str, &'a str>, mut x: &'a str) -> &'a str {
        while p[x] != x {
            x = p[x];
        }
        x
    }
    for (a, b) in &s.supports {
        if is_block(a) && is_block(b) {
            let (ra, rb) = (root(&parent, a), root(&parent, b));
            if ra != rb {
                let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
                parent.insert(hi, lo);
            }
        }
    }
    let mut groups: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();
    for b in &blocks {
        groups.entry(root(&parent, b)).or_default().insert(b.to_string());
    }
    groups
        .into_iter()
        .filter(|(_, m)| m.len() >= 2)
        .map(|(r, members)| Building { id: format!("{BUILDING_PREFIX}{r}"), members })
        .collect()
}
