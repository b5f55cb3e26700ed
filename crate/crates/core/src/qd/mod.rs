//! MAP-Elites over goal programs. Cells are keyed by how many preferences
//! resemble each exemplar preference, whether a setup exists, and a
//! coherence flag that splits the archive in two halves.

mod mutate;
mod run;

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dsl::ast::*;
use crate::dsl::parse::parse_pref_def;
use crate::dsl::vocab::{self, Category};
use crate::features::preference_refs;

pub use mutate::{mutate, Mutation, Operator};
pub use run::{init_archive, run_map_elites, GenStats, MapElites, QdConfig};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QdError {
    #[error("game has {found} preferences; the key space allows {min}..={max}")]
    PrefCount { found: usize, min: usize, max: usize },
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
}

pub const BC_BITS: usize = 9;
pub const BC_LABELS: [&str; BC_BITS] = [
    "agent_holds|in_motion",
    "in",
    "on",
    "adjacent|near|touch",
    "balls",
    "receptacles",
    "blocks|building",
    "furniture|room_features",
    "small|large|game_object",
];

pub type BcVector = [bool; BC_BITS];

fn predicate_bit(name: &str) -> Option<usize> {
    match name {
        "agent_holds" | "in_motion" => Some(0),
        "in" => Some(1),
        "on" => Some(2),
        "adjacent" | "near" | "touch" => Some(3),
        _ => None,
    }
}

fn category_bit(c: Category) -> Option<usize> {
    match c {
        Category::Balls => Some(4),
        Category::Receptacles => Some(5),
        Category::Blocks | Category::Building => Some(6),
        Category::Furniture | Category::RoomFeatures => Some(7),
        Category::SmallObjects | Category::LargeObjects | Category::AnyObject => Some(8),
        _ => None,
    }
}

/// Which predicate groups and object categories a preference uses.
pub fn pref_bc_vector(d: &PrefDef) -> BcVector {
    let mut v = [false; BC_BITS];
    let p = d.preference();
    let preds = match &p.body {
        PrefBody::Then(seq) => seq.iter().flat_map(|s| s.preds()).collect::<Vec<_>>(),
        PrefBody::AtEnd(q) => vec![q],
    };
    for q in preds {
        q.for_each_atom(&mut |name, _| {
            if let Some(i) = predicate_bit(name) {
                v[i] = true;
            }
        });
    }
    for r in preference_refs(d) {
        let cat = vocab::ancestors(&r).into_iter().find_map(|a| vocab::category_of(a)).or_else(|| vocab::category_of(&r));
        if let Some(i) = cat.and_then(category_bit) {
            v[i] = true;
        }
    }
    v
}

fn l1(a: &BcVector, b: &BcVector) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exemplar {
    pub name: String,
    pub text: String,
    pub bits: BcVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExemplarSet {
    pub exemplars: Vec<Exemplar>,
}

pub const EXEMPLAR_TEXTS: [&str; 9] = [
    "(preference throwAttempt (exists (?b - dodgeball) (then (once (agent_holds ?b)) (hold (and (not (agent_holds ?b)) (in_motion ?b))) (once (not (in_motion ?b))))))",
    "(preference throwInBin (exists (?b - ball ?h - hexagonal_bin) (then (once (and (on rug agent) (agent_holds ?b))) (hold (and (not (agent_holds ?b)) (in_motion ?b))) (once (and (not (in_motion ?b)) (in ?h ?b))))))",
    "(preference ballThrownToBed (exists (?d - dodgeball) (then (once (and (agent_holds ?d) (adjacent desk agent))) (hold (and (not (agent_holds ?d)) (in_motion ?d))) (once (and (not (in_motion ?d)) (on bed ?d))))))",
    "(preference itemInClosedDrawerAtEnd (exists (?g - game_object) (at-end (and (in top_drawer ?g) (not (open top_drawer))))))",
    "(preference watchOnShelf (exists (?w - watch ?s - shelf) (at-end (on ?s ?w))))",
    "(preference gameBlockFound (exists (?l - block) (then (once (game_start)) (hold (not (exists (?b - building) (and (in ?b ?l) (is_setup_object ?b))))) (once (agent_holds ?l)))))",
    "(preference matchingBuildingBuilt (exists (?b1 ?b2 - building) (at-end (and (is_setup_object ?b1) (not (is_setup_object ?b2)) (forall (?l1 ?l2 - block) (or (not (in ?b1 ?l1)) (not (in ?b1 ?l2)) (not (on ?l1 ?l2)) (exists (?l3 ?l4 - block) (and (in ?b2 ?l3) (in ?b2 ?l4) (on ?l3 ?l4) (same_type ?l1 ?l3) (same_type ?l2 ?l4)))))))))",
    "(preference ballDroppedInBin (exists (?b - ball ?h - hexagonal_bin) (then (once (and (adjacent ?h agent) (agent_holds ?b))) (hold (and (in_motion ?b) (not (agent_holds ?b)))) (once (and (not (in_motion ?b)) (in ?h ?b))))))",
    "(preference pillowMovedToRoomCenter (exists (?o - pillow) (then (once (and (agent_holds ?o))) (hold (and (in_motion ?o) (not (agent_holds ?o)))) (once (and (not (in_motion ?o)) (near room_center ?o) (exists (?o1 ?o2 ?o3 - game_object) (and (same_color ?o1 pink) (near room_center ?o1) (same_color ?o2 blue) (near room_center ?o2) (same_color ?o3 brown) (near room_center ?o3))))))))",
];

impl ExemplarSet {
    pub fn from_texts(texts: &[&str]) -> Result<ExemplarSet, crate::dsl::ParseError> {
        let mut exemplars = Vec::new();
        for t in texts {
            let d = parse_pref_def(t)?;
            exemplars.push(Exemplar { name: d.name().to_string(), text: t.to_string(), bits: pref_bc_vector(&d) });
        }
        Ok(ExemplarSet { exemplars })
    }

    /// The nine default exemplars.
    pub fn standard() -> ExemplarSet {
        ExemplarSet::from_texts(&EXEMPLAR_TEXTS).expect("exemplars parse")
    }

    /// The first `n` default exemplars.
    pub fn first(n: usize) -> ExemplarSet {
        let mut s = ExemplarSet::standard();
        s.exemplars.truncate(n);
        s
    }

    pub fn len(&self) -> usize {
        self.exemplars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exemplars.is_empty()
    }

    /// Exemplars within L1 distance 1 of `v`.
    pub fn matches(&self, v: &BcVector) -> Vec<usize> {
        (0..self.len()).filter(|&i| l1(&self.exemplars[i].bits, v) <= 1).collect()
    }

    /// A standalone counting game around exemplar `i`.
    pub fn wrapped_game(&self, i: usize) -> Game {
        let e = &self.exemplars[i];
        crate::dsl::parse_game(&format!(
            "(define (game exemplar-{i}) (:domain many-objects-room-v1) (:constraints (and {})) (:scoring (count {})))",
            e.text, e.name
        ))
        .expect("wrapped exemplar parses")
    }
}

/// Match counts per exemplar, with the no-match count last, plus the setup
/// flag. The preference total is the sum of the counts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ArchiveKey {
    pub counts: Vec<u8>,
    pub setup: bool,
}

impl ArchiveKey {
    pub fn total(&self) -> usize {
        self.counts.iter().map(|&c| c as usize).sum()
    }

    pub fn label(&self) -> String {
        let c: Vec<String> = self.counts.iter().map(u8::to_string).collect();
        format!("{}|{}", c.join(","), if self.setup { "setup" } else { "nosetup" })
    }

    pub fn parse_label(s: &str) -> Option<ArchiveKey> {
        let (c, f) = s.split_once('|')?;
        let counts = c.split(',').map(|x| x.parse().ok()).collect::<Option<Vec<u8>>>()?;
        let setup = match f {
            "setup" => true,
            "nosetup" => false,
            _ => return None,
        };
        Some(ArchiveKey { counts, setup })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeySpace {
    pub n_exemplars: usize,
    pub min_prefs: usize,
    pub max_prefs: usize,
}

impl KeySpace {
    pub fn standard() -> KeySpace {
        KeySpace { n_exemplars: 9, min_prefs: 1, max_prefs: 4 }
    }

    pub fn desk() -> KeySpace {
        KeySpace { n_exemplars: 3, min_prefs: 1, max_prefs: 2 }
    }

    /// Every key, ordered by total then counts then setup flag.
    pub fn enumerate(&self) -> Vec<ArchiveKey> {
        fn comps(n: usize, bins: usize, prefix: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
            if bins == 1 {
                prefix.push(n as u8);
                out.push(prefix.clone());
                prefix.pop();
                return;
            }
            for k in (0..=n).rev() {
                prefix.push(k as u8);
                comps(n - k, bins - 1, prefix, out);
                prefix.pop();
            }
        }
        let mut out = Vec::new();
        for n in self.min_prefs..=self.max_prefs {
            let mut cs = Vec::new();
            comps(n, self.n_exemplars + 1, &mut Vec::new(), &mut cs);
            for c in cs {
                for setup in [false, true] {
                    out.push(ArchiveKey { counts: c.clone(), setup });
                }
            }
        }
        out
    }

    pub fn contains(&self, k: &ArchiveKey) -> bool {
        k.counts.len() == self.n_exemplars + 1 && (self.min_prefs..=self.max_prefs).contains(&k.total())
    }
}

/// Key of a game, and which exemplar each preference was assigned to.
/// Ties between several matching exemplars are broken with `rng`.
pub fn behavioral_key<R: Rng + ?Sized>(g: &Game, ex: &ExemplarSet, space: &KeySpace, rng: &mut R) -> Result<(ArchiveKey, Vec<Option<usize>>), QdError> {
    let n = g.preferences.len();
    if !(space.min_prefs..=space.max_prefs).contains(&n) {
        return Err(QdError::PrefCount { found: n, min: space.min_prefs, max: space.max_prefs });
    }
    let mut counts = vec![0u8; ex.len() + 1];
    let mut assignment = Vec::with_capacity(n);
    for d in &g.preferences {
        let m = ex.matches(&pref_bc_vector(d));
        let pick = m.choose(rng).copied();
        counts[pick.unwrap_or(ex.len())] += 1;
        assignment.push(pick);
    }
    Ok((ArchiveKey { counts, setup: g.setup.is_some() }, assignment))
}

/// Key implied by a stored assignment.
pub fn key_from_assignment(g: &Game, n_exemplars: usize, assignment: &[Option<usize>]) -> ArchiveKey {
    let mut counts = vec![0u8; n_exemplars + 1];
    for a in assignment {
        counts[a.unwrap_or(n_exemplars)] += 1;
    }
    ArchiveKey { counts, setup: g.setup.is_some() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Elite {
    pub game: Game,
    pub fitness: f64,
    pub generation: usize,
    pub assignment: Vec<Option<usize>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Archive {
    pub coherent: BTreeMap<ArchiveKey, Elite>,
    pub incoherent: BTreeMap<ArchiveKey, Elite>,
    pub offered: usize,
    pub accepted: usize,
}

impl Archive {
    pub fn half(&self, coherent: bool) -> &BTreeMap<ArchiveKey, Elite> {
        if coherent {
            &self.coherent
        } else {
            &self.incoherent
        }
    }

    /// Inserts iff the cell is empty or the candidate is strictly fitter.
    pub fn offer(&mut self, key: ArchiveKey, coherent: bool, elite: Elite) -> bool {
        self.offered += 1;
        let half = if coherent { &mut self.coherent } else { &mut self.incoherent };
        let better = half.get(&key).is_none_or(|e| elite.fitness > e.fitness);
        if better {
            half.insert(key, elite);
            self.accepted += 1;
        }
        better
    }

    pub fn occupied(&self) -> usize {
        self.coherent.len() + self.incoherent.len()
    }

    /// Residents of both halves, coherent first, in key order.
    pub fn residents(&self) -> Vec<&Elite> {
        self.coherent.values().chain(self.incoherent.values()).collect()
    }

    /// One JSON line per resident: half, key, fitness, generation, game text.
    pub fn to_checkpoint(&self) -> String {
        let mut out = String::new();
        for (coh, half) in [(true, &self.coherent), (false, &self.incoherent)] {
            for (k, e) in half {
                let row = serde_json::json!({
                    "coherent": coh,
                    "key": k.label(),
                    "fitness": e.fitness,
                    "generation": e.generation,
                    "assignment": e.assignment,
                    "game": crate::dsl::print_game(&e.game),
                });
                out.push_str(&row.to_string());
                out.push('\n');
            }
        }
        out
    }

    pub fn from_checkpoint(text: &str) -> Result<Archive, QdError> {
        #[derive(Deserialize)]
        struct Row {
            coherent: bool,
            key: String,
            fitness: f64,
            generation: usize,
            assignment: Vec<Option<usize>>,
            game: String,
        }
        let mut a = Archive::default();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = |m: String| QdError::Checkpoint(format!("line {}: {m}", i + 1));
            let r: Row = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
            let key = ArchiveKey::parse_label(&r.key).ok_or_else(|| bad(format!("bad key {}", r.key)))?;
            let game = crate::dsl::parse_game(&r.game).map_err(|e| bad(e.to_string()))?;
            let half = if r.coherent { &mut a.coherent } else { &mut a.incoherent };
            half.insert(key, Elite { game, fitness: r.fitness, generation: r.generation, assignment: r.assignment });
        }
        Ok(a)
    }
}

/// Preference bodies with names masked, for duplicate detection.
pub fn has_duplicate_preferences(g: &Game) -> bool {
    let mut seen = BTreeSet::new();
    g.preferences.iter().any(|d| {
        let mut c = d.clone();
        c.preference_mut().name = String::new();
        !seen.insert(crate::dsl::print::print_pref_def(&c))
    })
}

#[cfg(test)]
mod tests;
