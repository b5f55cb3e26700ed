//! The feature extractor: maps a game to a fixed-length vector in `[0, 1]`.
//!
//! Extraction is two-stage. [`raw_features`] computes unnormalized values
//! (n-gram log scores, node counts); a [`Normalizer`] fitted on a set of raw
//! rows then maps them into the unit interval.

pub mod ngram;
pub mod normalize;
mod structure;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dsl::ast::*;
use crate::dsl::vocab;
use crate::trace::db::{push_scope, PredicateDb, SlotTypes};

pub use ngram::{NGramModel, NGramSet};
pub use normalize::{Normalizer, NormalizeError};
pub use structure::COUNTED_SECTIONS;

/// Types and objects a preference refers to.
pub fn preference_refs(d: &PrefDef) -> std::collections::BTreeSet<String> {
    structure::pref_refs(d)
}

pub const REGISTRY_VERSION: &str = "goalgen-features/1";
pub const BINS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    Ngram,
    PlayTraceDatabase,
    DefinedAndUsed,
    GrammarMisuse,
    ScoringGrammarMisuse,
    GameElementDisjointness,
    Counting,
    PrefForall,
}

impl Group {
    pub fn label(self) -> &'static str {
        match self {
            Group::Ngram => "ngram",
            Group::PlayTraceDatabase => "play_trace_database",
            Group::DefinedAndUsed => "defined_and_used",
            Group::GrammarMisuse => "grammar_misuse",
            Group::ScoringGrammarMisuse => "scoring_grammar_misuse",
            Group::GameElementDisjointness => "game_element_disjointness",
            Group::Counting => "counting",
            Group::PrefForall => "pref_forall",
        }
    }
}

/// `[b]` binary, `[p]` proportion, `[d]` discretized one-hot, `[f]` float.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Kind {
    Binary,
    Proportion,
    Discrete,
    Float,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDef {
    pub name: String,
    pub group: Group,
    pub kind: Kind,
}

const NGRAM_NAMES: [&str; 5] = [
    "ast_ngram_full_n_5_score",
    "ast_ngram_setup_n_5_score",
    "ast_ngram_constraints_n_5_score",
    "ast_ngram_terminal_n_5_score",
    "ast_ngram_scoring_n_5_score",
];

const DB_NAMES: [&str; 2] = ["predicate_found_in_data_prop", "predicate_found_in_data_small_logicals_prop"];

fn table() -> Vec<FeatureDef> {
    use Group::*;
    use Kind::*;
    let mut out = Vec::new();
    let mut add = |name: &str, group: Group, kind: Kind| out.push(FeatureDef { name: name.to_string(), group, kind });
    for n in NGRAM_NAMES {
        add(n, Ngram, Float);
    }
    for n in DB_NAMES {
        add(n, PlayTraceDatabase, Proportion);
    }
    for (n, k) in [
        ("variables_used_all", Binary),
        ("variables_used_prop", Proportion),
        ("preferences_used_all", Binary),
        ("preferences_used_prop", Proportion),
        ("setup_quantified_objects_used", Proportion),
        ("any_setup_objects_used", Binary),
        ("section_doesnt_exist_setup", Binary),
        ("section_doesnt_exist_terminal", Binary),
    ] {
        add(n, DefinedAndUsed, k);
    }
    for n in GRAMMAR_MISUSE {
        add(n, GrammarMisuse, Binary);
    }
    for n in SCORING_MISUSE {
        add(n, ScoringGrammarMisuse, Binary);
    }
    for (n, k) in [
        ("disjoint_preferences_found", Binary),
        ("disjoint_preferences_scoring_terminal_types", Proportion),
        ("disjoint_preferences_scoring_terminal_predicates", Proportion),
        ("disjoint_seq_funcs_found", Binary),
        ("disjoint_at_end_found", Binary),
        ("disjoint_modal_predicates_found", Binary),
        ("disjoint_modal_predicates_prop", Proportion),
    ] {
        add(n, GameElementDisjointness, k);
    }
    for metric in ["node_count", "max_depth"] {
        for sec in COUNTED_SECTIONS {
            for bin in 0..BINS {
                add(&format!("{metric}_{}_{bin}", sec.label()), Counting, Discrete);
            }
        }
    }
    for n in [
        "pref_forall_used_correct",
        "pref_forall_used_incorrect",
        "pref_forall_external_forall_used_correct",
        "pref_forall_external_forall_used_incorrect",
        "pref_forall_pref_forall_correct_arity_correct",
        "pref_forall_pref_forall_correct_arity_incorrect",
        "pref_forall_pref_forall_correct_types_correct",
        "pref_forall_pref_forall_correct_types_incorrect",
    ] {
        add(n, PrefForall, Binary);
    }
    out
}

pub const GRAMMAR_MISUSE: [&str; 12] = [
    "adjacent_once_found",
    "adjacent_same_modal_found",
    "once_in_middle_of_pref_found",
    "pref_without_hold_found",
    "identical_consecutive_seq_func_predicates_found",
    "predicate_without_variables_or_agent",
    "nested_logicals_found",
    "identical_logical_children_found",
    "redundant_expression_found",
    "unnecessary_expression_found",
    "repeated_variables_found",
    "repeated_variable_type_in_either",
];

pub const SCORING_MISUSE: [&str; 6] = [
    "identical_scoring_children_found",
    "redundant_scoring_terminal_expression_found",
    "unnecessary_scoring_terminal_expression_found",
    "total_score_non_positive",
    "scoring_preferences_used_identically",
    "two_number_operation_found",
];

/// An ordered selection of features. The full catalog is the default;
/// ablations drop whole groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Registry {
    pub version: String,
    pub defs: Vec<FeatureDef>,
    /// Position of each selected feature in the full catalog.
    pub full_index: Vec<usize>,
}

impl Default for Registry {
    fn default() -> Self {
        Registry::full()
    }
}

impl Registry {
    pub fn full() -> Registry {
        let defs = table();
        let full_index = (0..defs.len()).collect();
        Registry { version: REGISTRY_VERSION.to_string(), defs, full_index }
    }

    pub fn without_groups(groups: &[Group]) -> Registry {
        let full = table();
        let keep: Vec<usize> = (0..full.len()).filter(|&i| !groups.contains(&full[i].group)).collect();
        let mut version = REGISTRY_VERSION.to_string();
        for g in groups {
            let _ = write!(version, "-{}", g.label());
        }
        Registry { version, defs: keep.iter().map(|&i| full[i].clone()).collect(), full_index: keep }
    }

    pub fn len(&self) -> usize {
        self.defs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defs.is_empty()
    }

    pub fn names(&self) -> Vec<&str> {
        self.defs.iter().map(|d| d.name.as_str()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.defs.iter().position(|d| d.name == name)
    }

    /// Selects this registry's features from a full-catalog vector.
    pub fn project(&self, full: &FeatureVector) -> FeatureVector {
        FeatureVector { values: self.full_index.iter().map(|&i| full.values[i]).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    /// Value by name in the full catalog ordering.
    pub fn get(&self, name: &str) -> Option<f64> {
        Registry::full().index_of(name).and_then(|i| self.values.get(i).copied())
    }
}

/// Unnormalized features of one game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawFeatures {
    /// Mean log scores; NaN for an absent section.
    pub ngram: [f64; 5],
    /// Node counts then max depths, for setup, constraints, terminal, scoring.
    pub counts: [f64; 8],
    pub values: BTreeMap<String, f64>,
}

/// Share of database predicates, and of small logical expressions over
/// them, that are witnessed in the traces under their declared types.
fn feasibility(g: &Game, db: Option<&PredicateDb>) -> (f64, f64) {
    let Some(db) = db else {
        return (1.0, 1.0);
    };
    let mut atoms = (0usize, 0usize);
    let mut logicals = (0usize, 0usize);
    let mut visit = |p: &Pred, scope: &mut SlotTypes| {
        scoped_walk(p, scope, &mut |n, scope| match n {
            Pred::Atom { name, .. } if vocab::DATABASE_PREDICATES.contains(&name.as_str()) => {
                atoms.1 += 1;
                atoms.0 += db.feasible(n, scope) as usize;
            }
            Pred::And(cs) | Pred::Or(cs) if cs.len() <= 4 => {
                logicals.1 += 1;
                logicals.0 += db.feasible(n, scope) as usize;
            }
            Pred::Not(_) => {
                logicals.1 += 1;
                logicals.0 += db.feasible(n, scope) as usize;
            }
            _ => {}
        });
    };
    if let Some(s) = &g.setup {
        setup_scoped(s, &mut Vec::new(), &mut visit);
    }
    for d in &g.preferences {
        let mut scope = Vec::new();
        if let Some(ext) = d.external_vars() {
            push_scope(&mut scope, ext);
        }
        let p = d.preference();
        push_scope(&mut scope, &p.vars);
        for q in structure::body_preds(p) {
            visit(q, &mut scope);
        }
    }
    let prop = |(hit, n): (usize, usize)| if n == 0 { 1.0 } else { hit as f64 / n as f64 };
    (prop(atoms), prop(logicals))
}

fn scoped_walk(p: &Pred, scope: &mut SlotTypes, f: &mut impl FnMut(&Pred, &mut SlotTypes)) {
    f(p, scope);
    match p {
        Pred::And(cs) | Pred::Or(cs) => cs.iter().for_each(|c| scoped_walk(c, scope, f)),
        Pred::Not(c) => scoped_walk(c, scope, f),
        Pred::Exists(vars, c) | Pred::Forall(vars, c) => {
            let base = scope.len();
            push_scope(scope, vars);
            scoped_walk(c, scope, f);
            scope.truncate(base);
        }
        Pred::Compare { .. } | Pred::Atom { .. } => {}
    }
}

fn setup_scoped(s: &Setup, scope: &mut SlotTypes, f: &mut impl FnMut(&Pred, &mut SlotTypes)) {
    match s {
        Setup::And(cs) | Setup::Or(cs) => cs.iter().for_each(|c| setup_scoped(c, scope, f)),
        Setup::Not(c) => setup_scoped(c, scope, f),
        Setup::Exists(vars, c) | Setup::Forall(vars, c) => {
            let base = scope.len();
            push_scope(scope, vars);
            setup_scoped(c, scope, f);
            scope.truncate(base);
        }
        Setup::Conserved(p) | Setup::Optional(p) => f(p, scope),
    }
}

pub fn raw_features(g: &Game, ngrams: &NGramSet, db: Option<&PredicateDb>) -> RawFeatures {
    let mut values = BTreeMap::new();
    let (found, small) = feasibility(g, db);
    values.insert(DB_NAMES[0].to_string(), found);
    values.insert(DB_NAMES[1].to_string(), small);
    for row in [structure::defined_and_used(g), structure::grammar_misuse(g), structure::scoring_misuse(g), structure::disjointness(g), structure::pref_forall(g)] {
        for (k, v) in row {
            values.insert(k.to_string(), v);
        }
    }
    let sizes = structure::section_sizes(g);
    let mut counts = [0.0; 8];
    for (i, (n, d)) in sizes.iter().enumerate() {
        counts[i] = *n;
        counts[4 + i] = *d;
    }
    RawFeatures { ngram: ngrams.scores(g), counts, values }
}

/// Everything extraction needs; immutable once built.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureContext {
    pub ngrams: NGramSet,
    pub db: Option<PredicateDb>,
    pub normalizer: Normalizer,
    pub registry: Registry,
}

impl FeatureContext {
    /// Trains n-gram models on the positives and fits the normalizer on
    /// positives and negatives together.
    pub fn fit(positives: &[Game], negatives: &[&Game], db: Option<PredicateDb>, registry: Registry) -> Result<FeatureContext, NormalizeError> {
        use rayon::prelude::*;
        let ngrams = NGramSet::train(positives, ngram::DEFAULT_N);
        let all: Vec<&Game> = positives.iter().chain(negatives.iter().copied()).collect();
        let rows: Vec<RawFeatures> = all.par_iter().map(|g| raw_features(g, &ngrams, db.as_ref())).collect();
        let normalizer = Normalizer::fit(&rows)?;
        Ok(FeatureContext { ngrams, db, normalizer, registry })
    }

    /// Full-catalog normalized vector.
    pub fn extract_full(&self, g: &Game) -> FeatureVector {
        self.normalizer.apply(&raw_features(g, &self.ngrams, self.db.as_ref()))
    }

    /// Vector over this context's registry.
    pub fn extract(&self, g: &Game) -> FeatureVector {
        self.registry.project(&self.extract_full(g))
    }

    pub fn raw(&self, g: &Game) -> RawFeatures {
        raw_features(g, &self.ngrams, self.db.as_ref())
    }
}

/// Features whose conjunction makes up the coherence check, with the value
/// each must take.
pub fn coherence_features() -> Vec<(&'static str, f64)> {
    let mut out = vec![("variables_used_all", 1.0), ("preferences_used_all", 1.0)];
    out.extend(GRAMMAR_MISUSE.iter().map(|n| (*n, 0.0)));
    out.extend(SCORING_MISUSE.iter().map(|n| (*n, 0.0)));
    out.push(("disjoint_preferences_found", 0.0));
    out
}

/// True iff every coherence feature of a full-catalog vector holds.
pub fn coherence_check(full: &FeatureVector) -> bool {
    let reg = Registry::full();
    coherence_features().iter().all(|(n, want)| reg.index_of(n).is_some_and(|i| full.values[i] == *want))
}

/// Tab-separated table with a header row of feature names.
pub fn write_table(names: &[&str], ids: &[String], rows: &[FeatureVector]) -> String {
    let mut out = String::from("id");
    for n in names {
        out.push('\t');
        out.push_str(n);
    }
    out.push('\n');
    for (id, r) in ids.iter().zip(rows) {
        out.push_str(id);
        for v in &r.values {
            let _ = write!(out, "\t{v}");
        }
        out.push('\n');
    }
    out
}
