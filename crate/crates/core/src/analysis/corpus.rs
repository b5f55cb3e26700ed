//! Abstract modal structures and predicate role-filler counts.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::dsl::ast::*;
use crate::dsl::nodes::{self, Flow, NodeMut};
use crate::dsl::print::{print_pref_body, print_seq_func};
use crate::dsl::vocab;

pub const OBJ: &str = "<obj>";
pub const TYPE: &str = "<type>";

fn coarsen_vars(v: &VariableList) -> VariableList {
    v.iter().map(|d| VarDef { vars: vec![OBJ.to_string(); d.vars.len()], types: TypeSpec::Single(TYPE.into()) }).collect()
}

fn coarsen_terms(ts: &[Term]) -> Vec<Term> {
    ts.iter().map(|t| if matches!(t, Term::Var(_)) { Term::Var(OBJ.into()) } else { t.clone() }).collect()
}

fn coarsen_fn(f: &FunctionEval) -> FunctionEval {
    FunctionEval { name: f.name.clone(), args: coarsen_terms(&f.args) }
}

/// Replaces every variable with `<obj>` and every quantifier type with `<type>`.
pub fn coarsen_pred(p: &Pred) -> Pred {
    match p {
        Pred::And(cs) => Pred::And(cs.iter().map(coarsen_pred).collect()),
        Pred::Or(cs) => Pred::Or(cs.iter().map(coarsen_pred).collect()),
        Pred::Not(c) => Pred::Not(Box::new(coarsen_pred(c))),
        Pred::Exists(v, c) => Pred::Exists(coarsen_vars(v), Box::new(coarsen_pred(c))),
        Pred::Forall(v, c) => Pred::Forall(coarsen_vars(v), Box::new(coarsen_pred(c))),
        Pred::Compare { op, args } => Pred::Compare {
            op: *op,
            args: args
                .iter()
                .map(|a| match a {
                    FnArg::Function(f) => FnArg::Function(coarsen_fn(f)),
                    n => n.clone(),
                })
                .collect(),
        },
        Pred::Atom { name, args } => Pred::Atom { name: name.clone(), args: coarsen_terms(args) },
    }
}

pub fn coarsen_seq_func(sf: &SeqFunc) -> SeqFunc {
    match sf {
        SeqFunc::Once(p) => SeqFunc::Once(coarsen_pred(p)),
        SeqFunc::Hold(p) => SeqFunc::Hold(coarsen_pred(p)),
        SeqFunc::OnceMeasure(p, f) => SeqFunc::OnceMeasure(coarsen_pred(p), coarsen_fn(f)),
        SeqFunc::HoldWhile(p, rest) => SeqFunc::HoldWhile(coarsen_pred(p), rest.iter().map(coarsen_pred).collect()),
    }
}

/// Coarsened text of every modal (and every at-end body) in a game.
pub fn structures_of(g: &Game) -> Vec<String> {
    let mut out = Vec::new();
    for d in &g.preferences {
        match &d.preference().body {
            PrefBody::Then(seq) => out.extend(seq.iter().map(|s| print_seq_func(&coarsen_seq_func(s)))),
            PrefBody::AtEnd(p) => out.push(print_pref_body(&PrefBody::AtEnd(coarsen_pred(p)))),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    /// Most frequent first; ties in text order.
    pub counts: Vec<(String, usize)>,
}

impl StructureReport {
    pub fn total(&self) -> usize {
        self.counts.iter().map(|c| c.1).sum()
    }

    pub fn unique(&self) -> usize {
        self.counts.len()
    }

    pub fn singletons(&self) -> usize {
        self.counts.iter().filter(|c| c.1 == 1).count()
    }

    /// Fraction of unique structures seen once.
    pub fn singleton_share(&self) -> f64 {
        self.singletons() as f64 / self.unique().max(1) as f64
    }

    /// Fraction of all occurrences covered by the `k` most common structures.
    pub fn top_share(&self, k: usize) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        self.counts.iter().take(k).map(|c| c.1).sum::<usize>() as f64 / total as f64
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("count\tstructure\n");
        for (k, n) in &self.counts {
            s.push_str(&format!("{n}\t{k}\n"));
        }
        s
    }
}

pub fn abstract_structures(corpus: &[Game]) -> StructureReport {
    let mut m: BTreeMap<String, usize> = BTreeMap::new();
    for g in corpus {
        for s in structures_of(g) {
            *m.entry(s).or_default() += 1;
        }
    }
    let mut counts: Vec<(String, usize)> = m.into_iter().collect();
    counts.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    StructureReport { counts }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Motif {
    Throwing,
    Stacking,
    Placement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Split {
    ThrowingOnly,
    Other,
}

impl Split {
    pub fn label(self) -> &'static str {
        match self {
            Split::ThrowingOnly => "throwing_only",
            Split::Other => "other",
        }
    }
}

fn category_label(ty: &str) -> Option<&'static str> {
    vocab::ancestors(ty)
        .into_iter()
        .find_map(|a| vocab::category_of(a))
        .or_else(|| vocab::category_of(ty))
        .map(|c| c.label())
}

/// Categories an argument can stand for, given the variables in scope.
fn term_categories(t: &Term, scope: &[nodes::ScopedVar]) -> BTreeSet<&'static str> {
    match t {
        Term::Var(v) => scope
            .iter()
            .rev()
            .find(|s| &s.name == v)
            .map(|s| s.types.names().into_iter().filter_map(category_label).collect())
            .unwrap_or_default(),
        Term::Const(c) if c == "agent" => BTreeSet::from(["agent"]),
        Term::Const(c) => category_label(c).into_iter().collect(),
    }
}

/// Each atom in setup and preferences with its argument categories.
fn atoms_with_categories(g: &Game) -> Vec<(String, Vec<BTreeSet<&'static str>>, Option<String>)> {
    let mut copy = g.clone();
    let mut out = Vec::new();
    nodes::walk_mut(&mut copy, &mut |n, ctx| {
        if let NodeMut::Pred(Pred::Atom { name, args }) = &n {
            let cats = args.iter().map(|t| term_categories(t, &ctx.scope)).collect();
            out.push((name.clone(), cats, ctx.pref_name.clone()));
        }
        Flow::Continue
    });
    out
}

fn is_throw_hold(p: &Pred) -> bool {
    let mut moving = false;
    let mut released = false;
    let mut visit = |q: &Pred| match q {
        Pred::Atom { name, .. } if name == "in_motion" => moving = true,
        Pred::Not(c) if matches!(c.as_ref(), Pred::Atom { name, .. } if name == "agent_holds") => released = true,
        _ => {}
    };
    fn walk(p: &Pred, f: &mut impl FnMut(&Pred)) {
        f(p);
        if let Pred::And(cs) = p {
            cs.iter().for_each(|c| walk(c, f));
        }
    }
    walk(p, &mut visit);
    moving && released
}

/// Throwing: a hold over in-motion and not-held. Stacking: `on` between
/// blocks. Placement: `in` or `on` involving receptacles or furniture.
pub fn motifs(g: &Game) -> BTreeSet<Motif> {
    let mut out = BTreeSet::new();
    for d in &g.preferences {
        if let PrefBody::Then(seq) = &d.preference().body {
            if seq.iter().any(|s| s.is_hold() && is_throw_hold(s.main())) {
                out.insert(Motif::Throwing);
            }
        }
    }
    for (name, cats, pref) in atoms_with_categories(g) {
        if pref.is_none() || (name != "on" && name != "in") {
            continue;
        }
        let all_blocks = cats.len() == 2 && cats.iter().all(|c| c.contains("blocks") || c.contains("building"));
        if name == "on" && all_blocks {
            out.insert(Motif::Stacking);
        } else if cats.iter().flatten().any(|c| matches!(*c, "receptacles" | "furniture" | "room_features")) {
            out.insert(Motif::Placement);
        }
    }
    out
}

pub fn split_of(g: &Game) -> Split {
    if motifs(g) == BTreeSet::from([Motif::Throwing]) {
        Split::ThrowingOnly
    } else {
        Split::Other
    }
}

/// (split, predicate, argument category) → number of games using it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RoleFillerTable {
    pub counts: BTreeMap<(Split, String, String), usize>,
}

impl RoleFillerTable {
    pub fn get(&self, split: Split, predicate: &str, category: &str) -> usize {
        self.counts.get(&(split, predicate.to_string(), category.to_string())).copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("split\tpredicate\tcategory\tgames\n");
        for ((sp, p, c), n) in &self.counts {
            s.push_str(&format!("{}\t{p}\t{c}\t{n}\n", sp.label()));
        }
        s
    }
}

pub fn role_filler_stats(corpus: &[Game]) -> RoleFillerTable {
    let mut t = RoleFillerTable::default();
    for g in corpus {
        let split = split_of(g);
        let mut seen = BTreeSet::new();
        for (name, cats, _) in atoms_with_categories(g) {
            for c in cats.into_iter().flatten() {
                seen.insert((name.clone(), c.to_string()));
            }
        }
        for (p, c) in seen {
            *t.counts.entry((split, p, c)).or_default() += 1;
        }
    }
    t
}
