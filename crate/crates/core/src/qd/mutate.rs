//! Mutation operators. Every operator returns `None` when it does not apply
//! or produced nothing new; `mutate` then draws another operator.

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{has_duplicate_preferences, KeySpace};
use crate::dsl::ast::*;
use crate::dsl::nodes::{self, Category, Ctx, Flow, Fragment, NodeInfo, NodeMut, Section};
use crate::dsl::pcfg::{self, site, Pcfg};
use crate::dsl::{parse_game, print_game, validate};

/// Operator draws before giving up and returning the parent.
pub const MAX_TRIES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operator {
    Regrow,
    Insert,
    Delete,
    Crossover,
    ResampleVariables,
    ResampleFirstCondition,
    ResampleLastCondition,
    ResampleSetup,
    ResampleTerminal,
}

impl Operator {
    pub const ALL: [Operator; 9] = [
        Operator::Regrow,
        Operator::Insert,
        Operator::Delete,
        Operator::Crossover,
        Operator::ResampleVariables,
        Operator::ResampleFirstCondition,
        Operator::ResampleLastCondition,
        Operator::ResampleSetup,
        Operator::ResampleTerminal,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Operator::Regrow => "regrow",
            Operator::Insert => "insert",
            Operator::Delete => "delete",
            Operator::Crossover => "crossover",
            Operator::ResampleVariables => "resample_variables",
            Operator::ResampleFirstCondition => "resample_first_condition",
            Operator::ResampleLastCondition => "resample_last_condition",
            Operator::ResampleSetup => "resample_setup",
            Operator::ResampleTerminal => "resample_terminal",
        }
    }

    pub fn from_label(s: &str) -> Option<Operator> {
        Operator::ALL.into_iter().find(|o| o.label() == s)
    }

    /// The targeted operators beyond plain regrowth and crossover.
    pub fn is_custom(self) -> bool {
        matches!(
            self,
            Operator::ResampleVariables
                | Operator::ResampleFirstCondition
                | Operator::ResampleLastCondition
                | Operator::ResampleSetup
                | Operator::ResampleTerminal
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mutation {
    pub game: Game,
    /// Operator that produced `game`; `None` for a no-op copy.
    pub operator: Option<Operator>,
    pub tries: usize,
    /// Crossover's second child: the partner with the parent's subtree.
    pub sibling: Option<Game>,
}

impl Mutation {
    pub fn is_noop(&self) -> bool {
        self.operator.is_none()
    }
}

/// Applies one weighted operator to `parent`. Crossover partners are drawn
/// uniformly from `partners`. Results that fail validation, do not
/// round-trip, fall outside the key space's preference range or repeat a
/// preference are discarded and another operator is drawn.
pub fn mutate<R: Rng + ?Sized>(
    parent: &Game,
    weights: &[(Operator, f64)],
    pcfg: &Pcfg,
    partners: &[&Game],
    space: &KeySpace,
    rng: &mut R,
) -> Mutation {
    let ops: Vec<Operator> = weights.iter().filter(|w| w.1 > 0.0).map(|w| w.0).collect();
    let ws: Vec<f64> = weights.iter().filter(|w| w.1 > 0.0).map(|w| w.1).collect();
    let Ok(dist) = WeightedIndex::new(&ws) else {
        return Mutation { game: parent.clone(), operator: None, tries: 0, sibling: None };
    };
    for t in 1..=MAX_TRIES {
        let op = ops[dist.sample(rng)];
        let (child, sibling) = match op {
            Operator::Crossover => match crossover(parent, partners, rng) {
                Some((c, p, s)) => (Some(c), s.filter(|s| s != p && acceptable(s, space))),
                None => (None, None),
            },
            _ => (apply(op, parent, pcfg, partners, rng), None),
        };
        if let Some(g) = child {
            if g != *parent && acceptable(&g, space) {
                return Mutation { game: g, operator: Some(op), tries: t, sibling };
            }
        }
    }
    Mutation { game: parent.clone(), operator: None, tries: MAX_TRIES, sibling: None }
}

pub(crate) fn acceptable(g: &Game, space: &KeySpace) -> bool {
    (space.min_prefs..=space.max_prefs).contains(&g.preferences.len())
        && validate(g).is_empty()
        && !has_duplicate_preferences(g)
        && parse_game(&print_game(g)).as_ref() == Ok(g)
}

pub fn apply<R: Rng + ?Sized>(op: Operator, g: &Game, pcfg: &Pcfg, partners: &[&Game], rng: &mut R) -> Option<Game> {
    match op {
        Operator::Regrow => regrow(g, pcfg, rng),
        Operator::Insert => insert(g, pcfg, rng),
        Operator::Delete => delete(g, rng),
        Operator::Crossover => crossover(g, partners, rng).map(|c| c.0),
        Operator::ResampleVariables => resample_variables(g, pcfg, rng),
        Operator::ResampleFirstCondition => resample_condition(g, pcfg, partners, true, rng),
        Operator::ResampleLastCondition => resample_condition(g, pcfg, partners, false, rng),
        Operator::ResampleSetup => resample_section(g, pcfg, partners, Section::Setup, rng),
        Operator::ResampleTerminal => resample_section(g, pcfg, partners, Section::Terminal, rng),
    }
}

fn regrow<R: Rng + ?Sized>(g: &Game, pcfg: &Pcfg, rng: &mut R) -> Option<Game> {
    let n = nodes::node_count(g);
    pcfg::regrow(g, rng.gen_range(0..n), pcfg, rng).ok()
}

/// A node holding a variable-length child list.
struct ListNode {
    id: usize,
    child: Category,
    len: usize,
}

fn list_nodes(g: &Game) -> Vec<ListNode> {
    let mut copy = g.clone();
    let mut out = Vec::new();
    nodes::walk_mut(&mut copy, &mut |n, ctx| {
        let found = match &n {
            NodeMut::Game(g) => Some((Category::PrefDef, g.preferences.len())),
            NodeMut::Setup(Setup::And(cs) | Setup::Or(cs)) => Some((Category::Setup, cs.len())),
            NodeMut::Pred(Pred::And(cs) | Pred::Or(cs)) => Some((Category::Pred, cs.len())),
            NodeMut::PrefBody(PrefBody::Then(cs)) => Some((Category::SeqFunc, cs.len())),
            NodeMut::Scoring(Scoring::Add(cs) | Scoring::Mul(cs)) => Some((Category::Scoring, cs.len())),
            _ => None,
        };
        if let Some((child, len)) = found {
            out.push(ListNode { id: ctx.id, child, len });
        }
        Flow::Continue
    });
    out
}

fn fresh_pref_name(g: &Game) -> String {
    let used = g.preference_names();
    (0..).map(|i| format!("preference{i}")).find(|n| !used.contains(&n.as_str())).unwrap()
}

fn insert<R: Rng + ?Sized>(g: &Game, pcfg: &Pcfg, rng: &mut R) -> Option<Game> {
    let target = list_nodes(g).choose(rng)?.id;
    insert_into(g, target, pcfg, rng)
}

/// Adds a sampled child to the list node `id` at a random position.
pub fn insert_into<R: Rng + ?Sized>(g: &Game, id: usize, pcfg: &Pcfg, rng: &mut R) -> Option<Game> {
    let target = list_nodes(g).into_iter().find(|l| l.id == id)?;
    let ctx = if target.child == Category::PrefDef {
        let mut c = Ctx::new(g);
        c.depth = 1;
        c.section = Section::Constraints;
        c.pref_name = Some(fresh_pref_name(g));
        c
    } else {
        // The first child shares the context any new sibling would have.
        nodes::get_fragment(g, target.id + 1).ok()?.1
    };
    let frag = pcfg::sample_fragment(pcfg, g, target.child, &ctx, rng);
    let at = rng.gen_range(0..=target.len);
    let mut out = g.clone();
    let ok = nodes::with_node(&mut out, target.id, |n, _| match (n, frag) {
        (NodeMut::Game(g), Fragment::PrefDef(d)) => {
            // A new preference is also counted, so it is not left unused.
            let count = Scoring::Eval(PrefEval { mode: CountMode::Count, pref: d.name().to_string(), types: vec![] });
            match &mut g.scoring {
                Scoring::Add(cs) => cs.push(count),
                other => *other = Scoring::Add(vec![other.clone(), count]),
            }
            g.preferences.insert(at.min(g.preferences.len()), d);
            true
        }
        (NodeMut::Setup(Setup::And(cs) | Setup::Or(cs)), Fragment::Setup(s)) => {
            cs.insert(at, s);
            true
        }
        (NodeMut::Pred(Pred::And(cs) | Pred::Or(cs)), Fragment::Pred(p)) => {
            cs.insert(at, p);
            true
        }
        (NodeMut::PrefBody(PrefBody::Then(cs)), Fragment::SeqFunc(s)) => {
            cs.insert(at, s);
            true
        }
        (NodeMut::Scoring(Scoring::Add(cs) | Scoring::Mul(cs)), Fragment::Scoring(s)) => {
            cs.insert(at, s);
            true
        }
        _ => false,
    });
    ok.ok()?.then_some(out)
}

fn delete<R: Rng + ?Sized>(g: &Game, rng: &mut R) -> Option<Game> {
    let lists: Vec<ListNode> = list_nodes(g).into_iter().filter(|l| l.len >= 2).collect();
    let target = lists.choose(rng)?;
    let at = rng.gen_range(0..target.len);
    let mut out = g.clone();
    nodes::with_node(&mut out, target.id, |n, _| match n {
        NodeMut::Game(g) => {
            g.preferences.remove(at);
        }
        NodeMut::Setup(Setup::And(cs) | Setup::Or(cs)) => {
            cs.remove(at);
        }
        NodeMut::Pred(Pred::And(cs) | Pred::Or(cs)) => {
            cs.remove(at);
        }
        NodeMut::PrefBody(PrefBody::Then(cs)) => {
            cs.remove(at);
        }
        NodeMut::Scoring(Scoring::Add(cs) | Scoring::Mul(cs)) => {
            cs.remove(at);
        }
        _ => {}
    })
    .ok()?;
    Some(out)
}

/// Replaces a random subtree with a same-category subtree of a partner.
/// Swaps a subtree of `g` with a same-category subtree of a random partner.
/// Returns the child, the partner, and the partner's child if it exists.
fn crossover<'a, R: Rng + ?Sized>(g: &Game, partners: &[&'a Game], rng: &mut R) -> Option<(Game, &'a Game, Option<Game>)> {
    let partner = partners.choose(rng)?;
    let mine = nodes::nodes(g);
    // Internal nodes nine times in ten, as in standard subtree crossover.
    let internal = rng.gen_bool(0.9);
    let pool: Vec<&NodeInfo> = mine[1..].iter().filter(|n| (n.size > 1) == internal).collect();
    let target = match pool.choose(rng) {
        Some(n) => *n,
        None => mine[1..].choose(rng)?,
    };
    let theirs: Vec<usize> =
        nodes::nodes(partner).into_iter().filter(|n| n.id > 0 && n.category == target.category).map(|n| n.id).collect();
    let pick = *theirs.choose(rng)?;
    let child = crossover_at(g, target.id, partner, pick)?;
    Some((child, partner, crossover_at(partner, pick, g, target.id)))
}

/// Puts subtree `from` of `partner` in place of subtree `at` of `g`. A
/// swapped preference keeps the name of the one it replaces.
pub fn crossover_at(g: &Game, at: usize, partner: &Game, from: usize) -> Option<Game> {
    let (mut frag, _) = nodes::get_fragment(partner, from).ok()?;
    let (old, _) = nodes::get_fragment(g, at).ok()?;
    if old.category() != frag.category() {
        return None;
    }
    if let (Fragment::PrefDef(d), Fragment::PrefDef(old)) = (&mut frag, &old) {
        d.preference_mut().name = old.name().to_string();
    }
    let mut out = g.clone();
    nodes::replace_fragment(&mut out, at, frag).ok()?;
    Some(out)
}

/// Swaps the type of one object variable in a preference quantifier for a
/// type drawn from the grammar.
fn resample_variables<R: Rng + ?Sized>(g: &Game, pcfg: &Pcfg, rng: &mut R) -> Option<Game> {
    let mut copy = g.clone();
    let mut slots = Vec::new();
    nodes::walk_mut(&mut copy, &mut |n, ctx| {
        if let (NodeMut::VariableList(vs), Section::Constraints) = (&n, ctx.section) {
            for (j, d) in vs.iter().enumerate() {
                if d.class() == crate::dsl::vocab::VarClass::Object {
                    slots.push((ctx.id, j));
                }
            }
        }
        Flow::Continue
    });
    let &(id, j) = slots.choose(rng)?;
    let ty = pcfg.choose(rng, site::OBJECT_TYPE, None);
    let mut out = g.clone();
    nodes::with_node(&mut out, id, |n, _| {
        if let NodeMut::VariableList(vs) = n {
            vs[j].types = TypeSpec::Single(ty);
        }
    })
    .ok()?;
    Some(out)
}

/// Main predicates of the first or last modal of each sequence, and the
/// bodies of at-end preferences.
fn condition_targets(g: &Game, first: bool) -> Vec<usize> {
    let mut copy = g.clone();
    let mut targets = Vec::new();
    nodes::walk_mut(&mut copy, &mut |n, ctx| {
        match (&n, ctx.seq_pos) {
            (NodeMut::SeqFunc(_), Some((i, len))) if (first && i == 0) || (!first && i + 1 == len) => {
                targets.push(ctx.id + 1)
            }
            (NodeMut::PrefBody(PrefBody::AtEnd(_)), _) => targets.push(ctx.id + 1),
            _ => {}
        }
        Flow::Continue
    });
    targets
}

/// Replaces a first or last condition, half the time with the matching
/// condition of a partner's preference and otherwise by regrowth.
fn resample_condition<R: Rng + ?Sized>(g: &Game, pcfg: &Pcfg, partners: &[&Game], first: bool, rng: &mut R) -> Option<Game> {
    let &id = condition_targets(g, first).choose(rng)?;
    if rng.gen_bool(0.5) {
        if let Some(p) = partners.choose(rng) {
            if let Some(&from) = condition_targets(p, first).choose(rng) {
                return crossover_at(g, id, p, from);
            }
        }
    }
    pcfg::regrow(g, id, pcfg, rng).ok()
}

/// Half the time takes a partner's version of an optional section, present
/// or absent; otherwise redraws it, including whether it is present.
fn resample_section<R: Rng + ?Sized>(g: &Game, pcfg: &Pcfg, partners: &[&Game], section: Section, rng: &mut R) -> Option<Game> {
    if rng.gen_bool(0.5) {
        if let Some(p) = partners.choose(rng) {
            let mut out = g.clone();
            match section {
                Section::Setup => out.setup = p.setup.clone(),
                _ => out.terminal = p.terminal.clone(),
            }
            if &out != g {
                return Some(out);
            }
        }
    }
    let (present_site, category) = match section {
        Section::Setup => (site::HAS_SETUP, Category::Setup),
        _ => (site::HAS_TERMINAL, Category::Terminal),
    };
    let mut out = g.clone();
    let present = match section {
        Section::Setup => g.setup.is_some(),
        _ => g.terminal.is_some(),
    };
    // An absent section is always added; a present one is redrawn or dropped.
    let keep = !present || pcfg.choose(rng, present_site, None) == "yes";
    let frag = if keep {
        let mut ctx = Ctx::new(g);
        ctx.depth = 1;
        ctx.section = section;
        Some(pcfg::sample_fragment(pcfg, g, category, &ctx, rng))
    } else {
        None
    };
    match (section, frag) {
        (Section::Setup, Some(Fragment::Setup(s))) => out.setup = Some(s),
        (Section::Setup, None) => out.setup = None,
        (_, Some(Fragment::Terminal(t))) => out.terminal = Some(t),
        (_, None) => out.terminal = None,
        _ => return None,
    }
    Some(out)
}
