//! Probabilistic grammar over goal programs: fitting from a corpus, sampling
//! whole games, and regrowing single subtrees.

use std::collections::{BTreeMap, HashSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ast::*;
use super::nodes::{self, Category, Ctx, Fragment, NodeError, NumberKind, ScopedVar};
use super::vocab::{self, ArgKind, VarClass};

pub const DEFAULT_MAX_DEPTH: usize = 16;
/// Node budget per sampled subtree before the attempt is abandoned.
const NODE_BUDGET: usize = 600;
const SAMPLE_ATTEMPTS: usize = 16;
/// Regrowth retries when the resampled subtree equals the original.
pub const REGROW_ATTEMPTS: usize = 10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PcfgError {
    #[error("cannot fit a grammar to an empty corpus")]
    EmptyCorpus,
    #[error(transparent)]
    Node(#[from] NodeError),
}

/// Choice sites of the generator. Every decision the sampler makes is drawn
/// from exactly one of these, and fitting counts the same decisions.
pub mod site {
    pub const HAS_SETUP: &str = "section.setup";
    pub const HAS_TERMINAL: &str = "section.terminal";
    pub const DOMAIN: &str = "domain";
    pub const PREF_COUNT: &str = "pref.count";
    pub const SETUP: &str = "setup";
    pub const SETUP_AND_LEN: &str = "setup.and.len";
    pub const SETUP_OR_LEN: &str = "setup.or.len";
    pub const PRED: &str = "pred";
    pub const PRED_AND_LEN: &str = "pred.and.len";
    pub const PRED_OR_LEN: &str = "pred.or.len";
    pub const PREDICATE: &str = "predicate";
    pub const FUNCTION: &str = "function";
    pub const COMP_OP: &str = "comp_op";
    pub const COMPARE_EQ_LEN: &str = "compare.eq.len";
    pub const FN_ARG: &str = "fn_arg";
    pub const OBJECT_NAME: &str = "object_name";
    pub const TYPE_TERM: &str = "type_term";
    pub const COLOR: &str = "color";
    pub const ORIENTATION: &str = "orientation";
    pub const SIDE: &str = "side";
    pub const VAR_LIST_LEN: &str = "var_list.len";
    pub const VAR_DEF_LEN: &str = "var_def.len";
    pub const VAR_CLASS: &str = "var_class";
    pub const TYPE_SPEC: &str = "type_spec";
    pub const EITHER_LEN: &str = "either.len";
    pub const OBJECT_TYPE: &str = "object_type";
    pub const PREF_DEF: &str = "pref_def";
    pub const QUANTIFIER: &str = "quantifier";
    pub const PREF_BODY: &str = "pref_body";
    pub const THEN_LEN: &str = "then.len";
    pub const SEQ_FUNC: &str = "seq_func";
    pub const HOLD_WHILE_LEN: &str = "hold_while.len";
    pub const TERMINAL: &str = "terminal";
    pub const TERMINAL_AND_LEN: &str = "terminal.and.len";
    pub const TERMINAL_OR_LEN: &str = "terminal.or.len";
    pub const TERMINAL_COMP: &str = "terminal.comp";
    pub const TERMINAL_COMP_OP: &str = "terminal.comp_op";
    pub const SCORING: &str = "scoring";
    pub const SCORING_ADD_LEN: &str = "scoring.add.len";
    pub const SCORING_MUL_LEN: &str = "scoring.mul.len";
    pub const SCORING_COMP_OP: &str = "scoring.comp_op";
    pub const SCORING_EQ_LEN: &str = "scoring.eq.len";
    pub const COUNT_MODE: &str = "count_mode";
    pub const PREF_TYPES_LEN: &str = "pref_types.len";
    pub const PREF_TYPE: &str = "pref_type";
}

fn term_site(kind: ArgKind) -> &'static str {
    match kind {
        ArgKind::Object => "term.object",
        ArgKind::Color => "term.color",
        ArgKind::Orientation => "term.orientation",
        ArgKind::Side => "term.side",
        ArgKind::ObjectOrType => "term.object_or_type",
        ArgKind::ObjectOrColor => "term.object_or_color",
    }
}

fn number_site(kind: NumberKind) -> String {
    format!("number.{}", kind.label())
}

fn strs(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn range(lo: usize, hi: usize) -> Vec<String> {
    (lo..=hi).map(|n| n.to_string()).collect()
}

/// Options the grammar allows at a site before any data is seen. Observed
/// values extend this set.
pub fn grammar_options(s: &str) -> Vec<String> {
    use site::*;
    match s {
        HAS_SETUP | HAS_TERMINAL => strs(&["yes", "no"]),
        DOMAIN => strs(&["few-objects-room-v1", "medium-objects-room-v1", "many-objects-room-v1"]),
        PREF_COUNT => range(1, 4),
        SETUP => strs(&["and", "or", "not", "exists", "forall", "game-conserved", "game-optional"]),
        SETUP_AND_LEN | SETUP_OR_LEN => range(2, 4),
        PRED => strs(&["and", "or", "not", "exists", "forall", "compare", "atom"]),
        PRED_AND_LEN | PRED_OR_LEN => range(1, 4),
        PREDICATE => vocab::PREDICATES.iter().map(|p| p.name.to_string()).collect(),
        FUNCTION => vocab::FUNCTIONS.iter().map(|p| p.name.to_string()).collect(),
        COMP_OP | TERMINAL_COMP_OP | SCORING_COMP_OP => CompOp::ALL.iter().map(|o| o.symbol().to_string()).collect(),
        COMPARE_EQ_LEN | SCORING_EQ_LEN => range(2, 3),
        FN_ARG => strs(&["function", "number"]),
        OBJECT_NAME => strs(vocab::OBJECT_NAMES),
        TYPE_TERM | OBJECT_TYPE | PREF_TYPE => vocab::object_types().map(String::from).collect(),
        COLOR => strs(vocab::COLORS),
        ORIENTATION => strs(vocab::ORIENTATIONS),
        SIDE => strs(vocab::SIDES),
        VAR_LIST_LEN => range(1, 3),
        VAR_DEF_LEN => range(1, 2),
        VAR_CLASS => strs(&["object", "color", "orientation", "side"]),
        TYPE_SPEC => strs(&["single", "either"]),
        EITHER_LEN => range(2, 3),
        PREF_DEF => strs(&["single", "forall"]),
        QUANTIFIER => strs(&["exists", "forall", "none"]),
        PREF_BODY => strs(&["then", "at-end"]),
        THEN_LEN => range(2, 4),
        SEQ_FUNC => strs(&["once", "once-measure", "hold", "hold-while"]),
        HOLD_WHILE_LEN => range(1, 2),
        TERMINAL => strs(&["and", "or", "not", "compare"]),
        TERMINAL_AND_LEN | TERMINAL_OR_LEN => range(1, 3),
        TERMINAL_COMP => strs(&["time", "score", "count"]),
        SCORING => strs(&[
            "external-forall-maximize",
            "external-forall-minimize",
            "+",
            "*",
            "-",
            "/",
            "neg",
            "total-time",
            "total-score",
            "compare",
            "eval",
            "number",
        ]),
        SCORING_ADD_LEN | SCORING_MUL_LEN => range(1, 3),
        COUNT_MODE => CountMode::ALL.iter().map(|m| m.keyword().to_string()).collect(),
        PREF_TYPES_LEN => range(0, 1),
        "term.object" | "term.color" | "term.orientation" | "term.side" | "term.object_or_type"
        | "term.object_or_color" => strs(&["var", "const"]),
        "number.time" => strs(&["30", "60", "120", "180", "300", "600"]),
        "number.score" => strs(&["5", "10", "20", "30", "50", "100"]),
        "number.count" => strs(&["1", "2", "3", "4", "5", "10"]),
        "number.scoring" => strs(&["-1", "0.5", "1", "2", "3", "5", "10", "100"]),
        "number.comparison" => strs(&["0.5", "1", "2", "3", "5"]),
        _ => Vec::new(),
    }
}

/// Leaf rules used when a subtree has to stop growing.
fn leaf_options(s: &str) -> Option<&'static [&'static str]> {
    match s {
        site::SETUP => Some(&["game-conserved", "game-optional"]),
        site::PRED => Some(&["atom"]),
        site::TERMINAL => Some(&["compare"]),
        site::TERMINAL_COMP => Some(&["time", "score"]),
        site::SCORING => Some(&["eval", "number", "total-time", "total-score"]),
        site::FN_ARG => Some(&["number"]),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pcfg {
    /// Observed choice counts per site.
    pub counts: BTreeMap<String, BTreeMap<String, f64>>,
    pub smoothing: f64,
    pub max_depth: usize,
}

impl Pcfg {
    pub fn empty() -> Pcfg {
        Pcfg { counts: BTreeMap::new(), smoothing: 1.0, max_depth: DEFAULT_MAX_DEPTH }
    }

    pub fn fit(corpus: &[Game]) -> Result<Pcfg, PcfgError> {
        if corpus.is_empty() {
            return Err(PcfgError::EmptyCorpus);
        }
        let mut pcfg = Pcfg::empty();
        for g in corpus {
            Fitter { counts: &mut pcfg.counts }.game(g);
        }
        Ok(pcfg)
    }

    /// Candidate options at a site: grammar options followed by any extra
    /// observed values, in sorted order.
    pub fn options(&self, s: &str) -> Vec<String> {
        let mut opts = grammar_options(s);
        if let Some(seen) = self.counts.get(s) {
            for k in seen.keys() {
                if !opts.contains(k) {
                    opts.push(k.clone());
                }
            }
        }
        opts
    }

    pub fn count(&self, s: &str, option: &str) -> f64 {
        self.counts.get(s).and_then(|m| m.get(option)).copied().unwrap_or(0.0)
    }

    pub fn weight(&self, s: &str, option: &str) -> f64 {
        self.count(s, option) + self.smoothing
    }

    pub fn probability(&self, s: &str, option: &str) -> f64 {
        let opts = self.options(s);
        if !opts.iter().any(|o| o == option) {
            return 0.0;
        }
        let total: f64 = opts.iter().map(|o| self.weight(s, o)).sum();
        self.weight(s, option) / total
    }

    /// Draws an option at site `s` by weight, optionally from a subset.
    pub fn choose<R: Rng + ?Sized>(&self, rng: &mut R, s: &str, restrict: Option<&[&str]>) -> String {
        let mut opts = self.options(s);
        if let Some(allowed) = restrict {
            opts.retain(|o| allowed.contains(&o.as_str()));
        }
        debug_assert!(!opts.is_empty(), "no options at site {s}");
        let weights: Vec<f64> = opts.iter().map(|o| self.weight(s, o)).collect();
        let total: f64 = weights.iter().sum();
        let mut x = rng.gen::<f64>() * total;
        for (o, w) in opts.iter().zip(&weights) {
            if x < *w {
                return o.clone();
            }
            x -= w;
        }
        opts.last().unwrap().clone()
    }
}

struct Fitter<'a> {
    counts: &'a mut BTreeMap<String, BTreeMap<String, f64>>,
}

impl Fitter<'_> {
    fn rec(&mut self, s: &str, option: impl Into<String>) {
        *self.counts.entry(s.to_string()).or_default().entry(option.into()).or_default() += 1.0;
    }

    fn game(&mut self, g: &Game) {
        self.rec(site::DOMAIN, g.domain.clone());
        self.rec(site::HAS_SETUP, if g.setup.is_some() { "yes" } else { "no" });
        self.rec(site::HAS_TERMINAL, if g.terminal.is_some() { "yes" } else { "no" });
        self.rec(site::PREF_COUNT, g.preferences.len().to_string());
        if let Some(s) = &g.setup {
            self.setup(s);
        }
        for p in &g.preferences {
            self.pref_def(p);
        }
        if let Some(t) = &g.terminal {
            self.terminal(t);
        }
        self.scoring(&g.scoring);
    }

    fn setup(&mut self, s: &Setup) {
        match s {
            Setup::And(cs) | Setup::Or(cs) => {
                let and = matches!(s, Setup::And(_));
                self.rec(site::SETUP, if and { "and" } else { "or" });
                self.rec(if and { site::SETUP_AND_LEN } else { site::SETUP_OR_LEN }, cs.len().to_string());
                cs.iter().for_each(|c| self.setup(c));
            }
            Setup::Not(c) => {
                self.rec(site::SETUP, "not");
                self.setup(c);
            }
            Setup::Exists(v, c) | Setup::Forall(v, c) => {
                self.rec(site::SETUP, if matches!(s, Setup::Exists(..)) { "exists" } else { "forall" });
                self.var_list(v);
                self.setup(c);
            }
            Setup::Conserved(p) => {
                self.rec(site::SETUP, "game-conserved");
                self.pred(p);
            }
            Setup::Optional(p) => {
                self.rec(site::SETUP, "game-optional");
                self.pred(p);
            }
        }
    }

    fn var_list(&mut self, v: &VariableList) {
        self.rec(site::VAR_LIST_LEN, v.len().to_string());
        for d in v {
            let class = d.class();
            self.rec(site::VAR_CLASS, class.label());
            self.rec(site::VAR_DEF_LEN, d.vars.len().to_string());
            match &d.types {
                TypeSpec::Single(t) => {
                    self.rec(site::TYPE_SPEC, "single");
                    if class == VarClass::Object {
                        self.rec(site::OBJECT_TYPE, t.clone());
                    }
                }
                TypeSpec::Either(ts) => {
                    self.rec(site::TYPE_SPEC, "either");
                    self.rec(site::EITHER_LEN, ts.len().to_string());
                    let s = match class {
                        VarClass::Object => site::OBJECT_TYPE,
                        VarClass::Color => site::COLOR,
                        VarClass::Orientation => site::ORIENTATION,
                        VarClass::Side => site::SIDE,
                    };
                    for t in ts {
                        self.rec(s, t.clone());
                    }
                }
            }
        }
    }

    fn pref_def(&mut self, p: &PrefDef) {
        match p {
            PrefDef::Single(pref) => {
                self.rec(site::PREF_DEF, "single");
                self.preference(pref);
            }
            PrefDef::Forall(v, pref) => {
                self.rec(site::PREF_DEF, "forall");
                self.var_list(v);
                self.preference(pref);
            }
        }
    }

    fn preference(&mut self, p: &Preference) {
        match p.quantifier {
            Quantifier::Exists => self.rec(site::QUANTIFIER, "exists"),
            Quantifier::Forall => self.rec(site::QUANTIFIER, "forall"),
            Quantifier::None => self.rec(site::QUANTIFIER, "none"),
        }
        if p.quantifier != Quantifier::None {
            self.var_list(&p.vars);
        }
        self.pref_body(&p.body);
    }

    fn pref_body(&mut self, b: &PrefBody) {
        match b {
            PrefBody::Then(sfs) => {
                self.rec(site::PREF_BODY, "then");
                self.rec(site::THEN_LEN, sfs.len().to_string());
                sfs.iter().for_each(|sf| self.seq_func(sf));
            }
            PrefBody::AtEnd(p) => {
                self.rec(site::PREF_BODY, "at-end");
                self.pred(p);
            }
        }
    }

    fn seq_func(&mut self, sf: &SeqFunc) {
        self.rec(site::SEQ_FUNC, sf.keyword());
        match sf {
            SeqFunc::Once(p) | SeqFunc::Hold(p) => self.pred(p),
            SeqFunc::OnceMeasure(p, f) => {
                self.pred(p);
                self.function(f);
            }
            SeqFunc::HoldWhile(p, rest) => {
                self.pred(p);
                self.rec(site::HOLD_WHILE_LEN, rest.len().to_string());
                rest.iter().for_each(|r| self.pred(r));
            }
        }
    }

    fn pred(&mut self, p: &Pred) {
        match p {
            Pred::And(cs) | Pred::Or(cs) => {
                let and = matches!(p, Pred::And(_));
                self.rec(site::PRED, if and { "and" } else { "or" });
                self.rec(if and { site::PRED_AND_LEN } else { site::PRED_OR_LEN }, cs.len().to_string());
                cs.iter().for_each(|c| self.pred(c));
            }
            Pred::Not(c) => {
                self.rec(site::PRED, "not");
                self.pred(c);
            }
            Pred::Exists(v, c) | Pred::Forall(v, c) => {
                self.rec(site::PRED, if matches!(p, Pred::Exists(..)) { "exists" } else { "forall" });
                self.var_list(v);
                self.pred(c);
            }
            Pred::Compare { op, args } => {
                self.rec(site::PRED, "compare");
                self.rec(site::COMP_OP, op.symbol());
                if *op == CompOp::Eq {
                    self.rec(site::COMPARE_EQ_LEN, args.len().to_string());
                }
                for a in args {
                    match a {
                        FnArg::Function(f) => {
                            self.rec(site::FN_ARG, "function");
                            self.function(f);
                        }
                        FnArg::Number(n) => {
                            self.rec(site::FN_ARG, "number");
                            self.rec(&number_site(NumberKind::Comparison), n.0.clone());
                        }
                    }
                }
            }
            Pred::Atom { name, args } => {
                self.rec(site::PREDICATE, name.clone());
                let sig = vocab::predicate(name);
                for (i, t) in args.iter().enumerate() {
                    self.term(t, sig.and_then(|s| s.kind_at(i)).unwrap_or(ArgKind::Object));
                }
            }
        }
    }

    fn function(&mut self, f: &FunctionEval) {
        self.rec(site::FUNCTION, f.name.clone());
        let sig = vocab::function(&f.name);
        for (i, t) in f.args.iter().enumerate() {
            self.term(t, sig.and_then(|s| s.kind_at(i)).unwrap_or(ArgKind::Object));
        }
    }

    fn term(&mut self, t: &Term, kind: ArgKind) {
        match t {
            Term::Var(_) => self.rec(term_site(kind), "var"),
            Term::Const(c) => {
                self.rec(term_site(kind), "const");
                let s = if vocab::is_color(c) {
                    site::COLOR
                } else if vocab::is_orientation(c) {
                    site::ORIENTATION
                } else if vocab::is_side(c) {
                    site::SIDE
                } else if kind == ArgKind::ObjectOrType {
                    site::TYPE_TERM
                } else {
                    site::OBJECT_NAME
                };
                self.rec(s, c.clone());
            }
        }
    }

    fn terminal(&mut self, t: &Terminal) {
        match t {
            Terminal::And(cs) | Terminal::Or(cs) => {
                let and = matches!(t, Terminal::And(_));
                self.rec(site::TERMINAL, if and { "and" } else { "or" });
                self.rec(if and { site::TERMINAL_AND_LEN } else { site::TERMINAL_OR_LEN }, cs.len().to_string());
                cs.iter().for_each(|c| self.terminal(c));
            }
            Terminal::Not(c) => {
                self.rec(site::TERMINAL, "not");
                self.terminal(c);
            }
            Terminal::Compare { op, lhs, rhs } => {
                self.rec(site::TERMINAL, "compare");
                self.rec(site::TERMINAL_COMP_OP, op.symbol());
                let kind = match TerminalKind::of(lhs) {
                    TerminalKind::Time => {
                        self.rec(site::TERMINAL_COMP, "time");
                        NumberKind::Time
                    }
                    TerminalKind::Score => {
                        self.rec(site::TERMINAL_COMP, "score");
                        NumberKind::Score
                    }
                    TerminalKind::Count => {
                        self.rec(site::TERMINAL_COMP, "count");
                        self.scoring(lhs);
                        NumberKind::Count
                    }
                };
                self.rec(&number_site(kind), rhs.0.clone());
            }
        }
    }

    fn scoring(&mut self, s: &Scoring) {
        let head = match s {
            Scoring::ExternalMax(_) => "external-forall-maximize",
            Scoring::ExternalMin(_) => "external-forall-minimize",
            Scoring::Add(_) => "+",
            Scoring::Mul(_) => "*",
            Scoring::Sub(..) => "-",
            Scoring::Div(..) => "/",
            Scoring::Neg(_) => "neg",
            Scoring::TotalTime => "total-time",
            Scoring::TotalScore => "total-score",
            Scoring::Compare { .. } => "compare",
            Scoring::Eval(_) => "eval",
            Scoring::Number(_) => "number",
        };
        self.rec(site::SCORING, head);
        match s {
            Scoring::Add(cs) => self.rec(site::SCORING_ADD_LEN, cs.len().to_string()),
            Scoring::Mul(cs) => self.rec(site::SCORING_MUL_LEN, cs.len().to_string()),
            Scoring::Compare { op, args } => {
                self.rec(site::SCORING_COMP_OP, op.symbol());
                if *op == CompOp::Eq {
                    self.rec(site::SCORING_EQ_LEN, args.len().to_string());
                }
            }
            Scoring::Eval(e) => {
                self.rec(site::COUNT_MODE, e.mode.keyword());
                self.rec(site::PREF_TYPES_LEN, e.types.len().to_string());
                for t in &e.types {
                    self.rec(site::PREF_TYPE, t.clone());
                }
            }
            Scoring::Number(n) => self.rec(&number_site(NumberKind::Scoring), n.0.clone()),
            _ => {}
        }
        for c in s.children() {
            self.scoring(c);
        }
    }
}

#[derive(Debug)]
struct Breach;

type Gen<T> = Result<T, Breach>;

/// Names already used in a game, so fresh names never collide.
fn used_names(g: &Game) -> (HashSet<String>, HashSet<String>) {
    let mut vars = HashSet::new();
    let mut copy = g.clone();
    nodes::walk_mut(&mut copy, &mut |n, _| {
        match n {
            nodes::NodeMut::VariableList(v) => {
                for (name, _) in flatten_vars(v) {
                    vars.insert(name.to_string());
                }
            }
            nodes::NodeMut::Term(Term::Var(v)) => {
                vars.insert(v.clone());
            }
            _ => {}
        }
        nodes::Flow::Continue
    });
    let prefs = g.preference_names().into_iter().map(String::from).collect();
    (vars, prefs)
}

struct Sampler<'a, R: Rng + ?Sized> {
    pcfg: &'a Pcfg,
    rng: &'a mut R,
    used_vars: HashSet<String>,
    nodes: usize,
    /// Grow only leaves from every depth.
    force_leaf: bool,
}

impl<R: Rng + ?Sized> Sampler<'_, R> {
    fn node(&mut self, depth: usize) -> Gen<()> {
        self.nodes += 1;
        if self.nodes > NODE_BUDGET || depth > self.pcfg.max_depth {
            return Err(Breach);
        }
        Ok(())
    }

    /// Close to the depth cap only leaf rules are allowed, so the cap is
    /// never exceeded by recursion alone.
    fn pick(&mut self, s: &str, depth: usize) -> String {
        let restrict = if self.force_leaf || depth + 4 >= self.pcfg.max_depth { leaf_options(s) } else { None };
        self.pcfg.choose(self.rng, s, restrict)
    }

    fn pick_len(&mut self, s: &str) -> usize {
        self.pcfg.choose(self.rng, s, None).parse().unwrap_or(1)
    }

    fn fresh_var(&mut self, class: VarClass) -> String {
        let prefix = class.fresh_prefix();
        let mut i = 0;
        loop {
            let name = format!("{prefix}{i}");
            if self.used_vars.insert(name.clone()) {
                return name;
            }
            i += 1;
        }
    }

    fn game(&mut self, name: &str) -> Gen<Game> {
        self.node(0)?;
        let domain = self.pcfg.choose(self.rng, site::DOMAIN, None);
        let has_setup = self.pcfg.choose(self.rng, site::HAS_SETUP, None) == "yes";
        let has_terminal = self.pcfg.choose(self.rng, site::HAS_TERMINAL, None) == "yes";
        let setup = if has_setup { Some(self.setup(1, &mut Vec::new())?) } else { None };
        let n = self.pick_len(site::PREF_COUNT).max(1);
        let mut preferences = Vec::new();
        for i in 0..n {
            preferences.push(self.pref_def(1, &format!("preference{i}"))?);
        }
        let names: Vec<String> = preferences.iter().map(|p| p.name().to_string()).collect();
        let measured: Vec<String> =
            preferences.iter().filter(|p| super::validate::has_measure(p)).map(|p| p.name().to_string()).collect();
        let terminal = if has_terminal { Some(self.terminal(1, &names, &measured)?) } else { None };
        let scoring = self.scoring(1, &names, &measured)?;
        Ok(Game { name: name.to_string(), domain, setup, preferences, terminal, scoring })
    }

    fn setup(&mut self, depth: usize, scope: &mut Vec<ScopedVar>) -> Gen<Setup> {
        self.node(depth)?;
        let rule = self.pick(site::SETUP, depth);
        Ok(match rule.as_str() {
            "and" | "or" => {
                let n = self.pick_len(if rule == "and" { site::SETUP_AND_LEN } else { site::SETUP_OR_LEN }).max(2);
                let cs = (0..n).map(|_| self.setup(depth + 1, scope)).collect::<Gen<Vec<_>>>()?;
                if rule == "and" { Setup::And(cs) } else { Setup::Or(cs) }
            }
            "not" => Setup::Not(Box::new(self.setup(depth + 1, scope)?)),
            "exists" | "forall" => {
                let (v, pushed) = self.var_list(depth + 1, scope)?;
                let body = self.setup(depth + 1, scope);
                scope.truncate(scope.len() - pushed);
                let body = Box::new(body?);
                if rule == "exists" { Setup::Exists(v, body) } else { Setup::Forall(v, body) }
            }
            "game-conserved" => Setup::Conserved(self.pred(depth + 1, scope)?),
            _ => Setup::Optional(self.pred(depth + 1, scope)?),
        })
    }

    /// Samples a variable list and pushes its variables onto `scope`.
    fn var_list(&mut self, depth: usize, scope: &mut Vec<ScopedVar>) -> Gen<(VariableList, usize)> {
        self.node(depth)?;
        let n = self.pick_len(site::VAR_LIST_LEN).max(1);
        let mut defs = Vec::new();
        let mut pushed = 0;
        for _ in 0..n {
            let class = match self.pcfg.choose(self.rng, site::VAR_CLASS, None).as_str() {
                "color" => VarClass::Color,
                "orientation" => VarClass::Orientation,
                "side" => VarClass::Side,
                _ => VarClass::Object,
            };
            let k = self.pick_len(site::VAR_DEF_LEN).max(1);
            let vars: Vec<String> = (0..k).map(|_| self.fresh_var(class)).collect();
            let either = self.pcfg.choose(self.rng, site::TYPE_SPEC, None) == "either";
            let value_site = match class {
                VarClass::Object => site::OBJECT_TYPE,
                VarClass::Color => site::COLOR,
                VarClass::Orientation => site::ORIENTATION,
                VarClass::Side => site::SIDE,
            };
            let types = if either {
                let m = self.pick_len(site::EITHER_LEN).max(1);
                let mut ts: Vec<String> = Vec::new();
                for _ in 0..m * 4 {
                    if ts.len() == m {
                        break;
                    }
                    let t = self.pcfg.choose(self.rng, value_site, None);
                    if !ts.contains(&t) {
                        ts.push(t);
                    }
                }
                TypeSpec::Either(ts)
            } else if class == VarClass::Object {
                TypeSpec::Single(self.pcfg.choose(self.rng, site::OBJECT_TYPE, None))
            } else {
                TypeSpec::Single(class.label().to_string())
            };
            for v in &vars {
                scope.push(ScopedVar { name: v.clone(), class, types: types.clone() });
                pushed += 1;
            }
            defs.push(VarDef { vars, types });
        }
        Ok((defs, pushed))
    }

    fn pref_def(&mut self, depth: usize, name: &str) -> Gen<PrefDef> {
        self.node(depth)?;
        let mut scope = Vec::new();
        if self.pcfg.choose(self.rng, site::PREF_DEF, None) == "forall" {
            let (v, _) = self.var_list(depth + 1, &mut scope)?;
            Ok(PrefDef::Forall(v, self.preference(depth, name, &mut scope)?))
        } else {
            Ok(PrefDef::Single(self.preference(depth, name, &mut scope)?))
        }
    }

    fn preference(&mut self, depth: usize, name: &str, scope: &mut Vec<ScopedVar>) -> Gen<Preference> {
        let quantifier = match self.pcfg.choose(self.rng, site::QUANTIFIER, None).as_str() {
            "exists" => Quantifier::Exists,
            "forall" => Quantifier::Forall,
            _ => Quantifier::None,
        };
        let vars = if quantifier != Quantifier::None { self.var_list(depth + 1, scope)?.0 } else { Vec::new() };
        let body = self.pref_body(depth + 1, scope)?;
        Ok(Preference { name: name.to_string(), quantifier, vars, body })
    }

    fn pref_body(&mut self, depth: usize, scope: &mut Vec<ScopedVar>) -> Gen<PrefBody> {
        self.node(depth)?;
        if self.pcfg.choose(self.rng, site::PREF_BODY, None) == "then" {
            let n = self.pick_len(site::THEN_LEN).max(2);
            let sfs = (0..n).map(|_| self.seq_func(depth + 1, scope)).collect::<Gen<Vec<_>>>()?;
            Ok(PrefBody::Then(sfs))
        } else {
            Ok(PrefBody::AtEnd(self.pred(depth + 1, scope)?))
        }
    }

    fn seq_func(&mut self, depth: usize, scope: &mut Vec<ScopedVar>) -> Gen<SeqFunc> {
        self.node(depth)?;
        let kind = self.pcfg.choose(self.rng, site::SEQ_FUNC, None);
        Ok(match kind.as_str() {
            "once" => SeqFunc::Once(self.pred(depth + 1, scope)?),
            "once-measure" => SeqFunc::OnceMeasure(self.pred(depth + 1, scope)?, self.function(depth + 1, scope)?),
            "hold" => SeqFunc::Hold(self.pred(depth + 1, scope)?),
            _ => {
                let main = self.pred(depth + 1, scope)?;
                let n = self.pick_len(site::HOLD_WHILE_LEN).max(1);
                let rest = (0..n).map(|_| self.pred(depth + 1, scope)).collect::<Gen<Vec<_>>>()?;
                SeqFunc::HoldWhile(main, rest)
            }
        })
    }

    fn pred(&mut self, depth: usize, scope: &mut Vec<ScopedVar>) -> Gen<Pred> {
        self.node(depth)?;
        let rule = self.pick(site::PRED, depth);
        Ok(match rule.as_str() {
            "and" | "or" => {
                let n = self.pick_len(if rule == "and" { site::PRED_AND_LEN } else { site::PRED_OR_LEN }).max(1);
                let cs = (0..n).map(|_| self.pred(depth + 1, scope)).collect::<Gen<Vec<_>>>()?;
                if rule == "and" { Pred::And(cs) } else { Pred::Or(cs) }
            }
            "not" => Pred::Not(Box::new(self.pred(depth + 1, scope)?)),
            "exists" | "forall" => {
                let (v, pushed) = self.var_list(depth + 1, scope)?;
                let body = self.pred(depth + 1, scope);
                scope.truncate(scope.len() - pushed);
                let body = Box::new(body?);
                if rule == "exists" { Pred::Exists(v, body) } else { Pred::Forall(v, body) }
            }
            "compare" => {
                let op = CompOp::from_symbol(&self.pcfg.choose(self.rng, site::COMP_OP, None)).unwrap_or(CompOp::Eq);
                let n = if op == CompOp::Eq { self.pick_len(site::COMPARE_EQ_LEN).max(1) } else { 2 };
                let mut args = Vec::new();
                for _ in 0..n {
                    if self.pick(site::FN_ARG, depth) == "function" {
                        args.push(FnArg::Function(self.function(depth + 1, scope)?));
                    } else {
                        self.node(depth + 1)?;
                        args.push(FnArg::Number(self.number(NumberKind::Comparison)));
                    }
                }
                Pred::Compare { op, args }
            }
            _ => {
                let name = self.pcfg.choose(self.rng, site::PREDICATE, None);
                let sig = vocab::predicate(&name).expect("predicate options come from the signature table");
                let mut args = Vec::new();
                for &kind in sig.args {
                    self.node(depth + 1)?;
                    args.push(self.term(kind, scope));
                }
                Pred::Atom { name, args }
            }
        })
    }

    fn function(&mut self, depth: usize, scope: &[ScopedVar]) -> Gen<FunctionEval> {
        self.node(depth)?;
        let name = self.pcfg.choose(self.rng, site::FUNCTION, None);
        let sig = vocab::function(&name).expect("function options come from the signature table");
        let mut args = Vec::new();
        for &kind in sig.args {
            self.node(depth + 1)?;
            args.push(self.term(kind, scope));
        }
        Ok(FunctionEval { name, args })
    }

    fn term(&mut self, kind: ArgKind, scope: &[ScopedVar]) -> Term {
        if self.pcfg.choose(self.rng, term_site(kind), None) == "var" {
            let candidates: Vec<&ScopedVar> = scope.iter().filter(|v| kind.accepts_class(v.class)).collect();
            if !candidates.is_empty() {
                let i = self.rng.gen_range(0..candidates.len());
                return Term::Var(candidates[i].name.clone());
            }
        }
        let s = match kind {
            ArgKind::Object => site::OBJECT_NAME,
            ArgKind::ObjectOrType => site::TYPE_TERM,
            ArgKind::Color | ArgKind::ObjectOrColor => site::COLOR,
            ArgKind::Orientation => site::ORIENTATION,
            ArgKind::Side => site::SIDE,
        };
        Term::Const(self.pcfg.choose(self.rng, s, None))
    }

    fn number(&mut self, kind: NumberKind) -> Number {
        Number(self.pcfg.choose(self.rng, &number_site(kind), None))
    }

    fn terminal(&mut self, depth: usize, prefs: &[String], measured: &[String]) -> Gen<Terminal> {
        self.node(depth)?;
        let rule = self.pick(site::TERMINAL, depth);
        Ok(match rule.as_str() {
            "and" | "or" => {
                let n = self.pick_len(if rule == "and" { site::TERMINAL_AND_LEN } else { site::TERMINAL_OR_LEN }).max(1);
                let cs = (0..n).map(|_| self.terminal(depth + 1, prefs, measured)).collect::<Gen<Vec<_>>>()?;
                if rule == "and" { Terminal::And(cs) } else { Terminal::Or(cs) }
            }
            "not" => Terminal::Not(Box::new(self.terminal(depth + 1, prefs, measured)?)),
            _ => {
                let op = CompOp::from_symbol(&self.pcfg.choose(self.rng, site::TERMINAL_COMP_OP, None)).unwrap_or(CompOp::Ge);
                let form = self.pick(site::TERMINAL_COMP, depth);
                self.node(depth + 1)?;
                let (lhs, kind) = match form.as_str() {
                    "time" => (Scoring::TotalTime, NumberKind::Time),
                    "score" => (Scoring::TotalScore, NumberKind::Score),
                    _ => {
                        self.nodes -= 1;
                        let lhs = self.count_lhs(depth + 1, prefs, measured)?;
                        (lhs, NumberKind::Count)
                    }
                };
                self.node(depth + 1)?;
                Terminal::Compare { op, lhs, rhs: self.number(kind) }
            }
        })
    }

    /// Left side of a count comparison; must not read as a time or score
    /// comparison.
    fn count_lhs(&mut self, depth: usize, prefs: &[String], measured: &[String]) -> Gen<Scoring> {
        for _ in 0..8 {
            let s = self.scoring(depth, prefs, measured)?;
            if TerminalKind::of(&s) == TerminalKind::Count {
                return Ok(s);
            }
        }
        Ok(Scoring::Eval(self.pref_eval(prefs, measured)))
    }

    fn scoring(&mut self, depth: usize, prefs: &[String], measured: &[String]) -> Gen<Scoring> {
        self.node(depth)?;
        let rule = self.pick(site::SCORING, depth);
        let sub = |me: &mut Self| me.scoring(depth + 1, prefs, measured);
        Ok(match rule.as_str() {
            "external-forall-maximize" => Scoring::ExternalMax(Box::new(sub(self)?)),
            "external-forall-minimize" => Scoring::ExternalMin(Box::new(sub(self)?)),
            "+" | "*" => {
                let n = self.pick_len(if rule == "+" { site::SCORING_ADD_LEN } else { site::SCORING_MUL_LEN }).max(1);
                let cs = (0..n).map(|_| sub(self)).collect::<Gen<Vec<_>>>()?;
                if rule == "+" { Scoring::Add(cs) } else { Scoring::Mul(cs) }
            }
            "-" => Scoring::Sub(Box::new(sub(self)?), Box::new(sub(self)?)),
            "/" => Scoring::Div(Box::new(sub(self)?), Box::new(sub(self)?)),
            "neg" => Scoring::Neg(Box::new(sub(self)?)),
            "total-time" => Scoring::TotalTime,
            "total-score" => Scoring::TotalScore,
            "compare" => {
                let op = CompOp::from_symbol(&self.pcfg.choose(self.rng, site::SCORING_COMP_OP, None)).unwrap_or(CompOp::Eq);
                let n = if op == CompOp::Eq { self.pick_len(site::SCORING_EQ_LEN).max(1) } else { 2 };
                let args = (0..n).map(|_| sub(self)).collect::<Gen<Vec<_>>>()?;
                Scoring::Compare { op, args }
            }
            "number" => {
                self.node(depth + 1)?;
                Scoring::Number(self.number(NumberKind::Scoring))
            }
            _ => Scoring::Eval(self.pref_eval(prefs, measured)),
        })
    }

    fn pref_eval(&mut self, prefs: &[String], measured: &[String]) -> PrefEval {
        let mut mode = CountMode::from_keyword(&self.pcfg.choose(self.rng, site::COUNT_MODE, None)).unwrap_or(CountMode::Count);
        let pref = if mode == CountMode::Measure {
            if measured.is_empty() {
                mode = CountMode::Count;
                prefs[self.rng.gen_range(0..prefs.len())].clone()
            } else {
                measured[self.rng.gen_range(0..measured.len())].clone()
            }
        } else if prefs.is_empty() {
            "preference0".to_string()
        } else {
            prefs[self.rng.gen_range(0..prefs.len())].clone()
        };
        let n = self.pick_len(site::PREF_TYPES_LEN);
        let types = (0..n).map(|_| self.pcfg.choose(self.rng, site::PREF_TYPE, None)).collect();
        PrefEval { mode, pref, types }
    }

    fn fragment(&mut self, category: Category, ctx: &Ctx, original: &Fragment) -> Gen<Fragment> {
        let mut scope = ctx.scope.clone();
        let d = ctx.depth;
        Ok(match category {
            Category::Game => {
                let (name, domain) = match original {
                    Fragment::Game(g) => (g.name.clone(), g.domain.clone()),
                    _ => ("sample".to_string(), String::new()),
                };
                let mut g = self.game(&name)?;
                if !domain.is_empty() {
                    g.domain = domain;
                }
                Fragment::Game(g)
            }
            Category::Setup => Fragment::Setup(self.setup(d, &mut scope)?),
            Category::Pred => Fragment::Pred(self.pred(d, &mut scope)?),
            Category::FunctionEval => Fragment::FunctionEval(self.function(d, &scope)?),
            Category::Term => {
                self.node(d)?;
                Fragment::Term(self.term(ctx.arg_kind.unwrap_or(ArgKind::Object), &scope))
            }
            Category::VariableList => Fragment::VariableList(self.var_list(d, &mut scope)?.0),
            Category::PrefDef => {
                let name = ctx.pref_name.clone().unwrap_or_else(|| "preference0".to_string());
                Fragment::PrefDef(self.pref_def(d, &name)?)
            }
            Category::PrefBody => Fragment::PrefBody(self.pref_body(d, &mut scope)?),
            Category::SeqFunc => Fragment::SeqFunc(self.seq_func(d, &mut scope)?),
            Category::Terminal => Fragment::Terminal(self.terminal(d, &ctx.pref_names, &ctx.measured_prefs)?),
            Category::Scoring => Fragment::Scoring(self.scoring(d, &ctx.pref_names, &ctx.measured_prefs)?),
            Category::Number => {
                self.node(d)?;
                Fragment::Number(self.number(ctx.number_kind.unwrap_or(NumberKind::Scoring)))
            }
        })
    }
}

/// Runs `f` with fresh sampler state until it stays inside the node budget,
/// falling back to leaf-only growth.
fn attempt<R: Rng + ?Sized, T>(
    pcfg: &Pcfg,
    rng: &mut R,
    used_vars: &HashSet<String>,
    mut f: impl FnMut(&mut Sampler<'_, R>) -> Gen<T>,
) -> T {
    for i in 0..=SAMPLE_ATTEMPTS {
        let mut s = Sampler { pcfg, rng, used_vars: used_vars.clone(), nodes: 0, force_leaf: i == SAMPLE_ATTEMPTS };
        if let Ok(v) = f(&mut s) {
            return v;
        }
    }
    // Leaf-only growth from a shallow start cannot breach; reaching here
    // means the caller asked for a subtree below the depth cap.
    let mut s = Sampler { pcfg, rng, used_vars: used_vars.clone(), nodes: 0, force_leaf: true };
    let pcfg_relaxed = Pcfg { max_depth: usize::MAX, ..pcfg.clone() };
    s.pcfg = &pcfg_relaxed;
    f(&mut s).expect("leaf-only sampling without a depth cap always succeeds")
}

/// Draws a complete game from the grammar.
pub fn sample_game<R: Rng + ?Sized>(pcfg: &Pcfg, rng: &mut R) -> Game {
    let name = format!("sample-{:08x}", rng.gen::<u32>());
    attempt(pcfg, rng, &HashSet::new(), |s| s.game(&name))
}

/// Draws a fresh subtree for the node described by `ctx` in game `g`.
pub fn sample_fragment<R: Rng + ?Sized>(pcfg: &Pcfg, g: &Game, category: Category, ctx: &Ctx, rng: &mut R) -> Fragment {
    let (used_vars, _) = used_names(g);
    let placeholder = match category {
        Category::Game => Fragment::Game(g.clone()),
        _ => Fragment::Number(Number::new("0")),
    };
    attempt(pcfg, rng, &used_vars, |s| s.fragment(category, ctx, &placeholder))
}

/// Replaces the subtree at `node_id` with a freshly sampled one of the same
/// category. Retries a few times to avoid reproducing the original subtree.
pub fn regrow<R: Rng + ?Sized>(g: &Game, node_id: usize, pcfg: &Pcfg, rng: &mut R) -> Result<Game, PcfgError> {
    let (original, ctx) = nodes::get_fragment(g, node_id)?;
    let category = original.category();
    let (used_vars, _) = used_names(g);
    let mut frag = None;
    for _ in 0..REGROW_ATTEMPTS {
        let f = attempt(pcfg, rng, &used_vars, |s| s.fragment(category, &ctx, &original));
        let same = f == original;
        frag = Some(f);
        if !same {
            break;
        }
    }
    let mut out = g.clone();
    nodes::replace_fragment(&mut out, node_id, frag.expect("at least one attempt"))?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::super::parse::parse_game;
    use super::super::print::print_game;
    use super::super::validate::validate;
    use super::*;

    const G1: &str = "(define (game a-1) (:domain few-objects-room-v1) (:constraints (and (preference p1 (exists (?b - dodgeball) (then (once (agent_holds ?b)) (hold (and (not (agent_holds ?b)) (in_motion ?b))) (once (not (in_motion ?b)))))))) (:scoring (count p1)))";

    #[test]
    fn fit_counts_choices() {
        let g = parse_game(G1).unwrap();
        let p = Pcfg::fit(&[g]).unwrap();
        assert_eq!(p.count(site::SEQ_FUNC, "once"), 2.0);
        assert_eq!(p.count(site::SEQ_FUNC, "hold"), 1.0);
        assert_eq!(p.count(site::PREDICATE, "agent_holds"), 2.0);
        assert_eq!(p.count(site::PREDICATE, "in_motion"), 2.0);
        assert_eq!(p.count(site::PRED, "not"), 2.0);
        assert_eq!(p.count(site::OBJECT_TYPE, "dodgeball"), 1.0);
        assert_eq!(p.weight(site::SEQ_FUNC, "hold-while"), 1.0);
        assert!(matches!(Pcfg::fit(&[]), Err(PcfgError::EmptyCorpus)));
    }

    #[test]
    fn samples_are_grammatical_and_seeded() {
        let p = Pcfg::fit(&[parse_game(G1).unwrap()]).unwrap();
        let mut a = ChaCha8Rng::seed_from_u64(3);
        let mut b = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let ga = sample_game(&p, &mut a);
            let gb = sample_game(&p, &mut b);
            assert_eq!(ga, gb);
            let text = print_game(&ga);
            let back = parse_game(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
            assert_eq!(back, ga);
            assert!(validate(&ga).is_empty(), "{:?}\n{text}", validate(&ga));
            assert!(nodes::max_depth(&ga) <= DEFAULT_MAX_DEPTH);
        }
    }

    #[test]
    fn regrow_number_changes_only_literal() {
        let g = parse_game(&G1.replace("(count p1)", "(* 2 (count p1))")).unwrap();
        let p = Pcfg::fit(&[g.clone()]).unwrap();
        let id = nodes::nodes(&g).iter().find(|n| n.category == Category::Number).unwrap().id;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = regrow(&g, id, &p, &mut rng).unwrap();
        assert_eq!(h.preferences, g.preferences);
        match &h.scoring {
            Scoring::Mul(cs) => assert!(matches!(cs[0], Scoring::Number(_)) && cs[1] == Scoring::Eval(PrefEval { mode: CountMode::Count, pref: "p1".into(), types: vec![] })),
            other => panic!("{other:?}"),
        }
        assert_ne!(h, g);
    }
}
