//! Node addressing. Nodes are numbered in pre-order; the number is implied by
//! position and recomputed on every walk, so it is never stored in the tree.

use serde::{Deserialize, Serialize};

use super::ast::*;
use super::validate::has_measure;
use super::vocab::{self, ArgKind, VarClass};

/// Grammar nonterminal a node belongs to. Subtrees may only be exchanged or
/// resampled within the same category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    Game,
    Setup,
    Pred,
    FunctionEval,
    Term,
    VariableList,
    PrefDef,
    PrefBody,
    SeqFunc,
    Terminal,
    Scoring,
    Number,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Section {
    Header,
    Setup,
    Constraints,
    Terminal,
    Scoring,
}

impl Section {
    pub const BODY: [Section; 4] = [Section::Setup, Section::Constraints, Section::Terminal, Section::Scoring];

    pub fn label(self) -> &'static str {
        match self {
            Section::Header => "header",
            Section::Setup => "setup",
            Section::Constraints => "constraints",
            Section::Terminal => "terminal",
            Section::Scoring => "scoring",
        }
    }
}

/// Which distribution a numeric literal is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NumberKind {
    Time,
    Score,
    Count,
    Scoring,
    Comparison,
}

impl NumberKind {
    pub fn label(self) -> &'static str {
        match self {
            NumberKind::Time => "time",
            NumberKind::Score => "score",
            NumberKind::Count => "count",
            NumberKind::Scoring => "scoring",
            NumberKind::Comparison => "comparison",
        }
    }
}

/// A variable visible at some node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScopedVar {
    pub name: String,
    pub class: VarClass,
    pub types: TypeSpec,
}

/// Everything a sampler needs to know to regenerate a node in place.
#[derive(Debug, Clone)]
pub struct Ctx {
    pub id: usize,
    pub depth: usize,
    pub section: Section,
    pub scope: Vec<ScopedVar>,
    pub arg_kind: Option<ArgKind>,
    pub number_kind: Option<NumberKind>,
    /// Name of the preference slot being visited, if any.
    pub pref_name: Option<String>,
    pub pref_names: Vec<String>,
    pub measured_prefs: Vec<String>,
    /// Position of a modal within its `then`, and the `then` length.
    pub seq_pos: Option<(usize, usize)>,
}

impl Ctx {
    pub fn new(g: &Game) -> Ctx {
        Ctx {
            id: 0,
            depth: 0,
            section: Section::Header,
            scope: Vec::new(),
            arg_kind: None,
            number_kind: None,
            pref_name: None,
            pref_names: g.preference_names().into_iter().map(String::from).collect(),
            measured_prefs: g.preferences.iter().filter(|p| has_measure(p)).map(|p| p.name().to_string()).collect(),
            seq_pos: None,
        }
    }

    pub fn vars_of_class(&self, class: VarClass) -> Vec<&ScopedVar> {
        self.scope.iter().filter(|v| v.class == class).collect()
    }
}

pub enum NodeMut<'a> {
    Game(&'a mut Game),
    Setup(&'a mut Setup),
    Pred(&'a mut Pred),
    FunctionEval(&'a mut FunctionEval),
    Term(&'a mut Term),
    VariableList(&'a mut VariableList),
    PrefDef(&'a mut PrefDef),
    PrefBody(&'a mut PrefBody),
    SeqFunc(&'a mut SeqFunc),
    Terminal(&'a mut Terminal),
    Scoring(&'a mut Scoring),
    Number(&'a mut Number),
}

impl NodeMut<'_> {
    pub fn category(&self) -> Category {
        match self {
            NodeMut::Game(_) => Category::Game,
            NodeMut::Setup(_) => Category::Setup,
            NodeMut::Pred(_) => Category::Pred,
            NodeMut::FunctionEval(_) => Category::FunctionEval,
            NodeMut::Term(_) => Category::Term,
            NodeMut::VariableList(_) => Category::VariableList,
            NodeMut::PrefDef(_) => Category::PrefDef,
            NodeMut::PrefBody(_) => Category::PrefBody,
            NodeMut::SeqFunc(_) => Category::SeqFunc,
            NodeMut::Terminal(_) => Category::Terminal,
            NodeMut::Scoring(_) => Category::Scoring,
            NodeMut::Number(_) => Category::Number,
        }
    }

    pub fn to_fragment(&self) -> Fragment {
        match self {
            NodeMut::Game(x) => Fragment::Game((**x).clone()),
            NodeMut::Setup(x) => Fragment::Setup((**x).clone()),
            NodeMut::Pred(x) => Fragment::Pred((**x).clone()),
            NodeMut::FunctionEval(x) => Fragment::FunctionEval((**x).clone()),
            NodeMut::Term(x) => Fragment::Term((**x).clone()),
            NodeMut::VariableList(x) => Fragment::VariableList((**x).clone()),
            NodeMut::PrefDef(x) => Fragment::PrefDef((**x).clone()),
            NodeMut::PrefBody(x) => Fragment::PrefBody((**x).clone()),
            NodeMut::SeqFunc(x) => Fragment::SeqFunc((**x).clone()),
            NodeMut::Terminal(x) => Fragment::Terminal((**x).clone()),
            NodeMut::Scoring(x) => Fragment::Scoring((**x).clone()),
            NodeMut::Number(x) => Fragment::Number((**x).clone()),
        }
    }

    /// Overwrites the node with a fragment of the same category.
    pub fn set(self, frag: Fragment) -> Result<(), NodeError> {
        let want = self.category();
        match (self, frag) {
            (NodeMut::Game(x), Fragment::Game(v)) => *x = v,
            (NodeMut::Setup(x), Fragment::Setup(v)) => *x = v,
            (NodeMut::Pred(x), Fragment::Pred(v)) => *x = v,
            (NodeMut::FunctionEval(x), Fragment::FunctionEval(v)) => *x = v,
            (NodeMut::Term(x), Fragment::Term(v)) => *x = v,
            (NodeMut::VariableList(x), Fragment::VariableList(v)) => *x = v,
            (NodeMut::PrefDef(x), Fragment::PrefDef(v)) => *x = v,
            (NodeMut::PrefBody(x), Fragment::PrefBody(v)) => *x = v,
            (NodeMut::SeqFunc(x), Fragment::SeqFunc(v)) => *x = v,
            (NodeMut::Terminal(x), Fragment::Terminal(v)) => *x = v,
            (NodeMut::Scoring(x), Fragment::Scoring(v)) => *x = v,
            (NodeMut::Number(x), Fragment::Number(v)) => *x = v,
            (_, other) => return Err(NodeError::CategoryMismatch { expected: want, found: other.category() }),
        }
        Ok(())
    }
}

/// An owned subtree of any category.
#[derive(Debug, Clone, PartialEq)]
pub enum Fragment {
    Game(Game),
    Setup(Setup),
    Pred(Pred),
    FunctionEval(FunctionEval),
    Term(Term),
    VariableList(VariableList),
    PrefDef(PrefDef),
    PrefBody(PrefBody),
    SeqFunc(SeqFunc),
    Terminal(Terminal),
    Scoring(Scoring),
    Number(Number),
}

impl Fragment {
    pub fn category(&self) -> Category {
        match self {
            Fragment::Game(_) => Category::Game,
            Fragment::Setup(_) => Category::Setup,
            Fragment::Pred(_) => Category::Pred,
            Fragment::FunctionEval(_) => Category::FunctionEval,
            Fragment::Term(_) => Category::Term,
            Fragment::VariableList(_) => Category::VariableList,
            Fragment::PrefDef(_) => Category::PrefDef,
            Fragment::PrefBody(_) => Category::PrefBody,
            Fragment::SeqFunc(_) => Category::SeqFunc,
            Fragment::Terminal(_) => Category::Terminal,
            Fragment::Scoring(_) => Category::Scoring,
            Fragment::Number(_) => Category::Number,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NodeError {
    #[error("node {0} does not exist")]
    NotFound(usize),
    #[error("expected a {expected:?} fragment, found {found:?}")]
    CategoryMismatch { expected: Category, found: Category },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    /// Do not descend into this node's children.
    Skip,
    Stop,
}

/// Visits every node in pre-order with its context. The callback may
/// rewrite the node; traversal then continues into the new children.
pub fn walk_mut(g: &mut Game, f: &mut dyn FnMut(NodeMut, &Ctx) -> Flow) {
    let ctx = Ctx::new(g);
    let mut w = Walker { f, next: 0, stopped: false, ctx };
    w.game(g);
}

/// Summary of one node, as seen from the whole tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeInfo {
    pub id: usize,
    pub category: Category,
    pub depth: usize,
    pub section: Section,
    /// Number of nodes in the subtree rooted here, itself included.
    pub size: usize,
    /// Longest downward path from this node, in edges.
    pub height: usize,
}

pub fn nodes(g: &Game) -> Vec<NodeInfo> {
    let mut copy = g.clone();
    let mut out = Vec::new();
    walk_mut(&mut copy, &mut |n, ctx| {
        out.push(NodeInfo { id: ctx.id, category: n.category(), depth: ctx.depth, section: ctx.section, size: 1, height: 0 });
        Flow::Continue
    });
    // A subtree is the run of following nodes that sit deeper than its root.
    let mut stack: Vec<usize> = Vec::new();
    for i in 0..out.len() {
        while let Some(&top) = stack.last() {
            if out[top].depth >= out[i].depth {
                stack.pop();
                close(&mut out, top, &stack);
            } else {
                break;
            }
        }
        stack.push(i);
    }
    while let Some(top) = stack.pop() {
        close(&mut out, top, &stack);
    }
    out
}

fn close(out: &mut [NodeInfo], i: usize, stack: &[usize]) {
    if let Some(&parent) = stack.last() {
        let (size, height) = (out[i].size, out[i].height);
        out[parent].size += size;
        out[parent].height = out[parent].height.max(height + 1);
    }
}

pub fn max_depth(g: &Game) -> usize {
    nodes(g).iter().map(|n| n.depth).max().unwrap_or(0)
}

pub fn node_count(g: &Game) -> usize {
    let mut copy = g.clone();
    let mut n = 0;
    walk_mut(&mut copy, &mut |_, _| {
        n += 1;
        Flow::Continue
    });
    n
}

/// Copies out the subtree at `id` along with its context.
pub fn get_fragment(g: &Game, id: usize) -> Result<(Fragment, Ctx), NodeError> {
    let mut copy = g.clone();
    let mut found = None;
    walk_mut(&mut copy, &mut |n, ctx| {
        if ctx.id == id {
            found = Some((n.to_fragment(), ctx.clone()));
            Flow::Stop
        } else {
            Flow::Continue
        }
    });
    found.ok_or(NodeError::NotFound(id))
}

/// Replaces the subtree at `id`. Everything outside it is left untouched.
pub fn replace_fragment(g: &mut Game, id: usize, frag: Fragment) -> Result<(), NodeError> {
    let mut result = Err(NodeError::NotFound(id));
    let mut frag = Some(frag);
    walk_mut(g, &mut |n, ctx| {
        if ctx.id == id {
            result = n.set(frag.take().unwrap());
            Flow::Stop
        } else {
            Flow::Continue
        }
    });
    result
}

/// Runs `f` on the node at `id`.
pub fn with_node<R>(g: &mut Game, id: usize, f: impl FnOnce(NodeMut, &Ctx) -> R) -> Result<R, NodeError> {
    let mut f = Some(f);
    let mut out = None;
    walk_mut(g, &mut |n, ctx| {
        if ctx.id == id {
            out = Some((f.take().unwrap())(n, ctx));
            Flow::Stop
        } else {
            Flow::Continue
        }
    });
    out.ok_or(NodeError::NotFound(id))
}

struct Walker<'f> {
    f: &'f mut dyn FnMut(NodeMut, &Ctx) -> Flow,
    next: usize,
    stopped: bool,
    ctx: Ctx,
}

impl Walker<'_> {
    fn enter(&mut self, n: NodeMut) -> bool {
        if self.stopped {
            return false;
        }
        self.ctx.id = self.next;
        self.next += 1;
        match (self.f)(n, &self.ctx) {
            Flow::Continue => true,
            Flow::Skip => false,
            Flow::Stop => {
                self.stopped = true;
                false
            }
        }
    }

    fn push_vars(&mut self, vars: &VariableList) -> usize {
        let flat = flatten_vars(vars);
        for (name, types) in &flat {
            self.ctx.scope.push(ScopedVar {
                name: name.to_string(),
                class: VarClass::of_variable(name).unwrap_or(VarClass::Object),
                types: (*types).clone(),
            });
        }
        flat.len()
    }

    fn pop_vars(&mut self, n: usize) {
        let len = self.ctx.scope.len();
        self.ctx.scope.truncate(len - n);
    }

    fn game(&mut self, g: &mut Game) {
        if !self.enter(NodeMut::Game(g)) {
            return;
        }
        // The callback may have replaced the whole game.
        self.ctx.pref_names = g.preference_names().into_iter().map(String::from).collect();
        self.ctx.measured_prefs =
            g.preferences.iter().filter(|p| has_measure(p)).map(|p| p.name().to_string()).collect();
        self.ctx.depth = 1;
        if let Some(s) = &mut g.setup {
            self.ctx.section = Section::Setup;
            self.setup(s);
        }
        self.ctx.section = Section::Constraints;
        for p in &mut g.preferences {
            self.pref_def(p);
        }
        if let Some(t) = &mut g.terminal {
            self.ctx.section = Section::Terminal;
            self.terminal(t);
        }
        self.ctx.section = Section::Scoring;
        self.scoring(&mut g.scoring);
    }

    fn setup(&mut self, s: &mut Setup) {
        if !self.enter(NodeMut::Setup(s)) {
            return;
        }
        self.ctx.depth += 1;
        match s {
            Setup::And(cs) | Setup::Or(cs) => cs.iter_mut().for_each(|c| self.setup(c)),
            Setup::Not(c) => self.setup(c),
            Setup::Exists(v, c) | Setup::Forall(v, c) => {
                self.var_list(v);
                let n = self.push_vars(v);
                self.setup(c);
                self.pop_vars(n);
            }
            Setup::Conserved(p) | Setup::Optional(p) => self.pred(p),
        }
        self.ctx.depth -= 1;
    }

    fn var_list(&mut self, v: &mut VariableList) {
        self.enter(NodeMut::VariableList(v));
    }

    fn pref_def(&mut self, p: &mut PrefDef) {
        self.ctx.pref_name = Some(p.name().to_string());
        if self.enter(NodeMut::PrefDef(p)) {
            self.ctx.depth += 1;
            let mut pushed = 0;
            if let PrefDef::Forall(v, _) = p {
                self.var_list(v);
                pushed += self.push_vars(v);
            }
            let pref = p.preference_mut();
            if pref.quantifier != Quantifier::None {
                self.var_list(&mut pref.vars);
                pushed += self.push_vars(&pref.vars);
            }
            self.pref_body(&mut pref.body);
            self.pop_vars(pushed);
            self.ctx.depth -= 1;
        }
        self.ctx.pref_name = None;
    }

    fn pref_body(&mut self, b: &mut PrefBody) {
        if !self.enter(NodeMut::PrefBody(b)) {
            return;
        }
        self.ctx.depth += 1;
        match b {
            PrefBody::Then(sfs) => {
                let len = sfs.len();
                for (i, sf) in sfs.iter_mut().enumerate() {
                    self.ctx.seq_pos = Some((i, len));
                    self.seq_func(sf);
                }
                self.ctx.seq_pos = None;
            }
            PrefBody::AtEnd(p) => self.pred(p),
        }
        self.ctx.depth -= 1;
    }

    fn seq_func(&mut self, sf: &mut SeqFunc) {
        if !self.enter(NodeMut::SeqFunc(sf)) {
            return;
        }
        self.ctx.depth += 1;
        match sf {
            SeqFunc::Once(p) | SeqFunc::Hold(p) => self.pred(p),
            SeqFunc::OnceMeasure(p, f) => {
                self.pred(p);
                self.function(f);
            }
            SeqFunc::HoldWhile(p, rest) => {
                self.pred(p);
                rest.iter_mut().for_each(|r| self.pred(r));
            }
        }
        self.ctx.depth -= 1;
    }

    fn pred(&mut self, p: &mut Pred) {
        if !self.enter(NodeMut::Pred(p)) {
            return;
        }
        self.ctx.depth += 1;
        match p {
            Pred::And(cs) | Pred::Or(cs) => cs.iter_mut().for_each(|c| self.pred(c)),
            Pred::Not(c) => self.pred(c),
            Pred::Exists(v, c) | Pred::Forall(v, c) => {
                self.var_list(v);
                let n = self.push_vars(v);
                self.pred(c);
                self.pop_vars(n);
            }
            Pred::Compare { args, .. } => {
                for a in args {
                    match a {
                        FnArg::Function(f) => self.function(f),
                        FnArg::Number(n) => self.number(n, NumberKind::Comparison),
                    }
                }
            }
            Pred::Atom { name, args } => {
                let sig = vocab::predicate(name);
                for (i, t) in args.iter_mut().enumerate() {
                    let kind = sig.and_then(|s| s.kind_at(i)).unwrap_or(ArgKind::Object);
                    self.term(t, kind);
                }
            }
        }
        self.ctx.depth -= 1;
    }

    fn function(&mut self, f: &mut FunctionEval) {
        if !self.enter(NodeMut::FunctionEval(f)) {
            return;
        }
        self.ctx.depth += 1;
        let sig = vocab::function(&f.name);
        for (i, t) in f.args.iter_mut().enumerate() {
            let kind = sig.and_then(|s| s.kind_at(i)).unwrap_or(ArgKind::Object);
            self.term(t, kind);
        }
        self.ctx.depth -= 1;
    }

    fn term(&mut self, t: &mut Term, kind: ArgKind) {
        self.ctx.arg_kind = Some(kind);
        self.enter(NodeMut::Term(t));
        self.ctx.arg_kind = None;
    }

    fn number(&mut self, n: &mut Number, kind: NumberKind) {
        self.ctx.number_kind = Some(kind);
        self.enter(NodeMut::Number(n));
        self.ctx.number_kind = None;
    }

    fn terminal(&mut self, t: &mut Terminal) {
        if !self.enter(NodeMut::Terminal(t)) {
            return;
        }
        self.ctx.depth += 1;
        match t {
            Terminal::And(cs) | Terminal::Or(cs) => cs.iter_mut().for_each(|c| self.terminal(c)),
            Terminal::Not(c) => self.terminal(c),
            Terminal::Compare { lhs, rhs, .. } => {
                let kind = match TerminalKind::of(lhs) {
                    TerminalKind::Time => NumberKind::Time,
                    TerminalKind::Score => NumberKind::Score,
                    TerminalKind::Count => NumberKind::Count,
                };
                self.scoring(lhs);
                self.number(rhs, kind);
            }
        }
        self.ctx.depth -= 1;
    }

    fn scoring(&mut self, s: &mut Scoring) {
        if !self.enter(NodeMut::Scoring(s)) {
            return;
        }
        self.ctx.depth += 1;
        match s {
            Scoring::ExternalMax(c) | Scoring::ExternalMin(c) | Scoring::Neg(c) => self.scoring(c),
            Scoring::Add(cs) | Scoring::Mul(cs) | Scoring::Compare { args: cs, .. } => {
                cs.iter_mut().for_each(|c| self.scoring(c))
            }
            Scoring::Sub(a, b) | Scoring::Div(a, b) => {
                self.scoring(a);
                self.scoring(b);
            }
            Scoring::Number(n) => self.number(n, NumberKind::Scoring),
            Scoring::TotalTime | Scoring::TotalScore | Scoring::Eval(_) => {}
        }
        self.ctx.depth -= 1;
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse::parse_game;
    use super::super::print::print_game;
    use super::*;

    const G: &str = "(define (game n-1) (:domain d-1) (:constraints (and (preference p1 (exists (?b - ball) (then (once (agent_holds ?b)) (hold (in_motion ?b))))))) (:scoring (* 2 (count p1))))";

    #[test]
    fn preorder_numbering() {
        let g = parse_game(G).unwrap();
        let ns = nodes(&g);
        let cats: Vec<Category> = ns.iter().map(|n| n.category).collect();
        use Category::*;
        assert_eq!(
            cats,
            vec![Game, PrefDef, VariableList, PrefBody, SeqFunc, Pred, Term, SeqFunc, Pred, Term, Scoring, Scoring, Number, Scoring]
        );
        assert_eq!(ns[0].size, ns.len());
        assert_eq!(ns[1].size, 9);
        assert_eq!(ns[10].size, 4);
        assert_eq!(ns[0].height, 5);
        assert_eq!(ns.iter().map(|n| n.id).collect::<Vec<_>>(), (0..ns.len()).collect::<Vec<_>>());
    }

    #[test]
    fn fragment_roundtrip() {
        let g = parse_game(G).unwrap();
        let (frag, ctx) = get_fragment(&g, 12).unwrap();
        assert_eq!(frag, Fragment::Number(Number::new("2")));
        assert_eq!(ctx.number_kind, Some(NumberKind::Scoring));
        let (_, tctx) = get_fragment(&g, 6).unwrap();
        assert_eq!(tctx.scope.len(), 1);
        assert_eq!(tctx.arg_kind, Some(ArgKind::Object));
        let mut h = g.clone();
        replace_fragment(&mut h, 12, Fragment::Number(Number::new("3"))).unwrap();
        assert_eq!(print_game(&h), G.replace("(* 2", "(* 3"));
        assert!(replace_fragment(&mut h, 12, Fragment::Term(Term::var("?b"))).is_err());
        assert_eq!(get_fragment(&g, 99).unwrap_err(), NodeError::NotFound(99));
    }
}
