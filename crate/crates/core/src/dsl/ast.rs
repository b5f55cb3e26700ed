//! Syntax tree of a goal program.

use serde::{Deserialize, Serialize};

use super::vocab::VarClass;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Game {
    pub name: String,
    pub domain: String,
    pub setup: Option<Setup>,
    pub preferences: Vec<PrefDef>,
    pub terminal: Option<Terminal>,
    pub scoring: Scoring,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Setup {
    And(Vec<Setup>),
    Or(Vec<Setup>),
    Not(Box<Setup>),
    Exists(VariableList, Box<Setup>),
    Forall(VariableList, Box<Setup>),
    Conserved(Pred),
    Optional(Pred),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PrefDef {
    Single(Preference),
    Forall(VariableList, Preference),
}

impl PrefDef {
    pub fn preference(&self) -> &Preference {
        match self {
            PrefDef::Single(p) | PrefDef::Forall(_, p) => p,
        }
    }

    pub fn preference_mut(&mut self) -> &mut Preference {
        match self {
            PrefDef::Single(p) | PrefDef::Forall(_, p) => p,
        }
    }

    pub fn name(&self) -> &str {
        &self.preference().name
    }

    pub fn external_vars(&self) -> Option<&VariableList> {
        match self {
            PrefDef::Forall(vars, _) => Some(vars),
            PrefDef::Single(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Quantifier {
    Exists,
    Forall,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Preference {
    pub name: String,
    pub quantifier: Quantifier,
    /// Empty when `quantifier` is `None`.
    pub vars: VariableList,
    pub body: PrefBody,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PrefBody {
    Then(Vec<SeqFunc>),
    AtEnd(Pred),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SeqFunc {
    Once(Pred),
    OnceMeasure(Pred, FunctionEval),
    Hold(Pred),
    HoldWhile(Pred, Vec<Pred>),
}

impl SeqFunc {
    pub fn main(&self) -> &Pred {
        match self {
            SeqFunc::Once(p) | SeqFunc::OnceMeasure(p, _) | SeqFunc::Hold(p) | SeqFunc::HoldWhile(p, _) => p,
        }
    }

    pub fn keyword(&self) -> &'static str {
        match self {
            SeqFunc::Once(_) => "once",
            SeqFunc::OnceMeasure(..) => "once-measure",
            SeqFunc::Hold(_) => "hold",
            SeqFunc::HoldWhile(..) => "hold-while",
        }
    }

    pub fn is_hold(&self) -> bool {
        matches!(self, SeqFunc::Hold(_) | SeqFunc::HoldWhile(..))
    }

    /// All predicates directly under this modal, main one first.
    pub fn preds(&self) -> Vec<&Pred> {
        match self {
            SeqFunc::HoldWhile(p, rest) => std::iter::once(p).chain(rest.iter()).collect(),
            other => vec![other.main()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pred {
    And(Vec<Pred>),
    Or(Vec<Pred>),
    Not(Box<Pred>),
    Exists(VariableList, Box<Pred>),
    Forall(VariableList, Box<Pred>),
    Compare { op: CompOp, args: Vec<FnArg> },
    Atom { name: String, args: Vec<Term> },
}

impl Pred {
    pub fn atom(name: &str, args: Vec<Term>) -> Pred {
        Pred::Atom { name: name.to_string(), args }
    }

    /// Visits every atomic predicate in pre-order.
    pub fn for_each_atom<'a>(&'a self, f: &mut impl FnMut(&'a str, &'a [Term])) {
        match self {
            Pred::And(cs) | Pred::Or(cs) => cs.iter().for_each(|c| c.for_each_atom(f)),
            Pred::Not(c) | Pred::Exists(_, c) | Pred::Forall(_, c) => c.for_each_atom(f),
            Pred::Compare { .. } => {}
            Pred::Atom { name, args } => f(name, args),
        }
    }

    /// Visits every term, including those inside function evaluations.
    pub fn for_each_term<'a>(&'a self, f: &mut impl FnMut(&'a Term)) {
        match self {
            Pred::And(cs) | Pred::Or(cs) => cs.iter().for_each(|c| c.for_each_term(f)),
            Pred::Not(c) | Pred::Exists(_, c) | Pred::Forall(_, c) => c.for_each_term(f),
            Pred::Compare { args, .. } => {
                for a in args {
                    if let FnArg::Function(fe) = a {
                        fe.args.iter().for_each(&mut *f);
                    }
                }
            }
            Pred::Atom { args, .. } => args.iter().for_each(f),
        }
    }

    pub fn is_logical(&self) -> bool {
        matches!(self, Pred::And(_) | Pred::Or(_) | Pred::Not(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FunctionEval {
    pub name: String,
    pub args: Vec<Term>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FnArg {
    Function(FunctionEval),
    Number(Number),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Term {
    Var(String),
    Const(String),
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(name.to_string())
    }

    pub fn constant(name: &str) -> Term {
        Term::Const(name.to_string())
    }

    pub fn text(&self) -> &str {
        match self {
            Term::Var(s) | Term::Const(s) => s,
        }
    }
}

/// A numeric literal kept in its source spelling so it re-prints exactly.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Number(pub String);

impl Number {
    pub fn new(text: &str) -> Number {
        Number(text.to_string())
    }

    pub fn from_f64(v: f64) -> Number {
        if v.fract() == 0.0 && v.abs() < 1e15 {
            Number(format!("{}", v as i64))
        } else {
            Number(format!("{v}"))
        }
    }

    pub fn value(&self) -> f64 {
        self.0.parse().unwrap_or(f64::NAN)
    }

    /// Accepts `-?\d*\.?\d+`.
    pub fn is_valid(text: &str) -> bool {
        let body = text.strip_prefix('-').unwrap_or(text);
        if body.is_empty() || !body.chars().last().is_some_and(|c| c.is_ascii_digit()) {
            return false;
        }
        let mut dots = 0;
        for c in body.chars() {
            match c {
                '0'..='9' => {}
                '.' => dots += 1,
                _ => return false,
            }
        }
        dots <= 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VarDef {
    pub vars: Vec<String>,
    pub types: TypeSpec,
}

impl VarDef {
    pub fn class(&self) -> VarClass {
        self.vars.first().and_then(|v| VarClass::of_variable(v)).unwrap_or(VarClass::Object)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TypeSpec {
    Single(String),
    Either(Vec<String>),
}

impl TypeSpec {
    pub fn names(&self) -> Vec<&str> {
        match self {
            TypeSpec::Single(t) => vec![t.as_str()],
            TypeSpec::Either(ts) => ts.iter().map(String::as_str).collect(),
        }
    }
}

pub type VariableList = Vec<VarDef>;

/// Flattens a variable list into `(name, types)` pairs in declaration order.
pub fn flatten_vars(list: &VariableList) -> Vec<(&str, &TypeSpec)> {
    list.iter().flat_map(|d| d.vars.iter().map(move |v| (v.as_str(), &d.types))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CompOp {
    Lt,
    Le,
    Eq,
    Gt,
    Ge,
}

impl CompOp {
    pub const ALL: [CompOp; 5] = [CompOp::Lt, CompOp::Le, CompOp::Eq, CompOp::Gt, CompOp::Ge];

    pub fn symbol(self) -> &'static str {
        match self {
            CompOp::Lt => "<",
            CompOp::Le => "<=",
            CompOp::Eq => "=",
            CompOp::Gt => ">",
            CompOp::Ge => ">=",
        }
    }

    pub fn from_symbol(s: &str) -> Option<CompOp> {
        CompOp::ALL.into_iter().find(|op| op.symbol() == s)
    }

    pub fn apply(self, a: f64, b: f64) -> bool {
        match self {
            CompOp::Lt => a < b,
            CompOp::Le => a <= b,
            CompOp::Eq => (a - b).abs() < 1e-9,
            CompOp::Gt => a > b,
            CompOp::Ge => a >= b,
        }
    }

    /// True when every adjacent pair satisfies the operator.
    pub fn apply_chain(self, values: &[f64]) -> bool {
        values.windows(2).all(|w| self.apply(w[0], w[1]))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Terminal {
    And(Vec<Terminal>),
    Or(Vec<Terminal>),
    Not(Box<Terminal>),
    Compare { op: CompOp, lhs: Scoring, rhs: Number },
}

/// Which of the three terminal comparison forms a comparison is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TerminalKind {
    Time,
    Score,
    Count,
}

impl TerminalKind {
    pub fn of(lhs: &Scoring) -> TerminalKind {
        match lhs {
            Scoring::TotalTime => TerminalKind::Time,
            Scoring::TotalScore => TerminalKind::Score,
            _ => TerminalKind::Count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scoring {
    ExternalMax(Box<Scoring>),
    ExternalMin(Box<Scoring>),
    Add(Vec<Scoring>),
    Mul(Vec<Scoring>),
    Sub(Box<Scoring>, Box<Scoring>),
    Div(Box<Scoring>, Box<Scoring>),
    Neg(Box<Scoring>),
    TotalTime,
    TotalScore,
    Compare { op: CompOp, args: Vec<Scoring> },
    Eval(PrefEval),
    Number(Number),
}

impl Scoring {
    pub fn children(&self) -> Vec<&Scoring> {
        match self {
            Scoring::ExternalMax(c) | Scoring::ExternalMin(c) | Scoring::Neg(c) => vec![c],
            Scoring::Add(cs) | Scoring::Mul(cs) | Scoring::Compare { args: cs, .. } => cs.iter().collect(),
            Scoring::Sub(a, b) | Scoring::Div(a, b) => vec![a, b],
            Scoring::TotalTime | Scoring::TotalScore | Scoring::Eval(_) | Scoring::Number(_) => vec![],
        }
    }

    pub fn for_each_eval<'a>(&'a self, f: &mut impl FnMut(&'a PrefEval)) {
        if let Scoring::Eval(e) = self {
            f(e);
        }
        for c in self.children() {
            c.for_each_eval(f);
        }
    }
}

impl Terminal {
    pub fn for_each_eval<'a>(&'a self, f: &mut impl FnMut(&'a PrefEval)) {
        match self {
            Terminal::And(cs) | Terminal::Or(cs) => cs.iter().for_each(|c| c.for_each_eval(f)),
            Terminal::Not(c) => c.for_each_eval(f),
            Terminal::Compare { lhs, .. } => lhs.for_each_eval(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PrefEval {
    pub mode: CountMode,
    pub pref: String,
    /// Optional `:type` qualifiers restricting externally quantified objects.
    pub types: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CountMode {
    Count,
    Overlapping,
    Once,
    OncePerObjects,
    Measure,
    UniquePositions,
    SamePositions,
    OncePerExternalObjects,
}

impl CountMode {
    pub const ALL: [CountMode; 8] = [
        CountMode::Count,
        CountMode::Overlapping,
        CountMode::Once,
        CountMode::OncePerObjects,
        CountMode::Measure,
        CountMode::UniquePositions,
        CountMode::SamePositions,
        CountMode::OncePerExternalObjects,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            CountMode::Count => "count",
            CountMode::Overlapping => "count-overlapping",
            CountMode::Once => "count-once",
            CountMode::OncePerObjects => "count-once-per-objects",
            CountMode::Measure => "count-measure",
            CountMode::UniquePositions => "count-unique-positions",
            CountMode::SamePositions => "count-same-positions",
            CountMode::OncePerExternalObjects => "count-once-per-external-objects",
        }
    }

    pub fn from_keyword(s: &str) -> Option<CountMode> {
        CountMode::ALL.into_iter().find(|m| m.keyword() == s)
    }
}

impl Game {
    pub fn preference_names(&self) -> Vec<&str> {
        self.preferences.iter().map(PrefDef::name).collect()
    }

    pub fn find_preference(&self, name: &str) -> Option<&PrefDef> {
        self.preferences.iter().find(|p| p.name() == name)
    }

    /// Every preference evaluation in terminal and scoring sections.
    pub fn pref_evals(&self) -> Vec<&PrefEval> {
        let mut out = Vec::new();
        if let Some(t) = &self.terminal {
            t.for_each_eval(&mut |e| out.push(e));
        }
        self.scoring.for_each_eval(&mut |e| out.push(e));
        out
    }
}

impl Setup {
    /// Visits every setup statement predicate, with its conserved flag.
    pub fn for_each_statement<'a>(&'a self, f: &mut impl FnMut(&'a Pred, bool)) {
        match self {
            Setup::And(cs) | Setup::Or(cs) => cs.iter().for_each(|c| c.for_each_statement(f)),
            Setup::Not(c) | Setup::Exists(_, c) | Setup::Forall(_, c) => c.for_each_statement(f),
            Setup::Conserved(p) => f(p, true),
            Setup::Optional(p) => f(p, false),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_literals() {
        for ok in ["1", "-2", "0.4", ".5", "-.25", "10"] {
            assert!(Number::is_valid(ok), "{ok}");
        }
        for bad in ["", "-", "1.", "a", "1.2.3", "--1"] {
            assert!(!Number::is_valid(bad), "{bad}");
        }
        assert_eq!(Number::new(".5").value(), 0.5);
        assert_eq!(Number::from_f64(3.0).0, "3");
        assert_eq!(Number::from_f64(0.25).0, "0.25");
    }

    #[test]
    fn comparison_chain() {
        assert!(CompOp::Eq.apply_chain(&[2.0, 2.0, 2.0]));
        assert!(!CompOp::Eq.apply_chain(&[2.0, 2.0, 3.0]));
        assert!(CompOp::Lt.apply_chain(&[1.0, 2.0]));
    }
}
