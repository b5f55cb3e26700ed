//! Checks for constructs that are grammatical but ill-formed.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ast::*;
use super::vocab::{self, ArgKind, VarClass};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    UnknownVariable { var: String, predicate: String },
    UndefinedPreference { name: String },
    DuplicatePreference { name: String },
    DuplicateVariable { var: String },
    ArgKindMismatch { predicate: String, index: usize, term: String },
    CountMeasureWithoutMeasure { name: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownVariable { var, predicate } => write!(f, "variable {var} used in ({predicate} ...) is not bound"),
            Violation::UndefinedPreference { name } => write!(f, "preference {name} is referenced but not defined"),
            Violation::DuplicatePreference { name } => write!(f, "preference {name} is defined more than once"),
            Violation::DuplicateVariable { var } => write!(f, "variable {var} is declared twice in one quantifier"),
            Violation::ArgKindMismatch { predicate, index, term } => {
                write!(f, "argument {index} of ({predicate} ...) cannot be {term}")
            }
            Violation::CountMeasureWithoutMeasure { name } => {
                write!(f, "count-measure applied to {name}, which has no once-measure")
            }
        }
    }
}

pub fn validate(g: &Game) -> Vec<Violation> {
    let mut v = Checker { scope: Vec::new(), out: Vec::new() };
    if let Some(s) = &g.setup {
        v.setup(s);
    }
    let mut seen = BTreeSet::new();
    for p in &g.preferences {
        if !seen.insert(p.name()) {
            v.out.push(Violation::DuplicatePreference { name: p.name().to_string() });
        }
        let mut pushed = 0;
        if let PrefDef::Forall(vars, _) = p {
            v.push(vars);
            pushed += 1;
        }
        let pref = p.preference();
        if pref.quantifier != Quantifier::None {
            v.push(&pref.vars);
            pushed += 1;
        }
        match &pref.body {
            PrefBody::Then(sfs) => {
                for sf in sfs {
                    for pr in sf.preds() {
                        v.pred(pr);
                    }
                    if let SeqFunc::OnceMeasure(_, f) = sf {
                        v.function(f);
                    }
                }
            }
            PrefBody::AtEnd(pr) => v.pred(pr),
        }
        for _ in 0..pushed {
            v.scope.pop();
        }
    }
    for e in g.pref_evals() {
        match g.find_preference(&e.pref) {
            None => v.out.push(Violation::UndefinedPreference { name: e.pref.clone() }),
            Some(def) => {
                if e.mode == CountMode::Measure && !has_measure(def) {
                    v.out.push(Violation::CountMeasureWithoutMeasure { name: e.pref.clone() });
                }
            }
        }
    }
    v.out.dedup();
    v.out
}

pub fn has_measure(def: &PrefDef) -> bool {
    match &def.preference().body {
        PrefBody::Then(sfs) => sfs.iter().any(|sf| matches!(sf, SeqFunc::OnceMeasure(..))),
        PrefBody::AtEnd(_) => false,
    }
}

struct Checker {
    scope: Vec<HashMap<String, VarClass>>,
    out: Vec<Violation>,
}

impl Checker {
    fn push(&mut self, vars: &VariableList) {
        let mut frame = HashMap::new();
        for (name, _) in flatten_vars(vars) {
            if frame.contains_key(name) {
                self.out.push(Violation::DuplicateVariable { var: name.to_string() });
            }
            frame.insert(name.to_string(), VarClass::of_variable(name).unwrap_or(VarClass::Object));
        }
        self.scope.push(frame);
    }

    fn bound(&self, var: &str) -> bool {
        self.scope.iter().any(|f| f.contains_key(var))
    }

    fn setup(&mut self, s: &Setup) {
        match s {
            Setup::And(cs) | Setup::Or(cs) => cs.iter().for_each(|c| self.setup(c)),
            Setup::Not(c) => self.setup(c),
            Setup::Exists(vars, c) | Setup::Forall(vars, c) => {
                self.push(vars);
                self.setup(c);
                self.scope.pop();
            }
            Setup::Conserved(p) | Setup::Optional(p) => self.pred(p),
        }
    }

    fn pred(&mut self, p: &Pred) {
        match p {
            Pred::And(cs) | Pred::Or(cs) => cs.iter().for_each(|c| self.pred(c)),
            Pred::Not(c) => self.pred(c),
            Pred::Exists(vars, c) | Pred::Forall(vars, c) => {
                self.push(vars);
                self.pred(c);
                self.scope.pop();
            }
            Pred::Compare { args, .. } => {
                for a in args {
                    if let FnArg::Function(f) = a {
                        self.function(f);
                    }
                }
            }
            Pred::Atom { name, args } => {
                if let Some(sig) = vocab::predicate(name) {
                    self.terms(name, args, |i| sig.kind_at(i));
                }
            }
        }
    }

    fn function(&mut self, f: &FunctionEval) {
        if let Some(sig) = vocab::function(&f.name) {
            self.terms(&f.name, &f.args, |i| sig.kind_at(i));
        }
    }

    fn terms(&mut self, owner: &str, args: &[Term], kind_at: impl Fn(usize) -> Option<ArgKind>) {
        for (i, t) in args.iter().enumerate() {
            if let Term::Var(v) = t {
                if !self.bound(v) {
                    self.out.push(Violation::UnknownVariable { var: v.clone(), predicate: owner.to_string() });
                }
            }
            if let Some(kind) = kind_at(i) {
                if !term_fits(t, kind) {
                    self.out.push(Violation::ArgKindMismatch {
                        predicate: owner.to_string(),
                        index: i,
                        term: t.text().to_string(),
                    });
                }
            }
        }
    }
}

/// Does a term belong in a slot of the given kind?
pub fn term_fits(t: &Term, kind: ArgKind) -> bool {
    match t {
        Term::Var(v) => VarClass::of_variable(v).is_some_and(|c| kind.accepts_class(c)),
        Term::Const(c) => {
            let objectish = vocab::is_object_name(c) || vocab::is_object_type(c);
            match kind {
                ArgKind::Object | ArgKind::ObjectOrType => objectish,
                ArgKind::Color => vocab::is_color(c),
                ArgKind::Orientation => vocab::is_orientation(c),
                ArgKind::Side => vocab::is_side(c),
                ArgKind::ObjectOrColor => objectish || vocab::is_color(c),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse::parse_game;
    use super::*;

    fn game(prefs: &str, scoring: &str) -> Game {
        parse_game(&format!("(define (game v-1) (:domain d-1) (:constraints (and {prefs})) (:scoring {scoring}))")).unwrap()
    }

    #[test]
    fn undefined_preference() {
        let g = game("(preference p1 (at-end (agent_holds desk)))", "(count p2)");
        assert_eq!(validate(&g), vec![Violation::UndefinedPreference { name: "p2".into() }]);
    }

    #[test]
    fn unbound_variable() {
        let g = game("(preference p1 (at-end (in ?q ?q)))", "(count p1)");
        let v = validate(&g);
        assert_eq!(v, vec![Violation::UnknownVariable { var: "?q".into(), predicate: "in".into() }]);
    }

    #[test]
    fn duplicates_and_kinds() {
        let g = game(
            "(preference p1 (exists (?b ?b - ball) (at-end (agent_holds ?b)))) (preference p1 (exists (?x - color) (at-end (agent_holds ?x))))",
            "(+ (count p1) (count-measure p1))",
        );
        let v = validate(&g);
        assert!(v.contains(&Violation::DuplicatePreference { name: "p1".into() }));
        assert!(v.contains(&Violation::DuplicateVariable { var: "?b".into() }));
        assert!(v.contains(&Violation::ArgKindMismatch { predicate: "agent_holds".into(), index: 0, term: "?x".into() }));
        assert!(v.contains(&Violation::CountMeasureWithoutMeasure { name: "p1".into() }));
    }

    #[test]
    fn scopes_nest() {
        let g = game(
            "(forall (?h - hexagonal_bin) (preference p1 (exists (?b - ball) (at-end (and (in ?h ?b) (exists (?c - chair) (on ?c ?b)))))))",
            "(count-once-per-external-objects p1)",
        );
        assert!(validate(&g).is_empty());
    }
}
