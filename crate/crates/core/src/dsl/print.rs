//! Canonical single-line printer. The output is the interchange format and
//! parses back to an equal tree.

use std::fmt::Write;

use super::ast::*;

pub fn print_game(g: &Game) -> String {
    let mut out = String::new();
    let _ = write!(out, "(define (game {}) (:domain {})", g.name, g.domain);
    if let Some(s) = &g.setup {
        out.push_str(" (:setup ");
        setup(&mut out, s);
        out.push(')');
    }
    out.push_str(" (:constraints ");
    constraints(&mut out, &g.preferences);
    out.push(')');
    if let Some(t) = &g.terminal {
        out.push_str(" (:terminal ");
        terminal(&mut out, t);
        out.push(')');
    }
    out.push_str(" (:scoring ");
    scoring(&mut out, &g.scoring);
    out.push_str("))");
    out
}

macro_rules! to_string_fn {
    ($name:ident, $ty:ty, $inner:ident) => {
        pub fn $name(x: &$ty) -> String {
            let mut out = String::new();
            $inner(&mut out, x);
            out
        }
    };
}

to_string_fn!(print_setup, Setup, setup);
to_string_fn!(print_pref_def, PrefDef, pref_def);
to_string_fn!(print_pref_body, PrefBody, pref_body);
to_string_fn!(print_seq_func, SeqFunc, seq_func);
to_string_fn!(print_pred, Pred, pred);
to_string_fn!(print_function, FunctionEval, function);
to_string_fn!(print_var_list, VariableList, var_list);
to_string_fn!(print_terminal, Terminal, terminal);
to_string_fn!(print_scoring, Scoring, scoring);

pub fn print_constraints(prefs: &[PrefDef]) -> String {
    let mut out = String::new();
    constraints(&mut out, prefs);
    out
}

fn constraints(out: &mut String, prefs: &[PrefDef]) {
    out.push_str("(and");
    for p in prefs {
        out.push(' ');
        pref_def(out, p);
    }
    out.push(')');
}

fn setup(out: &mut String, s: &Setup) {
    match s {
        Setup::And(cs) | Setup::Or(cs) => {
            out.push_str(if matches!(s, Setup::And(_)) { "(and" } else { "(or" });
            for c in cs {
                out.push(' ');
                setup(out, c);
            }
            out.push(')');
        }
        Setup::Not(c) => {
            out.push_str("(not ");
            setup(out, c);
            out.push(')');
        }
        Setup::Exists(v, c) | Setup::Forall(v, c) => {
            out.push_str(if matches!(s, Setup::Exists(..)) { "(exists " } else { "(forall " });
            var_list(out, v);
            out.push(' ');
            setup(out, c);
            out.push(')');
        }
        Setup::Conserved(p) => {
            out.push_str("(game-conserved ");
            pred(out, p);
            out.push(')');
        }
        Setup::Optional(p) => {
            out.push_str("(game-optional ");
            pred(out, p);
            out.push(')');
        }
    }
}

fn pref_def(out: &mut String, p: &PrefDef) {
    match p {
        PrefDef::Single(pref) => preference(out, pref),
        PrefDef::Forall(v, pref) => {
            out.push_str("(forall ");
            var_list(out, v);
            out.push(' ');
            preference(out, pref);
            out.push(')');
        }
    }
}

fn preference(out: &mut String, p: &Preference) {
    let _ = write!(out, "(preference {} ", p.name);
    match p.quantifier {
        Quantifier::None => pref_body(out, &p.body),
        Quantifier::Exists | Quantifier::Forall => {
            out.push_str(if p.quantifier == Quantifier::Exists { "(exists " } else { "(forall " });
            var_list(out, &p.vars);
            out.push(' ');
            pref_body(out, &p.body);
            out.push(')');
        }
    }
    out.push(')');
}

fn pref_body(out: &mut String, b: &PrefBody) {
    match b {
        PrefBody::Then(sfs) => {
            out.push_str("(then");
            for sf in sfs {
                out.push(' ');
                seq_func(out, sf);
            }
            out.push(')');
        }
        PrefBody::AtEnd(p) => {
            out.push_str("(at-end ");
            pred(out, p);
            out.push(')');
        }
    }
}

fn seq_func(out: &mut String, sf: &SeqFunc) {
    match sf {
        SeqFunc::Once(p) | SeqFunc::Hold(p) => {
            out.push('(');
            out.push_str(sf.keyword());
            out.push(' ');
            pred(out, p);
            out.push(')');
        }
        SeqFunc::OnceMeasure(p, f) => {
            out.push_str("(once-measure ");
            pred(out, p);
            out.push(' ');
            function(out, f);
            out.push(')');
        }
        SeqFunc::HoldWhile(p, rest) => {
            out.push_str("(hold-while ");
            pred(out, p);
            for r in rest {
                out.push(' ');
                pred(out, r);
            }
            out.push(')');
        }
    }
}

fn pred(out: &mut String, p: &Pred) {
    match p {
        Pred::And(cs) | Pred::Or(cs) => {
            out.push_str(if matches!(p, Pred::And(_)) { "(and" } else { "(or" });
            for c in cs {
                out.push(' ');
                pred(out, c);
            }
            out.push(')');
        }
        Pred::Not(c) => {
            out.push_str("(not ");
            pred(out, c);
            out.push(')');
        }
        Pred::Exists(v, c) | Pred::Forall(v, c) => {
            out.push_str(if matches!(p, Pred::Exists(..)) { "(exists " } else { "(forall " });
            var_list(out, v);
            out.push(' ');
            pred(out, c);
            out.push(')');
        }
        Pred::Compare { op, args } => {
            out.push('(');
            out.push_str(op.symbol());
            for a in args {
                out.push(' ');
                match a {
                    FnArg::Function(f) => function(out, f),
                    FnArg::Number(n) => out.push_str(&n.0),
                }
            }
            out.push(')');
        }
        Pred::Atom { name, args } => {
            out.push('(');
            out.push_str(name);
            for a in args {
                out.push(' ');
                out.push_str(a.text());
            }
            out.push(')');
        }
    }
}

fn function(out: &mut String, f: &FunctionEval) {
    out.push('(');
    out.push_str(&f.name);
    for a in &f.args {
        out.push(' ');
        out.push_str(a.text());
    }
    out.push(')');
}

fn var_list(out: &mut String, v: &VariableList) {
    out.push('(');
    for (i, d) in v.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&d.vars.join(" "));
        out.push_str(" - ");
        match &d.types {
            TypeSpec::Single(t) => out.push_str(t),
            TypeSpec::Either(ts) => {
                out.push_str("(either ");
                out.push_str(&ts.join(" "));
                out.push(')');
            }
        }
    }
    out.push(')');
}

fn terminal(out: &mut String, t: &Terminal) {
    match t {
        Terminal::And(cs) | Terminal::Or(cs) => {
            out.push_str(if matches!(t, Terminal::And(_)) { "(and" } else { "(or" });
            for c in cs {
                out.push(' ');
                terminal(out, c);
            }
            out.push(')');
        }
        Terminal::Not(c) => {
            out.push_str("(not ");
            terminal(out, c);
            out.push(')');
        }
        Terminal::Compare { op, lhs, rhs } => {
            out.push('(');
            out.push_str(op.symbol());
            out.push(' ');
            scoring(out, lhs);
            out.push(' ');
            out.push_str(&rhs.0);
            out.push(')');
        }
    }
}

pub fn pref_eval_text(e: &PrefEval) -> String {
    let mut s = e.pref.clone();
    for t in &e.types {
        s.push(':');
        s.push_str(t);
    }
    s
}

fn scoring(out: &mut String, s: &Scoring) {
    let nary = |out: &mut String, head: &str, cs: &[&Scoring]| {
        out.push('(');
        out.push_str(head);
        for c in cs {
            out.push(' ');
            scoring(out, c);
        }
        out.push(')');
    };
    match s {
        Scoring::ExternalMax(c) => nary(out, "external-forall-maximize", &[c]),
        Scoring::ExternalMin(c) => nary(out, "external-forall-minimize", &[c]),
        Scoring::Add(cs) => nary(out, "+", &cs.iter().collect::<Vec<_>>()),
        Scoring::Mul(cs) => nary(out, "*", &cs.iter().collect::<Vec<_>>()),
        Scoring::Sub(a, b) => nary(out, "-", &[a, b]),
        Scoring::Div(a, b) => nary(out, "/", &[a, b]),
        Scoring::Neg(c) => nary(out, "-", &[c]),
        Scoring::TotalTime => out.push_str("(total-time)"),
        Scoring::TotalScore => out.push_str("(total-score)"),
        Scoring::Compare { op, args } => nary(out, op.symbol(), &args.iter().collect::<Vec<_>>()),
        Scoring::Eval(e) => {
            let _ = write!(out, "({} {})", e.mode.keyword(), pref_eval_text(e));
        }
        Scoring::Number(n) => out.push_str(&n.0),
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse::parse_game;
    use super::*;

    #[test]
    fn canonical_spacing() {
        let text = "(define   (game g-1)\n (:domain d-1)\n (:constraints\n   (preference p1 (at-end (in   top_drawer  ?g)))) ; c\n (:scoring (+ 1 (count-once p1))))";
        let g = parse_game(text).unwrap();
        assert_eq!(
            print_game(&g),
            "(define (game g-1) (:domain d-1) (:constraints (and (preference p1 (at-end (in top_drawer ?g))))) (:scoring (+ 1 (count-once p1))))"
        );
    }
}
