//! Features computed from the syntax tree alone.

use std::collections::{BTreeMap, BTreeSet};

use crate::dsl::ast::*;
use crate::dsl::nodes::{self, Section};
use crate::dsl::print::{print_pred, print_scoring};
use crate::dsl::vocab;

pub(crate) type Row = Vec<(&'static str, f64)>;

fn b(x: bool) -> f64 {
    if x {
        1.0
    } else {
        0.0
    }
}

// ---- traversal helpers ----

fn pred_children(p: &Pred) -> Vec<&Pred> {
    match p {
        Pred::And(cs) | Pred::Or(cs) => cs.iter().collect(),
        Pred::Not(c) | Pred::Exists(_, c) | Pred::Forall(_, c) => vec![c],
        Pred::Compare { .. } | Pred::Atom { .. } => vec![],
    }
}

fn walk_pred<'a>(p: &'a Pred, f: &mut impl FnMut(&'a Pred)) {
    f(p);
    for c in pred_children(p) {
        walk_pred(c, f);
    }
}

fn walk_setup<'a>(s: &'a Setup, f: &mut impl FnMut(&'a Setup)) {
    f(s);
    match s {
        Setup::And(cs) | Setup::Or(cs) => cs.iter().for_each(|c| walk_setup(c, f)),
        Setup::Not(c) | Setup::Exists(_, c) | Setup::Forall(_, c) => walk_setup(c, f),
        Setup::Conserved(_) | Setup::Optional(_) => {}
    }
}

fn walk_scoring<'a>(s: &'a Scoring, f: &mut impl FnMut(&'a Scoring)) {
    f(s);
    for c in s.children() {
        walk_scoring(c, f);
    }
}

fn walk_terminal<'a>(t: &'a Terminal, f: &mut impl FnMut(&'a Terminal)) {
    f(t);
    match t {
        Terminal::And(cs) | Terminal::Or(cs) => cs.iter().for_each(|c| walk_terminal(c, f)),
        Terminal::Not(c) => walk_terminal(c, f),
        Terminal::Compare { .. } => {}
    }
}

/// Predicates directly under a preference: modal arguments or the at-end body.
pub(crate) fn body_preds(p: &Preference) -> Vec<&Pred> {
    match &p.body {
        PrefBody::Then(seq) => seq.iter().flat_map(|s| s.preds()).collect(),
        PrefBody::AtEnd(q) => vec![q],
    }
}

fn measure_fns(p: &Preference) -> Vec<&FunctionEval> {
    match &p.body {
        PrefBody::Then(seq) => seq
            .iter()
            .filter_map(|s| match s {
                SeqFunc::OnceMeasure(_, f) => Some(f),
                _ => None,
            })
            .collect(),
        PrefBody::AtEnd(_) => vec![],
    }
}

fn setup_preds(g: &Game) -> Vec<&Pred> {
    let mut out = Vec::new();
    if let Some(s) = &g.setup {
        s.for_each_statement(&mut |p, _| out.push(p));
    }
    out
}

/// Every root predicate in setup and preferences.
pub(crate) fn root_preds(g: &Game) -> Vec<&Pred> {
    let mut out = setup_preds(g);
    for d in &g.preferences {
        out.extend(body_preds(d.preference()));
    }
    out
}

/// Every scoring node in the scoring section and inside terminal comparisons.
fn all_scoring(g: &Game) -> Vec<&Scoring> {
    let mut out = Vec::new();
    if let Some(t) = &g.terminal {
        walk_terminal(t, &mut |n| {
            if let Terminal::Compare { lhs, .. } = n {
                walk_scoring(lhs, &mut |s| out.push(s));
            }
        });
    }
    walk_scoring(&g.scoring, &mut |s| out.push(s));
    out
}

fn mentions_var(preds: &[&Pred], fns: &[&FunctionEval], v: &str) -> bool {
    let mut hit = false;
    for p in preds {
        p.for_each_term(&mut |t| hit |= matches!(t, Term::Var(x) if x == v));
    }
    hit || fns.iter().any(|f| f.args.iter().any(|t| matches!(t, Term::Var(x) if x == v)))
}

fn has_duplicates<T: Ord>(items: impl IntoIterator<Item = T>) -> bool {
    let mut seen = BTreeSet::new();
    items.into_iter().any(|x| !seen.insert(x))
}

fn is_object_const(c: &str) -> bool {
    c == "agent" || vocab::is_object_name(c) || vocab::is_object_type(c)
}

// ---- defined and used ----

fn var_lists(g: &Game) -> Vec<&VariableList> {
    let mut out = Vec::new();
    if let Some(s) = &g.setup {
        walk_setup(s, &mut |n| {
            if let Setup::Exists(v, _) | Setup::Forall(v, _) = n {
                out.push(v);
            }
        });
    }
    for d in &g.preferences {
        if let Some(v) = d.external_vars() {
            out.push(v);
        }
        out.push(&d.preference().vars);
    }
    for p in root_preds(g) {
        walk_pred(p, &mut |n| {
            if let Pred::Exists(v, _) | Pred::Forall(v, _) = n {
                out.push(v);
            }
        });
    }
    out
}

/// (defined, used) counts over every variable definition.
fn variable_usage(g: &Game) -> (usize, usize) {
    let (mut defined, mut used) = (0, 0);
    let mut tally = |vars: &VariableList, preds: &[&Pred], fns: &[&FunctionEval]| {
        for (v, _) in flatten_vars(vars) {
            defined += 1;
            used += mentions_var(preds, fns, v) as usize;
        }
    };
    if let Some(s) = &g.setup {
        walk_setup(s, &mut |n| {
            if let Setup::Exists(vars, body) | Setup::Forall(vars, body) = n {
                let mut preds = Vec::new();
                body.for_each_statement(&mut |p, _| preds.push(p));
                tally(vars, &preds, &[]);
            }
        });
    }
    for d in &g.preferences {
        let p = d.preference();
        let preds = body_preds(p);
        let fns = measure_fns(p);
        if let Some(ext) = d.external_vars() {
            tally(ext, &preds, &fns);
        }
        tally(&p.vars, &preds, &fns);
    }
    for r in root_preds(g) {
        walk_pred(r, &mut |n| {
            if let Pred::Exists(vars, c) | Pred::Forall(vars, c) = n {
                tally(vars, &[c.as_ref()], &[]);
            }
        });
    }
    (defined, used)
}

/// Type names quantified in setup, and every type or object named there.
fn setup_refs(s: &Setup) -> (BTreeSet<String>, BTreeSet<String>) {
    let mut quantified = BTreeSet::new();
    walk_setup(s, &mut |n| {
        if let Setup::Exists(v, _) | Setup::Forall(v, _) = n {
            for d in v {
                quantified.extend(d.types.names().into_iter().map(String::from));
            }
        }
    });
    let mut all = quantified.clone();
    s.for_each_statement(&mut |p, _| {
        walk_pred(p, &mut |n| {
            if let Pred::Exists(v, _) | Pred::Forall(v, _) = n {
                for d in v {
                    all.extend(d.types.names().into_iter().map(String::from));
                }
            }
        });
        p.for_each_term(&mut |t| {
            if let Term::Const(c) = t {
                if is_object_const(c) && c != "agent" {
                    all.insert(c.clone());
                }
            }
        });
    });
    (quantified, all)
}

/// Types and objects a preference refers to, unexpanded.
pub(crate) fn pref_refs(d: &PrefDef) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let p = d.preference();
    let mut lists: Vec<&VariableList> = vec![&p.vars];
    lists.extend(d.external_vars());
    for q in body_preds(p) {
        walk_pred(q, &mut |n| {
            if let Pred::Exists(v, _) | Pred::Forall(v, _) = n {
                lists.push(v);
            }
        });
        q.for_each_term(&mut |t| {
            if let Term::Const(c) = t {
                if is_object_const(c) {
                    out.insert(c.clone());
                }
            }
        });
    }
    for f in measure_fns(p) {
        for t in &f.args {
            if let Term::Const(c) = t {
                if is_object_const(c) {
                    out.insert(c.clone());
                }
            }
        }
    }
    for l in lists {
        for d in l {
            out.extend(d.types.names().into_iter().map(String::from));
        }
    }
    out
}

pub(crate) fn defined_and_used(g: &Game) -> Row {
    let (defined, used) = variable_usage(g);
    let referenced: BTreeSet<&str> = g.pref_evals().iter().map(|e| e.pref.as_str()).collect();
    let n_prefs = g.preferences.len();
    let n_used = g.preferences.iter().filter(|d| referenced.contains(d.name())).count();
    let in_prefs: BTreeSet<String> = g.preferences.iter().flat_map(pref_refs).collect();
    let (setup_quant, setup_any) = match &g.setup {
        Some(s) => {
            let (q, all) = setup_refs(s);
            let q_prop = if q.is_empty() { 0.0 } else { q.iter().filter(|t| in_prefs.contains(*t)).count() as f64 / q.len() as f64 };
            (q_prop, b(all.iter().any(|t| in_prefs.contains(t))))
        }
        None => (0.0, 0.0),
    };
    vec![
        ("variables_used_all", b(used == defined)),
        ("variables_used_prop", if defined == 0 { 1.0 } else { used as f64 / defined as f64 }),
        ("preferences_used_all", b(n_used == n_prefs)),
        ("preferences_used_prop", if n_prefs == 0 { 1.0 } else { n_used as f64 / n_prefs as f64 }),
        ("setup_quantified_objects_used", setup_quant),
        ("any_setup_objects_used", setup_any),
        ("section_doesnt_exist_setup", b(g.setup.is_none())),
        ("section_doesnt_exist_terminal", b(g.terminal.is_none())),
    ]
}

// ---- grammar misuse ----

const MAX_TABLE_ATOMS: usize = 8;

/// Truth table of a logical expression over its maximal non-logical
/// subexpressions, or `None` if there are too many of them.
fn truth_table(p: &Pred) -> Option<Vec<bool>> {
    let mut atoms: Vec<String> = Vec::new();
    collect_atoms(p, &mut atoms);
    if atoms.len() > MAX_TABLE_ATOMS {
        return None;
    }
    Some((0..1u32 << atoms.len()).map(|m| eval_table(p, &atoms, m)).collect())
}

fn collect_atoms(p: &Pred, atoms: &mut Vec<String>) {
    if p.is_logical() {
        pred_children(p).into_iter().for_each(|c| collect_atoms(c, atoms));
    } else {
        let s = print_pred(p);
        if !atoms.contains(&s) {
            atoms.push(s);
        }
    }
}

fn eval_table(p: &Pred, atoms: &[String], m: u32) -> bool {
    match p {
        Pred::And(cs) => cs.iter().all(|c| eval_table(c, atoms, m)),
        Pred::Or(cs) => cs.iter().any(|c| eval_table(c, atoms, m)),
        Pred::Not(c) => !eval_table(c, atoms, m),
        other => {
            let s = print_pred(other);
            let i = atoms.iter().position(|a| *a == s).expect("atom collected");
            m >> i & 1 == 1
        }
    }
}

/// Table of `p` over the atom list of a larger expression, so tables of a
/// node and its reduction are comparable.
fn table_over(p: &Pred, atoms: &[String]) -> Vec<bool> {
    (0..1u32 << atoms.len()).map(|m| eval_table(p, atoms, m)).collect()
}

fn is_redundant(p: &Pred) -> bool {
    let (cs, and) = match p {
        Pred::And(cs) => (cs, true),
        Pred::Or(cs) => (cs, false),
        _ => return false,
    };
    if cs.len() < 2 {
        return false;
    }
    let mut atoms = Vec::new();
    collect_atoms(p, &mut atoms);
    if atoms.len() > MAX_TABLE_ATOMS {
        return false;
    }
    let full = table_over(p, &atoms);
    (0..cs.len()).any(|i| {
        let rest: Vec<Pred> = cs.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, c)| c.clone()).collect();
        let reduced = if and { Pred::And(rest) } else { Pred::Or(rest) };
        table_over(&reduced, &atoms) == full
    })
}

fn is_unnecessary(p: &Pred) -> bool {
    if !p.is_logical() {
        return false;
    }
    match truth_table(p) {
        Some(t) => t.iter().all(|&x| x) || t.iter().all(|&x| !x),
        None => false,
    }
}

fn same_op_nested_pred(p: &Pred) -> bool {
    match p {
        Pred::And(cs) => cs.iter().any(|c| matches!(c, Pred::And(_))),
        Pred::Or(cs) => cs.iter().any(|c| matches!(c, Pred::Or(_))),
        Pred::Not(c) => matches!(**c, Pred::Not(_)),
        _ => false,
    }
}

fn same_op_nested_setup(s: &Setup) -> bool {
    match s {
        Setup::And(cs) => cs.iter().any(|c| matches!(c, Setup::And(_))),
        Setup::Or(cs) => cs.iter().any(|c| matches!(c, Setup::Or(_))),
        Setup::Not(c) => matches!(**c, Setup::Not(_)),
        _ => false,
    }
}

fn refs_var_or_agent(p: &Pred) -> (bool, bool) {
    let (mut has_args, mut refs) = (false, false);
    walk_pred(p, &mut |n| match n {
        Pred::Atom { args, .. } => has_args |= !args.is_empty(),
        Pred::Compare { args, .. } => has_args |= args.iter().any(|a| matches!(a, FnArg::Function(f) if !f.args.is_empty())),
        _ => {}
    });
    p.for_each_term(&mut |t| refs |= matches!(t, Term::Var(_)) || t.text() == "agent");
    (has_args, refs)
}

fn fn_evals(p: &Pred) -> Vec<&FunctionEval> {
    let mut out = Vec::new();
    walk_pred(p, &mut |n| {
        if let Pred::Compare { args, .. } = n {
            for a in args {
                if let FnArg::Function(f) = a {
                    out.push(f);
                }
            }
        }
    });
    out
}

pub(crate) fn grammar_misuse(g: &Game) -> Row {
    let mut adjacent_once = false;
    let mut adjacent_same = false;
    let mut once_middle = false;
    let mut no_hold = false;
    let mut identical_consecutive = false;
    let mut no_vars = false;
    for d in &g.preferences {
        let p = d.preference();
        match &p.body {
            PrefBody::Then(seq) => {
                let is_once = |s: &SeqFunc| matches!(s, SeqFunc::Once(_) | SeqFunc::OnceMeasure(..));
                for w in seq.windows(2) {
                    adjacent_once |= is_once(&w[0]) && is_once(&w[1]);
                    adjacent_same |= w[0].keyword() == w[1].keyword();
                    identical_consecutive |= w[0].main() == w[1].main();
                }
                let n = seq.len();
                once_middle |= seq.iter().enumerate().any(|(i, s)| i > 0 && i + 1 < n && is_once(s));
                no_hold |= !seq.iter().any(SeqFunc::is_hold);
            }
            PrefBody::AtEnd(_) => {}
        }
        for q in body_preds(p) {
            let (has_args, refs) = refs_var_or_agent(q);
            no_vars |= has_args && !refs;
        }
    }

    let mut nested = false;
    let mut identical_children = false;
    let mut redundant = false;
    let mut unnecessary = false;
    let mut repeated_vars = false;
    if let Some(s) = &g.setup {
        walk_setup(s, &mut |n| {
            nested |= same_op_nested_setup(n);
            if let Setup::And(cs) | Setup::Or(cs) = n {
                identical_children |= has_duplicates(cs.iter().map(|c| format!("{c:?}")));
            }
        });
    }
    let mut all_fns: Vec<&FunctionEval> = g.preferences.iter().flat_map(|d| measure_fns(d.preference())).collect();
    for r in root_preds(g) {
        all_fns.extend(fn_evals(r));
        walk_pred(r, &mut |n| {
            nested |= same_op_nested_pred(n);
            if let Pred::And(cs) | Pred::Or(cs) = n {
                identical_children |= has_duplicates(cs.iter().map(print_pred));
            }
            redundant |= is_redundant(n);
            unnecessary |= is_unnecessary(n);
            if let Pred::Atom { args, .. } = n {
                repeated_vars |= has_duplicates(args.iter().filter(|t| matches!(t, Term::Var(_))));
            }
        });
    }
    repeated_vars |= all_fns.iter().any(|f| has_duplicates(f.args.iter().filter(|t| matches!(t, Term::Var(_)))));
    let repeated_either = var_lists(g)
        .iter()
        .flat_map(|l| l.iter())
        .any(|d| matches!(&d.types, TypeSpec::Either(ts) if has_duplicates(ts.iter())));

    vec![
        ("adjacent_once_found", b(adjacent_once)),
        ("adjacent_same_modal_found", b(adjacent_same)),
        ("once_in_middle_of_pref_found", b(once_middle)),
        ("pref_without_hold_found", b(no_hold)),
        ("identical_consecutive_seq_func_predicates_found", b(identical_consecutive)),
        ("predicate_without_variables_or_agent", b(no_vars)),
        ("nested_logicals_found", b(nested)),
        ("identical_logical_children_found", b(identical_children)),
        ("redundant_expression_found", b(redundant)),
        ("unnecessary_expression_found", b(unnecessary)),
        ("repeated_variables_found", b(repeated_vars)),
        ("repeated_variable_type_in_either", b(repeated_either)),
    ]
}

// ---- scoring misuse ----

fn is_number(s: &Scoring, v: f64) -> bool {
    matches!(s, Scoring::Number(n) if n.value() == v)
}

fn is_constant(s: &Scoring) -> bool {
    match s {
        Scoring::Number(_) => true,
        Scoring::Eval(_) | Scoring::TotalTime | Scoring::TotalScore => false,
        other => other.children().into_iter().all(is_constant),
    }
}

fn mul0(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        a * b
    }
}

fn imul(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let p = [mul0(a.0, b.0), mul0(a.0, b.1), mul0(a.1, b.0), mul0(a.1, b.1)];
    (p.iter().copied().fold(f64::INFINITY, f64::min), p.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// Interval of values an expression can take, with counts in `[0, ∞)`.
pub(crate) fn range(s: &Scoring) -> (f64, f64) {
    const ANY: (f64, f64) = (f64::NEG_INFINITY, f64::INFINITY);
    match s {
        Scoring::Number(n) => (n.value(), n.value()),
        Scoring::Eval(_) | Scoring::TotalTime => (0.0, f64::INFINITY),
        Scoring::TotalScore => ANY,
        Scoring::ExternalMax(c) | Scoring::ExternalMin(c) => range(c),
        Scoring::Neg(c) => {
            let (lo, hi) = range(c);
            (-hi, -lo)
        }
        Scoring::Add(cs) => cs.iter().map(range).fold((0.0, 0.0), |a, r| (a.0 + r.0, a.1 + r.1)),
        Scoring::Mul(cs) => cs.iter().map(range).fold((1.0, 1.0), imul),
        Scoring::Sub(a, b) => {
            let (a, b) = (range(a), range(b));
            (a.0 - b.1, a.1 - b.0)
        }
        Scoring::Div(a, b) => {
            let (a, bb) = (range(a), range(b));
            if bb.0 <= 0.0 && bb.1 >= 0.0 {
                ANY
            } else {
                imul(a, (1.0 / bb.1, 1.0 / bb.0))
            }
        }
        Scoring::Compare { .. } => (0.0, 1.0),
    }
}

/// Is `lhs op rhs` decided by the value ranges alone?
fn decided(op: CompOp, a: (f64, f64), b: (f64, f64)) -> bool {
    let always = |x: (f64, f64), y: (f64, f64)| match op {
        CompOp::Lt => x.1 < y.0,
        CompOp::Le => x.1 <= y.0,
        CompOp::Gt => x.0 > y.1,
        CompOp::Ge => x.0 >= y.1,
        CompOp::Eq => x.0 == x.1 && y.0 == y.1 && x.0 == y.0,
    };
    let never = |x: (f64, f64), y: (f64, f64)| match op {
        CompOp::Lt => x.0 >= y.1,
        CompOp::Le => x.0 > y.1,
        CompOp::Gt => x.1 <= y.0,
        CompOp::Ge => x.1 < y.0,
        CompOp::Eq => x.1 < y.0 || y.1 < x.0,
    };
    always(a, b) || never(a, b)
}

fn with_pref_masked(s: &Scoring) -> String {
    let mut c = s.clone();
    mask(&mut c);
    print_scoring(&c)
}

fn mask(s: &mut Scoring) {
    match s {
        Scoring::Eval(e) => e.pref = "<pref>".into(),
        Scoring::ExternalMax(c) | Scoring::ExternalMin(c) | Scoring::Neg(c) => mask(c),
        Scoring::Add(cs) | Scoring::Mul(cs) | Scoring::Compare { args: cs, .. } => cs.iter_mut().for_each(mask),
        Scoring::Sub(a, b) | Scoring::Div(a, b) => {
            mask(a);
            mask(b);
        }
        Scoring::TotalTime | Scoring::TotalScore | Scoring::Number(_) => {}
    }
}

fn refs(s: &Scoring) -> BTreeSet<&str> {
    let mut out = BTreeSet::new();
    s.for_each_eval(&mut |e| {
        out.insert(e.pref.as_str());
    });
    out
}

/// For each referenced preference, the masked text of every maximal scoring
/// subtree that refers to it alone.
fn single_pref_subtrees<'a>(s: &'a Scoring, out: &mut BTreeMap<&'a str, Vec<String>>) {
    let r = refs(s);
    if r.len() == 1 {
        out.entry(r.into_iter().next().unwrap()).or_default().push(with_pref_masked(s));
        return;
    }
    for c in s.children() {
        single_pref_subtrees(c, out);
    }
}

pub(crate) fn scoring_misuse(g: &Game) -> Row {
    let mut identical = false;
    let mut redundant = false;
    let mut unnecessary = false;
    let mut two_numbers = false;
    for s in all_scoring(g) {
        match s {
            Scoring::Add(cs) | Scoring::Mul(cs) => {
                identical |= has_duplicates(cs.iter().map(print_scoring));
                two_numbers |= cs.len() >= 2 && cs.iter().all(|c| matches!(c, Scoring::Number(_)));
                redundant |= cs.len() == 1;
                redundant |= match s {
                    Scoring::Add(_) => cs.iter().any(|c| is_number(c, 0.0)),
                    _ => cs.iter().any(|c| is_number(c, 1.0)),
                };
            }
            Scoring::Sub(a, c) | Scoring::Div(a, c) => {
                identical |= a == c;
                two_numbers |= matches!((&**a, &**c), (Scoring::Number(_), Scoring::Number(_)));
                redundant |= match s {
                    Scoring::Sub(..) => is_number(c, 0.0),
                    _ => is_number(c, 1.0),
                };
            }
            Scoring::Neg(c) => redundant |= matches!(**c, Scoring::Neg(_)),
            Scoring::Compare { op, args } => {
                identical |= has_duplicates(args.iter().map(print_scoring));
                unnecessary |= args.iter().all(is_constant);
                unnecessary |= args.len() == 2 && decided(*op, range(&args[0]), range(&args[1]));
            }
            _ => {}
        }
    }
    if let Some(t) = &g.terminal {
        walk_terminal(t, &mut |n| match n {
            Terminal::And(cs) | Terminal::Or(cs) => {
                identical |= has_duplicates(cs.iter().map(|c| format!("{c:?}")));
                redundant |= cs.len() == 1;
            }
            Terminal::Not(c) => redundant |= matches!(**c, Terminal::Not(_)),
            Terminal::Compare { op, lhs, rhs } => {
                unnecessary |= is_constant(lhs);
                unnecessary |= decided(*op, range(lhs), (rhs.value(), rhs.value()));
            }
        });
    }
    let non_positive = range(&g.scoring).1 <= 0.0;
    let mut per_pref = BTreeMap::new();
    single_pref_subtrees(&g.scoring, &mut per_pref);
    let used_identically = per_pref.len() >= 2 && {
        let mut it = per_pref.values_mut().map(|v| {
            v.sort();
            v.clone()
        });
        let first = it.next().unwrap();
        it.all(|v| v == first)
    };
    vec![
        ("identical_scoring_children_found", b(identical)),
        ("redundant_scoring_terminal_expression_found", b(redundant)),
        ("unnecessary_scoring_terminal_expression_found", b(unnecessary)),
        ("total_score_non_positive", b(non_positive)),
        ("scoring_preferences_used_identically", b(used_identically)),
        ("two_number_operation_found", b(two_numbers)),
    ]
}

// ---- disjointness ----

/// Types and objects of a preference, each widened to its ancestors.
fn pref_types(d: &PrefDef) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for r in pref_refs(d) {
        let anc = vocab::ancestors(&r);
        if anc.is_empty() {
            out.insert(r);
        } else {
            out.extend(anc.into_iter().map(String::from));
        }
    }
    out.remove("game_object");
    out.remove("agent");
    out
}

fn pred_names(preds: &[&Pred]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for p in preds {
        walk_pred(p, &mut |n| match n {
            Pred::Atom { name, .. } => {
                out.insert(name.clone());
            }
            Pred::Compare { args, .. } => {
                for a in args {
                    if let FnArg::Function(f) = a {
                        out.insert(f.name.clone());
                    }
                }
            }
            _ => {}
        });
    }
    out
}

fn objects_and_vars(preds: &[&Pred]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for p in preds {
        p.for_each_term(&mut |t| match t {
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::Const(c) if is_object_const(c) => {
                out.insert(c.clone());
            }
            Term::Const(_) => {}
        });
    }
    out
}

/// Indices of non-empty sets that share nothing with any other set.
fn isolated(sets: &[BTreeSet<String>]) -> Vec<usize> {
    (0..sets.len())
        .filter(|&i| !sets[i].is_empty() && (0..sets.len()).all(|j| j == i || sets[i].is_disjoint(&sets[j])))
        .collect()
}

fn isolated_prop(sets: &[BTreeSet<String>]) -> f64 {
    if sets.len() < 2 {
        0.0
    } else {
        isolated(sets).len() as f64 / sets.len() as f64
    }
}

fn strip_quantifiers(p: &Pred) -> &Pred {
    match p {
        Pred::Exists(_, c) | Pred::Forall(_, c) => strip_quantifiers(c),
        other => other,
    }
}

pub(crate) fn disjointness(g: &Game) -> Row {
    let all_types: Vec<BTreeSet<String>> = g.preferences.iter().map(pref_types).collect();
    let disjoint_prefs = all_types.len() >= 2 && !isolated(&all_types).is_empty();

    let referenced: BTreeSet<&str> = g.pref_evals().iter().map(|e| e.pref.as_str()).collect();
    let used: Vec<&PrefDef> = g.preferences.iter().filter(|d| referenced.contains(d.name())).collect();
    let used_types: Vec<_> = used.iter().map(|d| pref_types(d)).collect();
    let used_preds: Vec<_> = used.iter().map(|d| pred_names(&body_preds(d.preference()))).collect();

    let mut seq_disjoint = false;
    let mut at_end_disjoint = false;
    let mut modal_disjoint = false;
    let (mut modals, mut isolated_modals) = (0usize, 0usize);
    for d in &g.preferences {
        match &d.preference().body {
            PrefBody::Then(seq) if seq.len() >= 2 => {
                let objs: Vec<_> = seq.iter().map(|s| objects_and_vars(&s.preds())).collect();
                seq_disjoint |= !isolated(&objs).is_empty();
                let preds: Vec<_> = seq.iter().map(|s| pred_names(&s.preds())).collect();
                let iso = isolated(&preds).len();
                modal_disjoint |= iso > 0;
                modals += seq.len();
                isolated_modals += iso;
            }
            PrefBody::AtEnd(p) => {
                if let Pred::And(cs) | Pred::Or(cs) = strip_quantifiers(p) {
                    if cs.len() >= 2 {
                        let objs: Vec<_> = cs.iter().map(|c| objects_and_vars(&[c])).collect();
                        at_end_disjoint |= !isolated(&objs).is_empty();
                    }
                }
            }
            PrefBody::Then(_) => {}
        }
    }
    vec![
        ("disjoint_preferences_found", b(disjoint_prefs)),
        ("disjoint_preferences_scoring_terminal_types", isolated_prop(&used_types)),
        ("disjoint_preferences_scoring_terminal_predicates", isolated_prop(&used_preds)),
        ("disjoint_seq_funcs_found", b(seq_disjoint)),
        ("disjoint_at_end_found", b(at_end_disjoint)),
        ("disjoint_modal_predicates_found", b(modal_disjoint)),
        ("disjoint_modal_predicates_prop", if modals == 0 { 0.0 } else { isolated_modals as f64 / modals as f64 }),
    ]
}

// ---- counting ----

pub const COUNTED_SECTIONS: [Section; 4] = [Section::Setup, Section::Constraints, Section::Terminal, Section::Scoring];

/// (node count, max depth below the section root) per counted section;
/// zeros for an absent section.
pub(crate) fn section_sizes(g: &Game) -> [(f64, f64); 4] {
    let ns = nodes::nodes(g);
    COUNTED_SECTIONS.map(|sec| {
        let in_sec: Vec<_> = ns.iter().filter(|n| n.section == sec).collect();
        let Some(top) = in_sec.iter().map(|n| n.depth).min() else {
            return (0.0, 0.0);
        };
        let deepest = in_sec.iter().map(|n| n.depth).max().unwrap_or(top);
        (in_sec.len() as f64, (deepest - top) as f64)
    })
}

// ---- forall over preferences ----

fn evals_with_context(g: &Game) -> Vec<(&PrefEval, bool)> {
    fn go<'a>(s: &'a Scoring, inside: bool, out: &mut Vec<(&'a PrefEval, bool)>) {
        match s {
            Scoring::Eval(e) => out.push((e, inside)),
            Scoring::ExternalMax(c) | Scoring::ExternalMin(c) => go(c, true, out),
            other => other.children().into_iter().for_each(|c| go(c, inside, out)),
        }
    }
    let mut out = Vec::new();
    if let Some(t) = &g.terminal {
        walk_terminal(t, &mut |n| {
            if let Terminal::Compare { lhs, .. } = n {
                go(lhs, false, &mut out);
            }
        });
    }
    go(&g.scoring, false, &mut out);
    out
}

fn qualifier_fits(q: &str, decl: &TypeSpec) -> bool {
    vocab::is_color(q) || decl.names().iter().any(|d| vocab::is_subtype(q, d) || vocab::is_subtype(d, q))
}

pub(crate) fn pref_forall(g: &Game) -> Row {
    let evals = evals_with_context(g);
    let externals = |name: &str| g.find_preference(name).and_then(PrefDef::external_vars).map(flatten_vars);

    let forall_prefs: Vec<&str> = g.preferences.iter().filter(|d| d.external_vars().is_some()).map(PrefDef::name).collect();
    let (used_ok, used_bad) = if forall_prefs.is_empty() {
        (false, false)
    } else {
        let ok = forall_prefs.iter().all(|p| {
            evals.iter().any(|(e, inside)| {
                e.pref == *p && (*inside || !e.types.is_empty() || e.mode == CountMode::OncePerExternalObjects)
            })
        });
        (ok, !ok)
    };

    let per_ext: Vec<&PrefEval> = evals.iter().map(|(e, _)| *e).filter(|e| e.mode == CountMode::OncePerExternalObjects).collect();
    let (ext_ok, ext_bad) = if per_ext.is_empty() {
        (false, false)
    } else {
        let ok = per_ext.iter().all(|e| externals(&e.pref).is_some());
        (ok, !ok)
    };

    let typed: Vec<&PrefEval> = evals.iter().map(|(e, _)| *e).filter(|e| !e.types.is_empty()).collect();
    let (arity_ok, arity_bad, types_ok, types_bad) = if typed.is_empty() {
        (false, false, false, false)
    } else {
        let arity = typed.iter().all(|e| externals(&e.pref).is_some_and(|x| e.types.len() <= x.len()));
        let types = typed.iter().all(|e| {
            externals(&e.pref).is_some_and(|x| e.types.len() <= x.len() && e.types.iter().zip(&x).all(|(q, (_, decl))| qualifier_fits(q, decl)))
        });
        (arity, !arity, types, !types)
    };
    vec![
        ("pref_forall_used_correct", b(used_ok)),
        ("pref_forall_used_incorrect", b(used_bad)),
        ("pref_forall_external_forall_used_correct", b(ext_ok)),
        ("pref_forall_external_forall_used_incorrect", b(ext_bad)),
        ("pref_forall_pref_forall_correct_arity_correct", b(arity_ok)),
        ("pref_forall_pref_forall_correct_arity_incorrect", b(arity_bad)),
        ("pref_forall_pref_forall_correct_types_correct", b(types_ok)),
        ("pref_forall_pref_forall_correct_types_incorrect", b(types_bad)),
    ]
}
