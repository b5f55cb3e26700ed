//! Rule-based rendering of a game into templated English.

use crate::dsl::ast::*;

fn t(x: &Term) -> &str {
    x.text()
}

fn atom(name: &str, args: &[Term]) -> String {
    let a = |i: usize| args.get(i).map(t).unwrap_or("?");
    match name {
        "agent_holds" => format!("the agent is holding {}", a(0)),
        "in_motion" => format!("{} is in motion", a(0)),
        "in" => format!("{} is inside of {}", a(1), a(0)),
        "on" => format!("{} is on {}", a(1), a(0)),
        "adjacent" => format!("{} is adjacent to {}", a(0), a(1)),
        "near" => format!("{} is near {}", a(0), a(1)),
        "touch" => format!("{} touches {}", a(0), a(1)),
        "above" => format!("{} is above {}", a(0), a(1)),
        "between" => format!("{} is between {} and {}", a(1), a(0), a(2)),
        "faces" => format!("{} is facing {}", a(0), a(1)),
        "opposite" => format!("{} is opposite {}", a(0), a(1)),
        "is_setup_object" => format!("{} is used in the setup", a(0)),
        "open" => format!("{} is open", a(0)),
        "broken" => format!("{} is broken", a(0)),
        "toggled_on" => format!("{} is toggled on", a(0)),
        "agent_crouches" => "the agent is crouching".into(),
        "game_start" => "it is the first state of the game".into(),
        "game_over" => "it is the last state of the game".into(),
        "same_color" => format!("{} is the same color as {}", a(0), a(1)),
        "same_type" => format!("{} is of the same type as {}", a(0), a(1)),
        "same_object" => format!("{} is the same object as {}", a(0), a(1)),
        "equal_x_position" => format!("{} and {} have the same x position", a(0), a(1)),
        "equal_z_position" => format!("{} and {} have the same z position", a(0), a(1)),
        "object_orientation" => format!("{} is oriented {}", a(0), a(1)),
        "rug_color_under" => format!("the rug under {} is {}", a(0), a(1)),
        _ => format!("{name}({})", args.iter().map(t).collect::<Vec<_>>().join(", ")),
    }
}

fn function(f: &FunctionEval) -> String {
    let a = |i: usize| f.args.get(i).map(t).unwrap_or("?");
    match f.name.as_str() {
        "distance" => format!("the distance between {} and {}", a(0), a(1)),
        "building_size" => format!("the number of objects in {}", a(0)),
        "x_position" => format!("the x position of {}", a(0)),
        _ => format!("the {} of {}", f.name.replace('_', " "), f.args.iter().map(t).collect::<Vec<_>>().join(" and ")),
    }
}

fn op_words(op: CompOp) -> &'static str {
    match op {
        CompOp::Lt => "less than",
        CompOp::Le => "at most",
        CompOp::Eq => "equal to",
        CompOp::Gt => "greater than",
        CompOp::Ge => "at least",
    }
}

fn var_phrase(v: &VariableList) -> String {
    let parts: Vec<String> = flatten_vars(v)
        .into_iter()
        .map(|(name, ty)| match ty {
            TypeSpec::Single(s) => format!("{name} of type {s}"),
            TypeSpec::Either(ts) => format!("{name} of type {}", ts.join(" or ")),
        })
        .collect();
    list(&parts, "and")
}

fn list(items: &[String], joiner: &str) -> String {
    match items.len() {
        0 => String::new(),
        1 => items[0].clone(),
        2 => format!("{} {joiner} {}", items[0], items[1]),
        n => format!("{}, {joiner} {}", items[..n - 1].join(", "), items[n - 1]),
    }
}

fn paren(p: &Pred) -> String {
    format!("({})", pred(p))
}

/// One predicate, without outer parentheses.
pub fn pred(p: &Pred) -> String {
    match p {
        Pred::Atom { name, args } => atom(name, args),
        Pred::And(cs) => list(&cs.iter().map(paren).collect::<Vec<_>>(), "and"),
        Pred::Or(cs) => format!("either {}", list(&cs.iter().map(paren).collect::<Vec<_>>(), "or")),
        Pred::Not(c) => match c.as_ref() {
            Pred::Atom { .. } | Pred::Compare { .. } => format!("it's not the case that {}", pred(c)),
            _ => format!("it's not the case that ({})", pred(c)),
        },
        Pred::Exists(v, c) => format!("there exists {}, such that ({})", var_phrase(v), pred(c)),
        Pred::Forall(v, c) => format!("for any {}, ({})", var_phrase(v), pred(c)),
        Pred::Compare { op, args } => {
            let side = |a: &FnArg| match a {
                FnArg::Function(f) => function(f),
                FnArg::Number(n) => n.0.clone(),
            };
            let parts: Vec<String> = args.iter().map(side).collect();
            match parts.as_slice() {
                [a, b] => format!("{a} is {} {b}", op_words(*op)),
                _ => format!("{} are all equal", list(&parts, "and")),
            }
        }
    }
}

/// Top-level condition: a conjunction keeps its parenthesized members,
/// anything else is wrapped once.
fn condition(p: &Pred) -> String {
    match p {
        Pred::And(_) => pred(p),
        _ => paren(p),
    }
}

pub fn seq_func(sf: &SeqFunc) -> String {
    match sf {
        SeqFunc::Once(p) => format!("there is a state where {}", condition(p)),
        SeqFunc::OnceMeasure(p, f) => format!("there is a state where {}, and in it we measure {}", condition(p), function(f)),
        SeqFunc::Hold(p) => format!("there is a sequence of one or more states where {}", condition(p)),
        SeqFunc::HoldWhile(p, rest) => {
            let during: Vec<String> = rest.iter().map(condition).collect();
            format!(
                "there is a sequence of one or more states where {}, during which there is a state where {}",
                condition(p),
                list(&during, "then a state where")
            )
        }
    }
}

fn ordinal(i: usize, n: usize) -> &'static str {
    if i == 0 {
        "first, "
    } else if i + 1 == n {
        "finally, "
    } else {
        "next, "
    }
}

pub fn preference(d: &PrefDef) -> String {
    let p = d.preference();
    let mut out = String::new();
    if let Some(ext) = d.external_vars() {
        out.push_str(&format!("This preference is counted separately for each {}.\n", var_phrase(ext)));
    }
    let vars = flatten_vars(&p.vars);
    if !vars.is_empty() {
        out.push_str("The variables required by this preference are:\n");
        for (name, ty) in vars {
            out.push_str(&format!("-{name} of type {}\n", ty.names().join(" or ")));
        }
    }
    if p.quantifier == Quantifier::Forall {
        out.push_str("The preference must hold for every such assignment.\n");
    }
    out.push_str("\nThis preference is satisfied when:\n");
    match &p.body {
        PrefBody::Then(seq) if seq.len() == 1 => out.push_str(&format!("- {}\n", seq_func(&seq[0]))),
        PrefBody::Then(seq) => {
            for (i, s) in seq.iter().enumerate() {
                out.push_str(&format!("- {}{}\n", ordinal(i, seq.len()), seq_func(s)));
            }
        }
        PrefBody::AtEnd(q) => out.push_str(&format!("- in the final game state, {}\n", condition(q))),
    }
    out
}

fn setup(s: &Setup) -> String {
    match s {
        Setup::And(cs) => list(&cs.iter().map(|c| format!("({})", setup(c))).collect::<Vec<_>>(), "and"),
        Setup::Or(cs) => format!("either {}", list(&cs.iter().map(|c| format!("({})", setup(c))).collect::<Vec<_>>(), "or")),
        Setup::Not(c) => format!("it's not the case that ({})", setup(c)),
        Setup::Exists(v, c) => format!("there exists {}, such that {}", var_phrase(v), setup(c)),
        Setup::Forall(v, c) => format!("for any {}, {}", var_phrase(v), setup(c)),
        Setup::Conserved(p) => format!("{} holds for every time step", condition(p)),
        Setup::Optional(p) => format!("{} holds at least once", condition(p)),
    }
}

fn count_phrase(e: &PrefEval) -> String {
    let name = &e.pref;
    let base = match e.mode {
        CountMode::Count => format!("the number of times '{name}' has been satisfied"),
        CountMode::Overlapping => format!("the number of times '{name}' has been satisfied, overlaps included"),
        CountMode::Once => format!("whether '{name}' has been satisfied at least once"),
        CountMode::OncePerObjects => format!("the number of times '{name}' has been satisfied with different objects"),
        CountMode::Measure => format!("the total of the measurements taken for '{name}'"),
        CountMode::UniquePositions => format!("the number of times '{name}' has been satisfied in different positions"),
        CountMode::SamePositions => format!("the largest number of satisfactions of '{name}' in the same position"),
        CountMode::OncePerExternalObjects => {
            format!("the number of times '{name}' has been satisfied with different external objects")
        }
    };
    if e.types.is_empty() {
        base
    } else {
        format!("{base} with objects of type {}", e.types.join(" or "))
    }
}

fn scoring(s: &Scoring) -> String {
    let wrap = |c: &Scoring| match c {
        Scoring::Number(_) | Scoring::TotalTime | Scoring::TotalScore | Scoring::Eval(_) => scoring(c),
        _ => format!("({})", scoring(c)),
    };
    match s {
        Scoring::ExternalMax(c) => format!("the maximum over all external objects of {}", wrap(c)),
        Scoring::ExternalMin(c) => format!("the minimum over all external objects of {}", wrap(c)),
        Scoring::Add(cs) => format!("the sum of {}", list(&cs.iter().map(wrap).collect::<Vec<_>>(), "and")),
        Scoring::Mul(cs) => cs.iter().map(wrap).collect::<Vec<_>>().join(" times "),
        Scoring::Sub(a, b) => format!("{} minus {}", wrap(a), wrap(b)),
        Scoring::Div(a, b) => format!("{} divided by {}", wrap(a), wrap(b)),
        Scoring::Neg(c) => format!("negative {}", wrap(c)),
        Scoring::TotalTime => "the total time of the game".into(),
        Scoring::TotalScore => "the total score".into(),
        Scoring::Compare { op, args } => match args.as_slice() {
            [a, b] => format!("1 if {} is {} {}, otherwise 0", wrap(a), op_words(*op), wrap(b)),
            _ => format!("1 if {} are all equal, otherwise 0", list(&args.iter().map(wrap).collect::<Vec<_>>(), "and")),
        },
        Scoring::Eval(e) => count_phrase(e),
        Scoring::Number(n) => n.0.clone(),
    }
}

fn terminal(t: &Terminal) -> String {
    match t {
        Terminal::And(cs) => list(&cs.iter().map(|c| format!("({})", terminal(c))).collect::<Vec<_>>(), "and"),
        Terminal::Or(cs) => format!("either {}", list(&cs.iter().map(|c| format!("({})", terminal(c))).collect::<Vec<_>>(), "or")),
        Terminal::Not(c) => format!("it's not the case that ({})", terminal(c)),
        Terminal::Compare { op, lhs, rhs } => format!("{} is {} {}", scoring(lhs), op_words(*op), rhs.0),
    }
}

/// Templated description of a whole game, section by section.
pub fn describe(g: &Game) -> String {
    let mut out = String::new();
    if let Some(s) = &g.setup {
        out.push_str(&format!("The setup of the game requires that {}.\n\n", setup(s)));
    }
    out.push_str("The preferences of the game are:\n");
    for (i, d) in g.preferences.iter().enumerate() {
        out.push_str(&format!("\n-----Preference {}-----\n", i + 1));
        out.push_str(&preference(d));
    }
    if let Some(t) = &g.terminal {
        out.push_str(&format!("\nThe game ends when {}.\n", terminal(t)));
    }
    out.push_str(&format!("\nAt the end of the game, the score is {}.\n", scoring(&g.scoring)));
    out
}
