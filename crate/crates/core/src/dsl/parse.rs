//! Reader for the goal DSL: a small s-expression lexer followed by a
//! grammar-directed conversion into the syntax tree.

use std::fmt;

use super::ast::*;
use super::vocab::{self, VarClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("{pos}: expected {expected}, found {found}")]
    Syntax { pos: Pos, expected: String, found: String },
    #[error("{pos}: `{name}` takes {expected} argument(s), found {found}")]
    Arity { pos: Pos, name: String, expected: String, found: usize },
    #[error("{pos}: unknown {what} `{name}`")]
    Unknown { pos: Pos, what: &'static str, name: String },
}

#[derive(Debug, Clone)]
enum Sexp {
    Atom(String, Pos),
    List(Vec<Sexp>, Pos),
}

impl Sexp {
    fn pos(&self) -> Pos {
        match self {
            Sexp::Atom(_, p) | Sexp::List(_, p) => *p,
        }
    }

    fn describe(&self) -> String {
        match self {
            Sexp::Atom(a, _) => format!("`{a}`"),
            Sexp::List(items, _) => match items.first() {
                Some(Sexp::Atom(h, _)) => format!("`({h} ...)`"),
                _ => "a list".to_string(),
            },
        }
    }

    fn head(&self) -> Option<&str> {
        match self {
            Sexp::List(items, _) => match items.first() {
                Some(Sexp::Atom(h, _)) => Some(h),
                _ => None,
            },
            Sexp::Atom(..) => None,
        }
    }
}

fn syntax(pos: Pos, expected: impl Into<String>, found: impl Into<String>) -> ParseError {
    ParseError::Syntax { pos, expected: expected.into(), found: found.into() }
}

fn read_all(text: &str) -> Result<Vec<Sexp>, ParseError> {
    let mut stack: Vec<(Vec<Sexp>, Pos)> = Vec::new();
    let mut top = Vec::new();
    let mut line = 1;
    let mut col = 1;
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        let pos = Pos { line, col };
        match c {
            ';' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                    col += 1;
                }
                continue;
            }
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
                continue;
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
                continue;
            }
            '(' => {
                chars.next();
                col += 1;
                stack.push((Vec::new(), pos));
            }
            ')' => {
                chars.next();
                col += 1;
                let (items, open) = stack.pop().ok_or_else(|| syntax(pos, "an expression", "`)`"))?;
                let list = Sexp::List(items, open);
                match stack.last_mut() {
                    Some((parent, _)) => parent.push(list),
                    None => top.push(list),
                }
            }
            _ => {
                let mut atom = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                        break;
                    }
                    atom.push(c);
                    chars.next();
                    col += 1;
                }
                let node = Sexp::Atom(atom, pos);
                match stack.last_mut() {
                    Some((parent, _)) => parent.push(node),
                    None => top.push(node),
                }
            }
        }
    }
    if let Some((_, open)) = stack.pop() {
        return Err(syntax(Pos { line, col }, "`)` closing the list opened at ".to_string() + &open.to_string(), "end of input"));
    }
    Ok(top)
}

/// Parses a document holding exactly one game.
pub fn parse_game(text: &str) -> Result<Game, ParseError> {
    let mut games = parse_games(text)?;
    match games.len() {
        1 => Ok(games.pop().unwrap()),
        0 => Err(syntax(Pos { line: 1, col: 1 }, "`(define (game ...) ...)`", "end of input")),
        _ => Err(syntax(Pos { line: 1, col: 1 }, "a single game", format!("{} games", games.len()))),
    }
}

/// Parses a document holding any number of whitespace-separated games.
pub fn parse_games(text: &str) -> Result<Vec<Game>, ParseError> {
    read_all(text)?.iter().map(game).collect()
}

/// Parses a standalone preference definition such as the exemplars of the
/// behavioral characteristics.
pub fn parse_pref_def(text: &str) -> Result<PrefDef, ParseError> {
    let items = read_all(text)?;
    match items.as_slice() {
        [one] => pref_def(one),
        _ => Err(syntax(Pos { line: 1, col: 1 }, "a single preference", format!("{} expressions", items.len()))),
    }
}

pub fn parse_pred(text: &str) -> Result<Pred, ParseError> {
    let items = read_all(text)?;
    match items.as_slice() {
        [one] => pred(one),
        _ => Err(syntax(Pos { line: 1, col: 1 }, "a single predicate", format!("{} expressions", items.len()))),
    }
}

pub fn parse_scoring(text: &str) -> Result<Scoring, ParseError> {
    let items = read_all(text)?;
    match items.as_slice() {
        [one] => scoring(one),
        _ => Err(syntax(Pos { line: 1, col: 1 }, "a single scoring expression", format!("{} expressions", items.len()))),
    }
}

fn list<'a>(s: &'a Sexp, expected: &str) -> Result<(&'a [Sexp], Pos), ParseError> {
    match s {
        Sexp::List(items, p) => Ok((items, *p)),
        Sexp::Atom(..) => Err(syntax(s.pos(), expected, s.describe())),
    }
}

fn atom<'a>(s: &'a Sexp, expected: &str) -> Result<&'a str, ParseError> {
    match s {
        Sexp::Atom(a, _) => Ok(a),
        Sexp::List(..) => Err(syntax(s.pos(), expected, s.describe())),
    }
}

fn keyword(s: &Sexp, kw: &str) -> Result<(), ParseError> {
    match s {
        Sexp::Atom(a, _) if a == kw => Ok(()),
        _ => Err(syntax(s.pos(), format!("`{kw}`"), s.describe())),
    }
}

fn arity(items: &[Sexp], pos: Pos, name: &str, min: usize, max: Option<usize>) -> Result<(), ParseError> {
    let n = items.len() - 1;
    let ok = n >= min && max.is_none_or(|m| n <= m);
    if ok {
        return Ok(());
    }
    let expected = match max {
        Some(m) if m == min => format!("{min}"),
        Some(m) => format!("{min} to {m}"),
        None => format!("at least {min}"),
    };
    Err(ParseError::Arity { pos, name: name.to_string(), expected, found: n })
}

fn is_id(s: &str) -> bool {
    s.len() >= 2
        && s.chars().next().is_some_and(|c| c.is_ascii_lowercase() || c.is_ascii_digit())
        && s.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-')
}

fn is_name(s: &str) -> bool {
    s.len() >= 2
        && s.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn game(s: &Sexp) -> Result<Game, ParseError> {
    let (items, pos) = list(s, "`(define (game ...) ...)`")?;
    if items.is_empty() {
        return Err(syntax(pos, "`define`", "`()`"));
    }
    keyword(&items[0], "define")?;
    let header = items.get(1).ok_or_else(|| syntax(pos, "`(game <id>)`", "`)`"))?;
    let (h, hpos) = list(header, "`(game <id>)`")?;
    if h.len() != 2 {
        return Err(syntax(hpos, "`(game <id>)`", header.describe()));
    }
    keyword(&h[0], "game")?;
    let name = atom(&h[1], "a game id")?;
    if !is_id(name) {
        return Err(syntax(h[1].pos(), "a game id", format!("`{name}`")));
    }

    let mut sections = items[2..].iter().peekable();
    let mut section = |kw: &'static str, required: bool| -> Result<Option<&Sexp>, ParseError> {
        match sections.peek() {
            Some(s) if s.head() == Some(kw) => {
                let s = sections.next().unwrap();
                let (inner, p) = list(s, kw)?;
                if inner.len() != 2 {
                    return Err(ParseError::Arity { pos: p, name: kw.to_string(), expected: "1".into(), found: inner.len() - 1 });
                }
                Ok(Some(&inner[1]))
            }
            Some(s) if required => Err(syntax(s.pos(), format!("`({kw} ...)`"), s.describe())),
            None if required => Err(syntax(pos, format!("`({kw} ...)`"), "`)`")),
            _ => Ok(None),
        }
    };

    let domain_s = section(":domain", true)?.unwrap();
    let domain = atom(domain_s, "a domain id")?;
    if !is_id(domain) {
        return Err(syntax(domain_s.pos(), "a domain id", format!("`{domain}`")));
    }
    let setup_s = section(":setup", false)?;
    let constraints_s = section(":constraints", true)?.unwrap();
    let terminal_s = section(":terminal", false)?;
    let scoring_s = section(":scoring", true)?.unwrap();
    if let Some(extra) = sections.next() {
        return Err(syntax(extra.pos(), "`)` after the scoring section", extra.describe()));
    }

    Ok(Game {
        name: name.to_string(),
        domain: domain.to_string(),
        setup: setup_s.map(setup).transpose()?,
        preferences: constraints(constraints_s)?,
        terminal: terminal_s.map(terminal).transpose()?,
        scoring: scoring(scoring_s)?,
    })
}

fn setup(s: &Sexp) -> Result<Setup, ParseError> {
    const EXPECTED: &str = "one of `and`, `or`, `not`, `exists`, `forall`, `game-conserved`, `game-optional`";
    let (items, pos) = list(s, "a setup expression")?;
    let head = s.head().ok_or_else(|| syntax(pos, EXPECTED, s.describe()))?;
    match head {
        "and" | "or" => {
            arity(items, pos, head, 2, None)?;
            let children = items[1..].iter().map(setup).collect::<Result<_, _>>()?;
            Ok(if head == "and" { Setup::And(children) } else { Setup::Or(children) })
        }
        "not" => {
            arity(items, pos, head, 1, Some(1))?;
            Ok(Setup::Not(Box::new(setup(&items[1])?)))
        }
        "exists" | "forall" => {
            arity(items, pos, head, 2, Some(2))?;
            let vars = variable_list(&items[1])?;
            let body = Box::new(setup(&items[2])?);
            Ok(if head == "exists" { Setup::Exists(vars, body) } else { Setup::Forall(vars, body) })
        }
        "game-conserved" | "game-optional" => {
            arity(items, pos, head, 1, Some(1))?;
            let p = pred(&items[1])?;
            Ok(if head == "game-conserved" { Setup::Conserved(p) } else { Setup::Optional(p) })
        }
        _ => Err(syntax(items[0].pos(), EXPECTED, format!("`{head}`"))),
    }
}

fn constraints(s: &Sexp) -> Result<Vec<PrefDef>, ParseError> {
    let (items, pos) = list(s, "preference definitions")?;
    if s.head() == Some("and") {
        arity(items, pos, "and", 1, None)?;
        items[1..].iter().map(pref_def).collect()
    } else {
        Ok(vec![pref_def(s)?])
    }
}

fn pref_def(s: &Sexp) -> Result<PrefDef, ParseError> {
    let (items, pos) = list(s, "`(preference ...)` or `(forall ...)`")?;
    match s.head() {
        Some("forall") => {
            arity(items, pos, "forall", 2, Some(2))?;
            Ok(PrefDef::Forall(variable_list(&items[1])?, preference(&items[2])?))
        }
        Some("preference") => Ok(PrefDef::Single(preference(s)?)),
        _ => Err(syntax(pos, "`(preference ...)` or `(forall ...)`", s.describe())),
    }
}

fn preference(s: &Sexp) -> Result<Preference, ParseError> {
    let (items, pos) = list(s, "`(preference ...)`")?;
    keyword(items.first().ok_or_else(|| syntax(pos, "`preference`", "`()`"))?, "preference")?;
    arity(items, pos, "preference", 2, Some(2))?;
    let name = atom(&items[1], "a preference name")?;
    if !is_name(name) {
        return Err(syntax(items[1].pos(), "a preference name", format!("`{name}`")));
    }
    let q = &items[2];
    let (qitems, qpos) = list(q, "a preference body")?;
    let (quantifier, vars, body_s) = match q.head() {
        Some("exists") | Some("forall") => {
            let head = q.head().unwrap();
            arity(qitems, qpos, head, 2, Some(2))?;
            let quant = if head == "exists" { Quantifier::Exists } else { Quantifier::Forall };
            (quant, variable_list(&qitems[1])?, &qitems[2])
        }
        _ => (Quantifier::None, Vec::new(), q),
    };
    Ok(Preference { name: name.to_string(), quantifier, vars, body: pref_body(body_s)? })
}

fn pref_body(s: &Sexp) -> Result<PrefBody, ParseError> {
    const EXPECTED: &str = "`(then ...)` or `(at-end ...)`";
    let (items, pos) = list(s, EXPECTED)?;
    match s.head() {
        Some("then") => {
            if items.len() < 3 {
                return Err(syntax(
                    items.last().map(Sexp::pos).unwrap_or(pos),
                    "at least two sequence functions under `then`",
                    format!("{}", items.len() - 1),
                ));
            }
            Ok(PrefBody::Then(items[1..].iter().map(seq_func).collect::<Result<_, _>>()?))
        }
        Some("at-end") => {
            arity(items, pos, "at-end", 1, Some(1))?;
            Ok(PrefBody::AtEnd(pred(&items[1])?))
        }
        _ => Err(syntax(pos, EXPECTED, s.describe())),
    }
}

fn seq_func(s: &Sexp) -> Result<SeqFunc, ParseError> {
    const EXPECTED: &str = "one of `once`, `once-measure`, `hold`, `hold-while`";
    let (items, pos) = list(s, EXPECTED)?;
    match s.head() {
        Some("once") => {
            arity(items, pos, "once", 1, Some(2))?;
            let p = pred(&items[1])?;
            match items.get(2) {
                Some(f) => Ok(SeqFunc::OnceMeasure(p, function_eval(f)?)),
                None => Ok(SeqFunc::Once(p)),
            }
        }
        Some("once-measure") => {
            arity(items, pos, "once-measure", 2, Some(2))?;
            Ok(SeqFunc::OnceMeasure(pred(&items[1])?, function_eval(&items[2])?))
        }
        Some("hold") => {
            arity(items, pos, "hold", 1, Some(1))?;
            Ok(SeqFunc::Hold(pred(&items[1])?))
        }
        Some("hold-while") => {
            arity(items, pos, "hold-while", 2, None)?;
            let main = pred(&items[1])?;
            let rest = items[2..].iter().map(pred).collect::<Result<_, _>>()?;
            Ok(SeqFunc::HoldWhile(main, rest))
        }
        _ => Err(syntax(pos, EXPECTED, s.describe())),
    }
}

fn pred(s: &Sexp) -> Result<Pred, ParseError> {
    let (items, pos) = list(s, "a predicate expression")?;
    let head = s.head().ok_or_else(|| syntax(pos, "a predicate or logical operator", s.describe()))?;
    match head {
        "and" | "or" => {
            arity(items, pos, head, 1, None)?;
            let children = items[1..].iter().map(pred).collect::<Result<_, _>>()?;
            Ok(if head == "and" { Pred::And(children) } else { Pred::Or(children) })
        }
        "not" => {
            arity(items, pos, head, 1, Some(1))?;
            Ok(Pred::Not(Box::new(pred(&items[1])?)))
        }
        "exists" | "forall" => {
            arity(items, pos, head, 2, Some(2))?;
            let vars = variable_list(&items[1])?;
            let body = Box::new(pred(&items[2])?);
            Ok(if head == "exists" { Pred::Exists(vars, body) } else { Pred::Forall(vars, body) })
        }
        _ => {
            if let Some(op) = CompOp::from_symbol(head) {
                if op == CompOp::Eq {
                    arity(items, pos, head, 1, None)?;
                } else {
                    arity(items, pos, head, 2, Some(2))?;
                }
                let args = items[1..].iter().map(fn_arg).collect::<Result<_, _>>()?;
                return Ok(Pred::Compare { op, args });
            }
            let sig = vocab::predicate(head)
                .ok_or_else(|| ParseError::Unknown { pos: items[0].pos(), what: "predicate", name: head.to_string() })?;
            let n = items.len() - 1;
            if !sig.accepts_arity(n) {
                let expected = sig.arities().iter().map(|a| a.to_string()).collect::<Vec<_>>().join(" or ");
                return Err(ParseError::Arity { pos, name: head.to_string(), expected, found: n });
            }
            let args = items[1..].iter().map(term).collect::<Result<_, _>>()?;
            Ok(Pred::Atom { name: head.to_string(), args })
        }
    }
}

fn fn_arg(s: &Sexp) -> Result<FnArg, ParseError> {
    match s {
        Sexp::Atom(a, p) => {
            if Number::is_valid(a) {
                Ok(FnArg::Number(Number::new(a)))
            } else {
                Err(syntax(*p, "a number or function evaluation", format!("`{a}`")))
            }
        }
        Sexp::List(..) => Ok(FnArg::Function(function_eval(s)?)),
    }
}

fn function_eval(s: &Sexp) -> Result<FunctionEval, ParseError> {
    let (items, pos) = list(s, "a function evaluation")?;
    let head = s.head().ok_or_else(|| syntax(pos, "a function name", s.describe()))?;
    let sig = vocab::function(head)
        .ok_or_else(|| ParseError::Unknown { pos: items[0].pos(), what: "function", name: head.to_string() })?;
    let n = items.len() - 1;
    if !sig.accepts_arity(n) {
        let expected = sig.arities().iter().map(|a| a.to_string()).collect::<Vec<_>>().join(" or ");
        return Err(ParseError::Arity { pos, name: head.to_string(), expected, found: n });
    }
    let args = items[1..].iter().map(term).collect::<Result<_, _>>()?;
    Ok(FunctionEval { name: head.to_string(), args })
}

fn term(s: &Sexp) -> Result<Term, ParseError> {
    let a = atom(s, "a variable or object name")?;
    if a.starts_with('?') {
        if VarClass::of_variable(a).is_none() {
            return Err(syntax(s.pos(), "a variable such as `?b`, `?x`, `?y1`, `?z`", format!("`{a}`")));
        }
        Ok(Term::Var(a.to_string()))
    } else if vocab::is_known_constant(a) {
        Ok(Term::Const(a.to_string()))
    } else {
        Err(ParseError::Unknown { pos: s.pos(), what: "object name", name: a.to_string() })
    }
}

fn variable_list(s: &Sexp) -> Result<VariableList, ParseError> {
    let (items, pos) = list(s, "a variable list")?;
    if items.is_empty() {
        return Err(syntax(pos, "at least one variable definition", "`()`"));
    }
    let mut defs = Vec::new();
    let mut pending: Vec<(String, Pos)> = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let it = &items[i];
        match it {
            Sexp::Atom(a, p) if a == "-" => {
                if pending.is_empty() {
                    return Err(syntax(*p, "a variable before `-`", "`-`"));
                }
                let ty = items.get(i + 1).ok_or_else(|| syntax(*p, "a type after `-`", "`)`"))?;
                let class = VarClass::of_variable(&pending[0].0).unwrap();
                for (v, vp) in &pending {
                    if VarClass::of_variable(v) != Some(class) {
                        return Err(syntax(*vp, format!("a {} variable in the same definition", class.label()), format!("`{v}`")));
                    }
                }
                let types = type_spec(ty, class)?;
                defs.push(VarDef { vars: pending.drain(..).map(|(v, _)| v).collect(), types });
                i += 2;
            }
            Sexp::Atom(a, p) if a.starts_with('?') => {
                if VarClass::of_variable(a).is_none() {
                    return Err(syntax(*p, "a variable", format!("`{a}`")));
                }
                pending.push((a.clone(), *p));
                i += 1;
            }
            other => return Err(syntax(other.pos(), "a variable or `-`", other.describe())),
        }
    }
    if let Some((v, p)) = pending.first() {
        return Err(syntax(*p, format!("`- <type>` after `{v}`"), "`)`"));
    }
    Ok(defs)
}

fn type_spec(s: &Sexp, class: VarClass) -> Result<TypeSpec, ParseError> {
    let check = |name: &str, p: Pos, in_either: bool| -> Result<(), ParseError> {
        let ok = match class {
            VarClass::Object => vocab::is_object_type(name),
            VarClass::Color => if in_either { vocab::is_color(name) } else { name == "color" },
            VarClass::Orientation => if in_either { vocab::is_orientation(name) } else { name == "orientation" },
            VarClass::Side => if in_either { vocab::is_side(name) } else { name == "side" },
        };
        if ok {
            Ok(())
        } else {
            Err(ParseError::Unknown { pos: p, what: class_type_label(class, in_either), name: name.to_string() })
        }
    };
    match s {
        Sexp::Atom(a, p) => {
            check(a, *p, false)?;
            Ok(TypeSpec::Single(a.clone()))
        }
        Sexp::List(items, p) => {
            if s.head() != Some("either") {
                return Err(syntax(*p, "a type name or `(either ...)`", s.describe()));
            }
            arity(items, *p, "either", 1, None)?;
            let mut names = Vec::new();
            for it in &items[1..] {
                let name = atom(it, "a type name")?;
                check(name, it.pos(), true)?;
                names.push(name.to_string());
            }
            Ok(TypeSpec::Either(names))
        }
    }
}

fn class_type_label(class: VarClass, in_either: bool) -> &'static str {
    match (class, in_either) {
        (VarClass::Object, _) => "object type",
        (VarClass::Color, false) => "color type (expected `color`)",
        (VarClass::Color, true) => "color",
        (VarClass::Orientation, false) => "orientation type (expected `orientation`)",
        (VarClass::Orientation, true) => "orientation",
        (VarClass::Side, false) => "side type (expected `side`)",
        (VarClass::Side, true) => "side",
    }
}

fn terminal(s: &Sexp) -> Result<Terminal, ParseError> {
    let (items, pos) = list(s, "a terminal condition")?;
    let head = s.head().ok_or_else(|| syntax(pos, "a terminal condition", s.describe()))?;
    match head {
        "and" | "or" => {
            arity(items, pos, head, 1, None)?;
            let children = items[1..].iter().map(terminal).collect::<Result<_, _>>()?;
            Ok(if head == "and" { Terminal::And(children) } else { Terminal::Or(children) })
        }
        "not" => {
            arity(items, pos, head, 1, Some(1))?;
            Ok(Terminal::Not(Box::new(terminal(&items[1])?)))
        }
        _ => {
            let op = CompOp::from_symbol(head).ok_or_else(|| {
                syntax(items[0].pos(), "one of `and`, `or`, `not`, `<`, `<=`, `=`, `>`, `>=`", format!("`{head}`"))
            })?;
            arity(items, pos, head, 2, Some(2))?;
            let lhs = scoring(&items[1])?;
            let rhs = match &items[2] {
                Sexp::Atom(a, _) if Number::is_valid(a) => Number::new(a),
                other => return Err(syntax(other.pos(), "a number", other.describe())),
            };
            Ok(Terminal::Compare { op, lhs, rhs })
        }
    }
}

fn scoring(s: &Sexp) -> Result<Scoring, ParseError> {
    let (items, pos) = match s {
        Sexp::Atom(a, p) => {
            return if Number::is_valid(a) {
                Ok(Scoring::Number(Number::new(a)))
            } else {
                Err(syntax(*p, "a number or scoring expression", format!("`{a}`")))
            };
        }
        Sexp::List(items, p) => (items.as_slice(), *p),
    };
    let head = s.head().ok_or_else(|| syntax(pos, "a scoring expression", s.describe()))?;
    let children = |from: usize| -> Result<Vec<Scoring>, ParseError> { items[from..].iter().map(scoring).collect() };
    match head {
        "external-forall-maximize" | "external-forall-minimize" => {
            arity(items, pos, head, 1, Some(1))?;
            let inner = Box::new(scoring(&items[1])?);
            Ok(if head.ends_with("maximize") { Scoring::ExternalMax(inner) } else { Scoring::ExternalMin(inner) })
        }
        "+" | "*" => {
            arity(items, pos, head, 1, None)?;
            Ok(if head == "+" { Scoring::Add(children(1)?) } else { Scoring::Mul(children(1)?) })
        }
        "-" => {
            arity(items, pos, head, 1, Some(2))?;
            let mut cs = children(1)?;
            if cs.len() == 1 {
                Ok(Scoring::Neg(Box::new(cs.pop().unwrap())))
            } else {
                let b = cs.pop().unwrap();
                let a = cs.pop().unwrap();
                Ok(Scoring::Sub(Box::new(a), Box::new(b)))
            }
        }
        "/" => {
            arity(items, pos, head, 2, Some(2))?;
            let mut cs = children(1)?;
            let b = cs.pop().unwrap();
            let a = cs.pop().unwrap();
            Ok(Scoring::Div(Box::new(a), Box::new(b)))
        }
        "total-time" => {
            arity(items, pos, head, 0, Some(0))?;
            Ok(Scoring::TotalTime)
        }
        "total-score" => {
            arity(items, pos, head, 0, Some(0))?;
            Ok(Scoring::TotalScore)
        }
        _ => {
            if let Some(op) = CompOp::from_symbol(head) {
                if op == CompOp::Eq {
                    arity(items, pos, head, 1, None)?;
                } else {
                    arity(items, pos, head, 2, Some(2))?;
                }
                return Ok(Scoring::Compare { op, args: children(1)? });
            }
            if let Some(mode) = CountMode::from_keyword(head) {
                arity(items, pos, head, 1, Some(1))?;
                let spec = atom(&items[1], "a preference name")?;
                let mut parts = spec.split(':');
                let pref = parts.next().unwrap_or_default();
                if !is_name(pref) {
                    return Err(syntax(items[1].pos(), "a preference name", format!("`{spec}`")));
                }
                let mut types = Vec::new();
                for t in parts {
                    if !vocab::is_object_type(t) && !vocab::is_color(t) {
                        return Err(ParseError::Unknown { pos: items[1].pos(), what: "type", name: t.to_string() });
                    }
                    types.push(t.to_string());
                }
                return Ok(Scoring::Eval(PrefEval { mode, pref: pref.to_string(), types }));
            }
            Err(syntax(items[0].pos(), "a scoring operator or count mode", format!("`{head}`")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const THROW: &str = "(define (game t-1) (:domain few-objects-room-v1)
        (:constraints (and
          (preference throwAttempt
            (exists (?b - dodgeball)
              (then
                (once (agent_holds ?b)) ; picked up
                (hold (and (not (agent_holds ?b)) (in_motion ?b)))
                (once (not (in_motion ?b))))))))
        (:scoring (count throwAttempt)))";

    #[test]
    fn parses_minimal_game() {
        let g = parse_game(THROW).unwrap();
        assert_eq!(g.name, "t-1");
        assert_eq!(g.preferences.len(), 1);
        match &g.preferences[0].preference().body {
            PrefBody::Then(sfs) => {
                assert!(matches!(sfs.as_slice(), [SeqFunc::Once(_), SeqFunc::Hold(_), SeqFunc::Once(_)]));
            }
            _ => panic!("expected then"),
        }
    }

    #[test]
    fn single_seq_func_is_rejected() {
        let text = THROW.replace(
            "(once (agent_holds ?b)) ; picked up\n                (hold (and (not (agent_holds ?b)) (in_motion ?b)))\n                (once (not (in_motion ?b)))",
            "(once (agent_holds ?b))",
        );
        let err = parse_game(&text).unwrap_err();
        assert!(matches!(err, ParseError::Syntax { .. }), "{err}");
    }

    #[test]
    fn reports_position_and_expectation() {
        let err = parse_game("(define (game x1) (:domain d1) (:constraints (preference p1 (then (once (flies ?b)) (once (agent_holds ?b))))) (:scoring 1))").unwrap_err();
        match err {
            ParseError::Unknown { pos, what, name } => {
                assert_eq!(what, "predicate");
                assert_eq!(name, "flies");
                assert_eq!(pos.line, 1);
            }
            other => panic!("{other}"),
        }
        let err = parse_pred("(agent_holds ?a ?b)").unwrap_err();
        assert!(matches!(err, ParseError::Arity { found: 2, .. }));
        let err = parse_game("(define (game x1) (:domain d1) (:scoring 1))").unwrap_err();
        assert!(err.to_string().contains(":constraints"), "{err}");
    }

    #[test]
    fn variable_classes_are_checked() {
        assert!(parse_pred("(exists (?x - color) (rug_color_under ?b ?x))").is_ok());
        assert!(parse_pred("(exists (?x - dodgeball) (agent_holds ?x))").is_err());
        assert!(parse_pred("(exists (?b - color) (agent_holds ?b))").is_err());
        assert!(parse_pred("(exists (?x - (either red blue)) (same_color ?b ?x))").is_ok());
        assert!(parse_pred("(exists (?b ?x - ball) (agent_holds ?b))").is_err());
    }

    #[test]
    fn scoring_forms() {
        let s = parse_scoring("(- (* 0.4 (count p1:dodgeball)) 2)").unwrap();
        match s {
            Scoring::Sub(a, _) => match *a {
                Scoring::Mul(cs) => {
                    assert_eq!(cs[0], Scoring::Number(Number::new("0.4")));
                    assert_eq!(
                        cs[1],
                        Scoring::Eval(PrefEval { mode: CountMode::Count, pref: "p1".into(), types: vec!["dodgeball".into()] })
                    );
                }
                other => panic!("{other:?}"),
            },
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_scoring("(- 3)").unwrap(), Scoring::Neg(_)));
    }

    #[test]
    fn unbalanced_input() {
        assert!(parse_games("(define (game a1)").is_err());
        assert!(parse_games(")").is_err());
    }
}
