//! Parser for the typed STRIPS fragment with equality and constants.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use super::{ActionDef, Atom, Domain, PredicateDecl, Problem, Term, SUPPORTED_REQUIREMENTS};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.msg)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Pos {
    line: usize,
    col: usize,
}

#[derive(Clone, Debug)]
enum Sx {
    Sym(String, Pos),
    List(Vec<Sx>, Pos),
}

impl Sx {
    fn pos(&self) -> Pos {
        match self {
            Sx::Sym(_, p) | Sx::List(_, p) => *p,
        }
    }

    fn sym(&self) -> Option<&str> {
        match self {
            Sx::Sym(s, _) => Some(s),
            Sx::List(..) => None,
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        self.sym().is_some_and(|s| s.eq_ignore_ascii_case(kw))
    }
}

fn err<T>(p: Pos, msg: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError { line: p.line, col: p.col, msg: msg.into() })
}

fn read(text: &str) -> Result<Vec<Sx>, ParseError> {
    let mut stack: Vec<(Vec<Sx>, Pos)> = alloc::vec![(Vec::new(), Pos { line: 1, col: 1 })];
    let mut chars = text.chars().peekable();
    let (mut line, mut col) = (1, 1);
    while let Some(&c) = chars.peek() {
        let here = Pos { line, col };
        match c {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
                continue;
            }
            ';' => {
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                }
                continue;
            }
            '(' => stack.push((Vec::new(), here)),
            ')' => {
                if stack.len() == 1 {
                    return err(here, "unbalanced ')'");
                }
                if let Some((items, p)) = stack.pop() {
                    if let Some(top) = stack.last_mut() {
                        top.0.push(Sx::List(items, p));
                    }
                }
            }
            c if c.is_whitespace() => {}
            _ => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                        break;
                    }
                    s.push(c);
                    chars.next();
                    col += 1;
                }
                if let Some(top) = stack.last_mut() {
                    top.0.push(Sx::Sym(s, here));
                }
                continue;
            }
        }
        chars.next();
        col += 1;
    }
    if stack.len() != 1 {
        let p = stack.last().map(|s| s.1).unwrap_or(Pos { line, col });
        return err(p, "unclosed '('");
    }
    Ok(stack.pop().map(|s| s.0).unwrap_or_default())
}

fn name(x: &Sx, what: &str) -> Result<String, ParseError> {
    match x {
        Sx::Sym(s, _) if !s.starts_with(':') && !s.starts_with('?') && s != "-" => Ok(s.clone()),
        _ => err(x.pos(), format!("expected {what}")),
    }
}

fn list<'a>(x: &'a Sx, what: &str) -> Result<&'a [Sx], ParseError> {
    match x {
        Sx::List(v, _) => Ok(v),
        Sx::Sym(..) => err(x.pos(), format!("expected {what}")),
    }
}

/// `a b - t c - u d` → [(a,t),(b,t),(c,u),(d,object)].
fn typed(items: &[Sx], vars: bool) -> Result<Vec<(String, String)>, ParseError> {
    let mut out = Vec::new();
    let mut pending: Vec<String> = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let s = match items[i].sym() {
            Some(s) => s,
            None => return err(items[i].pos(), "expected a name"),
        };
        if s == "-" {
            let t = match items.get(i + 1) {
                Some(t) => name(t, "a type after '-'")?,
                None => return err(items[i].pos(), "missing type after '-'"),
            };
            if pending.is_empty() {
                return err(items[i].pos(), "'-' without names");
            }
            out.extend(pending.drain(..).map(|n| (n, t.clone())));
            i += 2;
            continue;
        }
        if vars {
            match s.strip_prefix('?') {
                Some(v) if !v.is_empty() => pending.push(v.to_string()),
                _ => return err(items[i].pos(), "expected a variable"),
            }
        } else {
            pending.push(name(&items[i], "a name")?);
        }
        i += 1;
    }
    out.extend(pending.into_iter().map(|n| (n, "object".to_string())));
    Ok(out)
}

fn term(x: &Sx) -> Result<Term, ParseError> {
    match x.sym() {
        Some(s) if s.starts_with('?') && s.len() > 1 => Ok(Term::Var(s[1..].to_string())),
        Some(s) if !s.starts_with(':') && s != "-" => Ok(Term::Const(s.to_string())),
        _ => err(x.pos(), "expected a term"),
    }
}

fn atom(items: &[Sx], at: Pos) -> Result<Atom, ParseError> {
    let pred = match items.first() {
        Some(h) => name(h, "a predicate name")?,
        None => return err(at, "empty atom"),
    };
    let args = items[1..].iter().map(term).collect::<Result<Vec<_>, _>>()?;
    Ok(Atom { pred, args })
}

const UNSUPPORTED_FORMS: &[&str] = &["when", "forall", "exists", "or", "imply", "increase", "decrease"];

struct Goal {
    pos: BTreeSet<Atom>,
    neq: BTreeSet<(Term, Term)>,
}

fn condition(x: &Sx, out: &mut Goal) -> Result<(), ParseError> {
    let items = list(x, "a condition")?;
    let head = match items.first() {
        Some(h) => h,
        None => return Ok(()),
    };
    if head.is_kw("and") {
        for c in &items[1..] {
            condition(c, out)?;
        }
        return Ok(());
    }
    if head.is_kw("not") {
        let inner = match items.get(1) {
            Some(i) if items.len() == 2 => list(i, "a negated formula")?,
            _ => return err(head.pos(), "malformed negation"),
        };
        if inner.first().is_some_and(|h| h.is_kw("=")) && inner.len() == 3 {
            let (a, b) = (term(&inner[1])?, term(&inner[2])?);
            out.neq.insert(if a <= b { (a, b) } else { (b, a) });
            return Ok(());
        }
        return err(head.pos(), "negative preconditions other than inequality are not supported");
    }
    if let Some(s) = head.sym() {
        if UNSUPPORTED_FORMS.iter().any(|f| s.eq_ignore_ascii_case(f)) {
            return err(head.pos(), format!("unsupported construct '{s}'"));
        }
        if s == "=" {
            return err(head.pos(), "positive equality is not supported");
        }
    }
    out.pos.insert(atom(items, x.pos())?);
    Ok(())
}

fn effect(x: &Sx, add: &mut BTreeSet<Atom>, del: &mut BTreeSet<Atom>) -> Result<(), ParseError> {
    let items = list(x, "an effect")?;
    let head = match items.first() {
        Some(h) => h,
        None => return Ok(()),
    };
    if head.is_kw("and") {
        for c in &items[1..] {
            effect(c, add, del)?;
        }
        return Ok(());
    }
    if head.is_kw("not") {
        let inner = match items.get(1) {
            Some(i) if items.len() == 2 => i,
            _ => return err(head.pos(), "malformed negation"),
        };
        del.insert(atom(list(inner, "an atom")?, inner.pos())?);
        return Ok(());
    }
    if let Some(s) = head.sym() {
        if UNSUPPORTED_FORMS.iter().any(|f| s.eq_ignore_ascii_case(f)) {
            return err(head.pos(), format!("unsupported construct '{s}'"));
        }
    }
    add.insert(atom(items, x.pos())?);
    Ok(())
}

fn action(items: &[Sx], at: Pos) -> Result<ActionDef, ParseError> {
    let nm = match items.get(1) {
        Some(x) => name(x, "an action name")?,
        None => return err(at, "expected an action name"),
    };
    let mut a = ActionDef {
        name: nm,
        params: Vec::new(),
        pre: BTreeSet::new(),
        neq: BTreeSet::new(),
        add: BTreeSet::new(),
        del: BTreeSet::new(),
    };
    let mut i = 2;
    while i < items.len() {
        let key = &items[i];
        let val = match items.get(i + 1) {
            Some(v) => v,
            None => return err(key.pos(), "missing value"),
        };
        if key.is_kw(":parameters") {
            a.params = typed(list(val, "a parameter list")?, true)?;
        } else if key.is_kw(":precondition") {
            let mut g = Goal { pos: BTreeSet::new(), neq: BTreeSet::new() };
            condition(val, &mut g)?;
            a.pre = g.pos;
            a.neq = g.neq;
        } else if key.is_kw(":effect") {
            effect(val, &mut a.add, &mut a.del)?;
        } else {
            return err(key.pos(), format!("unexpected '{}' in action", key.sym().unwrap_or("(...)")));
        }
        i += 2;
    }
    Ok(a)
}

fn header(top: &[Sx], kind: &str) -> Result<(String, Pos), ParseError> {
    let form = match top {
        [f] => f,
        [] => return err(Pos { line: 1, col: 1 }, "empty input"),
        [_, extra, ..] => return err(extra.pos(), "trailing input after definition"),
    };
    let items = list(form, "(define ...)")?;
    if !items.first().is_some_and(|h| h.is_kw("define")) {
        return err(form.pos(), "expected (define ...)");
    }
    let h = match items.get(1) {
        Some(h) => list(h, "a header")?,
        None => return err(form.pos(), "missing header"),
    };
    if h.len() != 2 || !h[0].is_kw(kind) {
        return err(items[1].pos(), format!("expected ({kind} <name>)"));
    }
    Ok((name(&h[1], "a name")?, form.pos()))
}

fn check_domain(d: &Domain, at: Pos) -> Result<(), ParseError> {
    let known_type = |t: &str| t == "object" || d.types.iter().any(|x| x.0 == t);
    for (_, t) in d.types.iter().filter_map(|(n, p)| p.as_ref().map(|p| (n, p))) {
        if !known_type(t) {
            return err(at, format!("undeclared type '{t}'"));
        }
    }
    for p in &d.predicates {
        if let Some((_, t)) = p.params.iter().find(|x| !known_type(&x.1)) {
            return err(at, format!("predicate {} uses undeclared type '{t}'", p.name));
        }
    }
    for a in &d.actions {
        if let Some((_, t)) = a.params.iter().find(|x| !known_type(&x.1)) {
            return err(at, format!("action {} uses undeclared type '{t}'", a.name));
        }
        let check_term = |t: &Term| match t {
            Term::Var(v) => a.params.iter().any(|p| &p.0 == v),
            Term::Const(c) => d.constants.iter().any(|k| &k.0 == c),
        };
        for x in a.pre.iter().chain(&a.add).chain(&a.del) {
            match d.predicate(&x.pred) {
                Some(p) if p.params.len() == x.args.len() => {}
                Some(_) => return err(at, format!("action {}: wrong arity for {}", a.name, x.pred)),
                None => return err(at, format!("action {}: undeclared predicate {}", a.name, x.pred)),
            }
            if let Some(t) = x.args.iter().find(|t| !check_term(t)) {
                return err(at, format!("action {}: unknown term '{}'", a.name, t.name()));
            }
        }
        for (x, y) in &a.neq {
            if !check_term(x) || !check_term(y) {
                return err(at, format!("action {}: unknown term in inequality", a.name));
            }
        }
    }
    Ok(())
}

pub fn parse_domain(text: &str) -> Result<Domain, ParseError> {
    let top = read(text)?;
    let (dname, at) = header(&top, "domain")?;
    let items = list(&top[0], "(define ...)")?;
    let mut d = Domain {
        name: dname,
        requirements: Vec::new(),
        types: Vec::new(),
        constants: Vec::new(),
        predicates: Vec::new(),
        actions: Vec::new(),
    };
    for sec in &items[2..] {
        let s = list(sec, "a section")?;
        let head = match s.first() {
            Some(h) => h,
            None => return err(sec.pos(), "empty section"),
        };
        if head.is_kw(":requirements") {
            for r in &s[1..] {
                let r = r.sym().map(|x| x.to_ascii_lowercase()).unwrap_or_default();
                if !SUPPORTED_REQUIREMENTS.contains(&r.as_str()) {
                    return err(head.pos(), format!("unsupported requirement '{r}'"));
                }
                d.requirements.push(r);
            }
        } else if head.is_kw(":types") {
            d.types = typed(&s[1..], false)?
                .into_iter()
                .map(|(t, p)| (t, if p == "object" { None } else { Some(p) }))
                .collect();
        } else if head.is_kw(":constants") {
            d.constants = typed(&s[1..], false)?;
        } else if head.is_kw(":predicates") {
            for p in &s[1..] {
                let ps = list(p, "a predicate declaration")?;
                let pname = match ps.first() {
                    Some(n) => name(n, "a predicate name")?,
                    None => return err(p.pos(), "empty predicate declaration"),
                };
                d.predicates.push(PredicateDecl { name: pname, params: typed(&ps[1..], true)? });
            }
        } else if head.is_kw(":action") {
            d.actions.push(action(s, head.pos())?);
        } else {
            return err(head.pos(), format!("unsupported section '{}'", head.sym().unwrap_or("(...)")));
        }
    }
    check_domain(&d, at)?;
    Ok(d)
}

pub fn parse_problem(text: &str) -> Result<Problem, ParseError> {
    let top = read(text)?;
    let (pname, _) = header(&top, "problem")?;
    let items = list(&top[0], "(define ...)")?;
    let mut p = Problem {
        name: pname,
        domain: String::new(),
        objects: Vec::new(),
        init: BTreeSet::new(),
        goal: BTreeSet::new(),
    };
    for sec in &items[2..] {
        let s = list(sec, "a section")?;
        let head = match s.first() {
            Some(h) => h,
            None => return err(sec.pos(), "empty section"),
        };
        if head.is_kw(":domain") {
            p.domain = match s.get(1) {
                Some(n) => name(n, "a domain name")?,
                None => return err(head.pos(), "missing domain name"),
            };
        } else if head.is_kw(":objects") {
            p.objects = typed(&s[1..], false)?;
        } else if head.is_kw(":init") {
            for a in &s[1..] {
                let at = atom(list(a, "an atom")?, a.pos())?;
                if at.args.iter().any(|t| matches!(t, Term::Var(_))) {
                    return err(a.pos(), "variables are not allowed in :init");
                }
                p.init.insert(at);
            }
        } else if head.is_kw(":goal") {
            let mut g = Goal { pos: BTreeSet::new(), neq: BTreeSet::new() };
            match s.get(1) {
                Some(x) => condition(x, &mut g)?,
                None => return err(head.pos(), "missing goal"),
            }
            if !g.neq.is_empty() {
                return err(head.pos(), "inequalities are not supported in goals");
            }
            p.goal = g.pos;
        } else {
            return err(head.pos(), format!("unsupported section '{}'", head.sym().unwrap_or("(...)")));
        }
    }
    Ok(p)
}
