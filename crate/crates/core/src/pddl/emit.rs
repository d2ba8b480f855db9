//! Canonical text form: lowercase keywords, one atom per line, 4-space
//! indentation, atoms in sorted order.

use alloc::string::String;
use core::fmt::Write;

use super::{ActionDef, Atom, Domain, Problem, Term};

const IND: &str = "    ";

fn term(t: &Term) -> String {
    match t {
        Term::Var(v) => alloc::format!("?{v}"),
        Term::Const(c) => c.clone(),
    }
}

fn atom(a: &Atom) -> String {
    let mut s = alloc::format!("({}", a.pred);
    for t in &a.args {
        s.push(' ');
        s.push_str(&term(t));
    }
    s.push(')');
    s
}

fn typed_list(out: &mut String, items: &[(String, String)], var: bool) {
    let mut first = true;
    for (n, t) in items {
        if !first {
            out.push(' ');
        }
        first = false;
        let _ = write!(out, "{}{n} - {t}", if var { "?" } else { "" });
    }
}

fn action(out: &mut String, a: &ActionDef) {
    let _ = writeln!(out, "{IND}(:action {}", a.name);
    out.push_str(IND);
    out.push_str(IND);
    out.push_str(":parameters (");
    typed_list(out, &a.params, true);
    out.push_str(")\n");
    let _ = writeln!(out, "{IND}{IND}:precondition (and");
    for (x, y) in &a.neq {
        let _ = writeln!(out, "{IND}{IND}{IND}(not (= {} {}))", term(x), term(y));
    }
    for p in &a.pre {
        let _ = writeln!(out, "{IND}{IND}{IND}{}", atom(p));
    }
    let _ = writeln!(out, "{IND}{IND})");
    let _ = writeln!(out, "{IND}{IND}:effect (and");
    for p in &a.add {
        let _ = writeln!(out, "{IND}{IND}{IND}{}", atom(p));
    }
    for p in &a.del {
        let _ = writeln!(out, "{IND}{IND}{IND}(not {})", atom(p));
    }
    let _ = writeln!(out, "{IND}{IND})");
    let _ = writeln!(out, "{IND})");
}

pub fn emit_domain(d: &Domain) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "(define (domain {})", d.name);
    if !d.requirements.is_empty() {
        let _ = writeln!(out, "{IND}(:requirements {})", d.requirements.join(" "));
    }
    let _ = writeln!(out, "{IND}(:types");
    for (t, p) in &d.types {
        match p {
            Some(p) => {
                let _ = writeln!(out, "{IND}{IND}{t} - {p}");
            }
            None => {
                let _ = writeln!(out, "{IND}{IND}{t}");
            }
        }
    }
    let _ = writeln!(out, "{IND})");
    if !d.constants.is_empty() {
        let _ = writeln!(out, "{IND}(:constants");
        for (c, t) in &d.constants {
            let _ = writeln!(out, "{IND}{IND}{c} - {t}");
        }
        let _ = writeln!(out, "{IND})");
    }
    let _ = writeln!(out, "{IND}(:predicates");
    for p in &d.predicates {
        let _ = write!(out, "{IND}{IND}({}", p.name);
        if !p.params.is_empty() {
            out.push(' ');
            typed_list(&mut out, &p.params, true);
        }
        out.push_str(")\n");
    }
    let _ = writeln!(out, "{IND})");
    for a in &d.actions {
        action(&mut out, a);
    }
    out.push_str(")\n");
    out
}

pub fn emit_problem(p: &Problem) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "(define (problem {})", p.name);
    let _ = writeln!(out, "{IND}(:domain {})", p.domain);
    let _ = writeln!(out, "{IND}(:objects");
    for (o, t) in &p.objects {
        let _ = writeln!(out, "{IND}{IND}{o} - {t}");
    }
    let _ = writeln!(out, "{IND})");
    let _ = writeln!(out, "{IND}(:init");
    for a in &p.init {
        let _ = writeln!(out, "{IND}{IND}{}", atom(a));
    }
    let _ = writeln!(out, "{IND})");
    let _ = writeln!(out, "{IND}(:goal (and");
    for a in &p.goal {
        let _ = writeln!(out, "{IND}{IND}{}", atom(a));
    }
    let _ = writeln!(out, "{IND}))");
    out.push_str(")\n");
    out
}
