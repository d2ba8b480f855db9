//! Typed STRIPS domains and problems: model, canonical emission, parsing and
//! grounding into propositional tasks.

mod emit;
mod ground;
mod parse;

pub use emit::{emit_domain, emit_problem};
pub use ground::{ground, BitSet, GroundAction, GroundError, GroundedTask};
pub use parse::{parse_domain, parse_problem, ParseError};

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::actions::{ActionSchema, LiftedAtom};
use crate::relations::Vocabulary;

/// Requirement flags accepted by the parser. Only the STRIPS, typing and
/// equality parts are ever used in bodies.
pub const SUPPORTED_REQUIREMENTS: &[&str] = &[
    ":strips",
    ":typing",
    ":equality",
    ":negative-preconditions",
    ":conditional-effects",
    ":existential-preconditions",
    ":universal-preconditions",
];

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(String),
    Const(String),
}

impl Term {
    pub fn name(&self) -> &str {
        match self {
            Term::Var(s) | Term::Const(s) => s,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Atom {
    pub pred: String,
    pub args: Vec<Term>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredicateDecl {
    pub name: String,
    /// `(variable, type)` pairs.
    pub params: Vec<(String, String)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionDef {
    pub name: String,
    pub params: Vec<(String, String)>,
    pub pre: BTreeSet<Atom>,
    /// `(not (= a b))` constraints, each pair stored in sorted order.
    pub neq: BTreeSet<(Term, Term)>,
    pub add: BTreeSet<Atom>,
    pub del: BTreeSet<Atom>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Domain {
    pub name: String,
    pub requirements: Vec<String>,
    /// `(type, parent)`; the parent is `None` for top-level types.
    pub types: Vec<(String, Option<String>)>,
    pub constants: Vec<(String, String)>,
    pub predicates: Vec<PredicateDecl>,
    pub actions: Vec<ActionDef>,
}

impl Domain {
    pub fn predicate(&self, name: &str) -> Option<&PredicateDecl> {
        self.predicates.iter().find(|p| p.name == name)
    }

    pub fn action(&self, name: &str) -> Option<&ActionDef> {
        self.actions.iter().find(|a| a.name == name)
    }

    /// True iff `ty` equals `ancestor` or inherits from it.
    pub fn is_subtype(&self, ty: &str, ancestor: &str) -> bool {
        let mut cur = ty;
        for _ in 0..=self.types.len() {
            if cur == ancestor || ancestor == "object" {
                return true;
            }
            match self.types.iter().find(|t| t.0 == cur).and_then(|t| t.1.as_deref()) {
                Some(p) => cur = p,
                None => return false,
            }
        }
        false
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Problem {
    pub name: String,
    pub domain: String,
    /// `(object, type)` in declaration order.
    pub objects: Vec<(String, String)>,
    pub init: BTreeSet<Atom>,
    pub goal: BTreeSet<Atom>,
}

fn lifted_to_atom(a: &LiftedAtom) -> Atom {
    Atom { pred: a.rel.clone(), args: a.args.iter().map(|v| Term::Var(v.clone())).collect() }
}

fn ordered(a: &str, b: &str) -> (Term, Term) {
    let (x, y) = if a <= b { (a, b) } else { (b, a) };
    (Term::Var(x.to_string()), Term::Var(y.to_string()))
}

/// Converts learned schemas into an action definition list.
pub fn action_defs(schemas: &[ActionSchema]) -> Vec<ActionDef> {
    schemas
        .iter()
        .map(|s| ActionDef {
            name: s.name.clone(),
            params: s.params.clone(),
            pre: s.pre.iter().map(lifted_to_atom).collect(),
            neq: s.neq.iter().map(|(a, b)| ordered(a, b)).collect(),
            add: s.add.iter().map(lifted_to_atom).collect(),
            del: s.del.iter().map(lifted_to_atom).collect(),
        })
        .collect()
}

fn atom_to_lifted(a: &Atom) -> Option<LiftedAtom> {
    let args = a
        .args
        .iter()
        .map(|t| match t {
            Term::Var(v) => Some(v.clone()),
            Term::Const(_) => None,
        })
        .collect::<Option<Vec<_>>>()?;
    Some(LiftedAtom { rel: a.pred.clone(), args })
}

/// Inverse of [`action_defs`]. Fails with the action name if an action
/// mentions a constant, which learned schemas never do.
pub fn schemas_from_domain(d: &Domain) -> Result<Vec<ActionSchema>, String> {
    d.actions
        .iter()
        .map(|a| {
            let set = |xs: &BTreeSet<Atom>| xs.iter().map(atom_to_lifted).collect::<Option<BTreeSet<_>>>();
            let neq = a
                .neq
                .iter()
                .map(|(x, y)| match (x, y) {
                    (Term::Var(x), Term::Var(y)) => Some((x.clone(), y.clone())),
                    _ => None,
                })
                .collect::<Option<Vec<_>>>();
            match (set(&a.pre), set(&a.add), set(&a.del), neq) {
                (Some(pre), Some(add), Some(del), Some(neq)) => {
                    Ok(ActionSchema { name: a.name.clone(), params: a.params.clone(), pre, neq, add, del })
                }
                _ => Err(a.name.clone()),
            }
        })
        .collect()
}

/// Domain for a learned model. Relations listed in `omit` (for instance the
/// ones never true in any demonstration) are not declared; the caller must
/// make sure no schema mentions them.
pub fn learned_domain(name: &str, vocab: &Vocabulary, schemas: &[ActionSchema], omit: &BTreeSet<String>) -> Domain {
    let predicates: Vec<PredicateDecl> = vocab
        .symbols
        .iter()
        .filter(|s| !omit.contains(&s.name))
        .map(|s| {
            let vars = ["x", "y"];
            PredicateDecl {
                name: s.name.clone(),
                params: s.arg_types().iter().zip(vars).map(|(t, v)| (v.to_string(), t.to_string())).collect(),
            }
        })
        .collect();
    let mut used: BTreeSet<&str> = BTreeSet::new();
    for p in &predicates {
        used.extend(p.params.iter().map(|x| x.1.as_str()));
    }
    for s in schemas {
        used.extend(s.params.iter().map(|x| x.1.as_str()));
    }
    let mut types: Vec<(String, Option<String>)> = used.into_iter().map(|t| (t.to_string(), None)).collect();
    types.sort();
    Domain {
        name: name.to_string(),
        requirements: [":strips", ":typing", ":equality"].iter().map(|s| s.to_string()).collect(),
        types,
        constants: Vec::new(),
        predicates,
        actions: action_defs(schemas),
    }
}

/// Problem over `objects` (id, type) with ground `init` and `goal` atoms given
/// as `(predicate, args)`.
pub fn make_problem(
    name: &str,
    domain: &str,
    objects: &[(String, String)],
    init: &[(String, Vec<String>)],
    goal: &[(String, Vec<String>)],
) -> Problem {
    let conv = |v: &[(String, Vec<String>)]| -> BTreeSet<Atom> {
        v.iter()
            .map(|(p, a)| Atom { pred: p.clone(), args: a.iter().map(|o| Term::Const(o.clone())).collect() })
            .collect()
    };
    Problem {
        name: name.to_string(),
        domain: domain.to_string(),
        objects: objects.to_vec(),
        init: conv(init),
        goal: conv(goal),
    }
}

/// Object ids per declared type, in declaration order.
pub fn objects_by_type(objects: &[(String, String)]) -> BTreeMap<String, Vec<String>> {
    let mut m: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for (o, t) in objects {
        m.entry(t.clone()).or_default().push(o.clone());
    }
    m
}
