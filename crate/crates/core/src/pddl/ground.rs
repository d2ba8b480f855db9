//! Grounding a typed domain and problem into a propositional task.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use super::{Atom, Domain, Problem, Term};

/// Fixed-size bit set over atom indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BitSet {
    words: Vec<u64>,
}

impl BitSet {
    pub fn new(n: usize) -> BitSet {
        BitSet { words: vec![0; n.div_ceil(64)] }
    }

    pub fn contains(&self, i: usize) -> bool {
        self.words.get(i / 64).is_some_and(|w| w >> (i % 64) & 1 == 1)
    }

    pub fn insert(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn remove(&mut self, i: usize) {
        self.words[i / 64] &= !(1 << (i % 64));
    }

    pub fn is_superset(&self, other: &BitSet) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & b == *b)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.words
            .iter()
            .enumerate()
            .flat_map(|(wi, &w)| (0..64).filter(move |b| w >> b & 1 == 1).map(move |b| wi * 64 + b))
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundAction {
    /// Index of the schema in the domain's action list.
    pub schema: usize,
    pub name: String,
    pub args: Vec<String>,
    pub pre: Vec<usize>,
    pub add: Vec<usize>,
    pub del: Vec<usize>,
}

impl GroundAction {
    pub fn applicable(&self, s: &BitSet) -> bool {
        self.pre.iter().all(|&i| s.contains(i))
    }

    /// Delete before add, so an atom in both lists ends up true.
    pub fn apply(&self, s: &BitSet) -> BitSet {
        let mut out = s.clone();
        for &i in &self.del {
            out.remove(i);
        }
        for &i in &self.add {
            out.insert(i);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundedTask {
    /// Atom universe: `(predicate, object ids)`.
    pub atoms: Vec<(String, Vec<String>)>,
    pub actions: Vec<GroundAction>,
    pub init: BitSet,
    pub goal: BitSet,
    index: BTreeMap<(String, Vec<String>), usize>,
}

impl GroundedTask {
    pub fn atom_index(&self, pred: &str, args: &[String]) -> Option<usize> {
        self.index.get(&(String::from(pred), args.to_vec())).copied()
    }

    pub fn render_atom(&self, i: usize) -> String {
        let (p, a) = &self.atoms[i];
        if a.is_empty() {
            format!("({p})")
        } else {
            format!("({p} {})", a.join(" "))
        }
    }

    pub fn is_goal(&self, s: &BitSet) -> bool {
        s.is_superset(&self.goal)
    }

    pub fn state_of(&self, atoms: &[(String, Vec<String>)]) -> Result<BitSet, GroundError> {
        let mut s = BitSet::new(self.atoms.len());
        for (p, a) in atoms {
            match self.atom_index(p, a) {
                Some(i) => s.insert(i),
                None => return Err(GroundError::UnknownAtom(format!("({p} {})", a.join(" ")))),
            }
        }
        Ok(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GroundError {
    /// An init or goal atom is not a well-typed grounding of a declared predicate.
    UnknownAtom(String),
    /// An object's type is not declared by the domain.
    UnknownType(String),
}

impl fmt::Display for GroundError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroundError::UnknownAtom(a) => write!(f, "atom {a} is not a well-typed grounding"),
            GroundError::UnknownType(t) => write!(f, "type '{t}' is not declared by the domain"),
        }
    }
}

/// Calls `f` on every tuple drawing position `i` from `choices[i]`.
fn for_each_tuple<'a>(choices: &[Vec<&'a str>], cur: &mut Vec<&'a str>, f: &mut dyn FnMut(&[&'a str])) {
    if cur.len() == choices.len() {
        f(cur);
        return;
    }
    for &c in &choices[cur.len()] {
        cur.push(c);
        for_each_tuple(choices, cur, f);
        cur.pop();
    }
}

fn ground_atom(a: &Atom, bind: &BTreeMap<&str, &str>) -> (String, Vec<String>) {
    let args = a
        .args
        .iter()
        .map(|t| match t {
            Term::Var(v) => String::from(bind.get(v.as_str()).copied().unwrap_or("")),
            Term::Const(c) => c.clone(),
        })
        .collect();
    (a.pred.clone(), args)
}

/// Enumerates every well-typed atom and every type-consistent action binding
/// that satisfies its inequalities. Atoms are indexed by predicate
/// declaration order, then argument tuples in object order.
pub fn ground(d: &Domain, p: &Problem) -> Result<GroundedTask, GroundError> {
    let mut objects: Vec<(&str, &str)> = d.constants.iter().map(|(o, t)| (o.as_str(), t.as_str())).collect();
    objects.extend(p.objects.iter().map(|(o, t)| (o.as_str(), t.as_str())));
    for (_, t) in &objects {
        if *t != "object" && !d.types.iter().any(|x| x.0 == *t) {
            return Err(GroundError::UnknownType(String::from(*t)));
        }
    }
    let of_type =
        |ty: &str| -> Vec<&str> { objects.iter().filter(|(_, t)| d.is_subtype(t, ty)).map(|(o, _)| *o).collect() };

    let mut atoms = Vec::new();
    let mut index = BTreeMap::new();
    for pd in &d.predicates {
        let choices: Vec<Vec<&str>> = pd.params.iter().map(|(_, t)| of_type(t)).collect();
        for_each_tuple(&choices, &mut Vec::new(), &mut |tuple| {
            let key = (pd.name.clone(), tuple.iter().map(|s| String::from(*s)).collect::<Vec<_>>());
            if !index.contains_key(&key) {
                index.insert(key.clone(), atoms.len());
                atoms.push(key);
            }
        });
    }
    let n = atoms.len();
    let lookup = |key: &(String, Vec<String>)| index.get(key).copied();

    let mut actions = Vec::new();
    for (si, a) in d.actions.iter().enumerate() {
        let choices: Vec<Vec<&str>> = a.params.iter().map(|(_, t)| of_type(t)).collect();
        for_each_tuple(&choices, &mut Vec::new(), &mut |tuple| {
            let bind: BTreeMap<&str, &str> =
                a.params.iter().map(|(v, _)| v.as_str()).zip(tuple.iter().copied()).collect();
            fn val<'t>(t: &'t Term, bind: &BTreeMap<&str, &'t str>) -> &'t str {
                match t {
                    Term::Var(v) => bind.get(v.as_str()).copied().unwrap_or(""),
                    Term::Const(c) => c.as_str(),
                }
            }
            if a.neq.iter().any(|(x, y)| val(x, &bind) == val(y, &bind)) {
                return;
            }
            let idx = |set: &alloc::collections::BTreeSet<Atom>| -> Option<Vec<usize>> {
                set.iter().map(|x| lookup(&ground_atom(x, &bind))).collect()
            };
            // A precondition outside the universe can never hold.
            let pre = match idx(&a.pre) {
                Some(v) => v,
                None => return,
            };
            let (add, del) = match (idx(&a.add), idx(&a.del)) {
                (Some(x), Some(y)) => (x, y),
                _ => return,
            };
            actions.push(GroundAction {
                schema: si,
                name: a.name.clone(),
                args: tuple.iter().map(|s| String::from(*s)).collect(),
                pre,
                add,
                del,
            });
        });
    }

    let mut init = BitSet::new(n);
    for x in &p.init {
        let key = ground_atom(x, &BTreeMap::new());
        init.insert(lookup(&key).ok_or_else(|| GroundError::UnknownAtom(render(&key)))?);
    }
    let mut goal = BitSet::new(n);
    for x in &p.goal {
        let key = ground_atom(x, &BTreeMap::new());
        goal.insert(lookup(&key).ok_or_else(|| GroundError::UnknownAtom(render(&key)))?);
    }
    Ok(GroundedTask { atoms, actions, init, goal, index })
}

fn render(k: &(String, Vec<String>)) -> String {
    format!("({} {})", k.0, k.1.join(" "))
}
