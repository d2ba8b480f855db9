//! Action invention: abstract and lift demonstrations, cluster transitions by
//! change signature, and turn each cluster into a lifted STRIPS schema.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::model::Trajectory;
use crate::relations::{AbstractState, Abstraction, GroundAtom, RelationKind, Vocabulary};

/// A relation applied to placeholder variables (names without `?`).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LiftedAtom {
    pub rel: String,
    pub args: Vec<String>,
}

impl LiftedAtom {
    pub fn new(rel: &str, args: &[&str]) -> LiftedAtom {
        LiftedAtom { rel: rel.to_string(), args: args.iter().map(|s| s.to_string()).collect() }
    }

    fn rename(&self, map: &BTreeMap<String, String>) -> Option<LiftedAtom> {
        let args = self.args.iter().map(|a| map.get(a).cloned()).collect::<Option<Vec<_>>>()?;
        Some(LiftedAtom { rel: self.rel.clone(), args })
    }
}

impl fmt::Display for LiftedAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.rel)?;
        for a in &self.args {
            write!(f, " ?{a}")?;
        }
        write!(f, ")")
    }
}

pub type LiftedSet = BTreeSet<LiftedAtom>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LiftedVar {
    pub name: String,
    pub ty: String,
    /// Object id the variable stands for.
    pub object: String,
}

/// Variables attached to the gripper when an abstract state is entered and
/// when it is left.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Holding {
    pub start: BTreeSet<String>,
    pub end: BTreeSet<String>,
}

/// A demonstration after abstraction, duplicate collapsing and lifting.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LiftedTrajectory {
    pub task_id: String,
    pub vars: Vec<LiftedVar>,
    pub states: Vec<LiftedSet>,
    /// Per state, when known from the raw recording; empty otherwise.
    pub held: Vec<Holding>,
}

impl LiftedTrajectory {
    pub fn var_type(&self, name: &str) -> Option<&str> {
        self.vars.iter().find(|v| v.name == name).map(|v| v.ty.as_str())
    }

    pub fn transitions(&self) -> usize {
        self.states.len().saturating_sub(1)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord)]
pub struct ChangeSignature {
    pub added: LiftedSet,
    pub deleted: LiftedSet,
}

impl ChangeSignature {
    pub fn variables(&self) -> BTreeSet<String> {
        self.added.iter().chain(&self.deleted).flat_map(|a| a.args.iter().cloned()).collect()
    }

    pub fn relations(&self) -> BTreeSet<String> {
        self.added.iter().chain(&self.deleted).map(|a| a.rel.clone()).collect()
    }

    fn rename(&self, map: &BTreeMap<String, String>) -> ChangeSignature {
        let r = |s: &LiftedSet| s.iter().map(|a| a.rename(map).unwrap_or_else(|| a.clone())).collect();
        ChangeSignature { added: r(&self.added), deleted: r(&self.deleted) }
    }

    /// Stable text form: `+atom..|-atom..` over sorted atoms.
    pub fn key(&self) -> String {
        let mut s = String::new();
        for a in &self.added {
            s.push('+');
            s.push_str(&a.to_string());
        }
        s.push('|');
        for a in &self.deleted {
            s.push('-');
            s.push_str(&a.to_string());
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ActionError {
    /// Two identical states were compared.
    EmptySignature,
    /// A variable without a declared type.
    UntypedVariable(String),
    /// A learned schema does not reproduce one of its member transitions.
    InconsistentCluster { action: String, task: String, step: usize },
}

impl fmt::Display for ActionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionError::EmptySignature => write!(f, "identical states have no change signature"),
            ActionError::UntypedVariable(v) => write!(f, "variable ?{v} has no type"),
            ActionError::InconsistentCluster { action, task, step } => {
                write!(f, "schema {action} does not reproduce transition {step} of {task}")
            }
        }
    }
}

/// `C+ = post \ pre`, `C- = pre \ post`.
pub fn change_signature(pre: &LiftedSet, post: &LiftedSet) -> Result<ChangeSignature, ActionError> {
    let added: LiftedSet = post.difference(pre).cloned().collect();
    let deleted: LiftedSet = pre.difference(post).cloned().collect();
    if added.is_empty() && deleted.is_empty() {
        return Err(ActionError::EmptySignature);
    }
    Ok(ChangeSignature { added, deleted })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LiftOptions {
    /// Remove short passes through a pair's none region between two regions.
    pub bridge_none_gaps: bool,
    /// Give free-volume atoms their majority value over each stretch of
    /// constant region and none atoms.
    pub settle_free: bool,
}

impl Default for LiftOptions {
    fn default() -> Self {
        LiftOptions { bridge_none_gaps: true, settle_free: true }
    }
}

/// Abstract states of every recorded state with consecutive duplicates collapsed.
pub fn abstract_trajectory(traj: &Trajectory, ab: &Abstraction, opts: &LiftOptions) -> Vec<AbstractState> {
    abstract_spans(traj, ab, opts.settle_free).0
}

/// Replaces the free-volume atoms of each state by their majority value over
/// its stretch of equal region and none atoms, ties keeping the atom. Objects
/// only enter or leave a region at such a stretch boundary; inside one, the
/// capacity estimate still moves with the occupant's pose, which otherwise
/// shows up as a change of its own a few steps after the region change.
pub fn settle_free_atoms(vocab: &Vocabulary, states: &[AbstractState]) -> Vec<AbstractState> {
    let is_free = |a: &GroundAtom| vocab.symbols[a.rel].kind == RelationKind::Free;
    let fixed: Vec<AbstractState> =
        states.iter().map(|s| s.iter().filter(|a| !is_free(a)).cloned().collect()).collect();
    let mut out = Vec::with_capacity(states.len());
    let mut i = 0;
    while i < states.len() {
        let mut j = i + 1;
        while j < states.len() && fixed[j] == fixed[i] {
            j += 1;
        }
        let mut counts: BTreeMap<&GroundAtom, usize> = BTreeMap::new();
        for s in &states[i..j] {
            for a in s.iter().filter(|a| is_free(a)) {
                *counts.entry(a).or_insert(0) += 1;
            }
        }
        let mut settled = fixed[i].clone();
        settled.extend(counts.into_iter().filter(|&(_, c)| 2 * c >= j - i).map(|(a, _)| *a));
        out.extend(core::iter::repeat_n(settled, j - i));
        i = j;
    }
    out
}

/// Collapsed abstract states with the inclusive range of recorded states each covers.
fn abstract_spans(traj: &Trajectory, ab: &Abstraction, settle: bool) -> (Vec<AbstractState>, Vec<(usize, usize)>) {
    let mut raw: Vec<AbstractState> = traj.states.iter().map(|s| ab.abstract_state(&traj.objects, s)).collect();
    if settle {
        raw = settle_free_atoms(&ab.vocab, &raw);
    }
    let mut out: Vec<AbstractState> = Vec::new();
    let mut spans: Vec<(usize, usize)> = Vec::new();
    for (i, a) in raw.into_iter().enumerate() {
        if out.last() == Some(&a) {
            if let Some(sp) = spans.last_mut() {
                sp.1 = i;
            }
        } else {
            out.push(a);
            spans.push((i, i));
        }
    }
    (out, spans)
}

/// Region index of every instance pair in `s`, read from its region and none atoms.
fn region_indices(vocab: &Vocabulary, s: &AbstractState) -> BTreeMap<[usize; 2], usize> {
    s.iter()
        .filter(|a| vocab.symbols[a.rel].kind != RelationKind::Free)
        .map(|a| (a.args, vocab.symbols[a.rel].index))
        .collect()
}

/// Drops runs of states in which one instance pair sits in its none region
/// while it moves between two numbered regions and every other pair keeps its
/// region. Such runs come from the unclaimed gap between adjacent regions, not
/// from a relational change. Consecutive duplicates are collapsed afterwards.
pub fn bridge_none_gaps(vocab: &Vocabulary, states: &[AbstractState]) -> Vec<AbstractState> {
    let spans: Vec<(usize, usize)> = (0..states.len()).map(|i| (i, i)).collect();
    bridge_spans(vocab, states, &spans).0
}

/// [`bridge_none_gaps`] that also merges the recorded-state ranges: a removed
/// run joins the state before it.
fn bridge_spans(
    vocab: &Vocabulary,
    states: &[AbstractState],
    spans: &[(usize, usize)],
) -> (Vec<AbstractState>, Vec<(usize, usize)>) {
    let mut v: Vec<AbstractState> = states.to_vec();
    let mut sp: Vec<(usize, usize)> = spans.to_vec();
    loop {
        let idx: Vec<BTreeMap<[usize; 2], usize>> = v.iter().map(|s| region_indices(vocab, s)).collect();
        let mut cut = None;
        'search: for i in 1..v.len() {
            for (pair, &k) in &idx[i] {
                if k != 0 || idx[i - 1].get(pair).copied().unwrap_or(0) == 0 {
                    continue;
                }
                let mut j = i;
                while j < v.len() && idx[j].get(pair) == Some(&0) {
                    j += 1;
                }
                if j == v.len() || idx[j].get(pair).copied().unwrap_or(0) == 0 {
                    continue;
                }
                let others_fixed =
                    (i..=j).all(|t| idx[t].iter().all(|(p, r)| p == pair || idx[i - 1].get(p) == Some(r)));
                if others_fixed {
                    cut = Some((i, j));
                    break 'search;
                }
            }
        }
        match cut {
            Some((i, j)) => {
                sp[i - 1].1 = sp[j - 1].1;
                v.drain(i..j);
                sp.drain(i..j);
                if v[i - 1] == v[i] {
                    sp[i - 1].1 = sp[i].1;
                    v.remove(i);
                    sp.remove(i);
                }
            }
            None => return (v, sp),
        }
    }
}

/// Lifts collapsed abstract states: objects become `<type>_p<k>` in order of
/// first appearance, scanning states in order and atoms by rendered text.
pub fn lift(
    task_id: &str,
    objects: &[crate::model::ObjectDecl],
    vocab: &Vocabulary,
    states: &[AbstractState],
) -> LiftedTrajectory {
    let mut names: BTreeMap<usize, String> = BTreeMap::new();
    let mut per_type: BTreeMap<&str, usize> = BTreeMap::new();
    let mut vars = Vec::new();
    for s in states {
        let mut atoms: Vec<(&str, Vec<&str>, &[usize])> = s
            .iter()
            .map(|a| {
                let args = a.arg_slice(vocab);
                (vocab.symbols[a.rel].name.as_str(), args.iter().map(|&o| objects[o].id.as_str()).collect(), args)
            })
            .collect();
        atoms.sort();
        for (_, _, args) in atoms {
            for &o in args {
                if names.contains_key(&o) {
                    continue;
                }
                let ty = objects[o].ty.as_str();
                let k = per_type.entry(ty).or_insert(0);
                *k += 1;
                let name = format!("{ty}_p{k}");
                vars.push(LiftedVar { name: name.clone(), ty: ty.to_string(), object: objects[o].id.clone() });
                names.insert(o, name);
            }
        }
    }
    let lifted = states
        .iter()
        .map(|s| {
            s.iter()
                .map(|a| LiftedAtom {
                    rel: vocab.symbols[a.rel].name.clone(),
                    args: a.arg_slice(vocab).iter().map(|o| names[o].clone()).collect(),
                })
                .collect()
        })
        .collect();
    LiftedTrajectory { task_id: task_id.to_string(), vars, states: lifted, held: Vec::new() }
}

/// Abstracts, collapses, optionally bridges and lifts every demonstration.
pub fn abstract_and_lift(demos: &[Trajectory], ab: &Abstraction, opts: &LiftOptions) -> Vec<LiftedTrajectory> {
    demos.iter().map(|d| lift_one(d, ab, opts)).collect()
}

pub fn lift_one(d: &Trajectory, ab: &Abstraction, opts: &LiftOptions) -> LiftedTrajectory {
    let (mut states, mut spans) = abstract_spans(d, ab, opts.settle_free);
    if opts.bridge_none_gaps {
        (states, spans) = bridge_spans(&ab.vocab, &states, &spans);
    }
    let mut out = lift(&d.task_id, &d.objects, &ab.vocab, &states);
    let name_of: BTreeMap<&str, &str> = out.vars.iter().map(|v| (v.object.as_str(), v.name.as_str())).collect();
    let held_at = |i: usize| -> BTreeSet<String> {
        d.states[i]
            .attached
            .iter()
            .filter_map(|a| name_of.get(d.objects[a.object].id.as_str()).map(|n| n.to_string()))
            .collect()
    };
    out.held = spans.iter().map(|&(a, b)| Holding { start: held_at(a), end: held_at(b) }).collect();
    out
}

/// Calls `f` with every assignment of `slots[i]` to a distinct element of
/// `choices[i]` (slots sharing a choice list must stay distinct). Stops early
/// when `f` returns false. Returns false iff stopped early.
fn for_each_injection(
    slots: &[(String, Vec<String>)],
    cur: &mut Vec<String>,
    f: &mut dyn FnMut(&[String]) -> bool,
) -> bool {
    if cur.len() == slots.len() {
        return f(cur);
    }
    let i = cur.len();
    for c in &slots[i].1 {
        if cur.contains(c) {
            continue;
        }
        cur.push(c.clone());
        let go = for_each_injection(slots, cur, f);
        cur.pop();
        if !go {
            return false;
        }
    }
    true
}

/// Canonical form of a signature: the type-respecting renaming of its
/// variables onto `<type>_p1..` whose key is lexicographically smallest.
/// Returns the renamed signature and the map old name → canonical name.
pub fn canonical_signature(
    sig: &ChangeSignature,
    var_type: &dyn Fn(&str) -> Option<String>,
) -> Result<(ChangeSignature, BTreeMap<String, String>), ActionError> {
    let vars: Vec<String> = sig.variables().into_iter().collect();
    let mut types = Vec::new();
    for v in &vars {
        types.push(var_type(v).ok_or_else(|| ActionError::UntypedVariable(v.clone()))?);
    }
    let mut by_type: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for t in &types {
        let n = by_type.entry(t.as_str()).or_default();
        n.push(format!("{t}_p{}", n.len() + 1));
    }
    let slots: Vec<(String, Vec<String>)> =
        vars.iter().zip(&types).map(|(v, t)| (v.clone(), by_type[t.as_str()].clone())).collect();
    let mut best: Option<(String, ChangeSignature, BTreeMap<String, String>)> = None;
    for_each_injection(&slots, &mut Vec::new(), &mut |assign| {
        let map: BTreeMap<String, String> = vars.iter().cloned().zip(assign.iter().cloned()).collect();
        let s = sig.rename(&map);
        let key = s.key();
        if best.as_ref().is_none_or(|b| key < b.0) {
            best = Some((key, s, map));
        }
        true
    });
    let (_, s, map) = best.unwrap_or_default();
    Ok((s, map))
}

/// One observed transition inside a cluster.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Member {
    pub traj: usize,
    /// Index of the pre-state within the lifted trajectory.
    pub step: usize,
    /// Trajectory variable → canonical signature variable.
    pub rename: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransitionCluster {
    pub signature: ChangeSignature,
    pub members: Vec<Member>,
}

/// Groups all transitions by canonical signature, ordered by signature key.
pub fn cluster_transitions(trajs: &[LiftedTrajectory]) -> Result<Vec<TransitionCluster>, ActionError> {
    let mut map: BTreeMap<String, TransitionCluster> = BTreeMap::new();
    for (ti, t) in trajs.iter().enumerate() {
        let vt = |v: &str| t.var_type(v).map(|s| s.to_string());
        for step in 0..t.transitions() {
            let sig = change_signature(&t.states[step], &t.states[step + 1])?;
            let (canon, rename) = canonical_signature(&sig, &vt)?;
            map.entry(canon.key())
                .or_insert_with(|| TransitionCluster { signature: canon, members: Vec::new() })
                .members
                .push(Member { traj: ti, step, rename });
        }
    }
    Ok(map.into_values().collect())
}

/// Relation names that occur in some transition's change signature.
pub fn changed_relations(trajs: &[LiftedTrajectory]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for t in trajs {
        for w in t.states.windows(2) {
            out.extend(w[0].symmetric_difference(&w[1]).map(|a| a.rel.clone()));
        }
    }
    out
}

/// Relation names that are true somewhere but never change truth value.
pub fn static_relations(trajs: &[LiftedTrajectory]) -> BTreeSet<String> {
    let changed = changed_relations(trajs);
    trajs
        .iter()
        .flat_map(|t| t.states.iter().flatten())
        .map(|a| a.rel.clone())
        .filter(|r| !changed.contains(r))
        .collect()
}

/// Upper bound on extra-variable alignments tried per member before falling
/// back to a greedy choice.
const ALIGN_BUDGET: usize = 50_000;

/// Intersection of member pre-states under the cluster's variables.
/// Signature variables are fixed by the canonical renaming. Other objects
/// become `<type>_extra_p<k>` variables; per member, extras are aligned with
/// the member's remaining objects so as to keep the most atoms.
/// Returns the precondition and, per member, cluster variable → trajectory variable.
pub fn learn_precondition(
    cluster: &TransitionCluster,
    trajs: &[LiftedTrajectory],
) -> (LiftedSet, Vec<BTreeMap<String, String>>) {
    let mut inter = LiftedSet::new();
    let mut extra_types: BTreeMap<String, String> = BTreeMap::new();
    let mut bindings = Vec::new();
    for (mi, m) in cluster.members.iter().enumerate() {
        let t = &trajs[m.traj];
        let pre = &t.states[m.step];
        let mut bind: BTreeMap<String, String> = m.rename.iter().map(|(a, b)| (b.clone(), a.clone())).collect();
        if mi == 0 {
            let mut per_type: BTreeMap<String, usize> = BTreeMap::new();
            let mut to_cluster: BTreeMap<String, String> = m.rename.clone();
            for a in pre {
                for v in &a.args {
                    if to_cluster.contains_key(v) {
                        continue;
                    }
                    let ty = t.var_type(v).unwrap_or("object").to_string();
                    let k = per_type.entry(ty.clone()).or_insert(0);
                    *k += 1;
                    let name = format!("{ty}_extra_p{k}");
                    extra_types.insert(name.clone(), ty);
                    bind.insert(name.clone(), v.clone());
                    to_cluster.insert(v.clone(), name);
                }
            }
            inter = pre.iter().filter_map(|a| a.rename(&to_cluster)).collect();
        } else {
            let used: BTreeSet<&String> = inter.iter().flat_map(|a| a.args.iter()).collect();
            let extras: Vec<String> = extra_types.keys().filter(|e| used.contains(e)).cloned().collect();
            let sig_vars: BTreeSet<&String> = m.rename.keys().collect();
            let mut cands: BTreeMap<&str, Vec<String>> = BTreeMap::new();
            for a in pre {
                for v in &a.args {
                    if sig_vars.contains(v) {
                        continue;
                    }
                    let c = cands.entry(t.var_type(v).unwrap_or("object")).or_default();
                    if !c.contains(v) {
                        c.push(v.clone());
                    }
                }
            }
            // Slots that cannot be bound keep a sentinel so they score zero.
            let slots: Vec<(String, Vec<String>)> = extras
                .iter()
                .enumerate()
                .map(|(i, e)| {
                    let mut c = cands.get(extra_types[e].as_str()).cloned().unwrap_or_default();
                    c.push(format!("\u{0}{i}"));
                    (e.clone(), c)
                })
                .collect();
            let score = |assign: &[String], base: &BTreeMap<String, String>| {
                let mut b = base.clone();
                for (e, v) in extras.iter().zip(assign) {
                    b.insert(e.clone(), v.clone());
                }
                inter.iter().filter(|a| a.rename(&b).is_some_and(|g| pre.contains(&g))).count()
            };
            let mut best: Option<(usize, Vec<String>)> = None;
            let mut tried = 0;
            let complete = for_each_injection(&slots, &mut Vec::new(), &mut |assign| {
                tried += 1;
                let s = score(assign, &bind);
                if best.as_ref().is_none_or(|b| s > b.0) {
                    best = Some((s, assign.to_vec()));
                }
                tried < ALIGN_BUDGET
            });
            if !complete {
                let mut assign: Vec<String> = Vec::new();
                for (i, slot) in slots.iter().enumerate() {
                    let mut pick = (0, format!("\u{0}{i}"));
                    for c in &slot.1 {
                        if assign.contains(c) {
                            continue;
                        }
                        let mut trial = assign.clone();
                        trial.push(c.clone());
                        let partial: Vec<String> = (0..slots.len())
                            .map(|j| trial.get(j).cloned().unwrap_or_else(|| format!("\u{0}{j}")))
                            .collect();
                        let s = score(&partial, &bind);
                        if s > pick.0 {
                            pick = (s, c.clone());
                        }
                    }
                    assign.push(pick.1);
                }
                best = Some((score(&assign, &bind), assign));
            }
            if let Some((_, assign)) = best {
                for (e, v) in extras.iter().zip(assign) {
                    if !v.starts_with('\u{0}') {
                        bind.insert(e.clone(), v);
                    }
                }
            }
            inter.retain(|a| a.rename(&bind).is_some_and(|g| pre.contains(&g)));
        }
        bindings.push(bind);
    }
    (inter, bindings)
}

/// Removes atoms that share no variable with the signature and whose
/// relation never changes in any demonstration.
pub fn prune_precondition(pre: &LiftedSet, sig: &ChangeSignature, changed: &BTreeSet<String>) -> LiftedSet {
    let sv = sig.variables();
    pre.iter().filter(|a| a.args.iter().any(|v| sv.contains(v)) || changed.contains(&a.rel)).cloned().collect()
}

/// Variables of the precondition then the effects, atoms taken in sorted
/// order, each variable once.
pub fn extract_params(pre: &LiftedSet, sig: &ChangeSignature) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut eff: Vec<&LiftedAtom> = sig.added.iter().chain(&sig.deleted).collect();
    eff.sort();
    for a in pre.iter().chain(eff) {
        for v in &a.args {
            if !out.contains(v) {
                out.push(v.clone());
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionSchema {
    pub name: String,
    /// Typed parameters `(name, type)` without `?`.
    pub params: Vec<(String, String)>,
    pub pre: LiftedSet,
    /// Pairs of parameters that must bind different objects.
    pub neq: Vec<(String, String)>,
    pub add: LiftedSet,
    pub del: LiftedSet,
}

impl ActionSchema {
    pub fn signature(&self) -> ChangeSignature {
        ChangeSignature { added: self.add.clone(), deleted: self.del.clone() }
    }

    pub fn param_type(&self, v: &str) -> Option<&str> {
        self.params.iter().find(|p| p.0 == v).map(|p| p.1.as_str())
    }

    /// Result of applying the schema under `bind` (parameter → state variable
    /// or object), or `None` if the precondition or an inequality fails.
    pub fn apply(&self, bind: &BTreeMap<String, String>, state: &LiftedSet) -> Option<LiftedSet> {
        for (a, b) in &self.neq {
            if bind.get(a)? == bind.get(b)? {
                return None;
            }
        }
        for a in &self.pre {
            if !state.contains(&a.rename(bind)?) {
                return None;
            }
        }
        let mut out = state.clone();
        for a in &self.del {
            out.remove(&a.rename(bind)?);
        }
        for a in &self.add {
            out.insert(a.rename(bind)?);
        }
        Some(out)
    }
}

/// A schema with the transitions it was learned from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InventedAction {
    pub schema: ActionSchema,
    pub members: Vec<Member>,
    /// Per member, parameter → trajectory variable.
    pub bindings: Vec<BTreeMap<String, String>>,
}

/// Whole pipeline from lifted trajectories to named, validated schemas.
pub fn invent_actions(trajs: &[LiftedTrajectory]) -> Result<Vec<ActionSchema>, ActionError> {
    Ok(invent_actions_detailed(trajs)?.into_iter().map(|a| a.schema).collect())
}

/// [`invent_actions`] keeping each schema's member transitions.
pub fn invent_actions_detailed(trajs: &[LiftedTrajectory]) -> Result<Vec<InventedAction>, ActionError> {
    let clusters = cluster_transitions(trajs)?;
    let changed = changed_relations(trajs);
    let mut out = Vec::new();
    for (ci, c) in clusters.iter().enumerate() {
        let name = format!("a{}", ci + 1);
        let (pre, bindings) = learn_precondition(c, trajs);
        let pre = prune_precondition(&pre, &c.signature, &changed);
        let raw = extract_params(&pre, &c.signature);
        // Renumber surviving extras in parameter order.
        let mut rename: BTreeMap<String, String> = BTreeMap::new();
        let mut per_type: BTreeMap<String, usize> = BTreeMap::new();
        let first = &c.members[0];
        let sig_types: BTreeMap<&String, &str> =
            first.rename.iter().map(|(tv, cv)| (cv, trajs[first.traj].var_type(tv).unwrap_or("object"))).collect();
        let mut params = Vec::new();
        for v in &raw {
            let ty = match sig_types.get(v) {
                Some(t) => t.to_string(),
                None => {
                    let tv = &bindings[0][v];
                    trajs[first.traj].var_type(tv).unwrap_or("object").to_string()
                }
            };
            let new = if sig_types.contains_key(v) {
                v.clone()
            } else {
                let k = per_type.entry(ty.clone()).or_insert(0);
                *k += 1;
                format!("{ty}_extra_p{k}")
            };
            rename.insert(v.clone(), new.clone());
            params.push((new, ty));
        }
        let rn = |s: &LiftedSet| -> LiftedSet { s.iter().filter_map(|a| a.rename(&rename)).collect() };
        let bindings: Vec<BTreeMap<String, String>> = bindings
            .iter()
            .map(|b| rename.iter().filter_map(|(old, new)| b.get(old).map(|v| (new.clone(), v.clone()))).collect())
            .collect();
        let mut neq = Vec::new();
        for i in 0..params.len() {
            for j in i + 1..params.len() {
                if params[i].1 == params[j].1 && bindings.iter().all(|b| b.get(&params[i].0) != b.get(&params[j].0)) {
                    neq.push((params[i].0.clone(), params[j].0.clone()));
                }
            }
        }
        let schema = ActionSchema {
            name: name.clone(),
            params,
            pre: rn(&pre),
            neq,
            add: rn(&c.signature.added),
            del: rn(&c.signature.deleted),
        };
        for (m, b) in c.members.iter().zip(&bindings) {
            let t = &trajs[m.traj];
            if schema.apply(b, &t.states[m.step]).as_ref() != Some(&t.states[m.step + 1]) {
                return Err(ActionError::InconsistentCluster { action: name, task: t.task_id.clone(), step: m.step });
            }
        }
        out.push(InventedAction { schema, members: c.members.clone(), bindings });
    }
    Ok(out)
}

/// Which effect parameters the gripper holds while an action's change
/// happens and when the reached state is left again.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GraspHint {
    pub during: BTreeSet<String>,
    pub after: BTreeSet<String>,
}

/// Majority vote over each action's members, using the holding records of the
/// trajectories. Members without records do not vote.
pub fn learn_grasp_hints(actions: &[InventedAction], trajs: &[LiftedTrajectory]) -> Vec<GraspHint> {
    actions
        .iter()
        .map(|a| {
            let sig_vars = a.schema.signature().variables();
            let mut during: BTreeMap<&String, usize> = BTreeMap::new();
            let mut after: BTreeMap<&String, usize> = BTreeMap::new();
            let mut votes = 0;
            for (m, b) in a.members.iter().zip(&a.bindings) {
                let h = match trajs[m.traj].held.get(m.step + 1) {
                    Some(h) => h,
                    None => continue,
                };
                votes += 1;
                for p in &sig_vars {
                    if let Some(v) = b.get(p) {
                        *during.entry(p).or_insert(0) += h.start.contains(v) as usize;
                        *after.entry(p).or_insert(0) += h.end.contains(v) as usize;
                    }
                }
            }
            let major = |m: &BTreeMap<&String, usize>| -> BTreeSet<String> {
                m.iter().filter(|(_, &c)| 2 * c > votes).map(|(p, _)| (*p).clone()).collect()
            };
            GraspHint { during: major(&during), after: major(&after) }
        })
        .collect()
}

/// Some binding of the schema's parameters to `traj` variables that maps
/// `pre` to exactly `post`, if any.
pub fn find_grounding(
    schema: &ActionSchema,
    traj: &LiftedTrajectory,
    pre: &LiftedSet,
    post: &LiftedSet,
) -> Option<BTreeMap<String, String>> {
    let slots: Vec<(String, Vec<String>)> = schema
        .params
        .iter()
        .map(|(p, ty)| (p.clone(), traj.vars.iter().filter(|v| &v.ty == ty).map(|v| v.name.clone()).collect()))
        .collect();
    let mut found = None;
    for_each_injection(&slots, &mut Vec::new(), &mut |assign| {
        let b: BTreeMap<String, String> =
            schema.params.iter().map(|p| p.0.clone()).zip(assign.iter().cloned()).collect();
        if schema.apply(&b, pre).as_ref() == Some(post) {
            found = Some(b);
            return false;
        }
        true
    });
    found
}
