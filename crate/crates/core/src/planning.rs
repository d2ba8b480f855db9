//! Top-k forward search over grounded tasks, plan validation and
//! precondition relaxation.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::pddl::{BitSet, GroundedTask};

/// Grounded action indices in execution order; cost is the length.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Plan {
    pub actions: Vec<usize>,
}

impl Plan {
    pub fn cost(&self) -> usize {
        self.actions.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TopK {
    pub plans: Vec<Plan>,
    /// The node budget ran out before the search space was exhausted or k
    /// plans were found.
    pub budget_exhausted: bool,
}

pub const DEFAULT_NODE_BUDGET: usize = 1_000_000;

struct Node {
    state: u32,
    parent: u32,
    action: u32,
}

const ROOT: u32 = u32::MAX;

/// Up to `k` distinct plans in nondecreasing length. Breadth-first search
/// with FIFO order, so equal-length plans come out in lexicographic order of
/// their action ids. Each state may be expanded up to `k` times, which keeps
/// the k shortest goal paths reachable; a path never revisits one of its own
/// states, and goal nodes are not expanded further.
pub fn plan_topk(task: &GroundedTask, k: usize, node_budget: usize) -> TopK {
    let k = k.max(1);
    let mut ids: BTreeMap<BitSet, u32> = BTreeMap::new();
    let mut states: Vec<BitSet> = Vec::new();
    let mut intern = |s: BitSet, states: &mut Vec<BitSet>| -> u32 {
        if let Some(&i) = ids.get(&s) {
            return i;
        }
        let i = states.len() as u32;
        ids.insert(s.clone(), i);
        states.push(s);
        i
    };
    let root = intern(task.init.clone(), &mut states);
    let mut nodes = vec![Node { state: root, parent: ROOT, action: 0 }];
    let mut expanded: Vec<u32> = Vec::new();
    let mut queue = VecDeque::from([0u32]);
    let mut plans = Vec::new();
    let mut exhausted = false;

    let path_of = |nodes: &[Node], mut n: u32| -> Vec<usize> {
        let mut out = Vec::new();
        while nodes[n as usize].parent != ROOT {
            out.push(nodes[n as usize].action as usize);
            n = nodes[n as usize].parent;
        }
        out.reverse();
        out
    };
    let on_path = |nodes: &[Node], mut n: u32, s: u32| -> bool {
        loop {
            if nodes[n as usize].state == s {
                return true;
            }
            if nodes[n as usize].parent == ROOT {
                return false;
            }
            n = nodes[n as usize].parent;
        }
    };

    while let Some(n) = queue.pop_front() {
        let sid = nodes[n as usize].state;
        if expanded.len() <= sid as usize {
            expanded.resize(sid as usize + 1, 0);
        }
        if expanded[sid as usize] as usize >= k {
            continue;
        }
        expanded[sid as usize] += 1;
        if task.is_goal(&states[sid as usize]) {
            plans.push(Plan { actions: path_of(&nodes, n) });
            if plans.len() >= k {
                break;
            }
            continue;
        }
        let s = states[sid as usize].clone();
        for (ai, a) in task.actions.iter().enumerate() {
            if !a.applicable(&s) {
                continue;
            }
            let next = a.apply(&s);
            if next == s {
                continue;
            }
            let nid = intern(next, &mut states);
            if expanded.get(nid as usize).is_some_and(|&c| c as usize >= k) || on_path(&nodes, n, nid) {
                continue;
            }
            if nodes.len() >= node_budget {
                exhausted = true;
                break;
            }
            nodes.push(Node { state: nid, parent: n, action: ai as u32 });
            queue.push_back(nodes.len() as u32 - 1);
        }
        if exhausted {
            break;
        }
    }
    TopK { plans, budget_exhausted: exhausted }
}

/// Why a plan failed validation: the step that was not applicable, or
/// `plan.len()` if every step applied but the goal does not hold.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PlanFailure {
    pub index: usize,
}

pub fn validate_plan(task: &GroundedTask, plan: &Plan) -> Result<(), PlanFailure> {
    let mut s = task.init.clone();
    for (i, &a) in plan.actions.iter().enumerate() {
        let act = match task.actions.get(a) {
            Some(x) => x,
            None => return Err(PlanFailure { index: i }),
        };
        if !act.applicable(&s) {
            return Err(PlanFailure { index: i });
        }
        s = act.apply(&s);
    }
    if task.is_goal(&s) {
        Ok(())
    } else {
        Err(PlanFailure { index: plan.actions.len() })
    }
}

/// States visited by `plan` from the initial state, including both ends.
/// Stops early at the first inapplicable step.
pub fn trace(task: &GroundedTask, plan: &Plan) -> Vec<BitSet> {
    let mut out = vec![task.init.clone()];
    for &a in &plan.actions {
        let s = out.last().cloned().unwrap_or_default();
        if !task.actions[a].applicable(&s) {
            break;
        }
        out.push(task.actions[a].apply(&s));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelaxationLevel {
    pub level: usize,
    pub dropped: BTreeSet<String>,
}

/// Default lattice: level 0 drops nothing, level 1 drops every `clear_*`
/// relation, level 2 also drops the none relations. `is_none` tells which
/// predicate names are none relations.
pub fn relaxation_schedule(
    predicates: &[String],
    is_none: &dyn Fn(&str) -> bool,
    max_level: usize,
) -> Vec<RelaxationLevel> {
    let clear: BTreeSet<String> = predicates.iter().filter(|p| p.starts_with("clear")).cloned().collect();
    let mut none = clear.clone();
    none.extend(predicates.iter().filter(|p| is_none(p)).cloned());
    let levels = [BTreeSet::new(), clear, none];
    levels
        .into_iter()
        .take(max_level + 1)
        .enumerate()
        .map(|(level, dropped)| RelaxationLevel { level, dropped })
        .collect()
}

/// Name-based none test for domains without a vocabulary: a relation ending
/// in `_0` that is not a `clear` relation.
pub fn looks_like_none(p: &str) -> bool {
    p.ends_with("_0") && !p.starts_with("clear")
}

/// Drops atoms of the level's predicates from every precondition and from
/// the goal. Effects are kept; they no longer constrain anything.
pub fn relax(task: &GroundedTask, level: &RelaxationLevel) -> GroundedTask {
    if level.dropped.is_empty() {
        return task.clone();
    }
    let dropped: Vec<bool> = task.atoms.iter().map(|(p, _)| level.dropped.contains(p)).collect();
    let mut out = task.clone();
    for a in &mut out.actions {
        a.pre.retain(|&i| !dropped[i]);
    }
    for (i, d) in dropped.iter().enumerate() {
        if *d {
            out.goal.remove(i);
        }
    }
    out
}

/// `[{"action": name, "args": [ids]}]` rows for a plan, as (name, args).
pub fn plan_rows(task: &GroundedTask, plan: &Plan) -> Vec<(String, Vec<String>)> {
    plan.actions.iter().map(|&a| (task.actions[a].name.to_string(), task.actions[a].args.clone())).collect()
}
