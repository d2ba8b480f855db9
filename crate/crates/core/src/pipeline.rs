//! End-to-end learning: region predictors, relations, lifted actions, grasp
//! hints and goal relations from demonstrations, plus grounded problems for
//! new tasks.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::actions::{
    abstract_and_lift, invent_actions_detailed, learn_grasp_hints, ActionError, ActionSchema, GraspHint, LiftOptions,
    LiftedTrajectory,
};
use crate::model::{Task, Trajectory};
use crate::pddl::{ground, learned_domain, make_problem, Domain, GroundError, GroundedTask, Problem};
use crate::rcr::{learn_predictors, usable, CriticalityParams, LearnError, TypePair};
use crate::relations::{invent_relations, Abstraction, FreeParams, GroundAtom, RelationKind, Vocabulary};

#[derive(Clone, Debug, PartialEq)]
pub struct LearnOptions {
    pub criticality: CriticalityParams,
    pub free: FreeParams,
    pub lift: LiftOptions,
    pub domain_name: String,
}

impl Default for LearnOptions {
    fn default() -> Self {
        LearnOptions {
            criticality: CriticalityParams::default(),
            free: FreeParams::default(),
            lift: LiftOptions::default(),
            domain_name: "learned".to_string(),
        }
    }
}

/// Everything a solver needs from one learning run.
#[derive(Clone, Debug, PartialEq)]
pub struct LearnedModel {
    pub abstraction: Abstraction,
    pub schemas: Vec<ActionSchema>,
    /// Aligned with `schemas`.
    pub hints: Vec<GraspHint>,
    /// Relation that expresses "object rests on surface" per type pair.
    pub goal_relations: BTreeMap<TypePair, String>,
    pub domain: Domain,
}

#[derive(Clone, Debug, PartialEq)]
pub enum PipelineError {
    Learn(LearnError),
    Action(ActionError),
    Ground(GroundError),
    /// A goal placement whose type pair has no learned goal relation.
    UnsupportedGoal(String),
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PipelineError::Learn(e) => write!(f, "{e}"),
            PipelineError::Action(e) => write!(f, "{e}"),
            PipelineError::Ground(e) => write!(f, "{e}"),
            PipelineError::UnsupportedGoal(p) => write!(f, "no learned relation expresses the goal {p}"),
        }
    }
}

impl From<LearnError> for PipelineError {
    fn from(e: LearnError) -> Self {
        PipelineError::Learn(e)
    }
}

impl From<ActionError> for PipelineError {
    fn from(e: ActionError) -> Self {
        PipelineError::Action(e)
    }
}

impl From<GroundError> for PipelineError {
    fn from(e: GroundError) -> Self {
        PipelineError::Ground(e)
    }
}

/// Relations that are true in no state of any lifted trajectory.
pub fn never_true(vocab: &Vocabulary, trajs: &[LiftedTrajectory]) -> BTreeSet<String> {
    let seen: BTreeSet<&str> = trajs.iter().flat_map(|t| t.states.iter().flatten()).map(|a| a.rel.as_str()).collect();
    vocab.symbols.iter().filter(|s| !seen.contains(s.name.as_str())).map(|s| s.name.clone()).collect()
}

/// Per type pair, the region relation most often gained between the first
/// and last state of a demonstration.
pub fn goal_relations(vocab: &Vocabulary, trajs: &[LiftedTrajectory]) -> BTreeMap<TypePair, String> {
    let mut counts: BTreeMap<(TypePair, String), usize> = BTreeMap::new();
    for t in trajs {
        let (first, last) = match (t.states.first(), t.states.last()) {
            (Some(a), Some(b)) => (a, b),
            _ => continue,
        };
        for a in last.difference(first) {
            let sym = match vocab.index_of(&a.rel) {
                Some(i) => &vocab.symbols[i],
                None => continue,
            };
            if sym.kind == RelationKind::Region {
                *counts.entry((sym.pair.clone(), a.rel.clone())).or_insert(0) += 1;
            }
        }
    }
    let mut best: BTreeMap<TypePair, (usize, String)> = BTreeMap::new();
    for ((pair, rel), c) in counts {
        let e = best.entry(pair).or_insert((0, String::new()));
        if c > e.0 {
            *e = (c, rel);
        }
    }
    best.into_iter().map(|(p, (_, r))| (p, r)).collect()
}

/// Learns a model from demonstrations. Only successful demonstrations (or all,
/// if the criticality parameters say so) are used.
pub fn learn_model(demos: &[Trajectory], opts: &LearnOptions) -> Result<LearnedModel, PipelineError> {
    let predictors = learn_predictors(demos, &opts.criticality)?;
    let vocab = invent_relations(&predictors, &[]);
    let abstraction = Abstraction::new(vocab, predictors, opts.free.clone());
    let used: Vec<Trajectory> = usable(demos, &opts.criticality).into_iter().filter(|d| d.success).cloned().collect();
    let lifted = abstract_and_lift(&used, &abstraction, &opts.lift);
    model_from_lifted(abstraction, &lifted, &opts.domain_name)
}

/// The action-level half of [`learn_model`].
pub fn model_from_lifted(
    abstraction: Abstraction,
    lifted: &[LiftedTrajectory],
    domain_name: &str,
) -> Result<LearnedModel, PipelineError> {
    let invented = invent_actions_detailed(lifted)?;
    let hints = learn_grasp_hints(&invented, lifted);
    let schemas: Vec<ActionSchema> = invented.into_iter().map(|a| a.schema).collect();
    let omit = never_true(&abstraction.vocab, lifted);
    let domain = learned_domain(domain_name, &abstraction.vocab, &schemas, &omit);
    let goal_relations = goal_relations(&abstraction.vocab, lifted);
    Ok(LearnedModel { abstraction, schemas, hints, goal_relations, domain })
}

impl LearnedModel {
    /// Ground atoms of the task goal, as `(relation, [object ids])`.
    pub fn goal_atoms(&self, task: &Task) -> Result<Vec<(String, Vec<String>)>, PipelineError> {
        task.goal
            .iter()
            .map(|p| {
                let (o, s) = (&task.objects[p.object], &task.objects[p.surface]);
                let rel = self
                    .goal_relations
                    .get(&(o.ty.clone(), s.ty.clone()))
                    .ok_or_else(|| PipelineError::UnsupportedGoal(alloc::format!("({} on {})", o.id, s.id)))?;
                Ok((rel.clone(), alloc::vec![o.id.clone(), s.id.clone()]))
            })
            .collect()
    }

    /// PDDL problem for `task`: objects of declared types, the abstraction of
    /// the initial state restricted to declared predicates, and the goal.
    pub fn problem_for(&self, task: &Task) -> Result<Problem, PipelineError> {
        let types: BTreeSet<&str> = self.domain.types.iter().map(|t| t.0.as_str()).collect();
        let objects: Vec<(String, String)> = task
            .objects
            .iter()
            .filter(|o| types.contains(o.ty.as_str()))
            .map(|o| (o.id.clone(), o.ty.clone()))
            .collect();
        let ab = &self.abstraction;
        let init: Vec<(String, Vec<String>)> = ab
            .abstract_state(&task.objects, &task.init)
            .iter()
            .filter(|a| self.domain.predicate(&ab.vocab.symbols[a.rel].name).is_some())
            .map(|a| atom_strings(&ab.vocab, task, a))
            .collect();
        let goal = self.goal_atoms(task)?;
        Ok(make_problem(&task.id, &self.domain.name, &objects, &init, &goal))
    }

    pub fn ground_task(&self, task: &Task) -> Result<GroundedTask, PipelineError> {
        Ok(ground(&self.domain, &self.problem_for(task)?)?)
    }

    /// Ground atom for a `(relation, object ids)` pair, if both are known.
    pub fn ground_atom(&self, task: &Task, rel: &str, args: &[String]) -> Option<GroundAtom> {
        let r = self.abstraction.vocab.index_of(rel)?;
        let idx: Vec<usize> = args.iter().map(|a| task.object_index(a)).collect::<Option<_>>()?;
        match idx.as_slice() {
            [a] => Some(GroundAtom::unary(r, *a)),
            [a, b] => Some(GroundAtom::binary(r, *a, *b)),
            _ => None,
        }
    }
}

fn atom_strings(vocab: &Vocabulary, task: &Task, a: &GroundAtom) -> (String, Vec<String>) {
    (vocab.symbols[a.rel].name.clone(), a.arg_slice(vocab).iter().map(|&o| task.objects[o].id.clone()).collect())
}
