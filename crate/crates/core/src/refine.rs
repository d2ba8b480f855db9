//! Refinement of abstract plans into primitive motions: pose generators that
//! sample targets from the effect regions of a grounded action, straight-line
//! collision-checked motions, and the backtracking loop over samples, plans
//! and relaxation levels.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::actions::GraspHint;
use crate::geometry::{compose, inverse, relative_pose, wrap_angle, Pose};
use crate::model::{ObjectDecl, Placement, PrimitiveAction, Receptacle, Task, WorldState};
use crate::pddl::{GroundAction, GroundedTask};
use crate::pipeline::{LearnedModel, PipelineError};
use crate::planning::{plan_rows, plan_topk, relax, relaxation_schedule, Plan, RelaxationLevel, DEFAULT_NODE_BUDGET};
use crate::relations::{feature_to_pose, Abstraction, GroundAtom, RelationKind};
use crate::rng::{self, Rng};
use crate::world::{
    carried_by, check_collision, collides_any, goal_satisfied, interpolate, is_graspable, place_body, placement_holds,
    step, Limits, Roles,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RefinementBudget {
    /// Target draws per action.
    pub samples: usize,
    /// Fresh refinement attempts per plan.
    pub restarts: usize,
    /// Plans requested from the top-k planner per relaxation level.
    pub plans: usize,
    pub max_level: usize,
    pub node_budget: usize,
}

impl Default for RefinementBudget {
    fn default() -> Self {
        RefinementBudget { samples: 50, restarts: 5, plans: 10, max_level: 2, node_budget: DEFAULT_NODE_BUDGET }
    }
}

impl RefinementBudget {
    pub fn validate(&self) -> Result<(), &'static str> {
        if self.samples == 0 || self.restarts == 0 || self.plans == 0 || self.node_budget == 0 {
            return Err("refinement budgets must be positive");
        }
        Ok(())
    }
}

/// Atoms a reached state must satisfy.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AtomTest {
    pub must_hold: Vec<GroundAtom>,
    pub must_fail: Vec<GroundAtom>,
}

impl AtomTest {
    pub fn holds(&self, ab: &Abstraction, objects: &[ObjectDecl], s: &WorldState) -> bool {
        self.must_hold.iter().all(|a| ab.evaluate_atom(objects, s, a))
            && !self.must_fail.iter().any(|a| ab.evaluate_atom(objects, s, a))
    }
}

/// Samples targets for one grounded action from its effect regions.
#[derive(Clone, Debug)]
pub struct PoseGenerator<'a> {
    pub ab: &'a Abstraction,
    pub objects: &'a [ObjectDecl],
    pub limits: Limits,
    /// Actuated body that realises the action.
    pub mover: usize,
    /// Region effect atoms the mover can steer, heaviest predictor first.
    pub primary: Vec<GroundAtom>,
    /// Effects plus whatever the next step needs.
    pub test: AtomTest,
    /// Task goal placements this action achieves symbolically; the target
    /// must meet them geometrically too.
    pub placements: Vec<Placement>,
    pub receptacles: &'a [Receptacle],
    /// Objects to hold once the target is reached; `None` keeps the current grip.
    pub hold_after: Option<Vec<usize>>,
    /// Distance scale for moves that only need to leave regions.
    pub reach: f64,
    pub budget: usize,
}

/// Why a step could not be refined.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepFailure {
    /// No actuated body affects the action's effects.
    NoMover,
    /// A grasp or release required before moving did not work out.
    Attachment,
    /// The draw budget ran out.
    Samples,
}

/// Straight motions could not reach a target.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MotionFailure {
    /// Index of the first colliding or invalid primitive.
    pub at: usize,
}

impl<'a> PoseGenerator<'a> {
    fn moved(&self, state: &WorldState) -> Vec<usize> {
        let mut m = carried_by(self.objects, state, self.mover);
        m.push(self.mover);
        m
    }

    /// Heading noise grows with the attempt index.
    fn spread(attempt: usize) -> f64 {
        (0.1 + 0.05 * attempt as f64).min(core::f64::consts::PI)
    }

    /// A mover pose proposal for the `attempt`-th draw.
    pub fn propose(&self, state: &WorldState, r: &mut Rng, attempt: usize) -> Option<Pose> {
        let sigma = Self::spread(attempt);
        let cur = state.poses[self.mover];
        if self.primary.is_empty() {
            let a = rng::uniform(r, -core::f64::consts::PI, core::f64::consts::PI);
            let d = rng::uniform(r, 0.5, 1.5) * self.reach;
            return Some(Pose::new(
                cur.x + d * libm::cos(a),
                cur.y + d * libm::sin(a),
                cur.theta + sigma * rng::normal(r),
            ));
        }
        let atom = self.primary[attempt % self.primary.len()];
        let sym = &self.ab.vocab.symbols[atom.rel];
        let pred = self.ab.predictors.get(&sym.pair)?.iter().find(|p| p.index == sym.index)?;
        let mut f = pred.sample(r);
        for _ in 0..10 {
            if pred.contains(&f) {
                break;
            }
            f = pred.sample(r);
        }
        let [x, y] = atom.args;
        let moved = self.moved(state);
        let (o, x_moves) = if moved.contains(&x) { (x, true) } else { (y, false) };
        let disc = |i: usize| self.objects[i].shape.is_rotationally_symmetric();
        // Pose of `o` in the mover frame stays fixed during the motion.
        let rel = relative_pose(&cur, &state.poses[o]);
        let fxy = (f[0], f[1]);
        let fth = libm::atan2(f[3], f[2]);
        let rot = |th: f64, v: (f64, f64)| {
            let (s, c) = libm::sincos(th);
            (c * v.0 - s * v.1, s * v.0 + c * v.1)
        };
        // Target of `o`: a fixed pose, a fixed position with free heading, or
        // a position that swings with the heading around a disc anchor.
        enum Goal {
            Pose(Pose),
            Point(f64, f64),
            Around(Pose),
        }
        let goal = if x_moves {
            let yp = state.poses[y];
            if disc(x) {
                Goal::Point(yp.x - fxy.0, yp.y - fxy.1)
            } else if disc(y) {
                Goal::Around(yp)
            } else {
                Goal::Pose(compose(&yp, &inverse(&Pose::new(fxy.0, fxy.1, fth))))
            }
        } else {
            let p = feature_to_pose(&self.objects[x], &state.poses[x], &f);
            if disc(y) {
                Goal::Point(p.x, p.y)
            } else {
                Goal::Pose(p)
            }
        };
        let o_theta = match goal {
            Goal::Pose(p) => p.theta,
            Goal::Around(yp) => {
                // Face the anchor so the approach runs along the line of sight.
                let op = state.poses[o];
                libm::atan2(yp.y - op.y, yp.x - op.x) - libm::atan2(fxy.1, fxy.0) + sigma * rng::normal(r)
            }
            Goal::Point(..) => state.poses[o].theta + sigma * rng::normal(r),
        };
        let (ox, oy) = match goal {
            Goal::Pose(p) => (p.x, p.y),
            Goal::Point(px, py) => (px, py),
            Goal::Around(yp) => {
                let d = rot(o_theta, fxy);
                (yp.x - d.0, yp.y - d.1)
            }
        };
        let mth = o_theta - rel.theta;
        let d = rot(mth, (rel.x, rel.y));
        Some(Pose::new(ox - d.0, oy - d.1, wrap_angle(mth)))
    }

    /// Whether a reached state passes the atom test and the placements.
    pub fn accepts(&self, s: &WorldState) -> bool {
        self.test.holds(self.ab, self.objects, s)
            && self.placements.iter().all(|p| placement_holds(self.objects, self.receptacles, s, p))
    }

    /// One draw: propose, then check collisions, attachments and atoms.
    pub fn draw(&self, state: &WorldState, r: &mut Rng, attempt: usize) -> Option<WorldState> {
        let target = self.propose(state, r, attempt)?;
        if !target.is_finite() {
            return None;
        }
        let next = place_body(self.objects, state, self.mover, target);
        if collides_any(self.objects, &next, &self.moved(state)) {
            return None;
        }
        let next = match &self.hold_after {
            Some(h) => set_grip(self.objects, &next, h, &self.limits).ok()?.0,
            None => next,
        };
        self.accepts(&next).then_some(next)
    }
}

/// First accepted target within the generator's budget, drawing from the
/// stream of `(seed, path, attempt)`.
pub fn sample_target(
    gen: &PoseGenerator,
    state: &WorldState,
    seed: u64,
    path: &[u64],
) -> Result<WorldState, StepFailure> {
    for attempt in 0..gen.budget {
        let mut p: Vec<u64> = path.to_vec();
        p.push(attempt as u64);
        if let Some(s) = gen.draw(state, &mut rng::stream(seed, &p), attempt) {
            return Ok(s);
        }
    }
    Err(StepFailure::Samples)
}

/// Grasps and releases turning the current grip into exactly `hold`.
/// Returns the new state and the primitives used.
pub fn set_grip(
    objects: &[ObjectDecl],
    state: &WorldState,
    hold: &[usize],
    limits: &Limits,
) -> Result<(WorldState, Vec<PrimitiveAction>), StepFailure> {
    let mut s = state.clone();
    let mut prims = Vec::new();
    if s.attached.iter().any(|a| !hold.contains(&a.object)) {
        s = step(objects, &s, &PrimitiveAction::Release, limits).map_err(|_| StepFailure::Attachment)?.state;
        prims.push(PrimitiveAction::Release);
    }
    for &o in hold {
        if s.is_attached(o) {
            continue;
        }
        let out = step(objects, &s, &PrimitiveAction::Grasp, limits).map_err(|_| StepFailure::Attachment)?;
        if out.flag.is_some() || !out.state.is_attached(o) {
            return Err(StepFailure::Attachment);
        }
        s = out.state;
        prims.push(PrimitiveAction::Grasp);
    }
    Ok((s, prims))
}

/// Straight-line primitives from `from` to `to`: the base first, then the
/// gripper, then whatever grasp or release makes the grip match. Every
/// intermediate state is collision-checked. Returns primitives and the states
/// they visit.
pub fn motion_to(
    objects: &[ObjectDecl],
    from: &WorldState,
    to: &WorldState,
    limits: &Limits,
) -> Result<(Vec<PrimitiveAction>, Vec<WorldState>), MotionFailure> {
    let roles = Roles::of(objects).ok_or(MotionFailure { at: 0 })?;
    let mut prims = Vec::new();
    let mut states = Vec::new();
    let mut cur = from.clone();
    let bodies: Vec<usize> = roles.base.into_iter().chain([roles.gripper]).collect();
    for body in bodies {
        if cur.poses[body] == to.poses[body] {
            continue;
        }
        let mut movers = carried_by(objects, &cur, body);
        movers.push(body);
        for a in interpolate(objects, &cur, body, to.poses[body], limits) {
            let next = step(objects, &cur, &a, limits).map_err(|_| MotionFailure { at: prims.len() })?.state;
            if collides_any(objects, &next, &movers) {
                return Err(MotionFailure { at: prims.len() });
            }
            prims.push(a);
            states.push(next.clone());
            cur = next;
        }
    }
    let hold: Vec<usize> = to.attached.iter().map(|a| a.object).collect();
    let (s, grip) = set_grip(objects, &cur, &hold, limits).map_err(|_| MotionFailure { at: prims.len() })?;
    for a in grip {
        prims.push(a);
    }
    if s != cur {
        states.push(s.clone());
    }
    let close = s.poses.iter().zip(&to.poses).all(|(p, q)| {
        (p.x - q.x).abs() <= 1e-6 && (p.y - q.y).abs() <= 1e-6 && wrap_angle(p.theta - q.theta).abs() <= 1e-6
    });
    if !close {
        return Err(MotionFailure { at: prims.len() });
    }
    Ok((prims, states))
}

/// Via points tried when the straight motion to a target is blocked.
pub const VIA_TRIES: usize = 8;

/// Like [`motion_to`], but on failure routes the mover through up to
/// [`VIA_TRIES`] random via points at `0.5..2` times `reach` from the target,
/// keeping the grip of `from` until the via point.
pub fn motion_via(
    objects: &[ObjectDecl],
    from: &WorldState,
    to: &WorldState,
    mover: usize,
    reach: f64,
    limits: &Limits,
    r: &mut Rng,
) -> Result<(Vec<PrimitiveAction>, Vec<WorldState>), MotionFailure> {
    let direct = motion_to(objects, from, to, limits);
    if direct.is_ok() {
        return direct;
    }
    let tp = to.poses[mover];
    let mut moved = carried_by(objects, from, mover);
    moved.push(mover);
    for _ in 0..VIA_TRIES {
        let a = rng::uniform(r, -core::f64::consts::PI, core::f64::consts::PI);
        let d = rng::uniform(r, 0.5, 2.0) * reach;
        let via =
            place_body(objects, from, mover, Pose::new(tp.x + d * libm::cos(a), tp.y + d * libm::sin(a), tp.theta));
        if collides_any(objects, &via, &moved) {
            continue;
        }
        let (mut prims, mut states) = match motion_to(objects, from, &via, limits) {
            Ok(m) => m,
            Err(_) => continue,
        };
        let mid = states.last().cloned().unwrap_or_else(|| from.clone());
        if let Ok((p2, s2)) = motion_to(objects, &mid, to, limits) {
            prims.extend(p2);
            states.extend(s2);
            return Ok((prims, states));
        }
    }
    direct
}

/// One refined action of a plan.
#[derive(Clone, Debug, PartialEq)]
pub struct RefinedStep {
    /// Grounded action index.
    pub action: usize,
    pub name: String,
    pub args: Vec<String>,
    pub target: WorldState,
    pub primitives: Vec<PrimitiveAction>,
    /// Draws spent on this step in the successful attempt.
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RefinedPlan {
    pub level: usize,
    /// Rank of the plan among the planner's results at that level.
    pub plan_index: usize,
    pub plan: Plan,
    /// `(action, args)` rows of the abstract plan.
    pub rows: Vec<(String, Vec<String>)>,
    pub steps: Vec<RefinedStep>,
    /// Every state from the initial one to the end, one per primitive.
    pub states: Vec<WorldState>,
    /// Draws spent over the whole search, failed attempts included.
    pub samples: usize,
}

impl RefinedPlan {
    pub fn primitives(&self) -> impl Iterator<Item = &PrimitiveAction> {
        self.steps.iter().flat_map(|s| s.primitives.iter())
    }
}

/// Outcome of refining one plan at one level.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanAttempt {
    pub level: usize,
    pub plan_index: usize,
    /// Furthest step reached over all restarts; the plan length means every
    /// step refined but the final check failed.
    pub failed_step: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SolveError {
    Model(PipelineError),
    InvalidBudget(&'static str),
    /// Every level and plan was tried.
    Exhausted {
        attempts: Vec<PlanAttempt>,
        samples: usize,
        budget_exhausted: bool,
    },
}

impl fmt::Display for SolveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SolveError::Model(e) => write!(f, "{e}"),
            SolveError::InvalidBudget(m) => write!(f, "{m}"),
            SolveError::Exhausted { attempts, .. } => {
                write!(f, "no refinable plan after {} plan attempts", attempts.len())
            }
        }
    }
}

impl From<PipelineError> for SolveError {
    fn from(e: PipelineError) -> Self {
        SolveError::Model(e)
    }
}

/// Stream tag that separates via-point draws from target draws.
const VIA_STREAM: u64 = 0x7669;

/// Ground atoms for `ids` over the task, skipping predicates in `dropped`.
fn atoms_of(
    model: &LearnedModel,
    task: &Task,
    gt: &GroundedTask,
    ids: &[usize],
    dropped: &BTreeSet<String>,
) -> Vec<GroundAtom> {
    ids.iter()
        .filter(|&&i| !dropped.contains(&gt.atoms[i].0))
        .filter_map(|&i| model.ground_atom(task, &gt.atoms[i].0, &gt.atoms[i].1))
        .collect()
}

struct StepContext<'a> {
    model: &'a LearnedModel,
    task: &'a Task,
    gt: &'a GroundedTask,
    limits: &'a Limits,
    level: &'a RelaxationLevel,
    samples: usize,
    /// Grounded atom index of each task goal placement.
    goal_ids: Vec<Option<usize>>,
}

impl<'a> StepContext<'a> {
    fn objects_of(&self, a: &GroundAction, params: &BTreeSet<String>) -> Vec<usize> {
        let schema = &self.model.schemas[a.schema];
        schema
            .params
            .iter()
            .zip(&a.args)
            .filter(|(p, _)| params.contains(&p.0))
            .filter_map(|(_, id)| self.task.object_index(id))
            .filter(|&o| is_graspable(&self.task.objects[o]))
            .collect()
    }

    /// Grip wanted while moving and after arriving, for the action's effect objects.
    fn grips(&self, a: &GroundAction, state: &WorldState) -> (Vec<usize>, Vec<usize>) {
        let hint: GraspHint = self.model.hints.get(a.schema).cloned().unwrap_or_default();
        let sig = self.model.schemas[a.schema].signature().variables();
        let effect = self.objects_of(a, &sig);
        let during = self.objects_of(a, &hint.during);
        let after = self.objects_of(a, &hint.after);
        let adjust = |want: &[usize]| -> Vec<usize> {
            let mut h: Vec<usize> = state.attached.iter().map(|x| x.object).filter(|o| !effect.contains(o)).collect();
            h.extend(want.iter().copied());
            h.sort();
            h.dedup();
            h
        };
        (adjust(&during), adjust(&after))
    }

    /// Refines step `si` of `plan` from `state`.
    fn refine_step(
        &self,
        plan: &Plan,
        si: usize,
        state: &WorldState,
        seed: u64,
        path: &[u64],
    ) -> Result<(RefinedStep, WorldState, Vec<WorldState>), (StepFailure, usize)> {
        let objects = &self.task.objects;
        let ab = &self.model.abstraction;
        let a = &self.gt.actions[plan.actions[si]];
        let dropped = &self.level.dropped;
        let (during, after) = self.grips(a, state);
        let (start, mut prims) = set_grip(objects, state, &during, self.limits).map_err(|e| (e, 0))?;
        let add = atoms_of(self.model, self.task, self.gt, &a.add, dropped);
        let del: Vec<usize> = a.del.iter().copied().filter(|i| !a.add.contains(i)).collect();
        let del = atoms_of(self.model, self.task, self.gt, &del, dropped);
        let next_pre: Vec<usize> = match plan.actions.get(si + 1) {
            Some(&n) => self.gt.actions[n].pre.clone(),
            None => self.gt.goal.iter().collect(),
        };
        let mut must_hold = add.clone();
        must_hold.extend(atoms_of(self.model, self.task, self.gt, &next_pre, dropped));
        must_hold.sort();
        must_hold.dedup();
        let test = AtomTest { must_hold, must_fail: del.clone() };

        let roles = Roles::of(objects).ok_or((StepFailure::NoMover, 0))?;
        let touched = |m: usize| -> usize {
            let mut moved = carried_by(objects, &start, m);
            moved.push(m);
            add.iter()
                .chain(&del)
                .filter(|g| {
                    let args = g.arg_slice(&ab.vocab);
                    args.iter().filter(|o| moved.contains(o)).count() == 1
                        || (args.len() == 1 && moved.contains(&args[0]))
                })
                .count()
        };
        // Every actuated body touching the most effects; ties share the budget.
        let mut movers = alloc::vec![roles.gripper];
        let mut best = touched(roles.gripper);
        if let Some(b) = roles.base {
            let t = touched(b);
            if t > best {
                movers = alloc::vec![b];
                best = t;
            } else if t == best {
                movers.push(b);
            }
        }
        if best == 0 {
            return Err((StepFailure::NoMover, 0));
        }
        let primary_for = |mover: usize| -> Vec<GroundAtom> {
            let mut moved = carried_by(objects, &start, mover);
            moved.push(mover);
            let mut primary: Vec<(f64, GroundAtom)> = add
                .iter()
                .filter(|g| {
                    let sym = &ab.vocab.symbols[g.rel];
                    sym.kind == RelationKind::Region && g.args.iter().filter(|o| moved.contains(o)).count() == 1
                })
                .map(|g| {
                    let sym = &ab.vocab.symbols[g.rel];
                    let w = ab
                        .predictors
                        .get(&sym.pair)
                        .and_then(|ps| ps.iter().find(|p| p.index == sym.index))
                        .map(|p| p.mixture.weights.iter().cloned().fold(0.0, f64::max))
                        .unwrap_or(0.0);
                    (w, *g)
                })
                .collect();
            primary.sort_by(|p, q| q.0.partial_cmp(&p.0).unwrap_or(core::cmp::Ordering::Equal).then(p.1.cmp(&q.1)));
            primary.into_iter().map(|p| p.1).collect()
        };
        let reach = add
            .iter()
            .chain(&del)
            .flat_map(|g| {
                let pair = &ab.vocab.symbols[g.rel].pair;
                let n = ab.predictors.get(pair).map_or(0, |v| v.len());
                (1..=n).filter_map(move |k| ab.region_samples(pair, k).map(|s| s.reach))
            })
            .fold(0.0, f64::max)
            .max(0.05);
        let placements: Vec<Placement> = self
            .task
            .goal
            .iter()
            .zip(&self.goal_ids)
            .filter(|(_, g)| g.is_some_and(|g| a.add.contains(&g)))
            .map(|(p, _)| *p)
            .collect();
        let gens: Vec<PoseGenerator> = movers
            .iter()
            .map(|&mover| PoseGenerator {
                ab,
                objects,
                limits: *self.limits,
                mover,
                primary: primary_for(mover),
                test: test.clone(),
                placements: placements.clone(),
                receptacles: &self.task.receptacles,
                hold_after: Some(after.clone()),
                reach,
                budget: self.samples,
            })
            .collect();
        for attempt in 0..self.samples {
            let gen = &gens[attempt % gens.len()];
            let mut p = path.to_vec();
            p.push(attempt as u64);
            let target = match gen.draw(&start, &mut rng::stream(seed, &p), attempt / gens.len()) {
                Some(t) => t,
                None => continue,
            };
            let mut vr = rng::stream(seed, &[&p[..], &[VIA_STREAM]].concat());
            let (motion, states) = match motion_via(objects, &start, &target, gen.mover, reach, self.limits, &mut vr) {
                Ok(m) => m,
                Err(_) => continue,
            };
            let reached = states.last().cloned().unwrap_or_else(|| start.clone());
            if !gen.accepts(&reached) {
                continue;
            }
            let mut all_states = Vec::new();
            if start != *state {
                all_states.push(start.clone());
            }
            all_states.extend(states);
            prims.extend(motion);
            let step = RefinedStep {
                action: plan.actions[si],
                name: a.name.clone(),
                args: a.args.clone(),
                target: reached.clone(),
                primitives: prims,
                samples: attempt + 1,
            };
            return Ok((step, reached, all_states));
        }
        Err((StepFailure::Samples, self.samples))
    }
}

/// Replays primitives from `init`; every state must be collision-free.
/// Returns the visited states after `init`.
pub fn replay(
    objects: &[ObjectDecl],
    init: &WorldState,
    prims: &[PrimitiveAction],
    limits: &Limits,
) -> Result<Vec<WorldState>, usize> {
    let mut cur = init.clone();
    let mut out = Vec::with_capacity(prims.len());
    for (i, a) in prims.iter().enumerate() {
        let o = step(objects, &cur, a, limits).map_err(|_| i)?;
        if o.flag.is_some() || !check_collision(objects, &o.state).is_empty() {
            return Err(i);
        }
        cur = o.state;
        out.push(cur.clone());
    }
    Ok(out)
}

/// Top-k planning plus refinement with backtracking. Relaxation levels are
/// the outer loop, then plans in rank order, then restarts; target draws are
/// innermost. A result is returned only if replaying its primitives from the
/// initial state is collision-free and ends in a state that meets both the
/// unrelaxed symbolic goal and the geometric goal.
///
/// If the whole goal fails and it has several placements, they are solved
/// one at a time instead, each stage keeping the earlier ones; that sequence
/// is retried up to `budget.restarts` times.
pub fn solve_task(
    task: &Task,
    model: &LearnedModel,
    limits: &Limits,
    budget: &RefinementBudget,
    seed: u64,
) -> Result<RefinedPlan, SolveError> {
    budget.validate().map_err(SolveError::InvalidBudget)?;
    let (mut attempts, mut total, mut exhausted) = match solve_flat(task, model, limits, budget, seed, 0) {
        Err(SolveError::Exhausted { attempts, samples, budget_exhausted }) if task.goal.len() > 1 => {
            (attempts, samples, budget_exhausted)
        }
        other => return other,
    };
    // Serialized: one more placement per stage, from the state the previous
    // stage reached, keeping the placements already made in the goal. A dead
    // end (earlier placements leaving no refinable next stage) restarts the
    // whole sequence with fresh stage seeds, up to the restart budget.
    let mut stage = 1u64;
    for _ in 0..budget.restarts {
        match solve_serialized(task, model, limits, budget, seed, &mut stage) {
            Ok((out, samples)) => {
                total += samples;
                let prims: Vec<PrimitiveAction> = out.primitives().copied().collect();
                match final_check(task, model, &model.ground_task(task)?, &prims, limits) {
                    Ok(()) => return Ok(RefinedPlan { samples: total, ..out }),
                    Err(reason) => attempts.push(PlanAttempt {
                        level: out.level,
                        plan_index: out.plan_index,
                        failed_step: out.plan.actions.len(),
                        reason,
                    }),
                }
            }
            Err(SolveError::Exhausted { attempts: a, samples, budget_exhausted }) => {
                attempts.extend(a);
                total += samples;
                exhausted |= budget_exhausted;
            }
            Err(e) => return Err(e),
        }
    }
    Err(SolveError::Exhausted { attempts, samples: total, budget_exhausted: exhausted })
}

/// One pass of serialized solving. Returns the joined plan and the samples it
/// used.
fn solve_serialized(
    task: &Task,
    model: &LearnedModel,
    limits: &Limits,
    budget: &RefinementBudget,
    seed: u64,
    stage: &mut u64,
) -> Result<(RefinedPlan, usize), SolveError> {
    let mut attempts = Vec::new();
    let (mut total, mut exhausted) = (0, false);
    let mut done: Vec<Placement> = Vec::new();
    let mut left = task.goal.clone();
    let mut state = task.init.clone();
    let mut out = RefinedPlan {
        level: 0,
        plan_index: 0,
        plan: Plan { actions: Vec::new() },
        rows: Vec::new(),
        steps: Vec::new(),
        states: vec![task.init.clone()],
        samples: 0,
    };
    while !left.is_empty() {
        let mut next = None;
        for (i, p) in left.iter().enumerate() {
            let mut sub = task.clone();
            sub.init = state.clone();
            sub.goal = done.clone();
            sub.goal.push(*p);
            let r = solve_flat(&sub, model, limits, budget, seed, *stage);
            *stage += 1;
            match r {
                Ok(part) => {
                    next = Some((i, part));
                    break;
                }
                Err(SolveError::Exhausted { attempts: a, samples, budget_exhausted }) => {
                    attempts.extend(a);
                    total += samples;
                    exhausted |= budget_exhausted;
                }
                Err(e) => return Err(e),
            }
        }
        let (i, part) = match next {
            Some(x) => x,
            None => return Err(SolveError::Exhausted { attempts, samples: total, budget_exhausted: exhausted }),
        };
        done.push(left.remove(i));
        state = part.states.last().cloned().unwrap_or(state);
        total += part.samples;
        out.level = out.level.max(part.level);
        out.plan_index = out.plan_index.max(part.plan_index);
        out.plan.actions.extend(part.plan.actions);
        out.rows.extend(part.rows);
        out.steps.extend(part.steps);
        out.states.extend(part.states.into_iter().skip(1));
    }
    Ok((out, total))
}

/// Replays `prims` from the task's initial state and checks the goal both
/// symbolically, at unrelaxed semantics, and geometrically.
fn final_check(
    task: &Task,
    model: &LearnedModel,
    gt: &GroundedTask,
    prims: &[PrimitiveAction],
    limits: &Limits,
) -> Result<(), String> {
    let goal_atoms = atoms_of(model, task, gt, &gt.goal.iter().collect::<Vec<_>>(), &BTreeSet::new());
    match replay(&task.objects, &task.init, prims, limits) {
        Ok(v) => {
            let end = v.last().unwrap_or(&task.init);
            if !goal_atoms.iter().all(|a| model.abstraction.evaluate_atom(&task.objects, end, a)) {
                Err(String::from("final state misses the symbolic goal"))
            } else if !goal_satisfied(task, end) {
                Err(String::from("final state misses the geometric goal"))
            } else {
                Ok(())
            }
        }
        Err(i) => Err(alloc::format!("replay fails at primitive {i}")),
    }
}

/// The whole goal at once: relaxation levels outermost, then plans, then
/// restarts. `stage` keeps the random streams of serialized stages apart.
fn solve_flat(
    task: &Task,
    model: &LearnedModel,
    limits: &Limits,
    budget: &RefinementBudget,
    seed: u64,
    stage: u64,
) -> Result<RefinedPlan, SolveError> {
    let gt = model.ground_task(task)?;
    let preds: Vec<String> = model.domain.predicates.iter().map(|p| p.name.clone()).collect();
    let vocab = &model.abstraction.vocab;
    let is_none = |p: &str| vocab.index_of(p).is_some_and(|i| vocab.symbols[i].kind == RelationKind::None);
    let goal_ids: Vec<Option<usize>> =
        model.goal_atoms(task)?.iter().map(|(rel, args)| gt.atom_index(rel, args)).collect();
    let mut attempts = Vec::new();
    let mut total = 0usize;
    let mut exhausted = false;
    for level in relaxation_schedule(&preds, &is_none, budget.max_level) {
        let relaxed = relax(&gt, &level);
        let topk = plan_topk(&relaxed, budget.plans, budget.node_budget);
        exhausted |= topk.budget_exhausted;
        let ctx = StepContext {
            model,
            task,
            gt: &gt,
            limits,
            level: &level,
            samples: budget.samples,
            goal_ids: goal_ids.clone(),
        };
        for (pi, plan) in topk.plans.iter().enumerate() {
            let mut furthest = 0;
            let mut reason = String::new();
            for restart in 0..budget.restarts {
                let path = [stage, level.level as u64, pi as u64, restart as u64];
                let mut state = task.init.clone();
                let mut steps = Vec::new();
                let mut states = vec![task.init.clone()];
                let mut failed = None;
                for si in 0..plan.actions.len() {
                    let p = [path[0], path[1], path[2], path[3], si as u64];
                    match ctx.refine_step(plan, si, &state, seed, &p) {
                        Ok((st, reached, visited)) => {
                            total += st.samples;
                            states.extend(visited);
                            steps.push(st);
                            state = reached;
                        }
                        Err((why, used)) => {
                            total += used;
                            failed = Some((si, why));
                            break;
                        }
                    }
                }
                if let Some((si, why)) = failed {
                    if si >= furthest {
                        furthest = si;
                        reason = alloc::format!("{why:?}");
                    }
                    continue;
                }
                let prims: Vec<PrimitiveAction> = steps.iter().flat_map(|s| s.primitives.iter().copied()).collect();
                let verdict = final_check(task, model, &gt, &prims, limits);
                match verdict {
                    Ok(()) => {
                        return Ok(RefinedPlan {
                            level: level.level,
                            plan_index: pi,
                            plan: plan.clone(),
                            rows: plan_rows(&gt, plan),
                            steps,
                            states,
                            samples: total,
                        })
                    }
                    Err(why) => {
                        furthest = plan.actions.len();
                        reason = why;
                    }
                }
            }
            attempts.push(PlanAttempt { level: level.level, plan_index: pi, failed_step: furthest, reason });
        }
    }
    Err(SolveError::Exhausted { attempts, samples: total, budget_exhausted: exhausted })
}
