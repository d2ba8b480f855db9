//! Deterministic planar simulator for the packing and cafe worlds.

mod layout;
mod script;

pub use layout::init_world;
pub use script::{
    episode_specs, generate_demos, generate_episode, infer_primitive, interpolate, DemoScript, EpisodeSpec, Recorder,
    ScriptError,
};

use alloc::vec::Vec;
use core::fmt;

use crate::geometry::{compose, footprints_overlap, relative_pose, wrap_angle, Pose};
use crate::model::{
    Attachment, ObjectDecl, Placement, PrimitiveAction, Receptacle, Task, WorldState, BASE, GRIPPER, SURFACE,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    Packing,
    Cafe,
}

/// Where the gripper (or base) starts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StartMode {
    /// Gripper on a ring around the first can; cafe base parked at the first
    /// can's surface. Used for demonstrations.
    NearFirstCan,
    /// Anywhere in the workspace.
    Anywhere,
    /// Cafe base parked at a random surface, which may hold no can. Packing
    /// treats it like `Anywhere`.
    DockedAnywhere,
    /// Cafe base parked at a surface other than the first can's. Packing
    /// treats it like `Anywhere`.
    DockedAway,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Geometry {
    /// Packing table extent.
    pub table_w: f64,
    pub table_h: f64,
    pub box_size: f64,
    /// Pockets sit at `(+-pocket_offset, +-pocket_offset)` in the box frame.
    pub pocket_offset: f64,
    pub pocket_tolerance: f64,
    pub can_radius: f64,
    pub gripper_size: f64,
    pub base_w: f64,
    pub base_h: f64,
    pub grasp_min: f64,
    pub grasp_max: f64,
    /// Radius of the round cafe tables.
    pub surface_radius: f64,
    /// Minimum distance between cafe table centres.
    pub surface_spacing: f64,
    /// Side of the square cafe room.
    pub room_size: f64,
    pub step_cap: f64,
    pub rot_cap: f64,
}

impl Geometry {
    pub fn packing() -> Geometry {
        Geometry {
            table_w: 2.6,
            table_h: 2.0,
            box_size: 0.09,
            pocket_offset: 0.02,
            pocket_tolerance: 0.007,
            can_radius: 0.0125,
            gripper_size: 0.02,
            base_w: 0.3,
            base_h: 0.24,
            grasp_min: 0.02,
            grasp_max: 0.05,
            surface_radius: 0.0,
            surface_spacing: 0.0,
            room_size: 0.0,
            step_cap: 0.01,
            rot_cap: 0.05,
        }
    }

    pub fn cafe() -> Geometry {
        Geometry {
            table_w: 0.0,
            table_h: 0.0,
            box_size: 0.0,
            pocket_offset: 0.0,
            pocket_tolerance: 0.0,
            can_radius: 0.0125,
            gripper_size: 0.02,
            base_w: 0.3,
            base_h: 0.24,
            grasp_min: 0.02,
            grasp_max: 0.05,
            surface_radius: 0.3,
            surface_spacing: 1.8,
            room_size: 5.0,
            step_cap: 0.01,
            rot_cap: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorldConfig {
    pub domain: Domain,
    pub cans: usize,
    /// Number of cafe surfaces (ignored for packing).
    pub surfaces: usize,
    pub geometry: Geometry,
    pub start: StartMode,
    pub seed: u64,
    pub horizon: usize,
}

impl WorldConfig {
    pub fn packing(cans: usize, seed: u64) -> WorldConfig {
        WorldConfig {
            domain: Domain::Packing,
            cans,
            surfaces: 2,
            geometry: Geometry::packing(),
            start: StartMode::NearFirstCan,
            seed,
            horizon: 20_000,
        }
    }

    pub fn cafe(cans: usize, seed: u64) -> WorldConfig {
        WorldConfig {
            domain: Domain::Cafe,
            cans,
            surfaces: 3,
            geometry: Geometry::cafe(),
            start: StartMode::DockedAnywhere,
            seed,
            horizon: 40_000,
        }
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        let g = &self.geometry;
        if !(g.grasp_min < g.grasp_max) {
            return Err(WorldError::InvalidConfig("grasp band must satisfy r_min < r_max"));
        }
        if !(g.step_cap > 0.0 && g.rot_cap > 0.0) {
            return Err(WorldError::InvalidConfig("step caps must be positive"));
        }
        if self.domain == Domain::Cafe && self.surfaces < 2 {
            return Err(WorldError::InvalidConfig("cafe needs at least two surfaces"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum WorldError {
    InvalidConfig(&'static str),
    /// Rejection sampling of an initial layout ran out of attempts.
    Infeasible,
    InvalidPrimitive,
}

impl fmt::Display for WorldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WorldError::InvalidConfig(m) => write!(f, "invalid world config: {m}"),
            WorldError::Infeasible => write!(f, "configuration infeasible: no collision-free layout found"),
            WorldError::InvalidPrimitive => write!(f, "primitive exceeds step bounds or targets a passive object"),
        }
    }
}

/// Motion limits and grasp band used by [`step`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Limits {
    pub step_cap: f64,
    pub rot_cap: f64,
    pub grasp_min: f64,
    pub grasp_max: f64,
}

impl Limits {
    pub fn from_geometry(g: &Geometry) -> Limits {
        Limits { step_cap: g.step_cap, rot_cap: g.rot_cap, grasp_min: g.grasp_min, grasp_max: g.grasp_max }
    }
}

impl Default for Limits {
    fn default() -> Limits {
        Limits::from_geometry(&Geometry::packing())
    }
}

/// Indices of the actuated bodies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Roles {
    pub gripper: usize,
    pub base: Option<usize>,
}

impl Roles {
    pub fn of(objects: &[ObjectDecl]) -> Option<Roles> {
        let gripper = objects.iter().position(|o| o.ty == GRIPPER)?;
        let base = objects.iter().position(|o| o.ty == BASE);
        Some(Roles { gripper, base })
    }

    pub fn is_actuated(&self, o: usize) -> bool {
        o == self.gripper || Some(o) == self.base
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepFlag {
    GraspNoCandidate,
    GraspAmbiguous,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub state: WorldState,
    pub flag: Option<StepFlag>,
}

pub fn is_graspable(d: &ObjectDecl) -> bool {
    d.ty != SURFACE && d.ty != GRIPPER && d.ty != BASE
}

/// Surfaces carry cans and pass under the gripper, but a mobile base cannot
/// drive through them.
fn solid_pair(a: &ObjectDecl, b: &ObjectDecl) -> bool {
    match (a.ty == SURFACE, b.ty == SURFACE) {
        (false, false) => true,
        (true, true) => false,
        (true, false) => b.ty == BASE,
        (false, true) => a.ty == BASE,
    }
}

/// Objects that move rigidly when `body` moves (excluding `body`).
pub fn carried_by(objects: &[ObjectDecl], state: &WorldState, body: usize) -> Vec<usize> {
    let roles = match Roles::of(objects) {
        Some(r) => r,
        None => return Vec::new(),
    };
    let mut out = Vec::new();
    if Some(body) == roles.base {
        out.push(roles.gripper);
    }
    if body == roles.gripper || Some(body) == roles.base {
        out.extend(state.attached.iter().map(|a| a.object));
    }
    out
}

/// Rigidly moves `body` to `target`, carrying the gripper (for the base) and
/// any attached objects. No bounds are checked.
pub fn place_body(objects: &[ObjectDecl], state: &WorldState, body: usize, target: Pose) -> WorldState {
    let roles = Roles::of(objects);
    let mut next = state.clone();
    next.poses[body] = Pose::new(target.x, target.y, target.theta);
    if let Some(r) = roles {
        if Some(body) == r.base {
            let rel = relative_pose(&state.poses[body], &state.poses[r.gripper]);
            next.poses[r.gripper] = compose(&next.poses[body], &rel);
        }
        for a in &next.attached {
            next.poses[a.object] = compose(&next.poses[r.gripper], &a.offset);
        }
    }
    next
}

/// Applies one primitive action.
pub fn step(
    objects: &[ObjectDecl],
    state: &WorldState,
    action: &PrimitiveAction,
    limits: &Limits,
) -> Result<StepOutcome, WorldError> {
    let roles = Roles::of(objects).ok_or(WorldError::InvalidConfig("world has no gripper"))?;
    match *action {
        PrimitiveAction::Move { body, dx, dy, dtheta } => {
            let tol = 1e-12;
            if !roles.is_actuated(body)
                || dx.abs() > limits.step_cap + tol
                || dy.abs() > limits.step_cap + tol
                || dtheta.abs() > limits.rot_cap + tol
                || !(dx.is_finite() && dy.is_finite() && dtheta.is_finite())
            {
                return Err(WorldError::InvalidPrimitive);
            }
            let p = state.poses[body];
            let next = place_body(objects, state, body, Pose::new(p.x + dx, p.y + dy, p.theta + dtheta));
            for o in carried_by(objects, state, body) {
                let a = state.poses[o];
                let b = next.poses[o];
                if (a.x - b.x).abs() > limits.step_cap + 1e-9 || (a.y - b.y).abs() > limits.step_cap + 1e-9 {
                    return Err(WorldError::InvalidPrimitive);
                }
            }
            Ok(StepOutcome { state: next, flag: None })
        }
        PrimitiveAction::Grasp => {
            let g = state.poses[roles.gripper];
            let candidates: Vec<usize> = (0..objects.len())
                .filter(|&o| is_graspable(&objects[o]) && !state.is_attached(o))
                .filter(|&o| {
                    let d = g.distance(&state.poses[o]);
                    d >= limits.grasp_min && d <= limits.grasp_max
                })
                .collect();
            match candidates.len() {
                1 => {
                    let o = candidates[0];
                    let mut next = state.clone();
                    let offset = relative_pose(&g, &state.poses[o]);
                    // Snap by the rounding of the round trip so the invariant holds exactly.
                    next.poses[o] = compose(&g, &offset);
                    next.attached.push(Attachment { object: o, offset });
                    next.attached.sort_by_key(|a| a.object);
                    Ok(StepOutcome { state: next, flag: None })
                }
                0 => Ok(StepOutcome { state: state.clone(), flag: Some(StepFlag::GraspNoCandidate) }),
                _ => Ok(StepOutcome { state: state.clone(), flag: Some(StepFlag::GraspAmbiguous) }),
            }
        }
        PrimitiveAction::Release => {
            let mut next = state.clone();
            next.attached.clear();
            Ok(StepOutcome { state: next, flag: None })
        }
    }
}

fn collision_exempt(roles: Option<Roles>, state: &WorldState, i: usize, j: usize) -> bool {
    let r = match roles {
        Some(r) => r,
        None => return false,
    };
    let carrier = |a: usize, b: usize| {
        (a == r.gripper || Some(a) == r.base) && state.is_attached(b) || Some(a) == r.base && b == r.gripper
    };
    carrier(i, j) || carrier(j, i)
}

/// All colliding pairs `(i, j)` with `i < j`, in lexicographic order.
pub fn check_collision(objects: &[ObjectDecl], state: &WorldState) -> Vec<(usize, usize)> {
    let roles = Roles::of(objects);
    let mut out = Vec::new();
    for i in 0..objects.len() {
        for j in (i + 1)..objects.len() {
            if !solid_pair(&objects[i], &objects[j]) || collision_exempt(roles, state, i, j) {
                continue;
            }
            if footprints_overlap(&objects[i].shape, &state.poses[i], &objects[j].shape, &state.poses[j]) {
                out.push((i, j));
            }
        }
    }
    out
}

/// True iff any of `movers` collides with anything.
pub fn collides_any(objects: &[ObjectDecl], state: &WorldState, movers: &[usize]) -> bool {
    let roles = Roles::of(objects);
    for &i in movers {
        for j in 0..objects.len() {
            if j == i || !solid_pair(&objects[i], &objects[j]) || collision_exempt(roles, state, i, j) {
                continue;
            }
            if movers.contains(&j) && j < i {
                continue;
            }
            if footprints_overlap(&objects[i].shape, &state.poses[i], &objects[j].shape, &state.poses[j]) {
                return true;
            }
        }
    }
    false
}

/// Pocket centres of a receptacle in world coordinates.
pub fn pocket_centers(r: &Receptacle, state: &WorldState) -> Vec<(f64, f64)> {
    let s = state.poses[r.surface];
    r.pockets.iter().map(|&(px, py)| s.transform_point(px, py)).collect()
}

/// Whether `p.object` rests in/on `p.surface`.
pub fn placement_holds(objects: &[ObjectDecl], receptacles: &[Receptacle], state: &WorldState, p: &Placement) -> bool {
    if state.is_attached(p.object) {
        return false;
    }
    let c = state.poses[p.object];
    if let Some(r) = receptacles.iter().find(|r| r.surface == p.surface) {
        pocket_centers(r, state).iter().any(|&(x, y)| libm::hypot(c.x - x, c.y - y) <= r.tolerance)
    } else {
        objects[p.surface].shape.contains_point(&state.poses[p.surface], c.x, c.y)
    }
}

pub fn goal_satisfied(task: &Task, state: &WorldState) -> bool {
    task.goal.iter().all(|p| placement_holds(&task.objects, &task.receptacles, state, p))
        && check_collision(&task.objects, state).is_empty()
}

/// Angle difference `b - a` wrapped into `(-pi, pi]`.
pub fn angle_delta(a: f64, b: f64) -> f64 {
    wrap_angle(b - a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Shape;
    use crate::model::CAN;
    use alloc::vec;

    fn scene() -> (Vec<ObjectDecl>, WorldState) {
        let objects = vec![
            ObjectDecl::new("gripper", GRIPPER, Shape::Rect { w: 0.02, h: 0.02 }),
            ObjectDecl::new("table", SURFACE, Shape::Rect { w: 2.0, h: 2.0 }),
            ObjectDecl::new("can_1", CAN, Shape::Disc { r: 0.0125 }),
            ObjectDecl::new("can_2", CAN, Shape::Disc { r: 0.0125 }),
        ];
        let state = WorldState::new(vec![
            Pose::new(0.0, 0.0, 0.0),
            Pose::IDENTITY,
            Pose::new(0.035, 0.0, 0.0),
            Pose::new(0.5, 0.5, 0.0),
        ]);
        (objects, state)
    }

    #[test]
    fn grasp_move_release() {
        let (objects, s0) = scene();
        let lim = Limits::default();
        let s1 = step(&objects, &s0, &PrimitiveAction::Grasp, &lim).unwrap();
        assert_eq!(s1.flag, None);
        assert!(s1.state.is_attached(2));
        let mv = PrimitiveAction::Move { body: 0, dx: 0.008, dy: -0.005, dtheta: 0.03 };
        let s2 = step(&objects, &s1.state, &mv, &lim).unwrap().state;
        assert!(s2.attachment_invariant_holds(0, 1e-12));
        let s3 = step(&objects, &s2, &PrimitiveAction::Release, &lim).unwrap().state;
        let s4 = step(&objects, &s3, &mv, &lim).unwrap().state;
        assert_eq!(s4.poses[2], s3.poses[2]);
    }

    #[test]
    fn grasp_without_candidate_is_flagged_noop() {
        let (objects, mut s0) = scene();
        s0.poses[2] = Pose::new(0.3, 0.0, 0.0);
        let out = step(&objects, &s0, &PrimitiveAction::Grasp, &Limits::default()).unwrap();
        assert_eq!(out.flag, Some(StepFlag::GraspNoCandidate));
        assert_eq!(out.state, s0);
    }

    #[test]
    fn oversized_delta_rejected() {
        let (objects, s0) = scene();
        let mv = PrimitiveAction::Move { body: 0, dx: 0.02, dy: 0.0, dtheta: 0.0 };
        assert_eq!(step(&objects, &s0, &mv, &Limits::default()), Err(WorldError::InvalidPrimitive));
        let passive = PrimitiveAction::Move { body: 2, dx: 0.001, dy: 0.0, dtheta: 0.0 };
        assert_eq!(step(&objects, &s0, &passive, &Limits::default()), Err(WorldError::InvalidPrimitive));
    }

    #[test]
    fn collision_pairs() {
        let (objects, mut s) = scene();
        s.poses[3] = s.poses[2];
        // gripper overlaps can_1 and can_2 at 0.035 (0.0125 + 0.01 < 0.035? no): only the cans collide
        assert_eq!(check_collision(&objects, &s), vec![(2, 3)]);
        s.poses[3] = Pose::new(0.035 + 0.026, 0.0, 0.0);
        assert!(check_collision(&objects, &s).is_empty());
    }
}
