//! Objects, world states, trajectories, tasks and relative-pose features.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::geometry::{relative_pose, Pose, Shape};

/// Type names with special meaning in the simulators.
pub const GRIPPER: &str = "gripper";
pub const BASE: &str = "base";
pub const SURFACE: &str = "surface";
pub const CAN: &str = "can";

#[derive(Clone, Debug, PartialEq)]
pub struct ObjectDecl {
    pub id: String,
    pub ty: String,
    pub shape: Shape,
}

impl ObjectDecl {
    pub fn new(id: &str, ty: &str, shape: Shape) -> ObjectDecl {
        ObjectDecl { id: id.into(), ty: ty.into(), shape }
    }
}

/// An object rigidly held by the gripper, with its pose in the gripper frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Attachment {
    pub object: usize,
    pub offset: Pose,
}

/// Poses are indexed like the owning object list.
#[derive(Clone, Debug, PartialEq)]
pub struct WorldState {
    pub poses: Vec<Pose>,
    /// Sorted by object index.
    pub attached: Vec<Attachment>,
}

impl WorldState {
    pub fn new(poses: Vec<Pose>) -> WorldState {
        WorldState { poses, attached: Vec::new() }
    }

    pub fn is_attached(&self, o: usize) -> bool {
        self.attached.iter().any(|a| a.object == o)
    }

    /// Checks `pose(o) = compose(pose(gripper), offset(o))` for every attachment.
    pub fn attachment_invariant_holds(&self, gripper: usize, tol: f64) -> bool {
        self.attached.iter().all(|a| {
            let p = crate::geometry::compose(&self.poses[gripper], &a.offset);
            let q = &self.poses[a.object];
            (p.x - q.x).abs() <= tol
                && (p.y - q.y).abs() <= tol
                && crate::geometry::wrap_angle(p.theta - q.theta).abs() <= tol
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PrimitiveAction {
    /// World-frame translation and rotation of `body` about its own centre.
    Move {
        body: usize,
        dx: f64,
        dy: f64,
        dtheta: f64,
    },
    Grasp,
    Release,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub task_id: String,
    pub success: bool,
    pub objects: Vec<ObjectDecl>,
    pub states: Vec<WorldState>,
}

impl Trajectory {
    pub fn object_index(&self, id: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.id == id)
    }
}

/// A surface with discrete placement pockets: an object is inside the surface
/// iff its centre is within `tolerance` of a free pocket centre (given in the
/// surface frame).
#[derive(Clone, Debug, PartialEq)]
pub struct Receptacle {
    pub surface: usize,
    pub pockets: Vec<(f64, f64)>,
    pub tolerance: f64,
}

/// "Place `object` on/in `surface`".
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Placement {
    pub object: usize,
    pub surface: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Task {
    pub id: String,
    pub objects: Vec<ObjectDecl>,
    pub init: WorldState,
    /// Geometric goal: every placement holds and the state is collision-free.
    pub goal: Vec<Placement>,
    pub receptacles: Vec<Receptacle>,
    pub horizon: usize,
}

impl Task {
    pub fn object_index(&self, id: &str) -> Option<usize> {
        self.objects.iter().position(|o| o.id == id)
    }

    pub fn count_of_type(&self, ty: &str) -> usize {
        self.objects.iter().filter(|o| o.ty == ty).count()
    }
}

/// `(dx, dy, cos dtheta, sin dtheta)` of one object in the frame of another.
pub type RelPoseFeature = [f64; 4];
pub const FEATURE_DIM: usize = 4;

/// Relative-pose feature of `o2` in the frame of `o1`.
///
/// Discs have no observable heading: a disc anchor uses the world-aligned
/// frame at its centre and a disc target contributes a relative heading of 0.
pub fn featurize(d1: &ObjectDecl, p1: &Pose, d2: &ObjectDecl, p2: &Pose) -> RelPoseFeature {
    let frame = if d1.shape.is_rotationally_symmetric() { Pose { x: p1.x, y: p1.y, theta: 0.0 } } else { *p1 };
    let target = if d2.shape.is_rotationally_symmetric() { Pose { x: p2.x, y: p2.y, theta: frame.theta } } else { *p2 };
    let r = relative_pose(&frame, &target);
    let (s, c) = libm::sincos(r.theta);
    [r.x, r.y, c, s]
}

/// The anchor frame that [`featurize`] uses for `d1` at `p1`.
pub fn feature_frame(d1: &ObjectDecl, p1: &Pose) -> Pose {
    if d1.shape.is_rotationally_symmetric() {
        Pose { x: p1.x, y: p1.y, theta: 0.0 }
    } else {
        *p1
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnknownObject(pub String);

impl fmt::Display for UnknownObject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown object `{}`", self.0)
    }
}

/// Per-state features for each requested `(o1, o2)` id pair, in state order.
pub fn xi_transform(traj: &Trajectory, pairs: &[(&str, &str)]) -> Result<Vec<Vec<RelPoseFeature>>, UnknownObject> {
    let mut idx = Vec::with_capacity(pairs.len());
    for (a, b) in pairs {
        let ia = traj.object_index(a).ok_or_else(|| UnknownObject((*a).into()))?;
        let ib = traj.object_index(b).ok_or_else(|| UnknownObject((*b).into()))?;
        idx.push((ia, ib));
    }
    Ok(xi_indices(traj, &idx))
}

pub fn xi_indices(traj: &Trajectory, pairs: &[(usize, usize)]) -> Vec<Vec<RelPoseFeature>> {
    pairs
        .iter()
        .map(|&(a, b)| {
            let (da, db) = (&traj.objects[a], &traj.objects[b]);
            traj.states.iter().map(|s| featurize(da, &s.poses[a], db, &s.poses[b])).collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn featurize_disc_ignores_heading() {
        let g = ObjectDecl::new("g", GRIPPER, Shape::Rect { w: 0.02, h: 0.02 });
        let c = ObjectDecl::new("c", CAN, Shape::Disc { r: 0.0125 });
        let pg = Pose::new(1.0, 1.0, 0.7);
        let a = featurize(&g, &pg, &c, &Pose::new(1.1, 1.0, 0.0));
        let b = featurize(&g, &pg, &c, &Pose::new(1.1, 1.0, 2.5));
        assert_eq!(a, b);
        assert!((a[2] - 1.0).abs() < 1e-15 && a[3].abs() < 1e-15);
    }

    #[test]
    fn xi_reports_unknown_ids() {
        let t = Trajectory {
            task_id: "t".into(),
            success: true,
            objects: vec![ObjectDecl::new("a", CAN, Shape::Disc { r: 0.1 })],
            states: vec![WorldState::new(vec![Pose::IDENTITY]); 2],
        };
        assert_eq!(xi_transform(&t, &[("a", "b")]), Err(UnknownObject("b".into())));
        assert_eq!(xi_transform(&t, &[("a", "a")]).unwrap()[0].len(), 2);
    }
}
