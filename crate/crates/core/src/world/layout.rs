//! Initial layouts for the built-in worlds.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use super::{check_collision, Domain, Geometry, StartMode, WorldConfig, WorldError};
use crate::geometry::{wrap_angle, Pose, Shape};
use crate::model::{ObjectDecl, Placement, Receptacle, Task, WorldState, BASE, CAN, GRIPPER, SURFACE};
use crate::rng::{self, Rng};

const MAX_TRIES: usize = 10_000;

/// Builds a collision-free initial task for `config`.
pub fn init_world(config: &WorldConfig) -> Result<Task, WorldError> {
    config.validate()?;
    let mut r = rng::stream(config.seed, &[0x1a]);
    match config.domain {
        Domain::Packing => packing(config, &mut r),
        Domain::Cafe => cafe(config, &mut r),
    }
}

fn sample_until<T>(mut f: impl FnMut() -> Option<T>) -> Result<T, WorldError> {
    for _ in 0..MAX_TRIES {
        if let Some(v) = f() {
            return Ok(v);
        }
    }
    Err(WorldError::Infeasible)
}

fn far_from(p: (f64, f64), others: &[(f64, f64)], d: f64) -> bool {
    others.iter().all(|o| libm::hypot(p.0 - o.0, p.1 - o.1) >= d)
}

pub(crate) fn box_pockets(g: &Geometry) -> Vec<(f64, f64)> {
    let o = g.pocket_offset;
    vec![(-o, -o), (o, -o), (-o, o), (o, o)]
}

fn packing(config: &WorldConfig, r: &mut Rng) -> Result<Task, WorldError> {
    let g = &config.geometry;
    let (hw, hh) = (0.5 * g.table_w, 0.5 * g.table_h);
    let mut objects = vec![
        ObjectDecl::new(GRIPPER, GRIPPER, Shape::Rect { w: g.gripper_size, h: g.gripper_size }),
        ObjectDecl::new("table", SURFACE, Shape::Rect { w: g.table_w, h: g.table_h }),
        ObjectDecl::new("box", SURFACE, Shape::Rect { w: g.box_size, h: g.box_size }),
    ];
    let bx = rng::uniform(r, -hw + 0.3, hw - 0.3);
    let by = rng::uniform(r, -hh + 0.3, hh - 0.3);
    let mut cans: Vec<(f64, f64)> = Vec::new();
    for i in 0..config.cans {
        objects.push(ObjectDecl::new(&format!("can_{}", i + 1), CAN, Shape::Disc { r: g.can_radius }));
        let p = sample_until(|| {
            let p = (rng::uniform(r, -hw + 0.1, hw - 0.1), rng::uniform(r, -hh + 0.1, hh - 0.1));
            // Clear of the table frame origin too: surface relations are per
            // type, so a can there reads as sitting in a pocket of the table.
            let clear = far_from(p, &[(bx, by)], 0.3) && far_from(p, &[(0.0, 0.0)], 0.15);
            (clear && far_from(p, &cans, 0.2)).then_some(p)
        })?;
        cans.push(p);
    }
    let gripper = match (config.start, cans.first()) {
        (StartMode::NearFirstCan, Some(&c)) => sample_until(|| {
            let a = rng::uniform(r, -PI, PI);
            let d = rng::uniform(r, 0.2, 0.3);
            let p = (c.0 + d * libm::cos(a), c.1 + d * libm::sin(a));
            let inside = p.0.abs() < hw && p.1.abs() < hh;
            (inside && far_from(p, &cans[1..], 0.1)).then_some(p)
        })?,
        _ => sample_until(|| {
            let p = (rng::uniform(r, -hw + 0.05, hw - 0.05), rng::uniform(r, -hh + 0.05, hh - 0.05));
            far_from(p, &cans, 0.1).then_some(p)
        })?,
    };
    let mut poses =
        vec![Pose::new(gripper.0, gripper.1, rng::uniform(r, -PI, PI)), Pose::IDENTITY, Pose::new(bx, by, 0.0)];
    poses.extend(cans.iter().map(|&(x, y)| Pose::new(x, y, 0.0)));
    let init = WorldState::new(poses);
    if !check_collision(&objects, &init).is_empty() {
        return Err(WorldError::Infeasible);
    }
    let goal = (0..config.cans).map(|i| Placement { object: 3 + i, surface: 2 }).collect();
    Ok(Task {
        id: format!("packing-{}can-{}", config.cans, config.seed),
        objects,
        init,
        goal,
        receptacles: vec![Receptacle { surface: 2, pockets: box_pockets(g), tolerance: g.pocket_tolerance }],
        horizon: config.horizon,
    })
}

/// Docked base pose on the side of a table centred at `c` given by `angle`,
/// facing the table centre.
pub(crate) fn dock_pose(g: &Geometry, c: (f64, f64), angle: f64) -> Pose {
    let d = g.surface_radius + 0.5 * g.base_w.max(g.base_h) + 0.05;
    Pose::new(c.0 + d * libm::cos(angle), c.1 + d * libm::sin(angle), wrap_angle(angle + PI))
}

/// Table centres scattered over the room with a minimum separation.
fn table_centers(g: &Geometry, n: usize, r: &mut Rng) -> Result<Vec<(f64, f64)>, WorldError> {
    let half = 0.5 * g.room_size - g.surface_radius - 0.5;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for _ in 0..n {
        let p = sample_until(|| {
            let p = (rng::uniform(r, -half, half), rng::uniform(r, -half, half));
            far_from(p, &out, g.surface_spacing).then_some(p)
        })?;
        out.push(p);
    }
    Ok(out)
}

fn cafe(config: &WorldConfig, r: &mut Rng) -> Result<Task, WorldError> {
    let g = &config.geometry;
    let ns = config.surfaces;
    let mut objects = vec![
        ObjectDecl::new(BASE, BASE, Shape::Rect { w: g.base_w, h: g.base_h }),
        ObjectDecl::new(GRIPPER, GRIPPER, Shape::Rect { w: g.gripper_size, h: g.gripper_size }),
    ];
    for i in 0..ns {
        objects.push(ObjectDecl::new(&format!("surface_{}", i + 1), SURFACE, Shape::Disc { r: g.surface_radius }));
    }
    let centers = table_centers(g, ns, r)?;
    // Sources are assigned round-robin from a random offset; targets differ from sources.
    let first = rng::index(r, ns);
    let mut sources = Vec::new();
    let mut targets = Vec::new();
    for i in 0..config.cans {
        let s = (first + i) % ns;
        let t = (s + 1 + rng::index(r, ns - 1)) % ns;
        sources.push(s);
        targets.push(t);
    }
    let mut cans: Vec<(f64, f64)> = Vec::new();
    let reach = g.surface_radius - 0.06;
    for i in 0..config.cans {
        objects.push(ObjectDecl::new(&format!("can_{}", i + 1), CAN, Shape::Disc { r: g.can_radius }));
        let c = centers[sources[i]];
        let p = sample_until(|| {
            let p = (c.0 + rng::uniform(r, -reach, reach), c.1 + rng::uniform(r, -reach, reach));
            (libm::hypot(p.0 - c.0, p.1 - c.1) <= reach && far_from(p, &cans, 0.12)).then_some(p)
        })?;
        cans.push(p);
    }
    let base = match (config.start, sources.first()) {
        (StartMode::NearFirstCan, Some(&s)) => dock_pose(g, centers[s], rng::uniform(r, -PI, PI)),
        (StartMode::DockedAnywhere, _) => dock_pose(g, centers[rng::index(r, ns)], rng::uniform(r, -PI, PI)),
        (StartMode::DockedAway, Some(&s)) if ns > 1 => {
            let t = (s + 1 + rng::index(r, ns - 1)) % ns;
            dock_pose(g, centers[t], rng::uniform(r, -PI, PI))
        }
        _ => {
            let half = 0.5 * g.room_size - 0.3;
            let p = sample_until(|| {
                let p = (rng::uniform(r, -half, half), rng::uniform(r, -half, half));
                far_from(p, &centers, g.surface_radius + 0.4).then_some(p)
            })?;
            Pose::new(p.0, p.1, rng::uniform(r, -PI, PI))
        }
    };
    let mut poses = vec![base, base];
    poses.extend(centers.iter().map(|&(x, y)| Pose::new(x, y, 0.0)));
    poses.extend(cans.iter().map(|&(x, y)| Pose::new(x, y, 0.0)));
    let init = WorldState::new(poses);
    if !check_collision(&objects, &init).is_empty() {
        return Err(WorldError::Infeasible);
    }
    let goal = (0..config.cans).map(|i| Placement { object: 2 + ns + i, surface: 2 + targets[i] }).collect();
    Ok(Task {
        id: format!("cafe-{}can-{}", config.cans, config.seed),
        objects,
        init,
        goal,
        receptacles: Vec::new(),
        horizon: config.horizon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packing_one_can_contents() {
        let t = init_world(&WorldConfig::packing(1, 3)).unwrap();
        let ids: Vec<&str> = t.objects.iter().map(|o| o.id.as_str()).collect();
        assert_eq!(ids, ["gripper", "table", "box", "can_1"]);
        assert!(t.init.attached.is_empty());
        assert!(check_collision(&t.objects, &t.init).is_empty());
    }

    #[test]
    fn five_goal_cans_accepted_at_init() {
        let t = init_world(&WorldConfig::packing(5, 11)).unwrap();
        assert_eq!(t.goal.len(), 5);
    }

    #[test]
    fn same_seed_same_state() {
        let a = init_world(&WorldConfig::cafe(6, 5)).unwrap();
        let b = init_world(&WorldConfig::cafe(6, 5)).unwrap();
        assert_eq!(a, b);
        assert!(check_collision(&a.objects, &a.init).is_empty());
    }
}
