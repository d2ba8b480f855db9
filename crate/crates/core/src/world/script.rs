//! Scripted pick-and-place demonstrations recorded at primitive-step resolution.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use super::layout::{box_pockets, dock_pose};
use super::{
    carried_by, collides_any, goal_satisfied, init_world, step, Domain, Geometry, Limits, Roles, StartMode, StepFlag,
    WorldConfig,
};
use crate::geometry::{wrap_angle, Pose};
use crate::model::{ObjectDecl, PrimitiveAction, Task, Trajectory, WorldState};
use crate::rng::{self, Rng};

#[derive(Clone, Debug, PartialEq)]
pub struct DemoScript {
    /// Gaussian noise on waypoint positions (m) and headings (rad).
    pub noise_pos: f64,
    pub noise_ang: f64,
    /// Fraction of episodes whose placement waypoint is perturbed off target.
    pub failure_rate: f64,
    /// Distance of the approach standoff from the object.
    pub standoff: f64,
    /// Grasp distance (gripper centre to object centre).
    pub grasp_distance: f64,
    /// Lateral swing of the detour between standoff and grasp.
    pub detour: f64,
    /// Motionless steps spent lining up at the standoff.
    pub settle_steps: usize,
    /// Fraction of cafe episodes that start parked at a surface other than
    /// the can's and drive over first; the rest start parked at the can's
    /// surface. Off by default: the empty drives stretch the gripper-can
    /// pose range across the room, which coarsens that pair's grid.
    pub drive_in_rate: f64,
}

impl Default for DemoScript {
    fn default() -> DemoScript {
        DemoScript {
            noise_pos: 0.002,
            noise_ang: 0.02,
            failure_rate: 0.0,
            standoff: 0.15,
            grasp_distance: 0.038,
            detour: 0.07,
            settle_steps: 20,
            drive_in_rate: 0.0,
        }
    }
}

impl DemoScript {
    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.noise_pos >= 0.0 && self.noise_ang >= 0.0) {
            return Err("noise std must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.failure_rate) {
            return Err("failure rate must lie in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScriptError {
    Collision,
    Primitive,
    Grasp(StepFlag),
}

/// Records every intermediate state while driving bodies along straight lines.
pub struct Recorder<'a> {
    pub objects: &'a [ObjectDecl],
    pub limits: Limits,
    pub states: Vec<WorldState>,
}

impl<'a> Recorder<'a> {
    pub fn new(objects: &'a [ObjectDecl], limits: Limits, init: WorldState) -> Recorder<'a> {
        Recorder { objects, limits, states: vec![init] }
    }

    pub fn state(&self) -> &WorldState {
        self.states.last().expect("recorder holds at least the initial state")
    }

    /// Straight-line motion of `body` to `target`, split so that no object moves
    /// more than the step caps per primitive. Stops at the first colliding state.
    pub fn move_to(&mut self, body: usize, target: Pose) -> Result<(), ScriptError> {
        let plan = interpolate(self.objects, self.state(), body, target, &self.limits);
        for a in plan {
            let next = step(self.objects, self.state(), &a, &self.limits).map_err(|_| ScriptError::Primitive)?;
            let mut movers = carried_by(self.objects, &next.state, body);
            movers.push(body);
            let hit = collides_any(self.objects, &next.state, &movers);
            self.states.push(next.state);
            if hit {
                return Err(ScriptError::Collision);
            }
        }
        Ok(())
    }

    /// Holds `body` still for `n` steps.
    pub fn pause(&mut self, body: usize, n: usize) -> Result<(), ScriptError> {
        for _ in 0..n {
            let a = PrimitiveAction::Move { body, dx: 0.0, dy: 0.0, dtheta: 0.0 };
            let next = step(self.objects, self.state(), &a, &self.limits).map_err(|_| ScriptError::Primitive)?;
            self.states.push(next.state);
        }
        Ok(())
    }

    pub fn grasp(&mut self) -> Result<(), ScriptError> {
        let out = step(self.objects, self.state(), &PrimitiveAction::Grasp, &self.limits)
            .map_err(|_| ScriptError::Primitive)?;
        self.states.push(out.state);
        match out.flag {
            None => Ok(()),
            Some(f) => Err(ScriptError::Grasp(f)),
        }
    }

    pub fn release(&mut self) {
        let out =
            step(self.objects, self.state(), &PrimitiveAction::Release, &self.limits).expect("release is always valid");
        self.states.push(out.state);
    }
}

/// Primitive moves taking `body` from its current pose to `target`.
pub fn interpolate(
    objects: &[ObjectDecl],
    state: &WorldState,
    body: usize,
    target: Pose,
    limits: &Limits,
) -> Vec<PrimitiveAction> {
    let p = state.poses[body];
    let dx = target.x - p.x;
    let dy = target.y - p.y;
    let dth = wrap_angle(target.theta - p.theta);
    let reach = carried_by(objects, state, body).iter().map(|&o| state.poses[o].distance(&p)).fold(0.0, f64::max);
    // Carried objects move by the body translation plus at most reach*|dtheta|.
    let cap = limits.step_cap * 0.999;
    let n = [
        (dx.abs() + reach * dth.abs()) / cap,
        (dy.abs() + reach * dth.abs()) / cap,
        dth.abs() / (limits.rot_cap * 0.999),
    ]
    .iter()
    .fold(0.0f64, |m, v| m.max(libm::ceil(*v))) as usize;
    let mut out = Vec::with_capacity(n);
    // Steps are issued toward absolute waypoints so rounding never accumulates.
    let mut cur = p;
    for k in 1..=n {
        let t = k as f64 / n as f64;
        let want = Pose::new(p.x + t * dx, p.y + t * dy, p.theta + t * dth);
        out.push(PrimitiveAction::Move {
            body,
            dx: want.x - cur.x,
            dy: want.y - cur.y,
            dtheta: wrap_angle(want.theta - cur.theta),
        });
        cur = want;
    }
    out
}

/// The primitive that turns `prev` into `next`, if any.
pub fn infer_primitive(objects: &[ObjectDecl], prev: &WorldState, next: &WorldState) -> Option<PrimitiveAction> {
    let roles = Roles::of(objects)?;
    if prev.attached.len() < next.attached.len() {
        return Some(PrimitiveAction::Grasp);
    }
    if prev.attached.len() > next.attached.len() {
        return Some(PrimitiveAction::Release);
    }
    let body = match roles.base {
        Some(b) if prev.poses[b] != next.poses[b] => b,
        _ => roles.gripper,
    };
    let a = prev.poses[body];
    let b = next.poses[body];
    Some(PrimitiveAction::Move { body, dx: b.x - a.x, dy: b.y - a.y, dtheta: wrap_angle(b.theta - a.theta) })
}

/// Per-episode parameters fixed before any episode runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EpisodeSpec {
    pub index: usize,
    pub failing: bool,
    /// Detour side; alternates over non-failing episodes so both sides are
    /// equally represented among successes.
    pub side_left: bool,
    /// Cafe only: start parked away from the can. Spread evenly over the
    /// episodes at `drive_in_rate`.
    pub drive_in: bool,
}

pub fn episode_specs(config: &WorldConfig, script: &DemoScript, n: usize) -> Vec<EpisodeSpec> {
    let mut ok = 0usize;
    (0..n)
        .map(|i| {
            let failing = rng::bernoulli(&mut rng::stream(config.seed, &[0xfa11, i as u64]), script.failure_rate);
            let side_left = ok.is_multiple_of(2);
            if !failing {
                ok += 1;
            }
            let rate = script.drive_in_rate.clamp(0.0, 1.0);
            let drive_in = libm::floor((i + 1) as f64 * rate) > libm::floor(i as f64 * rate);
            EpisodeSpec { index: i, failing, side_left, drive_in }
        })
        .collect()
}

/// One demonstration episode.
pub fn generate_episode(config: &WorldConfig, script: &DemoScript, spec: EpisodeSpec) -> Trajectory {
    let mut cfg = config.clone();
    if cfg.domain == Domain::Cafe {
        cfg.start = if spec.drive_in { StartMode::DockedAway } else { StartMode::NearFirstCan };
    }
    let mut attempt = 0u64;
    let task = loop {
        cfg.seed = rng::derive_seed(config.seed, &[spec.index as u64, attempt]);
        match init_world(&cfg) {
            Ok(t) => break t,
            Err(_) => attempt += 1,
        }
    };
    let mut r = rng::stream(cfg.seed, &[0x5c]);
    let limits = Limits::from_geometry(&config.geometry);
    let mut rec = Recorder::new(&task.objects, limits, task.init.clone());
    let ran = match config.domain {
        Domain::Packing => packing_episode(&task, config, script, spec, &mut rec, &mut r),
        Domain::Cafe => cafe_episode(&task, config, script, spec, &mut rec, &mut r),
    };
    if rec.states.len() < 2 {
        let s = rec.state().clone();
        rec.states.push(s);
    }
    let success = ran.is_ok() && goal_satisfied(&task, rec.state());
    Trajectory { task_id: task.id.clone(), success, objects: task.objects.clone(), states: rec.states }
}

/// `n` demonstrations with per-episode derived random streams.
pub fn generate_demos(config: &WorldConfig, script: &DemoScript, n: usize) -> Vec<Trajectory> {
    episode_specs(config, script, n).into_iter().map(|s| generate_episode(config, script, s)).collect()
}

fn noisy(r: &mut Rng, script: &DemoScript, x: f64, y: f64, th: f64) -> Pose {
    Pose::new(
        x + script.noise_pos * rng::normal(r),
        y + script.noise_pos * rng::normal(r),
        th + script.noise_ang * rng::normal(r),
    )
}

/// Standoff, detour and grasp waypoints for approaching `c` along heading `phi`.
fn approach_waypoints(c: &Pose, phi: f64, side: f64, script: &DemoScript, r: &mut Rng) -> [Pose; 3] {
    let (u, v) = (libm::cos(phi), libm::sin(phi));
    let at = |d: f64, lat: f64| (c.x - d * u - lat * v, c.y - d * v + lat * u);
    let s = at(script.standoff, 0.0);
    let m = at(0.5 * (script.standoff + script.grasp_distance), side * script.detour);
    let g = at(script.grasp_distance, 0.0);
    [noisy(r, script, s.0, s.1, phi), noisy(r, script, m.0, m.1, phi), noisy(r, script, g.0, g.1, phi)]
}

/// Gripper pose that puts the held object (at `offset` in the gripper frame)
/// at `(x, y)` while the gripper keeps heading `h`.
fn gripper_for_object(offset: &Pose, x: f64, y: f64, h: f64) -> Pose {
    let hp = Pose::new(0.0, 0.0, h);
    let (ox, oy) = hp.rotate(offset.x, offset.y);
    Pose::new(x - ox, y - oy, h)
}

/// Retreats from a just-released object back to the standoff, then departs.
fn retreat(
    rec: &mut Recorder,
    gripper: usize,
    obj: usize,
    side: f64,
    script: &DemoScript,
    r: &mut Rng,
) -> Result<(), ScriptError> {
    let c = rec.state().poses[obj];
    let h = rec.state().poses[gripper].theta;
    let [s, m, _] = approach_waypoints(&c, h, side, script, r);
    rec.move_to(gripper, m)?;
    rec.move_to(gripper, s)?;
    rec.pause(gripper, script.settle_steps)
}

fn packing_episode(
    task: &Task,
    config: &WorldConfig,
    script: &DemoScript,
    spec: EpisodeSpec,
    rec: &mut Recorder,
    r: &mut Rng,
) -> Result<(), ScriptError> {
    let gi = 0;
    let (bi, ci) = (2, 3);
    let side = if spec.side_left { 1.0 } else { -1.0 };
    let g0 = task.init.poses[gi];
    let c = task.init.poses[ci];
    let phi = libm::atan2(c.y - g0.y, c.x - g0.x) + 0.1 * rng::normal(r);
    let [s, m, g] = approach_waypoints(&c, phi, side, script, r);
    rec.move_to(gi, s)?;
    rec.pause(gi, script.settle_steps)?;
    rec.move_to(gi, m)?;
    rec.move_to(gi, g)?;
    rec.grasp()?;
    let offset = rec.state().attached[0].offset;
    let pockets = box_pockets(&config.geometry);
    let k = rng::index(r, pockets.len());
    let b = rec.state().poses[bi];
    let (mut px, mut py) = b.transform_point(pockets[k].0, pockets[k].1);
    px += script.noise_pos * rng::normal(r);
    py += script.noise_pos * rng::normal(r);
    if spec.failing {
        let a = rng::uniform(r, -PI, PI);
        px += 0.3 * libm::cos(a);
        py += 0.3 * libm::sin(a);
    }
    let h = rec.state().poses[gi].theta;
    rec.move_to(gi, gripper_for_object(&offset, px, py, h))?;
    rec.release();
    retreat(rec, gi, ci, side, script, r)?;
    let here = rec.state().poses[gi];
    let away = here.theta + PI + rng::uniform(r, -1.2, 1.2);
    let d = rng::uniform(r, 0.1, 0.15);
    let end =
        Pose::new(here.x + d * libm::cos(away), here.y + d * libm::sin(away), here.theta + rng::uniform(r, -1.5, 1.5));
    rec.move_to(gi, end)
}

/// Waypoints after `p` for a base drive to `q` (included) that keeps at
/// least 0.7 `lane` from every table centre: a blocked leg detours through
/// the point `lane` from the blocking table, on the side the leg passes.
fn lane_route(tables: &[(f64, f64)], p: (f64, f64), q: (f64, f64), lane: f64, depth: usize) -> Vec<(f64, f64)> {
    let (dx, dy) = (q.0 - p.0, q.1 - p.1);
    let len2 = dx * dx + dy * dy;
    let mut worst: Option<(f64, (f64, f64))> = None;
    if depth > 0 && len2 > 1e-12 {
        for &c in tables {
            let t = (((c.0 - p.0) * dx + (c.1 - p.1) * dy) / len2).clamp(0.0, 1.0);
            let (nx, ny) = (p.0 + t * dx - c.0, p.1 + t * dy - c.1);
            let d = libm::hypot(nx, ny);
            if d < 0.7 * lane && worst.is_none_or(|w| d < w.0) {
                let len = libm::sqrt(len2);
                let (ux, uy) = if d > 1e-9 { (nx / d, ny / d) } else { (-dy / len, dx / len) };
                worst = Some((d, (c.0 + lane * ux, c.1 + lane * uy)));
            }
        }
    }
    match worst {
        Some((_, w)) => {
            let mut out = lane_route(tables, p, w, lane, depth - 1);
            out.extend(lane_route(tables, w, q, lane, depth - 1));
            out
        }
        None => vec![q],
    }
}

/// Backs the base away from the table it is parked at, follows a lane route
/// and docks at `to` on the side given by `angle`.
#[allow(clippy::too_many_arguments)]
fn drive(
    rec: &mut Recorder,
    g: &Geometry,
    tables: &[(f64, f64)],
    base: usize,
    to: (f64, f64),
    angle: f64,
    lane: f64,
    r: &mut Rng,
    script: &DemoScript,
) -> Result<(), ScriptError> {
    let b0 = rec.state().poses[base];
    let here = tables
        .iter()
        .copied()
        .min_by(|p, q| {
            let dp = libm::hypot(p.0 - b0.x, p.1 - b0.y);
            let dq = libm::hypot(q.0 - b0.x, q.1 - b0.y);
            dp.partial_cmp(&dq).unwrap_or(core::cmp::Ordering::Equal)
        })
        .unwrap_or((b0.x, b0.y));
    let out = libm::atan2(b0.y - here.1, b0.x - here.0);
    let dock = dock_pose(g, to, angle);
    let exit = (here.0 + lane * libm::cos(out), here.1 + lane * libm::sin(out));
    rec.move_to(base, Pose::new(exit.0, exit.1, b0.theta))?;
    let entry = (to.0 + lane * libm::cos(angle), to.1 + lane * libm::sin(angle));
    let route = lane_route(tables, exit, entry, lane, 3);
    let n = route.len();
    for (k, (x, y)) in route.into_iter().enumerate() {
        let th = if k + 1 == n { dock.theta } else { b0.theta };
        rec.move_to(base, Pose::new(x, y, th))?;
    }
    rec.move_to(base, noisy(r, script, dock.x, dock.y, dock.theta))
}

fn cafe_episode(
    task: &Task,
    config: &WorldConfig,
    script: &DemoScript,
    spec: EpisodeSpec,
    rec: &mut Recorder,
    r: &mut Rng,
) -> Result<(), ScriptError> {
    let g = &config.geometry;
    let (base, gi) = (0, 1);
    let ci = 2 + config.surfaces;
    let side = if spec.side_left { 1.0 } else { -1.0 };
    let source = task.init.poses[2
        + (0..config.surfaces)
            .min_by(|&a, &b| {
                let c = task.init.poses[ci];
                let da = task.init.poses[2 + a].distance(&c);
                let db = task.init.poses[2 + b].distance(&c);
                da.partial_cmp(&db).unwrap_or(core::cmp::Ordering::Equal)
            })
            .unwrap_or(0)];
    let target = task.init.poses[task.goal[0].surface];
    let lane = g.surface_radius + 0.7;
    let tables: Vec<(f64, f64)> =
        (0..config.surfaces).map(|k| (task.init.poses[2 + k].x, task.init.poses[2 + k].y)).collect();

    // Parked elsewhere: drive over to the source first.
    let b0 = rec.state().poses[base];
    if libm::hypot(b0.x - source.x, b0.y - source.y) > lane {
        let a = rng::uniform(r, -PI, PI);
        drive(rec, g, &tables, base, (source.x, source.y), a, lane, r, script)?;
    }

    // Reach from the tucked pose to the can and grasp it.
    let c = task.init.poses[ci];
    let g0 = rec.state().poses[gi];
    let phi = libm::atan2(c.y - g0.y, c.x - g0.x) + 0.2 * rng::normal(r);
    let [s, m, gp] = approach_waypoints(&c, phi, side, script, r);
    rec.move_to(gi, s)?;
    rec.pause(gi, script.settle_steps)?;
    rec.move_to(gi, m)?;
    rec.move_to(gi, gp)?;
    rec.grasp()?;
    let offset = rec.state().attached[0].offset;
    let tuck = rec.state().poses[base];
    rec.move_to(gi, tuck)?;

    // Back away from the source, drive over, and come in to a dock on a
    // random side of the target.
    let a = rng::uniform(r, -PI, PI);
    drive(rec, g, &tables, base, (target.x, target.y), a, lane, r, script)?;

    // Put the can down near the target centre, back off, and tuck.
    let (mut px, mut py) = (target.x + 0.02 * rng::normal(r), target.y + 0.02 * rng::normal(r));
    if spec.failing {
        let b = rng::uniform(r, -PI, PI);
        px += 0.5 * libm::cos(b);
        py += 0.5 * libm::sin(b);
    }
    let gnow = rec.state().poses[gi];
    let h = libm::atan2(py - gnow.y, px - gnow.x) + 0.2 * rng::normal(r);
    rec.move_to(gi, gripper_for_object(&offset, px, py, h))?;
    rec.release();
    retreat(rec, gi, ci, side, script, r)?;
    let t = rec.state().poses[base];
    rec.move_to(gi, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::check_collision;

    #[test]
    fn packing_demos_succeed_and_replay() {
        let config = WorldConfig::packing(1, 42);
        let demos = generate_demos(&config, &DemoScript::default(), 6);
        assert_eq!(demos.len(), 6);
        for d in &demos {
            assert!(d.success, "{}", d.task_id);
            let limits = Limits::from_geometry(&config.geometry);
            for w in d.states.windows(2) {
                let a = infer_primitive(&d.objects, &w[0], &w[1]).unwrap();
                let next = step(&d.objects, &w[0], &a, &limits).unwrap().state;
                for (p, q) in next.poses.iter().zip(&w[1].poses) {
                    assert!((p.x - q.x).abs() < 1e-9 && (p.y - q.y).abs() < 1e-9);
                }
                assert!(check_collision(&d.objects, &w[1]).is_empty());
            }
        }
    }

    #[test]
    fn cafe_demos_succeed() {
        let config = WorldConfig::cafe(1, 7);
        let demos = generate_demos(&config, &DemoScript::default(), 4);
        for d in &demos {
            assert!(d.success, "{}", d.task_id);
        }
    }
}
