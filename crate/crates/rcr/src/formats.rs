//! JSON and JSON Lines forms of trajectories, world configs, predictor
//! bundles, vocabularies and plans.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rcr_core::geometry::{relative_pose, Pose, Shape};
use rcr_core::model::{Attachment, ObjectDecl, Trajectory, WorldState};
use rcr_core::rcr::{Gaussian, Mixture, RcrPredictor, TypePair};
use rcr_core::relations::{RelationKind, RelationSymbol, Vocabulary};
use rcr_core::world::{DemoScript, Domain, Geometry, Roles, StartMode, WorldConfig};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Error::format(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e))?;
    s.push('\n');
    write_text(path, &s)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ShapeJson {
    Rect { w: f64, h: f64 },
    Disc { r: f64 },
}

impl From<Shape> for ShapeJson {
    fn from(s: Shape) -> Self {
        match s {
            Shape::Rect { w, h } => ShapeJson::Rect { w, h },
            Shape::Disc { r } => ShapeJson::Disc { r },
        }
    }
}

impl From<&ShapeJson> for Shape {
    fn from(s: &ShapeJson) -> Self {
        match *s {
            ShapeJson::Rect { w, h } => Shape::Rect { w, h },
            ShapeJson::Disc { r } => Shape::Disc { r },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectJson {
    pub id: String,
    #[serde(rename = "type")]
    pub ty: String,
    pub shape: ShapeJson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateJson {
    pub poses: BTreeMap<String, [f64; 3]>,
    pub attached: Vec<String>,
    /// Offsets frozen at grasp time. When absent they are recomputed from
    /// the poses.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attach_offsets: BTreeMap<String, [f64; 3]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryJson {
    pub task_id: String,
    pub success: bool,
    pub objects: Vec<ObjectJson>,
    pub states: Vec<StateJson>,
}

fn pose_arr(p: &Pose) -> [f64; 3] {
    [p.x, p.y, p.theta]
}

fn arr_pose(a: &[f64; 3]) -> Pose {
    Pose { x: a[0], y: a[1], theta: a[2] }
}

pub fn objects_json(objects: &[ObjectDecl]) -> Vec<ObjectJson> {
    objects.iter().map(|o| ObjectJson { id: o.id.clone(), ty: o.ty.clone(), shape: o.shape.into() }).collect()
}

pub fn objects_from_json(objects: &[ObjectJson]) -> Result<Vec<ObjectDecl>> {
    let mut out: Vec<ObjectDecl> = Vec::new();
    for o in objects {
        if out.iter().any(|x| x.id == o.id) {
            return Err(Error::Invalid(format!("duplicate object id '{}'", o.id)));
        }
        out.push(ObjectDecl::new(&o.id, &o.ty, (&o.shape).into()));
    }
    Ok(out)
}

pub fn state_json(objects: &[ObjectDecl], s: &WorldState) -> StateJson {
    StateJson {
        poses: objects.iter().zip(&s.poses).map(|(o, p)| (o.id.clone(), pose_arr(p))).collect(),
        attached: s.attached.iter().map(|a| objects[a.object].id.clone()).collect(),
        attach_offsets: s.attached.iter().map(|a| (objects[a.object].id.clone(), pose_arr(&a.offset))).collect(),
    }
}

pub fn state_from_json(objects: &[ObjectDecl], s: &StateJson) -> Result<WorldState> {
    let mut poses = Vec::with_capacity(objects.len());
    for o in objects {
        let p = s.poses.get(&o.id).ok_or_else(|| Error::Invalid(format!("state has no pose for '{}'", o.id)))?;
        poses.push(arr_pose(p));
    }
    let index = |id: &str| {
        objects.iter().position(|o| o.id == id).ok_or_else(|| Error::Invalid(format!("unknown attached object '{id}'")))
    };
    let mut attached = Vec::new();
    for id in &s.attached {
        let object = index(id)?;
        let offset = match s.attach_offsets.get(id) {
            Some(a) => arr_pose(a),
            None => {
                let g = Roles::of(objects)
                    .ok_or_else(|| Error::Invalid(String::from("attachments need a gripper object")))?
                    .gripper;
                relative_pose(&poses[g], &poses[object])
            }
        };
        attached.push(Attachment { object, offset });
    }
    attached.sort_by_key(|a| a.object);
    Ok(WorldState { poses, attached })
}

pub fn trajectory_json(t: &Trajectory) -> TrajectoryJson {
    TrajectoryJson {
        task_id: t.task_id.clone(),
        success: t.success,
        objects: objects_json(&t.objects),
        states: t.states.iter().map(|s| state_json(&t.objects, s)).collect(),
    }
}

pub fn trajectory_from_json(t: &TrajectoryJson) -> Result<Trajectory> {
    let objects = objects_from_json(&t.objects)?;
    if t.states.len() < 2 {
        return Err(Error::Invalid(format!("trajectory '{}' has fewer than 2 states", t.task_id)));
    }
    let states = t.states.iter().map(|s| state_from_json(&objects, s)).collect::<Result<Vec<_>>>()?;
    Ok(Trajectory { task_id: t.task_id.clone(), success: t.success, objects, states })
}

pub fn write_trajectories(path: &Path, trajs: &[Trajectory]) -> Result<()> {
    let mut out = Vec::new();
    for t in trajs {
        serde_json::to_writer(&mut out, &trajectory_json(t)).map_err(|e| Error::format(path, e))?;
        out.push(b'\n');
    }
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}

pub fn read_trajectories(path: &Path) -> Result<Vec<Trajectory>> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let j: TrajectoryJson =
            serde_json::from_str(&line).map_err(|e| Error::format(path, format!("line {}: {e}", i + 1)))?;
        out.push(trajectory_from_json(&j).map_err(|e| Error::format(path, format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

/// World config file. Geometry and script fields are optional overrides of
/// the domain defaults, keyed by field name.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigJson {
    pub domain: String,
    #[serde(default = "one")]
    pub cans: usize,
    #[serde(default)]
    pub surfaces: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub start: Option<String>,
    #[serde(default)]
    pub horizon: Option<usize>,
    #[serde(default)]
    pub geometry: BTreeMap<String, f64>,
    #[serde(default)]
    pub script: BTreeMap<String, f64>,
}

fn one() -> usize {
    1
}

fn set_geometry(g: &mut Geometry, key: &str, v: f64) -> Result<()> {
    let slot = match key {
        "table_w" => &mut g.table_w,
        "table_h" => &mut g.table_h,
        "box_size" => &mut g.box_size,
        "pocket_offset" => &mut g.pocket_offset,
        "pocket_tolerance" => &mut g.pocket_tolerance,
        "can_radius" => &mut g.can_radius,
        "gripper_size" => &mut g.gripper_size,
        "base_w" => &mut g.base_w,
        "base_h" => &mut g.base_h,
        "grasp_min" => &mut g.grasp_min,
        "grasp_max" => &mut g.grasp_max,
        "surface_radius" => &mut g.surface_radius,
        "surface_spacing" => &mut g.surface_spacing,
        "room_size" => &mut g.room_size,
        "step_cap" => &mut g.step_cap,
        "rot_cap" => &mut g.rot_cap,
        _ => return Err(Error::Invalid(format!("unknown geometry field '{key}'"))),
    };
    *slot = v;
    Ok(())
}

fn set_script(s: &mut DemoScript, key: &str, v: f64) -> Result<()> {
    match key {
        "noise_pos" => s.noise_pos = v,
        "noise_ang" => s.noise_ang = v,
        "failure_rate" => s.failure_rate = v,
        "standoff" => s.standoff = v,
        "grasp_distance" => s.grasp_distance = v,
        "detour" => s.detour = v,
        "drive_in_rate" => s.drive_in_rate = v,
        "settle_steps" if v >= 0.0 && v.fract() == 0.0 => s.settle_steps = v as usize,
        "settle_steps" => return Err(Error::Invalid(String::from("settle_steps must be a whole number"))),
        _ => return Err(Error::Invalid(format!("unknown script field '{key}'"))),
    }
    Ok(())
}

fn start_mode(s: &str) -> Result<StartMode> {
    Ok(match s {
        "near_first_can" => StartMode::NearFirstCan,
        "anywhere" => StartMode::Anywhere,
        "docked_anywhere" => StartMode::DockedAnywhere,
        "docked_away" => StartMode::DockedAway,
        _ => return Err(Error::Invalid(format!("unknown start mode '{s}'"))),
    })
}

impl ConfigJson {
    pub fn packing(cans: usize, seed: u64) -> ConfigJson {
        ConfigJson { domain: "packing".into(), cans, seed, ..ConfigJson::default() }
    }

    pub fn cafe(cans: usize, seed: u64) -> ConfigJson {
        ConfigJson { domain: "cafe".into(), cans, seed, ..ConfigJson::default() }
    }

    /// `seed` overrides the file's seed when given.
    pub fn world(&self, seed: Option<u64>) -> Result<WorldConfig> {
        let seed = seed.unwrap_or(self.seed);
        let mut c = match self.domain.as_str() {
            "packing" => WorldConfig::packing(self.cans, seed),
            "cafe" => WorldConfig::cafe(self.cans, seed),
            d => return Err(Error::Invalid(format!("unknown domain '{d}'"))),
        };
        if let Some(s) = self.surfaces {
            c.surfaces = s;
        }
        if let Some(s) = &self.start {
            c.start = start_mode(s)?;
        }
        if let Some(h) = self.horizon {
            c.horizon = h;
        }
        for (k, v) in &self.geometry {
            set_geometry(&mut c.geometry, k, *v)?;
        }
        c.validate().map_err(|e| Error::Invalid(e.to_string()))?;
        Ok(c)
    }

    pub fn script(&self) -> Result<DemoScript> {
        let mut s = DemoScript::default();
        for (k, v) in &self.script {
            set_script(&mut s, k, *v)?;
        }
        s.validate().map_err(|e| Error::Invalid(e.to_string()))?;
        Ok(s)
    }
}

pub fn domain_name(d: Domain) -> &'static str {
    match d {
        Domain::Packing => "packing",
        Domain::Cafe => "cafe",
    }
}

/// One predictor: a mixture and its membership threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictorJson {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub covs: Vec<Vec<Vec<f64>>>,
    pub eps: f64,
}

/// All predictors of one type pair, in index order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairJson {
    pub pair: [String; 2],
    pub components: Vec<PredictorJson>,
}

pub fn predictor_bundle(predictors: &BTreeMap<TypePair, Vec<RcrPredictor>>) -> Vec<PairJson> {
    predictors
        .iter()
        .map(|(pair, ps)| PairJson {
            pair: [pair.0.clone(), pair.1.clone()],
            components: ps
                .iter()
                .map(|p| PredictorJson {
                    weights: p.mixture.weights.clone(),
                    means: p.mixture.components.iter().map(|g| g.mean.clone()).collect(),
                    covs: p
                        .mixture
                        .components
                        .iter()
                        .map(|g| g.cov.chunks(g.dim()).map(|r| r.to_vec()).collect())
                        .collect(),
                    eps: p.eps,
                })
                .collect(),
        })
        .collect()
}

pub fn predictors_from_bundle(bundle: &[PairJson]) -> Result<BTreeMap<TypePair, Vec<RcrPredictor>>> {
    let mut out = BTreeMap::new();
    for pj in bundle {
        let pair: TypePair = (pj.pair[0].clone(), pj.pair[1].clone());
        let mut ps = Vec::new();
        for (i, c) in pj.components.iter().enumerate() {
            let bad = |m: &str| Error::Invalid(format!("predictor {}_{}_{}: {m}", pair.0, pair.1, i + 1));
            if c.weights.is_empty() || c.weights.len() != c.means.len() || c.weights.len() != c.covs.len() {
                return Err(bad("weights, means and covs must have equal nonzero length"));
            }
            let mut comps = Vec::new();
            for (m, cov) in c.means.iter().zip(&c.covs) {
                let d = m.len();
                if d != rcr_core::model::FEATURE_DIM || cov.len() != d || cov.iter().any(|r| r.len() != d) {
                    return Err(bad("means must be 4-vectors and covariances 4x4"));
                }
                let g =
                    Gaussian::new(m.clone(), cov.concat()).ok_or_else(|| bad("covariance is not positive-definite"))?;
                comps.push(g);
            }
            ps.push(RcrPredictor {
                pair: pair.clone(),
                index: i + 1,
                mixture: Mixture { weights: c.weights.clone(), components: comps },
                eps: c.eps,
            });
        }
        out.insert(pair, ps);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationJson {
    pub name: String,
    pub kind: String,
    pub pair: [String; 2],
    pub index: usize,
}

pub fn kind_name(k: RelationKind) -> &'static str {
    match k {
        RelationKind::Region => "region",
        RelationKind::None => "none",
        RelationKind::Free => "free",
    }
}

pub fn vocabulary_json(v: &Vocabulary) -> Vec<RelationJson> {
    v.symbols
        .iter()
        .map(|s| RelationJson {
            name: s.name.clone(),
            kind: kind_name(s.kind).into(),
            pair: [s.pair.0.clone(), s.pair.1.clone()],
            index: s.index,
        })
        .collect()
}

pub fn vocabulary_from_json(types: &[String], rels: &[RelationJson]) -> Result<Vocabulary> {
    let mut symbols = Vec::new();
    for r in rels {
        let kind = match r.kind.as_str() {
            "region" => RelationKind::Region,
            "none" => RelationKind::None,
            "free" => RelationKind::Free,
            k => return Err(Error::Invalid(format!("relation '{}' has unknown kind '{k}'", r.name))),
        };
        if symbols.iter().any(|s: &RelationSymbol| s.name == r.name) {
            return Err(Error::Invalid(format!("duplicate relation '{}'", r.name)));
        }
        symbols.push(RelationSymbol {
            name: r.name.clone(),
            kind,
            pair: (r.pair[0].clone(), r.pair[1].clone()),
            index: r.index,
        });
    }
    Ok(Vocabulary { symbols, types: types.to_vec() })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanRow {
    pub action: String,
    pub args: Vec<String>,
}

pub fn plan_rows_json(rows: &[(String, Vec<String>)]) -> Vec<PlanRow> {
    rows.iter().map(|(a, args)| PlanRow { action: a.clone(), args: args.clone() }).collect()
}

/// A task suite for `eval`: world configs of the test tasks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteJson {
    pub tasks: Vec<ConfigJson>,
}
