//! Relation vocabulary invented from region predictors, and the abstraction
//! function mapping world states to sets of true ground atoms.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::geometry::{compose, footprints_overlap, Pose};
use crate::model::{feature_frame, featurize, ObjectDecl, RelPoseFeature, WorldState};
use crate::rcr::{type_pairs, RcrPredictor, TypePair};
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RelationKind {
    /// Membership in one region of a pair.
    Region,
    /// Membership in no region of a pair.
    None,
    /// Remaining capacity of one region around its anchor.
    Free,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationSymbol {
    pub name: String,
    pub kind: RelationKind,
    pub pair: TypePair,
    /// 1-based region index for region and free relations, 0 for none.
    pub index: usize,
}

impl RelationSymbol {
    pub fn arity(&self) -> usize {
        match self.kind {
            RelationKind::Free => 1,
            _ => 2,
        }
    }

    pub fn arg_types(&self) -> Vec<&str> {
        match self.kind {
            RelationKind::Free => alloc::vec![self.pair.0.as_str()],
            _ => alloc::vec![self.pair.0.as_str(), self.pair.1.as_str()],
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocabulary {
    pub symbols: Vec<RelationSymbol>,
    pub types: Vec<String>,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s.name == name)
    }

    /// Relation ids of one pair in index order `0, 1, .., K` (none first).
    pub fn pair_relations(&self, pair: &TypePair) -> Vec<usize> {
        let mut out: Vec<usize> = (0..self.symbols.len())
            .filter(|&i| self.symbols[i].pair == *pair && self.symbols[i].kind != RelationKind::Free)
            .collect();
        out.sort_by_key(|&i| self.symbols[i].index);
        out
    }
}

/// A relation applied to object indices. Unary atoms repeat their argument
/// in both slots so atoms stay `Copy` and totally ordered.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroundAtom {
    pub rel: usize,
    pub args: [usize; 2],
}

impl GroundAtom {
    pub fn binary(rel: usize, a: usize, b: usize) -> GroundAtom {
        GroundAtom { rel, args: [a, b] }
    }

    pub fn unary(rel: usize, a: usize) -> GroundAtom {
        GroundAtom { rel, args: [a, a] }
    }

    pub fn arg_slice<'a>(&'a self, vocab: &Vocabulary) -> &'a [usize] {
        &self.args[..vocab.symbols[self.rel].arity()]
    }

    /// `(name o1 o2)` using object ids.
    pub fn render(&self, vocab: &Vocabulary, objects: &[ObjectDecl]) -> String {
        let mut s = format!("({}", vocab.symbols[self.rel].name);
        for &a in self.arg_slice(vocab) {
            s.push(' ');
            s.push_str(&objects[a].id);
        }
        s.push(')');
        s
    }
}

pub type AbstractState = BTreeSet<GroundAtom>;

/// Builds the vocabulary: per type pair with `K` predictors, the none relation
/// `<a>_<b>_0`, region relations `<a>_<b>_1..K` and free relations
/// `clear_<a>_<b>_1..K`. Pairs come in type-rank order.
pub fn invent_relations(predictors: &BTreeMap<TypePair, Vec<RcrPredictor>>, types: &[String]) -> Vocabulary {
    let mut ts: Vec<String> = types.to_vec();
    for (a, b) in predictors.keys() {
        for t in [a, b] {
            if !ts.contains(t) {
                ts.push(t.clone());
            }
        }
    }
    let mut symbols = Vec::new();
    for pair in type_pairs(&ts) {
        let k = match predictors.get(&pair) {
            Some(p) if !p.is_empty() => p.len(),
            _ => continue,
        };
        let base = format!("{}_{}", pair.0, pair.1);
        symbols.push(RelationSymbol {
            name: format!("{base}_0"),
            kind: RelationKind::None,
            pair: pair.clone(),
            index: 0,
        });
        for i in 1..=k {
            symbols.push(RelationSymbol {
                name: format!("{base}_{i}"),
                kind: RelationKind::Region,
                pair: pair.clone(),
                index: i,
            });
        }
        for i in 1..=k {
            symbols.push(RelationSymbol {
                name: format!("clear_{base}_{i}"),
                kind: RelationKind::Free,
                pair: pair.clone(),
                index: i,
            });
        }
    }
    if predictors.is_empty() {
        ts.clear();
    }
    Vocabulary { symbols, types: ts }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FreeParams {
    pub samples: usize,
    pub seed: u64,
    /// A region counts as clear while more than this fraction of its samples
    /// can still receive another object clear of the objects already in it.
    pub clear_fraction: f64,
}

impl Default for FreeParams {
    fn default() -> FreeParams {
        FreeParams { samples: 512, seed: 0x0f2e_e5a3, clear_fraction: 0.0 }
    }
}

/// Fixed member samples of one region, used for free-volume estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionSamples {
    pub features: Vec<RelPoseFeature>,
    /// Largest anchor-to-sample distance.
    pub reach: f64,
}

impl RegionSamples {
    pub fn draw(p: &RcrPredictor, params: &FreeParams, path: &[u64]) -> RegionSamples {
        let mut r = rng::stream(params.seed, path);
        let mut features = Vec::with_capacity(params.samples);
        let mut tries = 0;
        while features.len() < params.samples && tries < 50 * params.samples.max(1) {
            tries += 1;
            let x = p.sample(&mut r);
            if p.contains(&x) {
                features.push(x);
            }
        }
        if features.is_empty() {
            features.push(p.mode());
        }
        let reach = features.iter().map(|x| libm::hypot(x[0], x[1])).fold(0.0, f64::max);
        RegionSamples { features, reach }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FreeVolume {
    /// Fraction of the region's probability mass where another object of the
    /// region's second type fits without overlapping existing ones.
    pub free: f64,
    /// Mass of the whole region (always 1 in these units).
    pub total: f64,
}

/// World pose of a second-type object whose feature relative to `anchor` is `x`.
pub fn feature_to_pose(anchor: &ObjectDecl, anchor_pose: &Pose, x: &RelPoseFeature) -> Pose {
    let frame = feature_frame(anchor, anchor_pose);
    compose(&frame, &Pose::new(x[0], x[1], libm::atan2(x[3], x[2])))
}

/// Free part of the region around `anchor` given the objects occupying it.
pub fn free_volume(
    samples: &RegionSamples,
    objects: &[ObjectDecl],
    state: &WorldState,
    anchor: usize,
    occupants: &[usize],
) -> FreeVolume {
    if occupants.is_empty() {
        return FreeVolume { free: 1.0, total: 1.0 };
    }
    let ap = state.poses[anchor];
    let n = samples.features.len();
    let free = samples
        .features
        .iter()
        .filter(|x| {
            let p = feature_to_pose(&objects[anchor], &ap, x);
            occupants.iter().all(|&o| !footprints_overlap(&objects[o].shape, &p, &objects[o].shape, &state.poses[o]))
        })
        .count();
    FreeVolume { free: free as f64 / n as f64, total: 1.0 }
}

/// Vocabulary plus the predictors and region samples needed to evaluate it.
#[derive(Clone, Debug, PartialEq)]
pub struct Abstraction {
    pub vocab: Vocabulary,
    pub predictors: BTreeMap<TypePair, Vec<RcrPredictor>>,
    pub free_params: FreeParams,
    samples: BTreeMap<TypePair, Vec<RegionSamples>>,
}

impl Abstraction {
    pub fn new(vocab: Vocabulary, predictors: BTreeMap<TypePair, Vec<RcrPredictor>>, free_params: FreeParams) -> Self {
        let samples = predictors
            .iter()
            .enumerate()
            .map(|(pi, (pair, ps))| {
                let s = ps.iter().map(|p| RegionSamples::draw(p, &free_params, &[pi as u64, p.index as u64])).collect();
                (pair.clone(), s)
            })
            .collect();
        Abstraction { vocab, predictors, free_params, samples }
    }

    /// Vocabulary invented from `predictors` with default free-volume settings.
    pub fn from_predictors(predictors: BTreeMap<TypePair, Vec<RcrPredictor>>) -> Self {
        let vocab = invent_relations(&predictors, &[]);
        Abstraction::new(vocab, predictors, FreeParams::default())
    }

    pub fn region_samples(&self, pair: &TypePair, index: usize) -> Option<&RegionSamples> {
        self.samples.get(pair).and_then(|v| v.get(index - 1))
    }

    /// Winning region index (0 = none) of `(a, b)` under the pair's predictors.
    /// Among several claiming regions the highest log-density wins, ties going
    /// to the lower index.
    pub fn region_of(&self, objects: &[ObjectDecl], state: &WorldState, a: usize, b: usize) -> usize {
        let pair = (objects[a].ty.clone(), objects[b].ty.clone());
        let ps = match self.predictors.get(&pair) {
            Some(p) => p,
            None => return 0,
        };
        let x = featurize(&objects[a], &state.poses[a], &objects[b], &state.poses[b]);
        let mut best = 0;
        let mut best_ld = f64::NEG_INFINITY;
        for p in ps {
            let ld = p.log_density(&x);
            if ld >= p.eps && ld > best_ld {
                best = p.index;
                best_ld = ld;
            }
        }
        best
    }

    pub fn evaluate_atom(&self, objects: &[ObjectDecl], state: &WorldState, atom: &GroundAtom) -> bool {
        let sym = &self.vocab.symbols[atom.rel];
        let [a, b] = atom.args;
        match sym.kind {
            RelationKind::Region | RelationKind::None => {
                objects[a].ty == sym.pair.0
                    && objects[b].ty == sym.pair.1
                    && a != b
                    && self.region_of(objects, state, a, b) == sym.index
            }
            RelationKind::Free => {
                objects[a].ty == sym.pair.0
                    && self.free_volume_of(objects, state, sym, a).free > self.free_params.clear_fraction
            }
        }
    }

    pub fn free_volume_of(
        &self,
        objects: &[ObjectDecl],
        state: &WorldState,
        sym: &RelationSymbol,
        anchor: usize,
    ) -> FreeVolume {
        match self.region_samples(&sym.pair, sym.index) {
            Some(s) => {
                let occupants: Vec<usize> = (0..objects.len())
                    .filter(|&o| {
                        o != anchor
                            && objects[o].ty == sym.pair.1
                            && self.region_of(objects, state, anchor, o) == sym.index
                    })
                    .collect();
                free_volume(s, objects, state, anchor, &occupants)
            }
            None => FreeVolume { free: 0.0, total: 1.0 },
        }
    }

    /// All true atoms over every well-typed grounding.
    pub fn abstract_state(&self, objects: &[ObjectDecl], state: &WorldState) -> AbstractState {
        let mut out = AbstractState::new();
        let mut pair_rel: BTreeMap<(&str, &str, usize), usize> = BTreeMap::new();
        for (i, s) in self.vocab.symbols.iter().enumerate() {
            if s.kind != RelationKind::Free {
                pair_rel.insert((s.pair.0.as_str(), s.pair.1.as_str(), s.index), i);
            }
        }
        for pair in self.predictors.keys() {
            for a in 0..objects.len() {
                if objects[a].ty != pair.0 {
                    continue;
                }
                for b in 0..objects.len() {
                    if a == b || objects[b].ty != pair.1 {
                        continue;
                    }
                    let k = self.region_of(objects, state, a, b);
                    if let Some(&rel) = pair_rel.get(&(pair.0.as_str(), pair.1.as_str(), k)) {
                        out.insert(GroundAtom::binary(rel, a, b));
                    }
                }
            }
        }
        for (rel, sym) in self.vocab.symbols.iter().enumerate() {
            if sym.kind != RelationKind::Free {
                continue;
            }
            for a in 0..objects.len() {
                if objects[a].ty == sym.pair.0
                    && self.free_volume_of(objects, state, sym, a).free > self.free_params.clear_fraction
                {
                    out.insert(GroundAtom::unary(rel, a));
                }
            }
        }
        out
    }
}

/// Renders an abstract state as sorted `(name args..)` strings.
pub fn render_state(vocab: &Vocabulary, objects: &[ObjectDecl], s: &AbstractState) -> Vec<String> {
    let mut v: Vec<String> = s.iter().map(|a| a.render(vocab, objects)).collect();
    v.sort();
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Shape;
    use crate::rcr::{Gaussian, Mixture};
    use alloc::vec;

    fn pred(pair: (&str, &str), index: usize, mean: [f64; 4], var: f64) -> RcrPredictor {
        let mut cov = vec![0.0; 16];
        for i in 0..4 {
            cov[i * 5] = var;
        }
        let mixture = Mixture { weights: vec![1.0], components: vec![Gaussian::new(mean.to_vec(), cov).unwrap()] };
        let eps = mixture.log_density(&mean) - 4.5;
        RcrPredictor { pair: (pair.0.into(), pair.1.into()), index, mixture, eps }
    }

    fn predictors() -> BTreeMap<TypePair, Vec<RcrPredictor>> {
        let mut m = BTreeMap::new();
        m.insert(
            ("gripper".into(), "can".into()),
            vec![
                pred(("gripper", "can"), 1, [0.04, 0.0, 1.0, 0.0], 1e-5),
                pred(("gripper", "can"), 2, [0.15, 0.0, 1.0, 0.0], 1e-4),
            ],
        );
        m.insert(("can".into(), "surface".into()), vec![pred(("can", "surface"), 1, [0.0, 0.0, 1.0, 0.0], 1e-3)]);
        m
    }

    fn scene(gx: f64) -> (Vec<ObjectDecl>, WorldState) {
        let objects = vec![
            ObjectDecl::new("gripper", "gripper", Shape::Rect { w: 0.02, h: 0.02 }),
            ObjectDecl::new("box", "surface", Shape::Rect { w: 0.09, h: 0.09 }),
            ObjectDecl::new("can_1", "can", Shape::Disc { r: 0.0125 }),
        ];
        let state = WorldState::new(vec![Pose::new(gx, 0.0, 0.0), Pose::new(1.0, 1.0, 0.0), Pose::new(0.0, 0.0, 0.0)]);
        (objects, state)
    }

    #[test]
    fn packing_vocabulary() {
        let v = invent_relations(&predictors(), &[]);
        let names: Vec<&str> = v.symbols.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(
            names,
            [
                "gripper_can_0",
                "gripper_can_1",
                "gripper_can_2",
                "clear_gripper_can_1",
                "clear_gripper_can_2",
                "can_surface_0",
                "can_surface_1",
                "clear_can_surface_1"
            ]
        );
        assert!(invent_relations(&BTreeMap::new(), &[]).is_empty());
    }

    #[test]
    fn membership_and_none() {
        let ab = Abstraction::from_predictors(predictors());
        let (objects, state) = scene(-0.04);
        let s = render_state(&ab.vocab, &objects, &ab.abstract_state(&objects, &state));
        assert!(s.contains(&"(gripper_can_1 gripper can_1)".into()));
        assert!(!s.contains(&"(clear_gripper_can_1 gripper)".into()));
        assert!(s.contains(&"(clear_gripper_can_2 gripper)".into()));
        let (objects, state) = scene(-0.9);
        let s = render_state(&ab.vocab, &objects, &ab.abstract_state(&objects, &state));
        assert!(s.contains(&"(gripper_can_0 gripper can_1)".into()));
        assert!(s.contains(&"(clear_gripper_can_1 gripper)".into()));
    }
}
