//! A learned model on disk: `predictors.json`, `vocab.json` and
//! `domain.pddl` in one directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rcr_core::actions::GraspHint;
use rcr_core::pddl::{emit_domain, parse_domain, schemas_from_domain};
use rcr_core::pipeline::LearnedModel;
use rcr_core::relations::{Abstraction, FreeParams};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formats::{
    predictor_bundle, predictors_from_bundle, read_json, read_text, vocabulary_from_json, vocabulary_json, write_json,
    write_text, PairJson, RelationJson,
};

pub const PREDICTORS: &str = "predictors.json";
pub const VOCAB: &str = "vocab.json";
pub const DOMAIN: &str = "domain.pddl";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoalRelationJson {
    pub pair: [String; 2],
    pub relation: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HintJson {
    pub action: String,
    pub during: Vec<String>,
    pub after: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FreeJson {
    pub samples: usize,
    pub seed: u64,
    pub clear_fraction: f64,
}

/// Everything about a model that the PDDL domain and predictors do not say.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VocabJson {
    pub types: Vec<String>,
    pub relations: Vec<RelationJson>,
    pub goal_relations: Vec<GoalRelationJson>,
    pub hints: Vec<HintJson>,
    pub free: FreeJson,
    /// Graspable-object counts of the training demonstrations.
    pub train_objects: Vec<usize>,
}

/// A model plus the training object counts used for the generalization
/// factor.
#[derive(Clone, Debug, PartialEq)]
pub struct StoredModel {
    pub model: LearnedModel,
    pub train_objects: Vec<usize>,
}

pub fn model_paths(dir: &Path) -> [PathBuf; 3] {
    [dir.join(PREDICTORS), dir.join(VOCAB), dir.join(DOMAIN)]
}

pub fn vocab_json(m: &StoredModel) -> VocabJson {
    let model = &m.model;
    let ab = &model.abstraction;
    VocabJson {
        types: ab.vocab.types.clone(),
        relations: vocabulary_json(&ab.vocab),
        goal_relations: model
            .goal_relations
            .iter()
            .map(|(p, r)| GoalRelationJson { pair: [p.0.clone(), p.1.clone()], relation: r.clone() })
            .collect(),
        hints: model
            .schemas
            .iter()
            .zip(&model.hints)
            .map(|(s, h)| HintJson {
                action: s.name.clone(),
                during: h.during.iter().cloned().collect(),
                after: h.after.iter().cloned().collect(),
            })
            .collect(),
        free: FreeJson {
            samples: ab.free_params.samples,
            seed: ab.free_params.seed,
            clear_fraction: ab.free_params.clear_fraction,
        },
        train_objects: m.train_objects.clone(),
    }
}

pub fn save_model(dir: &Path, m: &StoredModel) -> Result<()> {
    let [p, v, d] = model_paths(dir);
    write_json(&p, &predictor_bundle(&m.model.abstraction.predictors))?;
    write_json(&v, &vocab_json(m))?;
    write_text(&d, &emit_domain(&m.model.domain))
}

pub fn load_model(dir: &Path) -> Result<StoredModel> {
    let [p, v, d] = model_paths(dir);
    let bundle: Vec<PairJson> = read_json(&p)?;
    let predictors = predictors_from_bundle(&bundle).map_err(|e| Error::format(&p, e))?;
    let vj: VocabJson = read_json(&v)?;
    let vocab = vocabulary_from_json(&vj.types, &vj.relations).map_err(|e| Error::format(&v, e))?;
    let domain = parse_domain(&read_text(&d)?).map_err(|e| Error::format(&d, e))?;
    let schemas =
        schemas_from_domain(&domain).map_err(|a| Error::format(&d, format!("action {a} mentions a constant")))?;
    let by_action: BTreeMap<&str, &HintJson> = vj.hints.iter().map(|h| (h.action.as_str(), h)).collect();
    let hints = schemas
        .iter()
        .map(|s| match by_action.get(s.name.as_str()) {
            Some(h) => {
                GraspHint { during: h.during.iter().cloned().collect(), after: h.after.iter().cloned().collect() }
            }
            None => GraspHint::default(),
        })
        .collect();
    let free = FreeParams { samples: vj.free.samples, seed: vj.free.seed, clear_fraction: vj.free.clear_fraction };
    let goal_relations =
        vj.goal_relations.iter().map(|g| ((g.pair[0].clone(), g.pair[1].clone()), g.relation.clone())).collect();
    Ok(StoredModel {
        model: LearnedModel {
            abstraction: Abstraction::new(vocab, predictors, free),
            schemas,
            hints,
            goal_relations,
            domain,
        },
        train_objects: vj.train_objects,
    })
}
