//! On-disk formats: trajectories, configs, predictor bundles and models.

use std::sync::OnceLock;

use proptest::prelude::*;
use rcr::formats::{
    predictor_bundle, predictors_from_bundle, read_trajectories, state_from_json, state_json, vocabulary_from_json,
    vocabulary_json, write_trajectories, ConfigJson, PairJson, SuiteJson,
};
use rcr::model_io::{load_model, save_model, StoredModel};
use rcr::stages;
use rcr_core::geometry::{relative_pose, Pose};
use rcr_core::model::{Attachment, WorldState};
use rcr_core::pddl::{emit_domain, parse_domain};
use rcr_core::pipeline::LearnOptions;
use rcr_core::world::{generate_demos, init_world, DemoScript, WorldConfig};

fn stored() -> &'static StoredModel {
    static M: OnceLock<StoredModel> = OnceLock::new();
    M.get_or_init(|| {
        let demos = stages::gen_demos(&WorldConfig::packing(1, 0), &DemoScript::default(), 40);
        stages::learn(&demos, &LearnOptions::default()).unwrap()
    })
}

#[test]
fn parallel_demos_match_the_sequential_generator() {
    let (c, s) = (WorldConfig::packing(1, 3), DemoScript::default());
    assert_eq!(stages::gen_demos(&c, &s, 12), generate_demos(&c, &s, 12));
}

#[test]
fn trajectories_round_trip_bit_exactly() {
    let demos = generate_demos(&WorldConfig::packing(1, 1), &DemoScript::default(), 5);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sub/demos.jsonl");
    write_trajectories(&path, &demos).unwrap();
    assert_eq!(read_trajectories(&path).unwrap(), demos);
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn malformed_trajectory_lines_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.jsonl");
    let demos = generate_demos(&WorldConfig::packing(1, 1), &DemoScript::default(), 1);
    write_trajectories(&path, &demos).unwrap();
    let mut text = std::fs::read_to_string(&path).unwrap();
    text.push_str("{\"task_id\": 3}\n");
    std::fs::write(&path, text).unwrap();
    let e = read_trajectories(&path).unwrap_err();
    assert!(e.to_string().contains("line 2"), "{e}");
    assert_eq!(e.exit_code(), 2);
}

#[test]
fn missing_offsets_are_recomputed_from_the_gripper() {
    let t = init_world(&WorldConfig::packing(1, 2)).unwrap();
    let (g, c) = (t.object_index("gripper").unwrap(), t.object_index("can_1").unwrap());
    let mut s = t.init.clone();
    s.poses[g] = Pose::new(s.poses[c].x - 0.03, s.poses[c].y, 0.0);
    s.attached.push(Attachment { object: c, offset: relative_pose(&s.poses[g], &s.poses[c]) });
    let mut j = state_json(&t.objects, &s);
    assert_eq!(state_from_json(&t.objects, &j).unwrap(), s);
    j.attach_offsets.clear();
    let back = state_from_json(&t.objects, &j).unwrap();
    assert!(back.attachment_invariant_holds(g, 1e-12));
    j.attached.push("nothing".into());
    assert!(state_from_json(&t.objects, &j).is_err());
}

#[test]
fn configs_apply_overrides_and_reject_unknown_fields() {
    let c: ConfigJson =
        serde_json::from_str(r#"{"domain": "packing", "cans": 2, "seed": 9, "geometry": {"box_size": 0.1}}"#).unwrap();
    let w = c.world(None).unwrap();
    assert_eq!((w.cans, w.seed, w.geometry.box_size), (2, 9, 0.1));
    assert_eq!(c.world(Some(4)).unwrap().seed, 4);
    assert!(serde_json::from_str::<ConfigJson>(r#"{"domain": "packing", "colour": 1}"#).is_err());
    let bad = |j: &str| serde_json::from_str::<ConfigJson>(j).unwrap();
    assert!(bad(r#"{"domain": "kitchen"}"#).world(None).is_err());
    assert!(bad(r#"{"domain": "packing", "geometry": {"wheels": 4}}"#).world(None).is_err());
    assert!(bad(r#"{"domain": "packing", "script": {"settle_steps": 2.5}}"#).script().is_err());
    for f in ["packing.json", "cafe.json"] {
        let p = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(f);
        let c: ConfigJson = serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap();
        c.world(None).unwrap();
        c.script().unwrap();
    }
    let p = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/packing_suite.json");
    let suite: SuiteJson = serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap();
    assert_eq!(suite.tasks.len(), 12);
}

#[test]
fn predictor_bundles_and_vocabularies_round_trip() {
    let ab = &stored().model.abstraction;
    let bundle = predictor_bundle(&ab.predictors);
    let text = serde_json::to_string(&bundle).unwrap();
    let parsed: Vec<PairJson> = serde_json::from_str(&text).unwrap();
    let back = predictors_from_bundle(&parsed).unwrap();
    assert_eq!(back, ab.predictors);
    let v = vocabulary_from_json(&ab.vocab.types, &vocabulary_json(&ab.vocab)).unwrap();
    assert_eq!(v, ab.vocab);
}

#[test]
fn models_round_trip_through_a_directory() {
    let m = stored();
    let dir = tempfile::tempdir().unwrap();
    save_model(dir.path(), m).unwrap();
    let back = load_model(dir.path()).unwrap();
    assert_eq!(&back, m);
    assert_eq!(parse_domain(&emit_domain(&m.model.domain)).unwrap(), m.model.domain);
    std::fs::write(dir.path().join("domain.pddl"), "(define (domain").unwrap();
    assert_eq!(load_model(dir.path()).unwrap_err().exit_code(), 2);
}

fn arb_state() -> impl Strategy<Value = (f64, f64, f64, bool)> {
    (-5.0..5.0f64, -5.0..5.0f64, -3.1..3.1f64, any::<bool>())
}

proptest! {
    #[test]
    fn states_round_trip_through_json_text((x, y, th, held) in arb_state()) {
        let t = init_world(&WorldConfig::packing(1, 0)).unwrap();
        let (g, c) = (t.object_index("gripper").unwrap(), t.object_index("can_1").unwrap());
        let mut s: WorldState = t.init.clone();
        s.poses[c] = Pose::new(x, y, th);
        if held {
            s.attached.push(Attachment { object: c, offset: relative_pose(&s.poses[g], &s.poses[c]) });
        }
        let text = serde_json::to_string(&state_json(&t.objects, &s)).unwrap();
        let back = state_from_json(&t.objects, &serde_json::from_str(&text).unwrap()).unwrap();
        prop_assert_eq!(back, s);
    }
}
