//! Action invention on hand-built lifted trajectories: a pick of one cup from
//! a table followed by a base motion, demonstrated on two different cups.

use std::collections::BTreeSet;

use rcr_core::actions::*;

fn atom(rel: &str, args: &[&str]) -> LiftedAtom {
    LiftedAtom::new(rel, args)
}

fn set(atoms: &[LiftedAtom]) -> LiftedSet {
    atoms.iter().cloned().collect()
}

/// Four states: grasp the cup, lift it off the table, move the arm over the base.
fn pick_demo(task: &str, cup: &str) -> LiftedTrajectory {
    let tc = |k: u8| atom(&format!("table_can_{k}"), &["table", "can"]);
    let cg = |k: u8| atom(&format!("can_gripper_{k}"), &["can", "gripper"]);
    let bg = |k: u8| atom(&format!("base_gripper_{k}"), &["base", "gripper"]);
    let bt = atom("base_table_1", &["base", "table"]);
    let var = |n: &str, o: &str| LiftedVar { name: n.into(), ty: n.into(), object: o.into() };
    LiftedTrajectory {
        task_id: task.into(),
        vars: vec![var("table", "table"), var("can", cup), var("gripper", "gripper"), var("base", "base")],
        states: vec![
            set(&[tc(1), cg(1), bg(0), bt.clone()]),
            set(&[tc(1), cg(2), bg(0), bt.clone()]),
            set(&[tc(0), cg(2), bg(0), bt.clone()]),
            set(&[tc(0), cg(2), bg(1), bt]),
        ],
        held: vec![],
    }
}

fn demos() -> Vec<LiftedTrajectory> {
    vec![pick_demo("yellow", "yellow_cup"), pick_demo("green", "green_cup")]
}

fn by_effect<'a>(schemas: &'a [ActionSchema], added: &str) -> &'a ActionSchema {
    schemas.iter().find(|s| s.add.iter().any(|a| a.rel == added)).unwrap()
}

fn names(s: &LiftedSet) -> BTreeSet<String> {
    s.iter().map(|a| a.to_string()).collect()
}

fn strs(v: &[&str]) -> BTreeSet<String> {
    v.iter().map(|s| s.to_string()).collect()
}

#[test]
fn three_clusters_from_two_demos() {
    let c = cluster_transitions(&demos()).unwrap();
    assert_eq!(c.len(), 3);
    assert!(c.iter().all(|c| c.members.len() == 2));
}

#[test]
fn worked_example_schemas() {
    let t = std::time::Instant::now();
    let s = invent_actions(&demos()).unwrap();
    assert!(t.elapsed().as_secs_f64() < 1.0);
    assert_eq!(s.len(), 3);

    let c12 = by_effect(&s, "can_gripper_2");
    assert_eq!(names(&c12.add), strs(&["(can_gripper_2 ?can_p1 ?gripper_p1)"]));
    assert_eq!(names(&c12.del), strs(&["(can_gripper_1 ?can_p1 ?gripper_p1)"]));
    assert_eq!(
        names(&c12.pre),
        strs(&[
            "(table_can_1 ?table_extra_p1 ?can_p1)",
            "(can_gripper_1 ?can_p1 ?gripper_p1)",
            "(base_gripper_0 ?base_extra_p1 ?gripper_p1)",
        ])
    );
    let params: BTreeSet<&str> = c12.params.iter().map(|p| p.1.as_str()).collect();
    assert_eq!(params, ["table", "can", "gripper", "base"].into_iter().collect());

    let c23 = by_effect(&s, "table_can_0");
    assert_eq!(names(&c23.del), strs(&["(table_can_1 ?table_p1 ?can_p1)"]));
    assert_eq!(
        names(&c23.pre),
        strs(&[
            "(table_can_1 ?table_p1 ?can_p1)",
            "(can_gripper_2 ?can_p1 ?gripper_extra_p1)",
            "(base_gripper_0 ?base_extra_p1 ?gripper_extra_p1)",
            "(base_table_1 ?base_extra_p1 ?table_p1)",
        ])
    );

    let c34 = by_effect(&s, "base_gripper_1");
    assert_eq!(names(&c34.del), strs(&["(base_gripper_0 ?base_p1 ?gripper_p1)"]));
    assert_eq!(
        names(&c34.pre),
        strs(&[
            "(table_can_0 ?table_extra_p1 ?can_extra_p1)",
            "(can_gripper_2 ?can_extra_p1 ?gripper_p1)",
            "(base_gripper_0 ?base_p1 ?gripper_p1)",
            "(base_table_1 ?base_p1 ?table_extra_p1)",
        ])
    );
}

#[test]
fn precondition_before_pruning_is_the_full_pre_state() {
    let d = demos();
    let c = cluster_transitions(&d).unwrap();
    let grasp = c.iter().find(|c| c.signature.added.iter().any(|a| a.rel == "can_gripper_2")).unwrap();
    let (pre, _) = learn_precondition(grasp, &d);
    let rels: BTreeSet<&str> = pre.iter().map(|a| a.rel.as_str()).collect();
    assert_eq!(rels, ["table_can_1", "can_gripper_1", "base_gripper_0", "base_table_1"].into_iter().collect());
}

#[test]
fn pruning_keeps_atoms_touching_the_effect() {
    let sig = ChangeSignature { added: set(&[atom("r_1", &["x"])]), deleted: LiftedSet::new() };
    let pre = set(&[atom("q", &["x", "y"]), atom("s", &["y"]), atom("t", &["z"])]);
    let changed: BTreeSet<String> = ["t".to_string()].into_iter().collect();
    let kept = prune_precondition(&pre, &sig, &changed);
    assert_eq!(kept, set(&[atom("q", &["x", "y"]), atom("t", &["z"])]));
}

#[test]
fn params_include_effect_only_variables_once() {
    let sig = ChangeSignature { added: set(&[atom("r", &["a", "b"])]), deleted: set(&[atom("s", &["b"])]) };
    let pre = set(&[atom("p", &["a"]), atom("q", &["a"])]);
    assert_eq!(extract_params(&pre, &sig), vec!["a".to_string(), "b".to_string()]);
}

#[test]
fn replaying_one_demo_is_idempotent() {
    let one = invent_actions(&demos()[..1]).unwrap();
    let many: Vec<LiftedTrajectory> = (0..5).map(|_| demos()[0].clone()).collect();
    assert_eq!(invent_actions(&many).unwrap(), one);
}

#[test]
fn no_change_means_no_transition() {
    let mut d = demos()[0].clone();
    d.states.truncate(1);
    assert!(invent_actions(&[d]).unwrap().is_empty());
}

#[test]
fn training_transitions_are_reproduced() {
    let d = demos();
    let s = invent_actions(&d).unwrap();
    for t in &d {
        for w in t.states.windows(2) {
            assert!(s.iter().any(|a| find_grounding(a, t, &w[0], &w[1]).is_some()));
        }
    }
}
