//! Reference PDDL listings: parsing, canonical re-emission and planning.

use std::path::PathBuf;

use rcr_core::pddl::{emit_domain, emit_problem, ground, parse_domain, parse_problem};
use rcr_core::planning::{plan_rows, plan_topk, DEFAULT_NODE_BUDGET};

fn corpus(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/corpus").join(name);
    std::fs::read_to_string(p).unwrap()
}

const FILES: [&str; 5] = ["packing.pddl", "cafeworld.pddl", "keva.pddl", "jenga.pddl", "dinner_table.pddl"];

#[test]
fn every_listing_reemits_to_a_fixed_point() {
    for f in FILES {
        let d = parse_domain(&corpus(f)).unwrap_or_else(|e| panic!("{f}: {e}"));
        let text = emit_domain(&d);
        let again = parse_domain(&text).unwrap();
        assert_eq!(again, d, "{f}");
        assert_eq!(emit_domain(&again), text, "{f}");
    }
}

#[test]
fn listing_inventories() {
    let count = |f: &str| {
        let d = parse_domain(&corpus(f)).unwrap();
        (d.types.len(), d.predicates.len(), d.actions.len())
    };
    assert_eq!(count("packing.pddl"), (3, 7, 5));
    assert_eq!(count("cafeworld.pddl").0, 4);
    assert_eq!(count("cafeworld.pddl").2, 12);
    // Action counts from the raw text, independent of the parser.
    for f in FILES {
        assert_eq!(count(f).2, corpus(f).matches("(:action").count(), "{f}");
    }
}

const SINGLE_CAN: &str = "(define (problem one) (:domain Packing)
  (:objects can1 - can gripper - gripper box - surface)
  (:init (gripper_can_0 gripper can1) (can_surface_0 can1 box)
         (clear3_gripper_can_1 gripper) (clear3_gripper_can_2 gripper))
  (:goal (can_surface_1 can1 box)))";

#[test]
fn packing_listing_plans_a_single_can_in_three_steps() {
    let d = parse_domain(&corpus("packing.pddl")).unwrap();
    let p = parse_problem(SINGLE_CAN).unwrap();
    assert_eq!(parse_problem(&emit_problem(&p)).unwrap(), p);
    let t = ground(&d, &p).unwrap();
    let r = plan_topk(&t, 1, DEFAULT_NODE_BUDGET);
    let names: Vec<String> = plan_rows(&t, &r.plans[0]).into_iter().map(|(a, _)| a).collect();
    // Approach, grasp, then the can lands in the box.
    assert_eq!(names, ["a2", "a1", "a5"]);
}
