//! Plan refinement on packing tasks, checked by replaying the primitives in
//! the simulator.

use std::sync::OnceLock;

use rcr_core::model::Task;
use rcr_core::pipeline::{learn_model, LearnOptions, LearnedModel};
use rcr_core::planning::validate_plan;
use rcr_core::refine::{replay, solve_task, RefinementBudget, SolveError};
use rcr_core::world::{check_collision, generate_demos, goal_satisfied, init_world, DemoScript, Limits, WorldConfig};

fn model() -> &'static LearnedModel {
    static M: OnceLock<LearnedModel> = OnceLock::new();
    M.get_or_init(|| {
        let demos = generate_demos(&WorldConfig::packing(1, 0), &DemoScript::default(), 200);
        learn_model(&demos, &LearnOptions::default()).unwrap()
    })
}

fn task(cans: usize, seed: u64) -> Task {
    init_world(&WorldConfig::packing(cans, seed)).unwrap()
}

#[test]
fn refined_plans_replay_to_the_goal() {
    let m = model();
    let limits = Limits::default();
    for (cans, seed) in [(1, 101), (1, 102), (2, 103), (3, 104)] {
        let t = task(cans, seed);
        let r = solve_task(&t, m, &limits, &RefinementBudget::default(), 7).unwrap();
        let gt = m.ground_task(&t).unwrap();
        if r.level == 0 {
            assert_eq!(validate_plan(&gt, &r.plan), Ok(()));
        }
        assert_eq!(r.rows.len(), r.plan.actions.len());
        assert_eq!(r.steps.len(), r.plan.actions.len());
        let prims: Vec<_> = r.primitives().cloned().collect();
        let states = replay(&t.objects, &t.init, &prims, &limits).expect("replay without collision");
        assert_eq!(states.len(), prims.len());
        assert!(states.iter().all(|s| check_collision(&t.objects, s).is_empty()));
        let last = states.last().unwrap();
        assert!(goal_satisfied(&t, last), "{cans} cans, seed {seed}");
        assert_eq!(last, r.states.last().unwrap());
        let goal = m.goal_atoms(&t).unwrap();
        let abs = m.abstraction.abstract_state(&t.objects, last);
        for (rel, args) in goal {
            assert!(abs.contains(&m.ground_atom(&t, &rel, &args).unwrap()), "{rel} {args:?}");
        }
    }
}

#[test]
fn single_can_plan_has_three_actions() {
    let m = model();
    let t = task(1, 105);
    let r = solve_task(&t, m, &Limits::default(), &RefinementBudget::default(), 1).unwrap();
    assert_eq!((r.level, r.plan.cost()), (0, 3));
}

#[test]
fn solving_is_deterministic_in_the_seed() {
    let m = model();
    let t = task(2, 106);
    let b = RefinementBudget::default();
    let a = solve_task(&t, m, &Limits::default(), &b, 3).unwrap();
    let c = solve_task(&t, m, &Limits::default(), &b, 3).unwrap();
    assert_eq!(a.plan, c.plan);
    assert_eq!(a.states, c.states);
    assert_eq!(a.samples, c.samples);
}

#[test]
fn invalid_budgets_are_rejected() {
    let m = model();
    let t = task(1, 107);
    for b in [
        RefinementBudget { samples: 0, ..Default::default() },
        RefinementBudget { restarts: 0, ..Default::default() },
        RefinementBudget { plans: 0, ..Default::default() },
    ] {
        assert!(matches!(solve_task(&t, m, &Limits::default(), &b, 0), Err(SolveError::InvalidBudget(_))));
    }
}
