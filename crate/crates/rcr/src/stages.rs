//! Pipeline stages shared by the command line and the test suites.

use std::time::Instant;

use rayon::prelude::*;
use rcr_core::metrics::{summarize, Metrics, TaskOutcome};
use rcr_core::model::{Task, Trajectory};
use rcr_core::pddl::{ground, parse_domain, parse_problem};
use rcr_core::pipeline::{learn_model, LearnOptions};
use rcr_core::planning::{plan_rows, plan_topk, Plan};
use rcr_core::refine::{solve_task, RefinedPlan, RefinementBudget, SolveError};
use rcr_core::rng;
use rcr_core::world::{episode_specs, generate_episode, init_world, is_graspable, DemoScript, Limits, WorldConfig};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::formats::SuiteJson;
use crate::model_io::StoredModel;

/// Same episodes as the sequential generator, produced in parallel.
pub fn gen_demos(config: &WorldConfig, script: &DemoScript, n: usize) -> Vec<Trajectory> {
    episode_specs(config, script, n).into_par_iter().map(|s| generate_episode(config, script, s)).collect()
}

pub fn graspable_count(objects: &[rcr_core::model::ObjectDecl]) -> usize {
    objects.iter().filter(|o| is_graspable(o)).count()
}

pub fn learn(demos: &[Trajectory], opts: &LearnOptions) -> Result<StoredModel> {
    let model = learn_model(demos, opts).map_err(|e| Error::Stage(e.to_string()))?;
    let train_objects = demos
        .iter()
        .filter(|d| d.success || opts.criticality.include_failed)
        .map(|d| graspable_count(&d.objects))
        .collect();
    Ok(StoredModel { model, train_objects })
}

/// One plan as `(action, args)` rows.
pub type PlanRows = Vec<(String, Vec<String>)>;

/// Top-k plans for a PDDL domain and problem.
pub fn plan_pddl(domain: &str, problem: &str, k: usize) -> Result<Vec<PlanRows>> {
    let d = parse_domain(domain).map_err(|e| Error::Invalid(format!("domain: {e}")))?;
    let p = parse_problem(problem).map_err(|e| Error::Invalid(format!("problem: {e}")))?;
    let g = ground(&d, &p).map_err(|e| Error::Invalid(e.to_string()))?;
    let top = plan_topk(&g, k, rcr_core::planning::DEFAULT_NODE_BUDGET);
    Ok(top.plans.iter().map(|pl: &Plan| plan_rows(&g, pl)).collect())
}

pub fn budget_with_plans(k: usize) -> RefinementBudget {
    RefinementBudget { plans: k.max(1), ..RefinementBudget::default() }
}

pub fn solve(
    task: &Task,
    config: &WorldConfig,
    m: &StoredModel,
    budget: &RefinementBudget,
    seed: u64,
) -> std::result::Result<RefinedPlan, SolveError> {
    solve_task(task, &m.model, &Limits::from_geometry(&config.geometry), budget, seed)
}

/// Per-task row of an evaluation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TaskReport {
    pub task_id: String,
    pub success: bool,
    pub plan_length: usize,
    pub samples: usize,
    pub objects: usize,
    pub wall_ms: u128,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsJson {
    pub success_rate: f64,
    pub mean_plan_length: f64,
    pub mean_refine_samples: f64,
    pub generalization_factor: f64,
    pub wall_ms: u128,
}

impl MetricsJson {
    pub fn new(m: &Metrics, wall_ms: u128) -> MetricsJson {
        MetricsJson {
            success_rate: m.success_rate,
            mean_plan_length: m.mean_plan_length,
            mean_refine_samples: m.mean_refine_samples,
            generalization_factor: m.generalization_factor,
            wall_ms,
        }
    }
}

/// Solves one task with a seed derived from `(seed, index)`.
pub fn eval_task(
    config: &WorldConfig,
    m: &StoredModel,
    budget: &RefinementBudget,
    seed: u64,
    index: usize,
) -> TaskReport {
    let t0 = Instant::now();
    let task = match init_world(config) {
        Ok(t) => t,
        Err(e) => {
            return TaskReport {
                task_id: format!("task-{index}"),
                success: false,
                plan_length: 0,
                samples: 0,
                objects: config.cans,
                wall_ms: t0.elapsed().as_millis(),
                error: Some(e.to_string()),
            }
        }
    };
    let r = solve(&task, config, m, budget, rng::derive_seed(seed, &[index as u64]));
    let (success, plan_length, samples, error) = match &r {
        Ok(p) => (true, p.plan.actions.len(), p.samples, None),
        Err(SolveError::Exhausted { samples, .. }) => (false, 0, *samples, Some(r.as_ref().unwrap_err().to_string())),
        Err(e) => (false, 0, 0, Some(e.to_string())),
    };
    TaskReport {
        task_id: task.id.clone(),
        success,
        plan_length,
        samples,
        objects: graspable_count(&task.objects),
        wall_ms: t0.elapsed().as_millis(),
        error,
    }
}

/// Runs a suite in parallel. Results are in suite order and, apart from the
/// timings, depend only on the model, the suite and the seed.
pub fn eval(
    suite: &SuiteJson,
    m: &StoredModel,
    budget: &RefinementBudget,
    seed: u64,
) -> Result<(MetricsJson, Vec<TaskReport>)> {
    let t0 = Instant::now();
    let configs = suite.tasks.iter().map(|c| c.world(None)).collect::<Result<Vec<_>>>()?;
    let reports: Vec<TaskReport> =
        configs.par_iter().enumerate().map(|(i, c)| eval_task(c, m, budget, seed, i)).collect();
    let outcomes: Vec<TaskOutcome> = reports
        .iter()
        .map(|r| TaskOutcome { success: r.success, plan_length: r.plan_length, samples: r.samples, objects: r.objects })
        .collect();
    let metrics = summarize(&outcomes, &m.train_objects).map_err(|e| Error::Invalid(e.to_string()))?;
    Ok((MetricsJson::new(&metrics, t0.elapsed().as_millis()), reports))
}
