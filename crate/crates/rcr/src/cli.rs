//! `rcr` subcommands. Each stage reads only the files named by its flags and
//! writes only into `--out`, recording what it wrote in `manifest.json`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rcr_core::pipeline::LearnOptions;
use rcr_core::refine::SolveError;
use rcr_core::world::init_world;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::formats::{
    plan_rows_json, predictors_from_bundle, read_json, read_text, read_trajectories, write_json, write_text,
    write_trajectories, ConfigJson, PairJson, SuiteJson,
};
use crate::model_io::{load_model, model_paths, save_model};
use crate::stages;

#[derive(Debug, Parser)]
#[command(name = "rcr", version, about = "Learn planning models from planar pick-and-place demonstrations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Seed; overrides the seed in a world config.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// World config -> demonstrations (JSON Lines).
    GenDemos {
        #[arg(long)]
        config: PathBuf,
        /// Number of episodes.
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Demonstrations -> predictors, vocabulary and PDDL domain.
    Learn {
        #[arg(long)]
        demos: PathBuf,
        /// Visit-fraction threshold for critical regions.
        #[arg(long)]
        theta: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// PDDL domain and problem -> top-k plans.
    Plan {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Task config and model -> refined plan.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Directory written by `learn`.
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Task suite and model -> metrics.
    Eval {
        /// Suite file: `{"tasks": [world config, ...]}`.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Predictor bundle -> SVG region plots.
    Viz {
        #[arg(long)]
        predictors: PathBuf,
        /// Samples drawn per predictor.
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[command(flatten)]
        common: Common,
    },
}

/// Adds this stage's record to `<out>/manifest.json`.
fn record(out: &Path, stage: &str, inputs: Value, seed: Option<u64>, artifacts: &[(&str, PathBuf)]) -> Result<()> {
    let path = out.join("manifest.json");
    let mut manifest: Map<String, Value> = match read_json::<Value>(&path) {
        Ok(Value::Object(m)) => m,
        _ => Map::new(),
    };
    manifest
        .insert("run_id".into(), json!(out.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()));
    let files: Map<String, Value> =
        artifacts.iter().map(|(k, p)| (k.to_string(), json!(p.to_string_lossy()))).collect();
    let stages = manifest.entry("stages").or_insert_with(|| json!({}));
    if let Value::Object(s) = stages {
        s.insert(stage.into(), json!({ "inputs": inputs, "seed": seed, "artifacts": files }));
    }
    write_json(&path, &Value::Object(manifest))
}

fn config_from(path: &Path) -> Result<ConfigJson> {
    read_json(path)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenDemos { config, n, common } => {
            if n == 0 {
                return Err(Error::Invalid("--n must be at least 1".into()));
            }
            let cj = config_from(&config)?;
            let (world, script) = (cj.world(common.seed)?, cj.script()?);
            let demos = stages::gen_demos(&world, &script, n);
            let path = common.out.join("demos.jsonl");
            write_trajectories(&path, &demos)?;
            record(&common.out, "gen-demos", json!({ "config": config }), Some(world.seed), &[("demos", path)])
        }
        Command::Learn { demos, theta, common } => {
            let trajs = read_trajectories(&demos)?;
            let mut opts = LearnOptions::default();
            if let Some(t) = theta {
                opts.criticality.theta = t;
            }
            if let Some(s) = common.seed {
                opts.criticality.seed = s;
            }
            opts.criticality.validate().map_err(|e| Error::Invalid(e.to_string()))?;
            let m = stages::learn(&trajs, &opts)?;
            save_model(&common.out, &m)?;
            let [p, v, d] = model_paths(&common.out);
            record(
                &common.out,
                "learn",
                json!({ "demos": demos }),
                Some(opts.criticality.seed),
                &[("predictors", p), ("vocab", v), ("domain", d)],
            )
        }
        Command::Plan { domain, problem, k, common } => {
            if k == 0 {
                return Err(Error::Invalid("--k must be at least 1".into()));
            }
            let plans = stages::plan_pddl(&read_text(&domain)?, &read_text(&problem)?, k)?;
            if plans.is_empty() {
                return Err(Error::Stage("no plan found".into()));
            }
            let rows: Vec<_> = plans.iter().map(|p| plan_rows_json(p)).collect();
            let path = common.out.join("plans.json");
            write_json(&path, &rows)?;
            record(&common.out, "plan", json!({ "domain": domain, "problem": problem }), None, &[("plans", path)])
        }
        Command::Solve { config, model, k, common } => {
            let world = config_from(&config)?.world(common.seed)?;
            let m = load_model(&model)?;
            let task = init_world(&world).map_err(|e| Error::Invalid(e.to_string()))?;
            let budget = stages::budget_with_plans(k);
            match stages::solve(&task, &world, &m, &budget, world.seed) {
                Ok(p) => {
                    let traj = rcr_core::model::Trajectory {
                        task_id: task.id.clone(),
                        success: true,
                        objects: task.objects.clone(),
                        states: p.states.clone(),
                    };
                    let (tp, pp) = (common.out.join("refined.jsonl"), common.out.join("plan.json"));
                    write_trajectories(&tp, &[traj])?;
                    write_json(&pp, &plan_rows_json(&p.rows))?;
                    record(
                        &common.out,
                        "solve",
                        json!({ "config": config, "model": model }),
                        Some(world.seed),
                        &[("trajectory", tp), ("plan", pp)],
                    )
                }
                Err(SolveError::Exhausted { attempts, samples, budget_exhausted }) => {
                    let report = common.out.join("failure.json");
                    let rows: Vec<Value> = attempts
                        .iter()
                        .map(|a| json!({ "level": a.level, "plan": a.plan_index, "failed_step": a.failed_step, "reason": a.reason }))
                        .collect();
                    write_json(
                        &report,
                        &json!({ "attempts": rows, "samples": samples, "budget_exhausted": budget_exhausted }),
                    )?;
                    Err(Error::Stage(format!("no refinable plan after {} plan attempts", attempts.len())))
                }
                Err(SolveError::Model(e)) => Err(Error::Invalid(e.to_string())),
                Err(e) => Err(Error::Stage(e.to_string())),
            }
        }
        Command::Eval { config, model, k, common } => {
            let suite: SuiteJson = read_json(&config)?;
            let m = load_model(&model)?;
            let seed = common.seed.unwrap_or(0);
            let (metrics, reports) = stages::eval(&suite, &m, &stages::budget_with_plans(k), seed)?;
            let (mp, tp) = (common.out.join("metrics.json"), common.out.join("tasks.json"));
            write_json(&mp, &metrics)?;
            write_json(&tp, &reports)?;
            record(
                &common.out,
                "eval",
                json!({ "suite": config, "model": model }),
                Some(seed),
                &[("metrics", mp), ("tasks", tp)],
            )
        }
        Command::Viz { predictors, samples, common } => {
            let bundle: Vec<PairJson> = read_json(&predictors)?;
            let ps = predictors_from_bundle(&bundle).map_err(|e| Error::format(&predictors, e))?;
            let seed = common.seed.unwrap_or(0);
            let path = common.out.join("regions.svg");
            write_text(&path, &crate::viz::render(&ps, samples, seed))?;
            record(&common.out, "viz", json!({ "predictors": predictors }), Some(seed), &[("svg", path)])
        }
    }
}

/// Parses arguments, runs, and returns the exit code. Errors go to stderr as
/// one JSON object.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let err = Error::Invalid(e.render().to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return err.exit_code();
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}
