//! Running configured experiments across seeds.

use std::path::{Path, PathBuf};

use super::aggregate::{aggregate, Metric};
use super::config::{Algorithm, ExperimentConfig};
use super::curve::LearningCurve;
use crate::cmaes::optimize_actor;
use crate::ddpg::{actor_network, run_training};
use crate::error::{Error, Result};
use crate::nn::checkpoint;
use crate::{sub_seed, DdpgAgent, Mlp};

/// Grid spacing used for aggregate CSVs.
pub const DEFAULT_GRID_STEP: u64 = 1000;

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub curve: LearningCurve,
    /// Final DDPG actor, or the best CMA-ES candidate.
    pub actor: Mlp,
}

/// One full run of `config.algorithm` for `seed`.
pub fn run_seed(config: &ExperimentConfig, seed: u64) -> Result<SeedRun> {
    match config.algorithm {
        Algorithm::Ddpg => {
            let ddpg = config.ddpg_config();
            let mut agent = DdpgAgent::new(ddpg.clone(), seed)?;
            let mut buffer = ddpg.new_replay_buffer(sub_seed(seed, 9))?;
            let curve = run_training(&mut agent, &config.env, &mut buffer, config.budget, seed)?;
            Ok(SeedRun { curve, actor: agent.actor })
        }
        Algorithm::Cmaes => {
            let template = actor_network(config.actor_hidden, sub_seed(seed, 1))?;
            let out = optimize_actor(&config.env, &template, config.budget, seed, &config.cmaes)?;
            Ok(SeedRun { curve: out.curve, actor: out.best_actor })
        }
    }
}

pub fn curve_path(dir: &Path, algorithm: Algorithm, seed: u64) -> PathBuf {
    dir.join(format!("{algorithm}_seed{seed}.csv"))
}

pub fn actor_path(dir: &Path, algorithm: Algorithm, seed: u64) -> PathBuf {
    dir.join(format!("{algorithm}_seed{seed}.actor"))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Runs every seed, writing each curve and actor to `config.output` as soon
/// as it is produced, then writes the return and length aggregates.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<LearningCurve>> {
    config.validate()?;
    let dir = &config.output;
    create_dir(dir)?;
    let settings = dir.join(format!("{}.conf", config.algorithm));
    std::fs::write(&settings, config.to_text()).map_err(|e| Error::io(&settings, e))?;
    let mut curves = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        let run = run_seed(config, seed)?;
        run.curve.write_csv(curve_path(dir, config.algorithm, seed))?;
        checkpoint::save(&run.actor, actor_path(dir, config.algorithm, seed))?;
        curves.push(run.curve);
    }
    write_aggregates(&curves, dir, &config.algorithm.to_string())?;
    Ok(curves)
}

/// Writes `{label}_return.csv` and `{label}_length.csv` into `dir`.
/// Curves without a finished episode are left out.
pub fn write_aggregates(curves: &[LearningCurve], dir: &Path, label: &str) -> Result<()> {
    let finished: Vec<LearningCurve> = curves.iter().filter(|c| !c.is_empty()).cloned().collect();
    if finished.is_empty() {
        return Ok(());
    }
    for (metric, name) in [(Metric::Return, "return"), (Metric::Length, "length")] {
        aggregate(&finished, DEFAULT_GRID_STEP, metric)?.write_csv(dir.join(format!("{label}_{name}.csv")))?;
    }
    Ok(())
}

/// One curve set of a study: a label and the config producing it.
#[derive(Debug, Clone)]
pub struct Variant {
    pub label: String,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone)]
pub struct Study {
    pub name: &'static str,
    pub variants: Vec<Variant>,
}

/// The four comparisons: DDPG against CMA-ES, one against four minibatches
/// per step, and the 51- against the 281-parameter actor for each algorithm.
pub fn paper_studies(base: &ExperimentConfig) -> Vec<Study> {
    let variant = |label: &str, algorithm: Algorithm, hidden: (usize, usize), k: usize| {
        let mut config = base.clone();
        config.algorithm = algorithm;
        config.actor_hidden = hidden;
        config.ddpg.minibatches_per_step = k;
        Variant { label: label.to_string(), config }
    };
    let small = (5, 5);
    let large = (20, 10);
    vec![
        Study {
            name: "ddpg-vs-cmaes",
            variants: vec![
                variant("ddpg", Algorithm::Ddpg, small, 1),
                variant("cmaes", Algorithm::Cmaes, small, 1),
            ],
        },
        Study {
            name: "minibatches",
            variants: vec![
                variant("ddpg_k1", Algorithm::Ddpg, small, 1),
                variant("ddpg_k4", Algorithm::Ddpg, small, 4),
            ],
        },
        Study {
            name: "actor-size-ddpg",
            variants: vec![
                variant("ddpg_51", Algorithm::Ddpg, small, 1),
                variant("ddpg_281", Algorithm::Ddpg, large, 1),
            ],
        },
        Study {
            name: "actor-size-cmaes",
            variants: vec![
                variant("cmaes_51", Algorithm::Cmaes, small, 1),
                variant("cmaes_281", Algorithm::Cmaes, large, 1),
            ],
        },
    ]
}

/// Runs all studies under `base.output`, one directory per study with a
/// `curves/<label>/` directory per variant. Identical variants are run once.
pub fn run_repro(base: &ExperimentConfig, mut progress: impl FnMut(&str)) -> Result<()> {
    base.validate()?;
    let mut done: Vec<(ExperimentConfig, Vec<LearningCurve>)> = Vec::new();
    for study in paper_studies(base) {
        let study_dir = base.output.join(study.name);
        for v in &study.variants {
            let mut config = v.config.clone();
            config.output = study_dir.join("curves").join(&v.label);
            let cached = done.iter().find(|(c, _)| {
                ExperimentConfig { output: config.output.clone(), ..c.clone() } == config
            });
            let curves = match cached {
                Some((first, curves)) => {
                    create_dir(&config.output)?;
                    for c in curves {
                        c.write_csv(curve_path(&config.output, config.algorithm, c.seed))?;
                        let from = actor_path(&first.output, config.algorithm, c.seed);
                        let to = actor_path(&config.output, config.algorithm, c.seed);
                        std::fs::copy(&from, &to).map_err(|e| Error::io(&to, e))?;
                    }
                    curves.clone()
                }
                None => {
                    progress(&format!("{}: {}", study.name, v.label));
                    let curves = run_experiment(&config)?;
                    done.push((config.clone(), curves.clone()));
                    curves
                }
            };
            write_aggregates(&curves, &study_dir, &v.label)?;
        }
    }
    Ok(())
}
