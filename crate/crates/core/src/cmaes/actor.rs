use std::fmt;
use std::str::FromStr;

use super::{CmaesConfig, CmaesState};
use crate::bench::curve::{EpisodeRecord, LearningCurve};
use crate::env::{is_goal, EnvConfig, MountainCar};
use crate::error::{Error, Result};
use crate::nn::Mlp;
use crate::scalar::Scalar;

/// How an episode is turned into a CMA-ES fitness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FitnessMode {
    /// `γ^{t_goal}·R·[goal reached] − Σ_t ρ·a_t²`: only the terminal reward
    /// is discounted.
    #[default]
    DiscountedTerminal,
    /// `Σ_t γ^t·r_t`, the same discounted return DDPG optimizes.
    DiscountedReturn,
}

impl fmt::Display for FitnessMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FitnessMode::DiscountedTerminal => "discounted-terminal",
            FitnessMode::DiscountedReturn => "discounted-return",
        })
    }
}

impl FromStr for FitnessMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "discounted-terminal" => Ok(FitnessMode::DiscountedTerminal),
            "discounted-return" => Ok(FitnessMode::DiscountedReturn),
            other => Err(Error::Config(format!("unknown fitness mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActorSearch<T> {
    pub cmaes: CmaesConfig<T>,
    pub gamma: T,
    pub fitness: FitnessMode,
}

impl<T: Scalar> Default for ActorSearch<T> {
    fn default() -> Self {
        ActorSearch {
            cmaes: CmaesConfig::default(),
            gamma: T::lit(0.99),
            fitness: FitnessMode::default(),
        }
    }
}

/// Result of one noise-free episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeOutcome<T> {
    pub fitness: T,
    /// Undiscounted sum of rewards.
    pub episode_return: T,
    pub length: usize,
    pub reached_goal: bool,
}

/// Runs one deterministic episode of `actor` on `env` and scores it.
pub fn episode_fitness<T: Scalar>(
    actor: &Mlp<T>,
    env: &mut MountainCar<T>,
    gamma: T,
    mode: FitnessMode,
) -> Result<EpisodeOutcome<T>> {
    let config = *env.config();
    let obs = config.observation_map();
    let mut trace = actor.trace();
    let mut state = env.reset();
    let mut episode_return = T::zero();
    let mut cost = T::zero();
    let mut discounted = T::zero();
    let mut discount = T::one();
    loop {
        actor.forward_into(&obs.observe(&state), None, &mut trace)?;
        let action = config.clamp_action(trace.output()[0]);
        let out = env.step(action)?;
        episode_return += out.reward;
        cost += config.action_cost * action * action;
        discounted += discount * out.reward;
        discount *= gamma;
        state = out.next_state;
        if out.terminal {
            let reached_goal = is_goal(&state, &config);
            let fitness = match mode {
                FitnessMode::DiscountedTerminal => {
                    let terminal = if reached_goal {
                        gamma.powi(out.step_index as i32) * config.goal_reward
                    } else {
                        T::zero()
                    };
                    terminal - cost
                }
                FitnessMode::DiscountedReturn => discounted,
            };
            return Ok(EpisodeOutcome {
                fitness,
                episode_return,
                length: out.step_index,
                reached_goal,
            });
        }
    }
}

#[derive(Debug, Clone)]
pub struct ActorSearchOutcome<T> {
    pub curve: LearningCurve,
    pub best_actor: Mlp<T>,
    pub best_fitness: T,
    pub generations: u64,
}

/// Trains the actor by CMA-ES, one episode per candidate, until the
/// interaction budget is spent. The generation in flight when the budget
/// runs out is completed.
pub fn optimize_actor<T: Scalar>(
    env_config: &EnvConfig<T>,
    actor_template: &Mlp<T>,
    budget_interactions: u64,
    seed: u64,
    search: &ActorSearch<T>,
) -> Result<ActorSearchOutcome<T>> {
    if budget_interactions == 0 {
        return Err(Error::Config("interaction budget must be positive".into()));
    }
    let mut env = MountainCar::new(*env_config)?;
    let mut es = CmaesState::new(actor_template.params(), search.cmaes, seed)?;
    let mut actor = actor_template.clone();
    let mut curve = LearningCurve::new("cmaes", seed);
    let mut best_actor = actor_template.clone();
    let mut best_fitness = T::neg_infinity();

    while env.interactions() < budget_interactions {
        let mut pop = es.ask()?;
        for c in &mut pop {
            actor.unflatten(&c.params)?;
            let out = episode_fitness(&actor, &mut env, search.gamma, search.fitness)?;
            c.fitness = out.fitness;
            curve.push(EpisodeRecord {
                interactions: env.interactions(),
                length: out.length,
                episode_return: out.episode_return.as_f64(),
            });
            if out.fitness > best_fitness {
                best_fitness = out.fitness;
                best_actor.unflatten(&c.params)?;
            }
        }
        es.tell(&pop)?;
    }
    Ok(ActorSearchOutcome {
        curve,
        best_actor,
        best_fitness,
        generations: es.generation(),
    })
}
