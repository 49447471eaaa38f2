//! Experiment configuration and its `key = value` text form.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::cmaes::ActorSearch;
use crate::error::{Error, Result};
use crate::{DdpgConfig, EnvConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Ddpg,
    Cmaes,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Ddpg => "ddpg",
            Algorithm::Cmaes => "cmaes",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ddpg" => Ok(Algorithm::Ddpg),
            "cmaes" => Ok(Algorithm::Cmaes),
            other => Err(Error::Config(format!("unknown algorithm {other:?}"))),
        }
    }
}

pub const DEFAULT_BUDGET: u64 = 200_000;
pub const DEFAULT_SEED_COUNT: u64 = 10;

/// Everything one experiment needs. The actor shape is shared by both
/// algorithms; `ddpg.actor_hidden` is overwritten from it at run time.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub actor_hidden: (usize, usize),
    pub seeds: Vec<u64>,
    pub budget: u64,
    pub output: PathBuf,
    pub ddpg: DdpgConfig,
    pub cmaes: ActorSearch<f64>,
    pub env: EnvConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            algorithm: Algorithm::Ddpg,
            actor_hidden: (5, 5),
            seeds: (0..DEFAULT_SEED_COUNT).collect(),
            budget: DEFAULT_BUDGET,
            output: PathBuf::from("results"),
            ddpg: DdpgConfig::default(),
            cmaes: ActorSearch::default(),
            env: EnvConfig::default(),
        }
    }
}

/// Every key accepted by [`ExperimentConfig::set`].
pub const KEYS: &[&str] = &[
    "algorithm",
    "seeds",
    "budget",
    "output",
    "gamma",
    "actor.h1",
    "actor.h2",
    "ddpg.K",
    "ddpg.N",
    "ddpg.M",
    "ddpg.F",
    "ddpg.tau",
    "ddpg.alpha_critic",
    "ddpg.alpha_actor",
    "ddpg.critic_h1",
    "ddpg.critic_h2",
    "ddpg.ou_theta",
    "ddpg.ou_sigma",
    "ddpg.optimizer",
    "cmaes.sigma0",
    "cmaes.lambda",
    "cmaes.fitness",
    "env.R",
    "env.rho",
    "env.T",
    "env.delta_min",
    "env.delta_max",
    "env.scale_observations",
];

fn value<T: FromStr>(key: &str, raw: &str) -> Result<T> {
    raw.parse()
        .map_err(|_| Error::Config(format!("bad value {raw:?} for key {key}")))
}

fn parse_seeds(raw: &str) -> Result<Vec<u64>> {
    // either a comma list or a half-open range `a..b`
    if let Some((a, b)) = raw.split_once("..") {
        let a: u64 = value("seeds", a.trim())?;
        let b: u64 = value("seeds", b.trim())?;
        return Ok((a..b).collect());
    }
    raw.split(',').map(|s| value("seeds", s.trim())).collect()
}

impl ExperimentConfig {
    /// Sets one key from its text value.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<()> {
        let raw = raw.trim();
        match key {
            "algorithm" => self.algorithm = raw.parse()?,
            "seeds" => self.seeds = parse_seeds(raw)?,
            "budget" => self.budget = value(key, raw)?,
            "output" => self.output = PathBuf::from(raw),
            "gamma" => {
                let g = value(key, raw)?;
                self.ddpg.gamma = g;
                self.cmaes.gamma = g;
            }
            "actor.h1" => self.actor_hidden.0 = value(key, raw)?,
            "actor.h2" => self.actor_hidden.1 = value(key, raw)?,
            "ddpg.K" => self.ddpg.minibatches_per_step = value(key, raw)?,
            "ddpg.N" => self.ddpg.minibatch = value(key, raw)?,
            "ddpg.M" => self.ddpg.replay_capacity = value(key, raw)?,
            "ddpg.F" => self.ddpg.replay_protected = value(key, raw)?,
            "ddpg.tau" => self.ddpg.tau = value(key, raw)?,
            "ddpg.alpha_critic" => self.ddpg.critic_lr = value(key, raw)?,
            "ddpg.alpha_actor" => self.ddpg.actor_lr = value(key, raw)?,
            "ddpg.critic_h1" => self.ddpg.critic_hidden.0 = value(key, raw)?,
            "ddpg.critic_h2" => self.ddpg.critic_hidden.1 = value(key, raw)?,
            "ddpg.ou_theta" => self.ddpg.ou_theta = value(key, raw)?,
            "ddpg.ou_sigma" => self.ddpg.ou_sigma = value(key, raw)?,
            "ddpg.optimizer" => self.ddpg.optimizer = raw.parse()?,
            "cmaes.sigma0" => self.cmaes.cmaes.sigma0 = value(key, raw)?,
            "cmaes.lambda" => {
                self.cmaes.cmaes.population = if raw == "auto" { None } else { Some(value(key, raw)?) }
            }
            "cmaes.fitness" => self.cmaes.fitness = raw.parse()?,
            "env.R" => self.env.goal_reward = value(key, raw)?,
            "env.rho" => self.env.action_cost = value(key, raw)?,
            "env.T" => self.env.max_steps = value(key, raw)?,
            "env.delta_min" => self.env.action_min = value(key, raw)?,
            "env.delta_max" => self.env.action_max = value(key, raw)?,
            "env.scale_observations" => self.env.scale_observations = value(key, raw)?,
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies a config file: `key = value` lines, `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, raw) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            self.set(key.trim(), raw)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text)
    }

    /// Adds `base` to every seed.
    pub fn offset_seeds(&mut self, base: u64) -> Result<()> {
        for s in &mut self.seeds {
            *s = s
                .checked_add(base)
                .ok_or_else(|| Error::Config(format!("seed {s} + seed base {base} overflows")))?;
        }
        Ok(())
    }

    /// The DDPG settings with the shared actor shape applied.
    pub fn ddpg_config(&self) -> DdpgConfig {
        DdpgConfig { actor_hidden: self.actor_hidden, ..self.ddpg.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("no seeds given".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Config(format!("seed {} listed twice", w[0])));
        }
        if self.budget == 0 {
            return Err(Error::Config("budget must be positive".into()));
        }
        if self.actor_hidden.0 == 0 || self.actor_hidden.1 == 0 {
            return Err(Error::Config("actor hidden sizes must be positive".into()));
        }
        if !(self.cmaes.cmaes.sigma0 > 0.0) {
            return Err(Error::Config("cmaes.sigma0 must be positive".into()));
        }
        if matches!(self.cmaes.cmaes.population, Some(l) if l < 2) {
            return Err(Error::Config("cmaes.lambda must be at least 2".into()));
        }
        self.env.validate()?;
        self.ddpg_config().validate()
    }

    /// Text form that [`ExperimentConfig::apply_text`] reads back.
    pub fn to_text(&self) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let lambda = self.cmaes.cmaes.population.map_or("auto".to_string(), |l| l.to_string());
        let d = &self.ddpg;
        let e = &self.env;
        let lines = [
            ("algorithm", self.algorithm.to_string()),
            ("seeds", seeds.join(",")),
            ("budget", self.budget.to_string()),
            ("output", self.output.display().to_string()),
            ("gamma", format!("{:?}", d.gamma)),
            ("actor.h1", self.actor_hidden.0.to_string()),
            ("actor.h2", self.actor_hidden.1.to_string()),
            ("ddpg.K", d.minibatches_per_step.to_string()),
            ("ddpg.N", d.minibatch.to_string()),
            ("ddpg.M", d.replay_capacity.to_string()),
            ("ddpg.F", d.replay_protected.to_string()),
            ("ddpg.tau", format!("{:?}", d.tau)),
            ("ddpg.alpha_critic", format!("{:?}", d.critic_lr)),
            ("ddpg.alpha_actor", format!("{:?}", d.actor_lr)),
            ("ddpg.critic_h1", d.critic_hidden.0.to_string()),
            ("ddpg.critic_h2", d.critic_hidden.1.to_string()),
            ("ddpg.ou_theta", format!("{:?}", d.ou_theta)),
            ("ddpg.ou_sigma", format!("{:?}", d.ou_sigma)),
            ("ddpg.optimizer", d.optimizer.to_string()),
            ("cmaes.sigma0", format!("{:?}", self.cmaes.cmaes.sigma0)),
            ("cmaes.lambda", lambda),
            ("cmaes.fitness", self.cmaes.fitness.to_string()),
            ("env.R", format!("{:?}", e.goal_reward)),
            ("env.rho", format!("{:?}", e.action_cost)),
            ("env.T", e.max_steps.to_string()),
            ("env.delta_min", format!("{:?}", e.action_min)),
            ("env.delta_max", format!("{:?}", e.action_max)),
            ("env.scale_observations", e.scale_observations.to_string()),
        ];
        lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_one_defaults() {
        let c = ExperimentConfig::default();
        assert_eq!(c.seeds.len(), 10);
        assert_eq!(c.actor_hidden, (5, 5));
        assert_eq!(c.ddpg.replay_capacity, 100_000);
        assert_eq!(c.ddpg.replay_protected, 20_000);
        assert_eq!(c.ddpg.tau, 0.001);
        assert_eq!(c.ddpg.minibatch, 64);
        assert_eq!(c.ddpg.critic_lr, 0.005);
        assert_eq!(c.ddpg.actor_lr, 0.01);
        assert_eq!(c.ddpg.gamma, 0.99);
        assert_eq!(c.cmaes.gamma, 0.99);
        assert_eq!(c.cmaes.cmaes.sigma0, 0.5);
        assert_eq!(c.env.max_steps, 999);
        assert_eq!(c.env.goal_reward, 100.0);
        assert_eq!(c.env.action_cost, 0.1);
        assert_eq!((c.env.action_min, c.env.action_max), (-1.0, 1.0));
        c.validate().unwrap();
    }

    #[test]
    fn parses_file_with_comments() {
        let mut c = ExperimentConfig::default();
        c.apply_text("# study\nalgorithm = cmaes\n\nddpg.tau = 0.01  # faster\nseeds = 3..6\ncmaes.lambda = 12\n")
            .unwrap();
        assert_eq!(c.algorithm, Algorithm::Cmaes);
        assert_eq!(c.ddpg.tau, 0.01);
        assert_eq!(c.seeds, vec![3, 4, 5]);
        assert_eq!(c.cmaes.cmaes.population, Some(12));
    }

    #[test]
    fn unknown_key_is_named() {
        let mut c = ExperimentConfig::default();
        let e = c.apply_text("ddpg.tua = 0.1").unwrap_err().to_string();
        assert!(e.contains("ddpg.tua"), "{e}");
        assert!(c.set("budget", "lots").is_err());
    }

    #[test]
    fn every_key_round_trips() {
        let mut c = ExperimentConfig::default();
        c.set("seeds", "4,9").unwrap();
        c.set("ddpg.optimizer", "sgd").unwrap();
        c.set("cmaes.fitness", "discounted-return").unwrap();
        let text = c.to_text();
        assert_eq!(text.lines().count(), KEYS.len());
        for (line, key) in text.lines().zip(KEYS) {
            assert!(line.starts_with(&format!("{key} = ")));
        }
        let mut d = ExperimentConfig { seeds: vec![0], ..ExperimentConfig::default() };
        d.apply_text(&text).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn seed_checks() {
        let mut c = ExperimentConfig::default();
        c.set("seeds", "1,2,1").unwrap();
        assert!(c.validate().is_err());
        c.set("seeds", "1,2").unwrap();
        c.offset_seeds(100).unwrap();
        assert_eq!(c.seeds, vec![101, 102]);
        assert!(c.offset_seeds(u64::MAX).is_err());
        c.budget = 0;
        assert!(c.validate().is_err());
    }
}
