//! Deep deterministic policy gradient on the mountain-car task.
//!
//! After every environment step the agent performs `K` training iterations,
//! each on a fresh minibatch of `N` transitions:
//!
//! 1. critic: one gradient step (plain SGD unless configured otherwise) on
//!    `L = 1/N Σ δ_i²`, with
//!    `δ_i = r_i + γ·(1 − terminal_i)·Q′(s′_i, π′(s′_i)) − Q(s_i, a_i)`;
//! 2. actor: ascent along the minibatch mean of `∇_a Q(s, a)|_{a=π(s)} · ∇_w π(s)`;
//! 3. both target networks track their sources with rate `τ`.

mod noise;

pub use noise::{OuNoise, DEFAULT_OU_SIGMA, DEFAULT_OU_THETA};

use crate::bench::curve::{EpisodeRecord, LearningCurve};
use crate::env::{CarState, EnvConfig, MountainCar, ObservationMap};
use crate::error::{Error, Result};
use crate::nn::optim::{Optimizer, OptimizerKind};
use crate::nn::{Activation, AuxInput, ForwardTrace, GradientSet, Mlp};
use crate::replay::{ReplayBuffer, Transition};
use crate::scalar::Scalar;
use crate::sub_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct DdpgConfig<T> {
    pub actor_hidden: (usize, usize),
    pub critic_hidden: (usize, usize),
    pub gamma: T,
    pub tau: T,
    pub actor_lr: T,
    pub critic_lr: T,
    /// Minibatch size `N`.
    pub minibatch: usize,
    /// Minibatches per training step `K`.
    pub minibatches_per_step: usize,
    /// Replay capacity `M`.
    pub replay_capacity: usize,
    /// Protected replay prefix `F`.
    pub replay_protected: usize,
    pub ou_theta: T,
    pub ou_sigma: T,
    pub optimizer: OptimizerKind,
}

impl<T: Scalar> Default for DdpgConfig<T> {
    fn default() -> Self {
        DdpgConfig {
            actor_hidden: (5, 5),
            critic_hidden: (20, 10),
            gamma: T::lit(0.99),
            tau: T::lit(0.001),
            actor_lr: T::lit(0.01),
            critic_lr: T::lit(0.005),
            minibatch: 64,
            minibatches_per_step: 1,
            replay_capacity: 100_000,
            replay_protected: 20_000,
            ou_theta: T::lit(DEFAULT_OU_THETA),
            ou_sigma: T::lit(DEFAULT_OU_SIGMA),
            optimizer: OptimizerKind::default(),
        }
    }
}

impl<T: Scalar> DdpgConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: T| x > T::zero() && x < T::one();
        if !unit(self.gamma) {
            return Err(Error::Config(format!("ddpg.gamma must lie in (0,1), got {}", self.gamma)));
        }
        if !(self.tau > T::zero() && self.tau <= T::one()) {
            return Err(Error::Config(format!("ddpg.tau must lie in (0,1], got {}", self.tau)));
        }
        if !(self.actor_lr > T::zero() && self.critic_lr > T::zero()) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if self.minibatch == 0 || self.minibatches_per_step == 0 {
            return Err(Error::Config("ddpg.N and ddpg.K must be positive".into()));
        }
        if self.replay_protected >= self.replay_capacity {
            return Err(Error::Config(format!(
                "ddpg.F={} must be below ddpg.M={}",
                self.replay_protected, self.replay_capacity
            )));
        }
        if self.actor_hidden.0 == 0 || self.actor_hidden.1 == 0 || self.critic_hidden.0 == 0 || self.critic_hidden.1 == 0 {
            return Err(Error::Config("hidden layer sizes must be positive".into()));
        }
        Ok(())
    }

    pub fn actor_layers(&self) -> [usize; 4] {
        [2, self.actor_hidden.0, self.actor_hidden.1, 1]
    }

    pub fn new_replay_buffer(&self, seed: u64) -> Result<ReplayBuffer<T>> {
        ReplayBuffer::new(self.replay_capacity, self.replay_protected, seed)
    }
}

pub const ACTOR_ACTIVATIONS: [Activation; 3] = [Activation::Relu, Activation::Tanh, Activation::Tanh];
pub const CRITIC_ACTIVATIONS: [Activation; 3] = [Activation::Relu, Activation::Tanh, Activation::Linear];
/// The action joins the critic right after its first hidden layer.
pub const CRITIC_ACTION_INPUT: AuxInput = AuxInput { layer: 2, width: 1 };

pub fn actor_network<T: Scalar>(hidden: (usize, usize), seed: u64) -> Result<Mlp<T>> {
    Mlp::new(&[2, hidden.0, hidden.1, 1], &ACTOR_ACTIVATIONS, None, seed)
}

pub fn critic_network<T: Scalar>(hidden: (usize, usize), seed: u64) -> Result<Mlp<T>> {
    Mlp::new(
        &[2, hidden.0, hidden.1, 1],
        &CRITIC_ACTIVATIONS,
        Some(CRITIC_ACTION_INPUT),
        seed,
    )
}

/// `target ← (1 − τ)·target + τ·source`, elementwise.
pub fn soft_update<T: Scalar>(target: &mut Mlp<T>, source: &Mlp<T>, tau: T) -> Result<()> {
    if !target.same_shape(source) {
        return Err(Error::Architecture("soft update between differently shaped networks".into()));
    }
    let keep = T::one() - tau;
    for (t, &s) in target.params_mut().iter_mut().zip(source.params()) {
        *t = keep * *t + tau * s;
    }
    Ok(())
}

/// Statistics of one call to [`DdpgAgent::train_step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainStats<T> {
    pub skipped: bool,
    /// Critic loss before the update, averaged over the minibatches.
    pub critic_loss: T,
    /// Mean `Q(s, a)` over the sampled transitions.
    pub mean_q: T,
}

#[derive(Debug, Clone)]
struct Scratch<T> {
    indices: Vec<usize>,
    targets: Vec<T>,
    actor_trace: ForwardTrace<T>,
    critic_trace: ForwardTrace<T>,
    target_actor_trace: ForwardTrace<T>,
    target_critic_trace: ForwardTrace<T>,
    actor_grads: GradientSet<T>,
    critic_grads: GradientSet<T>,
}

#[derive(Debug, Clone)]
pub struct DdpgAgent<T> {
    pub actor: Mlp<T>,
    pub critic: Mlp<T>,
    pub target_actor: Mlp<T>,
    pub target_critic: Mlp<T>,
    config: DdpgConfig<T>,
    observation: ObservationMap<T>,
    actor_optimizer: Optimizer<T>,
    critic_optimizer: Optimizer<T>,
    scratch: Scratch<T>,
}

impl<T: Scalar> DdpgAgent<T> {
    pub fn new(config: DdpgConfig<T>, seed: u64) -> Result<Self> {
        config.validate()?;
        let actor = actor_network(config.actor_hidden, sub_seed(seed, 1))?;
        let critic = critic_network(config.critic_hidden, sub_seed(seed, 2))?;
        Self::from_networks(actor, critic, config)
    }

    /// Agent around given networks; targets start as exact copies.
    pub fn from_networks(actor: Mlp<T>, critic: Mlp<T>, config: DdpgConfig<T>) -> Result<Self> {
        config.validate()?;
        if actor.output_dim() != 1 || actor.input_dim() != 2 || actor.aux_input().is_some() {
            return Err(Error::Architecture("actor must map 2 state inputs to 1 action".into()));
        }
        match critic.aux_input() {
            Some(a) if a.width == 1 && critic.input_dim() == 2 && critic.output_dim() == 1 => {}
            _ => {
                return Err(Error::Architecture(
                    "critic must take 2 state inputs plus a 1-wide action input and output 1 value".into(),
                ))
            }
        }
        let scratch = Scratch {
            indices: Vec::with_capacity(config.minibatch),
            targets: Vec::with_capacity(config.minibatch),
            actor_trace: actor.trace(),
            critic_trace: critic.trace(),
            target_actor_trace: actor.trace(),
            target_critic_trace: critic.trace(),
            actor_grads: actor.zero_gradients(),
            critic_grads: critic.zero_gradients(),
        };
        Ok(DdpgAgent {
            actor_optimizer: Optimizer::new(config.optimizer, config.actor_lr, &actor)?,
            critic_optimizer: Optimizer::new(config.optimizer, config.critic_lr, &critic)?,
            observation: ObservationMap::identity(),
            target_actor: actor.clone(),
            target_critic: critic.clone(),
            actor,
            critic,
            config,
            scratch,
        })
    }

    pub fn config(&self) -> &DdpgConfig<T> {
        &self.config
    }

    /// State-to-input map used by every network evaluation.
    pub fn observation(&self) -> ObservationMap<T> {
        self.observation
    }

    pub fn set_observation(&mut self, observation: ObservationMap<T>) {
        self.observation = observation;
    }

    pub fn new_noise(&self, seed: u64) -> OuNoise<T> {
        OuNoise::new(self.config.ou_theta, self.config.ou_sigma, seed)
    }

    /// Deterministic actor output `π(s)`.
    pub fn policy(&self, state: &CarState<T>) -> T {
        let (out, _) = self
            .actor
            .forward(&self.observation.observe(state), None)
            .expect("actor has two inputs");
        out[0]
    }

    pub fn select_action(&mut self, state: &CarState<T>, noise: &mut OuNoise<T>, explore: bool) -> T {
        self.actor
            .forward_into(&self.observation.observe(state), None, &mut self.scratch.actor_trace)
            .expect("actor has two inputs");
        let mut a = self.scratch.actor_trace.output()[0];
        if explore {
            a += noise.sample();
        }
        a.max(-T::one()).min(T::one())
    }

    pub fn q_value(&self, state: &CarState<T>, action: T) -> T {
        let (out, _) = self
            .critic
            .forward(&self.observation.observe(state), Some(&[action]))
            .expect("critic shape checked at construction");
        out[0]
    }

    /// `y = r + γ·(1 − terminal)·Q′(s′, π′(s′))`.
    pub fn td_target(&self, transition: &Transition<T>) -> T {
        if transition.terminal {
            return transition.reward;
        }
        let s = self.observation.observe(&transition.next_state);
        let (a, _) = self.target_actor.forward(&s, None).expect("actor shape");
        let (q, _) = self.target_critic.forward(&s, Some(&a)).expect("critic shape");
        transition.reward + self.config.gamma * q[0]
    }

    /// `td_target − Q(s, a)`.
    pub fn td_error(&self, transition: &Transition<T>) -> T {
        self.td_target(transition) - self.q_value(&transition.state, transition.action)
    }

    /// Mean squared TD error over a set of transitions.
    pub fn critic_loss(&self, batch: &[Transition<T>]) -> T {
        let n = T::lit(batch.len() as f64);
        batch.iter().map(|t| self.td_error(t).powi(2)).sum::<T>() / n
    }

    pub fn train_step(&mut self, buffer: &mut ReplayBuffer<T>) -> Result<TrainStats<T>> {
        if buffer.len() < self.config.minibatch {
            return Ok(TrainStats {
                skipped: true,
                critic_loss: T::zero(),
                mean_q: T::zero(),
            });
        }
        let mut loss = T::zero();
        let mut q_sum = T::zero();
        for _ in 0..self.config.minibatches_per_step {
            let mut idx = std::mem::take(&mut self.scratch.indices);
            buffer.sample_indices(self.config.minibatch, &mut idx)?;
            let batch = idx.iter().map(|&i| buffer.get(i).expect("sampled index in range"));
            let (l, q) = self.train_minibatch(batch)?;
            loss += l;
            q_sum += q;
            self.scratch.indices = idx;
        }
        let k = T::lit(self.config.minibatches_per_step as f64);
        Ok(TrainStats {
            skipped: false,
            critic_loss: loss / k,
            mean_q: q_sum / k,
        })
    }

    /// One critic update, one actor update and one target update on the given
    /// minibatch. Returns the pre-update loss and mean Q.
    pub fn train_minibatch<'a, I>(&mut self, batch: I) -> Result<(T, T)>
    where
        I: Iterator<Item = &'a Transition<T>> + Clone,
    {
        let sc = &mut self.scratch;
        let obs = self.observation;
        let gamma = self.config.gamma;

        sc.targets.clear();
        for t in batch.clone() {
            let y = if t.terminal {
                t.reward
            } else {
                let s = obs.observe(&t.next_state);
                self.target_actor.forward_into(&s, None, &mut sc.target_actor_trace)?;
                let a = sc.target_actor_trace.output()[0];
                self.target_critic
                    .forward_into(&s, Some(&[a]), &mut sc.target_critic_trace)?;
                t.reward + gamma * sc.target_critic_trace.output()[0]
            };
            sc.targets.push(y);
        }
        let n = T::lit(sc.targets.len() as f64);

        // critic: dL/dQ_i = -2 δ_i / N
        sc.critic_grads.fill_zero();
        let mut loss = T::zero();
        let mut q_sum = T::zero();
        for (t, &y) in batch.clone().zip(sc.targets.iter()) {
            self.critic
                .forward_into(&obs.observe(&t.state), Some(&[t.action]), &mut sc.critic_trace)?;
            let q = sc.critic_trace.output()[0];
            let delta = y - q;
            loss += delta * delta;
            q_sum += q;
            let g = -T::lit(2.0) * delta / n;
            self.critic
                .backward_accumulate(&sc.critic_trace, &[g], T::one(), &mut sc.critic_grads)?;
        }
        self.critic_optimizer.step(&mut self.critic, &sc.critic_grads)?;

        // actor: ascend mean_i ∂Q/∂a · ∂π/∂w, i.e. descend its negation
        sc.actor_grads.fill_zero();
        let mut dq_da = [T::zero()];
        let ascent = -T::one() / n;
        for t in batch {
            let s = obs.observe(&t.state);
            self.actor.forward_into(&s, None, &mut sc.actor_trace)?;
            let a = sc.actor_trace.output()[0];
            self.critic.forward_into(&s, Some(&[a]), &mut sc.critic_trace)?;
            self.critic.aux_gradient(&sc.critic_trace, &[T::one()], &mut dq_da)?;
            self.actor
                .backward_accumulate(&sc.actor_trace, &dq_da, ascent, &mut sc.actor_grads)?;
        }
        self.actor_optimizer.step(&mut self.actor, &sc.actor_grads)?;

        soft_update(&mut self.target_critic, &self.critic, self.config.tau)?;
        soft_update(&mut self.target_actor, &self.actor, self.config.tau)?;
        Ok((loss / n, q_sum / n))
    }
}

/// Trains `agent` online until `max_interactions` environment steps have been
/// taken. Only completed episodes are recorded.
pub fn run_training<T: Scalar>(
    agent: &mut DdpgAgent<T>,
    env_config: &EnvConfig<T>,
    buffer: &mut ReplayBuffer<T>,
    max_interactions: u64,
    seed: u64,
) -> Result<LearningCurve> {
    run_training_until(agent, env_config, buffer, max_interactions, seed, |_| false)
}

/// Like [`run_training`], but also stops after the first completed episode
/// for which `stop` returns true. The curve is a prefix of the full run's.
pub fn run_training_until<T: Scalar>(
    agent: &mut DdpgAgent<T>,
    env_config: &EnvConfig<T>,
    buffer: &mut ReplayBuffer<T>,
    max_interactions: u64,
    seed: u64,
    mut stop: impl FnMut(&EpisodeRecord) -> bool,
) -> Result<LearningCurve> {
    if max_interactions == 0 {
        return Err(Error::Config("interaction budget must be positive".into()));
    }
    let mut env = MountainCar::new(*env_config)?;
    agent.set_observation(env_config.observation_map());
    let mut noise = agent.new_noise(sub_seed(seed, 3));
    let mut curve = LearningCurve::new("ddpg", seed);

    while env.interactions() < max_interactions {
        let mut state = env.reset();
        noise.reset();
        let mut episode_return = T::zero();
        loop {
            let action = agent.select_action(&state, &mut noise, true);
            let out = env.step(action)?;
            episode_return += out.reward;
            buffer.push(Transition {
                state,
                action,
                reward: out.reward,
                next_state: out.next_state,
                // time limits are not absorbing: only the goal masks the bootstrap
                terminal: crate::env::is_goal(&out.next_state, env_config),
            });
            agent.train_step(buffer)?;
            state = out.next_state;
            if out.terminal {
                let record = EpisodeRecord {
                    interactions: env.interactions(),
                    length: out.step_index,
                    episode_return: episode_return.as_f64(),
                };
                curve.push(record);
                if stop(&record) {
                    return Ok(curve);
                }
                break;
            }
            if env.interactions() >= max_interactions {
                break;
            }
        }
    }
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation::*;

    fn transition(reward: f64, terminal: bool) -> Transition<f64> {
        Transition {
            state: CarState::new(-0.5, 0.0),
            action: 0.2,
            reward,
            next_state: CarState::new(-0.49, 0.01),
            terminal,
        }
    }

    #[test]
    fn default_config_matches_table_values() {
        let c = DdpgConfig::<f64>::default();
        assert_eq!(c.replay_capacity, 100_000);
        assert_eq!(c.replay_protected, 20_000);
        assert_eq!(c.tau, 0.001);
        assert_eq!(c.minibatch, 64);
        assert_eq!(c.actor_hidden, (5, 5));
        assert_eq!(c.critic_lr, 0.005);
        assert_eq!(c.actor_lr, 0.01);
        assert_eq!(c.gamma, 0.99);
        let agent = DdpgAgent::<f64>::new(c, 0).unwrap();
        assert_eq!(agent.actor.param_count(), 51);
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            DdpgConfig { gamma: 1.0, ..Default::default() },
            DdpgConfig { tau: 0.0, ..Default::default() },
            DdpgConfig { minibatch: 0, ..Default::default() },
            DdpgConfig { replay_protected: 100_000, ..Default::default() },
            DdpgConfig::<f64> { actor_lr: -1.0, ..Default::default() },
        ];
        for c in bad {
            assert!(DdpgAgent::new(c, 0).is_err());
        }
    }

    #[test]
    fn soft_update_cases() {
        let src: Mlp<f64> = actor_network((5, 5), 1).unwrap();
        let mut t: Mlp<f64> = actor_network((5, 5), 2).unwrap();
        let before = t.clone();
        soft_update(&mut t, &src, 0.0).unwrap();
        assert_eq!(t, before);
        soft_update(&mut t, &src, 1.0).unwrap();
        assert_eq!(t, src);

        let mut a = Mlp::<f64>::zeros(&[1, 1], &[Linear], None).unwrap();
        let mut b = a.clone();
        b.unflatten(&[1.0, 1.0]).unwrap();
        soft_update(&mut a, &b, 0.001).unwrap();
        assert_eq!(a.params()[0], 0.001);

        let other: Mlp<f64> = actor_network((20, 10), 1).unwrap();
        assert!(soft_update(&mut t, &other, 0.5).is_err());
    }

    #[test]
    fn zeroed_final_layer_acts_zero() {
        let mut agent = DdpgAgent::<f64>::new(DdpgConfig::default(), 4).unwrap();
        let last = agent.actor.num_affine() - 1;
        agent.actor.weights_mut(last).fill(0.0);
        agent.actor.biases_mut(last).fill(0.0);
        let mut noise = agent.new_noise(0);
        let s = CarState::new(-0.3, 0.02);
        assert_eq!(agent.select_action(&s, &mut noise, false), 0.0);
        assert_eq!(noise.state(), 0.0);
    }

    #[test]
    fn exploration_adds_reproducible_noise() {
        let mut agent = DdpgAgent::<f64>::new(DdpgConfig::default(), 4).unwrap();
        let s = CarState::new(-0.3, 0.02);
        let base = agent.policy(&s);
        let mut noise = agent.new_noise(12);
        let mut replay = OuNoise::<f64>::new(0.15, 0.2, 12);
        for _ in 0..50 {
            let a = agent.select_action(&s, &mut noise, true);
            assert_eq!(a, (base + replay.sample()).clamp(-1.0, 1.0));
        }
        let mut n2 = agent.new_noise(0);
        assert_eq!(agent.select_action(&s, &mut n2, false), agent.select_action(&s, &mut n2, false));
    }

    #[test]
    fn td_targets() {
        let agent = DdpgAgent::<f64>::new(DdpgConfig::default(), 4).unwrap();
        assert_eq!(agent.td_target(&transition(99.9, true)), 99.9);

        // zero target critic except output bias = 2 makes Q' = 2 everywhere
        let mut agent = agent;
        agent.target_critic.params_mut().fill(0.0);
        let last = agent.target_critic.num_affine() - 1;
        agent.target_critic.biases_mut(last)[0] = 2.0;
        assert!((agent.td_target(&transition(0.0, false)) - 1.98).abs() < 1e-15);
        agent.target_critic.params_mut().fill(0.0);
        assert_eq!(agent.td_target(&transition(-0.1, false)), -0.1);
    }

    #[test]
    fn td_error_matches_definition() {
        let agent = DdpgAgent::<f64>::new(DdpgConfig::default(), 5).unwrap();
        let t = transition(-0.004, false);
        let a_next = agent.target_actor.forward(&t.next_state.to_array(), None).unwrap().0[0];
        let q_next = agent
            .target_critic
            .forward(&t.next_state.to_array(), Some(&[a_next]))
            .unwrap()
            .0[0];
        let q = agent.critic.forward(&t.state.to_array(), Some(&[t.action])).unwrap().0[0];
        assert_eq!(agent.td_error(&t), t.reward + 0.99 * q_next - q);
    }

    #[test]
    fn zero_critic_on_zero_terminal_rewards_is_stationary() {
        let mut agent = DdpgAgent::<f64>::new(DdpgConfig { minibatch: 4, ..Default::default() }, 5).unwrap();
        agent.critic.params_mut().fill(0.0);
        agent.target_critic.params_mut().fill(0.0);
        let before = agent.critic.clone();
        let batch = vec![transition(0.0, true); 4];
        let (loss, q) = agent.train_minibatch(batch.iter()).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(q, 0.0);
        assert_eq!(agent.critic, before);
    }

    #[test]
    fn train_step_skips_until_minibatch_available() {
        let mut agent = DdpgAgent::<f64>::new(DdpgConfig { minibatch: 3, ..Default::default() }, 5).unwrap();
        let mut buf = ReplayBuffer::new(10, 1, 0).unwrap();
        buf.push(transition(0.0, false));
        let before = agent.actor.clone();
        assert!(agent.train_step(&mut buf).unwrap().skipped);
        assert_eq!(agent.actor, before);
        buf.push(transition(0.0, false));
        buf.push(transition(1.0, true));
        let stats = agent.train_step(&mut buf).unwrap();
        assert!(!stats.skipped);
        assert_ne!(agent.actor, before);
    }

    #[test]
    fn run_training_budget_of_one_episode() {
        // an actor stuck at zero output with no exploration never reaches the goal
        let config = DdpgConfig { ou_sigma: 0.0, minibatch: 2000, ..Default::default() };
        let mut actor: Mlp<f64> = actor_network((5, 5), 0).unwrap();
        actor.params_mut().fill(0.0);
        let critic: Mlp<f64> = critic_network((20, 10), 0).unwrap();
        let mut agent = DdpgAgent::from_networks(actor, critic, config.clone()).unwrap();
        let mut buf = config.new_replay_buffer(0).unwrap();
        let curve = run_training(&mut agent, &EnvConfig::default(), &mut buf, 999, 0).unwrap();
        assert_eq!(curve.len(), 1);
        assert_eq!(curve.episodes[0].length, 999);
        assert_eq!(curve.episodes[0].interactions, 999);
        assert_eq!(curve.episodes[0].episode_return, 0.0);
        assert_eq!(buf.len(), 999);
    }
}
