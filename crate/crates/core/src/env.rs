//! Deterministic continuous mountain car.
//!
//! The car starts at rest at the valley floor and must reach the goal on the
//! right hill. The reward is `R` on reaching the goal and `-ρ·a²` at every
//! step; there is no penalty on timeout.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarState<T> {
    pub position: T,
    pub velocity: T,
}

impl<T: Scalar> CarState<T> {
    pub fn new(position: T, velocity: T) -> Self {
        CarState { position, velocity }
    }

    /// Raw `(position, velocity)` vector.
    pub fn to_array(self) -> [T; 2] {
        [self.position, self.velocity]
    }
}

/// Affine map from a car state to the network input vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationMap<T> {
    pub offset: [T; 2],
    pub scale: [T; 2],
}

impl<T: Scalar> ObservationMap<T> {
    pub fn identity() -> Self {
        ObservationMap {
            offset: [T::zero(); 2],
            scale: [T::one(); 2],
        }
    }

    /// Maps `[x_min, x_goal]` and `[-v_max, v_max]` onto `[-1, 1]`.
    pub fn unit_box(config: &EnvConfig<T>) -> Self {
        let two = T::lit(2.0);
        let half_width = (config.goal_position - config.min_position) / two;
        ObservationMap {
            offset: [(config.goal_position + config.min_position) / two, T::zero()],
            scale: [T::one() / half_width, T::one() / config.max_speed],
        }
    }

    #[inline]
    pub fn observe(&self, state: &CarState<T>) -> [T; 2] {
        [
            (state.position - self.offset[0]) * self.scale[0],
            (state.velocity - self.offset[1]) * self.scale[1],
        ]
    }
}

impl<T: Scalar> Default for ObservationMap<T> {
    fn default() -> Self {
        Self::identity()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvConfig<T> {
    /// Terminal reward `R`.
    pub goal_reward: T,
    /// Action-cost coefficient `ρ`.
    pub action_cost: T,
    /// Episode step limit `T`.
    pub max_steps: usize,
    pub action_min: T,
    pub action_max: T,
    pub power: T,
    pub gravity: T,
    pub min_position: T,
    pub goal_position: T,
    pub max_speed: T,
    pub start_position: T,
    pub start_velocity: T,
    /// Feed networks `[x_min, x_goal] × [-v_max, v_max]` rescaled to the unit box
    /// instead of raw state values.
    pub scale_observations: bool,
}

impl<T: Scalar> Default for EnvConfig<T> {
    fn default() -> Self {
        EnvConfig {
            goal_reward: T::lit(100.0),
            action_cost: T::lit(0.1),
            max_steps: 999,
            action_min: T::lit(-1.0),
            action_max: T::lit(1.0),
            power: T::lit(0.0015),
            gravity: T::lit(0.0025),
            min_position: T::lit(-1.2),
            goal_position: T::lit(0.45),
            max_speed: T::lit(0.07),
            start_position: T::lit(-0.5),
            start_velocity: T::zero(),
            scale_observations: true,
        }
    }
}

impl<T: Scalar> EnvConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.max_steps == 0 {
            return Err(Error::Config("env.T must be positive".into()));
        }
        if !(self.action_min < self.action_max) {
            return Err(Error::Config("action range is empty".into()));
        }
        if !(self.min_position < self.goal_position) {
            return Err(Error::Config("env.x_min must be below env.x_goal".into()));
        }
        if !(self.max_speed > T::zero()) {
            return Err(Error::Config("env.v_max must be positive".into()));
        }
        if self.start_position < self.min_position || self.start_position >= self.goal_position {
            return Err(Error::Config("start position outside [x_min, x_goal)".into()));
        }
        Ok(())
    }

    pub fn observation_map(&self) -> ObservationMap<T> {
        if self.scale_observations {
            ObservationMap::unit_box(self)
        } else {
            ObservationMap::identity()
        }
    }

    pub fn clamp_action(&self, action: T) -> T {
        action.max(self.action_min).min(self.action_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome<T> {
    pub next_state: CarState<T>,
    pub reward: T,
    pub terminal: bool,
    /// 1-based index of the step just taken within the episode.
    pub step_index: usize,
}

pub fn reset<T: Scalar>(config: &EnvConfig<T>) -> CarState<T> {
    CarState::new(config.start_position, config.start_velocity)
}

pub fn is_goal<T: Scalar>(state: &CarState<T>, config: &EnvConfig<T>) -> bool {
    state.position >= config.goal_position
}

/// One application of the dynamics. Returns the next state, the reward and
/// whether the goal was reached. The action is clamped into range first.
pub fn transition<T: Scalar>(
    state: &CarState<T>,
    action: T,
    config: &EnvConfig<T>,
) -> Result<(CarState<T>, T, bool)> {
    if !action.is_finite() {
        return Err(Error::NonFinite("action"));
    }
    let a = config.clamp_action(action);
    let three = T::lit(3.0);
    let mut velocity = state.velocity + a * config.power - config.gravity * (three * state.position).cos();
    velocity = velocity.max(-config.max_speed).min(config.max_speed);
    let mut position = state.position + velocity;
    position = position.max(config.min_position).min(config.goal_position);
    if position == config.min_position && velocity < T::zero() {
        velocity = T::zero();
    }
    let next = CarState::new(position, velocity);
    let goal = is_goal(&next, config);
    let mut reward = -config.action_cost * a * a;
    if goal {
        reward += config.goal_reward;
    }
    Ok((next, reward, goal))
}

/// Pure step: `step_index` is the number of steps already taken this episode.
pub fn step<T: Scalar>(
    state: &CarState<T>,
    action: T,
    step_index: usize,
    config: &EnvConfig<T>,
) -> Result<StepOutcome<T>> {
    let (next_state, reward, goal) = transition(state, action, config)?;
    let step_index = step_index + 1;
    Ok(StepOutcome {
        next_state,
        reward,
        terminal: goal || step_index >= config.max_steps,
        step_index,
    })
}

/// Episode driver that owns the interaction counter.
///
/// Every algorithm interacts with the task through this wrapper, so
/// [`MountainCar::interactions`] is the single source of truth for sample
/// counts.
#[derive(Debug, Clone)]
pub struct MountainCar<T> {
    config: EnvConfig<T>,
    state: CarState<T>,
    steps: usize,
    done: bool,
    interactions: u64,
}

impl<T: Scalar> MountainCar<T> {
    pub fn new(config: EnvConfig<T>) -> Result<Self> {
        config.validate()?;
        Ok(MountainCar {
            state: reset(&config),
            config,
            steps: 0,
            done: false,
            interactions: 0,
        })
    }

    pub fn config(&self) -> &EnvConfig<T> {
        &self.config
    }

    pub fn reset(&mut self) -> CarState<T> {
        self.state = reset(&self.config);
        self.steps = 0;
        self.done = false;
        self.state
    }

    pub fn state(&self) -> CarState<T> {
        self.state
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn interactions(&self) -> u64 {
        self.interactions
    }

    pub fn step(&mut self, action: T) -> Result<StepOutcome<T>> {
        if self.done {
            return Err(Error::Config("step called on a finished episode; reset first".into()));
        }
        let out = step(&self.state, action, self.steps, &self.config)?;
        self.state = out.next_state;
        self.steps = out.step_index;
        self.done = out.terminal;
        self.interactions += 1;
        Ok(out)
    }
}
