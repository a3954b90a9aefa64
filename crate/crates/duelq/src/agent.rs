//! Double-DQN policy and learning rule: epsilon-greedy selection, the linear
//! epsilon schedule, the decoupled target computation, and one optimization
//! step over a replay mini-batch.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{flatten_observation, Action, Observation};
use crate::neural::{
    DuelingNet, LayerGrads, NeuralError, Optimizer, OptimizerConfig, Tensor, NUM_ACTIONS,
};
use crate::replay::{ReplayBuffer, ReplayError, Transition};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
}

/// Linear decay from `eps_start` to `eps_final` over `decay_steps` steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpsilonSchedule {
    pub eps_start: f64,
    pub eps_final: f64,
    pub decay_steps: u64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self {
            eps_start: 1.0,
            eps_final: 0.1,
            decay_steps: 1_000_000,
        }
    }
}

impl EpsilonSchedule {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.eps_final)
            || !(0.0..=1.0).contains(&self.eps_start)
            || self.eps_final > self.eps_start
        {
            return Err("need 0 <= eps_final <= eps_start <= 1".into());
        }
        if self.decay_steps == 0 {
            return Err("decay_steps must be positive".into());
        }
        Ok(())
    }

    pub fn epsilon_at(&self, step: u64) -> f64 {
        if step >= self.decay_steps {
            return self.eps_final;
        }
        let frac = step as f64 / self.decay_steps as f64;
        (self.eps_start + (self.eps_final - self.eps_start) * frac)
            .clamp(self.eps_final, self.eps_start)
    }
}

/// Epsilon at `step` under the schedule; monotone non-increasing.
pub fn epsilon_at(schedule: &EpsilonSchedule, step: u64) -> f64 {
    schedule.epsilon_at(step)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    /// Discount factor.
    pub gamma: f64,
    pub batch_size: usize,
    /// Hard-copy the online net into the target net every this many steps.
    pub sync_every: u64,
    /// Minimum buffer fill before optimization starts.
    pub replay_start: usize,
    pub replay_capacity: usize,
    pub schedule: EpsilonSchedule,
    pub optimizer: OptimizerConfig,
    /// Use Huber loss (delta = 1) instead of mean squared error.
    pub huber_loss: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            batch_size: 32,
            sync_every: 1000,
            replay_start: 10_000,
            replay_capacity: 100_000,
            schedule: EpsilonSchedule::default(),
            optimizer: OptimizerConfig::default(),
            huber_loss: false,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err("gamma must be in [0, 1]".into());
        }
        if self.batch_size < 1 {
            return Err("batch_size must be >= 1".into());
        }
        if self.sync_every < 1 {
            return Err("sync_every must be >= 1".into());
        }
        if self.replay_capacity < 1 {
            return Err("replay_capacity must be >= 1".into());
        }
        if self.batch_size > self.replay_capacity {
            return Err("batch_size cannot exceed replay_capacity".into());
        }
        if !(self.optimizer.learning_rate > 0.0) {
            return Err("learning_rate must be positive".into());
        }
        self.schedule.validate()
    }
}

fn features_matrix<'a>(
    net: &DuelingNet,
    observations: impl Iterator<Item = &'a Observation>,
    count: usize,
) -> Result<Tensor, NeuralError> {
    let include_volume = net.layout().channels == 4;
    let mut data = Vec::with_capacity(count * net.input_dim());
    for obs in observations {
        data.extend(flatten_observation(obs, include_volume));
    }
    Tensor::new([count, net.input_dim()], data)
}

fn argmax_lowest(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Epsilon-greedy action: with probability `epsilon` a uniformly random
/// action, otherwise the argmax-Q action (ties broken by lowest code).
pub fn select_action(
    net: &DuelingNet,
    obs: &Observation,
    epsilon: f64,
    rng: &mut impl Rng,
) -> Result<Action, AgentError> {
    debug_assert!((0.0..=1.0).contains(&epsilon));
    let u: f64 = rng.gen();
    if u < epsilon {
        return Ok(Action::from_index(rng.gen_range(0..NUM_ACTIONS)).expect("action index"));
    }
    let x = features_matrix(net, std::iter::once(obs), 1)?;
    let (q, _) = net.forward(&x)?;
    Ok(Action::from_index(argmax_lowest(q.row(0))).expect("action index"))
}

/// Double-DQN targets: the online network selects the next action, the
/// target network evaluates it. Terminal transitions contribute the reward
/// alone.
pub fn ddqn_target(
    batch: &[Transition],
    gamma: f64,
    online: &DuelingNet,
    target: &DuelingNet,
) -> Result<Vec<f64>, AgentError> {
    if !online.same_architecture(target) {
        return Err(AgentError::Neural(NeuralError::ArchitectureMismatch(
            "online and target networks differ".into(),
        )));
    }
    let next = features_matrix(online, batch.iter().map(|t| &t.next_state), batch.len())?;
    let (q_online, _) = online.forward(&next)?;
    let (q_target, _) = target.forward(&next)?;
    Ok(batch
        .iter()
        .enumerate()
        .map(|(i, t)| {
            if t.done {
                t.reward
            } else {
                let a_star = argmax_lowest(q_online.row(i));
                t.reward + gamma * q_target.row(i)[a_star]
            }
        })
        .collect())
}

/// TD loss over a batch at fixed targets `y`, with the exact gradient with
/// respect to the online parameters. No gradient flows through `y`.
pub fn td_loss_grads(
    online: &DuelingNet,
    states: &Tensor,
    actions: &[Action],
    y: &[f64],
    huber: bool,
) -> Result<(f64, LayerGrads), AgentError> {
    let n = actions.len();
    let (q, cache) = online.forward(states)?;
    let mut loss = 0.0;
    let mut dl = Tensor::zeros([n, NUM_ACTIONS]);
    for i in 0..n {
        let a = actions[i].index();
        let diff = q.row(i)[a] - y[i];
        if huber {
            // delta = 1
            if diff.abs() <= 1.0 {
                loss += 0.5 * diff * diff;
            } else {
                loss += diff.abs() - 0.5;
            }
            dl.row_mut(i)[a] = diff.clamp(-1.0, 1.0) / n as f64;
        } else {
            loss += diff * diff;
            dl.row_mut(i)[a] = 2.0 * diff / n as f64;
        }
    }
    loss /= n as f64;
    let grads = online.backward(&cache, &dl)?;
    Ok((loss, grads))
}

/// One optimization step: sample a batch, build DDQN targets, descend the
/// TD loss on the online network. Returns the batch loss.
pub fn train_step(
    online: &mut DuelingNet,
    target: &DuelingNet,
    buffer: &ReplayBuffer,
    config: &AgentConfig,
    optimizer: &mut Optimizer,
    rng: &mut impl Rng,
) -> Result<f64, AgentError> {
    let need = config.batch_size.max(config.replay_start);
    if buffer.len() < need {
        return Err(AgentError::Replay(ReplayError::InsufficientData {
            have: buffer.len(),
            need,
        }));
    }
    let batch = buffer.sample(config.batch_size, rng)?;
    let y = ddqn_target(&batch, config.gamma, online, target)?;
    let states = features_matrix(online, batch.iter().map(|t| &t.state), batch.len())?;
    let actions: Vec<Action> = batch.iter().map(|t| t.action).collect();
    let (loss, grads) = td_loss_grads(online, &states, &actions, &y, config.huber_loss)?;
    optimizer.step(online, &grads)?;
    Ok(loss)
}
