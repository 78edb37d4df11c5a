//! Value decomposition networks.
//!
//! Each agent owns a Q-network over its own observation. The joint
//! action-value is the sum of the agents' chosen-action values, and the
//! team TD error is backpropagated through that sum into every network.
//! Because the joint value is additive, its maximiser is the tuple of
//! per-agent maximisers, so execution stays decentralised.

mod checkpoint;
mod network;
mod replay;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use checkpoint::{AgentParams, Checkpoint, CHECKPOINT_VERSION};
pub use network::QNetwork;
pub use replay::{ReplayBuffer, Transition};

/// Linear ε decay from `start` to `end` over `decay_steps` (defaulting to a
/// fifth of the training run), constant afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_steps: Option<u64>,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        EpsilonSchedule {
            start: 1.0,
            end: 0.05,
            decay_steps: None,
        }
    }
}

impl EpsilonSchedule {
    pub fn value(&self, step: u64, total_steps: u64) -> f64 {
        let decay = self.decay_steps.unwrap_or(total_steps / 5).max(1);
        let frac = (step as f64 / decay as f64).min(1.0);
        self.start + (self.end - self.start) * frac
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub gamma: f64,
    pub epsilon: EpsilonSchedule,
    pub batch_size: usize,
    pub target_sync_period: u64,
    pub buffer_capacity: usize,
    pub hidden: Vec<usize>,
    pub total_steps: u64,
    /// Environment steps between gradient updates.
    pub update_every: u64,
    /// Environment steps collected before the first update.
    pub learning_starts: u64,
    /// Global gradient-norm clip.
    pub grad_clip: f64,
    /// Each agent sees its own slots first instead of the shared global view.
    pub egocentric: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.005,
            gamma: 0.99,
            epsilon: EpsilonSchedule::default(),
            batch_size: 32,
            target_sync_period: 1000,
            buffer_capacity: 30_000,
            hidden: vec![64, 64],
            total_steps: 200_000,
            update_every: 4,
            learning_starts: 1000,
            grad_clip: 10.0,
            egocentric: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::config("train.learning_rate", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config("train.gamma", "must lie in [0, 1]"));
        }
        let e = &self.epsilon;
        if !(0.0..=1.0).contains(&e.start) || !(0.0..=1.0).contains(&e.end) {
            return Err(Error::config("train.epsilon", "start and end must lie in [0, 1]"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("train.batch_size", "must be at least 1"));
        }
        if self.buffer_capacity < self.batch_size {
            return Err(Error::config("train.buffer_capacity", "must hold at least one batch"));
        }
        if self.target_sync_period == 0 {
            return Err(Error::config("train.target_sync_period", "must be at least 1"));
        }
        if self.update_every == 0 {
            return Err(Error::config("train.update_every", "must be at least 1"));
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::config("train.hidden", "layer widths must be positive"));
        }
        if !(self.grad_clip > 0.0) {
            return Err(Error::config("train.grad_clip", "must be positive"));
        }
        Ok(())
    }
}

/// Joint action-value: the plain sum of per-agent values.
pub fn joint_q(per_agent_q: &[f64]) -> f64 {
    per_agent_q.iter().sum()
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// ε-greedy choice made independently per agent.
pub fn select_actions<R: Rng + ?Sized>(
    nets: &[QNetwork],
    obs: &[Vec<f64>],
    epsilon: f64,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if nets.len() != obs.len() {
        return Err(Error::ShapeMismatch(format!("{} networks but {} observations", nets.len(), obs.len())));
    }
    nets.iter()
        .zip(obs)
        .map(|(net, o)| {
            if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
                Ok(rng.gen_range(0..net.action_count()))
            } else {
                Ok(argmax(&net.forward(o)?))
            }
        })
        .collect()
}

/// Online and target networks for every agent.
#[derive(Debug, Clone, PartialEq)]
pub struct VdnLearner {
    pub online: Vec<QNetwork>,
    pub target: Vec<QNetwork>,
}

/// TD loss over a batch and its gradient for every online network.
pub struct LossAndGrad {
    pub loss: f64,
    pub grads: Vec<Vec<f64>>,
}

fn check_batch(online: &[QNetwork], batch: &[&Transition]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::ShapeMismatch("empty batch".into()));
    }
    let n = online.len();
    for t in batch {
        if t.obs.len() != n || t.actions.len() != n || t.next_obs.len() != n {
            return Err(Error::ShapeMismatch(format!("transition does not carry {n} agents")));
        }
        for (net, &a) in online.iter().zip(&t.actions) {
            if a >= net.action_count() {
                return Err(Error::ShapeMismatch(format!("action {a} out of range")));
            }
        }
    }
    Ok(())
}

/// TD target `y = r` at terminals, else `r + γ·Σ_i max_a Q_target_i(o'_i, a)`.
pub fn td_target(target: &[QNetwork], t: &Transition, gamma: f64) -> Result<f64> {
    if t.terminal || gamma == 0.0 {
        return Ok(t.reward);
    }
    let mut next = 0.0;
    for (net, o) in target.iter().zip(&t.next_obs) {
        let q = net.forward(o)?;
        next += q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    }
    Ok(t.reward + gamma * next)
}

/// Mean squared TD error `mean_b (y_b − Σ_i Q_i(o_i, a_i))²` and its gradient
/// with respect to the online parameters (targets held fixed).
pub fn td_loss_and_gradients(
    online: &[QNetwork],
    target: &[QNetwork],
    batch: &[&Transition],
    gamma: f64,
) -> Result<LossAndGrad> {
    check_batch(online, batch)?;
    let scale = 1.0 / batch.len() as f64;
    let mut grads: Vec<Vec<f64>> = online.iter().map(|n| vec![0.0; n.params().len()]).collect();
    let mut loss = 0.0;
    for t in batch {
        let y = td_target(target, t, gamma)?;
        let traces = online
            .iter()
            .zip(&t.obs)
            .map(|(net, o)| net.forward_trace(o))
            .collect::<Result<Vec<_>>>()?;
        let chosen: Vec<f64> = traces.iter().zip(&t.actions).map(|(tr, &a)| tr.output()[a]).collect();
        let delta = y - joint_q(&chosen);
        loss += delta * delta * scale;
        let d_q = -2.0 * delta * scale;
        for (k, (net, tr)) in online.iter().zip(&traces).enumerate() {
            let mut d_out = vec![0.0; net.action_count()];
            d_out[t.actions[k]] = d_q;
            net.backward(tr, &d_out, &mut grads[k]);
        }
    }
    Ok(LossAndGrad { loss, grads })
}

impl VdnLearner {
    /// Freshly initialised agents with identical target copies.
    pub fn new<R: Rng + ?Sized>(n_agents: usize, obs_len: usize, hidden: &[usize], n_actions: usize, rng: &mut R) -> Result<Self> {
        let mut shapes = Vec::with_capacity(hidden.len() + 2);
        shapes.push(obs_len);
        shapes.extend_from_slice(hidden);
        shapes.push(n_actions);
        let online = (0..n_agents)
            .map(|_| QNetwork::init(shapes.clone(), rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(VdnLearner {
            target: online.clone(),
            online,
        })
    }

    pub fn from_networks(online: Vec<QNetwork>) -> Self {
        VdnLearner {
            target: online.clone(),
            online,
        }
    }

    /// One clipped gradient-descent step on the TD loss; returns the pre-step loss.
    pub fn td_update(&mut self, batch: &[&Transition], config: &TrainConfig) -> Result<f64> {
        let LossAndGrad { loss, grads } = td_loss_and_gradients(&self.online, &self.target, batch, config.gamma)?;
        let norm = grads.iter().flatten().map(|g| g * g).sum::<f64>().sqrt();
        let clip = if norm > config.grad_clip { config.grad_clip / norm } else { 1.0 };
        let step = config.learning_rate * clip;
        for (net, g) in self.online.iter_mut().zip(&grads) {
            for (p, gi) in net.params_mut().iter_mut().zip(g) {
                *p -= step * gi;
            }
        }
        Ok(loss)
    }

    /// Copies online parameters into the target networks.
    pub fn sync_target(&mut self) {
        self.target.clone_from(&self.online);
    }

    pub fn select_actions<R: Rng + ?Sized>(&self, obs: &[Vec<f64>], epsilon: f64, rng: &mut R) -> Result<Vec<usize>> {
        select_actions(&self.online, obs, epsilon, rng)
    }
}

#[cfg(test)]
mod tests;
