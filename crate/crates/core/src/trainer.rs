//! Episode training loop and greedy backtesting.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::agent::{act, epsilon_for_episode, exp_replay, exploit, Experience, ReplayBuffer};
use crate::config::Config;
use crate::environment::{Environment, EpisodeLog, StepRecord};
use crate::error::{Error, Result};
use crate::qnet::QNetwork;

/// Per-episode training diagnostics. `mean_loss` is empty for episodes
/// where the replay buffer never filled.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub epsilon: f64,
    pub mean_loss: Option<f64>,
    pub cumulative_reward: f64,
    pub final_value: f64,
}

/// Outcome of a full training run.
#[derive(Debug, Clone)]
pub struct TrainResult {
    pub episodes: Vec<EpisodeRecord>,
    pub network: QNetwork,
    /// Global step index of the first replay update, if one ever ran.
    pub first_replay_step: Option<usize>,
    pub replay_calls: usize,
}

/// Network layer dimensions for an environment: N(N+2) inputs, the
/// configured hidden trunk, one Q-value head per asset.
pub fn network_dims(env: &Environment, config: &Config) -> Vec<usize> {
    let mut dims = Vec::with_capacity(config.hidden_dims.len() + 2);
    dims.push(env.state_len());
    dims.extend_from_slice(&config.hidden_dims);
    dims.push(env.num_assets());
    dims
}

/// Run the configured number of episodes over the training environment:
/// reset, then per step act -> step -> remember -> replay (once the
/// buffer is full), decaying epsilon per episode. The buffer persists
/// across episodes; portfolio value resets with each.
pub fn train(env: &mut Environment, config: &Config) -> Result<TrainResult> {
    let mut network = QNetwork::init(&network_dims(env, config), config.rng_seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut buffer = ReplayBuffer::new(config.buffer_capacity)?;

    let mut episodes = Vec::with_capacity(config.episodes);
    let mut first_replay_step = None;
    let mut replay_calls = 0usize;
    let mut global_step = 0usize;

    for episode in 0..config.episodes {
        let epsilon = epsilon_for_episode(
            config.epsilon_start,
            config.epsilon_decay,
            config.epsilon_floor,
            episode,
        );
        let mut state = env.reset();
        let mut cumulative_reward = 0.0;
        let mut loss_sum = 0.0;
        let mut loss_count = 0usize;
        let mut step_in_episode = 0usize;

        loop {
            let action = act(&network, &state, epsilon, &mut rng, config.regime)?;
            let (next, reward, done) = env.step(&action)?;
            cumulative_reward += reward.portfolio;
            buffer.push(Experience::new(state, action, next.clone(), reward)?);

            match exp_replay(&buffer, &mut network, config.learning_rate, config.gamma) {
                Ok(Some(loss)) => {
                    loss_sum += loss;
                    loss_count += 1;
                    replay_calls += 1;
                    if first_replay_step.is_none() {
                        first_replay_step = Some(global_step);
                    }
                }
                Ok(None) => {}
                Err(source) => {
                    return Err(Error::TrainingAborted {
                        episode,
                        step: step_in_episode,
                        source: Box::new(source),
                    });
                }
            }

            global_step += 1;
            step_in_episode += 1;
            state = next;
            if done {
                break;
            }
        }

        episodes.push(EpisodeRecord {
            episode,
            epsilon,
            mean_loss: (loss_count > 0).then(|| loss_sum / loss_count as f64),
            cumulative_reward,
            final_value: env.portfolio_value(),
        });
    }

    Ok(TrainResult {
        episodes,
        network,
        first_replay_step,
        replay_calls,
    })
}

/// One greedy pass (epsilon forced to 0) over an environment. Consumes
/// no randomness; evaluation measures the learned policy only.
pub fn greedy_backtest(env: &mut Environment, network: &QNetwork) -> Result<EpisodeLog> {
    let mut state = env.reset();
    let mut steps = Vec::new();
    let mut step = 0usize;
    loop {
        let action = exploit(network, &state, env.regime())?;
        let date = env.date(env.current_t());
        let (next, reward, done) = env.step(&action)?;
        steps.push(StepRecord {
            step,
            date,
            weights: action.weights().to_vec(),
            portfolio_return: reward.portfolio,
            portfolio_value: env.portfolio_value(),
        });
        step += 1;
        state = next;
        if done {
            break;
        }
    }
    Ok(EpisodeLog {
        assets: env.assets().to_vec(),
        initial_investment: env.initial_investment(),
        steps,
    })
}

/// Backtest a fixed weight vector over the same steps the greedy agent
/// acts on: one record per day from the first full window onward.
pub fn fixed_weight_backtest(
    env: &Environment,
    weights: &[f64],
    initial_investment: f64,
) -> Result<EpisodeLog> {
    if weights.len() != env.num_assets() {
        return Err(Error::DimensionMismatch {
            context: "fixed weights".into(),
            expected: env.num_assets(),
            actual: weights.len(),
        });
    }
    let raw = env.raw_table();
    let mut steps = Vec::new();
    let mut value = initial_investment;
    for (step, t) in (env.first_t()..env.last_t()).enumerate() {
        let portfolio_return: f64 = (0..env.num_assets())
            .map(|i| weights[i] * (raw.price(t + 1, i) / raw.price(t, i) - 1.0))
            .sum();
        value *= 1.0 + portfolio_return;
        steps.push(StepRecord {
            step,
            date: raw.date(t),
            weights: weights.to_vec(),
            portfolio_return,
            portfolio_value: value,
        });
    }
    Ok(EpisodeLog {
        assets: env.assets().to_vec(),
        initial_investment,
        steps,
    })
}
