//! Action selection and experience replay: explore/exploit weight
//! policies, the FIFO replay buffer, and the replay training step.

use std::collections::VecDeque;

use rand::Rng;

use crate::config::Regime;
use crate::environment::{RewardVector, State};
use crate::error::{Error, Result};
use crate::qnet::{QNetwork, TrainBatch};

/// Tolerance on the normalization invariants of a weight vector.
pub const WEIGHT_TOLERANCE: f64 = 1e-9;

/// Per-asset allocation weights under a declared constraint set.
///
/// Invariants, enforced at construction:
/// - `LongOnly`: every weight >= 0 and the weights sum to 1;
/// - `LongShort`: absolute weights sum to 1 (gross exposure one);
/// - `Budget`: weights sum to 1, signs free (baselines only).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    weights: Vec<f64>,
    regime: Regime,
}

impl WeightVector {
    pub fn new(weights: Vec<f64>, regime: Regime) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidWeights("empty weight vector".into()));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidWeights("non-finite weight".into()));
        }
        match regime {
            Regime::LongOnly => {
                if weights.iter().any(|w| *w < -WEIGHT_TOLERANCE) {
                    return Err(Error::InvalidWeights(
                        "long-only weights must be non-negative".into(),
                    ));
                }
                let sum: f64 = weights.iter().sum();
                if (sum - 1.0).abs() > WEIGHT_TOLERANCE {
                    return Err(Error::InvalidWeights(format!(
                        "long-only weights must sum to 1, got {sum}"
                    )));
                }
            }
            Regime::LongShort => {
                let gross: f64 = weights.iter().map(|w| w.abs()).sum();
                if (gross - 1.0).abs() > WEIGHT_TOLERANCE {
                    return Err(Error::InvalidWeights(format!(
                        "long-short gross exposure must be 1, got {gross}"
                    )));
                }
            }
            Regime::Budget => {
                let sum: f64 = weights.iter().sum();
                if (sum - 1.0).abs() > WEIGHT_TOLERANCE {
                    return Err(Error::InvalidWeights(format!(
                        "budget weights must sum to 1, got {sum}"
                    )));
                }
            }
        }
        Ok(Self { weights, regime })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Divide by the signed sum; `None` when the sum is exactly zero.
fn normalize_sum(draw: &[f64]) -> Option<Vec<f64>> {
    let sum: f64 = draw.iter().sum();
    (sum != 0.0).then(|| draw.iter().map(|x| x / sum).collect())
}

/// Divide by the L1 norm; `None` when every entry is exactly zero.
fn normalize_l1(draw: &[f64]) -> Option<Vec<f64>> {
    let gross: f64 = draw.iter().map(|x| x.abs()).sum();
    (gross != 0.0).then(|| draw.iter().map(|x| x / gross).collect())
}

/// Random long-only weights: N iid uniforms on [0, 1) divided by their
/// sum. An all-zero draw is redrawn.
pub fn explore_long<R: Rng>(rng: &mut R, n: usize) -> Result<WeightVector> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one asset".into()));
    }
    loop {
        let draw: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        if let Some(weights) = normalize_sum(&draw) {
            return WeightVector::new(weights, Regime::LongOnly);
        }
    }
}

/// Random long-short weights: N iid uniforms on [-1, 1] divided by the
/// sum of absolute values. A zero-norm draw is redrawn.
pub fn explore_long_short<R: Rng>(rng: &mut R, n: usize) -> Result<WeightVector> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one asset".into()));
    }
    loop {
        let draw: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        if let Some(weights) = normalize_l1(&draw) {
            return WeightVector::new(weights, Regime::LongShort);
        }
    }
}

/// Signed-sum variant of long-short exploration: divides the draw by its
/// signed sum, so the weights sum to 1 with free signs (a budget vector,
/// not a gross-exposure-one vector). Unstable near zero-sum draws, where
/// individual weights blow up without bound; the trading loop never uses
/// it. Kept for studying the difference against the L1 rule.
pub fn explore_long_short_signed_sum<R: Rng>(rng: &mut R, n: usize) -> Result<WeightVector> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one asset".into()));
    }
    loop {
        let draw: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let Some(weights) = normalize_sum(&draw) else {
            continue;
        };
        // A sum close enough to zero loses the budget identity to
        // cancellation; redraw exactly as for a zero sum.
        if let Ok(vector) = WeightVector::new(weights, Regime::Budget) {
            return Ok(vector);
        }
    }
}

/// Greedy weights from the network's Q-values. Long-only maps through a
/// softmax (simplex by construction); long-short preserves signs under L1
/// normalization, falling back to equal weights when every Q-value is 0.
pub fn exploit(net: &QNetwork, state: &State, regime: Regime) -> Result<WeightVector> {
    let q = net.forward(state.features())?;
    if q.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("q-values".into()));
    }
    match regime {
        Regime::LongOnly => WeightVector::new(softmax(&q), Regime::LongOnly),
        Regime::LongShort => {
            // Sign-preserving L1 normalization; an all-zero head falls
            // back to equal weights.
            let weights =
                normalize_l1(&q).unwrap_or_else(|| vec![1.0 / q.len() as f64; q.len()]);
            WeightVector::new(weights, Regime::LongShort)
        }
        Regime::Budget => Err(Error::InvalidArgument(
            "exploit requires a long_only or long_short regime".into(),
        )),
    }
}

fn softmax(q: &[f64]) -> Vec<f64> {
    let max = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = q.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Epsilon-greedy action. The Bernoulli draw consumes exactly one RNG
/// value; the exploit path consumes none beyond it.
pub fn act<R: Rng>(
    net: &QNetwork,
    state: &State,
    epsilon: f64,
    rng: &mut R,
    regime: Regime,
) -> Result<WeightVector> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be in [0, 1], got {epsilon}"
        )));
    }
    let u: f64 = rng.gen();
    if u < epsilon {
        match regime {
            Regime::LongOnly => explore_long(rng, net.output_dim()),
            Regime::LongShort => explore_long_short(rng, net.output_dim()),
            Regime::Budget => Err(Error::InvalidArgument(
                "act requires a long_only or long_short regime".into(),
            )),
        }
    } else {
        exploit(net, state, regime)
    }
}

/// Exploration probability for episode `k`: max(floor, start * decay^k).
pub fn epsilon_for_episode(start: f64, decay: f64, floor: f64, episode: usize) -> f64 {
    (start * decay.powi(episode as i32)).max(floor)
}

/// One transition: the state acted from, the action, the state reached,
/// and the reward earned.
#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub prev_state: State,
    pub action: WeightVector,
    pub next_state: State,
    pub reward: RewardVector,
}

impl Experience {
    pub fn new(
        prev_state: State,
        action: WeightVector,
        next_state: State,
        reward: RewardVector,
    ) -> Result<Self> {
        if next_state.t() != prev_state.t() + 1 {
            return Err(Error::InvalidArgument(format!(
                "next state t={} must follow prev state t={}",
                next_state.t(),
                prev_state.t()
            )));
        }
        Ok(Self {
            prev_state,
            action,
            next_state,
            reward,
        })
    }
}

/// Fixed-capacity FIFO store of experiences; pushing into a full buffer
/// evicts exactly the oldest entry.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    entries: VecDeque<Experience>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidArgument("capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            entries: VecDeque::with_capacity(capacity),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() == self.capacity
    }

    pub fn push(&mut self, experience: Experience) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(experience);
    }

    pub fn iter(&self) -> impl Iterator<Item = &Experience> {
        self.entries.iter()
    }
}

/// Train on the whole buffer as one mini-batch. Targets are the stored
/// per-asset rewards plus `gamma` times the best next-state Q-value
/// (gamma = 0 reduces to the reward-only target). Returns `None` without
/// touching the network while the buffer is not yet full.
pub fn exp_replay(
    buffer: &ReplayBuffer,
    net: &mut QNetwork,
    learning_rate: f64,
    gamma: f64,
) -> Result<Option<f64>> {
    if !buffer.is_full() {
        return Ok(None);
    }
    let batch = build_batch(buffer, net, gamma)?;
    net.train_batch(&batch, learning_rate).map(Some)
}

fn build_batch(buffer: &ReplayBuffer, net: &QNetwork, gamma: f64) -> Result<TrainBatch> {
    let mut states = Vec::with_capacity(buffer.len());
    let mut targets = Vec::with_capacity(buffer.len());
    for exp in buffer.iter() {
        let bootstrap = if gamma == 0.0 {
            0.0
        } else {
            let next_q = net.forward(exp.next_state.features())?;
            gamma * next_q.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        };
        states.push(exp.prev_state.features().to_vec());
        targets.push(
            exp.reward
                .per_asset
                .iter()
                .map(|r| r + bootstrap)
                .collect(),
        );
    }
    TrainBatch::new(states, targets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Regime;
    use crate::environment::{Environment, State};
    use crate::market_data::PriceTable;
    use chrono::{Days, NaiveDate};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_env(n: usize) -> Environment {
        let start: NaiveDate = "2020-01-01".parse().unwrap();
        let rows = 8;
        let prices: Vec<Vec<f64>> = (0..rows)
            .map(|t| (0..n).map(|i| 50.0 + (t * (i + 1)) as f64).collect())
            .collect();
        let dates = (0..rows as u64).map(|t| start + Days::new(t)).collect();
        let assets = (0..n).map(|i| format!("A{i}")).collect();
        let table = PriceTable::new(dates, assets, prices).unwrap();
        Environment::new(table.clone(), table, 3, Regime::LongOnly, 1.0).unwrap()
    }

    fn state_of(env: &Environment, t: usize) -> State {
        env.state_at(t).unwrap()
    }

    #[test]
    fn explore_long_invariants_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..200 {
            let w = explore_long(&mut rng, 5).unwrap();
            assert!(w.weights().iter().all(|x| *x >= 0.0));
            let sum: f64 = w.weights().iter().sum();
            assert!((sum - 1.0).abs() <= WEIGHT_TOLERANCE);
        }
    }

    #[test]
    fn explore_long_degenerate_universe() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = explore_long(&mut rng, 1).unwrap();
        assert_eq!(w.weights(), &[1.0]);
    }

    #[test]
    fn explore_long_mean_weight_is_symmetric() {
        // Monte Carlo oracle: by symmetry each of 4 assets averages 1/4.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let trials = 100_000;
        let mut sums = [0.0f64; 4];
        for _ in 0..trials {
            let w = explore_long(&mut rng, 4).unwrap();
            for (s, x) in sums.iter_mut().zip(w.weights()) {
                *s += x;
            }
        }
        for s in sums {
            let mean = s / trials as f64;
            assert!((mean - 0.25).abs() < 0.01, "mean weight {mean}");
        }
    }

    #[test]
    fn explore_long_short_gross_exposure_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100_000 {
            let w = explore_long_short(&mut rng, 3).unwrap();
            let gross: f64 = w.weights().iter().map(|x| x.abs()).sum();
            assert!((gross - 1.0).abs() <= WEIGHT_TOLERANCE);
        }
    }

    #[test]
    fn signed_sum_exploration_is_budget_normalized_but_unstable() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let mut max_magnitude = 0.0f64;
        for _ in 0..20_000 {
            let w = explore_long_short_signed_sum(&mut rng, 4).unwrap();
            assert_eq!(w.regime(), Regime::Budget);
            let sum: f64 = w.weights().iter().sum();
            assert!((sum - 1.0).abs() <= 1e-6, "sum {sum}");
            for x in w.weights() {
                max_magnitude = max_magnitude.max(x.abs());
            }
        }
        // Near-zero-sum draws blow individual weights far past gross
        // exposure one.
        assert!(max_magnitude > 10.0, "max weight {max_magnitude}");
    }

    #[test]
    fn l1_normalization_arithmetic() {
        // Raw draw (-0.5, 1.5): L1 norm 2, so (-0.25, 0.75).
        let normalized = normalize_l1(&[-0.5, 1.5]).unwrap();
        assert_eq!(normalized, vec![-0.25, 0.75]);
        WeightVector::new(normalized, Regime::LongShort).unwrap();

        // An all-positive vector normalizes identically under L1 and sum.
        let draw = [0.2, 0.3, 0.5];
        assert_eq!(normalize_l1(&draw), normalize_sum(&draw));

        assert_eq!(normalize_l1(&[0.0, 0.0]), None);
        assert_eq!(normalize_sum(&[0.0, 0.0]), None);
    }

    #[test]
    fn exploit_equal_q_gives_equal_weights() {
        let env = tiny_env(4);
        let mut net = QNetwork::init(&[env.state_len(), 4], 0).unwrap();
        for l in 0..net.num_layers() {
            net.weights_mut(l).fill(0.0);
            net.biases_mut(l).fill(0.0);
        }
        let w = exploit(&net, &state_of(&env, 2), Regime::LongOnly).unwrap();
        for x in w.weights() {
            assert!((x - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn exploit_long_short_l1() {
        let env = tiny_env(2);
        let mut net = QNetwork::init(&[env.state_len(), 2], 0).unwrap();
        net.weights_mut(0).fill(0.0);
        net.biases_mut(0).copy_from_slice(&[1.0, -1.0]);
        let w = exploit(&net, &state_of(&env, 2), Regime::LongShort).unwrap();
        assert_eq!(w.weights(), &[0.5, -0.5]);
    }

    #[test]
    fn exploit_long_short_zero_q_falls_back_to_equal() {
        let env = tiny_env(4);
        let mut net = QNetwork::init(&[env.state_len(), 4], 0).unwrap();
        net.weights_mut(0).fill(0.0);
        net.biases_mut(0).fill(0.0);
        let w = exploit(&net, &state_of(&env, 2), Regime::LongShort).unwrap();
        assert_eq!(w.weights(), &[0.25, 0.25, 0.25, 0.25]);
    }

    #[test]
    fn softmax_is_shift_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let q: Vec<f64> = (0..6).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let shifted: Vec<f64> = q.iter().map(|v| v + 17.25).collect();
            let a = softmax(&q);
            let b = softmax(&shifted);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn exploit_preserves_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let q: Vec<f64> = (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let w = softmax(&q);
            let argmax_q = q
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            let argmax_w = w
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            assert_eq!(argmax_q, argmax_w);
        }
    }

    #[test]
    fn act_with_epsilon_one_matches_explore_stream() {
        let env = tiny_env(3);
        let net = QNetwork::init(&[env.state_len(), 3], 0).unwrap();
        let state = state_of(&env, 2);

        let mut rng_act = ChaCha8Rng::seed_from_u64(6);
        let via_act = act(&net, &state, 1.0, &mut rng_act, Regime::LongOnly).unwrap();

        let mut rng_direct = ChaCha8Rng::seed_from_u64(6);
        let _bernoulli: f64 = rng_direct.gen();
        let direct = explore_long(&mut rng_direct, 3).unwrap();

        assert_eq!(via_act, direct);
    }

    #[test]
    fn act_with_epsilon_zero_is_deterministic_exploit() {
        let env = tiny_env(3);
        let net = QNetwork::init(&[env.state_len(), 3], 7).unwrap();
        let state = state_of(&env, 2);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = act(&net, &state, 0.0, &mut rng, Regime::LongOnly).unwrap();
        let b = exploit(&net, &state, Regime::LongOnly).unwrap();
        assert_eq!(a, b);

        // Exactly one rng value was consumed by the Bernoulli draw.
        let mut fresh = ChaCha8Rng::seed_from_u64(7);
        let _one: f64 = fresh.gen();
        assert_eq!(rng.gen::<u64>(), fresh.gen::<u64>());
    }

    #[test]
    fn act_explore_fraction_matches_binomial_oracle() {
        let env = tiny_env(4);
        let mut net = QNetwork::init(&[env.state_len(), 4], 0).unwrap();
        for l in 0..net.num_layers() {
            net.weights_mut(l).fill(0.0);
            net.biases_mut(l).fill(0.0);
        }
        let state = state_of(&env, 2);
        // Zero net exploits to exactly (0.25,...); random draws never do.
        let exploit_weights = exploit(&net, &state, Regime::LongOnly).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let trials = 10_000;
        let mut explored = 0;
        for _ in 0..trials {
            let w = act(&net, &state, 0.5, &mut rng, Regime::LongOnly).unwrap();
            if w != exploit_weights {
                explored += 1;
            }
        }
        let fraction = explored as f64 / trials as f64;
        assert!((fraction - 0.5).abs() < 0.02, "explore fraction {fraction}");
    }

    #[test]
    fn epsilon_schedule_is_non_increasing_with_floor() {
        let mut prev = f64::INFINITY;
        for k in 0..1000 {
            let eps = epsilon_for_episode(1.0, 0.995, 0.01, k);
            assert!(eps <= prev);
            assert!(eps >= 0.01);
            prev = eps;
        }
        assert_eq!(epsilon_for_episode(1.0, 0.995, 0.01, 0), 1.0);
        assert_eq!(epsilon_for_episode(1.0, 0.995, 0.01, 999), 0.01);
    }

    #[test]
    fn buffer_evicts_oldest_after_capacity() {
        let env = tiny_env(2);
        let mut buffer = ReplayBuffer::new(32).unwrap();
        for k in 0..33 {
            let exp = Experience::new(
                state_of(&env, 2),
                WeightVector::new(vec![1.0, 0.0], Regime::LongOnly).unwrap(),
                state_of(&env, 3),
                RewardVector {
                    per_asset: vec![k as f64, 0.0],
                    portfolio: k as f64,
                },
            )
            .unwrap();
            buffer.push(exp);
        }
        assert_eq!(buffer.len(), 32);
        let stored: Vec<f64> = buffer.iter().map(|e| e.reward.portfolio).collect();
        let expected: Vec<f64> = (1..33).map(|k| k as f64).collect();
        assert_eq!(stored, expected);
    }

    #[test]
    fn buffer_tracks_queue_model() {
        let env = tiny_env(2);
        let mut buffer = ReplayBuffer::new(32).unwrap();
        let mut model: VecDeque<f64> = VecDeque::new();
        for k in 0..100 {
            let exp = Experience::new(
                state_of(&env, 2),
                WeightVector::new(vec![0.5, 0.5], Regime::LongOnly).unwrap(),
                state_of(&env, 3),
                RewardVector {
                    per_asset: vec![0.0, 0.0],
                    portfolio: k as f64,
                },
            )
            .unwrap();
            buffer.push(exp);
            if model.len() == 32 {
                model.pop_front();
            }
            model.push_back(k as f64);
            assert_eq!(buffer.len(), model.len().min(32));
            let stored: Vec<f64> = buffer.iter().map(|e| e.reward.portfolio).collect();
            let expected: Vec<f64> = model.iter().cloned().collect();
            assert_eq!(stored, expected);
        }
    }

    #[test]
    fn experience_requires_consecutive_states() {
        let env = tiny_env(2);
        let err = Experience::new(
            state_of(&env, 2),
            WeightVector::new(vec![0.5, 0.5], Regime::LongOnly).unwrap(),
            state_of(&env, 4),
            RewardVector {
                per_asset: vec![0.0, 0.0],
                portfolio: 0.0,
            },
        );
        assert!(err.is_err());
    }

    #[test]
    fn exp_replay_is_noop_until_full() {
        let env = tiny_env(2);
        let mut buffer = ReplayBuffer::new(4).unwrap();
        let mut net = QNetwork::init(&[env.state_len(), 2], 0).unwrap();
        let before = net.clone();
        assert!(exp_replay(&buffer, &mut net, 0.01, 0.0).unwrap().is_none());
        for _ in 0..3 {
            buffer.push(
                Experience::new(
                    state_of(&env, 2),
                    WeightVector::new(vec![0.5, 0.5], Regime::LongOnly).unwrap(),
                    state_of(&env, 3),
                    RewardVector {
                        per_asset: vec![0.1, 0.2],
                        portfolio: 0.15,
                    },
                )
                .unwrap(),
            );
        }
        assert!(exp_replay(&buffer, &mut net, 0.01, 0.0).unwrap().is_none());
        assert_eq!(net, before);
    }

    #[test]
    fn replay_targets_are_rewards_when_gamma_zero() {
        let env = tiny_env(2);
        let mut buffer = ReplayBuffer::new(2).unwrap();
        for k in 0..2 {
            buffer.push(
                Experience::new(
                    state_of(&env, 2),
                    WeightVector::new(vec![0.5, 0.5], Regime::LongOnly).unwrap(),
                    state_of(&env, 3),
                    RewardVector {
                        per_asset: vec![0.01 * k as f64, -0.02],
                        portfolio: 0.0,
                    },
                )
                .unwrap(),
            );
        }
        let net = QNetwork::init(&[env.state_len(), 2], 3).unwrap();
        let batch = build_batch(&buffer, &net, 0.0).unwrap();
        assert_eq!(batch.targets()[0], vec![0.0, -0.02]);
        assert_eq!(batch.targets()[1], vec![0.01, -0.02]);
    }

    #[test]
    fn replay_zero_rewards_zero_net_gives_zero_loss() {
        let env = tiny_env(2);
        let mut buffer = ReplayBuffer::new(2).unwrap();
        for _ in 0..2 {
            buffer.push(
                Experience::new(
                    state_of(&env, 2),
                    WeightVector::new(vec![0.5, 0.5], Regime::LongOnly).unwrap(),
                    state_of(&env, 3),
                    RewardVector {
                        per_asset: vec![0.0, 0.0],
                        portfolio: 0.0,
                    },
                )
                .unwrap(),
            );
        }
        let mut net = QNetwork::init(&[env.state_len(), 2], 0).unwrap();
        net.weights_mut(0).fill(0.0);
        net.biases_mut(0).fill(0.0);
        let loss = exp_replay(&buffer, &mut net, 0.01, 0.0).unwrap().unwrap();
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn replay_targets_bootstrap_with_gamma() {
        // Hand-evaluated two-step oracle: target = r + 0.9 * max_j Q(next)[j].
        let env = tiny_env(2);
        let mut net = QNetwork::init(&[env.state_len(), 2], 0).unwrap();
        net.weights_mut(0).fill(0.0);
        net.biases_mut(0).copy_from_slice(&[0.3, 0.7]);

        let mut buffer = ReplayBuffer::new(2).unwrap();
        let rewards = [[0.05, -0.01], [0.00, 0.02]];
        for r in rewards {
            buffer.push(
                Experience::new(
                    state_of(&env, 2),
                    WeightVector::new(vec![0.5, 0.5], Regime::LongOnly).unwrap(),
                    state_of(&env, 3),
                    RewardVector {
                        per_asset: r.to_vec(),
                        portfolio: 0.0,
                    },
                )
                .unwrap(),
            );
        }
        let batch = build_batch(&buffer, &net, 0.9).unwrap();
        // max Q(next) = 0.7 for the zero-trunk net, so bootstrap = 0.63.
        assert_eq!(batch.targets()[0], vec![0.05 + 0.63, -0.01 + 0.63]);
        assert_eq!(batch.targets()[1], vec![0.63, 0.02 + 0.63]);
    }

    #[test]
    fn weight_vector_rejects_violations() {
        assert!(WeightVector::new(vec![0.6, 0.6], Regime::LongOnly).is_err());
        assert!(WeightVector::new(vec![-0.1, 1.1], Regime::LongOnly).is_err());
        assert!(WeightVector::new(vec![0.5, -0.4], Regime::LongShort).is_err());
        assert!(WeightVector::new(vec![f64::NAN, 1.0], Regime::Budget).is_err());
        assert!(WeightVector::new(vec![1.5, -0.5], Regime::Budget).is_ok());
    }
}
