//! Deep Q-learning agent for the elevator environment.
//!
//! The building state is flattened to a `3 + 3 * floor_count` vector
//! (capacity, current weight, current position, then the car, up, and down
//! button banks as 0/1), actions come back as codes 0 through 4, and the
//! reward charges the number of people still waiting times the simulated
//! seconds the step consumed.

mod replay;
mod train;

pub use replay::ReplayMemory;
pub use train::{infer, train, EpochRecord, InferResult, TrainResult, Trainer};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::{Network, NnError};
use crate::sim::{Action, ActionSet, BuildingState, SimError, StepOutcome};

#[derive(Debug, Error)]
pub enum DqnError {
    #[error("action code {0} outside [0, 4]")]
    InvalidActionCode(u8),
    #[error("network input width {net} does not match encoded state length {encoded}")]
    EncoderMismatch { net: usize, encoded: usize },
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error("non-finite loss at epoch {epoch}, step {step}; offending minibatch attached")]
    NonFiniteLoss {
        epoch: usize,
        step: usize,
        minibatch_json: String,
    },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Encoded state length for a building with `floor_count` floors.
pub fn encoded_len(floor_count: usize) -> usize {
    3 + 3 * floor_count
}

/// Flatten the state: `[capacity, weight, position, car.., up.., down..]`,
/// button banks as 0.0/1.0.
pub fn encode_state(state: &BuildingState) -> Vec<f64> {
    let mut out = Vec::with_capacity(encoded_len(state.floor_count));
    out.push(state.capacity_kg);
    out.push(state.current_weight_kg);
    out.push(state.current_floor as f64);
    let banks = [state.car_buttons(), state.up_buttons(), state.down_buttons()];
    for bank in banks {
        out.extend(bank.iter().map(|&b| if b { 1.0 } else { 0.0 }));
    }
    out
}

/// Rescale an encoded state before it reaches a network: load scalars to
/// roughly unit range, position to [0, 1], button bits untouched. The raw
/// encoding keeps its published layout; this is a fixed, invertible
/// preprocessing step owned by the model.
pub fn normalize_features(encoded: &[f64]) -> Vec<f64> {
    let floor_count = (encoded.len() - 3) / 3;
    let mut out = encoded.to_vec();
    let capacity = encoded[0].max(1.0);
    out[0] = encoded[0] / 1_000.0;
    out[1] = encoded[1] / capacity;
    out[2] = (encoded[2] - 1.0) / (floor_count.max(2) - 1) as f64;
    out
}

/// Map an action code back to the action: 0 Idle, 1 OpenCloseUp,
/// 2 OpenCloseDown, 3 MoveUp, 4 MoveDown.
pub fn decode_action(code: u8) -> Result<Action, DqnError> {
    Action::from_code(code).ok_or(DqnError::InvalidActionCode(code))
}

/// Who counts as waiting when the reward is charged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WaitingMode {
    /// Hall waiters plus riders not yet delivered (default).
    HallAndRiders,
    /// Hall waiters only.
    HallOnly,
}

/// Step reward: `-(people waiting after the step) * (seconds elapsed)`.
/// Never positive; zero exactly when nobody waits or no time passed.
pub fn reward(outcome: &StepOutcome, state_after: &BuildingState, mode: WaitingMode) -> f64 {
    let waiting = match mode {
        WaitingMode::HallAndRiders => state_after.waiting_count(),
        WaitingMode::HallOnly => state_after.hall_count(),
    };
    -(waiting as f64) * outcome.elapsed_s
}

/// One stored experience. `next_legal` keeps the action mask of the
/// successor state so the TD target can take its max over legal actions
/// without re-deriving legality from the encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: u8,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
    pub next_legal: ActionSet,
}

/// Sign convention for the TD target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TdMode {
    /// `y = r + lambda * max_a' Q*(s', a')`, zero bootstrap at terminals.
    Standard,
    /// `y = r - lambda * max_a' Q*(s', a')`: the subtracted variant, kept to
    /// reproduce runs trained with that sign.
    PaperLiteral,
}

/// Regression target for one transition under the target network.
pub fn td_target(
    transition: &Transition,
    target_net: &Network,
    lambda: f64,
    mode: TdMode,
) -> Result<f64, DqnError> {
    if transition.terminal {
        return Ok(transition.reward);
    }
    let q = target_net.forward(&normalize_features(&transition.next_state))?;
    let bootstrap = lambda * masked_max(&q, transition.next_legal);
    Ok(match mode {
        TdMode::Standard => transition.reward + bootstrap,
        TdMode::PaperLiteral => transition.reward - bootstrap,
    })
}

fn masked_max(q_values: &[f64], legal: ActionSet) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for (code, &v) in q_values.iter().enumerate() {
        if legal.contains_code(code as u8) && v > best {
            best = v;
        }
    }
    debug_assert!(best.is_finite() || legal.is_empty());
    best
}

/// Epsilon-greedy action choice restricted to `legal`: uniform over legal
/// with probability epsilon, otherwise the legal argmax of the network's
/// Q-values (lowest code on ties).
pub fn select_action(
    q_net: &Network,
    encoded: &[f64],
    legal: ActionSet,
    epsilon: f64,
    rng: &mut impl Rng,
) -> Result<u8, DqnError> {
    debug_assert!(!legal.is_empty());
    if rng.gen::<f64>() < epsilon {
        let codes: Vec<u8> = legal.iter().map(Action::code).collect();
        return Ok(codes[rng.gen_range(0..codes.len())]);
    }
    let q = q_net.forward(&normalize_features(encoded))?;
    let mut best_code = None;
    let mut best_value = f64::NEG_INFINITY;
    for (code, &v) in q.iter().enumerate() {
        if legal.contains_code(code as u8) && v > best_value {
            best_code = Some(code as u8);
            best_value = v;
        }
    }
    Ok(best_code.expect("legal set is nonempty"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DqnHyperparams {
    pub epsilon: f64,
    /// Discount factor.
    pub lambda: f64,
    pub learning_rate: f64,
    pub minibatch: usize,
    pub replay_capacity: usize,
    /// Copy the online network into the target every this many minibatch
    /// gradient steps.
    pub target_sync: u64,
    pub epochs: usize,
    /// Episode step cap as a multiple of the tape's event count.
    pub step_cap_factor: usize,
    pub td_mode: TdMode,
    pub waiting_mode: WaitingMode,
    /// Take one gradient step per minibatch element instead of one averaged
    /// step per minibatch, counting syncs per element.
    pub paper_literal_loop: bool,
}

impl Default for DqnHyperparams {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            lambda: 0.99,
            learning_rate: 1e-3,
            minibatch: 32,
            replay_capacity: 100_000,
            target_sync: 1_000,
            epochs: 10,
            step_cap_factor: 50,
            td_mode: TdMode::Standard,
            waiting_mode: WaitingMode::HallAndRiders,
            paper_literal_loop: false,
        }
    }
}

impl DqnHyperparams {
    pub fn validate(&self) -> Result<(), DqnError> {
        let bad = |msg: String| Err(DqnError::InvalidHyperparams(msg));
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad(format!("epsilon must lie in [0, 1], got {}", self.epsilon));
        }
        if !(0.0..1.0).contains(&self.lambda) {
            return bad(format!("lambda must lie in [0, 1), got {}", self.lambda));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.minibatch == 0 {
            return bad("minibatch must be at least 1".into());
        }
        if self.replay_capacity == 0 {
            return bad("replay_capacity must be at least 1".into());
        }
        if self.target_sync == 0 {
            return bad("target_sync must be at least 1".into());
        }
        if self.step_cap_factor == 0 {
            return bad("step_cap_factor must be at least 1".into());
        }
        Ok(())
    }
}

/// Default Q-network for a building: `3 + 3F -> 64 -> 64 -> 5`, ReLU hidden
/// layers, identity output.
pub fn default_network(floor_count: usize, seed: u64) -> Result<Network, DqnError> {
    Ok(Network::glorot(
        &[encoded_len(floor_count), 64, 64, Action::COUNT],
        seed,
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Layer};
    use crate::sim::{BuildingConfig, SimEnv};
    use crate::traffic::{TrafficRecord, TrafficTable};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn env_with(records: Vec<TrafficRecord>) -> SimEnv {
        SimEnv::from_table(
            &TrafficTable::from_records(records),
            &BuildingConfig::default(),
        )
        .unwrap()
    }

    fn record(time_s: f64, start: usize, dest: usize, weight: f64) -> TrafficRecord {
        TrafficRecord {
            time_s,
            start_floor: start,
            dest_floor: dest,
            weight_kg: weight,
        }
    }

    /// Network ignoring its input: zero weights, Q-values fixed by bias.
    fn constant_net(bias: [f64; 5]) -> Network {
        let mut layer = Layer::zeros(encoded_len(8), 5, Activation::Identity);
        layer.bias = bias.to_vec();
        Network::new(vec![layer]).unwrap()
    }

    fn all_legal() -> ActionSet {
        let mut set = ActionSet::default();
        for a in Action::ALL {
            set.insert(a);
        }
        set
    }

    #[test]
    fn encode_fresh_lobby_state() {
        let env = env_with(vec![]);
        let encoded = encode_state(env.state());
        let mut expected = vec![1_000.0, 0.0, 1.0];
        expected.extend(std::iter::repeat(0.0).take(24));
        assert_eq!(encoded, expected);
    }

    #[test]
    fn encode_places_car_button_for_floor_three_at_index_five() {
        let mut env = env_with(vec![record(27_000.0, 1, 3, 70.0)]);
        env.apply_action(Action::OpenCloseUp).unwrap();
        let encoded = encode_state(env.state());
        assert_eq!(encoded[5], 1.0);
        let ones: Vec<usize> = encoded
            .iter()
            .enumerate()
            .skip(3)
            .filter_map(|(i, &v)| (v == 1.0).then_some(i))
            .collect();
        assert_eq!(ones, vec![5]);
    }

    #[test]
    fn encoded_length_tracks_floor_count() {
        assert_eq!(encoded_len(8), 27);
        for floors in 2..12 {
            let cfg = BuildingConfig {
                floor_count: floors,
                ..BuildingConfig::default()
            };
            let env = SimEnv::from_table(&TrafficTable::default(), &cfg).unwrap();
            assert_eq!(encode_state(env.state()).len(), 3 + 3 * floors);
        }
    }

    #[test]
    fn encoding_changes_only_where_state_changed() {
        let mut env = env_with(vec![record(27_000.0, 2, 5, 70.0)]);
        let before = encode_state(env.state());
        env.apply_action(Action::MoveUp).unwrap();
        let after = encode_state(env.state());
        let changed: Vec<usize> = before
            .iter()
            .zip(&after)
            .enumerate()
            .filter_map(|(i, (a, b))| (a != b).then_some(i))
            .collect();
        // Only the position entry moves.
        assert_eq!(changed, vec![2]);
    }

    #[test]
    fn decode_covers_the_action_table() {
        assert_eq!(decode_action(0).unwrap(), Action::Idle);
        assert_eq!(decode_action(1).unwrap(), Action::OpenCloseUp);
        assert_eq!(decode_action(2).unwrap(), Action::OpenCloseDown);
        assert_eq!(decode_action(3).unwrap(), Action::MoveUp);
        assert_eq!(decode_action(4).unwrap(), Action::MoveDown);
        assert!(matches!(decode_action(5), Err(DqnError::InvalidActionCode(5))));
    }

    #[test]
    fn reward_charges_waiting_times_elapsed() {
        let mut env = env_with(vec![
            record(27_000.0, 1, 3, 70.0),
            record(27_000.0, 2, 4, 71.0),
            record(27_000.0, 5, 1, 72.0),
        ]);
        // Move up: 5 seconds, all three passengers still waiting.
        let outcome = env.apply_action(Action::MoveUp).unwrap();
        assert_eq!(outcome.elapsed_s, 5.0);
        assert_eq!(
            reward(&outcome, env.state(), WaitingMode::HallAndRiders),
            -15.0
        );
    }

    #[test]
    fn reward_is_zero_with_nobody_waiting() {
        let mut env = env_with(vec![record(27_000.0, 1, 2, 70.0)]);
        env.apply_action(Action::OpenCloseUp).unwrap();
        env.apply_action(Action::MoveUp).unwrap();
        let outcome = env.apply_action(Action::OpenCloseUp).unwrap();
        assert!(outcome.terminal);
        assert_eq!(
            reward(&outcome, env.state(), WaitingMode::HallAndRiders),
            0.0
        );
    }

    #[test]
    fn hall_only_mode_ignores_riders() {
        let mut env = env_with(vec![record(27_000.0, 1, 3, 70.0)]);
        let outcome = env.apply_action(Action::OpenCloseUp).unwrap();
        assert_eq!(reward(&outcome, env.state(), WaitingMode::HallOnly), 0.0);
        assert_eq!(
            reward(&outcome, env.state(), WaitingMode::HallAndRiders),
            -15.0
        );
    }

    #[test]
    fn greedy_selection_takes_the_argmax() {
        let net = constant_net([5.0, 1.0, 1.0, 1.0, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let enc = vec![0.0; encoded_len(8)];
        let code = select_action(&net, &enc, all_legal(), 0.0, &mut rng).unwrap();
        assert_eq!(code, 0);
    }

    #[test]
    fn greedy_selection_respects_the_mask() {
        let net = constant_net([5.0, 4.0, 3.0, 2.0, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let enc = vec![0.0; encoded_len(8)];
        let mut legal = ActionSet::default();
        legal.insert(Action::MoveUp);
        legal.insert(Action::MoveDown);
        let code = select_action(&net, &enc, legal, 0.0, &mut rng).unwrap();
        assert_eq!(code, 3);
    }

    // Multinomial check: with epsilon = 1 each legal action's draw count
    // must land within three standard deviations of uniform.
    #[test]
    fn full_exploration_is_uniform_over_legal() {
        let net = constant_net([9.0, 0.0, 0.0, 0.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let enc = vec![0.0; encoded_len(8)];
        let mut legal = ActionSet::default();
        legal.insert(Action::Idle);
        legal.insert(Action::MoveUp);
        legal.insert(Action::OpenCloseDown);
        let n = 10_000;
        let k = 3.0;
        let mut counts = [0usize; 5];
        for _ in 0..n {
            let code = select_action(&net, &enc, legal, 1.0, &mut rng).unwrap();
            counts[code as usize] += 1;
        }
        let expected = n as f64 / k;
        let sigma = (n as f64 * (1.0 / k) * (1.0 - 1.0 / k)).sqrt();
        for code in [0usize, 2, 3] {
            let diff = (counts[code] as f64 - expected).abs();
            assert!(diff <= 3.0 * sigma, "code {code}: {} draws", counts[code]);
        }
        assert_eq!(counts[1] + counts[4], 0);
    }

    fn transition(reward: f64, terminal: bool) -> Transition {
        Transition {
            state: vec![0.0; encoded_len(8)],
            action: 0,
            reward,
            next_state: {
                let mut s = vec![0.0; encoded_len(8)];
                s[0] = 1_000.0;
                s[2] = 1.0;
                s
            },
            terminal,
            next_legal: all_legal(),
        }
    }

    #[test]
    fn td_target_terminal_is_the_reward_in_both_modes() {
        let net = constant_net([1.0, 2.0, 3.0, 4.0, 5.0]);
        let t = transition(-30.0, true);
        assert_eq!(td_target(&t, &net, 0.9, TdMode::Standard).unwrap(), -30.0);
        assert_eq!(td_target(&t, &net, 0.9, TdMode::PaperLiteral).unwrap(), -30.0);
    }

    #[test]
    fn td_target_zero_discount_is_the_reward() {
        let net = constant_net([1.0, 2.0, 3.0, 4.0, 5.0]);
        let t = transition(-7.5, false);
        assert_eq!(td_target(&t, &net, 0.0, TdMode::Standard).unwrap(), -7.5);
        assert_eq!(td_target(&t, &net, 0.0, TdMode::PaperLiteral).unwrap(), -7.5);
    }

    #[test]
    fn td_target_signs_differ_between_modes() {
        let net = constant_net([-20.0, -25.0, -30.0, -35.0, -40.0]);
        let t = transition(-10.0, false);
        // max Q* = -20, lambda 0.9: standard -10 + (-18) = -28.
        assert!((td_target(&t, &net, 0.9, TdMode::Standard).unwrap() - -28.0).abs() < 1e-12);
        assert!((td_target(&t, &net, 0.9, TdMode::PaperLiteral).unwrap() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn td_target_max_respects_next_legality() {
        let net = constant_net([100.0, -20.0, -30.0, -40.0, -50.0]);
        let mut t = transition(0.0, false);
        let mut legal = ActionSet::default();
        legal.insert(Action::OpenCloseUp);
        legal.insert(Action::OpenCloseDown);
        t.next_legal = legal;
        // Code 0's 100 is masked out; max over legal is -20.
        assert!((td_target(&t, &net, 1.0 - 1e-9, TdMode::Standard).unwrap() - -20.0).abs() < 1e-6);
    }

    #[test]
    fn hyperparams_validate_ranges() {
        assert!(DqnHyperparams::default().validate().is_ok());
        let bad = DqnHyperparams {
            lambda: 1.0,
            ..DqnHyperparams::default()
        };
        assert!(bad.validate().is_err());
        let bad = DqnHyperparams {
            target_sync: 0,
            ..DqnHyperparams::default()
        };
        assert!(bad.validate().is_err());
    }
}
