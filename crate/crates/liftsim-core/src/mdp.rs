//! Finite-MDP reference solvers: Q-value iteration as the ground-truth
//! oracle, plus tabular Q-learning checked against it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

const PROBABILITY_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MdpError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("state {state}, action {action}: transition probabilities sum to {sum}")]
    BadRowSum { state: usize, action: usize, sum: f64 },
    #[error("probability out of range at ({state}, {action}, {next}): {value}")]
    BadProbability {
        state: usize,
        action: usize,
        next: usize,
        value: f64,
    },
    #[error("state {0} has no legal action")]
    DeadState(usize),
    #[error("discount must lie in [0, 1), got {0}")]
    BadDiscount(f64),
}

/// Finite Markov decision process with per-state action legality.
#[derive(Debug, Clone)]
pub struct FiniteMdp {
    n_states: usize,
    n_actions: usize,
    legal: Vec<Vec<bool>>,
    /// `transition[s][a][s']`, rows summing to one for legal pairs.
    transition: Vec<Vec<Vec<f64>>>,
    reward: Vec<Vec<Vec<f64>>>,
    discount: f64,
}

impl FiniteMdp {
    pub fn new(
        transition: Vec<Vec<Vec<f64>>>,
        reward: Vec<Vec<Vec<f64>>>,
        legal: Vec<Vec<bool>>,
        discount: f64,
    ) -> Result<Self, MdpError> {
        if !(0.0..1.0).contains(&discount) {
            return Err(MdpError::BadDiscount(discount));
        }
        let n_states = transition.len();
        let n_actions = transition.first().map_or(0, |row| row.len());
        for s in 0..n_states {
            let mut any_legal = false;
            for a in 0..n_actions {
                if !legal[s][a] {
                    continue;
                }
                any_legal = true;
                let mut sum = 0.0;
                for next in 0..n_states {
                    let p = transition[s][a][next];
                    if !(0.0..=1.0).contains(&p) {
                        return Err(MdpError::BadProbability {
                            state: s,
                            action: a,
                            next,
                            value: p,
                        });
                    }
                    sum += p;
                }
                if (sum - 1.0).abs() > PROBABILITY_TOL {
                    return Err(MdpError::BadRowSum {
                        state: s,
                        action: a,
                        sum,
                    });
                }
            }
            if !any_legal {
                return Err(MdpError::DeadState(s));
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            legal,
            transition,
            reward,
            discount,
        })
    }

    /// Parse the plain-text format: one `discount x` line plus
    /// `s a s' prob reward` lines; `#` starts a comment.
    pub fn from_text(src: &str) -> Result<Self, MdpError> {
        let mut discount: Option<f64> = None;
        let mut entries: Vec<(usize, usize, usize, f64, f64)> = Vec::new();
        let mut max_state = 0;
        let mut max_action = 0;
        for (idx, raw) in src.lines().enumerate() {
            let line = idx + 1;
            let text = raw.split('#').next().unwrap_or("").trim();
            if text.is_empty() {
                continue;
            }
            let fields: Vec<&str> = text.split_whitespace().collect();
            if fields[0] == "discount" {
                if fields.len() != 2 {
                    return Err(MdpError::Parse {
                        line,
                        message: "expected `discount <value>`".into(),
                    });
                }
                let value: f64 = fields[1].parse().map_err(|e| MdpError::Parse {
                    line,
                    message: format!("bad discount: {e}"),
                })?;
                discount = Some(value);
                continue;
            }
            if fields.len() != 5 {
                return Err(MdpError::Parse {
                    line,
                    message: format!("expected `s a s' prob reward`, got {} fields", fields.len()),
                });
            }
            let parse_idx = |field: &str, what: &str| -> Result<usize, MdpError> {
                field.parse().map_err(|e| MdpError::Parse {
                    line,
                    message: format!("bad {what} `{field}`: {e}"),
                })
            };
            let parse_num = |field: &str, what: &str| -> Result<f64, MdpError> {
                field.parse().map_err(|e| MdpError::Parse {
                    line,
                    message: format!("bad {what} `{field}`: {e}"),
                })
            };
            let s = parse_idx(fields[0], "state")?;
            let a = parse_idx(fields[1], "action")?;
            let next = parse_idx(fields[2], "next state")?;
            let prob = parse_num(fields[3], "probability")?;
            let reward = parse_num(fields[4], "reward")?;
            max_state = max_state.max(s).max(next);
            max_action = max_action.max(a);
            entries.push((s, a, next, prob, reward));
        }
        let discount = discount.ok_or(MdpError::Parse {
            line: 0,
            message: "missing `discount` line".into(),
        })?;
        let n_states = max_state + 1;
        let n_actions = max_action + 1;
        let mut transition = vec![vec![vec![0.0; n_states]; n_actions]; n_states];
        let mut reward = vec![vec![vec![0.0; n_states]; n_actions]; n_states];
        let mut legal = vec![vec![false; n_actions]; n_states];
        for (s, a, next, p, r) in entries {
            transition[s][a][next] += p;
            reward[s][a][next] = r;
            legal[s][a] = true;
        }
        Self::new(transition, reward, legal, discount)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn is_legal(&self, state: usize, action: usize) -> bool {
        self.legal[state][action]
    }

    pub fn legal_actions(&self, state: usize) -> impl Iterator<Item = usize> + '_ {
        self.legal[state]
            .iter()
            .enumerate()
            .filter_map(|(a, &ok)| ok.then_some(a))
    }

    /// Multiply every reward by `factor`, keeping the dynamics.
    pub fn scale_rewards(&self, factor: f64) -> Self {
        let mut scaled = self.clone();
        for per_state in &mut scaled.reward {
            for per_action in per_state {
                for r in per_action {
                    *r *= factor;
                }
            }
        }
        scaled
    }

    /// Sample a transition; returns the successor state and its reward.
    pub fn sample_next(&self, state: usize, action: usize, rng: &mut impl Rng) -> (usize, f64) {
        debug_assert!(self.is_legal(state, action));
        let row = &self.transition[state][action];
        let mut u: f64 = rng.gen();
        let mut chosen = self.n_states - 1;
        for (next, &p) in row.iter().enumerate() {
            if u < p {
                chosen = next;
                break;
            }
            u -= p;
        }
        (chosen, self.reward[state][action][chosen])
    }
}

/// Dense action-value table.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    values: Vec<Vec<f64>>,
}

impl QTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self {
            values: vec![vec![0.0; n_actions]; n_states],
        }
    }

    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.values[state][action]
    }

    pub fn set(&mut self, state: usize, action: usize, value: f64) {
        debug_assert!(value.is_finite());
        self.values[state][action] = value;
    }

    /// Best value over the legal actions of `state`.
    pub fn max_legal(&self, mdp: &FiniteMdp, state: usize) -> f64 {
        mdp.legal_actions(state)
            .map(|a| self.values[state][a])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Best legal action, lowest index on ties.
    pub fn argmax_legal(&self, mdp: &FiniteMdp, state: usize) -> usize {
        let mut best_action = None;
        let mut best_value = f64::NEG_INFINITY;
        for a in mdp.legal_actions(state) {
            if best_action.is_none() || self.values[state][a] > best_value {
                best_action = Some(a);
                best_value = self.values[state][a];
            }
        }
        best_action.expect("every state has a legal action")
    }

    /// Max-norm distance over legal pairs.
    pub fn max_norm_distance(&self, other: &QTable, mdp: &FiniteMdp) -> f64 {
        let mut worst: f64 = 0.0;
        for s in 0..mdp.n_states() {
            for a in mdp.legal_actions(s) {
                worst = worst.max((self.values[s][a] - other.values[s][a]).abs());
            }
        }
        worst
    }
}

/// One synchronous Bellman optimality backup of `q`.
pub fn bellman_backup(mdp: &FiniteMdp, q: &QTable) -> QTable {
    let mut next = QTable::zeros(mdp.n_states(), mdp.n_actions());
    for s in 0..mdp.n_states() {
        for a in mdp.legal_actions(s) {
            let mut value = 0.0;
            for s2 in 0..mdp.n_states() {
                let p = mdp.transition[s][a][s2];
                if p == 0.0 {
                    continue;
                }
                value += p * (mdp.reward[s][a][s2] + mdp.discount() * q.max_legal(mdp, s2));
            }
            next.set(s, a, value);
        }
    }
    next
}

/// Max-norm Bellman residual of `q`.
pub fn bellman_residual(mdp: &FiniteMdp, q: &QTable) -> f64 {
    bellman_backup(mdp, q).max_norm_distance(q, mdp)
}

/// Solve for the optimal action-value table by repeated backups.
///
/// Iterates until successive tables differ by at most `tol` in max norm and
/// returns the later one, whose residual is then at most `discount * tol`.
pub fn value_iteration(mdp: &FiniteMdp, tol: f64) -> QTable {
    assert!(tol > 0.0, "tolerance must be positive");
    let mut q = QTable::zeros(mdp.n_states(), mdp.n_actions());
    loop {
        let next = bellman_backup(mdp, &q);
        let diff = next.max_norm_distance(&q, mdp);
        q = next;
        if diff <= tol {
            return q;
        }
    }
}

/// One Q-learning update on entry `(state, action)`; `next == None` marks a
/// terminal successor, which bootstraps zero.
pub fn q_learning_step(
    q: &mut QTable,
    mdp: &FiniteMdp,
    state: usize,
    action: usize,
    reward: f64,
    next: Option<usize>,
    alpha: f64,
    lambda: f64,
) {
    let bootstrap = next.map_or(0.0, |s2| q.max_legal(mdp, s2));
    let current = q.get(state, action);
    q.set(
        state,
        action,
        current + alpha * (reward + lambda * bootstrap - current),
    );
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaSchedule {
    Constant(f64),
    /// `1 / visit_count(s, a)`, the classic almost-sure convergence regime.
    Harmonic,
}

#[derive(Debug, Clone)]
pub struct TabularConfig {
    pub episodes: usize,
    pub episode_len: usize,
    pub epsilon: f64,
    pub alpha: AlphaSchedule,
    pub seed: u64,
}

impl Default for TabularConfig {
    fn default() -> Self {
        Self {
            episodes: 10_000,
            episode_len: 16,
            epsilon: 0.2,
            alpha: AlphaSchedule::Constant(0.1),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TabularRun {
    pub q: QTable,
    pub oracle: QTable,
    /// Max-norm distance to the oracle after each episode.
    pub distance_to_oracle: Vec<f64>,
}

/// Epsilon-greedy tabular Q-learning against the value-iteration oracle.
///
/// Episodes start from a uniformly random state and run a fixed number of
/// steps (the bundled MDPs are continuing). With `episodes == 0` the zero
/// table comes back untouched.
pub fn train_tabular(mdp: &FiniteMdp, config: &TabularConfig) -> TabularRun {
    let oracle = value_iteration(mdp, 1e-10);
    let mut q = QTable::zeros(mdp.n_states(), mdp.n_actions());
    let mut visits = vec![vec![0u64; mdp.n_actions()]; mdp.n_states()];
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut distance_to_oracle = Vec::with_capacity(config.episodes);
    for _ in 0..config.episodes {
        let mut state = rng.gen_range(0..mdp.n_states());
        for _ in 0..config.episode_len {
            let action = if rng.gen::<f64>() < config.epsilon {
                let legal: Vec<usize> = mdp.legal_actions(state).collect();
                legal[rng.gen_range(0..legal.len())]
            } else {
                q.argmax_legal(mdp, state)
            };
            let (next, reward) = mdp.sample_next(state, action, &mut rng);
            visits[state][action] += 1;
            let alpha = match config.alpha {
                AlphaSchedule::Constant(a) => a,
                AlphaSchedule::Harmonic => 1.0 / visits[state][action] as f64,
            };
            q_learning_step(
                &mut q,
                mdp,
                state,
                action,
                reward,
                Some(next),
                alpha,
                mdp.discount(),
            );
            state = next;
        }
        distance_to_oracle.push(q.max_norm_distance(&oracle, mdp));
    }
    TabularRun {
        q,
        oracle,
        distance_to_oracle,
    }
}

/// The three toy MDPs shipped with the crate, by name.
pub fn bundled_toy_mdps() -> Vec<(&'static str, FiniteMdp)> {
    [
        ("two_state", include_str!("../fixtures/two_state.mdp")),
        ("one_state", include_str!("../fixtures/one_state.mdp")),
        (
            "slippery_chain",
            include_str!("../fixtures/slippery_chain.mdp"),
        ),
    ]
    .into_iter()
    .map(|(name, text)| {
        (
            name,
            FiniteMdp::from_text(text).expect("bundled MDP must parse"),
        )
    })
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state() -> FiniteMdp {
        FiniteMdp::from_text(include_str!("../fixtures/two_state.mdp")).unwrap()
    }

    #[test]
    fn zero_discount_reduces_to_expected_immediate_reward() {
        let text = "discount 0.0\n0 0 0 0.5 2.0\n0 0 1 0.5 4.0\n1 0 1 1.0 0.0\n";
        let mdp = FiniteMdp::from_text(text).unwrap();
        let q = value_iteration(&mdp, 1e-12);
        assert_eq!(q.get(0, 0), 0.5 * 2.0 + 0.5 * 4.0);
        assert_eq!(q.get(1, 0), 0.0);
    }

    #[test]
    fn two_state_loop_matches_geometric_series() {
        let q = value_iteration(&two_state(), 1e-12);
        // Going from s0 earns 1 every other step: 1 / (1 - 0.25) = 4/3.
        assert!((q.get(0, 0) - 4.0 / 3.0).abs() < 1e-9);
        assert!((q.get(0, 1) - 2.0 / 3.0).abs() < 1e-9);
        assert!((q.get(1, 0) - 2.0 / 3.0).abs() < 1e-9);
        assert!((q.get(1, 1) - 1.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn zero_rewards_stay_zero() {
        let text = "discount 0.9\n0 0 1 1.0 0.0\n1 0 0 1.0 0.0\n";
        let mdp = FiniteMdp::from_text(text).unwrap();
        let q = value_iteration(&mdp, 1e-12);
        assert_eq!(q.get(0, 0), 0.0);
        assert_eq!(q.get(1, 0), 0.0);
    }

    #[test]
    fn value_iteration_output_is_a_fixed_point() {
        for (_, mdp) in bundled_toy_mdps() {
            let q = value_iteration(&mdp, 1e-9);
            assert!(bellman_residual(&mdp, &q) <= 1e-9);
        }
    }

    #[test]
    fn reward_scaling_scales_values_and_keeps_argmax() {
        for (_, mdp) in bundled_toy_mdps() {
            let factor = 3.75;
            let q = value_iteration(&mdp, 1e-12);
            let q_scaled = value_iteration(&mdp.scale_rewards(factor), 1e-12 * factor);
            for s in 0..mdp.n_states() {
                for a in mdp.legal_actions(s) {
                    assert!((q_scaled.get(s, a) - factor * q.get(s, a)).abs() < 1e-8);
                }
                assert_eq!(q_scaled.argmax_legal(&mdp, s), q.argmax_legal(&mdp, s));
            }
        }
    }

    #[test]
    fn q_step_full_overwrite_with_terminal_next() {
        let mdp = two_state();
        let mut q = QTable::zeros(2, 2);
        q_learning_step(&mut q, &mdp, 0, 0, 5.0, None, 1.0, 0.9);
        assert_eq!(q.get(0, 0), 5.0);
        assert_eq!(q.get(0, 1), 0.0);
    }

    #[test]
    fn q_step_zero_alpha_changes_nothing() {
        let mdp = two_state();
        let mut q = QTable::zeros(2, 2);
        q.set(0, 0, 2.0);
        q_learning_step(&mut q, &mdp, 0, 0, 1.0, Some(1), 0.0, 0.5);
        assert_eq!(q.get(0, 0), 2.0);
    }

    #[test]
    fn q_step_matches_update_rule_by_hand() {
        let mdp = two_state();
        let mut q = QTable::zeros(2, 2);
        q.set(0, 0, 2.0);
        q.set(1, 0, 4.0);
        q.set(1, 1, 1.0);
        // 2 + 0.5 * (1 + 0.5 * 4 - 2) = 2.5
        q_learning_step(&mut q, &mdp, 0, 0, 1.0, Some(1), 0.5, 0.5);
        assert_eq!(q.get(0, 0), 2.5);
        assert_eq!(q.get(1, 0), 4.0);
    }

    #[test]
    fn tabular_training_reaches_oracle_on_two_state() {
        let mdp = two_state();
        let run = train_tabular(
            &mdp,
            &TabularConfig {
                episodes: 10_000,
                epsilon: 0.2,
                alpha: AlphaSchedule::Constant(0.1),
                seed: 11,
                ..TabularConfig::default()
            },
        );
        assert!(*run.distance_to_oracle.last().unwrap() < 0.05);
    }

    #[test]
    fn tabular_training_zero_episodes_returns_zero_table() {
        let mdp = two_state();
        let run = train_tabular(
            &mdp,
            &TabularConfig {
                episodes: 0,
                ..TabularConfig::default()
            },
        );
        assert_eq!(run.q, QTable::zeros(2, 2));
        assert!(run.distance_to_oracle.is_empty());
    }

    #[test]
    fn one_state_converges_to_closed_form() {
        let mdp = FiniteMdp::from_text(include_str!("../fixtures/one_state.mdp")).unwrap();
        let run = train_tabular(
            &mdp,
            &TabularConfig {
                episodes: 2_000,
                alpha: AlphaSchedule::Harmonic,
                seed: 3,
                ..TabularConfig::default()
            },
        );
        assert!((run.q.get(0, 0) - 2.0).abs() < 0.01);
    }

    #[test]
    fn windowed_distance_is_nonincreasing_after_warmup() {
        for (name, mdp) in bundled_toy_mdps() {
            let run = train_tabular(
                &mdp,
                &TabularConfig {
                    episodes: 10_000,
                    epsilon: 0.2,
                    alpha: AlphaSchedule::Harmonic,
                    seed: 29,
                    ..TabularConfig::default()
                },
            );
            let windows: Vec<f64> = run
                .distance_to_oracle
                .chunks(100)
                .map(|w| w.iter().sum::<f64>() / w.len() as f64)
                .collect();
            for (i, pair) in windows.windows(2).enumerate() {
                if i + 1 < 10 {
                    continue;
                }
                assert!(
                    pair[1] <= pair[0] + 1e-12,
                    "{name}: window {} rose {} -> {}",
                    i + 1,
                    pair[0],
                    pair[1]
                );
            }
        }
    }

    #[test]
    fn parser_rejects_bad_rows() {
        assert!(matches!(
            FiniteMdp::from_text("discount 0.5\n0 0 1 0.5 1.0\n"),
            Err(MdpError::BadRowSum { .. })
        ));
        assert!(matches!(
            FiniteMdp::from_text("0 0 0 1.0 1.0\n"),
            Err(MdpError::Parse { .. })
        ));
        assert!(matches!(
            FiniteMdp::from_text("discount 1.0\n0 0 0 1.0 1.0\n"),
            Err(MdpError::BadDiscount(_))
        ));
        assert!(matches!(
            FiniteMdp::from_text("discount 0.5\n0 0 1 1.0 1.0\n"),
            Err(MdpError::DeadState(1))
        ));
    }

    #[test]
    fn bundled_toys_parse_and_validate() {
        let toys = bundled_toy_mdps();
        assert_eq!(toys.len(), 3);
        for (name, mdp) in &toys {
            assert!(mdp.n_states() >= 1, "{name} empty");
        }
    }
}
