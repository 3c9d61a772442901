//! Single-elevator building simulator with synthetic workday traffic, a
//! hard-coded baseline controller, finite-MDP reference solvers, and a
//! from-scratch deep Q-learning stack.
//!
//! Module map:
//! - [`traffic`]: three-peak hall-call generation and the tape CSV format
//! - [`sim`]: the event-driven building environment (time list, state, actions)
//! - [`naive`]: the two-phase closest-call baseline controller
//! - [`mdp`]: finite-MDP value iteration and tabular Q-learning
//! - [`nn`]: minimal dense feedforward network with exact backprop and
//!   JSON checkpointing
//! - [`dqn`]: state encoding, replay memory, TD targets, training, inference
//! - [`harness`]: episode drivers, metrics, behavior cloning, run configuration

pub mod dqn;
pub mod harness;
pub mod mdp;
pub mod naive;
pub mod nn;
pub mod sim;
pub mod traffic;

pub use harness::MetricsReport;
pub use sim::{Action, BuildingConfig, BuildingState, Observation, SimEnv, StepOutcome};
pub use traffic::{TrafficProfile, TrafficRecord, TrafficTable};
