//! Markov-property probe over recorded episodes.
//!
//! The environment injects hall calls from the time list independently of
//! the chosen action, so two visits to the same (observation, action) pair
//! can land in different successor observations. The probe groups recorded
//! steps by (observation, action) and reports every group whose successors
//! disagree, along with the exogenous arrivals that happened inside each
//! step.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::event::Event;
use super::state::{Action, Observation};

/// One recorded decision step of an episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    /// Clock after the step completed.
    pub clock_s: f64,
    /// Observation the controller acted on.
    pub obs: Observation,
    pub action: Action,
    /// Observation after the step (arrivals drained).
    pub next_obs: Observation,
    pub arrivals: Vec<Event>,
    pub reward: f64,
    pub boarded: usize,
    pub delivered: usize,
    pub waiting: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovOccurrence {
    pub step: usize,
    pub next_obs: Observation,
    pub arrivals: Vec<Event>,
}

/// A (observation, action) pair observed with at least two distinct
/// successor observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovViolation {
    pub obs: Observation,
    pub action: Action,
    pub occurrences: Vec<MarkovOccurrence>,
}

/// Group the trace by (observation, action) and report every group whose
/// successor observations differ. Groups come back ordered by their first
/// occurrence in the trace.
pub fn markov_probe(trace: &[TraceStep]) -> Vec<MarkovViolation> {
    let mut order: Vec<(Observation, Action)> = Vec::new();
    let mut groups: HashMap<(Observation, Action), Vec<&TraceStep>> = HashMap::new();
    for step in trace {
        let key = (step.obs.clone(), step.action);
        let entry = groups.entry(key.clone()).or_default();
        if entry.is_empty() {
            order.push(key);
        }
        entry.push(step);
    }
    let mut violations = Vec::new();
    for key in order {
        let members = &groups[&key];
        if members.len() < 2 {
            continue;
        }
        let first = &members[0].next_obs;
        if members.iter().any(|s| &s.next_obs != first) {
            violations.push(MarkovViolation {
                obs: key.0,
                action: key.1,
                occurrences: members
                    .iter()
                    .map(|s| MarkovOccurrence {
                        step: s.step,
                        next_obs: s.next_obs.clone(),
                        arrivals: s.arrivals.clone(),
                    })
                    .collect(),
            });
        }
    }
    violations
}
