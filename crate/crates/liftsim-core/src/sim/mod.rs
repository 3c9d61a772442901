//! Event-driven single-elevator building environment.
//!
//! A day tape of hall calls becomes a [`TimeList`] of future arrival events;
//! [`SimEnv`] owns the time list plus the [`BuildingState`] and advances both
//! when a controller applies an [`Action`]. Exogenous arrivals are drained
//! into the state whenever the clock passes them.

mod env;
mod event;
mod probe;
mod state;
mod trace;

pub use env::{init_state, SimEnv, SimError, StepOutcome};
pub use event::{Event, EventKind, TimeList};
pub use probe::{markov_probe, MarkovOccurrence, MarkovViolation, TraceStep};
pub use state::{
    Action, ActionSet, BuildingConfig, BuildingState, Direction, ExtendedObservation, Location,
    Observation, Passenger,
};
pub use trace::write_trace_csv;
