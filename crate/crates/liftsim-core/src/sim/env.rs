//! The environment: couples a [`BuildingState`] to its [`TimeList`] and
//! advances both under controller actions.

use thiserror::Error;

use crate::traffic::TrafficTable;

use super::event::{Event, EventKind, TimeList};
use super::state::{
    Action, ActionSet, BuildingConfig, BuildingState, Direction, Location, Observation, Passenger,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("illegal action {action} at floor {floor}")]
    IllegalAction { action: Action, floor: usize },
    #[error("record {index}: floor {floor} outside [1, {floor_count}]")]
    FloorOutOfRange {
        index: usize,
        floor: usize,
        floor_count: usize,
    },
    #[error("invalid building config: {0}")]
    InvalidConfig(String),
}

/// What one applied action did to the world.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub elapsed_s: f64,
    pub boarded: usize,
    pub delivered: usize,
    /// Hall calls drained from the time list while the step elapsed.
    pub arrivals: Vec<Event>,
    /// True when the episode cannot continue: the day is complete, or the
    /// controller idled with no future events left.
    pub terminal: bool,
}

/// Build the initial state and time list from a day tape.
///
/// The clock starts at the configured morning instant with the car parked at
/// the start floor, every button dark, and one arrival event queued per
/// record. Nothing is drained yet, even records at or before the start
/// clock; see [`SimEnv::catch_up`].
pub fn init_state(
    table: &TrafficTable,
    config: &BuildingConfig,
) -> Result<(BuildingState, TimeList), SimError> {
    config.validate().map_err(SimError::InvalidConfig)?;
    let mut timelist = TimeList::new();
    for (index, record) in table.iter().enumerate() {
        for floor in [record.start_floor, record.dest_floor] {
            if floor < 1 || floor > config.floor_count {
                return Err(SimError::FloorOutOfRange {
                    index,
                    floor,
                    floor_count: config.floor_count,
                });
            }
        }
        timelist.push(Event {
            time_s: record.time_s,
            kind: EventKind::HallCallArrival {
                start_floor: record.start_floor,
                dest_floor: record.dest_floor,
                weight_kg: record.weight_kg,
                passenger_id: index,
            },
        });
    }
    Ok((BuildingState::new(config), timelist))
}

/// A single-elevator episode in progress. One instance owns all its state;
/// independent instances can run on different threads.
#[derive(Debug, Clone)]
pub struct SimEnv {
    state: BuildingState,
    timelist: TimeList,
    total_events: usize,
}

impl SimEnv {
    /// Initialize from a tape and immediately drain events due at or before
    /// the start clock, so the first decision sees them.
    pub fn from_table(table: &TrafficTable, config: &BuildingConfig) -> Result<Self, SimError> {
        let (state, timelist) = init_state(table, config)?;
        let mut env = Self {
            state,
            timelist,
            total_events: table.len(),
        };
        env.catch_up();
        Ok(env)
    }

    pub fn state(&self) -> &BuildingState {
        &self.state
    }

    pub fn time_list(&self) -> &TimeList {
        &self.timelist
    }

    pub fn total_events(&self) -> usize {
        self.total_events
    }

    pub fn clock_s(&self) -> f64 {
        self.state.clock_s
    }

    pub fn observation(&self) -> Observation {
        self.state.observation()
    }

    pub fn legal_actions(&self) -> ActionSet {
        self.state.legal_actions()
    }

    /// The day is done: no future events and nobody left in a hall or the car.
    pub fn is_terminal(&self) -> bool {
        self.timelist.is_empty() && self.state.waiting_count() == 0
    }

    /// Every passenger seen so far, waiting or delivered.
    pub fn ledger(&self) -> impl Iterator<Item = &Passenger> {
        let halls = (1..=self.state.floor_count).flat_map(move |f| {
            self.state
                .hall_queue(f, Direction::Up)
                .iter()
                .chain(self.state.hall_queue(f, Direction::Down).iter())
        });
        halls
            .chain(self.state.riders().iter())
            .chain(self.state.delivered().iter())
    }

    /// Drain every event due at or before the current clock into the state.
    pub fn catch_up(&mut self) -> Vec<Event> {
        let mut drained = Vec::new();
        while self
            .timelist
            .peek_time()
            .map_or(false, |t| t <= self.state.clock_s)
        {
            let event = self.timelist.pop().expect("peeked entry exists");
            let EventKind::HallCallArrival {
                start_floor,
                dest_floor,
                weight_kg,
                passenger_id,
            } = event.kind;
            self.state.arrive(Passenger {
                id: passenger_id,
                call_time_s: event.time_s,
                board_time_s: None,
                delivery_time_s: None,
                start_floor,
                dest_floor,
                weight_kg,
                location: Location::Hall,
            });
            drained.push(event);
        }
        drained
    }

    /// Apply one action.
    ///
    /// Moves shift the car one floor and cost the travel time. A door action
    /// costs the door cycle, then drops off every rider bound here, then
    /// boards same-direction waiters FIFO while they fit. Idle jumps the
    /// clock to the next event, or reports a terminal outcome if there is
    /// none. Events that come due while the step elapses are drained before
    /// returning.
    pub fn apply_action(&mut self, action: Action) -> Result<StepOutcome, SimError> {
        if !self.state.legal_actions().contains(action) {
            return Err(SimError::IllegalAction {
                action,
                floor: self.state.current_floor,
            });
        }
        let clock_before = self.state.clock_s;
        let mut boarded = 0;
        let mut delivered = 0;
        match action {
            Action::Idle => match self.timelist.peek_time() {
                None => {
                    return Ok(StepOutcome {
                        elapsed_s: 0.0,
                        boarded: 0,
                        delivered: 0,
                        arrivals: Vec::new(),
                        terminal: true,
                    });
                }
                Some(t) => {
                    debug_assert!(t > self.state.clock_s, "due event not drained");
                    self.state.clock_s = self.state.clock_s.max(t);
                }
            },
            Action::MoveUp => {
                self.state.current_floor += 1;
                self.state.clock_s += self.state.floor_travel_s;
            }
            Action::MoveDown => {
                self.state.current_floor -= 1;
                self.state.clock_s += self.state.floor_travel_s;
            }
            Action::OpenCloseUp | Action::OpenCloseDown => {
                let direction = if action == Action::OpenCloseUp {
                    Direction::Up
                } else {
                    Direction::Down
                };
                self.state.clock_s += self.state.door_cycle_s;
                let now = self.state.clock_s;
                delivered = self.state.disembark_here(now);
                boarded = self.state.board_here(direction, now);
            }
        }
        let arrivals = self.catch_up();
        debug_assert!(self.state.check_invariants().is_ok());
        Ok(StepOutcome {
            elapsed_s: self.state.clock_s - clock_before,
            boarded,
            delivered,
            arrivals,
            terminal: self.is_terminal(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traffic::TrafficRecord;

    fn table(records: Vec<TrafficRecord>) -> TrafficTable {
        TrafficTable::from_records(records)
    }

    fn record(time_s: f64, start: usize, dest: usize, weight: f64) -> TrafficRecord {
        TrafficRecord {
            time_s,
            start_floor: start,
            dest_floor: dest,
            weight_kg: weight,
        }
    }

    fn sample_rows() -> TrafficTable {
        table(vec![
            record(27_000.0, 1, 2, 77.9),
            record(27_042.9, 1, 7, 78.3),
            record(60_754.1, 8, 1, 101.6),
        ])
    }

    #[test]
    fn init_starts_parked_at_lobby_with_all_events_queued() {
        let (state, timelist) = init_state(&sample_rows(), &BuildingConfig::default()).unwrap();
        assert_eq!(state.clock_s, 27_000.0);
        assert_eq!(state.current_floor, 1);
        assert!(state.riders().is_empty());
        assert!(state.up_buttons().iter().all(|&b| !b));
        assert_eq!(timelist.len(), 3);
        assert_eq!(timelist.peek_time(), Some(27_000.0));
    }

    #[test]
    fn init_empty_table_is_terminal_immediately() {
        let env = SimEnv::from_table(&table(vec![]), &BuildingConfig::default()).unwrap();
        assert!(env.is_terminal());
    }

    #[test]
    fn init_rejects_out_of_range_floor() {
        let t = table(vec![record(0.0, 1, 9, 70.0)]);
        assert!(matches!(
            init_state(&t, &BuildingConfig::default()),
            Err(SimError::FloorOutOfRange { floor: 9, .. })
        ));
    }

    #[test]
    fn three_moves_up_take_fifteen_seconds() {
        let t = table(vec![record(27_000.0, 1, 5, 70.0)]);
        let mut env = SimEnv::from_table(&t, &BuildingConfig::default()).unwrap();
        for _ in 0..3 {
            env.apply_action(Action::MoveUp).unwrap();
        }
        assert_eq!(env.state().current_floor, 4);
        assert_eq!(env.clock_s(), 27_015.0);
    }

    #[test]
    fn open_close_boards_one_waiter() {
        let t = table(vec![record(27_000.0, 1, 5, 70.0)]);
        let mut env = SimEnv::from_table(&t, &BuildingConfig::default()).unwrap();
        assert!(env.state().up_buttons()[0]);
        let outcome = env.apply_action(Action::OpenCloseUp).unwrap();
        assert_eq!(outcome.boarded, 1);
        assert_eq!(outcome.elapsed_s, 15.0);
        assert_eq!(env.state().riders().len(), 1);
        assert!(!env.state().up_buttons()[0]);
        assert!(env.state().car_buttons()[4]);
    }

    #[test]
    fn idle_with_empty_timelist_is_terminal_and_leaves_state_alone() {
        let mut env = SimEnv::from_table(&table(vec![]), &BuildingConfig::default()).unwrap();
        let before = env.clock_s();
        let outcome = env.apply_action(Action::Idle).unwrap();
        assert!(outcome.terminal);
        assert_eq!(outcome.elapsed_s, 0.0);
        assert_eq!(env.clock_s(), before);
    }

    #[test]
    fn idle_fast_forwards_to_next_event() {
        let t = table(vec![record(30_000.0, 3, 1, 70.0)]);
        let mut env = SimEnv::from_table(&t, &BuildingConfig::default()).unwrap();
        let outcome = env.apply_action(Action::Idle).unwrap();
        assert_eq!(env.clock_s(), 30_000.0);
        assert_eq!(outcome.elapsed_s, 3_000.0);
        assert_eq!(outcome.arrivals.len(), 1);
        assert!(env.state().down_buttons()[2]);
    }

    #[test]
    fn undelivered_rider_keeps_episode_alive() {
        let t = table(vec![record(27_000.0, 1, 5, 70.0)]);
        let mut env = SimEnv::from_table(&t, &BuildingConfig::default()).unwrap();
        env.apply_action(Action::OpenCloseUp).unwrap();
        assert!(env.time_list().is_empty());
        assert!(!env.is_terminal());
    }

    #[test]
    fn boundary_moves_are_illegal() {
        let t = table(vec![record(27_000.0, 1, 2, 70.0)]);
        let mut env = SimEnv::from_table(&t, &BuildingConfig::default()).unwrap();
        assert!(!env.legal_actions().contains(Action::MoveDown));
        assert!(matches!(
            env.apply_action(Action::MoveDown),
            Err(SimError::IllegalAction { .. })
        ));
        for _ in 0..7 {
            env.apply_action(Action::MoveUp).unwrap();
        }
        assert_eq!(env.state().current_floor, 8);
        assert!(!env.legal_actions().contains(Action::MoveUp));
    }

    #[test]
    fn doors_need_work_to_be_legal() {
        let t = table(vec![record(27_000.0, 1, 2, 70.0)]);
        let env = SimEnv::from_table(&t, &BuildingConfig::default()).unwrap();
        let legal = env.legal_actions();
        // An up call waits at the current floor.
        assert!(legal.contains(Action::OpenCloseUp));
        assert!(!legal.contains(Action::OpenCloseDown));
    }

    #[test]
    fn quiet_lobby_offers_only_idle_and_move_up() {
        let t = table(vec![record(50_000.0, 2, 1, 70.0)]);
        let env = SimEnv::from_table(&t, &BuildingConfig::default()).unwrap();
        let legal: Vec<Action> = env.legal_actions().iter().collect();
        assert_eq!(legal, vec![Action::Idle, Action::MoveUp]);
    }

    #[test]
    fn unconstrained_doors_allow_empty_cycles() {
        let cfg = BuildingConfig {
            unconstrained_doors: true,
            ..BuildingConfig::default()
        };
        let mut env = SimEnv::from_table(&table(vec![record(50_000.0, 2, 1, 70.0)]), &cfg).unwrap();
        let outcome = env.apply_action(Action::OpenCloseUp).unwrap();
        assert_eq!(outcome.boarded + outcome.delivered, 0);
        assert_eq!(outcome.elapsed_s, 15.0);
    }

    #[test]
    fn full_car_blocks_door_action_without_disembark() {
        let cfg = BuildingConfig {
            capacity_kg: 150.0,
            ..BuildingConfig::default()
        };
        let t = table(vec![
            record(27_000.0, 1, 5, 100.0),
            record(27_000.0, 1, 6, 90.0),
        ]);
        let mut env = SimEnv::from_table(&t, &cfg).unwrap();
        let outcome = env.apply_action(Action::OpenCloseUp).unwrap();
        // Only the first passenger fits; the second keeps the button lit.
        assert_eq!(outcome.boarded, 1);
        assert!(env.state().up_buttons()[0]);
        assert!(!env.legal_actions().contains(Action::OpenCloseUp));
    }

    #[test]
    fn boarding_is_fifo_and_directional() {
        let t = table(vec![
            record(27_000.0, 3, 1, 60.0),
            record(27_005.0, 3, 8, 61.0),
            record(27_010.0, 3, 7, 62.0),
        ]);
        let mut env = SimEnv::from_table(&t, &BuildingConfig::default()).unwrap();
        env.apply_action(Action::MoveUp).unwrap();
        env.apply_action(Action::MoveUp).unwrap();
        // All three calls are in by 27010; open for up: board the two
        // up-goers in call order, leave the down-goer waiting.
        let outcome = env.apply_action(Action::OpenCloseUp).unwrap();
        assert_eq!(outcome.boarded, 2);
        assert_eq!(env.state().riders()[0].dest_floor, 8);
        assert_eq!(env.state().riders()[1].dest_floor, 7);
        assert!(env.state().down_buttons()[2]);
        assert!(!env.state().up_buttons()[2]);
    }

    #[test]
    fn delivery_records_times_and_weight() {
        let t = table(vec![record(27_000.0, 1, 3, 80.0)]);
        let mut env = SimEnv::from_table(&t, &BuildingConfig::default()).unwrap();
        env.apply_action(Action::OpenCloseUp).unwrap();
        env.apply_action(Action::MoveUp).unwrap();
        env.apply_action(Action::MoveUp).unwrap();
        let outcome = env.apply_action(Action::OpenCloseUp).unwrap();
        assert_eq!(outcome.delivered, 1);
        assert!(outcome.terminal);
        assert!(env.is_terminal());
        let p = &env.state().delivered()[0];
        assert_eq!(p.board_time_s, Some(27_015.0));
        assert_eq!(p.delivery_time_s, Some(27_040.0));
        assert_eq!(p.total_time_s(), Some(40.0));
        assert_eq!(env.state().current_weight_kg, 0.0);
    }

    #[test]
    fn events_during_door_cycle_drain_after_boarding() {
        // Second call lands at 27010, inside the first door cycle ending at
        // 27015: it must be drained into the hall, not boarded.
        let t = table(vec![
            record(27_000.0, 1, 3, 70.0),
            record(27_010.0, 1, 4, 71.0),
        ]);
        let mut env = SimEnv::from_table(&t, &BuildingConfig::default()).unwrap();
        let outcome = env.apply_action(Action::OpenCloseUp).unwrap();
        assert_eq!(outcome.boarded, 1);
        assert_eq!(outcome.arrivals.len(), 1);
        assert_eq!(env.state().riders().len(), 1);
        assert_eq!(env.state().hall_queue(1, Direction::Up).len(), 1);
        assert!(env.state().up_buttons()[0]);
    }
}
