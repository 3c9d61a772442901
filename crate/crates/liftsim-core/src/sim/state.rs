//! Building state: elevator position and load, per-floor buttons, hall
//! queues, riders, and the derived observation views.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Up,
    Down,
}

impl Direction {
    pub fn of_trip(start_floor: usize, dest_floor: usize) -> Direction {
        if dest_floor > start_floor {
            Direction::Up
        } else {
            Direction::Down
        }
    }

    pub(crate) fn index(self) -> usize {
        match self {
            Direction::Up => 0,
            Direction::Down => 1,
        }
    }
}

/// The five elevator commands, with the stable codes used by the action
/// decoder: 0 Idle, 1 OpenCloseUp, 2 OpenCloseDown, 3 MoveUp, 4 MoveDown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Idle,
    OpenCloseUp,
    OpenCloseDown,
    MoveUp,
    MoveDown,
}

impl Action {
    pub const COUNT: usize = 5;

    pub const ALL: [Action; Action::COUNT] = [
        Action::Idle,
        Action::OpenCloseUp,
        Action::OpenCloseDown,
        Action::MoveUp,
        Action::MoveDown,
    ];

    pub fn code(self) -> u8 {
        match self {
            Action::Idle => 0,
            Action::OpenCloseUp => 1,
            Action::OpenCloseDown => 2,
            Action::MoveUp => 3,
            Action::MoveDown => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<Action> {
        Action::ALL.get(code as usize).copied()
    }

    pub fn open_for(direction: Direction) -> Action {
        match direction {
            Direction::Up => Action::OpenCloseUp,
            Direction::Down => Action::OpenCloseDown,
        }
    }

    pub fn move_toward(direction: Direction) -> Action {
        match direction {
            Direction::Up => Action::MoveUp,
            Direction::Down => Action::MoveDown,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Action::Idle => "Idle",
            Action::OpenCloseUp => "OpenCloseUp",
            Action::OpenCloseDown => "OpenCloseDown",
            Action::MoveUp => "MoveUp",
            Action::MoveDown => "MoveDown",
        };
        f.write_str(name)
    }
}

/// Set of currently legal actions, indexed by action code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ActionSet {
    mask: [bool; Action::COUNT],
}

impl ActionSet {
    pub fn insert(&mut self, action: Action) {
        self.mask[action.code() as usize] = true;
    }

    pub fn contains(self, action: Action) -> bool {
        self.mask[action.code() as usize]
    }

    pub fn contains_code(self, code: u8) -> bool {
        (code as usize) < Action::COUNT && self.mask[code as usize]
    }

    pub fn iter(self) -> impl Iterator<Item = Action> {
        Action::ALL.into_iter().filter(move |a| self.contains(*a))
    }

    pub fn len(self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(self) -> bool {
        self.mask.iter().all(|&b| !b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Location {
    Hall,
    Car,
    Delivered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Passenger {
    pub id: usize,
    pub call_time_s: f64,
    pub board_time_s: Option<f64>,
    pub delivery_time_s: Option<f64>,
    pub start_floor: usize,
    pub dest_floor: usize,
    pub weight_kg: f64,
    pub location: Location,
}

impl Passenger {
    pub fn direction(&self) -> Direction {
        Direction::of_trip(self.start_floor, self.dest_floor)
    }

    /// Call-to-delivery duration; `None` until delivered.
    pub fn total_time_s(&self) -> Option<f64> {
        self.delivery_time_s.map(|d| d - self.call_time_s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildingConfig {
    pub floor_count: usize,
    pub capacity_kg: f64,
    pub door_cycle_s: f64,
    pub floor_travel_s: f64,
    pub start_clock_s: f64,
    pub start_floor: usize,
    /// Allow door actions that neither drop anyone off nor pick anyone up.
    /// Off by default; door actions must accomplish something.
    pub unconstrained_doors: bool,
}

impl Default for BuildingConfig {
    fn default() -> Self {
        Self {
            floor_count: 8,
            capacity_kg: 1_000.0,
            door_cycle_s: 15.0,
            floor_travel_s: 5.0,
            start_clock_s: 27_000.0,
            start_floor: 1,
            unconstrained_doors: false,
        }
    }
}

impl BuildingConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.floor_count < 2 {
            return Err(format!("floor_count must be at least 2, got {}", self.floor_count));
        }
        if !(self.capacity_kg > 0.0) {
            return Err(format!("capacity_kg must be positive, got {}", self.capacity_kg));
        }
        if !(self.door_cycle_s > 0.0) || !(self.floor_travel_s > 0.0) {
            return Err("door_cycle_s and floor_travel_s must be positive".into());
        }
        if !(self.start_clock_s >= 0.0 && self.start_clock_s.is_finite()) {
            return Err(format!("start_clock_s must be nonnegative, got {}", self.start_clock_s));
        }
        if self.start_floor < 1 || self.start_floor > self.floor_count {
            return Err(format!(
                "start_floor {} outside [1, {}]",
                self.start_floor, self.floor_count
            ));
        }
        Ok(())
    }
}

/// What a controller sees: the three button banks plus the car position.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Observation {
    pub up_buttons: Vec<bool>,
    pub down_buttons: Vec<bool>,
    pub car_buttons: Vec<bool>,
    pub current_floor: usize,
}

/// [`Observation`] plus the two load scalars the state encoder needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedObservation {
    pub basic: Observation,
    pub capacity_kg: f64,
    pub current_weight_kg: f64,
}

#[derive(Debug, Clone)]
pub struct BuildingState {
    pub clock_s: f64,
    pub current_floor: usize,
    pub floor_count: usize,
    pub capacity_kg: f64,
    pub current_weight_kg: f64,
    pub door_cycle_s: f64,
    pub floor_travel_s: f64,
    pub unconstrained_doors: bool,
    up_buttons: Vec<bool>,
    down_buttons: Vec<bool>,
    car_buttons: Vec<bool>,
    // Per floor: [up queue, down queue], FIFO by call time.
    hall_queues: Vec<[VecDeque<Passenger>; 2]>,
    riders: Vec<Passenger>,
    delivered: Vec<Passenger>,
}

impl BuildingState {
    pub fn new(config: &BuildingConfig) -> Self {
        let n = config.floor_count;
        Self {
            clock_s: config.start_clock_s,
            current_floor: config.start_floor,
            floor_count: n,
            capacity_kg: config.capacity_kg,
            current_weight_kg: 0.0,
            door_cycle_s: config.door_cycle_s,
            floor_travel_s: config.floor_travel_s,
            unconstrained_doors: config.unconstrained_doors,
            up_buttons: vec![false; n],
            down_buttons: vec![false; n],
            car_buttons: vec![false; n],
            hall_queues: (0..n).map(|_| [VecDeque::new(), VecDeque::new()]).collect(),
            riders: Vec::new(),
            delivered: Vec::new(),
        }
    }

    pub fn up_buttons(&self) -> &[bool] {
        &self.up_buttons
    }

    pub fn down_buttons(&self) -> &[bool] {
        &self.down_buttons
    }

    pub fn car_buttons(&self) -> &[bool] {
        &self.car_buttons
    }

    pub fn hall_queue(&self, floor: usize, direction: Direction) -> &VecDeque<Passenger> {
        &self.hall_queues[floor - 1][direction.index()]
    }

    pub fn riders(&self) -> &[Passenger] {
        &self.riders
    }

    pub fn delivered(&self) -> &[Passenger] {
        &self.delivered
    }

    /// Passengers still waiting in a hall.
    pub fn hall_count(&self) -> usize {
        self.hall_queues.iter().map(|q| q[0].len() + q[1].len()).sum()
    }

    /// Passengers not yet at their destination: halls plus the car.
    pub fn waiting_count(&self) -> usize {
        self.hall_count() + self.riders.len()
    }

    pub fn observation(&self) -> Observation {
        Observation {
            up_buttons: self.up_buttons.clone(),
            down_buttons: self.down_buttons.clone(),
            car_buttons: self.car_buttons.clone(),
            current_floor: self.current_floor,
        }
    }

    pub fn extended_observation(&self) -> ExtendedObservation {
        ExtendedObservation {
            basic: self.observation(),
            capacity_kg: self.capacity_kg,
            current_weight_kg: self.current_weight_kg,
        }
    }

    /// Actions that may be taken in this state.
    ///
    /// Idle is always legal; moves stop at the boundary floors; a door action
    /// is legal when it accomplishes something, i.e. a rider gets off here or
    /// the first waiter in the matching queue fits in the remaining capacity.
    /// `unconstrained_doors` lifts the door restriction entirely.
    pub fn legal_actions(&self) -> ActionSet {
        let mut set = ActionSet::default();
        set.insert(Action::Idle);
        if self.current_floor < self.floor_count {
            set.insert(Action::MoveUp);
        }
        if self.current_floor > 1 {
            set.insert(Action::MoveDown);
        }
        if self.door_has_work(Direction::Up) {
            set.insert(Action::OpenCloseUp);
        }
        if self.door_has_work(Direction::Down) {
            set.insert(Action::OpenCloseDown);
        }
        set
    }

    fn door_has_work(&self, direction: Direction) -> bool {
        if self.unconstrained_doors {
            return true;
        }
        if self.car_buttons[self.current_floor - 1] {
            return true;
        }
        self.hall_queue(self.current_floor, direction)
            .front()
            .map_or(false, |p| {
                self.current_weight_kg + p.weight_kg <= self.capacity_kg
            })
    }

    /// A hall call materializes: queue the passenger and light the button.
    pub(crate) fn arrive(&mut self, passenger: Passenger) {
        debug_assert_eq!(passenger.location, Location::Hall);
        let floor = passenger.start_floor;
        let dir = passenger.direction();
        self.hall_queues[floor - 1][dir.index()].push_back(passenger);
        self.refresh_hall_button(floor, dir);
    }

    /// Drop off every rider whose destination is the current floor.
    pub(crate) fn disembark_here(&mut self, now_s: f64) -> usize {
        let floor = self.current_floor;
        let mut count = 0;
        let mut i = 0;
        while i < self.riders.len() {
            if self.riders[i].dest_floor == floor {
                let mut p = self.riders.remove(i);
                p.delivery_time_s = Some(now_s);
                p.location = Location::Delivered;
                self.current_weight_kg -= p.weight_kg;
                self.delivered.push(p);
                count += 1;
            } else {
                i += 1;
            }
        }
        if count > 0 {
            self.car_buttons[floor - 1] = false;
            if self.riders.is_empty() {
                self.current_weight_kg = 0.0;
            }
        }
        count
    }

    /// Board waiters headed `direction` from the current floor, in FIFO
    /// order, stopping at the first one who would overload the car.
    pub(crate) fn board_here(&mut self, direction: Direction, now_s: f64) -> usize {
        let floor = self.current_floor;
        let mut count = 0;
        loop {
            let queue = &mut self.hall_queues[floor - 1][direction.index()];
            let fits = queue
                .front()
                .map_or(false, |p| self.current_weight_kg + p.weight_kg <= self.capacity_kg);
            if !fits {
                break;
            }
            let mut p = queue.pop_front().expect("front checked above");
            p.board_time_s = Some(now_s);
            p.location = Location::Car;
            self.current_weight_kg += p.weight_kg;
            self.car_buttons[p.dest_floor - 1] = true;
            self.riders.push(p);
            count += 1;
        }
        self.refresh_hall_button(floor, direction);
        count
    }

    fn refresh_hall_button(&mut self, floor: usize, direction: Direction) {
        let lit = !self.hall_queues[floor - 1][direction.index()].is_empty();
        match direction {
            Direction::Up => self.up_buttons[floor - 1] = lit,
            Direction::Down => self.down_buttons[floor - 1] = lit,
        }
    }

    /// Structural invariant check used by tests and debug assertions.
    pub fn check_invariants(&self) -> Result<(), String> {
        let rider_weight: f64 = self.riders.iter().map(|p| p.weight_kg).sum();
        if (rider_weight - self.current_weight_kg).abs() > 1e-9 {
            return Err(format!(
                "weight out of sync: riders sum {rider_weight}, tracked {}",
                self.current_weight_kg
            ));
        }
        if self.current_weight_kg > self.capacity_kg {
            return Err(format!(
                "overloaded: {} > capacity {}",
                self.current_weight_kg, self.capacity_kg
            ));
        }
        for f in 1..=self.floor_count {
            let up_lit = self.up_buttons[f - 1];
            let down_lit = self.down_buttons[f - 1];
            if up_lit != !self.hall_queue(f, Direction::Up).is_empty() {
                return Err(format!("up button at floor {f} out of sync"));
            }
            if down_lit != !self.hall_queue(f, Direction::Down).is_empty() {
                return Err(format!("down button at floor {f} out of sync"));
            }
            let car_lit = self.car_buttons[f - 1];
            if car_lit != self.riders.iter().any(|p| p.dest_floor == f) {
                return Err(format!("car button at floor {f} out of sync"));
            }
            for dir in [Direction::Up, Direction::Down] {
                for p in self.hall_queue(f, dir) {
                    if p.direction() != dir || p.start_floor != f {
                        return Err(format!("passenger {} in wrong queue", p.id));
                    }
                }
            }
        }
        if self.up_buttons[self.floor_count - 1] {
            return Err("up button lit at the top floor".into());
        }
        if self.down_buttons[0] {
            return Err("down button lit at the ground floor".into());
        }
        if self.current_floor < 1 || self.current_floor > self.floor_count {
            return Err(format!("car at floor {} of {}", self.current_floor, self.floor_count));
        }
        Ok(())
    }
}
