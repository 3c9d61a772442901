//! Hard-coded two-phase baseline controller.
//!
//! While the car is empty it seeks the closest floor with a lit hall button
//! (idling if there is none), opens there, and commits to one of the lit
//! directions. While committed it sweeps in that direction, dropping riders
//! at their destinations and picking up same-direction calls, until the car
//! empties and seeking resumes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::sim::{Action, ActionSet, Direction, Observation, SimEnv};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NaivePhase {
    Seeking,
    Committed(Direction),
}

/// One baseline decision.
///
/// `legal` is the environment's action mask; the controller consults it so a
/// same-direction call it cannot serve (a waiter who would overload the car)
/// is passed instead of re-opening forever. The returned action is always a
/// member of `legal`.
pub fn naive_decide(
    obs: &Observation,
    phase: NaivePhase,
    legal: &ActionSet,
    rng: &mut impl Rng,
) -> (Action, NaivePhase) {
    match phase {
        NaivePhase::Committed(direction) => {
            let here = obs.current_floor;
            let disembark = obs.car_buttons[here - 1];
            let pickup = hall_lit(obs, here, direction)
                && legal.contains(Action::open_for(direction));
            if disembark || pickup {
                return (Action::open_for(direction), NaivePhase::Committed(direction));
            }
            if obs.car_buttons.iter().any(|&b| b) {
                return (Action::move_toward(direction), NaivePhase::Committed(direction));
            }
            seek(obs, legal, rng)
        }
        NaivePhase::Seeking => seek(obs, legal, rng),
    }
}

fn seek(obs: &Observation, legal: &ActionSet, rng: &mut impl Rng) -> (Action, NaivePhase) {
    let here = obs.current_floor;
    let target = match closest_call_floor(obs) {
        None => return (Action::Idle, NaivePhase::Seeking),
        Some(f) => f,
    };
    if target > here {
        return (Action::MoveUp, NaivePhase::Seeking);
    }
    if target < here {
        return (Action::MoveDown, NaivePhase::Seeking);
    }
    let up = hall_lit(obs, here, Direction::Up) && legal.contains(Action::OpenCloseUp);
    let down = hall_lit(obs, here, Direction::Down) && legal.contains(Action::OpenCloseDown);
    match (up, down) {
        (true, true) => {
            let direction = if rng.gen_bool(0.5) {
                Direction::Up
            } else {
                Direction::Down
            };
            (Action::open_for(direction), NaivePhase::Committed(direction))
        }
        (true, false) => (Action::OpenCloseUp, NaivePhase::Committed(Direction::Up)),
        (false, true) => (Action::OpenCloseDown, NaivePhase::Committed(Direction::Down)),
        // Lit but unservable right now; wait for the world to change.
        (false, false) => (Action::Idle, NaivePhase::Seeking),
    }
}

fn hall_lit(obs: &Observation, floor: usize, direction: Direction) -> bool {
    match direction {
        Direction::Up => obs.up_buttons[floor - 1],
        Direction::Down => obs.down_buttons[floor - 1],
    }
}

/// Closest floor with any lit hall button; equidistant ties go to the lower
/// floor.
fn closest_call_floor(obs: &Observation) -> Option<usize> {
    let here = obs.current_floor as isize;
    let mut best: Option<(usize, usize)> = None;
    for (idx, lit) in obs
        .up_buttons
        .iter()
        .zip(&obs.down_buttons)
        .map(|(u, d)| *u || *d)
        .enumerate()
    {
        if !lit {
            continue;
        }
        let floor = idx + 1;
        let distance = (floor as isize - here).unsigned_abs();
        // Ascending scan, strict improvement: ties keep the lower floor.
        if best.map_or(true, |(_, d)| distance < d) {
            best = Some((floor, distance));
        }
    }
    best.map(|(floor, _)| floor)
}

/// Seeded stateful wrapper driving [`naive_decide`] over an episode.
#[derive(Debug, Clone)]
pub struct NaiveController {
    pub phase: NaivePhase,
    rng: ChaCha8Rng,
}

impl NaiveController {
    pub fn new(seed: u64) -> Self {
        Self {
            phase: NaivePhase::Seeking,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn decide(&mut self, env: &SimEnv) -> Action {
        let (action, phase) = naive_decide(
            &env.observation(),
            self.phase,
            &env.legal_actions(),
            &mut self.rng,
        );
        self.phase = phase;
        action
    }
}
