//! Synthetic hall-call traffic for one office workday.
//!
//! Every simulated worker takes four elevator trips: lobby to work floor in
//! the morning, down to the lobby and back up around lunch, and back to the
//! lobby in the evening. Trip times are drawn from truncated distributions
//! around the three daily peaks, so the generated tape follows the classic
//! morning/lunch/evening pattern.

use std::io::{BufRead, BufReader, Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use thiserror::Error;

/// Seconds in one calendar day; all generated times live in `[0, 86400)`.
pub const SECONDS_PER_DAY: f64 = 86_400.0;

const CSV_HEADER: &str = "time,start_floor,destination_floor,weight";
const REJECTION_CAP: usize = 100_000;
const PERSON_RESAMPLE_CAP: usize = 1_000;
const WEIGHT_LOW_KG: f64 = 40.0;
const WEIGHT_HIGH_KG: f64 = 150.0;

#[derive(Debug, Error)]
pub enum TrafficError {
    #[error("floor_count must be at least 2, got {0}")]
    TooFewFloors(usize),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("truncated sampling stuck: interval [{low}, {high}] holds almost no mass around mean {mean}")]
    SamplingStuck { mean: f64, low: f64, high: f64 },
    #[error("line {line}, column {column}: {message}")]
    Csv {
        line: usize,
        column: &'static str,
        message: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which family the per-peak trip times are drawn from.
///
/// The normal variant is the default; the Poisson variant (rate set to the
/// peak mean, rejected outside the day) is kept as a labeled alternative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeakDistribution {
    TruncatedNormal,
    TruncatedPoisson,
}

/// Two-component body-weight mixture, each component truncated to
/// [40, 150] kg and picked with probability one half.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightModel {
    pub mean_a_kg: f64,
    pub std_a_kg: f64,
    pub mean_b_kg: f64,
    pub std_b_kg: f64,
}

impl Default for WeightModel {
    fn default() -> Self {
        Self {
            mean_a_kg: 70.0,
            std_a_kg: 10.0,
            mean_b_kg: 85.0,
            std_b_kg: 12.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficProfile {
    pub floor_count: usize,
    pub workers: usize,
    pub arrival_mean_s: f64,
    pub departure_mean_s: f64,
    pub peak_std_s: f64,
    pub lunch_mean_s: f64,
    pub lunch_duration_s: f64,
    pub peak_distribution: PeakDistribution,
    pub weight_model: WeightModel,
    pub seed: u64,
}

impl Default for TrafficProfile {
    fn default() -> Self {
        Self {
            floor_count: 8,
            workers: 200,
            arrival_mean_s: 32_400.0,
            departure_mean_s: 61_200.0,
            peak_std_s: 1_800.0,
            lunch_mean_s: 43_200.0,
            lunch_duration_s: 1_800.0,
            peak_distribution: PeakDistribution::TruncatedNormal,
            weight_model: WeightModel::default(),
            seed: 0,
        }
    }
}

impl TrafficProfile {
    pub fn validate(&self) -> Result<(), TrafficError> {
        if self.floor_count < 2 {
            return Err(TrafficError::TooFewFloors(self.floor_count));
        }
        if !(self.peak_std_s > 0.0) {
            return Err(TrafficError::InvalidProfile(format!(
                "peak_std_s must be positive, got {}",
                self.peak_std_s
            )));
        }
        if !(self.lunch_duration_s > 0.0) {
            return Err(TrafficError::InvalidProfile(format!(
                "lunch_duration_s must be positive, got {}",
                self.lunch_duration_s
            )));
        }
        for (name, v) in [
            ("arrival_mean_s", self.arrival_mean_s),
            ("departure_mean_s", self.departure_mean_s),
            ("lunch_mean_s", self.lunch_mean_s),
        ] {
            if !v.is_finite() || v < 0.0 || v >= SECONDS_PER_DAY {
                return Err(TrafficError::InvalidProfile(format!(
                    "{name} must lie in [0, 86400), got {v}"
                )));
            }
        }
        let w = &self.weight_model;
        if !(w.std_a_kg > 0.0 && w.std_b_kg > 0.0) {
            return Err(TrafficError::InvalidProfile(
                "weight model stds must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One worker's day: arrival, optional lunch round trip, departure.
#[derive(Debug, Clone, PartialEq)]
pub struct PersonSpec {
    pub id: usize,
    pub weight_kg: f64,
    pub arrival_s: f64,
    pub departure_s: f64,
    pub work_floor: usize,
    /// `(down_s, return_s)` of the lunch round trip.
    pub lunch: Option<(f64, f64)>,
}

/// One hall call: a passenger appears at `start_floor` wanting `dest_floor`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficRecord {
    pub time_s: f64,
    pub start_floor: usize,
    pub dest_floor: usize,
    pub weight_kg: f64,
}

/// Day tape: records sorted ascending by time (stable, so equal times keep
/// their generation order).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrafficTable {
    records: Vec<TrafficRecord>,
}

impl TrafficTable {
    pub fn from_records(mut records: Vec<TrafficRecord>) -> Self {
        records.sort_by(|a, b| a.time_s.total_cmp(&b.time_s));
        Self { records }
    }

    pub fn records(&self) -> &[TrafficRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, TrafficRecord> {
        self.records.iter()
    }

    /// First `n` records of the tape, preserving order.
    pub fn truncate_to(&self, n: usize) -> Self {
        Self {
            records: self.records.iter().take(n).cloned().collect(),
        }
    }
}

/// Normal sample conditioned on `[low, high]` by rejection.
///
/// The loop is capped so a near-empty interval surfaces as an error instead
/// of spinning.
pub fn sample_truncated_normal(
    mean: f64,
    std: f64,
    low: f64,
    high: f64,
    rng: &mut impl Rng,
) -> Result<f64, TrafficError> {
    if !(low < high) {
        return Err(TrafficError::InvalidProfile(format!(
            "empty interval [{low}, {high}]"
        )));
    }
    if !(std > 0.0) {
        return Err(TrafficError::InvalidProfile(format!(
            "std must be positive, got {std}"
        )));
    }
    let normal = Normal::new(mean, std)
        .map_err(|e| TrafficError::InvalidProfile(format!("normal({mean}, {std}): {e}")))?;
    for _ in 0..REJECTION_CAP {
        let x = normal.sample(rng);
        if x >= low && x <= high {
            return Ok(x);
        }
    }
    Err(TrafficError::SamplingStuck { mean, low, high })
}

/// Poisson sample (rate = `mean`) conditioned on `[low, high]` by rejection.
pub fn sample_truncated_poisson(
    mean: f64,
    low: f64,
    high: f64,
    rng: &mut impl Rng,
) -> Result<f64, TrafficError> {
    if !(low < high) {
        return Err(TrafficError::InvalidProfile(format!(
            "empty interval [{low}, {high}]"
        )));
    }
    let poisson = Poisson::new(mean)
        .map_err(|e| TrafficError::InvalidProfile(format!("poisson({mean}): {e}")))?;
    for _ in 0..REJECTION_CAP {
        let x: f64 = poisson.sample(rng);
        if x >= low && x <= high {
            return Ok(x);
        }
    }
    Err(TrafficError::SamplingStuck { mean, low, high })
}

fn sample_peak(
    profile: &TrafficProfile,
    mean: f64,
    low: f64,
    high: f64,
    rng: &mut impl Rng,
) -> Result<f64, TrafficError> {
    match profile.peak_distribution {
        PeakDistribution::TruncatedNormal => {
            sample_truncated_normal(mean, profile.peak_std_s, low, high, rng)
        }
        PeakDistribution::TruncatedPoisson => sample_truncated_poisson(mean, low, high, rng),
    }
}

fn sample_weight(model: &WeightModel, rng: &mut impl Rng) -> Result<f64, TrafficError> {
    let (mean, std) = if rng.gen_bool(0.5) {
        (model.mean_a_kg, model.std_a_kg)
    } else {
        (model.mean_b_kg, model.std_b_kg)
    };
    sample_truncated_normal(mean, std, WEIGHT_LOW_KG, WEIGHT_HIGH_KG, rng)
}

fn sample_person(
    profile: &TrafficProfile,
    id: usize,
    rng: &mut impl Rng,
) -> Result<PersonSpec, TrafficError> {
    for _ in 0..PERSON_RESAMPLE_CAP {
        let arrival = sample_peak(profile, profile.arrival_mean_s, 0.0, SECONDS_PER_DAY, rng)?;
        let departure = sample_peak(
            profile,
            profile.departure_mean_s,
            arrival,
            SECONDS_PER_DAY,
            rng,
        )?;
        // The lunch trip needs strictly positive room between arrival and
        // departure; redo the whole schedule when the window is too tight.
        if departure - arrival <= profile.lunch_duration_s {
            continue;
        }
        let down = sample_peak(
            profile,
            profile.lunch_mean_s,
            arrival,
            departure - profile.lunch_duration_s,
            rng,
        )?;
        let weight_kg = sample_weight(&profile.weight_model, rng)?;
        let work_floor = rng.gen_range(2..=profile.floor_count);
        return Ok(PersonSpec {
            id,
            weight_kg,
            arrival_s: arrival,
            departure_s: departure,
            work_floor,
            lunch: Some((down, down + profile.lunch_duration_s)),
        });
    }
    Err(TrafficError::SamplingStuck {
        mean: profile.lunch_mean_s,
        low: profile.arrival_mean_s,
        high: profile.departure_mean_s,
    })
}

/// The per-worker schedules behind [`generate_day`]; a pure function of the
/// profile (including its seed).
pub fn generate_people(profile: &TrafficProfile) -> Result<Vec<PersonSpec>, TrafficError> {
    profile.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    (0..profile.workers)
        .map(|id| sample_person(profile, id, &mut rng))
        .collect()
}

/// Generate a full day of hall calls, sorted ascending by time.
///
/// Each worker contributes four records: lobby to work floor at arrival,
/// work floor to lobby and back around lunch, and work floor to lobby at
/// departure. The same profile always produces the same table.
pub fn generate_day(profile: &TrafficProfile) -> Result<TrafficTable, TrafficError> {
    let people = generate_people(profile)?;
    let mut records = Vec::with_capacity(people.len() * 4);
    for person in &people {
        records.push(TrafficRecord {
            time_s: person.arrival_s,
            start_floor: 1,
            dest_floor: person.work_floor,
            weight_kg: person.weight_kg,
        });
        if let Some((down_s, return_s)) = person.lunch {
            records.push(TrafficRecord {
                time_s: down_s,
                start_floor: person.work_floor,
                dest_floor: 1,
                weight_kg: person.weight_kg,
            });
            records.push(TrafficRecord {
                time_s: return_s,
                start_floor: 1,
                dest_floor: person.work_floor,
                weight_kg: person.weight_kg,
            });
        }
        records.push(TrafficRecord {
            time_s: person.departure_s,
            start_floor: person.work_floor,
            dest_floor: 1,
            weight_kg: person.weight_kg,
        });
    }
    Ok(TrafficTable::from_records(records))
}

/// Write the tape as UTF-8 CSV with LF line endings.
///
/// Floats use the shortest representation that round-trips, so
/// `read_csv(write_csv(t)) == t` at full precision.
pub fn write_csv<W: Write>(table: &TrafficTable, mut sink: W) -> Result<(), TrafficError> {
    writeln!(sink, "{CSV_HEADER}")?;
    for r in table.records() {
        writeln!(
            sink,
            "{},{},{},{}",
            r.time_s, r.start_floor, r.dest_floor, r.weight_kg
        )?;
    }
    Ok(())
}

/// Parse a tape CSV. Full-line `#` comments before or after the header are
/// ignored (generated artifacts carry their seed and config hash that way).
pub fn read_csv<R: Read>(source: R) -> Result<TrafficTable, TrafficError> {
    let reader = BufReader::new(source);
    let mut records = Vec::new();
    let mut saw_header = false;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let text = line.trim_end_matches('\r');
        if text.starts_with('#') {
            continue;
        }
        if !saw_header {
            if text != CSV_HEADER {
                return Err(TrafficError::Csv {
                    line: lineno,
                    column: "header",
                    message: format!("expected `{CSV_HEADER}`, got `{text}`"),
                });
            }
            saw_header = true;
            continue;
        }
        records.push(parse_record(text, lineno)?);
    }
    if !saw_header {
        return Err(TrafficError::Csv {
            line: 1,
            column: "header",
            message: "missing header line".into(),
        });
    }
    Ok(TrafficTable::from_records(records))
}

fn parse_record(text: &str, lineno: usize) -> Result<TrafficRecord, TrafficError> {
    let err = |column: &'static str, message: String| TrafficError::Csv {
        line: lineno,
        column,
        message,
    };
    let fields: Vec<&str> = text.split(',').collect();
    if fields.len() != 4 {
        return Err(err(
            "record",
            format!("expected 4 comma-separated fields, got {}", fields.len()),
        ));
    }
    let time_s: f64 = fields[0]
        .trim()
        .parse()
        .map_err(|e| err("time", format!("malformed number `{}`: {e}", fields[0])))?;
    if !time_s.is_finite() || time_s < 0.0 {
        return Err(err("time", format!("time must be finite and >= 0, got {time_s}")));
    }
    let start_floor: usize = fields[1]
        .trim()
        .parse()
        .map_err(|e| err("start_floor", format!("malformed integer `{}`: {e}", fields[1])))?;
    let dest_floor: usize = fields[2].trim().parse().map_err(|e| {
        err(
            "destination_floor",
            format!("malformed integer `{}`: {e}", fields[2]),
        )
    })?;
    if start_floor < 1 {
        return Err(err("start_floor", "floors are numbered from 1".into()));
    }
    if dest_floor < 1 {
        return Err(err("destination_floor", "floors are numbered from 1".into()));
    }
    if start_floor == dest_floor {
        return Err(err(
            "destination_floor",
            format!("start and destination floor are both {start_floor}"),
        ));
    }
    let weight_kg: f64 = fields[3]
        .trim()
        .parse()
        .map_err(|e| err("weight", format!("malformed number `{}`: {e}", fields[3])))?;
    if !weight_kg.is_finite() || weight_kg <= 0.0 {
        return Err(err("weight", format!("weight must be positive, got {weight_kg}")));
    }
    Ok(TrafficRecord {
        time_s,
        start_floor,
        dest_floor,
        weight_kg,
    })
}
