use chrono::{DateTime, Duration, Timelike, Utc};

use super::GridError;

/// Position of an interval inside a multi-day window: day `s` (1-based) and
/// slot `k` within that day (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SessionIndex {
    pub day: usize,
    pub slot: usize,
}

/// Uniform time discretization anchored at a datum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeGrid {
    intervals_per_day: usize,
    datum: DateTime<Utc>,
}

impl TimeGrid {
    pub const HALF_HOURLY: usize = 48;

    /// `intervals_per_day` must divide a day into whole minutes and `datum`
    /// must sit on an interval boundary.
    pub fn new(intervals_per_day: usize, datum: DateTime<Utc>) -> Result<Self, GridError> {
        if intervals_per_day == 0 || 1440 % intervals_per_day != 0 {
            return Err(GridError::IntervalsPerDay(intervals_per_day));
        }
        let step = (1440 / intervals_per_day) as u32;
        let minute_of_day = datum.hour() * 60 + datum.minute();
        if datum.second() != 0 || datum.nanosecond() != 0 || minute_of_day % step != 0 {
            return Err(GridError::Misaligned(datum));
        }
        Ok(Self {
            intervals_per_day,
            datum,
        })
    }

    pub fn half_hourly(datum: DateTime<Utc>) -> Result<Self, GridError> {
        Self::new(Self::HALF_HOURLY, datum)
    }

    pub fn intervals_per_day(&self) -> usize {
        self.intervals_per_day
    }

    pub fn datum(&self) -> DateTime<Utc> {
        self.datum
    }

    /// Interval length in hours (0.5 for the half-hourly grid).
    pub fn delta_t_hours(&self) -> f64 {
        24.0 / self.intervals_per_day as f64
    }

    pub fn step_minutes(&self) -> i64 {
        1440 / self.intervals_per_day as i64
    }

    pub fn step(&self) -> Duration {
        Duration::minutes(self.step_minutes())
    }

    pub fn linear_to_session(&self, l: usize) -> Result<SessionIndex, GridError> {
        linear_to_session(l, self.intervals_per_day)
    }

    pub fn session_to_linear(&self, index: SessionIndex) -> Result<usize, GridError> {
        session_to_linear(index, self.intervals_per_day)
    }

    /// Start time of the zero-based interval `index` counted from the datum.
    pub fn timestamp(&self, index: i64) -> DateTime<Utc> {
        self.datum + Duration::minutes(self.step_minutes() * index)
    }

    /// Zero-based interval index whose start is exactly `ts`, if aligned.
    pub fn index_of(&self, ts: DateTime<Utc>) -> Option<i64> {
        let minutes = (ts - self.datum).num_minutes();
        let step = self.step_minutes();
        let exact = self.datum + Duration::minutes(minutes) == ts;
        (exact && minutes.rem_euclid(step) == 0).then(|| minutes.div_euclid(step))
    }
}

/// `l = c*(s-1) + k` with `1 <= k <= c`.
pub fn linear_to_session(l: usize, intervals_per_day: usize) -> Result<SessionIndex, GridError> {
    if l < 1 {
        return Err(GridError::IndexOutOfRange(l));
    }
    if intervals_per_day == 0 {
        return Err(GridError::IntervalsPerDay(0));
    }
    Ok(SessionIndex {
        day: (l - 1) / intervals_per_day + 1,
        slot: (l - 1) % intervals_per_day + 1,
    })
}

pub fn session_to_linear(index: SessionIndex, intervals_per_day: usize) -> Result<usize, GridError> {
    if index.day < 1 || index.slot < 1 || index.slot > intervals_per_day {
        return Err(GridError::SessionOutOfRange(index.day, index.slot));
    }
    Ok(intervals_per_day * (index.day - 1) + index.slot)
}
