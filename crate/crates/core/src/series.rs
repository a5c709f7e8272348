use chrono::{DateTime, Duration, Timelike, Utc};

use crate::RecError;

/// Hourly energy values (kWh, or €/kWh for price series) starting at an hour-aligned UTC timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergySeries {
    start: DateTime<Utc>,
    values: Vec<f64>,
}

impl EnergySeries {
    /// Builds a series whose values may take either sign (prosumer net exchange, prices).
    pub fn new(start: DateTime<Utc>, values: Vec<f64>) -> Result<Self, RecError> {
        if start.minute() != 0 || start.second() != 0 || start.nanosecond() != 0 {
            return Err(RecError::InvalidSeries(format!("start {start} is not hour-aligned")));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(RecError::InvalidSeries(format!("value at hour {k} is not finite")));
        }
        Ok(Self { start, values })
    }

    /// Builds a demand or generation series; every value must be non-negative.
    pub fn non_negative(start: DateTime<Utc>, values: Vec<f64>) -> Result<Self, RecError> {
        let s = Self::new(start, values)?;
        if let Some(k) = s.values.iter().position(|&v| v < 0.0) {
            return Err(RecError::InvalidSeries(format!("negative value {} at hour {k}", s.values[k])));
        }
        Ok(s)
    }

    pub fn constant(start: DateTime<Utc>, value: f64, len: usize) -> Result<Self, RecError> {
        Self::new(start, vec![value; len])
    }

    pub fn start(&self) -> DateTime<Utc> {
        self.start
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, hour: usize) -> Result<f64, RecError> {
        self.values.get(hour).copied().ok_or(RecError::HourOutOfRange {
            hour,
            len: self.values.len(),
        })
    }

    pub fn timestamp(&self, hour: usize) -> DateTime<Utc> {
        self.start + Duration::hours(hour as i64)
    }

    pub fn is_non_negative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }

    /// Sub-series `[from, from + len)`, clipped to the available data.
    pub fn window(&self, from: usize, len: usize) -> Self {
        let from = from.min(self.values.len());
        let to = (from + len).min(self.values.len());
        Self {
            start: self.timestamp(from),
            values: self.values[from..to].to_vec(),
        }
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn aligned_with(&self, other: &Self) -> bool {
        self.start == other.start && self.values.len() == other.values.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    #[test]
    fn rejects_unaligned_and_non_finite() {
        let t = Utc.with_ymd_and_hms(2021, 7, 1, 0, 30, 0).unwrap();
        assert!(EnergySeries::new(t, vec![1.0]).is_err());
        let t = Utc.with_ymd_and_hms(2021, 7, 1, 0, 0, 0).unwrap();
        assert!(EnergySeries::new(t, vec![f64::NAN]).is_err());
        assert!(EnergySeries::non_negative(t, vec![1.0, -0.1]).is_err());
        assert!(EnergySeries::new(t, vec![1.0, -0.1]).is_ok());
    }

    #[test]
    fn window_shifts_start() {
        let t = Utc.with_ymd_and_hms(2021, 7, 1, 0, 0, 0).unwrap();
        let s = EnergySeries::new(t, (0..10).map(f64::from).collect()).unwrap();
        let w = s.window(3, 4);
        assert_eq!(w.values(), &[3.0, 4.0, 5.0, 6.0]);
        assert_eq!(w.start(), t + Duration::hours(3));
        assert_eq!(s.window(8, 5).len(), 2);
        assert!(matches!(s.get(10), Err(RecError::HourOutOfRange { hour: 10, len: 10 })));
    }
}
