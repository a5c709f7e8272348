//! Baseline hourly forecasters: persistence, seasonal-naive, AR, ARIMA(p,1,0) and linear
//! regression on calendar and lagged features.
//!
//! A forecast issued at hour `k` may only use history values at indices `< k`. Multi-step
//! forecasts feed their own (clamped) predictions back as lagged inputs.

use chrono::{Datelike, Duration, Timelike};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::EnergySeries;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ForecastError {
    #[error("insufficient history: need {needed} values, have {available}")]
    InsufficientHistory { needed: usize, available: usize },
    #[error("regression design is singular")]
    SingularDesign,
    #[error("length mismatch: actual {actual}, forecast {forecast}")]
    LengthMismatch { actual: usize, forecast: usize },
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// Last observed value carried forward.
    Persistence,
    /// Value of the same hour on the previous day.
    SeasonalNaive24,
    /// Autoregression with intercept on the raw series.
    Ar,
    /// Autoregression with intercept on the first difference, re-integrated.
    Arima,
    /// Least squares on an intercept plus the configured features.
    LinearRegression,
}

/// Regressor of a linear forecaster.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feature {
    /// 24 hour-of-day indicators.
    HourOfDay,
    /// 7 day-of-week indicators.
    DayOfWeek,
    /// Endogenous value `lag` hours back.
    Lag(usize),
}

impl Feature {
    fn width(self) -> usize {
        match self {
            Feature::HourOfDay => 24,
            Feature::DayOfWeek => 7,
            Feature::Lag(_) => 1,
        }
    }
}

/// Calendar one-hots plus lags 1, 2, 24 and 168.
pub fn default_regression_features() -> Vec<Feature> {
    vec![
        Feature::HourOfDay,
        Feature::DayOfWeek,
        Feature::Lag(1),
        Feature::Lag(2),
        Feature::Lag(24),
        Feature::Lag(168),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastModel {
    kind: ModelKind,
    lag_order: usize,
    features: Vec<Feature>,
    intercept: f64,
    /// One weight per expanded feature column, in `features` order.
    coefficients: Vec<f64>,
    training_len: usize,
}

impl ForecastModel {
    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn lag_order(&self) -> usize {
        self.lag_order
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn training_len(&self) -> usize {
        self.training_len
    }

    /// An AR model with given intercept and lag weights (`weights[i]` multiplies lag `i + 1`).
    pub fn ar_from_coefficients(intercept: f64, weights: Vec<f64>) -> Result<Self, ForecastError> {
        if weights.is_empty() || !intercept.is_finite() || weights.iter().any(|w| !w.is_finite()) {
            return Err(ForecastError::InvalidModel("AR needs at least one finite weight".into()));
        }
        Ok(Self {
            kind: ModelKind::Ar,
            lag_order: weights.len(),
            features: (1..=weights.len()).map(Feature::Lag).collect(),
            intercept,
            coefficients: weights,
            training_len: 0,
        })
    }

    /// Number of past values a one-step prediction reads.
    fn max_lag(&self) -> usize {
        let lags = self
            .features
            .iter()
            .filter_map(|f| match f {
                Feature::Lag(l) => Some(*l),
                _ => None,
            })
            .max()
            .unwrap_or(0);
        match self.kind {
            ModelKind::Persistence => 1,
            ModelKind::SeasonalNaive24 => 24,
            ModelKind::Arima => lags + 1,
            _ => lags.max(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HorizonKind {
    /// The 24 hours of the calendar day after the one containing the issue hour.
    DayAhead,
    /// The issue hour only.
    OneHourAhead,
    /// The 24 hours starting at the issue hour.
    TwentyFourHoursAhead,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForecastRequest {
    pub horizon: HorizonKind,
    /// First hour not yet observed; history values at indices `< issue_hour` are known.
    pub issue_hour: usize,
}

fn min_history(kind: ModelKind, lag_order: usize) -> usize {
    match kind {
        ModelKind::Persistence => 1,
        ModelKind::SeasonalNaive24 => 24,
        _ => (10 * lag_order).max(7 * 24),
    }
}

fn expand(features: &[Feature], series: &[f64], t: usize, start: chrono::DateTime<chrono::Utc>, row: &mut Vec<f64>) {
    row.clear();
    let ts = start + Duration::hours(t as i64);
    for f in features {
        match *f {
            Feature::HourOfDay => {
                let h = ts.hour() as usize;
                row.extend((0..24).map(|i| if i == h { 1.0 } else { 0.0 }));
            }
            Feature::DayOfWeek => {
                let d = ts.weekday().num_days_from_monday() as usize;
                row.extend((0..7).map(|i| if i == d { 1.0 } else { 0.0 }));
            }
            Feature::Lag(l) => row.push(series[t - l]),
        }
    }
}

/// Ridge-damped least squares with intercept: returns `(intercept, weights)`.
fn least_squares(rows: &[Vec<f64>], targets: &[f64]) -> Result<(f64, Vec<f64>), ForecastError> {
    let n = rows.len();
    let k = rows.first().map_or(0, Vec::len) + 1;
    let x = DMatrix::from_fn(n, k, |i, j| if j == 0 { 1.0 } else { rows[i][j - 1] });
    let y = DVector::from_column_slice(targets);
    let mut xtx = x.transpose() * &x;
    let lambda = 1e-8 * xtx.trace() / k as f64;
    for i in 0..k {
        xtx[(i, i)] += lambda;
    }
    let xty = x.transpose() * y;
    let chol = xtx.cholesky().ok_or(ForecastError::SingularDesign)?;
    let beta = chol.solve(&xty);
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(ForecastError::SingularDesign);
    }
    Ok((beta[0], beta.iter().skip(1).copied().collect()))
}

/// Fits a forecaster on the whole of `history`.
///
/// `lag_order` is the AR order for [`ModelKind::Ar`] and [`ModelKind::Arima`]; `features`
/// configures [`ModelKind::LinearRegression`] and is ignored otherwise.
pub fn fit(
    history: &EnergySeries,
    kind: ModelKind,
    lag_order: usize,
    features: &[Feature],
) -> Result<ForecastModel, ForecastError> {
    let features: Vec<Feature> = match kind {
        ModelKind::Ar | ModelKind::Arima => {
            if lag_order == 0 {
                return Err(ForecastError::InvalidModel("AR order must be at least 1".into()));
            }
            (1..=lag_order).map(Feature::Lag).collect()
        }
        ModelKind::LinearRegression => {
            if features.contains(&Feature::Lag(0)) {
                return Err(ForecastError::InvalidModel("lag 0 is not a valid regressor".into()));
            }
            features.to_vec()
        }
        ModelKind::Persistence | ModelKind::SeasonalNaive24 => Vec::new(),
    };
    let mut model = ForecastModel {
        kind,
        lag_order,
        features,
        intercept: 0.0,
        coefficients: Vec::new(),
        training_len: history.len(),
    };
    let needed = min_history(kind, lag_order);
    if history.len() < needed {
        return Err(ForecastError::InsufficientHistory {
            needed,
            available: history.len(),
        });
    }
    if matches!(kind, ModelKind::Persistence | ModelKind::SeasonalNaive24) {
        return Ok(model);
    }

    let raw = history.values();
    let (target, offset): (Vec<f64>, usize) = match kind {
        ModelKind::Arima => (raw.windows(2).map(|w| w[1] - w[0]).collect(), 1),
        _ => (raw.to_vec(), 0),
    };
    let first = model.max_lag() - offset;
    let mut rows = Vec::with_capacity(target.len().saturating_sub(first));
    let mut ys = Vec::with_capacity(rows.capacity());
    let mut row = Vec::new();
    // Calendar features of target index t refer to hour t + offset of the raw series.
    let start = history.start() + Duration::hours(offset as i64);
    for t in first..target.len() {
        expand(&model.features, &target, t, start, &mut row);
        rows.push(row.clone());
        ys.push(target[t]);
    }
    if rows.is_empty() {
        return Err(ForecastError::InsufficientHistory {
            needed: first + 1,
            available: target.len(),
        });
    }
    let (intercept, weights) = least_squares(&rows, &ys)?;
    model.intercept = intercept;
    model.coefficients = weights;
    debug_assert_eq!(model.coefficients.len(), model.features.iter().map(|f| f.width()).sum::<usize>());
    Ok(model)
}

/// Forecast for hours `issue_hour .. issue_hour + steps` using history before `issue_hour`.
pub fn predict_steps(
    model: &ForecastModel,
    history: &EnergySeries,
    issue_hour: usize,
    steps: usize,
) -> Result<Vec<f64>, ForecastError> {
    let needed = model.max_lag();
    if issue_hour < needed || history.len() < issue_hour {
        return Err(ForecastError::InsufficientHistory {
            needed: needed.max(issue_hour),
            available: history.len().min(issue_hour),
        });
    }
    let mut buf: Vec<f64> = history.values()[..issue_hour].to_vec();
    let mut out = Vec::with_capacity(steps);
    let mut row = Vec::new();
    for _ in 0..steps {
        let t = buf.len();
        let raw = match model.kind {
            ModelKind::Persistence => buf[t - 1],
            ModelKind::SeasonalNaive24 => buf[t - 24],
            ModelKind::Ar | ModelKind::LinearRegression => {
                expand(&model.features, &buf, t, history.start(), &mut row);
                model.intercept + row.iter().zip(&model.coefficients).map(|(a, b)| a * b).sum::<f64>()
            }
            ModelKind::Arima => {
                // Differences d[i] = buf[i + 1] - buf[i]; the next difference is d[t - 1].
                let diffs: Vec<f64> = buf[t - needed..].windows(2).map(|w| w[1] - w[0]).collect();
                let p = diffs.len();
                let step: f64 = model.intercept
                    + model.coefficients.iter().enumerate().map(|(i, w)| w * diffs[p - 1 - i]).sum::<f64>();
                buf[t - 1] + step
            }
        };
        let v = if raw.is_finite() { raw.max(0.0) } else { 0.0 };
        buf.push(v);
        out.push(v);
    }
    Ok(out)
}

/// Forecast for the request's horizon, returned as a series stamped at the first target hour.
pub fn predict(
    model: &ForecastModel,
    history: &EnergySeries,
    request: ForecastRequest,
) -> Result<EnergySeries, ForecastError> {
    let k = request.issue_hour;
    let (skip, len) = match request.horizon {
        HorizonKind::OneHourAhead => (0, 1),
        HorizonKind::TwentyFourHoursAhead => (0, 24),
        HorizonKind::DayAhead => {
            let hour = history.timestamp(k).hour() as usize;
            (24 - hour, 24)
        }
    };
    let values = predict_steps(model, history, k, skip + len)?;
    EnergySeries::new(history.timestamp(k + skip), values[skip..].to_vec())
        .map_err(|e| ForecastError::InvalidModel(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForecastMetrics {
    pub mae: f64,
    pub rmse: f64,
    /// RMSE divided by the peak of the actual series; 0 when that peak is not positive.
    pub nrmse: f64,
    /// Set when the actual series has no positive peak and `nrmse` was forced to 0.
    pub zero_peak: bool,
}

pub fn evaluate(actual: &[f64], forecast: &[f64]) -> Result<ForecastMetrics, ForecastError> {
    if actual.len() != forecast.len() || actual.is_empty() {
        return Err(ForecastError::LengthMismatch {
            actual: actual.len(),
            forecast: forecast.len(),
        });
    }
    let n = actual.len() as f64;
    let mae = actual.iter().zip(forecast).map(|(a, f)| (a - f).abs()).sum::<f64>() / n;
    let rmse = (actual.iter().zip(forecast).map(|(a, f)| (a - f).powi(2)).sum::<f64>() / n).sqrt();
    let peak = actual.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let zero_peak = peak <= 0.0;
    let nrmse = if zero_peak { 0.0 } else { rmse / peak };
    Ok(ForecastMetrics {
        mae,
        rmse,
        nrmse,
        zero_peak,
    })
}

/// Rolling one-hour-ahead forecasts for every hour in `from..to`.
pub fn rolling_one_step(model: &ForecastModel, series: &EnergySeries, from: usize, to: usize) -> Result<Vec<f64>, ForecastError> {
    (from..to)
        .map(|k| predict_steps(model, series, k, 1).map(|v| v[0]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};

    fn series(v: Vec<f64>) -> EnergySeries {
        EnergySeries::new(Utc.with_ymd_and_hms(2021, 7, 5, 0, 0, 0).unwrap(), v).unwrap()
    }

    #[test]
    fn persistence_carries_last_value() {
        let h = series(vec![1.0, 2.0, 3.0]);
        let m = fit(&h, ModelKind::Persistence, 0, &[]).unwrap();
        assert!(m.coefficients().is_empty());
        let req = ForecastRequest {
            horizon: HorizonKind::OneHourAhead,
            issue_hour: 3,
        };
        assert_eq!(predict(&m, &h, req).unwrap().values(), &[3.0]);
        assert!(fit(&series(vec![]), ModelKind::Persistence, 0, &[]).is_err());
    }

    #[test]
    fn seasonal_naive_repeats_previous_day() {
        let vals: Vec<f64> = (0..48).map(|i| f64::from(i % 24) + if i >= 24 { 100.0 } else { 0.0 }).collect();
        let h = series(vals.clone());
        let m = fit(&h, ModelKind::SeasonalNaive24, 0, &[]).unwrap();
        let req = ForecastRequest {
            horizon: HorizonKind::TwentyFourHoursAhead,
            issue_hour: 48,
        };
        assert_eq!(predict(&m, &h, req).unwrap().values(), &vals[24..48]);
        assert!(matches!(
            fit(&series(vec![1.0; 23]), ModelKind::SeasonalNaive24, 0, &[]),
            Err(ForecastError::InsufficientHistory { needed: 24, available: 23 })
        ));
    }

    #[test]
    fn day_ahead_targets_next_calendar_day() {
        let vals: Vec<f64> = (0..60).map(f64::from).collect();
        let h = series(vals);
        let m = fit(&h, ModelKind::SeasonalNaive24, 0, &[]).unwrap();
        // Issued at 12:00 of the second day: targets the third day (hours 48..72).
        let f = predict(
            &m,
            &h,
            ForecastRequest {
                horizon: HorizonKind::DayAhead,
                issue_hour: 36,
            },
        )
        .unwrap();
        assert_eq!(f.start(), h.timestamp(48));
        assert_eq!(f.len(), 24);
        // hour 48 -> value at 24; hour 60 -> value at 36 -> which is a fed-back prediction (= value 12)
        assert_eq!(f.values()[0], 24.0);
        assert_eq!(f.values()[12], 12.0);
    }

    #[test]
    fn ar_recursion() {
        let m = ForecastModel::ar_from_coefficients(0.0, vec![0.5]).unwrap();
        let h = series(vec![1.0, 4.0]);
        let f = predict(
            &m,
            &h,
            ForecastRequest {
                horizon: HorizonKind::OneHourAhead,
                issue_hour: 2,
            },
        )
        .unwrap();
        assert_eq!(f.values(), &[2.0]);
        assert_eq!(predict_steps(&m, &h, 2, 3).unwrap(), vec![2.0, 1.0, 0.5]);
    }

    #[test]
    fn negative_outputs_are_clamped() {
        let m = ForecastModel::ar_from_coefficients(-10.0, vec![0.5]).unwrap();
        assert_eq!(predict_steps(&m, &series(vec![4.0]), 1, 2).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn ar1_recovers_generator() {
        let mut y = vec![1000.0];
        for k in 1..400 {
            let e = 1e-6 * (((k * 7919) % 13) as f64 - 6.0) / 6.0;
            y.push(0.5 * y[k - 1] + e);
        }
        let m = fit(&series(y), ModelKind::Ar, 1, &[]).unwrap();
        assert!((m.coefficients()[0] - 0.5).abs() < 1e-3, "{:?}", m.coefficients());
    }

    #[test]
    fn constant_series_is_a_fixed_point() {
        let h = series(vec![7.0; 200]);
        for kind in [ModelKind::Ar, ModelKind::Arima] {
            let m = fit(&h, kind, 2, &[]).unwrap();
            let f = predict_steps(&m, &h, 200, 24).unwrap();
            assert!(f.iter().all(|v| (v - 7.0).abs() < 1e-6), "{kind:?}: {f:?}");
        }
        let h = series(vec![7.0; 600]);
        let m = fit(&h, ModelKind::LinearRegression, 0, &default_regression_features()).unwrap();
        let f = predict_steps(&m, &h, 600, 24).unwrap();
        assert!(f.iter().all(|v| (v - 7.0).abs() < 1e-6), "{f:?}");
    }

    #[test]
    fn ar_needs_enough_history() {
        assert!(matches!(
            fit(&series(vec![1.0; 167]), ModelKind::Ar, 2, &[]),
            Err(ForecastError::InsufficientHistory { needed: 168, .. })
        ));
        assert!(matches!(
            fit(&series(vec![1.0; 200]), ModelKind::Ar, 30, &[]),
            Err(ForecastError::InsufficientHistory { needed: 300, .. })
        ));
        let m = ForecastModel::ar_from_coefficients(0.0, vec![0.5, 0.1]).unwrap();
        assert!(predict_steps(&m, &series(vec![1.0; 5]), 1, 1).is_err());
    }

    #[test]
    fn regression_learns_calendar_profile() {
        let vals: Vec<f64> = (0..24 * 21).map(|i| 5.0 + f64::from((i % 24) as u8)).collect();
        let h = series(vals.clone());
        let m = fit(&h, ModelKind::LinearRegression, 0, &[Feature::HourOfDay]).unwrap();
        let f = predict_steps(&m, &h, 24 * 20, 24).unwrap();
        for (a, b) in f.iter().zip(&vals[24 * 20..]) {
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
    }

    #[test]
    fn metrics() {
        let m = evaluate(&[1.0, 2.0], &[1.0, 4.0]).unwrap();
        assert!((m.mae - 1.0).abs() < 1e-15);
        assert!((m.rmse - 2f64.sqrt()).abs() < 1e-15);
        assert!((m.nrmse - 2f64.sqrt() / 2.0).abs() < 1e-15);
        let z = evaluate(&[0.0, 0.0], &[1.0, 0.0]).unwrap();
        assert!(z.zero_peak && z.nrmse == 0.0);
        assert!(matches!(evaluate(&[1.0], &[1.0, 2.0]), Err(ForecastError::LengthMismatch { .. })));
        let same = evaluate(&[3.0, 1.0, 4.0], &[3.0, 1.0, 4.0]).unwrap();
        assert_eq!((same.mae, same.rmse, same.nrmse), (0.0, 0.0, 0.0));
    }
}
