use chrono::{TimeZone, Utc};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use recopt_core::forecast::{
    evaluate, fit, predict, predict_steps, rolling_one_step, ForecastModel, ForecastRequest, HorizonKind, ModelKind,
};
use recopt_core::EnergySeries;

fn series(values: Vec<f64>) -> EnergySeries {
    EnergySeries::new(Utc.with_ymd_and_hms(2021, 7, 1, 0, 0, 0).unwrap(), values).unwrap()
}

/// AR(2) noise around a daily sinusoid, kept positive by a large level.
fn ar2_daily(seed: u64, n: usize, amplitude: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps = Normal::new(0.0, 1.0).unwrap();
    let (mut x1, mut x2) = (0.0, 0.0);
    (0..n)
        .map(|t| {
            let x = 0.6 * x1 + 0.25 * x2 + eps.sample(&mut rng);
            x2 = x1;
            x1 = x;
            let cycle = amplitude * (2.0 * std::f64::consts::PI * t as f64 / 24.0).sin();
            50.0 + cycle + x
        })
        .collect()
}

#[test]
fn ar_recovers_known_coefficients() {
    let values = ar2_daily(1, 20_000, 0.0);
    let m = fit(&series(values), ModelKind::Ar, 2, &[]).unwrap();
    let w = m.coefficients();
    assert!((w[0] - 0.6).abs() < 0.03 && (w[1] - 0.25).abs() < 0.03, "{w:?}");
    // Stationary mean 50 = c / (1 - 0.85).
    assert!((m.intercept() / (1.0 - w[0] - w[1]) - 50.0).abs() < 0.5);
}

#[test]
fn fixed_ar_model_follows_its_recursion() {
    let m = ForecastModel::ar_from_coefficients(1.0, vec![0.5, 0.25]).unwrap();
    let h = series(vec![4.0, 8.0]);
    let f = predict_steps(&m, &h, 2, 3).unwrap();
    let a = 1.0 + 0.5 * 8.0 + 0.25 * 4.0;
    let b = 1.0 + 0.5 * a + 0.25 * 8.0;
    let c = 1.0 + 0.5 * b + 0.25 * a;
    assert_eq!(f, vec![a, b, c]);
}

#[test]
fn persistence_and_seasonal_examples() {
    let h = series(vec![1.0, 2.0, 3.0]);
    let m = fit(&h, ModelKind::Persistence, 0, &[]).unwrap();
    let one = predict(&m, &h, ForecastRequest { horizon: HorizonKind::OneHourAhead, issue_hour: 3 }).unwrap();
    assert_eq!(one.values(), &[3.0]);

    let day: Vec<f64> = (0..48).map(|i| f64::from((i % 24) as u8)).collect();
    let h = series(day);
    let m = fit(&h, ModelKind::SeasonalNaive24, 0, &[]).unwrap();
    let f = predict(&m, &h, ForecastRequest { horizon: HorizonKind::TwentyFourHoursAhead, issue_hour: 48 }).unwrap();
    assert_eq!(f.values(), &h.values()[24..]);
    assert_eq!(f.start(), h.timestamp(48));
}

#[test]
fn predictions_ignore_the_future() {
    let values = ar2_daily(3, 400, 5.0);
    let h = series(values.clone());
    let m = fit(&h.window(0, 300), ModelKind::Ar, 3, &[]).unwrap();
    let mut tampered = values;
    for v in &mut tampered[320..] {
        *v = 1e6;
    }
    let a = predict_steps(&m, &h, 320, 24).unwrap();
    let b = predict_steps(&m, &series(tampered), 320, 24).unwrap();
    assert_eq!(a, b);
}

#[test]
fn arima_tracks_a_trend() {
    let values: Vec<f64> = (0..300).map(|t| 10.0 + 0.5 * t as f64).collect();
    let h = series(values);
    let m = fit(&h, ModelKind::Arima, 1, &[]).unwrap();
    let f = predict_steps(&m, &h, 300, 5).unwrap();
    for (i, v) in f.iter().enumerate() {
        assert!((v - (10.0 + 0.5 * (300 + i) as f64)).abs() < 1e-6, "{f:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ar_one_step_beats_persistence(seed in any::<u64>()) {
        let values = ar2_daily(seed, 24 * 28, 8.0);
        let h = series(values.clone());
        let train = 24 * 21;
        let ar = fit(&h.window(0, train), ModelKind::Ar, 4, &[]).unwrap();
        let naive = fit(&h.window(0, train), ModelKind::Persistence, 0, &[]).unwrap();
        let actual = &values[train..];
        let e_ar = evaluate(actual, &rolling_one_step(&ar, &h, train, values.len()).unwrap()).unwrap();
        let e_naive = evaluate(actual, &rolling_one_step(&naive, &h, train, values.len()).unwrap()).unwrap();
        prop_assert!(e_ar.rmse < e_naive.rmse, "{} vs {}", e_ar.rmse, e_naive.rmse);
    }

    #[test]
    fn forecasts_are_non_negative_and_deterministic(seed in any::<u64>(), steps in 1usize..48) {
        let values: Vec<f64> = ar2_daily(seed, 400, 60.0).into_iter().map(|v| (v - 50.0).max(0.0)).collect();
        let h = series(values);
        for kind in [ModelKind::Ar, ModelKind::Arima] {
            let m = fit(&h, kind, 3, &[]).unwrap();
            let a = predict_steps(&m, &h, 400, steps).unwrap();
            prop_assert!(a.iter().all(|v| *v >= 0.0));
            prop_assert_eq!(a, predict_steps(&m, &h, 400, steps).unwrap());
        }
    }
}
