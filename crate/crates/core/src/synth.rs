//! Seeded synthetic communities with summer-like profiles.
//!
//! Members follow a diurnal load curve with an evening peak, the common plant a clear-sky
//! PV bell scaled by a daily cloudiness factor, and the zonal price a diurnal shape with a
//! random daily level. The import tariff is the zonal price plus a fixed network and
//! system charge.

use std::f64::consts::PI;

use chrono::{DateTime, Datelike, Duration, TimeZone, Timelike, Utc, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::{
    tariff_preset, BatterySpec, CommunityKind, EnergySeries, RecError, RecScenario, TariffSchedule, Variant,
};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub start: DateTime<Utc>,
    pub days: usize,
    pub variant: Variant,
    pub kind: CommunityKind,
    pub members: usize,
    /// Total contracted power of the consumer members, kW.
    pub members_nominal_kw: f64,
    /// Number of prosumers, `Config3` only.
    pub prosumers: usize,
    pub prosumer_pv_kwp: f64,
    pub pv_kwp: f64,
    /// Average demand of the common property's load, kW. Ignored in `Config1`.
    pub common_load_kw: f64,
    pub battery: BatterySpec,
    pub grid_limit_kwh: f64,
    /// Non-energy share of the import tariff, €/kWh.
    pub import_surcharge: f64,
}

impl SyntheticSpec {
    /// A 15-member, 50 kWp community with the reference battery over a July-like month.
    pub fn july(seed: u64) -> Self {
        Self {
            seed,
            start: Utc.with_ymd_and_hms(2021, 7, 1, 0, 0, 0).unwrap(),
            days: 31,
            variant: Variant::Config2,
            kind: CommunityKind::Cer,
            members: 15,
            members_nominal_kw: 45.0,
            prosumers: 0,
            prosumer_pv_kwp: 6.0,
            pv_kwp: 50.0,
            common_load_kw: 3.0,
            battery: BatterySpec::reference(),
            grid_limit_kwh: 100.0,
            import_surcharge: 0.13,
        }
    }

    pub fn hours(&self) -> usize {
        self.days * 24
    }
}

/// Bounded multiplicative noise: `1 + x` with `x ~ N(0, sd)` truncated to `±2 sd`.
fn noise(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    let n = Normal::new(0.0, sd).expect("positive standard deviation");
    1.0 + n.sample(rng).clamp(-2.0 * sd, 2.0 * sd)
}

/// Fraction of nominal power drawn by a household at hour `h` (local solar time).
fn household_shape(h: f64) -> f64 {
    let evening = (-((h - 20.0) / 2.5).powi(2)).exp();
    let morning = (-((h - 8.0) / 1.5).powi(2)).exp();
    0.12 + 0.06 * (2.0 * PI * (h - 15.0) / 24.0).cos() + 0.28 * evening + 0.12 * morning
}

/// Clear-sky PV output per kWp over the hour starting at `h`.
fn clear_sky(h: f64) -> f64 {
    let mid = h + 0.5;
    let x = (mid - 13.0) / 7.5;
    if x.abs() >= 1.0 {
        0.0
    } else {
        0.8 * (1.0 - x * x)
    }
}

fn is_weekend(t: DateTime<Utc>) -> bool {
    matches!(t.weekday(), Weekday::Sat | Weekday::Sun)
}

fn hour_of(t: DateTime<Utc>) -> f64 {
    f64::from(t.hour())
}

/// Generates a scenario; identical specs give identical scenarios.
pub fn generate(spec: &SyntheticSpec) -> Result<RecScenario, RecError> {
    if spec.days == 0 || spec.members == 0 {
        return Err(RecError::InvalidScenario("synthetic scenario needs at least one day and one member".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.hours();
    let times: Vec<DateTime<Utc>> = (0..n).map(|k| spec.start + Duration::hours(k as i64)).collect();

    let mut weights: Vec<f64> = (0..spec.members).map(|_| rng.random_range(0.6..1.4)).collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w *= spec.members_nominal_kw / total;
    }
    let members = weights
        .iter()
        .map(|&kw| {
            let shift: f64 = rng.random_range(-1.0..1.0);
            let values = times
                .iter()
                .map(|&t| {
                    let weekly = if is_weekend(t) { 1.12 } else { 1.0 };
                    (kw * household_shape(hour_of(t) + shift) * weekly * noise(&mut rng, 0.12)).max(0.0)
                })
                .collect();
            EnergySeries::non_negative(spec.start, values)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let daily_sky: Vec<f64> = (0..spec.days)
        .map(|_| {
            let u: f64 = rng.random();
            1.0 - 0.45 * u * u
        })
        .collect();
    let pv = |kwp: f64, rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..n)
            .map(|k| {
                let cs = clear_sky(hour_of(times[k]));
                if cs == 0.0 {
                    0.0
                } else {
                    (kwp * cs * daily_sky[k / 24] * noise(rng, 0.05)).max(0.0)
                }
            })
            .collect()
    };
    let res_generation = EnergySeries::non_negative(spec.start, pv(spec.pv_kwp, &mut rng))?;

    let common_load = if spec.variant == Variant::Config1 {
        None
    } else {
        let values = times
            .iter()
            .map(|&t| {
                let h = hour_of(t);
                let open = !is_weekend(t) && (8.0..19.0).contains(&h);
                let level = if open { 1.6 } else { 0.6 };
                spec.common_load_kw * level * noise(&mut rng, 0.1)
            })
            .collect();
        Some(EnergySeries::non_negative(spec.start, values)?)
    };

    let prosumers = if spec.variant == Variant::Config3 {
        (0..spec.prosumers)
            .map(|_| {
                let own_pv = pv(spec.prosumer_pv_kwp, &mut rng);
                let kw = spec.members_nominal_kw / spec.members.max(1) as f64;
                let values = times
                    .iter()
                    .zip(own_pv)
                    .map(|(&t, gen)| kw * household_shape(hour_of(t)) * noise(&mut rng, 0.12) - gen)
                    .collect();
                EnergySeries::new(spec.start, values)
            })
            .collect::<Result<Vec<_>, _>>()?
    } else {
        Vec::new()
    };

    let daily_level: Vec<f64> = (0..spec.days).map(|_| rng.random_range(0.085..0.125)).collect();
    let export: Vec<f64> = (0..n)
        .map(|k| {
            let h = hour_of(times[k]);
            let shape = 0.022 * (2.0 * PI * (h - 20.0) / 24.0).cos() - 0.012 * clear_sky(h);
            (daily_level[k / 24] + shape) * noise(&mut rng, 0.04)
        })
        .collect();
    let import: Vec<f64> = export.iter().map(|p| p + spec.import_surcharge).collect();

    let scenario = RecScenario {
        variant: spec.variant,
        members,
        prosumers,
        common_load,
        res_generation,
        battery: spec.battery,
        grid_limit_kwh: spec.grid_limit_kwh,
        tariffs: TariffSchedule {
            rates: tariff_preset(spec.kind),
            export_price: EnergySeries::non_negative(spec.start, export)?,
            import_tariff: EnergySeries::non_negative(spec.start, import)?,
        },
    };
    scenario.validate()?;
    Ok(scenario)
}
