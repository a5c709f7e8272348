//! Optimal management of renewable energy communities under Italian self-consumption rules.
//!
//! - [`accounting`]: shared energy, net export and hourly income for the three community layouts.
//! - [`forecast`]: baseline forecasters for demand and generation.
//! - [`mpc`]: the receding-horizon MILP controller of the community battery.
//! - [`sim`]: closed-loop simulation against ground-truth series.
//! - [`synth`]: synthetic July-like community data.

pub mod accounting;
mod battery;
pub mod forecast;
pub mod mpc;
mod scenario;
mod series;
pub mod sim;
pub mod synth;
mod tariff;

pub use accounting::{
    aggregate_demand, hourly_income, net_export_balance, prosumer_export_surplus, shared_energy, HourlyFlows,
    IncomeBreakdown,
};
pub use battery::{battery_step, BatterySpec, SOC_TOL};
pub use scenario::{RecScenario, Variant};
pub use series::EnergySeries;
pub use tariff::{eur_per_mwh, tariff_preset, CommunityKind, IncentiveRates, TariffSchedule};

use thiserror::Error;

/// Largest accepted product of two mutually exclusive flows (kWh²).
pub const COMPLEMENTARITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RecError {
    #[error("hour {hour} outside series of length {len}")]
    HourOutOfRange { hour: usize, len: usize },
    #[error("negative or non-finite {0}")]
    NegativeFlow(&'static str),
    #[error("net exchange {net:.6} kWh exceeds the grid limit {limit} kWh")]
    GridLimitExceeded { net: f64, limit: f64 },
    #[error("SoC {soc:.12} outside [{min}, {max}]")]
    SocBoundViolated { soc: f64, min: f64, max: f64 },
    #[error("battery exchange (charge {e_ch}, discharge {e_dsc}) exceeds the hourly limit {limit} kWh")]
    BatteryLimitExceeded { e_ch: f64, e_dsc: f64, limit: f64 },
    #[error("simultaneous charge {e_ch} and discharge {e_dsc}")]
    SimultaneousChargeDischarge { e_ch: f64, e_dsc: f64 },
    #[error("simultaneous export {e_export} and import {e_import}")]
    SimultaneousExportImport { e_export: f64, e_import: f64 },
    #[error("invalid series: {0}")]
    InvalidSeries(String),
    #[error("invalid battery: {0}")]
    InvalidBattery(String),
    #[error("invalid tariff: {0}")]
    InvalidTariff(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}
