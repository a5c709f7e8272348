//! Scenario files.
//!
//! A scenario is a TOML document with `format_version = 1` and the sections `[community]`,
//! `[battery]`, `[grid]`, `[tariffs]` and `[simulation]`. The community is either generated
//! (`[community.synthetic]`) or read from CSV files whose paths are relative to the scenario
//! file. See the README for the full key list.

use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use recopt_core::sim::{ControllerKind, ForecastSetup, ForecasterChoice, SimulationConfig};
use recopt_core::synth::{self, SyntheticSpec};
use recopt_core::{
    eur_per_mwh, tariff_preset, BatterySpec, CommunityKind, EnergySeries, IncentiveRates, RecScenario, TariffSchedule,
    Variant,
};
use recopt_milp::MilpOptions;
use serde::Deserialize;

use crate::ingest::{ingest_series, Unit};
use crate::CliError;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub format_version: u32,
    pub community: CommunitySection,
    #[serde(default)]
    pub battery: BatterySection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub tariffs: TariffSection,
    #[serde(default)]
    pub simulation: SimulationSection,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantName {
    Config1,
    Config2,
    Config3,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommunitySection {
    pub variant: VariantName,
    pub synthetic: Option<SyntheticSection>,
    #[serde(default)]
    pub members: Vec<SeriesRef>,
    #[serde(default)]
    pub prosumers: Vec<SeriesRef>,
    pub common_load: Option<SeriesRef>,
    pub res: Option<SeriesRef>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSection {
    pub start: Option<String>,
    pub days: Option<usize>,
    pub members: Option<usize>,
    pub members_nominal_kw: Option<f64>,
    pub pv_kwp: Option<f64>,
    pub common_load_kw: Option<f64>,
    pub prosumers: Option<usize>,
    pub prosumer_pv_kwp: Option<f64>,
}

/// A CSV file, either as a bare path (kWh) or as `{ path = "...", unit = "kW" }`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum SeriesRef {
    Path(PathBuf),
    WithUnit { path: PathBuf, unit: Unit },
}

impl SeriesRef {
    fn resolve(&self, base: &Path, default_unit: Unit) -> (PathBuf, Unit) {
        let (p, u) = match self {
            SeriesRef::Path(p) => (p, default_unit),
            SeriesRef::WithUnit { path, unit } => (path, *unit),
        };
        (base.join(p), u)
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatterySection {
    /// kWh; 0 removes the battery.
    pub capacity: Option<f64>,
    pub soc_min: Option<f64>,
    pub soc_max: Option<f64>,
    pub eff_charge: Option<f64>,
    pub eff_discharge: Option<f64>,
    /// kWh per hour.
    pub hourly_limit: Option<f64>,
    pub soc_init: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub limit_kwh: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PresetName {
    Auc,
    Cer,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TariffSection {
    pub preset: Option<PresetName>,
    /// €/MWh; overrides the preset.
    pub restitution: Option<f64>,
    /// €/MWh; overrides the preset.
    pub incentive: Option<f64>,
    /// €/MWh added to the synthetic zonal price to form the import tariff.
    pub import_surcharge: Option<f64>,
    pub export_price: Option<SeriesRef>,
    pub import_tariff: Option<SeriesRef>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ForecasterName {
    Oracle,
    Persistence,
    SeasonalNaive,
    Ar,
    Arima,
    Regression,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControllerName {
    Mpc,
    NoBattery,
    Greedy,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    /// First simulated hour, ISO-8601 UTC.
    pub start: Option<String>,
    /// End of the run (exclusive), ISO-8601 UTC.
    pub end: Option<String>,
    pub horizon: Option<usize>,
    pub forecaster: Option<ForecasterName>,
    pub ar_order: Option<usize>,
    pub controller: Option<ControllerName>,
    /// Seed of the synthetic community.
    pub seed: Option<u64>,
    pub gap_tol: Option<f64>,
    pub node_limit: Option<usize>,
}

/// A `--section.key=value` command-line override.
#[derive(Debug, Clone, PartialEq)]
pub struct Override {
    pub path: Vec<String>,
    pub value: toml::Value,
}

impl Override {
    /// Parses `section.key=value`; the value is read as a TOML literal, falling back to a string.
    pub fn parse(spec: &str) -> Result<Self, CliError> {
        let (key, raw) = spec
            .split_once('=')
            .ok_or_else(|| CliError::Parse(format!("override `{spec}` needs the form section.key=value")))?;
        let path: Vec<String> = key.split('.').map(str::to_string).collect();
        if path.len() < 2 || path.iter().any(String::is_empty) {
            return Err(CliError::Parse(format!("override key `{key}` needs the form section.key")));
        }
        let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));
        Ok(Self { path, value })
    }

    fn apply(&self, doc: &mut toml::Table) -> Result<(), CliError> {
        let (last, parents) = self.path.split_last().expect("at least two components");
        let mut table = doc;
        for p in parents {
            let entry = table
                .entry(p.clone())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            table = entry
                .as_table_mut()
                .ok_or_else(|| CliError::Validation(format!("override `{}`: `{p}` is not a section", self.path.join("."))))?;
        }
        table.insert(last.clone(), self.value.clone());
        Ok(())
    }
}

/// Parses scenario text with overrides applied on top.
pub fn parse_scenario(text: &str, overrides: &[Override]) -> Result<ScenarioFile, CliError> {
    let mut doc: toml::Table = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
    for o in overrides {
        o.apply(&mut doc)?;
    }
    let file: ScenarioFile = toml::Value::Table(doc)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Validation(e.to_string()))?;
    if file.format_version != FORMAT_VERSION {
        return Err(CliError::Validation(format!(
            "unsupported format_version {} (expected {FORMAT_VERSION})",
            file.format_version
        )));
    }
    Ok(file)
}

/// A scenario ready to run.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub simulation: SimulationConfig,
    pub forecaster: ForecasterChoice,
}

fn parse_time(s: &str, what: &str) -> Result<DateTime<Utc>, CliError> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.with_timezone(&Utc))
        .map_err(|e| CliError::Validation(format!("{what} `{s}`: {e}")))
}

fn hour_index(series: &EnergySeries, t: DateTime<Utc>, what: &str) -> Result<usize, CliError> {
    let secs = (t - series.start()).num_seconds();
    if secs < 0 || secs % 3600 != 0 {
        return Err(CliError::Validation(format!(
            "{what} {} is before the data or not on an hour boundary",
            t.to_rfc3339()
        )));
    }
    Ok((secs / 3600) as usize)
}

fn load(path: &Path, unit: Unit) -> Result<EnergySeries, CliError> {
    ingest_series(path, unit).map_err(|e| match e {
        crate::ingest::IngestError::Io { path, message } => CliError::io(path, message),
        other => CliError::Parse(format!("{}: {other}", path.display())),
    })
}

fn energy(r: &SeriesRef, base: &Path, what: &str) -> Result<EnergySeries, CliError> {
    let (path, unit) = r.resolve(base, Unit::KWh);
    if unit.is_price() {
        return Err(CliError::Validation(format!("{what} must be in kWh or kW, not a price unit")));
    }
    load(&path, unit)
}

fn price(r: &SeriesRef, base: &Path, what: &str) -> Result<EnergySeries, CliError> {
    let (path, unit) = r.resolve(base, Unit::EurPerMWh);
    if !unit.is_price() {
        return Err(CliError::Validation(format!("{what} must be in EUR/MWh or EUR/kWh")));
    }
    load(&path, unit)
}

fn battery_from(section: &BatterySection) -> BatterySpec {
    let r = BatterySpec::reference();
    if section.capacity == Some(0.0) {
        return BatterySpec::absent();
    }
    BatterySpec {
        capacity_kwh: section.capacity.unwrap_or(r.capacity_kwh),
        soc_min: section.soc_min.unwrap_or(r.soc_min),
        soc_max: section.soc_max.unwrap_or(r.soc_max),
        eff_charge: section.eff_charge.unwrap_or(r.eff_charge),
        eff_discharge: section.eff_discharge.unwrap_or(r.eff_discharge),
        hourly_limit_kwh: section.hourly_limit.unwrap_or(r.hourly_limit_kwh),
        soc_init: section.soc_init.unwrap_or(r.soc_init),
    }
}

fn rates_from(section: &TariffSection) -> IncentiveRates {
    let kind = match section.preset {
        Some(PresetName::Auc) => CommunityKind::Auc,
        Some(PresetName::Cer) | None => CommunityKind::Cer,
    };
    let mut rates = tariff_preset(kind);
    if let Some(v) = section.restitution {
        rates.restitution = eur_per_mwh(v);
    }
    if let Some(v) = section.incentive {
        rates.incentive = eur_per_mwh(v);
    }
    rates
}

impl ScenarioFile {
    /// Builds the community and simulation settings, reading series files relative to `base`.
    pub fn load(&self, base: &Path) -> Result<LoadedScenario, CliError> {
        let variant = match self.community.variant {
            VariantName::Config1 => Variant::Config1,
            VariantName::Config2 => Variant::Config2,
            VariantName::Config3 => Variant::Config3,
        };
        let battery = battery_from(&self.battery);
        let grid_limit_kwh = self.grid.limit_kwh.unwrap_or(100.0);
        let rates = rates_from(&self.tariffs);
        let c = &self.community;
        let has_files = c.res.is_some() || !c.members.is_empty() || !c.prosumers.is_empty() || c.common_load.is_some();

        let mut scenario = match (&c.synthetic, has_files) {
            (Some(_), true) => {
                return Err(CliError::Validation(
                    "[community] takes either a synthetic table or series files, not both".into(),
                ))
            }
            (Some(s), false) => {
                let d = SyntheticSpec::july(self.simulation.seed.unwrap_or(0));
                let kind = match self.tariffs.preset {
                    Some(PresetName::Auc) => CommunityKind::Auc,
                    _ => CommunityKind::Cer,
                };
                let spec = SyntheticSpec {
                    seed: d.seed,
                    start: s.start.as_deref().map(|t| parse_time(t, "synthetic start")).transpose()?.unwrap_or(d.start),
                    days: s.days.unwrap_or(d.days),
                    variant,
                    kind,
                    members: s.members.unwrap_or(d.members),
                    members_nominal_kw: s.members_nominal_kw.unwrap_or(d.members_nominal_kw),
                    prosumers: s.prosumers.unwrap_or(if variant == Variant::Config3 { 3 } else { 0 }),
                    prosumer_pv_kwp: s.prosumer_pv_kwp.unwrap_or(d.prosumer_pv_kwp),
                    pv_kwp: s.pv_kwp.unwrap_or(d.pv_kwp),
                    common_load_kw: s.common_load_kw.unwrap_or(d.common_load_kw),
                    battery,
                    grid_limit_kwh,
                    import_surcharge: self.tariffs.import_surcharge.map_or(d.import_surcharge, eur_per_mwh),
                };
                let mut s = synth::generate(&spec).map_err(|e| CliError::Validation(e.to_string()))?;
                s.tariffs.rates = rates;
                s
            }
            (None, false) => {
                return Err(CliError::Validation(
                    "[community] needs a synthetic table or res/members series files".into(),
                ))
            }
            (None, true) => {
                let res = c
                    .res
                    .as_ref()
                    .ok_or_else(|| CliError::Validation("[community] res series is required".into()))?;
                let res_generation = energy(res, base, "res")?;
                let members = c
                    .members
                    .iter()
                    .enumerate()
                    .map(|(j, m)| energy(m, base, &format!("member {j}")))
                    .collect::<Result<Vec<_>, _>>()?;
                let prosumers = c
                    .prosumers
                    .iter()
                    .enumerate()
                    .map(|(j, m)| energy(m, base, &format!("prosumer {j}")))
                    .collect::<Result<Vec<_>, _>>()?;
                let common_load = c.common_load.as_ref().map(|l| energy(l, base, "common load")).transpose()?;
                let (Some(ep), Some(it)) = (&self.tariffs.export_price, &self.tariffs.import_tariff) else {
                    return Err(CliError::Validation(
                        "[tariffs] export_price and import_tariff series are required with file-based communities".into(),
                    ));
                };
                RecScenario {
                    variant,
                    members,
                    prosumers,
                    common_load,
                    res_generation,
                    battery,
                    grid_limit_kwh,
                    tariffs: TariffSchedule {
                        rates,
                        export_price: price(ep, base, "export_price")?,
                        import_tariff: price(it, base, "import_tariff")?,
                    },
                }
            }
        };
        if c.synthetic.is_some() {
            if let Some(ep) = &self.tariffs.export_price {
                scenario.tariffs.export_price = price(ep, base, "export_price")?;
            }
            if let Some(it) = &self.tariffs.import_tariff {
                scenario.tariffs.import_tariff = price(it, base, "import_tariff")?;
            }
        }
        scenario.validate().map_err(|e| CliError::Validation(e.to_string()))?;

        let sim = &self.simulation;
        let order = sim.ar_order.unwrap_or(2);
        let forecaster = match sim.forecaster.unwrap_or(ForecasterName::Oracle) {
            ForecasterName::Oracle => ForecasterChoice::Oracle,
            ForecasterName::Persistence => ForecasterChoice::Persistence,
            ForecasterName::SeasonalNaive => ForecasterChoice::SeasonalNaive24,
            ForecasterName::Ar => ForecasterChoice::Ar { order },
            ForecasterName::Arima => ForecasterChoice::Arima { order },
            ForecasterName::Regression => ForecasterChoice::Regression,
        };
        let controller = match sim.controller.unwrap_or(ControllerName::Mpc) {
            ControllerName::Mpc => ControllerKind::Mpc,
            ControllerName::NoBattery => ControllerKind::NoBattery,
            ControllerName::Greedy => ControllerKind::Greedy,
        };
        let horizon = sim.horizon.unwrap_or(24);
        let lookahead = if controller == ControllerKind::Mpc { horizon.max(1) } else { 1 };
        let reference = &scenario.res_generation;
        let start_hour = match &sim.start {
            Some(t) => hour_index(reference, parse_time(t, "simulation start")?, "simulation start")?,
            None => forecaster.min_start(),
        };
        let end_hour = match &sim.end {
            Some(t) => hour_index(reference, parse_time(t, "simulation end")?, "simulation end")?,
            None => (scenario.len() + 1).saturating_sub(lookahead),
        };
        let defaults = MilpOptions::default();
        let simulation = SimulationConfig {
            scenario,
            horizon,
            forecasters: ForecastSetup::uniform(forecaster),
            start_hour,
            end_hour,
            controller,
            milp: MilpOptions {
                gap_tol: sim.gap_tol.unwrap_or(defaults.gap_tol),
                node_limit: sim.node_limit.unwrap_or(defaults.node_limit),
                ..defaults
            },
        };
        simulation.validate().map_err(|e| CliError::Validation(e.to_string()))?;
        Ok(LoadedScenario { simulation, forecaster })
    }
}

/// Reads, overrides and loads a scenario file.
pub fn load_scenario(path: &Path, overrides: &[Override]) -> Result<LoadedScenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let file = parse_scenario(&text, overrides)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    file.load(base)
}
