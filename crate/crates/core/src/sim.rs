//! Closed-loop receding-horizon simulation.
//!
//! At every hour the controller sees forecasts over the horizon, its first control is
//! applied to the ground-truth plant (with clamping where forecasts were wrong), and the
//! realized flows are settled with the hourly income rule.

use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use recopt_milp::MilpOptions;
use thiserror::Error;

use crate::accounting::{signed_net_export, split_net};
use crate::forecast::{self, default_regression_features, ForecastError, ForecastModel, ModelKind};
use crate::mpc::{self, Control, MpcError, MpcInputs};
use crate::{
    aggregate_demand, hourly_income, prosumer_export_surplus, BatterySpec, EnergySeries, HourlyFlows,
    IncomeBreakdown, RecError, RecScenario,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Scenario(#[from] RecError),
    #[error(transparent)]
    Forecast(#[from] ForecastError),
    #[error("controller failed at hour {hour}: {source}")]
    Controller { hour: usize, source: MpcError },
    #[error("invariant violated at hour {hour}: {what}")]
    Invariant { hour: usize, what: String },
}

/// How the controller obtains a signal's trajectory over the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForecasterChoice {
    /// Perfect foresight: the true series.
    Oracle,
    Persistence,
    SeasonalNaive24,
    Ar { order: usize },
    Arima { order: usize },
    /// Calendar one-hots plus lags 1, 2, 24 and 168.
    Regression,
}

impl ForecasterChoice {
    /// Hours of history the forecaster needs before the first simulated hour.
    pub fn min_start(self) -> usize {
        match self {
            ForecasterChoice::Oracle => 0,
            ForecasterChoice::Persistence => 1,
            ForecasterChoice::SeasonalNaive24 => 24,
            ForecasterChoice::Ar { order } | ForecasterChoice::Arima { order } => (10 * order).max(168),
            ForecasterChoice::Regression => 2 * 168,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForecastSetup {
    pub res: ForecasterChoice,
    pub common_load: ForecasterChoice,
    pub member_demand: ForecasterChoice,
}

impl ForecastSetup {
    pub fn oracle() -> Self {
        Self::uniform(ForecasterChoice::Oracle)
    }

    pub fn uniform(choice: ForecasterChoice) -> Self {
        Self {
            res: choice,
            common_load: choice,
            member_demand: choice,
        }
    }

    pub fn min_start(&self) -> usize {
        self.res.min_start().max(self.common_load.min_start()).max(self.member_demand.min_start())
    }

    fn is_oracle(&self) -> bool {
        *self == Self::oracle()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControllerKind {
    Mpc,
    /// Battery never used.
    NoBattery,
    /// Charge from the instantaneous renewable surplus, discharge into the instantaneous deficit.
    Greedy,
}

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub scenario: RecScenario,
    pub horizon: usize,
    pub forecasters: ForecastSetup,
    pub start_hour: usize,
    pub end_hour: usize,
    pub controller: ControllerKind,
    pub milp: MilpOptions,
}

impl SimulationConfig {
    /// Oracle forecasts, MPC controller, 24-hour horizon, running as long as the truth series allow.
    pub fn new(scenario: RecScenario) -> Self {
        let horizon = 24;
        let end_hour = scenario.len().saturating_sub(horizon - 1);
        Self {
            scenario,
            horizon,
            forecasters: ForecastSetup::oracle(),
            start_hour: 0,
            end_hour,
            controller: ControllerKind::Mpc,
            milp: MilpOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.scenario.validate()?;
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        if self.horizon == 0 {
            return bad("horizon must be at least one hour".into());
        }
        if self.end_hour <= self.start_hour {
            return bad(format!("end hour {} must exceed start hour {}", self.end_hour, self.start_hour));
        }
        let lookahead = if self.controller == ControllerKind::Mpc { self.horizon } else { 1 };
        let needed = self.end_hour + lookahead - 1;
        if self.scenario.len() < needed {
            return bad(format!(
                "truth series have {} hours, the run needs {needed} (end hour plus horizon)",
                self.scenario.len()
            ));
        }
        if self.start_hour < self.forecasters.min_start() {
            return bad(format!(
                "forecasters need {} hours of history before the start hour {}",
                self.forecasters.min_start(),
                self.start_hour
            ));
        }
        Ok(())
    }
}

/// Ground truth of one hour, as seen by the plant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HourTruth {
    /// Renewable energy available to the community: the common plant plus, in `Config3`,
    /// the prosumers' exported surplus.
    pub e_res: f64,
    pub e_common_load: f64,
    pub e_member_demand: f64,
}

/// What the plant changed relative to the commanded control.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClampRecord {
    pub commanded: (f64, f64),
    pub applied: (f64, f64),
    /// Renewable energy curtailed to respect the grid limit (kWh).
    pub curtailed_kwh: f64,
    /// Import above the grid limit that could not be avoided (kWh).
    pub import_excess_kwh: f64,
}

impl ClampRecord {
    pub fn clamped(&self) -> bool {
        self.commanded != self.applied || self.curtailed_kwh > 0.0 || self.import_excess_kwh > 0.0
    }
}

/// Energy (kWh) by which a command may exceed a plant limit before it is clamped.
pub const CLAMP_TOL: f64 = 1e-9;

/// Applies a commanded battery action to the true plant state.
///
/// Charging is limited to the true renewable energy and both directions to the SoC headroom.
/// When the resulting exchange exceeds the grid limit, battery action is reduced first and
/// renewable export curtailed second. Member and common loads are always served.
pub fn apply_control(
    truth: &HourTruth,
    u: Control,
    soc: f64,
    spec: &BatterySpec,
    grid_limit_kwh: f64,
) -> (HourlyFlows, ClampRecord) {
    // Commands within round-off of a limit pass unchanged; the SoC step tolerates the excess.
    let cap = |v: f64, limit: f64| if v > limit + CLAMP_TOL { limit } else { v };
    let limit = spec.hourly_limit_kwh;
    let mut ch = cap(cap(cap(u.e_ch.max(0.0), limit), truth.e_res), spec.charge_headroom(soc));
    let mut dsc = cap(cap(u.e_dsc.max(0.0), limit), spec.discharge_headroom(soc));
    if ch > 0.0 && dsc > 0.0 {
        if ch >= dsc {
            dsc = 0.0;
        } else {
            ch = 0.0;
        }
    }

    let mut e_res = truth.e_res;
    let mut curtailed = 0.0;
    let mut import_excess = 0.0;
    let net_of = |e_res: f64, ch: f64, dsc: f64| e_res + dsc - ch - truth.e_common_load;
    let mut net = net_of(e_res, ch, dsc);
    if net > grid_limit_kwh {
        dsc -= dsc.min(net - grid_limit_kwh);
        net = net_of(e_res, ch, dsc);
        if net > grid_limit_kwh {
            curtailed = net - grid_limit_kwh;
            e_res -= curtailed;
            net = grid_limit_kwh;
        }
    } else if net < -grid_limit_kwh {
        ch -= ch.min(-grid_limit_kwh - net);
        net = net_of(e_res, ch, dsc);
        if net < -grid_limit_kwh {
            import_excess = -grid_limit_kwh - net;
        }
    }

    let (e_export, e_import_common) = split_net(net);
    let flows = HourlyFlows {
        e_res,
        e_ch: ch,
        e_dsc: dsc,
        e_export,
        e_import_common,
        e_member_demand: truth.e_member_demand,
        e_shared: e_export.min(truth.e_member_demand),
    };
    let record = ClampRecord {
        commanded: (u.e_ch, u.e_dsc),
        applied: (ch, dsc),
        curtailed_kwh: curtailed,
        import_excess_kwh: import_excess,
    };
    (flows, record)
}

/// One settled hour.
#[derive(Debug, Clone, PartialEq)]
pub struct HourEntry {
    pub hour: usize,
    pub timestamp: DateTime<Utc>,
    pub flows: HourlyFlows,
    pub e_common_load: f64,
    pub soc_before: f64,
    pub soc_after: f64,
    pub income: IncomeBreakdown,
    /// First-step forecasts handed to the controller.
    pub forecast_res: f64,
    pub forecast_common_load: f64,
    pub forecast_member_demand: f64,
    /// Controller's own estimate of this hour's income, when it plans.
    pub planned_income: Option<f64>,
    pub plan_objective: Option<f64>,
    pub solver_nodes: usize,
    pub clamp: ClampRecord,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LedgerTotals {
    pub income: IncomeBreakdown,
    pub shared_kwh: f64,
    pub exported_kwh: f64,
    pub imported_common_kwh: f64,
    pub res_kwh: f64,
    pub member_demand_kwh: f64,
    pub common_load_kwh: f64,
    pub charged_kwh: f64,
    pub discharged_kwh: f64,
    pub curtailed_kwh: f64,
    pub clamped_hours: usize,
    pub solves: usize,
    pub solver_nodes: usize,
    pub max_solver_nodes: usize,
    pub controller_fallbacks: usize,
}

impl LedgerTotals {
    fn add(&mut self, e: &HourEntry) {
        self.income.accumulate(&e.income);
        self.shared_kwh += e.flows.e_shared;
        self.exported_kwh += e.flows.e_export;
        self.imported_common_kwh += e.flows.e_import_common;
        self.res_kwh += e.flows.e_res;
        self.member_demand_kwh += e.flows.e_member_demand;
        self.common_load_kwh += e.e_common_load;
        self.charged_kwh += e.flows.e_ch;
        self.discharged_kwh += e.flows.e_dsc;
        self.curtailed_kwh += e.clamp.curtailed_kwh;
        self.clamped_hours += usize::from(e.clamp.clamped());
        self.solver_nodes += e.solver_nodes;
        self.max_solver_nodes = self.max_solver_nodes.max(e.solver_nodes);
    }
}

#[derive(Debug, Clone)]
pub struct SimulationLedger {
    pub entries: Vec<HourEntry>,
    pub totals: LedgerTotals,
    /// Wall-clock time of every controller solve; not part of the settled results.
    pub solve_times: Vec<Duration>,
}

impl SimulationLedger {
    /// Recomputes the totals from the entries.
    pub fn recomputed_totals(&self) -> LedgerTotals {
        let mut t = LedgerTotals {
            solves: self.totals.solves,
            controller_fallbacks: self.totals.controller_fallbacks,
            ..Default::default()
        };
        for e in &self.entries {
            t.add(e);
        }
        t
    }
}

/// Truth series the plant and the forecasters work on, derived from the scenario.
pub struct DerivedSignals {
    pub res: EnergySeries,
    pub common_load: EnergySeries,
    pub member_demand: EnergySeries,
}

impl DerivedSignals {
    pub fn from_scenario(s: &RecScenario) -> Result<Self, RecError> {
        let start = s.start();
        let n = s.len();
        let mut res = Vec::with_capacity(n);
        let mut load = Vec::with_capacity(n);
        let mut demand = Vec::with_capacity(n);
        for k in 0..n {
            res.push(s.res_generation.get(k)? + prosumer_export_surplus(s, k)?);
            load.push(s.common_load_at(k)?);
            demand.push(aggregate_demand(s, k)?);
        }
        Ok(Self {
            res: EnergySeries::non_negative(start, res)?,
            common_load: EnergySeries::non_negative(start, load)?,
            member_demand: EnergySeries::non_negative(start, demand)?,
        })
    }

    pub fn truth(&self, hour: usize) -> HourTruth {
        HourTruth {
            e_res: self.res.values()[hour],
            e_common_load: self.common_load.values()[hour],
            e_member_demand: self.member_demand.values()[hour],
        }
    }
}

enum Forecaster {
    Oracle,
    Model(ForecastModel),
}

impl Forecaster {
    fn build(choice: ForecasterChoice, series: &EnergySeries, start_hour: usize) -> Result<Self, ForecastError> {
        let history = series.window(0, start_hour);
        let (kind, order, features) = match choice {
            ForecasterChoice::Oracle => return Ok(Forecaster::Oracle),
            ForecasterChoice::Persistence => (ModelKind::Persistence, 0, Vec::new()),
            ForecasterChoice::SeasonalNaive24 => (ModelKind::SeasonalNaive24, 0, Vec::new()),
            ForecasterChoice::Ar { order } => (ModelKind::Ar, order, Vec::new()),
            ForecasterChoice::Arima { order } => (ModelKind::Arima, order, Vec::new()),
            ForecasterChoice::Regression => (ModelKind::LinearRegression, 0, default_regression_features()),
        };
        Ok(Forecaster::Model(forecast::fit(&history, kind, order, &features)?))
    }

    fn trajectory(&self, series: &EnergySeries, hour: usize, horizon: usize) -> Result<Vec<f64>, ForecastError> {
        match self {
            Forecaster::Oracle => Ok(series.values()[hour..hour + horizon].to_vec()),
            Forecaster::Model(m) => forecast::predict_steps(m, series, hour, horizon),
        }
    }
}

fn greedy_control(truth: &HourTruth, spec: &BatterySpec) -> Control {
    let surplus = truth.e_res - truth.e_common_load - truth.e_member_demand;
    if surplus > 0.0 {
        Control {
            e_ch: surplus.min(spec.hourly_limit_kwh),
            e_dsc: 0.0,
        }
    } else {
        let deficit = truth.e_member_demand + truth.e_common_load - truth.e_res;
        Control {
            e_ch: 0.0,
            e_dsc: deficit.max(0.0).min(spec.hourly_limit_kwh),
        }
    }
}

/// Runs the closed loop over `[start_hour, end_hour)`.
pub fn run(config: &SimulationConfig) -> Result<SimulationLedger, SimError> {
    config.validate()?;
    let scenario = &config.scenario;
    let spec = scenario.battery;
    let signals = DerivedSignals::from_scenario(scenario)?;
    let t = config.horizon;

    let (f_res, f_load, f_dem) = if config.controller == ControllerKind::Mpc && !config.forecasters.is_oracle() {
        (
            Forecaster::build(config.forecasters.res, &signals.res, config.start_hour)?,
            Forecaster::build(config.forecasters.common_load, &signals.common_load, config.start_hour)?,
            Forecaster::build(config.forecasters.member_demand, &signals.member_demand, config.start_hour)?,
        )
    } else {
        (Forecaster::Oracle, Forecaster::Oracle, Forecaster::Oracle)
    };

    let mut soc = spec.soc_init;
    let mut entries = Vec::with_capacity(config.end_hour - config.start_hour);
    let mut totals = LedgerTotals::default();
    let mut solve_times = Vec::new();

    for k in config.start_hour..config.end_hour {
        let truth = signals.truth(k);
        let mut planned_income = None;
        let mut plan_objective = None;
        let mut solver_nodes = 0;
        let (fc_res, fc_load, fc_dem, u) = match config.controller {
            ControllerKind::NoBattery => (truth.e_res, truth.e_common_load, truth.e_member_demand, Control { e_ch: 0.0, e_dsc: 0.0 }),
            ControllerKind::Greedy => (truth.e_res, truth.e_common_load, truth.e_member_demand, greedy_control(&truth, &spec)),
            ControllerKind::Mpc => {
                let inputs = MpcInputs {
                    soc_now: soc,
                    forecast_res: f_res.trajectory(&signals.res, k, t)?,
                    forecast_common_load: f_load.trajectory(&signals.common_load, k, t)?,
                    forecast_member_demand: f_dem.trajectory(&signals.member_demand, k, t)?,
                    export_price: scenario.tariffs.export_price.values()[k..k + t].to_vec(),
                    import_tariff: scenario.tariffs.import_tariff.values()[k..k + t].to_vec(),
                    battery: spec,
                    grid_limit_kwh: scenario.grid_limit_kwh,
                    rates: scenario.tariffs.rates,
                };
                let started = Instant::now();
                let solved = mpc::solve_step_with(&inputs, &config.milp);
                solve_times.push(started.elapsed());
                totals.solves += 1;
                let u = match solved {
                    Ok((u, plan)) => {
                        planned_income = Some(plan.step_income(&inputs, 0));
                        plan_objective = Some(plan.objective_value);
                        solver_nodes = plan.nodes_explored;
                        u
                    }
                    Err(MpcError::InfeasibleProblem) => {
                        // Forecast net exchange beyond the grid limit; hold the battery idle.
                        log::warn!("hour {k}: MPC infeasible under forecasts, battery held idle");
                        totals.controller_fallbacks += 1;
                        Control { e_ch: 0.0, e_dsc: 0.0 }
                    }
                    Err(source) => return Err(SimError::Controller { hour: k, source }),
                };
                (
                    inputs.forecast_res[0],
                    inputs.forecast_common_load[0],
                    inputs.forecast_member_demand[0],
                    u,
                )
            }
        };

        let (flows, clamp) = apply_control(&truth, u, soc, &spec, scenario.grid_limit_kwh);
        let income = hourly_income(&flows, &scenario.tariffs, k)?;
        let soc_after = spec
            .step(soc, flows.e_ch, flows.e_dsc)
            .map_err(|e| SimError::Invariant {
                hour: k,
                what: e.to_string(),
            })?
            .clamp(spec.soc_min, spec.soc_max);

        let balance = flows.e_res + flows.e_dsc + flows.e_import_common
            - (flows.e_export + flows.e_ch + truth.e_common_load);
        if balance.abs() > 1e-6 + clamp.import_excess_kwh {
            return Err(SimError::Invariant {
                hour: k,
                what: format!("energy balance residual {balance:e}"),
            });
        }

        let entry = HourEntry {
            hour: k,
            timestamp: scenario.res_generation.timestamp(k),
            flows,
            e_common_load: truth.e_common_load,
            soc_before: soc,
            soc_after,
            income,
            forecast_res: fc_res,
            forecast_common_load: fc_load,
            forecast_member_demand: fc_dem,
            planned_income,
            plan_objective,
            solver_nodes,
            clamp,
        };
        totals.add(&entry);
        entries.push(entry);
        soc = soc_after;
    }

    Ok(SimulationLedger {
        entries,
        totals,
        solve_times,
    })
}

/// Net exchange a scenario hour would have with the battery idle (positive: export).
pub fn idle_net_export(scenario: &RecScenario, hour: usize) -> Result<f64, RecError> {
    let surplus = prosumer_export_surplus(scenario, hour)?;
    Ok(signed_net_export(
        scenario.variant,
        scenario.res_generation.get(hour)?,
        scenario.common_load_at(hour)?,
        surplus,
        0.0,
        0.0,
    ))
}
