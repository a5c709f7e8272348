use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use recopt_core::forecast::{self, default_regression_features, ForecastModel, ModelKind};
use recopt_core::mpc::{self, MpcInputs};
use recopt_core::sim::{self, DerivedSignals, ForecasterChoice, SimError};
use recopt_core::EnergySeries;

use crate::config::{load_scenario, Override};
use crate::report::{fmt6, fmt_time, ReportBundle};
use crate::CliError;

fn sim_error(e: SimError) -> CliError {
    match e {
        SimError::InvalidConfig(_) | SimError::Scenario(_) | SimError::Forecast(_) => CliError::Validation(e.to_string()),
        SimError::Controller { .. } | SimError::Invariant { .. } => CliError::Runtime(e.to_string()),
    }
}

/// Validates a scenario without running it or writing anything.
pub fn check(scenario: &Path, overrides: &[Override]) -> Result<String, CliError> {
    let loaded = load_scenario(scenario, overrides)?;
    let c = &loaded.simulation;
    Ok(format!(
        "ok: {} hours of data, simulating hours {}..{} with horizon {}",
        c.scenario.len(),
        c.start_hour,
        c.end_hour,
        c.horizon
    ))
}

/// Runs the closed loop and writes the report bundle to `out`.
pub fn run(scenario: &Path, out: &Path, overrides: &[Override]) -> Result<ReportBundle, CliError> {
    let loaded = load_scenario(scenario, overrides)?;
    let ledger = sim::run(&loaded.simulation).map_err(sim_error)?;
    log::info!(
        "simulated {} hours, income {:.2} EUR",
        ledger.entries.len(),
        ledger.totals.income.total
    );
    let bundle = ReportBundle::build(&loaded.simulation, loaded.forecaster, &ledger);
    bundle.write(out)?;
    Ok(bundle)
}

fn candidates(order: usize) -> Vec<(String, ModelKind, usize)> {
    vec![
        ("persistence".into(), ModelKind::Persistence, 0),
        ("seasonal-naive".into(), ModelKind::SeasonalNaive24, 0),
        (format!("ar({order})"), ModelKind::Ar, order),
        (format!("arima({order},1,0)"), ModelKind::Arima, order),
        ("regression".into(), ModelKind::LinearRegression, 0),
    ]
}

fn evaluate_model(model: &ForecastModel, series: &EnergySeries, from: usize, to: usize) -> Result<Vec<(String, f64, f64, f64)>, CliError> {
    let err = |e: forecast::ForecastError| CliError::Runtime(e.to_string());
    let one = forecast::rolling_one_step(model, series, from, to).map_err(err)?;
    let m1 = forecast::evaluate(&series.values()[from..to], &one).map_err(err)?;
    let mut out = vec![("1h".to_string(), m1.mae, m1.rmse, m1.nrmse)];

    // 24 hours ahead, issued at every hour of day 0 in the window.
    let mut actual = Vec::new();
    let mut predicted = Vec::new();
    let mut k = from;
    while k + 24 <= to {
        predicted.extend(forecast::predict_steps(model, series, k, 24).map_err(err)?);
        actual.extend_from_slice(&series.values()[k..k + 24]);
        k += 24;
    }
    if !actual.is_empty() {
        let m = forecast::evaluate(&actual, &predicted).map_err(err)?;
        out.push(("24h".to_string(), m.mae, m.rmse, m.nrmse));
    }
    Ok(out)
}

/// Compares forecasters on the scenario's signals over the simulation window.
///
/// Models are fitted on the data before the window; models lacking history are skipped.
pub fn forecast_eval(scenario: &Path, out: Option<&Path>, overrides: &[Override]) -> Result<String, CliError> {
    let loaded = load_scenario(scenario, overrides)?;
    let c = &loaded.simulation;
    let order = match loaded.forecaster {
        ForecasterChoice::Ar { order } | ForecasterChoice::Arima { order } => order,
        _ => 2,
    };
    let signals = DerivedSignals::from_scenario(&c.scenario).map_err(|e| CliError::Validation(e.to_string()))?;
    let (from, to) = (c.start_hour, c.end_hour.min(c.scenario.len()));
    let mut csv = String::from("signal,model,horizon,mae,rmse,nrmse\n");
    for (name, series) in [
        ("res", &signals.res),
        ("common_load", &signals.common_load),
        ("member_demand", &signals.member_demand),
    ] {
        let history = series.window(0, from);
        for (label, kind, lag) in candidates(order) {
            let features = if kind == ModelKind::LinearRegression { default_regression_features() } else { Vec::new() };
            let model = match forecast::fit(&history, kind, lag, &features) {
                Ok(m) => m,
                Err(e) => {
                    log::warn!("{name}/{label}: skipped ({e})");
                    continue;
                }
            };
            for (h, mae, rmse, nrmse) in evaluate_model(&model, series, from, to)? {
                let _ = writeln!(csv, "{name},{label},{h},{},{},{}", fmt6(mae), fmt6(rmse), fmt6(nrmse));
            }
        }
    }
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let path = dir.join("forecast_eval.csv");
        fs::write(&path, &csv).map_err(|e| CliError::io(&path, e))?;
    }
    Ok(csv)
}

/// Builds and solves the MPC instance of one hour with oracle forecasts and the initial SoC.
///
/// Returns the instance in LP format and the plan as CSV.
pub fn solve_once(scenario: &Path, hour: Option<usize>, out: Option<&Path>, overrides: &[Override]) -> Result<(String, String), CliError> {
    let loaded = load_scenario(scenario, overrides)?;
    let c = &loaded.simulation;
    let s = &c.scenario;
    let k = hour.unwrap_or(c.start_hour);
    let t = c.horizon;
    if k + t > s.len() {
        return Err(CliError::Validation(format!("hour {k} plus horizon {t} exceeds the {} hours of data", s.len())));
    }
    let signals = DerivedSignals::from_scenario(s).map_err(|e| CliError::Validation(e.to_string()))?;
    let inputs = MpcInputs {
        soc_now: s.battery.soc_init,
        forecast_res: signals.res.values()[k..k + t].to_vec(),
        forecast_common_load: signals.common_load.values()[k..k + t].to_vec(),
        forecast_member_demand: signals.member_demand.values()[k..k + t].to_vec(),
        export_price: s.tariffs.export_price.values()[k..k + t].to_vec(),
        import_tariff: s.tariffs.import_tariff.values()[k..k + t].to_vec(),
        battery: s.battery,
        grid_limit_kwh: s.grid_limit_kwh,
        rates: s.tariffs.rates,
    };
    let problem = mpc::build_problem(&inputs).map_err(|e| CliError::Validation(e.to_string()))?;
    let (_, plan) = mpc::solve_step_with(&inputs, &c.milp).map_err(|e| CliError::Runtime(e.to_string()))?;
    let mut csv = String::from("timestamp,e_ch,e_dsc,e_export,e_import_common,e_shared,soc_next,charge_mode,export_mode\n");
    for tau in 0..t {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            fmt_time(s.res_generation.timestamp(k + tau)),
            fmt6(plan.e_ch[tau]),
            fmt6(plan.e_dsc[tau]),
            fmt6(plan.e_export[tau]),
            fmt6(plan.e_import_common[tau]),
            fmt6(plan.e_shared[tau]),
            fmt6(plan.soc_next[tau]),
            plan.charge_mode[tau],
            plan.export_mode[tau]
        );
    }
    let _ = writeln!(csv, "# objective_eur {}", fmt6(plan.objective_value));
    let lp = problem.to_lp_format();
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        for (name, content) in [("instance.lp", &lp), ("plan.csv", &csv)] {
            let path = dir.join(name);
            fs::write(&path, content).map_err(|e| CliError::io(&path, e))?;
        }
    }
    Ok((lp, csv))
}
