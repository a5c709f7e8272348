//! Report bundle: a summary and per-hour CSV files.
//!
//! Every number is written with exactly six decimals. Totals in the summary are sums of the
//! rounded hourly values, so re-summing a CSV column reproduces them exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use recopt_core::sim::{ForecasterChoice, SimulationConfig, SimulationLedger};

use crate::CliError;

/// Value in integer millionths, the unit all report arithmetic is done in.
pub fn micros(v: f64) -> i64 {
    (v * 1e6).round() as i64
}

pub fn fmt_micros(m: i64) -> String {
    let sign = if m < 0 { "-" } else { "" };
    let a = m.unsigned_abs();
    format!("{sign}{}.{:06}", a / 1_000_000, a % 1_000_000)
}

/// Six-decimal rendering without a negative zero.
pub fn fmt6(v: f64) -> String {
    fmt_micros(micros(v))
}

/// Parses a six-decimal field back into millionths.
pub fn parse_micros(s: &str) -> Option<i64> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int, frac) = body.split_once('.')?;
    if frac.len() != 6 {
        return None;
    }
    let v = int.parse::<i64>().ok()? * 1_000_000 + frac.parse::<i64>().ok()?;
    Some(if neg { -v } else { v })
}

pub fn fmt_time(t: DateTime<Utc>) -> String {
    t.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

pub const LEDGER_COLUMNS: [&str; 19] = [
    "timestamp",
    "hour",
    "e_res",
    "e_ch",
    "e_dsc",
    "e_export",
    "e_import_common",
    "e_common_load",
    "e_member_demand",
    "e_shared",
    "soc_before",
    "soc_after",
    "income_restitution",
    "income_incentive",
    "income_market",
    "import_cost",
    "income_total",
    "e_curtailed",
    "clamped",
];

/// Ledger columns whose sums appear in the summary, with their summary keys.
pub const SUMMED_COLUMNS: [(&str, &str); 12] = [
    ("income_total", "income_total_eur"),
    ("income_restitution", "income_restitution_eur"),
    ("income_incentive", "income_incentive_eur"),
    ("income_market", "income_market_eur"),
    ("import_cost", "import_cost_eur"),
    ("e_shared", "shared_kwh"),
    ("e_export", "exported_kwh"),
    ("e_import_common", "imported_common_kwh"),
    ("e_res", "res_kwh"),
    ("e_ch", "charged_kwh"),
    ("e_dsc", "discharged_kwh"),
    ("e_curtailed", "curtailed_kwh"),
];

struct Table {
    header: String,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(cols: &[&str]) -> Self {
        Self {
            header: cols.join(","),
            rows: Vec::new(),
        }
    }

    fn render(&self) -> String {
        let mut s = String::with_capacity(self.rows.len() * 128);
        s.push_str(&self.header);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

/// In-memory report files, keyed by file name in write order.
pub struct ReportBundle {
    pub files: Vec<(String, String)>,
}

fn forecast_name(choice: ForecasterChoice) -> String {
    match choice {
        ForecasterChoice::Oracle => "oracle".into(),
        ForecasterChoice::Persistence => "persistence".into(),
        ForecasterChoice::SeasonalNaive24 => "seasonal-naive".into(),
        ForecasterChoice::Ar { order } => format!("ar({order})"),
        ForecasterChoice::Arima { order } => format!("arima({order},1,0)"),
        ForecasterChoice::Regression => "regression".into(),
    }
}

impl ReportBundle {
    pub fn build(config: &SimulationConfig, forecaster: ForecasterChoice, ledger: &SimulationLedger) -> Self {
        let mut ledger_csv = Table::new(&LEDGER_COLUMNS);
        let mut shared = Table::new(&["timestamp", "e_shared", "e_export", "e_member_demand"]);
        let mut flows = Table::new(&["timestamp", "e_res", "e_common_load", "e_ch", "e_dsc", "e_export", "e_import_common"]);
        let mut soc = Table::new(&["timestamp", "soc"]);
        let mut forecast = Table::new(&[
            "timestamp",
            "res_actual",
            "res_forecast",
            "common_load_actual",
            "common_load_forecast",
            "member_demand_actual",
            "member_demand_forecast",
        ]);
        let mut sums = [0i64; SUMMED_COLUMNS.len()];

        for e in &ledger.entries {
            let ts = fmt_time(e.timestamp);
            let f = &e.flows;
            let row = vec![
                ts.clone(),
                e.hour.to_string(),
                fmt6(f.e_res),
                fmt6(f.e_ch),
                fmt6(f.e_dsc),
                fmt6(f.e_export),
                fmt6(f.e_import_common),
                fmt6(e.e_common_load),
                fmt6(f.e_member_demand),
                fmt6(f.e_shared),
                fmt6(e.soc_before),
                fmt6(e.soc_after),
                fmt6(e.income.restitution_component),
                fmt6(e.income.incentive_component),
                fmt6(e.income.market_component),
                fmt6(e.income.import_cost),
                fmt6(e.income.total),
                fmt6(e.clamp.curtailed_kwh),
                u8::from(e.clamp.clamped()).to_string(),
            ];
            for (i, (col, _)) in SUMMED_COLUMNS.iter().enumerate() {
                let idx = LEDGER_COLUMNS.iter().position(|c| c == col).expect("summed column exists");
                sums[i] += parse_micros(&row[idx]).expect("six-decimal field");
            }
            ledger_csv.rows.push(row);
            shared.rows.push(vec![ts.clone(), fmt6(f.e_shared), fmt6(f.e_export), fmt6(f.e_member_demand)]);
            flows.rows.push(vec![
                ts.clone(),
                fmt6(f.e_res),
                fmt6(e.e_common_load),
                fmt6(f.e_ch),
                fmt6(f.e_dsc),
                fmt6(f.e_export),
                fmt6(f.e_import_common),
            ]);
            soc.rows.push(vec![ts.clone(), fmt6(e.soc_after)]);
            forecast.rows.push(vec![
                ts,
                fmt6(f.e_res + e.clamp.curtailed_kwh),
                fmt6(e.forecast_res),
                fmt6(e.e_common_load),
                fmt6(e.forecast_common_load),
                fmt6(f.e_member_demand),
                fmt6(e.forecast_member_demand),
            ]);
        }

        let t = &ledger.totals;
        let mut summary = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(summary, "{k}: {v}");
        };
        let s = &config.scenario;
        kv("format", "recopt-report 1".into());
        kv("variant", format!("{:?}", s.variant).to_lowercase());
        kv("controller", format!("{:?}", config.controller).to_lowercase());
        kv("forecaster", forecast_name(forecaster));
        kv("horizon_h", config.horizon.to_string());
        if let (Some(first), Some(last)) = (ledger.entries.first(), ledger.entries.last()) {
            kv("first_hour", fmt_time(first.timestamp));
            kv("last_hour", fmt_time(last.timestamp));
        }
        kv("hours", ledger.entries.len().to_string());
        kv("battery_capacity_kwh", fmt6(s.battery.capacity_kwh));
        kv("battery_hourly_limit_kwh", fmt6(s.battery.hourly_limit_kwh));
        kv("grid_limit_kwh", fmt6(s.grid_limit_kwh));
        for (i, (_, key)) in SUMMED_COLUMNS.iter().enumerate() {
            kv(key, fmt_micros(sums[i]));
        }
        kv("final_soc", ledger.entries.last().map_or_else(|| fmt6(s.battery.soc_init), |e| fmt6(e.soc_after)));
        kv("clamped_hours", t.clamped_hours.to_string());
        kv("mpc_solves", t.solves.to_string());
        kv("mpc_fallbacks", t.controller_fallbacks.to_string());
        kv("bnb_nodes_total", t.solver_nodes.to_string());
        kv("bnb_nodes_max", t.max_solver_nodes.to_string());

        let mut files = vec![
            ("summary.txt".to_string(), summary),
            ("ledger.csv".to_string(), ledger_csv.render()),
            ("shared.csv".to_string(), shared.render()),
            ("flows.csv".to_string(), flows.render()),
            ("soc.csv".to_string(), soc.render()),
        ];
        if forecaster != ForecasterChoice::Oracle && config.controller == recopt_core::sim::ControllerKind::Mpc {
            files.push(("forecast.csv".to_string(), forecast.render()));
        }
        Self { files }
    }

    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        self.files
            .iter()
            .map(|(name, content)| {
                let path = dir.join(name);
                fs::write(&path, content).map_err(|e| CliError::io(&path, e))?;
                Ok(path)
            })
            .collect()
    }
}

/// Reads `key: value` lines of a summary.
pub fn parse_summary(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| l.split_once(": "))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}
