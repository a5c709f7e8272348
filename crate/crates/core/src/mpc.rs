//! Receding-horizon controller of the community battery (Configuration 2, passive members).
//!
//! Each step builds a MILP over `T` hours with eight variables per hour: charge, discharge,
//! export, common import, shared energy, end-of-hour SoC, and the two exclusivity binaries.
//! The objective is the summed hourly community income.

use recopt_milp::{solve_milp, MilpError, MilpOptions, MilpProblem, Relation, SolveStatus};
use thiserror::Error;

use crate::{BatterySpec, IncentiveRates, COMPLEMENTARITY_TOL};

/// Variables per hour of the horizon.
pub const VARS_PER_STEP: usize = 8;

const E_CH: usize = 0;
const E_DSC: usize = 1;
const E_EXP: usize = 2;
const E_IMP: usize = 3;
const E_SH: usize = 4;
const SOC: usize = 5;
const D_B: usize = 6;
const D_E: usize = 7;

/// Index of a per-hour variable in the MILP built by [`build_problem`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepVar {
    Charge,
    Discharge,
    Export,
    ImportCommon,
    Shared,
    SocNext,
    ChargeMode,
    ExportMode,
}

impl StepVar {
    pub fn index(self, tau: usize) -> usize {
        let k = match self {
            StepVar::Charge => E_CH,
            StepVar::Discharge => E_DSC,
            StepVar::Export => E_EXP,
            StepVar::ImportCommon => E_IMP,
            StepVar::Shared => E_SH,
            StepVar::SocNext => SOC,
            StepVar::ChargeMode => D_B,
            StepVar::ExportMode => D_E,
        };
        VARS_PER_STEP * tau + k
    }
}

#[derive(Debug, Clone, Error)]
pub enum MpcError {
    #[error("invalid MPC inputs: {0}")]
    InvalidInputs(String),
    #[error("MPC problem is infeasible")]
    InfeasibleProblem,
    #[error(transparent)]
    Solver(#[from] MilpError),
}

/// Everything the controller knows at hour `k`: forecasts and prices over the horizon and the current SoC.
#[derive(Debug, Clone, PartialEq)]
pub struct MpcInputs {
    pub soc_now: f64,
    pub forecast_res: Vec<f64>,
    pub forecast_common_load: Vec<f64>,
    pub forecast_member_demand: Vec<f64>,
    pub export_price: Vec<f64>,
    pub import_tariff: Vec<f64>,
    pub battery: BatterySpec,
    pub grid_limit_kwh: f64,
    pub rates: IncentiveRates,
}

impl MpcInputs {
    /// Configuration 1 has no common load; it is the Configuration 2 problem with `Ê_l ≡ 0`.
    #[allow(clippy::too_many_arguments)]
    pub fn config1(
        soc_now: f64,
        forecast_res: Vec<f64>,
        forecast_member_demand: Vec<f64>,
        export_price: Vec<f64>,
        import_tariff: Vec<f64>,
        battery: BatterySpec,
        grid_limit_kwh: f64,
        rates: IncentiveRates,
    ) -> Self {
        let horizon = forecast_res.len();
        Self {
            soc_now,
            forecast_res,
            forecast_common_load: vec![0.0; horizon],
            forecast_member_demand,
            export_price,
            import_tariff,
            battery,
            grid_limit_kwh,
            rates,
        }
    }

    pub fn horizon(&self) -> usize {
        self.forecast_res.len()
    }

    pub fn validate(&self) -> Result<(), MpcError> {
        let bad = |m: String| Err(MpcError::InvalidInputs(m));
        let t = self.horizon();
        if t == 0 {
            return bad("horizon must be at least one hour".into());
        }
        for (name, s) in [
            ("common load forecast", &self.forecast_common_load),
            ("member demand forecast", &self.forecast_member_demand),
            ("export price", &self.export_price),
            ("import tariff", &self.import_tariff),
        ] {
            if s.len() != t {
                return bad(format!("{name} has {} values, horizon is {t}", s.len()));
            }
        }
        for (name, s) in [
            ("RES forecast", &self.forecast_res),
            ("common load forecast", &self.forecast_common_load),
            ("member demand forecast", &self.forecast_member_demand),
        ] {
            if s.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return bad(format!("{name} must be finite and non-negative"));
            }
        }
        if self.export_price.iter().chain(&self.import_tariff).any(|v| !v.is_finite()) {
            return bad("prices must be finite".into());
        }
        self.battery.validate().map_err(|e| MpcError::InvalidInputs(e.to_string()))?;
        let b = &self.battery;
        if self.soc_now < b.soc_min - crate::SOC_TOL || self.soc_now > b.soc_max + crate::SOC_TOL {
            return bad(format!("current SoC {} outside [{}, {}]", self.soc_now, b.soc_min, b.soc_max));
        }
        if !(self.grid_limit_kwh > 0.0 && self.grid_limit_kwh.is_finite()) {
            return bad("grid limit must be positive".into());
        }
        let r = self.rates;
        if !(r.restitution >= 0.0 && r.incentive >= 0.0) {
            return bad("incentive rates must be non-negative".into());
        }
        Ok(())
    }
}

/// Assembles the horizon MILP: maximize Σ_τ (t_r + t_mise)·E_s + p_e·E_e − t_i·E_i0.
pub fn build_problem(inputs: &MpcInputs) -> Result<MilpProblem, MpcError> {
    inputs.validate()?;
    let b = &inputs.battery;
    let eg = inputs.grid_limit_kwh;
    let eb = b.hourly_limit_kwh;
    let shared_rate = inputs.rates.per_shared_kwh();
    let mut p = MilpProblem::new();

    for tau in 0..inputs.horizon() {
        let res = inputs.forecast_res[tau];
        let ch = p.add_var(format!("e_ch_{tau}"), 0.0, res.min(eb), 0.0);
        let dsc = p.add_var(format!("e_dsc_{tau}"), 0.0, eb, 0.0);
        let exp = p.add_var(format!("e_exp_{tau}"), 0.0, eg, inputs.export_price[tau]);
        let imp = p.add_var(format!("e_imp_{tau}"), 0.0, eg, -inputs.import_tariff[tau]);
        let sh = p.add_var(format!("e_sh_{tau}"), 0.0, inputs.forecast_member_demand[tau], shared_rate);
        let soc = p.add_var(format!("soc_{}", tau + 1), b.soc_min, b.soc_max, 0.0);
        let db = p.add_binary(format!("d_b_{tau}"), 0.0);
        let de = p.add_binary(format!("d_e_{tau}"), 0.0);
        debug_assert_eq!(ch, StepVar::Charge.index(tau));
        debug_assert_eq!(de, StepVar::ExportMode.index(tau));

        // SoC recursion.
        let mut soc_row = vec![
            (soc, 1.0),
            (ch, -b.eff_charge / b.capacity_kwh),
            (dsc, 1.0 / (b.eff_discharge * b.capacity_kwh)),
        ];
        let soc_rhs = if tau == 0 {
            inputs.soc_now
        } else {
            soc_row.push((StepVar::SocNext.index(tau - 1), -1.0));
            0.0
        };
        p.add_named_constraint(format!("soc_{tau}"), soc_row, Relation::Eq, soc_rhs);

        // Energy balance: E_e − E_i0 = Ê_res − E_ch + E_dsc − Ê_l.
        p.add_named_constraint(
            format!("balance_{tau}"),
            vec![(exp, 1.0), (imp, -1.0), (ch, 1.0), (dsc, -1.0)],
            Relation::Eq,
            res - inputs.forecast_common_load[tau],
        );

        // Charge/discharge exclusivity.
        p.add_named_constraint(format!("charge_mode_{tau}"), vec![(ch, 1.0), (db, -eb)], Relation::Le, 0.0);
        p.add_named_constraint(format!("discharge_mode_{tau}"), vec![(dsc, 1.0), (db, eb)], Relation::Le, eb);

        // Shared energy bounded by export; the demand cap is the variable's upper bound.
        p.add_named_constraint(format!("shared_{tau}"), vec![(sh, 1.0), (exp, -1.0)], Relation::Le, 0.0);

        // Export/import exclusivity.
        p.add_named_constraint(format!("export_mode_{tau}"), vec![(exp, 1.0), (de, -eg)], Relation::Le, 0.0);
        p.add_named_constraint(format!("import_mode_{tau}"), vec![(imp, 1.0), (de, eg)], Relation::Le, eg);
    }
    Ok(p)
}

/// Optimal trajectories over the horizon. Index `τ` refers to hour `k + τ`.
#[derive(Debug, Clone, PartialEq)]
pub struct MpcPlan {
    pub e_ch: Vec<f64>,
    pub e_dsc: Vec<f64>,
    pub e_export: Vec<f64>,
    pub e_import_common: Vec<f64>,
    pub e_shared: Vec<f64>,
    /// SoC at the end of each hour.
    pub soc_next: Vec<f64>,
    pub charge_mode: Vec<u8>,
    pub export_mode: Vec<u8>,
    /// Planned income over the horizon (€).
    pub objective_value: f64,
    pub nodes_explored: usize,
    pub simplex_iterations: usize,
    pub gap: f64,
}

impl MpcPlan {
    pub fn horizon(&self) -> usize {
        self.e_ch.len()
    }

    /// Planned income of hour `τ` under the given inputs.
    pub fn step_income(&self, inputs: &MpcInputs, tau: usize) -> f64 {
        inputs.rates.per_shared_kwh() * self.e_shared[tau] + inputs.export_price[tau] * self.e_export[tau]
            - inputs.import_tariff[tau] * self.e_import_common[tau]
    }
}

/// First-step control `(E_ch(k), E_dsc(k))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Control {
    pub e_ch: f64,
    pub e_dsc: f64,
}

fn extract_plan(inputs: &MpcInputs, x: &[f64]) -> MpcPlan {
    let t = inputs.horizon();
    let get = |v: StepVar, tau: usize| x[v.index(tau)];
    let mut plan = MpcPlan {
        e_ch: Vec::with_capacity(t),
        e_dsc: Vec::with_capacity(t),
        e_export: Vec::with_capacity(t),
        e_import_common: Vec::with_capacity(t),
        e_shared: Vec::with_capacity(t),
        soc_next: Vec::with_capacity(t),
        charge_mode: Vec::with_capacity(t),
        export_mode: Vec::with_capacity(t),
        objective_value: 0.0,
        nodes_explored: 0,
        simplex_iterations: 0,
        gap: 0.0,
    };
    // Clears round-off below this magnitude so that reported exclusive pairs are exact.
    let snap = |v: f64| if v.abs() < 1e-9 { 0.0 } else { v };
    for tau in 0..t {
        let ch = snap(get(StepVar::Charge, tau));
        let dsc = snap(get(StepVar::Discharge, tau));
        let exp = snap(get(StepVar::Export, tau));
        let imp = snap(get(StepVar::ImportCommon, tau));
        plan.e_ch.push(ch);
        plan.e_dsc.push(dsc);
        plan.e_export.push(exp);
        plan.e_import_common.push(imp);
        // At optimum the LP drives E_s to min(E_e, Ê_c); report that value without round-off.
        plan.e_shared.push(exp.min(inputs.forecast_member_demand[tau]));
        plan.soc_next.push(get(StepVar::SocNext, tau));
        // Degenerate binaries are canonicalized: idle battery reports discharge mode, idle grid reports export mode.
        let db = get(StepVar::ChargeMode, tau).round() as u8;
        let de = get(StepVar::ExportMode, tau).round() as u8;
        plan.charge_mode.push(if ch == 0.0 && dsc == 0.0 { 0 } else { db });
        plan.export_mode.push(if exp == 0.0 && imp == 0.0 { 1 } else { de });
    }
    plan
}

/// Solves the horizon problem and returns the first-step control with the full plan.
pub fn solve_step(inputs: &MpcInputs) -> Result<(Control, MpcPlan), MpcError> {
    solve_step_with(inputs, &MilpOptions::default())
}

pub fn solve_step_with(inputs: &MpcInputs, options: &MilpOptions) -> Result<(Control, MpcPlan), MpcError> {
    let problem = build_problem(inputs)?;
    let sol = solve_milp(&problem, options)?;
    match sol.status {
        SolveStatus::Optimal => {}
        // Unbounded cannot occur: every variable is boxed.
        SolveStatus::Infeasible | SolveStatus::Unbounded => return Err(MpcError::InfeasibleProblem),
    }
    let mut plan = extract_plan(inputs, &sol.x);
    plan.objective_value = sol.objective_value;
    plan.nodes_explored = sol.nodes_explored;
    plan.simplex_iterations = sol.iterations;
    plan.gap = sol.gap;
    debug_assert!(plan.e_ch[0] * plan.e_dsc[0] <= COMPLEMENTARITY_TOL);
    let u = Control {
        e_ch: plan.e_ch[0],
        e_dsc: plan.e_dsc[0],
    };
    Ok((u, plan))
}
