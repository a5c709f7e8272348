//! Hourly settlement of the community: aggregated demand, net export, shared energy and income.

use crate::{RecError, RecScenario, TariffSchedule, Variant, COMPLEMENTARITY_TOL};

/// Realized or planned energy flows of one hour, all kWh and non-negative.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HourlyFlows {
    pub e_res: f64,
    pub e_ch: f64,
    pub e_dsc: f64,
    pub e_export: f64,
    pub e_import_common: f64,
    pub e_member_demand: f64,
    pub e_shared: f64,
}

impl HourlyFlows {
    pub fn validate(&self) -> Result<(), RecError> {
        let all = [
            self.e_res,
            self.e_ch,
            self.e_dsc,
            self.e_export,
            self.e_import_common,
            self.e_member_demand,
            self.e_shared,
        ];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(RecError::NegativeFlow("hourly flows"));
        }
        if self.e_ch * self.e_dsc > COMPLEMENTARITY_TOL {
            return Err(RecError::SimultaneousChargeDischarge {
                e_ch: self.e_ch,
                e_dsc: self.e_dsc,
            });
        }
        if self.e_export * self.e_import_common > COMPLEMENTARITY_TOL {
            return Err(RecError::SimultaneousExportImport {
                e_export: self.e_export,
                e_import: self.e_import_common,
            });
        }
        Ok(())
    }
}

/// Income of one hour (€), split by remuneration component.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IncomeBreakdown {
    pub restitution_component: f64,
    pub incentive_component: f64,
    pub market_component: f64,
    pub import_cost: f64,
    pub total: f64,
}

impl IncomeBreakdown {
    fn from_components(restitution: f64, incentive: f64, market: f64, import_cost: f64) -> Self {
        Self {
            restitution_component: restitution,
            incentive_component: incentive,
            market_component: market,
            import_cost,
            total: restitution + incentive + market - import_cost,
        }
    }

    /// Component-wise sum; `total` is recomputed from the summed components.
    pub fn accumulate(&mut self, other: &IncomeBreakdown) {
        *self = Self::from_components(
            self.restitution_component + other.restitution_component,
            self.incentive_component + other.incentive_component,
            self.market_component + other.market_component,
            self.import_cost + other.import_cost,
        );
    }
}

/// Aggregated member demand: consumers plus the positive part of each prosumer's net exchange.
pub fn aggregate_demand(scenario: &RecScenario, hour: usize) -> Result<f64, RecError> {
    let mut total = 0.0;
    for m in &scenario.members {
        total += m.get(hour)?;
    }
    if scenario.variant == Variant::Config3 {
        for p in &scenario.prosumers {
            total += p.get(hour)?.max(0.0);
        }
    }
    scenario.res_generation.get(hour)?;
    Ok(total)
}

/// Renewable surplus exported by prosumers: `Σ max(0, -net)`. Zero outside `Config3`.
pub fn prosumer_export_surplus(scenario: &RecScenario, hour: usize) -> Result<f64, RecError> {
    scenario.res_generation.get(hour)?;
    if scenario.variant != Variant::Config3 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for p in &scenario.prosumers {
        total += (-p.get(hour)?).max(0.0);
    }
    Ok(total)
}

/// Shared energy: the smaller of exported renewable energy and member demand.
pub fn shared_energy(e_export: f64, e_member_demand: f64) -> Result<f64, RecError> {
    if !(e_export >= 0.0 && e_member_demand >= 0.0) {
        return Err(RecError::NegativeFlow("shared energy inputs"));
    }
    Ok(e_export.min(e_member_demand))
}

/// Signed net export `N` of the common property for the given variant.
pub fn signed_net_export(variant: Variant, e_res: f64, e_common_load: f64, surplus: f64, e_ch: f64, e_dsc: f64) -> f64 {
    match variant {
        Variant::Config1 => e_res + e_dsc - e_ch,
        Variant::Config2 => e_res + e_dsc - e_ch - e_common_load,
        Variant::Config3 => e_res + e_dsc - e_ch - e_common_load + surplus,
    }
}

/// Splits a signed net export into `(export, import)`.
pub fn split_net(net: f64) -> (f64, f64) {
    (net.max(0.0), (-net).max(0.0))
}

/// Export and common-property import for a battery action, checked against the grid limit.
pub fn net_export_balance(scenario: &RecScenario, hour: usize, e_ch: f64, e_dsc: f64) -> Result<(f64, f64), RecError> {
    if !(e_ch >= 0.0 && e_dsc >= 0.0) {
        return Err(RecError::NegativeFlow("battery exchange"));
    }
    if e_ch * e_dsc > COMPLEMENTARITY_TOL {
        return Err(RecError::SimultaneousChargeDischarge { e_ch, e_dsc });
    }
    let e_res = scenario.res_generation.get(hour)?;
    let load = scenario.common_load_at(hour)?;
    let surplus = prosumer_export_surplus(scenario, hour)?;
    let net = signed_net_export(scenario.variant, e_res, load, surplus, e_ch, e_dsc);
    if net.abs() > scenario.grid_limit_kwh {
        return Err(RecError::GridLimitExceeded {
            net,
            limit: scenario.grid_limit_kwh,
        });
    }
    Ok(split_net(net))
}

/// Community income of one hour from its settled flows.
pub fn hourly_income(flows: &HourlyFlows, tariffs: &TariffSchedule, hour: usize) -> Result<IncomeBreakdown, RecError> {
    flows.validate()?;
    let p_e = tariffs.export_price.get(hour)?;
    let t_i = tariffs.import_tariff.get(hour)?;
    Ok(IncomeBreakdown::from_components(
        tariffs.rates.restitution * flows.e_shared,
        tariffs.rates.incentive * flows.e_shared,
        p_e * flows.e_export,
        t_i * flows.e_import_common,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{tariff_preset, BatterySpec, CommunityKind, EnergySeries, IncentiveRates};
    use approx::assert_abs_diff_eq;
    use chrono::{TimeZone, Utc};
    use proptest::prelude::*;

    fn series(v: &[f64]) -> EnergySeries {
        EnergySeries::new(Utc.with_ymd_and_hms(2021, 7, 1, 0, 0, 0).unwrap(), v.to_vec()).unwrap()
    }

    fn scenario(variant: Variant, members: &[f64], prosumers: &[f64], res: f64, load: Option<f64>) -> RecScenario {
        RecScenario {
            variant,
            members: members.iter().map(|&v| series(&[v])).collect(),
            prosumers: prosumers.iter().map(|&v| series(&[v])).collect(),
            common_load: load.map(|l| series(&[l])),
            res_generation: series(&[res]),
            battery: BatterySpec::reference(),
            grid_limit_kwh: 100.0,
            tariffs: TariffSchedule {
                rates: tariff_preset(CommunityKind::Cer),
                export_price: series(&[0.1]),
                import_tariff: series(&[0.2]),
            },
        }
    }

    #[test]
    fn aggregate_demand_examples() {
        let s = scenario(Variant::Config2, &[3.0, 4.0, 5.0], &[], 0.0, Some(0.0));
        assert_eq!(aggregate_demand(&s, 0).unwrap(), 12.0);
        let s = scenario(Variant::Config3, &[3.0, 4.0], &[2.0, -5.0], 0.0, Some(0.0));
        assert_eq!(aggregate_demand(&s, 0).unwrap(), 9.0);
        let s = scenario(Variant::Config1, &[], &[], 0.0, None);
        assert_eq!(aggregate_demand(&s, 0).unwrap(), 0.0);
        assert!(matches!(aggregate_demand(&s, 1), Err(RecError::HourOutOfRange { .. })));
    }

    #[test]
    fn prosumer_surplus_examples() {
        let s = scenario(Variant::Config3, &[], &[2.0, -5.0], 0.0, Some(0.0));
        assert_eq!(prosumer_export_surplus(&s, 0).unwrap(), 5.0);
        let s = scenario(Variant::Config3, &[], &[2.0, 1.0], 0.0, Some(0.0));
        assert_eq!(prosumer_export_surplus(&s, 0).unwrap(), 0.0);
        let s = scenario(Variant::Config3, &[], &[-1.0, -1.0, 0.0], 0.0, Some(0.0));
        assert_eq!(prosumer_export_surplus(&s, 0).unwrap(), 2.0);
        let s = scenario(Variant::Config2, &[1.0], &[], 0.0, Some(0.0));
        assert_eq!(prosumer_export_surplus(&s, 0).unwrap(), 0.0);
    }

    #[test]
    fn shared_energy_examples() {
        assert_eq!(shared_energy(50.0, 30.0).unwrap(), 30.0);
        assert_eq!(shared_energy(0.0, 42.0).unwrap(), 0.0);
        assert_eq!(shared_energy(60.0, 60.0).unwrap(), 60.0);
        assert!(shared_energy(-1.0, 2.0).is_err());
    }

    #[test]
    fn net_export_examples() {
        let s = scenario(Variant::Config1, &[], &[], 10.0, None);
        assert_eq!(net_export_balance(&s, 0, 0.0, 5.0).unwrap(), (15.0, 0.0));
        let s = scenario(Variant::Config2, &[], &[], 10.0, Some(25.0));
        assert_eq!(net_export_balance(&s, 0, 0.0, 0.0).unwrap(), (0.0, 15.0));
        let s = scenario(Variant::Config2, &[], &[], 10.0, Some(10.0));
        assert_eq!(net_export_balance(&s, 0, 0.0, 0.0).unwrap(), (0.0, 0.0));
        let s = scenario(Variant::Config3, &[], &[-5.0, 2.0], 10.0, Some(3.0));
        assert_eq!(net_export_balance(&s, 0, 4.0, 0.0).unwrap(), (8.0, 0.0));
    }

    #[test]
    fn net_export_errors() {
        let s = scenario(Variant::Config2, &[], &[], 150.0, Some(10.0));
        assert!(matches!(net_export_balance(&s, 0, 0.0, 0.0), Err(RecError::GridLimitExceeded { .. })));
        assert!(matches!(net_export_balance(&s, 0, -1.0, 0.0), Err(RecError::NegativeFlow(_))));
        assert!(net_export_balance(&s, 0, 5.0, 5.0).is_err());
    }

    fn tariffs(p_e: f64, t_i: f64) -> TariffSchedule {
        TariffSchedule {
            rates: IncentiveRates {
                restitution: 0.008,
                incentive: 0.110,
            },
            export_price: series(&[p_e]),
            import_tariff: series(&[t_i]),
        }
    }

    #[test]
    fn income_examples() {
        let f = HourlyFlows {
            e_export: 60.0,
            e_shared: 50.0,
            e_member_demand: 50.0,
            ..Default::default()
        };
        let inc = hourly_income(&f, &tariffs(0.100, 0.2), 0).unwrap();
        assert_abs_diff_eq!(inc.total, 11.90, epsilon = 1e-12);
        assert_abs_diff_eq!(inc.restitution_component, 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(inc.incentive_component, 5.5, epsilon = 1e-12);
        assert_abs_diff_eq!(inc.market_component, 6.0, epsilon = 1e-12);

        let zero = hourly_income(&HourlyFlows::default(), &tariffs(0.1, 0.2), 0).unwrap();
        assert_eq!(zero.total, 0.0);

        let f = HourlyFlows {
            e_import_common: 10.0,
            ..Default::default()
        };
        assert_abs_diff_eq!(hourly_income(&f, &tariffs(0.1, 0.200), 0).unwrap().total, -2.0, epsilon = 1e-12);
        assert!(matches!(hourly_income(&f, &tariffs(0.1, 0.2), 1), Err(RecError::HourOutOfRange { .. })));
    }

    proptest! {
        #[test]
        fn shared_energy_is_a_symmetric_minimum(a in 0.0f64..1e4, b in 0.0f64..1e4) {
            let s = shared_energy(a, b).unwrap();
            prop_assert_eq!(s, shared_energy(b, a).unwrap());
            prop_assert!(s <= a && s <= b);
            prop_assert_eq!(shared_energy(a, a).unwrap(), a);
        }

        #[test]
        fn net_export_never_both_positive(res in 0.0f64..50.0, load in 0.0f64..50.0, ch in 0.0f64..30.0, dsc in 0.0f64..30.0, charge in any::<bool>()) {
            let s = scenario(Variant::Config2, &[], &[], res, Some(load));
            let (ch, dsc) = if charge { (ch, 0.0) } else { (0.0, dsc) };
            let (e, i) = net_export_balance(&s, 0, ch, dsc).unwrap();
            prop_assert!(e == 0.0 || i == 0.0);
        }

        #[test]
        fn income_monotone(es in 0.0f64..100.0, ee in 0.0f64..100.0, d in 0.0f64..10.0,
                           p_e in 0.0f64..0.3, t_i in 0.0f64..0.3) {
            let t = tariffs(p_e, t_i);
            let base = HourlyFlows { e_shared: es, e_export: ee, ..Default::default() };
            let b = hourly_income(&base, &t, 0).unwrap().total;
            let more_shared = hourly_income(&HourlyFlows { e_shared: es + d, ..base }, &t, 0).unwrap().total;
            let more_export = hourly_income(&HourlyFlows { e_export: ee + d, ..base }, &t, 0).unwrap().total;
            prop_assert!(more_shared >= b && more_export >= b);
            let imp = HourlyFlows { e_shared: es, e_import_common: ee, ..Default::default() };
            let more_import = HourlyFlows { e_import_common: ee + d, ..imp };
            prop_assert!(hourly_income(&more_import, &t, 0).unwrap().total <= hourly_income(&imp, &t, 0).unwrap().total);
        }

        #[test]
        fn total_is_component_identity(es in 0.0f64..100.0, ee in 0.0f64..100.0, p_e in 0.0f64..0.3) {
            let f = HourlyFlows { e_shared: es, e_export: ee, ..Default::default() };
            let i = hourly_income(&f, &tariffs(p_e, 0.2), 0).unwrap();
            prop_assert_eq!(i.total, i.restitution_component + i.incentive_component + i.market_component - i.import_cost);
        }
    }
}
