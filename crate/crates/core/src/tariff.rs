use crate::{EnergySeries, RecError};

/// Converts €/MWh to the internal €/kWh.
pub fn eur_per_mwh(v: f64) -> f64 {
    v / 1000.0
}

/// The two Italian community types.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommunityKind {
    /// Collective self-consumption within one building.
    Auc,
    /// Renewable energy community spanning several buildings.
    Cer,
}

/// Per-kWh rates paid on shared energy: tariff restitution and incentive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncentiveRates {
    pub restitution: f64,
    pub incentive: f64,
}

impl IncentiveRates {
    pub fn per_shared_kwh(&self) -> f64 {
        self.restitution + self.incentive
    }
}

/// Restitution and incentive presets in €/kWh: AUC 10 + 100 €/MWh, CER 8 + 110 €/MWh.
pub fn tariff_preset(kind: CommunityKind) -> IncentiveRates {
    match kind {
        CommunityKind::Auc => IncentiveRates {
            restitution: eur_per_mwh(10.0),
            incentive: eur_per_mwh(100.0),
        },
        CommunityKind::Cer => IncentiveRates {
            restitution: eur_per_mwh(8.0),
            incentive: eur_per_mwh(110.0),
        },
    }
}

/// All prices in €/kWh.
#[derive(Debug, Clone, PartialEq)]
pub struct TariffSchedule {
    pub rates: IncentiveRates,
    /// Zonal market price paid for exported energy, per hour.
    pub export_price: EnergySeries,
    /// Tariff paid for energy imported by the common property, per hour.
    pub import_tariff: EnergySeries,
}

impl TariffSchedule {
    pub fn validate(&self, horizon: usize) -> Result<(), RecError> {
        let r = self.rates;
        if !(r.restitution >= 0.0 && r.incentive >= 0.0 && r.restitution.is_finite() && r.incentive.is_finite()) {
            return Err(RecError::InvalidTariff("restitution and incentive must be finite and non-negative".into()));
        }
        if self.export_price.len() != horizon || self.import_tariff.len() != horizon {
            return Err(RecError::InvalidTariff(format!(
                "price series lengths ({}, {}) differ from the scenario horizon {horizon}",
                self.export_price.len(),
                self.import_tariff.len()
            )));
        }
        Ok(())
    }
}
