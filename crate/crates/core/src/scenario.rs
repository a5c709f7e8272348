use chrono::{DateTime, Utc};

use crate::{BatterySpec, EnergySeries, RecError, TariffSchedule};

/// Community layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Common PV plant and battery; all members are consumers.
    Config1,
    /// As `Config1`, plus a load on the common property.
    Config2,
    /// As `Config2`, with some members owning their own generation (prosumers).
    Config3,
}

/// One community instance over a fixed hourly horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct RecScenario {
    pub variant: Variant,
    /// Consumer demand series, kWh.
    pub members: Vec<EnergySeries>,
    /// Prosumer net grid exchange, kWh; positive when importing. `Config3` only.
    pub prosumers: Vec<EnergySeries>,
    /// Demand of the common property's own load. Absent in `Config1`.
    pub common_load: Option<EnergySeries>,
    pub res_generation: EnergySeries,
    pub battery: BatterySpec,
    pub grid_limit_kwh: f64,
    pub tariffs: TariffSchedule,
}

impl RecScenario {
    pub fn validate(&self) -> Result<(), RecError> {
        let reference = &self.res_generation;
        let horizon = reference.len();
        let check = |s: &EnergySeries, what: &str| -> Result<(), RecError> {
            if !s.aligned_with(reference) {
                return Err(RecError::InvalidScenario(format!("{what} is not aligned with the RES series")));
            }
            Ok(())
        };
        if !reference.is_non_negative() {
            return Err(RecError::InvalidScenario("RES generation must be non-negative".into()));
        }
        for (j, m) in self.members.iter().enumerate() {
            check(m, &format!("member {j}"))?;
            if !m.is_non_negative() {
                return Err(RecError::InvalidScenario(format!("member {j} demand is negative")));
            }
        }
        for (j, p) in self.prosumers.iter().enumerate() {
            check(p, &format!("prosumer {j}"))?;
        }
        if let Some(l) = &self.common_load {
            check(l, "common load")?;
            if !l.is_non_negative() {
                return Err(RecError::InvalidScenario("common load must be non-negative".into()));
            }
        }
        check(&self.tariffs.export_price, "export price")?;
        check(&self.tariffs.import_tariff, "import tariff")?;
        match self.variant {
            Variant::Config1 if self.common_load.is_some() || !self.prosumers.is_empty() => {
                return Err(RecError::InvalidScenario("Config1 has neither a common load nor prosumers".into()));
            }
            Variant::Config2 if !self.prosumers.is_empty() => {
                return Err(RecError::InvalidScenario("Config2 has no prosumers".into()));
            }
            _ => {}
        }
        if !(self.grid_limit_kwh > 0.0 && self.grid_limit_kwh.is_finite()) {
            return Err(RecError::InvalidScenario("grid limit must be positive".into()));
        }
        self.battery.validate()?;
        self.tariffs.validate(horizon)
    }

    pub fn len(&self) -> usize {
        self.res_generation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.res_generation.is_empty()
    }

    pub fn start(&self) -> DateTime<Utc> {
        self.res_generation.start()
    }

    pub fn common_load_at(&self, hour: usize) -> Result<f64, RecError> {
        match &self.common_load {
            Some(l) => l.get(hour),
            None => {
                self.res_generation.get(hour)?;
                Ok(0.0)
            }
        }
    }
}
