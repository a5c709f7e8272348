use crate::RecError;

/// Tolerance on the SoC box used by [`BatterySpec::step`].
pub const SOC_TOL: f64 = 1e-9;

/// Community battery parameters. Energies in kWh, SoC as a fraction of capacity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatterySpec {
    pub capacity_kwh: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub eff_charge: f64,
    pub eff_discharge: f64,
    /// Largest energy the battery can exchange within one hour.
    pub hourly_limit_kwh: f64,
    pub soc_init: f64,
}

impl BatterySpec {
    /// 250 kWh, SoC in [0.05, 0.95], 95 % efficiencies, 60 kWh per hour, starting at mid-range.
    pub fn reference() -> Self {
        Self {
            capacity_kwh: 250.0,
            soc_min: 0.05,
            soc_max: 0.95,
            eff_charge: 0.95,
            eff_discharge: 0.95,
            hourly_limit_kwh: 60.0,
            soc_init: 0.5,
        }
    }

    /// A battery that cannot exchange energy.
    pub fn absent() -> Self {
        Self {
            hourly_limit_kwh: 0.0,
            ..Self::reference()
        }
    }

    pub fn validate(&self) -> Result<(), RecError> {
        let fail = |what: &str| Err(RecError::InvalidBattery(what.to_string()));
        let all = [
            self.capacity_kwh,
            self.soc_min,
            self.soc_max,
            self.eff_charge,
            self.eff_discharge,
            self.hourly_limit_kwh,
            self.soc_init,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return fail("all parameters must be finite");
        }
        if !(0.0 <= self.soc_min && self.soc_min < self.soc_max && self.soc_max <= 1.0) {
            return fail("need 0 <= soc_min < soc_max <= 1");
        }
        if !(self.eff_charge > 0.0 && self.eff_charge <= 1.0 && self.eff_discharge > 0.0 && self.eff_discharge <= 1.0) {
            return fail("efficiencies must lie in (0, 1]");
        }
        if self.capacity_kwh <= 0.0 {
            return fail("capacity must be positive");
        }
        if self.hourly_limit_kwh < 0.0 {
            return fail("hourly limit must be non-negative");
        }
        if self.soc_init < self.soc_min || self.soc_init > self.soc_max {
            return fail("initial SoC must lie within [soc_min, soc_max]");
        }
        Ok(())
    }

    /// SoC after one hour of charging `e_ch` or discharging `e_dsc` (kWh) from `soc`.
    ///
    /// No clamping: a result outside the SoC box (beyond [`SOC_TOL`]) is an error.
    pub fn step(&self, soc: f64, e_ch: f64, e_dsc: f64) -> Result<f64, RecError> {
        let limit = self.hourly_limit_kwh + 1e-9;
        if !(e_ch >= 0.0 && e_dsc >= 0.0) {
            return Err(RecError::NegativeFlow("battery exchange"));
        }
        if e_ch > limit || e_dsc > limit {
            return Err(RecError::BatteryLimitExceeded {
                e_ch,
                e_dsc,
                limit: self.hourly_limit_kwh,
            });
        }
        if e_ch * e_dsc > crate::COMPLEMENTARITY_TOL {
            return Err(RecError::SimultaneousChargeDischarge { e_ch, e_dsc });
        }
        let next = soc + (self.eff_charge * e_ch - e_dsc / self.eff_discharge) / self.capacity_kwh;
        if next < self.soc_min - SOC_TOL || next > self.soc_max + SOC_TOL {
            return Err(RecError::SocBoundViolated {
                soc: next,
                min: self.soc_min,
                max: self.soc_max,
            });
        }
        Ok(next)
    }

    /// Largest charge (kWh) that keeps the SoC at or below `soc_max`.
    pub fn charge_headroom(&self, soc: f64) -> f64 {
        ((self.soc_max - soc) * self.capacity_kwh / self.eff_charge).max(0.0)
    }

    /// Largest discharge (kWh) that keeps the SoC at or above `soc_min`.
    pub fn discharge_headroom(&self, soc: f64) -> f64 {
        ((soc - self.soc_min) * self.capacity_kwh * self.eff_discharge).max(0.0)
    }
}

/// Free-function form of [`BatterySpec::step`].
pub fn battery_step(spec: &BatterySpec, soc: f64, e_ch: f64, e_dsc: f64) -> Result<f64, RecError> {
    spec.step(soc, e_ch, e_dsc)
}
