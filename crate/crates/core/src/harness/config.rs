//! Experiment configuration: a TOML file mirroring the runtime structures,
//! with every field optional and defaulted.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::env::{CustomerModel, EnvConfig};
use crate::error::{Error, Result};
use crate::learner::Schedules;

/// Exogenous data sources and discretization settings. When a CSV path is
/// absent the corresponding seeded synthetic generator is used, so the full
/// experiment runs with zero external data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Hourly or half-hourly wind generation CSV (`day,hour,value` in kWh).
    pub wind_csv: Option<PathBuf>,
    /// Hourly or half-hourly grid price CSV (`day,hour,value` in euro/kWh).
    pub price_csv: Option<PathBuf>,
    /// Divisor turning fleet-level wind data into one station's share.
    pub wind_turbine_count: u32,
    pub solar_annual_kwh: f64,
    pub solar_peak_hour: f64,
    pub solar_sigma_hours: f64,
    pub renewable_levels: usize,
    pub price_levels: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            wind_csv: None,
            price_csv: None,
            wind_turbine_count: 1,
            solar_annual_kwh: 1000.0,
            solar_peak_hour: 13.5,
            solar_sigma_hours: 3.0,
            renewable_levels: 2,
            price_levels: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    /// Distinct data days in one training pass; 0 skips training entirely
    /// and evaluates the empty-table policy.
    pub days: usize,
    /// Passes over the day sequence.
    pub repetitions: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            days: 190,
            repetitions: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub days: usize,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig { days: 29 }
    }
}

/// [`Schedules`] with an optional horizon; when `t_total` is omitted it
/// defaults to the total number of training steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchedulesConfig {
    pub epsilon0: f64,
    pub epsilon_min: f64,
    pub beta0: f64,
    pub beta_min: f64,
    pub t_total: Option<u64>,
    pub gamma: f64,
    pub q0: f64,
}

impl Default for SchedulesConfig {
    fn default() -> Self {
        let s = Schedules::default();
        SchedulesConfig {
            epsilon0: s.epsilon0,
            epsilon_min: s.epsilon_min,
            beta0: s.beta0,
            beta_min: s.beta_min,
            t_total: None,
            gamma: s.gamma,
            q0: s.q0,
        }
    }
}

/// Everything a run needs; the TOML schema mirrors this struct section by
/// section ([station], [customers], [schedules], [data], [training],
/// [evaluation]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    /// Common battery capacity converting kWh data to SOC points.
    pub battery_capacity_kwh: f64,
    pub station: EnvConfig,
    pub customers: CustomerModel,
    pub schedules: SchedulesConfig,
    pub data: DataConfig,
    pub training: TrainingConfig,
    pub evaluation: EvaluationConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            master_seed: 1,
            battery_capacity_kwh: 24.0,
            station: EnvConfig::default(),
            customers: CustomerModel::default(),
            schedules: SchedulesConfig::default(),
            data: DataConfig::default(),
            training: TrainingConfig::default(),
            evaluation: EvaluationConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        let config: ExperimentConfig =
            toml::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    /// Schedules with the horizon resolved to the training step count when
    /// not set explicitly.
    pub fn schedules(&self) -> Schedules {
        let steps = (self.training.days * self.training.repetitions * 24) as u64;
        Schedules {
            epsilon0: self.schedules.epsilon0,
            epsilon_min: self.schedules.epsilon_min,
            beta0: self.schedules.beta0,
            beta_min: self.schedules.beta_min,
            t_total: self.schedules.t_total.unwrap_or(steps.max(1)),
            gamma: self.schedules.gamma,
            q0: self.schedules.q0,
        }
    }

    pub fn total_days(&self) -> usize {
        self.training.days + self.evaluation.days
    }

    pub fn validate(&self) -> Result<()> {
        self.station.validate()?;
        self.customers.validate()?;
        self.schedules().validate()?;
        if !self.battery_capacity_kwh.is_finite() || self.battery_capacity_kwh <= 0.0 {
            return Err(Error::config(format!(
                "battery_capacity_kwh must be > 0, got {}",
                self.battery_capacity_kwh
            )));
        }
        for (name, levels) in [
            ("renewable_levels", self.data.renewable_levels),
            ("price_levels", self.data.price_levels),
        ] {
            if !(2..=16).contains(&levels) {
                return Err(Error::config(format!(
                    "{name} must be in 2..=16, got {levels}"
                )));
            }
        }
        if self.data.wind_turbine_count == 0 {
            return Err(Error::config("wind_turbine_count must be >= 1".to_string()));
        }
        if self.data.solar_sigma_hours <= 0.0 || self.data.solar_annual_kwh < 0.0 {
            return Err(Error::config(
                "invalid solar profile parameters".to_string(),
            ));
        }
        if self.evaluation.days < 1 {
            return Err(Error::config("evaluation.days must be >= 1".to_string()));
        }
        if self.training.days > 0 && self.training.repetitions < 1 {
            return Err(Error::config(
                "training.repetitions must be >= 1 when training.days > 0".to_string(),
            ));
        }
        for path in [&self.data.wind_csv, &self.data.price_csv]
            .into_iter()
            .flatten()
        {
            if !path.exists() {
                return Err(Error::config(format!(
                    "referenced data file does not exist: {}",
                    path.display()
                )));
            }
        }
        Ok(())
    }

    /// SHA-256 over the canonical serialized form; any field change changes
    /// the digest.
    pub fn digest(&self) -> String {
        let canonical = toml::to_string(self).expect("config serializes");
        let hash = Sha256::digest(canonical.as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}
