//! Scenario configuration: a TOML file with flat keys plus `[solver]` and
//! `[t_grid]` sub-tables. Unknown keys are hard errors so a typo in a sweep
//! script cannot silently fall back to a default.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytic::FixedPointParams;
use crate::channel::{ChannelError, ChannelParams};
use crate::geometry::{GeometryError, SimWindow};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("failed to serialize config: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("could not read config file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Delay-bound grid specification for CDF tables.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TGridSpec {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
    pub spacing: Spacing,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Log,
    Linear,
}

impl Default for TGridSpec {
    fn default() -> Self {
        TGridSpec { start: 1.0, stop: 200.0, points: 60, spacing: Spacing::Log }
    }
}

impl TGridSpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.start >= 1.0) {
            return Err(ConfigError::Invalid(format!(
                "t_grid.start must be >= 1 slot, got {}",
                self.start
            )));
        }
        if !(self.stop > self.start) {
            return Err(ConfigError::Invalid("t_grid.stop must exceed t_grid.start".into()));
        }
        if self.points < 2 {
            return Err(ConfigError::Invalid("t_grid.points must be at least 2".into()));
        }
        Ok(())
    }

    /// Materialize the grid; endpoints are hit exactly.
    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let t = i as f64 / (n - 1) as f64;
            let v = match self.spacing {
                Spacing::Linear => self.start + (self.stop - self.start) * t,
                Spacing::Log => self.start * (self.stop / self.start).powf(t),
            };
            out.push(v);
        }
        out[0] = self.start;
        out[n - 1] = self.stop;
        out
    }
}

/// One experiment scenario: physics, traffic, horizons, and solver knobs.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    /// SAP density, per square meter.
    pub lambda_s: f64,
    /// UEs per cell.
    pub k_s: usize,
    /// Per-UE packet arrival probability per slot.
    pub xi: f64,
    /// SIR threshold in dB.
    pub theta_db: f64,
    /// Path-loss exponent.
    pub alpha: f64,
    /// Transmit power in dBm. SIR-invariant (equal powers cancel), accepted
    /// and logged for scenario fidelity.
    pub p_st_dbm: f64,
    /// Square window side in meters; simulated as a torus.
    pub window_side_m: f64,
    /// Area fraction of the centered measurement region.
    pub inner_fraction: f64,
    pub warmup_slots: u64,
    pub measure_slots: u64,
    pub realizations: usize,
    pub master_seed: u64,
    /// Whether the round-robin pointer advances on muted slots (the default)
    /// or only when the scheduled user transmitted.
    pub rr_advance_when_muted: bool,
    pub solver: FixedPointParams,
    pub t_grid: TGridSpec,
    /// Outage threshold in slots.
    pub t0: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            lambda_s: 1e-4,
            k_s: 3,
            xi: 0.05,
            theta_db: 0.0,
            alpha: 3.8,
            p_st_dbm: 23.0,
            window_side_m: 2000.0,
            inner_fraction: 0.5,
            warmup_slots: 2000,
            measure_slots: 10_000,
            realizations: 20,
            master_seed: 20_260_822,
            rr_advance_when_muted: true,
            solver: FixedPointParams::default(),
            t_grid: TGridSpec::default(),
            t0: 20.0,
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &str) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.to_string(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string_pretty(self)?)
    }

    /// Linear SIR threshold, `10^(theta_db/10)`; 0 dB maps to exactly 1.
    pub fn theta_linear(&self) -> f64 {
        10f64.powf(self.theta_db / 10.0)
    }

    pub fn channel_params(&self) -> Result<ChannelParams, ConfigError> {
        Ok(ChannelParams::from_db(self.alpha, self.theta_db, self.p_st_dbm)?)
    }

    pub fn window(&self) -> Result<SimWindow, ConfigError> {
        Ok(SimWindow::new(self.window_side_m, true, self.inner_fraction)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, v) in [
            ("lambda_s", self.lambda_s),
            ("window_side_m", self.window_side_m),
            ("alpha", self.alpha),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ConfigError::Invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.k_s == 0 {
            return Err(ConfigError::Invalid("k_s must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.xi) {
            return Err(ConfigError::Invalid(format!("xi must lie in [0,1], got {}", self.xi)));
        }
        if !(self.inner_fraction > 0.0 && self.inner_fraction <= 1.0) {
            return Err(ConfigError::Invalid(format!(
                "inner_fraction must lie in (0,1], got {}",
                self.inner_fraction
            )));
        }
        if self.measure_slots == 0 {
            return Err(ConfigError::Invalid("measure_slots must be positive".into()));
        }
        if self.realizations == 0 {
            return Err(ConfigError::Invalid("realizations must be positive".into()));
        }
        if !(self.t0 >= 1.0) {
            return Err(ConfigError::Invalid(format!("t0 must be >= 1 slot, got {}", self.t0)));
        }
        self.t_grid.validate()?;
        self.solver
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        // surface bad channel parameters (alpha <= 2 etc.) at config time
        self.channel_params()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_round_trip() {
        let cfg = ScenarioConfig::default();
        cfg.validate().unwrap();
        let text = cfg.to_toml_string().unwrap();
        let back = ScenarioConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn zero_db_threshold_is_exactly_one() {
        let cfg = ScenarioConfig::default();
        assert_eq!(cfg.theta_linear(), 1.0);
        assert_eq!(cfg.channel_params().unwrap().theta, 1.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ScenarioConfig::from_toml_str("lambda_ss = 1e-4\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse(_)));
        let err = ScenarioConfig::from_toml_str("[solver]\nfp_tolerance = 1e-6\n").unwrap_err();
        assert!(matches!(err, ConfigError::Parse(_)));
    }

    #[test]
    fn partial_files_inherit_defaults() {
        let cfg = ScenarioConfig::from_toml_str("xi = 0.2\nk_s = 5\n").unwrap();
        assert_eq!(cfg.xi, 0.2);
        assert_eq!(cfg.k_s, 5);
        assert_eq!(cfg.lambda_s, 1e-4);
        assert_eq!(cfg.solver, FixedPointParams::default());
    }

    #[test]
    fn invalid_values_are_rejected() {
        for text in [
            "xi = 1.5",
            "k_s = 0",
            "t0 = 0.5",
            "inner_fraction = 0.0",
            "alpha = 1.5",
            "[t_grid]\nstart = 0.1",
            "[t_grid]\nstart = 10.0\nstop = 2.0",
            "[solver]\nfp_tol = 1e-2",
        ] {
            assert!(ScenarioConfig::from_toml_str(text).is_err(), "accepted: {text}");
        }
    }

    #[test]
    fn t_grid_values_hit_endpoints() {
        let spec = TGridSpec { start: 1.0, stop: 100.0, points: 25, spacing: Spacing::Log };
        let v = spec.values();
        assert_eq!(v.len(), 25);
        assert_eq!(v[0], 1.0);
        assert_eq!(v[24], 100.0);
        for w in v.windows(2) {
            assert!(w[1] > w[0]);
        }
        let lin = TGridSpec { start: 1.0, stop: 5.0, points: 5, spacing: Spacing::Linear };
        assert_eq!(lin.values(), vec![1.0, 2.0, 3.0, 4.0, 5.0]);
    }
}
