//! Scenario configuration, loaded from TOML.
//!
//! ```toml
//! seed = 7
//! Q = 200
//!
//! [array]
//! M = 32
//! d_over_lambda = 0.5
//!
//! [users]
//! K = 3
//! angle_range = [30.0, 150.0]
//!
//! [power]
//! sigma_s_sq = "-180 dBm"
//! sigma_n_sq = "-191 dBm"
//! sigma_t_sq = 2.5e-18
//!
//! [pilots]
//! P = 100
//!
//! [solver]
//! N = 50
//! bias_ratio = 5.0
//! grid_size = 16384
//! ```

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::path::Path;

use crate::measurement::PilotKind;
use crate::phase_retrieval::{InitTruncation, RecoveryOptions};
use crate::scene::{PolarizationMode, SteeringConvention, UnitSystem};
use crate::{Error, Result};

use super::stats::Pairing;

/// Parses a power given either as a plain linear number or with a `dBm`
/// suffix (`-191 dBm` → 10^-19.1). A trailing `mW` marks a linear value
/// explicitly.
pub fn parse_power(text: &str) -> Result<f64> {
    let t = text.trim();
    let bad = || Error::Config(format!("cannot parse power {text:?}"));
    let value = if let Some(num) = t.strip_suffix("dBm").or_else(|| t.strip_suffix("dbm")) {
        let db: f64 = num.trim().parse().map_err(|_| bad())?;
        10f64.powf(db / 10.0)
    } else {
        let num = t.strip_suffix("mW").unwrap_or(t);
        num.trim().parse().map_err(|_| bad())?
    };
    if !(value >= 0.0) || !value.is_finite() {
        return Err(bad());
    }
    Ok(value)
}

/// Linear power (milliwatt-referenced, so 10^(dBm/10)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Power(pub f64);

impl Power {
    pub fn from_dbm(dbm: f64) -> Self {
        Power(10f64.powf(dbm / 10.0))
    }
}

impl Serialize for Power {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.0)
    }
}

impl<'de> Deserialize<'de> for Power {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) if x >= 0.0 && x.is_finite() => Ok(Power(x)),
            Raw::Num(x) => Err(serde::de::Error::custom(format!("invalid power {x}"))),
            Raw::Text(t) => parse_power(&t).map(Power).map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArrayConfig {
    #[serde(rename = "M")]
    pub elements: usize,
    pub d_over_lambda: f64,
    pub convention: SteeringConvention,
}

impl Default for ArrayConfig {
    fn default() -> Self {
        Self {
            elements: 32,
            d_over_lambda: 0.5,
            convention: SteeringConvention::Cosine,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UserConfig {
    #[serde(rename = "K")]
    pub count: usize,
    pub alpha: f64,
    /// Degrees.
    pub angle_range: [f64; 2],
    pub min_separation_deg: f64,
    pub polarization_mode: PolarizationMode,
}

impl Default for UserConfig {
    fn default() -> Self {
        Self {
            count: 3,
            alpha: 1.0,
            angle_range: [30.0, 150.0],
            min_separation_deg: 2.0,
            polarization_mode: PolarizationMode::PerUser,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerConfig {
    /// Total transmit power σ_s², split evenly across users.
    pub sigma_s_sq: Power,
    /// Atomic receiver shot noise σ_n².
    pub sigma_n_sq: Power,
    /// RF receiver thermal noise σ_t².
    pub sigma_t_sq: Power,
    pub units: UnitSystem,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self {
            sigma_s_sq: Power::from_dbm(-180.0),
            sigma_n_sq: Power::from_dbm(-191.0),
            sigma_t_sq: Power::from_dbm(-176.0),
            units: UnitSystem::Normalized,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PilotConfig {
    #[serde(rename = "P")]
    pub snapshots: usize,
    pub pilot_kind: PilotKind,
}

impl Default for PilotConfig {
    fn default() -> Self {
        Self {
            snapshots: 100,
            pilot_kind: PilotKind::UnitModulusRandomPhase,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(rename = "N")]
    pub iterations: usize,
    pub bias_ratio: f64,
    pub grid_size: usize,
    pub truncation: InitTruncation,
    pub early_exit_tol: Option<f64>,
    pub pairing: Pairing,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            iterations: 50,
            bias_ratio: 5.0,
            grid_size: 1 << 14,
            truncation: InitTruncation::Verbatim,
            early_exit_tol: None,
            pairing: Pairing::Sorted,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    #[serde(rename = "Q", alias = "trials")]
    pub trials: usize,
    pub array: ArrayConfig,
    pub users: UserConfig,
    pub power: PowerConfig,
    pub pilots: PilotConfig,
    pub solver: SolverConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 2024,
            trials: 200,
            array: ArrayConfig::default(),
            users: UserConfig::default(),
            power: PowerConfig::default(),
            pilots: PilotConfig::default(),
            solver: SolverConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn recovery_options(&self) -> RecoveryOptions {
        RecoveryOptions {
            iterations: self.solver.iterations,
            truncation: self.solver.truncation,
            early_exit_tol: self.solver.early_exit_tol,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        let (m, k, p) = (self.array.elements, self.users.count, self.pilots.snapshots);
        if m == 0 || k == 0 || p == 0 || self.trials == 0 || self.solver.grid_size == 0 {
            return fail("M, K, P, Q and grid_size must all be at least 1".into());
        }
        if k >= m {
            return fail(format!("K={k} must be smaller than M={m}"));
        }
        if p < k + 1 {
            return fail(format!("P={p} must be at least K+1={}", k + 1));
        }
        if self.solver.grid_size <= 2 * k {
            return fail("grid_size must exceed 2K".into());
        }
        let [lo, hi] = self.users.angle_range;
        if !(lo > 0.0 && hi < 180.0 && lo < hi) {
            return fail(format!("angle_range [{lo}, {hi}] must lie inside (0, 180) degrees"));
        }
        let sep = self.users.min_separation_deg;
        if !(sep >= 0.0) || sep * (k as f64 - 1.0) >= hi - lo {
            return fail(format!("cannot fit {k} users {sep} degrees apart in [{lo}, {hi}]"));
        }
        let powers = [self.power.sigma_s_sq.0, self.power.sigma_n_sq.0, self.power.sigma_t_sq.0];
        if powers.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
            return fail("powers must be finite and non-negative".into());
        }
        if !(self.power.sigma_s_sq.0 > 0.0) {
            return fail("sigma_s_sq must be positive".into());
        }
        if !(self.array.d_over_lambda > 0.0) {
            return fail("d_over_lambda must be positive".into());
        }
        if !(self.solver.bias_ratio >= 0.0) || !self.users.alpha.is_finite() || self.users.alpha == 0.0 {
            return fail("bias_ratio must be >= 0 and alpha nonzero".into());
        }
        if self.pilots.pilot_kind == PilotKind::Provided {
            return fail("pilot_kind \"provided\" cannot be used in generated scenarios".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_parsing() {
        assert!((parse_power("-191 dBm").unwrap() / 10f64.powf(-19.1) - 1.0).abs() < 1e-12);
        assert!((parse_power("-180dBm").unwrap() - 1e-18).abs() < 1e-30);
        assert_eq!(parse_power("2.5e-18").unwrap(), 2.5e-18);
        assert_eq!(parse_power("3 mW").unwrap(), 3.0);
        assert!(parse_power("loud").is_err());
        assert!(parse_power("-1").is_err());
    }

    #[test]
    fn defaults_follow_simulation_setup() {
        let cfg = ScenarioConfig::default();
        assert_eq!(cfg.array.elements, 32);
        assert_eq!(cfg.pilots.snapshots, 100);
        assert_eq!(cfg.solver.iterations, 50);
        assert_eq!(cfg.solver.grid_size, 16384);
        assert_eq!(cfg.users.angle_range, [30.0, 150.0]);
        assert!((cfg.power.sigma_n_sq.0 - 10f64.powf(-19.1)).abs() < 1e-32);
        assert!((cfg.power.sigma_t_sq.0 - 10f64.powf(-17.6)).abs() < 1e-30);
        cfg.validate().unwrap();
    }

    #[test]
    fn nested_toml_round_trip() {
        let text = r#"
            seed = 9
            Q = 12
            [array]
            M = 16
            [users]
            K = 2
            polarization_mode = "per_cell"
            [power]
            sigma_s_sq = "-170 dBm"
            sigma_t_sq = 1e-17
            [solver]
            N = 20
            truncation = "normalize_by_last"
        "#;
        let cfg = ScenarioConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.trials, 12);
        assert_eq!(cfg.array.elements, 16);
        assert_eq!(cfg.users.count, 2);
        assert_eq!(cfg.users.polarization_mode, PolarizationMode::PerCell);
        assert!((cfg.power.sigma_s_sq.0 - 1e-17).abs() < 1e-29);
        assert_eq!(cfg.power.sigma_t_sq.0, 1e-17);
        assert_eq!(cfg.solver.iterations, 20);
        assert_eq!(cfg.solver.truncation, InitTruncation::NormalizeByLast);
        let again = ScenarioConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn invalid_configs_rejected() {
        for bad in [
            "[users]\nK = 32",
            "[users]\nangle_range = [0.0, 150.0]",
            "[pilots]\nP = 3",
            "[power]\nsigma_n_sq = \"noise\"",
            "unknown_key = 1",
        ] {
            let err = ScenarioConfig::from_toml_str(bad).unwrap_err();
            assert_eq!(err.exit_code(), 1, "{bad}");
        }
    }
}
