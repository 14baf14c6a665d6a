//! JSON run configuration with defaulting and validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{Densities, FluidState, Formulation};
use crate::error::{HvbkError, Result};
use crate::gevrey::{GevreyParams, VorticityFloorParams};
use crate::harness::presets::{init_preset, measured_floor, IcParams};
use crate::integrator::{auto_dt, RunControls};

pub const CONFIG_VERSION: u32 = 1;

/// Initial-condition selector. Accepts either a bare preset name or `{name, params}`
/// and always serializes in the second form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "IcSpec")]
pub struct IcConfig {
    pub name: String,
    pub params: IcParams,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum IcSpec {
    Name(String),
    Full {
        name: String,
        #[serde(default)]
        params: IcParams,
    },
}

impl From<IcSpec> for IcConfig {
    fn from(s: IcSpec) -> Self {
        match s {
            IcSpec::Name(name) => IcConfig { name, params: IcParams::default() },
            IcSpec::Full { name, params } => IcConfig { name, params },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_diagnostics")]
    pub diagnostics: String,
    #[serde(default = "default_prefix")]
    pub snapshot_prefix: String,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_diagnostics() -> String {
    "diagnostics.csv".into()
}

fn default_prefix() -> String {
    "snapshot".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_dir(),
            diagnostics: default_diagnostics(),
            snapshot_prefix: default_prefix(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(default = "default_oversample")]
    pub oversample: usize,
    #[serde(default = "default_rho_s")]
    pub rho_s: f64,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default)]
    pub sigma0: Option<f64>,
    #[serde(rename = "C0", default = "one")]
    pub c0: f64,
    #[serde(rename = "C_ledger", default = "one")]
    pub c_ledger: f64,
    /// Replaced by the measured floor of the realized initial condition.
    #[serde(default)]
    pub m_i: Option<f64>,
    #[serde(default)]
    pub m_f: Option<f64>,
    /// `0` selects a CFL-style step from the initial state.
    #[serde(default)]
    pub dt: f64,
    #[serde(default = "one")]
    pub t_max: f64,
    #[serde(default)]
    pub formulation: Formulation,
    pub ic: IcConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputConfig,
    /// Snapshot period in steps, `0` for none.
    #[serde(default)]
    pub snapshot_every: usize,
    #[serde(default = "yes")]
    pub strict: bool,
    #[serde(default = "yes")]
    pub stop_on_floor: bool,
    #[serde(default = "yes")]
    pub stop_on_torque_budget: bool,
    #[serde(skip)]
    pub warnings: Vec<String>,
}

fn default_version() -> u32 {
    CONFIG_VERSION
}

fn default_oversample() -> usize {
    2
}

fn default_rho_s() -> f64 {
    0.5
}

fn default_p() -> f64 {
    2.6
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

/// Parse, resolve and validate a configuration file.
pub fn load_config(path: &Path) -> Result<SimConfig> {
    parse_config(path)?.resolve()
}

/// Parse without resolving, so callers can apply overrides that affect the initial condition.
pub fn parse_config(path: &Path) -> Result<SimConfig> {
    let text = std::fs::read_to_string(path)?;
    SimConfig::from_json(&text)
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SimConfig = serde_json::from_str(text)?;
        if cfg.version != CONFIG_VERSION {
            return Err(HvbkError::Format(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                cfg.version
            )));
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn initial_state(&self) -> Result<FluidState> {
        init_preset(&self.ic.name, &self.ic.params, self.n, self.seed)
    }

    /// Measure `m_i`, fill every default, then validate. Idempotent.
    pub fn resolve(mut self) -> Result<SimConfig> {
        let mut violations = Vec::new();
        if self.n == 0 {
            violations.push("N>=1 required".to_string());
        }
        if self.oversample == 0 {
            violations.push("oversample>=1 required".to_string());
        }
        if !violations.is_empty() {
            return Err(HvbkError::Config { violations });
        }
        let state = self.initial_state()?;
        let m_i = measured_floor(&state, self.oversample)?;
        if let Some(given) = self.m_i {
            if (given - m_i).abs() > 1e-12 * m_i.max(1.0) {
                self.warnings
                    .push(format!("configured m_i={given} replaced by measured floor {m_i}"));
            }
        }
        self.m_i = Some(m_i);
        let m_f = *self.m_f.get_or_insert(0.5 * m_i);
        if self.sigma0.is_none() && self.c0 > 0.0 {
            self.sigma0 = Some(0.2 * m_f / self.c0);
        }
        if self.dt == 0.0 {
            self.dt = auto_dt(&state)?;
        }
        let violations = self.violations();
        if !violations.is_empty() {
            return Err(HvbkError::Config { violations });
        }
        Ok(self)
    }

    /// Every violated invariant, named by the inequality it breaks.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.rho_s > 0.0 && self.rho_s < 1.0) {
            v.push(format!("0<rho_s<1 required (got {})", self.rho_s));
        }
        if self.strict && !(self.p > 2.5) {
            v.push(format!("p>5/2 required (got {})", self.p));
        }
        if !(self.p >= 0.0) {
            v.push(format!("p>=0 required (got {})", self.p));
        }
        if !(self.c_ledger > 0.0) {
            v.push(format!("C_ledger>0 required (got {})", self.c_ledger));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            v.push(format!("dt>0 required (got {})", self.dt));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            v.push(format!("t_max>0 required (got {})", self.t_max));
        }
        match (self.m_i, self.m_f, self.sigma0) {
            (Some(m_i), Some(m_f), Some(sigma0)) => {
                if !(m_f > 0.0) {
                    v.push(format!("m_f>0 required (got {m_f})"));
                }
                v.extend(VorticityFloorParams { m_i, m_f, c0: self.c0, sigma0 }.violations());
                if !(sigma0 < m_i / (2.0 * self.c0)) {
                    v.push(format!(
                        "sigma0<m_i/(2*C0) required (sigma0={sigma0}, m_i/(2*C0)={})",
                        m_i / (2.0 * self.c0)
                    ));
                }
            }
            _ => {
                if !(self.c0 > 0.0) {
                    v.push(format!("C0>0 required (got {})", self.c0));
                }
                v.push("m_i, m_f and sigma0 must be resolved".into());
            }
        }
        v
    }

    fn resolved(&self) -> Result<(f64, f64, f64)> {
        match (self.m_i, self.m_f, self.sigma0) {
            (Some(a), Some(b), Some(c)) => Ok((a, b, c)),
            _ => Err(HvbkError::Input("config has not been resolved".into())),
        }
    }

    pub fn densities(&self) -> Result<Densities> {
        Densities::from_superfluid(self.rho_s)
    }

    pub fn gevrey_params(&self) -> Result<GevreyParams> {
        GevreyParams::new(self.p, self.resolved()?.2, 0.0)
    }

    pub fn floor_params(&self) -> Result<VorticityFloorParams> {
        let (m_i, m_f, sigma0) = self.resolved()?;
        VorticityFloorParams::new(m_i, m_f, self.c0, sigma0)
    }

    pub fn run_controls(&self) -> Result<RunControls> {
        let mut rc = RunControls::new(self.dt, self.t_max, self.formulation, self.oversample)?;
        rc.stop_on_floor = self.stop_on_floor;
        rc.stop_on_torque_budget = self.stop_on_torque_budget;
        Ok(rc)
    }

    pub fn diagnostics_path(&self) -> PathBuf {
        self.output.dir.join(&self.output.diagnostics)
    }

    pub fn snapshot_path(&self, tag: &str) -> PathBuf {
        self.output.dir.join(format!("{}_{tag}.hvbk", self.output.snapshot_prefix))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn violations_of(text: &str) -> Vec<String> {
        match SimConfig::from_json(text).unwrap().resolve() {
            Err(HvbkError::Config { violations }) => violations,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_gets_default_table() {
        let c = SimConfig::from_json(r#"{"N":4,"ic":"beltrami_shear"}"#).unwrap().resolve().unwrap();
        assert_eq!(c.rho_s, 0.5);
        assert_eq!(c.p, 2.6);
        assert_eq!(c.c0, 1.0);
        assert_eq!(c.oversample, 2);
        let m_i = c.m_i.unwrap();
        assert!((m_i - 1.0).abs() < 1e-14);
        assert_eq!(c.m_f, Some(0.5 * m_i));
        assert!((c.sigma0.unwrap() - 0.4 * 0.5 * m_i / 1.0 * 0.5).abs() < 1e-15);
        assert!(c.dt > 0.0);
        assert_eq!(c.ic.params, IcParams::default());
        assert!(c.warnings.is_empty());
    }

    #[test]
    fn serialization_is_idempotent_after_defaulting() {
        let raw = r#"{"N":3,"ic":{"name":"random_analytic","params":{"epsilon":0.05}},"seed":4,"m_i":7.0}"#;
        let c = SimConfig::from_json(raw).unwrap().resolve().unwrap();
        assert_eq!(c.warnings.len(), 1);
        let once = c.to_json().unwrap();
        let again = SimConfig::from_json(&once).unwrap().resolve().unwrap();
        assert!(again.warnings.is_empty());
        assert_eq!(again.to_json().unwrap(), once);
    }

    #[test]
    fn floor_above_initial_is_named() {
        let v = violations_of(r#"{"N":2,"ic":"beltrami_shear","m_f":1.5}"#);
        assert!(v.iter().any(|s| s.starts_with("m_f<m_i required")), "{v:?}");
    }

    #[test]
    fn sigma_at_boundary_is_rejected() {
        // m_i = 1, C0 = 1, so the boundary is sigma0 = 0.5; m_f must exceed 2*C0*sigma0 = 1 first.
        let v = violations_of(r#"{"N":2,"ic":"beltrami_shear","sigma0":0.5,"m_f":0.9}"#);
        assert!(v.iter().any(|s| s.starts_with("sigma0<m_i/(2*C0) required")), "{v:?}");
        assert!(v.iter().any(|s| s.starts_with("2*C0*sigma0<m_f required")), "{v:?}");
    }

    #[test]
    fn every_violation_is_reported() {
        let v = violations_of(r#"{"N":2,"ic":"beltrami_shear","rho_s":1.2,"p":2.0,"t_max":-1}"#);
        for name in ["0<rho_s<1", "p>5/2", "t_max>0"] {
            assert!(v.iter().any(|s| s.starts_with(name)), "{name} missing from {v:?}");
        }
        let lax = SimConfig::from_json(r#"{"N":2,"ic":"beltrami_shear","p":2.0,"strict":false}"#).unwrap();
        assert!(lax.resolve().is_ok());
    }

    #[test]
    fn unknown_keys_and_versions_are_rejected() {
        assert!(SimConfig::from_json(r#"{"N":2,"ic":"beltrami_shear","dtt":1}"#).is_err());
        assert!(SimConfig::from_json(r#"{"version":2,"N":2,"ic":"beltrami_shear"}"#).is_err());
        let bad_ic = SimConfig::from_json(r#"{"N":2,"ic":"nope"}"#).unwrap();
        assert!(matches!(bad_ic.resolve(), Err(HvbkError::Input(_))));
    }
}
