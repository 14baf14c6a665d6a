//! Configuration, presets, persistent output and the single-run driver.

pub mod config;
pub mod io;
pub mod presets;

use serde::{Deserialize, Serialize};

use crate::diagnostics::gevrey_distance;
use crate::dynamics::FluidState;
use crate::error::{HvbkError, Result};
use crate::gevrey::{gevrey_norm, VorticityFloorParams};
use crate::integrator::{compute_ledger_constants, run_with_observer, LedgerConstants, RunResult, StopReason};
use crate::random::{analytic_solenoidal, trial_rng};
use crate::vector::norm;

pub use config::{load_config, parse_config, SimConfig};
pub use presets::{init_preset, IcParams};

pub const REPORT_FORMAT: &str = "hvbk-report/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format: String,
    pub stop_reason: StopReason,
    pub t_end: f64,
    pub steps: usize,
    pub dt: f64,
    pub m_i: f64,
    pub m_f: f64,
    pub ledger: LedgerConstants,
    pub torque_budget: f64,
    pub torque_budget_used: f64,
    pub torque_budget_exhausted_at: Option<f64>,
    pub torque_wiener_integral: f64,
    pub crossing_bracket: Option<(f64, f64)>,
    pub momentum_drift: f64,
    pub final_min_vort: f64,
    pub warnings: Vec<String>,
}

impl RunReport {
    fn new(cfg: &SimConfig, lc: &LedgerConstants, res: &RunResult) -> Result<Self> {
        let first = res.records.first().ok_or_else(|| HvbkError::Consistency("run produced no records".into()))?;
        let last = res.records.last().unwrap_or(first);
        let p0 = norm(&first.momentum);
        let dp = norm(&crate::vector::sub(&last.momentum, &first.momentum));
        let mut warnings = cfg.warnings.clone();
        warnings.extend(res.warnings.iter().cloned());
        Ok(RunReport {
            format: REPORT_FORMAT.into(),
            stop_reason: res.stop_reason,
            t_end: res.t_end,
            steps: res.steps,
            dt: cfg.dt,
            m_i: cfg.m_i.unwrap_or(f64::NAN),
            m_f: cfg.m_f.unwrap_or(f64::NAN),
            ledger: *lc,
            torque_budget: res.torque_budget,
            torque_budget_used: last.torque_budget_used,
            torque_budget_exhausted_at: res.torque_budget_exhausted_at,
            torque_wiener_integral: res.torque_wiener_integral,
            crossing_bracket: res.crossing_bracket,
            momentum_drift: if p0 > 0.0 { dp / p0 } else { dp },
            final_min_vort: last.min_vort,
            warnings,
        })
    }
}

#[derive(Clone, Debug)]
pub struct SimulationOutcome {
    pub report: RunReport,
    pub result: RunResult,
}

/// Integrate a resolved configuration without touching the filesystem.
pub fn run_config(cfg: &SimConfig) -> Result<(LedgerConstants, RunResult)> {
    run_config_observed(cfg, &mut |_, _| Ok(()))
}

fn run_config_observed(
    cfg: &SimConfig,
    observer: &mut dyn FnMut(usize, &FluidState) -> Result<()>,
) -> Result<(LedgerConstants, RunResult)> {
    let state0 = cfg.initial_state()?;
    run_from_state(cfg, &state0, &cfg.floor_params()?, observer)
}

fn run_from_state(
    cfg: &SimConfig,
    state0: &FluidState,
    vf: &VorticityFloorParams,
    observer: &mut dyn FnMut(usize, &FluidState) -> Result<()>,
) -> Result<(LedgerConstants, RunResult)> {
    let gp = cfg.gevrey_params()?;
    if cfg.strict {
        gp.check_strict()?;
    }
    let lc = compute_ledger_constants(state0, &gp, cfg.c_ledger)?;
    let res = run_with_observer(
        state0,
        &cfg.densities()?,
        &gp,
        vf,
        &cfg.run_controls()?,
        &lc,
        &mut |step, s, _| observer(step, s),
    )?;
    Ok((lc, res))
}

/// Run a resolved configuration, writing the diagnostics CSV, periodic and final
/// snapshots, and `report.json` under the output directory.
pub fn simulate(cfg: &SimConfig) -> Result<SimulationOutcome> {
    std::fs::create_dir_all(&cfg.output.dir)?;
    let every = cfg.snapshot_every;
    let (lc, result) = run_config_observed(cfg, &mut |step, s| {
        if every > 0 && step % every == 0 {
            io::write_snapshot(&cfg.snapshot_path(&format!("{step:06}")), s)?;
        }
        Ok(())
    })?;
    io::write_csv(&cfg.diagnostics_path(), &result.records)?;
    io::write_snapshot(&cfg.snapshot_path("final"), &result.final_state)?;
    let report = RunReport::new(cfg, &lc, &result)?;
    std::fs::write(cfg.output.dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    Ok(SimulationOutcome { report, result })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub epsilon: f64,
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
    pub t_star: f64,
    pub final_distance: f64,
    /// `max_t d(t)/ε`.
    pub observed_k: f64,
    /// Smallest `Λ ≥ 0` with `d(t) ≤ d(0)·e^{Λt}` at every recorded time.
    pub observed_lambda: f64,
}

/// Run `cfg` twice, the second time with `ω_s` shifted by a random solenoidal field of
/// Gevrey size `ε` (measured by [`gevrey_distance`]), and track the distance between runs.
pub fn perturbation_growth(cfg: &SimConfig, epsilon: f64, stream: u64) -> Result<PerturbationReport> {
    if !(epsilon > 0.0) {
        return Err(HvbkError::Input(format!("epsilon must be positive, got {epsilon}")));
    }
    let gp = cfg.gevrey_params()?;
    let base0 = cfg.initial_state()?;
    let dir = analytic_solenoidal(cfg.n, 0.3, &mut trial_rng(cfg.seed, 1000 + stream));
    let mut shifted = base0.omega_s.clone();
    shifted.axpy(1.0, &dir)?;
    let probe = FluidState::new(shifted, base0.omega_n.clone(), base0.mean_u_s, base0.mean_u_n, base0.t)?;
    let unit = gevrey_distance(&base0, &probe, &gp)?;
    if !(unit > 0.0) || gevrey_norm(&dir, &gp)? == 0.0 {
        return Err(HvbkError::Consistency("perturbation direction vanished".into()));
    }
    let mut w = base0.omega_s.clone();
    w.axpy(epsilon / unit, &dir)?;
    let pert0 = FluidState::new(w, base0.omega_n.clone(), base0.mean_u_s, base0.mean_u_n, base0.t)?;

    let vf = cfg.floor_params()?;
    let m_p = presets::measured_floor(&pert0, cfg.oversample)?;
    let vf_common = VorticityFloorParams { m_i: vf.m_i.min(m_p), ..vf };
    let mut a = Vec::new();
    let mut b = Vec::new();
    run_from_state(cfg, &base0, &vf_common, &mut |_, s| {
        a.push(s.clone());
        Ok(())
    })?;
    run_from_state(cfg, &pert0, &vf_common, &mut |_, s| {
        b.push(s.clone());
        Ok(())
    })?;
    let len = a.len().min(b.len());
    let mut times = Vec::with_capacity(len);
    let mut distances = Vec::with_capacity(len);
    for (x, y) in a.iter().zip(&b).take(len) {
        times.push(x.t - base0.t);
        distances.push(gevrey_distance(x, y, &gp)?);
    }
    let d0 = distances[0];
    let observed_k = distances.iter().fold(0.0f64, |m, d| m.max(d / epsilon));
    let observed_lambda = times
        .iter()
        .zip(&distances)
        .filter(|(t, _)| **t > 0.0)
        .fold(0.0f64, |m, (t, d)| m.max((d / d0).ln() / t));
    Ok(PerturbationReport {
        epsilon,
        t_star: *times.last().unwrap_or(&0.0),
        final_distance: *distances.last().unwrap_or(&d0),
        times,
        distances,
        observed_k,
        observed_lambda,
    })
}

/// Counterflow run used to estimate and check the frozen perturbation constants.
pub const PERTURBATION_REFERENCE: &str =
    r#"{"N":4,"ic":{"name":"counterflow","params":{"U":1.0}},"dt":0.01,"t_max":0.5,"C_ledger":1e-4,"stop_on_torque_budget":false}"#;

pub fn perturbation_reference_config() -> Result<SimConfig> {
    SimConfig::from_json(PERTURBATION_REFERENCE)?.resolve()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(dir: &std::path::Path, ic: &str) -> SimConfig {
        let text = format!(
            r#"{{"N":2,"ic":{ic},"dt":0.01,"t_max":0.05,"C_ledger":1e-4,"snapshot_every":2,"output":{{"dir":{:?}}}}}"#,
            dir.to_str().unwrap()
        );
        SimConfig::from_json(&text).unwrap().resolve().unwrap()
    }

    #[test]
    fn simulate_writes_all_outputs() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = small_config(tmp.path(), r#""beltrami_shear""#);
        let out = simulate(&cfg).unwrap();
        assert_eq!(out.report.stop_reason, StopReason::Tmax);
        assert_eq!(out.report.steps, 5);
        let rows = io::read_csv(&cfg.diagnostics_path()).unwrap();
        assert_eq!(rows.len(), 6);
        assert!(rows.windows(2).all(|w| w[1].t > w[0].t));
        for tag in ["000000", "000002", "000004", "final"] {
            assert!(cfg.snapshot_path(tag).exists(), "{tag}");
        }
        let back = io::read_snapshot(&cfg.snapshot_path("final")).unwrap().to_state().unwrap();
        assert_eq!(back.omega_s, out.result.final_state.omega_s);
        let report: RunReport =
            serde_json::from_str(&std::fs::read_to_string(tmp.path().join("report.json")).unwrap()).unwrap();
        assert_eq!(report.format, REPORT_FORMAT);
        assert_eq!(report, out.report);
    }

    #[test]
    fn perturbation_starts_at_epsilon() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = small_config(tmp.path(), r#"{"name":"counterflow","params":{"U":0.5}}"#);
        let r = perturbation_growth(&cfg, 1e-6, 0).unwrap();
        assert!((r.distances[0] - 1e-6).abs() < 1e-12);
        assert!(r.final_distance < 1e-4);
        assert!(r.observed_k >= 1.0 - 1e-9);
    }
}
