//! Fixed-step RK4 time stepping with the shrinking-radius schedule and stopping events.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{energy_balance, DiagnosticsRecord};
use crate::dynamics::{
    min_vorticity_magnitude, rhs_velocity_form, rhs_vorticity_form, torque_params, Densities, FluidState,
    Formulation, RhsConfig,
};
use crate::error::{HvbkError, Result};
use crate::gevrey::{gevrey_norm, wiener_norm, GevreyParams, VorticityFloorParams};
use crate::spectral::{leray_project, to_physical, SpectralField};
use crate::vector::{norm, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    #[serde(rename = "T1")]
    T1,
    #[serde(rename = "TMAX")]
    Tmax,
    #[serde(rename = "T2")]
    T2,
    #[serde(rename = "TORQUE_BUDGET")]
    TorqueBudget,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StopReason::T1 => "T1",
            StopReason::Tmax => "TMAX",
            StopReason::T2 => "T2",
            StopReason::TorqueBudget => "TORQUE_BUDGET",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunControls {
    pub dt: f64,
    pub t_max: f64,
    pub formulation: Formulation,
    pub oversample: usize,
    /// Stop at the first accepted step whose vorticity minimum is below `m_f`.
    pub stop_on_floor: bool,
    /// Stop once the torque integral exceeds `(m_i − m_f)/2`.
    pub stop_on_torque_budget: bool,
}

impl RunControls {
    pub fn new(dt: f64, t_max: f64, formulation: Formulation, oversample: usize) -> Result<Self> {
        let rc = RunControls {
            dt,
            t_max,
            formulation,
            oversample,
            stop_on_floor: true,
            stop_on_torque_budget: true,
        };
        rc.validate()?;
        Ok(rc)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(HvbkError::Input(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_max > 0.0) {
            return Err(HvbkError::Input(format!("t_max must be positive, got {}", self.t_max)));
        }
        if self.oversample == 0 {
            return Err(HvbkError::Input("oversample must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerConstants {
    pub c_ledger: f64,
    pub x0: f64,
    pub ubar: f64,
    pub sigma0: f64,
    pub delta: f64,
    pub t1: f64,
}

/// Positive root of `2CX₀T² + 2CX₀(1+Ū)T − σ₀ = 0`, in the cancellation-free form.
pub fn t1_closed_form(c: f64, x0: f64, ubar: f64, sigma0: f64) -> f64 {
    let a = 2.0 * c * x0;
    let b = a * (1.0 + ubar);
    2.0 * sigma0 / (b + (b * b + 4.0 * a * sigma0).sqrt())
}

impl LedgerConstants {
    pub fn from_parts(c_ledger: f64, x0: f64, ubar: f64, sigma0: f64) -> Result<Self> {
        if !(c_ledger > 0.0) {
            return Err(HvbkError::Input(format!("C_ledger must be positive, got {c_ledger}")));
        }
        if !(x0.is_finite() && ubar.is_finite() && sigma0.is_finite()) {
            return Err(HvbkError::Input("ledger inputs must be finite".into()));
        }
        if !(sigma0 > 0.0) {
            return Err(HvbkError::Input(format!("sigma0 must be positive, got {sigma0}")));
        }
        let t1 = t1_closed_form(c_ledger, x0, ubar, sigma0);
        Ok(LedgerConstants {
            c_ledger,
            x0,
            ubar,
            sigma0,
            delta: sigma0 / t1,
            t1,
        })
    }

    /// Tracked radius `max(σ₀ − δt, 0)`.
    pub fn sigma_at(&self, t: f64) -> f64 {
        (self.sigma0 - self.delta * t).max(0.0)
    }

    /// `|T₁ − σ₀/(2CX₀(1+Ū+T₁))|`.
    pub fn fixed_point_residual(&self) -> f64 {
        (self.t1 - self.sigma0 / (2.0 * self.c_ledger * self.x0 * (1.0 + self.ubar + self.t1))).abs()
    }
}

/// `X₀` at `(p, σ₀)` and `Ū` from the initial state, then `T₁` and `δ`.
pub fn compute_ledger_constants(state0: &FluidState, gp: &GevreyParams, c_ledger: f64) -> Result<LedgerConstants> {
    let g = gp.with_r(0.0);
    let x0 = 1.0 + gevrey_norm(&state0.omega_s, &g)?.powi(2) + gevrey_norm(&state0.omega_n, &g)?.powi(2);
    let ubar = norm(&state0.mean_u_s) + norm(&state0.mean_u_n);
    LedgerConstants::from_parts(c_ledger, x0, ubar, gp.sigma)
}

fn reproject(mut w: SpectralField) -> SpectralField {
    w.zero_mean();
    let mut w = leray_project(&w);
    w.zero_mean();
    w
}

fn add3(a: &Vec3, s: f64, b: &Vec3) -> Vec3 {
    [a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2]]
}

fn rk4_vorticity(state: &FluidState, dt: f64, d: &Densities, cfg: &RhsConfig) -> Result<FluidState> {
    let stage = |c: f64, k: &crate::dynamics::VorticityRhs| -> Result<FluidState> {
        let mut ws = state.omega_s.clone();
        ws.axpy(c, &k.d_omega_s)?;
        let mut wn = state.omega_n.clone();
        wn.axpy(c, &k.d_omega_n)?;
        Ok(FluidState {
            omega_s: ws,
            omega_n: wn,
            mean_u_s: add3(&state.mean_u_s, c, &k.d_mean_s),
            mean_u_n: add3(&state.mean_u_n, c, &k.d_mean_n),
            t: state.t + c,
        })
    };
    let k1 = rhs_vorticity_form(state, d, cfg)?;
    let k2 = rhs_vorticity_form(&stage(0.5 * dt, &k1)?, d, cfg)?;
    let k3 = rhs_vorticity_form(&stage(0.5 * dt, &k2)?, d, cfg)?;
    let k4 = rhs_vorticity_form(&stage(dt, &k3)?, d, cfg)?;
    let h6 = dt / 6.0;
    let mut ws = state.omega_s.clone();
    let mut wn = state.omega_n.clone();
    let mut ms = state.mean_u_s;
    let mut mn = state.mean_u_n;
    for (w, k) in [(1.0, &k1), (2.0, &k2), (2.0, &k3), (1.0, &k4)] {
        ws.axpy(w * h6, &k.d_omega_s)?;
        wn.axpy(w * h6, &k.d_omega_n)?;
        ms = add3(&ms, w * h6, &k.d_mean_s);
        mn = add3(&mn, w * h6, &k.d_mean_n);
    }
    FluidState::new(reproject(ws), reproject(wn), ms, mn, state.t + dt)
}

fn rk4_velocity(state: &FluidState, dt: f64, d: &Densities, cfg: &RhsConfig) -> Result<FluidState> {
    let us = state.velocity_s()?;
    let un = state.velocity_n()?;
    let stage = |c: f64, k: &(SpectralField, SpectralField)| -> Result<FluidState> {
        let mut a = us.clone();
        a.axpy(c, &k.0)?;
        let mut b = un.clone();
        b.axpy(c, &k.1)?;
        FluidState::from_velocities(&a, &b, state.t + c)
    };
    let k1 = rhs_velocity_form(state, d, cfg)?;
    let k2 = rhs_velocity_form(&stage(0.5 * dt, &k1)?, d, cfg)?;
    let k3 = rhs_velocity_form(&stage(0.5 * dt, &k2)?, d, cfg)?;
    let k4 = rhs_velocity_form(&stage(dt, &k3)?, d, cfg)?;
    let h6 = dt / 6.0;
    let mut a = us.clone();
    let mut b = un.clone();
    for (w, k) in [(1.0, &k1), (2.0, &k2), (2.0, &k3), (1.0, &k4)] {
        a.axpy(w * h6, &k.0)?;
        b.axpy(w * h6, &k.1)?;
    }
    FluidState::from_velocities(&leray_project(&a), &leray_project(&b), state.t + dt)
}

/// One classical RK4 step of the chosen formulation; the result is re-projected.
pub fn rk4_step(
    state: &FluidState,
    dt: f64,
    d: &Densities,
    cfg: &RhsConfig,
    formulation: Formulation,
) -> Result<FluidState> {
    match formulation {
        Formulation::Vorticity => rk4_vorticity(state, dt, d, cfg),
        Formulation::Velocity => rk4_velocity(state, dt, d, cfg),
    }
}

/// `|E(t+dt) − E(t) + ∫D|` for one step, the integral by Simpson's rule with the midpoint
/// state taken from a half step.
pub fn energy_step_residual(
    state: &FluidState,
    dt: f64,
    d: &Densities,
    cfg: &RhsConfig,
    formulation: Formulation,
) -> Result<f64> {
    let (e0, d0) = energy_balance(state, d, cfg.oversample)?;
    let (_, dm) = energy_balance(&rk4_step(state, 0.5 * dt, d, cfg, formulation)?, d, cfg.oversample)?;
    let (e1, d1) = energy_balance(&rk4_step(state, dt, d, cfg, formulation)?, d, cfg.oversample)?;
    Ok((e1 - e0 + dt / 6.0 * (d0 + 4.0 * dm + d1)).abs())
}

/// Advective step `0.5·(2π/(2N+1)) / max|u|` over both fluids on the `2N+1` grid.
pub fn auto_dt(state: &FluidState) -> Result<f64> {
    let n = state.n();
    let m = 2 * n + 1;
    let mut speed = 0.0_f64;
    for u in [state.velocity_s()?, state.velocity_n()?] {
        speed = speed.max(to_physical(&u, m)?.values().iter().map(norm).fold(0.0, f64::max));
    }
    let h = std::f64::consts::TAU / m as f64;
    Ok(if speed > 0.0 { 0.5 * h / speed } else { 0.5 * h })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub final_state: FluidState,
    pub records: Vec<DiagnosticsRecord>,
    pub stop_reason: StopReason,
    pub t_end: f64,
    pub steps: usize,
    /// `(last time above m_f, first time at or below m_f)`, width at most `dt/100`.
    pub crossing_bracket: Option<(f64, f64)>,
    pub torque_budget: f64,
    pub torque_budget_exhausted_at: Option<f64>,
    /// Trapezoid integral of the Wiener norm of `∂_tω_s`, which dominates `sup_x |ω_s(t) − ω_s(0)|`.
    pub torque_wiener_integral: f64,
    pub warnings: Vec<String>,
}

struct Torque {
    gevrey: f64,
    wiener: f64,
}

fn torque_at(state: &FluidState, d: &Densities, gp: &GevreyParams, sigma: f64, cfg: &RhsConfig) -> Result<Torque> {
    let t = rhs_vorticity_form(state, d, cfg)?.d_omega_s;
    Ok(Torque {
        gevrey: gevrey_norm(&t, &torque_params(&gp.with_sigma(sigma)))?,
        wiener: wiener_norm(&t),
    })
}

pub fn run(
    state0: &FluidState,
    d: &Densities,
    gp: &GevreyParams,
    vf: &VorticityFloorParams,
    rc: &RunControls,
    lc: &LedgerConstants,
) -> Result<RunResult> {
    run_with_observer(state0, d, gp, vf, rc, lc, &mut |_, _, _| Ok(()))
}

/// As [`run`], calling `observer(step, state, record)` after every recorded state.
pub fn run_with_observer(
    state0: &FluidState,
    d: &Densities,
    gp: &GevreyParams,
    vf: &VorticityFloorParams,
    rc: &RunControls,
    lc: &LedgerConstants,
    observer: &mut dyn FnMut(usize, &FluidState, &DiagnosticsRecord) -> Result<()>,
) -> Result<RunResult> {
    rc.validate()?;
    let violations = vf.violations();
    if !violations.is_empty() {
        return Err(HvbkError::Config { violations });
    }
    if !(vf.sigma0 < vf.m_i / (2.0 * vf.c0)) {
        return Err(HvbkError::Precondition("sigma0<m_i/(2*C0) required".into()));
    }
    let (min0, node0) = min_vorticity_magnitude(&state0.omega_s, rc.oversample)?;
    if min0 < vf.m_i * (1.0 - 1e-12) {
        return Err(HvbkError::Precondition(format!(
            "initial vorticity minimum {min0:.6e} at node {node0:?} is below m_i={}",
            vf.m_i
        )));
    }

    let cfg = RhsConfig::new(Some(0.5 * vf.m_f), rc.oversample);
    let (horizon, horizon_reason) = if lc.t1 <= rc.t_max {
        (lc.t1, StopReason::T1)
    } else {
        (rc.t_max, StopReason::Tmax)
    };
    let budget = 0.5 * (vf.m_i - vf.m_f);
    let step = |s: &FluidState, h: f64| rk4_step(s, h, d, &cfg, rc.formulation);

    let mut state = state0.clone();
    let t0 = state0.t;
    let mut warnings = Vec::new();
    let mut torque = torque_at(&state, d, gp, lc.sigma_at(0.0), &cfg)?;
    let mut used = 0.0;
    let mut wiener_used = 0.0;
    let mut exhausted_at = None;
    let rec = DiagnosticsRecord::measure(&state, d, gp, lc.sigma_at(0.0), rc.oversample, 0.0)?;
    observer(0, &state, &rec)?;
    let mut records = vec![rec];
    let mut steps = 0;
    let mut crossing = None;
    let snap = 1e-9 * rc.dt;

    let stop_reason = loop {
        let elapsed = state.t - t0;
        if elapsed >= horizon - snap {
            break horizon_reason;
        }
        let h = rc.dt.min(horizon - elapsed);
        // Some(state) while the floor holds, None once it is crossed.
        let above = |s: Result<FluidState>| -> Result<Option<FluidState>> {
            match s {
                Ok(next) => {
                    let (m, _) = min_vorticity_magnitude(&next.omega_s, rc.oversample)?;
                    Ok((m >= vf.m_f).then_some(next))
                }
                Err(HvbkError::Singularity { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        };
        let attempt = step(&state, h);
        let next = if rc.stop_on_floor { above(attempt)? } else { Some(attempt?) };
        let Some(mut next) = next else {
            let (mut lo, mut hi) = (0.0, h);
            let mut lo_state = None;
            while hi - lo > rc.dt / 100.0 {
                let mid = 0.5 * (lo + hi);
                match above(step(&state, mid))? {
                    Some(s) => {
                        lo = mid;
                        lo_state = Some(s);
                    }
                    None => hi = mid,
                }
            }
            let base = state.t;
            if let Some(s) = lo_state {
                state = s;
                let rec = DiagnosticsRecord::measure(&state, d, gp, lc.sigma_at(state.t - t0), rc.oversample, used)?;
                steps += 1;
                observer(steps, &state, &rec)?;
                records.push(rec);
            }
            crossing = Some((base + lo, base + hi));
            break StopReason::T2;
        };
        if (next.t - t0 - horizon).abs() <= snap {
            next.t = t0 + horizon;
        }
        state = next;
        steps += 1;
        let elapsed = state.t - t0;
        let sigma = lc.sigma_at(elapsed);
        if sigma == 0.0 && !warnings.iter().any(|w: &String| w.starts_with("sigma reached 0")) {
            warnings.push(format!("sigma reached 0 at t={:.6}; Gevrey monitors reduce to Sobolev norms", state.t));
        }
        let next_torque = torque_at(&state, d, gp, sigma, &cfg)?;
        used += 0.5 * h * (torque.gevrey + next_torque.gevrey);
        wiener_used += 0.5 * h * (torque.wiener + next_torque.wiener);
        torque = next_torque;
        let rec = DiagnosticsRecord::measure(&state, d, gp, sigma, rc.oversample, used)?;
        observer(steps, &state, &rec)?;
        records.push(rec);
        if used > budget && exhausted_at.is_none() {
            exhausted_at = Some(state.t);
            if rc.stop_on_torque_budget {
                break StopReason::TorqueBudget;
            }
        }
    };

    Ok(RunResult {
        t_end: state.t,
        final_state: state,
        records,
        stop_reason,
        steps,
        crossing_bracket: crossing,
        torque_budget: budget,
        torque_budget_exhausted_at: exhausted_at,
        torque_wiener_integral: wiener_used,
        warnings,
    })
}
